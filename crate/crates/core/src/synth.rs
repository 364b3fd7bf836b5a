//! Synthetic sensing-task population.
//!
//! Legitimate tasks and empirically designed ("original") fake tasks are
//! drawn from fixed per-class feature distributions. Tasks are then encoded
//! into `[-1, 1]` feature rows and split into train/test partitions.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of model features per task (everything except id and legitimacy).
pub const FEATURE_COUNT: usize = 11;

/// Model feature order. Matches the task field order with `id` and
/// `legitimacy` removed.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "latitude",
    "longitude",
    "day",
    "hour",
    "minute",
    "duration",
    "remaining_time",
    "battery_pct",
    "coverage",
    "grid_number",
    "on_peak_hour",
];

/// Column index of the only boolean feature.
pub const ON_PEAK_FEATURE: usize = 10;

/// Dataset CSV header: the 13 task fields followed by the provenance column.
pub const DATASET_CSV_HEADER: [&str; 14] = [
    "id",
    "latitude",
    "longitude",
    "day",
    "hour",
    "minute",
    "duration",
    "remaining_time",
    "battery_pct",
    "coverage",
    "legitimacy",
    "grid_number",
    "on_peak_hour",
    "provenance",
];

pub const DURATIONS: [u32; 6] = [10, 20, 30, 40, 50, 60];

/// Where a row came from. Labels are always derived from this tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Legitimate,
    OriginalFake,
    AdversarialFake,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Legitimate => "legitimate",
            Origin::OriginalFake => "original_fake",
            Origin::AdversarialFake => "adversarial_fake",
        }
    }

    /// Legitimacy label (1 = legitimate, 0 = fake).
    pub fn legitimacy_label(self) -> u8 {
        match self {
            Origin::Legitimate => 1,
            Origin::OriginalFake | Origin::AdversarialFake => 0,
        }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Origin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "legitimate" => Ok(Origin::Legitimate),
            "original_fake" => Ok(Origin::OriginalFake),
            "adversarial_fake" => Ok(Origin::AdversarialFake),
            other => Err(Error::Data(format!("unknown origin tag `{other}`"))),
        }
    }
}

/// One sensing service request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensingTask {
    pub id: u64,
    pub latitude: f64,
    pub longitude: f64,
    pub day: u32,
    pub hour: u32,
    pub minute: u32,
    /// Minutes, one of [`DURATIONS`].
    pub duration: u32,
    /// Minutes.
    pub remaining_time: u32,
    pub battery_pct: u32,
    /// Recruitment radius in meters.
    pub coverage: f64,
    pub grid_number: u32,
    pub on_peak_hour: bool,
    pub legitimacy: bool,
    /// Meters. Generated for completeness; not a model feature and not part
    /// of the dataset CSV.
    #[serde(default)]
    pub movement_radius: f64,
}

impl SensingTask {
    pub fn origin(&self) -> Origin {
        if self.legitimacy {
            Origin::Legitimate
        } else {
            Origin::OriginalFake
        }
    }

    /// Raw numeric feature vector in [`FEATURE_NAMES`] order.
    pub fn raw_features(&self) -> [f64; FEATURE_COUNT] {
        [
            self.latitude,
            self.longitude,
            f64::from(self.day),
            f64::from(self.hour),
            f64::from(self.minute),
            f64::from(self.duration),
            f64::from(self.remaining_time),
            f64::from(self.battery_pct),
            self.coverage,
            f64::from(self.grid_number),
            if self.on_peak_hour { 1.0 } else { 0.0 },
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl Default for BoundingBox {
    /// Rectangle around Clarence-Rockland, Ontario.
    fn default() -> Self {
        BoundingBox {
            lat_min: 45.40,
            lat_max: 45.60,
            lon_min: -75.40,
            lon_max: -75.00,
        }
    }
}

impl BoundingBox {
    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        (self.lat_min..=self.lat_max).contains(&lat) && (self.lon_min..=self.lon_max).contains(&lon)
    }

    /// Row-major cell index on a `resolution x resolution` grid. Points on the
    /// upper edges fall in the last row/column.
    pub fn cell_index(&self, lat: f64, lon: f64, resolution: u32) -> u32 {
        let axis = |v: f64, lo: f64, hi: f64| -> u32 {
            let t = ((v - lo) / (hi - lo) * f64::from(resolution)).floor();
            (t.max(0.0) as u32).min(resolution - 1)
        };
        axis(lat, self.lat_min, self.lat_max) * resolution + axis(lon, self.lon_min, self.lon_max)
    }
}

/// How `remaining_time` is derived from a task's duration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemainingTimeRule {
    /// A freshly submitted task has its whole duration left.
    #[default]
    FullDuration,
    /// Uniform integer in `[1, duration]`.
    UniformWithinDuration,
}

/// Explicit per-class test-set sizes, overriding the proportional split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCounts {
    pub legitimate: usize,
    pub fake: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    pub total_tasks: usize,
    pub fake_fraction: f64,
    pub bounding_box: BoundingBox,
    /// Cells per axis.
    pub grid_resolution: u32,
    /// Inclusive hour range counted as on-peak.
    pub on_peak_window: (u32, u32),
    /// Meters, inclusive.
    pub movement_radius_range: (f64, f64),
    pub remaining_time: RemainingTimeRule,
    /// Train fraction.
    pub split_ratio: f64,
    pub test_counts: Option<TestCounts>,
    pub rng_seed: u64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            total_tasks: 14_484,
            fake_fraction: 1_897.0 / 14_484.0,
            bounding_box: BoundingBox::default(),
            grid_resolution: 10,
            on_peak_window: (7, 17),
            movement_radius_range: (10.0, 80.0),
            remaining_time: RemainingTimeRule::FullDuration,
            split_ratio: 0.8,
            test_counts: None,
            rng_seed: 0,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.total_tasks == 0 {
            return bad("total_tasks must be positive".into());
        }
        if !(self.fake_fraction > 0.0 && self.fake_fraction < 1.0) {
            return bad(format!("fake_fraction must lie in (0, 1), got {}", self.fake_fraction));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return bad(format!("split_ratio must lie in (0, 1), got {}", self.split_ratio));
        }
        let b = &self.bounding_box;
        if !(b.lat_min < b.lat_max && b.lon_min < b.lon_max) {
            return bad(format!("degenerate bounding box {b:?}"));
        }
        if self.grid_resolution == 0 {
            return bad("grid_resolution must be positive".into());
        }
        let (start, end) = self.on_peak_window;
        if start > end || end > 23 {
            return bad(format!("on_peak_window ({start}, {end}) is not an hour range"));
        }
        let (lo, hi) = self.movement_radius_range;
        if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
            return bad(format!("movement_radius_range ({lo}, {hi}) is invalid"));
        }
        let (legit, fake) = self.class_sizes();
        if fake == 0 || legit == 0 {
            return bad(format!(
                "{} tasks at fake_fraction {} leaves a class empty",
                self.total_tasks, self.fake_fraction
            ));
        }
        if let Some(tc) = self.test_counts {
            if tc.fake == 0 || tc.legitimate == 0 || tc.fake >= fake || tc.legitimate >= legit {
                return bad(format!(
                    "test_counts {tc:?} do not fit class sizes (legitimate {legit}, fake {fake})"
                ));
            }
        }
        Ok(())
    }

    /// (legitimate, fake) population sizes.
    pub fn class_sizes(&self) -> (usize, usize) {
        let fake = (self.total_tasks as f64 * self.fake_fraction).round() as usize;
        let fake = fake.min(self.total_tasks);
        (self.total_tasks - fake, fake)
    }

    pub fn is_on_peak(&self, hour: u32) -> bool {
        (self.on_peak_window.0..=self.on_peak_window.1).contains(&hour)
    }
}

fn fake_hour(rng: &mut impl Rng) -> u32 {
    if rng.random_bool(0.8) {
        rng.random_range(7..=11)
    } else {
        rng.random_range(12..=17)
    }
}

fn legitimate_hour(rng: &mut impl Rng) -> u32 {
    if rng.random_bool(0.08) {
        rng.random_range(0..=5)
    } else {
        rng.random_range(6..=23)
    }
}

fn fake_duration(rng: &mut impl Rng) -> u32 {
    let long = rng.random_bool(0.7);
    let pick = rng.random_range(0..3);
    if long {
        DURATIONS[3 + pick]
    } else {
        DURATIONS[pick]
    }
}

fn fake_battery(rng: &mut impl Rng) -> u32 {
    if rng.random_bool(0.8) {
        rng.random_range(7..=10)
    } else {
        rng.random_range(1..=6)
    }
}

/// Draws the full task population. The output is a pure function of `config`.
pub fn generate_tasks(config: &GenerationConfig) -> Result<Vec<SensingTask>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let (legit, fake) = config.class_sizes();

    let mut legitimacy: Vec<bool> = std::iter::repeat_n(true, legit)
        .chain(std::iter::repeat_n(false, fake))
        .collect();
    legitimacy.shuffle(&mut rng);

    let bbox = config.bounding_box;
    let (radius_lo, radius_hi) = config.movement_radius_range;
    let tasks = legitimacy
        .into_iter()
        .enumerate()
        .map(|(i, legitimate)| {
            let latitude = rng.random_range(bbox.lat_min..=bbox.lat_max);
            let longitude = rng.random_range(bbox.lon_min..=bbox.lon_max);
            let day = rng.random_range(1..=6);
            let (hour, duration, battery_pct) = if legitimate {
                let hour = legitimate_hour(&mut rng);
                let duration = DURATIONS[rng.random_range(0..DURATIONS.len())];
                (hour, duration, rng.random_range(1..=10))
            } else {
                let hour = fake_hour(&mut rng);
                let duration = fake_duration(&mut rng);
                (hour, duration, fake_battery(&mut rng))
            };
            let minute = rng.random_range(0..=59);
            let coverage = rng.random_range(30.0..=100.0);
            let remaining_time = match config.remaining_time {
                RemainingTimeRule::FullDuration => duration,
                RemainingTimeRule::UniformWithinDuration => rng.random_range(1..=duration),
            };
            let movement_radius = rng.random_range(radius_lo..=radius_hi);
            SensingTask {
                id: i as u64,
                latitude,
                longitude,
                day,
                hour,
                minute,
                duration,
                remaining_time,
                battery_pct,
                coverage,
                grid_number: bbox.cell_index(latitude, longitude, config.grid_resolution),
                on_peak_hour: config.is_on_peak(hour),
                legitimacy: legitimate,
                movement_radius,
            }
        })
        .collect();
    Ok(tasks)
}

/// Per-feature min/max fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRange {
    pub feature: String,
    pub min: f64,
    pub max: f64,
}

/// Min-max scaler mapping each feature onto `[-1, 1]`.
///
/// Serializes as a JSON array of `{feature, min, max}` objects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureScaler {
    ranges: Vec<FeatureRange>,
}

impl FeatureScaler {
    pub fn fit(tasks: &[SensingTask]) -> Result<Self> {
        if tasks.is_empty() {
            return Err(Error::Data("cannot fit a scaler on zero tasks".into()));
        }
        let mut min = [f64::INFINITY; FEATURE_COUNT];
        let mut max = [f64::NEG_INFINITY; FEATURE_COUNT];
        for task in tasks {
            for (j, v) in task.raw_features().into_iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        let ranges = FEATURE_NAMES
            .iter()
            .enumerate()
            .map(|(j, name)| FeatureRange {
                feature: (*name).to_string(),
                min: min[j],
                max: max[j],
            })
            .collect();
        Ok(FeatureScaler { ranges })
    }

    pub fn ranges(&self) -> &[FeatureRange] {
        &self.ranges
    }

    fn check_layout(&self) -> Result<()> {
        let names_match = self.ranges.len() == FEATURE_COUNT
            && self.ranges.iter().zip(FEATURE_NAMES).all(|(r, n)| r.feature == n);
        if names_match {
            Ok(())
        } else {
            Err(Error::Data("scaler feature list does not match the task feature layout".into()))
        }
    }

    /// Scales one raw value. Constant training features encode to 0; the
    /// boolean feature always maps to -1/+1.
    pub fn scale(&self, feature: usize, raw: f64) -> f64 {
        if feature == ON_PEAK_FEATURE {
            return if raw >= 0.5 { 1.0 } else { -1.0 };
        }
        let r = &self.ranges[feature];
        let span = r.max - r.min;
        if span <= 0.0 {
            0.0
        } else {
            2.0 * (raw - r.min) / span - 1.0
        }
    }

    pub fn unscale(&self, feature: usize, encoded: f64) -> f64 {
        if feature == ON_PEAK_FEATURE {
            return if encoded >= 0.0 { 1.0 } else { 0.0 };
        }
        let r = &self.ranges[feature];
        r.min + (encoded + 1.0) * 0.5 * (r.max - r.min)
    }

    pub fn transform(&self, tasks: &[SensingTask]) -> Array2<f64> {
        let mut out = Array2::zeros((tasks.len(), FEATURE_COUNT));
        for (mut row, task) in out.rows_mut().into_iter().zip(tasks) {
            for (j, v) in task.raw_features().into_iter().enumerate() {
                row[j] = self.scale(j, v);
            }
        }
        out
    }

    /// Maps an encoded row back to raw feature values.
    pub fn inverse(&self, row: &[f64]) -> Result<[f64; FEATURE_COUNT]> {
        if row.len() != FEATURE_COUNT {
            return Err(Error::Shape(format!(
                "encoded row has {} values, expected {FEATURE_COUNT}",
                row.len()
            )));
        }
        let mut out = [0.0; FEATURE_COUNT];
        for (j, v) in row.iter().enumerate() {
            out[j] = self.unscale(j, *v);
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let scaler: FeatureScaler = serde_json::from_str(text)?;
        scaler.check_layout()?;
        Ok(scaler)
    }
}

#[derive(Debug, Clone)]
pub struct EncodedTasks {
    pub features: Array2<f64>,
    /// 1 = legitimate, 0 = fake.
    pub labels: Vec<u8>,
    pub scaler: FeatureScaler,
}

/// Encodes tasks as numeric rows. Without a scaler one is fitted on `tasks`;
/// a supplied scaler is applied unchanged.
pub fn encode(tasks: &[SensingTask], scaler: Option<&FeatureScaler>) -> Result<EncodedTasks> {
    if tasks.is_empty() {
        return Err(Error::Data("cannot encode an empty task list".into()));
    }
    let scaler = match scaler {
        Some(s) => {
            s.check_layout()?;
            s.clone()
        }
        None => FeatureScaler::fit(tasks)?,
    };
    Ok(EncodedTasks {
        features: scaler.transform(tasks),
        labels: tasks.iter().map(|t| t.origin().legitimacy_label()).collect(),
        scaler,
    })
}

/// One side of a train/test split.
#[derive(Debug, Clone)]
pub struct Partition {
    /// Task ids, ascending.
    pub ids: Vec<u64>,
    pub features: Array2<f64>,
    pub labels: Vec<u8>,
    pub provenance: Vec<Origin>,
}

impl Partition {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn count(&self, origin: Origin) -> usize {
        self.provenance.iter().filter(|o| **o == origin).count()
    }

    /// Rows tagged with `origin`, in partition order.
    pub fn rows_of(&self, origin: Origin) -> Array2<f64> {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| self.provenance[i] == origin).collect();
        self.features.select(ndarray::Axis(0), &idx)
    }

    pub fn fake_fraction(&self) -> f64 {
        self.count(Origin::OriginalFake) as f64 / self.len() as f64
    }
}

#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Partition,
    pub test: Partition,
    pub scaler: FeatureScaler,
}

/// Test-set size per class. Proportional allocation with largest remainders,
/// then at least one row per class on each side when the class allows it.
fn stratified_test_counts(class_sizes: [usize; 2], split_ratio: f64) -> [usize; 2] {
    let total: usize = class_sizes.iter().sum();
    let test_total = total - (total as f64 * split_ratio).round() as usize;
    let exact: Vec<f64> = class_sizes
        .iter()
        .map(|&n| n as f64 * test_total as f64 / total as f64)
        .collect();
    let mut counts = [exact[0].floor() as usize, exact[1].floor() as usize];
    let mut leftover = test_total - counts[0] - counts[1];
    let mut order = [0usize, 1];
    // Larger remainder first; class 0 wins ties.
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &c in order.iter().cycle() {
        if leftover == 0 {
            break;
        }
        counts[c] += 1;
        leftover -= 1;
    }
    for c in 0..2 {
        let other = 1 - c;
        if counts[c] == 0 && class_sizes[c] >= 2 && counts[other] > 1 {
            counts[c] += 1;
            counts[other] -= 1;
        }
        if counts[c] == class_sizes[c] && class_sizes[c] >= 2 && class_sizes[other] > counts[other] {
            counts[c] -= 1;
            counts[other] += 1;
        }
    }
    counts
}

/// Stratified train/test split. Scaler is fitted on the train partition only.
pub fn split(tasks: &[SensingTask], config: &GenerationConfig) -> Result<DatasetSplit> {
    if !(config.split_ratio > 0.0 && config.split_ratio < 1.0) {
        return Err(Error::Config(format!("split_ratio must lie in (0, 1), got {}", config.split_ratio)));
    }
    // Class 0 = legitimate, class 1 = fake.
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, t) in tasks.iter().enumerate() {
        by_class[usize::from(!t.legitimacy)].push(i);
    }
    let sizes = [by_class[0].len(), by_class[1].len()];
    let test_counts = match config.test_counts {
        Some(tc) => [tc.legitimate, tc.fake],
        None => stratified_test_counts(sizes, config.split_ratio),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    rng.set_stream(1);
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for (class, members) in by_class.iter_mut().enumerate() {
        let n_test = test_counts[class];
        if n_test == 0 || n_test >= members.len() {
            let name = if class == 0 { "legitimate" } else { "fake" };
            return Err(Error::Data(format!(
                "split leaves the {name} class empty in one partition ({} rows, {n_test} for test)",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        test_idx.extend_from_slice(&members[..n_test]);
        train_idx.extend_from_slice(&members[n_test..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();

    let pick = |idx: &[usize]| -> Vec<SensingTask> { idx.iter().map(|&i| tasks[i].clone()).collect() };
    let train_tasks = pick(&train_idx);
    let test_tasks = pick(&test_idx);
    let train_enc = encode(&train_tasks, None)?;
    let test_enc = encode(&test_tasks, Some(&train_enc.scaler))?;

    let partition = |tasks: &[SensingTask], enc: EncodedTasks| Partition {
        ids: tasks.iter().map(|t| t.id).collect(),
        features: enc.features,
        labels: enc.labels,
        provenance: tasks.iter().map(SensingTask::origin).collect(),
    };
    Ok(DatasetSplit {
        train: partition(&train_tasks, train_enc.clone()),
        test: partition(&test_tasks, test_enc),
        scaler: train_enc.scaler,
    })
}

pub fn write_dataset_csv(path: &Path, tasks: &[SensingTask]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(DATASET_CSV_HEADER)?;
    for t in tasks {
        w.write_record([
            t.id.to_string(),
            t.latitude.to_string(),
            t.longitude.to_string(),
            t.day.to_string(),
            t.hour.to_string(),
            t.minute.to_string(),
            t.duration.to_string(),
            t.remaining_time.to_string(),
            t.battery_pct.to_string(),
            t.coverage.to_string(),
            u8::from(t.legitimacy).to_string(),
            t.grid_number.to_string(),
            u8::from(t.on_peak_hour).to_string(),
            t.origin().to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_dataset_csv(path: &Path) -> Result<Vec<SensingTask>> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    if header.iter().ne(DATASET_CSV_HEADER) {
        return Err(Error::Data(format!("{}: unexpected dataset header", path.display())));
    }
    let parse_err = |field: &str, v: &str| Error::Data(format!("bad {field} value `{v}`"));
    let mut tasks = Vec::new();
    for record in r.records() {
        let rec = record?;
        let get = |i: usize| rec.get(i).unwrap_or_default();
        macro_rules! num {
            ($i:expr, $t:ty) => {
                get($i).parse::<$t>().map_err(|_| parse_err(DATASET_CSV_HEADER[$i], get($i)))?
            };
        }
        let flag = |i: usize| match get(i) {
            "1" => Ok(true),
            "0" => Ok(false),
            v => Err(parse_err(DATASET_CSV_HEADER[i], v)),
        };
        tasks.push(SensingTask {
            id: num!(0, u64),
            latitude: num!(1, f64),
            longitude: num!(2, f64),
            day: num!(3, u32),
            hour: num!(4, u32),
            minute: num!(5, u32),
            duration: num!(6, u32),
            remaining_time: num!(7, u32),
            battery_pct: num!(8, u32),
            coverage: num!(9, f64),
            legitimacy: flag(10)?,
            grid_number: num!(11, u32),
            on_peak_hour: flag(12)?,
            movement_radius: 0.0,
        });
    }
    Ok(tasks)
}
