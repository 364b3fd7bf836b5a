//! End-to-end experiment: dataset synthesis, per-round GAN training,
//! flat/cascade evaluation of every classifier, and report emission.
//!
//! Round `r` trains its GAN with seed `gan.seed + r`; the dataset and the
//! level-2 classifiers are shared by all rounds. Output layout:
//!
//! ```text
//! <out>/dataset.csv  scaler.json  gan_loss.csv  report.json  report.csv
//! <out>/classifier_<clf>.json  report_<clf>_<arch>.json
//! <out>/round_NN/generator.json  discriminator.json  gan_loss.csv
//! <out>/round_NN/verdicts_<clf>_<arch>.csv   (or failed.json)
//! ```

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::{build_mixed, classify_flat, classify_mixed_with, write_verdicts_csv, MixedDataset};
use crate::classifiers::{fit, ClassifierKind, TrainedClassifier};
use crate::error::{Error, Result};
use crate::gan::{probe_accuracy, train_gan, write_loss_history, GanConfig, GanModel, LossRecord, TrainingCorpus};
use crate::metrics::{tally, Architecture, FailedRound, MetricReport, PairTallies, RoundCounts};
use crate::seeds::derive_seed;
use crate::synth::{generate_tasks, split, write_dataset_csv, DatasetSplit, GenerationConfig, Origin, TestCounts};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Full,
    DatagenOnly,
    TrainOnly,
    EvalOnly,
    Sweep,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Full => "full",
            Mode::DatagenOnly => "datagen-only",
            Mode::TrainOnly => "train-only",
            Mode::EvalOnly => "eval-only",
            Mode::Sweep => "sweep",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Mode::Full, Mode::DatagenOnly, Mode::TrainOnly, Mode::EvalOnly, Mode::Sweep]
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Paper,
    Desk,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Preset::Paper),
            "desk" => Ok(Preset::Desk),
            _ => Err(Error::Config(format!("unknown preset `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub batch_sizes: Vec<usize>,
    pub epochs: Vec<usize>,
    /// Each grid point trains for `round(epochs * budget_fraction)` epochs
    /// (at least one).
    pub budget_fraction: f64,
    /// Generated rows in the probe set.
    pub probe_size: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            batch_sizes: GanConfig::BATCH_GRID.to_vec(),
            epochs: GanConfig::EPOCH_GRID.to_vec(),
            budget_fraction: 0.1,
            probe_size: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub generation: GenerationConfig,
    pub gan: GanConfig,
    pub classifiers: Vec<ClassifierKind>,
    pub rounds: usize,
    /// Generated rows injected into the mixed dataset each round.
    pub synthetic_count: usize,
    pub disc_threshold: f64,
    pub output_dir: PathBuf,
    pub mode: Mode,
    /// Run rounds (and sweep points) on the rayon pool.
    pub parallel: bool,
    pub sweep: SweepConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig::preset(Preset::Paper)
    }
}

impl ExperimentConfig {
    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::Paper => ExperimentConfig {
                generation: GenerationConfig {
                    test_counts: Some(TestCounts {
                        legitimate: 2_506,
                        fake: 391,
                    }),
                    ..GenerationConfig::default()
                },
                gan: GanConfig::default(),
                classifiers: ClassifierKind::defaults(),
                rounds: 20,
                synthetic_count: 2_000,
                disc_threshold: crate::cascade::DEFAULT_THRESHOLD,
                output_dir: PathBuf::from("out"),
                mode: Mode::Full,
                parallel: true,
                sweep: SweepConfig::default(),
            },
            Preset::Desk => {
                let paper = ExperimentConfig::preset(Preset::Paper);
                ExperimentConfig {
                    generation: GenerationConfig {
                        total_tasks: 2_000,
                        test_counts: None,
                        ..paper.generation
                    },
                    gan: GanConfig {
                        epochs: 500,
                        ..paper.gan
                    },
                    rounds: 5,
                    synthetic_count: 300,
                    sweep: SweepConfig {
                        budget_fraction: 0.02,
                        probe_size: 200,
                        ..SweepConfig::default()
                    },
                    ..paper
                }
            }
        }
    }

    /// Preset, then a (partial) JSON document layered on top.
    pub fn from_json_over(preset: Preset, json: &str) -> Result<Self> {
        let mut base = serde_json::to_value(ExperimentConfig::preset(preset))?;
        let overlay: serde_json::Value = serde_json::from_str(json)?;
        merge_json(&mut base, overlay);
        Ok(serde_json::from_value(base)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.generation.validate()?;
        if self.rounds == 0 {
            return Err(Error::Config("rounds must be at least 1".into()));
        }
        if self.classifiers.is_empty() && matches!(self.mode, Mode::Full | Mode::EvalOnly) {
            return Err(Error::Config("no classifiers configured".into()));
        }
        for c in &self.classifiers {
            c.validate()?;
        }
        if !(0.0..=1.0).contains(&self.disc_threshold) {
            return Err(Error::Config(format!("disc_threshold {} outside [0, 1]", self.disc_threshold)));
        }
        if self.mode == Mode::Sweep {
            let s = &self.sweep;
            if s.batch_sizes.is_empty() || s.epochs.is_empty() {
                return Err(Error::Config("sweep grid is empty".into()));
            }
            if !(s.budget_fraction > 0.0 && s.budget_fraction <= 1.0) {
                return Err(Error::Config(format!("budget_fraction {} outside (0, 1]", s.budget_fraction)));
            }
        }
        Ok(())
    }

    pub fn round_seed(&self, round: usize) -> u64 {
        self.gan.seed.wrapping_add(round as u64)
    }

    pub fn round_dir(&self, round: usize) -> PathBuf {
        self.output_dir.join(format!("round_{round:02}"))
    }
}

fn merge_json(base: &mut serde_json::Value, overlay: serde_json::Value) {
    match (base, overlay) {
        (serde_json::Value::Object(b), serde_json::Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge_json(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Rows the GAN learns to imitate.
pub fn gan_corpus(split: &DatasetSplit, corpus: TrainingCorpus) -> Array2<f64> {
    match corpus {
        TrainingCorpus::FakeOnly => split.train.rows_of(Origin::OriginalFake),
        TrainingCorpus::FullTrain => split.train.features.clone(),
    }
}

/// Verdicts for one classifier in one round.
#[derive(Debug, Clone)]
pub struct ClassifierRound {
    pub classifier: String,
    pub cascade: Vec<crate::cascade::CascadeVerdict>,
    pub flat: Vec<crate::cascade::CascadeVerdict>,
}

#[derive(Debug, Clone)]
pub struct RoundResult {
    pub round: usize,
    pub history: Vec<LossRecord>,
    pub mixed: MixedDataset,
    pub classifiers: Vec<ClassifierRound>,
}

/// Everything `run` produced, besides the files.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: Option<MetricReport>,
    pub sweep: Option<SweepReport>,
    pub rounds: Vec<RoundResult>,
    pub failed: Vec<FailedRound>,
}

struct Prepared {
    split: DatasetSplit,
    classifiers: Vec<TrainedClassifier>,
}

fn prepare(config: &ExperimentConfig, write_files: bool, fit_classifiers: bool) -> Result<Prepared> {
    let tasks = generate_tasks(&config.generation)?;
    let split = split(&tasks, &config.generation)?;
    let out = &config.output_dir;
    if write_files {
        write_dataset_csv(&out.join("dataset.csv"), &tasks)?;
        write_text(&out.join("scaler.json"), &split.scaler.to_json()?)?;
    }
    let mut classifiers = Vec::new();
    if fit_classifiers {
        for &kind in &config.classifiers {
            let clf = fit(kind, &split.train.features, &split.train.labels)?;
            if write_files {
                let ckpt = serde_json::to_string(&clf.to_checkpoint("dataset.csv"))?;
                write_text(&out.join(format!("classifier_{}.json", kind.short_name())), &ckpt)?;
            }
            classifiers.push(clf);
        }
    }
    Ok(Prepared { split, classifiers })
}

enum RoundError {
    /// Training diverged or otherwise failed; the round is excluded.
    Excluded(FailedRound),
    /// Anything else aborts the run.
    Fatal(Error),
}

impl From<Error> for RoundError {
    fn from(e: Error) -> Self {
        RoundError::Fatal(e)
    }
}

const FAILED_MARKER: &str = "failed.json";

fn obtain_gan(config: &ExperimentConfig, corpus: &Array2<f64>, round: usize) -> Result<GanModel, RoundError> {
    let dir = config.round_dir(round);
    if config.mode == Mode::EvalOnly {
        let marker = dir.join(FAILED_MARKER);
        if marker.exists() {
            let text = fs::read_to_string(&marker).map_err(|e| Error::io(&marker, e))?;
            let failed: FailedRound = serde_json::from_str(&text).map_err(Error::from)?;
            return Err(RoundError::Excluded(failed));
        }
        if !dir.join("generator.json").exists() {
            return Err(RoundError::Fatal(Error::Config(format!(
                "eval-only mode needs checkpoints in {}",
                dir.display()
            ))));
        }
        return Ok(GanModel::load(&dir, config.gan.epochs.max(1))?);
    }

    create_dir(&dir)?;
    let gan_config = GanConfig {
        seed: config.round_seed(round),
        ..config.gan.clone()
    };
    match train_gan(corpus, &gan_config) {
        Ok(gan) => {
            gan.save(&dir)?;
            Ok(gan)
        }
        Err(e) => {
            let failed = FailedRound {
                round,
                error: e.to_string(),
            };
            write_text(&dir.join(FAILED_MARKER), &serde_json::to_string_pretty(&failed).map_err(Error::from)?)?;
            Err(RoundError::Excluded(failed))
        }
    }
}

fn run_round(config: &ExperimentConfig, prep: &Prepared, corpus: &Array2<f64>, round: usize) -> Result<RoundResult, RoundError> {
    let gan = obtain_gan(config, corpus, round)?;
    let dir = config.round_dir(round);
    let mut result = RoundResult {
        round,
        history: gan.history.clone(),
        mixed: MixedDataset {
            rows: Array2::zeros((0, prep.split.test.features.ncols())),
            origin: Vec::new(),
        },
        classifiers: Vec::new(),
    };
    if config.mode == Mode::TrainOnly {
        return Ok(result);
    }
    let synthetic = gan.generate(
        config.synthetic_count,
        derive_seed(config.round_seed(round), "synthetic"),
    )?;
    let mixed = build_mixed(&prep.split.test, &synthetic)?;
    for clf in &prep.classifiers {
        let name = clf.kind().short_name();
        let cascade = classify_mixed_with(&mixed, &gan, clf, config.disc_threshold)?;
        let flat = classify_flat(&mixed, clf)?;
        write_verdicts_csv(&dir.join(format!("verdicts_{name}_cascade.csv")), &cascade)?;
        write_verdicts_csv(&dir.join(format!("verdicts_{name}_flat.csv")), &flat)?;
        result.classifiers.push(ClassifierRound {
            classifier: name.to_string(),
            cascade,
            flat,
        });
    }
    result.mixed = mixed;
    Ok(result)
}

/// Runs the configured mode and writes its artifacts under `output_dir`.
pub fn run(config: &ExperimentConfig) -> Result<RunOutcome> {
    config.validate()?;
    create_dir(&config.output_dir)?;
    if config.mode == Mode::Sweep {
        let sweep = sweep(config)?;
        return Ok(RunOutcome {
            report: None,
            sweep: Some(sweep),
            rounds: Vec::new(),
            failed: Vec::new(),
        });
    }

    let fit_classifiers = matches!(config.mode, Mode::Full | Mode::EvalOnly);
    let prep = prepare(config, config.mode != Mode::EvalOnly, fit_classifiers)?;
    if config.mode == Mode::DatagenOnly {
        return Ok(RunOutcome {
            report: None,
            sweep: None,
            rounds: Vec::new(),
            failed: Vec::new(),
        });
    }
    let corpus = gan_corpus(&prep.split, config.gan.corpus);

    let outcomes: Vec<Result<RoundResult, RoundError>> = if config.parallel {
        (0..config.rounds)
            .into_par_iter()
            .map(|r| run_round(config, &prep, &corpus, r))
            .collect()
    } else {
        (0..config.rounds).map(|r| run_round(config, &prep, &corpus, r)).collect()
    };

    let mut rounds = Vec::new();
    let mut failed = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => rounds.push(r),
            Err(RoundError::Excluded(f)) => failed.push(f),
            Err(RoundError::Fatal(e)) => return Err(e),
        }
    }
    if rounds.is_empty() {
        let detail = failed.first().map_or_else(String::new, |f| format!(": {}", f.error));
        return Err(Error::Data(format!("every round failed{detail}")));
    }
    if config.mode != Mode::EvalOnly {
        write_loss_history(&config.output_dir.join("gan_loss.csv"), &rounds[0].history)?;
    }
    if config.mode == Mode::TrainOnly {
        return Ok(RunOutcome {
            report: None,
            sweep: None,
            rounds,
            failed,
        });
    }

    let report = build_report(config, &rounds, failed.clone())?;
    let out = &config.output_dir;
    write_text(&out.join("report.json"), &report.to_json()?)?;
    report.write_csv(&out.join("report.csv"))?;
    for m in &report.results {
        let path = out.join(format!("report_{}_{}.json", m.classifier, m.architecture));
        write_text(&path, &serde_json::to_string_pretty(m)?)?;
    }
    Ok(RunOutcome {
        report: Some(report),
        sweep: None,
        rounds,
        failed,
    })
}

/// Per-pair round tallies, in classifier order with flat before cascade.
pub fn pair_tallies(config: &ExperimentConfig, rounds: &[RoundResult]) -> Vec<PairTallies> {
    let mut pairs = Vec::new();
    for kind in &config.classifiers {
        let name = kind.short_name();
        for arch in [Architecture::Flat, Architecture::Cascade] {
            let counts: Vec<RoundCounts> = rounds
                .iter()
                .filter_map(|r| r.classifiers.iter().find(|c| c.classifier == name))
                .map(|c| match arch {
                    Architecture::Flat => tally(&c.flat),
                    Architecture::Cascade => tally(&c.cascade),
                })
                .collect();
            pairs.push(PairTallies {
                classifier: name.to_string(),
                architecture: arch,
                rounds: counts,
            });
        }
    }
    pairs
}

fn build_report(config: &ExperimentConfig, rounds: &[RoundResult], failed: Vec<FailedRound>) -> Result<MetricReport> {
    let completed = rounds.iter().map(|r| r.round).collect();
    MetricReport::build(completed, failed, &pair_tallies(config, rounds))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub batch_size: usize,
    pub epochs: usize,
    pub trained_epochs: usize,
    pub probe_accuracy: f64,
    pub final_losses: Option<LossRecord>,
    /// Grid point used for the paper's reported results.
    pub paper_choice: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    /// Grid points in grid order (batch size major).
    pub points: Vec<SweepPoint>,
    /// Indices into `points`, best probe accuracy first; ties keep grid order.
    pub ranking: Vec<usize>,
}

impl SweepReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["rank", "batch_size", "epochs", "trained_epochs", "probe_accuracy", "paper_choice"])?;
        for (rank, &i) in self.ranking.iter().enumerate() {
            let p = &self.points[i];
            w.write_record([
                (rank + 1).to_string(),
                p.batch_size.to_string(),
                p.epochs.to_string(),
                p.trained_epochs.to_string(),
                p.probe_accuracy.to_string(),
                p.paper_choice.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Budgeted epoch count for one sweep grid point.
pub fn sweep_epochs(epochs: usize, budget_fraction: f64) -> usize {
    ((epochs as f64 * budget_fraction).round() as usize).max(1)
}

/// Probe set for ranking sweep points: held-out real rows of the class the
/// GAN imitates.
pub fn sweep_probe_rows(split: &DatasetSplit, corpus: TrainingCorpus) -> Array2<f64> {
    match corpus {
        TrainingCorpus::FakeOnly => split.test.rows_of(Origin::OriginalFake),
        TrainingCorpus::FullTrain => split.test.features.clone(),
    }
}

/// Trains one GAN per (batch size, epochs) grid point on a reduced budget
/// and ranks the points by discriminator probe accuracy.
pub fn sweep(config: &ExperimentConfig) -> Result<SweepReport> {
    config.validate()?;
    let prep = prepare(config, false, false)?;
    let corpus = gan_corpus(&prep.split, config.gan.corpus);
    let probe_real = sweep_probe_rows(&prep.split, config.gan.corpus);
    let s = &config.sweep;
    let grid: Vec<(usize, usize)> = s
        .batch_sizes
        .iter()
        .flat_map(|&b| s.epochs.iter().map(move |&e| (b, e)))
        .collect();

    let eval_point = |&(batch_size, epochs): &(usize, usize)| -> Result<SweepPoint> {
        let gan_config = GanConfig {
            batch_size,
            epochs: sweep_epochs(epochs, s.budget_fraction),
            ..config.gan.clone()
        };
        let gan = train_gan(&corpus, &gan_config)?;
        let generated = gan.generate(s.probe_size, derive_seed(config.gan.seed, "sweep/probe"))?;
        Ok(SweepPoint {
            batch_size,
            epochs,
            trained_epochs: gan_config.epochs,
            probe_accuracy: probe_accuracy(&gan, &probe_real, &generated.rows)?,
            final_losses: gan.history.last().copied(),
            paper_choice: batch_size == 32 && epochs == 2000,
        })
    };
    let points: Vec<SweepPoint> = if config.parallel {
        grid.par_iter().map(eval_point).collect::<Result<_>>()?
    } else {
        grid.iter().map(eval_point).collect::<Result<_>>()?
    };

    let mut ranking: Vec<usize> = (0..points.len()).collect();
    ranking.sort_by(|&a, &b| {
        points[b]
            .probe_accuracy
            .total_cmp(&points[a].probe_accuracy)
            .then(a.cmp(&b))
    });
    let report = SweepReport { points, ranking };
    write_text(&config.output_dir.join("sweep.json"), &serde_json::to_string_pretty(&report)?)?;
    report.write_csv(&config.output_dir.join("sweep.csv"))?;
    Ok(report)
}

/// Human-readable summary of the averaged report, in the layout of the
/// detection-rate comparison table.
pub fn format_summary(report: &MetricReport) -> String {
    let mut classifiers: Vec<&str> = Vec::new();
    for r in &report.results {
        if !classifiers.contains(&r.classifier.as_str()) {
            classifiers.push(&r.classifier);
        }
    }
    let mut s = String::new();
    s.push_str(&format!(
        "rounds completed: {}  failed: {}\n",
        report.rounds_completed.len(),
        report.rounds_failed.len()
    ));
    if let Some(d) = &report.discriminator {
        let c = &d.counts;
        s.push_str("discriminator (mean counts)\n");
        s.push_str(&format!(
            "  real as real:   original fake {:.1}  legitimate {:.1}\n",
            c.real_as_real_original_fake, c.real_as_real_legitimate
        ));
        s.push_str(&format!(
            "  real as adver.: original fake {:.1}  legitimate {:.1}\n",
            c.real_as_adversarial_original_fake, c.real_as_adversarial_legitimate
        ));
        s.push_str(&format!(
            "  adversarial:    as real {:.1}  as adversarial {:.1}\n",
            c.adversarial_as_real, c.adversarial_as_adversarial
        ));
        s.push_str(&format!(
            "  eliminated: original fake {:.1}%  legitimate {:.1}%  adversarial fake {:.1}%\n",
            100.0 * d.elimination.original_fake,
            100.0 * d.elimination.legitimate,
            100.0 * d.elimination.adversarial_fake
        ));
    }
    s.push_str(&format!("{:<8}{:<9}{:<15}", "metric", "arch", "by"));
    for c in &classifiers {
        s.push_str(&format!("{c:>8}"));
    }
    s.push('\n');
    type Pick = fn(&crate::metrics::ArchitectureMetrics) -> f64;
    let rows: [(&str, Architecture, &str, Pick); 9] = [
        ("AASR", Architecture::Flat, "classifier", |m| m.aasr),
        ("AASR", Architecture::Cascade, "finally", |m| m.aasr),
        ("AADR", Architecture::Flat, "classifier", |m| m.aadr.total),
        ("AADR", Architecture::Cascade, "discriminator", |m| m.aadr.discriminator),
        ("AADR", Architecture::Cascade, "finally", |m| m.aadr.total),
        ("OADR", Architecture::Flat, "classifier", |m| m.oadr.total),
        ("OADR", Architecture::Cascade, "discriminator", |m| m.oadr.discriminator),
        ("OADR", Architecture::Cascade, "classifier", |m| m.oadr.classifier),
        ("OADR", Architecture::Cascade, "finally", |m| m.oadr.total),
    ];
    for (metric, arch, by, pick) in rows {
        s.push_str(&format!("{metric:<8}{:<9}{by:<15}", arch.as_str()));
        for c in &classifiers {
            match report.get(c, arch) {
                Some(m) => s.push_str(&format!("{:>8.3}", pick(m))),
                None => s.push_str(&format!("{:>8}", "-")),
            }
        }
        s.push('\n');
    }
    s
}
