//! C ABI over `taskguard`.
//!
//! Every entry point returns a [`TgStatus`]. On failure, the message is kept
//! in a thread-local slot readable through [`tg_last_error_message`]. Objects
//! cross the boundary as opaque handles that the caller frees with the
//! matching `*_free` function. Matrices are row-major `double` buffers.
//!
//! Panics never unwind into C: they are caught and reported as
//! `TG_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use ndarray::{Array2, ArrayView2};

use taskguard::classifiers::{fit, ClassifierKind, TrainedClassifier};
use taskguard::experiment::{gan_corpus, run, ExperimentConfig, Preset};
use taskguard::gan::{train_gan, GanConfig, GanModel};
use taskguard::metrics::{aadr, aasr, oadr, RoundCounts};
use taskguard::synth::{generate_tasks, split, DatasetSplit, GenerationConfig, Partition, FEATURE_COUNT};
use taskguard::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Data = 4,
    Divergence = 5,
    Io = 6,
    Untrained = 7,
    Panic = 8,
}

/// Which side of the train/test split to read.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TgPartition {
    Train = 0,
    Test = 1,
}

/// Detection counts for one round, or averaged over several.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TgCounts {
    /// Adversarial rows rejected by the discriminator.
    pub da_dis: f64,
    /// Adversarial rows rejected by the classifier.
    pub da_cla: f64,
    /// Original fakes rejected by the discriminator.
    pub do_dis: f64,
    /// Original fakes rejected by the classifier.
    pub do_cla: f64,
    pub total_adversarial: f64,
    pub total_original_attacks: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TgRates {
    pub aasr: f64,
    pub aadr: f64,
    pub oadr: f64,
}

/// A generated and split task dataset.
pub struct TgDataset {
    split: DatasetSplit,
}

/// A trained generator/discriminator pair.
pub struct TgGan {
    model: GanModel,
}

/// A fitted binary classifier (label 1 = legitimate).
pub struct TgClassifier {
    inner: TrainedClassifier,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
    Ok(v) => v,
    Err(_) => panic!("version string"),
};

struct Failure(TgStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Config(_) => TgStatus::Config,
            Error::Divergence { .. } | Error::ExplodingGradient { .. } => TgStatus::Divergence,
            Error::Untrained(_) => TgStatus::Untrained,
            Error::Io { .. } | Error::Csv(_) => TgStatus::Io,
            _ => TgStatus::Data,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: TgStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

/// Runs `body`, records any failure and converts panics.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> TgStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            TgStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            TgStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| fail(TgStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| fail(TgStatus::NullPointer, format!("{what} is null")))
}

/// Null means "absent"; otherwise the string must be UTF-8.
unsafe fn opt_str<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Some)
        .map_err(|_| fail(TgStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn req_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    opt_str(p, what)?.ok_or_else(|| fail(TgStatus::NullPointer, format!("{what} is null")))
}

unsafe fn matrix<'a>(data: *const f64, rows: usize, cols: usize) -> Result<ArrayView2<'a, f64>, Failure> {
    if rows == 0 || cols == 0 {
        return Err(fail(TgStatus::InvalidArgument, "matrix must have at least one row and column"));
    }
    let data = borrow(data, "matrix")?;
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| fail(TgStatus::InvalidArgument, "matrix size overflows"))?;
    let slice = std::slice::from_raw_parts(data as *const f64, len);
    Ok(ArrayView2::from_shape((rows, cols), slice).expect("length checked"))
}

unsafe fn out_slice<'a, T>(buf: *mut T, len: usize, needed: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len != needed {
        return Err(fail(
            TgStatus::InvalidArgument,
            format!("{what} holds {len} values, {needed} required"),
        ));
    }
    if needed == 0 {
        return Ok(&mut []);
    }
    let first = out_ptr(buf, what)?;
    Ok(std::slice::from_raw_parts_mut(first as *mut T, needed))
}

fn parse_config<T: serde::de::DeserializeOwned + Default>(json: Option<&str>) -> Result<T, Failure> {
    match json {
        None => Ok(T::default()),
        Some(text) => serde_json::from_str(text).map_err(|e| fail(TgStatus::Config, format!("config: {e}"))),
    }
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| fail(TgStatus::Data, "output contains a NUL byte"))
}

fn partition(ds: &TgDataset, which: TgPartition) -> &Partition {
    match which {
        TgPartition::Train => &ds.split.train,
        TgPartition::Test => &ds.split.test,
    }
}

/// Library version, e.g. `"0.1.0"`. Static storage; do not free.
#[no_mangle]
pub extern "C" fn tg_version() -> *const c_char {
    VERSION.as_ptr()
}

/// Message of the last failed call on this thread, or null after a success.
/// Valid until the next `tg_*` call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn tg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from a `tg_*` function that hands out owned strings and
/// must not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn tg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Number of encoded features per task.
#[no_mangle]
pub extern "C" fn tg_feature_count() -> usize {
    FEATURE_COUNT
}

/// Generates tasks and splits them. `config_json` is a generation config
/// (missing fields take defaults); null means all defaults.
///
/// # Safety
/// `config_json` must be null or a NUL-terminated string; `out` must be a
/// valid pointer. On success `*out` owns a handle for `tg_dataset_free`.
#[no_mangle]
pub unsafe extern "C" fn tg_dataset_generate(config_json: *const c_char, out: *mut *mut TgDataset) -> TgStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let cfg: GenerationConfig = parse_config(opt_str(config_json, "config_json")?)?;
        let tasks = generate_tasks(&cfg)?;
        let split = split(&tasks, &cfg)?;
        *out = Box::into_raw(Box::new(TgDataset { split }));
        Ok(())
    })
}

/// # Safety
/// `ds` must be null or a handle from `tg_dataset_generate`, freed once.
#[no_mangle]
pub unsafe extern "C" fn tg_dataset_free(ds: *mut TgDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Row count of one partition.
///
/// # Safety
/// `ds` must be a live dataset handle and `out_rows` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tg_dataset_rows(ds: *const TgDataset, which: TgPartition, out_rows: *mut usize) -> TgStatus {
    guard(|| {
        let ds = borrow(ds, "dataset")?;
        *out_ptr(out_rows, "out_rows")? = partition(ds, which).len();
        Ok(())
    })
}

/// Copies the encoded features of one partition. `len` must equal
/// rows * `tg_feature_count()`.
///
/// # Safety
/// `ds` must be a live dataset handle; `buf` must point to `len` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn tg_dataset_features(
    ds: *const TgDataset,
    which: TgPartition,
    buf: *mut f64,
    len: usize,
) -> TgStatus {
    guard(|| {
        let p = partition(borrow(ds, "dataset")?, which);
        let out = out_slice(buf, len, p.features.len(), "buf")?;
        for (dst, src) in out.iter_mut().zip(p.features.iter()) {
            *dst = *src;
        }
        Ok(())
    })
}

/// Copies legitimacy labels (1 = legitimate, 0 = fake). `len` must equal
/// the row count.
///
/// # Safety
/// `ds` must be a live dataset handle; `buf` must point to `len` writable
/// bytes.
#[no_mangle]
pub unsafe extern "C" fn tg_dataset_labels(
    ds: *const TgDataset,
    which: TgPartition,
    buf: *mut u8,
    len: usize,
) -> TgStatus {
    guard(|| {
        let p = partition(borrow(ds, "dataset")?, which);
        out_slice(buf, len, p.labels.len(), "buf")?.copy_from_slice(&p.labels);
        Ok(())
    })
}

/// Trains a GAN on the dataset's training partition. `config_json` is a GAN
/// config (null means defaults); its `corpus` field picks the rows used.
///
/// # Safety
/// `ds` must be a live dataset handle, `config_json` null or NUL-terminated,
/// `out` valid. On success `*out` owns a handle for `tg_gan_free`.
#[no_mangle]
pub unsafe extern "C" fn tg_gan_train(
    ds: *const TgDataset,
    config_json: *const c_char,
    out: *mut *mut TgGan,
) -> TgStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let ds = borrow(ds, "dataset")?;
        let cfg: GanConfig = parse_config(opt_str(config_json, "config_json")?)?;
        let model = train_gan(&gan_corpus(&ds.split, cfg.corpus), &cfg)?;
        *out = Box::into_raw(Box::new(TgGan { model }));
        Ok(())
    })
}

/// Loads `generator.json` and `discriminator.json` from `dir`.
///
/// # Safety
/// `dir` must be NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn tg_gan_load(dir: *const c_char, epochs_trained: usize, out: *mut *mut TgGan) -> TgStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let dir = PathBuf::from(req_str(dir, "dir")?);
        let model = GanModel::load(&dir, epochs_trained)?;
        *out = Box::into_raw(Box::new(TgGan { model }));
        Ok(())
    })
}

/// Writes both networks and the loss history into an existing directory.
///
/// # Safety
/// `gan` must be a live handle and `dir` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn tg_gan_save(gan: *const TgGan, dir: *const c_char) -> TgStatus {
    guard(|| {
        let gan = borrow(gan, "gan")?;
        gan.model.save(&PathBuf::from(req_str(dir, "dir")?))?;
        Ok(())
    })
}

/// # Safety
/// `gan` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn tg_gan_free(gan: *mut TgGan) {
    if !gan.is_null() {
        drop(Box::from_raw(gan));
    }
}

/// Width of rows produced and scored by this GAN, or 0 for a null handle.
///
/// # Safety
/// `gan` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tg_gan_feature_dim(gan: *const TgGan) -> usize {
    gan.as_ref().map_or(0, |g| g.model.feature_dim())
}

/// Draws `n` synthetic rows into `buf` (`len` = n * feature dim).
///
/// # Safety
/// `gan` must be a live handle and `buf` point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tg_gan_generate(
    gan: *const TgGan,
    n: usize,
    seed: u64,
    buf: *mut f64,
    len: usize,
) -> TgStatus {
    guard(|| {
        let gan = borrow(gan, "gan")?;
        let needed = n
            .checked_mul(gan.model.feature_dim())
            .ok_or_else(|| fail(TgStatus::InvalidArgument, "n overflows"))?;
        let out = out_slice(buf, len, needed, "buf")?;
        let batch = gan.model.generate(n, seed)?;
        for (dst, src) in out.iter_mut().zip(batch.rows.iter()) {
            *dst = *src;
        }
        Ok(())
    })
}

/// Discriminator probability that each row is real, written to `out_probs`
/// (one value per row).
///
/// # Safety
/// `rows` must point to `n_rows * n_cols` doubles and `out_probs` to
/// `n_rows` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tg_gan_discriminate(
    gan: *const TgGan,
    rows: *const f64,
    n_rows: usize,
    n_cols: usize,
    out_probs: *mut f64,
) -> TgStatus {
    guard(|| {
        let gan = borrow(gan, "gan")?;
        let x = matrix(rows, n_rows, n_cols)?.to_owned();
        let out = out_slice(out_probs, n_rows, n_rows, "out_probs")?;
        out.copy_from_slice(&gan.model.discriminate(&x)?);
        Ok(())
    })
}

fn parse_kind(kind: &str) -> Result<ClassifierKind, Failure> {
    kind.parse().map_err(|e: Error| fail(TgStatus::Config, e.to_string()))
}

fn new_classifier(kind: &str, rows: &Array2<f64>, labels: &[u8], out: &mut *mut TgClassifier) -> Result<(), Failure> {
    let inner = fit(parse_kind(kind)?, rows, labels)?;
    *out = Box::into_raw(Box::new(TgClassifier { inner }));
    Ok(())
}

/// Fits a classifier on caller-supplied rows and 0/1 labels. `kind` is
/// `knn`, `knn:7`, `nb`, `nb:1e-9`, `dt` or `dt:12`.
///
/// # Safety
/// `kind` must be NUL-terminated, `rows` point to `n_rows * n_cols` doubles,
/// `labels` to `n_rows` bytes, and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn tg_classifier_fit(
    kind: *const c_char,
    rows: *const f64,
    n_rows: usize,
    n_cols: usize,
    labels: *const u8,
    out: *mut *mut TgClassifier,
) -> TgStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let kind = req_str(kind, "kind")?;
        let x = matrix(rows, n_rows, n_cols)?.to_owned();
        let y = std::slice::from_raw_parts(borrow(labels, "labels")? as *const u8, n_rows);
        new_classifier(kind, &x, y, out)
    })
}

/// Fits a classifier on a dataset's training partition.
///
/// # Safety
/// `kind` must be NUL-terminated, `ds` a live handle, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn tg_classifier_fit_dataset(
    kind: *const c_char,
    ds: *const TgDataset,
    out: *mut *mut TgClassifier,
) -> TgStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let kind = req_str(kind, "kind")?;
        let train = &borrow(ds, "dataset")?.split.train;
        new_classifier(kind, &train.features, &train.labels, out)
    })
}

/// Predicts a legitimacy label (1 = legitimate) per row.
///
/// # Safety
/// `rows` must point to `n_rows * n_cols` doubles and `out_labels` to
/// `n_rows` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn tg_classifier_predict(
    clf: *const TgClassifier,
    rows: *const f64,
    n_rows: usize,
    n_cols: usize,
    out_labels: *mut u8,
) -> TgStatus {
    guard(|| {
        let clf = borrow(clf, "classifier")?;
        let x = matrix(rows, n_rows, n_cols)?.to_owned();
        let out = out_slice(out_labels, n_rows, n_rows, "out_labels")?;
        out.copy_from_slice(&clf.inner.predict(&x)?);
        Ok(())
    })
}

/// # Safety
/// `clf` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn tg_classifier_free(clf: *mut TgClassifier) {
    if !clf.is_null() {
        drop(Box::from_raw(clf));
    }
}

/// AASR, AADR and OADR from detection counts. Fails with
/// `TG_STATUS_DATA` when a denominator is zero.
///
/// # Safety
/// `counts` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn tg_metrics_rates(counts: *const TgCounts, out: *mut TgRates) -> TgStatus {
    guard(|| {
        let c = borrow(counts, "counts")?;
        let out = out_ptr(out, "out")?;
        let rc = RoundCounts {
            da_dis: c.da_dis,
            da_cla: c.da_cla,
            do_dis: c.do_dis,
            do_cla: c.do_cla,
            total_adversarial: c.total_adversarial,
            total_original_attacks: c.total_original_attacks,
            ..RoundCounts::default()
        };
        *out = TgRates {
            aasr: aasr(&rc)?,
            aadr: aadr(&rc)?,
            oadr: oadr(&rc)?,
        };
        Ok(())
    })
}

/// Runs a whole experiment and returns its report as JSON: the metric
/// report, or the sweep report in sweep mode. `preset` is `"paper"` or
/// `"desk"` (null means paper); `config_json` is layered over it.
///
/// # Safety
/// Strings must be null or NUL-terminated; `out_json` must be valid. On
/// success `*out_json` is owned by the caller (`tg_string_free`).
#[no_mangle]
pub unsafe extern "C" fn tg_experiment_run(
    config_json: *const c_char,
    preset: *const c_char,
    out_json: *mut *mut c_char,
) -> TgStatus {
    guard(|| {
        let out = out_ptr(out_json, "out_json")?;
        *out = ptr::null_mut();
        let preset: Preset = opt_str(preset, "preset")?
            .unwrap_or("paper")
            .parse()
            .map_err(|e: Error| fail(TgStatus::Config, e.to_string()))?;
        let config = match opt_str(config_json, "config_json")? {
            None => ExperimentConfig::preset(preset),
            Some(text) => ExperimentConfig::from_json_over(preset, text).map_err(|e| match e {
                Error::Json(j) => fail(TgStatus::Config, format!("config: {j}")),
                other => other.into(),
            })?,
        };
        let outcome = run(&config)?;
        let json = match (&outcome.report, &outcome.sweep) {
            (Some(report), _) => report.to_json()?,
            (None, Some(sweep)) => serde_json::to_string_pretty(sweep).map_err(Error::from)?,
            (None, None) => "null".to_string(),
        };
        *out = into_c_string(json)?;
        Ok(())
    })
}
