use std::ffi::{c_char, CStr, CString};
use std::ptr;

use taskguard_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = tg_last_error_message();
    assert!(!p.is_null(), "expected an error message");
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned()
}

fn small_dataset() -> *mut TgDataset {
    let cfg = c(r#"{"total_tasks": 300, "fake_fraction": 0.2, "rng_seed": 11}"#);
    let mut ds = ptr::null_mut();
    assert_eq!(unsafe { tg_dataset_generate(cfg.as_ptr(), &mut ds) }, TgStatus::Ok);
    ds
}

const TINY_GAN: &str = r#"{"noise_dim": 4, "gen_layers": [8], "disc_layers": [8], "epochs": 20,
    "batch_size": 16, "loss_log_interval": 5, "seed": 3}"#;

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(tg_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn dataset_partitions_are_readable() {
    let ds = small_dataset();
    let d = tg_feature_count();
    let mut rows = [0usize; 2];
    unsafe {
        assert_eq!(tg_dataset_rows(ds, TgPartition::Train, &mut rows[0]), TgStatus::Ok);
        assert_eq!(tg_dataset_rows(ds, TgPartition::Test, &mut rows[1]), TgStatus::Ok);
    }
    assert_eq!(rows[0] + rows[1], 300);

    let mut features = vec![f64::NAN; rows[1] * d];
    let mut labels = vec![9u8; rows[1]];
    unsafe {
        assert_eq!(
            tg_dataset_features(ds, TgPartition::Test, features.as_mut_ptr(), features.len()),
            TgStatus::Ok
        );
        assert_eq!(tg_dataset_labels(ds, TgPartition::Test, labels.as_mut_ptr(), labels.len()), TgStatus::Ok);
    }
    // Test rows use the scaler fitted on the training rows, so only finiteness holds.
    assert!(features.iter().all(|v| v.is_finite()));
    assert!(labels.iter().all(|&l| l <= 1) && labels.contains(&0) && labels.contains(&1));
    assert!(tg_last_error_message().is_null());

    // Wrong buffer length is rejected without writing.
    let status = unsafe { tg_dataset_labels(ds, TgPartition::Test, labels.as_mut_ptr(), labels.len() - 1) };
    assert_eq!(status, TgStatus::InvalidArgument);
    assert!(last_error().contains("required"));
    unsafe { tg_dataset_free(ds) };
}

#[test]
fn null_and_bad_arguments_map_to_status_codes() {
    let mut ds = ptr::null_mut();
    assert_eq!(unsafe { tg_dataset_generate(ptr::null(), ptr::null_mut()) }, TgStatus::NullPointer);
    let bad = c(r#"{"total_tasks": "many"}"#);
    assert_eq!(unsafe { tg_dataset_generate(bad.as_ptr(), &mut ds) }, TgStatus::Config);
    assert!(ds.is_null());
    let invalid = c(r#"{"fake_fraction": 1.5}"#);
    assert_eq!(unsafe { tg_dataset_generate(invalid.as_ptr(), &mut ds) }, TgStatus::Config);
    assert!(last_error().contains("fake_fraction"));

    let mut rows = 0usize;
    assert_eq!(unsafe { tg_dataset_rows(ptr::null(), TgPartition::Train, &mut rows) }, TgStatus::NullPointer);

    let mut clf = ptr::null_mut();
    let x = [0.0, 1.0];
    let y = [0u8, 1];
    let kind = c("knn:4");
    let status = unsafe { tg_classifier_fit(kind.as_ptr(), x.as_ptr(), 2, 1, y.as_ptr(), &mut clf) };
    assert_eq!(status, TgStatus::Config);
    assert!(clf.is_null());

    let mut out: *mut c_char = ptr::null_mut();
    let preset = c("laptop");
    assert_eq!(unsafe { tg_experiment_run(ptr::null(), preset.as_ptr(), &mut out) }, TgStatus::Config);

    // Freeing null handles is a no-op.
    unsafe {
        tg_dataset_free(ptr::null_mut());
        tg_gan_free(ptr::null_mut());
        tg_classifier_free(ptr::null_mut());
        tg_string_free(ptr::null_mut());
    }
    assert_eq!(unsafe { tg_gan_feature_dim(ptr::null()) }, 0);
}

#[test]
fn classifier_round_trip_through_the_abi() {
    let ds = small_dataset();
    let d = tg_feature_count();
    let mut n = 0usize;
    unsafe { tg_dataset_rows(ds, TgPartition::Test, &mut n) };
    let mut x = vec![0.0; n * d];
    let mut y = vec![0u8; n];
    unsafe {
        tg_dataset_features(ds, TgPartition::Test, x.as_mut_ptr(), x.len());
        tg_dataset_labels(ds, TgPartition::Test, y.as_mut_ptr(), y.len());
    }
    // NB is left out of the accuracy bar: the fake class has zero variance
    // on the on-peak feature, which it overweights.
    for (name, min_tenths) in [("knn", 7), ("nb", 0), ("dt:6", 7)] {
        let kind = c(name);
        let mut clf = ptr::null_mut();
        assert_eq!(unsafe { tg_classifier_fit_dataset(kind.as_ptr(), ds, &mut clf) }, TgStatus::Ok);
        let mut pred = vec![9u8; n];
        assert_eq!(
            unsafe { tg_classifier_predict(clf, x.as_ptr(), n, d, pred.as_mut_ptr()) },
            TgStatus::Ok
        );
        let correct = pred.iter().zip(&y).filter(|(a, b)| a == b).count();
        assert!(pred.iter().all(|&p| p <= 1));
        assert!(correct * 10 >= n * min_tenths, "{name}: {correct}/{n}");

        let status = unsafe { tg_classifier_predict(clf, x.as_ptr(), n, d - 1, pred.as_mut_ptr()) };
        assert_ne!(status, TgStatus::Ok);
        unsafe { tg_classifier_free(clf) };
    }

    // A tree fitted on caller rows reproduces separable labels.
    let rows = [0.0, 1.0, 2.0, 3.0];
    let labels = [0u8, 0, 1, 1];
    let mut clf = ptr::null_mut();
    let kind = c("dt");
    assert_eq!(
        unsafe { tg_classifier_fit(kind.as_ptr(), rows.as_ptr(), 4, 1, labels.as_ptr(), &mut clf) },
        TgStatus::Ok
    );
    let mut pred = [9u8; 4];
    unsafe { tg_classifier_predict(clf, rows.as_ptr(), 4, 1, pred.as_mut_ptr()) };
    assert_eq!(pred, labels);
    unsafe {
        tg_classifier_free(clf);
        tg_dataset_free(ds);
    }
}

#[test]
fn gan_trains_generates_and_survives_save_load() {
    let ds = small_dataset();
    let cfg = c(TINY_GAN);
    let mut gan = ptr::null_mut();
    assert_eq!(unsafe { tg_gan_train(ds, cfg.as_ptr(), &mut gan) }, TgStatus::Ok);
    let d = unsafe { tg_gan_feature_dim(gan) };
    assert_eq!(d, tg_feature_count());

    let mut rows = vec![f64::NAN; 10 * d];
    assert_eq!(unsafe { tg_gan_generate(gan, 10, 42, rows.as_mut_ptr(), rows.len()) }, TgStatus::Ok);
    assert!(rows.iter().all(|v| (-1.0..=1.0).contains(v)));
    let mut probs = vec![f64::NAN; 10];
    assert_eq!(unsafe { tg_gan_discriminate(gan, rows.as_ptr(), 10, d, probs.as_mut_ptr()) }, TgStatus::Ok);
    assert!(probs.iter().all(|p| (0.0..=1.0).contains(p)));

    let dir = tempfile::tempdir().unwrap();
    let path = c(dir.path().to_str().unwrap());
    assert_eq!(unsafe { tg_gan_save(gan, path.as_ptr()) }, TgStatus::Ok);
    let mut loaded = ptr::null_mut();
    assert_eq!(unsafe { tg_gan_load(path.as_ptr(), 20, &mut loaded) }, TgStatus::Ok);
    let mut again = vec![0.0; 10];
    unsafe { tg_gan_discriminate(loaded, rows.as_ptr(), 10, d, again.as_mut_ptr()) };
    assert_eq!(probs, again);

    let missing = c(dir.path().join("absent").to_str().unwrap());
    let mut none = ptr::null_mut();
    assert_eq!(unsafe { tg_gan_load(missing.as_ptr(), 0, &mut none) }, TgStatus::Io);
    unsafe {
        tg_gan_free(gan);
        tg_gan_free(loaded);
        tg_dataset_free(ds);
    }
}

#[test]
fn rates_follow_the_counts() {
    let counts = TgCounts {
        da_dis: 60.0,
        da_cla: 20.0,
        do_dis: 5.0,
        do_cla: 15.0,
        total_adversarial: 100.0,
        total_original_attacks: 40.0,
    };
    let mut rates = TgRates::default();
    assert_eq!(unsafe { tg_metrics_rates(&counts, &mut rates) }, TgStatus::Ok);
    assert_eq!((rates.aadr, rates.oadr), (0.8, 0.5));
    assert!((rates.aasr - 0.2).abs() < 1e-15);

    let empty = TgCounts::default();
    assert_eq!(unsafe { tg_metrics_rates(&empty, &mut rates) }, TgStatus::Data);
}

#[test]
fn experiment_returns_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = serde_json::json!({
        "generation": {"total_tasks": 300, "fake_fraction": 0.2, "rng_seed": 5},
        "gan": serde_json::from_str::<serde_json::Value>(TINY_GAN).unwrap(),
        "rounds": 1,
        "synthetic_count": 20,
        "output_dir": dir.path(),
    });
    let cfg = c(&cfg.to_string());
    let preset = c("desk");
    let mut out: *mut c_char = ptr::null_mut();
    let status = unsafe { tg_experiment_run(cfg.as_ptr(), preset.as_ptr(), &mut out) };
    assert_eq!(status, TgStatus::Ok, "{:?}", tg_last_error_message());
    let text = unsafe { CStr::from_ptr(out) }.to_str().unwrap().to_owned();
    unsafe { tg_string_free(out) };
    let report: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(report["results"].as_array().is_some_and(|r| !r.is_empty()));
    assert!(dir.path().join("report.json").exists());
}

#[test]
fn header_declares_the_api_and_compiles() {
    let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("include/taskguard.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["tg_dataset_generate", "tg_gan_train", "tg_classifier_predict", "tg_experiment_run", "TG_STATUS_PANIC"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let Some(cc) = ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| std::process::Command::new(c).arg("--version").output().is_ok())
    else {
        eprintln!("no C compiler; skipping header compile check");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"taskguard.h\"\n\
         int main(void) {\n\
           TgDataset *ds = 0;\n\
           TgStatus s = tg_dataset_generate(0, &ds);\n\
           tg_dataset_free(ds);\n\
           return s == TG_STATUS_OK ? 0 : 1;\n\
         }\n",
    )
    .unwrap();
    let out = std::process::Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header.parent().unwrap())
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
