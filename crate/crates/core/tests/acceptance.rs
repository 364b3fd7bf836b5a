//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. The paper-scale GAN criteria take several minutes.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use taskguard::cascade::{classify_mixed_with, ConstantScorer, Disposition};
use taskguard::classifiers::fit;
use taskguard::experiment::{run, ExperimentConfig, Preset, RunOutcome};
use taskguard::metrics::{aadr, aasr, oadr, tally, Architecture, EliminationRates, MetricReport, RoundCounts};
use taskguard::synth::{generate_tasks, split, GenerationConfig};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn within(got: f64, want: f64, tol: f64) -> bool {
    (got - want).abs() <= tol
}

/// Averaged discriminator cells from the published confusion table.
fn published_counts() -> RoundCounts {
    RoundCounts {
        real_as_real_original_fake: 175.1,
        real_as_real_legitimate: 2091.1,
        adversarial_as_real: 50.7,
        real_as_adversarial_original_fake: 215.9,
        real_as_adversarial_legitimate: 414.9,
        adversarial_as_adversarial: 1949.3,
        da_dis: 1949.3,
        do_dis: 215.9,
        total_adversarial: 2000.0,
        total_original_attacks: 391.0,
        total_legitimate: 2506.0,
        ..RoundCounts::default()
    }
}

fn metric_arithmetic() -> Verdict {
    let base = published_counts();
    let rates = EliminationRates::from_counts(&base).unwrap();
    // Classifier-level detections behind the cascade column.
    let knn = RoundCounts { do_cla: 129.5, ..base };
    let nb = RoundCounts { do_cla: 24.5, ..base };
    let dt = RoundCounts {
        do_cla: 175.1,
        da_cla: 50.7,
        ..base
    };
    let checks = [
        ("original eliminated", rates.original_fake, 0.552),
        ("legitimate eliminated", rates.legitimate, 0.166),
        ("adversarial eliminated", rates.adversarial_fake, 0.975),
        ("KNN AADR", aadr(&knn).unwrap(), 0.975),
        ("KNN OADR", oadr(&knn).unwrap(), 0.883),
        ("NB OADR", oadr(&nb).unwrap(), 0.615),
        ("DT AADR", aadr(&dt).unwrap(), 1.000),
        ("DT OADR", oadr(&dt).unwrap(), 1.000),
    ];
    let bad: Vec<String> = checks
        .iter()
        .filter(|(_, got, want)| !within(*got, *want, 0.001))
        .map(|(name, got, want)| format!("{name} {got:.5} vs {want}"))
        .collect();
    let values: Vec<String> = checks.iter().map(|(n, g, _)| format!("{n} {g:.4}")).collect();
    verdict(bad.is_empty(), if bad.is_empty() { values.join(", ") } else { bad.join("; ") })
}

fn dataset_conformance() -> Verdict {
    let start = Instant::now();
    let cfg = GenerationConfig {
        total_tasks: 100_000,
        fake_fraction: 0.5,
        rng_seed: 17,
        ..GenerationConfig::default()
    };
    let tasks = generate_tasks(&cfg).unwrap();
    let (fake, legit): (Vec<_>, Vec<_>) = tasks.iter().partition(|t| !t.legitimacy);
    let freq = |set: &[&taskguard::synth::SensingTask], pred: &dyn Fn(&taskguard::synth::SensingTask) -> bool| {
        set.iter().filter(|t| pred(t)).count() as f64 / set.len() as f64
    };
    let mut checks: Vec<(String, f64, f64)> = vec![
        ("fake hour 7-11".into(), freq(&fake, &|t| (7..=11).contains(&t.hour)), 0.80),
        ("fake hour 12-17".into(), freq(&fake, &|t| (12..=17).contains(&t.hour)), 0.20),
        ("fake duration 40-60".into(), freq(&fake, &|t| t.duration >= 40), 0.70),
        ("fake duration 10-30".into(), freq(&fake, &|t| t.duration <= 30), 0.30),
        ("fake battery 7-10".into(), freq(&fake, &|t| (7..=10).contains(&t.battery_pct)), 0.80),
        ("fake battery 1-6".into(), freq(&fake, &|t| (1..=6).contains(&t.battery_pct)), 0.20),
        ("legit hour 0-5".into(), freq(&legit, &|t| t.hour <= 5), 0.08),
        ("legit hour 6-23".into(), freq(&legit, &|t| (6..=23).contains(&t.hour)), 0.92),
    ];
    for d in [10, 20, 30, 40, 50, 60] {
        checks.push((format!("legit duration {d}"), freq(&legit, &|t| t.duration == d), 1.0 / 6.0));
    }
    for b in 1..=10 {
        checks.push((format!("legit battery {b}"), freq(&legit, &|t| t.battery_pct == b), 0.1));
    }
    for day in 1..=6 {
        checks.push((format!("fake day {day}"), freq(&fake, &|t| t.day == day), 1.0 / 6.0));
        checks.push((format!("legit day {day}"), freq(&legit, &|t| t.day == day), 1.0 / 6.0));
    }
    let elapsed = start.elapsed().as_secs_f64();
    let worst = checks
        .iter()
        .map(|(n, g, w)| ((g - w).abs(), n))
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap();
    let pass = fake.len() == 50_000 && legit.len() == 50_000 && worst.0 <= 0.02 && elapsed < 10.0;
    verdict(
        pass,
        format!(
            "{} frequencies, worst {} off by {:.2} pp, {elapsed:.2} s",
            checks.len(),
            worst.1,
            100.0 * worst.0
        ),
    )
}

fn gradient_correctness() -> Verdict {
    let start = Instant::now();
    let params = common::worst_parameter_gradient_error(100, 2024);
    let inputs = common::worst_input_gradient_error(36, 7);
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        params <= 1e-4 && inputs <= 1e-4 && elapsed < 30.0,
        format!("100 networks, worst parameter rel. error {params:.2e}, input {inputs:.2e}, {elapsed:.2} s"),
    )
}

fn classifier_oracles() -> Verdict {
    let dt = common::check_tree_splits(500, 99);
    let nb = common::naive_bayes_hand_error();
    let knn = common::check_knn_brute_force(1000, 5);
    let pass = dt.is_ok() && nb <= 1e-9 && knn.is_ok();
    verdict(
        pass,
        format!(
            "DT 500 sets: {}; NB max error {nb:.1e}; KNN 1000 queries: {}",
            dt.err().unwrap_or_else(|| "ok".into()),
            knn.err().unwrap_or_else(|| "ok".into())
        ),
    )
}

fn flat_aadr(report: &MetricReport, clf: &str) -> f64 {
    report.get(clf, Architecture::Flat).unwrap().aadr.total
}

fn gan_efficacy(report: &MetricReport, elapsed: f64) -> Verdict {
    let d = report.discriminator.as_ref().unwrap();
    let rate = d.elimination.adversarial_fake;
    verdict(
        rate >= 0.90 && elapsed < 1800.0 && report.rounds_completed.len() >= 5,
        format!(
            "{} rounds, discriminator flags {:.1}% of {} synthetic rows (adversarial-as-real {:.1}), {elapsed:.0} s",
            report.rounds_completed.len(),
            100.0 * rate,
            d.counts.total_adversarial,
            d.counts.adversarial_as_real
        ),
    )
}

fn evasion(report: &MetricReport) -> Verdict {
    let (knn, nb, dt) = (flat_aadr(report, "knn"), flat_aadr(report, "nb"), flat_aadr(report, "dt"));
    verdict(
        knn <= 0.10 && nb <= 0.10 && dt > 0.0 && (0.05..=0.95).contains(&dt),
        format!("flat AADR knn {knn:.3} (<= 0.10), nb {nb:.3} (<= 0.10), dt {dt:.3} (in [0.05, 0.95])"),
    )
}

fn cascade_dominance(outcome: &RunOutcome) -> Verdict {
    let report = outcome.report.as_ref().unwrap();
    let mut violations = Vec::new();
    for round in &outcome.rounds {
        for c in &round.classifiers {
            let flat = aadr(&tally(&c.flat)).unwrap();
            let cascade = aadr(&tally(&c.cascade)).unwrap();
            if cascade < flat {
                violations.push(format!("round {} {}: {cascade:.3} < {flat:.3}", round.round, c.classifier));
            }
        }
    }
    let dt = report.get("dt", Architecture::Cascade).unwrap().aadr.total;
    verdict(
        violations.is_empty() && dt >= 0.95,
        if violations.is_empty() {
            format!("{} rounds x 3 classifiers hold; cascade DT AADR {dt:.3} (>= 0.95)", outcome.rounds.len())
        } else {
            violations.join("; ")
        },
    )
}

fn identity_suite(config: &ExperimentConfig, outcome: &RunOutcome) -> Verdict {
    let tasks = generate_tasks(&config.generation).unwrap();
    let ds = split(&tasks, &config.generation).unwrap();
    let mut problems = Vec::new();
    let mut rows_checked = 0usize;
    for round in &outcome.rounds {
        for (kind, c) in config.classifiers.iter().zip(&round.classifiers) {
            let clf = fit(*kind, &ds.train.features, &ds.train.labels).unwrap();
            let always_real = classify_mixed_with(&round.mixed, &ConstantScorer(1.0), &clf, config.disc_threshold).unwrap();
            if always_real != c.flat {
                problems.push(format!("round {} {}: flat differs from always-real cascade", round.round, c.classifier));
            }
            rows_checked += always_real.len();
            for verdicts in [&c.flat, &c.cascade] {
                let counts = tally(verdicts);
                if (aasr(&counts).unwrap() + aadr(&counts).unwrap() - 1.0).abs() > 1e-9 {
                    problems.push(format!("round {} {}: AASR + AADR != 1", round.round, c.classifier));
                }
                let partition = [
                    Disposition::EliminatedByDiscriminator,
                    Disposition::EliminatedByClassifier,
                    Disposition::Accepted,
                ]
                .iter()
                .map(|d| verdicts.iter().filter(|v| v.final_disposition == *d).count())
                .sum::<usize>();
                let indexed = verdicts.iter().enumerate().all(|(i, v)| v.index == i && v.is_consistent());
                if partition != round.mixed.len() || verdicts.len() != round.mixed.len() || !indexed {
                    problems.push(format!("round {} {}: dispositions do not partition", round.round, c.classifier));
                }
            }
        }
    }
    for m in &outcome.report.as_ref().unwrap().results {
        if (m.aasr + m.aadr.total - 1.0).abs() > 1e-9 {
            problems.push(format!("report {} {}: AASR + AADR != 1", m.classifier, m.architecture.as_str()));
        }
    }
    verdict(
        problems.is_empty(),
        if problems.is_empty() {
            format!("desk preset, {} rounds, {rows_checked} flat rows matched row-for-row", outcome.rounds.len())
        } else {
            problems.join("; ")
        },
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(u32, &str, Verdict)> = Vec::new();
    let report = |n: u32, name: &'static str, v: Verdict, results: &mut Vec<(u32, &str, Verdict)>| {
        println!("criterion {n} {name}: {} ({})", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        results.push((n, name, v));
    };

    report(1, "metric arithmetic", metric_arithmetic(), &mut results);
    report(2, "dataset conformance", dataset_conformance(), &mut results);
    report(3, "gradient correctness", gradient_correctness(), &mut results);

    let paper_dir = tempfile::tempdir().unwrap();
    let paper = ExperimentConfig {
        rounds: 5,
        output_dir: paper_dir.path().to_path_buf(),
        ..ExperimentConfig::preset(Preset::Paper)
    };
    let start = Instant::now();
    let paper_run = run(&paper).unwrap();
    let paper_elapsed = start.elapsed().as_secs_f64();
    let paper_report = paper_run.report.as_ref().unwrap();
    report(4, "GAN efficacy", gan_efficacy(paper_report, paper_elapsed), &mut results);
    report(5, "evasion of flat classifiers", evasion(paper_report), &mut results);
    report(6, "cascade dominance", cascade_dominance(&paper_run), &mut results);

    report(7, "baseline-classifier oracles", classifier_oracles(), &mut results);

    let desk_a = tempfile::tempdir().unwrap();
    let desk_b = tempfile::tempdir().unwrap();
    let desk = |dir: &std::path::Path| ExperimentConfig {
        output_dir: dir.to_path_buf(),
        ..ExperimentConfig::preset(Preset::Desk)
    };
    let desk_cfg = desk(desk_a.path());
    let first = run(&desk_cfg).unwrap();
    report(8, "identity suite", identity_suite(&desk_cfg, &first), &mut results);

    run(&desk(desk_b.path())).unwrap();
    let a = std::fs::read(desk_a.path().join("report.json")).unwrap();
    let b = std::fs::read(desk_b.path().join("report.json")).unwrap();
    report(
        9,
        "determinism",
        verdict(a == b, format!("two desk runs, report.json {} bytes, identical: {}", a.len(), a == b)),
        &mut results,
    );

    let failed: Vec<String> = results.iter().filter(|r| !r.2.pass).map(|r| r.0.to_string()).collect();
    println!(
        "acceptance: {}/{} criteria pass{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!(" (failing: {})", failed.join(", "))
        }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
