//! Detection-rate bookkeeping: per-round confusion counts, AADR/AASR/OADR,
//! and averages over repeated rounds.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cascade::{CascadeVerdict, DiscPrediction, Disposition};
use crate::error::{Error, Result};
use crate::synth::Origin;

/// Counts for one round (or the mean over several rounds, hence `f64`).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RoundCounts {
    pub real_as_real_original_fake: f64,
    pub real_as_real_legitimate: f64,
    pub adversarial_as_real: f64,
    pub real_as_adversarial_original_fake: f64,
    pub real_as_adversarial_legitimate: f64,
    pub adversarial_as_adversarial: f64,
    /// Adversarial rows detected by the discriminator.
    pub da_dis: f64,
    /// Original fakes detected by the discriminator.
    pub do_dis: f64,
    /// Adversarial rows detected by the classifier.
    pub da_cla: f64,
    /// Original fakes detected by the classifier.
    pub do_cla: f64,
    pub legitimate_eliminated_by_classifier: f64,
    pub total_adversarial: f64,
    pub total_original_attacks: f64,
    pub total_legitimate: f64,
}

const FIELD_COUNT: usize = 14;

impl RoundCounts {
    fn fields(&self) -> [f64; FIELD_COUNT] {
        [
            self.real_as_real_original_fake,
            self.real_as_real_legitimate,
            self.adversarial_as_real,
            self.real_as_adversarial_original_fake,
            self.real_as_adversarial_legitimate,
            self.adversarial_as_adversarial,
            self.da_dis,
            self.do_dis,
            self.da_cla,
            self.do_cla,
            self.legitimate_eliminated_by_classifier,
            self.total_adversarial,
            self.total_original_attacks,
            self.total_legitimate,
        ]
    }

    fn from_fields(f: [f64; FIELD_COUNT]) -> Self {
        RoundCounts {
            real_as_real_original_fake: f[0],
            real_as_real_legitimate: f[1],
            adversarial_as_real: f[2],
            real_as_adversarial_original_fake: f[3],
            real_as_adversarial_legitimate: f[4],
            adversarial_as_adversarial: f[5],
            da_dis: f[6],
            do_dis: f[7],
            da_cla: f[8],
            do_cla: f[9],
            legitimate_eliminated_by_classifier: f[10],
            total_adversarial: f[11],
            total_original_attacks: f[12],
            total_legitimate: f[13],
        }
    }

    /// Cross-cell identities every valid count set satisfies.
    pub fn is_consistent(&self) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0);
        self.fields().iter().all(|v| *v >= 0.0 && v.is_finite())
            && close(self.da_dis, self.adversarial_as_adversarial)
            && close(self.da_dis + self.adversarial_as_real, self.total_adversarial)
            && close(self.do_dis, self.real_as_adversarial_original_fake)
            && close(
                self.real_as_real_original_fake + self.real_as_adversarial_original_fake,
                self.total_original_attacks,
            )
            && close(
                self.real_as_real_legitimate + self.real_as_adversarial_legitimate,
                self.total_legitimate,
            )
            && self.da_cla <= self.adversarial_as_real + 1e-9
            && self.do_cla <= self.real_as_real_original_fake + 1e-9
    }

    /// Real test rows (original fakes plus legitimate).
    pub fn total_real(&self) -> f64 {
        self.total_original_attacks + self.total_legitimate
    }
}

/// Exact per-cell counts for one verdict list.
pub fn tally(verdicts: &[CascadeVerdict]) -> RoundCounts {
    let mut c = RoundCounts::default();
    for v in verdicts {
        let real = v.disc_prediction == DiscPrediction::Real;
        let by_classifier = v.final_disposition == Disposition::EliminatedByClassifier;
        match v.origin {
            Origin::OriginalFake => {
                c.total_original_attacks += 1.0;
                if real {
                    c.real_as_real_original_fake += 1.0;
                } else {
                    c.real_as_adversarial_original_fake += 1.0;
                    c.do_dis += 1.0;
                }
                if by_classifier {
                    c.do_cla += 1.0;
                }
            }
            Origin::Legitimate => {
                c.total_legitimate += 1.0;
                if real {
                    c.real_as_real_legitimate += 1.0;
                } else {
                    c.real_as_adversarial_legitimate += 1.0;
                }
                if by_classifier {
                    c.legitimate_eliminated_by_classifier += 1.0;
                }
            }
            Origin::AdversarialFake => {
                c.total_adversarial += 1.0;
                if real {
                    c.adversarial_as_real += 1.0;
                } else {
                    c.adversarial_as_adversarial += 1.0;
                    c.da_dis += 1.0;
                }
                if by_classifier {
                    c.da_cla += 1.0;
                }
            }
        }
    }
    c
}

fn ratio(num: f64, den: f64, what: &'static str) -> Result<f64> {
    if den <= 0.0 {
        return Err(Error::ZeroDenominator(what));
    }
    Ok(num / den)
}

/// Adversarial attack detection rate: (DA_DIS + DA_CLA) / total adversarial.
pub fn aadr(c: &RoundCounts) -> Result<f64> {
    ratio(c.da_dis + c.da_cla, c.total_adversarial, "total_adversarial")
}

/// Adversarial attack success rate, `1 - aadr`.
pub fn aasr(c: &RoundCounts) -> Result<f64> {
    Ok(1.0 - aadr(c)?)
}

/// Original attack detection rate: (DO_DIS + DO_CLA) / total original fakes.
pub fn oadr(c: &RoundCounts) -> Result<f64> {
    ratio(c.do_dis + c.do_cla, c.total_original_attacks, "total_original_attacks")
}

/// Mean of every cell. All rounds must share the same totals.
pub fn average_rounds(rounds: &[RoundCounts]) -> Result<RoundCounts> {
    let first = rounds
        .first()
        .ok_or_else(|| Error::Data("cannot average zero rounds".into()))?;
    let totals = |c: &RoundCounts| (c.total_adversarial, c.total_original_attacks, c.total_legitimate);
    if let Some(bad) = rounds.iter().position(|r| totals(r) != totals(first)) {
        return Err(Error::Data(format!(
            "round {bad} totals {:?} differ from round 0 totals {:?}",
            totals(&rounds[bad]),
            totals(first)
        )));
    }
    let n = rounds.len() as f64;
    let mut sum = [0.0; FIELD_COUNT];
    for r in rounds {
        for (s, v) in sum.iter_mut().zip(r.fields()) {
            *s += v;
        }
    }
    Ok(RoundCounts::from_fields(sum.map(|s| s / n)))
}

/// A detection rate split into the part each cascade level contributed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub discriminator: f64,
    pub classifier: f64,
    pub total: f64,
}

/// Share of each real population removed by the discriminator, plus the
/// discriminator's detection rate on generated rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EliminationRates {
    pub original_fake: f64,
    pub legitimate: f64,
    pub adversarial_fake: f64,
}

impl EliminationRates {
    pub fn from_counts(c: &RoundCounts) -> Result<Self> {
        Ok(EliminationRates {
            original_fake: ratio(c.real_as_adversarial_original_fake, c.total_original_attacks, "total_original_attacks")?,
            legitimate: ratio(c.real_as_adversarial_legitimate, c.total_legitimate, "total_legitimate")?,
            adversarial_fake: ratio(c.adversarial_as_adversarial, c.total_adversarial, "total_adversarial")?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    /// Classifier only.
    Flat,
    /// Discriminator, then classifier.
    Cascade,
}

impl Architecture {
    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::Flat => "flat",
            Architecture::Cascade => "cascade",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Rates for one (classifier, architecture) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureMetrics {
    pub classifier: String,
    pub architecture: Architecture,
    /// AASR left after the discriminator alone.
    pub aasr_after_discriminator: f64,
    pub aasr: f64,
    pub aadr: Contribution,
    pub oadr: Contribution,
    /// Legitimate tasks removed by either level.
    pub legitimate_loss_rate: f64,
    pub counts: RoundCounts,
}

impl ArchitectureMetrics {
    pub fn from_counts(classifier: &str, architecture: Architecture, counts: RoundCounts) -> Result<Self> {
        let da_dis = ratio(counts.da_dis, counts.total_adversarial, "total_adversarial")?;
        let da_cla = ratio(counts.da_cla, counts.total_adversarial, "total_adversarial")?;
        let do_dis = ratio(counts.do_dis, counts.total_original_attacks, "total_original_attacks")?;
        let do_cla = ratio(counts.do_cla, counts.total_original_attacks, "total_original_attacks")?;
        let legit_lost = counts.real_as_adversarial_legitimate + counts.legitimate_eliminated_by_classifier;
        Ok(ArchitectureMetrics {
            classifier: classifier.to_string(),
            architecture,
            aasr_after_discriminator: 1.0 - da_dis,
            aasr: aasr(&counts)?,
            aadr: Contribution {
                discriminator: da_dis,
                classifier: da_cla,
                total: aadr(&counts)?,
            },
            oadr: Contribution {
                discriminator: do_dis,
                classifier: do_cla,
                total: oadr(&counts)?,
            },
            legitimate_loss_rate: ratio(legit_lost, counts.total_legitimate, "total_legitimate")?,
            counts,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorSummary {
    pub counts: RoundCounts,
    pub elimination: EliminationRates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedRound {
    pub round: usize,
    pub error: String,
}

/// Averaged results over every completed round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rounds_completed: Vec<usize>,
    pub rounds_failed: Vec<FailedRound>,
    pub discriminator: Option<DiscriminatorSummary>,
    pub results: Vec<ArchitectureMetrics>,
}

/// Per-round tallies for one (classifier, architecture) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTallies {
    pub classifier: String,
    pub architecture: Architecture,
    pub rounds: Vec<RoundCounts>,
}

impl MetricReport {
    /// Averages each pair's rounds. The discriminator summary comes from the
    /// first cascade pair; every cascade shares the same level-1 outcome.
    pub fn build(rounds_completed: Vec<usize>, rounds_failed: Vec<FailedRound>, pairs: &[PairTallies]) -> Result<Self> {
        let mut results = Vec::with_capacity(pairs.len());
        for p in pairs {
            let mean = average_rounds(&p.rounds)?;
            results.push(ArchitectureMetrics::from_counts(&p.classifier, p.architecture, mean)?);
        }
        let discriminator = results
            .iter()
            .find(|r| r.architecture == Architecture::Cascade)
            .map(|r| {
                Ok::<_, Error>(DiscriminatorSummary {
                    counts: r.counts,
                    elimination: EliminationRates::from_counts(&r.counts)?,
                })
            })
            .transpose()?;
        Ok(MetricReport {
            rounds_completed,
            rounds_failed,
            discriminator,
            results,
        })
    }

    pub fn get(&self, classifier: &str, architecture: Architecture) -> Option<&ArchitectureMetrics> {
        self.results
            .iter()
            .find(|r| r.classifier == classifier && r.architecture == architecture)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Table-shaped CSV: one row per (metric, architecture, contributor), one
    /// column per classifier. Rates to 3 decimals, counts to 1.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut classifiers: Vec<&str> = Vec::new();
        for r in &self.results {
            if !classifiers.contains(&r.classifier.as_str()) {
                classifiers.push(&r.classifier);
            }
        }
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["metric", "architecture", "contributed_by"];
        header.extend(classifiers.iter().copied());
        w.write_record(&header)?;

        type Pick = fn(&ArchitectureMetrics) -> f64;
        let rows: [(&str, Architecture, &str, Pick); 13] = [
            ("aasr", Architecture::Flat, "classifier", |m| m.aasr),
            ("aasr", Architecture::Cascade, "discriminator", |m| m.aasr_after_discriminator),
            ("aasr", Architecture::Cascade, "finally", |m| m.aasr),
            ("aadr", Architecture::Flat, "classifier", |m| m.aadr.total),
            ("aadr", Architecture::Cascade, "discriminator", |m| m.aadr.discriminator),
            ("aadr", Architecture::Cascade, "classifier", |m| m.aadr.classifier),
            ("aadr", Architecture::Cascade, "finally", |m| m.aadr.total),
            ("oadr", Architecture::Flat, "classifier", |m| m.oadr.total),
            ("oadr", Architecture::Cascade, "discriminator", |m| m.oadr.discriminator),
            ("oadr", Architecture::Cascade, "classifier", |m| m.oadr.classifier),
            ("oadr", Architecture::Cascade, "finally", |m| m.oadr.total),
            ("legitimate_loss_rate", Architecture::Flat, "classifier", |m| m.legitimate_loss_rate),
            ("legitimate_loss_rate", Architecture::Cascade, "finally", |m| m.legitimate_loss_rate),
        ];
        for (metric, arch, by, pick) in rows {
            let mut rec = vec![metric.to_string(), arch.to_string(), by.to_string()];
            for c in &classifiers {
                rec.push(self.get(c, arch).map_or(String::new(), |m| format!("{:.3}", pick(m))));
            }
            w.write_record(&rec)?;
        }

        type Count = fn(&RoundCounts) -> f64;
        let counts: [(&str, Count); 6] = [
            ("detected_original_fake", |c| c.do_dis + c.do_cla),
            ("detected_adversarial_fake", |c| c.da_dis + c.da_cla),
            ("classifier_detected_original_fake", |c| c.do_cla),
            ("classifier_detected_adversarial_fake", |c| c.da_cla),
            ("discriminator_detected_original_fake", |c| c.do_dis),
            ("discriminator_detected_adversarial_fake", |c| c.da_dis),
        ];
        for arch in [Architecture::Flat, Architecture::Cascade] {
            for (name, pick) in counts {
                let mut rec = vec![name.to_string(), arch.to_string(), "count".to_string()];
                for c in &classifiers {
                    rec.push(self.get(c, arch).map_or(String::new(), |m| format!("{:.1}", pick(&m.counts))));
                }
                w.write_record(&rec)?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}
