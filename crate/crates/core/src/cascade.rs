//! Two-level detection: the GAN discriminator filters rows it believes are
//! generated, and a binary classifier judges the survivors.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{concatenate, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::classifiers::TrainedClassifier;
use crate::error::{Error, Result};
use crate::gan::{GanModel, SyntheticBatch};
use crate::synth::{Origin, Partition};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Test-split rows plus generated rows, each tagged with its origin.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedDataset {
    pub rows: Array2<f64>,
    pub origin: Vec<Origin>,
}

impl MixedDataset {
    pub fn len(&self) -> usize {
        self.origin.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origin.is_empty()
    }

    /// Evaluation label: 1 for real test rows, 0 for generated rows.
    pub fn disc_label(&self, i: usize) -> u8 {
        u8::from(self.origin[i] != Origin::AdversarialFake)
    }

    pub fn count(&self, origin: Origin) -> usize {
        self.origin.iter().filter(|o| **o == origin).count()
    }

    /// (rows labeled 0, rows labeled 1).
    pub fn class_counts(&self) -> (usize, usize) {
        let synthetic = self.count(Origin::AdversarialFake);
        (synthetic, self.len() - synthetic)
    }
}

/// Concatenates the test partition with the generated batch.
pub fn build_mixed(test: &Partition, synthetic: &SyntheticBatch) -> Result<MixedDataset> {
    if !synthetic.is_empty() && synthetic.rows.ncols() != test.features.ncols() {
        return Err(Error::Shape(format!(
            "synthetic rows have {} features, test rows {}",
            synthetic.rows.ncols(),
            test.features.ncols()
        )));
    }
    let rows = if synthetic.is_empty() {
        test.features.clone()
    } else {
        concatenate(Axis(0), &[test.features.view(), synthetic.rows.view()])
            .map_err(|e| Error::Shape(e.to_string()))?
    };
    let origin = test
        .provenance
        .iter()
        .copied()
        .chain(std::iter::repeat_n(Origin::AdversarialFake, synthetic.len()))
        .collect();
    Ok(MixedDataset { rows, origin })
}

/// Anything that scores rows with a probability of being real.
pub trait RealnessScorer {
    fn score(&self, rows: &Array2<f64>) -> Result<Vec<f64>>;
}

impl RealnessScorer for GanModel {
    fn score(&self, rows: &Array2<f64>) -> Result<Vec<f64>> {
        if !self.is_trained() {
            return Err(Error::Untrained("discriminator".into()));
        }
        self.discriminate(rows)
    }
}

/// Scores every row with the same probability.
#[derive(Debug, Clone, Copy)]
pub struct ConstantScorer(pub f64);

impl RealnessScorer for ConstantScorer {
    fn score(&self, rows: &Array2<f64>) -> Result<Vec<f64>> {
        Ok(vec![self.0; rows.nrows()])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscPrediction {
    Real,
    Adversarial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierPrediction {
    Legitimate,
    Fake,
    NotEvaluated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Disposition {
    Accepted,
    EliminatedByDiscriminator,
    EliminatedByClassifier,
}

macro_rules! str_enum {
    ($ty:ty { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $(Self::$variant => $name),+ }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok(Self::$variant),)+
                    other => Err(Error::Data(format!(
                        "unknown {} `{other}`", stringify!($ty)
                    ))),
                }
            }
        }
    };
}

str_enum!(DiscPrediction { Real => "real", Adversarial => "adversarial" });
str_enum!(ClassifierPrediction {
    Legitimate => "legitimate",
    Fake => "fake",
    NotEvaluated => "not_evaluated",
});
str_enum!(Disposition {
    Accepted => "accepted",
    EliminatedByDiscriminator => "eliminated_by_discriminator",
    EliminatedByClassifier => "eliminated_by_classifier",
});

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeVerdict {
    pub index: usize,
    pub origin: Origin,
    pub disc_probability: f64,
    pub disc_prediction: DiscPrediction,
    pub classifier_prediction: ClassifierPrediction,
    pub final_disposition: Disposition,
}

impl CascadeVerdict {
    /// Checks the cross-field invariants of a verdict.
    pub fn is_consistent(&self) -> bool {
        use ClassifierPrediction as C;
        use Disposition as D;
        matches!(
            (self.disc_prediction, self.classifier_prediction, self.final_disposition),
            (DiscPrediction::Adversarial, C::NotEvaluated, D::EliminatedByDiscriminator)
                | (DiscPrediction::Real, C::Legitimate, D::Accepted)
                | (DiscPrediction::Real, C::Fake, D::EliminatedByClassifier)
        )
    }
}

/// Level-1/level-2 verdicts in row order. Rows scoring below `threshold` are
/// eliminated by the discriminator and never reach the classifier.
pub fn classify_mixed_with<S: RealnessScorer + ?Sized>(
    mixed: &MixedDataset,
    scorer: &S,
    clf: &TrainedClassifier,
    threshold: f64,
) -> Result<Vec<CascadeVerdict>> {
    if mixed.is_empty() {
        return Ok(Vec::new());
    }
    let probs = scorer.score(&mixed.rows)?;
    if probs.len() != mixed.len() {
        return Err(Error::Shape(format!("{} scores for {} rows", probs.len(), mixed.len())));
    }
    let forwarded: Vec<usize> = (0..mixed.len()).filter(|&i| probs[i] >= threshold).collect();
    let labels = clf.predict(&mixed.rows.select(Axis(0), &forwarded))?;

    let mut verdicts: Vec<CascadeVerdict> = (0..mixed.len())
        .map(|i| CascadeVerdict {
            index: i,
            origin: mixed.origin[i],
            disc_probability: probs[i],
            disc_prediction: DiscPrediction::Adversarial,
            classifier_prediction: ClassifierPrediction::NotEvaluated,
            final_disposition: Disposition::EliminatedByDiscriminator,
        })
        .collect();
    for (&i, &label) in forwarded.iter().zip(&labels) {
        let v = &mut verdicts[i];
        v.disc_prediction = DiscPrediction::Real;
        if label == 1 {
            v.classifier_prediction = ClassifierPrediction::Legitimate;
            v.final_disposition = Disposition::Accepted;
        } else {
            v.classifier_prediction = ClassifierPrediction::Fake;
            v.final_disposition = Disposition::EliminatedByClassifier;
        }
    }
    Ok(verdicts)
}

/// Cascade with the trained GAN discriminator at the default threshold.
pub fn classify_mixed(mixed: &MixedDataset, disc: &GanModel, clf: &TrainedClassifier) -> Result<Vec<CascadeVerdict>> {
    classify_mixed_with(mixed, disc, clf, DEFAULT_THRESHOLD)
}

/// Every row goes straight to the classifier.
pub fn classify_flat(mixed: &MixedDataset, clf: &TrainedClassifier) -> Result<Vec<CascadeVerdict>> {
    classify_mixed_with(mixed, &ConstantScorer(1.0), clf, DEFAULT_THRESHOLD)
}

pub const VERDICT_CSV_HEADER: [&str; 6] = [
    "index",
    "origin",
    "disc_probability",
    "disc_prediction",
    "classifier_prediction",
    "final_disposition",
];

pub fn write_verdicts_csv(path: &Path, verdicts: &[CascadeVerdict]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(VERDICT_CSV_HEADER)?;
    for v in verdicts {
        w.write_record([
            v.index.to_string(),
            v.origin.to_string(),
            v.disc_probability.to_string(),
            v.disc_prediction.to_string(),
            v.classifier_prediction.to_string(),
            v.final_disposition.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_verdicts_csv(path: &Path) -> Result<Vec<CascadeVerdict>> {
    let mut r = csv::Reader::from_path(path)?;
    if r.headers()?.iter().ne(VERDICT_CSV_HEADER) {
        return Err(Error::Data(format!("{}: unexpected verdict header", path.display())));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or_default();
        let bad = |i: usize| Error::Data(format!("bad {} `{}`", VERDICT_CSV_HEADER[i], field(i)));
        out.push(CascadeVerdict {
            index: field(0).parse().map_err(|_| bad(0))?,
            origin: field(1).parse()?,
            disc_probability: field(2).parse().map_err(|_| bad(2))?,
            disc_prediction: field(3).parse()?,
            classifier_prediction: field(4).parse()?,
            final_disposition: field(5).parse()?,
        });
    }
    Ok(out)
}
