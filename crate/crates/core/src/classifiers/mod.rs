//! Level-2 binary classifiers: k-nearest neighbours, Gaussian naive Bayes and
//! a CART decision tree. Labels are 1 = legitimate, 0 = fake.

mod knn;
mod naive_bayes;
mod tree;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use knn::Knn;
pub use naive_bayes::GaussianNb;
pub use tree::{best_split, gini, DecisionTree, Node, SplitChoice};

pub const DEFAULT_K: usize = 5;
pub const DEFAULT_VAR_SMOOTHING: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierKind {
    Knn { k: usize },
    GaussianNb { var_smoothing: f64 },
    DecisionTree { max_depth: Option<usize> },
}

impl ClassifierKind {
    /// The three detectors with their default hyperparameters.
    pub fn defaults() -> Vec<ClassifierKind> {
        vec![
            ClassifierKind::Knn { k: DEFAULT_K },
            ClassifierKind::GaussianNb {
                var_smoothing: DEFAULT_VAR_SMOOTHING,
            },
            ClassifierKind::DecisionTree { max_depth: None },
        ]
    }

    /// Short name used in file names and reports.
    pub fn short_name(&self) -> &'static str {
        match self {
            ClassifierKind::Knn { .. } => "knn",
            ClassifierKind::GaussianNb { .. } => "nb",
            ClassifierKind::DecisionTree { .. } => "dt",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ClassifierKind::Knn { k } if k == 0 || k % 2 == 0 => {
                Err(Error::Config(format!("knn k must be odd and >= 1, got {k}")))
            }
            ClassifierKind::GaussianNb { var_smoothing } if !(var_smoothing > 0.0 && var_smoothing.is_finite()) => {
                Err(Error::Config(format!("var_smoothing must be positive, got {var_smoothing}")))
            }
            ClassifierKind::DecisionTree { max_depth: Some(0) } => {
                Err(Error::Config("max_depth must be positive when set".into()))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    /// Accepts `knn`, `knn:7`, `nb`, `nb:1e-9`, `dt`, `dt:12`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let bad = || Error::Config(format!("cannot parse classifier `{s}`"));
        let kind = match name {
            "knn" => ClassifierKind::Knn {
                k: arg.map_or(Ok(DEFAULT_K), |a| a.parse().map_err(|_| bad()))?,
            },
            "nb" | "gaussian_nb" => ClassifierKind::GaussianNb {
                var_smoothing: arg.map_or(Ok(DEFAULT_VAR_SMOOTHING), |a| a.parse().map_err(|_| bad()))?,
            },
            "dt" | "decision_tree" => ClassifierKind::DecisionTree {
                max_depth: arg.map(|a| a.parse().map_err(|_| bad())).transpose()?,
            },
            _ => return Err(bad()),
        };
        kind.validate()?;
        Ok(kind)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedClassifier {
    Knn(Knn),
    GaussianNb(GaussianNb),
    DecisionTree(DecisionTree),
}

pub(crate) fn check_training_set(rows: &Array2<f64>, labels: &[u8]) -> Result<()> {
    if rows.nrows() != labels.len() {
        return Err(Error::Shape(format!(
            "{} rows but {} labels",
            rows.nrows(),
            labels.len()
        )));
    }
    if rows.ncols() == 0 {
        return Err(Error::Shape("rows have no features".into()));
    }
    if let Some(bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::Data(format!("label {bad} is not binary")));
    }
    if !(labels.contains(&0) && labels.contains(&1)) {
        return Err(Error::Data("training set must contain both classes".into()));
    }
    if !rows.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("classifier training rows".into()));
    }
    Ok(())
}

/// Fits a classifier. Deterministic for a given input.
pub fn fit(kind: ClassifierKind, rows: &Array2<f64>, labels: &[u8]) -> Result<TrainedClassifier> {
    kind.validate()?;
    check_training_set(rows, labels)?;
    Ok(match kind {
        ClassifierKind::Knn { k } => TrainedClassifier::Knn(Knn::fit(k, rows, labels)),
        ClassifierKind::GaussianNb { var_smoothing } => {
            TrainedClassifier::GaussianNb(GaussianNb::fit(var_smoothing, rows, labels))
        }
        ClassifierKind::DecisionTree { max_depth } => {
            TrainedClassifier::DecisionTree(DecisionTree::fit(max_depth, rows, labels))
        }
    })
}

impl TrainedClassifier {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            TrainedClassifier::Knn(m) => ClassifierKind::Knn { k: m.k() },
            TrainedClassifier::GaussianNb(m) => ClassifierKind::GaussianNb {
                var_smoothing: m.var_smoothing(),
            },
            TrainedClassifier::DecisionTree(m) => ClassifierKind::DecisionTree {
                max_depth: m.max_depth(),
            },
        }
    }

    pub fn feature_dim(&self) -> usize {
        match self {
            TrainedClassifier::Knn(m) => m.feature_dim(),
            TrainedClassifier::GaussianNb(m) => m.feature_dim(),
            TrainedClassifier::DecisionTree(m) => m.feature_dim(),
        }
    }

    pub fn predict_row(&self, row: ArrayView1<'_, f64>) -> u8 {
        match self {
            TrainedClassifier::Knn(m) => m.predict_row(row),
            TrainedClassifier::GaussianNb(m) => m.predict_row(row),
            TrainedClassifier::DecisionTree(m) => m.predict_row(row),
        }
    }

    /// Hard 0/1 labels, one per row.
    pub fn predict(&self, rows: &Array2<f64>) -> Result<Vec<u8>> {
        use rayon::prelude::*;

        if rows.nrows() > 0 && rows.ncols() != self.feature_dim() {
            return Err(Error::Shape(format!(
                "rows have {} features, classifier was fit on {}",
                rows.ncols(),
                self.feature_dim()
            )));
        }
        Ok((0..rows.nrows())
            .into_par_iter()
            .map(|i| self.predict_row(rows.row(i)))
            .collect())
    }

    /// JSON checkpoint. KNN stores only `k` plus a reference to its training
    /// data; NB and DT store their fitted state.
    pub fn to_checkpoint(&self, dataset_reference: &str) -> ClassifierCheckpoint {
        match self {
            TrainedClassifier::Knn(m) => ClassifierCheckpoint::Knn {
                k: m.k(),
                dataset: dataset_reference.to_string(),
                rows: m.len(),
            },
            TrainedClassifier::GaussianNb(m) => ClassifierCheckpoint::GaussianNb(m.clone()),
            TrainedClassifier::DecisionTree(m) => ClassifierCheckpoint::DecisionTree(m.clone()),
        }
    }

    /// Restores a classifier. KNN checkpoints need their training data back.
    pub fn from_checkpoint(ckpt: ClassifierCheckpoint, knn_data: Option<(&Array2<f64>, &[u8])>) -> Result<Self> {
        match ckpt {
            ClassifierCheckpoint::Knn { k, rows, dataset } => {
                let (x, y) = knn_data
                    .ok_or_else(|| Error::Data(format!("knn checkpoint needs its training data ({dataset})")))?;
                if x.nrows() != rows {
                    return Err(Error::Data(format!(
                        "knn checkpoint references {rows} rows, got {}",
                        x.nrows()
                    )));
                }
                fit(ClassifierKind::Knn { k }, x, y)
            }
            ClassifierCheckpoint::GaussianNb(m) => Ok(TrainedClassifier::GaussianNb(m)),
            ClassifierCheckpoint::DecisionTree(m) => Ok(TrainedClassifier::DecisionTree(m)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierCheckpoint {
    Knn { k: usize, dataset: String, rows: usize },
    GaussianNb(GaussianNb),
    DecisionTree(DecisionTree),
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn kind_validation() {
        assert!(ClassifierKind::Knn { k: 4 }.validate().is_err());
        assert!(ClassifierKind::Knn { k: 0 }.validate().is_err());
        assert!(ClassifierKind::GaussianNb { var_smoothing: 0.0 }.validate().is_err());
        assert!(ClassifierKind::DecisionTree { max_depth: Some(0) }.validate().is_err());
        for k in ClassifierKind::defaults() {
            k.validate().unwrap();
        }
    }

    #[test]
    fn parses_kinds() {
        assert_eq!("knn".parse::<ClassifierKind>().unwrap(), ClassifierKind::Knn { k: 5 });
        assert_eq!("knn:3".parse::<ClassifierKind>().unwrap(), ClassifierKind::Knn { k: 3 });
        assert!("knn:2".parse::<ClassifierKind>().is_err());
        assert_eq!(
            "dt:4".parse::<ClassifierKind>().unwrap(),
            ClassifierKind::DecisionTree { max_depth: Some(4) }
        );
        assert!("svm".parse::<ClassifierKind>().is_err());
    }

    #[test]
    fn single_class_input_is_rejected() {
        let x = array![[0.0], [1.0]];
        for kind in ClassifierKind::defaults() {
            assert!(matches!(fit(kind, &x, &[1, 1]), Err(Error::Data(_))));
        }
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let x = array![[0.0, 0.0], [1.0, 1.0]];
        for kind in ClassifierKind::defaults() {
            let kind = match kind {
                ClassifierKind::Knn { .. } => ClassifierKind::Knn { k: 1 },
                k => k,
            };
            let m = fit(kind, &x, &[0, 1]).unwrap();
            assert!(matches!(m.predict(&array![[0.0, 0.0, 0.0]]), Err(Error::Shape(_))));
            assert_eq!(m.predict(&Array2::zeros((0, 2))).unwrap(), Vec::<u8>::new());
        }
    }

    #[test]
    fn checkpoints_roundtrip() {
        let x = array![[0.0, 0.1], [0.2, 0.0], [1.0, 0.9], [0.9, 1.1], [0.5, 0.4]];
        let y = [0, 0, 1, 1, 0];
        for kind in [
            ClassifierKind::Knn { k: 3 },
            ClassifierKind::GaussianNb { var_smoothing: 1e-9 },
            ClassifierKind::DecisionTree { max_depth: None },
        ] {
            let m = fit(kind, &x, &y).unwrap();
            let json = serde_json::to_string(&m.to_checkpoint("dataset.csv")).unwrap();
            let ckpt: ClassifierCheckpoint = serde_json::from_str(&json).unwrap();
            let back = TrainedClassifier::from_checkpoint(ckpt, Some((&x, &y))).unwrap();
            assert_eq!(back, m);
        }
        let knn = fit(ClassifierKind::Knn { k: 1 }, &x, &y).unwrap();
        assert!(TrainedClassifier::from_checkpoint(knn.to_checkpoint("d"), None).is_err());
    }
}
