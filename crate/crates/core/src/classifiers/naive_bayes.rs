use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

/// Gaussian naive Bayes with per-class feature means/variances.
///
/// Every variance is inflated by `var_smoothing * max_j Var(x_j)` (or by
/// `var_smoothing` alone when all features are constant).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    var_smoothing: f64,
    /// Indexed by label.
    pub priors: [f64; 2],
    pub means: [Vec<f64>; 2],
    pub variances: [Vec<f64>; 2],
}

fn column_stats(rows: &Array2<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = rows.nrows() as f64;
    let means: Vec<f64> = rows.mean_axis(Axis(0)).expect("nonempty").to_vec();
    let vars = rows
        .columns()
        .into_iter()
        .zip(&means)
        .map(|(c, m)| c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n)
        .collect();
    (means, vars)
}

impl GaussianNb {
    pub(crate) fn fit(var_smoothing: f64, rows: &Array2<f64>, labels: &[u8]) -> Self {
        let (_, all_vars) = column_stats(rows);
        let max_var = all_vars.iter().cloned().fold(0.0, f64::max);
        let epsilon = if max_var > 0.0 {
            var_smoothing * max_var
        } else {
            var_smoothing
        };

        let n = labels.len() as f64;
        let mut priors = [0.0; 2];
        let mut means: [Vec<f64>; 2] = Default::default();
        let mut variances: [Vec<f64>; 2] = Default::default();
        for class in 0..2u8 {
            let idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
            let sub = rows.select(Axis(0), &idx);
            let (m, v) = column_stats(&sub);
            priors[class as usize] = idx.len() as f64 / n;
            means[class as usize] = m;
            variances[class as usize] = v.into_iter().map(|v| v + epsilon).collect();
        }
        GaussianNb {
            var_smoothing,
            priors,
            means,
            variances,
        }
    }

    pub fn var_smoothing(&self) -> f64 {
        self.var_smoothing
    }

    pub fn feature_dim(&self) -> usize {
        self.means[0].len()
    }

    /// Unnormalized log-posterior of each class.
    pub fn log_posteriors(&self, row: ArrayView1<'_, f64>) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (c, slot) in out.iter_mut().enumerate() {
            let log_lik: f64 = row
                .iter()
                .zip(&self.means[c])
                .zip(&self.variances[c])
                .map(|((x, m), v)| -0.5 * ((2.0 * std::f64::consts::PI * v).ln() + (x - m) * (x - m) / v))
                .sum();
            *slot = self.priors[c].ln() + log_lik;
        }
        out
    }

    /// Exact ties resolve to label 0.
    pub fn predict_row(&self, row: ArrayView1<'_, f64>) -> u8 {
        let lp = self.log_posteriors(row);
        u8::from(lp[1] > lp[0])
    }
}
