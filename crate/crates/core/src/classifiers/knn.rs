use ndarray::{Array2, ArrayView1};

/// Brute-force k-nearest-neighbour classifier over Euclidean distance.
///
/// Equal distances are broken by the lower training-row index, so the
/// neighbour set is fully deterministic. With odd `k` and binary labels the
/// vote cannot tie.
#[derive(Debug, Clone, PartialEq)]
pub struct Knn {
    k: usize,
    rows: Array2<f64>,
    labels: Vec<u8>,
}

impl Knn {
    pub(crate) fn fit(k: usize, rows: &Array2<f64>, labels: &[u8]) -> Self {
        Knn {
            k,
            rows: rows.to_owned(),
            labels: labels.to_vec(),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.rows.ncols()
    }

    /// Indices of the `k` nearest training rows, nearest first.
    pub fn neighbours(&self, query: ArrayView1<'_, f64>) -> Vec<usize> {
        let mut dist: Vec<(f64, usize)> = self
            .rows
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                let d: f64 = r.iter().zip(query.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                (d, i)
            })
            .collect();
        let k = self.k.min(dist.len());
        let by_dist_then_index = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, by_dist_then_index);
            dist.truncate(k);
        }
        dist.sort_unstable_by(by_dist_then_index);
        dist.into_iter().map(|(_, i)| i).collect()
    }

    pub fn predict_row(&self, query: ArrayView1<'_, f64>) -> u8 {
        let nn = self.neighbours(query);
        let ones = nn.iter().filter(|&&i| self.labels[i] == 1).count();
        u8::from(2 * ones > nn.len())
    }
}
