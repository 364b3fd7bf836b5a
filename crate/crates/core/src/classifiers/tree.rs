use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

const MIN_SAMPLES_SPLIT: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        /// Training rows per label.
        counts: [usize; 2],
    },
    Split {
        feature: usize,
        /// Rows with `x[feature] <= threshold` go left.
        threshold: f64,
        counts: [usize; 2],
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    pub fn counts(&self) -> [usize; 2] {
        match self {
            Node::Leaf { counts } | Node::Split { counts, .. } => *counts,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaves(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Split { left, right, .. } => left.leaves() + right.leaves(),
        }
    }
}

/// Chosen split for one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    /// Size-weighted Gini impurity of the two children.
    pub weighted_gini: f64,
}

pub fn gini(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p0 = counts[0] as f64 / n;
    let p1 = counts[1] as f64 / n;
    1.0 - p0 * p0 - p1 * p1
}

/// Midpoint of two adjacent distinct values that still separates them.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m < hi {
        m
    } else {
        lo
    }
}

/// Purity of a split as the exact fraction
/// `(|l|^2 / n_l + |r|^2 / n_r)`, where `|c|^2` is the sum of squared label
/// counts. Larger is purer; weighted Gini is `1 - purity / n`.
fn purity(left: [usize; 2], right: [usize; 2]) -> (u128, u128) {
    let sq = |c: [usize; 2]| (c[0] * c[0] + c[1] * c[1]) as u128;
    let (nl, nr) = ((left[0] + left[1]) as u128, (right[0] + right[1]) as u128);
    (sq(left) * nr + sq(right) * nl, nl * nr)
}

/// Best Gini split over `idx`. Candidate thresholds are midpoints between
/// adjacent distinct sorted values. Scores are compared exactly, so ties keep
/// the lowest feature index, then the lowest threshold.
pub fn best_split(rows: &Array2<f64>, labels: &[u8], idx: &[usize]) -> Option<SplitChoice> {
    let n = idx.len();
    let mut total = [0usize; 2];
    for &i in idx {
        total[labels[i] as usize] += 1;
    }
    let mut best: Option<(SplitChoice, (u128, u128))> = None;
    let mut order = idx.to_vec();
    for feature in 0..rows.ncols() {
        order.sort_by(|&a, &b| rows[[a, feature]].total_cmp(&rows[[b, feature]]).then(a.cmp(&b)));
        let mut left = [0usize; 2];
        for pos in 0..n.saturating_sub(1) {
            left[labels[order[pos]] as usize] += 1;
            let here = rows[[order[pos], feature]];
            let next = rows[[order[pos + 1], feature]];
            if here == next {
                continue;
            }
            let right = [total[0] - left[0], total[1] - left[1]];
            let score = purity(left, right);
            if best.is_none_or(|(_, b)| score.0 * b.1 > b.0 * score.1) {
                let n_left = (pos + 1) as f64;
                let weighted = (n_left * gini(left) + (n as f64 - n_left) * gini(right)) / n as f64;
                best = Some((
                    SplitChoice {
                        feature,
                        threshold: midpoint(here, next),
                        weighted_gini: weighted,
                    },
                    score,
                ));
            }
        }
    }
    best.map(|(choice, _)| choice)
}

/// CART classification tree grown greedily on Gini impurity.
///
/// Nodes split while impure, holding at least two rows, under `max_depth`,
/// and some feature still separates their rows. Leaves predict the majority
/// label; a tied leaf predicts 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    max_depth: Option<usize>,
    feature_dim: usize,
    pub root: Node,
}

impl DecisionTree {
    pub(crate) fn fit(max_depth: Option<usize>, rows: &Array2<f64>, labels: &[u8]) -> Self {
        let idx: Vec<usize> = (0..rows.nrows()).collect();
        let root = grow(rows, labels, idx, 0, max_depth);
        DecisionTree {
            max_depth,
            feature_dim: rows.ncols(),
            root,
        }
    }

    pub fn max_depth(&self) -> Option<usize> {
        self.max_depth
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn predict_row(&self, row: ArrayView1<'_, f64>) -> u8 {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { counts } => return u8::from(counts[1] > counts[0]),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if row[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }
}

fn grow(rows: &Array2<f64>, labels: &[u8], idx: Vec<usize>, depth: usize, max_depth: Option<usize>) -> Node {
    let mut counts = [0usize; 2];
    for &i in &idx {
        counts[labels[i] as usize] += 1;
    }
    let pure = counts[0] == 0 || counts[1] == 0;
    let depth_reached = max_depth.is_some_and(|d| depth >= d);
    if pure || idx.len() < MIN_SAMPLES_SPLIT || depth_reached {
        return Node::Leaf { counts };
    }
    let Some(choice) = best_split(rows, labels, &idx) else {
        return Node::Leaf { counts };
    };
    let (left, right): (Vec<usize>, Vec<usize>) = idx
        .into_iter()
        .partition(|&i| rows[[i, choice.feature]] <= choice.threshold);
    Node::Split {
        feature: choice.feature,
        threshold: choice.threshold,
        counts,
        left: Box::new(grow(rows, labels, left, depth + 1, max_depth)),
        right: Box::new(grow(rows, labels, right, depth + 1, max_depth)),
    }
}
