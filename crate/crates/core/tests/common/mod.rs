//! Reference oracles shared by the oracle tests and the acceptance run.
#![allow(dead_code)]

use ndarray::{array, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use taskguard::classifiers::{best_split, fit, gini, ClassifierKind, Node, TrainedClassifier};
use taskguard::nn::{bce_loss, Activation, LayerSpec, Mlp, OutputGrad, TrainBatch};

pub const FD_STEP: f64 = 1e-5;

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(lo..hi))
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn batch_loss(m: &Mlp, batch: &TrainBatch) -> f64 {
    bce_loss(&m.predict(&batch.inputs).unwrap(), &batch.targets).unwrap()
}

/// Worst relative error between backprop and central differences over
/// every parameter of `nets` random small networks. Hidden activations
/// cycle through tanh, sigmoid and leaky ReLU.
pub fn worst_parameter_gradient_error(nets: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hidden = [Activation::Tanh, Activation::Sigmoid, Activation::LeakyRelu];
    let mut worst = 0.0f64;
    for net in 0..nets {
        let act = hidden[net % hidden.len()];
        let depth = rng.random_range(1..=3);
        let mut widths = vec![rng.random_range(1..=5)];
        for _ in 0..depth {
            widths.push(rng.random_range(1..=6));
        }
        widths.push(rng.random_range(1..=3));
        let specs = LayerSpec::chain(&widths, act, Activation::Sigmoid);
        let mut m = Mlp::init(&specs, 0.01, net as u64).unwrap();
        for l in m.layers_mut() {
            l.bias.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        }
        let rows = rng.random_range(1..=4);
        let inputs = random_matrix(&mut rng, rows, widths[0], -1.0, 1.0);
        let targets = Array2::from_shape_simple_fn((rows, *widths.last().unwrap()), || {
            f64::from(u8::from(rng.random_bool(0.5)))
        });
        let batch = TrainBatch::new(inputs, targets).unwrap();
        let (_, grads) = m.loss_and_gradients(&batch).unwrap();

        let mut probe = |m: &mut Mlp, get: &dyn Fn(&mut Mlp) -> &mut f64, analytic: f64| {
            let orig = *get(m);
            *get(m) = orig + FD_STEP;
            let up = batch_loss(m, &batch);
            *get(m) = orig - FD_STEP;
            let down = batch_loss(m, &batch);
            *get(m) = orig;
            worst = worst.max(relative_error((up - down) / (2.0 * FD_STEP), analytic));
        };
        for li in 0..m.layers().len() {
            let (n_in, n_out) = m.layers()[li].weights.dim();
            for i in 0..n_in {
                for j in 0..n_out {
                    probe(&mut m, &|m: &mut Mlp| &mut m.layers_mut()[li].weights[[i, j]], grads.weights[li][[i, j]]);
                }
            }
            for j in 0..n_out {
                probe(&mut m, &|m: &mut Mlp| &mut m.layers_mut()[li].bias[j], grads.biases[li][j]);
            }
        }
    }
    worst
}

/// Worst relative error of the input gradient of `sum(w * out)`, routed
/// through an activation-space output gradient (the generator's path).
pub fn worst_input_gradient_error(nets: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for net in 0..nets {
        let head = [Activation::Tanh, Activation::Linear, Activation::Sigmoid][net % 3];
        let hidden = [Activation::Tanh, Activation::Sigmoid, Activation::LeakyRelu][(net / 3) % 3];
        let specs = LayerSpec::chain(&[4, 5, 3], hidden, head);
        let m = Mlp::init(&specs, 0.01, net as u64).unwrap();
        let x = random_matrix(&mut rng, 2, 4, -1.0, 1.0);
        let w = random_matrix(&mut rng, 2, 3, -1.0, 1.0);
        let objective = |x: &Array2<f64>| (&m.predict(x).unwrap() * &w).sum();
        let acts = m.forward(&x).unwrap();
        let (_, input_grad) = m.backward(&acts, OutputGrad::Activation(w.clone()), false).unwrap();
        for r in 0..2 {
            for c in 0..4 {
                let mut up = x.clone();
                up[[r, c]] += FD_STEP;
                let mut down = x.clone();
                down[[r, c]] -= FD_STEP;
                let numeric = (objective(&up) - objective(&down)) / (2.0 * FD_STEP);
                worst = worst.max(relative_error(numeric, input_grad[[r, c]]));
            }
        }
    }
    worst
}

/// Every (feature, midpoint) candidate scored directly; near-equal scores
/// keep the first candidate met.
pub fn exhaustive_split(rows: &Array2<f64>, labels: &[u8]) -> Option<(usize, f64, f64)> {
    let n = rows.nrows();
    let mut best: Option<(usize, f64, f64)> = None;
    for f in 0..rows.ncols() {
        let mut values: Vec<f64> = rows.column(f).to_vec();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for pair in values.windows(2) {
            let t = pair[0] + (pair[1] - pair[0]) / 2.0;
            let mut left = [0usize; 2];
            let mut right = [0usize; 2];
            for i in 0..n {
                if rows[[i, f]] <= t {
                    left[labels[i] as usize] += 1;
                } else {
                    right[labels[i] as usize] += 1;
                }
            }
            let nl = (left[0] + left[1]) as f64;
            let score = (nl * gini(left) + (n as f64 - nl) * gini(right)) / n as f64;
            if best.is_none_or(|(_, _, b)| score < b - 1e-12) {
                best = Some((f, t, score));
            }
        }
    }
    best
}

/// Compares `best_split` and the fitted root split with the exhaustive
/// oracle on random sets of at most ten points.
pub fn check_tree_splits(cases: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        let n = rng.random_range(2..=10);
        let d = rng.random_range(1..=3);
        // Small integer grid so duplicate values and score ties occur.
        let rows = Array2::from_shape_simple_fn((n, d), || f64::from(rng.random_range(0..5u8)));
        let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2u8)).collect();
        let idx: Vec<usize> = (0..n).collect();
        let want = exhaustive_split(&rows, &labels);
        match (best_split(&rows, &labels, &idx), want) {
            (None, None) => {}
            (Some(g), Some((f, t, s))) => {
                if (g.weighted_gini - s).abs() >= 1e-12 || (g.feature, g.threshold) != (f, t) {
                    return Err(format!("case {case}: got {g:?}, expected ({f}, {t}, {s})"));
                }
            }
            other => return Err(format!("case {case}: {other:?}")),
        }
        if labels.contains(&0) && labels.contains(&1) {
            let clf = fit(ClassifierKind::DecisionTree { max_depth: None }, &rows, &labels).unwrap();
            let TrainedClassifier::DecisionTree(tree) = clf else { unreachable!() };
            if let (Node::Split { feature, threshold, .. }, Some((f, t, _))) = (&tree.root, want) {
                if (*feature, *threshold) != (f, t) {
                    return Err(format!("case {case}: root split ({feature}, {threshold}) vs ({f}, {t})"));
                }
            }
        }
    }
    Ok(())
}

/// Largest deviation from hand-computed naive Bayes quantities.
///
/// Class 0: (0,1) (2,3) (4,2); class 1: (1,0) (3,1); query (2,1). The
/// largest overall population variance is 2, so epsilon = 2e-9.
pub fn naive_bayes_hand_error() -> f64 {
    let rows = array![[0.0, 1.0], [2.0, 3.0], [4.0, 2.0], [1.0, 0.0], [3.0, 1.0]];
    let labels = [0, 0, 0, 1, 1];
    let clf = fit(ClassifierKind::GaussianNb { var_smoothing: 1e-9 }, &rows, &labels).unwrap();
    let TrainedClassifier::GaussianNb(nb) = &clf else { unreachable!() };

    let mut err = 0.0f64;
    let mut track = |got: f64, want: f64| err = err.max((got - want).abs());
    track(nb.priors[0], 0.6);
    track(nb.priors[1], 0.4);
    let means = [[2.0, 2.0], [2.0, 0.5]];
    let vars = [[8.0 / 3.0 + 2e-9, 2.0 / 3.0 + 2e-9], [1.0 + 2e-9, 0.25 + 2e-9]];
    for c in 0..2 {
        for j in 0..2 {
            track(nb.means[c][j], means[c][j]);
            track(nb.variances[c][j], vars[c][j]);
        }
    }
    let lp = nb.log_posteriors(array![2.0, 1.0].view());
    track(lp[0], -3.386384762252117);
    track(lp[1], -2.561020618723555);
    track(1.0 / (1.0 + (lp[0] - lp[1]).exp()), 0.695373811021335);
    if clf.predict_row(array![2.0, 1.0].view()) != 1 {
        return f64::INFINITY;
    }
    err
}

/// KNN neighbours and votes against a full sort of all distances.
pub fn check_knn_brute_force(queries: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = random_matrix(&mut rng, 300, 4, -1.0, 1.0);
    // Duplicated rows force distance ties.
    for i in 0..40 {
        let src = rows.row(i).to_owned();
        rows.row_mut(299 - i).assign(&src);
    }
    let labels: Vec<u8> = (0..300).map(|_| rng.random_range(0..2u8)).collect();
    let k = 5;
    let clf = fit(ClassifierKind::Knn { k }, &rows, &labels).unwrap();
    let TrainedClassifier::Knn(knn) = &clf else { unreachable!() };

    let mut qs = random_matrix(&mut rng, queries, 4, -1.2, 1.2);
    for q in 0..queries.min(1000) / 10 {
        qs.row_mut(q * 10).assign(&rows.row(q));
    }
    for (n, q) in qs.rows().into_iter().enumerate() {
        let mut all: Vec<(f64, usize)> = rows
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, r)| (r.iter().zip(q.iter()).map(|(a, b)| (a - b).powi(2)).sum(), i))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let expected: Vec<usize> = all[..k].iter().map(|p| p.1).collect();
        if knn.neighbours(q) != expected {
            return Err(format!("query {n}: neighbours differ"));
        }
        let votes = expected.iter().filter(|&&i| labels[i] == 1).count();
        if clf.predict_row(q) != u8::from(votes * 2 > k) {
            return Err(format!("query {n}: vote differs"));
        }
    }
    Ok(())
}
