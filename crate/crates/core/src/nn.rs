//! Dense feed-forward networks trained with binary cross-entropy and
//! minibatch gradient descent (plain SGD, momentum, or Adam).

use std::path::Path;

use ndarray::{Array1, Array2, Axis, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probabilities are clamped to `[EPS, 1 - EPS]` before taking logs.
pub const BCE_EPSILON: f64 = 1e-7;

/// Negative-side slope of [`Activation::LeakyRelu`].
pub const LEAKY_RELU_SLOPE: f64 = 0.01;

const CHECKPOINT_FORMAT: &str = "taskguard-mlp";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Sigmoid,
    LeakyRelu,
    Linear,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => sigmoid(z),
            Activation::LeakyRelu => {
                if z > 0.0 {
                    z
                } else {
                    LEAKY_RELU_SLOPE * z
                }
            }
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the activation's output value.
    pub fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Sigmoid => a * (1.0 - a),
            Activation::LeakyRelu => {
                if a > 0.0 {
                    1.0
                } else {
                    LEAKY_RELU_SLOPE
                }
            }
            Activation::Linear => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub input_dim: usize,
    pub output_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(input_dim: usize, output_dim: usize, activation: Activation) -> Self {
        LayerSpec {
            input_dim,
            output_dim,
            activation,
        }
    }

    /// Chains `widths` into layers: `hidden` on every layer but the last,
    /// `head` on the last.
    pub fn chain(widths: &[usize], hidden: Activation, head: Activation) -> Vec<LayerSpec> {
        let n = widths.len().saturating_sub(1);
        (0..n)
            .map(|i| {
                let act = if i + 1 == n { head } else { hidden };
                LayerSpec::new(widths[i], widths[i + 1], act)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    /// `input_dim x output_dim`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Parameter gradients, one entry per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

/// Gradient arriving at the network output.
#[derive(Debug, Clone)]
pub enum OutputGrad {
    /// dL/da for the final activations.
    Activation(Array2<f64>),
    /// dL/dz for the final pre-activations (used for the fused
    /// sigmoid + cross-entropy head).
    PreActivation(Array2<f64>),
}

#[derive(Debug, Clone)]
pub struct TrainBatch {
    pub inputs: Array2<f64>,
    pub targets: Array2<f64>,
}

impl TrainBatch {
    pub fn new(inputs: Array2<f64>, targets: Array2<f64>) -> Result<Self> {
        if inputs.nrows() != targets.nrows() {
            return Err(Error::Shape(format!(
                "batch has {} input rows but {} target rows",
                inputs.nrows(),
                targets.nrows()
            )));
        }
        if !inputs.iter().chain(targets.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("training batch".into()));
        }
        Ok(TrainBatch { inputs, targets })
    }
}

/// Parameter update rule. Every rule steps along the batch-mean gradient.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Optimizer {
    /// `param -= lr * grad`.
    #[default]
    Sgd,
    /// Heavy-ball: `v = beta * v + grad; param -= lr * v`.
    Momentum { beta: f64 },
    /// Bias-corrected Adam.
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Optimizer {
    pub const ADAM_DEFAULT: Optimizer = Optimizer::Adam {
        beta1: 0.9,
        beta2: 0.999,
        epsilon: 1e-8,
    };

    pub fn validate(self) -> Result<()> {
        let unit = |b: f64| (0.0..1.0).contains(&b);
        let ok = match self {
            Optimizer::Sgd => true,
            Optimizer::Momentum { beta } => unit(beta),
            Optimizer::Adam { beta1, beta2, epsilon } => unit(beta1) && unit(beta2) && epsilon > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid optimizer {self:?}")))
        }
    }
}

/// Per-layer moment buffers, allocated on the first update.
#[derive(Debug, Clone, Default)]
struct OptimizerState {
    step: u64,
    first: Vec<(Array2<f64>, Array1<f64>)>,
    second: Vec<(Array2<f64>, Array1<f64>)>,
}

fn zeros_like(layers: &[Layer]) -> Vec<(Array2<f64>, Array1<f64>)> {
    layers
        .iter()
        .map(|l| (Array2::zeros(l.weights.raw_dim()), Array1::zeros(l.bias.len())))
        .collect()
}

#[derive(Debug, Clone)]
pub struct Mlp {
    layers: Vec<Layer>,
    pub learning_rate: f64,
    optimizer: Optimizer,
    state: OptimizerState,
}

/// Compares parameters and hyperparameters; optimizer moments are ignored.
impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers && self.learning_rate == other.learning_rate && self.optimizer == other.optimizer
    }
}

fn validate_specs(specs: &[LayerSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::Config("a network needs at least one layer".into()));
    }
    for (i, s) in specs.iter().enumerate() {
        if s.input_dim == 0 || s.output_dim == 0 {
            return Err(Error::Config(format!("layer {i} has a zero dimension")));
        }
        if i > 0 && specs[i - 1].output_dim != s.input_dim {
            return Err(Error::Config(format!(
                "layer {} outputs {} values but layer {i} expects {}",
                i - 1,
                specs[i - 1].output_dim,
                s.input_dim
            )));
        }
    }
    Ok(())
}

/// Mean binary cross-entropy over every element.
pub fn bce_loss(predictions: &Array2<f64>, targets: &Array2<f64>) -> Result<f64> {
    if predictions.dim() != targets.dim() {
        return Err(Error::Shape(format!(
            "predictions {:?} vs targets {:?}",
            predictions.dim(),
            targets.dim()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::Shape("empty prediction matrix".into()));
    }
    let mut sum = 0.0;
    Zip::from(predictions).and(targets).for_each(|&p, &t| {
        let p = p.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
        sum -= t * p.ln() + (1.0 - t) * (1.0 - p).ln();
    });
    Ok(sum / predictions.len() as f64)
}

impl Mlp {
    /// Weights ~ N(0, 1/input_dim), biases zero.
    pub fn init(specs: &[LayerSpec], learning_rate: f64, seed: u64) -> Result<Self> {
        validate_specs(specs)?;
        if !learning_rate.is_finite() || learning_rate < 0.0 {
            return Err(Error::Config(format!("learning rate {learning_rate} is invalid")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = specs
            .iter()
            .map(|&spec| {
                let std = (1.0 / spec.input_dim as f64).sqrt();
                let normal = Normal::new(0.0, std).expect("positive std");
                let weights = Array2::from_shape_simple_fn((spec.input_dim, spec.output_dim), || {
                    normal.sample(&mut rng)
                });
                Layer {
                    spec,
                    weights,
                    bias: Array1::zeros(spec.output_dim),
                }
            })
            .collect();
        Ok(Mlp {
            layers,
            learning_rate,
            optimizer: Optimizer::Sgd,
            state: OptimizerState::default(),
        })
    }

    /// Builds a network from explicit parameters.
    pub fn from_layers(layers: Vec<Layer>, learning_rate: f64) -> Result<Self> {
        let specs: Vec<LayerSpec> = layers.iter().map(|l| l.spec).collect();
        validate_specs(&specs)?;
        for (i, l) in layers.iter().enumerate() {
            if l.weights.dim() != (l.spec.input_dim, l.spec.output_dim) || l.bias.len() != l.spec.output_dim {
                return Err(Error::Shape(format!("layer {i} parameters do not match its spec")));
            }
            if !l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()) {
                return Err(Error::NonFinite(format!("layer {i} parameters")));
            }
        }
        Ok(Mlp {
            layers,
            learning_rate,
            optimizer: Optimizer::Sgd,
            state: OptimizerState::default(),
        })
    }

    /// Replaces the update rule and clears its accumulated state.
    pub fn with_optimizer(mut self, optimizer: Optimizer) -> Result<Self> {
        optimizer.validate()?;
        self.optimizer = optimizer;
        self.state = OptimizerState::default();
        Ok(self)
    }

    pub fn optimizer(&self) -> Optimizer {
        self.optimizer
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].spec.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].spec.output_dim
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Returns `[inputs, a_1, ..., a_L]`.
    pub fn forward(&self, inputs: &Array2<f64>) -> Result<Vec<Array2<f64>>> {
        if inputs.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} columns, network expects {}",
                inputs.ncols(),
                self.input_dim()
            )));
        }
        if !inputs.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("network input".into()));
        }
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(inputs.to_owned());
        for layer in &self.layers {
            let prev = acts.last().expect("nonempty");
            let mut z = prev.dot(&layer.weights);
            z += &layer.bias;
            let act = layer.spec.activation;
            z.mapv_inplace(|v| act.apply(v));
            acts.push(z);
        }
        Ok(acts)
    }

    pub fn predict(&self, inputs: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward(inputs)?.pop().expect("nonempty"))
    }

    /// Gradient of the mean BCE with respect to this network's output.
    pub fn bce_output_grad(&self, outputs: &Array2<f64>, targets: &Array2<f64>) -> Result<OutputGrad> {
        if outputs.dim() != targets.dim() {
            return Err(Error::Shape(format!(
                "outputs {:?} vs targets {:?}",
                outputs.dim(),
                targets.dim()
            )));
        }
        let n = outputs.len() as f64;
        let head = self.layers[self.layers.len() - 1].spec.activation;
        if head == Activation::Sigmoid {
            return Ok(OutputGrad::PreActivation((outputs - targets) / n));
        }
        let mut g = Array2::zeros(outputs.dim());
        Zip::from(&mut g).and(outputs).and(targets).for_each(|g, &p, &t| {
            let p = p.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
            *g = (p - t) / (p * (1.0 - p)) / n;
        });
        Ok(OutputGrad::Activation(g))
    }

    /// Backpropagates `output_grad` through cached `activations`. Parameter
    /// gradients are only computed when `with_params` is set; the gradient
    /// with respect to the network input is always returned.
    pub fn backward(
        &self,
        activations: &[Array2<f64>],
        output_grad: OutputGrad,
        with_params: bool,
    ) -> Result<(Option<Gradients>, Array2<f64>)> {
        let depth = self.layers.len();
        if activations.len() != depth + 1 {
            return Err(Error::Shape(format!(
                "expected {} cached activations, got {}",
                depth + 1,
                activations.len()
            )));
        }
        let out = &activations[depth];
        let mut delta = match output_grad {
            OutputGrad::PreActivation(d) => d,
            OutputGrad::Activation(g) => {
                let act = self.layers[depth - 1].spec.activation;
                let mut d = g;
                Zip::from(&mut d).and(out).for_each(|d, &a| *d *= act.derivative_from_output(a));
                d
            }
        };
        if delta.dim() != out.dim() {
            return Err(Error::Shape(format!("output gradient {:?} vs output {:?}", delta.dim(), out.dim())));
        }

        let mut wgrads = Vec::new();
        let mut bgrads = Vec::new();
        for i in (0..depth).rev() {
            let layer = &self.layers[i];
            let prev = &activations[i];
            if with_params {
                let gw = prev.t().dot(&delta);
                let gb = delta.sum_axis(Axis(0));
                if !gw.iter().chain(gb.iter()).all(|v| v.is_finite()) {
                    return Err(Error::ExplodingGradient { layer: i });
                }
                wgrads.push(gw);
                bgrads.push(gb);
            }
            let mut back = delta.dot(&layer.weights.t());
            if i > 0 {
                let act = self.layers[i - 1].spec.activation;
                Zip::from(&mut back).and(prev).for_each(|d, &a| *d *= act.derivative_from_output(a));
            }
            if !back.iter().all(|v| v.is_finite()) {
                return Err(Error::ExplodingGradient { layer: i });
            }
            delta = back;
        }
        let grads = with_params.then(|| {
            wgrads.reverse();
            bgrads.reverse();
            Gradients {
                weights: wgrads,
                biases: bgrads,
            }
        });
        Ok((grads, delta))
    }

    pub fn loss_and_gradients(&self, batch: &TrainBatch) -> Result<(f64, Gradients)> {
        if batch.targets.ncols() != self.output_dim() {
            return Err(Error::Shape(format!(
                "targets have {} columns, network outputs {}",
                batch.targets.ncols(),
                self.output_dim()
            )));
        }
        let acts = self.forward(&batch.inputs)?;
        let out = acts.last().expect("nonempty");
        let loss = bce_loss(out, &batch.targets)?;
        let grad = self.bce_output_grad(out, &batch.targets)?;
        let (grads, _) = self.backward(&acts, grad, true)?;
        Ok((loss, grads.expect("requested")))
    }

    /// One update along `grads` with the configured rule. Fails if any
    /// parameter leaves the finite range.
    pub fn apply(&mut self, grads: &Gradients) -> Result<()> {
        let lr = self.learning_rate;
        let st = &mut self.state;
        st.step += 1;
        match self.optimizer {
            Optimizer::Sgd => {}
            Optimizer::Momentum { .. } if st.first.is_empty() => st.first = zeros_like(&self.layers),
            Optimizer::Adam { .. } if st.first.is_empty() => {
                st.first = zeros_like(&self.layers);
                st.second = zeros_like(&self.layers);
            }
            _ => {}
        }
        for (i, ((layer, gw), gb)) in self.layers.iter_mut().zip(&grads.weights).zip(&grads.biases).enumerate() {
            match self.optimizer {
                Optimizer::Sgd => {
                    layer.weights.scaled_add(-lr, gw);
                    layer.bias.scaled_add(-lr, gb);
                }
                Optimizer::Momentum { beta } => {
                    let (vw, vb) = &mut st.first[i];
                    Zip::from(&mut *vw).and(gw).for_each(|v, &g| *v = beta * *v + g);
                    Zip::from(&mut *vb).and(gb).for_each(|v, &g| *v = beta * *v + g);
                    layer.weights.scaled_add(-lr, vw);
                    layer.bias.scaled_add(-lr, vb);
                }
                Optimizer::Adam { beta1, beta2, epsilon } => {
                    let c1 = 1.0 - beta1.powf(st.step as f64);
                    let c2 = 1.0 - beta2.powf(st.step as f64);
                    let step = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
                        *m = beta1 * *m + (1.0 - beta1) * g;
                        *v = beta2 * *v + (1.0 - beta2) * g * g;
                        *p -= lr * (*m / c1) / ((*v / c2).sqrt() + epsilon);
                    };
                    let ((mw, mb), (sw, sb)) = (&mut st.first[i], &mut st.second[i]);
                    Zip::from(&mut layer.weights)
                        .and(mw)
                        .and(sw)
                        .and(gw)
                        .for_each(|p, m, v, &g| step(p, m, v, g));
                    Zip::from(&mut layer.bias)
                        .and(mb)
                        .and(sb)
                        .and(gb)
                        .for_each(|p, m, v, &g| step(p, m, v, g));
                }
            }
            if !layer.weights.iter().chain(layer.bias.iter()).all(|v| v.is_finite()) {
                return Err(Error::NonFinite(format!("layer {i} parameters after update")));
            }
        }
        Ok(())
    }

    /// One update on `batch`; returns the loss before the update.
    pub fn backward_and_step(&mut self, batch: &TrainBatch) -> Result<f64> {
        let (loss, grads) = self.loss_and_gradients(batch)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite("training loss".into()));
        }
        self.apply(&grads)?;
        Ok(loss)
    }

    /// Weights (row-major) then bias, layer by layer.
    pub fn flat_parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn to_checkpoint(&self) -> MlpCheckpoint {
        MlpCheckpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            learning_rate: self.learning_rate,
            optimizer: self.optimizer,
            layers: self.specs(),
            parameters: self.flat_parameters(),
        }
    }

    pub fn from_checkpoint(ckpt: &MlpCheckpoint) -> Result<Self> {
        if ckpt.format != CHECKPOINT_FORMAT || ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Data(format!(
                "unsupported checkpoint {} v{}",
                ckpt.format, ckpt.version
            )));
        }
        validate_specs(&ckpt.layers)?;
        let expected: usize = ckpt.layers.iter().map(|s| (s.input_dim + 1) * s.output_dim).sum();
        if ckpt.parameters.len() != expected {
            return Err(Error::Shape(format!(
                "checkpoint has {} parameters, layer specs need {expected}",
                ckpt.parameters.len()
            )));
        }
        let mut rest = ckpt.parameters.as_slice();
        let mut layers = Vec::with_capacity(ckpt.layers.len());
        for &spec in &ckpt.layers {
            let (w, tail) = rest.split_at(spec.input_dim * spec.output_dim);
            let (b, tail) = tail.split_at(spec.output_dim);
            rest = tail;
            layers.push(Layer {
                spec,
                weights: Array2::from_shape_vec((spec.input_dim, spec.output_dim), w.to_vec())
                    .expect("sized above"),
                bias: Array1::from(b.to_vec()),
            });
        }
        Mlp::from_layers(layers, ckpt.learning_rate)?.with_optimizer(ckpt.optimizer)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(&self.to_checkpoint())?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Mlp::from_checkpoint(&serde_json::from_str(&text)?)
    }
}

/// Versioned JSON checkpoint: layer specs plus flattened parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpCheckpoint {
    pub format: String,
    pub version: u32,
    pub learning_rate: f64,
    /// Update rule only; moment buffers are not persisted.
    #[serde(default)]
    pub optimizer: Optimizer,
    pub layers: Vec<LayerSpec>,
    pub parameters: Vec<f64>,
}

/// Writes an `epoch,loss` CSV.
pub fn write_loss_log(path: &Path, entries: &[(usize, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "loss"])?;
    for (epoch, loss) in entries {
        w.write_record([epoch.to_string(), loss.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
