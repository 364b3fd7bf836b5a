//! Generator/discriminator pair and the alternating adversarial training loop.
//!
//! The generator plays the high-capacity adversary: it maps standard-normal
//! noise to encoded task rows. The discriminator learns to separate real
//! rows from generated ones and is later reused as the first filter of the
//! detection cascade.

use std::path::Path;

use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{bce_loss, Activation, LayerSpec, Mlp, Optimizer, OutputGrad, TrainBatch};
use crate::seeds::derive_seed;

/// Which training rows the GAN imitates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingCorpus {
    /// Only the fake tasks of the training split.
    FakeOnly,
    /// Every training row, legitimate and fake.
    #[default]
    FullTrain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GanConfig {
    pub noise_dim: usize,
    pub gen_layers: Vec<usize>,
    pub disc_layers: Vec<usize>,
    pub gen_hidden_activation: Activation,
    pub disc_hidden_activation: Activation,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub batch_size: usize,
    /// One epoch is one discriminator update on a real half-batch and a
    /// generated half-batch followed by one generator update.
    pub epochs: usize,
    pub loss_log_interval: usize,
    pub corpus: TrainingCorpus,
    pub seed: u64,
}

impl Default for GanConfig {
    fn default() -> Self {
        GanConfig {
            noise_dim: 100,
            gen_layers: vec![256, 512, 1024],
            disc_layers: vec![512, 256, 256],
            gen_hidden_activation: Activation::Tanh,
            disc_hidden_activation: Activation::Sigmoid,
            learning_rate: 0.01,
            optimizer: Optimizer::ADAM_DEFAULT,
            batch_size: 32,
            epochs: 2000,
            loss_log_interval: 10,
            corpus: TrainingCorpus::FullTrain,
            seed: 0,
        }
    }
}

impl GanConfig {
    pub const BATCH_GRID: [usize; 4] = [15, 20, 25, 32];
    pub const EPOCH_GRID: [usize; 3] = [2000, 4000, 8000];

    pub fn validate(&self, training_rows: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.noise_dim == 0 {
            return bad("noise_dim must be positive".into());
        }
        if self.gen_layers.contains(&0) || self.disc_layers.contains(&0) {
            return bad("hidden layer widths must be positive".into());
        }
        if self.batch_size < 2 {
            return bad(format!("batch_size {} leaves an empty half-batch", self.batch_size));
        }
        if self.batch_size > training_rows {
            return bad(format!(
                "batch_size {} exceeds the {training_rows} training rows",
                self.batch_size
            ));
        }
        if self.loss_log_interval == 0 {
            return bad("loss_log_interval must be positive".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad(format!("learning_rate {} is invalid", self.learning_rate));
        }
        Ok(())
    }

    pub fn generator_specs(&self, feature_dim: usize) -> Vec<LayerSpec> {
        let widths: Vec<usize> = std::iter::once(self.noise_dim)
            .chain(self.gen_layers.iter().copied())
            .chain(std::iter::once(feature_dim))
            .collect();
        LayerSpec::chain(&widths, self.gen_hidden_activation, Activation::Tanh)
    }

    pub fn discriminator_specs(&self, feature_dim: usize) -> Vec<LayerSpec> {
        let widths: Vec<usize> = std::iter::once(feature_dim)
            .chain(self.disc_layers.iter().copied())
            .chain(std::iter::once(1))
            .collect();
        LayerSpec::chain(&widths, self.disc_hidden_activation, Activation::Sigmoid)
    }
}

/// Mean losses over one logging interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    /// 1-based epoch that closes the interval.
    pub epoch: usize,
    /// Discriminator BCE on real rows (target 1).
    pub loss_real: f64,
    /// Discriminator BCE on generated rows (target 0).
    pub loss_fake: f64,
    /// Generator BCE through the frozen discriminator (target 1).
    pub loss_gan: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GanModel {
    pub generator: Mlp,
    pub discriminator: Mlp,
    pub history: Vec<LossRecord>,
    pub epochs_trained: usize,
}

/// Generated rows; every row is an adversarial fake.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticBatch {
    pub rows: Array2<f64>,
}

impl SyntheticBatch {
    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }
}

fn noise(rng: &mut ChaCha8Rng, rows: usize, dim: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, dim), || rng.sample(StandardNormal))
}

impl GanModel {
    /// Freshly initialized, untrained pair.
    pub fn init(feature_dim: usize, config: &GanConfig) -> Result<Self> {
        let generator = Mlp::init(
            &config.generator_specs(feature_dim),
            config.learning_rate,
            derive_seed(config.seed, "gan/generator"),
        )?
        .with_optimizer(config.optimizer)?;
        let discriminator = Mlp::init(
            &config.discriminator_specs(feature_dim),
            config.learning_rate,
            derive_seed(config.seed, "gan/discriminator"),
        )?
        .with_optimizer(config.optimizer)?;
        Ok(GanModel {
            generator,
            discriminator,
            history: Vec::new(),
            epochs_trained: 0,
        })
    }

    /// Reassembles a trained pair from checkpoints.
    pub fn from_parts(generator: Mlp, discriminator: Mlp, epochs_trained: usize) -> Result<Self> {
        if generator.output_dim() != discriminator.input_dim() || discriminator.output_dim() != 1 {
            return Err(Error::Shape(format!(
                "generator emits {} features, discriminator takes {} and emits {}",
                generator.output_dim(),
                discriminator.input_dim(),
                discriminator.output_dim()
            )));
        }
        Ok(GanModel {
            generator,
            discriminator,
            history: Vec::new(),
            epochs_trained,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.discriminator.input_dim()
    }

    pub fn noise_dim(&self) -> usize {
        self.generator.input_dim()
    }

    pub fn is_trained(&self) -> bool {
        self.epochs_trained > 0
    }

    /// Runs one adversarial epoch. Returns (loss_real, loss_fake, loss_gan).
    fn train_epoch(&mut self, real: &Array2<f64>, batch_size: usize, rng: &mut ChaCha8Rng) -> Result<[f64; 3]> {
        let half_real = batch_size / 2;
        let half_fake = batch_size - half_real;
        let noise_dim = self.noise_dim();

        let idx: Vec<usize> = (0..half_real).map(|_| rng.random_range(0..real.nrows())).collect();
        let real_batch = real.select(Axis(0), &idx);
        let fake_batch = self.generator.predict(&noise(rng, half_fake, noise_dim))?;

        let loss_real = self
            .discriminator
            .backward_and_step(&TrainBatch::new(real_batch, Array2::ones((half_real, 1)))?)?;
        let loss_fake = self
            .discriminator
            .backward_and_step(&TrainBatch::new(fake_batch, Array2::zeros((half_fake, 1)))?)?;

        // Generator step through the frozen discriminator.
        let z = noise(rng, batch_size, noise_dim);
        let gen_acts = self.generator.forward(&z)?;
        let disc_acts = self.discriminator.forward(gen_acts.last().expect("nonempty"))?;
        let scores = disc_acts.last().expect("nonempty");
        let targets = Array2::ones((batch_size, 1));
        let loss_gan = bce_loss(scores, &targets)?;
        let grad = self.discriminator.bce_output_grad(scores, &targets)?;
        let (_, input_grad) = self.discriminator.backward(&disc_acts, grad, false)?;
        let (gen_grads, _) = self
            .generator
            .backward(&gen_acts, OutputGrad::Activation(input_grad), true)?;
        self.generator.apply(&gen_grads.expect("requested"))?;

        Ok([loss_real, loss_fake, loss_gan])
    }

    /// Draws `n` rows from the generator. Deterministic per seed.
    pub fn generate(&self, n: usize, seed: u64) -> Result<SyntheticBatch> {
        if n == 0 {
            return Ok(SyntheticBatch {
                rows: Array2::zeros((0, self.feature_dim())),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = self.generator.predict(&noise(&mut rng, n, self.noise_dim()))?;
        Ok(SyntheticBatch { rows })
    }

    /// Per-row probability of being a real (non-generated) row.
    pub fn discriminate(&self, rows: &Array2<f64>) -> Result<Vec<f64>> {
        if rows.ncols() != self.feature_dim() {
            return Err(Error::Shape(format!(
                "rows have {} features, discriminator expects {}",
                rows.ncols(),
                self.feature_dim()
            )));
        }
        if rows.nrows() == 0 {
            return Ok(Vec::new());
        }
        Ok(self.discriminator.predict(rows)?.column(0).to_vec())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        self.generator.save(&dir.join("generator.json"))?;
        self.discriminator.save(&dir.join("discriminator.json"))?;
        write_loss_history(&dir.join("gan_loss.csv"), &self.history)
    }

    pub fn load(dir: &Path, epochs_trained: usize) -> Result<Self> {
        let generator = Mlp::load(&dir.join("generator.json"))?;
        let discriminator = Mlp::load(&dir.join("discriminator.json"))?;
        GanModel::from_parts(generator, discriminator, epochs_trained)
    }
}

/// Trains a GAN that imitates `real_rows` (encoded, inside `[-1, 1]`).
pub fn train_gan(real_rows: &Array2<f64>, config: &GanConfig) -> Result<GanModel> {
    if real_rows.nrows() == 0 || real_rows.ncols() == 0 {
        return Err(Error::Data("GAN training set is empty".into()));
    }
    if !real_rows.iter().all(|v| (-1.0..=1.0).contains(v)) {
        return Err(Error::Data("GAN training rows must be encoded inside [-1, 1]".into()));
    }
    config.validate(real_rows.nrows())?;

    let mut model = GanModel::init(real_rows.ncols(), config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "gan/batches"));
    let mut acc = [0.0; 3];
    let mut in_interval = 0usize;
    for epoch in 0..config.epochs {
        let losses = model
            .train_epoch(real_rows, config.batch_size, &mut rng)
            .map_err(|e| Error::Divergence {
                epoch,
                detail: e.to_string(),
            })?;
        if !losses.iter().all(|l| l.is_finite()) {
            return Err(Error::Divergence {
                epoch,
                detail: format!("losses {losses:?}"),
            });
        }
        for (a, l) in acc.iter_mut().zip(losses) {
            *a += l;
        }
        in_interval += 1;
        if in_interval == config.loss_log_interval || epoch + 1 == config.epochs {
            let n = in_interval as f64;
            model.history.push(LossRecord {
                epoch: epoch + 1,
                loss_real: acc[0] / n,
                loss_fake: acc[1] / n,
                loss_gan: acc[2] / n,
            });
            acc = [0.0; 3];
            in_interval = 0;
        }
        model.epochs_trained = epoch + 1;
    }
    Ok(model)
}

/// Fraction of probe rows the discriminator classifies correctly: real rows
/// at probability >= 0.5, generated rows below it.
pub fn probe_accuracy(model: &GanModel, real: &Array2<f64>, generated: &Array2<f64>) -> Result<f64> {
    let total = real.nrows() + generated.nrows();
    if total == 0 {
        return Err(Error::Data("empty probe set".into()));
    }
    let real_hits = model.discriminate(real)?.iter().filter(|&&p| p >= 0.5).count();
    let fake_hits = model.discriminate(generated)?.iter().filter(|&&p| p < 0.5).count();
    Ok((real_hits + fake_hits) as f64 / total as f64)
}

pub fn write_loss_history(path: &Path, history: &[LossRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "loss_real", "loss_fake", "loss_gan"])?;
    for r in history {
        w.write_record([
            r.epoch.to_string(),
            r.loss_real.to_string(),
            r.loss_fake.to_string(),
            r.loss_gan.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
