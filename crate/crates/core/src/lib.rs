//! Fake sensing-task detection for mobile crowdsensing platforms.
//!
//! The crate synthesizes a labeled task population, trains a GAN whose
//! generator imitates fake tasks (the high-capacity adversary), and measures
//! how well a two-level cascade (GAN discriminator, then KNN / naive Bayes /
//! decision tree) filters both generated and empirically designed fakes.

pub mod cascade;
pub mod classifiers;
pub mod error;
pub mod experiment;
pub mod gan;
pub mod metrics;
pub mod nn;
pub mod seeds;
pub mod synth;

pub use error::{Error, Result};
