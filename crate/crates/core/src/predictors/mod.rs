//! Trainable models that predict P(Go) for every round of an episode.
//!
//! The two neural models keep all parameters in one flat `Vec<f64>` in a
//! fixed declared order, which is what the optimizer, the gradient checks and
//! the checkpoint format operate on.

mod adam;
pub mod checkpoint;
pub mod feedforward;
pub mod gradcheck;
pub mod lstm;
pub mod majority;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{EpisodeTensor, COUNT_FEATURES, FEATURE_COUNT};

pub use adam::Adam;
pub use feedforward::FeedForward;
pub use lstm::Lstm;
pub use majority::MajorityModel;
pub use train::{
    base_shuffle_seed, initial_network, train, train_ensemble, train_ensemble_with, NetworkTrainer,
    PredictorEnsemble, TrainedModel, ENSEMBLE_SEEDS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorKind {
    Majority,
    FeedForward,
    Lstm,
}

impl PredictorKind {
    pub fn name(self) -> &'static str {
        match self {
            PredictorKind::Majority => "majority",
            PredictorKind::FeedForward => "feed_forward",
            PredictorKind::Lstm => "lstm",
        }
    }

    fn code(self) -> u8 {
        self as u8
    }

    fn from_code(c: u8) -> Option<Self> {
        [Self::Majority, Self::FeedForward, Self::Lstm]
            .into_iter()
            .find(|k| k.code() == c)
    }
}

impl fmt::Display for PredictorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PredictorKind {
    type Err = PredictorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "majority" => Ok(Self::Majority),
            "feed_forward" | "ff" | "fc" => Ok(Self::FeedForward),
            "lstm" => Ok(Self::Lstm),
            _ => Err(PredictorError::Config(format!("unknown predictor kind {s:?}"))),
        }
    }
}

#[derive(Debug, Error)]
pub enum PredictorError {
    #[error("invalid predictor config: {0}")]
    Config(String),
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorConfig {
    pub kind: PredictorKind,
    pub hidden_size: usize,
    pub n_layers: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Episodes per optimizer step.
    pub batch_episodes: usize,
    pub seed: u64,
    /// Permits hyperparameters outside the tuning grids.
    pub allow_off_grid: bool,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            kind: PredictorKind::Lstm,
            hidden_size: 32,
            n_layers: 2,
            learning_rate: 1e-3,
            epochs: 8,
            batch_episodes: 1,
            seed: 1,
            allow_off_grid: false,
        }
    }
}

impl PredictorConfig {
    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), PredictorError> {
        let bad = |m: String| Err(PredictorError::Config(m));
        if self.kind == PredictorKind::Majority {
            return Ok(());
        }
        if self.hidden_size == 0 || self.n_layers == 0 {
            return bad("hidden_size and n_layers must be positive".into());
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if self.batch_episodes == 0 {
            return bad("batch_episodes must be positive".into());
        }
        if !self.allow_off_grid {
            if !(16..=128).contains(&self.hidden_size) {
                return bad(format!("hidden_size {} outside 16..=128", self.hidden_size));
            }
            if ![2, 4, 6].contains(&self.n_layers) {
                return bad(format!("n_layers {} not in {{2, 4, 6}}", self.n_layers));
            }
            if !(1e-4..=1e-3).contains(&self.learning_rate) {
                return bad(format!("learning rate {} outside [1e-4, 1e-3]", self.learning_rate));
            }
        }
        Ok(())
    }
}

/// Anything that assigns P(Go) to each round of an episode.
pub trait Predictor: Send + Sync {
    fn predict_episode(&self, episode: &EpisodeTensor) -> Vec<f64>;
}

/// A differentiable model over a flat parameter vector.
pub trait Network: Predictor + Clone {
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];
    /// Adds the gradient of the summed cross-entropy of `episode` to `grad`
    /// and returns that summed loss.
    fn accumulate_gradient(&self, episode: &EpisodeTensor, grad: &mut [f64]) -> f64;
    /// Summed cross-entropy of the episode.
    fn episode_loss(&self, episode: &EpisodeTensor) -> f64;
    /// Signs of every piecewise-linear pre-activation over the episode. Two
    /// parameter vectors with the same pattern lie on the same smooth piece.
    fn kink_pattern(&self, _episode: &EpisodeTensor) -> Vec<bool> {
        Vec::new()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Majority(MajorityModel),
    FeedForward(FeedForward),
    Lstm(Lstm),
}

impl Model {
    pub fn kind(&self) -> PredictorKind {
        match self {
            Model::Majority(_) => PredictorKind::Majority,
            Model::FeedForward(_) => PredictorKind::FeedForward,
            Model::Lstm(_) => PredictorKind::Lstm,
        }
    }
}

impl Predictor for Model {
    fn predict_episode(&self, episode: &EpisodeTensor) -> Vec<f64> {
        match self {
            Model::Majority(m) => m.predict_episode(episode),
            Model::FeedForward(m) => m.predict_episode(episode),
            Model::Lstm(m) => m.predict_episode(episode),
        }
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Cross-entropy of a logit against a binary label, computed stably.
pub(crate) fn bce_with_logit(z: f64, label: bool) -> f64 {
    let y = if label { 1.0 } else { 0.0 };
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

/// Network input for one round: the feature row with count columns
/// compressed to `ln(1 + c) / 4` so they share the scale of the binary bits.
pub(crate) fn network_input(row: &[f64], out: &mut [f64; FEATURE_COUNT]) {
    out.copy_from_slice(row);
    for &c in &COUNT_FEATURES {
        out[c] = row[c].ln_1p() / 4.0;
    }
}

/// `out += m * v` for a row-major `rows x v.len()` matrix.
#[inline]
pub(crate) fn gemv_acc(m: &[f64], v: &[f64], out: &mut [f64]) {
    let cols = v.len();
    for (o, row) in out.iter_mut().zip(m.chunks_exact(cols)) {
        *o += dot(row, v);
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators let the compiler vectorize without reassociating.
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        for k in 0..4 {
            acc[k] += a[4 * i + k] * b[4 * i + k];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in chunks * 4..a.len() {
        s += a[i] * b[i];
    }
    s
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_bce_matches_naive() {
        for &z in &[-5.0, -0.3, 0.0, 0.7, 4.0] {
            let p = sigmoid(z);
            assert!((bce_with_logit(z, true) + p.ln()).abs() < 1e-12);
            assert!((bce_with_logit(z, false) + (1.0 - p).ln()).abs() < 1e-12);
        }
        assert!(bce_with_logit(800.0, false).is_finite());
    }

    #[test]
    fn grid_validation() {
        let mut c = PredictorConfig::default();
        assert!(c.validate().is_ok());
        c.hidden_size = 4;
        assert!(c.validate().is_err());
        c.allow_off_grid = true;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn kind_names_roundtrip() {
        for k in [PredictorKind::Majority, PredictorKind::FeedForward, PredictorKind::Lstm] {
            assert_eq!(k.name().parse::<PredictorKind>().unwrap(), k);
            assert_eq!(PredictorKind::from_code(k.code()), Some(k));
        }
    }
}
