use rand::seq::SliceRandom;
use rand::SeedableRng;
use rayon::prelude::*;

use crate::features::{EpisodeTensor, FEATURE_COUNT};
use crate::rng;

use super::{
    Adam, FeedForward, Lstm, MajorityModel, Model, Network, Predictor, PredictorConfig,
    PredictorError, PredictorKind,
};

/// Seeds of the ensemble members.
pub const ENSEMBLE_SEEDS: std::ops::RangeInclusive<u64> = 1..=15;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub config: PredictorConfig,
    pub model: Model,
    /// Mean per-round training loss of each pass, in order.
    pub loss_history: Vec<f64>,
}

impl Predictor for TrainedModel {
    fn predict_episode(&self, episode: &EpisodeTensor) -> Vec<f64> {
        self.model.predict_episode(episode)
    }
}

pub fn initial_network(config: &PredictorConfig) -> Result<Model, PredictorError> {
    config.validate()?;
    let mut rng = rng::stream(config.seed, &[rng::label::INIT]);
    let (h, l) = (config.hidden_size, config.n_layers);
    Ok(match config.kind {
        PredictorKind::FeedForward => Model::FeedForward(FeedForward::init(FEATURE_COUNT, h, l, &mut rng)),
        PredictorKind::Lstm => Model::Lstm(Lstm::init(FEATURE_COUNT, h, l, &mut rng)),
        PredictorKind::Majority => {
            return Err(PredictorError::Config("the majority model has no network".into()))
        }
    })
}

/// Gradient-descent state of one network: parameters plus optimizer moments.
#[derive(Debug, Clone)]
pub struct NetworkTrainer {
    model: Model,
    adam: Adam,
    batch_episodes: usize,
    grad: Vec<f64>,
    passes: usize,
}

impl NetworkTrainer {
    pub fn new(config: &PredictorConfig) -> Result<Self, PredictorError> {
        let model = initial_network(config)?;
        let n = network_params(&model).len();
        Ok(Self {
            model,
            adam: Adam::new(n, config.learning_rate),
            batch_episodes: config.batch_episodes,
            grad: vec![0.0; n],
            passes: 0,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn into_model(self) -> Model {
        self.model
    }

    /// One pass over `episodes` in the order given by `shuffle_seed`, one
    /// optimizer step per batch. Returns the mean per-round loss.
    pub fn pass(&mut self, episodes: &[EpisodeTensor], shuffle_seed: u64) -> Result<f64, PredictorError> {
        let mut order: Vec<usize> = (0..episodes.len()).collect();
        order.shuffle(&mut rng::StreamRng::seed_from_u64(shuffle_seed));
        let (mut total_loss, mut total_rounds) = (0.0, 0usize);
        for (batch, chunk) in order.chunks(self.batch_episodes).enumerate() {
            self.grad.fill(0.0);
            let mut loss = 0.0;
            let mut rounds = 0;
            for &e in chunk {
                loss += accumulate(&self.model, &episodes[e], &mut self.grad);
                rounds += episodes[e].len();
            }
            if !loss.is_finite() || self.grad.iter().any(|g| !g.is_finite()) {
                return Err(PredictorError::NonFinite {
                    epoch: self.passes,
                    batch,
                });
            }
            if rounds == 0 {
                continue;
            }
            let scale = 1.0 / rounds as f64;
            for g in &mut self.grad {
                *g *= scale;
            }
            self.adam.update(network_params_mut(&mut self.model), &self.grad);
            total_loss += loss;
            total_rounds += rounds;
        }
        self.passes += 1;
        Ok(if total_rounds == 0 {
            0.0
        } else {
            total_loss / total_rounds as f64
        })
    }
}

fn network_params(model: &Model) -> &[f64] {
    match model {
        Model::FeedForward(m) => m.params(),
        Model::Lstm(m) => m.params(),
        Model::Majority(_) => &[],
    }
}

fn network_params_mut(model: &mut Model) -> &mut [f64] {
    match model {
        Model::FeedForward(m) => m.params_mut(),
        Model::Lstm(m) => m.params_mut(),
        Model::Majority(_) => &mut [],
    }
}

fn accumulate(model: &Model, episode: &EpisodeTensor, grad: &mut [f64]) -> f64 {
    match model {
        Model::FeedForward(m) => m.accumulate_gradient(episode, grad),
        Model::Lstm(m) => m.accumulate_gradient(episode, grad),
        Model::Majority(_) => 0.0,
    }
}

/// Shuffle seed of the training pass over the base data in `epoch`.
pub fn base_shuffle_seed(seed: u64, epoch: usize) -> u64 {
    rng::derive_seed(seed, &[rng::label::SHUFFLE, epoch as u64])
}

/// Trains one model for `config.epochs` passes over `episodes`.
pub fn train(config: &PredictorConfig, episodes: &[EpisodeTensor]) -> Result<TrainedModel, PredictorError> {
    if episodes.iter().all(|e| e.is_empty()) {
        return Err(PredictorError::EmptyTrainingSet);
    }
    if config.kind == PredictorKind::Majority {
        return Ok(TrainedModel {
            config: config.clone(),
            model: Model::Majority(MajorityModel::train(episodes)?),
            loss_history: Vec::new(),
        });
    }
    let mut trainer = NetworkTrainer::new(config)?;
    let mut loss_history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        loss_history.push(trainer.pass(episodes, base_shuffle_seed(config.seed, epoch))?);
    }
    Ok(TrainedModel {
        config: config.clone(),
        model: trainer.into_model(),
        loss_history,
    })
}

/// Trained variants of one configuration that differ only in seed.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorEnsemble {
    pub members: Vec<TrainedModel>,
}

impl PredictorEnsemble {
    /// Predictions indexed `[member][episode][round]`.
    pub fn predict(&self, episodes: &[EpisodeTensor]) -> Vec<Vec<Vec<f64>>> {
        self.members
            .par_iter()
            .map(|m| episodes.iter().map(|e| m.predict_episode(e)).collect())
            .collect()
    }
}

/// Trains one member per seed with `fit`, in parallel. Members come back in
/// the order of `seeds`.
pub fn train_ensemble_with<F, E>(config: &PredictorConfig, seeds: &[u64], fit: F) -> Result<PredictorEnsemble, E>
where
    F: Fn(&PredictorConfig) -> Result<TrainedModel, E> + Sync,
    E: Send,
{
    let members = seeds
        .par_iter()
        .map(|&seed| fit(&config.with_seed(seed)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PredictorEnsemble { members })
}

pub fn train_ensemble(config: &PredictorConfig, episodes: &[EpisodeTensor]) -> Result<PredictorEnsemble, PredictorError> {
    let seeds: Vec<u64> = ENSEMBLE_SEEDS.collect();
    train_ensemble_with(config, &seeds, |c| train(c, episodes))
}
