//! Training with simulated DMs mixed into every epoch: each epoch first runs
//! one pass over a block of simulated DMs, then one pass over the base data.

use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::eval;
use crate::features::{self, EpisodeTensor, FeatureError};
use crate::predictors::{
    base_shuffle_seed, MajorityModel, Model, NetworkTrainer, Predictor, PredictorConfig,
    PredictorError, PredictorKind, TrainedModel,
};
use crate::rng;
use crate::sim::{self, PersonaLaw, SimError, SimulationSpec};
use crate::strategy::StrategyCatalog;

/// DM ids of simulated training blocks start here, far above any base id.
pub const SIM_DM_ID_BASE: u32 = 1 << 30;

/// Ratios searched during tuning.
pub const S_R_GRID: [f64; 6] = [0.0, 0.5, 1.0, 2.0, 4.0, 10.0];

#[derive(Debug, Error)]
pub enum TrainerError {
    #[error("invalid mix schedule: {0}")]
    Schedule(String),
    #[error(transparent)]
    Predictor(#[from] PredictorError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Features(#[from] FeatureError),
}

#[derive(Debug, Clone)]
pub struct MixSchedule {
    /// Simulated DMs per base DM in each epoch.
    pub s_r: f64,
    /// Draw fresh simulated DMs every epoch rather than reusing one pool.
    pub regenerate_per_epoch: bool,
    /// Persona law and episode rules of the simulated DMs.
    pub simulation: SimulationSpec,
}

impl MixSchedule {
    pub fn new(s_r: f64, law: PersonaLaw) -> Self {
        Self {
            s_r,
            regenerate_per_epoch: true,
            simulation: SimulationSpec::new(law),
        }
    }

    pub fn validate(&self) -> Result<(), TrainerError> {
        if !(self.s_r >= 0.0) || !self.s_r.is_finite() {
            return Err(TrainerError::Schedule(format!("s_r must be a finite nonnegative number, got {}", self.s_r)));
        }
        Ok(())
    }
}

/// Number of simulated DMs in the block of `epoch`: `floor(s_r * n_base)`
/// plus one more with probability equal to the fractional part.
pub fn sim_block_size(s_r: f64, n_base: usize, seed: u64, epoch: usize) -> usize {
    let target = s_r * n_base as f64;
    let whole = target.floor();
    let frac = target - whole;
    let extra = frac > 0.0 && rng::stream(seed, &[rng::label::SIM_COUNT, epoch as u64]).random_bool(frac);
    whole as usize + usize::from(extra)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub sim_dms: usize,
    /// Mean per-round loss of the simulated pass, absent when the block is empty.
    pub sim_loss: Option<f64>,
    pub base_loss: f64,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct MixedTraining {
    pub trained: TrainedModel,
    pub curve: Vec<EpochRecord>,
}

pub struct MixContext<'a> {
    pub corpus: &'a Corpus,
    pub catalog: &'a StrategyCatalog,
    /// Validation episodes scored after every epoch, if any.
    pub validation: Option<&'a [EpisodeTensor]>,
}

/// Trains `config` on `base` mixed with simulated DMs per `schedule`.
///
/// `seed` drives the simulated blocks; the model seed in `config` drives
/// initialization and the base shuffles exactly as in plain training, so with
/// `s_r = 0` the result equals [`crate::predictors::train`] bit for bit.
pub fn mixed_train(
    config: &PredictorConfig,
    base: &[EpisodeTensor],
    schedule: &MixSchedule,
    ctx: &MixContext<'_>,
    seed: u64,
) -> Result<MixedTraining, TrainerError> {
    schedule.validate()?;
    if base.iter().all(|e| e.is_empty()) && schedule.s_r == 0.0 {
        return Err(PredictorError::EmptyTrainingSet.into());
    }
    if config.kind == PredictorKind::Majority {
        // Counting does not take gradient steps; simulated data would only
        // dilute the per-review rates, so the majority model ignores it.
        let model = MajorityModel::train(base)?;
        return Ok(MixedTraining {
            trained: TrainedModel {
                config: config.clone(),
                model: Model::Majority(model),
                loss_history: Vec::new(),
            },
            curve: Vec::new(),
        });
    }

    let n_base = base.iter().map(|e| e.dm_id).collect::<std::collections::BTreeSet<_>>().len();
    let member_seed = rng::derive_seed(seed, &[config.seed]);
    let mut trainer = NetworkTrainer::new(config)?;
    let mut loss_history = Vec::new();
    let mut curve = Vec::with_capacity(config.epochs);
    let mut pool: Option<Vec<EpisodeTensor>> = None;
    for epoch in 0..config.epochs {
        let block_epoch = if schedule.regenerate_per_epoch { epoch } else { 0 };
        let sim_dms = sim_block_size(schedule.s_r, n_base, member_seed, block_epoch);
        let mut sim_loss = None;
        if sim_dms > 0 {
            if schedule.regenerate_per_epoch || pool.is_none() {
                pool = Some(simulate_block(schedule, ctx, member_seed, block_epoch, sim_dms)?);
            }
            let block = pool.as_deref().expect("block generated above");
            let shuffle = rng::derive_seed(member_seed, &[rng::label::SHUFFLE, rng::label::SIM_EPOCH, epoch as u64]);
            let l = trainer.pass(block, shuffle)?;
            loss_history.push(l);
            sim_loss = Some(l);
        }
        let base_loss = if base.is_empty() {
            0.0
        } else {
            let l = trainer.pass(base, base_shuffle_seed(config.seed, epoch))?;
            loss_history.push(l);
            l
        };
        let val_accuracy = match ctx.validation {
            Some(v) if !v.is_empty() => {
                let preds: Vec<Vec<f64>> = v.iter().map(|e| trainer.model().predict_episode(e)).collect();
                eval::accuracy(&preds, v).ok()
            }
            _ => None,
        };
        curve.push(EpochRecord {
            epoch,
            sim_dms,
            sim_loss,
            base_loss,
            val_accuracy,
        });
    }
    Ok(MixedTraining {
        trained: TrainedModel {
            config: config.clone(),
            model: trainer.into_model(),
            loss_history,
        },
        curve,
    })
}

fn simulate_block(
    schedule: &MixSchedule,
    ctx: &MixContext<'_>,
    seed: u64,
    epoch: usize,
    n_dms: usize,
) -> Result<Vec<EpisodeTensor>, TrainerError> {
    let spec = SimulationSpec {
        first_dm_id: SIM_DM_ID_BASE,
        ..schedule.simulation.clone()
    };
    let sim_seed = rng::derive_seed(seed, &[rng::label::SIM_EPOCH, epoch as u64]);
    let log = sim::simulate_dataset(n_dms, &spec, ctx.catalog, ctx.corpus, sim_seed)?;
    Ok(features::build_dataset(&log, ctx.corpus)?)
}

/// Writes the training curve as CSV; missing values are empty fields.
pub fn write_curve_csv(curve: &[EpochRecord], config_hash: &str, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "# config_hash={config_hash}")?;
    writeln!(out, "epoch,sim_dms,sim_loss,base_loss,val_accuracy")?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in curve {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.epoch,
            r.sim_dms,
            opt(r.sim_loss),
            r.base_loss,
            opt(r.val_accuracy)
        )?;
    }
    Ok(())
}

/// Convenience for the common case of a scorer-backed default law.
pub fn default_schedule(s_r: f64, scorer: Arc<dyn sim::ReviewScorer>) -> MixSchedule {
    MixSchedule::new(s_r, PersonaLaw::default_with(scorer))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_sizes() {
        assert_eq!(sim_block_size(4.0, 10, 1, 0), 40);
        assert_eq!(sim_block_size(0.5, 10, 1, 0), 5);
        assert_eq!(sim_block_size(0.0, 10, 1, 3), 0);
        let n: usize = (0..4000).map(|e| sim_block_size(0.25, 1, 9, e)).sum();
        assert!((900..1100).contains(&n), "{n}");
    }

    #[test]
    fn rejects_negative_ratio() {
        let law = PersonaLaw::default_with(Arc::new(sim::NoisyOracleScorer::new(1, 0.5)));
        assert!(MixSchedule::new(-1.0, law).validate().is_err());
    }
}
