//! The pseudo-human off-policy protocol. Stand-ins for humans are simulated
//! personas from a perturbed law: "base" proxies play expert set A and form
//! the training data, a disjoint group of "test" proxies plays set B. The
//! augmentation simulation uses the default law against random experts and
//! its own review scorer.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{generate_corpus, Corpus};
use crate::features::{build_dataset, EpisodeTensor};
use crate::interactions::InteractionLog;
use crate::predictors::{train_ensemble_with, MajorityModel, PredictorConfig, PredictorKind};
use crate::rng;
use crate::sim::{
    simulate_dataset, HeuristicSet, NoisyOracleScorer, PersonaLaw, RealLaw, ReviewScorer, SimulationSpec,
    StrategyPlan, DEFAULT_LANGUAGE_NOISE,
};
use crate::strategy::{builtin_sets, ExpertSets, StrategyCatalog};
use crate::trainer::{mixed_train, MixContext, MixSchedule};

use super::{ope_evaluate, EvalError, EvalOptions, EvalReport};

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoHumanSetup {
    pub seed: u64,
    pub corpus_size: usize,
    pub n_base_dms: usize,
    pub n_test_dms: usize,
}

impl PseudoHumanSetup {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            corpus_size: 1068,
            n_base_dms: 50,
            n_test_dms: 20,
        }
    }
}

pub struct PseudoHumanData {
    pub corpus: Corpus,
    pub catalog: StrategyCatalog,
    pub sets: ExpertSets,
    pub base_log: InteractionLog,
    pub test_log: InteractionLog,
    pub base: Vec<EpisodeTensor>,
    pub test: Vec<EpisodeTensor>,
    /// Scorer of the augmentation simulation, distinct from the proxies'.
    pub sim_scorer: Arc<dyn ReviewScorer>,
}

impl PseudoHumanData {
    pub fn build(setup: &PseudoHumanSetup) -> Result<Self, EvalError> {
        let seed = setup.seed;
        let corpus = generate_corpus(rng::derive_seed(seed, &[rng::label::CORPUS]), setup.corpus_size)?;
        let catalog = StrategyCatalog::full();
        let sets = builtin_sets(&catalog);
        let scorer = |k: u64| -> Arc<dyn ReviewScorer> {
            Arc::new(NoisyOracleScorer::new(
                rng::derive_seed(seed, &[rng::label::SCORER, k]),
                DEFAULT_LANGUAGE_NOISE,
            ))
        };
        let proxy_law = PersonaLaw::proxy_with(scorer(1));
        let mut spec = SimulationSpec::new(proxy_law);
        spec.plan = StrategyPlan::Fixed(sets.set_a.clone());
        let base_log = simulate_dataset(setup.n_base_dms, &spec, &catalog, &corpus, rng::derive_seed(seed, &[rng::label::DM, 0]))?;
        spec.plan = StrategyPlan::Fixed(sets.set_b.clone());
        spec.first_dm_id = setup.n_base_dms as u32;
        let test_log = simulate_dataset(setup.n_test_dms, &spec, &catalog, &corpus, rng::derive_seed(seed, &[rng::label::DM, 1]))?;
        let base = build_dataset(&base_log, &corpus)?;
        let test = build_dataset(&test_log, &corpus)?;
        Ok(Self {
            corpus,
            catalog,
            sets,
            base_log,
            test_log,
            base,
            test,
            sim_scorer: scorer(0),
        })
    }

    /// Augmentation schedule with the default persona law.
    pub fn schedule(&self, s_r: f64) -> MixSchedule {
        MixSchedule::new(s_r, PersonaLaw::default_with(self.sim_scorer.clone()))
    }

    /// Trains one ensemble member per entry of `members` with simulation
    /// mixing and evaluates the ensemble off-policy on the test proxies.
    pub fn run_arm(
        &self,
        config: &PredictorConfig,
        members: &[u64],
        schedule: &MixSchedule,
        opts: &EvalOptions,
        seed: u64,
    ) -> Result<EvalReport, EvalError> {
        let ctx = MixContext {
            corpus: &self.corpus,
            catalog: &self.catalog,
            validation: None,
        };
        let ensemble = train_ensemble_with(config, members, |c| mixed_train(c, &self.base, schedule, &ctx, seed).map(|m| m.trained))?;
        let seeds = ensemble.members.iter().map(|m| m.config.seed).collect();
        ope_evaluate(&ensemble.members, seeds, &self.base, &self.test, opts)
    }

    /// The per-review majority baseline, a single deterministic model.
    pub fn run_majority(&self, opts: &EvalOptions) -> Result<EvalReport, EvalError> {
        let model = MajorityModel::train(&self.base)?;
        ope_evaluate(&[model], vec![0], &self.base, &self.test, opts)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AblationGrid {
    Eta(Vec<f64>),
    SR(Vec<f64>),
    /// Heuristic subsets of the augmentation law; an empty set is oracle-only.
    Heuristics(Vec<HeuristicSet>),
}

impl AblationGrid {
    pub fn axis(&self) -> &'static str {
        match self {
            AblationGrid::Eta(_) => "eta",
            AblationGrid::SR(_) => "s_r",
            AblationGrid::Heuristics(_) => "heuristics",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub axis: String,
    pub value: String,
    pub accuracy: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Accuracy over that of the full heuristic set, for the heuristics axis.
    pub relative: Option<f64>,
}

/// One full train and off-policy evaluation per grid point, varying one
/// aspect of `schedule`.
pub fn ablation_sweep(
    data: &PseudoHumanData,
    grid: &AblationGrid,
    config: &PredictorConfig,
    members: &[u64],
    schedule: &MixSchedule,
    opts: &EvalOptions,
    seed: u64,
) -> Result<Vec<AblationRow>, EvalError> {
    let points: Vec<(String, MixSchedule)> = match grid {
        AblationGrid::Eta(v) => v
            .iter()
            .map(|&eta| {
                let mut s = schedule.clone();
                s.simulation.law.eta = RealLaw::Fixed(eta);
                (eta.to_string(), s)
            })
            .collect(),
        AblationGrid::SR(v) => v
            .iter()
            .map(|&s_r| (s_r.to_string(), MixSchedule { s_r, ..schedule.clone() }))
            .collect(),
        AblationGrid::Heuristics(v) => v
            .iter()
            .map(|&h| {
                let mut s = schedule.clone();
                s.simulation.law.heuristics = h;
                (h.label(), s)
            })
            .collect(),
    };
    let mut rows = Vec::with_capacity(points.len());
    for (value, s) in points {
        let report = if config.kind == PredictorKind::Majority {
            data.run_majority(opts)?
        } else {
            data.run_arm(config, members, &s, opts, seed)?
        };
        rows.push(AblationRow {
            axis: grid.axis().to_string(),
            value,
            accuracy: report.overall.accuracy,
            ci_lo: report.overall.ci_lo,
            ci_hi: report.overall.ci_hi,
            relative: None,
        });
    }
    if let AblationGrid::Heuristics(v) = grid {
        if let Some(full) = v.iter().position(|&h| h == HeuristicSet::ALL) {
            let reference = rows[full].accuracy;
            for r in &mut rows {
                r.relative = Some(r.accuracy / reference);
            }
        }
    }
    Ok(rows)
}

pub fn write_ablation_csv(rows: &[AblationRow], config_hash: &str, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "# config_hash={config_hash}")?;
    writeln!(out, "axis,value,accuracy,ci_lo,ci_hi,relative")?;
    for r in rows {
        let rel = r.relative.map(|x| x.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{},{},{}", r.axis, r.value, r.accuracy, r.ci_lo, r.ci_hi, rel)?;
    }
    Ok(())
}
