//! The flat run configuration. A TOML file supplies keys, flags override
//! them, and the SHA-256 of the resolved document is stamped on every output.

use std::path::Path;
use std::sync::Arc;

use clap::Args;
use persuade_core::eval::experiment::AblationGrid;
use persuade_core::game::StrategyId;
use persuade_core::predictors::{PredictorConfig, PredictorKind};
use persuade_core::rng;
use persuade_core::sim::{
    EpisodeRules, HeuristicSet, NoisyOracleScorer, PersonaLaw, RealLaw, ReviewScorer, StrategyPlan,
    TemperamentScope, STRATEGIES_PER_DM,
};
use persuade_core::strategy::{builtin_sets, StrategyCatalog};
use persuade_core::trainer::MixSchedule;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::failure::Failure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub corpus_size: usize,
    pub law: String,
    pub eta: Option<f64>,
    pub epsilon: Option<f64>,
    pub k_max: Option<usize>,
    pub temperament_scope: Option<String>,
    pub heuristics: Option<String>,
    pub language_noise: f64,
    pub scorer_stream: u64,
    pub dms: usize,
    pub first_dm_id: u32,
    pub strategies: String,
    pub target: u8,
    pub game_cap: u32,
    pub model: String,
    pub hidden: usize,
    pub layers: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch: usize,
    pub allow_off_grid: bool,
    pub members: usize,
    pub s_r: f64,
    pub regenerate_per_epoch: bool,
    pub sim_law: String,
    pub sim_scorer_stream: u64,
    pub n_resamples: usize,
    pub min_count: usize,
    pub axis: Option<String>,
    pub grid: Option<String>,
    pub base_dms: usize,
    pub test_dms: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = PredictorConfig::default();
        Self {
            seed: None,
            corpus_size: 1068,
            law: "default".into(),
            eta: None,
            epsilon: None,
            k_max: None,
            temperament_scope: None,
            heuristics: None,
            language_noise: persuade_core::sim::DEFAULT_LANGUAGE_NOISE,
            scorer_stream: 1,
            dms: 50,
            first_dm_id: 0,
            strategies: "uniform".into(),
            target: persuade_core::game::DEFAULT_TARGET_PAYOFF,
            game_cap: persuade_core::sim::DEFAULT_GAME_CAP,
            model: p.kind.name().into(),
            hidden: p.hidden_size,
            layers: p.n_layers,
            learning_rate: p.learning_rate,
            epochs: p.epochs,
            batch: p.batch_episodes,
            allow_off_grid: p.allow_off_grid,
            members: 15,
            s_r: 0.0,
            regenerate_per_epoch: true,
            sim_law: "default".into(),
            sim_scorer_stream: 0,
            n_resamples: persuade_core::eval::DEFAULT_RESAMPLES,
            min_count: persuade_core::eval::DEFAULT_MIN_COUNT,
            axis: None,
            grid: None,
            base_dms: 50,
            test_dms: 20,
        }
    }
}

/// Every run-config key as a flag; a flag wins over the same key in `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML file with run-config keys (the flag names below with `_` for `-`).
    #[arg(long, global = true)]
    pub config: Option<std::path::PathBuf>,
    /// Master seed; required by every stochastic command.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Hotels in a generated corpus [default: 1068].
    #[arg(long, global = true)]
    pub corpus_size: Option<usize>,
    /// Persona law of simulated DMs: default or proxy [default: default].
    #[arg(long, global = true)]
    pub law: Option<String>,
    /// Fixed temperament drift rate, overriding the law.
    #[arg(long, global = true)]
    pub eta: Option<f64>,
    /// Fixed trust-noise standard deviation, overriding the law.
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Trustful memory is drawn from 1..=k_max, overriding the law.
    #[arg(long, global = true)]
    pub k_max: Option<usize>,
    /// per_bot or per_game, overriding the law.
    #[arg(long, global = true)]
    pub temperament_scope: Option<String>,
    /// Enabled heuristics joined by `+` (language, trustful, random) or oracle_only.
    #[arg(long, global = true)]
    pub heuristics: Option<String>,
    /// Noise of the language-based review scorer [default: 0.5].
    #[arg(long, global = true)]
    pub language_noise: Option<f64>,
    /// Stream index of the persona scorer under the master seed [default: 1].
    #[arg(long, global = true)]
    pub scorer_stream: Option<u64>,
    /// Number of DMs to simulate [default: 50].
    #[arg(long, global = true)]
    pub dms: Option<usize>,
    /// Id of the first simulated DM [default: 0].
    #[arg(long, global = true)]
    pub first_dm_id: Option<u32>,
    /// Experts per DM: uniform, set_a, set_b, or comma-separated ids [default: uniform].
    #[arg(long, global = true)]
    pub strategies: Option<String>,
    /// Payoff that defeats an expert, 8..=10 [default: 9].
    #[arg(long, global = true)]
    pub target: Option<u8>,
    /// Games per episode before giving up, 0 for none [default: 100].
    #[arg(long, global = true)]
    pub game_cap: Option<u32>,
    /// Predictor: lstm, feed_forward or majority [default: lstm].
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Hidden width [default: 32].
    #[arg(long, global = true)]
    pub hidden: Option<usize>,
    /// Hidden layers [default: 2].
    #[arg(long, global = true)]
    pub layers: Option<usize>,
    /// Adam learning rate [default: 0.001].
    #[arg(long, global = true)]
    pub learning_rate: Option<f64>,
    /// Training epochs [default: 8].
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    /// Episodes per optimizer step [default: 1].
    #[arg(long, global = true)]
    pub batch: Option<usize>,
    /// Permit hyperparameters outside the tuning grids.
    #[arg(long, global = true)]
    pub allow_off_grid: Option<bool>,
    /// Ensemble size; members use seeds 1..=members [default: 15].
    #[arg(long, global = true)]
    pub members: Option<usize>,
    /// Simulated DMs per base DM per epoch [default: 0].
    #[arg(long, global = true)]
    pub s_r: Option<f64>,
    /// Draw fresh simulated DMs every epoch [default: true].
    #[arg(long, global = true)]
    pub regenerate_per_epoch: Option<bool>,
    /// Persona law of the training simulation [default: default].
    #[arg(long, global = true)]
    pub sim_law: Option<String>,
    /// Stream index of the training simulation's scorer [default: 0].
    #[arg(long, global = true)]
    pub sim_scorer_stream: Option<u64>,
    /// Bootstrap resamples [default: 10000].
    #[arg(long, global = true)]
    pub n_resamples: Option<usize>,
    /// Minimum observations per correlation bucket [default: 5].
    #[arg(long, global = true)]
    pub min_count: Option<usize>,
    /// Ablation axis: eta, s_r or heuristics.
    #[arg(long, global = true)]
    pub axis: Option<String>,
    /// Comma-separated ablation grid; `all` on the heuristics axis runs every subset.
    #[arg(long, global = true)]
    pub grid: Option<String>,
    /// Base proxies in the ablation protocol [default: 50].
    #[arg(long, global = true)]
    pub base_dms: Option<usize>,
    /// Test proxies in the ablation protocol [default: 20].
    #[arg(long, global = true)]
    pub test_dms: Option<usize>,
}

macro_rules! apply {
    ($cfg:ident, $o:ident; $($field:ident),*; $($opt:ident),*) => {
        $(if let Some(v) = $o.$field.clone() { $cfg.$field = v; })*
        $(if $o.$opt.is_some() { $cfg.$opt = $o.$opt.clone(); })*
    };
}

impl RunConfig {
    pub fn resolve(o: &Overrides) -> Result<Self, Failure> {
        let mut cfg = match &o.config {
            Some(path) => Self::from_file(path)?,
            None => Self::default(),
        };
        apply!(cfg, o;
            corpus_size, law, language_noise, scorer_stream, dms, first_dm_id, strategies, target,
            game_cap, model, hidden, layers, learning_rate, epochs, batch, allow_off_grid, members,
            s_r, regenerate_per_epoch, sim_law, sim_scorer_stream, n_resamples, min_count, base_dms,
            test_dms;
            seed, eta, epsilon, k_max, temperament_scope, heuristics, axis, grid);
        Ok(cfg)
    }

    fn from_file(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
        toml::from_str(&text).map_err(|e| Failure::validation("config", e.to_string().trim()))
    }

    /// SHA-256 over the canonical JSON form of the resolved config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }

    pub fn require_seed(&self) -> Result<u64, Failure> {
        self.seed
            .ok_or_else(|| Failure::validation("missing_seed", "this command is stochastic and needs --seed"))
    }

    fn law_named(&self, name: &str, scorer: Arc<dyn ReviewScorer>) -> Result<PersonaLaw, Failure> {
        match name {
            "default" => Ok(PersonaLaw::default_with(scorer)),
            "proxy" => Ok(PersonaLaw::proxy_with(scorer)),
            _ => Err(Failure::validation("law", format!("unknown persona law {name:?}"))),
        }
    }

    pub fn scorer(&self, seed: u64, stream: u64) -> Result<Arc<dyn ReviewScorer>, Failure> {
        if !(self.language_noise >= 0.0 && self.language_noise.is_finite()) {
            return Err(Failure::validation("language_noise", "must be finite and nonnegative"));
        }
        Ok(Arc::new(NoisyOracleScorer::new(
            rng::derive_seed(seed, &[rng::label::SCORER, stream]),
            self.language_noise,
        )))
    }

    /// The persona law with any explicit overrides applied.
    pub fn persona_law(&self, name: &str, scorer: Arc<dyn ReviewScorer>) -> Result<PersonaLaw, Failure> {
        let mut law = self.law_named(name, scorer)?;
        if let Some(eta) = self.eta {
            if !(eta >= 0.0 && eta < 1.0) {
                return Err(Failure::validation("eta", format!("must be in [0, 1), got {eta}")));
            }
            law.eta = RealLaw::Fixed(eta);
        }
        if let Some(eps) = self.epsilon {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(Failure::validation("epsilon", format!("must be positive, got {eps}")));
            }
            law.epsilon = RealLaw::Fixed(eps);
        }
        if let Some(k) = self.k_max {
            if k == 0 {
                return Err(Failure::validation("k_max", "must be at least 1"));
            }
            law.k_max = k;
        }
        if let Some(scope) = &self.temperament_scope {
            law.scope = scope
                .parse::<TemperamentScope>()
                .map_err(|e| Failure::validation("temperament_scope", e.to_string()))?;
        }
        if let Some(h) = &self.heuristics {
            law.heuristics = parse_heuristics(h)?;
        }
        Ok(law)
    }

    pub fn rules(&self) -> Result<EpisodeRules, Failure> {
        if !(8..=10).contains(&self.target) {
            return Err(Failure::validation("target", format!("must be in 8..=10, got {}", self.target)));
        }
        Ok(EpisodeRules {
            target: self.target,
            per_strategy_target: Default::default(),
            cap: (self.game_cap > 0).then_some(self.game_cap),
        })
    }

    pub fn plan(&self, catalog: &StrategyCatalog) -> Result<StrategyPlan, Failure> {
        let sets = || builtin_sets(catalog);
        Ok(match self.strategies.as_str() {
            "uniform" => StrategyPlan::Uniform {
                count: STRATEGIES_PER_DM,
            },
            "set_a" => StrategyPlan::Fixed(sets().set_a),
            "set_b" => StrategyPlan::Fixed(sets().set_b),
            list => StrategyPlan::Fixed(
                list.split(',')
                    .map(|s| s.trim().parse::<u32>().map(StrategyId))
                    .collect::<Result<_, _>>()
                    .map_err(|_| Failure::validation("strategies", format!("cannot parse {list:?}")))?,
            ),
        })
    }

    pub fn predictor(&self) -> Result<PredictorConfig, Failure> {
        let kind: PredictorKind = self
            .model
            .parse()
            .map_err(|e: persuade_core::predictors::PredictorError| Failure::validation("model", e.to_string()))?;
        let config = PredictorConfig {
            kind,
            hidden_size: self.hidden,
            n_layers: self.layers,
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_episodes: self.batch,
            seed: 1,
            allow_off_grid: self.allow_off_grid,
        };
        config
            .validate()
            .map_err(|e| Failure::validation("predictor", e.to_string()))?;
        Ok(config)
    }

    pub fn member_seeds(&self) -> Result<Vec<u64>, Failure> {
        if self.members == 0 {
            return Err(Failure::validation("members", "need at least one member"));
        }
        Ok((1..=self.members as u64).collect())
    }

    pub fn schedule(&self, seed: u64) -> Result<MixSchedule, Failure> {
        let scorer = self.scorer(seed, self.sim_scorer_stream)?;
        let law = self.persona_law(&self.sim_law, scorer)?;
        let mut schedule = MixSchedule::new(self.s_r, law);
        schedule.regenerate_per_epoch = self.regenerate_per_epoch;
        schedule
            .validate()
            .map_err(|e| Failure::validation("s_r", e.to_string()))?;
        Ok(schedule)
    }

    pub fn ablation_grid(&self) -> Result<AblationGrid, Failure> {
        let axis = self
            .axis
            .as_deref()
            .ok_or_else(|| Failure::validation("axis", "ablate needs --axis"))?;
        let grid = self.grid.as_deref().unwrap_or("");
        let reals = || -> Result<Vec<f64>, Failure> {
            let v: Vec<f64> = grid
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| Failure::validation("grid", format!("cannot parse {grid:?}")))?;
            Ok(v)
        };
        match axis {
            "eta" => Ok(AblationGrid::Eta(reals()?)),
            "s_r" => Ok(AblationGrid::SR(reals()?)),
            "heuristics" if grid.is_empty() || grid == "all" => Ok(AblationGrid::Heuristics(HeuristicSet::combinations())),
            "heuristics" => Ok(AblationGrid::Heuristics(
                grid.split(',').map(parse_heuristics).collect::<Result<_, _>>()?,
            )),
            other => Err(Failure::validation("axis", format!("unknown ablation axis {other:?}"))),
        }
    }
}

fn parse_heuristics(text: &str) -> Result<HeuristicSet, Failure> {
    let mut set = HeuristicSet {
        trustful: false,
        language: false,
        random: false,
    };
    if text.trim() == "oracle_only" {
        return Ok(set);
    }
    for part in text.split('+') {
        match part.trim() {
            "language" => set.language = true,
            "trustful" => set.trustful = true,
            "random" => set.random = true,
            other => return Err(Failure::validation("heuristics", format!("unknown heuristic {other:?}"))),
        }
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        let err = toml::from_str::<RunConfig>("seed = 3\nbogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn flags_override_file_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "seed = 3\ndms = 4\nhidden = 16\n").unwrap();
        let o = Overrides {
            config: Some(path),
            dms: Some(9),
            ..Overrides::default()
        };
        let cfg = RunConfig::resolve(&o).unwrap();
        assert_eq!((cfg.seed, cfg.dms, cfg.hidden), (Some(3), 9, 16));
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let b = RunConfig {
            s_r: 0.0,
            ..RunConfig::default()
        };
        assert_eq!(a.hash(), b.hash());
        let c = RunConfig {
            s_r: 4.0,
            ..RunConfig::default()
        };
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn heuristic_labels_parse_back() {
        for h in HeuristicSet::combinations() {
            assert_eq!(parse_heuristics(&h.label()).unwrap(), h);
        }
    }
}
