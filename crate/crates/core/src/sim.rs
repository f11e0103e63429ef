//! Simulated decision-makers and the data-generation loop.
//!
//! A simulated DM mixes four heuristics. Its temperament `(p0, p1, p2, p3)`
//! weighs Oracle, Trustful, Language-based and Random; it starts at
//! `(0, nature)` and drifts after every round as each `p_i` is multiplied by
//! `1 - gamma_i` with `gamma_i ~ U(-eta/10, eta)`. Mass leaving the three
//! heuristics flows to the oracle, which models learning.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Dirichlet, Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::game::{
    Decision, DmId, GameRecord, Hotel, Review, ReviewId, RoundRecord, Source, StrategyId,
    DEFAULT_TARGET_PAYOFF, GOOD_THRESHOLD, MAX_SCORE, MIN_SCORE, ROUNDS_PER_GAME,
};
use crate::interactions::InteractionLog;
use crate::rng::{self, StreamRng};
use crate::strategy::{review_rank, select_review, StrategyCatalog, StrategyTree};

pub const DEFAULT_GAME_CAP: u32 = 100;
pub const DEFAULT_ETA: f64 = 0.01;
pub const DEFAULT_EPSILON: f64 = 0.3;
pub const DEFAULT_K_MAX: usize = 3;
pub const DEFAULT_LANGUAGE_NOISE: f64 = 0.5;
pub const STRATEGIES_PER_DM: usize = 6;
/// Tested improvement rates; 0.01 is the selected default.
pub const ETA_GRID: [f64; 5] = [0.0, 0.005, 0.01, 0.02, 0.1];

const SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("corpus has {have} hotels, a game needs {need}")]
    CorpusTooSmall { have: usize, need: usize },
    #[error("strategy catalog has {have} strategies, {need} requested")]
    NotEnoughStrategies { have: usize, need: usize },
    #[error("unknown strategy {0}")]
    UnknownStrategy(StrategyId),
    #[error("scorer file: {0}")]
    ScorerFile(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Heuristic {
    Oracle,
    Trustful,
    Language,
    Random,
}

impl Heuristic {
    pub const ALL: [Heuristic; 4] = [
        Heuristic::Oracle,
        Heuristic::Trustful,
        Heuristic::Language,
        Heuristic::Random,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Initial weights of the Trustful, Language-based and Random heuristics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NatureVector([f64; 3]);

impl NatureVector {
    pub fn new(trustful: f64, language: f64, random: f64) -> Result<Self, SimError> {
        let p = [trustful, language, random];
        if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(SimError::InvalidParameter(format!(
                "nature weights must be nonnegative, got {p:?}"
            )));
        }
        if (p.iter().sum::<f64>() - 1.0).abs() > SUM_TOLERANCE {
            return Err(SimError::InvalidParameter(format!(
                "nature weights must sum to 1, got {p:?}"
            )));
        }
        Ok(Self(p))
    }

    /// Normalizes nonnegative weights `w / sum(w)`.
    pub fn from_weights(w: [f64; 3]) -> Result<Self, SimError> {
        let sum: f64 = w.iter().sum();
        if w.iter().any(|&x| !(x >= 0.0)) || !(sum > 0.0) || !sum.is_finite() {
            return Err(SimError::InvalidParameter(format!(
                "nature weights must be nonnegative with a positive sum, got {w:?}"
            )));
        }
        Ok(Self(w.map(|x| x / sum)))
    }

    pub fn uniform() -> Self {
        Self([1.0 / 3.0; 3])
    }

    pub fn weights(&self) -> [f64; 3] {
        self.0
    }
}

/// The evolving heuristic mixture `(p0, p1, p2, p3)` and its round counter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Temperament {
    p: [f64; 4],
    t: u32,
}

impl Temperament {
    pub fn initial(nature: &NatureVector) -> Self {
        let [a, b, c] = nature.weights();
        Self {
            p: [0.0, a, b, c],
            t: 0,
        }
    }

    pub fn oracle_only() -> Self {
        Self {
            p: [1.0, 0.0, 0.0, 0.0],
            t: 0,
        }
    }

    pub fn from_probabilities(p: [f64; 4]) -> Result<Self, SimError> {
        let t = Self { p, t: 0 };
        if !t.is_valid() {
            return Err(SimError::InvalidParameter(format!(
                "temperament must be a probability vector, got {p:?}"
            )));
        }
        Ok(t)
    }

    pub fn probabilities(&self) -> [f64; 4] {
        self.p
    }

    pub fn weight(&self, h: Heuristic) -> f64 {
        self.p[h.index()]
    }

    pub fn round(&self) -> u32 {
        self.t
    }

    pub fn is_valid(&self) -> bool {
        self.p.iter().all(|&x| (0.0..=1.0).contains(&x))
            && (self.p.iter().sum::<f64>() - 1.0).abs() <= SUM_TOLERANCE
    }

    /// One round of drift with `gamma_i ~ U(-eta/10, eta)` drawn independently
    /// per heuristic. `eta == 0` draws nothing.
    pub fn update<R: Rng + ?Sized>(&mut self, eta: f64, rng: &mut R) {
        let gammas = if eta > 0.0 {
            let lo = -eta / 10.0;
            [(); 3].map(|_| lo + (eta - lo) * rng.random::<f64>())
        } else {
            [0.0; 3]
        };
        self.update_with(gammas);
    }

    /// Applies the given `gamma` values. If the three heuristic weights then
    /// sum above one they are rescaled proportionally to sum to one.
    pub fn update_with(&mut self, gammas: [f64; 3]) {
        for (p, g) in self.p[1..].iter_mut().zip(gammas) {
            *p *= 1.0 - g;
        }
        let sum: f64 = self.p[1..].iter().sum();
        if sum > 1.0 {
            for p in &mut self.p[1..] {
                *p /= sum;
            }
            self.p[0] = 0.0;
        } else {
            self.p[0] = (1.0 - sum).max(0.0);
        }
        self.t += 1;
    }

    /// Maps a uniform draw in `[0, 1)` to a heuristic by inverse CDF.
    pub fn pick(&self, u: f64) -> Heuristic {
        let mut acc = 0.0;
        for h in Heuristic::ALL {
            acc += self.p[h.index()];
            if u < acc {
                return h;
            }
        }
        // Rounding left u above the cumulative sum: take the last heuristic
        // with positive weight.
        Heuristic::ALL
            .into_iter()
            .rev()
            .find(|h| self.p[h.index()] > 0.0)
            .unwrap_or(Heuristic::Oracle)
    }
}

/// When the temperament returns to `(0, nature)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemperamentScope {
    /// At the start of every 10-round game.
    PerGame,
    /// Once per DM-expert episode, so learning carries across games.
    #[default]
    PerBot,
}

impl FromStr for TemperamentScope {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per_game" => Ok(Self::PerGame),
            "per_bot" => Ok(Self::PerBot),
            _ => Err(SimError::InvalidParameter(format!(
                "temperament scope must be per_game or per_bot, got {s:?}"
            ))),
        }
    }
}

impl fmt::Display for TemperamentScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::PerGame => "per_game",
            Self::PerBot => "per_bot",
        })
    }
}

/// Stand-in for the language model that reads a review and predicts its score.
pub trait ReviewScorer: Send + Sync + fmt::Debug {
    fn score(&self, review: &Review) -> f64;
}

/// True score plus seeded Gaussian noise, fixed per review id.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisyOracleScorer {
    pub seed: u64,
    pub std: f64,
}

impl NoisyOracleScorer {
    pub fn new(seed: u64, std: f64) -> Self {
        Self { seed, std }
    }
}

impl ReviewScorer for NoisyOracleScorer {
    fn score(&self, review: &Review) -> f64 {
        if self.std == 0.0 {
            return review.score;
        }
        let mut rng = rng::stream(self.seed, &[rng::label::SCORER, u64::from(review.id.0)]);
        let z: f64 = StandardNormal.sample(&mut rng);
        (review.score + self.std * z).clamp(MIN_SCORE, MAX_SCORE)
    }
}

/// Predicted scores loaded from a `review_id,score` CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct FileScorer {
    scores: HashMap<ReviewId, f64>,
}

impl FileScorer {
    pub fn new(scores: HashMap<ReviewId, f64>) -> Self {
        Self { scores }
    }

    /// Loads the file and checks it covers every review of `corpus`.
    pub fn load(path: &Path, corpus: &Corpus) -> Result<Self, SimError> {
        let err = |e: &dyn fmt::Display| SimError::ScorerFile(format!("{}: {e}", path.display()));
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| err(&e))?;
        let mut scores = HashMap::new();
        for (i, rec) in reader.deserialize::<(u32, f64)>().enumerate() {
            let (id, score) = rec.map_err(|e| err(&e))?;
            if !(MIN_SCORE..=MAX_SCORE).contains(&score) {
                return Err(err(&format!("row {}: score {score} outside [1, 10]", i + 1)));
            }
            scores.insert(ReviewId(id), score);
        }
        if let Some(missing) = corpus
            .hotels()
            .iter()
            .flat_map(|h| h.reviews())
            .find(|r| !scores.contains_key(&r.id))
        {
            return Err(err(&format!("no score for review {}", missing.id)));
        }
        Ok(Self { scores })
    }
}

impl ReviewScorer for FileScorer {
    fn score(&self, review: &Review) -> f64 {
        self.scores.get(&review.id).copied().unwrap_or(review.score)
    }
}

#[derive(Debug, Clone)]
pub struct DmPersona {
    pub dm_id: DmId,
    pub nature: NatureVector,
    pub eta: f64,
    pub epsilon: f64,
    /// Trustful look-back window.
    pub k: usize,
    pub scope: TemperamentScope,
    /// Replaces `(0, nature)` as the temperament at every reset.
    pub initial: Option<Temperament>,
    pub scorer: Arc<dyn ReviewScorer>,
}

impl DmPersona {
    pub fn new(
        dm_id: DmId,
        nature: NatureVector,
        eta: f64,
        epsilon: f64,
        k: usize,
        scorer: Arc<dyn ReviewScorer>,
    ) -> Result<Self, SimError> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(SimError::InvalidParameter(format!("eta must be in [0, 1], got {eta}")));
        }
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(SimError::InvalidParameter(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        if k == 0 {
            return Err(SimError::InvalidParameter("K must be at least 1".into()));
        }
        Ok(Self {
            dm_id,
            nature,
            eta,
            epsilon,
            k,
            scope: TemperamentScope::default(),
            initial: None,
            scorer,
        })
    }

    pub fn with_scope(mut self, scope: TemperamentScope) -> Self {
        self.scope = scope;
        self
    }

    pub fn with_initial_temperament(mut self, t: Temperament) -> Self {
        self.initial = Some(t);
        self
    }

    pub fn initial_temperament(&self) -> Temperament {
        self.initial.unwrap_or_else(|| Temperament::initial(&self.nature))
    }
}

/// What a Trustful DM remembers of one earlier round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustObservation {
    /// Shown score plus the DM's reading noise.
    pub est_score: f64,
    pub hotel_good: bool,
}

impl TrustObservation {
    pub fn matched(&self) -> bool {
        (self.est_score >= GOOD_THRESHOLD) == self.hotel_good
    }
}

pub fn decide_oracle(hotel: &Hotel) -> Decision {
    Decision::from_go(hotel.good())
}

/// Go iff the last `min(k, len)` observations all matched; an empty history
/// is trusted.
pub fn decide_trustful(k: usize, history: &[TrustObservation]) -> Decision {
    let recent = &history[history.len().saturating_sub(k)..];
    Decision::from_go(recent.iter().all(TrustObservation::matched))
}

pub fn decide_language(scorer: &dyn ReviewScorer, review: &Review) -> Decision {
    Decision::from_go(scorer.score(review) >= GOOD_THRESHOLD)
}

pub fn decide_random<R: Rng + ?Sized>(rng: &mut R) -> Decision {
    Decision::from_go(rng.random_bool(0.5))
}

pub struct DecisionContext<'a> {
    pub trust_history: &'a [TrustObservation],
    pub review: &'a Review,
    pub hotel: &'a Hotel,
}

/// Samples a heuristic from the temperament and applies it.
pub fn decide<R: Rng + ?Sized>(
    persona: &DmPersona,
    temperament: &Temperament,
    ctx: &DecisionContext<'_>,
    rng: &mut R,
) -> (Heuristic, Decision) {
    let h = temperament.pick(rng.random::<f64>());
    let d = match h {
        Heuristic::Oracle => decide_oracle(ctx.hotel),
        Heuristic::Trustful => decide_trustful(persona.k, ctx.trust_history),
        Heuristic::Language => decide_language(persona.scorer.as_ref(), ctx.review),
        Heuristic::Random => decide_random(rng),
    };
    (h, d)
}

/// Episode termination: the target payoff that defeats each expert and the
/// game cap (`None` plays until defeat).
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRules {
    pub target: u8,
    pub per_strategy_target: BTreeMap<StrategyId, u8>,
    pub cap: Option<u32>,
}

impl Default for EpisodeRules {
    fn default() -> Self {
        Self {
            target: DEFAULT_TARGET_PAYOFF,
            per_strategy_target: BTreeMap::new(),
            cap: Some(DEFAULT_GAME_CAP),
        }
    }
}

impl EpisodeRules {
    pub fn target_for(&self, strategy: StrategyId) -> u8 {
        self.per_strategy_target
            .get(&strategy)
            .copied()
            .unwrap_or(self.target)
    }
}

/// Mutable DM state carried through an episode.
#[derive(Debug, Clone)]
pub struct DmState {
    pub temperament: Temperament,
    pub trust_history: Vec<TrustObservation>,
}

impl DmState {
    pub fn new(persona: &DmPersona) -> Self {
        Self {
            temperament: persona.initial_temperament(),
            trust_history: Vec::new(),
        }
    }
}

/// Plays one 10-round game on freshly sampled hotels. Per round: the expert
/// picks a review, the DM reads it and decides, the payoff is revealed and
/// the temperament drifts.
pub fn play_game<R: Rng + ?Sized>(
    persona: &DmPersona,
    strategy: &StrategyTree,
    corpus: &Corpus,
    state: &mut DmState,
    rng: &mut R,
) -> Result<Vec<RoundRecord>, SimError> {
    if corpus.len() < ROUNDS_PER_GAME {
        return Err(SimError::CorpusTooSmall {
            have: corpus.len(),
            need: ROUNDS_PER_GAME,
        });
    }
    let noise = Normal::new(0.0, persona.epsilon).expect("validated epsilon");
    let hotels = index::sample(rng, corpus.len(), ROUNDS_PER_GAME);
    let mut rounds: Vec<RoundRecord> = Vec::with_capacity(ROUNDS_PER_GAME);
    for (t, h) in hotels.iter().enumerate() {
        let hotel = &corpus.hotels()[h];
        let shown = select_review(strategy, &rounds, hotel);
        let review = &hotel.reviews()[shown];
        let est_score = review.score + noise.sample(rng);
        let ctx = DecisionContext {
            trust_history: &state.trust_history,
            review,
            hotel,
        };
        let (_, decision) = decide(persona, &state.temperament, &ctx, rng);
        rounds.push(RoundRecord::new(
            t as u8 + 1,
            hotel.id,
            review.id,
            decision,
            hotel.good(),
            0,
        ));
        state.trust_history.push(TrustObservation {
            est_score,
            hotel_good: hotel.good(),
        });
        state.temperament.update(persona.eta, rng);
    }
    Ok(rounds)
}

/// Plays games against one expert until the DM reaches the target payoff or
/// the cap is hit.
pub fn play_episode<R: Rng + ?Sized>(
    persona: &DmPersona,
    strategy: &StrategyTree,
    strategy_id: StrategyId,
    corpus: &Corpus,
    rules: &EpisodeRules,
    rng: &mut R,
) -> Result<Vec<GameRecord>, SimError> {
    let target = rules.target_for(strategy_id);
    if !(8..=10).contains(&target) {
        return Err(SimError::InvalidParameter(format!(
            "target payoff must be in 8..=10, got {target}"
        )));
    }
    let mut state = DmState::new(persona);
    let mut games = Vec::new();
    loop {
        if persona.scope == TemperamentScope::PerGame {
            state.temperament = persona.initial_temperament();
        }
        let rounds = play_game(persona, strategy, corpus, &mut state, rng)?;
        let game = GameRecord::new(
            persona.dm_id,
            strategy_id,
            games.len() as u32 + 1,
            Source::Sim,
            rounds,
        )
        .expect("simulated games are well formed");
        let won = game.total_payoff >= target;
        games.push(game);
        if won || rules.cap.is_some_and(|cap| games.len() as u32 >= cap) {
            return Ok(games);
        }
    }
}

/// Which heuristics a persona law may use. Disabled heuristics get zero
/// nature weight; with none enabled the DM is a pure oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HeuristicSet {
    pub trustful: bool,
    pub language: bool,
    pub random: bool,
}

impl Default for HeuristicSet {
    fn default() -> Self {
        Self::ALL
    }
}

impl HeuristicSet {
    pub const ALL: Self = Self {
        trustful: true,
        language: true,
        random: true,
    };

    /// All 8 on/off combinations; the all-off one is the oracle-only DM.
    pub fn combinations() -> Vec<Self> {
        (0..8u8)
            .rev()
            .map(|m| Self {
                language: m & 4 != 0,
                trustful: m & 2 != 0,
                random: m & 1 != 0,
            })
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        !(self.trustful || self.language || self.random)
    }

    pub fn label(&self) -> String {
        if self.is_empty() {
            return "oracle_only".into();
        }
        let mut parts = Vec::new();
        if self.language {
            parts.push("language");
        }
        if self.trustful {
            parts.push("trustful");
        }
        if self.random {
            parts.push("random");
        }
        parts.join("+")
    }

    fn mask(&self, nature: NatureVector) -> Option<NatureVector> {
        let [a, b, c] = nature.weights();
        let w = [
            if self.trustful { a } else { 0.0 },
            if self.language { b } else { 0.0 },
            if self.random { c } else { 0.0 },
        ];
        NatureVector::from_weights(w).ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NatureLaw {
    Fixed(NatureVector),
    /// Symmetric Dirichlet with the given concentration.
    Dirichlet(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RealLaw {
    Fixed(f64),
    Uniform(f64, f64),
}

impl RealLaw {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            RealLaw::Fixed(x) => x,
            RealLaw::Uniform(lo, hi) => lo + (hi - lo) * rng.random::<f64>(),
        }
    }
}

/// Distribution over personas.
#[derive(Debug, Clone)]
pub struct PersonaLaw {
    pub nature: NatureLaw,
    pub eta: RealLaw,
    pub epsilon: RealLaw,
    /// `K ~ U{1..=k_max}`.
    pub k_max: usize,
    pub scope: TemperamentScope,
    pub heuristics: HeuristicSet,
    pub scorer: Arc<dyn ReviewScorer>,
}

impl PersonaLaw {
    /// Uniform nature, `eta = 0.01`, `epsilon = 0.3`, `K ~ U{1,2,3}`.
    pub fn default_with(scorer: Arc<dyn ReviewScorer>) -> Self {
        Self {
            nature: NatureLaw::Fixed(NatureVector::uniform()),
            eta: RealLaw::Fixed(DEFAULT_ETA),
            epsilon: RealLaw::Fixed(DEFAULT_EPSILON),
            k_max: DEFAULT_K_MAX,
            scope: TemperamentScope::PerBot,
            heuristics: HeuristicSet::ALL,
            scorer,
        }
    }

    /// The perturbed law of the pseudo-human proxies: Dirichlet(2) nature,
    /// `eta ~ U[0.005, 0.02]`, `epsilon ~ U[0.2, 0.4]`, `K ~ U{1..4}`.
    pub fn proxy_with(scorer: Arc<dyn ReviewScorer>) -> Self {
        Self {
            nature: NatureLaw::Dirichlet(2.0),
            eta: RealLaw::Uniform(0.005, 0.02),
            epsilon: RealLaw::Uniform(0.2, 0.4),
            k_max: 4,
            scope: TemperamentScope::PerBot,
            heuristics: HeuristicSet::ALL,
            scorer,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, dm_id: DmId, rng: &mut R) -> Result<DmPersona, SimError> {
        let nature = match self.nature {
            NatureLaw::Fixed(n) => n,
            NatureLaw::Dirichlet(alpha) => {
                let d = Dirichlet::new([alpha; 3])
                    .map_err(|e| SimError::InvalidParameter(format!("dirichlet: {e}")))?;
                NatureVector::from_weights(d.sample(rng))?
            }
        };
        let eta = self.eta.sample(rng);
        let epsilon = self.epsilon.sample(rng);
        if self.k_max == 0 {
            return Err(SimError::InvalidParameter("k_max must be at least 1".into()));
        }
        let k = rng.random_range(1..=self.k_max);
        let masked = self.heuristics.mask(nature);
        let persona = DmPersona::new(
            dm_id,
            masked.unwrap_or(nature),
            eta,
            epsilon,
            k,
            Arc::clone(&self.scorer),
        )?
        .with_scope(self.scope);
        Ok(match masked {
            Some(_) => persona,
            None => persona.with_initial_temperament(Temperament::oracle_only()),
        })
    }
}

/// How each simulated DM's experts are chosen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StrategyPlan {
    /// `count` distinct strategies drawn uniformly from the catalog per DM.
    Uniform { count: usize },
    /// The same ordered set for every DM.
    Fixed(Vec<StrategyId>),
}

impl Default for StrategyPlan {
    fn default() -> Self {
        StrategyPlan::Uniform {
            count: STRATEGIES_PER_DM,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulationSpec {
    pub law: PersonaLaw,
    pub plan: StrategyPlan,
    pub rules: EpisodeRules,
    /// DM ids are `first_dm_id..first_dm_id + n_dms`.
    pub first_dm_id: u32,
}

impl SimulationSpec {
    pub fn new(law: PersonaLaw) -> Self {
        Self {
            law,
            plan: StrategyPlan::default(),
            rules: EpisodeRules::default(),
            first_dm_id: 0,
        }
    }
}

/// Simulates `n_dms` DMs, each on its own PRNG stream derived from `seed`
/// and the DM's ordinal, so the log does not depend on the thread schedule.
pub fn simulate_dataset(
    n_dms: usize,
    spec: &SimulationSpec,
    catalog: &StrategyCatalog,
    corpus: &Corpus,
    seed: u64,
) -> Result<InteractionLog, SimError> {
    if corpus.len() < ROUNDS_PER_GAME {
        return Err(SimError::CorpusTooSmall {
            have: corpus.len(),
            need: ROUNDS_PER_GAME,
        });
    }
    match &spec.plan {
        StrategyPlan::Uniform { count } if *count > catalog.len() => {
            return Err(SimError::NotEnoughStrategies {
                have: catalog.len(),
                need: *count,
            })
        }
        StrategyPlan::Fixed(ids) => {
            if let Some(&bad) = ids.iter().find(|&&id| catalog.get(id).is_none()) {
                return Err(SimError::UnknownStrategy(bad));
            }
        }
        _ => {}
    }
    let per_dm: Vec<Vec<GameRecord>> = (0..n_dms)
        .into_par_iter()
        .map(|d| simulate_dm(d, spec, catalog, corpus, seed))
        .collect::<Result<_, _>>()?;
    Ok(InteractionLog::new(per_dm.into_iter().flatten().collect()))
}

fn simulate_dm(
    ordinal: usize,
    spec: &SimulationSpec,
    catalog: &StrategyCatalog,
    corpus: &Corpus,
    seed: u64,
) -> Result<Vec<GameRecord>, SimError> {
    let mut rng = dm_stream(seed, ordinal);
    let dm_id = DmId(spec.first_dm_id + ordinal as u32);
    let persona = spec.law.sample(dm_id, &mut rng)?;
    let strategies: Vec<StrategyId> = match &spec.plan {
        StrategyPlan::Uniform { count } => index::sample(&mut rng, catalog.len(), *count)
            .iter()
            .map(|i| StrategyId(i as u32))
            .collect(),
        StrategyPlan::Fixed(ids) => ids.clone(),
    };
    let mut games = Vec::new();
    for sid in strategies {
        let tree = catalog.get(sid).ok_or(SimError::UnknownStrategy(sid))?;
        games.extend(play_episode(&persona, tree, sid, corpus, &spec.rules, &mut rng)?);
    }
    Ok(games)
}

pub fn dm_stream(seed: u64, ordinal: usize) -> StreamRng {
    rng::stream(seed, &[rng::label::DM, ordinal as u64])
}

/// Monte Carlo distribution of the revealed review's rank (index 0 = best,
/// 6 = worst) when `strategy` plays one episode against each of `n_dms`
/// personas drawn from `law`.
pub fn induced_reveal_distribution(
    strategy: &StrategyTree,
    law: &PersonaLaw,
    corpus: &Corpus,
    n_dms: usize,
    seed: u64,
) -> Result<[f64; 7], SimError> {
    if n_dms == 0 {
        return Err(SimError::InvalidParameter("DM population is empty".into()));
    }
    let rules = EpisodeRules::default();
    let mut counts = [0u64; 7];
    for d in 0..n_dms {
        let mut rng = dm_stream(seed, d);
        let persona = law.sample(DmId(d as u32), &mut rng)?;
        for game in play_episode(&persona, strategy, StrategyId(0), corpus, &rules, &mut rng)? {
            for r in &game.rounds {
                let hotel = corpus.hotel(r.hotel_id).expect("simulated hotel");
                let shown = hotel
                    .reviews()
                    .iter()
                    .position(|x| x.id == r.shown_review_id)
                    .expect("shown review belongs to hotel");
                counts[review_rank(hotel, shown)] += 1;
            }
        }
    }
    let total: u64 = counts.iter().sum();
    Ok(counts.map(|c| c as f64 / total as f64))
}
