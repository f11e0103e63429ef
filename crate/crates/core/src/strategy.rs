//! Expert strategies: deterministic decision trees of depth at most two.
//!
//! Inner nodes test one of four binary conditions on the current hotel and
//! the history of the current game; leaves pick the best, mean, or worst
//! review of the hotel. Two trees are the same strategy when they act
//! identically on all 16 condition states, so the strategy space is
//! enumerated by behavioral signature rather than by syntax.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{Hotel, RoundRecord, StrategyId, REVIEWS_PER_HOTEL};
use crate::rng;

/// Maximum tree depth in the strategy space.
pub const MAX_DEPTH: usize = 2;
/// Number of distinct condition states (four binary conditions).
pub const STATE_COUNT: usize = 16;
/// Strategies per built-in expert set.
pub const SET_SIZE: usize = 6;
/// Seed for the diversity-driven completion of the built-in sets.
pub const BUILTIN_SELECTION_SEED: u64 = 2023;

#[derive(Debug, Error)]
pub enum StrategyError {
    #[error("unknown condition name {0:?}")]
    UnknownCondition(String),
    #[error("unknown action name {0:?}")]
    UnknownAction(String),
    #[error("tree depth {0} exceeds {MAX_DEPTH}")]
    TooDeep(usize),
    #[error("malformed strategy JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// The current hotel's mean score reaches the threshold.
    CurrentHotelGood,
    /// The DM went to the hotel in the previous round.
    PrevWentHotel,
    /// The previous round's hotel was good.
    PrevHotelGood,
    /// Points earned so far exceed the number of Go decisions so far.
    PointsExceedGoCount,
}

impl Condition {
    pub const ALL: [Condition; 4] = [
        Condition::CurrentHotelGood,
        Condition::PrevWentHotel,
        Condition::PrevHotelGood,
        Condition::PointsExceedGoCount,
    ];

    fn index(self) -> usize {
        self as usize
    }

    /// Bit position inside a [`ConditionState`] index; `CurrentHotelGood` is
    /// the most significant bit.
    fn bit(self) -> u8 {
        3 - self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            Condition::CurrentHotelGood => "current_hotel_good",
            Condition::PrevWentHotel => "prev_went_hotel",
            Condition::PrevHotelGood => "prev_hotel_good",
            Condition::PointsExceedGoCount => "points_exceed_go_count",
        }
    }

    pub fn is_quality(self) -> bool {
        self == Condition::CurrentHotelGood
    }
}

impl FromStr for Condition {
    type Err = StrategyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Condition::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| StrategyError::UnknownCondition(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Action {
    SendBest,
    SendMean,
    SendWorst,
}

impl Action {
    pub const ALL: [Action; 3] = [Action::SendBest, Action::SendMean, Action::SendWorst];

    pub fn name(self) -> &'static str {
        match self {
            Action::SendBest => "best",
            Action::SendMean => "mean",
            Action::SendWorst => "worst",
        }
    }

    pub fn letter(self) -> char {
        match self {
            Action::SendBest => 'B',
            Action::SendMean => 'M',
            Action::SendWorst => 'W',
        }
    }

    /// Index of the review this action reveals. Ties go to the lowest index;
    /// `SendMean` picks the review closest to the hotel's mean score.
    pub fn pick(self, hotel: &Hotel) -> usize {
        let scores = hotel.reviews().map(|r| r.score);
        let key = |i: usize| match self {
            Action::SendBest => -scores[i],
            Action::SendWorst => scores[i],
            Action::SendMean => (scores[i] - hotel.mean_score()).abs(),
        };
        (1..REVIEWS_PER_HOTEL).fold(0, |best, i| if key(i) < key(best) { i } else { best })
    }
}

impl FromStr for Action {
    type Err = StrategyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Action::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| StrategyError::UnknownAction(s.to_string()))
    }
}

/// Truth values of the four conditions at one decision point, packed as
/// `current_good << 3 | prev_went << 2 | prev_good << 1 | points_exceed`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConditionState(u8);

impl ConditionState {
    pub fn from_index(index: usize) -> Self {
        assert!(index < STATE_COUNT);
        Self(index as u8)
    }

    /// Observes the state before a round. `history` holds the earlier rounds
    /// of the current game; at round one every history condition is false.
    pub fn observe(history: &[RoundRecord], current_hotel_good: bool) -> Self {
        let (prev_went, prev_good) = history
            .last()
            .map_or((false, false), |r| (r.decision.is_go(), r.hotel_good));
        let points: u32 = history.iter().map(|r| u32::from(r.dm_payoff)).sum();
        let gos = history.iter().filter(|r| r.decision.is_go()).count() as u32;
        let mut s = Self(0);
        s.set(Condition::CurrentHotelGood, current_hotel_good);
        s.set(Condition::PrevWentHotel, prev_went);
        s.set(Condition::PrevHotelGood, prev_good);
        s.set(Condition::PointsExceedGoCount, points > gos);
        s
    }

    fn set(&mut self, c: Condition, value: bool) {
        if value {
            self.0 |= 1 << c.bit();
        }
    }

    pub fn get(self, c: Condition) -> bool {
        (self.0 >> c.bit()) & 1 == 1
    }

    pub fn index(self) -> usize {
        usize::from(self.0)
    }
}

pub fn eval_condition(cond: Condition, history: &[RoundRecord], current_hotel: &Hotel) -> bool {
    ConditionState::observe(history, current_hotel.good()).get(cond)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Node {
    Leaf(Action),
    Split {
        cond: Condition,
        on_true: Box<Node>,
        on_false: Box<Node>,
    },
}

impl Node {
    pub fn split(cond: Condition, on_true: Node, on_false: Node) -> Self {
        Node::Split {
            cond,
            on_true: Box::new(on_true),
            on_false: Box::new(on_false),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf(_) => 0,
            Node::Split {
                on_true, on_false, ..
            } => 1 + on_true.depth().max(on_false.depth()),
        }
    }

    fn size(&self) -> usize {
        match self {
            Node::Leaf(_) => 1,
            Node::Split {
                on_true, on_false, ..
            } => 1 + on_true.size() + on_false.size(),
        }
    }

    pub fn act(&self, state: ConditionState) -> Action {
        match self {
            Node::Leaf(a) => *a,
            Node::Split {
                cond,
                on_true,
                on_false,
            } => {
                if state.get(*cond) {
                    on_true.act(state)
                } else {
                    on_false.act(state)
                }
            }
        }
    }

    fn conditions(&self, out: &mut Vec<Condition>) {
        if let Node::Split {
            cond,
            on_true,
            on_false,
        } = self
        {
            out.push(*cond);
            on_true.conditions(out);
            on_false.conditions(out);
        }
    }

    fn signature(&self) -> Signature {
        let mut table = [Action::SendBest; STATE_COUNT];
        for (i, slot) in table.iter_mut().enumerate() {
            *slot = self.act(ConditionState::from_index(i));
        }
        Signature(table)
    }

    fn canonical(&self, fixed: [Option<bool>; 4]) -> Node {
        match self {
            Node::Leaf(a) => Node::Leaf(*a),
            Node::Split {
                cond,
                on_true,
                on_false,
            } => match fixed[cond.index()] {
                Some(true) => on_true.canonical(fixed),
                Some(false) => on_false.canonical(fixed),
                None => {
                    let mut when_true = fixed;
                    when_true[cond.index()] = Some(true);
                    let mut when_false = fixed;
                    when_false[cond.index()] = Some(false);
                    let t = on_true.canonical(when_true);
                    let f = on_false.canonical(when_false);
                    // Canonical children never test a condition fixed on the
                    // path, so full-table comparison is behavioral identity.
                    if t.signature() == f.signature() {
                        t
                    } else {
                        Node::split(*cond, t, f)
                    }
                }
            },
        }
    }
}

/// A depth-limited decision-tree strategy.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StrategyTree {
    root: Node,
}

impl StrategyTree {
    pub fn new(root: Node) -> Result<Self, StrategyError> {
        let depth = root.depth();
        if depth > MAX_DEPTH {
            return Err(StrategyError::TooDeep(depth));
        }
        Ok(Self { root })
    }

    pub fn leaf(action: Action) -> Self {
        Self {
            root: Node::Leaf(action),
        }
    }

    /// Always reveals the best review.
    pub fn greedy() -> Self {
        Self::leaf(Action::SendBest)
    }

    /// Best review for good hotels, worst review for bad ones.
    pub fn honest() -> Self {
        Self {
            root: Node::split(
                Condition::CurrentHotelGood,
                Node::Leaf(Action::SendBest),
                Node::Leaf(Action::SendWorst),
            ),
        }
    }

    /// Best review after the DM went last round, the mean review otherwise.
    pub fn backward_looking() -> Self {
        Self {
            root: Node::split(
                Condition::PrevWentHotel,
                Node::Leaf(Action::SendBest),
                Node::Leaf(Action::SendMean),
            ),
        }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn act(&self, state: ConditionState) -> Action {
        self.root.act(state)
    }

    pub fn canonical(&self) -> StrategyTree {
        Self {
            root: self.root.canonical([None; 4]),
        }
    }

    pub fn signature(&self) -> Signature {
        self.root.signature()
    }

    pub fn class(&self) -> StrategyClass {
        let mut conds = Vec::new();
        self.root.conditions(&mut conds);
        let quality = conds.iter().any(|c| c.is_quality());
        let history = conds.iter().any(|c| !c.is_quality());
        match (quality, history) {
            (false, false) => StrategyClass::Simple,
            (true, false) => StrategyClass::QualityDependent,
            (false, true) => StrategyClass::HistoryDependent,
            (true, true) => StrategyClass::Complex,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&NodeJson::from(&self.root)).expect("tree serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, StrategyError> {
        let json: NodeJson = serde_json::from_str(text)?;
        Self::new(json.into_node()?)
    }
}

/// Reveals a review according to `strategy` given the current game's history.
pub fn select_review(strategy: &StrategyTree, history: &[RoundRecord], hotel: &Hotel) -> usize {
    strategy
        .act(ConditionState::observe(history, hotel.good()))
        .pick(hotel)
}

pub fn behavioral_signature(strategy: &StrategyTree) -> Signature {
    strategy.signature()
}

pub fn classify_strategy(strategy: &StrategyTree) -> StrategyClass {
    strategy.class()
}

/// Actions of a strategy on all 16 condition states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Signature(pub [Action; STATE_COUNT]);

impl Signature {
    pub fn hamming(&self, other: &Signature) -> usize {
        self.0.iter().zip(other.0.iter()).filter(|(a, b)| a != b).count()
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|a| write!(f, "{}", a.letter()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StrategyClass {
    Simple,
    QualityDependent,
    HistoryDependent,
    Complex,
}

impl StrategyClass {
    pub const ALL: [StrategyClass; 4] = [
        StrategyClass::Simple,
        StrategyClass::QualityDependent,
        StrategyClass::HistoryDependent,
        StrategyClass::Complex,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyClass::Simple => "simple",
            StrategyClass::QualityDependent => "quality",
            StrategyClass::HistoryDependent => "history",
            StrategyClass::Complex => "complex",
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum NodeJson {
    Leaf {
        leaf: String,
    },
    Split {
        cond: String,
        #[serde(rename = "true")]
        on_true: Box<NodeJson>,
        #[serde(rename = "false")]
        on_false: Box<NodeJson>,
    },
}

impl From<&Node> for NodeJson {
    fn from(node: &Node) -> Self {
        match node {
            Node::Leaf(a) => NodeJson::Leaf {
                leaf: a.name().to_string(),
            },
            Node::Split {
                cond,
                on_true,
                on_false,
            } => NodeJson::Split {
                cond: cond.name().to_string(),
                on_true: Box::new(NodeJson::from(on_true.as_ref())),
                on_false: Box::new(NodeJson::from(on_false.as_ref())),
            },
        }
    }
}

impl NodeJson {
    fn into_node(self) -> Result<Node, StrategyError> {
        Ok(match self {
            NodeJson::Leaf { leaf } => Node::Leaf(leaf.parse()?),
            NodeJson::Split {
                cond,
                on_true,
                on_false,
            } => Node::split(cond.parse()?, on_true.into_node()?, on_false.into_node()?),
        })
    }
}

/// Every syntactic tree of depth at most `max_depth`, in generation order
/// (shallower trees first, conditions and actions in declaration order).
fn syntactic_trees(max_depth: usize) -> Vec<Node> {
    let mut out: Vec<Node> = Action::ALL.iter().map(|&a| Node::Leaf(a)).collect();
    if max_depth == 0 {
        return out;
    }
    let children = syntactic_trees(max_depth - 1);
    let mut deeper = Vec::new();
    for &cond in &Condition::ALL {
        for t in &children {
            for f in &children {
                deeper.push(Node::split(cond, t.clone(), f.clone()));
            }
        }
    }
    deeper.sort_by_key(|n| n.depth());
    out.extend(deeper);
    out
}

/// All behaviorally distinct strategies of depth at most `max_depth`, each in
/// canonical form, ordered lexicographically by signature.
pub fn enumerate_strategies_up_to(max_depth: usize) -> Vec<StrategyTree> {
    let max_depth = max_depth.min(MAX_DEPTH);
    let mut by_signature: BTreeMap<Signature, Node> = BTreeMap::new();
    for node in syntactic_trees(max_depth) {
        let canon = node.canonical([None; 4]);
        let sig = canon.signature();
        let better = by_signature
            .get(&sig)
            .is_none_or(|kept| (canon.depth(), canon.size()) < (kept.depth(), kept.size()));
        if better {
            by_signature.insert(sig, canon);
        }
    }
    by_signature
        .into_values()
        .map(|root| StrategyTree { root })
        .collect()
}

pub fn enumerate_strategies() -> Vec<StrategyTree> {
    enumerate_strategies_up_to(MAX_DEPTH)
}

/// The enumerated strategy space with id lookups.
#[derive(Debug, Clone)]
pub struct StrategyCatalog {
    strategies: Vec<StrategyTree>,
    signatures: Vec<Signature>,
    index: HashMap<Signature, StrategyId>,
}

impl StrategyCatalog {
    pub fn full() -> Self {
        Self::from_strategies(enumerate_strategies())
    }

    fn from_strategies(strategies: Vec<StrategyTree>) -> Self {
        let signatures: Vec<Signature> = strategies.iter().map(|s| s.signature()).collect();
        let index = signatures
            .iter()
            .enumerate()
            .map(|(i, s)| (*s, StrategyId(i as u32)))
            .collect();
        Self {
            strategies,
            signatures,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.strategies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strategies.is_empty()
    }

    pub fn get(&self, id: StrategyId) -> Option<&StrategyTree> {
        self.strategies.get(id.0 as usize)
    }

    pub fn signature(&self, id: StrategyId) -> Signature {
        self.signatures[id.0 as usize]
    }

    pub fn id_of(&self, strategy: &StrategyTree) -> Option<StrategyId> {
        self.index.get(&strategy.signature()).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = StrategyId> + '_ {
        (0..self.strategies.len() as u32).map(StrategyId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (StrategyId, &StrategyTree)> {
        self.strategies
            .iter()
            .enumerate()
            .map(|(i, s)| (StrategyId(i as u32), s))
    }
}

/// Two disjoint expert sets used for training (A) and off-policy testing (B).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpertSets {
    pub set_a: Vec<StrategyId>,
    pub set_b: Vec<StrategyId>,
}

/// The built-in expert sets over the full catalog.
pub fn builtin_sets(catalog: &StrategyCatalog) -> ExpertSets {
    select_sets(catalog, BUILTIN_SELECTION_SEED)
}

/// Completes the anchor strategies (greedy and honest in A, backward-looking
/// in B) to six strategies each. Every slot first covers a class the set is
/// still missing, then maximizes the minimum signature distance to the set's
/// members, then the total distance to the other set. Remaining ties follow a
/// seeded shuffle of the catalog.
pub fn select_sets(catalog: &StrategyCatalog, seed: u64) -> ExpertSets {
    let id = |s: StrategyTree| catalog.id_of(&s).expect("anchor strategies are enumerated");
    let mut set_a = vec![id(StrategyTree::greedy()), id(StrategyTree::honest())];
    let mut set_b = vec![id(StrategyTree::backward_looking())];

    let mut order: Vec<StrategyId> = catalog.ids().collect();
    order.shuffle(&mut rng::stream(seed, &[rng::label::SELECTION]));

    let class_of = |sid: StrategyId| catalog.get(sid).expect("catalog id").class();
    let mut fill_a = true;
    while set_a.len() < SET_SIZE || set_b.len() < SET_SIZE {
        if fill_a && set_a.len() == SET_SIZE || !fill_a && set_b.len() == SET_SIZE {
            fill_a = !fill_a;
            continue;
        }
        let (own, other) = if fill_a {
            (&set_a, &set_b)
        } else {
            (&set_b, &set_a)
        };
        let missing: Vec<StrategyClass> = StrategyClass::ALL
            .into_iter()
            .filter(|c| !own.iter().any(|&s| class_of(s) == *c))
            .collect();
        let pick = order
            .iter()
            .copied()
            .filter(|s| !set_a.contains(s) && !set_b.contains(s))
            .filter(|s| missing.is_empty() || missing.contains(&class_of(*s)))
            .map(|s| {
                let sig = catalog.signature(s);
                let own_min = own
                    .iter()
                    .map(|&o| sig.hamming(&catalog.signature(o)))
                    .min()
                    .unwrap_or(STATE_COUNT);
                let other_sum: usize = other
                    .iter()
                    .map(|&o| sig.hamming(&catalog.signature(o)))
                    .sum();
                (s, (own_min, other_sum))
            })
            // max_by_key keeps the last maximum; reverse so the first in the
            // seeded order wins ties.
            .rev()
            .max_by_key(|&(_, score)| score)
            .map(|(s, _)| s)
            .expect("catalog has enough strategies");
        if fill_a {
            set_a.push(pick);
        } else {
            set_b.push(pick);
        }
        fill_a = !fill_a;
    }
    ExpertSets { set_a, set_b }
}

/// Rank (0 = best .. 6 = worst) of `index` among the hotel's reviews by
/// score, ties resolved by lower index ranking higher.
pub fn review_rank(hotel: &Hotel, index: usize) -> usize {
    let reviews = hotel.reviews();
    let s = reviews[index].score;
    reviews
        .iter()
        .enumerate()
        .filter(|&(j, r)| r.score > s || (r.score == s && j < index))
        .count()
}
