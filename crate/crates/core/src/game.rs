//! Entities and payoff mechanics of the repeated persuasion game.
//!
//! An expert promotes one hotel per round by revealing a single review out of
//! the hotel's seven; the decision-maker (DM) either goes or stays. The DM
//! earns a point whenever the decision matches the hotel's hidden quality.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of rounds in one game.
pub const ROUNDS_PER_GAME: usize = 10;
/// Number of scored reviews attached to every hotel.
pub const REVIEWS_PER_HOTEL: usize = 7;
/// Number of engineered binary review features.
pub const EF_COUNT: usize = 36;
/// Default quality threshold on the mean review score.
pub const GOOD_THRESHOLD: f64 = 8.0;
pub const MIN_SCORE: f64 = 1.0;
pub const MAX_SCORE: f64 = 10.0;
/// Default per-expert payoff needed to defeat a built-in strategy.
pub const DEFAULT_TARGET_PAYOFF: u8 = 9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("expected {REVIEWS_PER_HOTEL} review scores, got {0}")]
    WrongReviewCount(usize),
    #[error("review score {0} outside [1, 10]")]
    ScoreOutOfRange(f64),
    #[error("target payoff {0} outside 8..=10")]
    TargetOutOfRange(u8),
    #[error("game must have {ROUNDS_PER_GAME} rounds with indices 1..=10 in order")]
    MalformedGame,
}

macro_rules! id_type {
    ($(#[$m:meta])* $name:ident) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt(f)
            }
        }
    };
}

id_type!(HotelId);
id_type!(ReviewId);
id_type!(DmId);
id_type!(
    /// Position of a strategy in the canonical enumeration order.
    StrategyId
);

/// The 36 engineered review features packed into the low bits of a `u64`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EfBits(u64);

impl EfBits {
    const MASK: u64 = (1 << EF_COUNT) - 1;

    pub fn from_bits(bits: u64) -> Self {
        Self(bits & Self::MASK)
    }

    pub fn from_slice(values: &[bool]) -> Self {
        let bits = values
            .iter()
            .take(EF_COUNT)
            .enumerate()
            .fold(0u64, |acc, (i, &b)| acc | (u64::from(b) << i));
        Self(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn get(self, index: usize) -> bool {
        index < EF_COUNT && (self.0 >> index) & 1 == 1
    }

    pub fn set(&mut self, index: usize, value: bool) {
        assert!(index < EF_COUNT);
        if value {
            self.0 |= 1 << index;
        } else {
            self.0 &= !(1 << index);
        }
    }

    pub fn iter(self) -> impl Iterator<Item = bool> {
        (0..EF_COUNT).map(move |i| self.get(i))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Review {
    pub id: ReviewId,
    pub score: f64,
    pub ef: EfBits,
}

impl Review {
    pub fn new(id: ReviewId, score: f64, ef: EfBits) -> Result<Self, GameError> {
        check_score(score)?;
        Ok(Self { id, score, ef })
    }
}

fn check_score(score: f64) -> Result<(), GameError> {
    if (MIN_SCORE..=MAX_SCORE).contains(&score) {
        Ok(())
    } else {
        Err(GameError::ScoreOutOfRange(score))
    }
}

fn mean(scores: &[f64]) -> f64 {
    scores.iter().sum::<f64>() / scores.len() as f64
}

/// Returns whether a hotel with these review scores is good, i.e. whether
/// the mean score reaches [`GOOD_THRESHOLD`].
pub fn hotel_quality(scores: &[f64]) -> Result<bool, GameError> {
    hotel_quality_at(scores, GOOD_THRESHOLD)
}

/// [`hotel_quality`] with an explicit threshold, for non-default rule sets.
pub fn hotel_quality_at(scores: &[f64], threshold: f64) -> Result<bool, GameError> {
    if scores.len() != REVIEWS_PER_HOTEL {
        return Err(GameError::WrongReviewCount(scores.len()));
    }
    for &s in scores {
        check_score(s)?;
    }
    Ok(mean(scores) >= threshold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hotel {
    pub id: HotelId,
    reviews: [Review; REVIEWS_PER_HOTEL],
    mean_score: f64,
    good: bool,
}

impl Hotel {
    pub fn new(id: HotelId, reviews: Vec<Review>) -> Result<Self, GameError> {
        let n = reviews.len();
        let reviews: [Review; REVIEWS_PER_HOTEL] = reviews
            .try_into()
            .map_err(|_| GameError::WrongReviewCount(n))?;
        let scores: Vec<f64> = reviews.iter().map(|r| r.score).collect();
        let good = hotel_quality(&scores)?;
        Ok(Self {
            id,
            reviews,
            mean_score: mean(&scores),
            good,
        })
    }

    pub fn reviews(&self) -> &[Review; REVIEWS_PER_HOTEL] {
        &self.reviews
    }

    pub fn mean_score(&self) -> f64 {
        self.mean_score
    }

    pub fn good(&self) -> bool {
        self.good
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Go,
    Stay,
}

impl Decision {
    pub fn from_go(go: bool) -> Self {
        if go {
            Decision::Go
        } else {
            Decision::Stay
        }
    }

    pub fn is_go(self) -> bool {
        self == Decision::Go
    }

    pub fn flipped(self) -> Self {
        Self::from_go(!self.is_go())
    }
}

/// One point when going to a good hotel or staying away from a bad one.
pub fn round_payoff(decision: Decision, good: bool) -> u8 {
    u8::from(decision.is_go() == good)
}

/// Whether `total_payoff` defeats an expert whose target is `target`.
pub fn defeated(total_payoff: u8, target: u8) -> Result<bool, GameError> {
    if !(8..=10).contains(&target) {
        return Err(GameError::TargetOutOfRange(target));
    }
    Ok(total_payoff >= target)
}

/// Who produced a record. Human rows carry a measured reaction time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Sim,
    Human,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based round number within its game.
    pub round_index: u8,
    pub hotel_id: HotelId,
    pub shown_review_id: ReviewId,
    pub decision: Decision,
    pub hotel_good: bool,
    pub dm_payoff: u8,
    /// Reaction-time bin 0..=8; always 0 for simulated DMs.
    pub reaction_bin: u8,
}

impl RoundRecord {
    pub fn new(
        round_index: u8,
        hotel_id: HotelId,
        shown_review_id: ReviewId,
        decision: Decision,
        hotel_good: bool,
        reaction_bin: u8,
    ) -> Self {
        Self {
            round_index,
            hotel_id,
            shown_review_id,
            decision,
            hotel_good,
            dm_payoff: round_payoff(decision, hotel_good),
            reaction_bin,
        }
    }

    pub fn correct(&self) -> bool {
        self.dm_payoff == 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameRecord {
    pub dm_id: DmId,
    pub strategy_id: StrategyId,
    /// 1-based ordinal of the game within its DM-expert episode.
    pub game_index: u32,
    pub source: Source,
    pub rounds: Vec<RoundRecord>,
    pub total_payoff: u8,
}

impl GameRecord {
    pub fn new(
        dm_id: DmId,
        strategy_id: StrategyId,
        game_index: u32,
        source: Source,
        rounds: Vec<RoundRecord>,
    ) -> Result<Self, GameError> {
        let well_formed = rounds.len() == ROUNDS_PER_GAME
            && rounds
                .iter()
                .enumerate()
                .all(|(i, r)| usize::from(r.round_index) == i + 1);
        if !well_formed {
            return Err(GameError::MalformedGame);
        }
        let total_payoff = rounds.iter().map(|r| r.dm_payoff).sum();
        Ok(Self {
            dm_id,
            strategy_id,
            game_index,
            source,
            rounds,
            total_payoff,
        })
    }
}

/// Points the expert earns: one per round in which the DM went to the hotel.
pub fn expert_reward(rounds: &[RoundRecord]) -> u32 {
    rounds.iter().filter(|r| r.decision.is_go()).count() as u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn round(i: u8, d: Decision, good: bool) -> RoundRecord {
        RoundRecord::new(i, HotelId(0), ReviewId(0), d, good, 0)
    }

    #[test]
    fn hotel_quality_examples() {
        assert_eq!(hotel_quality(&[8.0; 7]), Ok(true));
        assert_eq!(hotel_quality(&[10.0; 7]), Ok(true));
        assert_eq!(hotel_quality(&[7.9; 7]), Ok(false));
    }

    #[test]
    fn hotel_quality_rejects_bad_input() {
        assert_eq!(
            hotel_quality(&[8.0; 6]),
            Err(GameError::WrongReviewCount(6))
        );
        let mut s = [8.0; 7];
        s[3] = 11.0;
        assert_eq!(hotel_quality(&s), Err(GameError::ScoreOutOfRange(11.0)));
        s[3] = 0.5;
        assert!(hotel_quality(&s).is_err());
    }

    #[test]
    fn payoff_examples() {
        assert_eq!(round_payoff(Decision::Go, true), 1);
        assert_eq!(round_payoff(Decision::Stay, false), 1);
        assert_eq!(round_payoff(Decision::Go, false), 0);
        assert_eq!(round_payoff(Decision::Stay, true), 0);
    }

    #[test]
    fn exactly_one_decision_is_correct() {
        for d in [Decision::Go, Decision::Stay] {
            for good in [true, false] {
                assert_eq!(round_payoff(d, good) + round_payoff(d.flipped(), good), 1);
            }
        }
    }

    #[test]
    fn expert_reward_counts_go() {
        let all = |d| (1..=10).map(|i| round(i, d, true)).collect::<Vec<_>>();
        assert_eq!(expert_reward(&all(Decision::Stay)), 0);
        assert_eq!(expert_reward(&all(Decision::Go)), 10);
        let alt: Vec<_> = (1..=10)
            .map(|i| round(i, Decision::from_go(i % 2 == 1), false))
            .collect();
        assert_eq!(expert_reward(&alt), 5);
    }

    #[test]
    fn defeated_examples() {
        assert_eq!(defeated(9, 9), Ok(true));
        assert_eq!(defeated(8, 9), Ok(false));
        assert_eq!(defeated(10, 10), Ok(true));
        assert_eq!(defeated(10, 7), Err(GameError::TargetOutOfRange(7)));
        assert_eq!(defeated(10, 11), Err(GameError::TargetOutOfRange(11)));
    }

    #[test]
    fn total_payoff_is_hamming_agreement_exhaustively() {
        for decisions in 0u32..1024 {
            for quality in 0u32..1024 {
                let rounds: Vec<_> = (0..10)
                    .map(|i| {
                        let go = (decisions >> i) & 1 == 1;
                        let good = (quality >> i) & 1 == 1;
                        round(i as u8 + 1, Decision::from_go(go), good)
                    })
                    .collect();
                let g = GameRecord::new(DmId(0), StrategyId(0), 1, Source::Sim, rounds).unwrap();
                let agreement = 10 - (decisions ^ quality).count_ones();
                assert_eq!(u32::from(g.total_payoff), agreement);
            }
        }
    }

    #[test]
    fn malformed_game_rejected() {
        let rounds: Vec<_> = (1..=9).map(|i| round(i, Decision::Go, true)).collect();
        assert!(GameRecord::new(DmId(0), StrategyId(0), 1, Source::Sim, rounds).is_err());
        let mut rounds: Vec<_> = (1..=10).map(|i| round(i, Decision::Go, true)).collect();
        rounds.swap(2, 3);
        assert!(GameRecord::new(DmId(0), StrategyId(0), 1, Source::Sim, rounds).is_err());
    }

    #[test]
    fn ef_bits_roundtrip() {
        let mut ef = EfBits::default();
        ef.set(0, true);
        ef.set(35, true);
        assert!(ef.get(0) && ef.get(35) && !ef.get(17));
        assert_eq!(ef.iter().filter(|&b| b).count(), 2);
        assert_eq!(EfBits::from_slice(&ef.iter().collect::<Vec<_>>()), ef);
        assert!(!EfBits::from_bits(u64::MAX).get(36));
    }

    proptest! {
        #[test]
        fn quality_is_monotone(
            scores in proptest::collection::vec(1.0f64..=10.0, 7),
            which in 0usize..7,
            bump in 0.0f64..9.0,
        ) {
            let before = hotel_quality(&scores).unwrap();
            let mut raised = scores.clone();
            raised[which] = (raised[which] + bump).min(10.0);
            let after = hotel_quality(&raised).unwrap();
            prop_assert!(!before || after);
        }
    }
}
