//! Per-round feature vectors.
//!
//! Layout (53 columns):
//!
//! | columns | meaning |
//! |---------|---------|
//! | 0..36   | review EF bits: 9 positive topics, 8 positive-part properties, 8 negative topics, 8 negative-part properties, 3 length-ratio bins |
//! | 36, 37  | previous decision one-hot (go, not go) |
//! | 38, 39  | previous hotel quality one-hot (good, not good) |
//! | 40      | points earned so far in the episode |
//! | 41      | rounds played so far in the episode |
//! | 42, 43  | points bigger than rounds played? (bigger, not bigger) |
//! | 44..53  | reaction-time bin one-hot, all zero for simulated DMs |
//!
//! History is episode-scoped: it starts empty against each new expert and
//! accumulates across that expert's games. Counts are raw.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::{Corpus, REACTION_BINS};
use crate::game::{DmId, GameRecord, ReviewId, RoundRecord, Source, StrategyId, EF_COUNT};
use crate::interactions::InteractionLog;

pub const FEATURE_COUNT: usize = 53;
pub const PREV_GO: usize = 36;
pub const PREV_GOOD: usize = 38;
pub const POINTS_SO_FAR: usize = 40;
pub const ROUNDS_SO_FAR: usize = 41;
pub const POINTS_VS_ROUNDS: usize = 42;
pub const REACTION: usize = 44;
/// Columns holding raw counts rather than 0/1 values.
pub const COUNT_FEATURES: [usize; 2] = [POINTS_SO_FAR, ROUNDS_SO_FAR];

pub type RoundFeatures = [f64; FEATURE_COUNT];

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("episode has no games")]
    EmptyEpisode,
    #[error("review {0} is not in the corpus")]
    UnknownReview(ReviewId),
}

pub fn feature_names() -> Vec<String> {
    let mut names: Vec<String> = (0..EF_COUNT).map(|i| format!("ef_{i}")).collect();
    names.extend(
        [
            "prev_go",
            "prev_not_go",
            "prev_good",
            "prev_not_good",
            "points_so_far",
            "rounds_so_far",
            "points_bigger",
            "points_not_bigger",
        ]
        .map(String::from),
    );
    names.extend((0..REACTION_BINS).map(|i| format!("reaction_{i}")));
    names
}

/// Features of one round given the earlier rounds of the same episode.
/// `reaction_bin` is `None` for simulated DMs.
pub fn build_round_features(
    history: &[RoundRecord],
    shown_ef: crate::game::EfBits,
    reaction_bin: Option<u8>,
) -> RoundFeatures {
    let mut x = [0.0; FEATURE_COUNT];
    for (slot, bit) in x[..EF_COUNT].iter_mut().zip(shown_ef.iter()) {
        *slot = f64::from(u8::from(bit));
    }
    if let Some(prev) = history.last() {
        x[PREV_GO + usize::from(!prev.decision.is_go())] = 1.0;
        x[PREV_GOOD + usize::from(!prev.hotel_good)] = 1.0;
    }
    let points: u32 = history.iter().map(|r| u32::from(r.dm_payoff)).sum();
    let rounds = history.len() as u32;
    x[POINTS_SO_FAR] = f64::from(points);
    x[ROUNDS_SO_FAR] = f64::from(rounds);
    x[POINTS_VS_ROUNDS + usize::from(points <= rounds)] = 1.0;
    if let Some(bin) = reaction_bin {
        x[REACTION + usize::from(bin)] = 1.0;
    }
    x
}

/// One DM-expert episode as a row-major feature matrix with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTensor {
    pub dm_id: DmId,
    pub strategy_id: StrategyId,
    pub source: Source,
    /// `len() * FEATURE_COUNT` values.
    pub features: Vec<f64>,
    /// `true` for Go.
    pub labels: Vec<bool>,
    /// `true` at the first round of every game.
    pub game_start: Vec<bool>,
    pub review_ids: Vec<ReviewId>,
    pub reaction_bins: Vec<u8>,
}

impl EpisodeTensor {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.features[t * FEATURE_COUNT..(t + 1) * FEATURE_COUNT]
    }
}

pub fn build_episode_tensor(
    games: &[GameRecord],
    corpus: &Corpus,
) -> Result<EpisodeTensor, FeatureError> {
    let first = games.first().ok_or(FeatureError::EmptyEpisode)?;
    let rounds: Vec<RoundRecord> = games.iter().flat_map(|g| g.rounds.iter().copied()).collect();
    let n = rounds.len();
    let mut features = Vec::with_capacity(n * FEATURE_COUNT);
    let mut game_start = Vec::with_capacity(n);
    for g in games {
        game_start.extend((0..g.rounds.len()).map(|i| i == 0));
    }
    for (t, r) in rounds.iter().enumerate() {
        let review = corpus
            .review(r.shown_review_id)
            .ok_or(FeatureError::UnknownReview(r.shown_review_id))?;
        let reaction = (first.source == Source::Human).then_some(r.reaction_bin);
        features.extend_from_slice(&build_round_features(&rounds[..t], review.ef, reaction));
    }
    Ok(EpisodeTensor {
        dm_id: first.dm_id,
        strategy_id: first.strategy_id,
        source: first.source,
        features,
        labels: rounds.iter().map(|r| r.decision.is_go()).collect(),
        game_start,
        review_ids: rounds.iter().map(|r| r.shown_review_id).collect(),
        reaction_bins: rounds.iter().map(|r| r.reaction_bin).collect(),
    })
}

/// Tensors for every episode of the log, in log order.
pub fn build_dataset(log: &InteractionLog, corpus: &Corpus) -> Result<Vec<EpisodeTensor>, FeatureError> {
    log.episodes()
        .par_iter()
        .map(|ep| build_episode_tensor(ep.games, corpus))
        .collect()
}

/// Writes one row per round: ids, the 53 features and the label.
pub fn write_feature_csv(episodes: &[EpisodeTensor], out: &mut impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["dm_id", "strategy_id", "position", "review_id"]
        .map(String::from)
        .to_vec();
    header.extend(feature_names());
    header.push("label".into());
    w.write_record(&header)?;
    for ep in episodes {
        for t in 0..ep.len() {
            let mut row = vec![
                ep.dm_id.to_string(),
                ep.strategy_id.to_string(),
                (t + 1).to_string(),
                ep.review_ids[t].to_string(),
            ];
            row.extend(ep.row(t).iter().map(|v| v.to_string()));
            row.push(u8::from(ep.labels[t]).to_string());
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn export_feature_csv(episodes: &[EpisodeTensor], path: &Path) -> csv::Result<()> {
    let mut f = std::fs::File::create(path)?;
    write_feature_csv(episodes, &mut f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_corpus, reaction_bin};
    use crate::game::{Decision, EfBits, HotelId};

    fn round(i: u8, d: Decision, good: bool) -> RoundRecord {
        RoundRecord::new(i, HotelId(0), ReviewId(0), d, good, 0)
    }

    #[test]
    fn first_round_has_empty_history() {
        let x = build_round_features(&[], EfBits::from_bits(0b101), None);
        assert_eq!(&x[..3], &[1.0, 0.0, 1.0]);
        assert_eq!(&x[PREV_GO..PREV_GO + 4], &[0.0; 4]);
        assert_eq!(x[POINTS_SO_FAR], 0.0);
        assert_eq!(x[ROUNDS_SO_FAR], 0.0);
        assert_eq!(&x[REACTION..], &[0.0; 9]);
    }

    #[test]
    fn one_round_history() {
        let x = build_round_features(&[round(1, Decision::Go, true)], EfBits::default(), None);
        assert_eq!(&x[PREV_GO..PREV_GO + 2], &[1.0, 0.0]);
        assert_eq!(&x[PREV_GOOD..PREV_GOOD + 2], &[1.0, 0.0]);
        assert_eq!(x[POINTS_SO_FAR], 1.0);
        assert_eq!(&x[POINTS_VS_ROUNDS..POINTS_VS_ROUNDS + 2], &[0.0, 1.0]);
    }

    #[test]
    fn human_reaction_one_hot() {
        let x = build_round_features(&[], EfBits::default(), Some(reaction_bin(0.7)));
        assert_eq!(x[REACTION + 1], 1.0);
        assert_eq!(x[REACTION..].iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn names_match_layout() {
        let names = feature_names();
        assert_eq!(names.len(), FEATURE_COUNT);
        assert_eq!(names[PREV_GO], "prev_go");
        assert_eq!(names[POINTS_SO_FAR], "points_so_far");
        assert_eq!(names[REACTION], "reaction_0");
    }

    #[test]
    fn episode_tensor_boundaries() {
        let corpus = generate_corpus(1, 30).unwrap();
        let game = |index: u32, offset: usize| {
            let rounds = (0..10)
                .map(|i| {
                    let h = &corpus.hotels()[offset + i];
                    RoundRecord::new(
                        i as u8 + 1,
                        h.id,
                        h.reviews()[0].id,
                        Decision::from_go(i % 3 == 0),
                        h.good(),
                        0,
                    )
                })
                .collect();
            GameRecord::new(DmId(3), StrategyId(4), index, Source::Sim, rounds).unwrap()
        };
        let games = [game(1, 0), game(2, 10), game(3, 20)];
        let ep = build_episode_tensor(&games, &corpus).unwrap();
        assert_eq!(ep.len(), 30);
        let starts: Vec<usize> = (0..30).filter(|&t| ep.game_start[t]).map(|t| t + 1).collect();
        assert_eq!(starts, vec![1, 11, 21]);
        // History carries across the game boundary.
        assert_eq!(ep.row(10)[ROUNDS_SO_FAR], 10.0);
        let pts: u32 = games[0].rounds.iter().map(|r| u32::from(r.dm_payoff)).sum();
        assert_eq!(ep.row(10)[POINTS_SO_FAR], f64::from(pts));
        assert_eq!(build_episode_tensor(&games[..1], &corpus).unwrap().len(), 10);
        assert_eq!(build_episode_tensor(&[], &corpus), Err(FeatureError::EmptyEpisode));
    }

    #[test]
    fn unknown_review_rejected() {
        let corpus = generate_corpus(1, 30).unwrap();
        let rounds = (1..=10)
            .map(|i| RoundRecord::new(i, HotelId(0), ReviewId(99_999), Decision::Go, true, 0))
            .collect();
        let g = GameRecord::new(DmId(0), StrategyId(0), 1, Source::Sim, rounds).unwrap();
        assert_eq!(
            build_episode_tensor(&[g], &corpus),
            Err(FeatureError::UnknownReview(ReviewId(99_999)))
        );
    }
}
