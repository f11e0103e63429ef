//! Per-review Go-rate baseline.

use std::collections::BTreeMap;

use crate::features::EpisodeTensor;
use crate::game::{ReviewId, Source};

use super::{Predictor, PredictorError};

/// Human rows count only if the DM took at least this long to decide
/// (reaction bin 4 starts at 3 s).
pub const MIN_HUMAN_REACTION_BIN: u8 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct MajorityModel {
    /// `(go count, total count)` per shown review.
    pub counts: BTreeMap<ReviewId, (u64, u64)>,
    pub global_rate: f64,
}

impl MajorityModel {
    pub fn train(episodes: &[EpisodeTensor]) -> Result<Self, PredictorError> {
        let mut counts: BTreeMap<ReviewId, (u64, u64)> = BTreeMap::new();
        let (mut go, mut total) = (0u64, 0u64);
        for ep in episodes {
            for t in 0..ep.len() {
                if ep.source == Source::Human && ep.reaction_bins[t] < MIN_HUMAN_REACTION_BIN {
                    continue;
                }
                let label = u64::from(ep.labels[t]);
                let e = counts.entry(ep.review_ids[t]).or_default();
                e.0 += label;
                e.1 += 1;
                go += label;
                total += 1;
            }
        }
        if total == 0 {
            return Err(PredictorError::EmptyTrainingSet);
        }
        Ok(Self {
            counts,
            global_rate: go as f64 / total as f64,
        })
    }

    /// Go-rate of the review, or the global rate for unseen reviews.
    pub fn predict(&self, review: ReviewId) -> f64 {
        self.counts
            .get(&review)
            .map_or(self.global_rate, |&(go, n)| go as f64 / n as f64)
    }
}

impl Predictor for MajorityModel {
    fn predict_episode(&self, episode: &EpisodeTensor) -> Vec<f64> {
        episode.review_ids.iter().map(|&r| self.predict(r)).collect()
    }
}
