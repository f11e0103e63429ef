//! The interaction log shared by simulation, ingestion, training and evaluation.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::game::{DmId, GameRecord, Source, StrategyId};

/// Games grouped into DM-expert episodes. Episode order and game order within
/// an episode are preserved exactly as produced or ingested.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InteractionLog {
    pub games: Vec<GameRecord>,
}

/// All consecutive games of one DM against one expert.
#[derive(Debug, Clone, Copy)]
pub struct Episode<'a> {
    pub dm_id: DmId,
    pub strategy_id: StrategyId,
    pub games: &'a [GameRecord],
}

impl Episode<'_> {
    pub fn source(&self) -> Source {
        self.games[0].source
    }

    pub fn round_count(&self) -> usize {
        self.games.iter().map(|g| g.rounds.len()).sum()
    }
}

impl InteractionLog {
    pub fn new(games: Vec<GameRecord>) -> Self {
        Self { games }
    }

    pub fn is_empty(&self) -> bool {
        self.games.is_empty()
    }

    pub fn episodes(&self) -> Vec<Episode<'_>> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.games.len() {
            let boundary = i == self.games.len()
                || (self.games[i].dm_id, self.games[i].strategy_id)
                    != (self.games[start].dm_id, self.games[start].strategy_id);
            if boundary {
                out.push(Episode {
                    dm_id: self.games[start].dm_id,
                    strategy_id: self.games[start].strategy_id,
                    games: &self.games[start..i],
                });
                start = i;
            }
        }
        out
    }

    pub fn dm_ids(&self) -> BTreeSet<DmId> {
        self.games.iter().map(|g| g.dm_id).collect()
    }

    pub fn strategy_ids(&self) -> BTreeSet<StrategyId> {
        self.games.iter().map(|g| g.strategy_id).collect()
    }

    pub fn round_count(&self) -> usize {
        self.games.iter().map(|g| g.rounds.len()).sum()
    }

    /// Games of the given DMs, in log order.
    pub fn filter_dms(&self, keep: impl Fn(DmId) -> bool) -> InteractionLog {
        InteractionLog::new(
            self.games
                .iter()
                .filter(|g| keep(g.dm_id))
                .cloned()
                .collect(),
        )
    }

    pub fn extend(&mut self, other: InteractionLog) {
        self.games.extend(other.games);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{Decision, HotelId, ReviewId, RoundRecord};

    fn game(dm: u32, strategy: u32, index: u32) -> GameRecord {
        let rounds = (1..=10)
            .map(|i| RoundRecord::new(i, HotelId(0), ReviewId(0), Decision::Go, true, 0))
            .collect();
        GameRecord::new(DmId(dm), StrategyId(strategy), index, Source::Sim, rounds).unwrap()
    }

    #[test]
    fn episodes_group_consecutive_games() {
        let log = InteractionLog::new(vec![
            game(0, 5, 1),
            game(0, 5, 2),
            game(0, 7, 1),
            game(1, 5, 1),
        ]);
        let eps = log.episodes();
        assert_eq!(eps.len(), 3);
        assert_eq!(eps[0].games.len(), 2);
        assert_eq!(eps[1].strategy_id, StrategyId(7));
        assert_eq!(eps[2].dm_id, DmId(1));
        assert_eq!(log.round_count(), 40);
        assert!(InteractionLog::default().episodes().is_empty());
    }
}
