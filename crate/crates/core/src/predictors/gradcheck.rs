//! Central finite-difference verification of analytic gradients.

use rand::Rng;
use rayon::prelude::*;

use crate::features::{
    EpisodeTensor, FEATURE_COUNT, POINTS_SO_FAR, POINTS_VS_ROUNDS, PREV_GO, PREV_GOOD, ROUNDS_SO_FAR,
};
use crate::game::{DmId, ReviewId, Source, StrategyId, EF_COUNT, ROUNDS_PER_GAME};
use crate::rng;

use super::{FeedForward, Lstm, Model, Network, PredictorKind};

pub const FD_STEP: f64 = 1e-5;
/// Denominator floor of the relative error, so that parameters whose true
/// gradient is zero are judged on absolute error instead.
pub const REL_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    pub max_rel_error: f64,
    pub worst_param: usize,
    pub checked: usize,
    /// Parameters skipped because the ±step probe crossed a ReLU kink, where
    /// the loss is not differentiable and the difference quotient means
    /// nothing.
    pub skipped: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares the analytic gradient of the summed episode loss against central
/// differences for every parameter.
pub fn check_gradient<N: Network>(net: &N, episode: &EpisodeTensor) -> GradientCheck {
    let n = net.params().len();
    let mut analytic = vec![0.0; n];
    net.accumulate_gradient(episode, &mut analytic);
    let results: Vec<Option<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut probe = net.clone();
            let base = probe.params()[i];
            probe.params_mut()[i] = base + FD_STEP;
            let plus = probe.episode_loss(episode);
            let plus_kinks = probe.kink_pattern(episode);
            probe.params_mut()[i] = base - FD_STEP;
            let minus = probe.episode_loss(episode);
            if plus_kinks != probe.kink_pattern(episode) {
                return None;
            }
            Some(relative_error(analytic[i], (plus - minus) / (2.0 * FD_STEP)))
        })
        .collect();
    let mut report = GradientCheck {
        max_rel_error: 0.0,
        worst_param: 0,
        checked: 0,
        skipped: 0,
    };
    for (i, r) in results.into_iter().enumerate() {
        match r {
            None => report.skipped += 1,
            Some(e) => {
                report.checked += 1;
                if e > report.max_rel_error {
                    report.max_rel_error = e;
                    report.worst_param = i;
                }
            }
        }
    }
    report
}

/// Shape of one randomized gradient check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CaseShape {
    pub hidden: usize,
    pub layers: usize,
    pub games: usize,
}

/// A random episode of `games` full games with plausible feature rows:
/// random EF bits and decisions, consistent one-hots and counts.
pub fn random_episode<R: Rng + ?Sized>(rng: &mut R, games: usize) -> EpisodeTensor {
    let rounds = games * ROUNDS_PER_GAME;
    let mut features = vec![0.0; rounds * FEATURE_COUNT];
    let mut labels = Vec::with_capacity(rounds);
    let (mut points, mut prev): (u32, Option<(bool, bool)>) = (0, None);
    for t in 0..rounds {
        let row = &mut features[t * FEATURE_COUNT..(t + 1) * FEATURE_COUNT];
        for v in &mut row[..EF_COUNT] {
            *v = f64::from(u8::from(rng.random_bool(0.5)));
        }
        if let Some((go, good)) = prev {
            row[PREV_GO + usize::from(!go)] = 1.0;
            row[PREV_GOOD + usize::from(!good)] = 1.0;
        }
        row[POINTS_SO_FAR] = f64::from(points);
        row[ROUNDS_SO_FAR] = t as f64;
        row[POINTS_VS_ROUNDS + usize::from(points as usize <= t)] = 1.0;
        let (go, good) = (rng.random_bool(0.5), rng.random_bool(0.5));
        points += u32::from(go == good);
        prev = Some((go, good));
        labels.push(go);
    }
    EpisodeTensor {
        dm_id: DmId(0),
        strategy_id: StrategyId(0),
        source: Source::Sim,
        features,
        labels,
        game_start: (0..rounds).map(|t| t % ROUNDS_PER_GAME == 0).collect(),
        review_ids: vec![ReviewId(0); rounds],
        reaction_bins: vec![0; rounds],
    }
}

/// Draws a shape (hidden 1..=8, 1 or 2 layers, 1..=3 games), a network with
/// every parameter uniform in `±0.5` (the learned initial cells included) and
/// an episode, then checks the gradient.
pub fn check_random_case(kind: PredictorKind, seed: u64) -> (CaseShape, GradientCheck) {
    let (shape, model, episode) = random_case(kind, seed);
    let check = match &model {
        Model::Lstm(m) => check_gradient(m, &episode),
        Model::FeedForward(m) => check_gradient(m, &episode),
        Model::Majority(_) => unreachable!("random_case builds networks only"),
    };
    (shape, check)
}

/// The network and episode behind [`check_random_case`].
///
/// # Panics
/// For [`PredictorKind::Majority`], which has no gradient.
pub fn random_case(kind: PredictorKind, seed: u64) -> (CaseShape, Model, EpisodeTensor) {
    assert!(kind != PredictorKind::Majority, "the majority model has no gradient");
    let mut r = rng::stream(seed, &[rng::label::INIT, kind as u64]);
    let shape = CaseShape {
        hidden: r.random_range(1..=8),
        layers: r.random_range(1..=2),
        games: r.random_range(1..=3),
    };
    let episode = random_episode(&mut r, shape.games);
    let model = match kind {
        PredictorKind::Lstm => {
            let mut m = Lstm::zeros(FEATURE_COUNT, shape.hidden, shape.layers);
            for p in &mut m.params {
                *p = r.random_range(-0.5..0.5);
            }
            Model::Lstm(m)
        }
        _ => {
            let mut m = FeedForward::zeros(FEATURE_COUNT, shape.hidden, shape.layers);
            for p in &mut m.params {
                *p = r.random_range(-0.5..0.5);
            }
            Model::FeedForward(m)
        }
    };
    (shape, model, episode)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(2.0, 1.0), 0.5);
        assert_eq!(relative_error(0.0, 1e-9), 1e-9 / REL_FLOOR);
    }
}
