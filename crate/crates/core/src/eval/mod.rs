//! Evaluation: the accuracy metric, hard/easy analysis, bootstrap intervals,
//! off-policy reports, leave-one-out, human-simulation comparison and the
//! improvement-over-time analysis.

pub mod experiment;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::features::EpisodeTensor;
use crate::game::{DmId, ReviewId, StrategyId};
use crate::interactions::InteractionLog;
use crate::predictors::{self, Predictor, PredictorConfig, PredictorError};
use crate::rng;
use crate::sim::EpisodeRules;

pub use experiment::*;

/// Probabilities at or above this are read as Go.
pub const DECISION_THRESHOLD: f64 = 0.5;
/// Confidence band treated as hard for single (non-ensemble) models.
pub const HARD_BAND: (f64, f64) = (0.40, 0.60);
pub const DEFAULT_RESAMPLES: usize = 10_000;
pub const DEFAULT_MIN_COUNT: usize = 5;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no (DM, strategy) groups to score")]
    NoGroups,
    #[error("predictions do not match the test set: {0}")]
    Shape(String),
    #[error("train and test strategy sets overlap: {0:?}")]
    StrategyOverlap(Vec<u32>),
    #[error("train and test DM sets overlap: {0:?}")]
    DmOverlap(Vec<u32>),
    #[error("need at least {need} values, got {have}")]
    TooFew { have: usize, need: usize },
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("undefined correlation: {0}")]
    Undefined(String),
    #[error(transparent)]
    Predictor(#[from] PredictorError),
    #[error(transparent)]
    Trainer(#[from] crate::trainer::TrainerError),
    #[error(transparent)]
    Sim(#[from] crate::sim::SimError),
    #[error(transparent)]
    Features(#[from] crate::features::FeatureError),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
}

pub fn predicts_go(p: f64) -> bool {
    p >= DECISION_THRESHOLD
}

fn check_shape(preds: &[Vec<f64>], episodes: &[EpisodeTensor]) -> Result<(), EvalError> {
    if preds.len() != episodes.len() {
        return Err(EvalError::Shape(format!("{} prediction rows for {} episodes", preds.len(), episodes.len())));
    }
    for (i, (p, e)) in preds.iter().zip(episodes).enumerate() {
        if p.len() != e.len() {
            return Err(EvalError::Shape(format!("episode {i}: {} predictions for {} rounds", p.len(), e.len())));
        }
    }
    Ok(())
}

/// Mean over (DM, strategy) groups of each group's accuracy, counting only
/// rounds where `mask` (if given) is true. Groups left without rounds are
/// dropped; `None` when nothing is left.
pub fn masked_accuracy(preds: &[Vec<f64>], episodes: &[EpisodeTensor], mask: Option<&[Vec<bool>]>) -> Option<f64> {
    let mut groups: BTreeMap<(DmId, StrategyId), (usize, usize)> = BTreeMap::new();
    for (i, (p, e)) in preds.iter().zip(episodes).enumerate() {
        for t in 0..e.len() {
            if mask.is_some_and(|m| !m[i][t]) {
                continue;
            }
            let g = groups.entry((e.dm_id, e.strategy_id)).or_default();
            g.0 += usize::from(predicts_go(p[t]) == e.labels[t]);
            g.1 += 1;
        }
    }
    if groups.is_empty() {
        return None;
    }
    let sum: f64 = groups.values().map(|&(c, n)| c as f64 / n as f64).sum();
    Some(sum / groups.len() as f64)
}

/// Unweighted mean over (DM, strategy) groups of per-group accuracy.
pub fn accuracy(preds: &[Vec<f64>], episodes: &[EpisodeTensor]) -> Result<f64, EvalError> {
    check_shape(preds, episodes)?;
    masked_accuracy(preds, episodes, None).ok_or(EvalError::NoGroups)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HardRule {
    /// Hard iff the members' thresholded decisions are not unanimous.
    Disagreement,
    /// Hard iff the single model's probability lies in [`HARD_BAND`].
    ConfidenceBand,
}

impl HardRule {
    pub fn for_members(n: usize) -> Self {
        if n > 1 {
            HardRule::Disagreement
        } else {
            HardRule::ConfidenceBand
        }
    }
}

/// Hard flags per episode and round from member predictions
/// `[member][episode][round]`.
pub fn hard_easy_partition(member_preds: &[Vec<Vec<f64>>], rule: HardRule) -> Vec<Vec<bool>> {
    let first = &member_preds[0];
    first
        .iter()
        .enumerate()
        .map(|(e, rounds)| {
            (0..rounds.len())
                .map(|t| match rule {
                    HardRule::Disagreement => {
                        let go = predicts_go(member_preds[0][e][t]);
                        member_preds.iter().any(|m| predicts_go(m[e][t]) != go)
                    }
                    HardRule::ConfidenceBand => {
                        let p = member_preds[0][e][t];
                        (HARD_BAND.0..=HARD_BAND.1).contains(&p)
                    }
                })
                .collect()
        })
        .collect()
}

/// Linear-interpolation percentile of sorted data (type 7).
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// 95% percentile bootstrap interval of the mean. When every one of the
/// `n^n` resamples fits within `n_resamples` they are enumerated exactly;
/// otherwise `n_resamples` are drawn from the seeded bootstrap stream.
pub fn bootstrap_ci(values: &[f64], n_resamples: usize, seed: u64) -> Result<(f64, f64), EvalError> {
    let n = values.len();
    if n == 0 || n_resamples == 0 {
        return Err(EvalError::TooFew { have: n, need: 1 });
    }
    let exhaustive = (n as f64).powi(n as i32) <= n_resamples as f64;
    let mut means = Vec::new();
    if exhaustive {
        let total = n.pow(n as u32);
        means.reserve(total);
        let mut idx = vec![0usize; n];
        for _ in 0..total {
            means.push(idx.iter().map(|&i| values[i]).sum::<f64>() / n as f64);
            for d in idx.iter_mut() {
                *d += 1;
                if *d < n {
                    break;
                }
                *d = 0;
            }
        }
    } else {
        let mut r = rng::stream(seed, &[rng::label::BOOTSTRAP]);
        means.reserve(n_resamples);
        for _ in 0..n_resamples {
            let s: f64 = (0..n).map(|_| values[r.random_range(0..n)]).sum();
            means.push(s / n as f64);
        }
    }
    means.sort_by(f64::total_cmp);
    Ok((percentile_sorted(&means, 0.025), percentile_sorted(&means, 0.975)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracySummary {
    /// Mean of the member accuracies.
    pub accuracy: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub rounds: usize,
    pub member_accuracies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyAccuracy {
    pub strategy_id: u32,
    #[serde(flatten)]
    pub summary: AccuracySummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config_hash: String,
    pub model_seeds: Vec<u64>,
    pub bootstrap_seed: u64,
    pub n_resamples: usize,
    pub test_rounds: usize,
    pub test_groups: usize,
    pub hard_rule: HardRule,
    pub overall: AccuracySummary,
    pub hard: Option<AccuracySummary>,
    pub easy: Option<AccuracySummary>,
    pub per_strategy: Vec<StrategyAccuracy>,
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub n_resamples: usize,
    pub bootstrap_seed: u64,
    pub config_hash: String,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            n_resamples: DEFAULT_RESAMPLES,
            bootstrap_seed: 0,
            config_hash: String::new(),
        }
    }
}

fn summarize(
    member_preds: &[Vec<Vec<f64>>],
    episodes: &[EpisodeTensor],
    mask: Option<&[Vec<bool>]>,
    opts: &EvalOptions,
    stream: u64,
) -> Result<Option<AccuracySummary>, EvalError> {
    let accs: Option<Vec<f64>> = member_preds
        .iter()
        .map(|p| masked_accuracy(p, episodes, mask))
        .collect();
    let Some(accs) = accs else {
        return Ok(None);
    };
    let rounds = match mask {
        Some(m) => m.iter().flatten().filter(|&&b| b).count(),
        None => episodes.iter().map(|e| e.len()).sum(),
    };
    let (ci_lo, ci_hi) = bootstrap_ci(&accs, opts.n_resamples, rng::derive_seed(opts.bootstrap_seed, &[stream]))?;
    Ok(Some(AccuracySummary {
        accuracy: accs.iter().sum::<f64>() / accs.len() as f64,
        ci_lo,
        ci_hi,
        rounds,
        member_accuracies: accs,
    }))
}

/// Builds the report from member predictions `[member][episode][round]`.
pub fn report_from_predictions(
    member_preds: &[Vec<Vec<f64>>],
    model_seeds: Vec<u64>,
    test: &[EpisodeTensor],
    opts: &EvalOptions,
) -> Result<EvalReport, EvalError> {
    if member_preds.is_empty() {
        return Err(EvalError::TooFew { have: 0, need: 1 });
    }
    for p in member_preds {
        check_shape(p, test)?;
    }
    let rule = HardRule::for_members(member_preds.len());
    let hard = hard_easy_partition(member_preds, rule);
    let easy: Vec<Vec<bool>> = hard.iter().map(|r| r.iter().map(|h| !h).collect()).collect();
    let overall = summarize(member_preds, test, None, opts, 0)?.ok_or(EvalError::NoGroups)?;

    let strategies: BTreeSet<StrategyId> = test.iter().map(|e| e.strategy_id).collect();
    let mut per_strategy = Vec::new();
    for sid in strategies {
        let mask: Vec<Vec<bool>> = test.iter().map(|e| vec![e.strategy_id == sid; e.len()]).collect();
        if let Some(summary) = summarize(member_preds, test, Some(&mask), opts, 3 + u64::from(sid.0))? {
            per_strategy.push(StrategyAccuracy {
                strategy_id: sid.0,
                summary,
            });
        }
    }
    let groups: BTreeSet<(DmId, StrategyId)> = test.iter().map(|e| (e.dm_id, e.strategy_id)).collect();
    Ok(EvalReport {
        config_hash: opts.config_hash.clone(),
        model_seeds,
        bootstrap_seed: opts.bootstrap_seed,
        n_resamples: opts.n_resamples,
        test_rounds: test.iter().map(|e| e.len()).sum(),
        test_groups: groups.len(),
        hard_rule: rule,
        hard: summarize(member_preds, test, Some(&hard), opts, 1)?,
        easy: summarize(member_preds, test, Some(&easy), opts, 2)?,
        overall,
        per_strategy,
    })
}

/// Rejects test data that shares strategies or DMs with the training data.
pub fn check_disjoint(train: &[EpisodeTensor], test: &[EpisodeTensor]) -> Result<(), EvalError> {
    let ids = |es: &[EpisodeTensor]| -> (BTreeSet<u32>, BTreeSet<u32>) {
        (
            es.iter().map(|e| e.strategy_id.0).collect(),
            es.iter().map(|e| e.dm_id.0).collect(),
        )
    };
    let (train_s, train_d) = ids(train);
    let (test_s, test_d) = ids(test);
    let s: Vec<u32> = train_s.intersection(&test_s).copied().collect();
    if !s.is_empty() {
        return Err(EvalError::StrategyOverlap(s));
    }
    let d: Vec<u32> = train_d.intersection(&test_d).copied().collect();
    if !d.is_empty() {
        return Err(EvalError::DmOverlap(d));
    }
    Ok(())
}

/// Off-policy evaluation of trained members on a test set whose strategies
/// and DMs are disjoint from the training data.
pub fn ope_evaluate<P: Predictor>(
    members: &[P],
    model_seeds: Vec<u64>,
    train: &[EpisodeTensor],
    test: &[EpisodeTensor],
    opts: &EvalOptions,
) -> Result<EvalReport, EvalError> {
    check_disjoint(train, test)?;
    let preds: Vec<Vec<Vec<f64>>> = members
        .par_iter()
        .map(|m| test.iter().map(|e| m.predict_episode(e)).collect())
        .collect();
    report_from_predictions(&preds, model_seeds, test, opts)
}

pub fn write_report_json(report: &EvalReport, out: &mut impl Write) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut *out, report).map_err(std::io::Error::other)?;
    writeln!(out)
}

pub fn write_per_strategy_csv(report: &EvalReport, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "# config_hash={}", report.config_hash)?;
    writeln!(out, "strategy_id,rounds,accuracy,ci_lo,ci_hi")?;
    for s in &report.per_strategy {
        let a = &s.summary;
        writeln!(out, "{},{},{},{},{}", s.strategy_id, a.rounds, a.accuracy, a.ci_lo, a.ci_hi)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooReport {
    pub accuracy: f64,
    pub per_dm: Vec<(u32, f64)>,
}

/// On-policy leave-one-DM-out: each DM is predicted by a model trained on all
/// other DMs, then all held-out predictions are scored together.
pub fn loo_on_policy(config: &PredictorConfig, episodes: &[EpisodeTensor]) -> Result<LooReport, EvalError> {
    let dms: Vec<DmId> = episodes.iter().map(|e| e.dm_id).collect::<BTreeSet<_>>().into_iter().collect();
    if dms.len() < 2 {
        return Err(EvalError::TooFew { have: dms.len(), need: 2 });
    }
    let folds: Vec<(Vec<EpisodeTensor>, Vec<Vec<f64>>)> = dms
        .par_iter()
        .map(|&dm| {
            let train: Vec<EpisodeTensor> = episodes.iter().filter(|e| e.dm_id != dm).cloned().collect();
            let held: Vec<EpisodeTensor> = episodes.iter().filter(|e| e.dm_id == dm).cloned().collect();
            let model = predictors::train(config, &train)?;
            let preds = held.iter().map(|e| model.predict_episode(e)).collect();
            Ok((held, preds))
        })
        .collect::<Result<_, EvalError>>()?;
    let mut all_eps = Vec::new();
    let mut all_preds = Vec::new();
    let mut per_dm = Vec::new();
    for (dm, (held, preds)) in dms.iter().zip(folds) {
        per_dm.push((dm.0, accuracy(&preds, &held)?));
        all_eps.extend(held);
        all_preds.extend(preds);
    }
    Ok(LooReport {
        accuracy: accuracy(&all_preds, &all_eps)?,
        per_dm,
    })
}

/// Pearson correlation computed in two passes (means, then co-moments).
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::Shape(format!("lengths {} and {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(EvalError::TooFew { have: a.len(), need: 2 });
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(EvalError::Undefined("zero variance".into()));
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Average ranks, ties sharing the mean of their positions (1-based).
pub fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spearman {
    pub rho: f64,
    /// Two-sided p-value from the t approximation with `n - 2` degrees of freedom.
    pub p_value: f64,
    pub n: usize,
}

pub fn spearman(a: &[f64], b: &[f64]) -> Result<Spearman, EvalError> {
    if a.len() < 3 {
        return Err(EvalError::TooFew { have: a.len(), need: 3 });
    }
    let rho = pearson(&ranks(a), &ranks(b))?;
    let df = (a.len() - 2) as f64;
    let p_value = if rho.abs() >= 1.0 {
        0.0
    } else {
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| EvalError::Undefined(e.to_string()))?;
        2.0 * dist.sf(t.abs())
    };
    Ok(Spearman { rho, p_value, n: a.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub review_vector_r: f64,
    pub history_vector_r: f64,
    pub review_buckets: usize,
    pub history_buckets: usize,
}

fn go_rates<K: Ord>(obs: impl Iterator<Item = (K, bool)>) -> BTreeMap<K, (usize, usize)> {
    let mut m: BTreeMap<K, (usize, usize)> = BTreeMap::new();
    for (k, go) in obs {
        let e = m.entry(k).or_default();
        e.0 += usize::from(go);
        e.1 += 1;
    }
    m
}

fn aligned<K: Ord + Copy>(
    a: &BTreeMap<K, (usize, usize)>,
    b: &BTreeMap<K, (usize, usize)>,
    min_count: usize,
) -> (Vec<f64>, Vec<f64>) {
    let mut va = Vec::new();
    let mut vb = Vec::new();
    for (k, &(ga, na)) in a {
        if let Some(&(gb, nb)) = b.get(k) {
            if na >= min_count && nb >= min_count {
                va.push(ga as f64 / na as f64);
                vb.push(gb as f64 / nb as f64);
            }
        }
    }
    (va, vb)
}

fn review_rates(log: &InteractionLog) -> BTreeMap<ReviewId, (usize, usize)> {
    go_rates(log.games.iter().flat_map(|g| &g.rounds).map(|r| (r.shown_review_id, r.decision.is_go())))
}

/// (decision, payoff) of the two previous rounds of the same game, from the
/// third round on.
pub type HistoryKey = (bool, u8, bool, u8);

fn history_rates(log: &InteractionLog) -> BTreeMap<HistoryKey, (usize, usize)> {
    go_rates(log.games.iter().flat_map(|g| {
        g.rounds.windows(3).map(|w| {
            (
                (w[0].decision.is_go(), w[0].dm_payoff, w[1].decision.is_go(), w[1].dm_payoff),
                w[2].decision.is_go(),
            )
        })
    }))
}

/// Pearson correlation between two logs' per-review Go rates and per-history
/// Go rates. Only buckets observed at least `min_count` times in both logs
/// take part.
pub fn correlation_report(a: &InteractionLog, b: &InteractionLog, min_count: usize) -> Result<CorrelationReport, EvalError> {
    let (ra, rb) = aligned(&review_rates(a), &review_rates(b), min_count);
    let (ha, hb) = aligned(&history_rates(a), &history_rates(b), min_count);
    for (name, n) in [("review", ra.len()), ("history", ha.len())] {
        if n < 3 {
            return Err(EvalError::Undefined(format!("only {n} aligned {name} buckets")));
        }
    }
    Ok(CorrelationReport {
        review_vector_r: pearson(&ra, &rb)?,
        history_vector_r: pearson(&ha, &hb)?,
        review_buckets: ra.len(),
        history_buckets: ha.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Games between this game and the defeating game (0 is the defeat).
    pub games_before_defeat: usize,
    pub win_rate: f64,
    pub games: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementCurve {
    pub points: Vec<CurvePoint>,
    /// Rank correlation over individual games between `-games_before_defeat`
    /// (progress toward the defeat) and the game's win rate.
    pub trend: Option<Spearman>,
}

/// Mean round payoff by distance from the defeating game, over episodes that
/// ended in a defeat. The defeating game itself is always won, so it is only
/// included on request.
pub fn improvement_curve(log: &InteractionLog, rules: &EpisodeRules, include_defeat: bool) -> ImprovementCurve {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut acc: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for ep in log.episodes() {
        let last = ep.games.last().expect("episodes are nonempty");
        if last.total_payoff < rules.target_for(ep.strategy_id) {
            continue;
        }
        let n = ep.games.len();
        for (k, g) in ep.games.iter().enumerate() {
            let i = n - 1 - k;
            if i == 0 && !include_defeat || g.rounds.is_empty() {
                continue;
            }
            let rate = g.rounds.iter().map(|r| f64::from(r.dm_payoff)).sum::<f64>() / g.rounds.len() as f64;
            let e = acc.entry(i).or_default();
            e.0 += rate;
            e.1 += 1;
            xs.push(-(i as f64));
            ys.push(rate);
        }
    }
    let points = acc
        .into_iter()
        .map(|(i, (s, n))| CurvePoint {
            games_before_defeat: i,
            win_rate: s / n as f64,
            games: n,
        })
        .collect();
    ImprovementCurve {
        points,
        trend: spearman(&xs, &ys).ok(),
    }
}

/// `(acc(n,n) - acc(n,0)) / (acc(2n,0) - acc(n,0))`: the share of the gain
/// from doubling the human data that simulated data recovers.
pub fn improvement_ratio(acc_nn: f64, acc_n0: f64, acc_2n0: f64) -> Result<f64, EvalError> {
    let den = acc_2n0 - acc_n0;
    if den == 0.0 {
        return Err(EvalError::ZeroDenominator);
    }
    Ok((acc_nn - acc_n0) / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::Source;

    pub(crate) fn episode(dm: u32, strategy: u32, labels: &[bool]) -> EpisodeTensor {
        let n = labels.len();
        EpisodeTensor {
            dm_id: DmId(dm),
            strategy_id: StrategyId(strategy),
            source: Source::Sim,
            features: vec![0.0; n * crate::features::FEATURE_COUNT],
            labels: labels.to_vec(),
            game_start: (0..n).map(|t| t % 10 == 0).collect(),
            review_ids: vec![ReviewId(0); n],
            reaction_bins: vec![0; n],
        }
    }

    #[test]
    fn accuracy_is_group_mean() {
        let eps = vec![episode(0, 0, &[true; 10]), episode(1, 0, &[true; 100])];
        let preds = vec![vec![0.9; 10], vec![0.1; 100]];
        assert_eq!(accuracy(&preds, &eps).unwrap(), 0.5);
    }

    #[test]
    fn tie_is_go() {
        let eps = vec![episode(0, 0, &[true, false])];
        assert_eq!(accuracy(&[vec![0.5, 0.5]], &eps).unwrap(), 0.5);
    }

    #[test]
    fn partition_rules() {
        let agree = vec![vec![vec![0.9]]; 15];
        assert_eq!(hard_easy_partition(&agree, HardRule::Disagreement), vec![vec![false]]);
        let mut split = agree.clone();
        split[3] = vec![vec![0.2]];
        assert_eq!(hard_easy_partition(&split, HardRule::Disagreement), vec![vec![true]]);
        let single = vec![vec![vec![0.55, 0.4, 0.6, 0.61, 0.39]]];
        assert_eq!(
            hard_easy_partition(&single, HardRule::ConfidenceBand),
            vec![vec![true, true, true, false, false]]
        );
    }

    #[test]
    fn constant_ci() {
        let v = [0.7; 15];
        let (lo, hi) = bootstrap_ci(&v, 1000, 1).unwrap();
        assert!((lo - 0.7).abs() < 1e-15 && (hi - 0.7).abs() < 1e-15);
    }

    #[test]
    fn improvement_ratio_examples() {
        assert!((improvement_ratio(0.83, 0.80, 0.90).unwrap() - 0.3).abs() < 1e-12);
        assert_eq!(improvement_ratio(0.8, 0.8, 0.9).unwrap(), 0.0);
        assert!(improvement_ratio(0.8, 0.8, 0.8).is_err());
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }
}
