use persuade_core::eval::*;
use persuade_core::features::{EpisodeTensor, FEATURE_COUNT};
use persuade_core::game::{Decision, DmId, GameRecord, HotelId, ReviewId, RoundRecord, Source, StrategyId};
use persuade_core::interactions::InteractionLog;
use persuade_core::predictors::{PredictorConfig, PredictorKind};
use persuade_core::sim::EpisodeRules;
use proptest::prelude::*;

fn episode(dm: u32, strategy: u32, labels: &[bool]) -> EpisodeTensor {
    let n = labels.len();
    EpisodeTensor {
        dm_id: DmId(dm),
        strategy_id: StrategyId(strategy),
        source: Source::Sim,
        features: vec![0.0; n * FEATURE_COUNT],
        labels: labels.to_vec(),
        game_start: (0..n).map(|t| t % 10 == 0).collect(),
        review_ids: (0..n as u32).map(ReviewId).collect(),
        reaction_bins: vec![0; n],
    }
}

fn naive_pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    let sab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let saa: f64 = a.iter().map(|x| x * x).sum();
    let sbb: f64 = b.iter().map(|x| x * x).sum();
    (n * sab - sa * sb) / ((n * saa - sa * sa).sqrt() * (n * sbb - sb * sb).sqrt())
}

#[test]
fn pearson_four_point_example() {
    let a = [0.1, 0.4, 0.6, 0.9];
    let b = [0.2, 0.3, 0.7, 0.8];
    // Centred by hand: a - 0.5 = (-.4, -.1, .1, .4), b - 0.5 = (-.3, -.2, .2, .3).
    let expected = (0.12 + 0.02 + 0.02 + 0.12) / ((0.34f64).sqrt() * (0.26f64).sqrt());
    assert!((pearson(&a, &b).unwrap() - expected).abs() < 1e-12);
    assert!((pearson(&a, &b).unwrap() - naive_pearson(&a, &b)).abs() < 1e-12);
    let neg: Vec<f64> = a.iter().map(|x| 1.0 - x).collect();
    assert!((pearson(&a, &neg).unwrap() + 1.0).abs() < 1e-12);
    assert!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
}

proptest! {
    #[test]
    fn pearson_matches_summation_oracle(v in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 3..60)) {
        let (a, b): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
        if let Ok(r) = pearson(&a, &b) {
            prop_assert!((r - naive_pearson(&a, &b)).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&r));
        }
    }

    #[test]
    fn duplicating_a_group_keeps_accuracy(
        groups in prop::collection::vec(prop::collection::vec((any::<bool>(), 0.0f64..1.0), 1..20), 1..6),
        which in 0usize..6,
    ) {
        let mut eps = Vec::new();
        let mut preds = Vec::new();
        for (g, rows) in groups.iter().enumerate() {
            let labels: Vec<bool> = rows.iter().map(|r| r.0).collect();
            eps.push(episode(g as u32, 0, &labels));
            preds.push(rows.iter().map(|r| r.1).collect::<Vec<f64>>());
        }
        let before = accuracy(&preds, &eps).unwrap();
        let w = which % eps.len();
        let mut doubled = eps[w].clone();
        doubled.labels.extend(eps[w].labels.clone());
        doubled.features.extend(eps[w].features.clone());
        doubled.game_start.extend(eps[w].game_start.clone());
        doubled.review_ids.extend(eps[w].review_ids.clone());
        doubled.reaction_bins.extend(eps[w].reaction_bins.clone());
        let mut p2 = preds[w].clone();
        p2.extend(preds[w].clone());
        eps[w] = doubled;
        preds[w] = p2;
        prop_assert!((accuracy(&preds, &eps).unwrap() - before).abs() < 1e-12);
    }

    #[test]
    fn partition_covers_every_round(members in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 12), 1..16)) {
        let member_preds: Vec<Vec<Vec<f64>>> = members.iter().map(|m| vec![m[..5].to_vec(), m[5..].to_vec()]).collect();
        let rule = HardRule::for_members(member_preds.len());
        let hard = hard_easy_partition(&member_preds, rule);
        prop_assert_eq!(hard.iter().map(|e| e.len()).sum::<usize>(), 12);
        let eps = vec![episode(0, 0, &[true; 5]), episode(1, 0, &[false; 7])];
        let r = report_from_predictions(&member_preds, vec![0; member_preds.len()], &eps, &EvalOptions::default()).unwrap();
        let h = r.hard.as_ref().map_or(0, |s| s.rounds);
        let e = r.easy.as_ref().map_or(0, |s| s.rounds);
        prop_assert_eq!(h + e, 12);
        prop_assert!(r.overall.ci_lo <= r.overall.accuracy + 1e-12 && r.overall.accuracy <= r.overall.ci_hi + 1e-12);
    }
}

#[test]
fn accuracy_examples() {
    let eps = vec![episode(0, 0, &[true; 10]), episode(1, 0, &[true; 100])];
    assert_eq!(accuracy(&[vec![1.0; 10], vec![1.0; 100]], &eps).unwrap(), 1.0);
    assert_eq!(accuracy(&[vec![1.0; 10], vec![0.0; 100]], &eps).unwrap(), 0.5);
    assert!(accuracy(&[], &[]).is_err());
    assert!(accuracy(&[vec![1.0; 9], vec![1.0; 100]], &eps).is_err());
}

/// Type-7 percentile of the exact bootstrap distribution, enumerated with
/// nested loops independently of the library's odometer.
fn exhaustive_three(v: [f64; 3]) -> (f64, f64) {
    let mut means = Vec::new();
    for &a in &v {
        for &b in &v {
            for &c in &v {
                means.push((a + b + c) / 3.0);
            }
        }
    }
    means.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let pick = |q: f64| {
        let h = 26.0 * q;
        let i = h.floor() as usize;
        means[i] + (h - i as f64) * (means[i + 1] - means[i])
    };
    (pick(0.025), pick(0.975))
}

#[test]
fn bootstrap_matches_exhaustive_oracle() {
    let v = [0.2, 0.5, 0.9];
    let (lo, hi) = bootstrap_ci(&v, 10_000, 99).unwrap();
    let (olo, ohi) = exhaustive_three(v);
    // Sorted means start 0.2, 0.3, 0.3, 0.3 and h = 0.65 gives 0.2 + 0.65 * 0.1.
    assert!((olo - 0.265).abs() < 1e-12);
    assert!((lo - olo).abs() < 1e-12 && (hi - ohi).abs() < 1e-12, "{lo} {hi} vs {olo} {ohi}");
}

#[test]
fn bootstrap_of_fifteen_is_seeded() {
    let v: Vec<f64> = (0..15).map(|i| 0.6 + 0.01 * i as f64).collect();
    let a = bootstrap_ci(&v, 10_000, 5).unwrap();
    assert_eq!(a, bootstrap_ci(&v, 10_000, 5).unwrap());
    let mean = v.iter().sum::<f64>() / 15.0;
    assert!(a.0 < mean && mean < a.1);
    let c = bootstrap_ci(&[0.8; 15], 10_000, 5).unwrap();
    assert!((c.0 - 0.8).abs() < 1e-12 && (c.1 - 0.8).abs() < 1e-12);
}

#[test]
fn perfect_and_constant_predictors() {
    let labels_a = [true, false, true, true, false, false, true, false, true, false];
    let labels_b = [false, false, true, false, false, true, false, false, true, false];
    let test = vec![episode(10, 5, &labels_a), episode(11, 6, &labels_b)];
    let train = vec![episode(0, 1, &[true; 10])];
    let perfect: Vec<Vec<Vec<f64>>> = vec![test.iter().map(|e| e.labels.iter().map(|&y| if y { 0.9 } else { 0.1 }).collect()).collect(); 15];
    let r = report_from_predictions(&perfect, (1..=15).collect(), &test, &EvalOptions::default()).unwrap();
    assert_eq!(r.overall.accuracy, 1.0);
    assert_eq!((r.overall.ci_lo, r.overall.ci_hi), (1.0, 1.0));
    assert!(r.hard.is_none());
    assert!(r.per_strategy.iter().all(|s| s.summary.accuracy == 1.0));

    let go: Vec<Vec<Vec<f64>>> = vec![test.iter().map(|e| vec![0.7; e.len()]).collect()];
    let r = report_from_predictions(&go, vec![1], &test, &EvalOptions::default()).unwrap();
    // Go-correct rate per group, then the group mean.
    let rate = |l: &[bool]| l.iter().filter(|&&y| y).count() as f64 / l.len() as f64;
    assert!((r.overall.accuracy - (rate(&labels_a) + rate(&labels_b)) / 2.0).abs() < 1e-12);
    assert_eq!(r.hard_rule, HardRule::ConfidenceBand);
    assert!(check_disjoint(&train, &test).is_ok());
}

#[test]
fn overlapping_sets_rejected() {
    let train = vec![episode(0, 1, &[true; 10])];
    let test = vec![episode(1, 1, &[true; 10])];
    assert!(matches!(check_disjoint(&train, &test), Err(EvalError::StrategyOverlap(v)) if v == vec![1]));
    let test = vec![episode(0, 2, &[true; 10])];
    assert!(matches!(check_disjoint(&train, &test), Err(EvalError::DmOverlap(_))));
}

#[test]
fn report_bytes_are_reproducible() {
    let test = vec![episode(3, 2, &[true, false, true, true, false, true, true, false, false, true])];
    let preds: Vec<Vec<Vec<f64>>> = (0..15).map(|m| vec![(0..10).map(|t| ((m * 7 + t * 3) % 10) as f64 / 10.0).collect()]).collect();
    let opts = EvalOptions {
        config_hash: "abc".into(),
        ..EvalOptions::default()
    };
    let bytes = |r: &EvalReport| {
        let mut out = Vec::new();
        write_report_json(r, &mut out).unwrap();
        write_per_strategy_csv(r, &mut out).unwrap();
        out
    };
    let a = report_from_predictions(&preds, (1..=15).collect(), &test, &opts).unwrap();
    let b = report_from_predictions(&preds, (1..=15).collect(), &test, &opts).unwrap();
    assert_eq!(bytes(&a), bytes(&b));
    let back: EvalReport = serde_json::from_slice(&{
        let mut o = Vec::new();
        write_report_json(&a, &mut o).unwrap();
        o
    })
    .unwrap();
    assert_eq!(back, a);
}

fn majority_config() -> PredictorConfig {
    PredictorConfig {
        kind: PredictorKind::Majority,
        ..PredictorConfig::default()
    }
}

#[test]
fn loo_runs_one_training_per_dm() {
    let eps = vec![episode(0, 0, &[true; 10]), episode(1, 0, &[false; 10])];
    let r = loo_on_policy(&majority_config(), &eps).unwrap();
    assert_eq!(r.per_dm.len(), 2);
    // Each DM is predicted from the other, which always chose the opposite.
    assert_eq!(r.accuracy, 0.0);
    assert!(loo_on_policy(&majority_config(), &eps[..1]).is_err());
}

#[test]
fn loo_on_twins_equals_within_sample_accuracy() {
    let labels = [true, true, false, true, false, false, true, true, true, false];
    let twin_a = episode(0, 0, &labels);
    let mut twin_b = twin_a.clone();
    twin_b.dm_id = DmId(1);
    let r = loo_on_policy(&majority_config(), &[twin_a.clone(), twin_b]).unwrap();
    let model = persuade_core::predictors::train(&majority_config(), std::slice::from_ref(&twin_a)).unwrap();
    use persuade_core::predictors::Predictor;
    let within = accuracy(&[model.predict_episode(&twin_a)], std::slice::from_ref(&twin_a)).unwrap();
    assert_eq!(r.accuracy, within);
    assert_eq!(within, 1.0);
}

fn game(dm: u32, strategy: u32, index: u32, decisions: &[bool], good: &[bool]) -> GameRecord {
    let rounds = decisions
        .iter()
        .zip(good)
        .enumerate()
        .map(|(t, (&d, &g))| {
            RoundRecord::new(t as u8 + 1, HotelId(t as u32), ReviewId((t * 7) as u32 + u32::from(g)), Decision::from_go(d), g, 0)
        })
        .collect();
    GameRecord::new(DmId(dm), StrategyId(strategy), index, Source::Sim, rounds).unwrap()
}

#[test]
fn correlation_of_identical_and_mirrored_logs() {
    let mut games = Vec::new();
    for dm in 0..40u32 {
        let dec: Vec<bool> = (0..10).map(|t| (dm * 3 + t * 5) % 7 < 4).collect();
        let good: Vec<bool> = (0..10).map(|t| (dm + t) % 3 != 0).collect();
        games.push(game(dm, 0, 1, &dec, &good));
    }
    let log = InteractionLog::new(games);
    let r = correlation_report(&log, &log, 5).unwrap();
    assert!((r.review_vector_r - 1.0).abs() < 1e-12);
    assert!((r.history_vector_r - 1.0).abs() < 1e-12);
    assert!(r.history_buckets <= 16);

    let mirrored = InteractionLog::new(
        log.games
            .iter()
            .map(|g| {
                let dec: Vec<bool> = g.rounds.iter().map(|r| !r.decision.is_go()).collect();
                let good: Vec<bool> = g.rounds.iter().map(|r| r.hotel_good).collect();
                game(g.dm_id.0, 0, 1, &dec, &good)
            })
            .collect(),
    );
    let r = correlation_report(&log, &mirrored, 5).unwrap();
    assert!((r.review_vector_r + 1.0).abs() < 1e-12);
    assert!(correlation_report(&log, &log, 10_000).is_err());
}

#[test]
fn improvement_curve_fixtures() {
    let rules = EpisodeRules::default();
    let all_good = [true; 10];
    // An oracle DM defeats every expert in its first game.
    let oracle = InteractionLog::new((0..5).map(|dm| game(dm, 0, 1, &[true; 10], &all_good)).collect());
    let c = improvement_curve(&oracle, &rules, true);
    assert_eq!(c.points.len(), 1);
    assert_eq!(c.points[0].win_rate, 1.0);
    assert!(improvement_curve(&oracle, &rules, false).points.is_empty());

    // Two lost games at 0.3 and 0.6, then the defeat.
    let mut games = Vec::new();
    for dm in 0..3 {
        let lose = |n: usize, idx: u32| {
            let dec: Vec<bool> = (0..10).map(|t| t < n).collect();
            game(dm, 0, idx, &dec, &all_good)
        };
        games.push(lose(3, 1));
        games.push(lose(6, 2));
        games.push(lose(10, 3));
    }
    // An episode that never reached the target is ignored.
    games.push(game(9, 0, 1, &[false; 10], &all_good));
    let c = improvement_curve(&InteractionLog::new(games), &rules, false);
    let pts: Vec<(usize, f64, usize)> = c.points.iter().map(|p| (p.games_before_defeat, p.win_rate, p.games)).collect();
    assert_eq!(pts, vec![(1, 0.6, 3), (2, 0.3, 3)]);
    let trend = c.trend.unwrap();
    assert!(trend.rho > 0.99);
}

#[test]
fn spearman_examples() {
    let s = spearman(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 4.0, 8.0, 16.0, 32.0]).unwrap();
    assert_eq!(s.rho, 1.0);
    assert_eq!(s.p_value, 0.0);
    let x: Vec<f64> = (0..200).map(f64::from).collect();
    let y: Vec<f64> = x.iter().map(|v| ((v * 7919.0) % 13.0).sin()).collect();
    let s = spearman(&x, &y).unwrap();
    assert!(s.p_value > 0.0 && s.p_value <= 1.0);
}

#[test]
fn improvement_ratio_examples() {
    assert!((improvement_ratio(0.83, 0.80, 0.90).unwrap() - 0.3).abs() < 1e-12);
    assert_eq!(improvement_ratio(0.80, 0.80, 0.90).unwrap(), 0.0);
    assert_eq!(improvement_ratio(0.90, 0.80, 0.90).unwrap(), 1.0);
    assert!(matches!(improvement_ratio(0.9, 0.8, 0.8), Err(EvalError::ZeroDenominator)));
}
