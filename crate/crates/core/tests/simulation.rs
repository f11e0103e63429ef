use std::sync::Arc;

use persuade_core::corpus::{generate_corpus, interactions_to_csv_bytes, read_interactions_csv, Corpus, SchemaMap};
use persuade_core::features::{build_dataset, POINTS_SO_FAR, ROUNDS_SO_FAR};
use persuade_core::game::{Decision, ROUNDS_PER_GAME};
use persuade_core::interactions::InteractionLog;
use persuade_core::rng;
use persuade_core::sim::*;
use persuade_core::strategy::StrategyCatalog;
use proptest::prelude::*;
use rand::Rng;

fn corpus() -> Corpus {
    generate_corpus(21, 120).unwrap()
}

fn law() -> PersonaLaw {
    PersonaLaw::default_with(Arc::new(NoisyOracleScorer::new(4, DEFAULT_LANGUAGE_NOISE)))
}

fn simulate_on(threads: usize, n: usize, spec: &SimulationSpec, catalog: &StrategyCatalog, corpus: &Corpus) -> InteractionLog {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(|| simulate_dataset(n, spec, catalog, corpus, 77).unwrap())
}

#[test]
fn log_does_not_depend_on_thread_count() {
    let (corpus, catalog) = (corpus(), StrategyCatalog::full());
    let spec = SimulationSpec::new(law());
    let one = simulate_on(1, 12, &spec, &catalog, &corpus);
    let many = simulate_on(4, 12, &spec, &catalog, &corpus);
    assert_eq!(interactions_to_csv_bytes(&one), interactions_to_csv_bytes(&many));
    assert_eq!(one, many);
}

#[test]
fn one_dm_plays_six_episodes() {
    let (corpus, catalog) = (corpus(), StrategyCatalog::full());
    let log = simulate_dataset(1, &SimulationSpec::new(law()), &catalog, &corpus, 5).unwrap();
    let eps = log.episodes();
    assert_eq!(eps.len(), STRATEGIES_PER_DM);
    let distinct: std::collections::BTreeSet<_> = eps.iter().map(|e| e.strategy_id).collect();
    assert_eq!(distinct.len(), STRATEGIES_PER_DM);
}

#[test]
fn simulated_log_invariants() {
    let (corpus, catalog) = (corpus(), StrategyCatalog::full());
    let mut spec = SimulationSpec::new(law());
    spec.first_dm_id = 30;
    let log = simulate_dataset(8, &spec, &catalog, &corpus, 6).unwrap();
    assert_eq!(log.dm_ids().iter().map(|d| d.0).collect::<Vec<_>>(), (30..38).collect::<Vec<_>>());
    for ep in log.episodes() {
        let n = ep.games.len();
        assert!(n >= 1 && n as u32 <= DEFAULT_GAME_CAP);
        for (i, g) in ep.games.iter().enumerate() {
            assert_eq!(g.game_index as usize, i + 1);
            assert_eq!(g.rounds.len(), ROUNDS_PER_GAME);
            let won = g.total_payoff >= 9;
            // Only the last game of an episode may reach the target.
            assert_eq!(won, i + 1 == n && won);
            for r in &g.rounds {
                let hotel = corpus.hotel(r.hotel_id).unwrap();
                assert_eq!(r.hotel_good, hotel.good());
                assert!(hotel.reviews().iter().any(|x| x.id == r.shown_review_id));
                assert_eq!(r.dm_payoff, u8::from(r.decision.is_go() == r.hotel_good));
                assert_eq!(r.reaction_bin, 0);
            }
        }
        let last = ep.games.last().unwrap();
        assert!(last.total_payoff >= 9 || n as u32 == DEFAULT_GAME_CAP);
    }
    // The CSV form reads back to the same log.
    let bytes = interactions_to_csv_bytes(&log);
    let back = read_interactions_csv(bytes.as_slice(), &SchemaMap::identity(), Some(&corpus)).unwrap();
    assert_eq!(back, log);
}

#[test]
fn count_features_match_brute_force() {
    let (corpus, catalog) = (corpus(), StrategyCatalog::full());
    let log = simulate_dataset(3, &SimulationSpec::new(law()), &catalog, &corpus, 8).unwrap();
    let tensors = build_dataset(&log, &corpus).unwrap();
    for (ep, x) in log.episodes().iter().zip(&tensors) {
        let rounds: Vec<_> = ep.games.iter().flat_map(|g| g.rounds.iter()).collect();
        for t in 0..rounds.len() {
            let mut points = 0u32;
            for r in &rounds[..t] {
                if (r.decision == Decision::Go) == r.hotel_good {
                    points += 1;
                }
            }
            assert_eq!(x.row(t)[POINTS_SO_FAR], f64::from(points));
            assert_eq!(x.row(t)[ROUNDS_SO_FAR], t as f64);
        }
    }
}

#[test]
fn oracle_share_grows_in_expectation() {
    let mut r = rng::stream(3, &[]);
    let (runs, steps) = (2000, 60);
    let mut mean = vec![0.0; steps + 1];
    for _ in 0..runs {
        let mut t = Temperament::initial(&NatureVector::uniform());
        mean[0] += t.probabilities()[0];
        for m in mean.iter_mut().skip(1) {
            t.update(0.05, &mut r);
            *m += t.probabilities()[0];
        }
    }
    for w in mean.windows(2) {
        assert!(w[1] > w[0], "{mean:?}");
    }
}

proptest! {
    #[test]
    fn temperament_stays_a_distribution(
        w in prop::array::uniform3(0.0f64..1.0),
        eta in 0.0f64..0.5,
        steps in 1usize..400,
        seed in any::<u64>(),
    ) {
        prop_assume!(w.iter().sum::<f64>() > 1e-3);
        let mut t = Temperament::initial(&NatureVector::from_weights(w).unwrap());
        let mut r = rng::stream(seed, &[]);
        for i in 0..steps {
            if r.random::<f64>() < 0.01 {
                // Adversarial gammas at the extremes of the range.
                t.update_with([-eta / 10.0, eta, -eta / 10.0]);
            } else {
                t.update(eta, &mut r);
            }
            prop_assert!(t.is_valid(), "{:?}", t);
            prop_assert_eq!(t.round() as usize, i + 1);
            let h = t.pick(r.random::<f64>());
            prop_assert!(t.weight(h) > 0.0);
        }
    }

    #[test]
    fn zero_eta_never_moves(w in prop::array::uniform3(0.01f64..1.0), steps in 1usize..50) {
        let start = Temperament::initial(&NatureVector::from_weights(w).unwrap());
        let mut t = start;
        let mut r = rng::stream(0, &[]);
        for _ in 0..steps {
            t.update(0.0, &mut r);
        }
        for (a, b) in t.probabilities().iter().zip(start.probabilities()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }
}
