use std::sync::Arc;

use persuade_core::corpus::{generate_corpus, Corpus};
use persuade_core::features::{build_dataset, EpisodeTensor};
use persuade_core::predictors::{train, PredictorConfig, PredictorKind};
use persuade_core::sim::{simulate_dataset, NoisyOracleScorer, PersonaLaw, SimulationSpec};
use persuade_core::strategy::StrategyCatalog;
use persuade_core::trainer::*;

struct Fixture {
    corpus: Corpus,
    catalog: StrategyCatalog,
    base: Vec<EpisodeTensor>,
}

fn fixture(n_dms: usize) -> Fixture {
    let corpus = generate_corpus(3, 80).unwrap();
    let catalog = StrategyCatalog::full();
    let law = PersonaLaw::proxy_with(Arc::new(NoisyOracleScorer::new(2, 0.5)));
    let log = simulate_dataset(n_dms, &SimulationSpec::new(law), &catalog, &corpus, 11).unwrap();
    let base = build_dataset(&log, &corpus).unwrap();
    Fixture { corpus, catalog, base }
}

fn tiny(epochs: usize) -> PredictorConfig {
    PredictorConfig {
        kind: PredictorKind::FeedForward,
        hidden_size: 4,
        n_layers: 1,
        epochs,
        allow_off_grid: true,
        ..PredictorConfig::default()
    }
}

fn schedule(s_r: f64) -> MixSchedule {
    MixSchedule::new(s_r, PersonaLaw::default_with(Arc::new(NoisyOracleScorer::new(5, 0.5))))
}

fn ctx(f: &Fixture) -> MixContext<'_> {
    MixContext {
        corpus: &f.corpus,
        catalog: &f.catalog,
        validation: None,
    }
}

#[test]
fn zero_ratio_equals_plain_training() {
    let f = fixture(4);
    for kind in [PredictorKind::FeedForward, PredictorKind::Lstm] {
        let config = PredictorConfig { kind, ..tiny(2) };
        let mixed = mixed_train(&config, &f.base, &schedule(0.0), &ctx(&f), 99).unwrap();
        let plain = train(&config, &f.base).unwrap();
        assert_eq!(mixed.trained, plain);
        assert!(mixed.curve.iter().all(|r| r.sim_dms == 0 && r.sim_loss.is_none()));
    }
}

#[test]
fn block_sizes_follow_the_ratio() {
    let f = fixture(10);
    let m = mixed_train(&tiny(2), &f.base, &schedule(4.0), &ctx(&f), 1).unwrap();
    assert!(m.curve.iter().all(|r| r.sim_dms == 40 && r.sim_loss.is_some()));
    let m = mixed_train(&tiny(2), &f.base, &schedule(0.5), &ctx(&f), 1).unwrap();
    assert!(m.curve.iter().all(|r| r.sim_dms == 5));
}

#[test]
fn mixed_training_is_deterministic() {
    let f = fixture(3);
    let a = mixed_train(&tiny(3), &f.base, &schedule(1.0), &ctx(&f), 7).unwrap();
    let b = mixed_train(&tiny(3), &f.base, &schedule(1.0), &ctx(&f), 7).unwrap();
    assert_eq!(a.trained, b.trained);
    assert_eq!(a.curve, b.curve);
    let c = mixed_train(&tiny(3), &f.base, &schedule(1.0), &ctx(&f), 8).unwrap();
    assert_ne!(a.trained, c.trained);

    let mut pool = schedule(1.0);
    pool.regenerate_per_epoch = false;
    let d = mixed_train(&tiny(3), &f.base, &pool, &ctx(&f), 7).unwrap();
    assert_ne!(a.trained, d.trained);
    // Epoch 0 sees the same block either way.
    assert_eq!(a.curve[0].sim_loss, d.curve[0].sim_loss);
}

#[test]
fn simulation_only_training_and_validation_curve() {
    let f = fixture(2);
    let context = MixContext {
        validation: Some(&f.base),
        ..ctx(&f)
    };
    let m = mixed_train(&tiny(2), &f.base, &schedule(2.0), &context, 3).unwrap();
    assert!(m.curve.iter().all(|r| r.val_accuracy.is_some_and(|a| (0.0..=1.0).contains(&a))));
    let mut out = Vec::new();
    write_curve_csv(&m.curve, "h1", &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# config_hash=h1");
    assert_eq!(lines[1], "epoch,sim_dms,sim_loss,base_loss,val_accuracy");
    assert_eq!(lines.len(), 4);
    assert!(lines[2].starts_with("0,4,"));

    assert!(mixed_train(&tiny(1), &[], &schedule(0.0), &ctx(&f), 3).is_err());
    assert!(mixed_train(&tiny(1), &f.base, &schedule(-0.5), &ctx(&f), 3).is_err());
}
