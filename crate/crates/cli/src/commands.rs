use std::fs;
use std::io::Write;
use std::path::Path;

use persuade_core::corpus::{
    corpus_stats, generate_corpus, ingest_corpus_csv, ingest_interactions_csv, read_config_hash, Corpus,
    SchemaMap,
};
use persuade_core::eval::experiment::{ablation_sweep, write_ablation_csv, AblationGrid, PseudoHumanData, PseudoHumanSetup};
use persuade_core::eval::{
    correlation_report, improvement_curve, loo_on_policy, ope_evaluate, write_per_strategy_csv, write_report_json,
    EvalOptions,
};
use persuade_core::features::{build_dataset, EpisodeTensor};
use persuade_core::interactions::InteractionLog;
use persuade_core::predictors::{checkpoint, TrainedModel};
use persuade_core::rng;
use persuade_core::sim::{simulate_dataset, SimulationSpec};
use persuade_core::strategy::{
    builtin_sets, classify_strategy, enumerate_strategies_up_to, StrategyCatalog, StrategyClass,
};
use persuade_core::trainer::{mixed_train, write_curve_csv, MixContext};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::RunConfig;
use crate::failure::Failure;

/// Behavioral strategy count reported in the original study, kept for the
/// enumeration report.
const PUBLISHED_STRATEGY_COUNT: usize = 1179;

const MANIFEST: &str = "manifest.json";

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    config_hash: String,
    corpus_hash: String,
    log_config_hash: Option<String>,
    model: String,
    member_seeds: Vec<u64>,
    checkpoints: Vec<String>,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| Failure::io(path, e))
}

fn make_dir(path: &Path) -> Result<(), Failure> {
    fs::create_dir_all(path).map_err(|e| Failure::io(path, e))
}

fn json_bytes(value: &impl Serialize) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("report serializes");
    out.push(b'\n');
    out
}

fn in_file(path: &Path, e: impl Into<Failure>) -> Failure {
    let mut f = e.into();
    f.message = format!("{}: {}", path.display(), f.message);
    f
}

fn load_corpus(path: &Path) -> Result<Corpus, Failure> {
    ingest_corpus_csv(path, &SchemaMap::identity()).map_err(|e| in_file(path, e))
}

fn load_log(path: &Path, corpus: Option<&Corpus>) -> Result<InteractionLog, Failure> {
    ingest_interactions_csv(path, &SchemaMap::identity(), corpus).map_err(|e| in_file(path, e))
}

fn load_episodes(path: &Path, corpus: &Corpus) -> Result<Vec<EpisodeTensor>, Failure> {
    Ok(build_dataset(&load_log(path, Some(corpus))?, corpus)?)
}

pub fn gen_corpus(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    let seed = cfg.require_seed()?;
    let corpus = generate_corpus(rng::derive_seed(seed, &[rng::label::CORPUS]), cfg.corpus_size)?;
    corpus.write_csv(out, Some(&cfg.hash()))?;
    let stats = corpus_stats(&corpus).expect("generated corpus is nonempty");
    println!(
        "{}",
        json!({
            "config_hash": cfg.hash(),
            "corpus_hash": corpus.content_hash(),
            "hotels": stats.n,
            "good_fraction": stats.good_fraction,
            "median_mean_score": stats.median_mean_score,
            "score_histogram": stats.score_histogram,
        })
    );
    Ok(())
}

pub fn enum_strategies(cfg: &RunConfig, out_dir: &Path) -> Result<(), Failure> {
    make_dir(out_dir)?;
    let catalog = StrategyCatalog::full();
    let hash = cfg.hash();
    let mut csv = format!("# config_hash={hash}\nstrategy_id,depth,class,signature\n");
    let mut classes = std::collections::BTreeMap::new();
    for (id, tree) in catalog.iter() {
        let class = classify_strategy(tree);
        *classes.entry(class.name()).or_insert(0usize) += 1;
        csv.push_str(&format!("{id},{},{},{}\n", tree.depth(), class.name(), tree.signature()));
    }
    write_file(&out_dir.join("strategies.csv"), csv.as_bytes())?;

    let total = catalog.len();
    let sets = builtin_sets(&catalog);
    let ids = |v: &[persuade_core::game::StrategyId]| v.iter().map(|s| s.0).collect::<Vec<_>>();
    let report = json!({
        "config_hash": hash,
        "distinct_by_max_depth": {
            "0": enumerate_strategies_up_to(0).len(),
            "1": enumerate_strategies_up_to(1).len(),
            "2": total,
        },
        "class_counts": StrategyClass::ALL.iter().map(|c| (c.name(), classes.get(c.name()).copied().unwrap_or(0))).collect::<std::collections::BTreeMap<_, _>>(),
        "published_count": PUBLISHED_STRATEGY_COUNT,
        "difference": total as i64 - PUBLISHED_STRATEGY_COUNT as i64,
        "note": "Counts are of behaviorally distinct trees: every syntactic tree of depth <= 2 over the four conditions and three reveal actions, deduplicated by its action on all 16 condition states. The published count comes from an enumeration convention that was never specified (for example, which syntactic variants or degenerate splits are kept), so the two numbers are not expected to agree.",
        "set_a": ids(&sets.set_a),
        "set_b": ids(&sets.set_b),
    });
    write_file(&out_dir.join("report.json"), &json_bytes(&report))?;
    println!("strategies={total} published={PUBLISHED_STRATEGY_COUNT}");
    Ok(())
}

pub fn simulate(cfg: &RunConfig, corpus_path: &Path, out: &Path) -> Result<(), Failure> {
    let seed = cfg.require_seed()?;
    let corpus = load_corpus(corpus_path)?;
    let catalog = StrategyCatalog::full();
    let law = cfg.persona_law(&cfg.law, cfg.scorer(seed, cfg.scorer_stream)?)?;
    let spec = SimulationSpec {
        law,
        plan: cfg.plan(&catalog)?,
        rules: cfg.rules()?,
        first_dm_id: cfg.first_dm_id,
    };
    let log = simulate_dataset(cfg.dms, &spec, &catalog, &corpus, rng::derive_seed(seed, &[rng::label::DM]))?;
    persuade_core::corpus::write_interactions_csv(&log, out, Some(&cfg.hash()))?;
    println!("games={} rounds={}", log.games.len(), log.round_count());
    Ok(())
}

fn checkpoint_name(seed: u64) -> String {
    format!("model_{seed:02}.ckpt")
}

pub fn train(cfg: &RunConfig, corpus_path: &Path, log_path: &Path, out_dir: &Path) -> Result<(), Failure> {
    let seed = cfg.require_seed()?;
    let corpus = load_corpus(corpus_path)?;
    let base = load_episodes(log_path, &corpus)?;
    let config = cfg.predictor()?;
    let seeds = cfg.member_seeds()?;
    let schedule = cfg.schedule(seed)?;
    let catalog = StrategyCatalog::full();
    let ctx = MixContext {
        corpus: &corpus,
        catalog: &catalog,
        validation: None,
    };
    let runs = seeds
        .par_iter()
        .map(|&s| mixed_train(&config.with_seed(s), &base, &schedule, &ctx, seed))
        .collect::<Result<Vec<_>, _>>()?;

    make_dir(out_dir)?;
    let hash = cfg.hash();
    let mut checkpoints = Vec::new();
    for (s, run) in seeds.iter().zip(&runs) {
        let name = checkpoint_name(*s);
        write_file(&out_dir.join(&name), &checkpoint::to_bytes(&run.trained, &hash))?;
        checkpoints.push(name);
        let mut curve = Vec::new();
        write_curve_csv(&run.curve, &hash, &mut curve).expect("in-memory write");
        write_file(&out_dir.join(format!("curve_{s:02}.csv")), &curve)?;
    }
    let manifest = Manifest {
        config_hash: hash,
        corpus_hash: corpus.content_hash(),
        log_config_hash: read_config_hash(log_path)?,
        model: config.kind.name().to_string(),
        member_seeds: seeds,
        checkpoints,
    };
    write_file(&out_dir.join(MANIFEST), &json_bytes(&manifest))?;
    println!("members={} model={}", manifest.member_seeds.len(), manifest.model);
    Ok(())
}

fn load_models(dir: &Path, corpus: &Corpus) -> Result<(Manifest, Vec<TrainedModel>), Failure> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Failure::io(&path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Failure::validation("manifest", format!("{}: {e}", path.display())))?;
    let corpus_hash = corpus.content_hash();
    if manifest.corpus_hash != corpus_hash {
        return Err(Failure::validation(
            "hash_mismatch",
            format!("models were trained on corpus {} but the given corpus is {corpus_hash}", manifest.corpus_hash),
        ));
    }
    let mut models = Vec::new();
    for name in &manifest.checkpoints {
        let path = dir.join(name);
        let bytes = fs::read(&path).map_err(|e| Failure::io(&path, e))?;
        let (model, hash) = checkpoint::from_bytes(&bytes)?;
        if hash != manifest.config_hash {
            return Err(Failure::validation(
                "hash_mismatch",
                format!("{name} carries config hash {hash}, the manifest {}", manifest.config_hash),
            ));
        }
        models.push(model);
    }
    Ok((manifest, models))
}

pub fn evaluate(
    cfg: &RunConfig,
    corpus_path: &Path,
    models_dir: &Path,
    train_log: &Path,
    test_log: &Path,
    out_dir: &Path,
) -> Result<(), Failure> {
    let seed = cfg.require_seed()?;
    let corpus = load_corpus(corpus_path)?;
    let (manifest, models) = load_models(models_dir, &corpus)?;
    let train = load_episodes(train_log, &corpus)?;
    let test = load_episodes(test_log, &corpus)?;
    let opts = EvalOptions {
        n_resamples: cfg.n_resamples,
        bootstrap_seed: rng::derive_seed(seed, &[rng::label::BOOTSTRAP]),
        config_hash: cfg.hash(),
    };
    let report = ope_evaluate(&models, manifest.member_seeds.clone(), &train, &test, &opts)?;
    make_dir(out_dir)?;
    let mut json = Vec::new();
    write_report_json(&report, &mut json).expect("in-memory write");
    write_file(&out_dir.join("report.json"), &json)?;
    let mut csv = Vec::new();
    write_per_strategy_csv(&report, &mut csv).expect("in-memory write");
    write_file(&out_dir.join("per_strategy.csv"), &csv)?;
    println!(
        "accuracy={} ci_lo={} ci_hi={}",
        report.overall.accuracy, report.overall.ci_lo, report.overall.ci_hi
    );
    Ok(())
}

pub fn loo(cfg: &RunConfig, corpus_path: &Path, log_path: &Path, out: &Path) -> Result<(), Failure> {
    let seed = cfg.require_seed()?;
    let corpus = load_corpus(corpus_path)?;
    let episodes = load_episodes(log_path, &corpus)?;
    let report = loo_on_policy(&cfg.predictor()?.with_seed(seed), &episodes)?;
    let doc = json!({
        "config_hash": cfg.hash(),
        "accuracy": report.accuracy,
        "per_dm": report.per_dm,
    });
    write_file(out, &json_bytes(&doc))?;
    println!("accuracy={}", report.accuracy);
    Ok(())
}

pub fn ablate(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    let seed = cfg.require_seed()?;
    let grid = cfg.ablation_grid()?;
    if !matches!(grid, AblationGrid::SR(_)) && cfg.s_r == 0.0 {
        return Err(Failure::validation("s_r", "this axis only matters with simulation; set s_r > 0"));
    }
    let config = cfg.predictor()?;
    let seeds = cfg.member_seeds()?;
    let setup = PseudoHumanSetup {
        seed,
        corpus_size: cfg.corpus_size,
        n_base_dms: cfg.base_dms,
        n_test_dms: cfg.test_dms,
    };
    let data = PseudoHumanData::build(&setup)?;
    let mut schedule = cfg.schedule(seed)?;
    schedule.simulation.law = cfg.persona_law(&cfg.sim_law, data.sim_scorer.clone())?;
    let opts = EvalOptions {
        n_resamples: cfg.n_resamples,
        bootstrap_seed: rng::derive_seed(seed, &[rng::label::BOOTSTRAP]),
        config_hash: cfg.hash(),
    };
    let rows = ablation_sweep(&data, &grid, &config, &seeds, &schedule, &opts, seed)?;
    let mut csv = Vec::new();
    write_ablation_csv(&rows, &cfg.hash(), &mut csv).expect("in-memory write");
    write_file(out, &csv)?;
    println!("rows={}", rows.len());
    Ok(())
}

pub fn correlate(cfg: &RunConfig, log_a: &Path, log_b: &Path, out: &Path, curve_out: Option<&Path>) -> Result<(), Failure> {
    let a = load_log(log_a, None)?;
    let b = load_log(log_b, None)?;
    let report = correlation_report(&a, &b, cfg.min_count)?;
    let curve = improvement_curve(&a, &cfg.rules()?, false);
    let doc = json!({
        "config_hash": cfg.hash(),
        "correlation": report,
        "improvement_trend": curve.trend,
    });
    write_file(out, &json_bytes(&doc))?;
    if let Some(path) = curve_out {
        let mut csv = format!("# config_hash={}\ngames_before_defeat,win_rate,games\n", cfg.hash()).into_bytes();
        for p in &curve.points {
            writeln!(csv, "{},{},{}", p.games_before_defeat, p.win_rate, p.games).expect("in-memory write");
        }
        write_file(path, &csv)?;
    }
    println!("review_r={} history_r={}", report.review_vector_r, report.history_vector_r);
    Ok(())
}
