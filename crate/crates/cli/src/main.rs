mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{Overrides, RunConfig};
use crate::failure::Failure;

/// Simulation-based off-policy evaluation of decision prediction in repeated
/// persuasion games.
///
/// Every run-config key can be set in a TOML file passed with `--config` and
/// overridden by the flag of the same name. Outputs carry the SHA-256 of the
/// resolved config. Exit status is 0 on success, 1 on a validation error and
/// 2 on a runtime failure; errors are printed to stderr as single
/// `error kind=... code=... message=...` lines.
#[derive(Debug, Parser)]
#[command(name = "persuade", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
    /// Worker threads; outputs do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic hotel/review corpus.
    GenCorpus {
        #[arg(long)]
        out: PathBuf,
    },
    /// Enumerate the expert strategy space and report its size.
    EnumStrategies {
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Simulate DMs playing against experts.
    Simulate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train an ensemble, optionally mixing in simulated DMs.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        /// Interaction log of the base (training) DMs.
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Evaluate a trained ensemble off-policy on unseen experts.
    Evaluate {
        #[arg(long)]
        corpus: PathBuf,
        /// Directory written by `train`.
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        train_log: PathBuf,
        #[arg(long)]
        test_log: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Leave-one-DM-out accuracy on a single log.
    Loo {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep one aspect of the simulation under the pseudo-human protocol.
    Ablate {
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare Go rates of two logs and write the improvement curve of the first.
    Correlate {
        #[arg(long)]
        log_a: PathBuf,
        #[arg(long)]
        log_b: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the improvement curve of `log_a` as CSV.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::validation("threads", "need at least one thread"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::runtime("threads", e.to_string()))?;
    }
    let cfg = RunConfig::resolve(&cli.overrides)?;
    match cli.command {
        Command::GenCorpus { out } => commands::gen_corpus(&cfg, &out),
        Command::EnumStrategies { out_dir } => commands::enum_strategies(&cfg, &out_dir),
        Command::Simulate { corpus, out } => commands::simulate(&cfg, &corpus, &out),
        Command::Train { corpus, log, out_dir } => commands::train(&cfg, &corpus, &log, &out_dir),
        Command::Evaluate {
            corpus,
            models,
            train_log,
            test_log,
            out_dir,
        } => commands::evaluate(&cfg, &corpus, &models, &train_log, &test_log, &out_dir),
        Command::Loo { corpus, log, out } => commands::loo(&cfg, &corpus, &log, &out),
        Command::Ablate { out } => commands::ablate(&cfg, &out),
        Command::Correlate { log_a, log_b, out, curve } => {
            commands::correlate(&cfg, &log_a, &log_b, &out, curve.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let f = Failure::validation("usage", e.to_string().trim());
            eprintln!("{f}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn every_config_key_has_a_documented_flag() {
        let keys = match serde_json::to_value(RunConfig::default()).unwrap() {
            serde_json::Value::Object(m) => m.into_iter().map(|(k, _)| k).collect::<Vec<_>>(),
            _ => unreachable!(),
        };
        let cmd = Cli::command();
        for key in keys {
            let flag = key.replace('_', "-");
            let arg = cmd
                .get_arguments()
                .find(|a| a.get_long() == Some(flag.as_str()))
                .unwrap_or_else(|| panic!("no flag for {key}"));
            assert!(arg.get_help().is_some(), "{key} is undocumented");
        }
    }
}
