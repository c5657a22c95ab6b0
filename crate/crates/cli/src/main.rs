use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{ArgGroup, Parser, Subcommand};
use cmab::config::{preset, ExperimentConfig, PRESETS};
use cmab::harness::run_experiment;
use cmab::output::emit_results;

#[derive(Parser)]
#[command(name = "cmab", version, about = "Competitive multi-armed bandit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write metrics, ledgers and a summary.
    #[command(group(ArgGroup::new("source").required(true).args(["config", "preset"])))]
    Run {
        /// JSON experiment config.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Built-in experiment (see `list-presets`).
        #[arg(long)]
        preset: Option<String>,
        /// Output directory.
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Overrides the config's base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config's replication count.
        #[arg(long)]
        replications: Option<usize>,
    },
    /// Print the built-in experiment names.
    ListPresets,
}

fn run(
    config: Option<PathBuf>,
    preset_name: Option<String>,
    out: PathBuf,
    seed: Option<u64>,
    replications: Option<usize>,
) -> Result<()> {
    let mut cfg: ExperimentConfig = match (config, preset_name) {
        (Some(path), _) => {
            ExperimentConfig::from_path(&path).with_context(|| format!("loading {}", path.display()))?
        }
        (None, Some(name)) => preset(&name)?,
        (None, None) => unreachable!("clap requires a config source"),
    };
    if let Some(seed) = seed {
        cfg.base_seed = seed;
    }
    if let Some(r) = replications {
        cfg.replications = r;
    }
    cfg.validate()?;
    for warning in cfg.warnings() {
        eprintln!("warning: {warning}");
    }

    let bundle = run_experiment(&cfg)?;
    let written = emit_results(&bundle, &out).with_context(|| format!("writing results to {}", out.display()))?;
    for run in &bundle.runs {
        let s = &run.summary;
        let final_error = s.learning_error.mean.last().copied().unwrap_or(f64::NAN);
        let ir = s
            .inefficiency_ratio
            .mean
            .map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
        let median = s
            .median_convergence_round
            .map_or_else(|| "n/a".to_string(), |v| format!("{v}"));
        println!(
            "{:<14} error(T)={final_error:.4} IR={ir} PoA bound={:.4} median convergence={median}",
            s.dir, s.poa_bound
        );
    }
    println!("wrote {}", written.summary.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::ListPresets => {
            for name in PRESETS {
                println!("{name}");
            }
            Ok(())
        }
        Command::Run {
            config,
            preset,
            out,
            seed,
            replications,
        } => run(config, preset, out, seed, replications),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
