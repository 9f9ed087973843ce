use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mdma_core::harness::{self, write_run_outputs, write_sweep_outputs, ExperimentConfig, Scheme};
use mdma_core::HarnessError;
use rayon::prelude::*;

/// Exit code when a drop stays infeasible or the config is rejected.
const EXIT_INFEASIBLE: u8 = 2;
/// Exit code when every drop ran but some allocation did not converge.
const EXIT_NOT_CONVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "mdma", version, about = "Multi-dimensional multiple access simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run drops at the configured UE count.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run only this seed instead of the configured list.
        #[arg(long)]
        seed: Option<u64>,
        /// Run only this scheme instead of the configured list.
        #[arg(long)]
        scheme: Option<Scheme>,
        /// Output directory; overrides MDMA_OUT_DIR and the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep UE counts over seeds 0..N for every configured scheme.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',')]
        ue_counts: Option<Vec<usize>>,
        /// Number of seeds, starting at 0.
        #[arg(long)]
        seeds: Option<u64>,
        #[arg(long)]
        scheme: Option<Scheme>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            log::error!("some allocations did not converge; results were written but are not trustworthy");
            ExitCode::from(EXIT_NOT_CONVERGED)
        }
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(EXIT_INFEASIBLE)
        }
    }
}

/// Returns whether every allocation converged.
fn execute(command: Command) -> Result<bool, HarnessError> {
    match command {
        Command::Run { config, seed, scheme, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seeds = vec![s];
            }
            if let Some(s) = scheme {
                cfg.schemes = vec![s];
            }
            cfg.ue_counts = vec![cfg.params.num_ues];
            cfg.validate()?;
            let dir = cfg.resolve_output_dir(out.as_deref());
            let jobs: Vec<(Scheme, u64)> = cfg.schemes.iter().flat_map(|&s| cfg.seeds.iter().map(move |&seed| (s, seed))).collect();
            let drops = jobs
                .par_iter()
                .map(|&(s, seed)| harness::run_drop(&cfg, seed, s))
                .collect::<Result<Vec<_>, _>>()?;
            for d in &drops {
                let s = &d.summary;
                log::info!(
                    "{} seed {}: utility {:.4}, cost {:.4}, power {:.3} W{}",
                    s.scheme,
                    s.seed,
                    s.mean_utility,
                    s.mean_cost,
                    s.total_power,
                    if s.converged { "" } else { " (not converged)" }
                );
            }
            write_run_outputs(&dir, &cfg, &drops)?;
            log::info!("wrote {}", dir.display());
            Ok(drops.iter().all(|d| d.summary.converged))
        }
        Command::Sweep { config, ue_counts, seeds, scheme, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(k) = ue_counts {
                cfg.ue_counts = k;
            }
            if let Some(n) = seeds {
                cfg.seeds = (0..n).collect();
            }
            if let Some(s) = scheme {
                cfg.schemes = vec![s];
            }
            let dir = cfg.resolve_output_dir(out.as_deref());
            let outcome = harness::sweep(&cfg)?;
            for r in &outcome.rows {
                log::info!(
                    "K={} {}: utility {:.4} ± {:.4}, cost {:.4} ± {:.4}, unconverged {}/{}",
                    r.num_ues,
                    r.scheme,
                    r.mean_utility,
                    r.std_utility,
                    r.mean_cost,
                    r.std_cost,
                    r.unconverged,
                    r.drops
                );
            }
            write_sweep_outputs(&dir, &cfg, &outcome)?;
            log::info!("wrote {}", dir.display());
            Ok(outcome.rows.iter().all(|r| r.unconverged == 0))
        }
    }
}
