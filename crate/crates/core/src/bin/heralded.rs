//! Command-line front end: `heralded <optimize|sweep|robustness|validate>`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use heralded::runner::{self, ExperimentConfig, RunOptions};
use heralded::validate::ValidationOptions;
use heralded::{Error, Result};

#[derive(Parser)]
#[command(name = "heralded", version, about = "Optimize heralded Gaussian circuits for dual-rail entangled states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize one circuit; writes trace.jsonl and summary.json.
    Optimize(JobArgs),
    /// Optimize every (additions, subtractions, heralds) cell; writes sweep.csv.
    Sweep(JobArgs),
    /// Perturb a saved optimum; writes robustness.csv.
    Robustness(JobArgs),
    /// Run the oracle suite.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct Common {
    /// Override the RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, env = "HERALDED_WORKERS")]
    workers: Option<usize>,
    /// Print nothing on success.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct JobArgs {
    /// TOML experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ValidateArgs {
    /// Write the report as JSON into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:.6}"))
}

fn job(args: &JobArgs) -> Result<(ExperimentConfig, RunOptions)> {
    if args.common.workers == Some(0) {
        return Err(Error::Config("--workers must be positive".into()));
    }
    let config = ExperimentConfig::load(&args.config)?;
    let run = RunOptions { out: args.out.clone(), seed: args.common.seed, workers: args.common.workers };
    Ok((config, run))
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Optimize(args) => {
            let (config, run) = job(&args)?;
            let s = runner::run_optimize(&config, &run)?;
            if !args.common.quiet {
                println!(
                    "best restart {} of {}: cost {:.6}, p {:.6e}, F {:.6}, p_eff {}, F_eff {}, p/p_gadget {:.6e}",
                    s.best_restart,
                    s.restarts.len(),
                    s.best_cost,
                    s.metrics.p,
                    s.metrics.fidelity,
                    fmt_opt(s.metrics.p_effective),
                    fmt_opt(s.metrics.fidelity_effective),
                    s.p_given_gadgets
                );
                println!("wrote {} ({:.1} s)", s.config.output_dir.display(), s.wall_time_s);
            }
        }
        Command::Sweep(args) => {
            let (config, run) = job(&args)?;
            let rows = runner::run_sweep(&config, &run)?;
            if !args.common.quiet {
                println!("n_add n_sub n_herald  p            F         feasible");
                for r in &rows {
                    println!(
                        "{:>5} {:>5} {:>8}  {:<12} {:<9} {}",
                        r.n_add,
                        r.n_sub,
                        r.n_herald,
                        r.p.map_or_else(|| "-".into(), |v| format!("{v:.4e}")),
                        r.fidelity.map_or_else(|| "-".into(), |v| format!("{v:.5}")),
                        r.feasible
                    );
                }
            }
        }
        Command::Robustness(args) => {
            let (config, run) = job(&args)?;
            let rows = runner::run_robustness(&config, &run)?;
            if !args.common.quiet {
                let mut levels: Vec<f64> = rows.iter().map(|r| r.delta_level).collect();
                levels.dedup();
                for d in levels {
                    let level: Vec<_> = rows.iter().filter(|r| r.delta_level == d).collect();
                    let max_p = level.iter().map(|r| r.dp_rel.abs()).fold(0.0, f64::max);
                    let max_f = level.iter().map(|r| r.df_rel.abs()).fold(0.0, f64::max);
                    println!("delta {d}: {} trials, max |dp/p| {max_p:.3e}, max |dF/F| {max_f:.3e}", level.len());
                }
            }
        }
        Command::Validate(args) => {
            if args.common.workers == Some(0) {
                return Err(Error::Config("--workers must be positive".into()));
            }
            let mut options = ValidationOptions::default();
            if let Some(seed) = args.common.seed {
                options.seed = seed;
            }
            let report = runner::run_validate(&options, args.common.workers)?;
            if let Some(dir) = &args.out {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join("validation.json"), serde_json::to_string_pretty(&report)?)?;
            }
            if !args.common.quiet || !report.passed() {
                for c in &report.checks {
                    println!("{c}");
                }
            }
            if !report.passed() {
                let failed: Vec<_> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
                return Err(Error::Validation(failed.join(", ")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = runner::exit_code(&e);
            eprintln!("error: {e}");
            ExitCode::from(code as u8)
        }
    }
}
