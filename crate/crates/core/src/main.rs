use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use proud::harness::{self, RunConfig};
use proud::oracle;

/// Pareto-guided diffusion sampling on analytic benchmarks.
#[derive(Debug, Parser)]
#[command(name = "proud", version)]
struct Cli {
    /// Worker threads; defaults to the number of logical CPUs.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory, overriding `output_dir` from the config.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Write per-step trace records.
    #[arg(long)]
    trace: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample once and write samples, metrics and the echoed config.
    Run(RunArgs),
    /// Expand the config's `[sweep]` table and run every grid point.
    Sweep(RunArgs),
    /// Tabulate finished runs, aggregating labels with several seeds.
    Compare {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
    },
    /// Cross-check the solvers and metrics against brute force.
    Oracle {
        #[arg(long, default_value_t = oracle::DEFAULT_ORACLE_SEED)]
        seed: u64,
    },
}

fn load(args: &RunArgs) -> proud::Result<(RunConfig, PathBuf)> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.trace {
        cfg.trace = true;
    }
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| Path::new("runs").join(cfg.label().replace(' ', "_")));
    Ok((cfg, out))
}

fn dispatch(command: Command) -> proud::Result<bool> {
    match command {
        Command::Run(args) => {
            let (cfg, out) = load(&args)?;
            let result = harness::run_experiment(&cfg, &out)?;
            let r = &result.report;
            println!(
                "{}: hv={} emd={} mean_log_likelihood={} pct_stationary={} -> {}",
                cfg.label(),
                r.hv,
                r.emd.map_or_else(|| "-".into(), |v| v.to_string()),
                r.mean_log_likelihood,
                r.pct_stationary,
                out.display()
            );
            Ok(true)
        }
        Command::Sweep(args) => {
            let (cfg, out) = load(&args)?;
            for dir in harness::sweep(&cfg, &out)? {
                println!("{}", dir.display());
            }
            Ok(true)
        }
        Command::Compare { dirs } => {
            print!("{}", harness::compare(&dirs)?);
            Ok(true)
        }
        Command::Oracle { seed } => {
            let checks = oracle::run_all(seed)?;
            for c in &checks {
                println!("{c}");
            }
            Ok(checks.iter().all(|c| c.passed))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
    {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return ExitCode::FAILURE;
        }
    };
    match pool.install(|| dispatch(cli.command)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
