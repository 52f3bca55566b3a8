//! `multiples`: sieving, densities, the existence criterion, structural
//! evidence and constructions for sets of multiples.
//!
//! Exit codes: 0 success, 2 configuration error, 3 computation error,
//! 4 budget exceeded.

mod commands;
mod config;
mod error;
mod experiments;
mod input;
mod sink;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};

use crate::commands::{BuildKind, DensityMethod};
use crate::config::ExperimentConfig;
use crate::error::{config_err, CliError, CliResult};
use crate::input::{parse_floats, parse_grid, parse_list, parse_u64};
use crate::sink::Sink;

#[derive(Debug, Parser)]
#[command(name = "multiples", version, about = "Computations with sets of multiples")]
struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for artifacts; without it the main artifact goes to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Abort with exit code 4 after this many seconds.
    #[arg(long, global = true)]
    budget_seconds: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Multiples of B in the window [lo, hi).
    Sieve {
        #[arg(long)]
        spec: String,
        #[arg(long, default_value = "1", value_parser = parse_u64)]
        lo: u64,
        #[arg(long, value_parser = parse_u64)]
        hi: u64,
        /// Write the packed bit window instead of a member list.
        #[arg(long)]
        bitset: bool,
    },
    /// Density of the multiples: natural or logarithmic partials, or exact.
    Density {
        #[arg(long)]
        spec: String,
        /// Comma-separated bounds N.
        #[arg(long, default_value = "")]
        n: String,
        #[arg(long, value_enum, default_value_t = DensityMethod::Natural)]
        method: DensityMethod,
    },
    /// d(M of B cap [1, K]) over a grid of K.
    DeSeries {
        #[arg(long)]
        spec: String,
        #[arg(long)]
        k_grid: String,
        #[arg(long, value_parser = parse_u64)]
        fallback_n: Option<u64>,
    },
    /// The existence statistic S(x, eps) over grids.
    Criterion {
        #[arg(long)]
        spec: String,
        #[arg(long)]
        x_grid: String,
        #[arg(long)]
        eps_grid: String,
        #[arg(long, default_value_t = multiples::criterion::DEFAULT_TREND_THRESHOLD)]
        threshold: f64,
    },
    /// Reciprocal sum of progression primes p with e p in (x^(1-eps), x].
    GSum {
        #[arg(long)]
        scale: u64,
        #[arg(long)]
        level: u32,
        #[arg(long, default_value_t = 2)]
        cutoff: u64,
        #[arg(long)]
        x: String,
        /// Defaults to 1/2^level.
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Sum of 1/p over primes p = l mod k up to x, and its drift.
    Mertens {
        #[arg(long)]
        k: u64,
        #[arg(long)]
        l: u64,
        #[arg(long)]
        x: String,
        /// Also report the residue partition at the largest x.
        #[arg(long)]
        partition: bool,
    },
    /// Smallest periods of the B-free indicator at positions [n_lo, n_hi).
    Toeplitz {
        #[arg(long)]
        spec: String,
        #[arg(long, allow_hyphen_values = true)]
        n_lo: i64,
        #[arg(long, allow_hyphen_values = true)]
        n_hi: i64,
        #[arg(long, value_parser = parse_u64)]
        s_max: u64,
        #[arg(long, value_parser = parse_u64)]
        window: Option<u64>,
    },
    /// Smallest offset where the multiples of STAR over [0, n] occur in HOST.
    Pattern {
        #[arg(long)]
        star: String,
        #[arg(long)]
        host: String,
        #[arg(long, value_parser = parse_u64)]
        n: u64,
        #[arg(long, value_parser = parse_u64)]
        radius: u64,
    },
    /// Structural verdicts on a truncation.
    Classify {
        #[arg(long)]
        spec: String,
        #[arg(long, default_value = "1e5", value_parser = parse_u64)]
        k: u64,
        #[arg(long, default_value = "100,1000,10000")]
        k_grid: String,
        #[arg(long, default_value_t = 0.3)]
        tol: f64,
    },
    /// Run a construction and emit its family spec with the check log.
    Build {
        /// Exit with code 3 when any recorded check fails.
        #[arg(long)]
        require_checks: bool,
        #[command(subcommand)]
        kind: BuildKind,
    },
    /// Run the experiment described by --config.
    Experiment {
        /// Print the configuration schema and exit.
        #[arg(long)]
        print_schema: bool,
        /// Validate the configuration and exit.
        #[arg(long)]
        validate_only: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    // Configs are parsed and validated before any thread pool or compute.
    let experiment_cfg = match (&cli.command, &cli.config) {
        (Command::Experiment { print_schema: true, .. }, _) => {
            println!("{}", serde_json::to_string_pretty(&config::schema()).expect("schemas serialize"));
            return Ok(());
        }
        (Command::Experiment { .. }, Some(path)) => Some(ExperimentConfig::load(path)?),
        (Command::Experiment { .. }, None) => return Err(config_err("experiment needs --config")),
        (_, Some(_)) => return Err(config_err("--config is only used by the experiment subcommand")),
        (_, None) => None,
    };
    if let Command::Experiment { validate_only: true, .. } = cli.command {
        println!("config is valid");
        return Ok(());
    }
    let threads = cli.threads.or(experiment_cfg.as_ref().and_then(|c| c.threads));
    if let Some(n) = threads {
        if n == 0 {
            return Err(config_err("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Io(format!("thread pool: {e}")))?;
    }
    if let Some(s) = cli.budget_seconds {
        if !(s > 0.0 && s.is_finite()) {
            return Err(config_err("--budget-seconds must be positive"));
        }
        start_watchdog(Duration::from_secs_f64(s));
    }
    let sink = Sink::new(cli.out.clone())?;
    match &cli.command {
        Command::Sieve { spec, lo, hi, bitset } => commands::sieve(&sink, spec, *lo, *hi, *bitset),
        Command::Density { spec, n, method } => commands::density(&sink, spec, &parse_list(n)?, *method),
        Command::DeSeries { spec, k_grid, fallback_n } => {
            commands::de_series(&sink, spec, &parse_grid(k_grid)?, *fallback_n)
        }
        Command::Criterion { spec, x_grid, eps_grid, threshold } => {
            commands::criterion(&sink, spec, &parse_grid(x_grid)?, &parse_floats(eps_grid)?, *threshold)
        }
        Command::GSum { scale, level, cutoff, x, eps } => {
            commands::g_sum_cmd(&sink, *scale, *level, *cutoff, &parse_list(x)?, *eps)
        }
        Command::Mertens { k, l, x, partition } => commands::mertens(&sink, *k, *l, &parse_list(x)?, *partition),
        Command::Toeplitz { spec, n_lo, n_hi, s_max, window } => {
            commands::toeplitz(&sink, spec, *n_lo, *n_hi, *s_max, *window)
        }
        Command::Pattern { star, host, n, radius } => commands::pattern(&sink, star, host, *n, *radius),
        Command::Classify { spec, k, k_grid, tol } => commands::classify(&sink, spec, *k, &parse_grid(k_grid)?, *tol),
        Command::Build { require_checks, kind } => commands::build(&sink, kind, *require_checks),
        Command::Experiment { .. } => experiments::run(experiment_cfg.as_ref().expect("loaded above"), &sink),
    }
}

/// Budgets are wall-clock: the process exits with code 4 when time runs out.
fn start_watchdog(limit: Duration) {
    std::thread::spawn(move || {
        std::thread::sleep(limit);
        eprintln!("error: budget exceeded: {:.1} s wall-clock limit", limit.as_secs_f64());
        std::process::exit(4);
    });
}
