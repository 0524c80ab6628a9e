use clap::{Parser, Subcommand};
use reservoir_ipc::acceptance::SuiteOptions;
use reservoir_ipc::commands::{
    cmd_baseline, cmd_fit, cmd_run, cmd_verify, CommandError, FitOptions,
};
use reservoir_ipc::config::{Preset, RunConfig, TaskKind, DEFAULT_P_VALUE};
use reservoir_ipc::fit::{DEFAULT_ZERO_A_TOL, DEFAULT_ZERO_SLOPE_TOL};
use std::path::PathBuf;

/// Estimate the infinite-data-length information processing capacity of
/// reservoir computers by Monte Carlo sampling and asymptotic extrapolation.
#[derive(Parser)]
#[command(name = "reservoir-ipc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment; writes results.csv and manifest.json.
    Run {
        /// INI config file (see README for the format).
        #[arg(long, conflicts_with = "preset")]
        config: Option<PathBuf>,
        /// Named preset: simple-verify, legendre1, legendre15, narma10.
        #[arg(long)]
        preset: Option<String>,
        /// Use the published experiment sizes instead of desk scale.
        #[arg(long)]
        paper_scale: bool,
        /// Output directory (defaults to the config's).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (0 = all); falls back to $IPC_LIMIT_THREADS.
        #[arg(long)]
        threads: Option<usize>,
        /// Override the base seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit the asymptote models to a results CSV; writes fit.json and
    /// plot-data files.
    Fit {
        /// Results CSV produced by `run`.
        results: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Capacity magnitude below which a fit counts as near zero.
        #[arg(long, default_value_t = DEFAULT_ZERO_A_TOL)]
        a_tol: f64,
        /// Margin by which the variance power must undershoot -1.
        #[arg(long, default_value_t = DEFAULT_ZERO_SLOPE_TOL)]
        slope_tol: f64,
        /// Also write a gnuplot script next to the plot data.
        #[arg(long)]
        gnuplot: bool,
    },
    /// Gate the largest-length training mean with the chi-square threshold
    /// and compare it with the extrapolated capacity.
    Baseline {
        /// Results CSV produced by `run`.
        results: PathBuf,
        /// Readout parameter count for the threshold.
        #[arg(long)]
        dof: u64,
        /// Chi-square tail probability.
        #[arg(long, default_value_t = DEFAULT_P_VALUE)]
        p: f64,
    },
    /// Run the acceptance checks and report pass/fail per check.
    Verify {
        /// Skip the ESN-scale experiments.
        #[arg(long)]
        quick: bool,
        /// Write each experiment's results CSV into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (0 = all); falls back to $IPC_LIMIT_THREADS.
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn env_threads() -> usize {
    std::env::var("IPC_LIMIT_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(0)
}

fn run(cli: Cli) -> Result<i32, CommandError> {
    match cli.command {
        Command::Run {
            config,
            preset,
            paper_scale,
            out,
            threads,
            seed,
        } => {
            let mut run_config = match (&config, &preset) {
                (Some(path), _) => RunConfig::from_file(path)?,
                (None, Some(name)) => Preset::from_name(name)?.config(paper_scale),
                (None, None) => RunConfig::defaults(TaskKind::Simple),
            };
            if let Some(dir) = out {
                run_config.out_dir = dir;
            }
            if let Some(threads) = threads {
                run_config.threads = threads;
            } else if run_config.threads == 0 {
                run_config.threads = env_threads();
            }
            if let Some(seed) = seed {
                run_config.seed = seed;
            }
            let output = cmd_run(&run_config)?;
            for row in &output.rows {
                println!(
                    "T={:<6} T'={:<6} N={:<6} mean_train={:.6} var_train={:.3e} \
                     mean_test={:.6} var_test={:.3e} failures={}",
                    row.t_train,
                    row.t_test,
                    row.trials,
                    row.mean_train,
                    row.var_train,
                    row.mean_test,
                    row.var_test,
                    row.failures
                );
            }
            println!("results:  {}", output.csv_path.display());
            println!("manifest: {}", output.manifest_path.display());
            Ok(0)
        }
        Command::Fit {
            results,
            out,
            a_tol,
            slope_tol,
            gnuplot,
        } => {
            let options = FitOptions {
                a_tol,
                slope_tol,
                out_dir: out.clone(),
                gnuplot,
            };
            let report = cmd_fit(&results, &options)?;
            println!(
                "a  = {:.6}\nb1 = {:.6}\nb2 = {:.6}\nd  = {:.6e}",
                report.fit.a, report.fit.b1, report.fit.b2, report.fit.d
            );
            println!(
                "variance power = {:.3} ± {:.3} ({} points, {} dropped)",
                report.slope.slope,
                report.slope.std_err,
                report.slope.points_used,
                report.slope.dropped_nonpositive
            );
            println!(
                "zero capacity: {} (|a| < {} and slope < {})",
                report.decision.is_zero,
                report.decision.a_tol,
                -1.0 - report.decision.slope_tol
            );
            if !report.dropped_log_points.is_empty() {
                println!("dropped from the log-log mean plot:");
                for p in &report.dropped_log_points {
                    println!("  {} series at length {}", p.series, p.length);
                }
            }
            println!("report: {}", out.join("fit.json").display());
            Ok(0)
        }
        Command::Baseline { results, dof, p } => {
            let report = cmd_baseline(&results, dof, p)?;
            println!("{report}");
            Ok(0)
        }
        Command::Verify {
            quick,
            out,
            threads,
        } => {
            let options = SuiteOptions {
                quick,
                threads: threads.unwrap_or_else(env_threads),
                out_dir: out,
            };
            let outcomes = cmd_verify(&options, std::io::stdout().lock())?;
            Ok(if outcomes.iter().all(|o| o.passed) {
                0
            } else {
                1
            })
        }
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(err.exit_code());
        }
    }
}
