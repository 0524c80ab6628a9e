//! Operations behind the command-line binary: run an experiment to CSV,
//! fit asymptotes from a results file, compare against the threshold-gated
//! baseline, and verify the build against its acceptance checks.

use crate::acceptance::{run_suite, CheckOutcome, SuiteOptions};
use crate::config::{ConfigError, RunConfig};
use crate::fit::{
    decide_zero_ipc, fit_means, fit_variance, loglog_slope, FitError, FitResult, SlopeFit,
    ZeroIpcDecision,
};
use crate::harness::{
    read_results_csv, run_experiment, write_results_csv, HarnessError, RunManifest, SummaryRow,
};
use crate::ipc::{chi_square_threshold, empirical_ipc, IpcError};
use serde::Serialize;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Ipc(#[from] IpcError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("cannot serialize report: {0}")]
    Json(#[from] serde_json::Error),
    #[error("results file holds no rows")]
    EmptyResults,
}

impl CommandError {
    /// Process exit code: 2 for usage/config problems, 1 for runtime
    /// failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Config(_) => 2,
            _ => 1,
        }
    }
}

/// Artifacts of a completed run.
#[derive(Debug)]
pub struct RunOutput {
    pub rows: Vec<SummaryRow>,
    pub csv_path: PathBuf,
    pub manifest_path: PathBuf,
}

/// Execute the configured experiment and persist results CSV plus a JSON
/// manifest into the config's output directory.
pub fn cmd_run(config: &RunConfig) -> Result<RunOutput, CommandError> {
    let plan = config.plan();
    let start = Instant::now();
    let rows = run_experiment(&plan)?;
    let wall = start.elapsed().as_secs_f64();

    std::fs::create_dir_all(&config.out_dir)?;
    let csv_path = config.out_dir.join("results.csv");
    let mut csv = BufWriter::new(File::create(&csv_path)?);
    write_results_csv(&rows, &mut csv)?;
    csv.flush()?;

    let manifest_path = config.out_dir.join("manifest.json");
    let manifest = RunManifest {
        code_version: env!("CARGO_PKG_VERSION"),
        plan: &plan,
        rows: rows.len(),
        total_failures: rows.iter().map(|r| r.failures).sum(),
        wall_time_seconds: wall,
    };
    let file = File::create(&manifest_path)?;
    serde_json::to_writer_pretty(BufWriter::new(file), &manifest)?;

    Ok(RunOutput {
        rows,
        csv_path,
        manifest_path,
    })
}

/// Options of the fit command.
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub a_tol: f64,
    pub slope_tol: f64,
    pub out_dir: PathBuf,
    pub gnuplot: bool,
}

/// A mean point excluded from the log-log offset plot because its distance
/// to the fitted asymptote was nonpositive.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct DroppedPoint {
    pub series: &'static str,
    pub length: u64,
}

/// Full fit report, also serialized to `fit.json`.
#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub fit: FitResult,
    pub slope: SlopeFit,
    pub decision: ZeroIpcDecision,
    pub dropped_log_points: Vec<DroppedPoint>,
}

/// Fit the asymptote models to a results CSV and emit the report plus four
/// plot-data files (means with asymptotes, offset means on log-log,
/// variances with the d/T curve, variances on log-log with the slope line).
pub fn cmd_fit(results_csv: &Path, options: &FitOptions) -> Result<FitReport, CommandError> {
    let rows = read_results_csv(BufReader::new(File::open(results_csv)?))?;
    if rows.is_empty() {
        return Err(CommandError::EmptyResults);
    }
    let means: Vec<_> = rows.iter().map(SummaryRow::mean_sample).collect();
    let vars: Vec<_> = rows.iter().map(SummaryRow::var_sample).collect();
    let mean_fit = fit_means(&means)?;
    let d = fit_variance(&vars)?;
    let slope = loglog_slope(&vars)?;
    let fit = mean_fit.with_variance(d);
    let decision = decide_zero_ipc(fit.a, slope.slope, options.a_tol, options.slope_tol);

    std::fs::create_dir_all(&options.out_dir)?;
    let dropped = write_plot_data(&rows, &fit, &slope, &options.out_dir)?;
    if options.gnuplot {
        write_gnuplot_script(&options.out_dir)?;
    }
    let report = FitReport {
        fit,
        slope,
        decision,
        dropped_log_points: dropped,
    };
    let file = File::create(options.out_dir.join("fit.json"))?;
    serde_json::to_writer_pretty(BufWriter::new(file), &report)?;
    Ok(report)
}

fn write_plot_data(
    rows: &[SummaryRow],
    fit: &FitResult,
    slope: &SlopeFit,
    dir: &Path,
) -> Result<Vec<DroppedPoint>, CommandError> {
    let mut dropped = Vec::new();

    let mut means = BufWriter::new(File::create(dir.join("means.dat"))?);
    writeln!(
        means,
        "# T mean_train asym_train Tprime mean_test asym_test"
    )?;
    for r in rows {
        writeln!(
            means,
            "{} {} {} {} {} {}",
            r.t_train,
            r.mean_train,
            fit.a + fit.b1 / r.t_train as f64,
            r.t_test,
            r.mean_test,
            fit.a - fit.b2 / r.t_test as f64,
        )?;
    }
    means.flush()?;

    // offsets from the extrapolated capacity; nonpositive values cannot sit
    // on a log axis and are reported instead of plotted
    let mut offsets = BufWriter::new(File::create(dir.join("means_offset_loglog.dat"))?);
    writeln!(
        offsets,
        "# T train_offset asym_train Tprime test_offset asym_test"
    )?;
    for r in rows {
        let train_off = r.mean_train - fit.a;
        let test_off = fit.a - r.mean_test;
        if train_off <= 0.0 {
            dropped.push(DroppedPoint {
                series: "train",
                length: r.t_train,
            });
        }
        if test_off <= 0.0 {
            dropped.push(DroppedPoint {
                series: "test",
                length: r.t_test,
            });
        }
        let fmt = |v: f64| {
            if v > 0.0 {
                v.to_string()
            } else {
                "nan".to_string()
            }
        };
        writeln!(
            offsets,
            "{} {} {} {} {} {}",
            r.t_train,
            fmt(train_off),
            fit.b1 / r.t_train as f64,
            r.t_test,
            fmt(test_off),
            fit.b2 / r.t_test as f64,
        )?;
    }
    offsets.flush()?;

    let mut vars = BufWriter::new(File::create(dir.join("variances.dat"))?);
    writeln!(
        vars,
        "# T var_train err_train asym_train Tprime var_test err_test asym_test"
    )?;
    for r in rows {
        writeln!(
            vars,
            "{} {} {} {} {} {} {} {}",
            r.t_train,
            r.var_train,
            r.err_var_train,
            fit.d / r.t_train as f64,
            r.t_test,
            r.var_test,
            r.err_var_test,
            fit.d / r.t_test as f64,
        )?;
    }
    vars.flush()?;

    let mut loglog = BufWriter::new(File::create(dir.join("variances_loglog.dat"))?);
    writeln!(
        loglog,
        "# T var_train slope_line Tprime var_test slope_line"
    )?;
    let line = |t: u64| (slope.intercept + slope.slope * (t as f64).ln()).exp();
    for r in rows {
        let fmt = |v: f64| {
            if v > 0.0 {
                v.to_string()
            } else {
                "nan".to_string()
            }
        };
        writeln!(
            loglog,
            "{} {} {} {} {} {}",
            r.t_train,
            fmt(r.var_train),
            line(r.t_train),
            r.t_test,
            fmt(r.var_test),
            line(r.t_test),
        )?;
    }
    loglog.flush()?;

    Ok(dropped)
}

fn write_gnuplot_script(dir: &Path) -> Result<(), CommandError> {
    let mut gp = BufWriter::new(File::create(dir.join("plot.gp"))?);
    write!(
        gp,
        "set datafile missing 'nan'\n\
         set terminal svg size 1200,900\n\
         set output 'ipc_fit.svg'\n\
         set multiplot layout 2,2\n\
         set xlabel 'T'\n\
         set title 'capacity means and fitted asymptotes'\n\
         plot 'means.dat' u 1:2 w p t 'train', '' u 1:3 w l t 'a+b1/T', \\\n\
              '' u 4:5 w p t 'test', '' u 4:6 w l t 'a-b2/Tp'\n\
         set logscale xy\n\
         set title 'distance to the extrapolated capacity'\n\
         plot 'means_offset_loglog.dat' u 1:2 w p t 'train', '' u 1:3 w l t 'b1/T', \\\n\
              '' u 4:5 w p t 'test', '' u 4:6 w l t 'b2/Tp'\n\
         unset logscale\n\
         set title 'capacity variances and d/T'\n\
         plot 'variances.dat' u 1:2:3 w yerrorbars t 'train', '' u 1:4 w l t 'd/T', \\\n\
              '' u 5:6:7 w yerrorbars t 'test', '' u 5:8 w l t 'd/Tp'\n\
         set logscale xy\n\
         set title 'variance decay power'\n\
         plot 'variances_loglog.dat' u 1:2 w p t 'train', '' u 4:5 w p t 'test', \\\n\
              '' u 1:3 w l t 'fitted power'\n\
         unset multiplot\n"
    )?;
    gp.flush()?;
    Ok(())
}

/// Side-by-side comparison against the threshold-gated estimate at the
/// largest available length.
#[derive(Debug, Clone, Serialize)]
pub struct BaselineReport {
    pub t: u64,
    pub dof: u64,
    pub tail_probability: f64,
    pub threshold: f64,
    pub mean_train: f64,
    /// Mean training capacity gated to zero below the threshold.
    pub empirical: f64,
    /// Extrapolated capacity fitted from the same rows.
    pub fitted_a: f64,
}

impl std::fmt::Display for BaselineReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "largest length       T = {}", self.t)?;
        writeln!(
            f,
            "threshold            {:.6} (dof {}, tail {:.0e})",
            self.threshold, self.dof, self.tail_probability
        )?;
        writeln!(f, "mean training IPC    {:.6}", self.mean_train)?;
        writeln!(f, "empirical IPC        {:.6}", self.empirical)?;
        write!(f, "extrapolated IPC     {:.6}", self.fitted_a)
    }
}

/// Gate the largest-length training mean with the chi-square threshold and
/// put it next to the extrapolated capacity from the same results file.
pub fn cmd_baseline(results_csv: &Path, dof: u64, p: f64) -> Result<BaselineReport, CommandError> {
    let rows = read_results_csv(BufReader::new(File::open(results_csv)?))?;
    let last = rows
        .iter()
        .max_by_key(|r| r.t_train)
        .ok_or(CommandError::EmptyResults)?;
    let threshold = chi_square_threshold(dof, p, last.t_train)?;
    let empirical = empirical_ipc(last.mean_train, threshold);
    let means: Vec<_> = rows.iter().map(SummaryRow::mean_sample).collect();
    let fitted_a = fit_means(&means)?.a;
    Ok(BaselineReport {
        t: last.t_train,
        dof,
        tail_probability: p,
        threshold,
        mean_train: last.mean_train,
        empirical,
        fitted_a,
    })
}

/// Run the acceptance suite, printing one pass/fail line per check.
///
/// Returns the outcomes; the run passed if every outcome did.
pub fn cmd_verify(
    options: &SuiteOptions,
    mut out: impl Write,
) -> Result<Vec<CheckOutcome>, CommandError> {
    let outcomes = run_suite(options)?;
    let total = outcomes.len();
    for (idx, outcome) in outcomes.iter().enumerate() {
        writeln!(
            out,
            "[{}/{}] {} {} — {}",
            idx + 1,
            total,
            if outcome.passed { "PASS" } else { "FAIL" },
            outcome.name,
            outcome.detail
        )?;
    }
    let passed = outcomes.iter().filter(|o| o.passed).count();
    writeln!(out, "{passed}/{total} checks passed")?;
    Ok(outcomes)
}
