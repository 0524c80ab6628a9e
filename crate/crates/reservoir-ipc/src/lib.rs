//! Estimation of the true (infinite-data-length) information processing
//! capacity of reservoir computing systems.
//!
//! The training IPC of a finite data segment overshoots its infinite-length
//! limit by `O(1/T)` and the test IPC undershoots it by `O(1/T')`. This crate
//! runs Monte Carlo trials over a grid of segment lengths, fits the asymptotic
//! models `a + b1/T` (train), `a - b2/T'` (test) and `d/T` (variance) by
//! weighted least squares, and reports the extrapolated true IPC `a` together
//! with a variance-power rule that flags capacities that vanish in the limit.
//!
//! Module map:
//! - [`tasks`] — input processes and benchmark targets (Legendre products,
//!   NARMA10),
//! - [`esn`] — random echo state networks and the analytic one-node model,
//! - [`ipc`] — streaming moment accumulation, optimal readout, training/test
//!   IPC and the chi-square empirical-IPC gate,
//! - [`fit`] — asymptote fitting, zero-IPC decision and the analytic
//!   coefficient construction,
//! - [`harness`] — deterministic parallel Monte Carlo driver and results
//!   persistence,
//! - [`config`] / [`commands`] — run configuration, presets and the
//!   operations behind the `reservoir-ipc` binary.
//!
//! ```
//! use reservoir_ipc::harness::{run_experiment, ExperimentPlan, SummaryRow, TaskSpec};
//! use reservoir_ipc::{fit_means, fit_variance};
//!
//! let plan = ExperimentPlan {
//!     task: TaskSpec::Simple,
//!     reservoir: None,
//!     t_grid: vec![100, 200, 400],
//!     ratio_num: 2,
//!     ratio_den: 1,
//!     trials: 200,
//!     washout: 50,
//!     base_seed: 29,
//!     threads: 1,
//!     fix_reservoir: false,
//! };
//! let rows = run_experiment(&plan).unwrap();
//! let means: Vec<_> = rows.iter().map(SummaryRow::mean_sample).collect();
//! let vars: Vec<_> = rows.iter().map(SummaryRow::var_sample).collect();
//! let fit = fit_means(&means).unwrap().with_variance(fit_variance(&vars).unwrap());
//! // the one-node model's true capacity is 4/13
//! assert!((fit.a - 4.0 / 13.0).abs() < 0.05);
//! ```

pub mod acceptance;
pub mod commands;
pub mod config;
pub mod esn;
pub mod fit;
pub mod harness;
pub mod ipc;
pub mod seed;
pub mod special;
pub mod tasks;

pub use esn::{build_esn, esn_step, run_washout, EsnConfig, EsnWeights, ReservoirState};
pub use fit::{
    asymptotic_coefficients, decide_zero_ipc, fit_means, fit_variance, loglog_slope,
    variance_of_variance, FitResult, MeanSample, TheoryTerms, VarSample, ZeroIpcDecision,
};
pub use harness::{run_experiment, run_trial, ExperimentPlan, SummaryRow, TaskSpec};
pub use ipc::{chi_square_threshold, empirical_ipc, IpcSamplePair, MomentAccumulator};
