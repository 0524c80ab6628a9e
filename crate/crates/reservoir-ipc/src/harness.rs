//! Monte Carlo driver: runs seeded trials over a grid of data lengths and
//! reduces them to per-length summary rows.
//!
//! Every trial is a pure function of `(plan, base_seed, T, trial_index)`;
//! trials execute in parallel but are reduced in trial-index order, so a run
//! produces bitwise-identical output under any thread count.

use crate::esn::{
    build_esn, esn_step, run_washout, simple_model_step, simple_model_target, EsnConfig, EsnError,
    ReservoirState,
};
use crate::fit::{variance_of_variance, MeanSample, VarSample};
use crate::ipc::{IpcError, IpcSamplePair, MomentAccumulator};
use crate::seed::{derive_rng, role};
use crate::tasks::{
    legendre_target, narma10_step, InputDistribution, InputHistory, InputSpec, LegendreTaskSpec,
    Narma10Params, Narma10State, TaskError,
};
use nalgebra::DVector;
use rand::distributions::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use thiserror::Error;

/// Default NARMA10 settling length folded into the washout.
pub const DEFAULT_NARMA_WARMUP: u64 = 200;

/// Fraction of failed trials (per length) beyond which a run aborts.
const MAX_FAILURE_FRACTION: f64 = 0.01;

const RESULTS_CSV_VERSION: &str = "# ipc_results_v1";
const RESULTS_CSV_HEADER: &str =
    "T,Tprime,N,mean_train,var_train,mean_test,var_test,err_var_train,err_var_test,failures";

#[derive(Debug, Error)]
pub enum TrialError {
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Esn(#[from] EsnError),
    #[error(transparent)]
    Ipc(#[from] IpcError),
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment plan: {0}")]
    InvalidPlan(String),
    #[error("{failures} of {trials} trials failed at T = {t} (limit {limit:.0}%): {first}")]
    TooManyFailures {
        t: u64,
        failures: u64,
        trials: u64,
        limit: f64,
        first: String,
    },
    #[error("variance needs at least 2 values, got {0}")]
    NotEnoughForVariance(usize),
    #[error("could not build thread pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("results file corrupt: {0}")]
    Csv(String),
}

/// Which target sequence a trial reproduces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskSpec {
    /// Analytic one-node model: geometric input filter, target `1 + x`.
    Simple,
    /// Product of Legendre polynomials of delayed inputs, learned by an ESN.
    Legendre(LegendreTaskSpec),
    /// NARMA10 recursion, learned by an ESN.
    Narma10 {
        params: Narma10Params,
        /// Settling steps for the recursion before data collection; the
        /// effective transient is the larger of this and the plan washout.
        warmup: u64,
    },
}

impl TaskSpec {
    /// Input law driving the task.
    pub fn input_spec(&self) -> InputSpec {
        let distribution = match self {
            TaskSpec::Narma10 { .. } => InputDistribution::UniformPositive,
            _ => InputDistribution::UniformSymmetric,
        };
        InputSpec::new(distribution, 1).expect("dimension 1 is valid")
    }

    fn needs_reservoir(&self) -> bool {
        !matches!(self, TaskSpec::Simple)
    }
}

/// Everything needed to reproduce an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub task: TaskSpec,
    /// Reservoir draw specification; `None` runs the analytic model.
    pub reservoir: Option<EsnConfig>,
    /// Training lengths; sorted ascending, duplicates rejected.
    pub t_grid: Vec<u64>,
    /// Test-to-training length ratio T'/T as a rational.
    pub ratio_num: u64,
    pub ratio_den: u64,
    /// Trials per grid point (at least 2 for an unbiased variance).
    pub trials: u64,
    /// Transient steps discarded before data collection.
    pub washout: u64,
    pub base_seed: u64,
    /// Worker threads; 0 picks the rayon default.
    pub threads: usize,
    /// Reuse one reservoir draw across trials instead of redrawing per trial.
    pub fix_reservoir: bool,
}

impl ExperimentPlan {
    /// Validate and normalize (sorts the grid so shuffled input is accepted).
    pub fn validated(mut self) -> Result<Self, HarnessError> {
        if self.t_grid.is_empty() {
            return Err(HarnessError::InvalidPlan("length grid is empty".into()));
        }
        self.t_grid.sort_unstable();
        let before = self.t_grid.len();
        self.t_grid.dedup();
        if self.t_grid.len() != before {
            return Err(HarnessError::InvalidPlan(
                "length grid has duplicates".into(),
            ));
        }
        if self.t_grid[0] == 0 {
            return Err(HarnessError::InvalidPlan("lengths must be positive".into()));
        }
        if self.trials < 2 {
            return Err(HarnessError::InvalidPlan(
                "need at least 2 trials for an unbiased variance".into(),
            ));
        }
        if self.ratio_num == 0 || self.ratio_den == 0 {
            return Err(HarnessError::InvalidPlan(
                "length ratio must be positive".into(),
            ));
        }
        match (&self.task, &self.reservoir) {
            (task, None) if task.needs_reservoir() => {
                return Err(HarnessError::InvalidPlan(format!(
                    "task {task:?} needs a reservoir config"
                )));
            }
            (TaskSpec::Simple, Some(_)) => {
                return Err(HarnessError::InvalidPlan(
                    "the analytic model takes no reservoir config".into(),
                ));
            }
            (_, Some(cfg)) => {
                cfg.validate()
                    .map_err(|e| HarnessError::InvalidPlan(e.to_string()))?;
                if cfg.input_dim != 1 {
                    return Err(HarnessError::InvalidPlan(
                        "built-in tasks drive one input dimension".into(),
                    ));
                }
            }
            _ => {}
        }
        Ok(self)
    }

    /// Test length for a training length, rounded to the nearest integer.
    pub fn t_test_for(&self, t: u64) -> u64 {
        ((t * self.ratio_num + self.ratio_den / 2) / self.ratio_den).max(1)
    }

    /// Readout parameter count used for chi-square thresholds: the hidden
    /// node count for ESN tasks, 1 for the analytic model.
    pub fn default_dof(&self) -> u64 {
        self.reservoir.as_ref().map_or(1, |c| c.nodes as u64)
    }

    /// Transient actually discarded, including task settling time.
    fn effective_washout(&self) -> u64 {
        match &self.task {
            TaskSpec::Narma10 { warmup, .. } => self.washout.max(*warmup),
            _ => self.washout,
        }
    }
}

/// One summary row of an experiment (one grid point).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub t_train: u64,
    pub t_test: u64,
    /// Successful trials behind the statistics.
    pub trials: u64,
    pub mean_train: f64,
    pub var_train: f64,
    pub mean_test: f64,
    pub var_test: f64,
    /// One-sigma error bars of the variance estimates.
    pub err_var_train: f64,
    pub err_var_test: f64,
    pub failures: u64,
}

impl SummaryRow {
    pub fn mean_sample(&self) -> MeanSample {
        MeanSample {
            t_train: self.t_train,
            t_test: self.t_test,
            mean_train: self.mean_train,
            mean_test: self.mean_test,
            trials: self.trials,
        }
    }

    pub fn var_sample(&self) -> VarSample {
        VarSample {
            t_train: self.t_train,
            t_test: self.t_test,
            var_train: self.var_train,
            var_test: self.var_test,
            trials: self.trials,
        }
    }
}

/// Run one trial: a fresh input stream drives the washout, a training
/// segment of length `t`, and a test segment of length `t' = ratio * t`.
///
/// The result depends only on `(plan, t, trial_index)` through derived
/// random streams, never on scheduling.
pub fn run_trial(
    plan: &ExperimentPlan,
    t: u64,
    trial_index: u64,
) -> Result<IpcSamplePair, TrialError> {
    let t_test = plan.t_test_for(t);
    match &plan.task {
        TaskSpec::Simple => simple_trial(plan, t, t_test, trial_index),
        _ => esn_trial(plan, t, t_test, trial_index),
    }
}

fn simple_trial(
    plan: &ExperimentPlan,
    t: u64,
    t_test: u64,
    trial_index: u64,
) -> Result<IpcSamplePair, TrialError> {
    let mut rng = derive_rng(plan.base_seed, &[t, trial_index, role::INPUT]);
    let law = plan.task.input_spec().component_law();
    let mut draw = move || law.sample(&mut rng);

    let state = run_washout(0.0, plan.effective_washout(), |x| {
        simple_model_step(x, draw())
    });

    let mut fill =
        |acc: &mut MomentAccumulator, steps: u64, mut x: f64| -> Result<f64, TrialError> {
            for _ in 0..steps {
                x = simple_model_step(x, draw());
                acc.accumulate_scalar(x, simple_model_target(x))?;
            }
            Ok(x)
        };
    let mut train = MomentAccumulator::new(1, 1);
    let mut test = MomentAccumulator::new(1, 1);
    let state = fill(&mut train, t, state)?;
    fill(&mut test, t_test, state)?;

    Ok(IpcSamplePair {
        t_train: t,
        t_test,
        c_train: train.training_ipc()?,
        c_test: train.test_ipc(&test)?,
    })
}

fn esn_trial(
    plan: &ExperimentPlan,
    t: u64,
    t_test: u64,
    trial_index: u64,
) -> Result<IpcSamplePair, TrialError> {
    let config = plan
        .reservoir
        .as_ref()
        .expect("validated plan has a reservoir");
    let mut weight_rng = if plan.fix_reservoir {
        derive_rng(plan.base_seed, &[role::FIXED_RESERVOIR])
    } else {
        derive_rng(plan.base_seed, &[t, trial_index, role::RESERVOIR])
    };
    let weights = build_esn(config, &mut weight_rng)?;

    let mut input_rng = derive_rng(plan.base_seed, &[t, trial_index, role::INPUT]);
    let law = plan.task.input_spec().component_law();

    let (mut legendre, mut narma): (
        Option<&LegendreTaskSpec>,
        Option<(Narma10Params, Narma10State)>,
    ) = (None, None);
    let mut history = InputHistory::new(0);
    match &plan.task {
        TaskSpec::Legendre(spec) => {
            legendre = Some(spec);
            history = InputHistory::new(spec.max_delay());
        }
        TaskSpec::Narma10 { params, .. } => narma = Some((*params, Narma10State::new())),
        TaskSpec::Simple => unreachable!("simple trials take the scalar path"),
    }

    let washout = plan.effective_washout();
    let d_feature = config.nodes + 1;
    let mut train = MomentAccumulator::new(d_feature, 1);
    let mut test = MomentAccumulator::new(d_feature, 1);
    let mut state = ReservoirState::zero(config.nodes);
    let mut prev_input = DVector::zeros(1);
    let mut target = DVector::zeros(1);

    for step in 1..=(washout + t + t_test) {
        let u = law.sample(&mut input_rng);
        state = esn_step(&weights, &state, &prev_input);
        let collecting = step > washout;

        let mut y = None;
        if let Some((params, narma_state)) = narma.as_mut() {
            // the recursion advances every step so its memory is genuine
            y = Some(narma10_step(narma_state, params, u)?);
        } else if let Some(spec) = legendre {
            if collecting {
                y = Some(legendre_target(spec, &history)?);
            }
        }

        if collecting {
            target[0] = y.expect("target computed for every collected step");
            let acc = if step <= washout + t {
                &mut train
            } else {
                &mut test
            };
            acc.accumulate(&state.augmented(), &target)?;
        }

        history.push(u);
        prev_input[0] = u;
    }

    Ok(IpcSamplePair {
        t_train: t,
        t_test,
        c_train: train.training_ipc()?,
        c_test: train.test_ipc(&test)?,
    })
}

fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0_f64;
    let mut compensation = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            compensation += (sum - t) + v;
        } else {
            compensation += (v - t) + sum;
        }
        sum = t;
    }
    sum + compensation
}

/// Sample mean and unbiased variance by a compensated two-pass scheme.
pub fn summarize(values: &[f64]) -> Result<(f64, f64), HarnessError> {
    if values.len() < 2 {
        return Err(HarnessError::NotEnoughForVariance(values.len()));
    }
    let n = values.len() as f64;
    let mean = neumaier_sum(values.iter().copied()) / n;
    let sum_sq = neumaier_sum(values.iter().map(|&v| (v - mean) * (v - mean)));
    Ok((mean, sum_sq / (n - 1.0)))
}

fn reduce_trials(
    plan: &ExperimentPlan,
    t: u64,
    results: Vec<Result<IpcSamplePair, TrialError>>,
) -> Result<SummaryRow, HarnessError> {
    let trials = results.len() as u64;
    let failures = results.iter().filter(|r| r.is_err()).count() as u64;
    if failures as f64 > MAX_FAILURE_FRACTION * trials as f64 {
        let first = results
            .iter()
            .find_map(|r| r.as_ref().err().map(|e| e.to_string()))
            .unwrap_or_default();
        return Err(HarnessError::TooManyFailures {
            t,
            failures,
            trials,
            limit: MAX_FAILURE_FRACTION * 100.0,
            first,
        });
    }
    // reduction order is pinned by trial index (collect preserves it)
    let pairs: Vec<IpcSamplePair> = results.into_iter().flatten().collect();
    let train: Vec<f64> = pairs.iter().map(|p| p.c_train).collect();
    let test: Vec<f64> = pairs.iter().map(|p| p.c_test).collect();
    let (mean_train, var_train) = summarize(&train)?;
    let (mean_test, var_test) = summarize(&test)?;
    let n = pairs.len() as u64;
    let err_var_train = variance_of_variance(var_train, n)
        .map_err(|e| HarnessError::InvalidPlan(e.to_string()))?
        .sqrt();
    let err_var_test = variance_of_variance(var_test, n)
        .map_err(|e| HarnessError::InvalidPlan(e.to_string()))?
        .sqrt();
    Ok(SummaryRow {
        t_train: t,
        t_test: plan.t_test_for(t),
        trials: n,
        mean_train,
        var_train,
        mean_test,
        var_test,
        err_var_train,
        err_var_test,
        failures,
    })
}

/// Run the full grid. Rows come back sorted by training length; the output
/// is a pure function of the plan.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<Vec<SummaryRow>, HarnessError> {
    let plan = plan.clone().validated()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.threads)
        .build()
        .map_err(|e| HarnessError::ThreadPool(e.to_string()))?;
    pool.install(|| {
        plan.t_grid
            .iter()
            .map(|&t| {
                let results: Vec<Result<IpcSamplePair, TrialError>> = (0..plan.trials)
                    .into_par_iter()
                    .map(|i| run_trial(&plan, t, i))
                    .collect();
                reduce_trials(&plan, t, results)
            })
            .collect()
    })
}

/// Write summary rows as versioned CSV. Floats use the shortest
/// representation that round-trips, so rewriting parsed rows is lossless.
pub fn write_results_csv<W: Write>(rows: &[SummaryRow], mut out: W) -> Result<(), HarnessError> {
    writeln!(out, "{RESULTS_CSV_VERSION}")?;
    writeln!(out, "{RESULTS_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.t_train,
            r.t_test,
            r.trials,
            r.mean_train,
            r.var_train,
            r.mean_test,
            r.var_test,
            r.err_var_train,
            r.err_var_test,
            r.failures
        )?;
    }
    Ok(())
}

/// Read rows written by [`write_results_csv`]; unknown schema versions are
/// refused rather than guessed at.
pub fn read_results_csv<R: BufRead>(reader: R) -> Result<Vec<SummaryRow>, HarnessError> {
    let mut lines = reader.lines();
    let version = lines
        .next()
        .ok_or_else(|| HarnessError::Csv("empty file".into()))?
        .map_err(HarnessError::Io)?;
    if version.trim() != RESULTS_CSV_VERSION {
        return Err(HarnessError::Csv(format!(
            "unknown schema version `{}` (expected `{}`)",
            version.trim(),
            RESULTS_CSV_VERSION
        )));
    }
    let header = lines
        .next()
        .ok_or_else(|| HarnessError::Csv("missing header".into()))?
        .map_err(HarnessError::Io)?;
    if header.trim() != RESULTS_CSV_HEADER {
        return Err(HarnessError::Csv(format!(
            "unexpected header `{}`",
            header.trim()
        )));
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(HarnessError::Io)?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != 10 {
            return Err(HarnessError::Csv(format!(
                "row {} has {} fields, expected 10",
                lineno + 3,
                fields.len()
            )));
        }
        let parse_u = |s: &str, what: &str| -> Result<u64, HarnessError> {
            s.parse()
                .map_err(|e| HarnessError::Csv(format!("{what}: {e}")))
        };
        let parse_f = |s: &str, what: &str| -> Result<f64, HarnessError> {
            s.parse()
                .map_err(|e| HarnessError::Csv(format!("{what}: {e}")))
        };
        rows.push(SummaryRow {
            t_train: parse_u(fields[0], "T")?,
            t_test: parse_u(fields[1], "Tprime")?,
            trials: parse_u(fields[2], "N")?,
            mean_train: parse_f(fields[3], "mean_train")?,
            var_train: parse_f(fields[4], "var_train")?,
            mean_test: parse_f(fields[5], "mean_test")?,
            var_test: parse_f(fields[6], "var_test")?,
            err_var_train: parse_f(fields[7], "err_var_train")?,
            err_var_test: parse_f(fields[8], "err_var_test")?,
            failures: parse_u(fields[9], "failures")?,
        });
    }
    Ok(rows)
}

/// Metadata recorded alongside a results file.
#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub code_version: &'static str,
    pub plan: &'a ExperimentPlan,
    pub rows: usize,
    pub total_failures: u64,
    pub wall_time_seconds: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::derive_rng;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn simple_plan() -> ExperimentPlan {
        ExperimentPlan {
            task: TaskSpec::Simple,
            reservoir: None,
            t_grid: vec![50, 80],
            ratio_num: 2,
            ratio_den: 1,
            trials: 8,
            washout: 50,
            base_seed: 1234,
            threads: 1,
            fix_reservoir: false,
        }
    }

    #[test]
    fn summarize_examples() {
        assert_eq!(summarize(&[1.0, 1.0, 1.0]).unwrap(), (1.0, 0.0));
        assert_eq!(summarize(&[0.0, 2.0]).unwrap(), (1.0, 2.0));
        assert!(matches!(
            summarize(&[1.0]),
            Err(HarnessError::NotEnoughForVariance(1))
        ));
    }

    #[test]
    fn summarize_is_shift_stable() {
        let mut rng = derive_rng(40, &[]);
        let base: Vec<f64> = (0..1_000_000).map(|_| rng.gen_range(0.0..1.0)).collect();
        let shifted: Vec<f64> = base.iter().map(|v| v + 1e6).collect();
        let (_, var_base) = summarize(&base).unwrap();
        let (mean_shifted, var_shifted) = summarize(&shifted).unwrap();
        assert_relative_eq!(var_shifted, var_base, max_relative = 1e-8);
        assert_relative_eq!(
            mean_shifted - 1e6,
            base.iter().sum::<f64>() / 1e6,
            epsilon = 1e-6
        );
    }

    #[test]
    fn trivial_perfect_task_gives_unit_means_zero_variance() {
        // two fabricated trials whose target is exactly the feature
        let plan = simple_plan();
        let make = || {
            let mut train = MomentAccumulator::new(1, 1);
            let mut test = MomentAccumulator::new(1, 1);
            let mut rng = derive_rng(41, &[]);
            for _ in 0..10 {
                let x = rng.gen_range(0.5..1.5);
                train.accumulate_scalar(x, x).unwrap();
                let x = rng.gen_range(0.5..1.5);
                test.accumulate_scalar(x, x).unwrap();
            }
            Ok(IpcSamplePair {
                t_train: 50,
                t_test: 100,
                c_train: train.training_ipc().unwrap(),
                c_test: train.test_ipc(&test).unwrap(),
            })
        };
        let row = reduce_trials(&plan, 50, vec![make(), make()]).unwrap();
        assert_eq!((row.mean_train, row.var_train), (1.0, 0.0));
        assert_eq!((row.mean_test, row.var_test), (1.0, 0.0));
        assert_eq!(row.failures, 0);
    }

    #[test]
    fn trial_is_deterministic_and_in_range() {
        let plan = simple_plan();
        let a = run_trial(&plan, 80, 3).unwrap();
        let b = run_trial(&plan, 80, 3).unwrap();
        assert_eq!(a, b);
        assert!((0.0..=1.0).contains(&a.c_train));
        assert!(a.c_test <= 1.0);
        assert_eq!(a.t_test, 160);
    }

    #[test]
    fn experiment_is_thread_count_invariant() {
        let one = run_experiment(&ExperimentPlan {
            threads: 1,
            ..simple_plan()
        })
        .unwrap();
        let four = run_experiment(&ExperimentPlan {
            threads: 4,
            ..simple_plan()
        })
        .unwrap();
        assert_eq!(one, four);
        let mut csv_one = Vec::new();
        let mut csv_four = Vec::new();
        write_results_csv(&one, &mut csv_one).unwrap();
        write_results_csv(&four, &mut csv_four).unwrap();
        assert_eq!(csv_one, csv_four);
    }

    #[test]
    fn shuffled_grid_sorts_to_identical_rows() {
        let sorted = run_experiment(&simple_plan()).unwrap();
        let shuffled = run_experiment(&ExperimentPlan {
            t_grid: vec![80, 50],
            ..simple_plan()
        })
        .unwrap();
        assert_eq!(sorted, shuffled);
        assert!(sorted.windows(2).all(|w| w[0].t_train < w[1].t_train));
    }

    #[test]
    fn simple_model_mean_sits_on_the_known_asymptote() {
        // mean training capacity at T = 600 approaches 4/13 + b1/600; a CLT
        // band of three standard errors covers the Monte Carlo noise
        let plan = ExperimentPlan {
            t_grid: vec![600],
            trials: 10_000,
            threads: 0,
            ..simple_plan()
        };
        let rows = run_experiment(&plan).unwrap();
        let row = &rows[0];
        let predicted = 4.0 / 13.0 + 0.1674101046882112 / 600.0;
        let se = (row.var_train / row.trials as f64).sqrt();
        assert!(
            (row.mean_train - predicted).abs() < 3.0 * se,
            "mean {} vs predicted {predicted} (se {se})",
            row.mean_train
        );
    }

    #[test]
    fn failure_accounting_aborts_diverging_tasks() {
        let plan = ExperimentPlan {
            task: TaskSpec::Narma10 {
                params: Narma10Params {
                    gamma: 1e9,
                    ..Narma10Params::default()
                },
                warmup: 10,
            },
            reservoir: Some(EsnConfig {
                nodes: 5,
                ..EsnConfig::default()
            }),
            t_grid: vec![30],
            ratio_num: 1,
            ratio_den: 1,
            trials: 4,
            washout: 10,
            base_seed: 7,
            threads: 1,
            fix_reservoir: false,
        };
        match run_experiment(&plan) {
            Err(HarnessError::TooManyFailures {
                failures, trials, ..
            }) => {
                assert_eq!((failures, trials), (4, 4));
            }
            other => panic!("expected failure accounting, got {other:?}"),
        }
    }

    #[test]
    fn plan_validation_rejects_bad_shapes() {
        let plan = ExperimentPlan {
            t_grid: vec![],
            ..simple_plan()
        };
        assert!(matches!(
            plan.validated(),
            Err(HarnessError::InvalidPlan(_))
        ));
        let plan = ExperimentPlan {
            t_grid: vec![50, 50],
            ..simple_plan()
        };
        assert!(matches!(
            plan.validated(),
            Err(HarnessError::InvalidPlan(_))
        ));
        let plan = ExperimentPlan {
            trials: 1,
            ..simple_plan()
        };
        assert!(matches!(
            plan.validated(),
            Err(HarnessError::InvalidPlan(_))
        ));
        let plan = ExperimentPlan {
            reservoir: Some(EsnConfig::default()),
            ..simple_plan()
        };
        assert!(matches!(
            plan.validated(),
            Err(HarnessError::InvalidPlan(_))
        ));
        let plan = ExperimentPlan {
            task: TaskSpec::Legendre(
                LegendreTaskSpec::new(vec![crate::tasks::LegendreTerm {
                    delay: 1,
                    degree: 1,
                }])
                .unwrap(),
            ),
            ..simple_plan()
        };
        assert!(matches!(
            plan.validated(),
            Err(HarnessError::InvalidPlan(_))
        ));
    }

    #[test]
    fn esn_trial_runs_and_is_deterministic() {
        let plan = ExperimentPlan {
            task: TaskSpec::Legendre(
                LegendreTaskSpec::new(vec![crate::tasks::LegendreTerm {
                    delay: 1,
                    degree: 1,
                }])
                .unwrap(),
            ),
            reservoir: Some(EsnConfig {
                nodes: 10,
                ..EsnConfig::default()
            }),
            t_grid: vec![100],
            ratio_num: 1,
            ratio_den: 1,
            trials: 2,
            washout: 100,
            base_seed: 99,
            threads: 1,
            fix_reservoir: false,
        };
        let a = run_trial(&plan, 100, 0).unwrap();
        let b = run_trial(&plan, 100, 0).unwrap();
        assert_eq!(a, b);
        assert!(
            a.c_train > 0.5,
            "ten nodes should track a one-step delay, got {}",
            a.c_train
        );
        // distinct trials see distinct reservoirs and streams
        let c = run_trial(&plan, 100, 1).unwrap();
        assert_ne!(a.c_train, c.c_train);
    }

    #[test]
    fn fixed_reservoir_shares_the_draw_across_trials() {
        let base = ExperimentPlan {
            task: TaskSpec::Legendre(
                LegendreTaskSpec::new(vec![crate::tasks::LegendreTerm {
                    delay: 1,
                    degree: 1,
                }])
                .unwrap(),
            ),
            reservoir: Some(EsnConfig {
                nodes: 6,
                ..EsnConfig::default()
            }),
            t_grid: vec![60],
            ratio_num: 1,
            ratio_den: 1,
            trials: 2,
            washout: 60,
            base_seed: 5,
            threads: 1,
            fix_reservoir: true,
        };
        // same input stream, same fixed reservoir -> same result independent
        // of trial index only through the input role
        let a = run_trial(&base, 60, 0).unwrap();
        let b = run_trial(&base, 60, 0).unwrap();
        assert_eq!(a, b);
        let unfixed = ExperimentPlan {
            fix_reservoir: false,
            ..base.clone()
        };
        let c = run_trial(&unfixed, 60, 0).unwrap();
        // the reservoir stream differs, so the capacities differ
        assert_ne!(a.c_train.to_bits(), c.c_train.to_bits());
    }

    #[test]
    fn results_csv_round_trips_and_rejects_unknown_version() {
        let rows = run_experiment(&simple_plan()).unwrap();
        let mut buf = Vec::new();
        write_results_csv(&rows, &mut buf).unwrap();
        let back = read_results_csv(buf.as_slice()).unwrap();
        assert_eq!(rows, back);

        let tampered = String::from_utf8(buf)
            .unwrap()
            .replace("ipc_results_v1", "ipc_results_v9");
        match read_results_csv(tampered.as_bytes()) {
            Err(HarnessError::Csv(msg)) => assert!(msg.contains("unknown schema version")),
            other => panic!("expected version rejection, got {other:?}"),
        }
    }
}
