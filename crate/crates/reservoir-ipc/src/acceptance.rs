//! Acceptance checks: the verifiable claims this crate is built to satisfy.
//!
//! Each check pins its tolerances in code and reports the measured values.
//! The quick subset covers the analytic model and the unit-level oracles;
//! the full suite adds the three desk-scale ESN experiments.

use crate::commands::CommandError;
use crate::config::{Preset, RunConfig};
use crate::esn::{build_esn, esn_step, EsnConfig, ReservoirState};
use crate::fit::{
    asymptotic_coefficients, decide_zero_ipc, fit_means, fit_variance, loglog_slope, FitResult,
    MeanSample, SlopeFit, TheoryTerms, DEFAULT_ZERO_A_TOL, DEFAULT_ZERO_SLOPE_TOL,
};
use crate::harness::{run_experiment, write_results_csv, SummaryRow};
use crate::ipc::{chi_square_threshold, empirical_ipc, MomentAccumulator};
use crate::seed::derive_rng;
use nalgebra::{DMatrix, DVector};
use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use std::path::PathBuf;
use std::time::Instant;

/// Exact expansion terms of the analytic one-node model.
pub fn simple_model_theory() -> TheoryTerms {
    TheoryTerms {
        mean_square_target: 13.0 / 9.0,
        optimal_loss: 1.0,
        target_power_variance: 6992.0 / 1215.0,
        loss_target_covariance: 0.0,
        loss_variance: 0.0,
        sensitivity_trace: 3.0,
    }
}

/// True capacity of the analytic model.
pub const SIMPLE_TRUE_IPC: f64 = 4.0 / 13.0;
const SIMPLE_B1: f64 = 1839.0 / 10985.0;
const SIMPLE_B2: f64 = 66606.0 / 10985.0;
const SIMPLE_D: f64 = 188784.0 / 142805.0;

/// Options of a verification run.
#[derive(Debug, Clone, Default)]
pub struct SuiteOptions {
    /// Skip the ESN-scale experiments, keeping the analytic model and the
    /// unit-level oracle checks.
    pub quick: bool,
    /// Worker threads for the experiments (0 = default).
    pub threads: usize,
    /// When set, write each experiment's results CSV here.
    pub out_dir: Option<PathBuf>,
}

/// Result of one acceptance check.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self {
            name,
            passed,
            detail,
        }
    }
}

/// Run the acceptance suite in its canonical order.
pub fn run_suite(options: &SuiteOptions) -> Result<Vec<CheckOutcome>, CommandError> {
    let mut outcomes = Vec::new();
    outcomes.push(check_analytic_coefficients());

    let simple = run_preset(Preset::SimpleVerify, options, "simple_verify.csv")?;
    outcomes.push(check_simple_model_table(&simple));
    outcomes.push(check_chi_square_thresholds());
    outcomes.push(check_baseline_comparison(&simple));

    if !options.quick {
        outcomes.push(check_legendre_first_order(options)?);
        outcomes.push(check_legendre_fifteenth_order(options)?);
        outcomes.push(check_narma10(options)?);
    }

    outcomes.push(check_oracle_equivalence());
    outcomes.push(check_determinism()?);
    Ok(outcomes)
}

struct ExperimentSummary {
    rows: Vec<SummaryRow>,
    fit: FitResult,
    slope: SlopeFit,
    wall_seconds: f64,
    dof: u64,
}

fn run_preset(
    preset: Preset,
    options: &SuiteOptions,
    csv_name: &str,
) -> Result<ExperimentSummary, CommandError> {
    let mut config: RunConfig = preset.config(false);
    config.threads = options.threads;
    let start = Instant::now();
    let rows = run_experiment(&config.plan())?;
    let wall_seconds = start.elapsed().as_secs_f64();
    if let Some(dir) = &options.out_dir {
        std::fs::create_dir_all(dir)?;
        let mut file = std::io::BufWriter::new(std::fs::File::create(dir.join(csv_name))?);
        write_results_csv(&rows, &mut file)?;
    }
    let means: Vec<_> = rows.iter().map(SummaryRow::mean_sample).collect();
    let vars: Vec<_> = rows.iter().map(SummaryRow::var_sample).collect();
    let fit = fit_means(&means)?.with_variance(fit_variance(&vars)?);
    let slope = loglog_slope(&vars)?;
    Ok(ExperimentSummary {
        rows,
        fit,
        slope,
        wall_seconds,
        dof: config.effective_dof(),
    })
}

/// Check 1: the coefficient construction reproduces the exact rationals of
/// the analytic model, fast.
fn check_analytic_coefficients() -> CheckOutcome {
    let start = Instant::now();
    let coeffs = asymptotic_coefficients(&simple_model_theory(), 0.5);
    let elapsed = start.elapsed();
    let coeffs = match coeffs {
        Ok(c) => c,
        Err(e) => return CheckOutcome::new("analytic-coefficients", false, e.to_string()),
    };
    let errs = [
        (coeffs.a - SIMPLE_TRUE_IPC).abs(),
        (coeffs.b1 - SIMPLE_B1).abs(),
        (coeffs.b2 - SIMPLE_B2).abs(),
        (coeffs.d - SIMPLE_D).abs(),
    ];
    let max_err = errs.iter().fold(0.0_f64, |a, &b| a.max(b));
    let in_budget = elapsed.as_secs_f64() < 1e-3;
    CheckOutcome::new(
        "analytic-coefficients",
        max_err <= 1e-12 && in_budget,
        format!(
            "max |error| = {max_err:.2e} (tol 1e-12); {:.3} us",
            elapsed.as_secs_f64() * 1e6
        ),
    )
}

/// Check 2: desk-scale Monte Carlo on the analytic model lands on the known
/// coefficient values.
fn check_simple_model_table(summary: &ExperimentSummary) -> CheckOutcome {
    let fit = &summary.fit;
    let da = (fit.a - SIMPLE_TRUE_IPC).abs();
    let db1 = (fit.b1 - SIMPLE_B1).abs();
    let db2 = (fit.b2 - SIMPLE_B2).abs();
    let dd = (fit.d - SIMPLE_D).abs();
    let in_budget = summary.wall_seconds < 120.0;
    let passed = da < 0.005 && db1 < 0.10 && db2 < 0.8 && dd < 0.2 && in_budget;
    CheckOutcome::new(
        "simple-model-monte-carlo",
        passed,
        format!(
            "a={:.6} (|d|={da:.1e}<5e-3), b1={:.4} (|d|={db1:.3}<0.10), \
             b2={:.4} (|d|={db2:.3}<0.8), d={:.4} (|d|={dd:.3}<0.2); {:.2} s",
            fit.a, fit.b1, fit.b2, fit.d, summary.wall_seconds
        ),
    )
}

/// Check 3: chi-square thresholds at the two quoted operating points.
fn check_chi_square_thresholds() -> CheckOutcome {
    let th1 = chi_square_threshold(1, 1e-4, 600);
    let th2 = chi_square_threshold(100, 1e-4, 10_000);
    match (th1, th2) {
        (Ok(th1), Ok(th2)) => {
            let d1 = (th1 - 0.0505).abs();
            let d2 = (th2 - 0.032264).abs();
            CheckOutcome::new(
                "chi-square-thresholds",
                d1 <= 0.0005 && d2 <= 1e-5,
                format!(
                    "th(1,1e-4,600)={th1:.6} (|d|={d1:.1e}<=5e-4); \
                     th(100,1e-4,1e4)={th2:.6} (|d|={d2:.1e}<=1e-5)"
                ),
            )
        }
        _ => CheckOutcome::new(
            "chi-square-thresholds",
            false,
            "threshold evaluation failed".into(),
        ),
    }
}

/// Check 4: the threshold-gated mean at the largest length reproduces the
/// reference value, and extrapolation lands at least as close to the truth.
fn check_baseline_comparison(summary: &ExperimentSummary) -> CheckOutcome {
    let last = summary.rows.last().expect("simple grid is nonempty");
    let threshold = match chi_square_threshold(summary.dof, 1e-4, last.t_train) {
        Ok(t) => t,
        Err(e) => return CheckOutcome::new("baseline-comparison", false, e.to_string()),
    };
    let emp = empirical_ipc(last.mean_train, threshold);
    let demp = (emp - 0.3080).abs();
    let gap_emp = (emp - SIMPLE_TRUE_IPC).abs();
    let gap_fit = (summary.fit.a - SIMPLE_TRUE_IPC).abs();
    let passed = demp <= 0.002 && gap_fit < gap_emp + 0.002;
    CheckOutcome::new(
        "baseline-comparison",
        passed,
        format!(
            "empirical(T={})={emp:.6} (|d vs 0.3080|={demp:.1e}<=2e-3); \
             |a-4/13|={gap_fit:.2e} vs |emp-4/13|+2e-3={:.2e}",
            last.t_train,
            gap_emp + 0.002
        ),
    )
}

/// Check 5: first-order delay task at desk scale: near-unit capacity with a
/// 1/T variance decay and no zero-capacity flag.
fn check_legendre_first_order(options: &SuiteOptions) -> Result<CheckOutcome, CommandError> {
    let summary = run_preset(Preset::Legendre1, options, "legendre1.csv")?;
    let decision = decide_zero_ipc(
        summary.fit.a,
        summary.slope.slope,
        DEFAULT_ZERO_A_TOL,
        DEFAULT_ZERO_SLOPE_TOL,
    );
    let slope_ok = (summary.slope.slope + 1.0).abs() <= 0.3;
    let in_budget = summary.wall_seconds < 600.0;
    let passed = summary.fit.a > 0.98 && slope_ok && !decision.is_zero && in_budget;
    Ok(CheckOutcome::new(
        "legendre1-capacity",
        passed,
        format!(
            "a={:.6} (>0.98), slope={:.3} (-1±0.3), zero={}; {:.1} s",
            summary.fit.a, summary.slope.slope, decision.is_zero, summary.wall_seconds
        ),
    ))
}

/// Check 6: fifteenth-order task: capacity extrapolates to zero and the
/// variance decays faster than 1/T, triggering the zero decision.
fn check_legendre_fifteenth_order(options: &SuiteOptions) -> Result<CheckOutcome, CommandError> {
    let summary = run_preset(Preset::Legendre15, options, "legendre15.csv")?;
    let decision = decide_zero_ipc(
        summary.fit.a,
        summary.slope.slope,
        DEFAULT_ZERO_A_TOL,
        DEFAULT_ZERO_SLOPE_TOL,
    );
    let in_budget = summary.wall_seconds < 600.0;
    let passed =
        summary.fit.a.abs() < 0.02 && summary.slope.slope < -1.5 && decision.is_zero && in_budget;
    Ok(CheckOutcome::new(
        "legendre15-zero-capacity",
        passed,
        format!(
            "a={:.6} (|a|<0.02), slope={:.3} (<-1.5), zero={}; {:.1} s",
            summary.fit.a, summary.slope.slope, decision.is_zero, summary.wall_seconds
        ),
    ))
}

/// Check 7: NARMA10 at desk scale: near-unit capacity and agreement between
/// the gated baseline and the extrapolation.
fn check_narma10(options: &SuiteOptions) -> Result<CheckOutcome, CommandError> {
    let summary = run_preset(Preset::Narma10, options, "narma10.csv")?;
    let last = summary.rows.last().expect("grid is nonempty");
    let threshold = chi_square_threshold(summary.dof, 1e-4, last.t_train)?;
    let emp = empirical_ipc(last.mean_train, threshold);
    let gap = (emp - summary.fit.a).abs();
    let in_budget = summary.wall_seconds < 600.0;
    let passed = summary.fit.a > 0.99 && gap < 0.005 && in_budget;
    Ok(CheckOutcome::new(
        "narma10-capacity",
        passed,
        format!(
            "a={:.6} (>0.99), empirical(T={})={emp:.6}, |emp-a|={gap:.1e} (<5e-3); {:.1} s",
            summary.fit.a, last.t_train, summary.wall_seconds
        ),
    ))
}

/// Definition-level capacity: store the trajectory, solve the least-squares
/// problem on the design matrix by SVD, and evaluate residuals explicitly.
/// Independent of the streaming trace-formula path it cross-checks.
fn definition_level_ipc(features: &[DVector<f64>], targets: &[f64], split: usize) -> (f64, f64) {
    let d = features[0].len();
    let design = DMatrix::from_fn(split, d, |r, c| features[r][c]);
    let y = DVector::from_fn(split, |r, _| targets[r]);
    let svd = design.svd(true, true);
    let eps = svd.singular_values.max() * f64::EPSILON * split.max(d) as f64;
    let w = svd.solve(&y, eps).expect("least squares solve");

    let squared_error = |range: std::ops::Range<usize>| {
        let mut loss = 0.0;
        let mut norm = 0.0;
        for i in range {
            let prediction = features[i].dot(&w);
            loss += (targets[i] - prediction) * (targets[i] - prediction);
            norm += targets[i] * targets[i];
        }
        (loss, norm)
    };
    let (train_loss, train_norm) = squared_error(0..split);
    let (test_loss, test_norm) = squared_error(split..features.len());
    (1.0 - train_loss / train_norm, 1.0 - test_loss / test_norm)
}

/// Check 8: oracle-equivalence suite: streaming capacity equals the
/// definition-level computation; the mean fit is a true stationary point;
/// noiseless fits recover coefficients exactly.
fn check_oracle_equivalence() -> CheckOutcome {
    let start = Instant::now();

    // streaming vs definition on random small reservoir instances
    let mut max_gap = 0.0_f64;
    for instance in 0..100u64 {
        let nodes = 2 + (instance % 7) as usize;
        let t_train = 40 + ((instance * 13) % 161) as usize;
        let t_test = 30 + ((instance * 7) % 100) as usize;
        let config = EsnConfig {
            nodes,
            ..EsnConfig::default()
        };
        let mut rng = derive_rng(0xacce97, &[instance]);
        let weights = build_esn(&config, &mut rng).expect("instance builds");
        let law = Uniform::new(-1.0, 1.0);

        let mut features = Vec::with_capacity(t_train + t_test);
        let mut targets = Vec::with_capacity(t_train + t_test);
        let mut train = MomentAccumulator::new(nodes + 1, 1);
        let mut test = MomentAccumulator::new(nodes + 1, 1);
        let mut state = ReservoirState::zero(nodes);
        let mut prev = DVector::zeros(1);
        let mut prev_u = 0.0;
        for step in 0..(50 + t_train + t_test) {
            let u = law.sample(&mut rng);
            state = esn_step(&weights, &state, &prev);
            if step >= 50 {
                // delayed linear-plus-quadratic target keeps residuals nonzero
                let y = prev_u + 0.5 * prev_u * prev_u;
                let x = state.augmented();
                let acc = if step < 50 + t_train {
                    &mut train
                } else {
                    &mut test
                };
                acc.accumulate(&x, &DVector::from_element(1, y))
                    .expect("finite sample");
                features.push(x);
                targets.push(y);
            }
            prev[0] = u;
            prev_u = u;
        }
        let c_train = train.training_ipc().expect("nonzero target");
        let c_test = train.test_ipc(&test).expect("nonzero target");
        let (c_train_def, c_test_def) = definition_level_ipc(&features, &targets, t_train);
        max_gap = max_gap
            .max((c_train - c_train_def).abs())
            .max((c_test - c_test_def).abs());
    }
    let streaming_ok = max_gap <= 1e-9;

    // the fitted mean coefficients zero the weighted-cost gradient
    let mut max_rel_grad = 0.0_f64;
    let mut rng = derive_rng(0xacce98, &[]);
    for _ in 0..100 {
        let samples: Vec<MeanSample> = (0..rng.gen_range(3..10))
            .map(|i| MeanSample {
                t_train: 100 + 57 * i + rng.gen_range(0..40),
                t_test: 150 + 91 * i + rng.gen_range(0..40),
                mean_train: rng.gen_range(-0.5..1.0),
                mean_test: rng.gen_range(-0.5..1.0),
                trials: 10,
            })
            .collect();
        let fit = fit_means(&samples).expect("generic grid fits");
        let (mut ga, mut gb1, mut gb2, mut scale) = (0.0, 0.0, 0.0, 0.0_f64);
        for s in &samples {
            let tt = s.t_train as f64;
            let tp = s.t_test as f64;
            let r1 = fit.a + fit.b1 / tt - s.mean_train;
            let r2 = fit.a - fit.b2 / tp - s.mean_test;
            ga += tt * r1 + tp * r2;
            gb1 += r1;
            gb2 -= r2;
            scale += (tt * s.mean_train).abs() + (tp * s.mean_test).abs();
        }
        let grad = (ga * ga + gb1 * gb1 + gb2 * gb2).sqrt();
        max_rel_grad = max_rel_grad.max(grad / scale.max(1.0));
    }
    let gradient_ok = max_rel_grad <= 1e-8;

    // noiseless synthetic curves are recovered exactly
    let samples: Vec<MeanSample> = (0..5)
        .map(|i| {
            let t = 200 + 100 * i;
            MeanSample {
                t_train: t,
                t_test: 2 * t,
                mean_train: 0.3 + 0.2 / t as f64,
                mean_test: 0.3 - 6.0 / (2 * t) as f64,
                trials: 100,
            }
        })
        .collect();
    let recovered = fit_means(&samples).expect("noiseless grid fits");
    let recovery_err = (recovered.a - 0.3)
        .abs()
        .max((recovered.b1 - 0.2).abs())
        .max((recovered.b2 - 6.0).abs());
    let recovery_ok = recovery_err <= 1e-10;

    let elapsed = start.elapsed().as_secs_f64();
    CheckOutcome::new(
        "oracle-equivalence",
        streaming_ok && gradient_ok && recovery_ok && elapsed < 10.0,
        format!(
            "streaming vs definition max|d|={max_gap:.2e} (<=1e-9); \
             max relative gradient={max_rel_grad:.2e} (<=1e-8); \
             noiseless recovery err={recovery_err:.2e} (<=1e-10); {elapsed:.2} s"
        ),
    )
}

/// Check 9: the verification pipeline's CSV output is bitwise identical
/// under different thread counts.
fn check_determinism() -> Result<CheckOutcome, CommandError> {
    let start = Instant::now();
    let csv_for = |threads: usize| -> Result<Vec<u8>, CommandError> {
        let mut config = Preset::SimpleVerify.config(false);
        config.threads = threads;
        let rows = run_experiment(&config.plan())?;
        let mut bytes = Vec::new();
        write_results_csv(&rows, &mut bytes)?;
        Ok(bytes)
    };
    let single = csv_for(1)?;
    let pooled = csv_for(8)?;
    let elapsed = start.elapsed().as_secs_f64();
    let equal = single == pooled;
    Ok(CheckOutcome::new(
        "determinism-across-threads",
        equal && elapsed < 60.0,
        format!(
            "1-thread vs 8-thread CSV: {} ({} bytes); {elapsed:.2} s",
            if equal { "identical" } else { "DIFFERENT" },
            single.len()
        ),
    ))
}
