//! Asymptote fitting and the zero-capacity decision.
//!
//! Per-length Monte Carlo summaries are fitted to the end forms of the
//! capacity expansion: means follow `a + b1/T` (training) and `a - b2/T'`
//! (test), variances follow `d/T` and `d/T'` with a shared coefficient. The
//! mean fit weights each squared residual by its segment length, which undoes
//! the 1/T decay of the sample-mean variance; the variance fit weights by the
//! squared length and then collapses to a closed form. When the extrapolated
//! capacity is near zero and the variance decays faster than 1/T, the true
//! capacity is declared zero.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default |a| below which the extrapolated capacity counts as "near zero".
pub const DEFAULT_ZERO_A_TOL: f64 = 0.01;
/// Default margin by which the variance power must undershoot -1.
pub const DEFAULT_ZERO_SLOPE_TOL: f64 = 0.3;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("need at least {needed} {what}, got {got}")]
    NotEnoughData {
        what: &'static str,
        needed: usize,
        got: usize,
    },
    #[error("normal system is singular (condition estimate {condition:e}); is the length grid degenerate?")]
    SingularSystem { condition: f64 },
    #[error("invalid theory terms: {0}")]
    InvalidTheoryTerms(&'static str),
    #[error("length ratio must be positive")]
    InvalidRatio,
    #[error("trial count must be at least 2")]
    TooFewTrials,
}

/// Per-length sample means of the training and test capacity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSample {
    pub t_train: u64,
    pub t_test: u64,
    pub mean_train: f64,
    pub mean_test: f64,
    /// Trials behind the means; carried for reporting.
    pub trials: u64,
}

/// Per-length unbiased variances of the training and test capacity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarSample {
    pub t_train: u64,
    pub t_test: u64,
    pub var_train: f64,
    pub var_test: f64,
    pub trials: u64,
}

/// Analytic inputs to the coefficient construction, for models where the
/// expansion terms are known in closed form. These are verification inputs,
/// never estimated from data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryTerms {
    /// Expected squared target.
    pub mean_square_target: f64,
    /// Minimum of the expected squared readout error.
    pub optimal_loss: f64,
    /// Long-run variance of the squared target.
    pub target_power_variance: f64,
    /// Long-run covariance between the optimal loss and the squared target.
    pub loss_target_covariance: f64,
    /// Long-run variance of the optimal loss.
    pub loss_variance: f64,
    /// Trace of the scaled readout-sensitivity matrix.
    pub sensitivity_trace: f64,
}

/// Fitted asymptote parameters with solver diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Extrapolated true capacity.
    pub a: f64,
    /// 1/T coefficient of the training mean.
    pub b1: f64,
    /// 1/T' coefficient of the test mean (entering with a minus sign).
    pub b2: f64,
    /// Shared variance coefficient of d/T and d/T'.
    pub d: f64,
    /// Weighted cost of the mean fit at the solution.
    pub cost: f64,
    /// 1-norm condition estimate of the 3x3 normal system.
    pub condition: f64,
}

/// Mean-model fit before the variance coefficient is attached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanFit {
    pub a: f64,
    pub b1: f64,
    pub b2: f64,
    pub cost: f64,
    pub condition: f64,
}

impl MeanFit {
    pub fn with_variance(self, d: f64) -> FitResult {
        FitResult {
            a: self.a,
            b1: self.b1,
            b2: self.b2,
            d,
            cost: self.cost,
            condition: self.condition,
        }
    }
}

/// Log-log variance slope with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub std_err: f64,
    /// Intercept of the log-log line, for drawing it over the data.
    pub intercept: f64,
    pub points_used: usize,
    /// Nonpositive variances cannot enter the log fit; they are counted, not
    /// silently discarded.
    pub dropped_nonpositive: usize,
}

/// Outcome of the variance-power rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroIpcDecision {
    pub is_zero: bool,
    pub a: f64,
    pub slope: f64,
    pub a_tol: f64,
    pub slope_tol: f64,
}

/// Coefficients produced by the analytic construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticCoefficients {
    pub a: f64,
    pub b1: f64,
    pub b2: f64,
    pub d: f64,
}

/// 3x3 linear solve by Gaussian elimination with full pivoting and one step
/// of iterative refinement. Returns the solution and a 1-norm condition
/// estimate.
fn solve3(m: [[f64; 3]; 3], rhs: [f64; 3]) -> Result<([f64; 3], f64), FitError> {
    let scale = m.iter().flatten().fold(0.0_f64, |acc, v| acc.max(v.abs()));

    let factor_solve = |b: [f64; 3]| -> Option<[f64; 3]> {
        let mut a = m;
        let mut b = b;
        let mut col_of = [0usize, 1, 2];
        let mut rows = [0usize, 1, 2];
        for k in 0..3 {
            // full pivot: largest remaining entry
            let (mut pr, mut pc, mut best) = (k, k, -1.0);
            for r in k..3 {
                for c in k..3 {
                    let v = a[rows[r]][col_of[c]].abs();
                    if v > best {
                        best = v;
                        pr = r;
                        pc = c;
                    }
                }
            }
            if best <= scale * 1e-15 {
                return None;
            }
            rows.swap(k, pr);
            col_of.swap(k, pc);
            let pivot = a[rows[k]][col_of[k]];
            for r in (k + 1)..3 {
                let f = a[rows[r]][col_of[k]] / pivot;
                for c in k..3 {
                    a[rows[r]][col_of[c]] -= f * a[rows[k]][col_of[c]];
                }
                b[rows[r]] -= f * b[rows[k]];
            }
        }
        let mut x_perm = [0.0; 3];
        for k in (0..3).rev() {
            let mut acc = b[rows[k]];
            for c in (k + 1)..3 {
                acc -= a[rows[k]][col_of[c]] * x_perm[c];
            }
            x_perm[k] = acc / a[rows[k]][col_of[k]];
        }
        let mut x = [0.0; 3];
        for k in 0..3 {
            x[col_of[k]] = x_perm[k];
        }
        Some(x)
    };

    let singular = |cond| FitError::SingularSystem { condition: cond };
    let mut x = factor_solve(rhs).ok_or_else(|| singular(f64::INFINITY))?;
    // one refinement pass keeps the gradient at the solution near machine zero
    let residual = |x: &[f64; 3]| {
        let mut r = [0.0; 3];
        for i in 0..3 {
            r[i] = rhs[i] - m[i][0] * x[0] - m[i][1] * x[1] - m[i][2] * x[2];
        }
        r
    };
    if let Some(dx) = factor_solve(residual(&x)) {
        for i in 0..3 {
            x[i] += dx[i];
        }
    }

    // condition estimate from the explicit inverse (columns = solves)
    let mut inv_norm1 = 0.0_f64;
    for j in 0..3 {
        let mut e = [0.0; 3];
        e[j] = 1.0;
        let col = factor_solve(e).ok_or_else(|| singular(f64::INFINITY))?;
        inv_norm1 = inv_norm1.max(col.iter().map(|v| v.abs()).sum());
    }
    let norm1 = (0..3)
        .map(|j| (0..3).map(|i| m[i][j].abs()).sum::<f64>())
        .fold(0.0_f64, f64::max);
    Ok((x, norm1 * inv_norm1))
}

/// Fit the mean models `a + b1/T` and `a - b2/T'` by length-weighted least
/// squares. The weights cancel the 1/T decay of the sample-mean variance, so
/// every grid point carries comparable information.
///
/// Samples are sorted internally; permuting the input changes nothing.
pub fn fit_means(samples: &[MeanSample]) -> Result<MeanFit, FitError> {
    if samples.len() < 2 {
        return Err(FitError::NotEnoughData {
            what: "mean samples",
            needed: 2,
            got: samples.len(),
        });
    }
    let distinct = {
        let mut lengths: Vec<u64> = samples.iter().map(|s| s.t_train).collect();
        lengths.sort_unstable();
        lengths.dedup();
        lengths.len()
    };
    if distinct < 2 {
        // a single length cannot separate the constant from the 1/T terms
        return Err(FitError::SingularSystem {
            condition: f64::INFINITY,
        });
    }
    let mut sorted: Vec<MeanSample> = samples.to_vec();
    sorted.sort_by(|p, q| {
        (p.t_train, p.t_test)
            .cmp(&(q.t_train, q.t_test))
            .then(p.mean_train.total_cmp(&q.mean_train))
            .then(p.mean_test.total_cmp(&q.mean_test))
    });

    let n = sorted.len() as f64;
    let (mut gamma, mut beta1, mut beta2) = (0.0, 0.0, 0.0);
    let (mut s1, mut s2, mut t1, mut t2) = (0.0, 0.0, 0.0, 0.0);
    for s in &sorted {
        let tt = s.t_train as f64;
        let tp = s.t_test as f64;
        gamma += tt + tp;
        beta1 += 1.0 / tt;
        beta2 += 1.0 / tp;
        s1 += tt * s.mean_train;
        s2 += tp * s.mean_test;
        t1 += s.mean_train;
        t2 += s.mean_test;
    }
    let m = [[gamma, n, -n], [n, beta1, 0.0], [n, 0.0, -beta2]];
    let rhs = [s1 + s2, t1, t2];
    let ([a, b1, b2], condition) = solve3(m, rhs)?;

    let mut cost = 0.0;
    for s in &sorted {
        let tt = s.t_train as f64;
        let tp = s.t_test as f64;
        let r1 = a + b1 / tt - s.mean_train;
        let r2 = a - b2 / tp - s.mean_test;
        cost += tt * r1 * r1 + tp * r2 * r2;
    }
    Ok(MeanFit {
        a,
        b1,
        b2,
        cost: 0.5 * cost,
        condition,
    })
}

/// Fit the shared variance coefficient of `d/T` and `d/T'`.
///
/// With squared-length weights the minimizer collapses to the closed form
/// `d = sum(T_i var_i + T'_i var'_i) / (2 N)`.
pub fn fit_variance(samples: &[VarSample]) -> Result<f64, FitError> {
    if samples.is_empty() {
        return Err(FitError::NotEnoughData {
            what: "variance samples",
            needed: 1,
            got: 0,
        });
    }
    let total: f64 = samples
        .iter()
        .map(|s| s.t_train as f64 * s.var_train + s.t_test as f64 * s.var_test)
        .sum();
    Ok(total / (2.0 * samples.len() as f64))
}

/// Ordinary least squares of `ln var` against `ln T`, pooling training and
/// test points. Nonpositive variances are excluded (and counted); at least
/// three usable points are required.
pub fn loglog_slope(samples: &[VarSample]) -> Result<SlopeFit, FitError> {
    let mut points: Vec<(f64, f64)> = Vec::with_capacity(2 * samples.len());
    let mut dropped = 0usize;
    for s in samples {
        for (t, v) in [(s.t_train, s.var_train), (s.t_test, s.var_test)] {
            if v > 0.0 {
                points.push(((t as f64).ln(), v.ln()));
            } else {
                dropped += 1;
            }
        }
    }
    if points.len() < 3 {
        return Err(FitError::NotEnoughData {
            what: "positive variance points",
            needed: 3,
            got: points.len(),
        });
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(FitError::SingularSystem {
            condition: f64::INFINITY,
        });
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let rss: f64 = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let dof = (points.len().saturating_sub(2)).max(1) as f64;
    let std_err = (rss / dof / sxx).sqrt();
    Ok(SlopeFit {
        slope,
        std_err,
        intercept,
        points_used: points.len(),
        dropped_nonpositive: dropped,
    })
}

/// Variance-power rule: the true capacity is declared zero when the
/// extrapolated value is inside `a_tol` of zero AND the variance decays
/// detectably faster than 1/T (slope below `-1 - slope_tol`).
pub fn decide_zero_ipc(a: f64, slope: f64, a_tol: f64, slope_tol: f64) -> ZeroIpcDecision {
    ZeroIpcDecision {
        is_zero: a.abs() < a_tol && slope < -1.0 - slope_tol,
        a,
        slope,
        a_tol,
        slope_tol,
    }
}

/// Build the asymptote coefficients from analytic expansion terms.
///
/// `ratio` is T/T', the training-to-test length ratio the experiment holds
/// fixed as both grow.
pub fn asymptotic_coefficients(
    terms: &TheoryTerms,
    ratio: f64,
) -> Result<AsymptoticCoefficients, FitError> {
    if !terms.mean_square_target.is_finite() || terms.mean_square_target <= 0.0 {
        return Err(FitError::InvalidTheoryTerms(
            "mean square target must be positive",
        ));
    }
    if terms.optimal_loss < 0.0 {
        return Err(FitError::InvalidTheoryTerms(
            "optimal loss must be nonnegative",
        ));
    }
    if !ratio.is_finite() || ratio <= 0.0 {
        return Err(FitError::InvalidRatio);
    }
    let mu = terms.mean_square_target;
    let loss = terms.optimal_loss;
    let a = 1.0 - loss / mu;
    let shared = terms.loss_target_covariance / (mu * mu)
        - loss * terms.target_power_variance / (mu * mu * mu);
    let trace_term = terms.sensitivity_trace / mu;
    let b1 = shared + trace_term;
    let b2 = trace_term / ratio - shared;
    let d = terms.loss_variance / (mu * mu)
        + loss * loss * terms.target_power_variance / (mu * mu * mu * mu)
        - 2.0 * loss * terms.loss_target_covariance / (mu * mu * mu);
    Ok(AsymptoticCoefficients { a, b1, b2, d })
}

/// Sampling variance of an unbiased variance estimate from `trials` draws,
/// `2 n s^4 / (n-1)^2`, used for error bars on variance plots.
pub fn variance_of_variance(variance: f64, trials: u64) -> Result<f64, FitError> {
    if trials < 2 {
        return Err(FitError::TooFewTrials);
    }
    let n = trials as f64;
    Ok(2.0 * n * variance * variance / ((n - 1.0) * (n - 1.0)))
}
