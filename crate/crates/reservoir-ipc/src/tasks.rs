//! Input processes and benchmark target sequences.
//!
//! Three targets are supported: products of Legendre polynomials of delayed
//! inputs, the NARMA10 recursion, and (in [`crate::esn`]) the analytic
//! one-node model. All generators are pure functions of explicit state and a
//! seeded random stream, so trials can run concurrently without coordination.

use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use thiserror::Error;

/// Output magnitude beyond which a NARMA trajectory counts as diverged.
pub const NARMA_DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Error, PartialEq)]
pub enum TaskError {
    #[error("input sequence length must be at least 1")]
    ZeroLength,
    #[error("input dimension must be at least 1")]
    ZeroDimension,
    #[error("legendre task needs strictly increasing positive delays")]
    BadDelays,
    #[error("legendre task needs at least one term of positive degree")]
    DegenerateTask,
    #[error("target at delay {delay} requested but only {available} inputs seen")]
    InsufficientHistory { delay: usize, available: usize },
    #[error("narma output diverged: |{value}| exceeds {NARMA_DIVERGENCE_LIMIT}")]
    Diverged { value: f64 },
}

/// Input laws used by the benchmarks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InputDistribution {
    /// Uniform on [-1, 1] (Legendre tasks and the analytic model).
    UniformSymmetric,
    /// Uniform on [0, 0.2] (NARMA10).
    UniformPositive,
}

impl InputDistribution {
    /// Support bounds of the law.
    pub fn bounds(self) -> (f64, f64) {
        match self {
            InputDistribution::UniformSymmetric => (-1.0, 1.0),
            InputDistribution::UniformPositive => (0.0, 0.2),
        }
    }
}

/// Specification of the driving input process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputSpec {
    pub distribution: InputDistribution,
    /// Number of input components per step; the built-in tasks are all 1-D.
    pub dimension: usize,
}

impl InputSpec {
    pub fn new(distribution: InputDistribution, dimension: usize) -> Result<Self, TaskError> {
        if dimension == 0 {
            return Err(TaskError::ZeroDimension);
        }
        Ok(Self {
            distribution,
            dimension,
        })
    }

    /// Sampler for one input component.
    pub fn component_law(&self) -> Uniform<f64> {
        let (lo, hi) = self.distribution.bounds();
        Uniform::new(lo, hi)
    }
}

/// Draw `length` i.i.d. input steps; components of a step are contiguous.
///
/// Deterministic given the generator state; rejects zero length.
pub fn gen_input<R: Rng>(
    spec: &InputSpec,
    length: usize,
    rng: &mut R,
) -> Result<Vec<f64>, TaskError> {
    if length == 0 {
        return Err(TaskError::ZeroLength);
    }
    let law = spec.component_law();
    Ok((0..length * spec.dimension)
        .map(|_| law.sample(rng))
        .collect())
}

/// Evaluate the Legendre polynomial P_n(x) by the three-term recurrence
/// (n+1) P_{n+1}(x) = (2n+1) x P_n(x) - n P_{n-1}(x).
pub fn legendre_eval(degree: u32, x: f64) -> f64 {
    if degree == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut cur = x;
    for n in 1..degree {
        let next = ((2 * n + 1) as f64 * x * cur - n as f64 * prev) / (n + 1) as f64;
        prev = cur;
        cur = next;
    }
    cur
}

/// One factor of a Legendre product target: degree applied at a fixed delay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LegendreTerm {
    /// Input delay, at least 1.
    pub delay: usize,
    pub degree: u32,
}

/// Target `prod_i P_{degree_i}(u_{t - delay_i})` with finitely many factors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LegendreTaskSpec {
    terms: Vec<LegendreTerm>,
}

impl LegendreTaskSpec {
    /// Delays must be positive and strictly increasing; at least one degree
    /// must be positive (otherwise the target is the constant 1).
    pub fn new(terms: Vec<LegendreTerm>) -> Result<Self, TaskError> {
        let mut last = 0usize;
        for term in &terms {
            if term.delay <= last {
                return Err(TaskError::BadDelays);
            }
            last = term.delay;
        }
        if !terms.iter().any(|t| t.degree > 0) {
            return Err(TaskError::DegenerateTask);
        }
        Ok(Self { terms })
    }

    pub fn terms(&self) -> &[LegendreTerm] {
        &self.terms
    }

    /// Largest delay referenced by the target.
    pub fn max_delay(&self) -> usize {
        self.terms.last().map_or(0, |t| t.delay)
    }
}

/// Bounded window of past inputs, newest first.
///
/// `delayed(1)` after pushing `u_t` would be `u_t` itself, so by convention
/// callers push the current input only after evaluating targets: `delayed(i)`
/// then reads `u_{t-i}`.
#[derive(Debug, Clone)]
pub struct InputHistory {
    buf: VecDeque<f64>,
    capacity: usize,
}

impl InputHistory {
    pub fn new(capacity: usize) -> Self {
        Self {
            buf: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn push(&mut self, u: f64) {
        if self.capacity == 0 {
            return;
        }
        if self.buf.len() == self.capacity {
            self.buf.pop_back();
        }
        self.buf.push_front(u);
    }

    /// Input pushed `delay` calls ago (1 = most recent).
    pub fn delayed(&self, delay: usize) -> Option<f64> {
        self.buf.get(delay - 1).copied()
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }
}

/// Evaluate the Legendre product target against an input window.
///
/// The window must cover the task's maximum delay.
pub fn legendre_target(spec: &LegendreTaskSpec, history: &InputHistory) -> Result<f64, TaskError> {
    let mut product = 1.0;
    for term in spec.terms() {
        let u = history
            .delayed(term.delay)
            .ok_or(TaskError::InsufficientHistory {
                delay: term.delay,
                available: history.len(),
            })?;
        product *= legendre_eval(term.degree, u);
    }
    Ok(product)
}

/// NARMA10 coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Narma10Params {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl Default for Narma10Params {
    fn default() -> Self {
        Self {
            alpha: 0.3,
            beta: 0.05,
            gamma: 1.5,
            delta: 0.1,
        }
    }
}

/// NARMA10 order: the recursion looks back ten outputs and ten inputs.
pub const NARMA_ORDER: usize = 10;

/// Rolling state of the NARMA10 recursion, zero-initialized.
#[derive(Debug, Clone)]
pub struct Narma10State {
    outputs: [f64; NARMA_ORDER],
    inputs: [f64; NARMA_ORDER],
    head: usize,
}

impl Narma10State {
    pub fn new() -> Self {
        Self {
            outputs: [0.0; NARMA_ORDER],
            inputs: [0.0; NARMA_ORDER],
            head: 0,
        }
    }
}

impl Default for Narma10State {
    fn default() -> Self {
        Self::new()
    }
}

/// Advance the NARMA10 recursion one step:
/// `y_t = alpha y_{t-1} + beta y_{t-1} sum_{i=1..10} y_{t-i} + gamma u_t u_{t-9} + delta`.
///
/// Returns the new output and rotates the buffers, or reports divergence when
/// the output magnitude exceeds [`NARMA_DIVERGENCE_LIMIT`].
pub fn narma10_step(
    state: &mut Narma10State,
    params: &Narma10Params,
    u_t: f64,
) -> Result<f64, TaskError> {
    let prev = (state.head + NARMA_ORDER - 1) % NARMA_ORDER;
    let y_prev = state.outputs[prev];
    let y_sum: f64 = state.outputs.iter().sum();
    // inputs[head] is u_{t-10} about to be overwritten; u_{t-9} sits after it.
    let u_back9 = state.inputs[(state.head + 1) % NARMA_ORDER];
    let y = params.alpha * y_prev
        + params.beta * y_prev * y_sum
        + params.gamma * u_t * u_back9
        + params.delta;
    if !y.is_finite() || y.abs() > NARMA_DIVERGENCE_LIMIT {
        return Err(TaskError::Diverged { value: y });
    }
    state.outputs[state.head] = y;
    state.inputs[state.head] = u_t;
    state.head = (state.head + 1) % NARMA_ORDER;
    Ok(y)
}
