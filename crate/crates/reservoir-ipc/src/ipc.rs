//! Streaming moment accumulation and capacity evaluation.
//!
//! A trial never stores its trajectory: three running sums (target square,
//! feature-target cross moment, feature Gram) are enough to evaluate the
//! optimal readout, the training capacity
//! `C_T = Tr[<y x^T> <x x^T>^-1 <x y^T>] / <y^2>` and the held-out test
//! capacity
//! `C'_{T,T'} = Tr[<y x^T>_T <x x^T>_T^-1 (2 <x y^T>_T' - <x x^T>_T' <x x^T>_T^-1 <x y^T>_T)] / <y^2>_T'`.
//! The chi-square gate of the prior-work "empirical" capacity is provided for
//! baseline comparisons.

use crate::special::chi_square_upper_quantile;
use nalgebra::{Cholesky, DMatrix, DVector, SVD};
use thiserror::Error;

/// Relative singular-value cutoff for rank-deficient Gram solves.
pub const GRAM_SOLVE_RTOL: f64 = 1e-10;

const BLOB_MAGIC: &[u8; 4] = b"RIPC";
const BLOB_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum IpcError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("sample contains a non-finite value")]
    NonFiniteSample,
    #[error("accumulator holds no samples")]
    EmptyAccumulator,
    #[error("target is identically zero; capacity undefined")]
    ZeroTarget,
    #[error("feature Gram is identically zero")]
    ZeroGram,
    #[error("degrees of freedom must be at least 1")]
    InvalidDof,
    #[error("tail probability must lie strictly inside (0, 1)")]
    InvalidTailProbability,
    #[error("data length must be at least 1")]
    InvalidLength,
    #[error("moment blob corrupt: {0}")]
    CorruptBlob(&'static str),
}

/// Running second-order moments of a (feature, target) stream.
///
/// Merging two accumulators is the same as accumulating the concatenated
/// stream, so segments may be reduced in parallel and checkpointed.
///
/// ```
/// use reservoir_ipc::MomentAccumulator;
///
/// let mut acc = MomentAccumulator::new(1, 1);
/// for i in 0..100 {
///     let x = (i as f64 - 50.0) / 50.0;
///     acc.accumulate_scalar(x, 3.0 * x).unwrap();
/// }
/// // an exactly linear target is captured completely
/// assert!((acc.training_ipc().unwrap() - 1.0).abs() < 1e-12);
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct MomentAccumulator {
    n: u64,
    sum_y2: f64,
    /// Sum of x y^T, features x outputs.
    sum_xy: DMatrix<f64>,
    /// Sum of x x^T.
    sum_xx: DMatrix<f64>,
}

/// Optimal linear readout solved from the normal equations.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutSolution {
    /// Weight matrix, features x outputs.
    pub weights: DMatrix<f64>,
    /// Rank retained by the Gram solve (full on the fast path).
    pub gram_rank: usize,
    /// Relative cutoff applied to singular values on the fallback path.
    pub solve_tolerance: f64,
}

/// One trial's training and test capacity at segment lengths (T, T').
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IpcSamplePair {
    pub t_train: u64,
    pub t_test: u64,
    pub c_train: f64,
    pub c_test: f64,
}

impl MomentAccumulator {
    pub fn new(features: usize, outputs: usize) -> Self {
        Self {
            n: 0,
            sum_y2: 0.0,
            sum_xy: DMatrix::zeros(features, outputs),
            sum_xx: DMatrix::zeros(features, features),
        }
    }

    pub fn len(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn features(&self) -> usize {
        self.sum_xx.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.sum_xy.ncols()
    }

    /// Fold one sample into the sums. Rejects dimension mismatches and
    /// non-finite values (a diverged task must abort the trial, not poison
    /// the statistics).
    pub fn accumulate(&mut self, x: &DVector<f64>, y: &DVector<f64>) -> Result<(), IpcError> {
        if x.len() != self.features() {
            return Err(IpcError::DimensionMismatch {
                expected: self.features(),
                got: x.len(),
            });
        }
        if y.len() != self.outputs() {
            return Err(IpcError::DimensionMismatch {
                expected: self.outputs(),
                got: y.len(),
            });
        }
        if !(x.iter().all(|v| v.is_finite()) && y.iter().all(|v| v.is_finite())) {
            return Err(IpcError::NonFiniteSample);
        }
        self.sum_y2 += y.norm_squared();
        self.sum_xy.ger(1.0, x, y, 1.0);
        self.sum_xx.ger(1.0, x, x, 1.0);
        self.n += 1;
        Ok(())
    }

    /// Scalar fast path for one-dimensional features and targets.
    pub fn accumulate_scalar(&mut self, x: f64, y: f64) -> Result<(), IpcError> {
        if self.features() != 1 || self.outputs() != 1 {
            return Err(IpcError::DimensionMismatch {
                expected: self.features(),
                got: 1,
            });
        }
        if !(x.is_finite() && y.is_finite()) {
            return Err(IpcError::NonFiniteSample);
        }
        self.sum_y2 += y * y;
        self.sum_xy[(0, 0)] += x * y;
        self.sum_xx[(0, 0)] += x * x;
        self.n += 1;
        Ok(())
    }

    /// Combine with moments of another segment of the same stream shape.
    pub fn merge(&self, other: &Self) -> Result<Self, IpcError> {
        if self.features() != other.features() {
            return Err(IpcError::DimensionMismatch {
                expected: self.features(),
                got: other.features(),
            });
        }
        if self.outputs() != other.outputs() {
            return Err(IpcError::DimensionMismatch {
                expected: self.outputs(),
                got: other.outputs(),
            });
        }
        Ok(Self {
            n: self.n + other.n,
            sum_y2: self.sum_y2 + other.sum_y2,
            sum_xy: &self.sum_xy + &other.sum_xy,
            sum_xx: &self.sum_xx + &other.sum_xx,
        })
    }

    /// Solve the normal equations for the MSE-optimal readout.
    ///
    /// Cholesky on the positive-definite fast path; a singular-value
    /// pseudo-solve (cutoff [`GRAM_SOLVE_RTOL`] relative) yields the
    /// minimum-norm solution when finite samples leave the Gram
    /// rank-deficient.
    pub fn solve_readout(&self) -> Result<ReadoutSolution, IpcError> {
        if self.n == 0 {
            return Err(IpcError::EmptyAccumulator);
        }
        if self.sum_xx.iter().all(|&v| v == 0.0) {
            return Err(IpcError::ZeroGram);
        }
        let d = self.features();
        if let Some(chol) = Cholesky::new(self.sum_xx.clone()) {
            // The factor diagonal exposes near rank deficiency: eigenvalue
            // ratios below the truncation tolerance go to the pseudo-solve.
            let diag = chol.l_dirty().diagonal();
            let (min_d, max_d) = diag
                .iter()
                .fold((f64::MAX, 0.0_f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            if min_d > GRAM_SOLVE_RTOL.sqrt() * max_d {
                let weights = chol.solve(&self.sum_xy);
                if weights.iter().all(|v| v.is_finite()) {
                    return Ok(ReadoutSolution {
                        weights,
                        gram_rank: d,
                        solve_tolerance: GRAM_SOLVE_RTOL,
                    });
                }
            }
        }
        let svd = SVD::new(self.sum_xx.clone(), true, true);
        let sigma_max = svd.singular_values.max();
        let cutoff = GRAM_SOLVE_RTOL * sigma_max;
        let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
        let weights = svd
            .solve(&self.sum_xy, cutoff)
            .map_err(|_| IpcError::CorruptBlob("singular value decomposition failed"))?;
        Ok(ReadoutSolution {
            weights,
            gram_rank: rank,
            solve_tolerance: GRAM_SOLVE_RTOL,
        })
    }

    /// Training capacity of this segment: 1 minus the optimal readout's MSE
    /// normalized by the target's mean square. Lies in [0, 1].
    pub fn training_ipc(&self) -> Result<f64, IpcError> {
        if self.n == 0 {
            return Err(IpcError::EmptyAccumulator);
        }
        if self.sum_y2 <= 0.0 {
            return Err(IpcError::ZeroTarget);
        }
        let readout = self.solve_readout()?;
        let value = self.sum_xy.dot(&readout.weights) / self.sum_y2;
        Ok(value.clamp(0.0, 1.0))
    }

    /// Test capacity of `test` under the readout fitted on `self`.
    ///
    /// Never exceeds 1 but may be negative when the trained readout
    /// generalizes worse than predicting zero.
    pub fn test_ipc(&self, test: &Self) -> Result<f64, IpcError> {
        if self.n == 0 || test.n == 0 {
            return Err(IpcError::EmptyAccumulator);
        }
        if self.features() != test.features() || self.outputs() != test.outputs() {
            return Err(IpcError::DimensionMismatch {
                expected: self.features(),
                got: test.features(),
            });
        }
        if test.sum_y2 <= 0.0 {
            return Err(IpcError::ZeroTarget);
        }
        let w = self.solve_readout()?.weights;
        let inv_n = 1.0 / test.n as f64;
        let mean_xy = &test.sum_xy * inv_n;
        let mean_xx = &test.sum_xx * inv_n;
        let mean_y2 = test.sum_y2 * inv_n;
        // Tr[w^T (2 <x y^T>' - <x x^T>' w)] / <y^2>'
        let value = (2.0 * mean_xy.dot(&w) - (mean_xx * &w).dot(&w)) / mean_y2;
        Ok(value.min(1.0))
    }

    /// Serialize to a little-endian versioned blob for checkpointing.
    pub fn to_bytes(&self) -> Vec<u8> {
        let d = self.features();
        let k = self.outputs();
        let mut buf = Vec::with_capacity(24 + 8 * (1 + d * k + d * d));
        buf.extend_from_slice(BLOB_MAGIC);
        buf.extend_from_slice(&BLOB_VERSION.to_le_bytes());
        buf.extend_from_slice(&(d as u32).to_le_bytes());
        buf.extend_from_slice(&(k as u32).to_le_bytes());
        buf.extend_from_slice(&self.n.to_le_bytes());
        buf.extend_from_slice(&self.sum_y2.to_le_bytes());
        for r in 0..d {
            for c in 0..k {
                buf.extend_from_slice(&self.sum_xy[(r, c)].to_le_bytes());
            }
        }
        for r in 0..d {
            for c in 0..d {
                buf.extend_from_slice(&self.sum_xx[(r, c)].to_le_bytes());
            }
        }
        buf
    }

    /// Restore an accumulator written by [`MomentAccumulator::to_bytes`].
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IpcError> {
        let mut cursor = bytes;
        let mut take = |len: usize| -> Result<&[u8], IpcError> {
            if cursor.len() < len {
                return Err(IpcError::CorruptBlob("truncated"));
            }
            let (head, tail) = cursor.split_at(len);
            cursor = tail;
            Ok(head)
        };
        if take(4)? != BLOB_MAGIC {
            return Err(IpcError::CorruptBlob("bad magic"));
        }
        let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
        if version != BLOB_VERSION {
            return Err(IpcError::CorruptBlob("unsupported version"));
        }
        let d = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let k = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let n = u64::from_le_bytes(take(8)?.try_into().unwrap());
        let sum_y2 = f64::from_le_bytes(take(8)?.try_into().unwrap());
        let mut sum_xy = DMatrix::zeros(d, k);
        for r in 0..d {
            for c in 0..k {
                sum_xy[(r, c)] = f64::from_le_bytes(take(8)?.try_into().unwrap());
            }
        }
        let mut sum_xx = DMatrix::zeros(d, d);
        for r in 0..d {
            for c in 0..d {
                sum_xx[(r, c)] = f64::from_le_bytes(take(8)?.try_into().unwrap());
            }
        }
        if !cursor.is_empty() {
            return Err(IpcError::CorruptBlob("trailing bytes"));
        }
        Ok(Self {
            n,
            sum_y2,
            sum_xy,
            sum_xx,
        })
    }
}

/// Capacity threshold below which a finite-sample estimate is considered
/// indistinguishable from zero: `2 a / T` where `a` is the upper-`p`
/// chi-square quantile with `dof` degrees of freedom.
pub fn chi_square_threshold(dof: u64, p: f64, data_len: u64) -> Result<f64, IpcError> {
    if dof < 1 {
        return Err(IpcError::InvalidDof);
    }
    if !p.is_finite() || p <= 0.0 || p >= 1.0 {
        return Err(IpcError::InvalidTailProbability);
    }
    if data_len < 1 {
        return Err(IpcError::InvalidLength);
    }
    Ok(2.0 * chi_square_upper_quantile(dof, p) / data_len as f64)
}

/// Gate a capacity estimate: values at or below the threshold count as zero.
pub fn empirical_ipc(c: f64, threshold: f64) -> f64 {
    if c > threshold {
        c
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::derive_rng;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn vec1(v: f64) -> DVector<f64> {
        DVector::from_element(1, v)
    }

    #[test]
    fn single_sample_sums() {
        let mut acc = MomentAccumulator::new(1, 1);
        acc.accumulate(&vec1(1.0), &vec1(2.0)).unwrap();
        assert_eq!(acc.len(), 1);
        assert_eq!(acc.sum_y2, 4.0);
        assert_eq!(acc.sum_xy[(0, 0)], 2.0);
        assert_eq!(acc.sum_xx[(0, 0)], 1.0);
    }

    #[test]
    fn merge_equals_sequential_accumulation() {
        let s1 = (vec1(1.5), vec1(-2.0));
        let s2 = (vec1(0.25), vec1(4.0));
        let mut both = MomentAccumulator::new(1, 1);
        both.accumulate(&s1.0, &s1.1).unwrap();
        both.accumulate(&s2.0, &s2.1).unwrap();
        let mut a = MomentAccumulator::new(1, 1);
        a.accumulate(&s1.0, &s1.1).unwrap();
        let mut b = MomentAccumulator::new(1, 1);
        b.accumulate(&s2.0, &s2.1).unwrap();
        assert_eq!(a.merge(&b).unwrap(), both);
    }

    #[test]
    fn merge_matches_concatenated_stream_on_random_data() {
        let mut rng = derive_rng(21, &[]);
        let samples: Vec<(DVector<f64>, DVector<f64>)> = (0..200)
            .map(|_| {
                let x = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
                let y = DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
                (x, y)
            })
            .collect();
        let mut whole = MomentAccumulator::new(3, 2);
        for (x, y) in &samples {
            whole.accumulate(x, y).unwrap();
        }
        let mut left = MomentAccumulator::new(3, 2);
        let mut right = MomentAccumulator::new(3, 2);
        for (i, (x, y)) in samples.iter().enumerate() {
            if i < 120 { &mut left } else { &mut right }
                .accumulate(x, y)
                .unwrap();
        }
        let merged = left.merge(&right).unwrap();
        assert_eq!(merged.len(), whole.len());
        assert_relative_eq!(merged.sum_y2, whole.sum_y2, max_relative = 1e-12);
        assert_relative_eq!(merged.sum_xy, whole.sum_xy, max_relative = 1e-12);
        assert_relative_eq!(merged.sum_xx, whole.sum_xx, max_relative = 1e-12);
    }

    #[test]
    fn streaming_sums_match_two_pass_oracle() {
        let mut rng = derive_rng(22, &[]);
        let samples: Vec<(DVector<f64>, DVector<f64>)> = (0..10_000)
            .map(|_| {
                let x = DVector::from_fn(4, |_, _| rng.gen_range(-2.0..2.0));
                let y = DVector::from_fn(1, |_, _| rng.gen_range(-2.0..2.0));
                (x, y)
            })
            .collect();
        let mut acc = MomentAccumulator::new(4, 1);
        for (x, y) in &samples {
            acc.accumulate(x, y).unwrap();
        }
        // two-pass: materialize the design matrix, then form the products
        let mut xx = DMatrix::zeros(4, 4);
        let mut xy = DMatrix::zeros(4, 1);
        let mut y2 = 0.0;
        for (x, y) in &samples {
            xx += x * x.transpose();
            xy += x * y.transpose();
            y2 += y.norm_squared();
        }
        assert_relative_eq!(acc.sum_xx, xx, max_relative = 1e-10);
        assert_relative_eq!(acc.sum_xy, xy, max_relative = 1e-10);
        assert_relative_eq!(acc.sum_y2, y2, max_relative = 1e-10);
    }

    #[test]
    fn accumulate_rejects_mismatch_and_nan() {
        let mut acc = MomentAccumulator::new(2, 1);
        assert_eq!(
            acc.accumulate(&vec1(1.0), &vec1(1.0)),
            Err(IpcError::DimensionMismatch {
                expected: 2,
                got: 1
            })
        );
        let x = DVector::from_vec(vec![1.0, f64::NAN]);
        assert_eq!(
            acc.accumulate(&x, &vec1(1.0)),
            Err(IpcError::NonFiniteSample)
        );
        assert!(acc.is_empty());
    }

    #[test]
    fn readout_recovers_exact_linear_map() {
        let mut acc = MomentAccumulator::new(1, 1);
        for i in 1..=10 {
            let x = i as f64 * 0.3 - 1.6;
            acc.accumulate_scalar(x, 3.0 * x).unwrap();
        }
        let sol = acc.solve_readout().unwrap();
        assert_relative_eq!(sol.weights[(0, 0)], 3.0, epsilon = 1e-12);
        assert_eq!(sol.gram_rank, 1);
        assert_relative_eq!(acc.training_ipc().unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn readout_closed_form_two_points() {
        // x = (1, 1), y = (1, 2): least squares gives w = 1.5, capacity 0.9.
        let mut acc = MomentAccumulator::new(1, 1);
        acc.accumulate_scalar(1.0, 1.0).unwrap();
        acc.accumulate_scalar(1.0, 2.0).unwrap();
        let sol = acc.solve_readout().unwrap();
        assert_relative_eq!(sol.weights[(0, 0)], 1.5, epsilon = 1e-14);
        assert_relative_eq!(acc.training_ipc().unwrap(), 0.9, epsilon = 1e-14);
    }

    #[test]
    fn duplicated_columns_take_minimum_norm_solution() {
        let mut acc = MomentAccumulator::new(2, 1);
        let mut rng = derive_rng(23, &[]);
        for _ in 0..50 {
            let v = rng.gen_range(-1.0..1.0);
            let x = DVector::from_vec(vec![v, v]);
            acc.accumulate(&x, &vec1(2.0 * v)).unwrap();
        }
        let sol = acc.solve_readout().unwrap();
        assert_eq!(sol.gram_rank, 1);
        // w1 + w2 = 2 fits exactly; minimum norm splits it evenly
        assert_relative_eq!(sol.weights[(0, 0)], 1.0, epsilon = 1e-9);
        assert_relative_eq!(sol.weights[(1, 0)], 1.0, epsilon = 1e-9);
        // normal-equation defect stays below the advertised tolerance
        let defect = (&acc.sum_xx * &sol.weights - &acc.sum_xy).norm();
        assert!(defect <= sol.solve_tolerance * acc.sum_xy.norm().max(1.0));
        assert_relative_eq!(acc.training_ipc().unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn uncorrelated_target_has_zero_training_ipc() {
        let mut acc = MomentAccumulator::new(1, 1);
        // +x and -x pair off: sum_xy = 0 exactly
        acc.accumulate_scalar(1.0, 1.0).unwrap();
        acc.accumulate_scalar(-1.0, 1.0).unwrap();
        assert_eq!(acc.training_ipc().unwrap(), 0.0);
    }

    #[test]
    fn zero_target_is_an_error() {
        let mut acc = MomentAccumulator::new(1, 1);
        acc.accumulate_scalar(1.0, 0.0).unwrap();
        assert_eq!(acc.training_ipc().unwrap_err(), IpcError::ZeroTarget);
        assert_eq!(
            MomentAccumulator::new(1, 1).training_ipc().unwrap_err(),
            IpcError::EmptyAccumulator
        );
    }

    #[test]
    fn test_ipc_on_training_segment_reduces_to_training_ipc() {
        let mut acc = MomentAccumulator::new(2, 1);
        let mut rng = derive_rng(24, &[]);
        for _ in 0..100 {
            let x = DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
            let y = vec1(x[0] - 0.4 * x[1] + 0.1 * rng.gen_range(-1.0..1.0));
            acc.accumulate(&x, &y).unwrap();
        }
        assert_relative_eq!(
            acc.test_ipc(&acc).unwrap(),
            acc.training_ipc().unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn test_ipc_matches_explicit_residual_oracle() {
        let mut rng = derive_rng(25, &[]);
        for _ in 0..20 {
            let mut train = MomentAccumulator::new(3, 1);
            let mut test = MomentAccumulator::new(3, 1);
            let mut test_samples = Vec::new();
            for i in 0..200 {
                let x = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
                let y = vec1(0.7 * x[0] + x[2] * x[1] + 0.3 * rng.gen_range(-1.0..1.0));
                if i < 100 {
                    train.accumulate(&x, &y).unwrap();
                } else {
                    test.accumulate(&x, &y).unwrap();
                    test_samples.push((x, y));
                }
            }
            let w = train.solve_readout().unwrap().weights;
            let mut loss = 0.0;
            let mut norm = 0.0;
            for (x, y) in &test_samples {
                loss += (y - w.tr_mul(x)).norm_squared();
                norm += y.norm_squared();
            }
            let oracle = 1.0 - loss / norm;
            assert_relative_eq!(test.ipc_vs(&train), oracle, epsilon = 1e-10);
        }
    }

    impl MomentAccumulator {
        /// test helper: capacity of self as the held-out segment
        fn ipc_vs(&self, train: &Self) -> f64 {
            train.test_ipc(self).unwrap()
        }
    }

    #[test]
    fn perfect_linear_target_generalizes_perfectly() {
        let mut train = MomentAccumulator::new(2, 1);
        let mut test = MomentAccumulator::new(2, 1);
        let mut rng = derive_rng(26, &[]);
        for i in 0..80 {
            let x = DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
            let y = vec1(2.0 * x[0] - x[1]);
            if i < 40 { &mut train } else { &mut test }
                .accumulate(&x, &y)
                .unwrap();
        }
        assert_relative_eq!(train.test_ipc(&test).unwrap(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn training_ipc_never_decreases_with_added_feature() {
        let mut rng = derive_rng(27, &[]);
        for _ in 0..50 {
            let n = rng.gen_range(20..60);
            let mut small = MomentAccumulator::new(2, 1);
            let mut big = MomentAccumulator::new(3, 1);
            for _ in 0..n {
                let x = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
                let y = vec1(rng.gen_range(-1.0..1.0));
                small.accumulate(&x.rows(0, 2).into_owned(), &y).unwrap();
                big.accumulate(&x, &y).unwrap();
            }
            let c_small = small.training_ipc().unwrap();
            let c_big = big.training_ipc().unwrap();
            assert!(
                c_big >= c_small - 1e-12,
                "nested model lost capacity: {c_small} vs {c_big}"
            );
        }
    }

    #[test]
    fn capacity_is_scale_invariant_in_the_target() {
        let mut rng = derive_rng(28, &[]);
        for _ in 0..20 {
            let kappa: f64 = {
                let k = rng.gen_range(0.01_f64..100.0);
                if rng.gen_bool(0.5) {
                    -k
                } else {
                    k
                }
            };
            let mut base_train = MomentAccumulator::new(2, 1);
            let mut base_test = MomentAccumulator::new(2, 1);
            let mut scaled_train = MomentAccumulator::new(2, 1);
            let mut scaled_test = MomentAccumulator::new(2, 1);
            for i in 0..120 {
                let x = DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
                let y = vec1(x[0] * 0.3 + 0.5 * rng.gen_range(-1.0..1.0));
                let (bt, st) = if i < 60 {
                    (&mut base_train, &mut scaled_train)
                } else {
                    (&mut base_test, &mut scaled_test)
                };
                bt.accumulate(&x, &y).unwrap();
                st.accumulate(&x, &(&y * kappa)).unwrap();
            }
            assert_relative_eq!(
                base_train.training_ipc().unwrap(),
                scaled_train.training_ipc().unwrap(),
                max_relative = 1e-10
            );
            assert_relative_eq!(
                base_train.test_ipc(&base_test).unwrap(),
                scaled_train.test_ipc(&scaled_test).unwrap(),
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn chi_square_thresholds_match_quoted_values() {
        // single readout parameter at T = 600
        let th = chi_square_threshold(1, 1e-4, 600).unwrap();
        assert!((th - 0.0505).abs() < 0.0005, "threshold {th}");
        // hundred-node reservoir at T = 10^4
        let th = chi_square_threshold(100, 1e-4, 10_000).unwrap();
        assert!((th - 0.032264).abs() < 1e-5, "threshold {th}");
        // two degrees of freedom invert the exponential tail exactly
        let th = chi_square_threshold(2, 0.5, 1000).unwrap();
        assert_relative_eq!(th, 2.0 * 1.3862943611198906 / 1000.0, max_relative = 1e-12);
    }

    #[test]
    fn chi_square_threshold_validates_arguments() {
        assert_eq!(
            chi_square_threshold(0, 0.5, 10).unwrap_err(),
            IpcError::InvalidDof
        );
        assert_eq!(
            chi_square_threshold(1, 0.0, 10).unwrap_err(),
            IpcError::InvalidTailProbability
        );
        assert_eq!(
            chi_square_threshold(1, 1.0, 10).unwrap_err(),
            IpcError::InvalidTailProbability
        );
        assert_eq!(
            chi_square_threshold(1, 0.5, 0).unwrap_err(),
            IpcError::InvalidLength
        );
    }

    #[test]
    fn empirical_gate_examples_and_idempotence() {
        assert_eq!(empirical_ipc(0.9, 0.05), 0.9);
        assert_eq!(empirical_ipc(0.03, 0.05), 0.0);
        assert_eq!(empirical_ipc(0.997654, 0.032264), 0.997654);
        let mut rng = derive_rng(29, &[]);
        for _ in 0..200 {
            let c = rng.gen_range(-0.5..1.5);
            let th = rng.gen_range(0.0..0.5);
            let once = empirical_ipc(c, th);
            assert_eq!(empirical_ipc(once, th), once);
        }
    }

    #[test]
    fn blob_round_trip_and_rejection() {
        let mut acc = MomentAccumulator::new(3, 2);
        let mut rng = derive_rng(30, &[]);
        for _ in 0..17 {
            let x = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
            let y = DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
            acc.accumulate(&x, &y).unwrap();
        }
        let bytes = acc.to_bytes();
        assert_eq!(MomentAccumulator::from_bytes(&bytes).unwrap(), acc);

        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert_eq!(
            MomentAccumulator::from_bytes(&bad_magic).unwrap_err(),
            IpcError::CorruptBlob("bad magic")
        );
        let mut bad_version = bytes.clone();
        bad_version[4] = 9;
        assert_eq!(
            MomentAccumulator::from_bytes(&bad_version).unwrap_err(),
            IpcError::CorruptBlob("unsupported version")
        );
        assert_eq!(
            MomentAccumulator::from_bytes(&bytes[..bytes.len() - 3]).unwrap_err(),
            IpcError::CorruptBlob("truncated")
        );
    }
}
