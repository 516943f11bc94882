//! Domain types, the energy function, local log-potentials and initialization.
//!
//! Time and hidden-unit indices are zero-based throughout: a series of length
//! `T` has steps `0..T`, and the virtual hidden state before step 0 is fixed
//! to 0.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::dot;
use crate::matrix::Matrix;

/// Variance of the Gaussian used for `A`, `W` and `V` at initialization.
pub const INIT_VARIANCE: f64 = 1e-3;

/// A `T x D` sequence of real-valued frames with optional label and group.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    frames: Matrix,
    pub label: Option<usize>,
    pub group: Option<String>,
}

impl TimeSeries {
    pub fn new(frames: Matrix) -> Result<Self> {
        if frames.rows() == 0 || frames.cols() == 0 {
            return Err(Error::invalid(format!("time series must have T >= 1 and D >= 1, got {}x{}", frames.rows(), frames.cols())));
        }
        if let Some(pos) = frames.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite frame value at step {}, feature {}", pos / frames.cols(), pos % frames.cols())));
        }
        Ok(TimeSeries { frames, label: None, group: None })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn with_label(mut self, label: usize) -> Self {
        self.label = Some(label);
        self
    }

    pub fn with_group(mut self, group: impl Into<String>) -> Self {
        self.group = Some(group.into());
        self
    }

    /// Number of time steps `T`.
    #[inline]
    pub fn len(&self) -> usize {
        self.frames.rows()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Feature dimensionality `D`.
    #[inline]
    pub fn dim(&self) -> usize {
        self.frames.cols()
    }

    #[inline]
    pub fn frame(&self, t: usize) -> &[f64] {
        self.frames.row(t)
    }

    pub fn frames(&self) -> &Matrix {
        &self.frames
    }

    /// Sum of all frames over time.
    pub fn frame_sum(&self) -> Vec<f64> {
        let mut sum = vec![0.0; self.dim()];
        for row in self.frames.iter_rows() {
            for (s, v) in sum.iter_mut().zip(row) {
                *s += v;
            }
        }
        sum
    }
}

/// 1-of-K label encoding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LabelVector {
    class: usize,
    num_classes: usize,
}

impl LabelVector {
    pub fn new(class: usize, num_classes: usize) -> Result<Self> {
        if class >= num_classes {
            return Err(Error::invalid(format!("label {class} out of range for K = {num_classes}")));
        }
        Ok(LabelVector { class, num_classes })
    }

    #[inline]
    pub fn class(&self) -> usize {
        self.class
    }

    #[inline]
    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn one_hot(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.num_classes];
        v[self.class] = 1.0;
        v
    }
}

/// Identifies one parameter block of [`HulmParams`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Block {
    Pi,
    Tau,
    A,
    W,
    V,
    B,
    C,
}

impl Block {
    pub const ALL: [Block; 7] = [Block::Pi, Block::Tau, Block::A, Block::W, Block::V, Block::B, Block::C];

    pub fn name(self) -> &'static str {
        match self {
            Block::Pi => "pi",
            Block::Tau => "tau",
            Block::A => "A",
            Block::W => "W",
            Block::V => "V",
            Block::B => "b",
            Block::C => "c",
        }
    }

    /// Whether the L2 penalty applies to this block.
    pub fn regularized(self) -> bool {
        matches!(self, Block::A | Block::W | Block::V)
    }
}

/// Parameters of the hidden-unit logistic model.
///
/// `a` holds the diagonal of the transition matrix, so each hidden unit forms
/// its own binary chain. `w` is `H x D` and `v` is `H x K`.
#[derive(Clone, Debug, PartialEq)]
pub struct HulmParams {
    pub pi: Vec<f64>,
    pub tau: Vec<f64>,
    pub a: Vec<f64>,
    pub w: Matrix,
    pub v: Matrix,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl HulmParams {
    pub fn zeros(hidden: usize, dim: usize, classes: usize) -> Self {
        HulmParams {
            pi: vec![0.0; hidden],
            tau: vec![0.0; hidden],
            a: vec![0.0; hidden],
            w: Matrix::zeros(hidden, dim),
            v: Matrix::zeros(hidden, classes),
            b: vec![0.0; hidden],
            c: vec![0.0; classes],
        }
    }

    #[inline]
    pub fn hidden(&self) -> usize {
        self.a.len()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.w.cols()
    }

    #[inline]
    pub fn classes(&self) -> usize {
        self.c.len()
    }

    /// Checks shape consistency and finiteness.
    pub fn validate(&self) -> Result<()> {
        let h = self.hidden();
        if h == 0 || self.dim() == 0 || self.classes() == 0 {
            return Err(Error::invalid("H, D and K must all be at least 1"));
        }
        let shapes_ok = self.pi.len() == h
            && self.tau.len() == h
            && self.b.len() == h
            && self.w.rows() == h
            && self.v.rows() == h
            && self.v.cols() == self.classes();
        if !shapes_ok {
            return Err(Error::invalid("parameter blocks have inconsistent shapes"));
        }
        for (block, values) in self.blocks() {
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericRange(format!("non-finite entry in block {}", block.name())));
            }
        }
        Ok(())
    }

    pub fn block(&self, block: Block) -> &[f64] {
        match block {
            Block::Pi => &self.pi,
            Block::Tau => &self.tau,
            Block::A => &self.a,
            Block::W => self.w.as_slice(),
            Block::V => self.v.as_slice(),
            Block::B => &self.b,
            Block::C => &self.c,
        }
    }

    pub fn block_mut(&mut self, block: Block) -> &mut [f64] {
        match block {
            Block::Pi => &mut self.pi,
            Block::Tau => &mut self.tau,
            Block::A => &mut self.a,
            Block::W => self.w.as_mut_slice(),
            Block::V => self.v.as_mut_slice(),
            Block::B => &mut self.b,
            Block::C => &mut self.c,
        }
    }

    pub fn blocks(&self) -> impl Iterator<Item = (Block, &[f64])> {
        Block::ALL.into_iter().map(move |b| (b, self.block(b)))
    }

    pub fn num_params(&self) -> usize {
        self.blocks().map(|(_, v)| v.len()).sum()
    }

    /// `self += scale * other`, block by block.
    pub fn add_scaled(&mut self, other: &HulmParams, scale: f64) {
        for block in Block::ALL {
            for (a, b) in self.block_mut(block).iter_mut().zip(other.block(block)) {
                *a += scale * b;
            }
        }
    }

    /// Sum of squares of the regularized blocks `A`, `W`, `V`.
    pub fn l2_norm_sq(&self) -> f64 {
        Block::ALL.into_iter().filter(|b| b.regularized()).flat_map(|b| self.block(b).iter()).map(|v| v * v).sum()
    }

    pub(crate) fn check_series(&self, x: &TimeSeries) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::invalid(format!("series has D = {}, model expects D = {}", x.dim(), self.dim())));
        }
        Ok(())
    }

    pub(crate) fn check_label(&self, y: &LabelVector) -> Result<()> {
        if y.num_classes() != self.classes() {
            return Err(Error::invalid(format!("label vector has K = {}, model expects K = {}", y.num_classes(), self.classes())));
        }
        Ok(())
    }
}

/// A full binary assignment `z` of the `T x H` hidden units.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HiddenAssignment {
    len: usize,
    hidden: usize,
    bits: Vec<u8>,
}

impl HiddenAssignment {
    pub fn zeros(len: usize, hidden: usize) -> Self {
        HiddenAssignment { len, hidden, bits: vec![0; len * hidden] }
    }

    pub fn ones(len: usize, hidden: usize) -> Self {
        HiddenAssignment { len, hidden, bits: vec![1; len * hidden] }
    }

    /// Decodes an enumeration index: bit `t * H + h` of `code` is `z[t][h]`.
    pub fn from_code(len: usize, hidden: usize, code: u64) -> Self {
        let bits = (0..len * hidden).map(|i| ((code >> i) & 1) as u8).collect();
        HiddenAssignment { len, hidden, bits }
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let hidden = rows.first().map_or(0, Vec::len);
        let mut bits = Vec::with_capacity(rows.len() * hidden);
        for row in rows {
            if row.len() != hidden || row.iter().any(|&b| b > 1) {
                return Err(Error::invalid("hidden assignment rows must be equal-length bit vectors"));
            }
            bits.extend_from_slice(row);
        }
        Ok(HiddenAssignment { len: rows.len(), hidden, bits })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    #[inline]
    pub fn get(&self, t: usize, h: usize) -> u8 {
        self.bits[t * self.hidden + h]
    }

    pub fn set(&mut self, t: usize, h: usize, bit: u8) {
        self.bits[t * self.hidden + h] = bit & 1;
    }
}

/// Training hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub hidden_units: usize,
    pub l2_lambda: f64,
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams { hidden_units: 100, l2_lambda: 0.0, learning_rate: 0.01, lr_decay: 0.98, epochs: 200, batch_size: 1, seed: 0 }
    }
}

impl Hyperparams {
    /// `learning_rate = 0` and `epochs = 0` are accepted; both leave the
    /// initial parameters untouched.
    pub fn validate(&self) -> Result<()> {
        if self.hidden_units == 0 {
            return Err(Error::invalid("hidden_units must be positive"));
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return Err(Error::invalid("l2_lambda must be a finite nonnegative number"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be a finite nonnegative number"));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::invalid("lr_decay must lie in (0, 1]"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be positive"));
        }
        Ok(())
    }

    /// Step size used during epoch `epoch` (zero-based).
    pub fn step_size(&self, epoch: usize) -> f64 {
        self.learning_rate * self.lr_decay.powi(epoch as i32)
    }
}

/// Energy of a (series, hidden assignment, label) triple.
pub fn energy(x: &TimeSeries, z: &HiddenAssignment, y: &LabelVector, theta: &HulmParams) -> Result<f64> {
    theta.check_series(x)?;
    theta.check_label(y)?;
    let (len, hidden) = (x.len(), theta.hidden());
    if z.len() != len || z.hidden() != hidden {
        return Err(Error::invalid(format!("hidden assignment is {}x{}, expected {len}x{hidden}", z.len(), z.hidden())));
    }
    let k = y.class();
    let mut e = theta.c[k];
    for h in 0..hidden {
        e += f64::from(z.get(0, h)) * theta.pi[h];
        e += f64::from(z.get(len - 1, h)) * theta.tau[h];
    }
    for t in 1..len {
        for h in 0..hidden {
            e += f64::from(z.get(t - 1, h) * z.get(t, h)) * theta.a[h];
        }
    }
    for t in 0..len {
        let xt = x.frame(t);
        for h in 0..hidden {
            if z.get(t, h) == 1 {
                e += dot(theta.w.row(h), xt) + theta.v.get(h, k) + theta.b[h];
            }
        }
    }
    Ok(e)
}

/// Log of the local potential of chain `h` at step `t` of a series of length
/// `len`, for the transition `k_prev -> k`.
///
/// Boundary biases are folded in: `pi_h` at `t = 0`, `tau_h` at `t = len - 1`.
/// At `t = 0` the previous state is the virtual zero state and `k_prev` is
/// ignored. The label bias `c` is not part of any local potential.
#[allow(clippy::too_many_arguments)]
pub fn log_potential(theta: &HulmParams, x_t: &[f64], y: &LabelVector, t: usize, len: usize, h: usize, k_prev: u8, k: u8) -> Result<f64> {
    if t >= len || h >= theta.hidden() || k_prev > 1 || k > 1 {
        return Err(Error::invalid(format!(
            "log_potential index out of range: t={t} (T={len}), h={h} (H={}), k_prev={k_prev}, k={k}",
            theta.hidden()
        )));
    }
    if x_t.len() != theta.dim() {
        return Err(Error::invalid(format!("frame has D = {}, expected {}", x_t.len(), theta.dim())));
    }
    theta.check_label(y)?;
    if k == 0 {
        return Ok(0.0);
    }
    let prev = if t == 0 { 0.0 } else { f64::from(k_prev) };
    let mut v = prev * theta.a[h] + dot(theta.w.row(h), x_t) + theta.v.get(h, y.class()) + theta.b[h];
    if t == 0 {
        v += theta.pi[h];
    }
    if t == len - 1 {
        v += theta.tau[h];
    }
    Ok(v)
}

/// Draws `A`, `W`, `V` i.i.d. from `N(0, 1e-3)`; `pi`, `tau`, `b`, `c` start at 0.
pub fn init_params(hidden: usize, dim: usize, classes: usize, seed: u64) -> Result<HulmParams> {
    if hidden == 0 || dim == 0 || classes == 0 {
        return Err(Error::invalid("H, D and K must all be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, INIT_VARIANCE.sqrt()).expect("valid normal");
    let mut theta = HulmParams::zeros(hidden, dim, classes);
    for block in [Block::A, Block::W, Block::V] {
        for v in theta.block_mut(block) {
            *v = normal.sample(&mut rng);
        }
    }
    Ok(theta)
}


#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;
    use rand::{Rng, SeedableRng};

    fn label(k: usize, n: usize) -> LabelVector {
        LabelVector::new(k, n).unwrap()
    }

    #[test]
    fn energy_of_zero_assignment_is_label_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let theta = random_params(&mut rng, 3, 2, 3, 1.0);
        let x = random_series(&mut rng, 4, 2);
        let z = HiddenAssignment::zeros(4, 3);
        for k in 0..3 {
            assert_eq!(energy(&x, &z, &label(k, 3), &theta).unwrap(), theta.c[k]);
        }
    }

    #[test]
    fn energy_single_step_single_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let theta = random_params(&mut rng, 1, 2, 2, 1.0);
        let x = random_series(&mut rng, 1, 2);
        let z = HiddenAssignment::ones(1, 1);
        let e = energy(&x, &z, &label(1, 2), &theta).unwrap();
        let expected = theta.pi[0] + theta.tau[0] + theta.c[1] + dot(theta.w.row(0), x.frame(0)) + theta.v.get(0, 1) + theta.b[0];
        assert!((e - expected).abs() < 1e-15);
    }

    #[test]
    fn energy_counts_transitions_t_minus_one_times() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let theta = random_params(&mut rng, 1, 2, 2, 1.0);
        let x = TimeSeries::from_rows(&vec![vec![0.0, 0.0]; 3]).unwrap();
        let z = HiddenAssignment::ones(3, 1);
        let e = energy(&x, &z, &label(0, 2), &theta).unwrap();
        let expected = theta.pi[0] + theta.tau[0] + theta.c[0] + 2.0 * theta.a[0] + 3.0 * (theta.v.get(0, 0) + theta.b[0]);
        assert!((e - expected).abs() < 1e-14);
    }

    #[test]
    fn energy_rejects_mismatched_shapes() {
        let theta = HulmParams::zeros(2, 2, 2);
        let x = TimeSeries::from_rows(&vec![vec![0.0, 0.0]; 3]).unwrap();
        assert!(energy(&x, &HiddenAssignment::zeros(2, 2), &label(0, 2), &theta).is_err());
        assert!(energy(&x, &HiddenAssignment::zeros(3, 1), &label(0, 2), &theta).is_err());
        assert!(energy(&x, &HiddenAssignment::zeros(3, 2), &label(0, 3), &theta).is_err());
        let wide = TimeSeries::from_rows(&[vec![0.0; 3]]).unwrap();
        assert!(energy(&wide, &HiddenAssignment::zeros(1, 2), &label(0, 2), &theta).is_err());
    }

    #[test]
    fn potential_of_off_state_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let theta = random_params(&mut rng, 2, 2, 2, 1.0);
        let x = random_series(&mut rng, 3, 2);
        for t in 0..3 {
            for h in 0..2 {
                for kp in 0..2 {
                    assert_eq!(log_potential(&theta, x.frame(t), &label(1, 2), t, 3, h, kp, 0).unwrap(), 0.0);
                }
            }
        }
    }

    #[test]
    fn first_step_potential_includes_boundary_biases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut theta = random_params(&mut rng, 2, 2, 2, 1.0);
        theta.v = Matrix::zeros(2, 2);
        let zero = [0.0, 0.0];
        let y = label(1, 2);
        let v = log_potential(&theta, &zero, &y, 0, 3, 1, 1, 1).unwrap();
        assert!((v - (theta.pi[1] + theta.b[1])).abs() < 1e-15);
        let single = log_potential(&theta, &zero, &y, 0, 1, 1, 0, 1).unwrap();
        assert!((single - (theta.pi[1] + theta.b[1] + theta.tau[1])).abs() < 1e-15);
    }

    #[test]
    fn potential_rejects_bad_indices() {
        let theta = HulmParams::zeros(2, 1, 2);
        let y = label(0, 2);
        assert!(log_potential(&theta, &[0.0], &y, 3, 3, 0, 0, 1).is_err());
        assert!(log_potential(&theta, &[0.0], &y, 0, 3, 2, 0, 1).is_err());
        assert!(log_potential(&theta, &[0.0], &y, 0, 3, 0, 2, 1).is_err());
        assert!(log_potential(&theta, &[0.0, 1.0], &y, 0, 3, 0, 0, 1).is_err());
    }

    #[test]
    fn potentials_sum_to_energy_over_all_assignments() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let hidden = rng.gen_range(1..=3);
            let len = rng.gen_range(1..=4);
            let theta = random_params(&mut rng, hidden, 2, 3, 1.0);
            let x = random_series(&mut rng, len, 2);
            let y = label(rng.gen_range(0..3), 3);
            for code in 0..(1u64 << (hidden * len)) {
                let z = HiddenAssignment::from_code(len, hidden, code);
                let mut total = theta.c[y.class()];
                for t in 0..len {
                    for h in 0..hidden {
                        let prev = if t == 0 { 0 } else { z.get(t - 1, h) };
                        total += log_potential(&theta, x.frame(t), &y, t, len, h, prev, z.get(t, h)).unwrap();
                    }
                }
                let e = energy(&x, &z, &y, &theta).unwrap();
                assert!((total - e).abs() < 1e-12, "code {code}: {total} vs {e}");
            }
        }
    }

    #[test]
    fn energy_is_additive_over_parameter_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let theta = random_params(&mut rng, 2, 2, 2, 1.0);
        let x = random_series(&mut rng, 3, 2);
        let z = HiddenAssignment::from_code(3, 2, 0b101101);
        let y = label(1, 2);
        let full = energy(&x, &z, &y, &theta).unwrap();
        let sum: f64 = Block::ALL
            .into_iter()
            .map(|block| {
                let mut only = HulmParams::zeros(2, 2, 2);
                only.block_mut(block).copy_from_slice(theta.block(block));
                energy(&x, &z, &y, &only).unwrap()
            })
            .sum();
        assert!((full - sum).abs() < 1e-12);
    }

    #[test]
    fn init_is_deterministic_and_zeroes_biases() {
        let a = init_params(4, 3, 2, 99).unwrap();
        let b = init_params(4, 3, 2, 99).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, init_params(4, 3, 2, 100).unwrap());
        for block in [Block::Pi, Block::Tau, Block::B, Block::C] {
            assert!(a.block(block).iter().all(|&v| v == 0.0));
        }
        assert!(init_params(0, 3, 2, 1).is_err());
    }

    #[test]
    fn init_variance_matches_target() {
        // 10^6 pooled W entries across seeds of an H=100, D=39, K=10 model.
        let mut n = 0usize;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        let mut seed = 0;
        while n < 1_000_000 {
            let theta = init_params(100, 39, 10, seed).unwrap();
            for &v in theta.w.as_slice() {
                sum += v;
                sum_sq += v * v;
            }
            n += theta.w.as_slice().len();
            seed += 1;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        assert!((var - INIT_VARIANCE).abs() < 0.1 * INIT_VARIANCE, "variance {var}");
    }

    #[test]
    fn hyperparams_validation() {
        assert!(Hyperparams::default().validate().is_ok());
        let bad = [
            Hyperparams { hidden_units: 0, ..Default::default() },
            Hyperparams { l2_lambda: -1.0, ..Default::default() },
            Hyperparams { lr_decay: 0.0, ..Default::default() },
            Hyperparams { lr_decay: 1.5, ..Default::default() },
            Hyperparams { batch_size: 0, ..Default::default() },
        ];
        for h in bad {
            assert!(h.validate().is_err(), "{h:?}");
        }
    }

    #[test]
    fn time_series_rejects_non_finite_and_empty() {
        assert!(TimeSeries::from_rows(&[vec![f64::NAN]]).is_err());
        assert!(TimeSeries::from_rows(&[]).is_err());
        assert!(TimeSeries::from_rows(&[vec![]]).is_err());
    }
}
