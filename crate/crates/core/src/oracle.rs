//! Brute-force reference computations: exhaustive enumeration over all
//! hidden assignments and central finite differences.
//!
//! These are exponential in `H * T` and exist to check the fast paths.

use crate::error::{Error, Result};
use crate::inference::{log_predictive, Marginals};
use crate::learning::Gradient;
use crate::math::{logsumexp, logsumexp2};
use crate::model::{energy, Block, HiddenAssignment, HulmParams, LabelVector, TimeSeries};

/// Cap on the number of enumerated hidden assignments.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleBudget {
    pub max_states: u64,
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget { max_states: 1 << 20 }
    }
}

impl OracleBudget {
    /// Fails unless `2^(hidden * len)` states fit in the budget.
    pub fn check(&self, hidden: usize, len: usize) -> Result<u64> {
        let bits = hidden * len;
        let states = if bits < 64 { 1u64 << bits } else { u64::MAX };
        if bits >= 64 || states > self.max_states {
            return Err(Error::Budget { bits, max_states: self.max_states });
        }
        Ok(states)
    }
}

/// Energies of every hidden assignment, indexed by enumeration code.
fn all_energies(x: &TimeSeries, y: &LabelVector, theta: &HulmParams, budget: OracleBudget) -> Result<Vec<f64>> {
    let (len, hidden) = (x.len(), theta.hidden());
    let states = budget.check(hidden, len)?;
    (0..states).map(|code| energy(x, &HiddenAssignment::from_code(len, hidden, code), y, theta)).collect()
}

/// `log sum_z exp(energy(x, z, y))` by direct enumeration.
pub fn brute_log_m(x: &TimeSeries, y: &LabelVector, theta: &HulmParams, budget: OracleBudget) -> Result<f64> {
    let (len, hidden) = (x.len(), theta.hidden());
    let states = budget.check(hidden, len)?;
    let mut acc = f64::NEG_INFINITY;
    for code in 0..states {
        acc = logsumexp2(acc, energy(x, &HiddenAssignment::from_code(len, hidden, code), y, theta)?);
    }
    Ok(acc)
}

/// `p(y | x)` for every label by enumeration over all `(z, y)`.
pub fn brute_predict_distribution(x: &TimeSeries, theta: &HulmParams, budget: OracleBudget) -> Result<Vec<f64>> {
    let scores =
        (0..theta.classes()).map(|k| brute_log_m(x, &LabelVector::new(k, theta.classes())?, theta, budget)).collect::<Result<Vec<_>>>()?;
    let norm = logsumexp(&scores);
    Ok(scores.iter().map(|s| (s - norm).exp()).collect())
}

/// Posterior node and edge marginals by normalized enumeration.
pub fn brute_marginals(x: &TimeSeries, y: &LabelVector, theta: &HulmParams, budget: OracleBudget) -> Result<Marginals> {
    let (len, hidden) = (x.len(), theta.hidden());
    let energies = all_energies(x, y, theta, budget)?;
    let norm = logsumexp(&energies);
    let mut out = Marginals::zeros(len, hidden);
    for (code, e) in energies.iter().enumerate() {
        let weight = (e - norm).exp();
        let z = HiddenAssignment::from_code(len, hidden, code as u64);
        for t in 0..len {
            for h in 0..hidden {
                let k = usize::from(z.get(t, h));
                *out.gamma_mut(t, h, k) += weight;
                if t + 1 < len {
                    let l = usize::from(z.get(t + 1, h));
                    *out.xi_mut(t, h, k, l) += weight;
                }
            }
        }
    }
    Ok(out)
}

/// Central finite differences of the single-example unregularized
/// log-likelihood `log p(y | x)`.
pub fn finite_diff_gradient(x: &TimeSeries, y: &LabelVector, theta: &HulmParams, step: f64) -> Result<Gradient> {
    if !(step > 0.0) {
        return Err(Error::invalid(format!("finite-difference step must be positive, got {step}")));
    }
    let mut grad = Gradient::zeros_like(theta);
    let mut probe = theta.clone();
    for block in Block::ALL {
        for i in 0..theta.block(block).len() {
            let orig = theta.block(block)[i];
            probe.block_mut(block)[i] = orig + step;
            let plus = log_predictive(x, y, &probe)?;
            probe.block_mut(block)[i] = orig - step;
            let minus = log_predictive(x, y, &probe)?;
            probe.block_mut(block)[i] = orig;
            grad.block_mut(block)[i] = (plus - minus) / (2.0 * step);
        }
    }
    Ok(grad)
}

/// Relative error `|a - b| / max(|a|, |b|)`, or the absolute error when both
/// magnitudes are below `floor`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    let diff = (a - b).abs();
    let scale = a.abs().max(b.abs());
    if scale < floor {
        diff
    } else {
        diff / scale
    }
}
