//! Exact forward-backward inference over the independent binary hidden chains.
//!
//! Every chain `h` is a two-state Markov chain whose log-potential for the
//! transition `i -> k` at step `t` is `k * (u[t][h] + i * A[h])`, where the
//! unary term `u` collects the input, label, bias and boundary contributions.
//! All messages are kept in the log domain.

use crate::error::{Error, Result};
use crate::math::{argmax, dot, logsumexp, logsumexp2, softmax};
use crate::model::{HulmParams, LabelVector, TimeSeries};

/// `T x H x 2` array of log-domain messages.
#[derive(Clone, Debug, PartialEq)]
pub struct LogMessages {
    len: usize,
    hidden: usize,
    data: Vec<f64>,
}

impl LogMessages {
    fn new(len: usize, hidden: usize) -> Self {
        LogMessages { len, hidden, data: vec![0.0; len * hidden * 2] }
    }

    #[inline]
    fn idx(&self, t: usize, h: usize, k: usize) -> usize {
        (t * self.hidden + h) * 2 + k
    }

    #[inline]
    pub fn get(&self, t: usize, h: usize, k: usize) -> f64 {
        self.data[self.idx(t, h, k)]
    }

    #[inline]
    fn set(&mut self, t: usize, h: usize, k: usize, v: f64) {
        let i = self.idx(t, h, k);
        self.data[i] = v;
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
}

/// Forward and backward messages of one (series, label) pair.
#[derive(Clone, Debug, PartialEq)]
pub struct MessageTable {
    pub log_alpha: LogMessages,
    pub log_beta: LogMessages,
    /// `log sum_k alpha[T-1][h][k]` per chain.
    pub log_chain: Vec<f64>,
}

/// Posterior node and edge marginals of the hidden chains.
#[derive(Clone, Debug, PartialEq)]
pub struct Marginals {
    len: usize,
    hidden: usize,
    gamma: Vec<f64>,
    xi: Vec<f64>,
}

impl Marginals {
    pub(crate) fn zeros(len: usize, hidden: usize) -> Self {
        Marginals { len, hidden, gamma: vec![0.0; len * hidden * 2], xi: vec![0.0; len.saturating_sub(1) * hidden * 4] }
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

    /// `P(z[t][h] = k | x, y)`.
    #[inline]
    pub fn gamma(&self, t: usize, h: usize, k: usize) -> f64 {
        self.gamma[(t * self.hidden + h) * 2 + k]
    }

    /// `P(z[t][h] = k, z[t+1][h] = l | x, y)` for `t < T - 1`.
    #[inline]
    pub fn xi(&self, t: usize, h: usize, k: usize, l: usize) -> f64 {
        self.xi[(t * self.hidden + h) * 4 + k * 2 + l]
    }

    #[inline]
    pub(crate) fn gamma_mut(&mut self, t: usize, h: usize, k: usize) -> &mut f64 {
        &mut self.gamma[(t * self.hidden + h) * 2 + k]
    }

    #[inline]
    pub(crate) fn xi_mut(&mut self, t: usize, h: usize, k: usize, l: usize) -> &mut f64 {
        &mut self.xi[(t * self.hidden + h) * 4 + k * 2 + l]
    }

    /// Largest violation of normalization and edge/node consistency.
    pub fn max_inconsistency(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for t in 0..self.len {
            for h in 0..self.hidden {
                worst = worst.max((self.gamma(t, h, 0) + self.gamma(t, h, 1) - 1.0).abs());
                if t + 1 < self.len {
                    let total: f64 = (0..4).map(|i| self.xi(t, h, i / 2, i % 2)).sum();
                    worst = worst.max((total - 1.0).abs());
                    for k in 0..2 {
                        let row = self.xi(t, h, k, 0) + self.xi(t, h, k, 1);
                        worst = worst.max((row - self.gamma(t, h, k)).abs());
                        let col = self.xi(t, h, 0, k) + self.xi(t, h, 1, k);
                        worst = worst.max((col - self.gamma(t + 1, h, k)).abs());
                    }
                }
            }
        }
        worst
    }
}

/// Label-independent part of the unary log-potentials: `W_h . x_t + b_h`
/// plus `pi_h` at the first step and `tau_h` at the last.
pub(crate) struct SeriesUnaries {
    hidden: usize,
    base: Vec<f64>,
}

impl SeriesUnaries {
    pub(crate) fn new(x: &TimeSeries, theta: &HulmParams) -> Result<Self> {
        theta.check_series(x)?;
        let (len, hidden) = (x.len(), theta.hidden());
        let mut base = vec![0.0; len * hidden];
        for t in 0..len {
            let xt = x.frame(t);
            let row = &mut base[t * hidden..(t + 1) * hidden];
            for (h, u) in row.iter_mut().enumerate() {
                *u = dot(theta.w.row(h), xt) + theta.b[h];
            }
        }
        for h in 0..hidden {
            base[h] += theta.pi[h];
            base[(len - 1) * hidden + h] += theta.tau[h];
        }
        if let Some(pos) = base.iter().position(|u| !u.is_finite()) {
            return Err(Error::NumericRange(format!("non-finite potential at step {}, hidden unit {}", pos / hidden, pos % hidden)));
        }
        Ok(SeriesUnaries { hidden, base })
    }

    /// Full unary terms for label `y`, laid out `[t * H + h]`.
    pub(crate) fn for_label(&self, theta: &HulmParams, y: &LabelVector) -> Result<Vec<f64>> {
        theta.check_label(y)?;
        let k = y.class();
        let mut u = self.base.clone();
        for row in u.chunks_exact_mut(self.hidden) {
            for (h, v) in row.iter_mut().enumerate() {
                *v += theta.v.get(h, k);
            }
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericRange("non-finite potential".into()));
        }
        Ok(u)
    }
}

fn forward_from_unaries(unary: &[f64], len: usize, transition: &[f64]) -> LogMessages {
    let hidden = transition.len();
    let mut alpha = LogMessages::new(len, hidden);
    for (h, &a) in transition.iter().enumerate() {
        alpha.set(0, h, 0, 0.0);
        alpha.set(0, h, 1, unary[h]);
        for t in 1..len {
            let (p0, p1) = (alpha.get(t - 1, h, 0), alpha.get(t - 1, h, 1));
            alpha.set(t, h, 0, logsumexp2(p0, p1));
            alpha.set(t, h, 1, unary[t * hidden + h] + logsumexp2(p0, p1 + a));
        }
    }
    alpha
}

fn backward_from_unaries(unary: &[f64], len: usize, transition: &[f64]) -> LogMessages {
    let hidden = transition.len();
    let mut beta = LogMessages::new(len, hidden);
    for (h, &a) in transition.iter().enumerate() {
        for t in (0..len - 1).rev() {
            let (n0, n1) = (beta.get(t + 1, h, 0), beta.get(t + 1, h, 1) + unary[(t + 1) * hidden + h]);
            beta.set(t, h, 0, logsumexp2(n0, n1));
            beta.set(t, h, 1, logsumexp2(n0, n1 + a));
        }
    }
    beta
}

fn chain_log_sums(alpha: &LogMessages) -> Vec<f64> {
    let last = alpha.len() - 1;
    (0..alpha.hidden()).map(|h| logsumexp2(alpha.get(last, h, 0), alpha.get(last, h, 1))).collect()
}

fn check_finite(messages: &LogMessages, what: &str) -> Result<()> {
    if messages.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericRange(format!("non-finite {what} message")));
    }
    Ok(())
}

/// Log forward messages `log alpha[t][h][k]`.
pub fn forward(x: &TimeSeries, y: &LabelVector, theta: &HulmParams) -> Result<LogMessages> {
    let unary = SeriesUnaries::new(x, theta)?.for_label(theta, y)?;
    let alpha = forward_from_unaries(&unary, x.len(), &theta.a);
    check_finite(&alpha, "forward")?;
    Ok(alpha)
}

/// Log backward messages `log beta[t][h][k]`, with `log beta[T-1][h][k] = 0`.
///
/// The potential consumed between steps `t` and `t + 1` is the one of step
/// `t + 1`, mirroring the forward recursion.
pub fn backward(x: &TimeSeries, y: &LabelVector, theta: &HulmParams) -> Result<LogMessages> {
    let unary = SeriesUnaries::new(x, theta)?.for_label(theta, y)?;
    let beta = backward_from_unaries(&unary, x.len(), &theta.a);
    check_finite(&beta, "backward")?;
    Ok(beta)
}

/// Runs both recursions and returns them with the per-chain log sums.
pub fn messages(x: &TimeSeries, y: &LabelVector, theta: &HulmParams) -> Result<MessageTable> {
    let unary = SeriesUnaries::new(x, theta)?.for_label(theta, y)?;
    table_from_unaries(&unary, x.len(), theta)
}

fn table_from_unaries(unary: &[f64], len: usize, theta: &HulmParams) -> Result<MessageTable> {
    let log_alpha = forward_from_unaries(unary, len, &theta.a);
    let log_beta = backward_from_unaries(unary, len, &theta.a);
    check_finite(&log_alpha, "forward")?;
    check_finite(&log_beta, "backward")?;
    let log_chain = chain_log_sums(&log_alpha);
    Ok(MessageTable { log_alpha, log_beta, log_chain })
}

/// Per-chain log sums recomputed from the backward messages:
/// `log sum_k beta[0][h][k] * psi_0(0 -> k)`.
pub fn backward_chain_log_sums(x: &TimeSeries, y: &LabelVector, theta: &HulmParams) -> Result<Vec<f64>> {
    let unary = SeriesUnaries::new(x, theta)?.for_label(theta, y)?;
    let beta = backward_from_unaries(&unary, x.len(), &theta.a);
    check_finite(&beta, "backward")?;
    Ok((0..theta.hidden()).map(|h| logsumexp2(beta.get(0, h, 0), beta.get(0, h, 1) + unary[h])).collect())
}

fn log_m_from_unaries(unary: &[f64], len: usize, theta: &HulmParams, class: usize) -> Result<f64> {
    let alpha = forward_from_unaries(unary, len, &theta.a);
    let chains = chain_log_sums(&alpha);
    let value = theta.c[class] + chains.iter().sum::<f64>();
    if !value.is_finite() {
        return Err(Error::NumericRange("non-finite log M".into()));
    }
    Ok(value)
}

/// `log M(x, y)`: the log of the sum of `exp(energy)` over all hidden
/// assignments, including the label bias.
pub fn log_m(x: &TimeSeries, y: &LabelVector, theta: &HulmParams) -> Result<f64> {
    let unary = SeriesUnaries::new(x, theta)?.for_label(theta, y)?;
    log_m_from_unaries(&unary, x.len(), theta, y.class())
}

/// `log M(x, y)` for every label `y`.
pub fn log_m_all(x: &TimeSeries, theta: &HulmParams) -> Result<Vec<f64>> {
    let unaries = SeriesUnaries::new(x, theta)?;
    (0..theta.classes())
        .map(|k| {
            let y = LabelVector::new(k, theta.classes())?;
            let unary = unaries.for_label(theta, &y)?;
            log_m_from_unaries(&unary, x.len(), theta, k)
        })
        .collect()
}

/// `p(y | x)` for every label.
pub fn predict_distribution(x: &TimeSeries, theta: &HulmParams) -> Result<Vec<f64>> {
    Ok(softmax(&log_m_all(x, theta)?))
}

/// Most probable label; ties go to the lowest class index.
pub fn predict_label(x: &TimeSeries, theta: &HulmParams) -> Result<usize> {
    Ok(argmax(&log_m_all(x, theta)?))
}

/// `log p(y | x)`.
pub fn log_predictive(x: &TimeSeries, y: &LabelVector, theta: &HulmParams) -> Result<f64> {
    theta.check_label(y)?;
    let all = log_m_all(x, theta)?;
    Ok(all[y.class()] - logsumexp(&all))
}

/// Marginals plus `sum_h log_chain[h]`.
pub(crate) fn marginals_from_unaries(unary: &[f64], len: usize, theta: &HulmParams) -> Result<(Marginals, f64)> {
    let table = table_from_unaries(unary, len, theta)?;
    let hidden = theta.hidden();
    let (alpha, beta) = (&table.log_alpha, &table.log_beta);
    let mut out = Marginals::zeros(len, hidden);
    for h in 0..hidden {
        let norm = table.log_chain[h];
        let a = theta.a[h];
        for t in 0..len {
            for k in 0..2 {
                *out.gamma_mut(t, h, k) = (alpha.get(t, h, k) + beta.get(t, h, k) - norm).exp();
            }
            if t + 1 < len {
                let u = unary[(t + 1) * hidden + h];
                for k in 0..2 {
                    for l in 0..2 {
                        let log_psi = if l == 1 { u + if k == 1 { a } else { 0.0 } } else { 0.0 };
                        *out.xi_mut(t, h, k, l) = (alpha.get(t, h, k) + log_psi + beta.get(t + 1, h, l) - norm).exp();
                    }
                }
            }
        }
    }
    Ok((out, table.log_chain.iter().sum()))
}

/// Posterior node marginals `gamma` and edge marginals `xi` given `(x, y)`.
pub fn marginals(x: &TimeSeries, y: &LabelVector, theta: &HulmParams) -> Result<Marginals> {
    let unary = SeriesUnaries::new(x, theta)?.for_label(theta, y)?;
    Ok(marginals_from_unaries(&unary, x.len(), theta)?.0)
}
