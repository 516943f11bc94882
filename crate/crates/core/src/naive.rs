//! Naive logistic baseline: per-frame linear scores summed over time, then
//! a softmax over labels. It sees a series only through its frame sum.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::learning::{run_sgd, SgdModel, TrainReport};
use crate::math::{argmax, dot, logsumexp, softmax};
use crate::matrix::Matrix;
use crate::model::{Hyperparams, TimeSeries};

/// `W` is `K x D`, `c` has length `K`.
#[derive(Clone, Debug, PartialEq)]
pub struct NaiveParams {
    pub w: Matrix,
    pub c: Vec<f64>,
}

impl NaiveParams {
    pub fn zeros(dim: usize, classes: usize) -> Self {
        NaiveParams { w: Matrix::zeros(classes, dim), c: vec![0.0; classes] }
    }

    pub fn classes(&self) -> usize {
        self.c.len()
    }

    pub fn dim(&self) -> usize {
        self.w.cols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes() == 0 || self.dim() == 0 || self.w.rows() != self.classes() {
            return Err(Error::invalid("naive parameters have inconsistent shapes"));
        }
        if self.w.as_slice().iter().chain(&self.c).any(|v| !v.is_finite()) {
            return Err(Error::NumericRange("non-finite naive parameter".into()));
        }
        Ok(())
    }

    fn scores(&self, x: &TimeSeries) -> Result<Vec<f64>> {
        if x.dim() != self.dim() {
            return Err(Error::invalid(format!("series has D = {}, model expects D = {}", x.dim(), self.dim())));
        }
        let sum = x.frame_sum();
        let scores: Vec<f64> = (0..self.classes()).map(|k| dot(self.w.row(k), &sum) + self.c[k]).collect();
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NumericRange("non-finite naive score".into()));
        }
        Ok(scores)
    }
}

/// `softmax_k(W_k . sum_t x_t + c_k)`.
pub fn naive_predict(x: &TimeSeries, params: &NaiveParams) -> Result<Vec<f64>> {
    Ok(softmax(&params.scores(x)?))
}

pub fn naive_predict_label(x: &TimeSeries, params: &NaiveParams) -> Result<usize> {
    Ok(argmax(&params.scores(x)?))
}

/// `sum_n log p(y_n | x_n) - lambda * |W|^2`.
pub fn naive_log_likelihood(data: &Dataset, params: &NaiveParams, lambda: f64) -> Result<f64> {
    Ok(params.evaluate(data, lambda)?.0)
}

/// Gradient of `log p(y | x)` with respect to `(W, c)`.
pub fn naive_gradient_example(x: &TimeSeries, label: usize, params: &NaiveParams) -> Result<NaiveParams> {
    if label >= params.classes() {
        return Err(Error::invalid(format!("label {label} out of range for K = {}", params.classes())));
    }
    let p = naive_predict(x, params)?;
    let sum = x.frame_sum();
    let mut grad = NaiveParams::zeros(params.dim(), params.classes());
    for (k, pk) in p.iter().enumerate() {
        let coef = f64::from(u8::from(k == label)) - pk;
        grad.c[k] = coef;
        for (g, s) in grad.w.row_mut(k).iter_mut().zip(&sum) {
            *g = coef * s;
        }
    }
    Ok(grad)
}

impl SgdModel for NaiveParams {
    fn example_gradient(&self, x: &TimeSeries, label: usize) -> Result<Self> {
        naive_gradient_example(x, label, self)
    }

    fn zero_gradient(&self) -> Self {
        NaiveParams::zeros(self.dim(), self.classes())
    }

    fn accumulate(&mut self, other: &Self) {
        for (a, b) in self.w.as_mut_slice().iter_mut().zip(other.w.as_slice()) {
            *a += b;
        }
        for (a, b) in self.c.iter_mut().zip(&other.c) {
            *a += b;
        }
    }

    fn apply_step(&mut self, grad: &Self, step: f64, lambda: f64) {
        let shrink = 1.0 / (1.0 + 2.0 * step * lambda);
        for (p, g) in self.w.as_mut_slice().iter_mut().zip(grad.w.as_slice()) {
            *p = (*p + step * g) * shrink;
        }
        for (p, g) in self.c.iter_mut().zip(&grad.c) {
            *p += step * g;
        }
    }

    fn evaluate(&self, data: &Dataset, lambda: f64) -> Result<(f64, usize)> {
        let mut log_lik = 0.0;
        let mut errors = 0;
        for (s, label) in data.series.iter().zip(data.labels()?) {
            let scores = self.scores(s)?;
            log_lik += scores[label] - logsumexp(&scores);
            if argmax(&scores) != label {
                errors += 1;
            }
        }
        let penalty: f64 = self.w.as_slice().iter().map(|v| v * v).sum();
        Ok((log_lik - lambda * penalty, errors))
    }
}

/// Trains from zero parameters with the same SGD schedule as the hidden-unit
/// model; `hyper.hidden_units` is ignored.
pub fn naive_train_report(data: &Dataset, hyper: &Hyperparams, validation: Option<&Dataset>) -> Result<TrainReport<NaiveParams>> {
    run_sgd(NaiveParams::zeros(data.dim(), data.num_classes()), data, hyper, validation)
}

pub fn naive_train(data: &Dataset, hyper: &Hyperparams) -> Result<NaiveParams> {
    Ok(naive_train_report(data, hyper, None)?.params)
}
