//! Conditional log-likelihood, its exact gradient, and mini-batch SGD.
//!
//! Every function returns the gradient of the (regularized) log-likelihood,
//! i.e. the direction to ascend.

use std::ops::{Deref, DerefMut};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::inference::{marginals_from_unaries, SeriesUnaries};
use crate::math::{argmax, logsumexp, softmax};
use crate::model::{init_params, Block, HulmParams, Hyperparams, LabelVector, TimeSeries};

/// Gradient with the same block layout as [`HulmParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient(pub HulmParams);

impl Gradient {
    pub fn zeros_like(theta: &HulmParams) -> Self {
        Gradient(HulmParams::zeros(theta.hidden(), theta.dim(), theta.classes()))
    }

    pub fn into_params(self) -> HulmParams {
        self.0
    }
}

impl Deref for Gradient {
    type Target = HulmParams;

    fn deref(&self) -> &HulmParams {
        &self.0
    }
}

impl DerefMut for Gradient {
    fn deref_mut(&mut self) -> &mut HulmParams {
        &mut self.0
    }
}

/// Sum of log-likelihoods and misclassification count of `data` under `theta`.
fn fit_statistics(data: &Dataset, theta: &HulmParams) -> Result<(f64, usize)> {
    let mut log_lik = 0.0;
    let mut errors = 0;
    for (s, label) in data.series.iter().zip(data.labels()?) {
        let scores = crate::inference::log_m_all(s, theta)?;
        log_lik += scores[label] - logsumexp(&scores);
        if argmax(&scores) != label {
            errors += 1;
        }
    }
    Ok((log_lik, errors))
}

/// `sum_n log p(y_n | x_n) - lambda * (|A|^2 + |W|^2 + |V|^2)`.
pub fn cond_log_likelihood(data: &Dataset, theta: &HulmParams, lambda: f64) -> Result<f64> {
    if lambda < 0.0 {
        return Err(Error::invalid("lambda must be nonnegative"));
    }
    let (log_lik, _) = fit_statistics(data, theta)?;
    Ok(log_lik - lambda * theta.l2_norm_sq())
}

/// Gradient of `log p(y | x)`: expected energy derivatives under
/// `P(z | x, y)` minus those under `P(z, y' | x)`.
pub fn gradient_example(x: &TimeSeries, y: &LabelVector, theta: &HulmParams) -> Result<Gradient> {
    theta.check_label(y)?;
    let unaries = SeriesUnaries::new(x, theta)?;
    let (len, hidden, classes) = (x.len(), theta.hidden(), theta.classes());

    let mut posteriors = Vec::with_capacity(classes);
    let mut scores = Vec::with_capacity(classes);
    for k in 0..classes {
        let yk = LabelVector::new(k, classes)?;
        let unary = unaries.for_label(theta, &yk)?;
        let (m, chain_total) = marginals_from_unaries(&unary, len, theta)?;
        scores.push(theta.c[k] + chain_total);
        posteriors.push(m);
    }
    let p = softmax(&scores);

    let mut grad = Gradient::zeros_like(theta);
    // weight of each label's statistics: clamped (1 for y) minus free (p_k)
    let mut w_coef = vec![0.0; len * hidden];
    for (k, m) in posteriors.iter().enumerate() {
        let weight = f64::from(u8::from(k == y.class())) - p[k];
        grad.c[k] += weight;
        for h in 0..hidden {
            grad.pi[h] += weight * m.gamma(0, h, 1);
            grad.tau[h] += weight * m.gamma(len - 1, h, 1);
            let mut on = 0.0;
            let mut both_on = 0.0;
            for t in 0..len {
                let q = m.gamma(t, h, 1);
                on += q;
                w_coef[t * hidden + h] += weight * q;
                if t + 1 < len {
                    both_on += m.xi(t, h, 1, 1);
                }
            }
            grad.b[h] += weight * on;
            let v = grad.v.get(h, k);
            grad.v.set(h, k, v + weight * on);
            grad.a[h] += weight * both_on;
        }
    }
    for t in 0..len {
        let xt = x.frame(t);
        for h in 0..hidden {
            let coef = w_coef[t * hidden + h];
            for (g, xv) in grad.w.row_mut(h).iter_mut().zip(xt) {
                *g += coef * xv;
            }
        }
    }
    Ok(grad)
}

fn labelled(s: &TimeSeries, index: usize, classes: usize) -> Result<LabelVector> {
    let label = s.label.ok_or_else(|| Error::invalid(format!("series {index} is unlabeled")))?;
    LabelVector::new(label, classes)
}

/// Sum of per-example gradients minus `2 * lambda * theta` on `A`, `W`, `V`.
pub fn gradient_batch(batch: &Dataset, theta: &HulmParams, lambda: f64) -> Result<Gradient> {
    if batch.is_empty() {
        return Err(Error::invalid("gradient of an empty batch"));
    }
    let mut total = Gradient::zeros_like(theta);
    for (i, s) in batch.series.iter().enumerate() {
        let y = labelled(s, i, theta.classes())?;
        total.add_scaled(&gradient_example(s, &y, theta)?.0, 1.0);
    }
    for block in Block::ALL.into_iter().filter(|b| b.regularized()) {
        for (g, p) in total.block_mut(block).iter_mut().zip(theta.block(block)) {
            *g -= 2.0 * lambda * p;
        }
    }
    Ok(total)
}

/// Per-epoch training history and the final parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport<P> {
    /// Regularized conditional log-likelihood on the full training set after
    /// each epoch (the quantity being ascended).
    pub objectives: Vec<f64>,
    pub train_errors: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub validation_errors: Vec<f64>,
    /// Objective and training error of the returned parameters.
    pub final_objective: f64,
    pub final_train_error: f64,
    #[serde(skip)]
    pub params: P,
}

/// A model trainable by the shared SGD driver.
pub(crate) trait SgdModel: Clone {
    /// Gradient of the unregularized log-likelihood of one labelled series.
    fn example_gradient(&self, x: &TimeSeries, label: usize) -> Result<Self>;
    fn zero_gradient(&self) -> Self;
    fn accumulate(&mut self, other: &Self);
    /// Ascends by `step * grad` then shrinks regularized blocks by the
    /// proximal factor `1 / (1 + 2 * step * lambda)`.
    fn apply_step(&mut self, grad: &Self, step: f64, lambda: f64);
    /// `(regularized objective, error count)` over `data`.
    fn evaluate(&self, data: &Dataset, lambda: f64) -> Result<(f64, usize)>;
}

impl SgdModel for HulmParams {
    fn example_gradient(&self, x: &TimeSeries, label: usize) -> Result<Self> {
        Ok(gradient_example(x, &LabelVector::new(label, self.classes())?, self)?.into_params())
    }

    fn zero_gradient(&self) -> Self {
        HulmParams::zeros(self.hidden(), self.dim(), self.classes())
    }

    fn accumulate(&mut self, other: &Self) {
        self.add_scaled(other, 1.0);
    }

    fn apply_step(&mut self, grad: &Self, step: f64, lambda: f64) {
        let shrink = 1.0 / (1.0 + 2.0 * step * lambda);
        for block in Block::ALL {
            let regularized = block.regularized();
            for (p, g) in self.block_mut(block).iter_mut().zip(grad.block(block)) {
                *p += step * g;
                if regularized {
                    *p *= shrink;
                }
            }
        }
    }

    fn evaluate(&self, data: &Dataset, lambda: f64) -> Result<(f64, usize)> {
        let (log_lik, errors) = fit_statistics(data, self)?;
        Ok((log_lik - lambda * self.l2_norm_sq(), errors))
    }
}

fn error_count<M: SgdModel>(model: &M, data: &Dataset) -> Result<f64> {
    Ok(model.evaluate(data, 0.0)?.1 as f64 / data.len() as f64)
}

fn diverged(epoch: usize, err: Error) -> Error {
    match err {
        Error::NumericRange(reason) => Error::Diverged { epoch, reason },
        other => other,
    }
}

/// Seeded mini-batch SGD with per-epoch decay `learning_rate * lr_decay^epoch`.
///
/// The L2 penalty of a batch `B` is `lambda * |B| / N`, so one epoch applies
/// the full-objective penalty once.
pub(crate) fn run_sgd<M: SgdModel>(
    mut model: M,
    data: &Dataset,
    hyper: &Hyperparams,
    validation: Option<&Dataset>,
) -> Result<TrainReport<M>> {
    hyper.validate()?;
    if data.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let labels = data.labels()?;
    let n = data.len();
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..n).collect();
    let mut report = TrainReport {
        objectives: Vec::with_capacity(hyper.epochs),
        train_errors: Vec::with_capacity(hyper.epochs),
        validation_errors: Vec::new(),
        final_objective: 0.0,
        final_train_error: 0.0,
        params: model.clone(),
    };

    for epoch in 0..hyper.epochs {
        let step = hyper.step_size(epoch);
        order.shuffle(&mut rng);
        for batch in order.chunks(hyper.batch_size) {
            let mut grad = model.zero_gradient();
            for &i in batch {
                let g = model.example_gradient(&data.series[i], labels[i]).map_err(|e| diverged(epoch, e))?;
                grad.accumulate(&g);
            }
            let lambda = hyper.l2_lambda * batch.len() as f64 / n as f64;
            model.apply_step(&grad, step, lambda);
        }
        let (objective, errors) = model.evaluate(data, hyper.l2_lambda).map_err(|e| diverged(epoch, e))?;
        if !objective.is_finite() {
            return Err(Error::Diverged { epoch, reason: format!("objective became {objective}") });
        }
        report.objectives.push(objective);
        report.train_errors.push(errors as f64 / n as f64);
        if let Some(val) = validation {
            report.validation_errors.push(error_count(&model, val).map_err(|e| diverged(epoch, e))?);
        }
        log::debug!("epoch {epoch}: objective {objective:.6}, train errors {errors}/{n}");
    }

    let (objective, errors) = model.evaluate(data, hyper.l2_lambda)?;
    report.final_objective = objective;
    report.final_train_error = errors as f64 / n as f64;
    report.params = model;
    Ok(report)
}

/// Trains a hidden-unit logistic model from `init_params(hyper.seed)`.
pub fn train_sgd(data: &Dataset, hyper: &Hyperparams, validation: Option<&Dataset>) -> Result<TrainReport<HulmParams>> {
    hyper.validate()?;
    let theta = init_params(hyper.hidden_units, data.dim(), data.num_classes(), hyper.seed)?;
    run_sgd(theta, data, hyper, validation)
}

/// Validation error for each candidate lambda.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaSearch {
    pub best: f64,
    pub candidates: Vec<(f64, f64)>,
}

/// Trains once per grid value and keeps the lambda with the lowest
/// validation error; ties go to the larger lambda.
pub fn search_lambda(train: &Dataset, val: &Dataset, hyper: &Hyperparams, grid: &[f64]) -> Result<LambdaSearch> {
    search_lambda_with(grid, |lambda| {
        let h = Hyperparams { l2_lambda: lambda, ..hyper.clone() };
        let report = train_sgd(train, &h, None)?;
        error_count(&report.params, val)
    })
}

pub(crate) fn search_lambda_with(grid: &[f64], mut val_error: impl FnMut(f64) -> Result<f64>) -> Result<LambdaSearch> {
    if grid.is_empty() {
        return Err(Error::invalid("lambda grid is empty"));
    }
    if grid.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
        return Err(Error::invalid("lambda grid values must be finite and nonnegative"));
    }
    let mut candidates = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, f64)> = None;
    for &lambda in grid {
        let err = val_error(lambda)?;
        log::info!("lambda {lambda}: validation error {err:.4}");
        candidates.push((lambda, err));
        best = match best {
            Some((bl, be)) if be < err || (be == err && bl >= lambda) => Some((bl, be)),
            _ => Some((lambda, err)),
        };
    }
    Ok(LambdaSearch { best: best.expect("grid nonempty").0, candidates })
}

/// Lambda from `grid` with minimum validation error (ties toward larger lambda).
pub fn tune_lambda(train: &Dataset, val: &Dataset, hyper: &Hyperparams, grid: &[f64]) -> Result<f64> {
    Ok(search_lambda(train, val, hyper, grid)?.best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::predict_distribution;
    use crate::model::testutil::*;
    use crate::synth::{synth_order_task, synth_shift_task};
    use rand::{Rng, SeedableRng};

    fn label(k: usize, n: usize) -> LabelVector {
        LabelVector::new(k, n).unwrap()
    }

    fn one(x: TimeSeries, k: usize, classes: usize) -> Dataset {
        Dataset::new(vec![x.with_label(k)], classes).unwrap()
    }

    #[test]
    fn zero_params_give_uniform_likelihood() {
        let data = synth_order_task(3, 4, 0.1, 0).unwrap();
        let theta = HulmParams::zeros(2, 2, 2);
        let l = cond_log_likelihood(&data, &theta, 0.0).unwrap();
        assert!((l + 6.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn likelihood_equals_sum_of_log_predictive() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let theta = random_params(&mut rng, 3, 2, 3, 1.0);
        let series: Vec<_> = (0..5).map(|i| random_series(&mut rng, 2 + i, 2).with_label(i % 3)).collect();
        let data = Dataset::new(series, 3).unwrap();
        let direct: f64 = data.series.iter().map(|s| predict_distribution(s, &theta).unwrap()[s.label.unwrap()].ln()).sum();
        let l = cond_log_likelihood(&data, &theta, 0.0).unwrap();
        assert!((l - direct).abs() < 1e-10);
        let reg = cond_log_likelihood(&data, &theta, 0.3).unwrap();
        assert!((l - reg - 0.3 * theta.l2_norm_sq()).abs() < 1e-12);
        assert!(reg <= 0.0);
    }

    #[test]
    fn unlabeled_series_are_rejected() {
        let data = Dataset::new(vec![TimeSeries::from_rows(&[vec![1.0]]).unwrap()], 2).unwrap();
        let theta = HulmParams::zeros(1, 1, 2);
        assert!(cond_log_likelihood(&data, &theta, 0.0).is_err());
        assert!(gradient_batch(&data, &theta, 0.0).is_err());
    }

    #[test]
    fn zero_params_gradient_closed_form() {
        let (len, classes) = (4, 3);
        let x = TimeSeries::from_rows(&vec![vec![0.7, -1.2]; len]).unwrap();
        let theta = HulmParams::zeros(2, 2, classes);
        let g = gradient_example(&x, &label(1, classes), &theta).unwrap();
        for k in 0..classes {
            let yk = if k == 1 { 1.0 } else { 0.0 };
            assert!((g.c[k] - (yk - 1.0 / 3.0)).abs() < 1e-12);
            for h in 0..2 {
                assert!((g.v.get(h, k) - 0.5 * len as f64 * (yk - 1.0 / 3.0)).abs() < 1e-12);
            }
        }
        for block in [Block::W, Block::B, Block::Pi, Block::Tau, Block::A] {
            assert!(g.block(block).iter().all(|v| v.abs() < 1e-12), "{block:?}");
        }
    }

    #[test]
    fn free_term_is_posterior_average_of_clamped_terms() {
        // The c-gradient is y - p; summing clamped c-terms against p gives p.
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let theta = random_params(&mut rng, 2, 2, 3, 1.0);
        let x = random_series(&mut rng, 3, 2);
        let p = predict_distribution(&x, &theta).unwrap();
        let mut expected_free = [0.0; 3];
        for (k, pk) in p.iter().enumerate() {
            let g = gradient_example(&x, &label(k, 3), &theta).unwrap();
            for (j, e) in expected_free.iter_mut().enumerate() {
                let clamped = if j == k { 1.0 } else { 0.0 };
                // g.c = clamped - free  =>  free = clamped - g.c
                let free = clamped - g.c[j];
                *e += pk * clamped;
                assert!((free - p[j]).abs() < 1e-15);
            }
        }
        for (e, pk) in expected_free.iter().zip(&p) {
            assert!((e - pk).abs() < 1e-15);
        }
    }

    #[test]
    fn batch_gradient_is_additive_and_regularized() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let theta = random_params(&mut rng, 2, 2, 2, 0.5);
        let x = random_series(&mut rng, 3, 2);
        let single = gradient_example(&x, &label(1, 2), &theta).unwrap();
        assert_eq!(gradient_batch(&one(x.clone(), 1, 2), &theta, 0.0).unwrap(), single);
        let double = Dataset::new(vec![x.clone().with_label(1), x.clone().with_label(1)], 2).unwrap();
        let g2 = gradient_batch(&double, &theta, 0.0).unwrap();
        for block in Block::ALL {
            for (a, b) in g2.block(block).iter().zip(single.block(block)) {
                assert_eq!(*a, 2.0 * b);
            }
        }
        let reg = gradient_batch(&double, &theta, 0.25).unwrap();
        for block in Block::ALL {
            for ((r, g), p) in reg.block(block).iter().zip(g2.block(block)).zip(theta.block(block)) {
                let expected = if block.regularized() { g - 0.5 * p } else { *g };
                assert!((r - expected).abs() < 1e-15);
            }
        }
        let empty = Dataset::with_dim(vec![], 2, 2).unwrap();
        assert!(gradient_batch(&empty, &theta, 0.0).is_err());
    }

    #[test]
    fn regularizer_derivative_alone() {
        // With W = V = 0 and one class, the likelihood is identically 0.
        let mut theta = HulmParams::zeros(3, 1, 1);
        theta.a = vec![0.5, -1.0, 2.0];
        let x = TimeSeries::from_rows(&vec![vec![1.0]; 3]).unwrap();
        let g = gradient_batch(&one(x, 0, 1), &theta, 0.1).unwrap();
        for (ga, a) in g.a.iter().zip(&theta.a) {
            assert!((ga + 0.2 * a).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_learning_rate_keeps_initialization() {
        let data = synth_order_task(5, 4, 0.3, 1).unwrap();
        let hyper = Hyperparams { hidden_units: 3, learning_rate: 0.0, epochs: 4, seed: 7, ..Default::default() };
        let report = train_sgd(&data, &hyper, None).unwrap();
        assert_eq!(report.params, init_params(3, 2, 2, 7).unwrap());
        assert_eq!(report.objectives.len(), 4);
        assert!(report.objectives.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn training_is_deterministic_and_learns_separable_data() {
        let data = synth_shift_task(20, 6, 1.0, 0.5, 2).unwrap();
        let hyper = Hyperparams { hidden_units: 5, epochs: 50, seed: 3, ..Default::default() };
        let a = train_sgd(&data, &hyper, Some(&data)).unwrap();
        let b = train_sgd(&data, &hyper, Some(&data)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.final_train_error, 0.0);
        assert_eq!(a.validation_errors.len(), 50);
        assert_eq!(*a.train_errors.last().unwrap(), a.final_train_error);
    }

    #[test]
    fn objective_trend_is_monotone_with_small_steps() {
        let data = synth_shift_task(15, 5, 1.0, 0.5, 4).unwrap();
        let hyper = Hyperparams { hidden_units: 4, epochs: 40, learning_rate: 0.002, seed: 1, ..Default::default() };
        let report = train_sgd(&data, &hyper, None).unwrap();
        let rising = report.objectives.windows(2).filter(|w| w[1] >= w[0]).count();
        assert!(rising as f64 >= 0.9 * (report.objectives.len() - 1) as f64);
    }

    #[test]
    fn divergence_names_the_epoch() {
        let data = synth_shift_task(4, 3, 1e150, 0.0, 0).unwrap();
        let hyper = Hyperparams { hidden_units: 2, epochs: 3, learning_rate: 1e150, seed: 0, ..Default::default() };
        match train_sgd(&data, &hyper, None) {
            Err(Error::Diverged { epoch, .. }) => assert!(epoch < 3),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn lambda_search_tie_breaks_toward_larger() {
        let best = search_lambda_with(&[0.1, 1.0, 0.01], |_| Ok(0.2)).unwrap();
        assert_eq!(best.best, 1.0);
        let best = search_lambda_with(&[0.1, 1.0, 0.01], |l| Ok(if l == 0.01 { 0.1 } else { 0.2 })).unwrap();
        assert_eq!(best.best, 0.01);
        assert!(search_lambda_with(&[], |_| Ok(0.0)).is_err());
        assert!(search_lambda_with(&[-1.0], |_| Ok(0.0)).is_err());
    }

    #[test]
    fn single_value_grid_returns_that_value() {
        let data = synth_shift_task(4, 3, 1.0, 0.2, 0).unwrap();
        let hyper = Hyperparams { hidden_units: 2, epochs: 2, ..Default::default() };
        assert_eq!(tune_lambda(&data, &data, &hyper, &[0.37]).unwrap(), 0.37);
    }

    #[test]
    fn random_instances_have_finite_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        for _ in 0..20 {
            let (hidden, len) = (rng.gen_range(1..4), rng.gen_range(1..6));
            let theta = random_params(&mut rng, hidden, 2, 3, 2.0);
            let x = random_series(&mut rng, len, 2);
            let g = gradient_example(&x, &label(rng.gen_range(0..3), 3), &theta).unwrap();
            assert!(g.blocks().all(|(_, v)| v.iter().all(|x| x.is_finite())));
        }
    }
}
