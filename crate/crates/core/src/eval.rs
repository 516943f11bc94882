//! Error rate, confusion matrices, ROC-AUC, F1, and cross-validation.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{train_model, ModelKind, TrainedModel};
use crate::data::{Dataset, FoldPlan, Standardizer};
use crate::error::{Error, Result};
use crate::model::Hyperparams;

/// Evaluation summary; all fields are plain data so reports serialize
/// deterministically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: ModelKind,
    pub error_rate: f64,
    /// `confusion[truth][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fold_errors: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fold_sizes: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub target_class: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub auc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub f1: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub skipped_folds: Vec<usize>,
}

impl EvalReport {
    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    /// Fixed-width plain-text rendering.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let pct = |v: f64| format!("{:>8.2}%", 100.0 * v);
        out.push_str(&format!("{:<14}{:>9}\n", "model", self.model.to_string()));
        if let Some(t) = self.target_class {
            out.push_str(&format!("{:<14}{:>9}\n", "target class", t));
        }
        out.push_str(&format!("{:<14}{:>9}\n", "series", self.total()));
        out.push_str(&format!("{:<14}{}\n", "error", pct(self.error_rate)));
        if let Some(auc) = self.auc {
            out.push_str(&format!("{:<14}{:>9.4}\n", "AUC", auc));
        }
        if let Some(f1) = self.f1 {
            out.push_str(&format!("{:<14}{:>9.4}\n", "F1", f1));
        }
        if let (Some(errors), Some(sizes)) = (&self.fold_errors, &self.fold_sizes) {
            out.push_str(&format!("\n{:>6}{:>8}{:>10}\n", "fold", "size", "error"));
            for (f, (e, n)) in errors.iter().zip(sizes).enumerate() {
                let skipped = if self.skipped_folds.contains(&f) { "  (skipped)" } else { "" };
                out.push_str(&format!("{:>6}{:>8}{}{skipped}\n", f, n, pct(*e)));
            }
        }
        out.push_str("\nconfusion (rows: truth, cols: predicted)\n");
        for row in &self.confusion {
            for v in row {
                out.push_str(&format!("{v:>7}"));
            }
            out.push('\n');
        }
        out
    }
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::invalid(format!("length mismatch: {a} predictions vs {b} labels")));
    }
    Ok(())
}

/// Fraction of mismatched labels.
pub fn error_rate(preds: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(preds.len(), truth.len())?;
    if preds.is_empty() {
        return Err(Error::invalid("error rate of an empty set"));
    }
    let wrong = preds.iter().zip(truth).filter(|(p, t)| p != t).count();
    Ok(wrong as f64 / preds.len() as f64)
}

pub fn confusion_matrix(preds: &[usize], truth: &[usize], classes: usize) -> Result<Vec<Vec<usize>>> {
    check_lengths(preds.len(), truth.len())?;
    let mut m = vec![vec![0; classes]; classes];
    for (&p, &t) in preds.iter().zip(truth) {
        if p >= classes || t >= classes {
            return Err(Error::invalid(format!("label out of range for K = {classes}")));
        }
        m[t][p] += 1;
    }
    Ok(m)
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Computed from average ranks.
pub fn roc_auc(scores: &[f64], truth: &[bool]) -> Result<f64> {
    check_lengths(scores.len(), truth.len())?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("NaN score"));
    }
    let positives = truth.iter().filter(|&&t| t).count();
    let negatives = truth.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::invalid("AUC needs both positive and negative examples"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));
    let mut positive_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks are 1-based; tied block shares the average rank
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            if truth[idx] {
                positive_rank_sum += avg_rank;
            }
        }
        i = j + 1;
    }
    let (p, n) = (positives as f64, negatives as f64);
    Ok((positive_rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Harmonic mean of precision and recall; 0 when there are no true positives.
pub fn f1_score(preds: &[bool], truth: &[bool]) -> Result<f64> {
    check_lengths(preds.len(), truth.len())?;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&p, &t) in preds.iter().zip(truth) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    if tp == 0 {
        return Ok(0.0);
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_) as f64;
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Evaluates an already-trained model on labelled data.
pub fn evaluate(model: &TrainedModel, data: &Dataset) -> Result<EvalReport> {
    let truth = data.labels()?;
    let preds = data.series.iter().map(|s| model.predict_label(s)).collect::<Result<Vec<_>>>()?;
    let classes = model.classes().max(data.num_classes());
    Ok(EvalReport {
        model: model.kind(),
        error_rate: error_rate(&preds, &truth)?,
        confusion: confusion_matrix(&preds, &truth, classes)?,
        fold_errors: None,
        fold_sizes: None,
        target_class: None,
        auc: None,
        f1: None,
        skipped_folds: Vec::new(),
    })
}

/// Options for [`cross_validate_with`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CvOptions {
    /// Fit z-scoring on each training complement.
    pub standardize: bool,
    /// Folds trained concurrently; `0` or `1` means sequential.
    pub threads: usize,
}

struct FoldOutcome {
    indices: Vec<usize>,
    posteriors: Vec<Vec<f64>>,
}

fn run_fold(data: &Dataset, plan: &FoldPlan, fold: usize, hyper: &Hyperparams, kind: ModelKind, opts: CvOptions) -> Result<FoldOutcome> {
    let train_idx = plan.train_indices(fold);
    let test_idx = plan.test_indices(fold);
    if train_idx.is_empty() || test_idx.is_empty() {
        return Err(Error::invalid("fold has an empty train or test part"));
    }
    let (mut train, mut test) = (data.subset(&train_idx), data.subset(&test_idx));
    if opts.standardize {
        let stats = Standardizer::fit(&train)?;
        train = stats.apply(&train)?;
        test = stats.apply(&test)?;
    }
    let model = train_model(kind, &train, hyper, None)?.params;
    let posteriors = test.series.iter().map(|s| model.predict_distribution(s)).collect::<Result<Vec<_>>>()?;
    log::info!("fold {fold}: trained on {}, tested on {}", train.len(), test.len());
    Ok(FoldOutcome { indices: test_idx, posteriors })
}

fn run_folds(
    data: &Dataset,
    plan: &FoldPlan,
    folds: &[usize],
    hyper: &Hyperparams,
    kind: ModelKind,
    opts: CvOptions,
) -> Result<Vec<FoldOutcome>> {
    let one = |&f: &usize| run_fold(data, plan, f, hyper, kind, opts).map_err(|e| Error::Fold { fold: f, source: Box::new(e) });
    if opts.threads > 1 {
        let pool =
            rayon::ThreadPoolBuilder::new().num_threads(opts.threads).build().map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
        pool.install(|| folds.par_iter().map(one).collect())
    } else {
        folds.iter().map(one).collect()
    }
}

fn check_plan(data: &Dataset, plan: &FoldPlan) -> Result<()> {
    if plan.assignments.len() != data.len() || plan.assignments.iter().any(|&f| f >= plan.folds) {
        return Err(Error::invalid("fold plan does not cover the dataset"));
    }
    Ok(())
}

fn argmax_labels(posteriors: &[Vec<f64>]) -> Vec<usize> {
    posteriors.iter().map(|p| crate::math::argmax(p)).collect()
}

pub fn cross_validate(data: &Dataset, plan: &FoldPlan, hyper: &Hyperparams, kind: ModelKind) -> Result<EvalReport> {
    cross_validate_with(data, plan, hyper, kind, CvOptions::default())
}

/// Trains on each fold's complement, evaluates on the fold, and pools.
pub fn cross_validate_with(data: &Dataset, plan: &FoldPlan, hyper: &Hyperparams, kind: ModelKind, opts: CvOptions) -> Result<EvalReport> {
    check_plan(data, plan)?;
    let truth = data.labels()?;
    let folds: Vec<usize> = (0..plan.folds).collect();
    let outcomes = run_folds(data, plan, &folds, hyper, kind, opts)?;

    let mut preds = vec![0; data.len()];
    let mut fold_errors = Vec::with_capacity(plan.folds);
    let mut fold_sizes = Vec::with_capacity(plan.folds);
    for outcome in &outcomes {
        let fold_preds = argmax_labels(&outcome.posteriors);
        let fold_truth: Vec<usize> = outcome.indices.iter().map(|&i| truth[i]).collect();
        fold_errors.push(error_rate(&fold_preds, &fold_truth)?);
        fold_sizes.push(outcome.indices.len());
        for (&i, p) in outcome.indices.iter().zip(fold_preds) {
            preds[i] = p;
        }
    }
    Ok(EvalReport {
        model: kind,
        error_rate: error_rate(&preds, &truth)?,
        confusion: confusion_matrix(&preds, &truth, data.num_classes())?,
        fold_errors: Some(fold_errors),
        fold_sizes: Some(fold_sizes),
        target_class: None,
        auc: None,
        f1: None,
        skipped_folds: Vec::new(),
    })
}

pub fn one_vs_rest_detect(data: &Dataset, target_class: usize, plan: &FoldPlan, hyper: &Hyperparams) -> Result<EvalReport> {
    one_vs_rest_detect_with(data, target_class, plan, hyper, CvOptions::default())
}

/// Binary detection of `target_class` against all others with a `K = 2`
/// hidden-unit model per fold. The score is the target posterior; F1 counts
/// a detection when that posterior exceeds 0.5. Folds whose test or training
/// part contains a single class are skipped.
pub fn one_vs_rest_detect_with(
    data: &Dataset,
    target_class: usize,
    plan: &FoldPlan,
    hyper: &Hyperparams,
    opts: CvOptions,
) -> Result<EvalReport> {
    check_plan(data, plan)?;
    let binary = data.one_vs_rest(target_class)?;
    let truth = binary.labels()?;

    let mut active = Vec::new();
    let mut skipped = Vec::new();
    for fold in 0..plan.folds {
        let classes_in = |idx: Vec<usize>| {
            let pos = idx.iter().filter(|&&i| truth[i] == 1).count();
            pos > 0 && pos < idx.len()
        };
        if classes_in(plan.test_indices(fold)) && classes_in(plan.train_indices(fold)) {
            active.push(fold);
        } else {
            log::warn!("target {target_class}: fold {fold} has a single class and is skipped");
            skipped.push(fold);
        }
    }
    if active.is_empty() {
        return Err(Error::invalid(format!("every fold is single-class for target {target_class}")));
    }
    let outcomes = run_folds(&binary, plan, &active, hyper, ModelKind::Hulm, opts)?;

    let mut fold_errors = vec![0.0; plan.folds];
    let mut fold_sizes = vec![0; plan.folds];
    let (mut scores, mut pooled_truth, mut preds) = (Vec::new(), Vec::new(), Vec::new());
    for (outcome, &fold) in outcomes.iter().zip(&active) {
        let fold_preds = argmax_labels(&outcome.posteriors);
        let fold_truth: Vec<usize> = outcome.indices.iter().map(|&i| truth[i]).collect();
        fold_errors[fold] = error_rate(&fold_preds, &fold_truth)?;
        fold_sizes[fold] = outcome.indices.len();
        scores.extend(outcome.posteriors.iter().map(|p| p[1]));
        pooled_truth.extend(fold_truth);
        preds.extend(fold_preds);
    }
    let is_pos: Vec<bool> = pooled_truth.iter().map(|&t| t == 1).collect();
    let detected: Vec<bool> = scores.iter().map(|&s| s > 0.5).collect();
    Ok(EvalReport {
        model: ModelKind::Hulm,
        error_rate: error_rate(&preds, &pooled_truth)?,
        confusion: confusion_matrix(&preds, &pooled_truth, 2)?,
        fold_errors: Some(fold_errors),
        fold_sizes: Some(fold_sizes),
        target_class: Some(target_class),
        auc: Some(roc_auc(&scores, &is_pos)?),
        f1: Some(f1_score(&detected, &is_pos)?),
        skipped_folds: skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::kfold;
    use crate::synth::synth_shift_task;
    use proptest::prelude::*;

    fn pairwise_auc(scores: &[f64], truth: &[bool]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &ti) in truth.iter().enumerate() {
            for (j, &tj) in truth.iter().enumerate() {
                if ti && !tj {
                    pairs += 1.0;
                    wins += match scores[i].partial_cmp(&scores[j]).unwrap() {
                        Ordering::Greater => 1.0,
                        Ordering::Equal => 0.5,
                        Ordering::Less => 0.0,
                    };
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn error_rate_cases() {
        assert_eq!(error_rate(&[0, 1, 2], &[0, 1, 2]).unwrap(), 0.0);
        assert_eq!(error_rate(&[1, 0], &[0, 1]).unwrap(), 1.0);
        assert_eq!(error_rate(&[0, 1, 1, 1], &[0, 1, 1, 0]).unwrap(), 0.25);
        assert!(error_rate(&[0], &[0, 1]).is_err());
        assert!(error_rate(&[], &[]).is_err());
    }

    #[test]
    fn auc_cases() {
        let truth = [true, true, false, false];
        assert_eq!(roc_auc(&[0.9, 0.8, 0.2, 0.1], &truth).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.1, 0.2, 0.8, 0.9], &truth).unwrap(), 0.0);
        assert_eq!(roc_auc(&[0.9, 0.4, 0.6, 0.1], &truth).unwrap(), 0.75);
        assert_eq!(roc_auc(&[0.5; 4], &truth).unwrap(), 0.5);
        assert!(roc_auc(&[0.1, 0.2], &[true, true]).is_err());
    }

    #[test]
    fn f1_cases() {
        assert_eq!(f1_score(&[true, false, true], &[true, false, true]).unwrap(), 1.0);
        assert_eq!(f1_score(&[false, false], &[true, false]).unwrap(), 0.0);
        // TP=2, FP=1, FN=1
        let f1 = f1_score(&[true, true, true, false, false], &[true, true, false, true, false]).unwrap();
        assert!((f1 - 2.0 / 3.0).abs() < 1e-15);
        assert!(f1_score(&[true], &[]).is_err());
    }

    proptest! {
        #[test]
        fn auc_matches_pairwise_count(raw in proptest::collection::vec((0u8..6, any::<bool>()), 2..40)) {
            let scores: Vec<f64> = raw.iter().map(|(s, _)| f64::from(*s) / 5.0).collect();
            let truth: Vec<bool> = raw.iter().map(|(_, t)| *t).collect();
            prop_assume!(truth.iter().any(|&t| t) && truth.iter().any(|&t| !t));
            let auc = roc_auc(&scores, &truth).unwrap();
            prop_assert!((auc - pairwise_auc(&scores, &truth)).abs() < 1e-12);
            let squashed: Vec<f64> = scores.iter().map(|s| (3.0 * s - 1.0).exp()).collect();
            prop_assert!((roc_auc(&squashed, &truth).unwrap() - auc).abs() < 1e-12);
        }

        #[test]
        fn error_rate_is_invariant_to_consistent_relabeling(pairs in proptest::collection::vec((0usize..4, 0usize..4), 1..30), shift in 0usize..4) {
            let preds: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let truth: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            let perm = |v: &[usize]| v.iter().map(|&x| (x + shift) % 4).collect::<Vec<_>>();
            prop_assert_eq!(error_rate(&preds, &truth).unwrap(), error_rate(&perm(&preds), &perm(&truth)).unwrap());
            let m = confusion_matrix(&preds, &truth, 4).unwrap();
            let trace: usize = (0..4).map(|i| m[i][i]).sum();
            let off: usize = m.iter().flatten().sum::<usize>() - trace;
            prop_assert_eq!(trace + off, preds.len());
        }
    }

    #[test]
    fn cross_validation_on_separable_data() {
        let data = synth_shift_task(20, 4, 1.5, 0.3, 1).unwrap();
        let plan = kfold(&data, 2, false, 3).unwrap();
        let hyper = Hyperparams { hidden_units: 3, epochs: 60, ..Default::default() };
        let report = cross_validate(&data, &plan, &hyper, ModelKind::Hulm).unwrap();
        assert_eq!(report.error_rate, 0.0);
        assert_eq!(report.total(), 40);
        let again = cross_validate_with(&data, &plan, &hyper, ModelKind::Hulm, CvOptions { threads: 2, ..Default::default() }).unwrap();
        assert_eq!(report, again);
        let sizes = report.fold_sizes.as_ref().unwrap();
        let weighted: f64 = report.fold_errors.as_ref().unwrap().iter().zip(sizes).map(|(e, &n)| e * n as f64).sum::<f64>() / 40.0;
        assert!((weighted - report.error_rate).abs() < 1e-15);
    }

    #[test]
    fn detection_on_separable_target() {
        let data = synth_shift_task(20, 4, 1.5, 0.3, 2).unwrap();
        let plan = kfold(&data, 2, false, 3).unwrap();
        let hyper = Hyperparams { hidden_units: 3, epochs: 60, ..Default::default() };
        let report = one_vs_rest_detect(&data, 1, &plan, &hyper).unwrap();
        assert_eq!(report.auc, Some(1.0));
        assert_eq!(report.f1, Some(1.0));
        assert_eq!(report.target_class, Some(1));
        let flipped = one_vs_rest_detect(&data, 0, &plan, &hyper).unwrap();
        let plain = cross_validate(&data, &plan, &hyper, ModelKind::Hulm).unwrap();
        assert_eq!(flipped.error_rate, plain.error_rate);
        assert_eq!(flipped.confusion[0][0], plain.confusion[1][1]);
        assert!(one_vs_rest_detect(&data, 2, &plan, &hyper).is_err());
    }

    #[test]
    fn single_class_folds_are_skipped() {
        let data = synth_shift_task(6, 3, 1.5, 0.3, 2).unwrap();
        // Negatives (0..6) spread over all folds; positives only in folds 0 and 1.
        let assignments = (0..12).map(|i| if i < 6 { i % 3 } else { usize::from(i >= 9) }).collect();
        let plan = FoldPlan { assignments, folds: 3, grouped: false };
        let hyper = Hyperparams { hidden_units: 2, epochs: 5, ..Default::default() };
        let report = one_vs_rest_detect(&data, 1, &plan, &hyper).unwrap();
        assert_eq!(report.skipped_folds, vec![2]);
        assert!(report.auc.is_some());
    }

    #[test]
    fn table_mentions_every_fold() {
        let report = EvalReport {
            model: ModelKind::Naive,
            error_rate: 0.25,
            confusion: vec![vec![1, 1], vec![0, 2]],
            fold_errors: Some(vec![0.5, 0.0]),
            fold_sizes: Some(vec![2, 2]),
            target_class: None,
            auc: None,
            f1: None,
            skipped_folds: vec![],
        };
        let table = report.render_table();
        assert!(table.contains("25.00%"));
        assert!(table.contains("50.00%"));
    }
}
