use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::inference::predict_distribution;
use crate::learning::{search_lambda_with, train_sgd, LambdaSearch, TrainReport};
use crate::math::argmax;
use crate::model::{HulmParams, Hyperparams, TimeSeries};
use crate::naive::{naive_predict, naive_train_report, NaiveParams};

/// Which model family to train.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Hulm,
    Naive,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Hulm => "hulm",
            ModelKind::Naive => "naive",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hulm" => Ok(ModelKind::Hulm),
            "naive" => Ok(ModelKind::Naive),
            other => Err(Error::invalid(format!("unknown model kind {other:?}"))),
        }
    }
}

/// A trained model of either family.
#[derive(Clone, Debug, PartialEq)]
pub enum TrainedModel {
    Hulm(HulmParams),
    Naive(NaiveParams),
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Hulm(_) => ModelKind::Hulm,
            TrainedModel::Naive(_) => ModelKind::Naive,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TrainedModel::Hulm(p) => p.dim(),
            TrainedModel::Naive(p) => p.dim(),
        }
    }

    pub fn classes(&self) -> usize {
        match self {
            TrainedModel::Hulm(p) => p.classes(),
            TrainedModel::Naive(p) => p.classes(),
        }
    }

    pub fn predict_distribution(&self, x: &TimeSeries) -> Result<Vec<f64>> {
        match self {
            TrainedModel::Hulm(p) => predict_distribution(x, p),
            TrainedModel::Naive(p) => naive_predict(x, p),
        }
    }

    pub fn predict_label(&self, x: &TimeSeries) -> Result<usize> {
        Ok(argmax(&self.predict_distribution(x)?))
    }
}

/// Trains either model family and returns its report with the parameters
/// wrapped in [`TrainedModel`].
pub fn train_model(
    kind: ModelKind,
    data: &Dataset,
    hyper: &Hyperparams,
    validation: Option<&Dataset>,
) -> Result<TrainReport<TrainedModel>> {
    fn wrap<P>(r: TrainReport<P>, f: impl FnOnce(P) -> TrainedModel) -> TrainReport<TrainedModel> {
        TrainReport {
            objectives: r.objectives,
            train_errors: r.train_errors,
            validation_errors: r.validation_errors,
            final_objective: r.final_objective,
            final_train_error: r.final_train_error,
            params: f(r.params),
        }
    }
    Ok(match kind {
        ModelKind::Hulm => wrap(train_sgd(data, hyper, validation)?, TrainedModel::Hulm),
        ModelKind::Naive => wrap(naive_train_report(data, hyper, validation)?, TrainedModel::Naive),
    })
}

/// [`crate::search_lambda`] for either model family: trains on `train` once
/// per grid value and scores each fit by its error on `val`.
pub fn search_lambda_model(kind: ModelKind, train: &Dataset, val: &Dataset, hyper: &Hyperparams, grid: &[f64]) -> Result<LambdaSearch> {
    search_lambda_with(grid, |lambda| {
        let h = Hyperparams { l2_lambda: lambda, ..hyper.clone() };
        let model = train_model(kind, train, &h, None)?.params;
        let mut wrong = 0usize;
        for s in &val.series {
            let truth = s.label.ok_or_else(|| Error::invalid("validation series is unlabeled"))?;
            if model.predict_label(s)? != truth {
                wrong += 1;
            }
        }
        Ok(wrong as f64 / val.len().max(1) as f64)
    })
}
