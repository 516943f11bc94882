//! Versioned JSON documents for trained models.
//!
//! ```text
//! {"format_version": 1, "kind": "hulm", "H": .., "D": .., "K": ..,
//!  "pi": [..], "tau": [..], "A": [..], "b": [..], "c": [..],
//!  "W": [[..D]; H], "V": [[..K]; H]}
//! {"format_version": 1, "kind": "naive", "D": .., "K": .., "W": [[..D]; K], "c": [..]}
//! ```
//!
//! An optional `"preprocess"` object records the windowing and
//! standardization applied before training.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::classifier::TrainedModel;
use crate::data::{Dataset, Standardizer, Window};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{HulmParams, TimeSeries};
use crate::naive::NaiveParams;

pub const FORMAT_VERSION: u32 = 1;

/// Preprocessing applied to every series before the model sees it.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Preprocess {
    #[serde(default)]
    pub window: Window,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standardizer: Option<Standardizer>,
}

impl Preprocess {
    pub fn is_identity(&self) -> bool {
        self.window == Window::None && self.standardizer.is_none()
    }

    pub fn apply_series(&self, x: &TimeSeries) -> Result<TimeSeries> {
        let windowed = self.window.apply(x)?;
        match &self.standardizer {
            Some(s) => s.apply_series(&windowed),
            None => Ok(windowed),
        }
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        if self.is_identity() {
            return Ok(data.clone());
        }
        data.map_series(|s| self.apply_series(s))
    }
}

/// A trained model plus the preprocessing it expects.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelFile {
    pub model: TrainedModel,
    pub preprocess: Preprocess,
}

#[derive(Serialize, Deserialize)]
struct HulmDoc {
    format_version: u32,
    kind: String,
    #[serde(rename = "H")]
    hidden: usize,
    #[serde(rename = "D")]
    dim: usize,
    #[serde(rename = "K")]
    classes: usize,
    pi: Vec<f64>,
    tau: Vec<f64>,
    #[serde(rename = "A")]
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    #[serde(rename = "W")]
    w: Matrix,
    #[serde(rename = "V")]
    v: Matrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    preprocess: Option<Preprocess>,
}

#[derive(Serialize, Deserialize)]
struct NaiveDoc {
    format_version: u32,
    kind: String,
    #[serde(rename = "D")]
    dim: usize,
    #[serde(rename = "K")]
    classes: usize,
    #[serde(rename = "W")]
    w: Matrix,
    c: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    preprocess: Option<Preprocess>,
}

fn preprocess_field(p: &Preprocess) -> Option<Preprocess> {
    (!p.is_identity()).then(|| p.clone())
}

pub fn model_to_string(file: &ModelFile) -> Result<String> {
    let text = match &file.model {
        TrainedModel::Hulm(p) => serde_json::to_string_pretty(&HulmDoc {
            format_version: FORMAT_VERSION,
            kind: "hulm".into(),
            hidden: p.hidden(),
            dim: p.dim(),
            classes: p.classes(),
            pi: p.pi.clone(),
            tau: p.tau.clone(),
            a: p.a.clone(),
            b: p.b.clone(),
            c: p.c.clone(),
            w: p.w.clone(),
            v: p.v.clone(),
            preprocess: preprocess_field(&file.preprocess),
        }),
        TrainedModel::Naive(p) => serde_json::to_string_pretty(&NaiveDoc {
            format_version: FORMAT_VERSION,
            kind: "naive".into(),
            dim: p.dim(),
            classes: p.classes(),
            w: p.w.clone(),
            c: p.c.clone(),
            preprocess: preprocess_field(&file.preprocess),
        }),
    };
    text.map_err(|e| Error::Format(e.to_string()))
}

pub fn model_from_str(text: &str) -> Result<ModelFile> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    let version = value.get("format_version").and_then(Value::as_u64);
    if version != Some(u64::from(FORMAT_VERSION)) {
        return Err(Error::Format(format!("unsupported format_version {version:?}")));
    }
    let kind = value.get("kind").and_then(Value::as_str).unwrap_or("hulm").to_owned();
    let bad = |e: serde_json::Error| Error::Format(e.to_string());
    let file = match kind.as_str() {
        "hulm" => {
            let doc: HulmDoc = serde_json::from_value(value).map_err(bad)?;
            let p = HulmParams { pi: doc.pi, tau: doc.tau, a: doc.a, w: doc.w, v: doc.v, b: doc.b, c: doc.c };
            p.validate().map_err(|e| Error::Format(e.to_string()))?;
            if (p.hidden(), p.dim(), p.classes()) != (doc.hidden, doc.dim, doc.classes) {
                return Err(Error::Format("declared H, D, K disagree with parameter shapes".into()));
            }
            ModelFile { model: TrainedModel::Hulm(p), preprocess: doc.preprocess.unwrap_or_default() }
        }
        "naive" => {
            let doc: NaiveDoc = serde_json::from_value(value).map_err(bad)?;
            let p = NaiveParams { w: doc.w, c: doc.c };
            p.validate().map_err(|e| Error::Format(e.to_string()))?;
            if (p.dim(), p.classes()) != (doc.dim, doc.classes) {
                return Err(Error::Format("declared D, K disagree with parameter shapes".into()));
            }
            ModelFile { model: TrainedModel::Naive(p), preprocess: doc.preprocess.unwrap_or_default() }
        }
        other => return Err(Error::Format(format!("unknown model kind {other:?}"))),
    };
    Ok(file)
}

pub fn save_model(path: impl AsRef<Path>, file: &ModelFile) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model_to_string(file)? + "\n").map_err(|source| Error::Io { path: path.display().to_string(), source })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelFile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    model_from_str(&text)
}
