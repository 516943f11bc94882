//! Datasets, the line-delimited file format, windowing, standardization and
//! fold planning.
//!
//! File format: an optional first line `#meta {"K": .., "D": .., "labels": [..]}`
//! followed by one JSON record per line,
//! `{"label": 0, "group": "s01", "frames": [[..], ..]}`. `label` and `group`
//! may be omitted; blank lines are ignored.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::TimeSeries;

const META_PREFIX: &str = "#meta";

/// An ordered collection of series sharing one feature dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub series: Vec<TimeSeries>,
    num_classes: usize,
    dim: usize,
    label_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(series: Vec<TimeSeries>, num_classes: usize) -> Result<Self> {
        let dim = series.first().map(TimeSeries::dim).ok_or_else(|| Error::invalid("dataset is empty"))?;
        Self::with_dim(series, num_classes, dim)
    }

    /// Like [`Dataset::new`] but also accepts an empty series list.
    pub fn with_dim(series: Vec<TimeSeries>, num_classes: usize, dim: usize) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::invalid("dataset needs K >= 1"));
        }
        for (i, s) in series.iter().enumerate() {
            if s.dim() != dim {
                return Err(Error::invalid(format!("series {i} has D = {}, expected {dim}", s.dim())));
            }
            if let Some(label) = s.label {
                if label >= num_classes {
                    return Err(Error::invalid(format!("series {i} has label {label}, but K = {num_classes}")));
                }
            }
        }
        Ok(Dataset { series, num_classes, dim, label_names: None })
    }

    pub fn with_label_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.num_classes {
            return Err(Error::invalid(format!("{} label names given for K = {}", names.len(), self.num_classes)));
        }
        self.label_names = Some(names);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label_names(&self) -> Option<&[String]> {
        self.label_names.as_deref()
    }

    /// Labels of every series; fails if any series is unlabeled.
    pub fn labels(&self) -> Result<Vec<usize>> {
        self.series.iter().enumerate().map(|(i, s)| s.label.ok_or_else(|| Error::invalid(format!("series {i} is unlabeled")))).collect()
    }

    /// New dataset holding the series at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            series: indices.iter().map(|&i| self.series[i].clone()).collect(),
            num_classes: self.num_classes,
            dim: self.dim,
            label_names: self.label_names.clone(),
        }
    }

    /// Applies `f` to every series; the result must share one dimension.
    pub fn map_series(&self, f: impl Fn(&TimeSeries) -> Result<TimeSeries>) -> Result<Dataset> {
        let series = self.series.iter().map(f).collect::<Result<Vec<_>>>()?;
        let dim = series.first().map_or(self.dim, TimeSeries::dim);
        let mut out = Dataset::with_dim(series, self.num_classes, dim)?;
        out.label_names = self.label_names.clone();
        Ok(out)
    }

    /// Relabels every series as 1 if its label is `target`, else 0.
    pub fn one_vs_rest(&self, target: usize) -> Result<Dataset> {
        if target >= self.num_classes {
            return Err(Error::invalid(format!("target class {target} out of range for K = {}", self.num_classes)));
        }
        let labels = self.labels()?;
        let series = self
            .series
            .iter()
            .zip(labels)
            .map(|(s, l)| {
                let mut s = s.clone();
                s.label = Some(usize::from(l == target));
                s
            })
            .collect();
        Dataset::with_dim(series, 2, self.dim)
    }
}

#[derive(Serialize, Deserialize)]
struct Meta {
    #[serde(rename = "K", skip_serializing_if = "Option::is_none", default)]
    num_classes: Option<usize>,
    #[serde(rename = "D", skip_serializing_if = "Option::is_none", default)]
    dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    labels: Option<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct Record {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    label: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    group: Option<String>,
    frames: Vec<Vec<f64>>,
}

/// Parses a dataset from any buffered reader.
pub fn read_dataset(reader: impl BufRead) -> Result<Dataset> {
    let mut meta: Option<Meta> = None;
    let mut series = Vec::new();
    let mut dim: Option<usize> = None;
    let parse_err = |line: usize, message: String| Error::Parse { line, message };

    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| parse_err(lineno, e.to_string()))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix(META_PREFIX) {
            if meta.is_some() || !series.is_empty() {
                return Err(parse_err(lineno, "#meta header must be the first record".into()));
            }
            let m: Meta = serde_json::from_str(rest.trim()).map_err(|e| parse_err(lineno, e.to_string()))?;
            dim = m.dim;
            meta = Some(m);
            continue;
        }
        let record: Record = serde_json::from_str(trimmed).map_err(|e| parse_err(lineno, e.to_string()))?;
        let frames = Matrix::from_rows(&record.frames).map_err(|e| parse_err(lineno, format!("ragged frames: {e}")))?;
        let mut ts = TimeSeries::new(frames).map_err(|e| parse_err(lineno, e.to_string()))?;
        match dim {
            Some(d) if d != ts.dim() => {
                return Err(parse_err(lineno, format!("frames have D = {}, expected {d}", ts.dim())));
            }
            None => dim = Some(ts.dim()),
            _ => {}
        }
        if let (Some(label), Some(k)) = (record.label, meta.as_ref().and_then(declared_classes)) {
            if label >= k {
                return Err(parse_err(lineno, format!("label {label} out of range for K = {k}")));
            }
        }
        ts.label = record.label;
        ts.group = record.group;
        series.push(ts);
    }

    let declared = meta.as_ref().and_then(declared_classes);
    let inferred = series.iter().filter_map(|s| s.label).max().map_or(1, |m| m + 1);
    let num_classes = declared.unwrap_or(inferred);
    let dim = dim.ok_or_else(|| parse_err(0, "dataset declares no dimension and has no records".into()))?;
    let mut data = Dataset::with_dim(series, num_classes, dim).map_err(|e| parse_err(0, e.to_string()))?;
    if let Some(names) = meta.and_then(|m| m.labels) {
        data = data.with_label_names(names).map_err(|e| parse_err(1, e.to_string()))?;
    }
    Ok(data)
}

fn declared_classes(meta: &Meta) -> Option<usize> {
    meta.num_classes.or_else(|| meta.labels.as_ref().map(Vec::len))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    read_dataset(BufReader::new(file))
}

pub fn write_dataset(mut writer: impl Write, data: &Dataset) -> std::io::Result<()> {
    let meta = Meta { num_classes: Some(data.num_classes), dim: Some(data.dim), labels: data.label_names.clone() };
    writeln!(writer, "{META_PREFIX} {}", serde_json::to_string(&meta)?)?;
    for s in &data.series {
        let record = Record { label: s.label, group: s.group.clone(), frames: s.frames().to_rows() };
        writeln!(writer, "{}", serde_json::to_string(&record)?)?;
    }
    Ok(())
}

pub fn save_dataset(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| Error::Io { path: path.display().to_string(), source };
    let file = File::create(path).map_err(io_err)?;
    let mut writer = BufWriter::new(file);
    write_dataset(&mut writer, data).map_err(io_err)?;
    writer.flush().map_err(io_err)
}

/// Concatenates non-overlapping windows of `w` frames into single frames.
/// A short final window is padded by repeating the last frame.
pub fn window_stack(x: &TimeSeries, w: usize) -> Result<TimeSeries> {
    if w == 0 {
        return Err(Error::invalid("window width must be at least 1"));
    }
    let (len, dim) = (x.len(), x.dim());
    let out_len = len.div_ceil(w);
    let mut data = Vec::with_capacity(out_len * w * dim);
    for start in (0..len).step_by(w) {
        for t in start..start + w {
            data.extend_from_slice(x.frame(t.min(len - 1)));
        }
    }
    relabel(TimeSeries::new(Matrix::from_vec(out_len, w * dim, data)?)?, x)
}

/// Same-length centered window of odd width `w` with replicate-edge padding.
pub fn window_slide(x: &TimeSeries, w: usize) -> Result<TimeSeries> {
    if w == 0 || w.is_multiple_of(2) {
        return Err(Error::invalid(format!("sliding window width must be odd, got {w}")));
    }
    let (len, dim) = (x.len(), x.dim());
    let half = (w - 1) / 2;
    let mut data = Vec::with_capacity(len * w * dim);
    for t in 0..len {
        for offset in 0..w {
            let src = (t + offset).saturating_sub(half).min(len - 1);
            data.extend_from_slice(x.frame(src));
        }
    }
    relabel(TimeSeries::new(Matrix::from_vec(len, w * dim, data)?)?, x)
}

fn relabel(mut out: TimeSeries, like: &TimeSeries) -> Result<TimeSeries> {
    out.label = like.label;
    out.group = like.group.clone();
    Ok(out)
}

/// Frame-windowing preprocessing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Window {
    #[default]
    None,
    Stack(usize),
    Slide(usize),
}

impl Window {
    pub fn apply(&self, x: &TimeSeries) -> Result<TimeSeries> {
        match *self {
            Window::None => Ok(x.clone()),
            Window::Stack(w) => window_stack(x, w),
            Window::Slide(w) => window_slide(x, w),
        }
    }

    pub fn apply_dataset(&self, data: &Dataset) -> Result<Dataset> {
        match self {
            Window::None => Ok(data.clone()),
            _ => data.map_series(|s| self.apply(s)),
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Window::None => write!(f, "none"),
            Window::Stack(w) => write!(f, "stack:{w}"),
            Window::Slide(w) => write!(f, "slide:{w}"),
        }
    }
}

impl FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "none" {
            return Ok(Window::None);
        }
        let bad = || Error::invalid(format!("window must be none, stack:W or slide:W, got {s:?}"));
        let (mode, width) = s.split_once(':').ok_or_else(bad)?;
        let width: usize = width.parse().map_err(|_| bad())?;
        let window = match mode {
            "stack" if width >= 1 => Window::Stack(width),
            "slide" if width % 2 == 1 => Window::Slide(width),
            _ => return Err(bad()),
        };
        Ok(window)
    }
}

impl TryFrom<String> for Window {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Window> for String {
    fn from(w: Window) -> String {
        w.to_string()
    }
}

/// Per-dimension z-scoring statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Pools every frame of `train`. Zero-variance dimensions get `std = 1`.
    pub fn fit(train: &Dataset) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::invalid("cannot standardize on an empty dataset"));
        }
        let dim = train.dim();
        let mut mean = vec![0.0; dim];
        let mut count = 0usize;
        for s in &train.series {
            for row in s.frames().iter_rows() {
                for (m, v) in mean.iter_mut().zip(row) {
                    *m += v;
                }
                count += 1;
            }
        }
        for m in &mut mean {
            *m /= count as f64;
        }
        let mut var = vec![0.0; dim];
        for s in &train.series {
            for row in s.frames().iter_rows() {
                for ((acc, v), m) in var.iter_mut().zip(row).zip(&mean) {
                    *acc += (v - m) * (v - m);
                }
            }
        }
        let std = var
            .into_iter()
            .map(|v| {
                let sd = (v / count as f64).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Standardizer { mean, std })
    }

    pub fn apply_series(&self, x: &TimeSeries) -> Result<TimeSeries> {
        if x.dim() != self.mean.len() {
            return Err(Error::invalid(format!("series has D = {}, standardizer expects {}", x.dim(), self.mean.len())));
        }
        let mut frames = x.frames().clone();
        for r in 0..frames.rows() {
            for ((v, m), s) in frames.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        relabel(TimeSeries::new(frames)?, x)
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        data.map_series(|s| self.apply_series(s))
    }
}

/// Fits z-scoring on `train` and applies it to `apply_to`.
pub fn standardize(train: &Dataset, apply_to: &Dataset) -> Result<(Dataset, Standardizer)> {
    let stats = Standardizer::fit(train)?;
    Ok((stats.apply(apply_to)?, stats))
}

/// Assignment of every series to one of `folds` cross-validation folds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub assignments: Vec<usize>,
    pub folds: usize,
    pub grouped: bool,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.folds];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Seeded fold assignment. Grouped plans keep every group in one fold,
/// placing groups largest first into the currently smallest fold.
pub fn kfold(data: &Dataset, folds: usize, grouped: bool, seed: u64) -> Result<FoldPlan> {
    if folds < 2 {
        return Err(Error::invalid(format!("need at least 2 folds, got {folds}")));
    }
    let n = data.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignments = vec![0; n];

    if !grouped {
        if n < folds {
            return Err(Error::invalid(format!("{n} series cannot fill {folds} folds")));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        for (pos, &i) in order.iter().enumerate() {
            assignments[i] = pos % folds;
        }
        return Ok(FoldPlan { assignments, folds, grouped });
    }

    let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for (i, s) in data.series.iter().enumerate() {
        let id = s.group.clone().ok_or_else(|| Error::invalid(format!("series {i} has no group id")))?;
        let slot = *index.entry(id.clone()).or_insert_with(|| {
            groups.push((id, Vec::new()));
            groups.len() - 1
        });
        groups[slot].1.push(i);
    }
    if groups.len() < folds {
        return Err(Error::invalid(format!("{} distinct groups cannot fill {folds} folds", groups.len())));
    }
    groups.shuffle(&mut rng);
    groups.sort_by_key(|g| std::cmp::Reverse(g.1.len()));
    let mut counts = vec![0usize; folds];
    for (_, members) in groups {
        let fold = (0..folds).min_by_key(|&f| counts[f]).expect("folds >= 2");
        counts[fold] += members.len();
        for i in members {
            assignments[i] = fold;
        }
    }
    Ok(FoldPlan { assignments, folds, grouped })
}

/// Seeded split into `(train, held_out)` with `held_out_fraction` of the
/// series (at least one) in the second part.
pub fn holdout_split(data: &Dataset, held_out_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(held_out_fraction > 0.0 && held_out_fraction < 1.0) || data.len() < 2 {
        return Err(Error::invalid("hold-out split needs 0 < fraction < 1 and at least 2 series"));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let held = ((data.len() as f64 * held_out_fraction).round() as usize).clamp(1, data.len() - 1);
    let (test, train) = order.split_at(held);
    let (mut train, mut test) = (train.to_vec(), test.to_vec());
    train.sort_unstable();
    test.sort_unstable();
    Ok((data.subset(&train), data.subset(&test)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(rows: &[Vec<f64>], label: usize) -> TimeSeries {
        TimeSeries::from_rows(rows).unwrap().with_label(label)
    }

    #[test]
    fn reads_two_records() {
        let text = r#"{"label": 0, "frames": [[1, 2, 3], [4, 5, 6]]}
{"label": 1, "group": "s1", "frames": [[0.5, 1e-3, -2]]}
"#;
        let data = read_dataset(text.as_bytes()).unwrap();
        assert_eq!((data.len(), data.num_classes(), data.dim()), (2, 2, 3));
        assert_eq!(data.series[1].group.as_deref(), Some("s1"));
    }

    #[test]
    fn ragged_frames_name_the_line() {
        let text = "#meta {\"K\": 2}\n{\"label\": 0, \"frames\": [[1, 2], [3, 4]]}\n{\"label\": 1, \"frames\": [[1, 2], [3]]}\n";
        match read_dataset(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn inconsistent_dimension_and_label_range_are_rejected() {
        let text = "{\"label\": 0, \"frames\": [[1, 2]]}\n{\"label\": 1, \"frames\": [[1, 2, 3]]}\n";
        assert!(matches!(read_dataset(text.as_bytes()), Err(Error::Parse { line: 2, .. })));
        let text = "#meta {\"K\": 2, \"D\": 1}\n{\"label\": 2, \"frames\": [[1]]}\n";
        assert!(matches!(read_dataset(text.as_bytes()), Err(Error::Parse { line: 2, .. })));
        let text = "{\"label\": 0, \"frames\": [[1, 2]]}\n#meta {\"K\": 2}\n";
        assert!(read_dataset(text.as_bytes()).is_err());
    }

    #[test]
    fn header_declares_classes_and_names() {
        let text = "#meta {\"labels\": [\"a\", \"b\", \"c\"]}\n{\"label\": 0, \"frames\": [[1]]}\n";
        let data = read_dataset(text.as_bytes()).unwrap();
        assert_eq!(data.num_classes(), 3);
        assert_eq!(data.label_names().unwrap()[2], "c");
    }

    #[test]
    fn save_then_load_round_trips() {
        let data = Dataset::new(
            vec![series(&[vec![0.1, 1.0 / 3.0], vec![1e-300, -2.5e10]], 0).with_group("g"), series(&[vec![std::f64::consts::PI, 0.0]], 2)],
            3,
        )
        .unwrap()
        .with_label_names(vec!["x".into(), "y".into(), "z".into()])
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        save_dataset(&path, &data).unwrap();
        assert_eq!(load_dataset(&path).unwrap(), data);
    }

    #[test]
    fn stacking_shapes_and_padding() {
        let x = TimeSeries::from_rows(&(0..120).map(|t| vec![t as f64, 0.0, 1.0]).collect::<Vec<_>>()).unwrap();
        let s = window_stack(&x, 10).unwrap();
        assert_eq!((s.len(), s.dim()), (12, 30));
        assert_eq!(window_stack(&x, 1).unwrap(), x);

        let x = TimeSeries::from_rows(&(1..=5).map(|t| vec![t as f64, -(t as f64)]).collect::<Vec<_>>()).unwrap();
        let s = window_stack(&x, 2).unwrap();
        assert_eq!((s.len(), s.dim()), (3, 4));
        assert_eq!(s.frame(2), &[5.0, -5.0, 5.0, -5.0]);
        assert_eq!(s.frame(0), &[1.0, -1.0, 2.0, -2.0]);
    }

    #[test]
    fn sliding_window_replicates_edges() {
        let x = TimeSeries::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap().with_label(1);
        let s = window_slide(&x, 3).unwrap();
        assert_eq!(s.frame(0), &[1.0, 1.0, 2.0]);
        assert_eq!(s.frame(1), &[1.0, 2.0, 3.0]);
        assert_eq!(s.frame(2), &[2.0, 3.0, 3.0]);
        assert_eq!(s.label, Some(1));
        assert_eq!(window_slide(&x, 1).unwrap(), x);
        assert!(window_slide(&x, 2).is_err());

        let mfcc = TimeSeries::from_rows(&vec![vec![0.5; 13]; 7]).unwrap();
        let s = window_slide(&mfcc, 3).unwrap();
        assert_eq!((s.len(), s.dim()), (7, 39));
    }

    #[test]
    fn window_spec_parses() {
        assert_eq!("none".parse::<Window>().unwrap(), Window::None);
        assert_eq!("stack:10".parse::<Window>().unwrap(), Window::Stack(10));
        assert_eq!("slide:3".parse::<Window>().unwrap(), Window::Slide(3));
        for bad in ["slide:2", "stack:0", "stack", "blur:3", "slide:x"] {
            assert!(bad.parse::<Window>().is_err(), "{bad}");
        }
        assert_eq!(Window::Slide(3).to_string(), "slide:3");
    }

    fn small_dataset() -> Dataset {
        Dataset::new(vec![series(&[vec![1.0, 5.0], vec![3.0, 5.0]], 0), series(&[vec![-2.0, 5.0], vec![10.0, 5.0], vec![0.5, 5.0]], 1)], 2)
            .unwrap()
    }

    #[test]
    fn standardize_centers_and_passes_constant_dims() {
        let data = small_dataset();
        let (out, stats) = standardize(&data, &data).unwrap();
        assert_eq!(stats.std[1], 1.0);
        let mut sums = [0.0; 2];
        let mut count = 0.0;
        for s in &out.series {
            for row in s.frames().iter_rows() {
                sums[0] += row[0];
                sums[1] += row[1];
                count += 1.0;
                assert_eq!(row[1], 0.0);
            }
        }
        assert!((sums[0] / count).abs() < 1e-12);
        let (again, stats2) = standardize(&out, &out).unwrap();
        assert!(stats2.mean.iter().all(|m| m.abs() < 1e-12));
        assert!((stats2.std[0] - 1.0).abs() < 1e-12);
        for (a, b) in again.series.iter().zip(&out.series) {
            for (u, v) in a.frames().as_slice().iter().zip(b.frames().as_slice()) {
                assert!((u - v).abs() < 1e-9);
            }
        }
    }

    fn labelled(n: usize, groups: Option<&[(&str, usize)]>) -> Dataset {
        let mut series = Vec::new();
        match groups {
            None => {
                for i in 0..n {
                    series.push(TimeSeries::from_rows(&[vec![i as f64]]).unwrap().with_label(i % 2));
                }
            }
            Some(groups) => {
                for (g, count) in groups {
                    for i in 0..*count {
                        series.push(TimeSeries::from_rows(&[vec![i as f64]]).unwrap().with_label(i % 2).with_group(*g));
                    }
                }
            }
        }
        Dataset::new(series, 2).unwrap()
    }

    #[test]
    fn ungrouped_folds_are_balanced_and_seeded() {
        let data = labelled(100, None);
        let plan = kfold(&data, 10, false, 3).unwrap();
        assert!(plan.fold_sizes().iter().all(|&s| s == 10));
        assert_eq!(plan, kfold(&data, 10, false, 3).unwrap());
        assert_ne!(plan, kfold(&data, 10, false, 4).unwrap());
        assert!(kfold(&data, 1, false, 3).is_err());
    }

    #[test]
    fn grouped_folds_never_split_groups() {
        let data = labelled(0, Some(&[("g1", 5), ("g2", 5), ("g3", 5), ("g4", 5)]));
        let plan = kfold(&data, 2, true, 9).unwrap();
        assert_eq!(plan.fold_sizes(), vec![10, 10]);
        for (i, s) in data.series.iter().enumerate() {
            for (j, u) in data.series.iter().enumerate() {
                if s.group == u.group {
                    assert_eq!(plan.assignments[i], plan.assignments[j]);
                }
            }
        }
        assert!(kfold(&data, 5, true, 9).is_err());
        assert!(kfold(&labelled(10, None), 2, true, 9).is_err());
    }

    #[test]
    fn one_vs_rest_relabels() {
        let data = small_dataset();
        let bin = data.one_vs_rest(1).unwrap();
        assert_eq!(bin.labels().unwrap(), vec![0, 1]);
        assert!(data.one_vs_rest(2).is_err());
    }

    #[test]
    fn holdout_split_partitions() {
        let data = labelled(20, None);
        let (train, test) = holdout_split(&data, 0.25, 1).unwrap();
        assert_eq!((train.len(), test.len()), (15, 5));
    }
}
