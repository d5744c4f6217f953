//! Leave-one-out cross-validation and the metrics reported on it.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::Axis;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureMatrix, Task};
use crate::learners::{check_binary, ModelSpec, TrainedModel};
use crate::smote::smote;
use crate::stats::{percentile_sorted, sorted_copy};
use crate::{derive_seed, ModelError};

pub const SMOTE_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub app_id: String,
    pub truth: f64,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn from_labels(truth: &[f64], predicted: &[f64]) -> Self {
        let mut c = Confusion::default();
        for (&t, &p) in truth.iter().zip(predicted) {
            match (t == 1.0, p == 1.0) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (true, false) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        c
    }

    /// The same matrix seen from the negative class.
    pub fn flipped(self) -> Self {
        Confusion { tp: self.tn, fp: self.fn_, fn_: self.fp, tn: self.tp }
    }

    pub fn mcc(self) -> f64 {
        let (tp, fp, fn_, tn) = (self.tp as f64, self.fp as f64, self.fn_ as f64, self.tn as f64);
        let denom = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
        if denom == 0.0 {
            0.0
        } else {
            (tp * tn - fp * fn_) / denom
        }
    }

    pub fn class_metrics(self) -> ClassMetrics {
        let ratio = |a: u64, b: u64| if a + b == 0 { 0.0 } else { a as f64 / (a + b) as f64 };
        let precision = ratio(self.tp, self.fp);
        let recall = ratio(self.tp, self.fn_);
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        ClassMetrics { precision, recall, f1, support: self.tp + self.fn_ }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub confusion: Confusion,
    /// Keyed by class: "popular" (1) and "unpopular" (0).
    pub per_class: BTreeMap<String, ClassMetrics>,
    /// `None` when one truth class is absent.
    pub auc: Option<f64>,
    pub mcc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub rmse: f64,
    pub mae: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "lowercase")]
pub enum Metrics {
    Classification(ClassificationMetrics),
    Regression(RegressionMetrics),
}

/// Probability that a random positive outscores a random negative, ties counting half.
pub fn auc(truth: &[f64], scores: &[f64]) -> Option<f64> {
    let mut idx: Vec<usize> = (0..truth.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // midranks over tie groups
    let mut rank = vec![0.0; idx.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            rank[k] = mid;
        }
        i = j + 1;
    }
    let n_pos = truth.iter().filter(|&&t| t == 1.0).count() as f64;
    let n_neg = truth.len() as f64 - n_pos;
    if n_pos == 0.0 || n_neg == 0.0 {
        return None;
    }
    let rank_sum: f64 = truth.iter().zip(&rank).filter(|(&t, _)| t == 1.0).map(|(_, r)| r).sum();
    Some((rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg))
}

pub fn classification_metrics(preds: &[Prediction], threshold: f64) -> Result<ClassificationMetrics, ModelError> {
    if preds.is_empty() {
        return Err(ModelError::Empty("no predictions".into()));
    }
    let truth: Vec<f64> = preds.iter().map(|p| p.truth).collect();
    let scores: Vec<f64> = preds.iter().map(|p| p.score).collect();
    let labels: Vec<f64> = scores.iter().map(|&s| f64::from(s >= threshold)).collect();
    let confusion = Confusion::from_labels(&truth, &labels);
    let per_class = BTreeMap::from([
        ("popular".to_string(), confusion.class_metrics()),
        ("unpopular".to_string(), confusion.flipped().class_metrics()),
    ]);
    Ok(ClassificationMetrics { confusion, per_class, auc: auc(&truth, &scores), mcc: confusion.mcc() })
}

pub fn regression_metrics(preds: &[Prediction]) -> Result<RegressionMetrics, ModelError> {
    if preds.len() < 2 {
        return Err(ModelError::Empty("regression metrics need at least two predictions".into()));
    }
    let n = preds.len() as f64;
    let mean = preds.iter().map(|p| p.truth).sum::<f64>() / n;
    let sst: f64 = preds.iter().map(|p| (p.truth - mean).powi(2)).sum();
    if sst == 0.0 {
        return Err(ModelError::ZeroVariance);
    }
    let sse: f64 = preds.iter().map(|p| (p.truth - p.score).powi(2)).sum();
    let mae = preds.iter().map(|p| (p.truth - p.score).abs()).sum::<f64>() / n;
    Ok(RegressionMetrics { rmse: (sse / n).sqrt(), mae, r2: 1.0 - sse / sst })
}

pub fn compute_metrics(task: Task, preds: &[Prediction], threshold: f64) -> Result<Metrics, ModelError> {
    Ok(match task {
        Task::Classification => Metrics::Classification(classification_metrics(preds, threshold)?),
        Task::Regression => Metrics::Regression(regression_metrics(preds)?),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub smote: bool,
    pub smote_k: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { smote: false, smote_k: SMOTE_K }
    }
}

/// Row indices (into the evaluated matrix) that each fold trained on.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FoldAudit {
    pub held_out: usize,
    pub train_rows: Vec<usize>,
    /// (base, neighbour) rows behind every synthetic sample.
    pub synthetic_sources: Vec<(usize, usize)>,
    /// App ids present in any training structure of the fold.
    pub train_ids: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub spec: ModelSpec,
    pub feature_set: String,
    pub features: Vec<String>,
    /// Free-form provenance (config hash, thresholds, seeds).
    pub provenance: BTreeMap<String, String>,
    pub smote: bool,
    pub n_instances: usize,
    /// Held-out app ids whose training fold had a single class.
    pub degenerate_folds: Vec<String>,
    pub metrics: Metrics,
    pub predictions: Vec<Prediction>,
    #[serde(skip)]
    pub audit: Vec<FoldAudit>,
}

impl EvalReport {
    /// Metrics recomputed from the stored predictions.
    pub fn recompute(&self) -> Result<Metrics, ModelError> {
        compute_metrics(self.task, &self.predictions, self.spec.hyper.threshold)
    }

    /// Checks that no fold trained on, or synthesised from, its held-out row.
    pub fn leakage_audit(&self, app_ids: &[String]) -> Result<(), String> {
        for f in &self.audit {
            let id = &app_ids[f.held_out];
            if f.train_rows.contains(&f.held_out) {
                return Err(format!("fold {id}: held-out row used for training"));
            }
            if f.synthetic_sources.iter().any(|&(a, b)| a == f.held_out || b == f.held_out) {
                return Err(format!("fold {id}: synthetic sample derived from held-out row"));
            }
            if f.train_ids.contains(id) {
                return Err(format!("fold {id}: held-out app id present in training data"));
            }
        }
        Ok(())
    }
}

/// Chooses the feature columns for one fold from its training rows.
pub type FoldSelector<'a> = dyn Fn(&FeatureMatrix, &[f64], u64) -> Result<Vec<String>, ModelError> + Sync + 'a;

enum FoldOutcome {
    Predicted(Prediction, FoldAudit),
    Degenerate(String),
}

/// Leave-one-out evaluation of `spec` on all columns of `x`.
pub fn loocv(x: &FeatureMatrix, y: &[f64], spec: &ModelSpec, opts: &EvalOptions) -> Result<EvalReport, ModelError> {
    loocv_inner(x, y, spec, opts, None)
}

/// As [`loocv`], but re-running feature selection inside every fold on its training rows only.
pub fn loocv_with_selection(
    x: &FeatureMatrix,
    y: &[f64],
    spec: &ModelSpec,
    opts: &EvalOptions,
    select: &FoldSelector<'_>,
) -> Result<EvalReport, ModelError> {
    loocv_inner(x, y, spec, opts, Some(select))
}

fn loocv_inner(
    x: &FeatureMatrix,
    y: &[f64],
    spec: &ModelSpec,
    opts: &EvalOptions,
    select: Option<&FoldSelector<'_>>,
) -> Result<EvalReport, ModelError> {
    spec.validate()?;
    let n = x.n_rows();
    if n < 3 {
        return Err(ModelError::Empty(format!("LOOCV needs at least 3 instances, got {n}")));
    }
    if y.len() != n {
        return Err(ModelError::Shape(format!("{n} rows but {} targets", y.len())));
    }
    crate::data::ensure_finite_targets(y)?;
    if spec.task == Task::Classification {
        check_binary(y)?;
    }
    let outcomes: Vec<FoldOutcome> = (0..n)
        .into_par_iter()
        .map(|i| run_fold(x, y, spec, opts, select, i))
        .collect::<Result<_, _>>()?;
    let mut predictions = Vec::with_capacity(n);
    let mut audit = Vec::with_capacity(n);
    let mut degenerate_folds = Vec::new();
    for o in outcomes {
        match o {
            FoldOutcome::Predicted(p, a) => {
                predictions.push(p);
                audit.push(a);
            }
            FoldOutcome::Degenerate(id) => degenerate_folds.push(id),
        }
    }
    if predictions.is_empty() {
        return Err(ModelError::Empty("every fold was degenerate".into()));
    }
    let metrics = compute_metrics(spec.task, &predictions, spec.hyper.threshold)?;
    Ok(EvalReport {
        task: spec.task,
        spec: spec.clone(),
        feature_set: String::new(),
        features: x.schema.clone(),
        provenance: BTreeMap::new(),
        smote: opts.smote,
        n_instances: n,
        degenerate_folds,
        metrics,
        predictions,
        audit,
    })
}

fn run_fold(
    x: &FeatureMatrix,
    y: &[f64],
    spec: &ModelSpec,
    opts: &EvalOptions,
    select: Option<&FoldSelector<'_>>,
    i: usize,
) -> Result<FoldOutcome, ModelError> {
    let fold_seed = derive_seed(spec.seed, i as u64);
    let train_rows: Vec<usize> = (0..x.n_rows()).filter(|&r| r != i).collect();
    let train_y: Vec<f64> = train_rows.iter().map(|&r| y[r]).collect();
    if spec.task == Task::Classification && check_binary(&train_y).is_err() {
        return Ok(FoldOutcome::Degenerate(x.app_ids[i].clone()));
    }
    let train = x.rows(&train_rows);
    let train = match select {
        Some(f) => {
            let cols = f(&train, &train_y, derive_seed(fold_seed, 2))?;
            train.select(&cols)?
        }
        None => train,
    };
    let mut audit = FoldAudit {
        held_out: i,
        train_rows: train_rows.clone(),
        synthetic_sources: Vec::new(),
        train_ids: train.app_ids.iter().cloned().collect(),
    };
    let fold_spec = ModelSpec { seed: derive_seed(fold_seed, 1), ..spec.clone() };
    let model = if opts.smote && spec.task == Task::Classification {
        let s = smote(train.data.view(), &train_y, opts.smote_k, derive_seed(fold_seed, 3))?;
        audit.synthetic_sources =
            s.origins.iter().map(|o| (train_rows[o.base], train_rows[o.neighbour])).collect();
        TrainedModel::fit_array(&fold_spec, &train.schema, s.x.view(), &s.y)?
    } else {
        TrainedModel::fit_array(&fold_spec, &train.schema, train.data.view(), &train_y)?
    };
    let cols: Vec<usize> = train.schema.iter().map(|f| x.column_index(f).expect("selected from schema")).collect();
    let held = x.data.row(i).select(Axis(0), &cols);
    let score = model.score_row(held.view());
    Ok(FoldOutcome::Predicted(Prediction { app_id: x.app_ids[i].clone(), truth: y[i], score }, audit))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrimReport {
    pub k: f64,
    pub q1: f64,
    pub q3: f64,
    pub lower: f64,
    pub upper: f64,
    /// Indices of the values kept, ascending.
    pub kept: Vec<usize>,
    pub dropped_ids: Vec<String>,
}

/// Tukey fences: drops values outside `[Q1 - k IQR, Q3 + k IQR]`.
pub fn trim_outliers(ids: &[String], values: &[f64], k: f64) -> Result<TrimReport, ModelError> {
    if values.len() < 4 {
        return Err(ModelError::Empty(format!("outlier trimming needs at least 4 values, got {}", values.len())));
    }
    crate::data::ensure_finite_targets(values)?;
    let sorted = sorted_copy(values);
    let q1 = percentile_sorted(&sorted, 25.0);
    let q3 = percentile_sorted(&sorted, 75.0);
    let iqr = q3 - q1;
    let (lower, upper) = if k.is_infinite() { (f64::NEG_INFINITY, f64::INFINITY) } else { (q1 - k * iqr, q3 + k * iqr) };
    let mut kept = Vec::new();
    let mut dropped_ids = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        if v >= lower && v <= upper {
            kept.push(i);
        } else {
            dropped_ids.push(ids[i].clone());
        }
    }
    Ok(TrimReport { k, q1, q3, lower, upper, kept, dropped_ids })
}
