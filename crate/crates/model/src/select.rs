//! Feature sets: size only, the fixed handpicked list, and a six-selector vote.

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{is_constant, FeatureMatrix, Standardizer, Task};
use crate::learners::ensemble::{BoostLoss, Boosted, Forest};
use crate::learners::linear::{fit_l1_logistic, fit_lasso, fit_linear_svm, fit_ridge};
use crate::learners::tree::TreeParams;
use crate::learners::{check_binary, forest_features, Hyper};
use crate::stats::pearson;
use crate::{derive_seed, ModelError};

pub const SIZE_FEATURE: &str = "app_loc";
pub const DEFAULT_TOP_N: usize = 25;
pub const VOTE_PANEL: usize = 6;

pub const HANDPICKED: [&str; 28] = [
    "app_loc",
    "sys_decoupling_level",
    "sys_total_antipattern_count",
    "class_cbo_p10",
    "class_cbo_p50",
    "class_cbo_p90",
    "class_wmc_p10",
    "class_wmc_p50",
    "class_wmc_p90",
    "class_rfc_p10",
    "class_rfc_p50",
    "class_rfc_p90",
    "method_wmc_p10",
    "method_wmc_p50",
    "method_wmc_p90",
    "method_fan_in_p10",
    "method_fan_in_p50",
    "method_fan_in_p90",
    "method_fan_out_p10",
    "method_fan_out_p50",
    "method_fan_out_p90",
    "method_readability_p10",
    "method_readability_p50",
    "method_readability_p90",
    "smell_god_component",
    "smell_long_statement",
    "smell_long_method",
    "contains_ads",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSet {
    Size,
    Handpicked,
    Voting,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 3] = [FeatureSet::Size, FeatureSet::Handpicked, FeatureSet::Voting];

    pub fn name(self) -> &'static str {
        match self {
            FeatureSet::Size => "size",
            FeatureSet::Handpicked => "handpicked",
            FeatureSet::Voting => "voting",
        }
    }
}

impl std::fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for FeatureSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FeatureSet::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown feature set {s:?} (expected size, handpicked or voting)"))
    }
}

fn require(schema: &[String], names: &[&str]) -> Result<Vec<String>, ModelError> {
    let missing: Vec<String> =
        names.iter().filter(|n| !schema.iter().any(|s| s == *n)).map(|n| n.to_string()).collect();
    if !missing.is_empty() {
        return Err(ModelError::MissingFeatures(missing));
    }
    Ok(names.iter().map(|n| n.to_string()).collect())
}

pub fn size_only(schema: &[String]) -> Result<Vec<String>, ModelError> {
    require(schema, &[SIZE_FEATURE])
}

pub fn handpicked(schema: &[String]) -> Result<Vec<String>, ModelError> {
    require(schema, &HANDPICKED)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selector {
    Pearson,
    Chi2,
    AnovaF,
    RfeSvm,
    L1Logistic,
    Lasso,
    Ridge,
    RandomForest,
    GradientBoosting,
}

impl Selector {
    pub fn name(self) -> &'static str {
        match self {
            Selector::Pearson => "pearson",
            Selector::Chi2 => "chi2",
            Selector::AnovaF => "anova_f",
            Selector::RfeSvm => "rfe_svm",
            Selector::L1Logistic => "l1_logistic",
            Selector::Lasso => "lasso",
            Selector::Ridge => "ridge",
            Selector::RandomForest => "random_forest",
            Selector::GradientBoosting => "gradient_boosting",
        }
    }

    /// The six-member panel for `task`.
    pub fn panel(task: Task) -> [Selector; VOTE_PANEL] {
        match task {
            Task::Classification => [
                Selector::Pearson,
                Selector::Chi2,
                Selector::RfeSvm,
                Selector::L1Logistic,
                Selector::RandomForest,
                Selector::GradientBoosting,
            ],
            Task::Regression => [
                Selector::Pearson,
                Selector::AnovaF,
                Selector::RfeSvm,
                Selector::Lasso,
                Selector::Ridge,
                Selector::RandomForest,
            ],
        }
    }

    pub fn supports(self, task: Task) -> bool {
        Selector::panel(task).contains(&self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorResult {
    pub selector: String,
    pub task: Task,
    pub ranked_features: Vec<String>,
    /// Score of each ranked feature, same order.
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VotingResult {
    pub votes: BTreeMap<String, usize>,
    /// Features with at least `quorum` votes, by descending votes then name.
    pub selected: Vec<String>,
    pub quorum: usize,
}

/// Orders features by descending score with constant features after every
/// non-constant one, then by column index; keeps the first `n`.
fn top_n(schema: &[String], scores: &[f64], constant: &[bool], n: usize) -> (Vec<String>, Vec<f64>) {
    let mut idx: Vec<usize> = (0..schema.len()).collect();
    let key = |j: usize| if constant[j] { 0.0 } else { scores[j] };
    idx.sort_by(|&a, &b| {
        constant[a].cmp(&constant[b]).then(key(b).total_cmp(&key(a))).then(a.cmp(&b))
    });
    idx.truncate(n);
    (idx.iter().map(|&j| schema[j].clone()).collect(), idx.iter().map(|&j| key(j)).collect())
}

fn standardized_target(y: &[f64]) -> Vec<f64> {
    let m = crate::stats::mean(y);
    let sd = crate::stats::variance(y).sqrt();
    let sd = if sd > 1e-12 { sd } else { 1.0 };
    y.iter().map(|v| (v - m) / sd).collect()
}

/// sklearn-style chi-squared statistic of a non-negative feature against 0/1 classes.
pub fn chi2_score(col: &[f64], y: &[f64]) -> f64 {
    let total: f64 = col.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let n = y.len() as f64;
    let pos = y.iter().filter(|&&v| v == 1.0).count() as f64;
    let mut stat = 0.0;
    for (class_frac, is_pos) in [(pos / n, true), ((n - pos) / n, false)] {
        let observed: f64 = col.iter().zip(y).filter(|(_, &t)| (t == 1.0) == is_pos).map(|(v, _)| v).sum();
        let expected = class_frac * total;
        if expected > 0.0 {
            stat += (observed - expected).powi(2) / expected;
        }
    }
    stat
}

/// Min-shift then 10 equal-width bins; values become bin indices 0..=9.
pub fn bin10(col: &[f64]) -> Vec<f64> {
    let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / 10.0;
    col.iter()
        .map(|v| if width > 0.0 { ((v - lo) / width).floor().min(9.0) } else { 0.0 })
        .collect()
}

/// Univariate F statistic of a linear regression on one feature.
pub fn f_regression(col: &[f64], y: &[f64]) -> f64 {
    let r = pearson(col, y);
    let dof = y.len().saturating_sub(2) as f64;
    let denom = 1.0 - r * r;
    if denom <= 0.0 {
        f64::MAX
    } else {
        r * r / denom * dof
    }
}

const RFE_EPOCHS: usize = 200;
const RFE_LAMBDA: f64 = 1e-2;
const RFE_EPSILON: f64 = 0.1;
const RFE_DROP_FRACTION: f64 = 0.1;
const L1_ITERS: usize = 500;
const L1_STEP: f64 = 0.1;

/// Recursive elimination over a linear max-margin model. Returns a score per
/// column: survivors get `1 + |w|` from the last fit, eliminated columns get
/// a value that increases with how late they were removed.
fn rfe_scores(z: ArrayView2<f64>, y: &[f64], task: Task, n: usize, keep: &[usize]) -> Vec<f64> {
    let d = z.ncols();
    let mut scores = vec![0.0; d];
    let mut alive: Vec<usize> = keep.to_vec();
    let mut removed = 0usize;
    let regression = task == Task::Regression;
    loop {
        let sub = z.select(Axis(1), &alive);
        let m = fit_linear_svm(sub.view(), y, regression, RFE_LAMBDA, RFE_EPSILON, RFE_EPOCHS);
        if alive.len() <= n {
            for (pos, &j) in alive.iter().enumerate() {
                scores[j] = 1.0 + m.weights[pos].abs();
            }
            return scores;
        }
        let drop = ((alive.len() as f64 * RFE_DROP_FRACTION).floor() as usize).clamp(1, alive.len() - n);
        let mut order: Vec<usize> = (0..alive.len()).collect();
        order.sort_by(|&a, &b| m.weights[a].abs().total_cmp(&m.weights[b].abs()).then(b.cmp(&a)));
        let gone: Vec<usize> = order[..drop].to_vec();
        for &pos in &gone {
            removed += 1;
            // in (0, 1): later removal scores higher
            scores[alive[pos]] = removed as f64 / (d as f64 + 1.0);
        }
        let mut gone_sorted = gone;
        gone_sorted.sort_unstable_by(|a, b| b.cmp(a));
        for pos in gone_sorted {
            alive.remove(pos);
        }
    }
}

/// Scores every column of `x` for `selector`; higher is better.
pub fn selector_scores(
    x: ArrayView2<f64>,
    y: &[f64],
    task: Task,
    selector: Selector,
    hyper: &Hyper,
    n: usize,
    seed: u64,
) -> Vec<f64> {
    let d = x.ncols();
    let cols: Vec<Vec<f64>> = x.columns().into_iter().map(|c| c.to_vec()).collect();
    let constant: Vec<bool> = x.columns().into_iter().map(is_constant).collect();
    let z: Array2<f64> = Standardizer::fit(x).transform(x);
    let ys = match task {
        Task::Classification => y.to_vec(),
        Task::Regression => standardized_target(y),
    };
    let tree = TreeParams { max_depth: hyper.max_depth, min_leaf: hyper.min_leaf, max_features: None };
    match selector {
        Selector::Pearson => cols.iter().map(|c| pearson(c, y).abs()).collect(),
        Selector::Chi2 => cols.iter().map(|c| chi2_score(&bin10(c), y)).collect(),
        Selector::AnovaF => cols.iter().map(|c| f_regression(c, y)).collect(),
        Selector::RfeSvm => {
            let keep: Vec<usize> = (0..d).filter(|&j| !constant[j]).collect();
            rfe_scores(z.view(), &ys, task, n, &keep)
        }
        Selector::L1Logistic => {
            fit_l1_logistic(z.view(), &ys, hyper.lr_lambda, L1_ITERS, L1_STEP).weights.iter().map(|w| w.abs()).collect()
        }
        Selector::Lasso => fit_lasso(z.view(), &ys, hyper.lasso_lambda, 1000, 1e-8).weights.iter().map(|w| w.abs()).collect(),
        Selector::Ridge => fit_ridge(z.view(), &ys, hyper.ridge_lambda).weights.iter().map(|w| w.abs()).collect(),
        Selector::RandomForest => {
            let params = TreeParams { max_features: Some(forest_features(d, task)), ..tree };
            Forest::fit(z.view(), &ys, hyper.n_trees, params, seed).1
        }
        Selector::GradientBoosting => {
            let loss = match task {
                Task::Classification => BoostLoss::Logistic,
                Task::Regression => BoostLoss::Squared,
            };
            let params = TreeParams { max_depth: hyper.gb_depth, ..tree };
            Boosted::fit(z.view(), &ys, loss, hyper.gb_rounds, hyper.shrinkage, params, seed).importance
        }
    }
}

/// Top-`n` features of `x` according to `selector`.
pub fn run_selector(
    x: &FeatureMatrix,
    y: &[f64],
    task: Task,
    selector: Selector,
    hyper: &Hyper,
    n: usize,
    seed: u64,
) -> Result<SelectorResult, ModelError> {
    if !selector.supports(task) {
        return Err(ModelError::TaskMismatch(format!("selector {} is not used for {task}", selector.name())));
    }
    if x.n_rows() < 2 {
        return Err(ModelError::Empty("selection needs at least two rows".into()));
    }
    if y.len() != x.n_rows() {
        return Err(ModelError::Shape(format!("{} rows but {} targets", x.n_rows(), y.len())));
    }
    crate::data::ensure_finite_targets(y)?;
    if task == Task::Classification {
        check_binary(y)?;
    }
    let constant: Vec<bool> = x.data.columns().into_iter().map(is_constant).collect();
    let scores = selector_scores(x.data.view(), y, task, selector, hyper, n, seed);
    let (ranked_features, scores) = top_n(&x.schema, &scores, &constant, n);
    Ok(SelectorResult { selector: selector.name().to_string(), task, ranked_features, scores })
}

/// Runs the whole panel for `task` in parallel; selector `i` uses `derive_seed(seed, i)`.
pub fn run_panel(
    x: &FeatureMatrix,
    y: &[f64],
    task: Task,
    hyper: &Hyper,
    n: usize,
    seed: u64,
) -> Result<Vec<SelectorResult>, ModelError> {
    Selector::panel(task)
        .into_par_iter()
        .enumerate()
        .map(|(i, s)| run_selector(x, y, task, s, hyper, n, derive_seed(seed, i as u64)))
        .collect()
}

/// Membership vote: a feature is selected when at least half the panel lists it.
pub fn vote(results: &[SelectorResult]) -> Result<VotingResult, ModelError> {
    if results.len() != VOTE_PANEL {
        return Err(ModelError::SelectorCount(results.len()));
    }
    if results.iter().any(|r| r.task != results[0].task) {
        return Err(ModelError::TaskMismatch("selector results mix tasks".into()));
    }
    let quorum = results.len().div_ceil(2);
    let mut votes: BTreeMap<String, usize> = BTreeMap::new();
    for r in results {
        let mut seen = std::collections::BTreeSet::new();
        for f in &r.ranked_features {
            if seen.insert(f) {
                *votes.entry(f.clone()).or_default() += 1;
            }
        }
    }
    let mut selected: Vec<(&String, usize)> = votes.iter().filter(|(_, &c)| c >= quorum).map(|(f, &c)| (f, c)).collect();
    selected.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let selected = selected.into_iter().map(|(f, _)| f.clone()).collect();
    Ok(VotingResult { votes, selected, quorum })
}
