//! Model families, hyperparameters and the fit/predict front end.

pub mod ensemble;
pub mod linear;
pub mod mlp;
pub mod tree;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{ensure_finite, ensure_finite_targets, FeatureMatrix, Standardizer, Task};
use crate::ModelError;
use ensemble::{BoostLoss, Boosted, Forest};
use linear::{fit_lasso, fit_logistic, fit_ridge, sigmoid, LinearModel};
use mlp::{Mlp, MlpParams, Output};
use tree::{Tree, TreeParams};

pub const MODEL_FORMAT_VERSION: u32 = 1;

const LASSO_SWEEPS: usize = 1000;
const LASSO_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    LogisticRegression,
    DecisionTree,
    RandomForest,
    GradientBoosting,
    Mlp,
    Lasso,
    Ridge,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::LogisticRegression,
        Family::DecisionTree,
        Family::RandomForest,
        Family::GradientBoosting,
        Family::Mlp,
        Family::Lasso,
        Family::Ridge,
    ];

    pub fn short(self) -> &'static str {
        match self {
            Family::LogisticRegression => "LR",
            Family::DecisionTree => "DT",
            Family::RandomForest => "RF",
            Family::GradientBoosting => "GB",
            Family::Mlp => "MLP",
            Family::Lasso => "Lasso",
            Family::Ridge => "Ridge",
        }
    }

    pub fn supports(self, task: Task) -> bool {
        match self {
            Family::LogisticRegression => task == Task::Classification,
            Family::Lasso | Family::Ridge => task == Task::Regression,
            _ => true,
        }
    }

    /// The families the pipeline trains for `task`.
    pub fn for_task(task: Task) -> Vec<Family> {
        Family::ALL.into_iter().filter(|f| f.supports(task)).collect()
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.short())
    }
}

impl std::str::FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "lr" | "logistic_regression" => Family::LogisticRegression,
            "dt" | "decision_tree" => Family::DecisionTree,
            "rf" | "random_forest" => Family::RandomForest,
            "gb" | "gradient_boosting" => Family::GradientBoosting,
            "mlp" => Family::Mlp,
            "lasso" => Family::Lasso,
            "ridge" => Family::Ridge,
            _ => return Err(format!("unknown model family {s:?}")),
        })
    }
}

/// Every tunable knob; each family reads the fields it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyper {
    pub lr_lambda: f64,
    pub lr_epochs: usize,
    pub lr_step: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub n_trees: usize,
    pub gb_rounds: usize,
    pub gb_depth: usize,
    pub shrinkage: f64,
    pub hidden: usize,
    pub mlp_step: f64,
    pub mlp_epochs: usize,
    pub batch: usize,
    pub lasso_lambda: f64,
    pub ridge_lambda: f64,
    /// Classification cut-off on the score.
    pub threshold: f64,
}

impl Default for Hyper {
    fn default() -> Self {
        Self {
            lr_lambda: 1e-2,
            lr_epochs: 500,
            lr_step: 0.1,
            max_depth: 8,
            min_leaf: 2,
            n_trees: 200,
            gb_rounds: 200,
            gb_depth: 3,
            shrinkage: 0.1,
            hidden: 64,
            mlp_step: 1e-3,
            mlp_epochs: 200,
            batch: 16,
            lasso_lambda: 1e-2,
            ridge_lambda: 1.0,
            threshold: 0.5,
        }
    }
}

impl Hyper {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidHyper(m.to_string()));
        let rate = |v: f64| v.is_finite() && v > 0.0;
        let penalty = |v: f64| v.is_finite() && v >= 0.0;
        if !penalty(self.lr_lambda) || !penalty(self.lasso_lambda) || !penalty(self.ridge_lambda) {
            return bad("penalties must be finite and >= 0");
        }
        if !rate(self.lr_step) || !rate(self.mlp_step) || !rate(self.shrinkage) {
            return bad("step sizes and shrinkage must be > 0");
        }
        if self.max_depth < 1 || self.gb_depth < 1 {
            return bad("tree depths must be >= 1");
        }
        if self.min_leaf < 1 || self.n_trees < 1 || self.gb_rounds < 1 {
            return bad("min_leaf, n_trees and gb_rounds must be >= 1");
        }
        if self.hidden < 1 || self.batch < 1 || self.mlp_epochs < 1 || self.lr_epochs < 1 {
            return bad("hidden, batch and epoch counts must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad("threshold must lie in [0, 1]");
        }
        Ok(())
    }

    pub fn tree_params(&self) -> TreeParams {
        TreeParams { max_depth: self.max_depth, min_leaf: self.min_leaf, max_features: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub task: Task,
    #[serde(default)]
    pub hyper: Hyper,
    #[serde(default)]
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(family: Family, task: Task) -> Self {
        Self { family, task, hyper: Hyper::default(), seed: 0 }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !self.family.supports(self.task) {
            return Err(ModelError::Unsupported { family: self.family, task: self.task });
        }
        self.hyper.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fitted {
    Linear { model: LinearModel },
    Tree { tree: Tree },
    Forest { forest: Forest },
    Boosted { boosted: Boosted },
    Mlp { mlp: Mlp },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub spec: ModelSpec,
    pub schema: Vec<String>,
    pub standardizer: Standardizer,
    pub fitted: Fitted,
}

/// Checks that classification targets are 0/1 with both classes present.
pub fn check_binary(y: &[f64]) -> Result<(), ModelError> {
    if let Some(&v) = y.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(ModelError::NotBinary(v));
    }
    let pos = y.iter().filter(|&&v| v == 1.0).count();
    if pos == 0 || pos == y.len() {
        return Err(ModelError::SingleClass);
    }
    Ok(())
}

impl TrainedModel {
    pub fn fit(spec: &ModelSpec, x: &FeatureMatrix, y: &[f64]) -> Result<TrainedModel, ModelError> {
        Self::fit_array(spec, &x.schema, x.data.view(), y)
    }

    pub fn fit_array(
        spec: &ModelSpec,
        schema: &[String],
        x: ArrayView2<f64>,
        y: &[f64],
    ) -> Result<TrainedModel, ModelError> {
        spec.validate()?;
        let (n, d) = x.dim();
        if n == 0 {
            return Err(ModelError::Empty("training matrix has no rows".into()));
        }
        if y.len() != n || schema.len() != d {
            return Err(ModelError::Shape(format!("{n}x{d} matrix, {} targets, {} names", y.len(), schema.len())));
        }
        ensure_finite(x)?;
        ensure_finite_targets(y)?;
        if spec.task == Task::Classification {
            check_binary(y)?;
        }
        let standardizer = Standardizer::fit(x);
        let z = standardizer.transform(x);
        let fitted = fit_family(spec, z, y);
        Ok(TrainedModel {
            format_version: MODEL_FORMAT_VERSION,
            spec: spec.clone(),
            schema: schema.to_vec(),
            standardizer,
            fitted,
        })
    }

    /// Score for one raw (unstandardised) feature vector; no schema check.
    pub fn score_row(&self, x: ArrayView1<f64>) -> f64 {
        let z = self.standardizer.transform_row(x);
        let z = z.view();
        match &self.fitted {
            Fitted::Linear { model } => match self.spec.task {
                Task::Classification => sigmoid(model.decision(z)),
                Task::Regression => model.decision(z),
            },
            Fitted::Tree { tree } => tree.predict(z),
            Fitted::Forest { forest } => forest.predict(z),
            Fitted::Boosted { boosted } => boosted.predict(z),
            Fitted::Mlp { mlp } => mlp.predict(z),
        }
    }

    fn check_schema(&self, schema: &[String]) -> Result<(), ModelError> {
        if schema != self.schema.as_slice() {
            return Err(ModelError::SchemaMismatch { expected: self.schema.len(), found: schema.len() });
        }
        Ok(())
    }

    /// Scores for every row: probabilities for classification, values for regression.
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<f64>, ModelError> {
        self.predict_array(&x.schema, x.data.view())
    }

    pub fn predict_array(&self, schema: &[String], x: ArrayView2<f64>) -> Result<Vec<f64>, ModelError> {
        self.check_schema(schema)?;
        ensure_finite(x)?;
        Ok(x.rows().into_iter().map(|r| self.score_row(r)).collect())
    }

    /// Thresholded label (1.0 = positive) for a classification score.
    pub fn label(&self, score: f64) -> f64 {
        f64::from(score >= self.spec.hyper.threshold)
    }

    pub fn to_json(&self) -> Result<String, ModelError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<TrainedModel, ModelError> {
        let m: TrainedModel = serde_json::from_str(s)?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(ModelError::Version(m.format_version));
        }
        Ok(m)
    }
}

fn fit_family(spec: &ModelSpec, z: Array2<f64>, y: &[f64]) -> Fitted {
    let h = &spec.hyper;
    let d = z.ncols();
    let classify = spec.task == Task::Classification;
    match spec.family {
        Family::LogisticRegression => {
            Fitted::Linear { model: fit_logistic(z.view(), y, h.lr_lambda, h.lr_epochs, h.lr_step) }
        }
        Family::Lasso => Fitted::Linear { model: fit_lasso(z.view(), y, h.lasso_lambda, LASSO_SWEEPS, LASSO_TOL) },
        Family::Ridge => Fitted::Linear { model: fit_ridge(z.view(), y, h.ridge_lambda) },
        Family::DecisionTree => {
            let rows: Vec<usize> = (0..z.nrows()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let (tree, _) = Tree::fit(z.view(), y, &rows, h.tree_params(), &mut rng);
            Fitted::Tree { tree }
        }
        Family::RandomForest => {
            let params = TreeParams { max_features: Some(forest_features(d, spec.task)), ..h.tree_params() };
            let (forest, _) = Forest::fit(z.view(), y, h.n_trees, params, spec.seed);
            Fitted::Forest { forest }
        }
        Family::GradientBoosting => {
            let loss = if classify { BoostLoss::Logistic } else { BoostLoss::Squared };
            let params = TreeParams { max_depth: h.gb_depth, ..h.tree_params() };
            let fit = Boosted::fit(z.view(), y, loss, h.gb_rounds, h.shrinkage, params, spec.seed);
            Fitted::Boosted { boosted: fit.model }
        }
        Family::Mlp => {
            let output = if classify { Output::Logistic } else { Output::Linear };
            let params = MlpParams { hidden: h.hidden, step: h.mlp_step, epochs: h.mlp_epochs, batch: h.batch };
            Fitted::Mlp { mlp: Mlp::fit(z.view(), y, output, params, spec.seed) }
        }
    }
}

/// Features tried per split in a forest: sqrt(d) for classification, d/3 for regression.
pub fn forest_features(d: usize, task: Task) -> usize {
    let k = match task {
        Task::Classification => (d as f64).sqrt().round() as usize,
        Task::Regression => d / 3,
    };
    k.clamp(1, d.max(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn matrix(x: Array2<f64>) -> FeatureMatrix {
        let schema = (0..x.ncols()).map(|j| format!("f{j}")).collect();
        let ids = (0..x.nrows()).map(|i| format!("app{i}")).collect();
        FeatureMatrix::new(schema, ids, x, "").unwrap()
    }

    #[test]
    fn family_names_parse() {
        for f in Family::ALL {
            assert_eq!(f.short().parse::<Family>().unwrap(), f);
        }
        assert_eq!("random_forest".parse::<Family>().unwrap(), Family::RandomForest);
        assert!("svm".parse::<Family>().is_err());
    }

    #[test]
    fn unsupported_combinations_rejected() {
        let m = matrix(array![[0.0], [1.0]]);
        let spec = ModelSpec::new(Family::Lasso, Task::Classification);
        assert!(matches!(TrainedModel::fit(&spec, &m, &[0.0, 1.0]), Err(ModelError::Unsupported { .. })));
    }

    #[test]
    fn single_class_is_fatal() {
        let m = matrix(array![[0.0], [1.0]]);
        let spec = ModelSpec::new(Family::DecisionTree, Task::Classification);
        assert!(matches!(TrainedModel::fit(&spec, &m, &[1.0, 1.0]), Err(ModelError::SingleClass)));
    }

    #[test]
    fn nan_target_is_fatal() {
        let m = matrix(array![[0.0], [1.0]]);
        let spec = ModelSpec::new(Family::Ridge, Task::Regression);
        assert!(matches!(TrainedModel::fit(&spec, &m, &[f64::NAN, 1.0]), Err(ModelError::NonFinite(_))));
    }

    #[test]
    fn invalid_hyper_rejected() {
        let mut spec = ModelSpec::new(Family::DecisionTree, Task::Regression);
        spec.hyper.max_depth = 0;
        assert!(matches!(spec.validate(), Err(ModelError::InvalidHyper(_))));
        spec.hyper.max_depth = 3;
        spec.hyper.ridge_lambda = -1.0;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn schema_mismatch_rejected() {
        let m = matrix(array![[0.0, 1.0], [1.0, 0.0], [2.0, 2.0]]);
        let spec = ModelSpec::new(Family::Ridge, Task::Regression);
        let t = TrainedModel::fit(&spec, &m, &[1.0, 2.0, 3.0]).unwrap();
        let other = m.select(&["f1".into(), "f0".into()]).unwrap();
        assert!(matches!(t.predict(&other), Err(ModelError::SchemaMismatch { .. })));
        assert_eq!(t.predict(&m).unwrap().len(), 3);
    }

    #[test]
    fn json_round_trip_predicts_identically() {
        let x = Array2::from_shape_fn((20, 3), |(i, j)| ((i * 5 + j * 3) % 7) as f64);
        let y: Vec<f64> = (0..20).map(|i| f64::from(x[[i, 0]] > 3.0)).collect();
        let m = matrix(x);
        for family in Family::for_task(Task::Classification) {
            let mut spec = ModelSpec::new(family, Task::Classification).with_seed(9);
            spec.hyper.n_trees = 5;
            spec.hyper.gb_rounds = 5;
            spec.hyper.mlp_epochs = 5;
            let t = TrainedModel::fit(&spec, &m, &y).unwrap();
            let back = TrainedModel::from_json(&t.to_json().unwrap()).unwrap();
            assert_eq!(t.predict(&m).unwrap(), back.predict(&m).unwrap(), "{family}");
        }
    }

    #[test]
    fn constant_regression_target_tree() {
        let m = matrix(array![[0.0], [5.0], [9.0], [2.0]]);
        let spec = ModelSpec::new(Family::DecisionTree, Task::Regression);
        let t = TrainedModel::fit(&spec, &m, &[4.5; 4]).unwrap();
        let probe = matrix(array![[-100.0], [3.0], [1e6]]);
        assert!(t.predict(&probe).unwrap().iter().all(|&v| v == 4.5));
    }
}
