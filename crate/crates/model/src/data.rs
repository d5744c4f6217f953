use std::collections::BTreeSet;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classification,
    Regression,
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Task::Classification => "classification",
            Task::Regression => "regression",
        })
    }
}

/// Named numeric features, one row per app.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub schema: Vec<String>,
    pub app_ids: Vec<String>,
    pub data: Array2<f64>,
    /// Hash of the configuration that produced the matrix.
    pub provenance: String,
}

impl FeatureMatrix {
    pub fn new(
        schema: Vec<String>,
        app_ids: Vec<String>,
        data: Array2<f64>,
        provenance: impl Into<String>,
    ) -> Result<Self, ModelError> {
        if data.nrows() != app_ids.len() || data.ncols() != schema.len() {
            return Err(ModelError::Shape(format!(
                "{}x{} data for {} apps and {} features",
                data.nrows(),
                data.ncols(),
                app_ids.len(),
                schema.len()
            )));
        }
        let unique: BTreeSet<&String> = app_ids.iter().collect();
        if unique.len() != app_ids.len() {
            return Err(ModelError::Shape("duplicate app ids".into()));
        }
        let names: BTreeSet<&String> = schema.iter().collect();
        if names.len() != schema.len() {
            return Err(ModelError::Shape("duplicate feature names".into()));
        }
        ensure_finite(data.view())?;
        Ok(Self { schema, app_ids, data, provenance: provenance.into() })
    }

    pub fn n_rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.data.ncols()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|s| s == name)
    }

    /// Sub-matrix restricted to `features`, in the given order.
    pub fn select(&self, features: &[String]) -> Result<FeatureMatrix, ModelError> {
        let mut idx = Vec::with_capacity(features.len());
        let mut missing = Vec::new();
        for f in features {
            match self.column_index(f) {
                Some(i) => idx.push(i),
                None => missing.push(f.clone()),
            }
        }
        if !missing.is_empty() {
            return Err(ModelError::MissingFeatures(missing));
        }
        Ok(FeatureMatrix {
            schema: features.to_vec(),
            app_ids: self.app_ids.clone(),
            data: self.data.select(Axis(1), &idx),
            provenance: self.provenance.clone(),
        })
    }

    /// Rows in the order of `ids`.
    pub fn rows(&self, ids: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            schema: self.schema.clone(),
            app_ids: ids.iter().map(|&i| self.app_ids[i].clone()).collect(),
            data: self.data.select(Axis(0), ids),
            provenance: self.provenance.clone(),
        }
    }
}

pub fn ensure_finite(x: ArrayView2<f64>) -> Result<(), ModelError> {
    if let Some(((r, c), _)) = x.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(ModelError::NonFinite(format!("feature matrix at row {r}, column {c}")));
    }
    Ok(())
}

pub fn ensure_finite_targets(y: &[f64]) -> Result<(), ModelError> {
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite(format!("target at row {i}")));
    }
    Ok(())
}

/// Per-column z-scoring fitted on training data. Constant columns keep sd = 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: ArrayView2<f64>) -> Self {
        let n = x.nrows().max(1) as f64;
        let mut mean = Vec::with_capacity(x.ncols());
        let mut sd = Vec::with_capacity(x.ncols());
        for col in x.columns() {
            let m = col.sum() / n;
            let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
            mean.push(m);
            sd.push(if var > 1e-24 { var.sqrt() } else { 1.0 });
        }
        Self { mean, sd }
    }

    pub fn identity(d: usize) -> Self {
        Self { mean: vec![0.0; d], sd: vec![1.0; d] }
    }

    pub fn transform(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut out = x.to_owned();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            col.mapv_inplace(|v| (v - self.mean[j]) / self.sd[j]);
        }
        out
    }

    pub fn transform_row(&self, x: ArrayView1<f64>) -> Array1<f64> {
        Array1::from_iter(x.iter().enumerate().map(|(j, v)| (v - self.mean[j]) / self.sd[j]))
    }
}

/// True when every value in the column is the same.
pub fn is_constant(col: ArrayView1<f64>) -> bool {
    match col.first() {
        Some(&v0) => col.iter().all(|&v| v == v0),
        None => true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn standardizer_centres_and_scales() {
        let x = array![[1.0, 5.0], [3.0, 5.0]];
        let s = Standardizer::fit(x.view());
        let z = s.transform(x.view());
        assert_eq!(z, array![[-1.0, 0.0], [1.0, 0.0]]);
    }

    #[test]
    fn rejects_shape_and_nan() {
        let x = array![[1.0], [f64::NAN]];
        let ids = vec!["a".to_string(), "b".to_string()];
        assert!(matches!(
            FeatureMatrix::new(vec!["f".into()], ids.clone(), x, ""),
            Err(ModelError::NonFinite(_))
        ));
        assert!(FeatureMatrix::new(vec!["f".into(), "g".into()], ids, array![[1.0], [2.0]], "").is_err());
    }

    #[test]
    fn select_reports_missing() {
        let m = FeatureMatrix::new(vec!["a".into()], vec!["x".into()], array![[1.0]], "").unwrap();
        match m.select(&["a".into(), "zz".into()]) {
            Err(ModelError::MissingFeatures(v)) => assert_eq!(v, vec!["zz".to_string()]),
            other => panic!("{other:?}"),
        }
    }
}
