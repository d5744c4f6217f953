//! Run configuration, loaded from TOML.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use apppop_analysis::smells::SmellConfig;
use apppop_model::select::FeatureSet;
use apppop_model::{Family, Hyper, Task};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::features::Vocab;
use crate::ingest::FilterConfig;
use crate::labeling::LabelConfig;
use crate::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Rating,
    Dpy,
    /// `ln(1 + DownloadsPerYear)`; classification labels equal those of `Dpy`.
    LogDpy,
}

impl Target {
    pub const ALL: [Target; 3] = [Target::Rating, Target::Dpy, Target::LogDpy];

    pub fn name(self) -> &'static str {
        match self {
            Target::Rating => "rating",
            Target::Dpy => "dpy",
            Target::LogDpy => "log_dpy",
        }
    }
}

impl std::fmt::Display for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Target {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Target::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| format!("unknown target `{s}` (expected rating, dpy or log_dpy)"))
    }
}

pub fn parse_task(s: &str) -> Result<Task, String> {
    match s {
        "classification" => Ok(Task::Classification),
        "regression" => Ok(Task::Regression),
        _ => Err(format!("unknown task `{s}` (expected classification or regression)")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub feature_sets: Vec<FeatureSet>,
    pub top_n: usize,
    /// Re-run the voting panel inside every LOOCV fold instead of once on the whole corpus.
    pub per_fold: bool,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self { feature_sets: FeatureSet::ALL.to_vec(), top_n: apppop_model::select::DEFAULT_TOP_N, per_fold: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub tasks: Vec<Task>,
    pub targets: Vec<Target>,
    pub smote: bool,
    pub smote_k: usize,
    /// Tukey-fence trimming of regression targets.
    pub trim_outliers: bool,
    pub iqr_k: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            tasks: vec![Task::Classification, Task::Regression],
            targets: vec![Target::Rating, Target::Dpy],
            smote: true,
            smote_k: 5,
            trim_outliers: false,
            iqr_k: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelsConfig {
    pub classification: Vec<String>,
    pub regression: Vec<String>,
}

impl Default for ModelsConfig {
    fn default() -> Self {
        let names = |fs: &[&str]| fs.iter().map(|s| s.to_string()).collect();
        Self {
            classification: names(&["LR", "DT", "RF", "GB", "MLP"]),
            regression: names(&["Lasso", "Ridge", "DT", "RF", "GB", "MLP"]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
    pub filters: FilterConfig,
    pub smells: SmellConfig,
    pub vocab: Vocab,
    pub labels: LabelConfig,
    pub selection: SelectionConfig,
    pub evaluation: EvaluationConfig,
    pub models: ModelsConfig,
    pub hyper: Hyper,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            corpus: None,
            out: None,
            seed: 42,
            jobs: 0,
            filters: FilterConfig::default(),
            smells: SmellConfig::default(),
            vocab: Vocab::default(),
            labels: LabelConfig::default(),
            selection: SelectionConfig::default(),
            evaluation: EvaluationConfig::default(),
            models: ModelsConfig::default(),
            hyper: Hyper::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CoreError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CoreError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CoreError::Config(m) => CoreError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises to TOML")
    }

    pub fn families(&self, task: Task) -> Result<Vec<Family>> {
        let names = match task {
            Task::Classification => &self.models.classification,
            Task::Regression => &self.models.regression,
        };
        names
            .iter()
            .map(|n| {
                let f = Family::from_str(n).map_err(CoreError::Config)?;
                if !f.supports(task) {
                    return Err(CoreError::Config(format!("model {f} does not support {task}")));
                }
                Ok(f)
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CoreError::Config(m));
        let f = &self.filters;
        if !(0.0..=1.0).contains(&f.java_fraction_min) {
            return bad(format!("filters.java_fraction_min {} outside [0, 1]", f.java_fraction_min));
        }
        if !f.min_age_years.is_finite() || f.min_age_years < 0.0 {
            return bad("filters.min_age_years must be finite and >= 0".into());
        }
        let invalid = self.smells.invalid_thresholds();
        if !invalid.is_empty() {
            return bad(format!("invalid smell thresholds: {}", invalid.join(", ")));
        }
        self.vocab.validate().map_err(CoreError::Config)?;
        if self.selection.top_n == 0 {
            return bad("selection.top_n must be >= 1".into());
        }
        if self.selection.feature_sets.is_empty() || self.evaluation.tasks.is_empty() || self.evaluation.targets.is_empty() {
            return bad("feature_sets, tasks and targets must be non-empty".into());
        }
        if self.evaluation.smote_k == 0 {
            return bad("evaluation.smote_k must be >= 1".into());
        }
        if !self.evaluation.iqr_k.is_finite() || self.evaluation.iqr_k < 0.0 {
            return bad("evaluation.iqr_k must be finite and >= 0".into());
        }
        for task in [Task::Classification, Task::Regression] {
            self.families(task)?;
        }
        self.hyper.validate().map_err(|e| CoreError::Config(e.to_string()))?;
        Ok(())
    }

    /// SHA-256 of the settings that shape results; paths and thread count are left out.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.corpus = None;
        c.out = None;
        c.jobs = 0;
        let json = serde_json::to_vec(&c).expect("config serialises");
        hex::encode(Sha256::digest(json))
    }

    pub fn short_hash(&self) -> String {
        self.hash()[..16].to_string()
    }
}
