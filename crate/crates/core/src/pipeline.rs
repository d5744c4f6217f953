//! Pipeline stages. Each reads its declared inputs from the output directory
//! and writes its declared outputs there.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use apppop_model::eval::{loocv, loocv_with_selection, trim_outliers, EvalOptions, EvalReport, Metrics, TrimReport};
use apppop_model::select::{handpicked, run_panel, size_only, vote, FeatureSet, SelectorResult};
use apppop_model::smote::smote;
use apppop_model::{derive_seed, Family, FeatureMatrix, ModelError, ModelSpec, Task, TrainedModel};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::artifacts::{self, Layout};
use crate::config::{RunConfig, Target};
use crate::extract::{analysis_hash, analyze_app, content_hash, AppAnalysis};
use crate::features::{aggregate_app, normal_class_filter, schema, to_matrix, PERCENTILE_METHOD};
use crate::ingest::{filter_corpus, load_corpus, AppMeta, AppSnapshot, Skip};
use crate::labeling::{label_apps, LabelRow, LabelThresholds};
use crate::{CoreError, Result};

/// Seed for a named sub-task, independent of the order tasks run in.
pub fn seed_for(base: u64, label: &str) -> u64 {
    let d = Sha256::digest(label.as_bytes());
    derive_seed(base, u64::from_le_bytes(d[..8].try_into().expect("8 bytes")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppDump {
    pub config_hash: String,
    pub analysis: AppAnalysis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusApp {
    pub meta: AppMeta,
    pub java_fraction: f64,
}

/// Metadata of the apps that made it into `features.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusFile {
    pub config_hash: String,
    pub apps: Vec<CorpusApp>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractSummary {
    pub apps: usize,
    pub features: usize,
    pub reused: usize,
    pub analysed: usize,
    pub skipped: Vec<Skip>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdsFile {
    pub config_hash: String,
    pub thresholds: LabelThresholds,
    pub excluded: Vec<Skip>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionEntry {
    pub feature_set: FeatureSet,
    pub target: Target,
    pub task: Task,
    pub features: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub votes: Option<BTreeMap<String, usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quorum: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rankings: Vec<SelectorResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionFile {
    pub config_hash: String,
    pub top_n: usize,
    pub entries: Vec<SelectionEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub id: String,
    pub feature_set: FeatureSet,
    pub target: Target,
    pub task: Task,
    pub family: Family,
    pub features: Vec<String>,
    /// Relative to the models directory.
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelIndex {
    pub config_hash: String,
    pub entries: Vec<ModelEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub config_hash: String,
    pub model: TrainedModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub id: String,
    pub target: Target,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trimmed: Option<TrimReport>,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub config_hash: String,
    pub results: Vec<ReportEntry>,
}

/// One line of the summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub feature_set: String,
    pub target: String,
    pub task: String,
    pub n: usize,
    pub n_features: usize,
    pub precision_popular: Option<f64>,
    pub recall_popular: Option<f64>,
    pub f1_popular: Option<f64>,
    pub precision_unpopular: Option<f64>,
    pub recall_unpopular: Option<f64>,
    pub f1_unpopular: Option<f64>,
    pub auc: Option<f64>,
    pub mcc: Option<f64>,
    pub rmse: Option<f64>,
    pub mae: Option<f64>,
    pub r2: Option<f64>,
}

/// Feature matrix joined with one target.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: FeatureMatrix,
    pub y: Vec<f64>,
    pub trimmed: Option<TrimReport>,
}

pub struct Pipeline {
    pub cfg: RunConfig,
    pub layout: Layout,
    hash: String,
}

impl Pipeline {
    pub fn new(cfg: RunConfig, out: impl Into<PathBuf>) -> Result<Self> {
        cfg.validate()?;
        let hash = cfg.hash();
        Ok(Self { cfg, layout: Layout::new(out), hash })
    }

    pub fn config_hash(&self) -> &str {
        &self.hash
    }

    fn check_stamp(&self, artifact: &Path, found: &str) {
        if found != self.hash {
            log::warn!("{} was produced under config {found}, current config is {}", artifact.display(), self.hash);
        }
    }

    pub fn extract(&self, corpus: &Path) -> Result<ExtractSummary> {
        let loaded = load_corpus(corpus)?;
        let (filtered, excluded) = filter_corpus(&loaded, &self.cfg.filters);
        let mut skipped: Vec<Skip> = loaded.skipped.iter().cloned().chain(excluded).collect();
        let ahash = analysis_hash(&self.cfg.smells);

        let results: Vec<(&AppSnapshot, Result<(AppAnalysis, bool)>)> = filtered
            .apps
            .par_iter()
            .map(|app| (app, self.analyse_cached(app, &ahash)))
            .collect();

        let vocab = &self.cfg.vocab;
        let mut rows = Vec::new();
        let mut kept = Vec::new();
        let (mut reused, mut analysed) = (0, 0);
        for (app, r) in results {
            let (a, was_cached) = match r {
                Ok(x) => x,
                Err(e @ (CoreError::Data(_) | CoreError::Io { .. })) => {
                    log::warn!("{}: {e}", app.id());
                    skipped.push(Skip { package_name: app.id().to_string(), reason: e.to_string() });
                    continue;
                }
                Err(e) => return Err(e),
            };
            if was_cached {
                reused += 1;
            } else {
                analysed += 1;
            }
            if let Err(reason) = normal_class_filter(&a.class_rows, self.cfg.filters.min_normal_classes) {
                skipped.push(Skip { package_name: app.id().to_string(), reason });
                continue;
            }
            rows.push(aggregate_app(&a, &app.meta, vocab)?);
            kept.push(CorpusApp { meta: app.meta.clone(), java_fraction: app.java_fraction });
        }
        let mut order: Vec<usize> = (0..rows.len()).collect();
        order.sort_by(|&a, &b| rows[a].app_id.cmp(&rows[b].app_id));
        let rows: Vec<_> = order.iter().map(|&i| rows[i].clone()).collect();
        let kept: Vec<_> = order.iter().map(|&i| kept[i].clone()).collect();
        skipped.sort();
        if rows.is_empty() {
            log::warn!("no app survived extraction; features.csv will be empty");
        }
        let m = to_matrix(schema(vocab), &rows, &self.hash)?;
        artifacts::write_features(&self.layout.features_csv(), &m, &self.hash)?;
        artifacts::write_skips(&self.layout.skips_csv(), &skipped, &self.hash)?;
        artifacts::write_json(&self.layout.corpus_json(), &CorpusFile { config_hash: self.hash.clone(), apps: kept })?;
        Ok(ExtractSummary { apps: m.n_rows(), features: m.n_features(), reused, analysed, skipped })
    }

    /// Reuses `apps/<pkg>.json` when the app's files and the analysis settings are unchanged.
    fn analyse_cached(&self, app: &AppSnapshot, ahash: &str) -> Result<(AppAnalysis, bool)> {
        let path = self.layout.app_dump(app.id());
        if path.is_file() {
            if let Ok(dump) = artifacts::read_json::<AppDump>(&path) {
                let a = dump.analysis;
                if a.analysis_hash == ahash && a.content_hash == content_hash(&app.source_root)? {
                    if dump.config_hash != self.hash {
                        let dump = AppDump { config_hash: self.hash.clone(), analysis: a.clone() };
                        artifacts::write_json(&path, &dump)?;
                    }
                    log::debug!("{}: unchanged, reusing analysis", app.id());
                    return Ok((a, true));
                }
            }
        }
        let a = analyze_app(app, &self.cfg.smells)?;
        artifacts::write_json(&path, &AppDump { config_hash: self.hash.clone(), analysis: a.clone() })?;
        Ok((a, false))
    }

    pub fn label(&self) -> Result<Vec<LabelRow>> {
        let fpath = self.layout.require(self.layout.features_csv(), "extract")?;
        let cpath = self.layout.require(self.layout.corpus_json(), "extract")?;
        let m = artifacts::read_features(&fpath)?;
        let corpus: CorpusFile = artifacts::read_json(&cpath)?;
        self.check_stamp(&cpath, &corpus.config_hash);
        let by_id: BTreeMap<&str, &AppMeta> = corpus.apps.iter().map(|a| (a.meta.package_name.as_str(), &a.meta)).collect();
        let metas = m
            .app_ids
            .iter()
            .map(|id| {
                by_id.get(id.as_str()).copied().ok_or_else(|| {
                    CoreError::Data(format!("{id} is in features.csv but not in corpus.json; rerun `apppop extract`"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let set = label_apps(metas, &self.cfg.labels)?;
        artifacts::write_labels(&self.layout.labels_csv(), &set.rows, &self.hash)?;
        artifacts::write_json(
            &self.layout.thresholds_json(),
            &ThresholdsFile { config_hash: self.hash.clone(), thresholds: set.thresholds, excluded: set.excluded },
        )?;
        Ok(set.rows)
    }

    /// Features joined with labels, in feature-file order.
    pub fn dataset(&self, target: Target, task: Task) -> Result<Dataset> {
        let fpath = self.layout.require(self.layout.features_csv(), "extract")?;
        let lpath = self.layout.require(self.layout.labels_csv(), "label")?;
        let m = artifacts::read_features(&fpath)?;
        self.check_stamp(&fpath, &m.provenance);
        let labels: Vec<LabelRow> = artifacts::read_rows(&lpath)?;
        let by_id: BTreeMap<&str, &LabelRow> = labels.iter().map(|l| (l.app_id.as_str(), l)).collect();
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for (i, id) in m.app_ids.iter().enumerate() {
            let Some(l) = by_id.get(id.as_str()) else { continue };
            rows.push(i);
            y.push(target_value(l, target, task));
        }
        let mut x = m.rows(&rows);
        let mut trimmed = None;
        if task == Task::Regression && self.cfg.evaluation.trim_outliers && !y.is_empty() {
            let t = trim_outliers(&x.app_ids, &y, self.cfg.evaluation.iqr_k)?;
            x = x.rows(&t.kept);
            y = t.kept.iter().map(|&i| y[i]).collect();
            trimmed = Some(t);
        }
        Ok(Dataset { x, y, trimmed })
    }

    fn combos(&self) -> Vec<(FeatureSet, Target, Task)> {
        let mut v = Vec::new();
        for &fs in &self.cfg.selection.feature_sets {
            for &target in &self.cfg.evaluation.targets {
                for &task in &self.cfg.evaluation.tasks {
                    v.push((fs, target, task));
                }
            }
        }
        v
    }

    /// Voting panel on `x`; when nothing reaches the quorum the best-voted features are kept.
    pub fn vote_features(&self, x: &FeatureMatrix, y: &[f64], task: Task, seed: u64) -> Result<SelectionEntryParts> {
        let rankings = run_panel(x, y, task, &self.cfg.hyper, self.cfg.selection.top_n, seed)?;
        let v = vote(&rankings)?;
        let mut features = v.selected.clone();
        if features.is_empty() {
            let best = v.votes.values().copied().max().unwrap_or(0);
            features = v.votes.iter().filter(|(_, &c)| c == best && c > 0).map(|(f, _)| f.clone()).collect();
            log::warn!("no feature reached {} votes; keeping the {} feature(s) with {best}", v.quorum, features.len());
        }
        Ok(SelectionEntryParts { features, votes: v.votes, quorum: v.quorum, rankings })
    }

    pub fn select(&self) -> Result<SelectionFile> {
        let mut entries = Vec::new();
        for (fs, target, task) in self.combos() {
            let d = self.dataset(target, task)?;
            let mut e = SelectionEntry { feature_set: fs, target, task, features: vec![], votes: None, quorum: None, rankings: vec![] };
            match fs {
                FeatureSet::Size => e.features = size_only(&d.x.schema)?,
                FeatureSet::Handpicked => e.features = handpicked(&d.x.schema)?,
                FeatureSet::Voting => {
                    let seed = seed_for(self.cfg.seed, &format!("select/{target}/{task}"));
                    let p = self.vote_features(&d.x, &d.y, task, seed).map_err(|e| context(&format!("voting {target}/{task}"), e))?;
                    e.features = p.features;
                    e.votes = Some(p.votes);
                    e.quorum = Some(p.quorum);
                    e.rankings = p.rankings;
                }
            }
            entries.push(e);
        }
        let file = SelectionFile { config_hash: self.hash.clone(), top_n: self.cfg.selection.top_n, entries };
        artifacts::write_json(&self.layout.selection_json(), &file)?;
        Ok(file)
    }

    fn spec(&self, family: Family, task: Task, id: &str) -> ModelSpec {
        ModelSpec { family, task, hyper: self.cfg.hyper.clone(), seed: seed_for(self.cfg.seed, id) }
    }

    pub fn train(&self) -> Result<ModelIndex> {
        let spath = self.layout.require(self.layout.selection_json(), "select")?;
        let sel: SelectionFile = artifacts::read_json(&spath)?;
        self.check_stamp(&spath, &sel.config_hash);
        let mut jobs = Vec::new();
        for e in &sel.entries {
            for family in self.cfg.families(e.task)? {
                let id = format!("{}__{}__{}__{}", e.feature_set, e.target, e.task, family.short());
                jobs.push((id, e, family));
            }
        }
        let mut entries = Vec::new();
        for (id, e, family) in jobs {
            let d = self.dataset(e.target, e.task)?;
            let x = d.x.select(&e.features)?;
            let spec = self.spec(family, e.task, &id);
            let model = if e.task == Task::Classification && self.cfg.evaluation.smote {
                let s = smote(x.data.view(), &d.y, self.cfg.evaluation.smote_k, derive_seed(spec.seed, 3))?;
                TrainedModel::fit_array(&spec, &x.schema, s.x.view(), &s.y)
            } else {
                TrainedModel::fit(&spec, &x, &d.y)
            }
            .map_err(|err| context(&id, err))?;
            let path = format!("{id}.json");
            artifacts::write_json(
                &self.layout.models_dir().join(&path),
                &ModelFile { config_hash: self.hash.clone(), model },
            )?;
            entries.push(ModelEntry {
                id,
                feature_set: e.feature_set,
                target: e.target,
                task: e.task,
                family,
                features: e.features.clone(),
                path,
            });
        }
        let index = ModelIndex { config_hash: self.hash.clone(), entries };
        artifacts::write_json(&self.layout.models_index(), &index)?;
        Ok(index)
    }

    pub fn evaluate(&self) -> Result<ReportFile> {
        let ipath = self.layout.require(self.layout.models_index(), "train")?;
        let index: ModelIndex = artifacts::read_json(&ipath)?;
        self.check_stamp(&ipath, &index.config_hash);
        let thresholds: Option<ThresholdsFile> = artifacts::read_json(&self.layout.thresholds_json()).ok();
        let opts = EvalOptions { smote: self.cfg.evaluation.smote, smote_k: self.cfg.evaluation.smote_k };
        let mut results = Vec::new();
        for e in &index.entries {
            let d = self.dataset(e.target, e.task)?;
            let spec = self.spec(e.family, e.task, &e.id);
            let per_fold = e.feature_set == FeatureSet::Voting && self.cfg.selection.per_fold;
            let mut report = if per_fold {
                let task = e.task;
                let sel = move |x: &FeatureMatrix, y: &[f64], seed: u64| -> Result<Vec<String>, ModelError> {
                    match self.vote_features(x, y, task, seed) {
                        Ok(p) => Ok(p.features),
                        Err(CoreError::Model(m)) => Err(m),
                        Err(other) => Err(ModelError::Empty(other.to_string())),
                    }
                };
                loocv_with_selection(&d.x, &d.y, &spec, &opts, &sel)
            } else {
                loocv(&d.x.select(&e.features)?, &d.y, &spec, &opts)
            }
            .map_err(|err| context(&e.id, err))?;
            report.leakage_audit(&d.x.app_ids).map_err(|m| CoreError::Internal(format!("{}: {m}", e.id)))?;
            report.feature_set = e.feature_set.to_string();
            let p = &mut report.provenance;
            p.insert("config_hash".into(), self.hash.clone());
            p.insert("target".into(), e.target.to_string());
            p.insert("percentiles".into(), PERCENTILE_METHOD.into());
            p.insert("selection".into(), if per_fold { "per_fold" } else { "corpus" }.into());
            if let Some(t) = &thresholds {
                let th = match e.target {
                    Target::Rating => &t.thresholds.rating,
                    Target::Dpy | Target::LogDpy => &t.thresholds.dpy,
                };
                p.insert("label_threshold".into(), th.threshold.to_string());
            }
            results.push(ReportEntry { id: e.id.clone(), target: e.target, trimmed: d.trimmed, report });
        }
        let file = ReportFile { config_hash: self.hash.clone(), results };
        artifacts::write_json(&self.layout.report_json(), &file)?;
        Ok(file)
    }

    pub fn report(&self) -> Result<Vec<ReportRow>> {
        let rpath = self.layout.require(self.layout.report_json(), "evaluate")?;
        let file: ReportFile = artifacts::read_json(&rpath)?;
        self.check_stamp(&rpath, &file.config_hash);
        let rows: Vec<ReportRow> = file.results.iter().map(report_row).collect();
        artifacts::write_rows(&self.layout.report_csv(), &rows, &self.hash, &REPORT_COLUMNS)?;
        artifacts::write_atomic(&self.layout.report_txt(), render_table(&rows, &self.hash).as_bytes())?;
        Ok(rows)
    }

    pub fn run(&self, corpus: &Path) -> Result<Vec<ReportRow>> {
        let s = self.extract(corpus)?;
        log::info!("extract: {} apps x {} features, {} skipped", s.apps, s.features, s.skipped.len());
        let l = self.label()?;
        log::info!("label: {} apps labelled", l.len());
        let sel = self.select()?;
        log::info!("select: {} feature sets", sel.entries.len());
        let idx = self.train()?;
        log::info!("train: {} models", idx.entries.len());
        let r = self.evaluate()?;
        log::info!("evaluate: {} LOOCV runs", r.results.len());
        self.report()
    }
}

pub struct SelectionEntryParts {
    pub features: Vec<String>,
    pub votes: BTreeMap<String, usize>,
    pub quorum: usize,
    pub rankings: Vec<SelectorResult>,
}

fn context(what: &str, e: impl Into<CoreError>) -> CoreError {
    match e.into() {
        CoreError::Model(m @ (ModelError::InvalidHyper(_) | ModelError::Unsupported { .. })) => CoreError::Model(m),
        CoreError::Model(m) => CoreError::Data(format!("{what}: {m}")),
        CoreError::Data(m) => CoreError::Data(format!("{what}: {m}")),
        other => other,
    }
}

pub fn target_value(l: &LabelRow, target: Target, task: Task) -> f64 {
    match (task, target) {
        (Task::Classification, Target::Rating) => f64::from(u8::from(l.popular_by_rating)),
        (Task::Classification, Target::Dpy | Target::LogDpy) => f64::from(u8::from(l.popular_by_dpy)),
        (Task::Regression, Target::Rating) => l.avg_rating,
        (Task::Regression, Target::Dpy) => l.downloads_per_year,
        (Task::Regression, Target::LogDpy) => l.downloads_per_year.ln_1p(),
    }
}

pub const REPORT_COLUMNS: [&str; 17] = [
    "model",
    "feature_set",
    "target",
    "task",
    "n",
    "n_features",
    "precision_popular",
    "recall_popular",
    "f1_popular",
    "precision_unpopular",
    "recall_unpopular",
    "f1_unpopular",
    "auc",
    "mcc",
    "rmse",
    "mae",
    "r2",
];

pub fn report_row(e: &ReportEntry) -> ReportRow {
    let r = &e.report;
    let mut row = ReportRow {
        model: r.spec.family.short().to_string(),
        feature_set: r.feature_set.clone(),
        target: e.target.to_string(),
        task: r.task.to_string(),
        n: r.predictions.len(),
        n_features: r.features.len(),
        precision_popular: None,
        recall_popular: None,
        f1_popular: None,
        precision_unpopular: None,
        recall_unpopular: None,
        f1_unpopular: None,
        auc: None,
        mcc: None,
        rmse: None,
        mae: None,
        r2: None,
    };
    match &r.metrics {
        Metrics::Classification(c) => {
            if let Some(p) = c.per_class.get("popular") {
                row.precision_popular = Some(p.precision);
                row.recall_popular = Some(p.recall);
                row.f1_popular = Some(p.f1);
            }
            if let Some(u) = c.per_class.get("unpopular") {
                row.precision_unpopular = Some(u.precision);
                row.recall_unpopular = Some(u.recall);
                row.f1_unpopular = Some(u.f1);
            }
            row.auc = c.auc;
            row.mcc = Some(c.mcc);
        }
        Metrics::Regression(m) => {
            row.rmse = Some(m.rmse);
            row.mae = Some(m.mae);
            row.r2 = Some(m.r2);
        }
    }
    row
}

/// Plain-text table, one row per model x feature set x target x task.
pub fn render_table(rows: &[ReportRow], hash: &str) -> String {
    let cell = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
    let mut table: Vec<Vec<String>> = vec![[
        "model", "features", "target", "task", "n", "d", "F1(pop)", "F1(unpop)", "AUC", "MCC", "RMSE", "MAE", "R2",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()];
    for r in rows {
        table.push(vec![
            r.model.clone(),
            r.feature_set.clone(),
            r.target.clone(),
            r.task.clone(),
            r.n.to_string(),
            r.n_features.to_string(),
            cell(r.f1_popular),
            cell(r.f1_unpopular),
            cell(r.auc),
            cell(r.mcc),
            cell(r.rmse),
            cell(r.mae),
            cell(r.r2),
        ]);
    }
    let widths: Vec<usize> = (0..table[0].len()).map(|j| table.iter().map(|r| r[j].len()).max().unwrap_or(0)).collect();
    let mut out = format!("config_hash {hash}\n");
    for (i, r) in table.iter().enumerate() {
        let line: Vec<String> = r.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
            out.push('\n');
        }
    }
    out
}
