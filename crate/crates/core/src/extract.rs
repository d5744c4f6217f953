//! Per-app static analysis: parse, metrics, smells, activity count.

use std::path::Path;

use apppop_analysis::code_metrics::{ClassMetricsRow, CodeMetricsContext, MethodMetricsRow};
use apppop_analysis::graph::{class_graph, project, Granularity};
use apppop_analysis::java::{parse_source, ParseFailure, StructuralModel};
use apppop_analysis::loc::{count_code_lines, Language};
use apppop_analysis::smells::{detect_smells, SmellConfig, SmellReport};
use apppop_analysis::system_metrics::{system_metrics_from, SystemMetrics};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ingest::{count_activities, source_files, AppSnapshot};
use crate::{CoreError, Result};

/// Everything measured for one app; persisted as `apps/<package>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppAnalysis {
    pub package_name: String,
    /// SHA-256 over the relative paths and bytes of every file in the app directory.
    pub content_hash: String,
    /// Hash of the settings that influence analysis (smell thresholds, tool version).
    pub analysis_hash: String,
    pub java_files: usize,
    pub parse_failures: Vec<ParseFailure>,
    /// Code lines over all `.java` files.
    pub app_loc: u64,
    pub activity_count: u32,
    pub class_rows: Vec<ClassMetricsRow>,
    pub method_rows: Vec<MethodMetricsRow>,
    pub system: SystemMetrics,
    pub smells: SmellReport,
}

fn rel(root: &Path, p: &Path) -> String {
    p.strip_prefix(root).unwrap_or(p).to_string_lossy().replace('\\', "/")
}

pub fn content_hash(root: &Path) -> Result<String> {
    let mut h = Sha256::new();
    for p in source_files(root) {
        let bytes = std::fs::read(&p).map_err(|e| CoreError::io(&p, e))?;
        let name = rel(root, &p);
        h.update((name.len() as u64).to_le_bytes());
        h.update(name.as_bytes());
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}

pub fn analysis_hash(smells: &SmellConfig) -> String {
    let mut h = Sha256::new();
    h.update(env!("CARGO_PKG_VERSION").as_bytes());
    h.update(serde_json::to_vec(smells).expect("smell config serialises"));
    hex::encode(h.finalize())
}

pub fn analyze_app(app: &AppSnapshot, smell_cfg: &SmellConfig) -> Result<AppAnalysis> {
    let root = &app.source_root;
    let manifest = app
        .manifest_path
        .as_ref()
        .ok_or_else(|| CoreError::Data(format!("{}: no AndroidManifest.xml", app.id())))?;
    let activity_count = count_activities(manifest)?;

    let mut units = Vec::new();
    let mut parse_failures = Vec::new();
    let mut app_loc = 0u64;
    let mut java_files = 0;
    for p in source_files(root) {
        if Language::from_path(&p) != Some(Language::Java) {
            continue;
        }
        java_files += 1;
        let bytes = std::fs::read(&p).map_err(|e| CoreError::io(&p, e))?;
        let text = String::from_utf8_lossy(&bytes);
        app_loc += u64::from(count_code_lines(&text, Language::Java));
        match parse_source(&rel(root, &p), &text) {
            Ok(u) => units.push(u),
            Err(f) => {
                log::warn!("{}: {f}", app.id());
                parse_failures.push(f);
            }
        }
    }
    if units.is_empty() {
        return Err(CoreError::Data(format!("{}: no parseable Java files", app.id())));
    }
    let model = StructuralModel::build(units);
    let cg = class_graph(&model);
    let files = project(&model, &cg, Granularity::File);
    let pkgs = project(&model, &cg, Granularity::Package);
    let (class_rows, method_rows) = CodeMetricsContext::with_class_graph(&model, &cg).all();
    let system =
        system_metrics_from(&model, &cg, &files, &pkgs).map_err(|e| CoreError::Data(format!("{}: {e}", app.id())))?;
    let smells = detect_smells(&model, &cg, smell_cfg);
    Ok(AppAnalysis {
        package_name: app.id().to_string(),
        content_hash: content_hash(root)?,
        analysis_hash: analysis_hash(smell_cfg),
        java_files,
        parse_failures,
        app_loc,
        activity_count,
        class_rows,
        method_rows,
        system,
        smells,
    })
}
