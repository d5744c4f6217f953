//! Loading app snapshots from disk and filtering the corpus.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use apppop_analysis::loc::{count_code_lines, Language};
use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::labeling::age_years;
use crate::{CoreError, Result};

pub const APP_FILE: &str = "app.json";
pub const MANIFEST_FILE: &str = "AndroidManifest.xml";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Review {
    pub stars: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub app_version: Option<String>,
}

/// Contents of `app.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppMeta {
    pub package_name: String,
    pub genre: String,
    pub contains_ads: bool,
    #[serde(default)]
    pub permissions: Vec<String>,
    pub release_date: NaiveDate,
    pub snapshot_date: NaiveDate,
    pub install_count: u64,
    #[serde(default)]
    pub reviews: Vec<Review>,
}

impl AppMeta {
    pub fn validate(&self) -> Result<(), String> {
        if self.package_name.trim().is_empty() {
            return Err("empty package_name".into());
        }
        if let Some(r) = self.reviews.iter().find(|r| !(1..=5).contains(&r.stars)) {
            return Err(format!("review stars {} outside 1..=5", r.stars));
        }
        if self.snapshot_date < self.release_date {
            return Err(format!("snapshot_date {} precedes release_date {}", self.snapshot_date, self.release_date));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppSnapshot {
    pub meta: AppMeta,
    pub source_root: PathBuf,
    pub manifest_path: Option<PathBuf>,
    pub java_fraction: f64,
}

impl AppSnapshot {
    pub fn id(&self) -> &str {
        &self.meta.package_name
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Skip {
    pub package_name: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub java_fraction_min: f64,
    pub min_age_years: f64,
    pub min_normal_classes: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { java_fraction_min: 0.5, min_age_years: 1.0, min_normal_classes: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub root: PathBuf,
    pub apps: Vec<AppSnapshot>,
    pub skipped: Vec<Skip>,
    pub filters_applied: Option<FilterConfig>,
}

/// Files under `dir` in a stable order, hidden entries skipped.
pub fn source_files(dir: &Path) -> Vec<PathBuf> {
    WalkDir::new(dir)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| e.depth() == 0 || !e.file_name().to_string_lossy().starts_with('.'))
        .filter_map(|e| match e {
            Ok(e) => Some(e),
            Err(err) => {
                log::warn!("skipping unreadable entry: {err}");
                None
            }
        })
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .collect()
}

/// Share of code lines written in Java among all recognised source files.
pub fn java_fraction(dir: &Path) -> f64 {
    let (mut java, mut total) = (0u64, 0u64);
    for path in source_files(dir) {
        let Some(lang) = Language::from_path(&path) else { continue };
        let text = match std::fs::read(&path) {
            Ok(b) => String::from_utf8_lossy(&b).into_owned(),
            Err(e) => {
                log::warn!("{}: {e}", path.display());
                continue;
            }
        };
        let n = u64::from(count_code_lines(&text, lang));
        total += n;
        if lang == Language::Java {
            java += n;
        }
    }
    if total == 0 {
        0.0
    } else {
        java as f64 / total as f64
    }
}

/// The app's `AndroidManifest.xml`: the one under `src/main` if present, else the shallowest.
pub fn find_manifest(dir: &Path) -> Option<PathBuf> {
    let mut found: Vec<PathBuf> =
        source_files(dir).into_iter().filter(|p| p.file_name().is_some_and(|n| n == MANIFEST_FILE)).collect();
    found.sort_by_key(|p| {
        let main = p.to_string_lossy().replace('\\', "/").contains("src/main/");
        (!main, p.components().count(), p.clone())
    });
    found.into_iter().next()
}

pub fn read_meta(path: &Path) -> Result<AppMeta, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("unreadable {APP_FILE}: {e}"))?;
    let meta: AppMeta = serde_json::from_str(&text).map_err(|e| format!("malformed {APP_FILE}: {e}"))?;
    meta.validate()?;
    Ok(meta)
}

/// Loads every app directory under `root`. Malformed apps go to the skip list.
pub fn load_corpus(root: &Path) -> Result<CorpusManifest> {
    if !root.is_dir() {
        return Err(CoreError::Data(format!("corpus root {} does not exist", root.display())));
    }
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(root)
        .map_err(|e| CoreError::io(root, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_dir() && !p.file_name().is_some_and(|n| n.to_string_lossy().starts_with('.')))
        .collect();
    dirs.sort();
    let loaded: Vec<(PathBuf, Result<AppSnapshot, String>)> = dirs
        .into_par_iter()
        .map(|dir| {
            let r = read_meta(&dir.join(APP_FILE)).map(|meta| AppSnapshot {
                meta,
                manifest_path: find_manifest(&dir),
                java_fraction: java_fraction(&dir),
                source_root: dir.clone(),
            });
            (dir, r)
        })
        .collect();
    let mut apps = Vec::new();
    let mut skipped = Vec::new();
    let mut seen: BTreeMap<String, PathBuf> = BTreeMap::new();
    for (dir, r) in loaded {
        match r {
            Ok(app) => {
                if let Some(first) = seen.get(app.id()) {
                    return Err(CoreError::Data(format!(
                        "duplicate package name {} in {} and {}",
                        app.id(),
                        first.display(),
                        dir.display()
                    )));
                }
                seen.insert(app.id().to_string(), dir);
                apps.push(app);
            }
            Err(reason) => skipped.push(Skip {
                package_name: dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
                reason,
            }),
        }
    }
    Ok(CorpusManifest { root: root.to_path_buf(), apps, skipped, filters_applied: None })
}

/// Keeps apps meeting the Java-share and age thresholds; returns the exclusions too.
pub fn filter_corpus(m: &CorpusManifest, cfg: &FilterConfig) -> (CorpusManifest, Vec<Skip>) {
    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    for app in &m.apps {
        let age = age_years(app.meta.release_date, app.meta.snapshot_date).unwrap_or(0.0);
        let reason = if app.java_fraction < cfg.java_fraction_min {
            Some(format!("java_fraction<{}", cfg.java_fraction_min))
        } else if age < cfg.min_age_years {
            Some(format!("age<{}y", cfg.min_age_years))
        } else {
            None
        };
        match reason {
            Some(reason) => excluded.push(Skip { package_name: app.id().to_string(), reason }),
            None => kept.push(app.clone()),
        }
    }
    let out = CorpusManifest {
        root: m.root.clone(),
        apps: kept,
        skipped: m.skipped.clone(),
        filters_applied: Some(cfg.clone()),
    };
    (out, excluded)
}

/// Number of `<activity>` elements inside `<application>`; aliases are not counted.
pub fn count_activities(manifest: &Path) -> Result<u32> {
    let text = std::fs::read_to_string(manifest).map_err(|e| CoreError::io(manifest, e))?;
    count_activities_in(&text).map_err(|e| CoreError::Data(format!("{}: {e}", manifest.display())))
}

pub fn count_activities_in(xml: &str) -> Result<u32, String> {
    let doc = roxmltree::Document::parse(xml).map_err(|e| format!("malformed manifest: {e}"))?;
    let n = doc
        .descendants()
        .filter(|n| n.has_tag_name("application"))
        .flat_map(|app| app.descendants().filter(|n| n.is_element() && n.tag_name().name() == "activity"))
        .count();
    Ok(n as u32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn activities_skip_aliases_and_comments() {
        let xml = r#"<?xml version="1.0" encoding="utf-8"?>
<manifest xmlns:android="http://schemas.android.com/apk/res/android" package="a.b">
  <uses-permission android:name="android.permission.INTERNET"/>
  <application android:label="x">
    <!-- <activity android:name=".Commented"/> -->
    <activity android:name=".Main"/>
    <activity android:name=".Second"><intent-filter/></activity>
    <activity android:name=".Third"/>
    <activity-alias android:name=".Alias" android:targetActivity=".Main"/>
  </application>
</manifest>"#;
        assert_eq!(count_activities_in(xml).unwrap(), 3);
        assert_eq!(count_activities_in("<manifest><application/></manifest>").unwrap(), 0);
        assert!(count_activities_in("<manifest><application>").is_err());
    }

    #[test]
    fn meta_validation() {
        let mut m = AppMeta {
            package_name: "a.b".into(),
            genre: "TOOLS".into(),
            contains_ads: false,
            permissions: vec![],
            release_date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            snapshot_date: NaiveDate::from_ymd_opt(2021, 1, 1).unwrap(),
            install_count: 5,
            reviews: vec![Review { stars: 5, text: None, app_version: None }],
        };
        assert!(m.validate().is_ok());
        m.reviews[0].stars = 6;
        assert!(m.validate().is_err());
        m.reviews.clear();
        m.snapshot_date = NaiveDate::from_ymd_opt(2019, 1, 1).unwrap();
        assert!(m.validate().is_err());
    }
}
