//! Per-app aggregation of metric rows into one fixed-length feature vector.

use apppop_analysis::code_metrics::{ClassMetricsRow, MethodMetricsRow, CLASS_METRICS, METHOD_METRICS};
use apppop_analysis::java::ClassKind;
use apppop_analysis::smells::SMELLS;
use apppop_analysis::system_metrics::SYSTEM_METRICS;
use apppop_model::stats;
use apppop_model::FeatureMatrix;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::extract::AppAnalysis;
use crate::ingest::AppMeta;
use crate::{CoreError, Result};

/// The 11 percentile levels.
pub const PERCENTILES: [f64; 11] = [10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0, 95.0, 99.0];

/// Suffixes of the 14 aggregates, in column order.
pub const AGGREGATES: [&str; 14] =
    ["min", "max", "mean", "p10", "p20", "p30", "p40", "p50", "p60", "p70", "p80", "p90", "p95", "p99"];

/// Totals over all class kinds, keyed by the class metric they sum.
pub const GLOBAL_TOTALS: [&str; 7] = [
    "unique_words_qty",
    "lambdas_qty",
    "inner_classes_qty",
    "anonymous_classes_qty",
    "loop_qty",
    "loc",
    "total_methods_qty",
];

pub const TOTAL_NORMAL_CLASSES: &str = "total_normal_classes";
pub const PERCENTILE_METHOD: &str = "linear";

pub const DEFAULT_GENRES: [&str; 47] = [
    "ART_AND_DESIGN", "AUTO_AND_VEHICLES", "BOOKS_AND_REFERENCE", "BUSINESS", "COMICS",
    "COMMUNICATION", "DATING", "EDUCATION", "ENTERTAINMENT", "EVENTS", "FINANCE", "FOOD_AND_DRINK",
    "GAME_ACTION", "GAME_ADVENTURE", "GAME_ARCADE", "GAME_BOARD", "GAME_CARD", "GAME_CASINO",
    "GAME_CASUAL", "GAME_EDUCATIONAL", "GAME_PUZZLE", "GAME_RACING", "GAME_ROLE_PLAYING",
    "GAME_SIMULATION", "GAME_SPORTS", "GAME_STRATEGY", "GAME_TRIVIA", "GAME_WORD",
    "HEALTH_AND_FITNESS", "HOUSE_AND_HOME", "LIBRARIES_AND_DEMO", "LIFESTYLE",
    "MAPS_AND_NAVIGATION", "MEDICAL", "MUSIC_AND_AUDIO", "NEWS_AND_MAGAZINES", "PARENTING",
    "PERSONALIZATION", "PHOTOGRAPHY", "PRODUCTIVITY", "SHOPPING", "SOCIAL", "SPORTS", "TOOLS",
    "TRAVEL_AND_LOCAL", "VIDEO_PLAYERS", "WEATHER",
];

pub const DEFAULT_PERMISSIONS: [&str; 16] = [
    "Location",
    "Phone",
    "Photos/Media/Files",
    "Storage",
    "Wi-Fi connection information",
    "Device ID & call information",
    "Other",
    "Uncategorized",
    "Camera",
    "Microphone",
    "Identity",
    "Calendar",
    "Contacts",
    "Device & app history",
    "SMS",
    "Wearable sensors/Activity data",
];

/// Linear-interpolation percentiles at [`PERCENTILES`].
pub fn percentiles(xs: &[f64]) -> Result<[f64; 11]> {
    if xs.is_empty() {
        return Err(CoreError::Data("percentiles of an empty population".into()));
    }
    if let Some(v) = xs.iter().find(|v| !v.is_finite()) {
        return Err(CoreError::Data(format!("non-finite value {v} in percentile input")));
    }
    let sorted = stats::sorted_copy(xs);
    Ok(PERCENTILES.map(|p| stats::percentile_sorted(&sorted, p)))
}

/// min, max, mean and the 11 percentiles, or all zeros for an empty population.
pub fn aggregate(xs: &[f64]) -> Result<[f64; 14]> {
    let mut out = [0.0; 14];
    if xs.is_empty() {
        return Ok(out);
    }
    let p = percentiles(xs)?;
    out[0] = xs.iter().copied().fold(f64::INFINITY, f64::min);
    out[1] = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // the mean of a constant population can drift by an ulp; keep it inside [min, max]
    out[2] = stats::mean(xs).clamp(out[0], out[1]);
    out[3..].copy_from_slice(&p);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Vocab {
    pub genres: Vec<String>,
    pub permissions: Vec<String>,
}

impl Default for Vocab {
    fn default() -> Self {
        Self {
            genres: DEFAULT_GENRES.iter().map(|s| s.to_string()).collect(),
            permissions: DEFAULT_PERMISSIONS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Lower-case ASCII slug: runs of other characters collapse to one `_`.
pub fn slug(s: &str) -> String {
    let mut out = String::new();
    for c in s.trim().chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    out.trim_matches('_').to_string()
}

impl Vocab {
    pub fn genre_column(g: &str) -> String {
        format!("genre_{}", g.trim().to_ascii_uppercase())
    }

    pub fn permission_column(p: &str) -> String {
        format!("perm_{}", slug(p))
    }

    pub fn validate(&self) -> Result<(), String> {
        for (kind, cols) in [
            ("genre", self.genres.iter().map(|g| Self::genre_column(g)).collect::<Vec<_>>()),
            ("permission", self.permissions.iter().map(|p| Self::permission_column(p)).collect()),
        ] {
            let mut seen = std::collections::BTreeSet::new();
            for c in cols {
                if c.ends_with('_') || !seen.insert(c.clone()) {
                    return Err(format!("{kind} vocabulary yields an empty or duplicate column {c}"));
                }
            }
        }
        Ok(())
    }

    pub fn metadata_columns(&self) -> Vec<String> {
        let mut cols = vec!["app_loc".to_string(), "activity_count".to_string(), "contains_ads".to_string()];
        cols.extend(self.genres.iter().map(|g| Self::genre_column(g)));
        cols.push("genre__OTHER".into());
        cols.extend(self.permissions.iter().map(|p| Self::permission_column(p)));
        cols.push("perm__OTHER".into());
        cols
    }
}

/// Metadata block values, aligned with [`Vocab::metadata_columns`].
pub fn encode_metadata(meta: &AppMeta, app_loc: u64, activity_count: u32, vocab: &Vocab) -> Vec<f64> {
    let mut v = vec![app_loc as f64, f64::from(activity_count), f64::from(u8::from(meta.contains_ads))];
    let genre = Vocab::genre_column(&meta.genre);
    let mut hit = false;
    for g in &vocab.genres {
        let on = Vocab::genre_column(g) == genre;
        hit |= on;
        v.push(f64::from(u8::from(on)));
    }
    v.push(f64::from(u8::from(!hit)));
    let held: Vec<String> = meta.permissions.iter().map(|p| Vocab::permission_column(p)).collect();
    let known: Vec<String> = vocab.permissions.iter().map(|p| Vocab::permission_column(p)).collect();
    for k in &known {
        v.push(f64::from(u8::from(held.contains(k))));
    }
    v.push(f64::from(u8::from(held.iter().any(|h| !known.contains(h)))));
    v
}

/// Full column list: metadata, system, smells, class aggregates, method aggregates, globals.
pub fn schema(vocab: &Vocab) -> Vec<String> {
    let mut cols = vocab.metadata_columns();
    cols.extend(SYSTEM_METRICS.iter().map(|m| format!("sys_{m}")));
    cols.extend(SMELLS.iter().map(|s| format!("smell_{s}")));
    cols.push("class__present".into());
    for m in CLASS_METRICS {
        cols.extend(AGGREGATES.iter().map(|a| format!("class_{m}_{a}")));
    }
    cols.push("method__present".into());
    for m in METHOD_METRICS {
        cols.extend(AGGREGATES.iter().map(|a| format!("method_{m}_{a}")));
    }
    cols.extend(GLOBAL_TOTALS.iter().map(|g| format!("total_{g}")));
    cols.push(TOTAL_NORMAL_CLASSES.into());
    cols
}

pub fn count_normal(rows: &[ClassMetricsRow]) -> usize {
    rows.iter().filter(|r| r.kind == ClassKind::Normal).count()
}

/// `Err(reason)` when the app has fewer than `min` normal classes.
pub fn normal_class_filter(rows: &[ClassMetricsRow], min: usize) -> Result<(), String> {
    let n = count_normal(rows);
    if n < min {
        Err(format!("normal_classes<{min} ({n})"))
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub app_id: String,
    /// Aligned with the schema it was built against.
    pub values: Vec<f64>,
}

fn block(rows: &[Vec<f64>], n_metrics: usize, out: &mut Vec<f64>) -> Result<()> {
    out.push(f64::from(u8::from(!rows.is_empty())));
    for j in 0..n_metrics {
        let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        out.extend(aggregate(&col)?);
    }
    Ok(())
}

pub fn global_totals(rows: &[ClassMetricsRow]) -> [f64; 7] {
    let sum = |f: fn(&ClassMetricsRow) -> u32| rows.iter().map(|r| f64::from(f(r))).sum::<f64>();
    [
        sum(|r| r.unique_words_qty),
        sum(|r| r.lambdas_qty),
        sum(|r| r.inner_classes_qty),
        sum(|r| r.anonymous_classes_qty),
        sum(|r| r.loop_qty),
        sum(|r| r.loc),
        sum(|r| r.total_methods_qty),
    ]
}

/// One app's feature vector against `schema(vocab)`.
pub fn aggregate_app(a: &AppAnalysis, meta: &AppMeta, vocab: &Vocab) -> Result<FeatureVector> {
    let mut v = encode_metadata(meta, a.app_loc, a.activity_count, vocab);
    v.extend(a.system.values());
    v.extend(a.smells.values());
    let normal: Vec<Vec<f64>> =
        a.class_rows.iter().filter(|r| r.kind == ClassKind::Normal).map(|r| r.values()).collect();
    block(&normal, CLASS_METRICS.len(), &mut v)?;
    let methods: Vec<Vec<f64>> = a.method_rows.iter().map(MethodMetricsRow::values).collect();
    block(&methods, METHOD_METRICS.len(), &mut v)?;
    v.extend(global_totals(&a.class_rows));
    v.push(normal.len() as f64);
    let expected = schema(vocab).len();
    if v.len() != expected {
        return Err(CoreError::Internal(format!("{}: {} values for a {expected}-column schema", a.package_name, v.len())));
    }
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(CoreError::Data(format!("{}: non-finite feature {}", a.package_name, schema(vocab)[i])));
    }
    Ok(FeatureVector { app_id: a.package_name.clone(), values: v })
}

/// Stacks vectors into a matrix; ids must be unique and widths equal the schema.
pub fn to_matrix(schema: Vec<String>, rows: &[FeatureVector], provenance: &str) -> Result<FeatureMatrix> {
    let d = schema.len();
    if let Some(r) = rows.iter().find(|r| r.values.len() != d) {
        return Err(CoreError::Data(format!("{}: {} values, schema has {d}", r.app_id, r.values.len())));
    }
    let data = Array2::from_shape_fn((rows.len(), d), |(i, j)| rows[i].values[j]);
    let ids = rows.iter().map(|r| r.app_id.clone()).collect();
    Ok(FeatureMatrix::new(schema, ids, data, provenance)?)
}
