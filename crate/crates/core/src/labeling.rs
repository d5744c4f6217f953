//! Popularity indicators and binary labels.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use apppop_model::stats;

use crate::ingest::{AppMeta, Review, Skip};
use crate::{CoreError, Result};

pub const DAYS_PER_YEAR: f64 = 365.25;

/// Fractional years between two dates; `None` when `snapshot` precedes `release`.
pub fn age_years(release: NaiveDate, snapshot: NaiveDate) -> Option<f64> {
    let days = (snapshot - release).num_days();
    (days >= 0).then(|| days as f64 / DAYS_PER_YEAR)
}

/// Unweighted mean of review stars; `None` without reviews.
pub fn average_rating(reviews: &[Review]) -> Option<f64> {
    if reviews.is_empty() {
        return None;
    }
    Some(reviews.iter().map(|r| f64::from(r.stars)).sum::<f64>() / reviews.len() as f64)
}

pub fn downloads_per_year(install_count: u64, release: NaiveDate, snapshot: NaiveDate) -> Result<f64> {
    let age = age_years(release, snapshot)
        .ok_or_else(|| CoreError::Data(format!("snapshot_date {snapshot} precedes release_date {release}")))?;
    if age == 0.0 {
        return Err(CoreError::Data("app age is zero days".into()));
    }
    Ok(install_count as f64 / age)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum BinarizeRule {
    Fixed { threshold: f64 },
    #[default]
    Median,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub rule: BinarizeRule,
    pub threshold: f64,
    pub n: usize,
    pub n_popular: usize,
}

/// Popular iff value ≥ θ. The median rule derives θ from `values`.
pub fn binarize(values: &[f64], rule: BinarizeRule) -> Result<(Vec<bool>, Threshold)> {
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(CoreError::Data(format!("non-finite label value {v}")));
    }
    let threshold = match rule {
        BinarizeRule::Fixed { threshold } => threshold,
        BinarizeRule::Median => {
            if values.is_empty() {
                return Err(CoreError::Data("degenerate split: no values".into()));
            }
            let sorted = stats::sorted_copy(values);
            if sorted[0] == sorted[sorted.len() - 1] {
                return Err(CoreError::Data("degenerate split: all values equal".into()));
            }
            stats::percentile_sorted(&sorted, 50.0)
        }
    };
    let labels: Vec<bool> = values.iter().map(|&v| v >= threshold).collect();
    let n_popular = labels.iter().filter(|&&b| b).count();
    Ok((labels, Threshold { rule, threshold, n: values.len(), n_popular }))
}

/// Kendall tau-b with tie correction.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(CoreError::Data(format!("kendall tau needs two equal vectors of length ≥ 2, got {} and {}", x.len(), y.len())));
    }
    stats::kendall_tau_b(x, y).ok_or_else(|| CoreError::Data("kendall tau undefined: zero variance".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRow {
    pub app_id: String,
    pub avg_rating: f64,
    pub downloads_per_year: f64,
    pub age_years: f64,
    pub popular_by_rating: bool,
    pub popular_by_dpy: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelThresholds {
    pub rating: Threshold,
    pub dpy: Threshold,
    /// Kendall tau-b between age and DownloadsPerYear over the labelled apps, if defined.
    pub age_dpy_kendall_tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LabelConfig {
    pub rating_rule: BinarizeRule,
    pub dpy_rule: BinarizeRule,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self { rating_rule: BinarizeRule::Median, dpy_rule: BinarizeRule::Median }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelSet {
    pub rows: Vec<LabelRow>,
    pub thresholds: LabelThresholds,
    pub excluded: Vec<Skip>,
}

/// Labels every app with reviews; apps without reviews are excluded with a reason.
pub fn label_apps<'a>(apps: impl IntoIterator<Item = &'a AppMeta>, cfg: &LabelConfig) -> Result<LabelSet> {
    let mut partial = Vec::new();
    let mut excluded = Vec::new();
    for meta in apps {
        let Some(avg) = average_rating(&meta.reviews) else {
            excluded.push(Skip { package_name: meta.package_name.clone(), reason: "no reviews".into() });
            continue;
        };
        let age = age_years(meta.release_date, meta.snapshot_date)
            .ok_or_else(|| CoreError::Data(format!("{}: snapshot_date precedes release_date", meta.package_name)))?;
        let dpy = downloads_per_year(meta.install_count, meta.release_date, meta.snapshot_date)
            .map_err(|e| CoreError::Data(format!("{}: {e}", meta.package_name)))?;
        partial.push((meta.package_name.clone(), avg, dpy, age));
    }
    let ratings: Vec<f64> = partial.iter().map(|p| p.1).collect();
    let dpys: Vec<f64> = partial.iter().map(|p| p.2).collect();
    let ages: Vec<f64> = partial.iter().map(|p| p.3).collect();
    let (by_rating, rating) = binarize(&ratings, cfg.rating_rule).map_err(|e| CoreError::Data(format!("rating: {e}")))?;
    let (by_dpy, dpy) = binarize(&dpys, cfg.dpy_rule).map_err(|e| CoreError::Data(format!("downloads_per_year: {e}")))?;
    let tau = if ages.len() >= 2 { stats::kendall_tau_b(&ages, &dpys) } else { None };
    let rows = partial
        .into_iter()
        .enumerate()
        .map(|(i, (app_id, avg_rating, downloads_per_year, age_years))| LabelRow {
            app_id,
            avg_rating,
            downloads_per_year,
            age_years,
            popular_by_rating: by_rating[i],
            popular_by_dpy: by_dpy[i],
        })
        .collect();
    Ok(LabelSet { rows, thresholds: LabelThresholds { rating, dpy, age_dpy_kendall_tau: tau }, excluded })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn stars(s: &[u8]) -> Vec<Review> {
        s.iter().map(|&stars| Review { stars, text: None, app_version: None }).collect()
    }

    #[test]
    fn rating_examples() {
        assert_eq!(average_rating(&stars(&[5, 5, 5])), Some(5.0));
        assert_eq!(average_rating(&stars(&[1, 2, 3, 4, 5])), Some(3.0));
        assert!((average_rating(&stars(&[4, 4, 5])).unwrap() - 13.0 / 3.0).abs() < 1e-12);
        assert_eq!(average_rating(&[]), None);
    }

    #[test]
    fn dpy_examples() {
        let r = d(2020, 1, 1);
        // 730.5 days is not representable; 730 and 731 days bracket it
        let two_years = r + chrono::Duration::days(731);
        assert!((downloads_per_year(1000, r, two_years).unwrap() - 1000.0 / (731.0 / 365.25)).abs() < 1e-9);
        assert_eq!(downloads_per_year(0, r, two_years).unwrap(), 0.0);
        assert!(downloads_per_year(1, two_years, r).is_err());
        let y = age_years(r, r + chrono::Duration::days(1461)).unwrap();
        assert_eq!(y, 4.0);
        assert_eq!(downloads_per_year(2000, r, r + chrono::Duration::days(1461)).unwrap(), 500.0);
        assert!((300.0 / (730.5 / DAYS_PER_YEAR) - 150.0).abs() < 1e-12);
    }

    #[test]
    fn binarize_examples() {
        let (l, _) = binarize(&[3.0, 4.0, 5.0], BinarizeRule::Fixed { threshold: 4.0 }).unwrap();
        assert_eq!(l, vec![false, true, true]);
        let (l, t) = binarize(&[1.0, 2.0, 3.0, 4.0], BinarizeRule::Median).unwrap();
        assert_eq!(t.threshold, 2.5);
        assert_eq!(l, vec![false, false, true, true]);
        let (l, _) = binarize(&[0.5, 1.0], BinarizeRule::Fixed { threshold: 0.0 }).unwrap();
        assert!(l.iter().all(|&b| b));
        let e = binarize(&[2.0, 2.0, 2.0], BinarizeRule::Median).unwrap_err();
        assert!(e.to_string().contains("degenerate split"));
    }

    #[test]
    fn kendall_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(kendall_tau(&x, &x).unwrap(), 1.0);
        assert_eq!(kendall_tau(&x, &[4.0, 3.0, 2.0, 1.0]).unwrap(), -1.0);
        assert!((kendall_tau(&x, &[1.0, 3.0, 2.0, 4.0]).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!(kendall_tau(&x, &[1.0; 4]).is_err());
        assert!(kendall_tau(&[1.0], &[1.0]).is_err());
    }
}
