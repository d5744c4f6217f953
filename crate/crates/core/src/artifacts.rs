//! On-disk stage artifacts: layout, stamped CSV and JSON.

use std::path::{Path, PathBuf};

use apppop_model::FeatureMatrix;
use ndarray::Array2;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::ingest::Skip;
use crate::labeling::LabelRow;
use crate::{CoreError, Result};

pub const HASH_PREFIX: &str = "# config_hash=";

/// Paths of every artifact under the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }
    pub fn corpus_json(&self) -> PathBuf {
        self.root.join("corpus.json")
    }
    pub fn features_csv(&self) -> PathBuf {
        self.root.join("features.csv")
    }
    pub fn apps_dir(&self) -> PathBuf {
        self.root.join("apps")
    }
    pub fn app_dump(&self, package: &str) -> PathBuf {
        self.apps_dir().join(format!("{package}.json"))
    }
    pub fn skips_csv(&self) -> PathBuf {
        self.root.join("skips.csv")
    }
    pub fn labels_csv(&self) -> PathBuf {
        self.root.join("labels.csv")
    }
    pub fn thresholds_json(&self) -> PathBuf {
        self.root.join("thresholds.json")
    }
    pub fn selection_json(&self) -> PathBuf {
        self.root.join("selection.json")
    }
    pub fn models_dir(&self) -> PathBuf {
        self.root.join("models")
    }
    pub fn models_index(&self) -> PathBuf {
        self.models_dir().join("index.json")
    }
    pub fn report_json(&self) -> PathBuf {
        self.root.join("report.json")
    }
    pub fn report_csv(&self) -> PathBuf {
        self.root.join("report.csv")
    }
    pub fn report_txt(&self) -> PathBuf {
        self.root.join("report.txt")
    }

    /// Errors naming `command` when `path` is absent.
    pub fn require(&self, path: PathBuf, command: &'static str) -> Result<PathBuf> {
        if path.is_file() {
            Ok(path)
        } else {
            Err(CoreError::MissingArtifact { artifact: path, command })
        }
    }
}

/// Writes through a temporary sibling and a rename so readers never see partial files.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CoreError::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| CoreError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| CoreError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CoreError::Internal(e.to_string()))?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CoreError::Data(format!("{}: {e}", path.display())))
}

fn csv_err(path: &Path, e: csv::Error) -> CoreError {
    CoreError::Data(format!("{}: {e}", path.display()))
}

/// CSV with a leading `# config_hash=` comment line.
pub fn stamped_csv<F>(hash: &str, fill: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> Result<(), csv::Error>,
{
    let mut buf = format!("{HASH_PREFIX}{hash}\n").into_bytes();
    {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(&mut buf);
        fill(&mut w).map_err(|e| CoreError::Internal(e.to_string()))?;
        w.flush().map_err(|e| CoreError::Internal(e.to_string()))?;
    }
    Ok(buf)
}

/// The stamped hash of a CSV artifact, if any.
pub fn csv_hash(path: &Path) -> Result<Option<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
    Ok(text.lines().next().and_then(|l| l.strip_prefix(HASH_PREFIX)).map(|h| h.trim().to_string()))
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).map_err(|e| csv_err(path, e))
}

/// Shortest decimal that round-trips.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else {
        format!("{x}")
    }
}

pub fn features_csv_bytes(m: &FeatureMatrix, hash: &str) -> Result<Vec<u8>> {
    stamped_csv(hash, |w| {
        w.write_record(std::iter::once("app_id").chain(m.schema.iter().map(String::as_str)))?;
        for (i, id) in m.app_ids.iter().enumerate() {
            let row = m.data.row(i);
            w.write_record(std::iter::once(id.clone()).chain(row.iter().map(|&x| fmt_f64(x))))?;
        }
        Ok(())
    })
}

pub fn write_features(path: &Path, m: &FeatureMatrix, hash: &str) -> Result<()> {
    write_atomic(path, &features_csv_bytes(m, hash)?)
}

pub fn read_features(path: &Path) -> Result<FeatureMatrix> {
    let hash = csv_hash(path)?.unwrap_or_default();
    let mut r = reader(path)?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.get(0) != Some("app_id") {
        return Err(CoreError::Data(format!("{}: first column must be app_id", path.display())));
    }
    let schema: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        ids.push(rec[0].to_string());
        for (j, field) in rec.iter().skip(1).enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                CoreError::Data(format!("{}: row {}: `{field}` in {} is not a number", path.display(), ids.len(), schema[j]))
            })?;
            values.push(v);
        }
    }
    let data = Array2::from_shape_vec((ids.len(), schema.len()), values)
        .map_err(|e| CoreError::Data(format!("{}: {e}", path.display())))?;
    Ok(FeatureMatrix::new(schema, ids, data, hash)?)
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T], hash: &str, header_if_empty: &[&str]) -> Result<()> {
    let bytes = stamped_csv(hash, |w| {
        if rows.is_empty() {
            w.write_record(header_if_empty)?;
        }
        for r in rows {
            w.serialize(r)?;
        }
        Ok(())
    })?;
    write_atomic(path, &bytes)
}

pub fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = reader(path)?;
    r.deserialize().collect::<Result<Vec<T>, _>>().map_err(|e| csv_err(path, e))
}

pub fn write_skips(path: &Path, skips: &[Skip], hash: &str) -> Result<()> {
    write_rows(path, skips, hash, &["package_name", "reason"])
}

pub fn write_labels(path: &Path, rows: &[LabelRow], hash: &str) -> Result<()> {
    write_rows(
        path,
        rows,
        hash,
        &["app_id", "avg_rating", "downloads_per_year", "age_years", "popular_by_rating", "popular_by_dpy"],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn features_round_trip_with_quoting() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        let data = Array2::from_shape_vec((2, 2), vec![0.1, -3.0, 1e-300, 2.5]).unwrap();
        let m = FeatureMatrix::new(vec!["a,b".into(), "c\"d".into()], vec!["x.y".into(), "z".into()], data, "h").unwrap();
        write_features(&p, &m, "h").unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("# config_hash=h\napp_id,\"a,b\",\"c\"\"d\"\r\n"), "{text}");
        let back = read_features(&p).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn missing_artifact_names_command() {
        let l = Layout::new("/nonexistent");
        let e = l.require(l.models_index(), "train").unwrap_err();
        assert!(e.to_string().contains("apppop train"));
        assert_eq!(e.exit_code(), 2);
    }
}
