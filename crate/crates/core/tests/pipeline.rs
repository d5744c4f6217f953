use std::path::Path;
use std::time::Instant;

use apppop_core::artifacts::{read_features, read_rows};
use apppop_core::config::{RunConfig, Target};
use apppop_core::ingest::Skip;
use apppop_core::pipeline::{Pipeline, SelectionFile};
use apppop_core::synth::{write_corpus, SynthOptions};
use apppop_core::CoreError;
use apppop_model::Task;

fn classification_config() -> RunConfig {
    let mut c = RunConfig::default();
    c.evaluation.tasks = vec![Task::Classification];
    c.evaluation.targets = vec![Target::Rating, Target::Dpy];
    c
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

#[test]
fn synthetic_corpus_full_run() {
    let corpus = tempfile::tempdir().unwrap();
    write_corpus(corpus.path(), &SynthOptions { apps: 20, seed: 11, with_rejects: true }).unwrap();
    let out_a = tempfile::tempdir().unwrap();
    let out_b = tempfile::tempdir().unwrap();

    let t = Instant::now();
    let p = Pipeline::new(classification_config(), out_a.path()).unwrap();

    let e = p.evaluate().unwrap_err();
    assert!(matches!(e, CoreError::MissingArtifact { command: "train", .. }), "{e}");
    assert!(e.to_string().contains("apppop train"));

    let rows = p.run(corpus.path()).unwrap();
    eprintln!("full run: {:?}", t.elapsed());
    assert_eq!(rows.len(), 5 * 3 * 2);

    let m = read_features(&p.layout.features_csv()).unwrap();
    assert_eq!(m.n_rows(), 20);
    let skips: Vec<Skip> = read_rows(&p.layout.skips_csv()).unwrap();
    let reasons: Vec<&str> = skips.iter().map(|s| s.reason.as_str()).collect();
    assert_eq!(skips.len(), 3, "{reasons:?}");
    assert!(reasons.iter().any(|r| r.starts_with("age<1")));
    assert!(reasons.iter().any(|r| r.starts_with("java_fraction<")));
    assert!(reasons.iter().any(|r| r.starts_with("normal_classes<5")));

    // second run elsewhere is byte-identical
    let q = Pipeline::new(classification_config(), out_b.path()).unwrap();
    q.run(corpus.path()).unwrap();
    for f in ["features.csv", "labels.csv", "selection.json", "report.json", "report.csv", "report.txt"] {
        assert_eq!(read(&out_a.path().join(f)), read(&out_b.path().join(f)), "{f} differs");
    }

    // rerun in place reuses every per-app analysis and reproduces the file
    let before = read(&p.layout.features_csv());
    let s = p.extract(corpus.path()).unwrap();
    assert_eq!((s.reused, s.analysed), (21, 0));
    assert_eq!(read(&p.layout.features_csv()), before);
}

#[test]
fn size_selection_lists_app_loc() {
    let corpus = tempfile::tempdir().unwrap();
    write_corpus(corpus.path(), &SynthOptions { apps: 8, seed: 2, with_rejects: false }).unwrap();
    let out = tempfile::tempdir().unwrap();
    let mut cfg = classification_config();
    cfg.selection.feature_sets = vec![apppop_model::select::FeatureSet::Size];
    let p = Pipeline::new(cfg, out.path()).unwrap();
    assert!(matches!(p.select().unwrap_err(), CoreError::MissingArtifact { command: "extract", .. }));
    p.extract(corpus.path()).unwrap();
    assert!(matches!(p.select().unwrap_err(), CoreError::MissingArtifact { command: "label", .. }));
    p.label().unwrap();
    p.select().unwrap();
    let sel: SelectionFile = serde_json::from_slice(&read(&p.layout.selection_json())).unwrap();
    assert!(!sel.entries.is_empty());
    for e in &sel.entries {
        assert_eq!(e.features, vec!["app_loc".to_string()]);
    }
}

#[test]
fn empty_corpus_gives_empty_matrix() {
    let corpus = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let p = Pipeline::new(RunConfig::default(), out.path()).unwrap();
    let s = p.extract(corpus.path()).unwrap();
    assert_eq!(s.apps, 0);
    let m = read_features(&p.layout.features_csv()).unwrap();
    assert_eq!(m.n_rows(), 0);
    assert_eq!(m.schema, apppop_core::features::schema(&RunConfig::default().vocab));
}
