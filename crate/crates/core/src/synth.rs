//! Synthetic Android app corpus: generated Java sources, manifests and store metadata.
//!
//! Each app gets a latent quality `q` in [0, 1]; code size and complexity grow
//! with `q`, and so do its star ratings and installs (with noise).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::features::{DEFAULT_GENRES, DEFAULT_PERMISSIONS};
use crate::ingest::{AppMeta, Review};
use crate::{CoreError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthOptions {
    pub apps: usize,
    pub seed: u64,
    /// Also write three apps that the filters must reject: Kotlin-heavy, too young, too few classes.
    pub with_rejects: bool,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self { apps: 24, seed: 42, with_rejects: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthApp {
    pub package_name: String,
    pub dir: PathBuf,
    pub quality: f64,
    pub normal_classes: usize,
    pub activities: u32,
}

const ROLES: [&str; 8] = ["Engine", "Widget", "Store", "Parser", "Cache", "Router", "Sync", "Player"];
const SNAPSHOT: (i32, u32, u32) = (2021, 6, 1);

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(d) = path.parent() {
        std::fs::create_dir_all(d).map_err(|e| CoreError::io(d, e))?;
    }
    std::fs::write(path, text).map_err(|e| CoreError::io(path, e))
}

struct ClassPlan {
    pkg: String,
    name: String,
    parent: Option<usize>,
    peer: Option<usize>,
    methods: usize,
}

fn method_body(rng: &mut ChaCha8Rng, q: f64, peer: Option<&ClassPlan>, out: &mut String) {
    let loops = rng.gen_range(0..=(1 + (3.0 * q) as usize));
    out.push_str("        int total = 0;\n");
    for l in 0..loops {
        let bound = rng.gen_range(2..50);
        let _ = writeln!(out, "        for (int i{l} = 0; i{l} < a + {bound}; i{l}++) {{");
        if rng.gen_bool(0.3 + 0.6 * q) {
            let m = rng.gen_range(2..7);
            let _ = writeln!(out, "            if (i{l} % {m} == 0 && b > i{l}) {{\n                total += i{l} * b;\n            }} else {{\n                total -= {l};\n            }}");
        } else {
            let _ = writeln!(out, "            total += i{l};");
        }
        out.push_str("        }\n");
    }
    if let Some(p) = peer {
        let _ = writeln!(out, "        total += peer.compute0(total, b);");
        if rng.gen_bool(0.5) {
            let _ = writeln!(out, "        String label = \"{}\" + total;", p.name.to_lowercase());
            out.push_str("        name = label;\n");
        }
    }
    if rng.gen_bool(0.2 + 0.5 * q) {
        out.push_str("        try {\n            total = Integer.parseInt(name) + total;\n        } catch (NumberFormatException e) {\n            total = -1;\n        }\n");
    }
    if rng.gen_bool(0.5 * q) {
        out.push_str("        switch (total % 3) {\n            case 0:\n                total += 7;\n                break;\n            case 1:\n                total *= 2;\n                break;\n            default:\n                total = 0;\n        }\n");
    }
    out.push_str("        return total;\n");
}

fn class_source(rng: &mut ChaCha8Rng, root_pkg: &str, plans: &[ClassPlan], k: usize, q: f64) -> String {
    let c = &plans[k];
    let mut s = format!("package {root_pkg}.{};\n\n", c.pkg);
    s.push_str("import java.util.ArrayList;\nimport java.util.List;\n");
    for dep in [c.parent, c.peer].into_iter().flatten() {
        let d = &plans[dep];
        if d.pkg != c.pkg {
            let _ = writeln!(s, "import {root_pkg}.{}.{};", d.pkg, d.name);
        }
    }
    s.push('\n');
    let _ = write!(s, "/**\n * {} component.\n */\npublic class {}", c.name, c.name);
    if let Some(p) = c.parent {
        let _ = write!(s, " extends {}", plans[p].name);
    }
    s.push_str(" {\n");
    let _ = writeln!(s, "    private int count;\n    protected String name = \"{}\";\n    static final int LIMIT = {};", c.name, rng.gen_range(10..500));
    s.push_str("    private final List<String> items = new ArrayList<>();\n");
    if let Some(p) = c.peer {
        let _ = writeln!(s, "    private {} peer = new {}();", plans[p].name, plans[p].name);
    }
    s.push('\n');
    for m in 0..c.methods {
        let vis = ["public", "protected", "private", "public"][m % 4];
        let _ = writeln!(s, "    {vis} int compute{m}(int a, int b) {{");
        method_body(rng, q, c.peer.map(|p| &plans[p]), &mut s);
        s.push_str("    }\n\n");
    }
    s.push_str("    public int size() {\n        return items.size() + count;\n    }\n");
    if rng.gen_bool(0.3 + 0.5 * q) {
        s.push_str("\n    public void each() {\n        items.forEach(x -> count += x.length());\n    }\n");
    }
    if rng.gen_bool(0.4 * q) {
        s.push_str("\n    public Runnable task() {\n        return new Runnable() {\n            @Override\n            public void run() {\n                count++;\n            }\n        };\n    }\n");
    }
    if rng.gen_bool(0.3) {
        s.push_str("\n    static class Holder {\n        int value;\n\n        int twice() {\n            return value * 2;\n        }\n    }\n");
    }
    s.push_str("}\n");
    s
}

fn manifest(package: &str, activities: u32) -> String {
    let mut s = format!(
        "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<manifest xmlns:android=\"http://schemas.android.com/apk/res/android\" package=\"{package}\">\n    <uses-permission android:name=\"android.permission.INTERNET\"/>\n    <application android:label=\"synth\">\n"
    );
    for a in 0..activities {
        let _ = writeln!(s, "        <activity android:name=\".Screen{a}\"/>");
    }
    s.push_str("        <activity-alias android:name=\".Launcher\" android:targetActivity=\".Screen0\"/>\n    </application>\n</manifest>\n");
    s
}

fn meta(rng: &mut ChaCha8Rng, package: &str, q: f64, age_days: i64) -> AppMeta {
    let snapshot = NaiveDate::from_ymd_opt(SNAPSHOT.0, SNAPSHOT.1, SNAPSHOT.2).expect("valid date");
    let n_reviews = rng.gen_range(5..30);
    let reviews = (0..n_reviews)
        .map(|_| {
            let mu = 1.5 + 3.0 * q + rng.gen_range(-1.2..1.2);
            Review {
                stars: mu.round().clamp(1.0, 5.0) as u8,
                text: None,
                app_version: Some(format!("1.{}", rng.gen_range(0..9))),
            }
        })
        .collect();
    let n_perms = rng.gen_range(0..5);
    let mut perms: Vec<String> = DEFAULT_PERMISSIONS
        .choose_multiple(rng, n_perms)
        .map(|s| s.to_string())
        .collect();
    perms.sort();
    let years = age_days as f64 / 365.25;
    let installs = 10f64.powf(2.0 + 3.0 * q + rng.gen_range(-0.4..0.4)) * years;
    AppMeta {
        package_name: package.to_string(),
        genre: DEFAULT_GENRES.choose(rng).expect("non-empty").to_string(),
        contains_ads: rng.gen_bool(0.4),
        permissions: perms,
        release_date: snapshot - Duration::days(age_days),
        snapshot_date: snapshot,
        install_count: installs.round() as u64,
        reviews,
    }
}

fn write_app(root: &Path, idx: usize, rng: &mut ChaCha8Rng, n_classes: usize, q: f64, age_days: i64) -> Result<SynthApp> {
    let package = format!("org.synth.app{idx:03}");
    let dir = root.join(format!("app{idx:03}"));
    let plans: Vec<ClassPlan> = (0..n_classes)
        .map(|k| ClassPlan {
            pkg: if k % 3 == 2 { "ui".into() } else { "core".into() },
            name: format!("{}{k}", ROLES[k % ROLES.len()]),
            parent: (k > 0 && rng.gen_bool(0.25)).then(|| rng.gen_range(0..k)),
            peer: (k > 0).then(|| rng.gen_range(0..k)),
            methods: 1 + rng.gen_range(0..=(1 + (4.0 * q) as usize)),
        })
        .collect();
    let src = dir.join("app/src/main");
    for k in 0..n_classes {
        let text = class_source(rng, &package, &plans, k, q);
        let p = &plans[k];
        write(&src.join("java").join(package.replace('.', "/")).join(&p.pkg).join(format!("{}.java", p.name)), &text)?;
    }
    let activities = rng.gen_range(1..6);
    write(&src.join("AndroidManifest.xml"), &manifest(&package, activities))?;
    let m = meta(rng, &package, q, age_days);
    let json = serde_json::to_string_pretty(&m).map_err(|e| CoreError::Internal(e.to_string()))?;
    write(&dir.join("app.json"), &json)?;
    Ok(SynthApp { package_name: package, dir, quality: q, normal_classes: n_classes, activities })
}

/// Writes `opts.apps` valid apps (plus rejects, if asked) under `root`.
pub fn write_corpus(root: &Path, opts: &SynthOptions) -> Result<Vec<SynthApp>> {
    std::fs::create_dir_all(root).map_err(|e| CoreError::io(root, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut out = Vec::new();
    for i in 0..opts.apps {
        // evenly spread qualities, jittered, so both label classes are populated
        let q = ((i as f64 + rng.gen_range(0.0..1.0)) / opts.apps as f64).clamp(0.0, 1.0);
        let n_classes = 5 + (q * 6.0) as usize + rng.gen_range(0..3);
        let age = rng.gen_range(400..2500);
        out.push(write_app(root, i, &mut rng, n_classes, q, age)?);
    }
    if opts.with_rejects {
        let base = opts.apps;
        let kotlin = write_app(root, base, &mut rng, 6, 0.5, 900)?;
        let kt: String = (0..5000).map(|i| format!("val v{i} = {i}\n")).collect();
        write(&kotlin.dir.join("app/src/main/kotlin/Extra.kt"), &kt)?;
        out.push(kotlin);
        out.push(write_app(root, base + 1, &mut rng, 6, 0.5, 180)?);
        out.push(write_app(root, base + 2, &mut rng, 3, 0.5, 900)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::load_corpus;

    #[test]
    fn generated_corpus_loads_and_is_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let opts = SynthOptions { apps: 4, seed: 3, with_rejects: true };
        let apps = write_corpus(a.path(), &opts).unwrap();
        write_corpus(b.path(), &opts).unwrap();
        assert_eq!(apps.len(), 7);
        let m = load_corpus(a.path()).unwrap();
        assert_eq!(m.apps.len(), 7);
        assert!(m.skipped.is_empty());
        for app in &apps {
            let rel = app.dir.strip_prefix(a.path()).unwrap();
            assert_eq!(
                crate::extract::content_hash(&app.dir).unwrap(),
                crate::extract::content_hash(&b.path().join(rel)).unwrap()
            );
        }
        assert!(m.apps.iter().any(|s| s.java_fraction < 0.5));
    }
}
