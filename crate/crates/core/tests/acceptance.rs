//! Acceptance suite: one check per criterion, one PASS/FAIL line each.
//!
//! Run with `cargo test -p apppop-core --test acceptance -- --nocapture` to see the lines.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use apppop_analysis::code_metrics::code_metrics;
use apppop_analysis::graph::{DependencyGraph, Granularity};
use apppop_analysis::java::{parse_source, StructuralModel};
use apppop_analysis::smells::{SmellConfig, SMELLS};
use apppop_analysis::system_metrics::{cliques, decoupling_level, independence_level, propagation_cost};
use apppop_core::config::{RunConfig, Target};
use apppop_core::extract::analyze_app;
use apppop_core::features::{aggregate_app, percentiles, schema, PERCENTILES, TOTAL_NORMAL_CLASSES};
use apppop_core::ingest::load_corpus;
use apppop_core::labeling::kendall_tau;
use apppop_core::pipeline::Pipeline;
use apppop_core::synth::{write_corpus, SynthOptions};
use apppop_model::eval::{auc, loocv, Confusion, EvalOptions, EvalReport, Metrics};
use apppop_model::learners::ensemble::{BoostLoss, Boosted};
use apppop_model::learners::linear::{logistic_loss_grad, ridge_solve, LinearModel};
use apppop_model::learners::mlp::{Mlp, Output};
use apppop_model::learners::tree::TreeParams;
use apppop_model::select::{vote, SelectorResult};
use apppop_model::smote::{convex_residual, smote};
use apppop_model::synth::planted_signal;
use apppop_model::{Family, FeatureMatrix, ModelSpec, Task, TrainedModel};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

// ---------------------------------------------------------------- oracles

fn percentile_oracle(xs: &[f64], p: f64) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let r = p / 100.0 * (s.len() - 1) as f64;
    let (lo, hi) = (r.floor() as usize, r.ceil() as usize);
    s[lo] + (r - lo as f64) * (s[hi] - s[lo])
}

fn reach(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let mut r = vec![vec![false; n]; n];
    for (i, row) in r.iter_mut().enumerate() {
        row[i] = true;
    }
    for &(a, b) in edges {
        r[a][b] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if r[i][k] {
                for j in 0..n {
                    r[i][j] |= r[k][j];
                }
            }
        }
    }
    r
}

fn tau_oracle(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mut c, mut d, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..x.len() {
        for j in 0..i {
            let a = (x[i] - x[j]).partial_cmp(&0.0).unwrap() as i64;
            let b = (y[i] - y[j]).partial_cmp(&0.0).unwrap() as i64;
            match (a, b) {
                (0, 0) => {}
                (0, _) => tx += 1,
                (_, 0) => ty += 1,
                _ if a == b => c += 1,
                _ => d += 1,
            }
        }
    }
    let (n1, n2) = (c + d + tx, c + d + ty);
    (n1 > 0 && n2 > 0).then(|| (c - d) as f64 / ((n1 * n2) as f64).sqrt())
}

fn lcom_oracle(masks: &[u32]) -> u32 {
    let mut score = 0i64;
    for i in 0..masks.len() {
        for j in i + 1..masks.len() {
            score += if masks[i] & masks[j] == 0 { 1 } else { -1 };
        }
    }
    score.max(0) as u32
}

fn metric_oracles() -> Outcome {
    const N: usize = 1000;
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    for _ in 0..N {
        let len = rng.gen_range(1..40);
        let xs: Vec<f64> = (0..len).map(|_| rng.gen_range(-1e6..1e6)).collect();
        let p = percentiles(&xs).map_err(|e| e.to_string())?;
        for (k, level) in PERCENTILES.iter().enumerate() {
            let o = percentile_oracle(&xs, *level);
            ensure!(close(p[k], o, 1e-10 * o.abs().max(1.0)), "p{level} of {xs:?}: {} vs {o}", p[k]);
        }
    }

    for _ in 0..N {
        let n = rng.gen_range(1..12);
        let edges: Vec<(usize, usize)> = (0..rng.gen_range(0..30)).map(|_| (rng.gen_range(0..n), rng.gen_range(0..n))).collect();
        let g = DependencyGraph::from_adjacency(Granularity::File, n, &edges);
        let r = reach(n, &edges);
        let mut comps = BTreeSet::new();
        for i in 0..n {
            comps.insert((0..n).filter(|&j| r[i][j] && r[j][i]).collect::<Vec<_>>());
        }
        ensure!(g.sccs().len() == comps.len(), "scc count {} vs {} on {edges:?}", g.sccs().len(), comps.len());
        let cyclic = comps.iter().filter(|c| c.len() > 1).count();
        ensure!(cliques(&g).len() == cyclic, "clique count on {edges:?}");
        let reached = r.iter().flatten().filter(|&&b| b).count();
        let pc = propagation_cost(&g).map_err(|e| e.to_string())?;
        ensure!(close(pc, reached as f64 / (n * n) as f64, 1e-10), "pc on {edges:?}");
    }

    for _ in 0..N {
        let len = rng.gen_range(2..25);
        let x: Vec<f64> = (0..len).map(|_| f64::from(rng.gen_range(0u8..6))).collect();
        let y: Vec<f64> = (0..len).map(|_| f64::from(rng.gen_range(0u8..6))).collect();
        match tau_oracle(&x, &y) {
            None => ensure!(kendall_tau(&x, &y).is_err(), "tau defined on {x:?} {y:?}"),
            Some(o) => {
                let t = kendall_tau(&x, &y).map_err(|e| e.to_string())?;
                ensure!(close(t, o, 1e-10), "tau {t} vs {o}");
            }
        }
    }

    // LCOM through the parser: methods read random subsets of five fields
    let mut files = Vec::new();
    let mut expected = BTreeMap::new();
    for c in 0..N {
        let masks: Vec<u32> = (0..rng.gen_range(0..7)).map(|_| rng.gen_range(0..32)).collect();
        let mut src = format!("package p;\n\npublic class L{c} {{\n    int f0, f1, f2, f3, f4;\n");
        for (m, mask) in masks.iter().enumerate() {
            let used: Vec<String> = (0..5).filter(|b| mask >> b & 1 == 1).map(|b| format!("f{b}")).collect();
            let body = if used.is_empty() { "0".to_string() } else { used.join(" + ") };
            src.push_str(&format!("    int m{m}() {{\n        return {body};\n    }}\n"));
        }
        src.push_str("}\n");
        expected.insert(format!("p.L{c}"), lcom_oracle(&masks));
        files.push(parse_source(&format!("p/L{c}.java"), &src).map_err(|e| e.to_string())?);
    }
    let (rows, _) = code_metrics(&StructuralModel::build(files));
    for r in &rows {
        let want = expected[&r.qualified_name];
        ensure!(r.lcom == want, "{}: lcom {} vs {want}", r.qualified_name, r.lcom);
    }
    ensure!(rows.len() == N, "{} classes parsed", rows.len());

    let el = t.elapsed();
    ensure!(el < Duration::from_secs(60), "took {el:?}");
    Ok(format!("{N} instances each, {el:.2?}"))
}

// ---------------------------------------------------------------- fixture

fn fixture_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn fixture_ground_truth() -> Outcome {
    let m = load_corpus(&fixture_root()).map_err(|e| e.to_string())?;
    ensure!(m.apps.len() == 1 && m.skipped.is_empty(), "fixture corpus: {m:?}");
    let a = analyze_app(&m.apps[0], &SmellConfig::default()).map_err(|e| e.to_string())?;
    ensure!(a.java_files == 8 && a.parse_failures.is_empty(), "files {} failures {:?}", a.java_files, a.parse_failures);

    // (wmc, dit, noc, cbo, rfc)
    let classes: [(&str, [u32; 5]); 8] = [
        ("com.fix.model.Shape", [1, 1, 0, 0, 1]),
        ("com.fix.model.Base", [3, 1, 1, 1, 2]),
        ("com.fix.model.Square", [1, 2, 1, 1, 1]),
        ("com.fix.model.Cube", [1, 3, 0, 1, 2]),
        ("com.fix.util.MathUtil", [14, 1, 0, 0, 3]),
        ("com.fix.app.MainActivity", [2, 1, 0, 4, 3]),
        ("com.fix.app.Settings", [4, 1, 0, 1, 2]),
        ("com.fix.app.Listener", [2, 1, 0, 0, 3]),
    ];
    let mut checked = 0;
    for (name, want) in classes {
        let r = a.class_rows.iter().find(|r| r.qualified_name == name).ok_or(format!("no class {name}"))?;
        let got = [r.wmc, r.dit, r.noc, r.cbo, r.rfc];
        ensure!(got == want, "{name}: (wmc, dit, noc, cbo, rfc) = {got:?}, expected {want:?}");
        checked += 5;
    }

    // (class, signature, fan_in, fan_out); every other method is 0/0
    let fans = [
        ("com.fix.model.Cube", "volume()", 0, 1),
        ("com.fix.model.Square", "area()", 1, 0),
        ("com.fix.model.Base", "grow(int)", 1, 0),
        ("com.fix.util.MathUtil", "clamp(int,int,int)", 1, 0),
        ("com.fix.app.MainActivity", "onCreate(int)", 0, 2),
    ];
    ensure!(a.method_rows.len() == 14, "{} method rows", a.method_rows.len());
    for r in &a.method_rows {
        let want = fans.iter().find(|f| f.0 == r.class && f.1 == r.signature).map_or((0, 0), |f| (f.2, f.3));
        ensure!((r.fan_in, r.fan_out) == want, "{}.{}: fan (in, out) = ({}, {}), expected {want:?}", r.class, r.signature, r.fan_in, r.fan_out);
        checked += 2;
    }

    let smells: BTreeMap<&str, u32> = [
        ("long_method", 0),
        ("complex_method", 1),
        ("long_parameter_list", 1),
        ("long_statement", 1),
        ("long_identifier", 1),
        ("magic_number", 1),
        ("empty_catch_clause", 1),
        ("missing_default", 1),
        ("cyclic_dependency", 1),
        ("insufficient_modularization", 0),
        ("god_component", 0),
        ("deep_hierarchy", 0),
    ]
    .into_iter()
    .collect();
    for s in SMELLS {
        ensure!(a.smells.get(s) == smells[s], "smell {s}: {} expected {}", a.smells.get(s), smells[s]);
        checked += 1;
    }

    ensure!(a.activity_count == 3, "activity_count {}", a.activity_count);
    let cfg = RunConfig::default();
    let v = aggregate_app(&a, &m.apps[0].meta, &cfg.vocab).map_err(|e| e.to_string())?;
    let cols = schema(&cfg.vocab);
    let at = |c: &str| cols.iter().position(|x| x == c).map(|j| v.values[j]);
    ensure!(at(TOTAL_NORMAL_CLASSES) == Some(7.0), "total_normal_classes {:?}", at(TOTAL_NORMAL_CLASSES));
    ensure!(at("activity_count") == Some(3.0), "activity_count column {:?}", at("activity_count"));
    ensure!(at("smell_magic_number") == Some(1.0), "smell column {:?}", at("smell_magic_number"));
    checked += 2;
    Ok(format!("{checked} hand-computed values"))
}

// ---------------------------------------------------------------- graphs

fn graph_examples() -> Outcome {
    let chain = DependencyGraph::from_adjacency(Granularity::File, 4, &[(0, 1), (1, 2), (2, 3)]);
    let ring = DependencyGraph::from_adjacency(Granularity::File, 4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
    let e = |r: Result<f64, _>| r.map_err(|e: apppop_analysis::system_metrics::SystemMetricsError| e.to_string());
    let (pc, il) = (e(propagation_cost(&chain))?, e(independence_level(&chain))?);
    ensure!(pc == 0.625 && il == 0.25, "chain: pc {pc} il {il}");
    let (pc4, dl4) = (e(propagation_cost(&ring))?, e(decoupling_level(&ring))?);
    ensure!(pc4 == 1.0 && dl4 == 0.25, "cycle: pc {pc4} dl {dl4}");
    Ok(format!("chain pc={pc} il={il}; cycle pc={pc4} dl={dl4}"))
}

// ---------------------------------------------------------------- learners

fn random_instance(rng: &mut ChaCha8Rng) -> (Array2<f64>, Vec<f64>) {
    let n = rng.gen_range(2..=20);
    let d = rng.gen_range(1..=10);
    let x = Array2::from_shape_simple_fn((n, d), || rng.sample::<f64, _>(StandardNormal));
    let y = (0..n).map(|_| f64::from(rng.gen_bool(0.5))).collect();
    (x, y)
}

fn central_difference(f: impl Fn(&[f64]) -> f64, p: &[f64]) -> Vec<f64> {
    let h = 1e-6;
    (0..p.len())
        .map(|i| {
            let (mut a, mut b) = (p.to_vec(), p.to_vec());
            a[i] += h;
            b[i] -= h;
            (f(&a) - f(&b)) / (2.0 * h)
        })
        .collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt() + b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

fn gradient_checks() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for case in 0..50u64 {
        let (x, y) = random_instance(&mut rng);
        let d = x.ncols();
        let lr = LinearModel { weights: (0..d).map(|_| rng.sample(StandardNormal)).collect(), bias: rng.sample(StandardNormal) };
        let (_, mut analytic, gb) = logistic_loss_grad(&lr, x.view(), &y, 1e-2);
        analytic.push(gb);
        let mut p = lr.weights.clone();
        p.push(lr.bias);
        let numeric = central_difference(
            |q: &[f64]| logistic_loss_grad(&LinearModel { weights: q[..d].to_vec(), bias: q[d] }, x.view(), &y, 1e-2).0,
            &p,
        );
        let e = rel_err(&analytic, &numeric);
        ensure!(e < 1e-4, "logistic case {case}: {e}");
        worst = worst.max(e);

        for output in [Output::Logistic, Output::Linear] {
            let mut m = Mlp::init(d, rng.gen_range(1..=8), output, case);
            let mut p = m.params();
            for v in p.iter_mut() {
                *v += 0.1 * rng.sample::<f64, _>(StandardNormal);
            }
            m.set_params(&p);
            let (_, analytic) = m.loss_grad(x.view(), &y);
            let numeric = central_difference(
                |q: &[f64]| {
                    let mut mm = m.clone();
                    mm.set_params(q);
                    mm.loss_grad(x.view(), &y).0
                },
                &p,
            );
            let e = rel_err(&analytic, &numeric);
            ensure!(e < 1e-4, "mlp {output:?} case {case}: {e}");
            worst = worst.max(e);
        }
    }
    let el = t.elapsed();
    ensure!(el < Duration::from_secs(30), "took {el:?}");
    Ok(format!("50 instances, worst relative error {worst:.1e}, {el:.2?}"))
}

fn matrix(x: Array2<f64>) -> FeatureMatrix {
    let schema = (0..x.ncols()).map(|j| format!("f{j}")).collect();
    let ids = (0..x.nrows()).map(|i| format!("app{i}")).collect();
    FeatureMatrix::new(schema, ids, x, "acceptance").expect("well-formed")
}

fn accuracy(model: &TrainedModel, x: &FeatureMatrix, y: &[f64]) -> Result<f64, String> {
    let s = model.predict(x).map_err(|e| e.to_string())?;
    Ok(s.iter().zip(y).filter(|(s, t)| model.label(**s) == **t).count() as f64 / y.len() as f64)
}

fn learner_sanity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut x = Array2::zeros((200, 2));
    let mut y = Vec::new();
    for i in 0..200 {
        let a: f64 = rng.gen_range(0.2..1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let b: f64 = rng.gen_range(0.2..1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        x[[i, 0]] = a;
        x[[i, 1]] = b;
        y.push(f64::from(a * b > 0.0));
    }
    let m = matrix(x);
    let fit = |f: Family| TrainedModel::fit(&ModelSpec::new(f, Task::Classification).with_seed(1), &m, &y).map_err(|e| e.to_string());
    let (a_mlp, a_lr) = (accuracy(&fit(Family::Mlp)?, &m, &y)?, accuracy(&fit(Family::LogisticRegression)?, &m, &y)?);
    ensure!(a_mlp >= 0.95, "xor mlp accuracy {a_mlp}");
    ensure!(a_lr <= 0.6, "xor lr accuracy {a_lr}");

    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (x, _) = random_instance(&mut rng);
        let y: Vec<f64> = (0..x.nrows()).map(|_| rng.sample(StandardNormal)).collect();
        let lambda = rng.gen_range(0.01..5.0);
        let w = ndarray::arr1(&ridge_solve(x.view(), &y, lambda));
        let resid = &(x.t().dot(&x).dot(&w) + &w * lambda) - &x.t().dot(&ndarray::arr1(&y));
        let r = resid.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        ensure!(r < 1e-8, "ridge normal equations residual {r}");
        worst = worst.max(r);
    }

    let params = TreeParams { max_depth: 3, min_leaf: 2, max_features: None };
    for case in 0..20 {
        let (x, y) = random_instance(&mut rng);
        let noisy: Vec<f64> = y.iter().map(|v| v + rng.sample::<f64, _>(StandardNormal)).collect();
        for (loss, target) in [(BoostLoss::Logistic, &y), (BoostLoss::Squared, &noisy)] {
            let f = Boosted::fit(x.view(), target, loss, 40, 0.1, params, case);
            ensure!(f.loss_history.windows(2).all(|w| w[1] <= w[0] + 1e-12), "boosting {loss:?} case {case}: {:?}", f.loss_history);
        }
    }
    Ok(format!("xor mlp {a_mlp:.3} lr {a_lr:.3}; ridge residual {worst:.1e}; boosting monotone on 40 fits"))
}

// ---------------------------------------------------------------- smote, metrics, voting

fn smote_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut synthetic = 0;
    for _ in 0..200 {
        let (n_min, n_maj, d) = (rng.gen_range(2..8), rng.gen_range(2..20), rng.gen_range(1..5));
        let n = n_min + n_maj;
        let x = Array2::from_shape_simple_fn((n, d), || rng.gen_range(-10.0..10.0));
        let y: Vec<f64> = (0..n).map(|i| f64::from(i < n_min)).collect();
        let s = smote(x.view(), &y, rng.gen_range(1..7), rng.gen()).map_err(|e| e.to_string())?;
        let pos = s.y.iter().filter(|&&v| v == 1.0).count();
        ensure!(2 * pos == s.y.len(), "unbalanced output: {pos} of {}", s.y.len());
        for (r, o) in s.origins.iter().enumerate() {
            let res = convex_residual(x.view(), s.x.row(n + r), o);
            ensure!(res < 1e-9 && y[o.base] == y[o.neighbour] && o.u > 0.0 && o.u < 1.0, "synthetic {r}: residual {res}");
        }
        synthetic += s.origins.len();
    }

    let p = planted_signal(120, 8, 0.3, 3);
    let keep: Vec<usize> = (0..120).filter(|&i| p.labels[i] == 0.0 || i % 3 != 0).collect();
    let m = p.matrix.rows(&keep);
    let y: Vec<f64> = keep.iter().map(|&i| p.labels[i]).collect();
    let opts = EvalOptions { smote: true, ..EvalOptions::default() };
    let mut folds = 0;
    for family in [Family::LogisticRegression, Family::DecisionTree, Family::RandomForest] {
        let r = loocv(&m, &y, &ModelSpec::new(family, Task::Classification).with_seed(2), &opts).map_err(|e| e.to_string())?;
        r.leakage_audit(&m.app_ids)?;
        ensure!(r.audit.iter().all(|a| !a.synthetic_sources.is_empty()), "{family:?}: a fold skipped oversampling");
        folds += r.audit.len();
    }
    Ok(format!("{synthetic} synthetic samples convex; leakage audit clean over {folds} folds"))
}

fn evaluation_metrics() -> Outcome {
    let c = Confusion { tp: 40, fp: 10, fn_: 20, tn: 30 }.class_metrics();
    ensure!(close(c.precision, 0.8, 1e-4) && close(c.recall, 0.6667, 1e-4) && close(c.f1, 0.7273, 1e-4), "{c:?}");
    // the standard formula; 0.3333 in the worked example does not follow from these counts
    let mcc = Confusion { tp: 40, fp: 10, fn_: 20, tn: 30 }.mcc();
    ensure!(close(mcc, 0.4082, 1e-4), "mcc {mcc}");

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut tested = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(2..40);
        let truth: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_bool(0.5))).collect();
        let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0u8..8)) / 7.0).collect();
        let warped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 5.0).collect();
        match (auc(&truth, &scores), auc(&truth, &warped)) {
            (None, None) => {}
            (Some(a), Some(b)) => {
                ensure!(close(a, b, 1e-12), "auc {a} vs {b}");
                tested += 1;
            }
            other => return Err(format!("auc definedness differs: {other:?}")),
        }
    }
    Ok(format!("p 0.8000 r {:.4} f1 {:.4} mcc {mcc:.4}; auc invariant on {tested} cases", c.recall, c.f1))
}

fn voting() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for case in 0..100 {
        let universe: Vec<String> = (0..rng.gen_range(1..20)).map(|i| format!("f{i:02}")).collect();
        let lists: Vec<Vec<String>> = (0..6)
            .map(|_| {
                let k = rng.gen_range(0..=universe.len());
                universe.choose_multiple(&mut rng, k).cloned().collect()
            })
            .collect();
        let oracle: BTreeSet<&String> = universe.iter().filter(|f| lists.iter().filter(|l| l.contains(f)).count() >= 3).collect();
        let results: Vec<SelectorResult> = lists
            .iter()
            .enumerate()
            .map(|(i, l)| SelectorResult { selector: format!("mock{i}"), task: Task::Classification, scores: vec![0.0; l.len()], ranked_features: l.clone() })
            .collect();
        let v = vote(&results).map_err(|e| e.to_string())?;
        ensure!(v.selected.iter().collect::<BTreeSet<_>>() == oracle, "case {case}: {:?} vs {oracle:?}", v.selected);
    }
    Ok("100 configurations match the >=3-vote set".into())
}

// ---------------------------------------------------------------- end to end

fn f1s(r: &EvalReport) -> Result<(f64, f64, f64), String> {
    let Metrics::Classification(c) = &r.metrics else { return Err("not classification".into()) };
    Ok((c.per_class["popular"].f1, c.per_class["unpopular"].f1, c.mcc))
}

fn end_to_end() -> Outcome {
    let t = Instant::now();
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let pipe = Pipeline::new(RunConfig::default(), out.path()).map_err(|e| e.to_string())?;
    let p = planted_signal(200, 100, 0.3, 42);
    let spec = ModelSpec::new(Family::LogisticRegression, Task::Classification).with_seed(42);
    let opts = EvalOptions { smote: true, ..EvalOptions::default() };

    let sel = pipe.vote_features(&p.matrix, &p.labels, Task::Classification, 42).map_err(|e| e.to_string())?;
    for f in &p.informative {
        let v = sel.votes.get(f).copied().unwrap_or(0);
        ensure!(v >= 3, "planted {f} got {v} votes");
    }
    let x = p.matrix.select(&sel.features).map_err(|e| e.to_string())?;
    let r = loocv(&x, &p.labels, &spec, &opts).map_err(|e| e.to_string())?;
    r.leakage_audit(&x.app_ids)?;
    let (f_pos, f_neg, _) = f1s(&r)?;
    ensure!(f_pos >= 0.9 && f_neg >= 0.9, "f1 popular {f_pos} unpopular {f_neg}");

    // Chance level: the voted feature set is fixed (it was chosen on the true labels, so it is
    // independent of any permutation) and MCC is averaged over permutations, because one draw at
    // n = 200 already has a standard deviation near 0.07.
    let mut mccs = Vec::new();
    let mut perm_rng = ChaCha8Rng::seed_from_u64(43);
    for k in 0..10u64 {
        let mut shuffled = p.labels.clone();
        shuffled.shuffle(&mut perm_rng);
        let r = loocv(&x, &shuffled, &spec.clone().with_seed(100 + k), &opts).map_err(|e| e.to_string())?;
        r.leakage_audit(&x.app_ids)?;
        mccs.push(f1s(&r)?.2);
    }
    let mean = mccs.iter().sum::<f64>() / mccs.len() as f64;
    ensure!(mean.abs() <= 0.15, "mean permuted-label mcc {mean} over {mccs:?}");

    // Selecting on the permuted labels themselves before LOOCV lets every held-out row vote;
    // reported, not asserted.
    let mut shuffled = p.labels.clone();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(44));
    let leaky = pipe.vote_features(&p.matrix, &shuffled, Task::Classification, 44).map_err(|e| e.to_string())?;
    let lx = p.matrix.select(&leaky.features).map_err(|e| e.to_string())?;
    let leaky_mcc = f1s(&loocv(&lx, &shuffled, &spec, &opts).map_err(|e| e.to_string())?)?.2;

    let el = t.elapsed();
    ensure!(el < Duration::from_secs(600), "took {el:?}");
    Ok(format!(
        "{} features selected; f1 popular {f_pos:.3} unpopular {f_neg:.3}; permuted mcc mean {mean:.3} \
         (range {:.3}..{:.3}); selection on permuted labels gives {leaky_mcc:.3}; {el:.1?}",
        sel.features.len(),
        mccs.iter().copied().fold(f64::INFINITY, f64::min),
        mccs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    ))
}

fn determinism() -> Outcome {
    let corpus = tempfile::tempdir().map_err(|e| e.to_string())?;
    write_corpus(corpus.path(), &SynthOptions { apps: 16, seed: 5, with_rejects: true }).map_err(|e| e.to_string())?;
    let mut cfg = RunConfig::default();
    cfg.evaluation.tasks = vec![Task::Classification, Task::Regression];
    cfg.evaluation.targets = vec![Target::Rating, Target::Dpy];
    let outs: Vec<tempfile::TempDir> = (0..2).map(|_| tempfile::tempdir().expect("tempdir")).collect();
    for o in &outs {
        Pipeline::new(cfg.clone(), o.path()).and_then(|p| p.run(corpus.path())).map_err(|e| e.to_string())?;
    }
    let files = ["features.csv", "selection.json", "report.json"];
    for f in files {
        let a = std::fs::read(outs[0].path().join(f)).map_err(|e| e.to_string())?;
        let b = std::fs::read(outs[1].path().join(f)).map_err(|e| e.to_string())?;
        ensure!(a == b, "{f} differs between runs");
    }
    Ok(format!("{} byte-identical across two runs", files.join(", ")))
}

#[test]
fn acceptance() {
    let checks: [Check; 10] = [
        ("metric kernels vs oracles", metric_oracles),
        ("fixture-corpus ground truth", fixture_ground_truth),
        ("graph examples", graph_examples),
        ("gradient checks", gradient_checks),
        ("learner sanity", learner_sanity),
        ("smote correctness", smote_correctness),
        ("evaluation metrics", evaluation_metrics),
        ("voting", voting),
        ("end-to-end synthetic", end_to_end),
        ("determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (name, check) in checks {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or("panic".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                println!("FAIL  {name}: {why}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed: {failed:?}");
}
