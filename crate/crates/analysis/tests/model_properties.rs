use std::collections::BTreeSet;

use apppop_analysis::code_metrics::{code_metrics, readability, CodeMetricsContext};
use apppop_analysis::graph::{build_graph, class_graph, Granularity};
use apppop_analysis::java::{parse_source, ClassKind, MethodId, StructuralModel};
use apppop_analysis::smells::{detect_smells, SmellConfig};
use apppop_analysis::system_metrics::{cliques, system_metrics};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand::rngs::StdRng;

/// Random corpus of classes `C0..Cn` spread over packages, with fields,
/// calls, branches and (acyclic) inheritance between them.
fn random_corpus(seed: u64) -> Vec<(String, String)> {
    let mut rng = StdRng::seed_from_u64(seed);
    let n = rng.gen_range(1..9);
    let packages = rng.gen_range(1..4);
    let mut files = Vec::new();
    for i in 0..n {
        let pkg = rng.gen_range(0..packages);
        let mut src = format!("package p{pkg};\n\n");
        let extends = if i > 0 && rng.gen_bool(0.3) {
            format!(" extends C{}", rng.gen_range(0..i))
        } else {
            String::new()
        };
        src.push_str(&format!("public class C{i}{extends} {{\n"));
        let fields = rng.gen_range(0..3);
        for f in 0..fields {
            let t = rng.gen_range(0..n);
            src.push_str(&format!("    C{t} f{f};\n"));
        }
        let methods = rng.gen_range(1..4);
        for m in 0..methods {
            let params = rng.gen_range(0..3);
            let plist: Vec<String> = (0..params).map(|p| format!("int a{p}")).collect();
            src.push_str(&format!("    public static int m{m}({}) {{\n", plist.join(", ")));
            src.push_str("        int x = 0;\n");
            for _ in 0..rng.gen_range(0..4) {
                match rng.gen_range(0..4) {
                    0 => src.push_str(&format!("        if (x > {} && x < 9) {{ x++; }}\n", rng.gen_range(0..5))),
                    1 => src.push_str("        for (int k = 0; k < 3; k++) { x += k; }\n"),
                    2 => {
                        let t = rng.gen_range(0..n);
                        let callee = rng.gen_range(0..3);
                        src.push_str(&format!("        x += C{t}.m{callee}(1);\n"));
                    }
                    _ => {
                        let callee = rng.gen_range(0..methods);
                        src.push_str(&format!("        m{callee}();\n"));
                    }
                }
            }
            src.push_str("        return x;\n    }\n");
        }
        if rng.gen_bool(0.3) {
            src.push_str("    Runnable r = new Runnable() { public void run() { m0(); } };\n");
        }
        src.push_str("}\n");
        files.push((format!("p{pkg}/C{i}.java"), src));
    }
    files
}

fn build(files: &[(String, String)]) -> StructuralModel {
    StructuralModel::build(files.iter().map(|(p, s)| parse_source(p, s).expect("generated code parses")).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parsing_is_idempotent(seed in any::<u64>()) {
        for (p, s) in random_corpus(seed) {
            prop_assert_eq!(parse_source(&p, &s).unwrap(), parse_source(&p, &s).unwrap());
        }
    }

    #[test]
    fn graph_node_counts_and_projection(seed in any::<u64>()) {
        let files = random_corpus(seed);
        let m = build(&files);
        let cg = build_graph(&m, Granularity::Class);
        let fg = build_graph(&m, Granularity::File);
        prop_assert_eq!(cg.node_count(), m.classes.len());
        prop_assert_eq!(fg.node_count(), files.len());
        for e in &fg.edges {
            prop_assert!(e.from != e.to);
            let witnessed = cg.edges.iter().any(|c| m.class_unit[c.from] == e.from && m.class_unit[c.to] == e.to);
            prop_assert!(witnessed);
        }
        for e in build_graph(&m, Granularity::Package).edges {
            prop_assert!(e.from != e.to);
        }
    }

    #[test]
    fn method_metric_invariants(seed in any::<u64>()) {
        let m = build(&random_corpus(seed));
        let ctx = CodeMetricsContext::new(&m);
        let (classes, methods) = ctx.all();
        let edges = m.call_edges();
        let non_ctor_edges = edges.iter().filter(|(_, to)| !m.method(*to).is_constructor).count();
        let fan_in: u32 = methods.iter().map(|r| r.fan_in).sum();
        prop_assert_eq!(fan_in as usize, non_ctor_edges);

        for id in m.method_ids() {
            let (direct, indirect) = ctx.local_callees(id);
            prop_assert!(!indirect.contains(&id));
            prop_assert!(indirect.is_disjoint(&direct));
        }
        for r in &methods {
            prop_assert!(r.wmc >= 1);
            prop_assert!(r.readability > 0.0 && r.readability < 1.0);
        }
        for c in &classes {
            prop_assert!(c.dit >= 1);
            prop_assert!(c.wmc >= c.total_methods_qty);
            prop_assert_eq!(
                c.total_methods_qty,
                c.public_methods_qty + c.private_methods_qty + c.protected_methods_qty + c.default_methods_qty
            );
        }
    }

    #[test]
    fn system_metric_invariants(seed in any::<u64>()) {
        let m = build(&random_corpus(seed));
        let s = system_metrics(&m).unwrap();
        for f in [s.propagation_cost, s.propagation_cost_excl_isolated, s.decoupling_level,
                  s.decoupling_level_excl_isolated, s.independence_level] {
            prop_assert!((0.0..=1.0).contains(&f));
        }
        prop_assert!(s.clique_file_count >= 2 * s.clique_count);
        prop_assert_eq!(s.total_antipattern_count,
            s.clique_count + s.unhealthy_inheritance_count + s.package_cycle_count);
        prop_assert!(s.total_antipattern_files <= s.num_files);
        if s.isolated_file_count == 0 {
            prop_assert_eq!(s.propagation_cost, s.propagation_cost_excl_isolated);
        }
    }

    #[test]
    fn smells_are_monotone_in_thresholds(seed in any::<u64>(), cut in 1u32..4) {
        let m = build(&random_corpus(seed));
        let cg = class_graph(&m);
        let base = SmellConfig::default();
        let low = SmellConfig {
            long_method_loc: cut,
            complex_method_cc: cut,
            long_param_list: cut,
            long_statement_chars: 10 * cut,
            long_identifier_chars: cut,
            insufficient_modularization_class_loc: cut,
            insufficient_modularization_public_methods: cut,
            insufficient_modularization_wmc: cut,
            god_component_package_loc: cut,
            god_component_class_count: cut,
            deep_hierarchy_dit: cut,
            ..SmellConfig::default()
        };
        let a = detect_smells(&m, &cg, &base);
        let b = detect_smells(&m, &cg, &low);
        for (k, v) in &a.counts {
            prop_assert!(b.counts[k] >= *v, "{k}");
        }
        prop_assert_eq!(a.get("cyclic_dependency") as usize, cliques(&cg).len());
    }
}

#[test]
fn anonymous_listener_fixture() {
    let src = "package app;\nimport android.view.View;\npublic class Main {\n  void setup(View v) {\n    v.setOnClickListener(new View.OnClickListener() {\n      public void onClick(View x) { go(); }\n    });\n  }\n  void go() {}\n}\n";
    let unit = parse_source("Main.java", src).unwrap();
    let kinds: BTreeSet<ClassKind> = unit.classes.iter().map(|c| c.kind).collect();
    assert_eq!(kinds, BTreeSet::from([ClassKind::Normal, ClassKind::Anonymous]));
    let m = StructuralModel::build(vec![unit]);
    let (_, methods) = code_metrics(&m);
    let go = methods.iter().find(|r| r.signature == "go()").unwrap();
    // onClick calls go() on the enclosing instance
    assert_eq!(go.fan_in, 1);
    let caller = m.call_edges().into_iter().next().unwrap().0;
    assert_eq!(caller, MethodId { class: 1, index: 0 });
}

#[test]
fn unbalanced_braces_are_reported_with_a_line() {
    let err = parse_source("Bad.java", "class Bad {\n  void f() {\n    int x = 1;\n\n").unwrap_err();
    assert_eq!(err.path, "Bad.java");
    assert!(err.line >= 1);
}

#[test]
fn empty_class_has_no_methods() {
    let unit = parse_source("A.java", "class A {}").unwrap();
    assert_eq!(unit.classes.len(), 1);
    assert!(unit.classes[0].methods.is_empty());
}

#[test]
fn readability_decreases_with_nesting() {
    let mut prev = 1.0;
    for nest in 0..8 {
        let r = readability(30.0, nest as f64, 3.0, 8.0);
        assert!(r < prev);
        prev = r;
    }
}
