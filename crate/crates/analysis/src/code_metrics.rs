//! Class-level and method-level metrics in the CK tradition, plus a readability proxy.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::graph::{class_graph, DependencyGraph};
use crate::java::{ClassId, ClassKind, MethodId, MethodInfo, Modifiers, StructuralModel, SuperRef};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetricsRow {
    pub qualified_name: String,
    pub kind: ClassKind,
    pub cbo: u32,
    pub wmc: u32,
    pub dit: u32,
    pub noc: u32,
    pub rfc: u32,
    pub lcom: u32,
    pub total_methods_qty: u32,
    pub static_methods_qty: u32,
    pub public_methods_qty: u32,
    pub private_methods_qty: u32,
    pub protected_methods_qty: u32,
    pub default_methods_qty: u32,
    pub visible_methods_qty: u32,
    pub abstract_methods_qty: u32,
    pub final_methods_qty: u32,
    pub total_fields_qty: u32,
    pub protected_fields_qty: u32,
    pub default_fields_qty: u32,
    pub final_fields_qty: u32,
    pub nosi: u32,
    pub loc: u32,
    pub return_qty: u32,
    pub loop_qty: u32,
    pub comparisons_qty: u32,
    pub try_catch_qty: u32,
    pub parenthesized_qty: u32,
    pub string_literals_qty: u32,
    pub numbers_qty: u32,
    pub assignments_qty: u32,
    pub math_ops_qty: u32,
    pub variables_qty: u32,
    pub max_nested_blocks: u32,
    pub anonymous_classes_qty: u32,
    pub inner_classes_qty: u32,
    pub lambdas_qty: u32,
    pub unique_words_qty: u32,
    pub modifiers_code: u32,
    pub log_statements_qty: u32,
}

/// Class metrics that are aggregated into features (`modifiers_code` is a bitmask and is left out).
pub const CLASS_METRICS: &[&str] = &[
    "cbo", "wmc", "dit", "noc", "rfc", "lcom", "total_methods_qty", "static_methods_qty",
    "public_methods_qty", "private_methods_qty", "protected_methods_qty", "default_methods_qty",
    "visible_methods_qty", "abstract_methods_qty", "final_methods_qty", "total_fields_qty",
    "protected_fields_qty", "default_fields_qty", "final_fields_qty", "nosi", "loc", "return_qty",
    "loop_qty", "comparisons_qty", "try_catch_qty", "parenthesized_qty", "string_literals_qty",
    "numbers_qty", "assignments_qty", "math_ops_qty", "variables_qty", "max_nested_blocks",
    "anonymous_classes_qty", "inner_classes_qty", "lambdas_qty", "unique_words_qty",
    "log_statements_qty",
];

impl ClassMetricsRow {
    /// Values in [`CLASS_METRICS`] order.
    pub fn values(&self) -> Vec<f64> {
        [
            self.cbo, self.wmc, self.dit, self.noc, self.rfc, self.lcom, self.total_methods_qty,
            self.static_methods_qty, self.public_methods_qty, self.private_methods_qty,
            self.protected_methods_qty, self.default_methods_qty, self.visible_methods_qty,
            self.abstract_methods_qty, self.final_methods_qty, self.total_fields_qty,
            self.protected_fields_qty, self.default_fields_qty, self.final_fields_qty, self.nosi,
            self.loc, self.return_qty, self.loop_qty, self.comparisons_qty, self.try_catch_qty,
            self.parenthesized_qty, self.string_literals_qty, self.numbers_qty,
            self.assignments_qty, self.math_ops_qty, self.variables_qty, self.max_nested_blocks,
            self.anonymous_classes_qty, self.inner_classes_qty, self.lambdas_qty,
            self.unique_words_qty, self.log_statements_qty,
        ]
        .iter()
        .map(|&v| v as f64)
        .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodMetricsRow {
    pub class: String,
    pub signature: String,
    pub fan_in: u32,
    pub fan_out: u32,
    pub loc: u32,
    pub return_qty: u32,
    pub variables_qty: u32,
    pub parameters_qty: u32,
    pub methods_invoked_qty: u32,
    pub methods_invoked_local_qty: u32,
    pub methods_invoked_indirect_local_qty: u32,
    pub loop_qty: u32,
    pub comparisons_qty: u32,
    pub try_catch_qty: u32,
    pub parenthesized_qty: u32,
    pub assignments_qty: u32,
    pub math_ops_qty: u32,
    pub max_nested_blocks: u32,
    pub lambdas_qty: u32,
    pub unique_words_qty: u32,
    pub modifiers_code: u32,
    pub log_statements_qty: u32,
    pub wmc: u32,
    pub readability: f64,
}

pub const METHOD_METRICS: &[&str] = &[
    "fan_in", "fan_out", "loc", "return_qty", "variables_qty", "parameters_qty",
    "methods_invoked_qty", "methods_invoked_local_qty", "methods_invoked_indirect_local_qty",
    "loop_qty", "comparisons_qty", "try_catch_qty", "parenthesized_qty", "assignments_qty",
    "math_ops_qty", "max_nested_blocks", "lambdas_qty", "unique_words_qty", "log_statements_qty",
    "wmc", "readability",
];

impl MethodMetricsRow {
    /// Values in [`METHOD_METRICS`] order.
    pub fn values(&self) -> Vec<f64> {
        let mut v: Vec<f64> = [
            self.fan_in, self.fan_out, self.loc, self.return_qty, self.variables_qty,
            self.parameters_qty, self.methods_invoked_qty, self.methods_invoked_local_qty,
            self.methods_invoked_indirect_local_qty, self.loop_qty, self.comparisons_qty,
            self.try_catch_qty, self.parenthesized_qty, self.assignments_qty, self.math_ops_qty,
            self.max_nested_blocks, self.lambdas_qty, self.unique_words_qty,
            self.log_statements_qty, self.wmc,
        ]
        .iter()
        .map(|&x| x as f64)
        .collect();
        v.push(self.readability);
        v
    }
}

/// McCabe complexity; methods without a body count as 1.
pub fn cyclomatic(method: &MethodInfo) -> u32 {
    if method.has_body {
        method.cyclomatic()
    } else {
        1
    }
}

/// Logistic readability proxy, strictly decreasing in each of its four drivers.
pub fn readability(mean_line_len: f64, max_nesting: f64, cyclomatic: f64, mean_identifier_len: f64) -> f64 {
    let z = 0.05 * (mean_line_len - 45.0)
        + 0.4 * (max_nesting - 2.0)
        + 0.3 * ((1.0 + cyclomatic).log2() - 1.0)
        + 0.05 * (mean_identifier_len - 10.0);
    1.0 / (1.0 + z.exp())
}

/// Pairwise LCOM over methods given the set of fields each one touches.
pub fn lcom(field_sets: &[BTreeSet<String>]) -> u32 {
    let (mut disjoint, mut sharing) = (0i64, 0i64);
    for i in 0..field_sets.len() {
        for j in i + 1..field_sets.len() {
            if field_sets[i].is_disjoint(&field_sets[j]) {
                disjoint += 1;
            } else {
                sharing += 1;
            }
        }
    }
    (disjoint - sharing).max(0) as u32
}

/// Corpus-wide facts shared by all per-class and per-method computations.
pub struct CodeMetricsContext<'m> {
    model: &'m StructuralModel,
    class_adj: Vec<BTreeSet<usize>>,
    children: Vec<u32>,
    nested: Vec<(u32, u32)>,
    callers: BTreeMap<MethodId, BTreeSet<MethodId>>,
    callees: BTreeMap<MethodId, BTreeSet<MethodId>>,
}

impl<'m> CodeMetricsContext<'m> {
    pub fn new(model: &'m StructuralModel) -> Self {
        Self::with_class_graph(model, &class_graph(model))
    }

    pub fn with_class_graph(model: &'m StructuralModel, graph: &DependencyGraph) -> Self {
        let n = model.classes.len();
        let mut children = vec![0; n];
        for s in &model.superclass {
            if let SuperRef::Internal(p) = s {
                children[*p] += 1;
            }
        }
        let mut nested = vec![(0, 0); n];
        for (id, enc) in model.enclosing.iter().enumerate() {
            if let Some(e) = enc {
                if model.classes[id].kind == ClassKind::Anonymous {
                    nested[*e].0 += 1;
                } else {
                    nested[*e].1 += 1;
                }
            }
        }
        let mut callers: BTreeMap<MethodId, BTreeSet<MethodId>> = BTreeMap::new();
        let mut callees: BTreeMap<MethodId, BTreeSet<MethodId>> = BTreeMap::new();
        for (from, to) in model.call_edges() {
            callers.entry(to).or_default().insert(from);
            callees.entry(from).or_default().insert(to);
        }
        Self { model, class_adj: graph.adjacency(), children, nested, callers, callees }
    }

    pub fn class_metrics(&self, id: ClassId) -> ClassMetricsRow {
        let m = self.model;
        let class = &m.classes[id];
        let interface = class.kind == ClassKind::Interface;
        let count = |f: &dyn Fn(&MethodInfo) -> bool| class.methods.iter().filter(|x| f(x)).count() as u32;

        let field_names: BTreeSet<&str> = class.fields.iter().map(|f| f.name.as_str()).collect();
        let field_sets: Vec<BTreeSet<String>> = class
            .methods
            .iter()
            .filter(|x| !x.is_constructor)
            .map(|x| {
                x.accessed_names
                    .iter()
                    .filter(|n| field_names.contains(n.as_str()))
                    .cloned()
                    .collect()
            })
            .collect();

        let invoked: BTreeSet<(&str, usize)> = class
            .methods
            .iter()
            .flat_map(|x| x.invocations.iter())
            .chain(class.initializer_invocations.iter())
            .map(|i| (i.name.as_str(), i.arg_count))
            .collect();

        let calls = m.calls[id].iter().flatten().chain(m.initializer_calls[id].iter());
        let nosi = calls
            .filter(|c| c.target_method.is_some_and(|t| m.method(t).modifiers.is_static()))
            .count() as u32;

        let public = |x: &MethodInfo| interface && !x.modifiers.is_private() || x.modifiers.is_public();
        let s = &class.stats;
        let (anonymous, inner) = self.nested[id];
        ClassMetricsRow {
            qualified_name: class.qualified_name.clone(),
            kind: class.kind,
            cbo: self.class_adj[id].len() as u32,
            wmc: class.methods.iter().map(cyclomatic).sum(),
            dit: m.dit(id),
            noc: self.children[id],
            rfc: class.methods.len() as u32 + invoked.len() as u32,
            lcom: lcom(&field_sets),
            total_methods_qty: class.methods.len() as u32,
            static_methods_qty: count(&|x| x.modifiers.is_static()),
            public_methods_qty: count(&public),
            private_methods_qty: count(&|x| x.modifiers.is_private()),
            protected_methods_qty: count(&|x| x.modifiers.is_protected()),
            default_methods_qty: count(&|x| !public(x) && x.modifiers.is_default_access()),
            visible_methods_qty: count(&|x| !x.modifiers.is_private()),
            abstract_methods_qty: count(&|x| x.modifiers.is_abstract()),
            final_methods_qty: count(&|x| x.modifiers.is_final()),
            total_fields_qty: class.fields.len() as u32,
            protected_fields_qty: class.fields.iter().filter(|f| f.modifiers.is_protected()).count() as u32,
            default_fields_qty: class
                .fields
                .iter()
                .filter(|f| !interface && f.modifiers.is_default_access())
                .count() as u32,
            final_fields_qty: class
                .fields
                .iter()
                .filter(|f| interface || f.modifiers.is_final())
                .count() as u32,
            nosi,
            loc: class.loc,
            return_qty: s.return_count,
            loop_qty: s.loop_count,
            comparisons_qty: s.comparison_count,
            try_catch_qty: s.try_catch_count,
            parenthesized_qty: s.parenthesized_expr_count,
            string_literals_qty: s.string_literal_count,
            numbers_qty: s.number_literal_count,
            assignments_qty: s.assignment_count,
            math_ops_qty: s.math_op_count,
            variables_qty: s.variable_decl_count,
            max_nested_blocks: s.max_nesting,
            anonymous_classes_qty: anonymous,
            inner_classes_qty: inner,
            lambdas_qty: s.lambda_count,
            unique_words_qty: s.unique_word_count,
            modifiers_code: class.modifiers.0,
            log_statements_qty: s.log_statement_count,
        }
    }

    /// Same-class callees of `id` reached directly and only transitively.
    pub fn local_callees(&self, id: MethodId) -> (BTreeSet<MethodId>, BTreeSet<MethodId>) {
        let same_class = |x: &MethodId| x.class == id.class;
        let direct: BTreeSet<MethodId> = self
            .callees
            .get(&id)
            .map(|c| c.iter().copied().filter(same_class).collect())
            .unwrap_or_default();
        let mut seen: BTreeSet<MethodId> = direct.clone();
        seen.insert(id);
        let mut queue: VecDeque<MethodId> = direct.iter().copied().collect();
        let mut indirect = BTreeSet::new();
        while let Some(u) = queue.pop_front() {
            for v in self.callees.get(&u).into_iter().flatten().filter(|v| same_class(v)) {
                if seen.insert(*v) {
                    indirect.insert(*v);
                    queue.push_back(*v);
                }
            }
        }
        (direct, indirect)
    }

    pub fn method_metrics(&self, id: MethodId) -> MethodMetricsRow {
        let class = &self.model.classes[id.class];
        let method = &class.methods[id.index];
        let s = &method.body_stats;
        let (local, indirect) = self.local_callees(id);
        let invoked: BTreeSet<(&str, usize)> =
            method.invocations.iter().map(|i| (i.name.as_str(), i.arg_count)).collect();
        let cc = cyclomatic(method);
        let mut modifiers = method.modifiers;
        if class.kind == ClassKind::Interface && !modifiers.is_private() {
            modifiers.insert(Modifiers::PUBLIC);
        }
        MethodMetricsRow {
            class: class.qualified_name.clone(),
            signature: method.signature(),
            fan_in: self.callers.get(&id).map_or(0, |c| c.len()) as u32,
            fan_out: self.callees.get(&id).map_or(0, |c| c.len()) as u32,
            loc: method.loc,
            return_qty: s.return_count,
            variables_qty: s.variable_decl_count,
            parameters_qty: method.parameters.len() as u32,
            methods_invoked_qty: invoked.len() as u32,
            methods_invoked_local_qty: local.len() as u32,
            methods_invoked_indirect_local_qty: indirect.len() as u32,
            loop_qty: s.loop_count,
            comparisons_qty: s.comparison_count,
            try_catch_qty: s.try_catch_count,
            parenthesized_qty: s.parenthesized_expr_count,
            assignments_qty: s.assignment_count,
            math_ops_qty: s.math_op_count,
            max_nested_blocks: s.max_nesting,
            lambdas_qty: s.lambda_count,
            unique_words_qty: s.unique_word_count,
            modifiers_code: modifiers.0,
            log_statements_qty: s.log_statement_count,
            wmc: cc,
            readability: readability(
                s.mean_line_length(),
                s.max_nesting as f64,
                cc as f64,
                s.mean_identifier_length(),
            ),
        }
    }

    /// One row per class, then one row per non-constructor method.
    pub fn all(&self) -> (Vec<ClassMetricsRow>, Vec<MethodMetricsRow>) {
        let classes = (0..self.model.classes.len()).map(|c| self.class_metrics(c)).collect();
        let methods = self
            .model
            .method_ids()
            .filter(|&id| !self.model.method(id).is_constructor)
            .map(|id| self.method_metrics(id))
            .collect();
        (classes, methods)
    }
}

/// Class and method rows for a whole model.
pub fn code_metrics(model: &StructuralModel) -> (Vec<ClassMetricsRow>, Vec<MethodMetricsRow>) {
    CodeMetricsContext::new(model).all()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::java::parse_source;

    fn model(files: &[(&str, &str)]) -> StructuralModel {
        StructuralModel::build(files.iter().map(|(p, s)| parse_source(p, s).unwrap()).collect())
    }

    fn method<'a>(rows: &'a [MethodMetricsRow], sig: &str) -> &'a MethodMetricsRow {
        rows.iter().find(|r| r.signature == sig).unwrap()
    }

    #[test]
    fn cyclomatic_examples() {
        let m = model(&[(
            "A.java",
            "abstract class A { void e() {} void f(int x, int y) { if (x > 0 && y > 0) {} }
             void g(int x) { switch (x) { case 1: break; case 2: break; case 3: break; default: break; } }
             abstract void h(); }",
        )]);
        let ms = &m.classes[0].methods;
        assert_eq!(ms.iter().map(cyclomatic).collect::<Vec<_>>(), vec![1, 3, 4, 1]);
    }

    #[test]
    fn readability_reference_points() {
        assert!((readability(45.0, 2.0, 1.0, 10.0) - 0.5).abs() < 1e-12);
        let r = readability(20.0, 0.0, 1.0, 5.0);
        // z = -1.25 - 0.8 + 0 - 0.25
        assert!((r - 1.0 / (1.0 + (-2.3f64).exp())).abs() < 1e-12);
        assert!(readability(20.0, 4.0, 1.0, 5.0) < readability(20.0, 2.0, 1.0, 5.0));
    }

    #[test]
    fn lcom_examples() {
        let m = model(&[("A.java", "class A { void a() {} void b() {} }")]);
        assert_eq!(code_metrics(&m).0[0].lcom, 1);
        let m = model(&[("A.java", "class A { int x; void a() { x = 1; } void b() { x++; } }")]);
        assert_eq!(code_metrics(&m).0[0].lcom, 0);
    }

    #[test]
    fn class_level_basics() {
        let m = model(&[
            ("A.java", "class A {}"),
            ("B.java", "class B extends android.app.Activity {}"),
        ]);
        let (rows, _) = code_metrics(&m);
        assert_eq!((rows[0].cbo, rows[0].rfc, rows[0].noc, rows[0].dit), (0, 0, 0, 1));
        assert_eq!(rows[1].dit, 2);
    }

    #[test]
    fn local_and_indirect_callees() {
        let m = model(&[("A.java", "class A { void a() { b(); } void b() { c(); } void c() {} }")]);
        let (_, rows) = code_metrics(&m);
        let a = method(&rows, "a()");
        assert_eq!((a.methods_invoked_local_qty, a.methods_invoked_indirect_local_qty), (1, 1));
        assert_eq!((a.fan_out, a.fan_in), (1, 0));
        assert_eq!(method(&rows, "c()").fan_out, 0);
        assert_eq!(method(&rows, "c()").methods_invoked_indirect_local_qty, 0);
    }

    #[test]
    fn fan_in_counts_distinct_callers() {
        let m = model(&[
            ("T.java", "class T { static void t() {} }"),
            ("U.java", "class U { void a() { T.t(); T.t(); } void b() { T.t(); } void c() { T.t(); } }"),
        ]);
        let (classes, rows) = code_metrics(&m);
        assert_eq!(method(&rows, "t()").fan_in, 3);
        assert_eq!(classes[1].nosi, 4);
        assert_eq!(classes[1].cbo, 1);
    }

    #[test]
    fn constructors_excluded_from_method_rows_but_in_wmc() {
        let m = model(&[("A.java", "class A { A() { if (true) {} } void f() {} }")]);
        let (classes, rows) = code_metrics(&m);
        assert_eq!(rows.len(), 1);
        assert_eq!(classes[0].wmc, 3);
        assert_eq!(classes[0].total_methods_qty, 2);
        assert_eq!(classes[0].rfc, 2);
    }

    #[test]
    fn nested_class_counts() {
        let m = model(&[(
            "A.java",
            "class A { class In {} interface I {} void f() { Runnable r = new Runnable() { public void run() {} }; } }",
        )]);
        let (rows, _) = code_metrics(&m);
        assert_eq!((rows[0].anonymous_classes_qty, rows[0].inner_classes_qty), (1, 2));
    }

    #[test]
    fn values_match_names() {
        let m = model(&[("A.java", "class A { void f() {} }")]);
        let (c, mr) = code_metrics(&m);
        assert_eq!(c[0].values().len(), CLASS_METRICS.len());
        assert_eq!(mr[0].values().len(), METHOD_METRICS.len());
    }
}
