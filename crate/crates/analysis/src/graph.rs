//! Typed dependency graphs at class, file and package granularity.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::java::{StructuralModel, SuperRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    File,
    Class,
    Package,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Inherit,
    Invoke,
    Reference,
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeKind::Inherit => "inherit",
            EdgeKind::Invoke => "invoke",
            EdgeKind::Reference => "reference",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub kind: EdgeKind,
}

/// Directed dependency graph; `u -> v` means `u` depends on `v`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyGraph {
    pub granularity: Granularity,
    pub nodes: Vec<String>,
    /// Sorted and free of duplicates and self-edges.
    pub edges: Vec<Edge>,
}

impl DependencyGraph {
    pub fn new(granularity: Granularity, nodes: Vec<String>, edges: impl IntoIterator<Item = Edge>) -> Self {
        let set: BTreeSet<Edge> = edges.into_iter().filter(|e| e.from != e.to).collect();
        debug_assert!(set.iter().all(|e| e.from < nodes.len() && e.to < nodes.len()));
        Self { granularity, nodes, edges: set.into_iter().collect() }
    }

    /// Kind-less graph from an adjacency description (used by tests and synthetic inputs).
    pub fn from_adjacency(granularity: Granularity, n: usize, pairs: &[(usize, usize)]) -> Self {
        let nodes = (0..n).map(|i| i.to_string()).collect();
        let edges = pairs.iter().map(|&(from, to)| Edge { from, to, kind: EdgeKind::Reference });
        Self::new(granularity, nodes, edges)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Distinct successors of every node, ignoring edge kinds.
    pub fn adjacency(&self) -> Vec<BTreeSet<usize>> {
        let mut adj = vec![BTreeSet::new(); self.nodes.len()];
        for e in &self.edges {
            adj[e.from].insert(e.to);
        }
        adj
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.nodes.len()];
        for succ in self.adjacency() {
            for to in succ {
                deg[to] += 1;
            }
        }
        deg
    }

    /// Nodes with no incoming and no outgoing edges.
    pub fn isolated_nodes(&self) -> Vec<usize> {
        let mut touched = vec![false; self.nodes.len()];
        for e in &self.edges {
            touched[e.from] = true;
            touched[e.to] = true;
        }
        (0..self.nodes.len()).filter(|&i| !touched[i]).collect()
    }

    /// Induced subgraph on `keep` (node order preserved).
    pub fn subgraph(&self, keep: &[usize]) -> DependencyGraph {
        let index: BTreeMap<usize, usize> = keep.iter().enumerate().map(|(new, &old)| (old, new)).collect();
        let nodes = keep.iter().map(|&i| self.nodes[i].clone()).collect();
        let edges = self.edges.iter().filter_map(|e| {
            Some(Edge { from: *index.get(&e.from)?, to: *index.get(&e.to)?, kind: e.kind })
        });
        DependencyGraph::new(self.granularity, nodes, edges)
    }

    /// Strongly connected components, each sorted, listed by smallest member.
    pub fn sccs(&self) -> Vec<Vec<usize>> {
        let mut g: DiGraph<(), ()> = DiGraph::with_capacity(self.nodes.len(), self.edges.len());
        let idx: Vec<_> = (0..self.nodes.len()).map(|_| g.add_node(())).collect();
        for (from, succ) in self.adjacency().iter().enumerate() {
            for &to in succ {
                g.add_edge(idx[from], idx[to], ());
            }
        }
        let mut comps: Vec<Vec<usize>> = tarjan_scc(&g)
            .into_iter()
            .map(|c| {
                let mut v: Vec<usize> = c.into_iter().map(|n| n.index()).collect();
                v.sort_unstable();
                v
            })
            .collect();
        comps.sort();
        comps
    }

    /// Number of nodes reachable from each node, counting the node itself.
    pub fn reach_counts(&self) -> Vec<usize> {
        let adj = self.adjacency();
        let n = self.nodes.len();
        let mut counts = Vec::with_capacity(n);
        let mut seen = vec![usize::MAX; n];
        let mut queue = VecDeque::new();
        for start in 0..n {
            seen[start] = start;
            queue.push_back(start);
            let mut count = 0;
            while let Some(u) = queue.pop_front() {
                count += 1;
                for &v in &adj[u] {
                    if seen[v] != start {
                        seen[v] = start;
                        queue.push_back(v);
                    }
                }
            }
            counts.push(count);
        }
        counts
    }

    /// Edge list CSV `from,to,kind` with node names.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("from,to,kind\n");
        for e in &self.edges {
            out.push_str(&format!(
                "{},{},{}\n",
                csv_field(&self.nodes[e.from]),
                csv_field(&self.nodes[e.to]),
                e.kind
            ));
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Class-level dependencies: inheritance, resolved invocations and type references.
pub fn class_graph(model: &StructuralModel) -> DependencyGraph {
    let nodes = model.classes.iter().map(|c| c.qualified_name.clone()).collect();
    let mut edges = Vec::new();
    for id in 0..model.classes.len() {
        if let SuperRef::Internal(s) = model.superclass[id] {
            edges.push(Edge { from: id, to: s, kind: EdgeKind::Inherit });
        }
        for &i in &model.interfaces[id] {
            edges.push(Edge { from: id, to: i, kind: EdgeKind::Inherit });
        }
        let calls = model.calls[id].iter().flatten().chain(model.initializer_calls[id].iter());
        for call in calls {
            if let Some(t) = call.target_class {
                edges.push(Edge { from: id, to: t, kind: EdgeKind::Invoke });
            }
        }
        for &t in &model.type_deps[id] {
            edges.push(Edge { from: id, to: t, kind: EdgeKind::Reference });
        }
    }
    DependencyGraph::new(Granularity::Class, nodes, edges)
}

/// Project a class graph onto files or packages; self-edges disappear.
pub fn project(model: &StructuralModel, class_graph: &DependencyGraph, granularity: Granularity) -> DependencyGraph {
    match granularity {
        Granularity::Class => class_graph.clone(),
        Granularity::File => {
            let nodes = model.units.iter().map(|u| u.path.clone()).collect();
            let edges = class_graph.edges.iter().map(|e| Edge {
                from: model.class_unit[e.from],
                to: model.class_unit[e.to],
                kind: e.kind,
            });
            DependencyGraph::new(Granularity::File, nodes, edges)
        }
        Granularity::Package => {
            let (names, unit_pkg) = package_index(model);
            let edges = class_graph.edges.iter().map(|e| Edge {
                from: unit_pkg[model.class_unit[e.from]],
                to: unit_pkg[model.class_unit[e.to]],
                kind: e.kind,
            });
            DependencyGraph::new(Granularity::Package, names, edges)
        }
    }
}

/// Sorted package names and the package index of every unit.
pub fn package_index(model: &StructuralModel) -> (Vec<String>, Vec<usize>) {
    let names: Vec<String> = model
        .units
        .iter()
        .map(|u| u.package.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let unit_pkg = model
        .units
        .iter()
        .map(|u| names.binary_search(&u.package).expect("package collected above"))
        .collect();
    (names, unit_pkg)
}

/// Build the dependency graph of `model` at the requested granularity.
pub fn build_graph(model: &StructuralModel, granularity: Granularity) -> DependencyGraph {
    project(model, &class_graph(model), granularity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::java::parse_source;

    fn model(files: &[(&str, &str)]) -> StructuralModel {
        StructuralModel::build(files.iter().map(|(p, s)| parse_source(p, s).unwrap()).collect())
    }

    #[test]
    fn singleton_class_graph() {
        let m = model(&[("A.java", "class A {}")]);
        let g = build_graph(&m, Granularity::Class);
        assert_eq!(g.node_count(), 1);
        assert!(g.edges.is_empty());
    }

    #[test]
    fn extends_gives_inherit_edge() {
        let m = model(&[("A.java", "package p; class A extends B {}"), ("B.java", "package p; class B {}")]);
        let g = build_graph(&m, Granularity::Class);
        assert!(g.edges.contains(&Edge { from: 0, to: 1, kind: EdgeKind::Inherit }));
        assert!(g.edges.iter().all(|e| (e.from, e.to) == (0, 1)));
    }

    #[test]
    fn package_projection_drops_intra_package_cycle() {
        let m = model(&[
            ("A.java", "package p; class A { B b; }"),
            ("B.java", "package p; class B { C c; }"),
            ("C.java", "package p; class C { A a; }"),
        ]);
        let class = build_graph(&m, Granularity::Class);
        assert_eq!(class.edges.len(), 3);
        let pkg = build_graph(&m, Granularity::Package);
        assert_eq!(pkg.node_count(), 1);
        assert!(pkg.edges.is_empty());
        let file = build_graph(&m, Granularity::File);
        assert_eq!(file.node_count(), 3);
        assert_eq!(file.edges.len(), 3);
    }

    #[test]
    fn file_graph_drops_nested_class_self_edges() {
        let m = model(&[("A.java", "class A { static class In { A outer; } In in; }")]);
        let class = build_graph(&m, Granularity::Class);
        assert_eq!(class.edges.len(), 2);
        assert!(build_graph(&m, Granularity::File).edges.is_empty());
    }

    #[test]
    fn csv_dump() {
        let g = DependencyGraph::from_adjacency(Granularity::File, 2, &[(0, 1)]);
        assert_eq!(g.to_csv(), "from,to,kind\n0,1,reference\n");
    }

    #[test]
    fn reach_counts_on_chain() {
        let g = DependencyGraph::from_adjacency(Granularity::File, 4, &[(0, 1), (1, 2), (2, 3)]);
        assert_eq!(g.reach_counts(), vec![4, 3, 2, 1]);
    }
}
