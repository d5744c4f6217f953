//! Architecture-level metrics over the file dependency graph.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{class_graph, package_index, project, DependencyGraph, Granularity};
use crate::java::{ClassId, StructuralModel, SuperRef};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SystemMetricsError {
    #[error("empty system")]
    EmptySystem,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemMetrics {
    pub num_files: u32,
    pub propagation_cost: f64,
    pub propagation_cost_excl_isolated: f64,
    pub isolated_file_count: u32,
    pub decoupling_level: f64,
    pub decoupling_level_excl_isolated: f64,
    pub independence_level: f64,
    pub clique_count: u32,
    pub clique_file_count: u32,
    pub unhealthy_inheritance_count: u32,
    pub unhealthy_inheritance_file_count: u32,
    pub package_cycle_count: u32,
    pub package_cycle_file_count: u32,
    pub total_antipattern_count: u32,
    pub total_antipattern_files: u32,
}

pub const SYSTEM_METRICS: &[&str] = &[
    "num_files",
    "propagation_cost",
    "propagation_cost_excl_isolated",
    "isolated_file_count",
    "decoupling_level",
    "decoupling_level_excl_isolated",
    "independence_level",
    "clique_count",
    "clique_file_count",
    "unhealthy_inheritance_count",
    "unhealthy_inheritance_file_count",
    "package_cycle_count",
    "package_cycle_file_count",
    "total_antipattern_count",
    "total_antipattern_files",
];

impl SystemMetrics {
    /// Values in [`SYSTEM_METRICS`] order.
    pub fn values(&self) -> Vec<f64> {
        vec![
            self.num_files as f64,
            self.propagation_cost,
            self.propagation_cost_excl_isolated,
            self.isolated_file_count as f64,
            self.decoupling_level,
            self.decoupling_level_excl_isolated,
            self.independence_level,
            self.clique_count as f64,
            self.clique_file_count as f64,
            self.unhealthy_inheritance_count as f64,
            self.unhealthy_inheritance_file_count as f64,
            self.package_cycle_count as f64,
            self.package_cycle_file_count as f64,
            self.total_antipattern_count as f64,
            self.total_antipattern_files as f64,
        ]
    }
}

/// Fraction of ordered node pairs (i, j) with j reachable from i, reflexive pairs included.
pub fn propagation_cost(g: &DependencyGraph) -> Result<f64, SystemMetricsError> {
    let n = g.node_count();
    if n == 0 {
        return Err(SystemMetricsError::EmptySystem);
    }
    let reached: usize = g.reach_counts().iter().sum();
    Ok(reached as f64 / (n * n) as f64)
}

/// SCCs with at least two members.
pub fn cliques(g: &DependencyGraph) -> Vec<Vec<usize>> {
    g.sccs().into_iter().filter(|c| c.len() >= 2).collect()
}

/// SCC-based decoupling level: modules larger than `max(1, ceil(0.05 N))` are penalised.
pub fn decoupling_level(g: &DependencyGraph) -> Result<f64, SystemMetricsError> {
    let n = g.node_count();
    if n == 0 {
        return Err(SystemMetricsError::EmptySystem);
    }
    let t = ((0.05 * n as f64).ceil() as usize).max(1);
    let dl = g
        .sccs()
        .iter()
        .map(|m| {
            let s = m.len();
            let weight = if s <= t { 1.0 } else { t as f64 / s as f64 };
            s as f64 / n as f64 * weight
        })
        .sum::<f64>();
    Ok(dl.min(1.0))
}

/// Share of nodes that nothing depends on.
pub fn independence_level(g: &DependencyGraph) -> Result<f64, SystemMetricsError> {
    let n = g.node_count();
    if n == 0 {
        return Err(SystemMetricsError::EmptySystem);
    }
    let free = g.in_degrees().iter().filter(|&&d| d == 0).count();
    Ok(free as f64 / n as f64)
}

/// Unhealthy inheritance instances as sets of involved classes.
///
/// A parent depending on one of its direct subclasses is one instance;
/// a client depending on both a parent and one of its subclasses is another.
pub fn unhealthy_inheritance(model: &StructuralModel, class_graph: &DependencyGraph) -> Vec<BTreeSet<ClassId>> {
    let adj = class_graph.adjacency();
    let n = model.classes.len();
    let pairs: Vec<(ClassId, ClassId)> = (0..n)
        .filter_map(|child| match model.superclass[child] {
            SuperRef::Internal(p) if p != child => Some((p, child)),
            _ => None,
        })
        .collect();

    let mut instances = Vec::new();
    for &(parent, child) in &pairs {
        if adj[parent].contains(&child) {
            instances.push(BTreeSet::from([parent, child]));
        }
    }
    for (client, deps) in adj.iter().enumerate() {
        for &(parent, child) in &pairs {
            if client != parent && client != child && deps.contains(&parent) && deps.contains(&child) {
                instances.push(BTreeSet::from([client, parent, child]));
            }
        }
    }
    instances
}

/// Package-level SCCs (size ≥ 2) and the files whose package lies in one.
pub fn package_cycles(model: &StructuralModel, package_graph: &DependencyGraph) -> (u32, BTreeSet<usize>) {
    let (_, unit_pkg) = package_index(model);
    let cycles = cliques(package_graph);
    let in_cycle: BTreeSet<usize> = cycles.iter().flatten().copied().collect();
    let files = (0..model.units.len()).filter(|u| in_cycle.contains(&unit_pkg[*u])).collect();
    (cycles.len() as u32, files)
}

/// The full set of system metrics for one app.
pub fn system_metrics(model: &StructuralModel) -> Result<SystemMetrics, SystemMetricsError> {
    let classes = class_graph(model);
    let files = project(model, &classes, Granularity::File);
    let packages = project(model, &classes, Granularity::Package);
    system_metrics_from(model, &classes, &files, &packages)
}

pub fn system_metrics_from(
    model: &StructuralModel,
    classes: &DependencyGraph,
    files: &DependencyGraph,
    packages: &DependencyGraph,
) -> Result<SystemMetrics, SystemMetricsError> {
    let n = files.node_count();
    if n == 0 {
        return Err(SystemMetricsError::EmptySystem);
    }
    let isolated = files.isolated_nodes();
    let connected: Vec<usize> = {
        let iso: BTreeSet<usize> = isolated.iter().copied().collect();
        (0..n).filter(|i| !iso.contains(i)).collect()
    };
    // with every file isolated there is no subgraph left; fall back to the full graph
    let core = if connected.is_empty() { files.clone() } else { files.subgraph(&connected) };

    let clique_sets = cliques(files);
    let clique_files: BTreeSet<usize> = clique_sets.iter().flatten().copied().collect();

    let ui = unhealthy_inheritance(model, classes);
    let ui_files: BTreeSet<usize> = ui.iter().flatten().map(|&c| model.class_unit[c]).collect();

    let (pkg_cycles, pkg_files) = package_cycles(model, packages);

    let all_files: BTreeSet<usize> =
        clique_files.iter().chain(ui_files.iter()).chain(pkg_files.iter()).copied().collect();

    let clique_count = clique_sets.len() as u32;
    let ui_count = ui.len() as u32;
    Ok(SystemMetrics {
        num_files: n as u32,
        propagation_cost: propagation_cost(files)?,
        propagation_cost_excl_isolated: propagation_cost(&core)?,
        isolated_file_count: isolated.len() as u32,
        decoupling_level: decoupling_level(files)?,
        decoupling_level_excl_isolated: decoupling_level(&core)?,
        independence_level: independence_level(files)?,
        clique_count,
        clique_file_count: clique_files.len() as u32,
        unhealthy_inheritance_count: ui_count,
        unhealthy_inheritance_file_count: ui_files.len() as u32,
        package_cycle_count: pkg_cycles,
        package_cycle_file_count: pkg_files.len() as u32,
        total_antipattern_count: clique_count + ui_count + pkg_cycles,
        total_antipattern_files: all_files.len() as u32,
    })
}
