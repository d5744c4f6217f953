//! Threshold and graph based detectors for a subset of implementation,
//! design and architecture smells.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::code_metrics::cyclomatic;
use crate::graph::DependencyGraph;
use crate::java::{ClassKind, StructuralModel};
use crate::system_metrics::cliques;

/// Column names, in output order.
pub const SMELLS: [&str; 12] = [
    "long_method",
    "complex_method",
    "long_parameter_list",
    "long_statement",
    "long_identifier",
    "magic_number",
    "empty_catch_clause",
    "missing_default",
    "cyclic_dependency",
    "insufficient_modularization",
    "god_component",
    "deep_hierarchy",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmellConfig {
    pub long_method_loc: u32,
    pub complex_method_cc: u32,
    pub long_param_list: u32,
    pub long_statement_chars: u32,
    pub long_identifier_chars: u32,
    pub magic_number_whitelist: Vec<f64>,
    pub insufficient_modularization_class_loc: u32,
    pub insufficient_modularization_public_methods: u32,
    pub insufficient_modularization_wmc: u32,
    pub god_component_package_loc: u32,
    pub god_component_class_count: u32,
    pub deep_hierarchy_dit: u32,
}

impl Default for SmellConfig {
    fn default() -> Self {
        Self {
            long_method_loc: 100,
            complex_method_cc: 8,
            long_param_list: 5,
            long_statement_chars: 120,
            long_identifier_chars: 30,
            magic_number_whitelist: vec![-1.0, 0.0, 1.0, 2.0],
            insufficient_modularization_class_loc: 1000,
            insufficient_modularization_public_methods: 30,
            insufficient_modularization_wmc: 100,
            god_component_package_loc: 27000,
            god_component_class_count: 30,
            deep_hierarchy_dit: 6,
        }
    }
}

impl SmellConfig {
    /// Names of thresholds that are not strictly positive.
    pub fn invalid_thresholds(&self) -> Vec<&'static str> {
        let checks = [
            ("long_method_loc", self.long_method_loc),
            ("complex_method_cc", self.complex_method_cc),
            ("long_param_list", self.long_param_list),
            ("long_statement_chars", self.long_statement_chars),
            ("long_identifier_chars", self.long_identifier_chars),
            ("insufficient_modularization_class_loc", self.insufficient_modularization_class_loc),
            ("insufficient_modularization_public_methods", self.insufficient_modularization_public_methods),
            ("insufficient_modularization_wmc", self.insufficient_modularization_wmc),
            ("god_component_package_loc", self.god_component_package_loc),
            ("god_component_class_count", self.god_component_class_count),
            ("deep_hierarchy_dit", self.deep_hierarchy_dit),
        ];
        checks.iter().filter(|(_, v)| *v == 0).map(|(k, _)| *k).collect()
    }

    /// One-line `key=value` summary for output headers.
    pub fn describe(&self) -> String {
        let wl: Vec<String> = self.magic_number_whitelist.iter().map(|v| v.to_string()).collect();
        format!(
            "long_method_loc={} complex_method_cc={} long_param_list={} long_statement_chars={} \
             long_identifier_chars={} magic_number_whitelist={} insufficient_modularization=({},{},{}) \
             god_component=({},{}) deep_hierarchy_dit={}",
            self.long_method_loc,
            self.complex_method_cc,
            self.long_param_list,
            self.long_statement_chars,
            self.long_identifier_chars,
            wl.join("|"),
            self.insufficient_modularization_class_loc,
            self.insufficient_modularization_public_methods,
            self.insufficient_modularization_wmc,
            self.god_component_package_loc,
            self.god_component_class_count,
            self.deep_hierarchy_dit,
        )
    }
}

/// Instance count per smell; always holds exactly the [`SMELLS`] keys.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmellReport {
    pub counts: BTreeMap<String, u32>,
}

impl SmellReport {
    pub fn get(&self, smell: &str) -> u32 {
        self.counts.get(smell).copied().unwrap_or(0)
    }

    /// Counts in [`SMELLS`] order.
    pub fn values(&self) -> Vec<f64> {
        SMELLS.iter().map(|s| self.get(s) as f64).collect()
    }
}

/// Run all detectors. `class_graph` must be the class-granularity graph of `model`.
pub fn detect_smells(model: &StructuralModel, class_graph: &DependencyGraph, cfg: &SmellConfig) -> SmellReport {
    let mut counts: BTreeMap<&str, u32> = SMELLS.iter().map(|s| (*s, 0)).collect();
    let mut bump = |k: &'static str, by: usize| *counts.get_mut(k).expect("known smell") += by as u32;

    for (id, class) in model.classes.iter().enumerate() {
        let facts = &class.smell_facts;
        for m in &class.methods {
            bump("long_method", usize::from(m.loc > cfg.long_method_loc));
            bump("complex_method", usize::from(cyclomatic(m) > cfg.complex_method_cc));
            bump("long_parameter_list", usize::from(m.parameters.len() as u32 > cfg.long_param_list));
        }
        bump("long_statement", facts.statement_lengths.iter().filter(|&&l| l > cfg.long_statement_chars).count());
        bump(
            "long_identifier",
            facts.declared_names.iter().filter(|n| n.chars().count() as u32 > cfg.long_identifier_chars).count(),
        );
        bump(
            "magic_number",
            facts
                .numeric_literals
                .iter()
                .filter(|v| !cfg.magic_number_whitelist.iter().any(|w| w == *v))
                .count(),
        );
        bump("empty_catch_clause", facts.empty_catch_count as usize);
        bump("missing_default", facts.switch_without_default_count as usize);

        let public = class.methods.iter().filter(|m| m.modifiers.is_public()).count() as u32;
        let wmc: u32 = class.methods.iter().map(cyclomatic).sum();
        let too_big = class.loc > cfg.insufficient_modularization_class_loc
            || public > cfg.insufficient_modularization_public_methods
            || wmc > cfg.insufficient_modularization_wmc;
        bump("insufficient_modularization", usize::from(too_big));
        bump("deep_hierarchy", usize::from(model.dit(id) > cfg.deep_hierarchy_dit));
    }

    bump("cyclic_dependency", cliques(class_graph).len());

    // packages: (loc, named types)
    let mut packages: BTreeMap<&str, (u64, u32)> = BTreeMap::new();
    for unit in &model.units {
        packages.entry(unit.package.as_str()).or_default().0 += unit.loc as u64;
    }
    for class in &model.classes {
        if class.kind != ClassKind::Anonymous {
            packages.entry(class.package.as_str()).or_default().1 += 1;
        }
    }
    let god = packages
        .values()
        .filter(|(loc, n)| *loc > cfg.god_component_package_loc as u64 || *n > cfg.god_component_class_count)
        .count();
    bump("god_component", god);

    SmellReport { counts: counts.into_iter().map(|(k, v)| (k.to_string(), v)).collect() }
}
