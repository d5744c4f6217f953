//! Static analysis of Android app source trees: Java structural model,
//! dependency graphs, code and system metrics, and implementation smells.

pub mod code_metrics;
pub mod graph;
pub mod java;
pub mod loc;
pub mod smells;
pub mod system_metrics;
pub mod words;
