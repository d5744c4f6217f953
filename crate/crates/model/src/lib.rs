//! Feature matrices, from-scratch learners, feature selection and
//! leave-one-out evaluation.

pub mod data;
pub mod eval;
pub mod learners;
pub mod select;
pub mod smote;
pub mod stats;
pub mod synth;

pub use data::{FeatureMatrix, Standardizer, Task};
pub use learners::{Family, Hyper, ModelSpec, TrainedModel};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("missing features: {}", .0.join(", "))]
    MissingFeatures(Vec<String>),
    #[error("classification target has a single class")]
    SingleClass,
    #[error("classification target must be 0/1, found {0}")]
    NotBinary(f64),
    #[error("schema mismatch: model trained on {expected} features, got {found}")]
    SchemaMismatch { expected: usize, found: usize },
    #[error("invalid hyperparameter: {0}")]
    InvalidHyper(String),
    #[error("{family} does not support {task}")]
    Unsupported { family: Family, task: Task },
    #[error("SMOTE cannot interpolate with {0} minority sample(s)")]
    CannotInterpolate(usize),
    #[error("empty input: {0}")]
    Empty(String),
    #[error("vote needs exactly 6 selector results, got {0}")]
    SelectorCount(usize),
    #[error("task mismatch: {0}")]
    TaskMismatch(String),
    #[error("zero-variance truth: R2 undefined")]
    ZeroVariance,
    #[error("unsupported model format version {0}")]
    Version(u32),
    #[error("model json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Child seed `k` of `base` (splitmix64 finaliser), used for per-tree and per-fold streams.
pub fn derive_seed(base: u64, k: u64) -> u64 {
    let mut z = base
        .wrapping_add(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(k.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ() {
        let s: std::collections::BTreeSet<u64> = (0..1000).map(|k| derive_seed(7, k)).collect();
        assert_eq!(s.len(), 1000);
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }
}
