//! Synthetic feature matrices with a known linear signal.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::FeatureMatrix;

pub const PLANTED_COEFS: [f64; 5] = [2.0, -1.5, 1.8, -1.2, 1.6];

#[derive(Debug, Clone)]
pub struct Planted {
    pub matrix: FeatureMatrix,
    /// 0/1 label: sign of the linear score plus noise.
    pub labels: Vec<f64>,
    /// The noisy linear score itself, for regression.
    pub score: Vec<f64>,
    pub informative: Vec<String>,
}

/// `n` rows of `d` standard normal features named `sig_NNN`; five of them,
/// spread evenly across the columns, carry [`PLANTED_COEFS`].
pub fn planted_signal(n: usize, d: usize, noise: f64, seed: u64) -> Planted {
    assert!(d >= PLANTED_COEFS.len(), "need at least 5 columns");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = Array2::from_shape_simple_fn((n, d), || rng.sample::<f64, _>(StandardNormal));
    let step = d / PLANTED_COEFS.len();
    let cols: Vec<usize> = (0..PLANTED_COEFS.len()).map(|k| k * step + step / 2).collect();
    let score: Vec<f64> = (0..n)
        .map(|i| {
            let s: f64 = cols.iter().zip(PLANTED_COEFS).map(|(&j, b)| b * data[[i, j]]).sum();
            s + noise * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    let labels = score.iter().map(|&s| f64::from(s > 0.0)).collect();
    let schema: Vec<String> = (0..d).map(|j| format!("sig_{j:03}")).collect();
    let informative = cols.iter().map(|&j| schema[j].clone()).collect();
    let ids = (0..n).map(|i| format!("synth.app{i:04}")).collect();
    let matrix = FeatureMatrix::new(schema, ids, data, format!("planted-signal seed={seed}")).expect("well-formed");
    Planted { matrix, labels, score, informative }
}
