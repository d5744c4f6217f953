//! Synthetic minority oversampling.

use ndarray::{Array2, ArrayView2, Axis};
use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Standardizer;
use crate::ModelError;

/// Where a synthetic row came from: `base + u * (neighbour - base)`.
/// Indices refer to rows of the input training matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticOrigin {
    pub base: usize,
    pub neighbour: usize,
    pub u: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Smoted {
    /// Input rows followed by the synthetic rows.
    pub x: Array2<f64>,
    pub y: Vec<f64>,
    pub origins: Vec<SyntheticOrigin>,
    /// Neighbourhood size actually used.
    pub k: usize,
}

/// Balances the 0/1 labels `y` by interpolating minority rows of `x`.
///
/// Neighbours are found by Euclidean distance on features standardised over
/// all of `x`; the interpolation itself happens in the original units.
/// Base points are visited round-robin; the neighbour is drawn uniformly from
/// the `k` nearest and `u` from the open interval (0, 1).
pub fn smote(x: ArrayView2<f64>, y: &[f64], k: usize, seed: u64) -> Result<Smoted, ModelError> {
    let n = x.nrows();
    if y.len() != n {
        return Err(ModelError::Shape(format!("{n} rows but {} labels", y.len())));
    }
    let pos: Vec<usize> = (0..n).filter(|&i| y[i] == 1.0).collect();
    let neg: Vec<usize> = (0..n).filter(|&i| y[i] != 1.0).collect();
    let (minority, label, deficit) = if pos.len() < neg.len() {
        let d = neg.len() - pos.len();
        (pos, 1.0, d)
    } else {
        let d = pos.len() - neg.len();
        (neg, 0.0, d)
    };
    if deficit == 0 {
        return Ok(Smoted { x: x.to_owned(), y: y.to_vec(), origins: Vec::new(), k: 0 });
    }
    if minority.len() < 2 {
        return Err(ModelError::CannotInterpolate(minority.len()));
    }
    let k = k.clamp(1, minority.len() - 1);
    let z = Standardizer::fit(x).transform(x);
    let neighbours: Vec<Vec<usize>> = minority
        .iter()
        .map(|&i| {
            let mut others: Vec<(f64, usize)> = minority
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| {
                    let d: f64 = z.row(i).iter().zip(z.row(j).iter()).map(|(a, b)| (a - b).powi(2)).sum();
                    (d, j)
                })
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            others.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Array2::zeros((n + deficit, x.ncols()));
    out.slice_mut(ndarray::s![..n, ..]).assign(&x);
    let mut labels = y.to_vec();
    let mut origins = Vec::with_capacity(deficit);
    for s in 0..deficit {
        let m = s % minority.len();
        let base = minority[m];
        let neighbour = neighbours[m][rng.gen_range(0..k)];
        let u: f64 = rng.sample(Open01);
        let row = &x.row(base) + &((&x.row(neighbour) - &x.row(base)) * u);
        out.index_axis_mut(Axis(0), n + s).assign(&row);
        labels.push(label);
        origins.push(SyntheticOrigin { base, neighbour, u });
    }
    Ok(Smoted { x: out, y: labels, origins, k })
}

/// Largest deviation of a synthetic row from the segment point its origin describes.
pub fn convex_residual(x: ArrayView2<f64>, synthetic: ndarray::ArrayView1<f64>, o: &SyntheticOrigin) -> f64 {
    let (a, b) = (x.row(o.base), x.row(o.neighbour));
    synthetic
        .iter()
        .zip(a.iter().zip(b.iter()))
        .map(|(s, (p, q))| (s - (p + o.u * (q - p))).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn balanced_input_is_unchanged() {
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        let y = [0.0, 1.0, 0.0, 1.0];
        let s = smote(x.view(), &y, 5, 0).unwrap();
        assert_eq!(s.x, x);
        assert_eq!(s.y, y);
        assert!(s.origins.is_empty());
    }

    #[test]
    fn two_minority_points_lie_on_open_segment() {
        let x = array![[0.0, 0.0], [1.0, 1.0], [5.0, 5.0], [6.0, 5.0], [7.0, 5.0], [8.0, 5.0]];
        let y = [1.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        let s = smote(x.view(), &y, 5, 3).unwrap();
        assert_eq!(s.k, 1);
        assert_eq!(s.x.nrows(), 8);
        assert_eq!(s.y.iter().filter(|&&v| v == 1.0).count(), 4);
        for r in 6..8 {
            let (a, b) = (s.x[[r, 0]], s.x[[r, 1]]);
            assert_eq!(a, b);
            assert!(a > 0.0 && a < 1.0);
        }
    }

    #[test]
    fn k_is_clamped() {
        let x = array![[0.0], [1.0], [2.0], [10.0], [11.0], [12.0], [13.0], [14.0]];
        let y = [1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(smote(x.view(), &y, 5, 0).unwrap().k, 2);
    }

    #[test]
    fn single_minority_cannot_interpolate() {
        let x = array![[0.0], [1.0], [2.0]];
        assert!(matches!(smote(x.view(), &[1.0, 0.0, 0.0], 5, 0), Err(ModelError::CannotInterpolate(1))));
    }

    #[test]
    fn minority_zero_class_is_oversampled() {
        let x = array![[0.0], [1.0], [5.0], [6.0], [7.0]];
        let s = smote(x.view(), &[0.0, 0.0, 1.0, 1.0, 1.0], 5, 0).unwrap();
        assert_eq!(s.y[5], 0.0);
        assert_eq!(s.origins.len(), 1);
        assert!(convex_residual(x.view(), s.x.row(5), &s.origins[0]) < 1e-12);
    }
}
