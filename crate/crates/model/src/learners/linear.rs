//! Linear models: L2 logistic regression, L1 logistic regression (ISTA),
//! lasso (coordinate descent) and ridge (closed form).

use nalgebra::{DMatrix, DVector};
use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^z) without overflow.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn zeros(d: usize) -> Self {
        Self { weights: vec![0.0; d], bias: 0.0 }
    }

    pub fn decision(&self, x: ArrayView1<f64>) -> f64 {
        self.bias + x.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// Mean logistic loss plus `lambda/2 * |w|^2`, with its gradient in `w` and `b`.
pub fn logistic_loss_grad(
    model: &LinearModel,
    x: ArrayView2<f64>,
    y: &[f64],
    lambda: f64,
) -> (f64, Vec<f64>, f64) {
    let n = x.nrows() as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; x.ncols()];
    let mut gb = 0.0;
    for (row, &t) in x.rows().into_iter().zip(y) {
        let z = model.decision(row);
        loss += softplus(z) - t * z;
        let r = sigmoid(z) - t;
        gb += r;
        for (g, v) in gw.iter_mut().zip(row.iter()) {
            *g += r * v;
        }
    }
    let l2: f64 = model.weights.iter().map(|w| w * w).sum();
    let grad_w = gw.iter().zip(&model.weights).map(|(g, w)| g / n + lambda * w).collect();
    (loss / n + 0.5 * lambda * l2, grad_w, gb / n)
}

/// Full-batch gradient descent on the L2-regularised logistic loss.
pub fn fit_logistic(x: ArrayView2<f64>, y: &[f64], lambda: f64, epochs: usize, step: f64) -> LinearModel {
    let mut m = LinearModel::zeros(x.ncols());
    for _ in 0..epochs {
        let (_, gw, gb) = logistic_loss_grad(&m, x, y, lambda);
        for (w, g) in m.weights.iter_mut().zip(&gw) {
            *w -= step * g;
        }
        m.bias -= step * gb;
    }
    m
}

/// Proximal gradient (ISTA) on mean logistic loss plus `lambda * |w|_1`.
pub fn fit_l1_logistic(x: ArrayView2<f64>, y: &[f64], lambda: f64, iters: usize, step: f64) -> LinearModel {
    let mut m = LinearModel::zeros(x.ncols());
    for _ in 0..iters {
        let (_, gw, gb) = logistic_loss_grad(&m, x, y, 0.0);
        for (w, g) in m.weights.iter_mut().zip(&gw) {
            *w = soft_threshold(*w - step * g, step * lambda);
        }
        m.bias -= step * gb;
    }
    m
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Coordinate descent for `1/(2n) |y - b - Xw|^2 + lambda |w|_1`.
pub fn fit_lasso(x: ArrayView2<f64>, y: &[f64], lambda: f64, max_sweeps: usize, tol: f64) -> LinearModel {
    let (n, d) = x.dim();
    let nf = n as f64;
    let y_mean = y.iter().sum::<f64>() / nf;
    let x_mean: Vec<f64> = x.columns().into_iter().map(|c| c.sum() / nf).collect();
    let col_sq: Vec<f64> = x
        .columns()
        .into_iter()
        .zip(&x_mean)
        .map(|(c, m)| c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / nf)
        .collect();
    // residual on centred data
    let mut resid: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let mut w = vec![0.0; d];
    for _ in 0..max_sweeps {
        let mut max_delta: f64 = 0.0;
        for j in 0..d {
            if col_sq[j] == 0.0 {
                continue;
            }
            let col = x.column(j);
            let rho: f64 = col
                .iter()
                .zip(&resid)
                .map(|(v, r)| (v - x_mean[j]) * r)
                .sum::<f64>()
                / nf
                + col_sq[j] * w[j];
            let new = soft_threshold(rho, lambda) / col_sq[j];
            let delta = new - w[j];
            if delta != 0.0 {
                for (r, v) in resid.iter_mut().zip(col.iter()) {
                    *r -= delta * (v - x_mean[j]);
                }
                w[j] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        if max_delta < tol {
            break;
        }
    }
    let bias = y_mean - w.iter().zip(&x_mean).map(|(a, b)| a * b).sum::<f64>();
    LinearModel { weights: w, bias }
}

/// Solve `(X^T X + lambda I) w = X^T y` by Cholesky factorisation.
pub fn ridge_solve(x: ArrayView2<f64>, y: &[f64], lambda: f64) -> Vec<f64> {
    let (n, d) = x.dim();
    let xm = DMatrix::from_fn(n, d, |i, j| x[[i, j]]);
    let yv = DVector::from_column_slice(y);
    let mut a = xm.transpose() * &xm;
    for i in 0..d {
        a[(i, i)] += lambda;
    }
    let b = xm.transpose() * yv;
    match a.clone().cholesky() {
        Some(ch) => ch.solve(&b).iter().copied().collect(),
        // lambda = 0 with a rank-deficient design
        None => a
            .pseudo_inverse(1e-12)
            .map(|p| (p * b).iter().copied().collect())
            .unwrap_or_else(|_| vec![0.0; d]),
    }
}

/// Ridge regression with an unpenalised intercept (data are centred first).
pub fn fit_ridge(x: ArrayView2<f64>, y: &[f64], lambda: f64) -> LinearModel {
    let (n, _) = x.dim();
    let nf = n as f64;
    let y_mean = y.iter().sum::<f64>() / nf;
    let x_mean: Vec<f64> = x.columns().into_iter().map(|c| c.sum() / nf).collect();
    let mut xc = x.to_owned();
    for (j, mut col) in xc.columns_mut().into_iter().enumerate() {
        col.mapv_inplace(|v| v - x_mean[j]);
    }
    let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let w = ridge_solve(xc.view(), &yc, lambda);
    let bias = y_mean - w.iter().zip(&x_mean).map(|(a, b)| a * b).sum::<f64>();
    LinearModel { weights: w, bias }
}

/// Linear max-margin model by full-batch subgradient descent.
///
/// Classification (`y` in {0,1}) uses the hinge loss; regression uses the
/// epsilon-insensitive loss. Weights are averaged over the second half of the run.
pub fn fit_linear_svm(
    x: ArrayView2<f64>,
    y: &[f64],
    regression: bool,
    lambda: f64,
    epsilon: f64,
    epochs: usize,
) -> LinearModel {
    let (n, d) = x.dim();
    let nf = n as f64;
    let mut m = LinearModel::zeros(d);
    let mut avg = LinearModel::zeros(d);
    let mut averaged = 0.0;
    for t in 1..=epochs {
        let mut gw: Vec<f64> = m.weights.iter().map(|w| lambda * w).collect();
        let mut gb = 0.0;
        for (row, &yi) in x.rows().into_iter().zip(y) {
            let f = m.decision(row);
            let coef = if regression {
                let r = f - yi;
                if r > epsilon {
                    1.0
                } else if r < -epsilon {
                    -1.0
                } else {
                    0.0
                }
            } else {
                let s = if yi > 0.5 { 1.0 } else { -1.0 };
                if s * f < 1.0 {
                    -s
                } else {
                    0.0
                }
            };
            if coef != 0.0 {
                gb += coef / nf;
                for (g, v) in gw.iter_mut().zip(row.iter()) {
                    *g += coef * v / nf;
                }
            }
        }
        let step = 0.1 / (t as f64).sqrt();
        for (w, g) in m.weights.iter_mut().zip(&gw) {
            *w -= step * g;
        }
        m.bias -= step * gb;
        if 2 * t > epochs {
            averaged += 1.0;
            for (a, w) in avg.weights.iter_mut().zip(&m.weights) {
                *a += (w - *a) / averaged;
            }
            avg.bias += (m.bias - avg.bias) / averaged;
        }
    }
    if averaged > 0.0 {
        avg
    } else {
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_weights_score_half() {
        let m = LinearModel::zeros(3);
        assert_eq!(sigmoid(m.decision(array![1.0, -4.0, 9.0].view())), 0.5);
    }

    #[test]
    fn lasso_recovers_sparse_signal() {
        let x = array![[1.0, 0.0], [2.0, 1.0], [3.0, 0.0], [4.0, 1.0], [5.0, 0.0]];
        let y: Vec<f64> = x.column(0).iter().map(|v| 2.0 * v + 1.0).collect();
        let m = fit_lasso(x.view(), &y, 1e-6, 10_000, 1e-12);
        assert!((m.weights[0] - 2.0).abs() < 1e-3);
        assert!(m.weights[1].abs() < 1e-3);
        assert!((m.bias - 1.0).abs() < 1e-2);
    }

    #[test]
    fn large_lasso_penalty_zeroes_weights() {
        let x = array![[1.0], [2.0], [3.0]];
        let m = fit_lasso(x.view(), &[1.0, 2.0, 3.0], 100.0, 100, 1e-12);
        assert_eq!(m.weights, vec![0.0]);
        assert!((m.bias - 2.0).abs() < 1e-12);
    }

    #[test]
    fn svm_separates_a_line() {
        let x = array![[-2.0], [-1.0], [1.0], [2.0]];
        let m = fit_linear_svm(x.view(), &[0.0, 0.0, 1.0, 1.0], false, 1e-3, 0.0, 500);
        assert!(m.weights[0] > 0.0);
        assert!(m.decision(x.row(0)) < 0.0 && m.decision(x.row(3)) > 0.0);
    }

    #[test]
    fn ridge_normal_equations() {
        let x = array![[1.0, 2.0], [3.0, 1.0], [0.5, -1.0], [2.0, 2.0]];
        let y = [1.0, 2.0, -1.0, 0.5];
        let w = ridge_solve(x.view(), &y, 0.7);
        let xt_x = x.t().dot(&x);
        let lhs: Vec<f64> = (0..2).map(|i| (0..2).map(|j| xt_x[[i, j]] * w[j]).sum::<f64>() + 0.7 * w[i]).collect();
        let rhs = x.t().dot(&ndarray::arr1(&y));
        for i in 0..2 {
            assert!((lhs[i] - rhs[i]).abs() < 1e-10);
        }
    }
}
