//! One-hidden-layer perceptron with ReLU units, trained by Adam on mini-batches.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::linear::{sigmoid, softplus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Output {
    /// Sigmoid output with cross-entropy loss.
    Logistic,
    /// Identity output with half squared error on standardised targets.
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub output: Output,
    /// hidden x inputs
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array1<f64>,
    pub b2: f64,
    /// Target scaling for the linear output: y = mean + sd * out.
    pub y_mean: f64,
    pub y_sd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub hidden: usize,
    pub step: f64,
    pub epochs: usize,
    pub batch: usize,
}

impl Mlp {
    pub fn init(d: usize, hidden: usize, output: Output, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let he = Normal::new(0.0, (2.0 / d.max(1) as f64).sqrt()).expect("finite sd");
        let out = Normal::new(0.0, (1.0 / hidden.max(1) as f64).sqrt()).expect("finite sd");
        Self {
            output,
            w1: Array2::from_shape_simple_fn((hidden, d), || he.sample(&mut rng)),
            b1: Array1::zeros(hidden),
            w2: Array1::from_shape_simple_fn(hidden, || out.sample(&mut rng)),
            b2: 0.0,
            y_mean: 0.0,
            y_sd: 1.0,
        }
    }

    fn hidden(&self, x: ArrayView1<f64>) -> (Array1<f64>, Array1<f64>) {
        let a = self.w1.dot(&x) + &self.b1;
        let h = a.mapv(|v| v.max(0.0));
        (a, h)
    }

    /// Network output before the link function.
    pub fn raw(&self, x: ArrayView1<f64>) -> f64 {
        let (_, h) = self.hidden(x);
        self.w2.dot(&h) + self.b2
    }

    pub fn predict(&self, x: ArrayView1<f64>) -> f64 {
        let z = self.raw(x);
        match self.output {
            Output::Logistic => sigmoid(z),
            Output::Linear => self.y_mean + self.y_sd * z,
        }
    }

    pub fn n_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    /// Parameters flattened as `[w1 (row-major), b1, w2, b2]`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        p.extend(self.w1.iter());
        p.extend(self.b1.iter());
        p.extend(self.w2.iter());
        p.push(self.b2);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let (h, d) = self.w1.dim();
        let mut it = p.iter().copied();
        for v in self.w1.iter_mut() {
            *v = it.next().expect("w1");
        }
        for v in self.b1.iter_mut() {
            *v = it.next().expect("b1");
        }
        for v in self.w2.iter_mut() {
            *v = it.next().expect("w2");
        }
        self.b2 = it.next().expect("b2");
        debug_assert_eq!(p.len(), h * d + 2 * h + 1);
    }

    /// Mean loss over the rows and its gradient in [`Mlp::params`] layout.
    /// Targets are used as given (already scaled for the linear output).
    pub fn loss_grad(&self, x: ArrayView2<f64>, t: &[f64]) -> (f64, Vec<f64>) {
        let (hn, d) = self.w1.dim();
        let n = x.nrows() as f64;
        let mut gw1 = Array2::<f64>::zeros((hn, d));
        let mut gb1 = Array1::<f64>::zeros(hn);
        let mut gw2 = Array1::<f64>::zeros(hn);
        let mut gb2 = 0.0;
        let mut loss = 0.0;
        for (row, &y) in x.axis_iter(Axis(0)).zip(t) {
            let (a, h) = self.hidden(row);
            let z = self.w2.dot(&h) + self.b2;
            let delta = match self.output {
                Output::Logistic => {
                    loss += softplus(z) - y * z;
                    sigmoid(z) - y
                }
                Output::Linear => {
                    loss += 0.5 * (z - y) * (z - y);
                    z - y
                }
            };
            gw2.scaled_add(delta, &h);
            gb2 += delta;
            for k in 0..hn {
                if a[k] > 0.0 {
                    let dk = delta * self.w2[k];
                    gb1[k] += dk;
                    gw1.row_mut(k).scaled_add(dk, &row);
                }
            }
        }
        let mut g = Vec::with_capacity(self.n_params());
        g.extend(gw1.iter().map(|v| v / n));
        g.extend(gb1.iter().map(|v| v / n));
        g.extend(gw2.iter().map(|v| v / n));
        g.push(gb2 / n);
        (loss / n, g)
    }

    pub fn fit(x: ArrayView2<f64>, y: &[f64], output: Output, params: MlpParams, seed: u64) -> Mlp {
        let (n, d) = x.dim();
        let mut m = Mlp::init(d, params.hidden, output, seed);
        let targets: Vec<f64> = match output {
            Output::Logistic => y.to_vec(),
            Output::Linear => {
                let mean = y.iter().sum::<f64>() / n as f64;
                let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
                m.y_mean = mean;
                m.y_sd = if var > 1e-24 { var.sqrt() } else { 1.0 };
                y.iter().map(|v| (v - m.y_mean) / m.y_sd).collect()
            }
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let mut p = m.params();
        let mut m1 = vec![0.0; p.len()];
        let mut m2 = vec![0.0; p.len()];
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
        let mut t = 0i32;
        let mut order: Vec<usize> = (0..n).collect();
        let batch = params.batch.max(1);
        for _ in 0..params.epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(batch) {
                let xb = x.select(Axis(0), chunk);
                let yb: Vec<f64> = chunk.iter().map(|&i| targets[i]).collect();
                m.set_params(&p);
                let (_, g) = m.loss_grad(xb.view(), &yb);
                t += 1;
                let c1 = 1.0 - b1.powi(t);
                let c2 = 1.0 - b2.powi(t);
                for i in 0..p.len() {
                    m1[i] = b1 * m1[i] + (1.0 - b1) * g[i];
                    m2[i] = b2 * m2[i] + (1.0 - b2) * g[i] * g[i];
                    p[i] -= params.step * (m1[i] / c1) / ((m2[i] / c2).sqrt() + eps);
                }
            }
        }
        m.set_params(&p);
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_round_trip() {
        let mut m = Mlp::init(3, 4, Output::Logistic, 1);
        let p: Vec<f64> = (0..m.n_params()).map(|i| i as f64).collect();
        m.set_params(&p);
        assert_eq!(m.params(), p);
        assert_eq!(m.w1[[1, 0]], 3.0);
    }

    #[test]
    fn linear_output_rescales_targets() {
        let x = ndarray::array![[0.0], [1.0], [2.0], [3.0]];
        let y = [100.0, 102.0, 104.0, 106.0];
        let p = MlpParams { hidden: 8, step: 1e-2, epochs: 400, batch: 4 };
        let m = Mlp::fit(x.view(), &y, Output::Linear, p, 0);
        for (i, &t) in y.iter().enumerate() {
            assert!((m.predict(x.row(i)) - t).abs() < 1.0);
        }
    }
}
