//! Random forests and gradient boosting over [`Tree`].

use ndarray::{ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::linear::{sigmoid, softplus};
use super::tree::{ColumnOrder, Tree, TreeParams};
use crate::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

impl Forest {
    /// Bagged trees; tree `t` draws its bootstrap and feature subsets from `derive_seed(seed, t)`,
    /// so the result does not depend on thread scheduling.
    pub fn fit(
        x: ArrayView2<f64>,
        y: &[f64],
        n_trees: usize,
        params: TreeParams,
        seed: u64,
    ) -> (Forest, Vec<f64>) {
        let n = x.nrows();
        let order = ColumnOrder::new(x);
        let grown: Vec<(Tree, Vec<f64>)> = (0..n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, t as u64));
                let rows: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
                Tree::fit_ordered(x, y, &rows, params, &mut rng, Some(&order))
            })
            .collect();
        let mut importance = vec![0.0; x.ncols()];
        let mut trees = Vec::with_capacity(n_trees);
        for (tree, imp) in grown {
            for (a, b) in importance.iter_mut().zip(imp) {
                *a += b;
            }
            trees.push(tree);
        }
        (Forest { trees }, normalize(importance))
    }

    pub fn predict(&self, x: ArrayView1<f64>) -> f64 {
        if self.trees.is_empty() {
            return 0.0;
        }
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

pub fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        for x in &mut v {
            *x /= total;
        }
    }
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoostLoss {
    Logistic,
    Squared,
}

/// Gradient-boosted trees. Leaf values already include the shrinkage factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Boosted {
    pub loss: BoostLoss,
    pub init: f64,
    pub trees: Vec<Tree>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostFit {
    pub model: Boosted,
    pub importance: Vec<f64>,
    /// Mean training loss after initialisation and after every round.
    pub loss_history: Vec<f64>,
}

fn point_loss(loss: BoostLoss, f: f64, y: f64) -> f64 {
    match loss {
        BoostLoss::Logistic => softplus(f) - y * f,
        BoostLoss::Squared => 0.5 * (y - f) * (y - f),
    }
}

impl Boosted {
    pub fn fit(
        x: ArrayView2<f64>,
        y: &[f64],
        loss: BoostLoss,
        rounds: usize,
        shrinkage: f64,
        params: TreeParams,
        seed: u64,
    ) -> BoostFit {
        let n = x.nrows();
        let mean = y.iter().sum::<f64>() / n as f64;
        let init = match loss {
            BoostLoss::Squared => mean,
            BoostLoss::Logistic => {
                let p = mean.clamp(1e-6, 1.0 - 1e-6);
                (p / (1.0 - p)).ln()
            }
        };
        let mut f = vec![init; n];
        let mean_loss = |f: &[f64]| f.iter().zip(y).map(|(&fi, &yi)| point_loss(loss, fi, yi)).sum::<f64>() / n as f64;
        let mut history = vec![mean_loss(&f)];
        let mut trees = Vec::with_capacity(rounds);
        let mut importance = vec![0.0; x.ncols()];
        let rows: Vec<usize> = (0..n).collect();
        let order = ColumnOrder::new(x);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        for _ in 0..rounds {
            let grad: Vec<f64> = match loss {
                BoostLoss::Squared => y.iter().zip(&f).map(|(yi, fi)| yi - fi).collect(),
                BoostLoss::Logistic => y.iter().zip(&f).map(|(yi, fi)| yi - sigmoid(*fi)).collect(),
            };
            let (mut tree, imp) = Tree::fit_ordered(x, &grad, &rows, params, &mut rng, Some(&order));
            for (a, b) in importance.iter_mut().zip(imp) {
                *a += b;
            }
            let leaf_of: Vec<usize> = (0..n).map(|i| tree.leaf(x.row(i))).collect();
            let mut members: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
            for (i, &l) in leaf_of.iter().enumerate() {
                members.entry(l).or_default().push(i);
            }
            for (leaf, idx) in members {
                let step = match loss {
                    BoostLoss::Squared => {
                        shrinkage * idx.iter().map(|&i| grad[i]).sum::<f64>() / idx.len() as f64
                    }
                    BoostLoss::Logistic => {
                        let num: f64 = idx.iter().map(|&i| grad[i]).sum();
                        let den: f64 = idx
                            .iter()
                            .map(|&i| {
                                let p = sigmoid(f[i]);
                                p * (1.0 - p)
                            })
                            .sum();
                        let leaf_loss = |s: f64| idx.iter().map(|&i| point_loss(loss, f[i] + s, y[i])).sum::<f64>();
                        let before = leaf_loss(0.0);
                        let mut s = shrinkage * num / den.max(1e-12);
                        // backtrack so that no leaf (and hence the total) gets worse
                        let mut tries = 0;
                        while leaf_loss(s) > before && tries < 60 {
                            s *= 0.5;
                            tries += 1;
                        }
                        if leaf_loss(s) > before {
                            0.0
                        } else {
                            s
                        }
                    }
                };
                tree.set_leaf_value(leaf, step);
                for &i in idx.iter() {
                    f[i] += step;
                }
            }
            history.push(mean_loss(&f));
            trees.push(tree);
        }
        BoostFit { model: Boosted { loss, init, trees }, importance: normalize(importance), loss_history: history }
    }

    /// Raw additive score (log-odds for the logistic loss).
    pub fn raw(&self, x: ArrayView1<f64>) -> f64 {
        self.init + self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn predict(&self, x: ArrayView1<f64>) -> f64 {
        match self.loss {
            BoostLoss::Logistic => sigmoid(self.raw(x)),
            BoostLoss::Squared => self.raw(x),
        }
    }
}
