//! CART decision trees.
//!
//! With 0/1 targets the Gini impurity 2p(1-p) is twice the variance, so a
//! single sum/sum-of-squares split search serves both criteria.

use ndarray::{ArrayView1, ArrayView2};
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features examined per split; `None` means all.
    pub max_features: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

/// Row indices sorted by each column (ties by row index). Trees grown on the
/// same matrix can share it and skip per-node sorting in large nodes.
#[derive(Debug, Clone)]
pub struct ColumnOrder(Vec<Vec<usize>>);

impl ColumnOrder {
    pub fn new(x: ArrayView2<f64>) -> Self {
        ColumnOrder(
            x.columns()
                .into_iter()
                .map(|c| {
                    let mut idx: Vec<usize> = (0..c.len()).collect();
                    idx.sort_by(|&a, &b| c[a].total_cmp(&c[b]).then(a.cmp(&b)));
                    idx
                })
                .collect(),
        )
    }
}

struct Builder<'x, 'y, 'r, 'o, R> {
    x: ArrayView2<'x, f64>,
    y: &'y [f64],
    params: TreeParams,
    rng: &'r mut R,
    nodes: Vec<Node>,
    importance: Vec<f64>,
    order: Option<&'o ColumnOrder>,
    /// Multiplicity of each row in the node being split (bootstraps repeat rows).
    counts: Vec<u32>,
}

fn sse(sum: f64, sumsq: f64, n: f64) -> f64 {
    (sumsq - sum * sum / n).max(0.0)
}

impl<R: Rng> Builder<'_, '_, '_, '_, R> {
    fn build(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let n = rows.len() as f64;
        let sum: f64 = rows.iter().map(|&i| self.y[i]).sum();
        let sumsq: f64 = rows.iter().map(|&i| self.y[i] * self.y[i]).sum();
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: sum / n });
        let parent = sse(sum, sumsq, n);
        if depth >= self.params.max_depth || rows.len() < 2 * self.params.min_leaf || parent <= 1e-12 {
            return id;
        }
        let Some((feature, threshold, gain)) = self.best_split(rows, sum, sumsq, parent) else {
            return id;
        };
        self.importance[feature] += gain;
        let x = self.x;
        rows.sort_by(|&a, &b| {
            let la = x[[a, feature]] <= threshold;
            let lb = x[[b, feature]] <= threshold;
            lb.cmp(&la).then(a.cmp(&b))
        });
        let split = rows.iter().filter(|&&i| x[[i, feature]] <= threshold).count();
        let (l, r) = rows.split_at_mut(split);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id] = Node::Split { feature, threshold, left, right };
        id
    }

    fn best_split(&mut self, rows: &[usize], sum: f64, sumsq: f64, parent: f64) -> Option<(usize, f64, f64)> {
        let d = self.x.ncols();
        let features: Vec<usize> = match self.params.max_features {
            Some(k) if k < d => {
                let mut f = sample(self.rng, d, k.max(1)).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        };
        let n = rows.len();
        let min_leaf = self.params.min_leaf.max(1);
        let mut best: Option<(usize, f64, f64)> = None;
        // scanning a presorted column costs O(N); sorting the node costs O(n log n)
        let presorted = self.order.filter(|_| n * (usize::BITS - n.leading_zeros()) as usize >= self.x.nrows());
        if presorted.is_some() {
            for &i in rows {
                self.counts[i] += 1;
            }
        }
        let mut order: Vec<(f64, f64)> = Vec::with_capacity(n);
        for f in features {
            order.clear();
            match presorted {
                Some(cols) => {
                    for &i in &cols.0[f] {
                        for _ in 0..self.counts[i] {
                            order.push((self.x[[i, f]], self.y[i]));
                        }
                    }
                }
                None => {
                    order.extend(rows.iter().map(|&i| (self.x[[i, f]], self.y[i])));
                    order.sort_by(|a, b| a.0.total_cmp(&b.0));
                }
            }
            if order[0].0 == order[n - 1].0 {
                continue;
            }
            let (mut ls, mut lq) = (0.0, 0.0);
            for k in 0..n - 1 {
                ls += order[k].1;
                lq += order[k].1 * order[k].1;
                let nl = k + 1;
                if order[k].0 == order[k + 1].0 || nl < min_leaf || n - nl < min_leaf {
                    continue;
                }
                let child = sse(ls, lq, nl as f64) + sse(sum - ls, sumsq - lq, (n - nl) as f64);
                let gain = parent - child;
                if gain > 1e-12 && best.is_none_or(|b| gain > b.2) {
                    let threshold = 0.5 * (order[k].0 + order[k + 1].0);
                    best = Some((f, threshold, gain));
                }
            }
        }
        if presorted.is_some() {
            for &i in rows {
                self.counts[i] = 0;
            }
        }
        best
    }
}

impl Tree {
    /// Grow a tree on `rows` of `x`; `importance` receives the SSE reduction per feature.
    pub fn fit<R: Rng>(
        x: ArrayView2<f64>,
        y: &[f64],
        rows: &[usize],
        params: TreeParams,
        rng: &mut R,
    ) -> (Tree, Vec<f64>) {
        Self::fit_ordered(x, y, rows, params, rng, None)
    }

    /// As [`Tree::fit`], reusing column orders computed once for `x`.
    pub fn fit_ordered<R: Rng>(
        x: ArrayView2<f64>,
        y: &[f64],
        rows: &[usize],
        params: TreeParams,
        rng: &mut R,
        order: Option<&ColumnOrder>,
    ) -> (Tree, Vec<f64>) {
        let counts = if order.is_some() { vec![0; x.nrows()] } else { Vec::new() };
        let mut b =
            Builder { x, y, params, rng, nodes: Vec::new(), importance: vec![0.0; x.ncols()], order, counts };
        let mut rows = rows.to_vec();
        if !rows.is_empty() {
            b.build(&mut rows, 0);
        } else {
            b.nodes.push(Node::Leaf { value: 0.0 });
        }
        (Tree { nodes: b.nodes }, b.importance)
    }

    /// Index of the leaf that `x` falls into.
    pub fn leaf(&self, x: ArrayView1<f64>) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn predict(&self, x: ArrayView1<f64>) -> f64 {
        match self.nodes[self.leaf(x)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!("leaf() stops at leaves"),
        }
    }

    pub fn set_leaf_value(&mut self, leaf: usize, v: f64) {
        self.nodes[leaf] = Node::Leaf { value: v };
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }
}
