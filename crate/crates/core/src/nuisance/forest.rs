//! Bagged CART regression trees (random-forest style).
//!
//! Each tree is grown on a bootstrap resample with `ceil(d/3)` candidate
//! features per split and the variance-reduction criterion. Equal gains keep
//! the lowest feature index, then the lowest threshold. Leaves hold the mean
//! bootstrap response, so predictions never leave the training range.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;

use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::nuisance::{OutcomeRegressor, PropensityModel};
use crate::rng::stream_rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Node<T> {
    Leaf(T),
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
struct Tree<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Tree<T> {
    fn predict(&self, x: &[T]) -> T {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf(v) => return *v,
                Node::Split { feature, threshold, left, right } => {
                    idx = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

struct Builder<'a, T, R> {
    x: &'a Matrix<T>,
    y: &'a [T],
    params: ForestParams,
    mtry: usize,
    rng: &'a mut R,
    nodes: Vec<Node<T>>,
}

impl<T: Scalar, R: Rng> Builder<'_, T, R> {
    fn mean(&self, idx: &[usize]) -> T {
        idx.iter().map(|&i| self.y[i]).sum::<T>() / T::of_usize(idx.len())
    }

    /// Best (feature, threshold) by variance reduction, or None if no split helps.
    fn best_split(&mut self, idx: &[usize]) -> Option<(usize, T)> {
        let d = self.x.cols();
        let mut features: Vec<usize> = sample(self.rng, d, self.mtry.min(d)).into_vec();
        features.sort_unstable();
        let n = idx.len();
        let total: T = idx.iter().map(|&i| self.y[i]).sum();
        let parent_score = total * total / T::of_usize(n);
        let min_leaf = self.params.min_leaf.max(1);
        let mut best: Option<(T, usize, T)> = None;
        let mut order = idx.to_vec();
        for &f in &features {
            order.sort_by(|&a, &b| self.x.get(a, f).partial_cmp(&self.x.get(b, f)).expect("finite"));
            let mut left_sum = T::zero();
            for split in 1..n {
                left_sum += self.y[order[split - 1]];
                let (lo, hi) = (self.x.get(order[split - 1], f), self.x.get(order[split], f));
                if split < min_leaf || n - split < min_leaf || lo == hi {
                    continue;
                }
                let right_sum = total - left_sum;
                let score = left_sum * left_sum / T::of_usize(split)
                    + right_sum * right_sum / T::of_usize(n - split);
                let gain = score - parent_score;
                if gain <= T::zero() {
                    continue;
                }
                let threshold = lo + (hi - lo) * T::of(0.5);
                if best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, f, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let node_id = self.nodes.len();
        let leaf = Node::Leaf(self.mean(&idx));
        self.nodes.push(leaf);
        let constant = idx.iter().all(|&i| self.y[i] == self.y[idx[0]]);
        if depth >= self.params.max_depth || idx.len() < 2 * self.params.min_leaf.max(1) || constant {
            return node_id;
        }
        let Some((feature, threshold)) = self.best_split(&idx) else {
            return node_id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x.get(i, feature) <= threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[node_id] = Node::Split { feature, threshold, left, right };
        node_id
    }
}

/// Ensemble of regression trees.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel<T> {
    trees: Vec<Tree<T>>,
}

impl<T: Scalar> ForestModel<T> {
    /// Tree `t` draws from the RNG stream `(seed, t)`, so the fit does not
    /// depend on how trees are scheduled across threads.
    pub fn fit(x: &Matrix<T>, y: &[T], params: ForestParams, seed: u64) -> Result<Self> {
        let n = x.rows();
        if n < 2 || y.len() != n {
            return Err(Error::InsufficientArmSamples { found: n, required: 2 });
        }
        if params.n_trees == 0 || params.max_depth == 0 {
            return Err(Error::InvalidConfig("forest needs at least one tree of depth >= 1".into()));
        }
        let mtry = x.cols().div_ceil(3).max(1);
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = stream_rng(seed, t as u64);
                let boot: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                let mut b = Builder { x, y, params, mtry, rng: &mut rng, nodes: Vec::new() };
                b.grow(boot, 0);
                Tree { nodes: b.nodes }
            })
            .collect();
        Ok(Self { trees })
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    fn mean_prediction(&self, x: &[T]) -> T {
        self.trees.iter().map(|t| t.predict(x)).sum::<T>() / T::of_usize(self.trees.len())
    }
}

impl<T: Scalar> OutcomeRegressor<T> for ForestModel<T> {
    fn predict_row(&self, x: &[T]) -> T {
        self.mean_prediction(x)
    }
}

/// Probability forest: a regression forest on the 0/1 treatment indicator.
impl<T: Scalar> PropensityModel<T> for ForestModel<T> {
    fn raw_prob(&self, x: &[T]) -> T {
        self.mean_prediction(x)
    }
}
