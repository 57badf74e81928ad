use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng as _};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::majority;
use crate::error::MbfdError;
use crate::Result;

pub const N_TREES: usize = 100;
pub const MAX_DEPTH: usize = 20;

#[derive(Debug, Clone, Serialize, Deserialize)]
enum Node {
    Leaf { class: usize },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, q: &[f64]) -> usize {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                Node::Leaf { class } => return *class,
                Node::Split { feature, threshold, left, right } => {
                    i = if q[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

/// Random forest: 100 CART trees on bootstrap samples, Gini impurity,
/// sqrt(n_features) candidate features per split, depth ≤ 20.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestModel {
    trees: Vec<Tree>,
    dim: usize,
}

fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

fn majority_of(y: &[usize], idx: &[usize]) -> usize {
    let votes: Vec<usize> = idx.iter().map(|&i| y[i]).collect();
    majority(&votes)
}

struct TreeBuilder<'a> {
    x: &'a Array2<f64>,
    y: &'a [usize],
    classes: usize,
    n_candidates: usize,
    nodes: Vec<Node>,
}

impl TreeBuilder<'_> {
    fn build(&mut self, idx: &[usize], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let first = self.y[idx[0]];
        let pure = idx.iter().all(|&i| self.y[i] == first);
        if pure || depth >= MAX_DEPTH || idx.len() < 2 {
            self.nodes.push(Node::Leaf { class: majority_of(self.y, idx) });
            return self.nodes.len() - 1;
        }
        let mut features: Vec<usize> = (0..self.x.dim().1).collect();
        features.shuffle(rng);
        features.truncate(self.n_candidates);
        features.sort_unstable(); // deterministic tie order over the subset

        let mut best: Option<(f64, usize, f64)> = None; // (impurity, feature, threshold)
        for &f in &features {
            let mut vals: Vec<(f64, usize)> = idx.iter().map(|&i| (self.x[[i, f]], self.y[i])).collect();
            vals.sort_by(|a, b| a.0.total_cmp(&b.0));
            let total = vals.len();
            let mut right_counts = vec![0usize; self.classes];
            for &(_, c) in &vals {
                right_counts[c] += 1;
            }
            let mut left_counts = vec![0usize; self.classes];
            for k in 0..total - 1 {
                let (v, c) = vals[k];
                left_counts[c] += 1;
                right_counts[c] -= 1;
                let next = vals[k + 1].0;
                if next == v {
                    continue;
                }
                let nl = k + 1;
                let nr = total - nl;
                let impurity = (nl as f64 * gini(&left_counts, nl)
                    + nr as f64 * gini(&right_counts, nr))
                    / total as f64;
                let threshold = v + (next - v) / 2.0;
                if best.map_or(true, |(bi, _, _)| impurity < bi) {
                    best = Some((impurity, f, threshold));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            // candidate features were all constant on this subset
            self.nodes.push(Node::Leaf { class: majority_of(self.y, idx) });
            return self.nodes.len() - 1;
        };
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| self.x[[i, feature]] <= threshold);
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { class: 0 }); // placeholder
        let left = self.build(&left_idx, depth + 1, rng);
        let right = self.build(&right_idx, depth + 1, rng);
        self.nodes[slot] = Node::Split { feature, threshold, left, right };
        slot
    }
}

impl ForestModel {
    pub fn fit(x: &Array2<f64>, y: &[usize], seed: u64) -> Self {
        let (n, dim) = x.dim();
        let classes = y.iter().copied().max().unwrap_or(0) + 1;
        let n_candidates = (dim as f64).sqrt().ceil() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trees = (0..N_TREES)
            .map(|_| {
                let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
                let mut b = TreeBuilder { x, y, classes, n_candidates, nodes: Vec::new() };
                b.build(&idx, 0, &mut rng);
                Tree { nodes: b.nodes }
            })
            .collect();
        Self { trees, dim }
    }

    pub fn predict(&self, x: &Array2<f64>) -> Result<Vec<usize>> {
        if x.dim().1 != self.dim {
            return Err(MbfdError::ShapeMismatch(format!(
                "expected dim {}, got {}",
                self.dim,
                x.dim().1
            )));
        }
        Ok(x.rows()
            .into_iter()
            .map(|row| {
                let q = row.as_slice().unwrap();
                let votes: Vec<usize> = self.trees.iter().map(|t| t.predict(q)).collect();
                majority(&votes)
            })
            .collect())
    }
}
