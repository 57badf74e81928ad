use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::majority;
use crate::error::MbfdError;
use crate::Result;

pub const K: usize = 5;

/// k-nearest-neighbors with k = 5, Euclidean distance, uniform weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnnModel {
    x: Vec<Vec<f64>>,
    y: Vec<usize>,
    dim: usize,
}

impl KnnModel {
    pub fn fit(x: &Array2<f64>, y: &[usize]) -> Self {
        Self {
            x: x.rows().into_iter().map(|r| r.to_vec()).collect(),
            y: y.to_vec(),
            dim: x.dim().1,
        }
    }

    pub fn predict(&self, x: &Array2<f64>) -> Result<Vec<usize>> {
        if x.dim().1 != self.dim {
            return Err(MbfdError::ShapeMismatch(format!(
                "expected dim {}, got {}",
                self.dim,
                x.dim().1
            )));
        }
        let mut out = Vec::with_capacity(x.dim().0);
        for row in x.rows() {
            let q = row.as_slice().unwrap();
            let mut dists: Vec<(f64, usize)> = self
                .x
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    (r.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i)
                })
                .collect();
            // equal distances resolve by training index for determinism
            dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let votes: Vec<usize> =
                dists.iter().take(K.min(dists.len())).map(|&(_, i)| self.y[i]).collect();
            out.push(majority(&votes));
        }
        Ok(out)
    }
}
