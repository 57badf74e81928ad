use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::MbfdError;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    Euclidean,
    Cosine,
}

/// Distance classifier: nearest per-class mean embedding, or (behind the
/// `nearest_neighbor` flag) nearest individual training sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CentroidModel {
    pub metric: Metric,
    pub nearest_neighbor: bool,
    /// (class, reference vector); one per class, or one per training sample.
    references: Vec<(usize, Vec<f64>)>,
    dim: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    dot / (na * nb)
}

impl CentroidModel {
    pub fn fit(x: &Array2<f64>, y: &[usize], metric: Metric, nearest_neighbor: bool) -> Self {
        let dim = x.dim().1;
        let references = if nearest_neighbor {
            y.iter().zip(x.rows()).map(|(&l, r)| (l, r.to_vec())).collect()
        } else {
            let classes: std::collections::BTreeSet<usize> = y.iter().copied().collect();
            classes
                .into_iter()
                .map(|c| {
                    let mut mean = vec![0.0; dim];
                    let mut count = 0usize;
                    for (row, &l) in x.rows().into_iter().zip(y) {
                        if l == c {
                            for (m, v) in mean.iter_mut().zip(row) {
                                *m += v;
                            }
                            count += 1;
                        }
                    }
                    for m in &mut mean {
                        *m /= count as f64;
                    }
                    (c, mean)
                })
                .collect()
        };
        Self { metric, nearest_neighbor, references, dim }
    }

    pub fn centroid(&self, class: usize) -> Option<&[f64]> {
        self.references.iter().find(|(c, _)| *c == class).map(|(_, v)| v.as_slice())
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
            if self.metric == Metric::Cosine && q.iter().map(|v| v * v).sum::<f64>() == 0.0 {
                return Err(MbfdError::InvalidSignal("zero-norm query under cosine".into()));
            }
            // best score wins; ties go to the lowest class index via the
            // strict comparison over class-sorted references
            let mut best: Option<(usize, f64)> = None;
            for (c, r) in &self.references {
                let score = match self.metric {
                    Metric::Euclidean => -sq_dist(q, r),
                    Metric::Cosine => cosine(q, r),
                };
                let better = match best {
                    None => true,
                    Some((bc, bs)) => score > bs || (score == bs && *c < bc),
                };
                if better {
                    best = Some((*c, score));
                }
            }
            out.push(best.unwrap().0);
        }
        Ok(out)
    }
}
