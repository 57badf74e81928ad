use ndarray::Array2;
use rand::{Rng, SeedableRng as _};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::majority;
use crate::error::MbfdError;
use crate::Result;

const C: f64 = 1.0;
const TOL: f64 = 1e-3;
const MAX_PASSES: usize = 5;
const MAX_ITERS: usize = 10_000;

/// One binary RBF classifier of the one-vs-one decomposition.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct BinarySvm {
    class_pos: usize,
    class_neg: usize,
    /// Support vectors with their α·y coefficients.
    vectors: Vec<Vec<f64>>,
    coeffs: Vec<f64>,
    bias: f64,
}

impl BinarySvm {
    fn decision(&self, q: &[f64], gamma: f64) -> f64 {
        self.vectors
            .iter()
            .zip(&self.coeffs)
            .map(|(v, c)| c * rbf(v, q, gamma))
            .sum::<f64>()
            + self.bias
    }
}

fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d).exp()
}

/// RBF-kernel SVM with C = 1.0, gamma = "scale", trained by SMO-style dual
/// optimization, one-vs-one across classes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SvmModel {
    machines: Vec<BinarySvm>,
    gamma: f64,
    dim: usize,
}

/// Simplified sequential minimal optimization on a precomputed kernel.
fn smo(k: &Array2<f64>, y: &[f64], rng: &mut ChaCha8Rng) -> (Vec<f64>, f64) {
    let n = y.len();
    let mut alpha = vec![0.0f64; n];
    let mut b = 0.0f64;
    let f = |alpha: &[f64], b: f64, i: usize| -> f64 {
        (0..n).map(|t| alpha[t] * y[t] * k[[t, i]]).sum::<f64>() + b
    };
    let mut passes = 0usize;
    let mut iters = 0usize;
    while passes < MAX_PASSES && iters < MAX_ITERS {
        iters += 1;
        let mut changed = 0usize;
        for i in 0..n {
            let ei = f(&alpha, b, i) - y[i];
            if (y[i] * ei < -TOL && alpha[i] < C) || (y[i] * ei > TOL && alpha[i] > 0.0) {
                let mut j = rng.gen_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                let ej = f(&alpha, b, j) - y[j];
                let (ai_old, aj_old) = (alpha[i], alpha[j]);
                let (lo, hi) = if y[i] != y[j] {
                    ((aj_old - ai_old).max(0.0), (C + aj_old - ai_old).min(C))
                } else {
                    ((ai_old + aj_old - C).max(0.0), (ai_old + aj_old).min(C))
                };
                if hi - lo < 1e-12 {
                    continue;
                }
                let eta = 2.0 * k[[i, j]] - k[[i, i]] - k[[j, j]];
                if eta >= 0.0 {
                    continue;
                }
                let mut aj = aj_old - y[j] * (ei - ej) / eta;
                aj = aj.clamp(lo, hi);
                if (aj - aj_old).abs() < 1e-5 {
                    continue;
                }
                let ai = ai_old + y[i] * y[j] * (aj_old - aj);
                alpha[i] = ai;
                alpha[j] = aj;
                let b1 = b - ei - y[i] * (ai - ai_old) * k[[i, i]] - y[j] * (aj - aj_old) * k[[i, j]];
                let b2 = b - ej - y[i] * (ai - ai_old) * k[[i, j]] - y[j] * (aj - aj_old) * k[[j, j]];
                b = if alpha[i] > 0.0 && alpha[i] < C {
                    b1
                } else if alpha[j] > 0.0 && alpha[j] < C {
                    b2
                } else {
                    (b1 + b2) / 2.0
                };
                changed += 1;
            }
        }
        if changed == 0 {
            passes += 1;
        } else {
            passes = 0;
        }
    }
    (alpha, b)
}

impl SvmModel {
    pub fn fit(x: &Array2<f64>, y: &[usize], seed: u64) -> Result<Self> {
        let (n, dim) = x.dim();
        let classes: Vec<usize> = {
            let set: std::collections::BTreeSet<usize> = y.iter().copied().collect();
            set.into_iter().collect()
        };
        if classes.len() < 2 {
            return Err(MbfdError::InvalidConfig("SVM needs at least two classes".into()));
        }
        // gamma = "scale": 1 / (n_features * var over all matrix entries)
        let mean = x.sum() / (n * dim) as f64;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n * dim) as f64;
        let gamma = if var > 0.0 { 1.0 / (dim as f64 * var) } else { 1.0 / dim as f64 };

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut machines = Vec::new();
        for (ci, &ca) in classes.iter().enumerate() {
            for &cb in &classes[ci + 1..] {
                let idx: Vec<usize> =
                    (0..n).filter(|&i| y[i] == ca || y[i] == cb).collect();
                let labels: Vec<f64> =
                    idx.iter().map(|&i| if y[i] == ca { 1.0 } else { -1.0 }).collect();
                let m = idx.len();
                let mut k = Array2::zeros((m, m));
                for a in 0..m {
                    for b in a..m {
                        let v = rbf(
                            x.row(idx[a]).as_slice().unwrap(),
                            x.row(idx[b]).as_slice().unwrap(),
                            gamma,
                        );
                        k[[a, b]] = v;
                        k[[b, a]] = v;
                    }
                }
                let (alpha, bias) = smo(&k, &labels, &mut rng);
                let mut vectors = Vec::new();
                let mut coeffs = Vec::new();
                for (t, &a) in alpha.iter().enumerate() {
                    if a > 0.0 {
                        vectors.push(x.row(idx[t]).to_vec());
                        coeffs.push(a * labels[t]);
                    }
                }
                machines.push(BinarySvm { class_pos: ca, class_neg: cb, vectors, coeffs, bias });
            }
        }
        Ok(Self { machines, gamma, dim })
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
                let votes: Vec<usize> = self
                    .machines
                    .iter()
                    .map(|m| if m.decision(q, self.gamma) >= 0.0 { m.class_pos } else { m.class_neg })
                    .collect();
                majority(&votes)
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(rng: &mut ChaCha8Rng, per_class: usize, classes: usize) -> (Array2<f64>, Vec<usize>) {
        let n = per_class * classes;
        let mut x = Array2::zeros((n, 3));
        let mut y = Vec::new();
        for i in 0..n {
            let c = i % classes;
            for j in 0..3 {
                x[[i, j]] = c as f64 * 6.0 + rng.gen_range(-1.0..1.0);
            }
            y.push(c);
        }
        (x, y)
    }

    #[test]
    fn separable_two_class_blobs_train_to_full_accuracy() {
        let mut rng = ChaCha8Rng::seed_from_u64(120);
        let (x, y) = blobs(&mut rng, 20, 2);
        let m = SvmModel::fit(&x, &y, 1).unwrap();
        assert_eq!(m.predict(&x).unwrap(), y);
    }

    #[test]
    fn one_vs_one_handles_three_classes() {
        let mut rng = ChaCha8Rng::seed_from_u64(121);
        let (x, y) = blobs(&mut rng, 15, 3);
        let m = SvmModel::fit(&x, &y, 2).unwrap();
        assert_eq!(m.machines.len(), 3);
        assert_eq!(m.predict(&x).unwrap(), y);
    }

    #[test]
    fn single_class_input_is_rejected() {
        let x = Array2::zeros((4, 2));
        assert!(SvmModel::fit(&x, &[1, 1, 1, 1], 0).is_err());
    }

    #[test]
    fn same_seed_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(122);
        let (x, y) = blobs(&mut rng, 10, 2);
        let q = Array2::from_shape_fn((5, 3), |_| rng.gen_range(-1.0..7.0));
        let a = SvmModel::fit(&x, &y, 9).unwrap().predict(&q).unwrap();
        let b = SvmModel::fit(&x, &y, 9).unwrap().predict(&q).unwrap();
        assert_eq!(a, b);
    }
}
