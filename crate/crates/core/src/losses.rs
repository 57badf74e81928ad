//! Loss functions: cross-entropy, triplet, the S-SDLM combination, the
//! Double loss with learned centers, and the composite two-branch objective.
//!
//! Batch losses reduce by mean. Every loss ships its analytic gradient with
//! respect to the input embeddings; the hinge subgradient at H = 0 is 0.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::MbfdError;
use crate::Result;

const LOG_CLAMP: f64 = 1e-12;

/// Weights of the composite objectives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    /// Triplet/Double margin m.
    pub margin: f64,
    /// γ weighting the positive and center distances in the Double loss.
    pub gamma: f64,
    /// λ on the entropy term of the S-SDLM loss.
    pub lambda_ssdlm: f64,
    /// λ on the MLP-branch Double loss when combining the two branches.
    pub lambda_double: f64,
    /// Λ on the combined Double loss in the total objective.
    pub lambda_total: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { margin: 1.0, gamma: 0.4, lambda_ssdlm: 1.0, lambda_double: 0.3, lambda_total: 0.01 }
    }
}

/// Mean cross-entropy of probability rows against target rows.
pub fn cross_entropy(targets: &Array2<f64>, probs: &Array2<f64>) -> Result<f64> {
    if targets.dim() != probs.dim() {
        return Err(MbfdError::ShapeMismatch(format!(
            "targets {:?} vs probs {:?}",
            targets.dim(),
            probs.dim()
        )));
    }
    let b = targets.dim().0;
    let mut total = 0.0;
    for (y, p) in targets.iter().zip(probs.iter()) {
        if *y != 0.0 {
            total -= y * p.max(LOG_CLAMP).ln();
        }
    }
    Ok(total / b as f64)
}

/// Mean cross-entropy with integer class labels.
pub fn cross_entropy_labels(probs: &Array2<f64>, labels: &[usize]) -> Result<f64> {
    let (b, c) = probs.dim();
    if labels.len() != b {
        return Err(MbfdError::ShapeMismatch(format!(
            "expected {b} labels, got {}",
            labels.len()
        )));
    }
    let mut total = 0.0;
    for (row, &l) in probs.rows().into_iter().zip(labels) {
        if l >= c {
            return Err(MbfdError::UnknownLabel(l));
        }
        total -= row[l].max(LOG_CLAMP).ln();
    }
    Ok(total / b as f64)
}

/// Gradient of mean cross-entropy w.r.t. the pre-softmax logits:
/// (softmax − one-hot) / batch.
pub fn cross_entropy_grad_logits(probs: &Array2<f64>, labels: &[usize]) -> Array2<f64> {
    let b = probs.dim().0;
    let mut g = probs.clone();
    for (i, &l) in labels.iter().enumerate() {
        g[[i, l]] -= 1.0;
    }
    g.mapv_inplace(|v| v / b as f64);
    g
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_dims(mats: &[&Array2<f64>]) -> Result<()> {
    let d0 = mats[0].dim();
    for m in &mats[1..] {
        if m.dim() != d0 {
            return Err(MbfdError::ShapeMismatch(format!(
                "expected {d0:?}, got {:?}",
                m.dim()
            )));
        }
    }
    Ok(())
}

/// Mean over triplet rows of max(d²(a,p) − d²(a,n) + m, 0).
pub fn triplet_loss(a: &Array2<f64>, p: &Array2<f64>, n: &Array2<f64>, m: f64) -> Result<f64> {
    check_dims(&[a, p, n])?;
    let b = a.dim().0;
    let mut total = 0.0;
    for i in 0..b {
        let (ra, rp, rn) =
            (a.row(i).to_vec(), p.row(i).to_vec(), n.row(i).to_vec());
        let h = sq_dist(&ra, &rp) - sq_dist(&ra, &rn) + m;
        total += h.max(0.0);
    }
    Ok(total / b as f64)
}

/// Gradients of [`triplet_loss`] w.r.t. (a, p, n).
pub fn triplet_grads(
    a: &Array2<f64>,
    p: &Array2<f64>,
    n: &Array2<f64>,
    m: f64,
) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
    let (b, d) = a.dim();
    let scale = 1.0 / b as f64;
    let mut da = Array2::zeros((b, d));
    let mut dp = Array2::zeros((b, d));
    let mut dn = Array2::zeros((b, d));
    for i in 0..b {
        let h = sq_dist(a.row(i).as_slice().unwrap(), p.row(i).as_slice().unwrap())
            - sq_dist(a.row(i).as_slice().unwrap(), n.row(i).as_slice().unwrap())
            + m;
        if h > 0.0 {
            for j in 0..d {
                let (xa, xp, xn) = (a[[i, j]], p[[i, j]], n[[i, j]]);
                da[[i, j]] = scale * 2.0 * (xn - xp);
                dp[[i, j]] = scale * -2.0 * (xa - xp);
                dn[[i, j]] = scale * 2.0 * (xa - xn);
            }
        }
    }
    (da, dp, dn)
}

/// Combined S-SDLM objective: triplet + λ·entropy.
pub fn ssdlm_loss(triplet: f64, entropy: f64, lambda: f64) -> f64 {
    triplet + lambda * entropy
}

/// Single-triplet Double-loss argument:
/// H = γ(d²(a,p) + d²(a,C)) − d²(a,n) + m.
pub fn double_h(a: &[f64], p: &[f64], n: &[f64], c: &[f64], m: f64, gamma: f64) -> Result<f64> {
    if p.len() != a.len() || n.len() != a.len() || c.len() != a.len() {
        return Err(MbfdError::ShapeMismatch(format!(
            "expected dim {}, got {}/{}/{}",
            a.len(),
            p.len(),
            n.len(),
            c.len()
        )));
    }
    Ok(gamma * (sq_dist(a, p) + sq_dist(a, c)) - sq_dist(a, n) + m)
}

/// Mean over triplet rows of max(H, 0); one branch of the Double loss.
pub fn double_loss_branch(
    a: &Array2<f64>,
    p: &Array2<f64>,
    n: &Array2<f64>,
    c: &Array2<f64>,
    m: f64,
    gamma: f64,
) -> Result<f64> {
    check_dims(&[a, p, n, c])?;
    let b = a.dim().0;
    let mut total = 0.0;
    for i in 0..b {
        let h = double_h(
            a.row(i).as_slice().unwrap(),
            p.row(i).as_slice().unwrap(),
            n.row(i).as_slice().unwrap(),
            c.row(i).as_slice().unwrap(),
            m,
            gamma,
        )?;
        total += h.max(0.0);
    }
    Ok(total / b as f64)
}

/// Gradients of [`double_loss_branch`] w.r.t. (a, p, n, C).
pub fn double_grads(
    a: &Array2<f64>,
    p: &Array2<f64>,
    n: &Array2<f64>,
    c: &Array2<f64>,
    m: f64,
    gamma: f64,
) -> (Array2<f64>, Array2<f64>, Array2<f64>, Array2<f64>) {
    let (b, d) = a.dim();
    let scale = 1.0 / b as f64;
    let mut da = Array2::zeros((b, d));
    let mut dp = Array2::zeros((b, d));
    let mut dn = Array2::zeros((b, d));
    let mut dc = Array2::zeros((b, d));
    for i in 0..b {
        let h = double_h(
            a.row(i).as_slice().unwrap(),
            p.row(i).as_slice().unwrap(),
            n.row(i).as_slice().unwrap(),
            c.row(i).as_slice().unwrap(),
            m,
            gamma,
        )
        .unwrap();
        if h > 0.0 {
            for j in 0..d {
                let (xa, xp, xn, xc) = (a[[i, j]], p[[i, j]], n[[i, j]], c[[i, j]]);
                da[[i, j]] = scale * (2.0 * gamma * ((xa - xp) + (xa - xc)) - 2.0 * (xa - xn));
                dp[[i, j]] = scale * -2.0 * gamma * (xa - xp);
                dn[[i, j]] = scale * 2.0 * (xa - xn);
                dc[[i, j]] = scale * -2.0 * gamma * (xa - xc);
            }
        }
    }
    (da, dp, dn, dc)
}

/// Total two-branch objective:
/// L = entropy + Λ·(double_cnn + λ·double_mlp).
pub fn total_loss(entropy: f64, double_cnn: f64, double_mlp: f64, cfg: &LossConfig) -> f64 {
    entropy + cfg.lambda_total * (double_cnn + cfg.lambda_double * double_mlp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array};
    use rand::{Rng as _, SeedableRng as _};
    use rand_chacha::ChaCha8Rng;

    fn randmat(rng: &mut ChaCha8Rng, b: usize, d: usize) -> Array2<f64> {
        Array::from_shape_fn((b, d), |_| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn cross_entropy_examples() {
        let ce = |y: Array2<f64>, p: Array2<f64>| cross_entropy(&y, &p).unwrap();
        assert!(ce(array![[1.0, 0.0]], array![[1.0, 0.0]]).abs() < 1e-12);
        assert!((ce(array![[1.0, 0.0]], array![[0.5, 0.5]]) - 2f64.ln()).abs() < 1e-12);
        assert!((ce(array![[0.0, 1.0]], array![[0.9, 0.1]]) - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_clamps_zero_probability() {
        let l = cross_entropy(&array![[1.0, 0.0]], &array![[0.0, 1.0]]).unwrap();
        assert!(l.is_finite());
        assert!((l - (-(1e-12f64).ln())).abs() < 1e-6);
    }

    #[test]
    fn cross_entropy_label_form_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(70);
        let mut probs = randmat(&mut rng, 4, 3).mapv(f64::exp);
        for mut row in probs.rows_mut() {
            let s = row.sum();
            row.mapv_inplace(|v| v / s);
        }
        let labels = [0usize, 2, 1, 1];
        let mut onehot = Array2::zeros((4, 3));
        for (i, &l) in labels.iter().enumerate() {
            onehot[[i, l]] = 1.0;
        }
        let a = cross_entropy(&onehot, &probs).unwrap();
        let b = cross_entropy_labels(&probs, &labels).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn triplet_examples() {
        // Xa = Xp, d²an = 2, m = 1 -> max(-1, 0) = 0
        let a = array![[0.0, 0.0]];
        let n = array![[1.0, 1.0]];
        assert_eq!(triplet_loss(&a, &a, &n, 1.0).unwrap(), 0.0);
        // d²ap = 1, d²an = 0.5, m = 0.5 -> 1.0
        let p = array![[1.0, 0.0]];
        let n = array![[0.5f64.sqrt(), 0.0]];
        let l = triplet_loss(&a, &p, &n, 0.5).unwrap();
        assert!((l - 1.0).abs() < 1e-12);
    }

    #[test]
    fn triplet_matches_brute_force_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let (a, p, n) = (randmat(&mut rng, 7, 5), randmat(&mut rng, 7, 5), randmat(&mut rng, 7, 5));
        let m = 0.7;
        let mut expect = 0.0;
        for i in 0..7 {
            let mut dap = 0.0;
            let mut dan = 0.0;
            for j in 0..5 {
                dap += (a[[i, j]] - p[[i, j]]).powi(2);
                dan += (a[[i, j]] - n[[i, j]]).powi(2);
            }
            expect += (dap - dan + m).max(0.0);
        }
        expect /= 7.0;
        assert!((triplet_loss(&a, &p, &n, m).unwrap() - expect).abs() < 1e-10);
    }

    #[test]
    fn double_h_examples() {
        // Xa = Xp = C, d²an = 0, m = 1 -> H = 1
        let z = [0.0, 0.0];
        assert_eq!(double_h(&z, &z, &z, &z, 1.0, 0.4).unwrap(), 1.0);
        // γ=0.4, d²ap=1, d²aC=1, d²an=2, m=1 -> -0.2
        let a = [0.0, 0.0];
        let p = [1.0, 0.0];
        let c = [0.0, 1.0];
        let n = [1.0, 1.0];
        let h = double_h(&a, &p, &n, &c, 1.0, 0.4).unwrap();
        assert!((h - -0.2).abs() < 1e-12);
    }

    #[test]
    fn double_branch_matches_brute_force_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(72);
        let mats: Vec<_> = (0..4).map(|_| randmat(&mut rng, 6, 4)).collect();
        let (m, g) = (0.9, 0.4);
        let mut expect = 0.0;
        for i in 0..6 {
            let mut d = [0.0; 3]; // ap, ac, an
            for j in 0..4 {
                d[0] += (mats[0][[i, j]] - mats[1][[i, j]]).powi(2);
                d[2] += (mats[0][[i, j]] - mats[2][[i, j]]).powi(2);
                d[1] += (mats[0][[i, j]] - mats[3][[i, j]]).powi(2);
            }
            expect += (g * (d[0] + d[1]) - d[2] + m).max(0.0);
        }
        expect /= 6.0;
        let got = double_loss_branch(&mats[0], &mats[1], &mats[2], &mats[3], m, g).unwrap();
        assert!((got - expect).abs() < 1e-10);
    }

    #[test]
    fn composite_losses() {
        assert_eq!(ssdlm_loss(1.0, 2.0, 0.5), 2.0);
        assert_eq!(ssdlm_loss(1.5, 9.0, 0.0), 1.5);
        let cfg = LossConfig::default();
        assert!((total_loss(1.0, 2.0, 1.0, &cfg) - 1.023).abs() < 1e-12);
        let mut zero = cfg;
        zero.lambda_total = 0.0;
        assert_eq!(total_loss(1.0, 5.0, 5.0, &zero), 1.0);
    }

    #[test]
    fn satisfied_margins_give_zero_loss() {
        // positives on top of the anchor, negatives far away
        let a = Array2::zeros((3, 2));
        let n = Array2::from_elem((3, 2), 10.0);
        assert_eq!(triplet_loss(&a, &a, &n, 1.0).unwrap(), 0.0);
        assert_eq!(double_loss_branch(&a, &a, &n, &a, 1.0, 0.4).unwrap(), 0.0);
    }

    #[test]
    fn translation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let (a, p, n, c) =
            (randmat(&mut rng, 5, 4), randmat(&mut rng, 5, 4), randmat(&mut rng, 5, 4), randmat(&mut rng, 5, 4));
        let shift = Array2::from_elem((5, 4), 3.25);
        let t0 = triplet_loss(&a, &p, &n, 1.0).unwrap();
        let t1 = triplet_loss(&(&a + &shift), &(&p + &shift), &(&n + &shift), 1.0).unwrap();
        assert!((t0 - t1).abs() < 1e-10);
        let d0 = double_loss_branch(&a, &p, &n, &c, 1.0, 0.4).unwrap();
        let d1 = double_loss_branch(&(&a + &shift), &(&p + &shift), &(&n + &shift), &(&c + &shift), 1.0, 0.4)
            .unwrap();
        assert!((d0 - d1).abs() < 1e-10);
    }

    #[test]
    fn increasing_negative_distance_never_increases_h() {
        let a = [0.0, 0.0];
        let p = [0.4, 0.1];
        let c = [0.2, 0.3];
        let mut prev = f64::INFINITY;
        for k in 1..10 {
            let n = [0.3 * k as f64, 0.0];
            let h = double_h(&a, &p, &n, &c, 1.0, 0.4).unwrap();
            assert!(h <= prev);
            prev = h;
        }
    }

    /// Central finite differences on every embedding input, skipping batches
    /// whose hinge argument sits within 1e-3 of the kink.
    fn fd_check<F>(mats: &mut [Array2<f64>], loss: F)
    where
        F: Fn(&[Array2<f64>]) -> (f64, Vec<Array2<f64>>),
    {
        let (_, grads) = loss(mats);
        let h = 1e-6;
        for mi in 0..mats.len() {
            for idx in 0..mats[mi].len() {
                mats[mi].as_slice_mut().unwrap()[idx] += h;
                let (up, _) = loss(mats);
                mats[mi].as_slice_mut().unwrap()[idx] -= 2.0 * h;
                let (dn, _) = loss(mats);
                mats[mi].as_slice_mut().unwrap()[idx] += h;
                let fd = (up - dn) / (2.0 * h);
                let got = grads[mi].as_slice().unwrap()[idx];
                assert!((got - fd).abs() < 1e-5, "mat {mi} idx {idx}: {got} vs {fd}");
            }
        }
    }

    #[test]
    fn triplet_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(74);
        let m = 0.8;
        let mut mats = vec![randmat(&mut rng, 4, 3), randmat(&mut rng, 4, 3), randmat(&mut rng, 4, 3)];
        // keep all hinge arguments away from the kink
        for i in 0..4 {
            let h = sq_dist(mats[0].row(i).as_slice().unwrap(), mats[1].row(i).as_slice().unwrap())
                - sq_dist(mats[0].row(i).as_slice().unwrap(), mats[2].row(i).as_slice().unwrap())
                + m;
            assert!(h.abs() > 1e-3, "degenerate fixture");
        }
        fd_check(&mut mats, |ms| {
            let l = triplet_loss(&ms[0], &ms[1], &ms[2], m).unwrap();
            let (da, dp, dn) = triplet_grads(&ms[0], &ms[1], &ms[2], m);
            (l, vec![da, dp, dn])
        });
    }

    #[test]
    fn double_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(75);
        let (m, g) = (0.8, 0.4);
        let mut mats: Vec<_> = (0..4).map(|_| randmat(&mut rng, 4, 3)).collect();
        for i in 0..4 {
            let h = double_h(
                mats[0].row(i).as_slice().unwrap(),
                mats[1].row(i).as_slice().unwrap(),
                mats[2].row(i).as_slice().unwrap(),
                mats[3].row(i).as_slice().unwrap(),
                m,
                g,
            )
            .unwrap();
            assert!(h.abs() > 1e-3, "degenerate fixture");
        }
        fd_check(&mut mats, |ms| {
            let l = double_loss_branch(&ms[0], &ms[1], &ms[2], &ms[3], m, g).unwrap();
            let (da, dp, dn, dc) = double_grads(&ms[0], &ms[1], &ms[2], &ms[3], m, g);
            (l, vec![da, dp, dn, dc])
        });
    }

    #[test]
    fn dim_mismatch_is_rejected() {
        let a = Array2::<f64>::zeros((2, 3));
        let b = Array2::<f64>::zeros((2, 4));
        assert!(triplet_loss(&a, &a, &b, 1.0).is_err());
        assert!(double_h(&[0.0; 3], &[0.0; 3], &[0.0; 3], &[0.0; 2], 1.0, 0.4).is_err());
    }
}
