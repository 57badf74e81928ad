use ndarray::{Array2, Array3, ArrayD, Axis, Ix2};
use rand::Rng;

use super::{init_uniform, Params, Tensor};

/// Query block length for the streaming (eval) path. Keeps the score matrix
/// at `QUERY_BLOCK x T` instead of `T x T` for long inputs.
const QUERY_BLOCK: usize = 256;

/// Multihead self-attention over (batch, time, model_dim).
///
/// Scaled dot-product attention with per-head key/value dimension `key_dim`
/// and an output projection back to `model_dim`. The residual connection and
/// layer norm around the block belong to the caller.
#[derive(Debug, Clone)]
pub struct MultiHeadSelfAttention {
    pub wq: Tensor, // (model, heads * key_dim)
    pub bq: Tensor,
    pub wk: Tensor,
    pub bk: Tensor,
    pub wv: Tensor,
    pub bv: Tensor,
    pub wo: Tensor, // (heads * key_dim, model)
    pub bo: Tensor,
    pub heads: usize,
    pub key_dim: usize,
    pub model_dim: usize,
    cache: Option<AttnCache>,
}

#[derive(Debug, Clone)]
struct AttnCache {
    x: Array3<f64>,
    q: Vec<Array2<f64>>,       // per sample (T, H*D)
    k: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    attn: Vec<Vec<Array2<f64>>>, // per sample, per head (T, T)
    concat: Vec<Array2<f64>>,  // per sample (T, H*D)
}

impl MultiHeadSelfAttention {
    pub fn new<R: Rng>(model_dim: usize, heads: usize, key_dim: usize, rng: &mut R) -> Self {
        let inner = heads * key_dim;
        let mk = |i: usize, o: usize, rng: &mut R| Tensor::new(init_uniform(&[i, o], i, rng));
        Self {
            wq: mk(model_dim, inner, rng),
            bq: Tensor::new(ArrayD::zeros(vec![inner])),
            wk: mk(model_dim, inner, rng),
            bk: Tensor::new(ArrayD::zeros(vec![inner])),
            wv: mk(model_dim, inner, rng),
            bv: Tensor::new(ArrayD::zeros(vec![inner])),
            wo: mk(inner, model_dim, rng),
            bo: Tensor::new(ArrayD::zeros(vec![model_dim])),
            heads,
            key_dim,
            model_dim,
            cache: None,
        }
    }

    fn project(x: &Array2<f64>, w: &Tensor, b: &Tensor) -> Array2<f64> {
        let wv = w.value.view().into_dimensionality::<Ix2>().unwrap();
        let mut y = x.dot(&wv);
        for mut row in y.rows_mut() {
            for (v, bv) in row.iter_mut().zip(b.value.iter()) {
                *v += bv;
            }
        }
        y
    }

    pub fn forward(&mut self, x: &Array3<f64>, cache: bool) -> Array3<f64> {
        let (b, t, c) = x.dim();
        assert_eq!(c, self.model_dim);
        let d = self.key_dim;
        let scale = 1.0 / (d as f64).sqrt();
        let mut out = Array3::zeros((b, t, c));
        let mut cq = Vec::new();
        let mut ck = Vec::new();
        let mut cv = Vec::new();
        let mut cattn = Vec::new();
        let mut cconcat = Vec::new();
        for s in 0..b {
            let xs = x.index_axis(Axis(0), s).to_owned();
            let q = Self::project(&xs, &self.wq, &self.bq);
            let k = Self::project(&xs, &self.wk, &self.bk);
            let v = Self::project(&xs, &self.wv, &self.bv);
            let mut concat = Array2::zeros((t, self.heads * d));
            let mut heads_attn = Vec::new();
            for h in 0..self.heads {
                let cols = h * d..(h + 1) * d;
                let qh = q.slice(ndarray::s![.., cols.clone()]).to_owned();
                let kh = k.slice(ndarray::s![.., cols.clone()]).to_owned();
                let vh = v.slice(ndarray::s![.., cols.clone()]).to_owned();
                if cache {
                    let mut scores = qh.dot(&kh.t());
                    scores.mapv_inplace(|z| z * scale);
                    softmax_rows_inplace(&mut scores);
                    let oh = scores.dot(&vh);
                    concat.slice_mut(ndarray::s![.., cols]).assign(&oh);
                    heads_attn.push(scores);
                } else {
                    // streaming: bounded memory for long sequences
                    let mut start = 0;
                    while start < t {
                        let stop = (start + QUERY_BLOCK).min(t);
                        let qb = qh.slice(ndarray::s![start..stop, ..]);
                        let mut scores = qb.dot(&kh.t());
                        scores.mapv_inplace(|z| z * scale);
                        softmax_rows_inplace(&mut scores);
                        let ob = scores.dot(&vh);
                        concat.slice_mut(ndarray::s![start..stop, cols.clone()]).assign(&ob);
                        start = stop;
                    }
                }
            }
            let ys = Self::project(&concat, &self.wo, &self.bo);
            out.index_axis_mut(Axis(0), s).assign(&ys);
            if cache {
                cq.push(q);
                ck.push(k);
                cv.push(v);
                cattn.push(heads_attn);
                cconcat.push(concat);
            }
        }
        self.cache = if cache {
            Some(AttnCache { x: x.clone(), q: cq, k: ck, v: cv, attn: cattn, concat: cconcat })
        } else {
            None
        };
        out
    }

    pub fn backward(&mut self, dy: &Array3<f64>) -> Array3<f64> {
        let cache = self.cache.take().expect("backward without cached forward");
        let (b, t, c) = dy.dim();
        let d = self.key_dim;
        let scale = 1.0 / (d as f64).sqrt();
        let wo = self.wo.value.view().into_dimensionality::<Ix2>().unwrap().to_owned();
        let wq = self.wq.value.view().into_dimensionality::<Ix2>().unwrap().to_owned();
        let wk = self.wk.value.view().into_dimensionality::<Ix2>().unwrap().to_owned();
        let wv = self.wv.value.view().into_dimensionality::<Ix2>().unwrap().to_owned();
        let mut dx = Array3::zeros((b, t, c));
        for s in 0..b {
            let dys = dy.index_axis(Axis(0), s).to_owned();
            let xs = cache.x.index_axis(Axis(0), s).to_owned();
            // output projection
            let dconcat = dys.dot(&wo.t());
            {
                let mut dwo = self.wo.grad.view_mut().into_dimensionality::<Ix2>().unwrap();
                dwo.scaled_add(1.0, &cache.concat[s].t().dot(&dys));
            }
            self.bo.grad.scaled_add(1.0, &dys.sum_axis(Axis(0)).into_dyn());
            // per-head attention backward
            let mut dq = Array2::<f64>::zeros((t, self.heads * d));
            let mut dk = Array2::<f64>::zeros((t, self.heads * d));
            let mut dv = Array2::<f64>::zeros((t, self.heads * d));
            for h in 0..self.heads {
                let cols = h * d..(h + 1) * d;
                let a = &cache.attn[s][h];
                let qh = cache.q[s].slice(ndarray::s![.., cols.clone()]).to_owned();
                let kh = cache.k[s].slice(ndarray::s![.., cols.clone()]).to_owned();
                let vh = cache.v[s].slice(ndarray::s![.., cols.clone()]).to_owned();
                let doh = dconcat.slice(ndarray::s![.., cols.clone()]).to_owned();
                let da = doh.dot(&vh.t());
                dv.slice_mut(ndarray::s![.., cols.clone()]).assign(&a.t().dot(&doh));
                // softmax backward per row
                let mut ds = Array2::<f64>::zeros((t, t));
                for r in 0..t {
                    let dot: f64 =
                        (0..t).map(|j| da[[r, j]] * a[[r, j]]).sum();
                    for j in 0..t {
                        ds[[r, j]] = a[[r, j]] * (da[[r, j]] - dot);
                    }
                }
                ds.mapv_inplace(|z| z * scale);
                dq.slice_mut(ndarray::s![.., cols.clone()]).assign(&ds.dot(&kh));
                dk.slice_mut(ndarray::s![.., cols]).assign(&ds.t().dot(&qh));
            }
            // input projections
            {
                let mut g = self.wq.grad.view_mut().into_dimensionality::<Ix2>().unwrap();
                g.scaled_add(1.0, &xs.t().dot(&dq));
            }
            {
                let mut g = self.wk.grad.view_mut().into_dimensionality::<Ix2>().unwrap();
                g.scaled_add(1.0, &xs.t().dot(&dk));
            }
            {
                let mut g = self.wv.grad.view_mut().into_dimensionality::<Ix2>().unwrap();
                g.scaled_add(1.0, &xs.t().dot(&dv));
            }
            self.bq.grad.scaled_add(1.0, &dq.sum_axis(Axis(0)).into_dyn());
            self.bk.grad.scaled_add(1.0, &dk.sum_axis(Axis(0)).into_dyn());
            self.bv.grad.scaled_add(1.0, &dv.sum_axis(Axis(0)).into_dyn());
            let dxs = dq.dot(&wq.t()) + dk.dot(&wk.t()) + dv.dot(&wv.t());
            dx.index_axis_mut(Axis(0), s).assign(&dxs);
        }
        dx
    }
}

fn softmax_rows_inplace(m: &mut Array2<f64>) {
    for mut row in m.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

impl Params for MultiHeadSelfAttention {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f(&format!("{prefix}wq"), &mut self.wq);
        f(&format!("{prefix}bq"), &mut self.bq);
        f(&format!("{prefix}wk"), &mut self.wk);
        f(&format!("{prefix}bk"), &mut self.bk);
        f(&format!("{prefix}wv"), &mut self.wv);
        f(&format!("{prefix}bv"), &mut self.bv);
        f(&format!("{prefix}wo"), &mut self.wo);
        f(&format!("{prefix}bo"), &mut self.bo);
    }
}
