use ndarray::{Array2, Array3, Axis};
use rand::Rng;

use crate::nn::{
    global_avg_pool, global_avg_pool_backward, softmax_rows, BatchNorm, Conv1d, LayerNorm, Linear,
    MaxPool1d, Mode, MultiHeadSelfAttention, Params, Tensor,
};

/// Hyperparameters of the CNN backbone. `full` is the published
/// configuration; `tiny` is a proportionally scaled-down variant small
/// enough for finite-difference gradient checks.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct CnnConfig {
    pub input_len: usize,
    pub classes: usize,
    pub ch_mid: usize,
    pub ch_out: usize,
    pub kernel0: usize,
    pub kernel: usize,
    pub pool: usize,
    pub heads: usize,
    pub key_dim: usize,
}

impl CnnConfig {
    pub fn full(input_len: usize, classes: usize) -> Self {
        Self {
            input_len,
            classes,
            ch_mid: 48,
            ch_out: 96,
            kernel0: 80,
            kernel: 3,
            pool: 4,
            heads: 4,
            key_dim: 48,
        }
    }

    pub fn tiny(classes: usize) -> Self {
        Self {
            input_len: 64,
            classes,
            ch_mid: 2,
            ch_out: 4,
            kernel0: 8,
            kernel: 3,
            pool: 4,
            heads: 2,
            key_dim: 3,
        }
    }
}

/// CNN backbone: Conv-BN-ReLU-MaxPool stem, two Conv-Res blocks, multihead
/// self-attention over time with residual + layer norm, global average pool,
/// and a softmax classification head.
#[derive(Debug, Clone)]
pub struct CnnModel {
    pub cfg: CnnConfig,
    conv0: Conv1d,
    bn0: BatchNorm,
    pool: MaxPool1d,
    // block 1: ch_mid -> ch_out with a 1x1 projection skip
    conv1a: Conv1d,
    bn1a: BatchNorm,
    conv1b: Conv1d,
    bn1b: BatchNorm,
    skip1: Conv1d,
    // block 2: ch_out -> ch_out with an identity skip
    conv2a: Conv1d,
    bn2a: BatchNorm,
    conv2b: Conv1d,
    bn2b: BatchNorm,
    attn: MultiHeadSelfAttention,
    ln: LayerNorm,
    head: Linear,
    cache: Option<CnnCache>,
}

/// Batch forward output: embeddings are rows of (batch, ch_out).
#[derive(Debug, Clone)]
pub struct CnnOutput {
    pub embeddings: Array2<f64>,
    pub logits: Array2<f64>,
    pub probs: Array2<f64>,
}

#[derive(Debug, Clone)]
struct CnnCache {
    mask0: Array3<f64>,
    mask1a: Array3<f64>,
    mask1: Array3<f64>,
    mask2a: Array3<f64>,
    mask2: Array3<f64>,
    attn_t: usize,
}

fn relu_inplace(x: &mut Array3<f64>) -> Array3<f64> {
    let mask = x.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
    x.mapv_inplace(|v| v.max(0.0));
    mask
}

/// (batch, ch, time) -> (batch, time, ch)
fn to_btc(x: &Array3<f64>) -> Array3<f64> {
    x.clone().permuted_axes([0, 2, 1]).as_standard_layout().to_owned()
}

fn to_bct(x: &Array3<f64>) -> Array3<f64> {
    x.clone().permuted_axes([0, 2, 1]).as_standard_layout().to_owned()
}

impl CnnModel {
    pub fn new<R: Rng>(cfg: CnnConfig, rng: &mut R) -> Self {
        Self {
            conv0: Conv1d::new(1, cfg.ch_mid, cfg.kernel0, rng),
            bn0: BatchNorm::new(cfg.ch_mid),
            pool: MaxPool1d::new(cfg.pool),
            conv1a: Conv1d::new(cfg.ch_mid, cfg.ch_mid, cfg.kernel, rng),
            bn1a: BatchNorm::new(cfg.ch_mid),
            conv1b: Conv1d::new(cfg.ch_mid, cfg.ch_out, cfg.kernel, rng),
            bn1b: BatchNorm::new(cfg.ch_out),
            skip1: Conv1d::new(cfg.ch_mid, cfg.ch_out, 1, rng),
            conv2a: Conv1d::new(cfg.ch_out, cfg.ch_mid, cfg.kernel, rng),
            bn2a: BatchNorm::new(cfg.ch_mid),
            conv2b: Conv1d::new(cfg.ch_mid, cfg.ch_out, cfg.kernel, rng),
            bn2b: BatchNorm::new(cfg.ch_out),
            attn: MultiHeadSelfAttention::new(cfg.ch_out, cfg.heads, cfg.key_dim, rng),
            ln: LayerNorm::new(cfg.ch_out),
            head: Linear::new(cfg.ch_out, cfg.classes, rng),
            cfg,
            cache: None,
        }
    }

    pub fn embedding_dim(&self) -> usize {
        self.cfg.ch_out
    }

    /// `windows` is (batch, time); each row one normalized raw window.
    pub fn forward(&mut self, windows: &Array2<f64>, mode: Mode) -> CnnOutput {
        let (b, t) = windows.dim();
        assert_eq!(t, self.cfg.input_len, "input length mismatch");
        let cache = mode == Mode::Train;
        let x = windows.clone().into_shape_with_order((b, 1, t)).unwrap();

        let mut z = self.bn0.forward(&self.conv0.forward(&x, cache), mode);
        let mask0 = relu_inplace(&mut z);
        let p = self.pool.forward(&z, cache);

        let mut m = self.bn1a.forward(&self.conv1a.forward(&p, cache), mode);
        let mask1a = relu_inplace(&mut m);
        let main1 = self.bn1b.forward(&self.conv1b.forward(&m, cache), mode);
        let mut sum1 = main1 + self.skip1.forward(&p, cache);
        let mask1 = relu_inplace(&mut sum1);

        let mut m = self.bn2a.forward(&self.conv2a.forward(&sum1, cache), mode);
        let mask2a = relu_inplace(&mut m);
        let main2 = self.bn2b.forward(&self.conv2b.forward(&m, cache), mode);
        let mut sum2 = main2 + &sum1;
        let mask2 = relu_inplace(&mut sum2);

        let xt = to_btc(&sum2);
        let a = self.attn.forward(&xt, cache);
        let res = &xt + &a;
        let normed = self.ln.forward(&res, cache);
        let attn_t = normed.dim().1;

        let embeddings = global_avg_pool(&normed);
        let logits = self.head.forward(&embeddings, cache);
        let probs = softmax_rows(&logits);

        self.cache = if cache {
            Some(CnnCache { mask0, mask1a, mask1, mask2a, mask2, attn_t })
        } else {
            None
        };
        CnnOutput { embeddings, logits, probs }
    }

    /// Accumulates parameter gradients from upstream gradients on the
    /// embedding matrix and (optionally) the logits.
    pub fn backward(&mut self, d_emb: &Array2<f64>, d_logits: Option<&Array2<f64>>) {
        let cache = self.cache.take().expect("backward without train-mode forward");
        let mut d_emb = d_emb.clone();
        if let Some(dl) = d_logits {
            d_emb += &self.head.backward(dl);
        }
        let d_normed = global_avg_pool_backward(&d_emb, cache.attn_t);
        let d_res = self.ln.backward(&d_normed);
        let d_xt = self.attn.backward(&d_res) + &d_res;
        let mut d_sum2 = to_bct(&d_xt);
        d_sum2 *= &cache.mask2;

        let mut d_main = self.conv2b.backward(&self.bn2b.backward(&d_sum2));
        d_main *= &cache.mask2a;
        let mut d_sum1 = self.conv2a.backward(&self.bn2a.backward(&d_main));
        d_sum1 += &d_sum2; // identity skip
        d_sum1 *= &cache.mask1;

        let mut d_main = self.conv1b.backward(&self.bn1b.backward(&d_sum1));
        d_main *= &cache.mask1a;
        let mut d_p = self.conv1a.backward(&self.bn1a.backward(&d_main));
        d_p += &self.skip1.backward(&d_sum1);

        let mut d_z = self.pool.backward(&d_p);
        d_z *= &cache.mask0;
        let _ = self.conv0.backward(&self.bn0.backward(&d_z));
    }

    /// Eval-mode embedding extraction, one sample at a time to bound memory
    /// on long inputs.
    pub fn embed(&mut self, windows: &Array2<f64>) -> Array2<f64> {
        let b = windows.dim().0;
        let mut out = Array2::zeros((b, self.embedding_dim()));
        for s in 0..b {
            let row = windows.index_axis(Axis(0), s).to_owned();
            let row = row.into_shape_with_order((1, self.cfg.input_len)).unwrap();
            let y = self.forward(&row, Mode::Eval);
            out.index_axis_mut(Axis(0), s).assign(&y.embeddings.index_axis(Axis(0), 0));
        }
        out
    }
}

impl Params for CnnModel {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor)) {
        self.conv0.visit_params(&format!("{prefix}conv0."), f);
        self.bn0.visit_params(&format!("{prefix}bn0."), f);
        self.conv1a.visit_params(&format!("{prefix}conv1a."), f);
        self.bn1a.visit_params(&format!("{prefix}bn1a."), f);
        self.conv1b.visit_params(&format!("{prefix}conv1b."), f);
        self.bn1b.visit_params(&format!("{prefix}bn1b."), f);
        self.skip1.visit_params(&format!("{prefix}skip1."), f);
        self.conv2a.visit_params(&format!("{prefix}conv2a."), f);
        self.bn2a.visit_params(&format!("{prefix}bn2a."), f);
        self.conv2b.visit_params(&format!("{prefix}conv2b."), f);
        self.bn2b.visit_params(&format!("{prefix}bn2b."), f);
        self.attn.visit_params(&format!("{prefix}attn."), f);
        self.ln.visit_params(&format!("{prefix}ln."), f);
        self.head.visit_params(&format!("{prefix}head."), f);
    }
}
