//! Triplet mining, the optimization loop, and high-level-feature extraction
//! for all four architectures.
//!
//! Training is single-threaded and fully seeded: the same configuration
//! produces a bit-identical loss log.

use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng as _};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backbones::{Architecture, ModelState, Network};
use crate::error::MbfdError;
use crate::losses::{
    cross_entropy_grad_logits, cross_entropy_labels, double_grads, double_loss_branch, ssdlm_loss,
    total_loss, triplet_grads, triplet_loss, LossConfig,
};
use crate::nn::{Adam, Mode, Params as _};
use crate::Result;

/// Optimization hyperparameters. Defaults follow the published setup:
/// 100 epochs, batch size 16, Adam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 100, batch_size: 16, learning_rate: 1e-3, seed: 0 }
    }
}

/// Index triples into one batch.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TripletBatch {
    pub anchors: Vec<usize>,
    pub positives: Vec<usize>,
    pub negatives: Vec<usize>,
}

impl TripletBatch {
    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }
}

/// One training split: raw windows for the CNN branch, feature vectors for
/// the MLP branch, both row-aligned with `labels`.
#[derive(Debug, Clone)]
pub struct TrainSet {
    pub windows: Option<Array2<f64>>,
    pub features: Option<Array2<f64>>,
    pub labels: Vec<usize>,
}

impl TrainSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Per-epoch mean loss components. Inapplicable components stay 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub entropy: f64,
    pub triplet: f64,
    pub double_cnn: f64,
    pub double_mlp: f64,
    pub total: f64,
}

/// For each usable anchor, a uniformly random valid positive and negative.
/// Anchors without a positive (singleton class) or a negative (single-class
/// batch) are skipped.
pub fn mine_triplets<R: Rng>(labels: &[usize], rng: &mut R) -> TripletBatch {
    let mut out = TripletBatch::default();
    for (i, &la) in labels.iter().enumerate() {
        let positives: Vec<usize> =
            (0..labels.len()).filter(|&j| j != i && labels[j] == la).collect();
        let negatives: Vec<usize> = (0..labels.len()).filter(|&j| labels[j] != la).collect();
        if positives.is_empty() || negatives.is_empty() {
            continue;
        }
        out.anchors.push(i);
        out.positives.push(positives[rng.gen_range(0..positives.len())]);
        out.negatives.push(negatives[rng.gen_range(0..negatives.len())]);
    }
    out
}

/// Class-balanced batch order: per-class shuffles interleaved round-robin so
/// every batch mixes classes whenever more than one class exists.
fn batch_order<R: Rng>(labels: &[usize], rng: &mut R) -> Vec<usize> {
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut queues: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        queues[l].push(i);
    }
    for q in &mut queues {
        q.shuffle(rng);
    }
    let mut order = Vec::with_capacity(labels.len());
    let mut cursor = vec![0usize; classes];
    loop {
        let mut advanced = false;
        for (c, q) in queues.iter().enumerate() {
            if cursor[c] < q.len() {
                order.push(q[cursor[c]]);
                cursor[c] += 1;
                advanced = true;
            }
        }
        if !advanced {
            break;
        }
    }
    order
}

fn select_rows(m: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    let d = m.dim().1;
    let mut out = Array2::zeros((idx.len(), d));
    for (r, &i) in idx.iter().enumerate() {
        out.index_axis_mut(Axis(0), r).assign(&m.index_axis(Axis(0), i));
    }
    out
}

fn scatter_rows(target: &mut Array2<f64>, idx: &[usize], grads: &Array2<f64>) {
    for (r, &i) in idx.iter().enumerate() {
        let mut row = target.index_axis_mut(Axis(0), i);
        row += &grads.index_axis(Axis(0), r);
    }
}

fn windows_of<'a>(data: &'a TrainSet) -> Result<&'a Array2<f64>> {
    data.windows
        .as_ref()
        .ok_or_else(|| MbfdError::InvalidConfig("architecture needs raw windows".into()))
}

fn features_of<'a>(data: &'a TrainSet) -> Result<&'a Array2<f64>> {
    data.features
        .as_ref()
        .ok_or_else(|| MbfdError::InvalidConfig("architecture needs feature vectors".into()))
}

/// Builds a fresh model for `arch` and trains it on `data`.
pub fn train(
    arch: Architecture,
    classes: usize,
    data: &TrainSet,
    tcfg: &TrainConfig,
    lcfg: &LossConfig,
) -> Result<(ModelState, Vec<EpochLoss>)> {
    let input_len = data.windows.as_ref().map_or(0, |w| w.dim().1);
    let mut state = ModelState::new(arch, classes, input_len, tcfg.seed);
    let log = train_model(&mut state, data, tcfg, lcfg)?;
    Ok((state, log))
}

/// Trains an existing model in place (also used with scaled-down test
/// configurations). Returns the per-epoch loss log.
pub fn train_model(
    state: &mut ModelState,
    data: &TrainSet,
    tcfg: &TrainConfig,
    lcfg: &LossConfig,
) -> Result<Vec<EpochLoss>> {
    if data.is_empty() {
        return Err(MbfdError::EmptyInput("training split".into()));
    }
    if let Some(w) = &data.windows {
        if w.dim().1 != state.input_len && matches!(state.arch, Architecture::Sdlm | Architecture::SSdlm | Architecture::RobustMbfd) {
            return Err(MbfdError::ShapeMismatch(format!(
                "window length {} vs model input {}",
                w.dim().1,
                state.input_len
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(tcfg.seed.wrapping_add(1));
    let mut opt = Adam::new(tcfg.learning_rate);
    let mut log = Vec::with_capacity(tcfg.epochs);
    for epoch in 0..tcfg.epochs {
        let order = batch_order(&data.labels, &mut rng);
        let mut sums = EpochLoss { epoch, entropy: 0.0, triplet: 0.0, double_cnn: 0.0, double_mlp: 0.0, total: 0.0 };
        let mut batches = 0usize;
        for chunk in order.chunks(tcfg.batch_size) {
            let labels: Vec<usize> = chunk.iter().map(|&i| data.labels[i]).collect();
            let step = step_batch(state, data, chunk, &labels, lcfg, &mut rng)?;
            if !step.total.is_finite() {
                return Err(MbfdError::Diverged(format!(
                    "non-finite loss at epoch {epoch}: {step:?}"
                )));
            }
            opt.step(state);
            sums.entropy += step.entropy;
            sums.triplet += step.triplet;
            sums.double_cnn += step.double_cnn;
            sums.double_mlp += step.double_mlp;
            sums.total += step.total;
            batches += 1;
        }
        let n = batches as f64;
        sums.entropy /= n;
        sums.triplet /= n;
        sums.double_cnn /= n;
        sums.double_mlp /= n;
        sums.total /= n;
        if !state.all_finite() {
            return Err(MbfdError::Diverged(format!("non-finite parameters after epoch {epoch}")));
        }
        log.push(sums);
    }
    Ok(log)
}

fn step_batch(
    state: &mut ModelState,
    data: &TrainSet,
    chunk: &[usize],
    labels: &[usize],
    lcfg: &LossConfig,
    rng: &mut ChaCha8Rng,
) -> Result<EpochLoss> {
    let mut out = EpochLoss { epoch: 0, entropy: 0.0, triplet: 0.0, double_cnn: 0.0, double_mlp: 0.0, total: 0.0 };
    match (state.arch, &mut state.net) {
        (Architecture::Sdlm, Network::Cnn(model)) => {
            let x = select_rows(windows_of(data)?, chunk);
            let y = model.forward(&x, Mode::Train);
            out.entropy = cross_entropy_labels(&y.probs, labels)?;
            out.total = out.entropy;
            let dl = cross_entropy_grad_logits(&y.probs, labels);
            model.backward(&Array2::zeros(y.embeddings.raw_dim()), Some(&dl));
        }
        (Architecture::SSdlm, Network::Cnn(model)) => {
            let x = select_rows(windows_of(data)?, chunk);
            let y = model.forward(&x, Mode::Train);
            let trip = mine_triplets(labels, rng);
            let mut d_emb = Array2::zeros(y.embeddings.raw_dim());
            let d_logits;
            if trip.is_empty() {
                out.entropy = cross_entropy_labels(&y.probs, labels)?;
                d_logits = cross_entropy_grad_logits(&y.probs, labels);
            } else {
                let a = select_rows(&y.embeddings, &trip.anchors);
                let p = select_rows(&y.embeddings, &trip.positives);
                let n = select_rows(&y.embeddings, &trip.negatives);
                out.triplet = triplet_loss(&a, &p, &n, lcfg.margin)?;
                let (da, dp, dn) = triplet_grads(&a, &p, &n, lcfg.margin);
                scatter_rows(&mut d_emb, &trip.anchors, &da);
                scatter_rows(&mut d_emb, &trip.positives, &dp);
                scatter_rows(&mut d_emb, &trip.negatives, &dn);
                // cross-entropy head on the anchor leg only
                let anchor_labels: Vec<usize> = trip.anchors.iter().map(|&i| labels[i]).collect();
                let anchor_probs = select_rows(&y.probs, &trip.anchors);
                out.entropy = cross_entropy_labels(&anchor_probs, &anchor_labels)?;
                let mut dla = cross_entropy_grad_logits(&anchor_probs, &anchor_labels);
                dla.mapv_inplace(|v| v * lcfg.lambda_ssdlm);
                let mut dl = Array2::zeros(y.logits.raw_dim());
                scatter_rows(&mut dl, &trip.anchors, &dla);
                d_logits = dl;
            }
            out.total = ssdlm_loss(out.triplet, out.entropy, lcfg.lambda_ssdlm);
            model.backward(&d_emb, Some(&d_logits));
        }
        (Architecture::USdlm, Network::Mlp(model)) => {
            let x = select_rows(features_of(data)?, chunk);
            let emb = model.forward(&x, true);
            let trip = mine_triplets(labels, rng);
            if trip.is_empty() {
                // nothing to optimize on this batch
                let _ = model.backward(&Array2::zeros(emb.raw_dim()));
                return Ok(out);
            }
            let a = select_rows(&emb, &trip.anchors);
            let p = select_rows(&emb, &trip.positives);
            let n = select_rows(&emb, &trip.negatives);
            out.triplet = triplet_loss(&a, &p, &n, lcfg.margin)?;
            out.total = out.triplet;
            let (da, dp, dn) = triplet_grads(&a, &p, &n, lcfg.margin);
            let mut d_emb = Array2::zeros(emb.raw_dim());
            scatter_rows(&mut d_emb, &trip.anchors, &da);
            scatter_rows(&mut d_emb, &trip.positives, &dp);
            scatter_rows(&mut d_emb, &trip.negatives, &dn);
            let _ = model.backward(&d_emb);
        }
        (Architecture::RobustMbfd, Network::Robust(model)) => {
            let w = select_rows(windows_of(data)?, chunk);
            let f = select_rows(features_of(data)?, chunk);
            let y = model.forward(&w, &f, Mode::Train);
            out.entropy = cross_entropy_labels(&y.probs, labels)?;
            let dl = cross_entropy_grad_logits(&y.probs, labels);
            let mut d_cnn = Array2::zeros(y.cnn.raw_dim());
            let mut d_mlp = Array2::zeros(y.mlp.raw_dim());
            let trip = mine_triplets(labels, rng);
            if !trip.is_empty() {
                let anchor_labels: Vec<usize> = trip.anchors.iter().map(|&i| labels[i]).collect();
                // CNN-branch double loss
                let c = model.center_cnn.forward(&anchor_labels, Mode::Train);
                let a = select_rows(&y.cnn, &trip.anchors);
                let p = select_rows(&y.cnn, &trip.positives);
                let n = select_rows(&y.cnn, &trip.negatives);
                out.double_cnn = double_loss_branch(&a, &p, &n, &c, lcfg.margin, lcfg.gamma)?;
                let (da, dp, dn, dc) = double_grads(&a, &p, &n, &c, lcfg.margin, lcfg.gamma);
                let s = lcfg.lambda_total;
                scatter_rows(&mut d_cnn, &trip.anchors, &da.mapv(|v| v * s));
                scatter_rows(&mut d_cnn, &trip.positives, &dp.mapv(|v| v * s));
                scatter_rows(&mut d_cnn, &trip.negatives, &dn.mapv(|v| v * s));
                model.center_cnn.backward(&dc.mapv(|v| v * s));
                // MLP-branch double loss
                let c = model.center_mlp.forward(&anchor_labels, Mode::Train);
                let a = select_rows(&y.mlp, &trip.anchors);
                let p = select_rows(&y.mlp, &trip.positives);
                let n = select_rows(&y.mlp, &trip.negatives);
                out.double_mlp = double_loss_branch(&a, &p, &n, &c, lcfg.margin, lcfg.gamma)?;
                let (da, dp, dn, dc) = double_grads(&a, &p, &n, &c, lcfg.margin, lcfg.gamma);
                let s = lcfg.lambda_total * lcfg.lambda_double;
                scatter_rows(&mut d_mlp, &trip.anchors, &da.mapv(|v| v * s));
                scatter_rows(&mut d_mlp, &trip.positives, &dp.mapv(|v| v * s));
                scatter_rows(&mut d_mlp, &trip.negatives, &dn.mapv(|v| v * s));
                model.center_mlp.backward(&dc.mapv(|v| v * s));
            }
            out.total = total_loss(out.entropy, out.double_cnn, out.double_mlp, lcfg);
            model.cnn.backward(&d_cnn, Some(&dl));
            let _ = model.mlp.backward(&d_mlp);
        }
        _ => {
            return Err(MbfdError::InvalidConfig("architecture/network mismatch".into()));
        }
    }
    Ok(out)
}

/// Eval-mode embedding extraction for the back-end classifiers.
pub fn extract_features(state: &mut ModelState, data: &TrainSet) -> Result<Array2<f64>> {
    match &mut state.net {
        Network::Cnn(model) => Ok(model.embed(windows_of(data)?)),
        Network::Mlp(model) => Ok(model.forward(features_of(data)?, false)),
        Network::Robust(model) => {
            let cnn = model.cnn.embed(windows_of(data)?);
            let mlp = model.mlp.forward(features_of(data)?, false);
            let (b, dc) = cnn.dim();
            let dm = mlp.dim().1;
            let mut out = Array2::zeros((b, dc + dm));
            out.slice_mut(ndarray::s![.., ..dc]).assign(&cnn);
            out.slice_mut(ndarray::s![.., dc..]).assign(&mlp);
            Ok(out)
        }
    }
}

/// Writes the per-epoch loss log as CSV.
pub fn write_loss_log(path: &Path, log: &[EpochLoss]) -> Result<()> {
    let wrap = |e: std::io::Error| MbfdError::Io { path: path.to_path_buf(), source: e };
    let mut w = csv::Writer::from_path(path).map_err(|e| MbfdError::Serde(e.to_string()))?;
    w.write_record(["epoch", "entropy", "triplet", "double_cnn", "double_mlp", "total"])
        .map_err(|e| MbfdError::Serde(e.to_string()))?;
    for e in log {
        w.write_record([
            e.epoch.to_string(),
            e.entropy.to_string(),
            e.triplet.to_string(),
            e.double_cnn.to_string(),
            e.double_mlp.to_string(),
            e.total.to_string(),
        ])
        .map_err(|er| MbfdError::Serde(er.to_string()))?;
    }
    w.flush().map_err(wrap)
}
