use ndarray::Array2;
use rand::Rng;

use crate::features::FEATURE_COUNT;
use crate::nn::{Linear, Params, Tensor};

/// Widths of the fully connected stack; the last entry is the embedding dim.
pub const MLP_WIDTHS: [usize; 6] = [1024, 512, 128, 512, 1024, 256];

/// MLP backbone over 15 hand-crafted features: six fully connected layers
/// with ReLU after each except the last (linear 256-dim output).
#[derive(Debug, Clone)]
pub struct MlpModel {
    layers: Vec<Linear>,
    masks: Option<Vec<Array2<f64>>>,
}

impl MlpModel {
    pub fn new<R: Rng>(rng: &mut R) -> Self {
        Self::with_widths(FEATURE_COUNT, &MLP_WIDTHS, rng)
    }

    pub fn with_widths<R: Rng>(input_dim: usize, widths: &[usize], rng: &mut R) -> Self {
        let mut layers = Vec::new();
        let mut prev = input_dim;
        for &w in widths {
            layers.push(Linear::new(prev, w, rng));
            prev = w;
        }
        Self { layers, masks: None }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn embedding_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    pub fn widths(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.out_dim()).collect()
    }

    /// `x` is (batch, input_dim) of normalized feature vectors.
    pub fn forward(&mut self, x: &Array2<f64>, cache: bool) -> Array2<f64> {
        assert_eq!(x.dim().1, self.input_dim(), "feature dim mismatch");
        let n = self.layers.len();
        let mut masks = Vec::new();
        let mut h = x.clone();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            h = layer.forward(&h, cache);
            if i + 1 < n {
                let mask = h.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
                h.mapv_inplace(|v| v.max(0.0));
                if cache {
                    masks.push(mask);
                }
            }
        }
        self.masks = if cache { Some(masks) } else { None };
        h
    }

    pub fn backward(&mut self, d_out: &Array2<f64>) -> Array2<f64> {
        let masks = self.masks.take().expect("backward without cached forward");
        let mut d = d_out.clone();
        // ReLU sits after every layer except the last; masks[i] belongs to
        // the activation feeding layer i + 1.
        for (i, layer) in self.layers.iter_mut().enumerate().rev() {
            d = layer.backward(&d);
            if i > 0 {
                d *= &masks[i - 1];
            }
        }
        d
    }
}

impl Params for MlpModel {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor)) {
        for (i, layer) in self.layers.iter_mut().enumerate() {
            layer.visit_params(&format!("{prefix}fc{i}."), f);
        }
    }
}
