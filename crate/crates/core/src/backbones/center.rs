use ndarray::Array2;
use rand::Rng;

use crate::nn::{BatchNorm, Linear, Mode, Params, Tensor};

/// Learned per-class reference embeddings: one-hot label through a fully
/// connected layer followed by batch normalization. Trained jointly with the
/// rest of the model.
#[derive(Debug, Clone)]
pub struct CenterGenerator {
    pub classes: usize,
    fc: Linear,
    bn: BatchNorm,
    cache_onehot: Option<Array2<f64>>,
}

impl CenterGenerator {
    pub fn new<R: Rng>(classes: usize, dim: usize, rng: &mut R) -> Self {
        Self { classes, fc: Linear::new(classes, dim, rng), bn: BatchNorm::new(dim), cache_onehot: None }
    }

    pub fn dim(&self) -> usize {
        self.fc.out_dim()
    }

    fn one_hot(&self, labels: &[usize]) -> Array2<f64> {
        let mut x = Array2::zeros((labels.len(), self.classes));
        for (i, &l) in labels.iter().enumerate() {
            assert!(l < self.classes, "label {l} out of range");
            x[[i, l]] = 1.0;
        }
        x
    }

    /// Returns one center row per label.
    pub fn forward(&mut self, labels: &[usize], mode: Mode) -> Array2<f64> {
        let x = self.one_hot(labels);
        let cache = mode == Mode::Train;
        let h = self.fc.forward(&x, cache);
        let y = self.bn.forward2(&h, mode);
        self.cache_onehot = if cache { Some(x) } else { None };
        y
    }

    pub fn backward(&mut self, d_out: &Array2<f64>) {
        self.cache_onehot.take().expect("backward without train-mode forward");
        let d = self.bn.backward2(d_out);
        let _ = self.fc.backward(&d);
    }
}

impl Params for CenterGenerator {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor)) {
        self.fc.visit_params(&format!("{prefix}fc."), f);
        self.bn.visit_params(&format!("{prefix}bn."), f);
    }
}
