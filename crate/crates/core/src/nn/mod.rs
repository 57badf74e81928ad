//! Small neural-network layer library with explicit forward/backward passes.
//!
//! Every layer caches what its backward pass needs during a train-mode
//! forward. Eval-mode forwards avoid caching so long inputs stay cheap.
//! Gradients accumulate into each parameter's `grad` buffer until
//! [`Tensor::zero_grad`] is called, which lets a training step sum
//! contributions from several loss terms.

pub mod adam;
pub mod attention;
pub mod conv;
pub mod linear;
pub mod norm;
pub mod pool;

pub use adam::Adam;
pub use attention::MultiHeadSelfAttention;
pub use conv::Conv1d;
pub use linear::Linear;
pub use norm::{BatchNorm, LayerNorm};
pub use pool::{global_avg_pool, global_avg_pool_backward, MaxPool1d};

use ndarray::{ArrayD, ArrayViewD, ArrayViewMutD};
use rand::Rng;

/// Forward mode: train uses batch statistics and caches activations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// A named parameter (or non-trainable state buffer) with its gradient.
#[derive(Debug, Clone)]
pub struct Tensor {
    pub value: ArrayD<f64>,
    pub grad: ArrayD<f64>,
    /// Running statistics and the like are checkpointed but not optimized.
    pub trainable: bool,
}

impl Tensor {
    pub fn new(value: ArrayD<f64>) -> Self {
        let grad = ArrayD::zeros(value.raw_dim());
        Self { value, grad, trainable: true }
    }

    pub fn buffer(value: ArrayD<f64>) -> Self {
        let mut t = Self::new(value);
        t.trainable = false;
        t
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn view(&self) -> ArrayViewD<'_, f64> {
        self.value.view()
    }

    pub fn grad_mut(&mut self) -> ArrayViewMutD<'_, f64> {
        self.grad.view_mut()
    }
}

/// Fan-in-scaled uniform initialization: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
pub fn init_uniform<R: Rng>(shape: &[usize], fan_in: usize, rng: &mut R) -> ArrayD<f64> {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    ArrayD::from_shape_fn(shape, |_| rng.gen_range(-bound..bound))
}

/// Visitor over a module's named tensors, in a stable declaration order.
pub trait Params {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor));

    fn zero_grads(&mut self) {
        self.visit_params("", &mut |_, t| t.zero_grad());
    }

    /// All parameters are finite (checked after every optimizer step).
    fn all_finite(&mut self) -> bool {
        let mut ok = true;
        self.visit_params("", &mut |_, t| {
            if t.value.iter().any(|v| !v.is_finite()) {
                ok = false;
            }
        });
        ok
    }
}

/// Row-wise softmax of a logits matrix (batch, classes).
pub fn softmax_rows(logits: &ndarray::Array2<f64>) -> ndarray::Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}
