use ndarray::ArrayD;

use super::{Params, Tensor};

/// Adam optimizer. Moment buffers are keyed by parameter name, so the visit
/// order of a module may not change between steps.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    moments: std::collections::HashMap<String, (ArrayD<f64>, ArrayD<f64>)>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, moments: std::collections::HashMap::new() }
    }

    pub fn step(&mut self, module: &mut dyn Params) {
        self.t += 1;
        let t = self.t as i32;
        let (b1, b2, eps, lr) = (self.beta1, self.beta2, self.eps, self.lr);
        let bc1 = 1.0 - b1.powi(t);
        let bc2 = 1.0 - b2.powi(t);
        let moments = &mut self.moments;
        module.visit_params("", &mut |name: &str, p: &mut Tensor| {
            if !p.trainable {
                return;
            }
            let (m, v) = moments
                .entry(name.to_string())
                .or_insert_with(|| (ArrayD::zeros(p.grad.raw_dim()), ArrayD::zeros(p.grad.raw_dim())));
            for ((w, g), (mi, vi)) in p
                .value
                .iter_mut()
                .zip(p.grad.iter())
                .zip(m.iter_mut().zip(v.iter_mut()))
            {
                *mi = b1 * *mi + (1.0 - b1) * g;
                *vi = b2 * *vi + (1.0 - b2) * g * g;
                let mhat = *mi / bc1;
                let vhat = *vi / bc2;
                *w -= lr * mhat / (vhat.sqrt() + eps);
            }
        });
    }
}
