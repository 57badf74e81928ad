use ndarray::{Array2, ArrayD, Axis, Ix2};
use rand::Rng;

use super::{init_uniform, Params, Tensor};

/// Fully connected layer: `y = x . w + b` over a (batch, features) matrix.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: Tensor, // (in, out)
    pub bias: Tensor,   // (out,)
    cache_x: Option<Array2<f64>>,
}

impl Linear {
    pub fn new<R: Rng>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        Self {
            weight: Tensor::new(init_uniform(&[in_dim, out_dim], in_dim, rng)),
            bias: Tensor::new(ArrayD::zeros(vec![out_dim])),
            cache_x: None,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.value.shape()[0]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.value.shape()[1]
    }

    pub fn forward(&mut self, x: &Array2<f64>, cache: bool) -> Array2<f64> {
        let w = self.weight.value.view().into_dimensionality::<Ix2>().unwrap();
        let b = &self.bias.value;
        let mut y = x.dot(&w);
        for mut row in y.rows_mut() {
            for (v, bv) in row.iter_mut().zip(b.iter()) {
                *v += bv;
            }
        }
        self.cache_x = if cache { Some(x.clone()) } else { None };
        y
    }

    pub fn backward(&mut self, dy: &Array2<f64>) -> Array2<f64> {
        let x = self.cache_x.as_ref().expect("backward without cached forward");
        let w = self.weight.value.view().into_dimensionality::<Ix2>().unwrap();
        let dw = x.t().dot(dy);
        let db = dy.sum_axis(Axis(0));
        let dx = dy.dot(&w.t());
        self.weight.grad.view_mut().into_dimensionality::<Ix2>().unwrap().scaled_add(1.0, &dw);
        self.bias.grad.scaled_add(1.0, &db.into_dyn());
        dx
    }
}

impl Params for Linear {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f(&format!("{prefix}weight"), &mut self.weight);
        f(&format!("{prefix}bias"), &mut self.bias);
    }
}
