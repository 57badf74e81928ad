use ndarray::{Array2, Array3, ArrayD, Ix2};
use rand::Rng;

use super::{init_uniform, Params, Tensor};

/// 1-D convolution, stride 1, "same" padding (output length == input length).
///
/// Activations are (batch, channels, time). The kernel tensor is stored
/// flattened as (out_ch, in_ch * k) so the forward is a single gemm per
/// sample over an im2col matrix.
#[derive(Debug, Clone)]
pub struct Conv1d {
    pub weight: Tensor, // (out_ch, in_ch * k)
    pub bias: Tensor,   // (out_ch,)
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    cache_xpad: Option<Array3<f64>>,
}

impl Conv1d {
    pub fn new<R: Rng>(in_ch: usize, out_ch: usize, kernel: usize, rng: &mut R) -> Self {
        let fan_in = in_ch * kernel;
        Self {
            weight: Tensor::new(init_uniform(&[out_ch, fan_in], fan_in, rng)),
            bias: Tensor::new(ArrayD::zeros(vec![out_ch])),
            in_ch,
            out_ch,
            kernel,
            cache_xpad: None,
        }
    }

    fn pad_left(&self) -> usize {
        (self.kernel - 1) / 2
    }

    fn pad(&self, x: &Array3<f64>) -> Array3<f64> {
        let (b, c, t) = x.dim();
        let mut xp = Array3::zeros((b, c, t + self.kernel - 1));
        xp.slice_mut(ndarray::s![.., .., self.pad_left()..self.pad_left() + t]).assign(x);
        xp
    }

    fn im2col(&self, xpad: &Array3<f64>, sample: usize, t_out: usize) -> Array2<f64> {
        let mut col = Array2::zeros((self.in_ch * self.kernel, t_out));
        for i in 0..self.in_ch {
            for kk in 0..self.kernel {
                let row = i * self.kernel + kk;
                for t in 0..t_out {
                    col[[row, t]] = xpad[[sample, i, t + kk]];
                }
            }
        }
        col
    }

    pub fn forward(&mut self, x: &Array3<f64>, cache: bool) -> Array3<f64> {
        let (b, c, t) = x.dim();
        assert_eq!(c, self.in_ch, "channel mismatch");
        let xpad = self.pad(x);
        let w = self.weight.value.view().into_dimensionality::<Ix2>().unwrap();
        let mut y = Array3::zeros((b, self.out_ch, t));
        for s in 0..b {
            let col = self.im2col(&xpad, s, t);
            let ys = w.dot(&col); // (out_ch, t)
            y.slice_mut(ndarray::s![s, .., ..]).assign(&ys);
        }
        for o in 0..self.out_ch {
            let bv = self.bias.value[o];
            y.slice_mut(ndarray::s![.., o, ..]).mapv_inplace(|v| v + bv);
        }
        self.cache_xpad = if cache { Some(xpad) } else { None };
        y
    }

    pub fn backward(&mut self, dy: &Array3<f64>) -> Array3<f64> {
        let xpad = self.cache_xpad.as_ref().expect("backward without cached forward");
        let (b, _, t) = dy.dim();
        let w = self.weight.value.view().into_dimensionality::<Ix2>().unwrap();
        let mut dxpad = Array3::<f64>::zeros(xpad.raw_dim());
        let mut dw = Array2::<f64>::zeros((self.out_ch, self.in_ch * self.kernel));
        for s in 0..b {
            let col = self.im2col(xpad, s, t);
            let dys = dy.slice(ndarray::s![s, .., ..]).to_owned();
            dw += &dys.dot(&col.t());
            let dcol = w.t().dot(&dys); // (in_ch * k, t)
            for i in 0..self.in_ch {
                for kk in 0..self.kernel {
                    let row = i * self.kernel + kk;
                    for tt in 0..t {
                        dxpad[[s, i, tt + kk]] += dcol[[row, tt]];
                    }
                }
            }
        }
        for o in 0..self.out_ch {
            self.bias.grad[o] += dy.slice(ndarray::s![.., o, ..]).sum();
        }
        self.weight.grad.view_mut().into_dimensionality::<Ix2>().unwrap().scaled_add(1.0, &dw);
        let pl = self.pad_left();
        dxpad.slice(ndarray::s![.., .., pl..pl + t]).to_owned()
    }
}

impl Params for Conv1d {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f(&format!("{prefix}weight"), &mut self.weight);
        f(&format!("{prefix}bias"), &mut self.bias);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::check_params;
    use ndarray::Array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn same_padding_preserves_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in [1usize, 3, 4, 80] {
            let mut conv = Conv1d::new(2, 3, k, &mut rng);
            let x = Array3::from_shape_fn((1, 2, 100), |_| rng.gen_range(-1.0..1.0));
            let y = conv.forward(&x, false);
            assert_eq!(y.dim(), (1, 3, 100), "kernel {k}");
        }
    }

    #[test]
    fn identity_kernel_passes_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut conv = Conv1d::new(1, 1, 3, &mut rng);
        conv.weight.value.as_slice_mut().unwrap().copy_from_slice(&[0.0, 1.0, 0.0]);
        let x = Array3::from_shape_fn((1, 1, 8), |(_, _, t)| t as f64);
        let y = conv.forward(&x, false);
        assert_eq!(y, x);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut conv = Conv1d::new(2, 3, 4, &mut rng);
        let x = Array::from_shape_fn((2, 2, 9), |_| rng.gen_range(-1.0..1.0));
        check_params(
            &mut conv,
            |c| {
                c.zero_grads();
                let y = c.forward(&x, true);
                let loss = y.iter().map(|v| v * v).sum::<f64>();
                let dy = y.mapv(|v| 2.0 * v);
                c.backward(&dy);
                loss
            },
            1e-5,
            1e-6,
        );
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut conv = Conv1d::new(1, 2, 3, &mut rng);
        let x = Array::from_shape_fn((1, 1, 7), |_| rng.gen_range(-1.0..1.0));
        conv.zero_grads();
        let y = conv.forward(&x, true);
        let dy = y.mapv(|v| 2.0 * v);
        let dx = conv.backward(&dy);
        let h = 1e-6;
        for i in 0..7 {
            let mut xp = x.clone();
            xp[[0, 0, i]] += h;
            let up: f64 = conv.forward(&xp, false).iter().map(|v| v * v).sum();
            xp[[0, 0, i]] -= 2.0 * h;
            let dn: f64 = conv.forward(&xp, false).iter().map(|v| v * v).sum();
            let fd = (up - dn) / (2.0 * h);
            assert!((dx[[0, 0, i]] - fd).abs() < 1e-5, "i={i}: {} vs {}", dx[[0, 0, i]], fd);
        }
    }
}
