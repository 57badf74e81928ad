use ndarray::{Array1, Array2, Array3, ArrayD};

use super::{Mode, Params, Tensor};

const BN_EPS: f64 = 1e-5;

/// Per-channel batch normalization with running statistics (momentum 0.99).
///
/// Operates on (batch, channels, time); 2-D feature matrices go through
/// [`BatchNorm::forward2`], which inserts a unit time axis. Train mode
/// normalizes with population batch statistics and updates the running
/// buffers; eval mode applies the stored affine transform.
#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    pub momentum: f64,
    channels: usize,
    /// First train-mode forward seeds the running stats with the batch
    /// statistics instead of blending into the (0, 1) initialization.
    warmed: bool,
    cache: Option<BnCache>,
}

#[derive(Debug, Clone)]
struct BnCache {
    xhat: Array3<f64>,
    inv_std: Array1<f64>,
}

impl BatchNorm {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Tensor::new(ArrayD::ones(vec![channels])),
            beta: Tensor::new(ArrayD::zeros(vec![channels])),
            running_mean: Tensor::buffer(ArrayD::zeros(vec![channels])),
            running_var: Tensor::buffer(ArrayD::ones(vec![channels])),
            momentum: 0.99,
            channels,
            warmed: false,
            cache: None,
        }
    }

    pub fn forward(&mut self, x: &Array3<f64>, mode: Mode) -> Array3<f64> {
        let (b, c, t) = x.dim();
        assert_eq!(c, self.channels, "channel mismatch");
        let mut y = x.clone();
        match mode {
            Mode::Train => {
                let n = (b * t) as f64;
                let mut inv_std = Array1::zeros(c);
                let mut xhat = Array3::zeros((b, c, t));
                for ch in 0..c {
                    let lane = x.slice(ndarray::s![.., ch, ..]);
                    let mean = lane.sum() / n;
                    let var = lane.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                    let istd = 1.0 / (var + BN_EPS).sqrt();
                    inv_std[ch] = istd;
                    let g = self.gamma.value[ch];
                    let be = self.beta.value[ch];
                    for s in 0..b {
                        for tt in 0..t {
                            let xh = (x[[s, ch, tt]] - mean) * istd;
                            xhat[[s, ch, tt]] = xh;
                            y[[s, ch, tt]] = g * xh + be;
                        }
                    }
                    let m = if self.warmed { self.momentum } else { 0.0 };
                    self.running_mean.value[ch] = m * self.running_mean.value[ch] + (1.0 - m) * mean;
                    self.running_var.value[ch] = m * self.running_var.value[ch] + (1.0 - m) * var;
                }
                self.warmed = true;
                self.cache = Some(BnCache { xhat, inv_std });
            }
            Mode::Eval => {
                for ch in 0..c {
                    let mean = self.running_mean.value[ch];
                    let istd = 1.0 / (self.running_var.value[ch] + BN_EPS).sqrt();
                    let g = self.gamma.value[ch];
                    let be = self.beta.value[ch];
                    y.slice_mut(ndarray::s![.., ch, ..]).mapv_inplace(|v| g * (v - mean) * istd + be);
                }
                self.cache = None;
            }
        }
        y
    }

    pub fn backward(&mut self, dy: &Array3<f64>) -> Array3<f64> {
        let cache = self.cache.as_ref().expect("backward without train-mode forward");
        let (b, c, t) = dy.dim();
        let n = (b * t) as f64;
        let mut dx = Array3::zeros((b, c, t));
        for ch in 0..c {
            let g = self.gamma.value[ch];
            let istd = cache.inv_std[ch];
            let dy_lane = dy.slice(ndarray::s![.., ch, ..]);
            let xhat_lane = cache.xhat.slice(ndarray::s![.., ch, ..]);
            let sum_dy = dy_lane.sum();
            let sum_dy_xhat = dy_lane.iter().zip(xhat_lane.iter()).map(|(a, b)| a * b).sum::<f64>();
            self.gamma.grad[ch] += sum_dy_xhat;
            self.beta.grad[ch] += sum_dy;
            for s in 0..b {
                for tt in 0..t {
                    dx[[s, ch, tt]] = g * istd
                        * (dy[[s, ch, tt]] - sum_dy / n - cache.xhat[[s, ch, tt]] * sum_dy_xhat / n);
                }
            }
        }
        dx
    }

    /// (batch, features) convenience wrapper.
    pub fn forward2(&mut self, x: &Array2<f64>, mode: Mode) -> Array2<f64> {
        let (b, c) = x.dim();
        let x3 = x.clone().into_shape_with_order((b, c, 1)).unwrap();
        let y = self.forward(&x3, mode);
        y.into_shape_with_order((b, c)).unwrap()
    }

    pub fn backward2(&mut self, dy: &Array2<f64>) -> Array2<f64> {
        let (b, c) = dy.dim();
        let dy3 = dy.clone().into_shape_with_order((b, c, 1)).unwrap();
        self.backward(&dy3).into_shape_with_order((b, c)).unwrap()
    }
}

impl Params for BatchNorm {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f(&format!("{prefix}gamma"), &mut self.gamma);
        f(&format!("{prefix}beta"), &mut self.beta);
        f(&format!("{prefix}running_mean"), &mut self.running_mean);
        f(&format!("{prefix}running_var"), &mut self.running_var);
    }
}

/// Layer normalization over the last axis of (batch, time, channels).
#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gamma: Tensor,
    pub beta: Tensor,
    channels: usize,
    cache: Option<(Array3<f64>, Array2<f64>)>, // (xhat, inv_std per row)
}

impl LayerNorm {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Tensor::new(ArrayD::ones(vec![channels])),
            beta: Tensor::new(ArrayD::zeros(vec![channels])),
            channels,
            cache: None,
        }
    }

    pub fn forward(&mut self, x: &Array3<f64>, cache: bool) -> Array3<f64> {
        let (b, t, c) = x.dim();
        assert_eq!(c, self.channels);
        let mut y = Array3::zeros((b, t, c));
        let mut xhat = Array3::zeros((b, t, c));
        let mut inv_std = Array2::zeros((b, t));
        for s in 0..b {
            for tt in 0..t {
                let row = x.slice(ndarray::s![s, tt, ..]);
                let mean = row.sum() / c as f64;
                let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / c as f64;
                let istd = 1.0 / (var + BN_EPS).sqrt();
                inv_std[[s, tt]] = istd;
                for ch in 0..c {
                    let xh = (x[[s, tt, ch]] - mean) * istd;
                    xhat[[s, tt, ch]] = xh;
                    y[[s, tt, ch]] = self.gamma.value[ch] * xh + self.beta.value[ch];
                }
            }
        }
        self.cache = if cache { Some((xhat, inv_std)) } else { None };
        y
    }

    pub fn backward(&mut self, dy: &Array3<f64>) -> Array3<f64> {
        let (xhat, inv_std) = self.cache.as_ref().expect("backward without cached forward");
        let (b, t, c) = dy.dim();
        let n = c as f64;
        let mut dx = Array3::zeros((b, t, c));
        for s in 0..b {
            for tt in 0..t {
                let mut sum_dyg = 0.0;
                let mut sum_dyg_xhat = 0.0;
                for ch in 0..c {
                    let dyg = dy[[s, tt, ch]] * self.gamma.value[ch];
                    sum_dyg += dyg;
                    sum_dyg_xhat += dyg * xhat[[s, tt, ch]];
                    self.gamma.grad[ch] += dy[[s, tt, ch]] * xhat[[s, tt, ch]];
                    self.beta.grad[ch] += dy[[s, tt, ch]];
                }
                let istd = inv_std[[s, tt]];
                for ch in 0..c {
                    let dyg = dy[[s, tt, ch]] * self.gamma.value[ch];
                    dx[[s, tt, ch]] =
                        istd * (dyg - sum_dyg / n - xhat[[s, tt, ch]] * sum_dyg_xhat / n);
                }
            }
        }
        dx
    }
}

impl Params for LayerNorm {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f(&format!("{prefix}gamma"), &mut self.gamma);
        f(&format!("{prefix}beta"), &mut self.beta);
    }
}
