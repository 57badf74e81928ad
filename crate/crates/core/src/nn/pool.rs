use ndarray::{Array2, Array3};

/// Non-overlapping 1-D max pooling over the time axis of (batch, ch, time).
/// A trailing remainder shorter than the pool width is discarded.
#[derive(Debug, Clone)]
pub struct MaxPool1d {
    pub width: usize,
    cache: Option<(Vec<usize>, (usize, usize, usize))>, // argmax per output elem, input dim
}

impl MaxPool1d {
    pub fn new(width: usize) -> Self {
        Self { width, cache: None }
    }

    pub fn out_len(&self, t: usize) -> usize {
        t / self.width
    }

    pub fn forward(&mut self, x: &Array3<f64>, cache: bool) -> Array3<f64> {
        let (b, c, t) = x.dim();
        let to = self.out_len(t);
        let mut y = Array3::zeros((b, c, to));
        let mut argmax = vec![0usize; b * c * to];
        for s in 0..b {
            for ch in 0..c {
                for o in 0..to {
                    let start = o * self.width;
                    let mut best = f64::NEG_INFINITY;
                    let mut best_i = start;
                    for i in start..start + self.width {
                        if x[[s, ch, i]] > best {
                            best = x[[s, ch, i]];
                            best_i = i;
                        }
                    }
                    y[[s, ch, o]] = best;
                    argmax[(s * c + ch) * to + o] = best_i;
                }
            }
        }
        self.cache = if cache { Some((argmax, (b, c, t))) } else { None };
        y
    }

    pub fn backward(&mut self, dy: &Array3<f64>) -> Array3<f64> {
        let (argmax, (b, c, t)) = self.cache.as_ref().expect("backward without cached forward");
        let to = dy.dim().2;
        let mut dx = Array3::zeros((*b, *c, *t));
        for s in 0..*b {
            for ch in 0..*c {
                for o in 0..to {
                    dx[[s, ch, argmax[(s * c + ch) * to + o]]] += dy[[s, ch, o]];
                }
            }
        }
        dx
    }
}

/// Mean over the time axis of (batch, time, channels) -> (batch, channels).
pub fn global_avg_pool(x: &Array3<f64>) -> Array2<f64> {
    let (b, t, c) = x.dim();
    let mut y = Array2::zeros((b, c));
    for s in 0..b {
        for tt in 0..t {
            for ch in 0..c {
                y[[s, ch]] += x[[s, tt, ch]];
            }
        }
    }
    y / t as f64
}

pub fn global_avg_pool_backward(dy: &Array2<f64>, t: usize) -> Array3<f64> {
    let (b, c) = dy.dim();
    let mut dx = Array3::zeros((b, t, c));
    for s in 0..b {
        for tt in 0..t {
            for ch in 0..c {
                dx[[s, tt, ch]] = dy[[s, ch]] / t as f64;
            }
        }
    }
    dx
}
