//! Normalization transforms with fit-on-train / apply-to-both semantics.
//!
//! Six methods: max-abs scaler (MAS), standard scaler (SS), robust scaler
//! (RS), per-row normalizer (N), quantile transformer to uniform (QT), and
//! Yeo-Johnson power transformer followed by standardization (PT). Degenerate
//! columns (zero max-abs / std / IQR) never produce NaN: they pass through or
//! map to zero as documented per method.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::{MbfdError, Result};

const QT_MAX_QUANTILES: usize = 1000;
const YJ_LAMBDA_RANGE: (f64, f64) = (-5.0, 5.0);
const YJ_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Max absolute scaler.
    Mas,
    /// Standard scaler (population std).
    Ss,
    /// Robust scaler (median / IQR).
    Rs,
    /// Per-row unit Euclidean norm.
    Norm,
    /// Quantile transformer to uniform [0,1].
    Qt,
    /// Yeo-Johnson power transform then standardize.
    Pt,
}

impl std::str::FromStr for Method {
    type Err = MbfdError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "MAS" => Ok(Method::Mas),
            "SS" => Ok(Method::Ss),
            "RS" => Ok(Method::Rs),
            "N" | "NORM" => Ok(Method::Norm),
            "QT" => Ok(Method::Qt),
            "PT" => Ok(Method::Pt),
            other => Err(MbfdError::InvalidConfig(format!("unknown normalization {other:?}"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Method::Mas => "MAS",
            Method::Ss => "SS",
            Method::Rs => "RS",
            Method::Norm => "N",
            Method::Qt => "QT",
            Method::Pt => "PT",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum State {
    MaxAbs { max_abs: Vec<f64> },
    MeanStd { mean: Vec<f64>, std: Vec<f64> },
    MedianIqr { median: Vec<f64>, iqr: Vec<f64> },
    None,
    Quantile { quantiles: Vec<f64>, references: Vec<Vec<f64>> },
    Power { lambda: Vec<f64>, mean: Vec<f64>, std: Vec<f64> },
}

/// A transform fitted on a training matrix; immutable afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedTransform {
    pub method: Method,
    state: State,
    n_cols: usize,
}

/// Fits `method` on `x` (rows = samples, columns = features).
pub fn fit(method: Method, x: ArrayView2<f64>) -> Result<FittedTransform> {
    if x.is_empty() {
        return Err(MbfdError::EmptyInput("cannot fit a transform on an empty matrix".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(MbfdError::NonFinite("fit matrix".into()));
    }
    let n_cols = x.ncols();
    let state = match method {
        Method::Mas => State::MaxAbs {
            max_abs: x
                .axis_iter(Axis(1))
                .map(|col| col.iter().fold(0.0f64, |a, v| a.max(v.abs())))
                .collect(),
        },
        Method::Ss => {
            let (mean, std) = mean_std(x);
            State::MeanStd { mean, std }
        }
        Method::Rs => {
            let mut median = Vec::with_capacity(n_cols);
            let mut iqr = Vec::with_capacity(n_cols);
            for col in x.axis_iter(Axis(1)) {
                let mut v: Vec<f64> = col.to_vec();
                v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                median.push(quantile_sorted(&v, 0.5));
                iqr.push(quantile_sorted(&v, 0.75) - quantile_sorted(&v, 0.25));
            }
            State::MedianIqr { median, iqr }
        }
        Method::Norm => State::None,
        Method::Qt => {
            let m = x.nrows().min(QT_MAX_QUANTILES);
            let quantiles: Vec<f64> = if m == 1 {
                vec![0.0]
            } else {
                (0..m).map(|i| i as f64 / (m - 1) as f64).collect()
            };
            let references = x
                .axis_iter(Axis(1))
                .map(|col| {
                    let mut v: Vec<f64> = col.to_vec();
                    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    quantiles.iter().map(|&q| quantile_sorted(&v, q)).collect()
                })
                .collect();
            State::Quantile { quantiles, references }
        }
        Method::Pt => {
            let lambda: Vec<f64> = x
                .axis_iter(Axis(1))
                .map(|col| {
                    let v: Vec<f64> = col.to_vec();
                    golden_section_max(YJ_LAMBDA_RANGE.0, YJ_LAMBDA_RANGE.1, YJ_TOL, |l| {
                        yeo_johnson_loglik(&v, l)
                    })
                })
                .collect();
            let mut transformed = x.to_owned();
            for (j, &l) in lambda.iter().enumerate() {
                for v in transformed.column_mut(j) {
                    *v = yeo_johnson(*v, l);
                }
            }
            let (mean, std) = mean_std(transformed.view());
            State::Power { lambda, mean, std }
        }
    };
    Ok(FittedTransform { method, state, n_cols })
}

/// Applies a fitted transform to a matrix with the same column count.
pub fn apply(t: &FittedTransform, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    if x.ncols() != t.n_cols {
        return Err(MbfdError::ShapeMismatch(format!(
            "transform fitted on {} columns, got {}",
            t.n_cols,
            x.ncols()
        )));
    }
    let mut out = x.to_owned();
    match &t.state {
        State::MaxAbs { max_abs } => {
            for (j, &s) in max_abs.iter().enumerate() {
                if s > 0.0 {
                    out.column_mut(j).mapv_inplace(|v| v / s);
                }
            }
        }
        State::MeanStd { mean, std } => standardize(&mut out, mean, std),
        State::MedianIqr { median, iqr } => {
            for j in 0..t.n_cols {
                let (m, s) = (median[j], iqr[j]);
                out.column_mut(j).mapv_inplace(|v| if s > 0.0 { (v - m) / s } else { 0.0 });
            }
        }
        State::None => {
            for mut row in out.axis_iter_mut(Axis(0)) {
                let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    row.mapv_inplace(|v| v / norm);
                }
            }
        }
        State::Quantile { quantiles, references } => {
            for j in 0..t.n_cols {
                let refs = &references[j];
                out.column_mut(j).mapv_inplace(|v| interp_cdf(v, refs, quantiles));
            }
        }
        State::Power { lambda, mean, std } => {
            for (j, &l) in lambda.iter().enumerate() {
                out.column_mut(j).mapv_inplace(|v| yeo_johnson(v, l));
            }
            standardize(&mut out, mean, std);
        }
    }
    Ok(out)
}

fn standardize(out: &mut Array2<f64>, mean: &[f64], std: &[f64]) {
    for j in 0..mean.len() {
        let (m, s) = (mean[j], std[j]);
        out.column_mut(j).mapv_inplace(|v| if s > 0.0 { (v - m) / s } else { 0.0 });
    }
}

fn mean_std(x: ArrayView2<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = x.nrows() as f64;
    let mut mean = Vec::with_capacity(x.ncols());
    let mut std = Vec::with_capacity(x.ncols());
    for c in x.axis_iter(Axis(1)) {
        let first = c[0];
        if c.iter().all(|&v| v == first) {
            // exact, so round-off in the mean cannot leave a ~1e-16 "std"
            // that a σ>0 guard would divide by
            mean.push(first);
            std.push(0.0);
            continue;
        }
        let m = c.sum() / n;
        mean.push(m);
        std.push((c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt());
    }
    (mean, std)
}

/// Linear-interpolated quantile of an ascending-sorted slice.
fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    let n = v.len();
    if n == 1 {
        return v[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    v[lo] + (v[hi] - v[lo]) * frac
}

/// Empirical-CDF interpolation of `v` into [0,1]; out-of-range values clip.
fn interp_cdf(v: f64, refs: &[f64], quantiles: &[f64]) -> f64 {
    let m = refs.len();
    if v <= refs[0] {
        return if v == refs[0] { quantiles[0] } else { 0.0 };
    }
    if v >= refs[m - 1] {
        return if v == refs[m - 1] { quantiles[m - 1] } else { 1.0 };
    }
    // first segment containing v
    for j in 0..m - 1 {
        if v <= refs[j + 1] {
            let (a, b) = (refs[j], refs[j + 1]);
            if b == a {
                return quantiles[j];
            }
            return quantiles[j] + (v - a) / (b - a) * (quantiles[j + 1] - quantiles[j]);
        }
    }
    1.0
}

/// Yeo-Johnson transform of a scalar.
pub fn yeo_johnson(x: f64, lambda: f64) -> f64 {
    if x >= 0.0 {
        if lambda.abs() < 1e-10 {
            (x + 1.0).ln()
        } else {
            ((x + 1.0).powf(lambda) - 1.0) / lambda
        }
    } else if (lambda - 2.0).abs() < 1e-10 {
        -(-x + 1.0).ln()
    } else {
        -((-x + 1.0).powf(2.0 - lambda) - 1.0) / (2.0 - lambda)
    }
}

/// Profile log-likelihood of the Yeo-Johnson exponent for one column.
fn yeo_johnson_loglik(x: &[f64], lambda: f64) -> f64 {
    let n = x.len() as f64;
    let t: Vec<f64> = x.iter().map(|&v| yeo_johnson(v, lambda)).collect();
    let mean = t.iter().sum::<f64>() / n;
    let var = t.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if var <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let jac: f64 = x.iter().map(|&v| v.signum() * (v.abs() + 1.0).ln()).sum();
    -n / 2.0 * var.ln() + (lambda - 1.0) * jac
}

/// Golden-section search for the maximum of `f` on [a, b].
fn golden_section_max(mut a: f64, mut b: f64, tol: f64, f: impl Fn(f64) -> f64) -> f64 {
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}
