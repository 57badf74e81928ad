//! Hand-crafted time-domain and frequency-domain features of a vibration
//! sample.
//!
//! Fixed 15-entry order: RMS, Var, peak, kurtosis, skewness, peak-to-peak,
//! line integral, crest, clearance, impulse, shape, spectral centroid,
//! spectral bandwidth, spectral flatness, spectral roll-off. Definitions are
//! normative: population moments, Pearson (non-excess) kurtosis, rectangular
//! DFT window, 85% energy roll-off, epsilon-regularized flatness.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dataio::VibrationSample;
use crate::{MbfdError, Result};

pub const FEATURE_COUNT: usize = 15;
pub const TIME_FEATURE_COUNT: usize = 11;
pub const FREQ_FEATURE_COUNT: usize = 4;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "rms",
    "var",
    "peak",
    "kurtosis",
    "skewness",
    "peak_to_peak",
    "line_integral",
    "crest",
    "clearance",
    "impulse",
    "shape",
    "spec_centroid",
    "spec_bandwidth",
    "spec_flatness",
    "spec_rolloff",
];

const FLATNESS_EPS: f64 = 1e-12;
const ROLLOFF_ENERGY: f64 = 0.85;

/// The 15-dimensional hand-crafted feature set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: [f64; FEATURE_COUNT],
}

impl FeatureVector {
    pub fn time_slice(&self) -> &[f64] {
        &self.values[..TIME_FEATURE_COUNT]
    }

    pub fn freq_slice(&self) -> &[f64] {
        &self.values[TIME_FEATURE_COUNT..]
    }
}

/// The 11 time-domain features of a raw signal.
pub fn time_features_raw(x: &[f64]) -> Result<[f64; TIME_FEATURE_COUNT]> {
    let n = x.len();
    if n < 2 {
        return Err(MbfdError::InvalidSignal(format!("need at least 2 samples, got {n}")));
    }
    let nf = n as f64;
    let mean = x.iter().sum::<f64>() / nf;
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / nf).sqrt();
    let m2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf;
    let m3 = x.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / nf;
    let m4 = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / nf;
    if m2 <= 0.0 {
        return Err(MbfdError::FeatureUndefined(
            "kurtosis/skewness undefined for zero-variance input".into(),
        ));
    }
    let kurtosis = m4 / (m2 * m2);
    let skewness = m3 / m2.powf(1.5);
    let peak = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let peak_to_peak = max - min;
    let line_integral = x.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>();
    let mean_abs = x.iter().map(|v| v.abs()).sum::<f64>() / nf;
    let mean_sqrt_abs = x.iter().map(|v| v.abs().sqrt()).sum::<f64>() / nf;
    if rms == 0.0 || mean_abs == 0.0 {
        return Err(MbfdError::FeatureUndefined(
            "factor features undefined for an all-zero signal".into(),
        ));
    }
    let crest = peak / rms;
    let clearance = peak / (mean_sqrt_abs * mean_sqrt_abs);
    let impulse = peak / mean_abs;
    let shape = rms / mean_abs;
    Ok([
        rms,
        m2,
        peak,
        kurtosis,
        skewness,
        peak_to_peak,
        line_integral,
        crest,
        clearance,
        impulse,
        shape,
    ])
}

/// Magnitude spectrum over one full-length DFT, bins 0..=N/2.
pub fn magnitude_spectrum(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft.process(&mut buf);
    buf[..=n / 2].iter().map(|c| c.norm()).collect()
}

/// The 4 spectral features: centroid, bandwidth, flatness, roll-off.
pub fn freq_features_raw(x: &[f64], sample_rate: f64) -> Result<[f64; FREQ_FEATURE_COUNT]> {
    let n = x.len();
    if n < 8 {
        return Err(MbfdError::InvalidSignal(format!("need at least 8 samples, got {n}")));
    }
    let mags = magnitude_spectrum(x);
    let freqs: Vec<f64> = (0..mags.len()).map(|k| k as f64 * sample_rate / n as f64).collect();
    let total: f64 = mags.iter().sum();
    if total == 0.0 {
        return Err(MbfdError::FeatureUndefined(
            "centroid/bandwidth undefined for an all-zero spectrum".into(),
        ));
    }
    let centroid = freqs.iter().zip(&mags).map(|(f, m)| f * m).sum::<f64>() / total;
    let bandwidth = (freqs
        .iter()
        .zip(&mags)
        .map(|(f, m)| m * (f - centroid).powi(2))
        .sum::<f64>()
        / total)
        .sqrt();
    let log_mean =
        mags.iter().map(|m| (m + FLATNESS_EPS).ln()).sum::<f64>() / mags.len() as f64;
    let arith_mean = mags.iter().map(|m| m + FLATNESS_EPS).sum::<f64>() / mags.len() as f64;
    let flatness = log_mean.exp() / arith_mean;
    let energy_total: f64 = mags.iter().map(|m| m * m).sum();
    let mut cum = 0.0;
    let mut rolloff = freqs[mags.len() - 1];
    for (k, m) in mags.iter().enumerate() {
        cum += m * m;
        if cum >= ROLLOFF_ENERGY * energy_total {
            rolloff = freqs[k];
            break;
        }
    }
    Ok([centroid, bandwidth, flatness, rolloff])
}

/// Time features of a sample.
pub fn time_features(x: &VibrationSample) -> Result<[f64; TIME_FEATURE_COUNT]> {
    time_features_raw(&x.values)
}

/// Spectral features of a sample.
pub fn freq_features(x: &VibrationSample) -> Result<[f64; FREQ_FEATURE_COUNT]> {
    freq_features_raw(&x.values, x.sample_rate)
}

/// Full 15-entry feature vector: time features then spectral features.
pub fn extract(x: &VibrationSample) -> Result<FeatureVector> {
    extract_raw(&x.values, x.sample_rate)
}

pub fn extract_raw(values: &[f64], sample_rate: f64) -> Result<FeatureVector> {
    let t = time_features_raw(values)?;
    let f = freq_features_raw(values, sample_rate)?;
    let mut out = [0.0; FEATURE_COUNT];
    out[..TIME_FEATURE_COUNT].copy_from_slice(&t);
    out[TIME_FEATURE_COUNT..].copy_from_slice(&f);
    Ok(FeatureVector { values: out })
}
