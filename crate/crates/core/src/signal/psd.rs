use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{SubSegment, N_CHANNELS};
use crate::error::{arg_err, shape_err, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BandSpec {
    pub name: &'static str,
    pub lo: f64,
    pub hi: f64,
}

pub const N_BANDS: usize = 5;

pub const BANDS: [BandSpec; N_BANDS] = [
    BandSpec {
        name: "delta",
        lo: 1.0,
        hi: 4.0,
    },
    BandSpec {
        name: "theta",
        lo: 4.0,
        hi: 8.0,
    },
    BandSpec {
        name: "alpha",
        lo: 8.0,
        hi: 12.0,
    },
    BandSpec {
        name: "beta",
        lo: 12.0,
        hi: 20.0,
    },
    BandSpec {
        name: "gamma",
        lo: 20.0,
        hi: 45.0,
    },
];

/// Welch estimator settings. `nperseg` samples per Hann-windowed segment,
/// consecutive segments sharing `overlap` samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WelchConfig {
    pub nperseg: usize,
    pub overlap: usize,
}

impl Default for WelchConfig {
    fn default() -> Self {
        Self {
            nperseg: 128,
            overlap: 64,
        }
    }
}

/// Band power per electrode, row-major `32 × 5`.
#[derive(Clone, Debug, PartialEq)]
pub struct BandFeature {
    values: Vec<f64>,
}

impl BandFeature {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != N_CHANNELS * N_BANDS {
            return shape_err(format!(
                "band feature needs {} values, got {}",
                N_CHANNELS * N_BANDS,
                values.len()
            ));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return arg_err("band powers must be finite and non-negative");
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, electrode: usize, band: usize) -> f64 {
        self.values[electrode * N_BANDS + band]
    }

    /// All 32 electrode values of one band.
    pub fn band(&self, band: usize) -> Vec<f64> {
        (0..N_CHANNELS).map(|e| self.get(e, band)).collect()
    }
}

/// Welch PSD with a periodic Hann window and constant detrending, followed
/// by exact integration of the piecewise-linear spectrum over each band.
pub struct PsdEstimator {
    config: WelchConfig,
    window: Vec<f64>,
    window_power: f64,
    fft: Arc<dyn Fft<f64>>,
}

impl PsdEstimator {
    pub fn new(config: WelchConfig) -> Result<Self> {
        if config.nperseg < 2 || config.overlap >= config.nperseg {
            return arg_err(format!("invalid Welch configuration {config:?}"));
        }
        let n = config.nperseg;
        let window: Vec<f64> = (0..n)
            .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
            .collect();
        let window_power = window.iter().map(|w| w * w).sum();
        let fft = FftPlanner::new().plan_fft_forward(n);
        Ok(Self {
            config,
            window,
            window_power,
            fft,
        })
    }

    pub fn config(&self) -> WelchConfig {
        self.config
    }

    /// One-sided power spectral density at `k * fs / nperseg`, `k = 0..=nperseg/2`.
    pub fn psd(&self, x: &[f32], fs: f64) -> Result<Vec<f64>> {
        let n = self.config.nperseg;
        if x.len() < n {
            return shape_err(format!(
                "need at least {n} samples for the PSD, got {}",
                x.len()
            ));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return arg_err("non-finite sample in PSD input");
        }
        let step = n - self.config.overlap;
        let n_bins = n / 2 + 1;
        let mut acc = vec![0.0f64; n_bins];
        let mut buf = vec![Complex::new(0.0, 0.0); n];
        let mut segments = 0usize;
        let mut start = 0;
        while start + n <= x.len() {
            let seg = &x[start..start + n];
            let mean = seg.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
            for ((b, &v), w) in buf.iter_mut().zip(seg).zip(&self.window) {
                *b = Complex::new((v as f64 - mean) * w, 0.0);
            }
            self.fft.process(&mut buf);
            for (a, b) in acc.iter_mut().zip(&buf) {
                *a += b.norm_sqr();
            }
            segments += 1;
            start += step;
        }
        let scale = 1.0 / (fs * self.window_power * segments as f64);
        for (k, a) in acc.iter_mut().enumerate() {
            let one_sided = if k == 0 || (n.is_multiple_of(2) && k == n / 2) {
                1.0
            } else {
                2.0
            };
            *a *= scale * one_sided;
        }
        Ok(acc)
    }

    /// Power in each band of one channel.
    pub fn band_powers(&self, x: &[f32], fs: f64) -> Result<[f64; N_BANDS]> {
        let psd = self.psd(x, fs)?;
        let df = fs / self.config.nperseg as f64;
        Ok(BANDS.map(|b| integrate_linear(&psd, df, b.lo, b.hi)))
    }

    pub fn band_feature(&self, sub: &SubSegment) -> Result<BandFeature> {
        let mut values = Vec::with_capacity(N_CHANNELS * N_BANDS);
        for ch in 0..N_CHANNELS {
            values.extend(self.band_powers(sub.channel(ch), sub.fs)?);
        }
        BandFeature::new(values)
    }
}

/// Integral over `[lo, hi]` of the linear interpolant through
/// `(k * df, psd[k])`.
pub(crate) fn integrate_linear(psd: &[f64], df: f64, lo: f64, hi: f64) -> f64 {
    let mut total = 0.0;
    for k in 0..psd.len().saturating_sub(1) {
        let (f0, f1) = (k as f64 * df, (k + 1) as f64 * df);
        let (a, b) = (f0.max(lo), f1.min(hi));
        if a >= b {
            continue;
        }
        let at = |f: f64| psd[k] + (psd[k + 1] - psd[k]) * (f - f0) / df;
        total += 0.5 * (at(a) + at(b)) * (b - a);
    }
    total
}

/// Band powers of a one-second sub-segment with the default estimator.
pub fn band_psd(sub: &SubSegment) -> Result<BandFeature> {
    PsdEstimator::new(WelchConfig::default())?.band_feature(sub)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bands_partition_the_range() {
        assert_eq!(BANDS[0].lo, 1.0);
        assert_eq!(BANDS[N_BANDS - 1].hi, 45.0);
        for w in BANDS.windows(2) {
            assert_eq!(w[0].hi, w[1].lo);
        }
    }

    #[test]
    fn linear_integral_is_additive() {
        let psd = [0.0, 1.0, 4.0, 2.0, 0.5];
        let whole = integrate_linear(&psd, 1.0, 0.3, 3.7);
        let parts = integrate_linear(&psd, 1.0, 0.3, 1.6) + integrate_linear(&psd, 1.0, 1.6, 3.7);
        assert!((whole - parts).abs() < 1e-12);
        assert!((integrate_linear(&psd, 1.0, 0.0, 1.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn periodogram_satisfies_parseval() {
        let est = PsdEstimator::new(WelchConfig {
            nperseg: 128,
            overlap: 0,
        })
        .unwrap();
        let x: Vec<f32> = (0..128)
            .map(|i| ((i * 37 % 11) as f32 - 5.0) * 0.3)
            .collect();
        let psd = est.psd(&x, 128.0).unwrap();
        let mean = x.iter().map(|&v| v as f64).sum::<f64>() / 128.0;
        let energy: f64 = x
            .iter()
            .zip(&est.window)
            .map(|(&v, w)| ((v as f64 - mean) * w).powi(2))
            .sum();
        // bin width is 1 Hz here
        let total: f64 = psd.iter().sum();
        assert!((total - energy / est.window_power).abs() < 1e-9);
    }
}
