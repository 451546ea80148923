use std::f64::consts::PI;

use super::RawTrial;
use crate::error::{arg_err, Result};

const ORDER: usize = 4;

/// Second-order section, coefficients normalised so `a0 = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Low,
    High,
}

impl Biquad {
    fn design(kind: Kind, f0: f64, fs: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * f0 / fs;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * q);
        let a0 = 1.0 + alpha;
        let b = match kind {
            Kind::Low => [(1.0 - cos) / 2.0, 1.0 - cos, (1.0 - cos) / 2.0],
            Kind::High => [(1.0 + cos) / 2.0, -(1.0 + cos), (1.0 + cos) / 2.0],
        };
        Self {
            b: b.map(|v| v / a0),
            a: [1.0, -2.0 * cos / a0, (1.0 - alpha) / a0],
        }
    }

    pub fn dc_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / self.a.iter().sum::<f64>()
    }

    /// Magnitude response at `f` Hz.
    pub fn gain_at(&self, f: f64, fs: f64) -> f64 {
        let w = 2.0 * PI * f / fs;
        let eval = |c: &[f64; 3]| {
            let re = c[0] + c[1] * w.cos() + c[2] * (2.0 * w).cos();
            let im = -c[1] * w.sin() - c[2] * (2.0 * w).sin();
            (re * re + im * im).sqrt()
        };
        eval(&self.b) / eval(&self.a)
    }

    /// Transposed direct form II state for a constant input of 1.
    fn steady_state(&self) -> [f64; 2] {
        let k = self.dc_gain();
        let z2 = self.b[2] - self.a[2] * k;
        let z1 = self.b[1] - self.a[1] * k + z2;
        [z1, z2]
    }

    fn run(&self, x: &mut [f64], mut z: [f64; 2]) {
        let [b0, b1, b2] = self.b;
        let [_, a1, a2] = self.a;
        for v in x.iter_mut() {
            let y = b0 * *v + z[0];
            z[0] = b1 * *v - a1 * y + z[1];
            z[1] = b2 * *v - a2 * y;
            *v = y;
        }
    }
}

/// Butterworth sections of order 4 for a low- or high-pass at `f0`.
fn butterworth(kind: Kind, f0: f64, fs: f64) -> Vec<Biquad> {
    (0..ORDER / 2)
        .map(|k| {
            let theta = PI * (2 * k + 1) as f64 / (2 * ORDER) as f64;
            Biquad::design(kind, f0, fs, 1.0 / (2.0 * theta.cos()))
        })
        .collect()
}

/// Cascade of a 4th-order Butterworth high-pass at `lo` and a 4th-order
/// Butterworth low-pass at `hi`.
pub fn butterworth_sections(lo: f64, hi: f64, fs: f64) -> Result<Vec<Biquad>> {
    if !(lo > 0.0 && lo < hi && hi < fs / 2.0) {
        return arg_err(format!(
            "band edges must satisfy 0 < lo < hi < fs/2, got lo={lo} hi={hi} fs={fs}"
        ));
    }
    let mut s = butterworth(Kind::High, lo, fs);
    s.extend(butterworth(Kind::Low, hi, fs));
    Ok(s)
}

/// Run the cascade once, starting every section in the steady state of the
/// first sample.
fn cascade(sections: &[Biquad], x: &mut [f64]) {
    let Some(&first) = x.first() else { return };
    let mut level = first;
    for s in sections {
        let zi = s.steady_state().map(|z| z * level);
        s.run(x, zi);
        level *= s.dc_gain();
    }
}

/// Forward-backward filtering with odd-reflection padding.
pub(crate) fn filtfilt(sections: &[Biquad], x: &[f32], pad: usize) -> Vec<f32> {
    let n = x.len();
    if n < 2 {
        return x.to_vec();
    }
    let pad = pad.min(n - 1);
    let (x0, xn) = (x[0] as f64, x[n - 1] as f64);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * x0 - x[i] as f64));
    ext.extend(x.iter().map(|&v| v as f64));
    ext.extend((1..=pad).map(|i| 2.0 * xn - x[n - 1 - i] as f64));
    cascade(sections, &mut ext);
    ext.reverse();
    cascade(sections, &mut ext);
    ext.reverse();
    ext[pad..pad + n].iter().map(|&v| v as f32).collect()
}

/// Zero-phase band-pass to `[lo, hi]` Hz on every channel.
pub fn bandpass(trial: &RawTrial, lo: f64, hi: f64) -> Result<RawTrial> {
    let sections = butterworth_sections(lo, hi, trial.fs)?;
    let pad = (3.0 * trial.fs / lo).ceil() as usize;
    let data = trial
        .channels()
        .flat_map(|x| filtfilt(&sections, x, pad))
        .collect();
    Ok(trial.with_data(trial.fs, data))
}
