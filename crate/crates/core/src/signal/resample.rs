use super::RawTrial;
use crate::error::{arg_err, Result};

const ZERO_CROSSINGS: f64 = 16.0;
const KAISER_BETA: f64 = 8.0;
const CUTOFF_FRACTION: f64 = 0.9;

/// Modified Bessel function of the first kind, order 0 (power series).
pub(crate) fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let (mut term, mut sum, mut k) = (1.0, 1.0, 1.0);
    while term > sum * 1e-17 {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Windowed-sinc resampling to `target_fs` with a Kaiser window and a
/// cutoff at 0.9 of the target Nyquist frequency. Each output sample's taps
/// are normalised to unit DC gain, so constants survive up to the edges.
pub fn resample(trial: &RawTrial, target_fs: f64) -> Result<RawTrial> {
    if !(target_fs > 0.0) || !target_fs.is_finite() {
        return arg_err(format!(
            "target sampling rate must be positive, got {target_fs}"
        ));
    }
    if target_fs > trial.fs {
        return arg_err(format!("cannot upsample {} Hz to {target_fs} Hz", trial.fs));
    }
    if target_fs == trial.fs {
        return Ok(trial.clone());
    }
    let fs = trial.fs;
    let n = trial.n_samples();
    let n_out = (n as f64 * target_fs / fs).round() as usize;
    let cutoff = CUTOFF_FRACTION * target_fs / 2.0;
    let half_width = ZERO_CROSSINGS / (2.0 * cutoff);
    let i0_beta = bessel_i0(KAISER_BETA);

    // tap tables are shared by every channel
    let mut starts = Vec::with_capacity(n_out);
    let mut taps: Vec<Vec<f64>> = Vec::with_capacity(n_out);
    for m in 0..n_out {
        let t = m as f64 / target_fs;
        let lo = ((t - half_width) * fs).ceil().max(0.0) as usize;
        let hi = (((t + half_width) * fs).floor() as usize).min(n.saturating_sub(1));
        let mut w: Vec<f64> = (lo..=hi)
            .map(|i| {
                let tau = i as f64 / fs - t;
                let r = (tau / half_width).clamp(-1.0, 1.0);
                sinc(2.0 * cutoff * tau) * bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / i0_beta
            })
            .collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
        starts.push(lo);
        taps.push(w);
    }

    let mut out = Vec::with_capacity(n_out * trial.channels().count());
    for x in trial.channels() {
        for (lo, w) in starts.iter().zip(&taps) {
            let acc: f64 = w.iter().zip(&x[*lo..]).map(|(a, b)| a * *b as f64).sum();
            out.push(acc as f32);
        }
    }
    Ok(trial.with_data(target_fs, out))
}
