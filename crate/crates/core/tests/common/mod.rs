//! Shared helpers for the integration suites.
#![allow(dead_code)]

pub mod nn;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stiln::tensor::{Tape, Tensor, Var};
use stiln::Result;

pub const FD_STEP: f32 = 1e-3;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0f32..1.0))
}

/// Scalarise an arbitrary output with fixed random weights so every output
/// element contributes to the checked gradient.
fn projection(shape: &[usize], seed: u64) -> Tensor {
    let mut r = rng(seed ^ 0x5eed_cafe);
    Tensor::from_fn(shape, |_| r.random_range(-1.0f32..1.0))
}

fn projected(out: &Tensor, weights: &Tensor) -> f64 {
    out.data()
        .iter()
        .zip(weights.data())
        .map(|(&y, &w)| y as f64 * w as f64)
        .sum()
}

/// Relative error `|a - n| / max(|a|, |n|)` of the whole gradient vector.
pub fn rel_err(analytic: &[f32], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| (a as f64 - n).powi(2))
        .sum::<f64>()
        .sqrt();
    let na = analytic
        .iter()
        .map(|&a| (a as f64).powi(2))
        .sum::<f64>()
        .sqrt();
    let nn = numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
    let denom = na.max(nn);
    if denom == 0.0 {
        0.0
    } else {
        diff / denom
    }
}

/// Tape gradients of the projected output with respect to every input,
/// along with the projection weights.
fn analytic_grads<F>(inputs: &[Tensor], seed: u64, f: &F) -> (Vec<Vec<f32>>, Tensor)
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|x| tape.leaf(x.clone(), true)).collect();
    let out = f(&mut tape, &vars).expect("forward");
    let weights = projection(tape.shape(out), seed);
    let w = tape.constant(weights.clone());
    let prod = tape.mul(out, w).expect("same shape");
    let loss = tape.sum(prod);
    tape.backward(loss).expect("backward");
    let grads = vars
        .iter()
        .zip(inputs)
        .map(|(&v, x)| {
            tape.grad(v)
                .map(<[f32]>::to_vec)
                .unwrap_or_else(|| vec![0.0; x.len()])
        })
        .collect();
    (grads, weights)
}

/// Central finite-difference check of `f` with respect to every input.
/// Returns the worst relative error across inputs.
pub fn grad_check<F>(inputs: &[Tensor], seed: u64, f: F) -> f64
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let eval = |xs: &[Tensor]| -> Tensor {
        let mut tape = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|x| tape.leaf(x.clone(), false)).collect();
        let out = f(&mut tape, &vars).expect("forward");
        tape.value(out).clone()
    };
    let (grads, weights) = analytic_grads(inputs, seed, &f);

    let mut worst = 0.0f64;
    for (k, analytic) in grads.iter().enumerate() {
        let mut numeric = vec![0.0f64; inputs[k].len()];
        let mut xs = inputs.to_vec();
        for (i, n) in numeric.iter_mut().enumerate() {
            let orig = inputs[k].data()[i];
            let (up, down) = (orig + FD_STEP, orig - FD_STEP);
            xs[k].data_mut()[i] = up;
            let fp = projected(&eval(&xs), &weights);
            xs[k].data_mut()[i] = down;
            let fm = projected(&eval(&xs), &weights);
            xs[k].data_mut()[i] = orig;
            *n = (fp - fm) / (up as f64 - down as f64);
        }
        worst = worst.max(rel_err(analytic, &numeric));
    }
    worst
}

/// Step of the f64 finite differences taken through a loop oracle.
pub const ORACLE_FD_STEP: f64 = 1e-6;

/// Like [`grad_check`], but the numeric side differentiates `oracle`, an
/// independent f64 implementation of the same function, so f32 rounding
/// and nearby ReLU or max kinks do not pollute the difference quotient.
/// Also asserts that the oracle and the tape agree on the forward value.
pub fn grad_check_oracle<F, O>(inputs: &[Tensor], seed: u64, f: F, oracle: O) -> f64
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
    O: Fn(&[nn::Arr]) -> Vec<f64>,
{
    let (grads, weights) = analytic_grads(inputs, seed, &f);
    let base: Vec<nn::Arr> = inputs.iter().map(nn::Arr::from).collect();

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|x| tape.leaf(x.clone(), false)).collect();
    let out = f(&mut tape, &vars).expect("forward");
    let reference = oracle(&base);
    assert_eq!(reference.len(), tape.value(out).len(), "oracle output size");
    for (a, b) in tape.value(out).data().iter().zip(&reference) {
        assert!(
            (*a as f64 - b).abs() < 1e-4,
            "oracle disagrees with the tape: {a} vs {b}"
        );
    }

    let project = |y: Vec<f64>| -> f64 {
        y.iter()
            .zip(weights.data())
            .map(|(a, &w)| a * w as f64)
            .sum()
    };
    let mut worst = 0.0f64;
    for (k, analytic) in grads.iter().enumerate() {
        let mut xs = base.clone();
        let numeric: Vec<f64> = (0..base[k].v.len())
            .map(|i| {
                let orig = base[k].v[i];
                xs[k].v[i] = orig + ORACLE_FD_STEP;
                let fp = project(oracle(&xs));
                xs[k].v[i] = orig - ORACLE_FD_STEP;
                let fm = project(oracle(&xs));
                xs[k].v[i] = orig;
                (fp - fm) / (2.0 * ORACLE_FD_STEP)
            })
            .collect();
        worst = worst.max(rel_err(analytic, &numeric));
    }
    worst
}

/// `amp * sin(2π f t + phase)` on every channel.
pub fn sine_trial(fs: f64, secs: f64, f: f64, amp: f64, phase: f64) -> stiln::signal::RawTrial {
    let n = (fs * secs).round() as usize;
    let one: Vec<f32> = (0..n)
        .map(|i| (amp * (2.0 * std::f64::consts::PI * f * i as f64 / fs + phase).sin()) as f32)
        .collect();
    let data = (0..stiln::signal::N_CHANNELS)
        .flat_map(|_| one.iter().copied())
        .collect();
    stiln::signal::RawTrial::new(1, 1, fs, data, 2.0, 8.0).unwrap()
}

/// Amplitude of the `f` Hz component by direct correlation.
pub fn dft_amplitude(x: &[f32], fs: f64, f: f64) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (n, &v) in x.iter().enumerate() {
        let ph = 2.0 * std::f64::consts::PI * f * n as f64 / fs;
        re += v as f64 * ph.cos();
        im -= v as f64 * ph.sin();
    }
    2.0 * re.hypot(im) / x.len() as f64
}

/// Rectangular-window periodogram by direct DFT: `(frequency, power)` per
/// one-sided bin, powers summing to the mean-removed signal variance.
pub fn direct_periodogram(x: &[f32], fs: f64) -> Vec<(f64, f64)> {
    let n = x.len();
    let mean = x.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &v) in x.iter().enumerate() {
                let ph = 2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
                re += (v as f64 - mean) * ph.cos();
                im -= (v as f64 - mean) * ph.sin();
            }
            let two_sided = if k == 0 || 2 * k == n { 1.0 } else { 2.0 };
            (
                k as f64 * fs / n as f64,
                two_sided * (re * re + im * im) / (n * n) as f64,
            )
        })
        .collect()
}
