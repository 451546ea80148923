use crate::error::{Error, Result};

/// LU factorisation with partial pivoting of a dense square matrix.
#[derive(Clone, Debug)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    /// Ratio of the largest to the smallest pivot magnitude.
    pub pivot_ratio: f64,
}

impl Lu {
    /// Factor the row-major `n × n` matrix `a`.
    pub fn factor(mut a: Vec<f64>, n: usize) -> Result<Self> {
        assert_eq!(a.len(), n * n);
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let (mut pmax, mut pmin) = (0.0f64, f64::INFINITY);
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| a[i * n + k].abs().total_cmp(&a[j * n + k].abs()))
                .expect("non-empty range");
            let pivot = a[p * n + k];
            pmax = pmax.max(pivot.abs());
            pmin = pmin.min(pivot.abs());
            if pivot.abs() <= 1e-14 * scale {
                return Err(Error::Numeric(format!(
                    "singular system: pivot {pivot:.3e} at column {k}, pivot ratio so far {:.3e}",
                    pmax / pmin.max(f64::MIN_POSITIVE)
                )));
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            for i in k + 1..n {
                let f = a[i * n + k] / pivot;
                a[i * n + k] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        a[i * n + j] -= f * a[k * n + j];
                    }
                }
            }
        }
        Ok(Self {
            n,
            lu: a,
            perm,
            pivot_ratio: pmax / pmin,
        })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[i * n + j] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[i * n + j] * x[j]).sum();
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        x
    }

    /// Solve `a·x = b` for a matrix `a` close to the factored one by
    /// iterative refinement from the factored solution.
    pub fn solve_refined(&self, a: &[f64], b: &[f64], iterations: usize) -> Vec<f64> {
        let n = self.n;
        assert_eq!(a.len(), n * n);
        let mut x = self.solve(b);
        for _ in 0..iterations {
            let r: Vec<f64> = (0..n)
                .map(|i| {
                    b[i] - a[i * n..(i + 1) * n]
                        .iter()
                        .zip(&x)
                        .map(|(p, q)| p * q)
                        .sum::<f64>()
                })
                .collect();
            for (xi, d) in x.iter_mut().zip(self.solve(&r)) {
                *xi += d;
            }
        }
        x
    }
}
