use serde::{Deserialize, Serialize};

use super::{ParamId, ParamStore};
use crate::error::{arg_err, contract_err, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam with bias correction. Moment buffers are allocated lazily per
/// trainable parameter and start at zero.
#[derive(Clone, Debug)]
pub struct Adam {
    pub config: AdamConfig,
    t: u64,
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Result<Self> {
        if !(config.lr >= 0.0)
            || !(0.0..1.0).contains(&config.beta1)
            || !(0.0..1.0).contains(&config.beta2)
        {
            return arg_err(format!("invalid Adam config {config:?}"));
        }
        Ok(Self {
            config,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        })
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    fn moments(&mut self, id: ParamId, n: usize) -> (&mut Vec<f32>, &mut Vec<f32>) {
        let i = id.index();
        if self.m.len() <= i {
            self.m.resize(i + 1, Vec::new());
            self.v.resize(i + 1, Vec::new());
        }
        if self.m[i].len() != n {
            self.m[i] = vec![0.0; n];
            self.v[i] = vec![0.0; n];
        }
        (&mut self.m[i], &mut self.v[i])
    }

    /// One update of every trainable parameter from its gradient buffer.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<()> {
        let ids: Vec<ParamId> = store.trainable_ids().collect();
        if let Some(&missing) = ids.iter().find(|&&id| store.grad(id).is_none()) {
            return contract_err(format!(
                "parameter {:?} has no gradient buffer; run backward first",
                store.name(missing)
            ));
        }
        self.t += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for id in ids {
            let grad = store.grad(id).expect("checked above").to_vec();
            let (m, v) = self.moments(id, grad.len());
            let mut updates = vec![0.0f64; grad.len()];
            for (((mi, vi), g), u) in m.iter_mut().zip(v.iter_mut()).zip(&grad).zip(&mut updates) {
                let g = *g as f64;
                let m_new = beta1 * *mi as f64 + (1.0 - beta1) * g;
                let v_new = beta2 * *vi as f64 + (1.0 - beta2) * g * g;
                *mi = m_new as f32;
                *vi = v_new as f32;
                let m_hat = m_new / bc1;
                let v_hat = v_new / bc2;
                *u = lr * m_hat / (v_hat.sqrt() + epsilon);
            }
            for (p, u) in store.value_mut(id).data_mut().iter_mut().zip(updates) {
                *p = (*p as f64 - u) as f32;
            }
        }
        Ok(())
    }
}
