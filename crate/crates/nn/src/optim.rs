//! AdamW and the cosine warm-restart learning-rate schedule.

use crate::error::{shape_err, Result};
use crate::graph::{Grads, ParamStore};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// Moment estimates and step counter for one parameter store.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamW {
    pub config: AdamWConfig,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamW {
    pub fn new(store: &ParamStore, config: AdamWConfig) -> Self {
        let zeros = || store.iter().map(|(_, _, t)| Tensor::zeros(t.shape())).collect();
        AdamW {
            config,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.config.lr = lr;
    }

    /// One decoupled-weight-decay Adam update with bias correction.
    pub fn step(&mut self, store: &mut ParamStore, grads: &Grads) -> Result<()> {
        if self.m.len() != store.len() {
            return shape_err("adamw", format!("{} states for {} params", self.m.len(), store.len()));
        }
        let c = self.config;
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        let ids: Vec<_> = store.iter().map(|(id, _, _)| id).collect();
        for (k, id) in ids.into_iter().enumerate() {
            let g = grads.get(id);
            let p = store.get_mut(id);
            if g.shape() != p.shape() {
                return shape_err("adamw", format!("grad {:?} for param {:?}", g.shape(), p.shape()));
            }
            let (m, v) = (self.m[k].data_mut(), self.v[k].data_mut());
            for (i, (pv, &gv)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                *pv -= c.lr * c.weight_decay * *pv;
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * gv;
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * gv * gv;
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                *pv -= c.lr * mhat / (vhat.sqrt() + c.eps);
            }
        }
        Ok(())
    }
}

/// Cosine annealing with warm restarts: the first period lasts `t_0` steps
/// and each later one is `t_mult` times longer.
pub fn cosine_warm_restart_lr(step: u64, eta_max: f64, eta_min: f64, t_0: u64, t_mult: u64) -> f64 {
    let t_0 = t_0.max(1);
    let t_mult = t_mult.max(1);
    let (mut t_cur, mut t_i) = (step, t_0);
    while t_cur >= t_i {
        t_cur -= t_i;
        t_i = t_i.saturating_mul(t_mult);
    }
    let frac = t_cur as f64 / t_i as f64;
    eta_min + 0.5 * (eta_max - eta_min) * (1.0 + (std::f64::consts::PI * frac).cos())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleConfig {
    pub t_0: u64,
    pub t_mult: u64,
    pub eta_min: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            t_0: 1000,
            t_mult: 2,
            eta_min: 0.0,
        }
    }
}

impl ScheduleConfig {
    pub fn lr(&self, step: u64, eta_max: f64) -> f64 {
        cosine_warm_restart_lr(step, eta_max, self.eta_min, self.t_0, self.t_mult)
    }
}
