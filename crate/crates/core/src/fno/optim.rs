//! AdamW with decoupled weight decay and cosine learning-rate annealing.

use super::{FNOConfig, FNOParams, Real};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// First/second moment accumulators, shaped exactly like the parameters.
#[derive(Debug, Clone)]
pub struct OptimizerState<T> {
    pub m: FNOParams<T>,
    pub v: FNOParams<T>,
    pub step: usize,
}

impl<T: Real> OptimizerState<T> {
    pub fn new(config: &FNOConfig) -> Self {
        OptimizerState {
            m: FNOParams::zeros(config),
            v: FNOParams::zeros(config),
            step: 0,
        }
    }
}

/// Annealed learning rate lr_t = ½·lr₀·(1 + cos(π·t/T)).
pub fn cosine_lr(lr0: f64, t: usize, horizon: usize) -> f64 {
    let frac = t as f64 / horizon.max(1) as f64;
    0.5 * lr0 * (1.0 + (std::f64::consts::PI * frac).cos())
}

/// One AdamW update. Weight decay is decoupled: θ ← θ − lr·wd·θ happens
/// independently of the moment-normalized gradient step.
pub fn adamw_step<T: Real>(
    state: &mut OptimizerState<T>,
    params: &mut FNOParams<T>,
    grads: &FNOParams<T>,
    lr: f64,
    weight_decay: f64,
) {
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - ADAM_BETA1.powi(t);
    let bc2 = 1.0 - ADAM_BETA2.powi(t);
    let b1 = T::of_f64(ADAM_BETA1);
    let b2 = T::of_f64(ADAM_BETA2);
    let one_minus_b1 = T::of_f64(1.0 - ADAM_BETA1);
    let one_minus_b2 = T::of_f64(1.0 - ADAM_BETA2);
    let lr_t = T::of_f64(lr);
    let decay = T::of_f64(lr * weight_decay);
    let inv_bc1 = T::of_f64(1.0 / bc1);
    let inv_bc2 = T::of_f64(1.0 / bc2);
    let eps = T::of_f64(ADAM_EPSILON);

    let mut pt = params.tensors_mut();
    let gt = grads.tensors();
    let mut mt = state.m.tensors_mut();
    let mut vt = state.v.tensors_mut();
    for i in 0..pt.len() {
        let (p, g, m, v) = (&mut pt[i], gt[i], &mut mt[i], &mut vt[i]);
        for j in 0..p.len() {
            p[j] -= decay * p[j];
            m[j] = b1 * m[j] + one_minus_b1 * g[j];
            v[j] = b2 * v[j] + one_minus_b2 * g[j] * g[j];
            let m_hat = m[j] * inv_bc1;
            let v_hat = v[j] * inv_bc2;
            p[j] -= lr_t * m_hat / (v_hat.sqrt() + eps);
        }
    }
}
