//! Adaptive-moment optimizer with bias correction and lazy sparse updates:
//! grid slots the batch never touched keep their moments and values.

use crate::fields::Lane;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    /// Denominator guard.
    pub guard: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, guard: 1e-15 }
    }
}

/// First/second moment accumulators plus the shared step counter for one
/// parameter group.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    #[inline]
    fn apply_one(&mut self, params: &mut [f64], idx: usize, g: f64, lr: f64, h: &AdamHyper) {
        let m = &mut self.m[idx];
        *m = h.beta1 * *m + (1.0 - h.beta1) * g;
        let v = &mut self.v[idx];
        *v = h.beta2 * *v + (1.0 - h.beta2) * g * g;
        let m_hat = *m / (1.0 - h.beta1.powi(self.t as i32));
        let v_hat = *v / (1.0 - h.beta2.powi(self.t as i32));
        params[idx] -= lr * m_hat / (v_hat.sqrt() + h.guard);
    }

    /// Updates every parameter (MLP lanes).
    pub fn update_dense(&mut self, params: &mut [f64], grads: &[f64], lr: f64, h: &AdamHyper) {
        debug_assert_eq!(params.len(), self.m.len());
        debug_assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        for i in 0..params.len() {
            self.apply_one(params, i, grads[i], lr, h);
        }
    }

    /// Updates only the lane's touched slots; untouched moments and values
    /// stay put.
    pub fn update_sparse(&mut self, params: &mut [f64], lane: &Lane, lr: f64, h: &AdamHyper) {
        debug_assert_eq!(params.len(), self.m.len());
        self.t += 1;
        for &i in lane.touched() {
            let i = i as usize;
            self.apply_one(params, i, lane.grad(i), lr, h);
        }
    }
}
