//! Batch losses: error-rescaled photometric term and the l1 regularizer on
//! the view-dependent color factor.

use crate::error::{Error, Result};

/// Per-step loss and ray-weight diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    pub l_p: f64,
    pub l_r: f64,
    pub total: f64,
    pub weight_min: f64,
    pub weight_max: f64,
    pub weight_mean: f64,
}

/// Ray weights: each squared error over the guarded batch minimum, clamped
/// to `[lo, hi]`. The weights are constants downstream (stop-gradient).
pub fn compute_ray_weights(sq_errors: &[f64], eps_weight: f64, lo: f64, hi: f64) -> Vec<f64> {
    assert!(!sq_errors.is_empty(), "weight batch must be nonempty");
    let min = sq_errors.iter().copied().fold(f64::INFINITY, f64::min);
    let denom = min + eps_weight;
    sq_errors.iter().map(|&e| (e / denom).clamp(lo, hi)).collect()
}

/// Weighted mean squared color error and its gradient w.r.t. predictions:
/// exactly `(2 / N) * w_i * (pred_i - target_i)`, with no gradient through
/// the weights.
pub fn photometric_loss(
    pred: &[[f64; 3]],
    target: &[[f64; 3]],
    weights: &[f64],
) -> Result<(f64, Vec<[f64; 3]>)> {
    if pred.len() != target.len() || pred.len() != weights.len() {
        return Err(Error::domain(format!(
            "photometric loss length mismatch: {} predictions, {} targets, {} weights",
            pred.len(),
            target.len(),
            weights.len()
        )));
    }
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let mut grads = vec![[0.0; 3]; pred.len()];
    for i in 0..pred.len() {
        let w = weights[i];
        for ch in 0..3 {
            let d = pred[i][ch] - target[i][ch];
            loss += w * d * d;
            grads[i][ch] = 2.0 / n * w * d;
        }
    }
    Ok((loss / n, grads))
}

/// Mean l1 norm of the per-sample view-dependent colors.
pub fn regularization_loss(samples: &[[f64; 3]]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let sum: f64 = samples.iter().map(|c| c[0].abs() + c[1].abs() + c[2].abs()).sum();
    sum / samples.len() as f64
}

/// Same loss from a running sum (the trainer accumulates over tapes).
pub fn regularization_from_sum(l1_sum: f64, sample_count: usize) -> f64 {
    if sample_count == 0 {
        0.0
    } else {
        l1_sum / sample_count as f64
    }
}

pub fn total_loss(l_p: f64, l_r: f64, lambda: f64) -> f64 {
    l_p + lambda * l_r
}

pub fn loss_report(l_p: f64, l_r: f64, lambda: f64, weights: &[f64]) -> LossReport {
    let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for &w in weights {
        lo = lo.min(w);
        hi = hi.max(w);
        sum += w;
    }
    LossReport {
        l_p,
        l_r,
        total: total_loss(l_p, l_r, lambda),
        weight_min: lo,
        weight_max: hi,
        weight_mean: sum / weights.len().max(1) as f64,
    }
}
