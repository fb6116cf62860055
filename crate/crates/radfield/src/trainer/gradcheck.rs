//! Finite-difference validation of the full analytic gradient path. Ray
//! weights are computed once from the unperturbed forward pass and held
//! fixed, matching the stop-gradient in the photometric loss.

use super::loss::{compute_ray_weights, photometric_loss, regularization_from_sum};
use crate::error::Result;
use crate::fields::{GradientBuffer, ParamGroup, PARAM_GROUPS};
use crate::geometry::Ray;
use crate::renderer::{backward_ray, render_rays, RenderCtx};
use crate::rng;
use crate::sampler::OccupancyGrid;
use crate::scene::SceneModel;
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub probes: usize,
    /// Parameter groups actually probed.
    pub groups: Vec<ParamGroup>,
}

struct FrozenLoss<'a> {
    occ: &'a OccupancyGrid,
    rays: &'a [Ray],
    targets: &'a [[f64; 3]],
    weights: Vec<f64>,
    lambda: f64,
    sample_count: usize,
    ctx: RenderCtx,
}

impl FrozenLoss<'_> {
    fn eval(&self, model: &SceneModel) -> Result<f64> {
        let batch = render_rays(model, self.occ, self.rays, &self.ctx)?;
        let preds: Vec<[f64; 3]> = batch.outputs.iter().map(|o| o.rgb).collect();
        let (l_p, _) = photometric_loss(&preds, self.targets, &self.weights)?;
        let tapes = batch.tapes.expect("train mode");
        let mut l1 = 0.0;
        for tape in &tapes {
            for c in &tape.colors {
                l1 += c.c_vd[0].abs() + c.c_vd[1].abs() + c.c_vd[2].abs();
            }
        }
        Ok(l_p + self.lambda * regularization_from_sum(l1, self.sample_count))
    }
}

/// Compares analytic gradients of the total loss against central finite
/// differences (step 1e-4) at `n_probes` randomly chosen touched
/// parameters spanning all parameter groups. Returns the worst relative
/// error, where near-zero pairs count as zero error.
#[allow(clippy::too_many_arguments)]
pub fn finite_diff_check(
    model: &mut SceneModel,
    occ: &OccupancyGrid,
    rays: &[Ray],
    targets: &[[f64; 3]],
    lambda: f64,
    eps_weight: f64,
    clamp: (f64, f64),
    n_probes: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    let ctx = RenderCtx::train(seed, 0);
    let batch = render_rays(model, occ, rays, &ctx)?;
    let tapes = batch.tapes.expect("train mode");
    let sq_errors: Vec<f64> = batch
        .outputs
        .iter()
        .zip(targets)
        .map(|(o, t)| (0..3).map(|ch| (o.rgb[ch] - t[ch]).powi(2)).sum())
        .collect();
    let weights = compute_ray_weights(&sq_errors, eps_weight, clamp.0, clamp.1);
    let preds: Vec<[f64; 3]> = batch.outputs.iter().map(|o| o.rgb).collect();
    let (_, upstream) = photometric_loss(&preds, targets, &weights)?;
    let sample_count: usize = tapes.iter().map(|t| t.colors.len()).sum();
    let decomposed = matches!(model.color, crate::renderer::ColorModel::Decomposed { .. });
    let reg_grad = if decomposed && sample_count > 0 { lambda / sample_count as f64 } else { 0.0 };

    let mut master = GradientBuffer::new(model.lane_sizes(), model.lane_dense());
    for i in 0..rays.len() {
        backward_ray(model, &rays[i], &tapes[i], upstream[i], reg_grad, &mut master)?;
    }

    let frozen = FrozenLoss {
        occ,
        rays,
        targets,
        weights,
        lambda: if decomposed { lambda } else { 0.0 },
        sample_count,
        ctx,
    };

    // Candidate probes per group: touched slots for sparse lanes, every
    // slot for the dense MLP lanes.
    let mut candidates: Vec<(ParamGroup, Vec<usize>)> = Vec::new();
    for g in PARAM_GROUPS {
        let lane = master.lane(g);
        if lane.is_empty() {
            continue;
        }
        let slots: Vec<usize> = if lane.is_dense() {
            (0..lane.len()).collect()
        } else {
            lane.touched().iter().map(|&i| i as usize).collect()
        };
        if !slots.is_empty() {
            candidates.push((g, slots));
        }
    }

    let mut rng = rng::stream(seed, 0xF1D1, 0, 0);
    let h = 1e-4;
    let mut max_rel: f64 = 0.0;
    let mut probes = 0usize;
    while probes < n_probes {
        let (group, slots) = &candidates[probes % candidates.len()];
        let idx = slots[rng.gen_range(0..slots.len())];
        let analytic = master.lane(*group).grad(idx);

        let original = model.lane(*group)[idx];
        model.lane_mut(*group)[idx] = original + h;
        let hi = frozen.eval(model)?;
        model.lane_mut(*group)[idx] = original - h;
        let lo = frozen.eval(model)?;
        model.lane_mut(*group)[idx] = original;

        let fd = (hi - lo) / (2.0 * h);
        let denom = analytic.abs().max(fd.abs());
        let rel = if denom < 1e-10 { 0.0 } else { (analytic - fd).abs() / denom.max(1e-6) };
        max_rel = max_rel.max(rel);
        probes += 1;
    }
    Ok(GradCheckReport {
        max_rel_error: max_rel,
        probes,
        groups: candidates.iter().map(|(g, _)| *g).collect(),
    })
}
