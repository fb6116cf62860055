//! Scene fields: explicit density grids, hashed color-embedding grids, the
//! background warp, and the gradient scatter used for training.

mod density;
mod grad;
mod hash;

pub use density::{BackgroundDensityGrid, DensityGrid};
pub use grad::{GradientBuffer, GradientSink, Lane, ParamGroup, PARAM_GROUPS};
#[cfg(feature = "parallel")]
pub use grad::{SharedGradientBuffer, SharedSink};
pub use hash::{hash_index, ColorEmbedding, HashFeatureGrid};

use crate::error::{Error, Result};
use crate::geometry::{classify_point, Region, SceneBounds};
use crate::{Vec3, Vec4};

/// Density activation keeping sigma nonnegative under gradient updates:
/// softplus(x) = ln(1 + e^x).
#[inline]
pub fn density_activation(raw: f64) -> f64 {
    if raw > 30.0 {
        raw
    } else if raw < -30.0 {
        raw.exp()
    } else {
        raw.exp().ln_1p()
    }
}

/// Inverse of the density activation, for writing target densities into the
/// raw grid.
#[inline]
pub fn density_activation_inv(sigma: f64) -> f64 {
    assert!(sigma > 0.0, "density must be positive to invert the activation");
    if sigma > 30.0 {
        // ln(e^s - 1) = s + ln(1 - e^-s); the correction underflows anyway.
        sigma
    } else {
        sigma.exp_m1().ln()
    }
}

/// d/dx softplus(x) = logistic(x).
#[inline]
pub fn density_activation_deriv(raw: f64) -> f64 {
    logistic(raw)
}

#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Maps a foreground-normalized point with `linf >= 1` onto the unit
/// l-infinity shell plus an inverse-radius coordinate:
/// `x -> (x / r, 1 / r)` with `r = ||x||_inf`.
pub fn warp_background(x: Vec3) -> Result<Vec4> {
    let r = x.x.abs().max(x.y.abs()).max(x.z.abs());
    if r < 1.0 {
        return Err(Error::domain(format!(
            "warp input has linf norm {r} < 1 (point is foreground)"
        )));
    }
    let inv = 1.0 / r;
    Ok(Vec4::new(x.x * inv, x.y * inv, x.z * inv, inv))
}

/// Warps a world point in the background region. Points that round to a
/// hair inside the shell are projected back onto it so boundary samples
/// stay valid.
pub fn warp_world_point(bounds: &SceneBounds, x: Vec3) -> Result<Vec4> {
    let n = bounds.fg_normalized(x);
    let r = n.x.abs().max(n.y.abs()).max(n.z.abs());
    if r < 1.0 {
        warp_background(n / r)
    } else {
        warp_background(n)
    }
}

/// Which field answered a query; recorded on the tape so the backward pass
/// scatters into the right grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuerySource {
    Fg,
    Bg,
}

/// Raw (pre-activation) density lookup routed by region. Foreground points
/// read the trilinear grid directly; background points are warped to 4D
/// first.
pub fn density_query_raw(
    bounds: &SceneBounds,
    fg: &DensityGrid,
    bg: &BackgroundDensityGrid,
    x: Vec3,
) -> Result<(f64, QuerySource)> {
    match classify_point(bounds, x) {
        Region::Foreground => Ok((fg.trilerp(x)?, QuerySource::Fg)),
        Region::Background => {
            let warped = warp_background(bounds.fg_normalized(x))?;
            Ok((bg.quadlerp(warped)?, QuerySource::Bg))
        }
        Region::Outside => Err(Error::domain(format!(
            "density query at ({}, {}, {}) outside the background box",
            x.x, x.y, x.z
        ))),
    }
}

/// Activated density at a world point inside the background box.
pub fn density_query(
    bounds: &SceneBounds,
    fg: &DensityGrid,
    bg: &BackgroundDensityGrid,
    x: Vec3,
) -> Result<f64> {
    density_query_raw(bounds, fg, bg, x).map(|(raw, _)| density_activation(raw))
}
