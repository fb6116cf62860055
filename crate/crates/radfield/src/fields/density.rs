//! Explicit density grids and their multi-linear interpolation.
//!
//! Vertex storage is flat with x fastest, matching the dense hash-level
//! layout. Raw values are pre-activation; the activation lives in the
//! parent module.

use super::grad::{GradientSink, ParamGroup};
use crate::error::{Error, Result};
use crate::geometry::Aabb;
use crate::{Vec3, Vec4};

/// Interpolation stencil: the `2^dim` cell corners with their weights.
/// Weights always sum to 1.
pub(crate) struct Stencil {
    pub count: usize,
    pub idx: [usize; 16],
    pub weight: [f64; 16],
}

/// Builds the multi-linear stencil at `u` (vertex units, `0..=res-1` per
/// axis). Callers validate range; out-of-range `u` is clamped to the border
/// cell.
pub(crate) fn cell_stencil(res: &[usize], u: &[f64]) -> Stencil {
    let dim = res.len();
    debug_assert!(dim <= 4);
    let mut base = [0usize; 4];
    let mut frac = [0.0f64; 4];
    let mut stride = [0usize; 4];
    let mut s = 1usize;
    for a in 0..dim {
        let cell = u[a].floor().clamp(0.0, (res[a] - 2) as f64);
        base[a] = cell as usize;
        frac[a] = u[a] - cell;
        stride[a] = s;
        s *= res[a];
    }
    let count = 1usize << dim;
    let mut st = Stencil { count, idx: [0; 16], weight: [0.0; 16] };
    for corner in 0..count {
        let mut w = 1.0;
        let mut idx = 0usize;
        for a in 0..dim {
            let bit = (corner >> a) & 1;
            w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
            idx += (base[a] + bit) * stride[a];
        }
        st.idx[corner] = idx;
        st.weight[corner] = w;
    }
    st
}

/// Scalar field over the foreground box, one raw value per vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub bbox: Aabb,
    /// Vertex counts per axis, each >= 2.
    pub resolution: [usize; 3],
    pub raw: Vec<f64>,
}

impl DensityGrid {
    pub fn new(bbox: Aabb, resolution: [usize; 3], initial_raw: f64) -> Result<Self> {
        if resolution.iter().any(|&n| n < 2) {
            return Err(Error::domain("density grid needs >= 2 vertices per axis"));
        }
        let len = resolution.iter().product();
        Ok(Self { bbox, resolution, raw: vec![initial_raw; len] })
    }

    #[inline]
    pub fn vertex_index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        ix + self.resolution[0] * (iy + self.resolution[1] * iz)
    }

    pub fn vertex_position(&self, ix: usize, iy: usize, iz: usize) -> Vec3 {
        let e = self.bbox.extent();
        Vec3::new(
            self.bbox.min.x + e.x * ix as f64 / (self.resolution[0] - 1) as f64,
            self.bbox.min.y + e.y * iy as f64 / (self.resolution[1] - 1) as f64,
            self.bbox.min.z + e.z * iz as f64 / (self.resolution[2] - 1) as f64,
        )
    }

    /// World voxel edge lengths (cell size per axis).
    pub fn cell_size(&self) -> Vec3 {
        let e = self.bbox.extent();
        Vec3::new(
            e.x / (self.resolution[0] - 1) as f64,
            e.y / (self.resolution[1] - 1) as f64,
            e.z / (self.resolution[2] - 1) as f64,
        )
    }

    fn vertex_units(&self, x: Vec3) -> Result<[f64; 3]> {
        if !self.bbox.contains(x) {
            return Err(Error::domain(format!(
                "trilerp query ({}, {}, {}) outside grid box",
                x.x, x.y, x.z
            )));
        }
        let e = self.bbox.extent();
        Ok([
            (x.x - self.bbox.min.x) / e.x * (self.resolution[0] - 1) as f64,
            (x.y - self.bbox.min.y) / e.y * (self.resolution[1] - 1) as f64,
            (x.z - self.bbox.min.z) / e.z * (self.resolution[2] - 1) as f64,
        ])
    }

    /// Trilinear blend of the eight surrounding vertex raws.
    pub fn trilerp(&self, x: Vec3) -> Result<f64> {
        let u = self.vertex_units(x)?;
        let st = cell_stencil(&self.resolution, &u);
        let mut acc = 0.0;
        for c in 0..st.count {
            acc += st.weight[c] * self.raw[st.idx[c]];
        }
        Ok(acc)
    }

    /// Adjoint of `trilerp`: scatters `upstream` through the stencil weights.
    pub fn trilerp_backward(
        &self,
        x: Vec3,
        upstream: f64,
        sink: &mut impl GradientSink,
    ) -> Result<()> {
        let u = self.vertex_units(x)?;
        let st = cell_stencil(&self.resolution, &u);
        for c in 0..st.count {
            sink.add(ParamGroup::FgDensity, st.idx[c], upstream * st.weight[c]);
        }
        Ok(())
    }

    /// Raises the raw value of every vertex of the cell containing `x` to at
    /// least `raw_floor`. Returns the touched vertex indices.
    pub fn raise_cell(&mut self, x: Vec3, raw_floor: f64) -> Result<()> {
        let u = self.vertex_units(x)?;
        let st = cell_stencil(&self.resolution, &u);
        for c in 0..st.count {
            let v = &mut self.raw[st.idx[c]];
            *v = v.max(raw_floor);
        }
        Ok(())
    }
}

/// Scalar field over the warped background domain `[-1, 1]^3 x [0, 1]`,
/// dense in all four dimensions so geometry priors can write it directly.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundDensityGrid {
    /// Vertex counts `(N, N, N, N_r)`, each >= 2.
    pub resolution: [usize; 4],
    pub raw: Vec<f64>,
}

impl BackgroundDensityGrid {
    pub fn new(resolution: [usize; 4], initial_raw: f64) -> Result<Self> {
        if resolution.iter().any(|&n| n < 2) {
            return Err(Error::domain("background grid needs >= 2 vertices per axis"));
        }
        let len = resolution.iter().product();
        Ok(Self { resolution, raw: vec![initial_raw; len] })
    }

    fn vertex_units(&self, w: Vec4) -> Result<[f64; 4]> {
        let spatial_ok = w.x.abs() <= 1.0 + 1e-12 && w.y.abs() <= 1.0 + 1e-12 && w.z.abs() <= 1.0 + 1e-12;
        let radial_ok = (-1e-12..=1.0 + 1e-12).contains(&w.w);
        if !(spatial_ok && radial_ok) {
            return Err(Error::domain(format!(
                "warped query ({}, {}, {}, {}) outside [-1,1]^3 x [0,1]",
                w.x, w.y, w.z, w.w
            )));
        }
        let n = self.resolution;
        Ok([
            (w.x.clamp(-1.0, 1.0) + 1.0) * 0.5 * (n[0] - 1) as f64,
            (w.y.clamp(-1.0, 1.0) + 1.0) * 0.5 * (n[1] - 1) as f64,
            (w.z.clamp(-1.0, 1.0) + 1.0) * 0.5 * (n[2] - 1) as f64,
            w.w.clamp(0.0, 1.0) * (n[3] - 1) as f64,
        ])
    }

    /// Quadlinear blend of the sixteen surrounding vertex raws.
    pub fn quadlerp(&self, w: Vec4) -> Result<f64> {
        let u = self.vertex_units(w)?;
        let st = cell_stencil(&self.resolution, &u);
        let mut acc = 0.0;
        for c in 0..st.count {
            acc += st.weight[c] * self.raw[st.idx[c]];
        }
        Ok(acc)
    }

    pub fn quadlerp_backward(
        &self,
        w: Vec4,
        upstream: f64,
        sink: &mut impl GradientSink,
    ) -> Result<()> {
        let u = self.vertex_units(w)?;
        let st = cell_stencil(&self.resolution, &u);
        for c in 0..st.count {
            sink.add(ParamGroup::BgDensity, st.idx[c], upstream * st.weight[c]);
        }
        Ok(())
    }

    pub fn raise_cell(&mut self, w: Vec4, raw_floor: f64) -> Result<()> {
        let u = self.vertex_units(w)?;
        let st = cell_stencil(&self.resolution, &u);
        for c in 0..st.count {
            let v = &mut self.raw[st.idx[c]];
            *v = v.max(raw_floor);
        }
        Ok(())
    }
}
