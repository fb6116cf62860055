//! The trainable scene: bounds, density grids, color-embedding grids, and
//! color heads, with routed field queries and gradient scatter.

use crate::config::{BgMode, RunConfig};
use crate::error::{Error, Result};
use crate::fields::{
    density_activation, density_activation_deriv, density_activation_inv, warp_world_point,
    BackgroundDensityGrid, DensityGrid, GradientSink, HashFeatureGrid, ParamGroup, QuerySource,
};
use crate::geometry::{classify_point, CameraModel, Region, SceneBounds};
use crate::renderer::{ColorModel, DirectionEncoding, MlpParams};
use crate::rng;
use crate::{Vec3, Vec4};

/// Rendering knobs derived from config (fixed at model build time).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderParams {
    /// March step in world units.
    pub step: f64,
    /// Background samples per ray.
    pub bg_samples: usize,
    /// Fill color for rays that produce no samples.
    pub bg_fill: [f64; 3],
    /// Evaluation-mode transmittance early-out.
    pub termination: f64,
}

/// Warped background fields (absent in the `bg_mode = none` ablation).
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundFields {
    pub density: BackgroundDensityGrid,
    pub color: HashFeatureGrid,
}

/// Result of a routed field query at one sample position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldQuery {
    /// Pre-activation density.
    pub raw: f64,
    /// Activated density.
    pub sigma: f64,
    pub source: QuerySource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneModel {
    pub bounds: SceneBounds,
    pub fg_density: DensityGrid,
    pub fg_color: HashFeatureGrid,
    pub bg: Option<BackgroundFields>,
    pub color: ColorModel,
    pub render: RenderParams,
}

impl SceneModel {
    /// Builds a freshly initialized model from config and the training
    /// cameras (which define the scene bounds).
    pub fn build(cfg: &RunConfig, cameras: &[CameraModel]) -> Result<Self> {
        let bounds = crate::geometry::compute_scene_bounds(
            cameras,
            cfg.scene.frustum_near,
            cfg.scene.frustum_far,
            Vec3::new(
                cfg.scene.enlargement[0],
                cfg.scene.enlargement[1],
                cfg.scene.enlargement[2],
            ),
        )?;
        Self::build_with_bounds(cfg, bounds)
    }

    pub fn build_with_bounds(cfg: &RunConfig, bounds: SceneBounds) -> Result<Self> {
        let seed = cfg.train.seed;
        let raw0 = density_activation_inv(cfg.grid.init_density);
        let n = cfg.grid.fg_resolution;
        let fg_density = DensityGrid::new(bounds.fg, [n, n, n], raw0)?;

        let table = 1usize << cfg.grid.hash_table_log2;
        let mut fg_color = HashFeatureGrid::new(
            3,
            cfg.grid.hash_levels,
            cfg.grid.hash_features,
            table,
            cfg.grid.hash_base_resolution,
            cfg.grid.hash_growth,
        )?;
        fg_color.init_uniform(&mut rng::stream(seed, rng::domain::INIT_FG_COLOR, 0, 0));

        let bg = match cfg.bg_mode {
            BgMode::WarpedGrid => {
                let nb = cfg.grid.bg_resolution;
                let nr = cfg.grid.bg_radial_resolution;
                let density = BackgroundDensityGrid::new([nb, nb, nb, nr], raw0)?;
                let mut color = HashFeatureGrid::new(
                    4,
                    cfg.grid.hash_levels,
                    cfg.grid.hash_features,
                    table,
                    cfg.grid.hash_base_resolution,
                    cfg.grid.hash_growth,
                )?;
                color.init_uniform(&mut rng::stream(seed, rng::domain::INIT_BG_COLOR, 0, 0));
                Some(BackgroundFields { density, color })
            }
            BgMode::None => None,
        };

        let emb_len = cfg.grid.hash_levels * cfg.grid.hash_features;
        let encoding = DirectionEncoding { bands: cfg.render.dir_bands };
        let mut hidden = vec![cfg.render.hidden_width; cfg.render.hidden_layers];
        let mut vi_widths = vec![emb_len];
        vi_widths.append(&mut hidden.clone());
        vi_widths.push(3);
        let mut vd_widths = vec![emb_len + encoding.output_len()];
        vd_widths.append(&mut hidden);
        vd_widths.push(3);

        let color = if cfg.no_color_decomp {
            let mut head = MlpParams::new(&vd_widths)?;
            head.init_he(&mut rng::stream(seed, rng::domain::INIT_MLP_VD, 0, 0));
            ColorModel::Entangled { head, encoding }
        } else {
            let mut vi = MlpParams::new(&vi_widths)?;
            vi.init_he(&mut rng::stream(seed, rng::domain::INIT_MLP_VI, 0, 0));
            let mut vd = MlpParams::new(&vd_widths)?;
            vd.init_he(&mut rng::stream(seed, rng::domain::INIT_MLP_VD, 0, 0));
            vd.set_output_bias(cfg.render.vd_bias_init);
            ColorModel::Decomposed { vi, vd, encoding }
        };

        let render = RenderParams {
            step: bounds.fg.diagonal() / cfg.sampler.steps_per_diagonal as f64,
            bg_samples: cfg.sampler.bg_samples,
            bg_fill: cfg.render.bg_fill,
            termination: cfg.render.termination,
        };
        Ok(Self { bounds, fg_density, fg_color, bg, color, render })
    }

    pub fn embedding_len(&self) -> usize {
        self.fg_color.embedding_len()
    }

    /// Foreground hash coordinates: the foreground box mapped to `[0, 1]^3`.
    #[inline]
    fn fg_hash_coords(&self, x: Vec3) -> [f64; 3] {
        let e = self.bounds.fg.extent();
        [
            ((x.x - self.bounds.fg.min.x) / e.x).clamp(0.0, 1.0),
            ((x.y - self.bounds.fg.min.y) / e.y).clamp(0.0, 1.0),
            ((x.z - self.bounds.fg.min.z) / e.z).clamp(0.0, 1.0),
        ]
    }

    /// Background hash coordinates: warped shell coordinates mapped from
    /// `[-1, 1]^3 x (0, 1]` to `[0, 1]^4`.
    #[inline]
    fn bg_hash_coords(warped: Vec4) -> [f64; 4] {
        [
            ((warped.x + 1.0) * 0.5).clamp(0.0, 1.0),
            ((warped.y + 1.0) * 0.5).clamp(0.0, 1.0),
            ((warped.z + 1.0) * 0.5).clamp(0.0, 1.0),
            warped.w.clamp(0.0, 1.0),
        ]
    }

    fn warp(&self, x: Vec3) -> Result<Vec4> {
        warp_world_point(&self.bounds, x)
    }

    /// Density and color embedding at a world point, routed by region.
    /// `emb` must have `embedding_len()` slots.
    pub fn query_fields(&self, x: Vec3, emb: &mut [f64]) -> Result<FieldQuery> {
        match classify_point(&self.bounds, x) {
            Region::Foreground => {
                let raw = self.fg_density.trilerp(x)?;
                self.fg_color.encode_into(&self.fg_hash_coords(x), emb)?;
                Ok(FieldQuery { raw, sigma: density_activation(raw), source: QuerySource::Fg })
            }
            Region::Background => {
                let Some(bg) = &self.bg else {
                    return Err(Error::domain(
                        "background sample with background modeling disabled",
                    ));
                };
                let warped = self.warp(x)?;
                let raw = bg.density.quadlerp(warped)?;
                bg.color.encode_into(&Self::bg_hash_coords(warped), emb)?;
                Ok(FieldQuery { raw, sigma: density_activation(raw), source: QuerySource::Bg })
            }
            Region::Outside => Err(Error::domain(format!(
                "field query at ({}, {}, {}) outside the background box",
                x.x, x.y, x.z
            ))),
        }
    }

    /// Total density lookup for occupancy maintenance: zero outside the
    /// modeled region instead of an error.
    pub fn density_at(&self, x: Vec3) -> f64 {
        match classify_point(&self.bounds, x) {
            Region::Foreground => {
                self.fg_density.trilerp(x).map(density_activation).unwrap_or(0.0)
            }
            Region::Background => match (&self.bg, self.warp(x)) {
                (Some(bg), Ok(w)) => {
                    bg.density.quadlerp(w).map(density_activation).unwrap_or(0.0)
                }
                _ => 0.0,
            },
            Region::Outside => 0.0,
        }
    }

    /// Scatters a sample's density and embedding gradients into the grids
    /// that produced them.
    pub fn scatter_field_grads(
        &self,
        x: Vec3,
        query: &FieldQuery,
        d_sigma: f64,
        d_emb: &[f64],
        sink: &mut impl GradientSink,
    ) -> Result<()> {
        let d_raw = d_sigma * density_activation_deriv(query.raw);
        match query.source {
            QuerySource::Fg => {
                if d_raw != 0.0 {
                    self.fg_density.trilerp_backward(x, d_raw, sink)?;
                }
                self.fg_color.encode_backward(
                    &self.fg_hash_coords(x),
                    d_emb,
                    ParamGroup::FgColor,
                    sink,
                )
            }
            QuerySource::Bg => {
                let bg = self.bg.as_ref().expect("bg query with background disabled");
                let warped = self.warp(x)?;
                if d_raw != 0.0 {
                    bg.density.quadlerp_backward(warped, d_raw, sink)?;
                }
                bg.color.encode_backward(
                    &Self::bg_hash_coords(warped),
                    d_emb,
                    ParamGroup::BgColor,
                    sink,
                )
            }
        }
    }

    /// Parameter count per optimizer lane.
    pub fn lane_sizes(&self) -> [usize; 6] {
        let (vi_len, vd_len) = match &self.color {
            ColorModel::Decomposed { vi, vd, .. } => (vi.data.len(), vd.data.len()),
            ColorModel::Entangled { head, .. } => (0, head.data.len()),
        };
        [
            self.fg_density.raw.len(),
            self.bg.as_ref().map(|b| b.density.raw.len()).unwrap_or(0),
            self.fg_color.data.len(),
            self.bg.as_ref().map(|b| b.color.data.len()).unwrap_or(0),
            vi_len,
            vd_len,
        ]
    }

    /// MLP lanes skip touch tracking (they are dense every step).
    pub fn lane_dense(&self) -> [bool; 6] {
        [false, false, false, false, true, true]
    }

    pub fn lane(&self, group: ParamGroup) -> &[f64] {
        match group {
            ParamGroup::FgDensity => &self.fg_density.raw,
            ParamGroup::BgDensity => self.bg.as_ref().map(|b| b.density.raw.as_slice()).unwrap_or(&[]),
            ParamGroup::FgColor => &self.fg_color.data,
            ParamGroup::BgColor => self.bg.as_ref().map(|b| b.color.data.as_slice()).unwrap_or(&[]),
            ParamGroup::MlpVi => match &self.color {
                ColorModel::Decomposed { vi, .. } => &vi.data,
                ColorModel::Entangled { .. } => &[],
            },
            ParamGroup::MlpVd => match &self.color {
                ColorModel::Decomposed { vd, .. } => &vd.data,
                ColorModel::Entangled { head, .. } => &head.data,
            },
        }
    }

    pub fn lane_mut(&mut self, group: ParamGroup) -> &mut [f64] {
        match group {
            ParamGroup::FgDensity => &mut self.fg_density.raw,
            ParamGroup::BgDensity => {
                self.bg.as_mut().map(|b| b.density.raw.as_mut_slice()).unwrap_or(&mut [])
            }
            ParamGroup::FgColor => &mut self.fg_color.data,
            ParamGroup::BgColor => {
                self.bg.as_mut().map(|b| b.color.data.as_mut_slice()).unwrap_or(&mut [])
            }
            ParamGroup::MlpVi => match &mut self.color {
                ColorModel::Decomposed { vi, .. } => &mut vi.data,
                ColorModel::Entangled { .. } => &mut [],
            },
            ParamGroup::MlpVd => match &mut self.color {
                ColorModel::Decomposed { vd, .. } => &mut vd.data,
                ColorModel::Entangled { head, .. } => &mut head.data,
            },
        }
    }
}
