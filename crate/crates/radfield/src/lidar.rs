//! Geometry priors: point-cloud ingestion, synthetic background-shell
//! points, and density/occupancy initialization from both.

use crate::error::Result;
use crate::fields::{density_activation_inv, warp_world_point, BackgroundDensityGrid, DensityGrid};
use crate::geometry::{classify_point, Region, SceneBounds};
use crate::io::{read_ply, write_ply, PlyFormat};
use crate::sampler::OccupancyGrid;
use crate::Vec3;
use std::path::Path;

/// World-frame points feeding the initialization.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        Self { points }
    }

    pub fn load_ply(path: &Path) -> Result<Self> {
        Ok(Self { points: read_ply(path)? })
    }

    pub fn save_ply(&self, path: &Path, format: PlyFormat) -> Result<()> {
        write_ply(path, &self.points, format)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Shell lattice configuration. The four shell faces are the top (min-y,
/// with y pointing down), front (max-z), left (min-x) and right (max-x)
/// faces of the background box; the ground and the region behind the
/// trajectory are expected to be covered by real returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShellConfig {
    /// Lattice side length per face (`points_per_face^2` points each).
    pub points_per_face: usize,
    /// Spatial resolution used to size the one-cell inward offset.
    pub inset_cells: usize,
}

/// Density/occupancy initialization parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LidarInitConfig {
    /// Density written at prior locations.
    pub sigma0: f64,
    pub also_mark_occupancy: bool,
    /// March step, needed to keep the occupancy bit rule consistent.
    pub march_step: f64,
}

/// Counts per region after initialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct InitReport {
    pub fg_points: usize,
    pub bg_points: usize,
    pub skipped: usize,
}

/// Default density constant: a single foreground voxel traversal reaches
/// alpha of about 0.99, independent of grid resolution.
pub fn default_sigma0(fg: &DensityGrid) -> f64 {
    let c = fg.cell_size();
    let edge = (c.x + c.y + c.z) / 3.0;
    -(0.01f64.ln()) / edge
}

/// Uniform lattice points just inside the top/front/left/right faces of
/// the background box, one density cell inward, half a lattice cell inset
/// from the face edges.
pub fn synthesize_shell_points(bounds: &SceneBounds, cfg: &ShellConfig) -> PointCloud {
    let bg = &bounds.bg;
    let extent = bg.extent();
    let n = cfg.points_per_face.max(1);
    let inset = Vec3::new(
        extent.x / cfg.inset_cells.max(1) as f64,
        extent.y / cfg.inset_cells.max(1) as f64,
        extent.z / cfg.inset_cells.max(1) as f64,
    );
    // (fixed axis, fixed value, tangent axis a, tangent axis b)
    let faces = [
        (1usize, bg.min.y + inset.y, 0usize, 2usize), // top (y points down)
        (2, bg.max.z - inset.z, 0, 1),                // front
        (0, bg.min.x + inset.x, 1, 2),                // left
        (0, bg.max.x - inset.x, 1, 2),                // right
    ];
    let mut points = Vec::with_capacity(4 * n * n);
    for &(fixed, value, ax_a, ax_b) in &faces {
        for i in 0..n {
            for j in 0..n {
                let fa = (i as f64 + 0.5) / n as f64;
                let fb = (j as f64 + 0.5) / n as f64;
                let mut p = Vec3::zeros();
                p[fixed] = value;
                p[ax_a] = bg.min[ax_a] + fa * extent[ax_a];
                p[ax_b] = bg.min[ax_b] + fb * extent[ax_b];
                points.push(p);
            }
        }
    }
    PointCloud { points }
}

/// Writes `sigma0` into every vertex of the cell containing each point
/// (max-merged so repeats and overlaps are idempotent) and marks the
/// occupancy voxel. Points outside the background box, or background
/// points when no background grid exists, are counted as skipped.
pub fn initialize_from_points(
    points: &PointCloud,
    bounds: &SceneBounds,
    fg: &mut DensityGrid,
    mut bg: Option<&mut BackgroundDensityGrid>,
    occ: &mut OccupancyGrid,
    cfg: &LidarInitConfig,
) -> Result<InitReport> {
    assert!(cfg.sigma0 > 0.0, "sigma0 must be positive");
    let raw0 = density_activation_inv(cfg.sigma0);
    let mut report = InitReport::default();
    for &p in &points.points {
        match classify_point(bounds, p) {
            Region::Foreground => {
                fg.raise_cell(p, raw0)?;
                report.fg_points += 1;
            }
            Region::Background => match bg.as_deref_mut() {
                Some(grid) => {
                    let warped = warp_world_point(bounds, p)?;
                    grid.raise_cell(warped, raw0)?;
                    report.bg_points += 1;
                }
                None => {
                    report.skipped += 1;
                    continue;
                }
            },
            Region::Outside => {
                report.skipped += 1;
                continue;
            }
        }
        if cfg.also_mark_occupancy {
            occ.mark(p, cfg.sigma0, cfg.march_step);
        }
    }
    Ok(report)
}
