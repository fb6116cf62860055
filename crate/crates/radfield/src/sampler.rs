//! Occupancy-grid-accelerated ray marching.
//!
//! Foreground samples step uniformly through the foreground box and keep
//! only steps whose occupancy voxel is set. Background samples are placed
//! uniformly in inverse l-infinity radius between the foreground exit and
//! the background exit, then filtered the same way. One occupancy grid in
//! world space over the background box serves both regions.

use crate::error::Result;
use crate::geometry::{ray_aabb_intersect, Aabb, Ray, SceneBounds};
use crate::parallel;
use crate::rng;
use crate::Vec3;

/// Ongoing occupancy maintenance parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OccupancyParams {
    /// Re-evaluate the grid when `iteration % update_interval == 0`.
    pub update_interval: u64,
    /// Exponential moving-average decay in `(0, 1)`.
    pub decay: f64,
    /// A voxel is occupied while `ema * step > occ_threshold` (opacity per
    /// march step).
    pub occ_threshold: f64,
}

/// Binary acceleration structure over the background box with a density
/// moving average per voxel.
#[derive(Debug, Clone)]
pub struct OccupancyGrid {
    pub bbox: Aabb,
    /// Voxel counts per axis.
    pub resolution: [usize; 3],
    pub bits: Vec<bool>,
    pub ema: Vec<f64>,
    pub params: OccupancyParams,
}

impl OccupancyGrid {
    /// All-clear grid; geometry priors are expected to mark it before
    /// training.
    pub fn cleared(bbox: Aabb, resolution: [usize; 3], params: OccupancyParams) -> Self {
        let len = resolution.iter().product();
        Self { bbox, resolution, bits: vec![false; len], ema: vec![0.0; len], params }
    }

    /// Fully occupied grid for runs without geometry priors. The seed EMA
    /// survives roughly `log(1e-3) / log(decay)` maintenance passes, giving
    /// the density field time to grow before empty space is pruned.
    pub fn fully_occupied(
        bbox: Aabb,
        resolution: [usize; 3],
        params: OccupancyParams,
        step: f64,
    ) -> Self {
        let len = resolution.iter().product();
        let seed_ema = params.occ_threshold / step * 1e3;
        Self { bbox, resolution, bits: vec![true; len], ema: vec![seed_ema; len], params }
    }

    pub fn voxel_size(&self) -> Vec3 {
        let e = self.bbox.extent();
        Vec3::new(
            e.x / self.resolution[0] as f64,
            e.y / self.resolution[1] as f64,
            e.z / self.resolution[2] as f64,
        )
    }

    /// Voxel containing `x`, or `None` outside the grid box.
    #[inline]
    pub fn voxel_index(&self, x: Vec3) -> Option<usize> {
        if !self.bbox.contains(x) {
            return None;
        }
        let e = self.bbox.extent();
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let u = (x[a] - self.bbox.min[a]) / e[a] * self.resolution[a] as f64;
            idx[a] = (u as usize).min(self.resolution[a] - 1);
        }
        Some(idx[0] + self.resolution[0] * (idx[1] + self.resolution[1] * idx[2]))
    }

    #[inline]
    pub fn is_occupied(&self, x: Vec3) -> bool {
        self.voxel_index(x).map(|i| self.bits[i]).unwrap_or(false)
    }

    pub fn voxel_center(&self, i: usize) -> Vec3 {
        let [nx, ny, _] = self.resolution;
        let (ix, iy, iz) = (i % nx, (i / nx) % ny, i / (nx * ny));
        let s = self.voxel_size();
        self.bbox.min
            + Vec3::new((ix as f64 + 0.5) * s.x, (iy as f64 + 0.5) * s.y, (iz as f64 + 0.5) * s.z)
    }

    /// Marks the voxel containing `x` occupied and floors its EMA at
    /// `sigma`, keeping the bit rule consistent with `update_occupancy`.
    pub fn mark(&mut self, x: Vec3, sigma: f64, step: f64) {
        if let Some(i) = self.voxel_index(x) {
            self.ema[i] = self.ema[i].max(sigma);
            self.bits[i] = self.ema[i] * step > self.params.occ_threshold;
        }
    }

    pub fn occupied_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Refreshes the occupancy EMA from the current density field. Acts only
/// when `iteration % update_interval == 0`. Each voxel is probed at its
/// center plus one seeded jitter point; `ema = max(decay * ema, sigma)`.
pub fn update_occupancy<F>(occ: &mut OccupancyGrid, step: f64, iteration: u64, seed: u64, density: F)
where
    F: Fn(Vec3) -> f64 + Sync,
{
    if iteration % occ.params.update_interval != 0 {
        return;
    }
    let bbox = occ.bbox;
    let resolution = occ.resolution;
    let voxel = {
        let e = bbox.extent();
        Vec3::new(
            e.x / resolution[0] as f64,
            e.y / resolution[1] as f64,
            e.z / resolution[2] as f64,
        )
    };
    let decay = occ.params.decay;
    let threshold = occ.params.occ_threshold;
    let (nx, ny) = (resolution[0], resolution[1]);
    parallel::for_each_slice_mut(&mut occ.ema, 4096, |offset, slice| {
        for (k, ema) in slice.iter_mut().enumerate() {
            let i = offset + k;
            let (ix, iy, iz) = (i % nx, (i / nx) % ny, i / (nx * ny));
            let lo = bbox.min
                + Vec3::new(ix as f64 * voxel.x, iy as f64 * voxel.y, iz as f64 * voxel.z);
            let center = lo + voxel * 0.5;
            let jittered = lo
                + Vec3::new(
                    rng::unit_f64(seed, rng::domain::OCC_JITTER, iteration, 3 * i as u64) * voxel.x,
                    rng::unit_f64(seed, rng::domain::OCC_JITTER, iteration, 3 * i as u64 + 1)
                        * voxel.y,
                    rng::unit_f64(seed, rng::domain::OCC_JITTER, iteration, 3 * i as u64 + 2)
                        * voxel.z,
                );
            let sampled = density(center).max(density(jittered));
            *ema = (decay * *ema).max(sampled);
        }
    });
    for (bit, &ema) in occ.bits.iter_mut().zip(occ.ema.iter()) {
        *bit = ema * step > threshold;
    }
}

/// Which marching phase produced a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Segment {
    Foreground,
    Background,
}

/// One ray-march sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplePoint {
    pub position: Vec3,
    /// Ray parameter (world units; directions are unit-norm).
    pub t: f64,
    /// Length of the interval this sample represents.
    pub delta: f64,
    pub segment: Segment,
}

/// Flat sample storage for a batch of rays (CSR layout).
#[derive(Debug, Clone, Default)]
pub struct SampleBatch {
    /// `offsets[i]..offsets[i + 1]` indexes ray `i`'s samples.
    pub offsets: Vec<u32>,
    pub samples: Vec<SamplePoint>,
}

impl SampleBatch {
    pub fn new() -> Self {
        Self { offsets: vec![0], samples: Vec::new() }
    }

    pub fn push_ray(&mut self, samples: impl IntoIterator<Item = SamplePoint>) {
        self.samples.extend(samples);
        self.offsets.push(self.samples.len() as u32);
    }

    pub fn ray_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn sample_count(&self) -> usize {
        self.samples.len()
    }

    pub fn ray_samples(&self, ray: usize) -> &[SamplePoint] {
        &self.samples[self.offsets[ray] as usize..self.offsets[ray + 1] as usize]
    }

    /// The #Sample/Ray diagnostic.
    pub fn samples_per_ray(&self) -> f64 {
        if self.ray_count() == 0 {
            0.0
        } else {
            self.sample_count() as f64 / self.ray_count() as f64
        }
    }
}

/// Uniform march through the foreground box keeping occupied steps.
/// `jitter` shifts the whole ladder by a fraction of one step (training);
/// pass `None` for deterministic evaluation sampling.
pub fn march_foreground(
    ray: &Ray,
    bounds: &SceneBounds,
    occ: &OccupancyGrid,
    step: f64,
    jitter: Option<f64>,
) -> Vec<SamplePoint> {
    debug_assert!(step > 0.0);
    let Some((t_enter, t_exit)) = ray_aabb_intersect(ray, &bounds.fg) else {
        return Vec::new();
    };
    if t_exit <= t_enter {
        return Vec::new();
    }
    let offset = jitter.map(|j| j * step).unwrap_or(0.0);
    let mut out = Vec::new();
    let mut t = t_enter + offset + 0.5 * step;
    while t < t_exit {
        let position = bounds.bg.clamp(ray.at(t));
        if occ.is_occupied(position) {
            out.push(SamplePoint { position, t, delta: step, segment: Segment::Foreground });
        }
        t += step;
    }
    out
}

/// Ray parameter where the l-infinity radius (in foreground-normalized
/// coordinates) reaches `radius`: the exit of the proportionally scaled
/// foreground box.
fn t_of_radius(ray: &Ray, bounds: &SceneBounds, radius: f64) -> Option<f64> {
    let shell = bounds.fg.scaled(Vec3::new(radius, radius, radius));
    ray_aabb_intersect(ray, &shell).map(|(_, exit)| exit)
}

/// Places `n_bg` samples uniformly in inverse radius over the background
/// shell between the foreground exit and the background exit, drops the
/// ones in unoccupied voxels, and assigns forward parameter gaps as deltas.
pub fn march_background(
    ray: &Ray,
    bounds: &SceneBounds,
    occ: &OccupancyGrid,
    n_bg: usize,
) -> Vec<SamplePoint> {
    if n_bg == 0 {
        return Vec::new();
    }
    let Some((_, t_fg_exit)) = ray_aabb_intersect(ray, &bounds.fg) else {
        return Vec::new();
    };
    let Some((_, t_bg_exit)) = ray_aabb_intersect(ray, &bounds.bg) else {
        return Vec::new();
    };
    if t_bg_exit <= t_fg_exit {
        return Vec::new();
    }
    let radius_at = |t: f64| {
        let n = bounds.fg_normalized(ray.at(t));
        n.x.abs().max(n.y.abs()).max(n.z.abs())
    };
    let r_fg = radius_at(t_fg_exit);
    let r_max = radius_at(t_bg_exit);
    if r_max <= r_fg {
        return Vec::new();
    }
    let (inv_lo, inv_hi) = (1.0 / r_max, 1.0 / r_fg);
    let h = (inv_hi - inv_lo) / n_bg as f64;

    // Walk k downward so inverse radius decreases and t increases.
    let mut ts = Vec::with_capacity(n_bg);
    for k in (0..n_bg).rev() {
        let inv_r = inv_lo + (k + 1) as f64 * h;
        if let Some(t) = t_of_radius(ray, bounds, 1.0 / inv_r) {
            if t <= t_bg_exit + 1e-9 {
                ts.push(t.min(t_bg_exit));
            }
        }
    }
    let mut out = Vec::with_capacity(ts.len());
    let eps = 1e-12 * t_bg_exit.max(1.0);
    let mut prev = f64::NEG_INFINITY;
    for (i, &t) in ts.iter().enumerate() {
        if t <= prev + eps {
            continue;
        }
        let next = if i + 1 < ts.len() { ts[i + 1] } else { t_bg_exit };
        let delta = next - t;
        prev = t;
        if delta <= 0.0 {
            continue;
        }
        let position = bounds.bg.clamp(ray.at(t));
        if occ.is_occupied(position) {
            out.push(SamplePoint { position, t, delta, segment: Segment::Background });
        }
    }
    out
}

/// Foreground then background samples for one ray.
pub fn march_ray(
    ray: &Ray,
    bounds: &SceneBounds,
    occ: &OccupancyGrid,
    step: f64,
    n_bg: usize,
    jitter: Option<f64>,
) -> Result<Vec<SamplePoint>> {
    let mut samples = march_foreground(ray, bounds, occ, step, jitter);
    samples.extend(march_background(ray, bounds, occ, n_bg));
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SceneBounds;
    use approx::assert_relative_eq;

    fn test_bounds() -> SceneBounds {
        let fg = Aabb::new(Vec3::new(-1.0, -1.0, -1.0), Vec3::new(1.0, 1.0, 1.0)).unwrap();
        SceneBounds::new(fg, Vec3::new(2.0, 2.0, 2.0)).unwrap()
    }

    fn test_params() -> OccupancyParams {
        OccupancyParams { update_interval: 1, decay: 0.95, occ_threshold: 0.01 }
    }

    fn x_ray(origin: Vec3) -> Ray {
        Ray::new(origin, Vec3::new(1.0, 0.0, 0.0), 0.0, f64::MAX).unwrap()
    }

    #[test]
    fn clear_grid_yields_no_samples() {
        let bounds = test_bounds();
        let occ = OccupancyGrid::cleared(bounds.bg, [8, 8, 8], test_params());
        let ray = x_ray(Vec3::new(-3.0, 0.0, 0.0));
        assert!(march_foreground(&ray, &bounds, &occ, 0.05, None).is_empty());
        assert!(march_background(&ray, &bounds, &occ, 16).is_empty());
    }

    #[test]
    fn single_occupied_voxel_bounds_sample_count() {
        let bounds = test_bounds();
        // Background box [-2, 2]^3 at resolution 4: voxel edge 1.
        let mut occ = OccupancyGrid::cleared(bounds.bg, [4, 4, 4], test_params());
        let target = Vec3::new(0.5, 0.5, 0.5);
        let i = occ.voxel_index(target).unwrap();
        occ.bits[i] = true;
        let step = 0.1;
        let ray = x_ray(Vec3::new(-5.0, 0.5, 0.5));
        let samples = march_foreground(&ray, &bounds, &occ, step, None);
        // Voxel spans x in [0, 1]: expect ~1/step samples, all inside it.
        let expected = (1.0 / step) as isize;
        assert!((samples.len() as isize - expected).abs() <= 1, "got {}", samples.len());
        for s in &samples {
            assert!(occ.voxel_index(s.position).unwrap() == i);
            assert_eq!(s.delta, step);
            assert_eq!(s.segment, Segment::Foreground);
        }
    }

    #[test]
    fn fully_occupied_march_covers_the_chord() {
        let bounds = test_bounds();
        let occ = OccupancyGrid::fully_occupied(bounds.bg, [4, 4, 4], test_params(), 0.05);
        let ray = x_ray(Vec3::new(-5.0, 0.2, -0.3));
        let step = 0.05;
        let samples = march_foreground(&ray, &bounds, &occ, step, None);
        let expected = (2.0 / step) as isize; // chord length 2 through fg
        assert!((samples.len() as isize - expected).abs() <= 1);
        let mut prev = f64::NEG_INFINITY;
        for s in &samples {
            assert!(s.t > prev);
            prev = s.t;
        }
    }

    #[test]
    fn background_samples_follow_inverse_radius_placement() {
        let bounds = test_bounds();
        let occ = OccupancyGrid::fully_occupied(bounds.bg, [8, 8, 8], test_params(), 0.05);
        // Radial ray from the center: r_fg = 1 at t = 1, r_max = 2 at t = 2.
        let ray = x_ray(Vec3::zeros());
        let samples = march_background(&ray, &bounds, &occ, 2);
        assert_eq!(samples.len(), 2);
        // Inverse radii {1.0, 0.75} => radii {1, 4/3} => t = {1, 4/3}.
        assert_relative_eq!(samples[0].t, 1.0, epsilon = 1e-9);
        assert_relative_eq!(samples[1].t, 4.0 / 3.0, epsilon = 1e-9);
        assert_relative_eq!(samples[0].delta, 1.0 / 3.0, epsilon = 1e-9);
        assert_relative_eq!(samples[1].delta, 2.0 - 4.0 / 3.0, epsilon = 1e-9);
        for s in &samples {
            assert_eq!(s.segment, Segment::Background);
        }
    }

    #[test]
    fn zero_background_budget_is_empty() {
        let bounds = test_bounds();
        let occ = OccupancyGrid::fully_occupied(bounds.bg, [4, 4, 4], test_params(), 0.05);
        assert!(march_background(&x_ray(Vec3::zeros()), &bounds, &occ, 0).is_empty());
    }

    #[test]
    fn evaluation_sampling_is_deterministic() {
        let bounds = test_bounds();
        let occ = OccupancyGrid::fully_occupied(bounds.bg, [8, 8, 8], test_params(), 0.05);
        let ray = x_ray(Vec3::new(-4.0, 0.1, 0.4));
        let a = march_ray(&ray, &bounds, &occ, 0.05, 8, None).unwrap();
        let b = march_ray(&ray, &bounds, &occ, 0.05, 8, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn samples_sit_in_occupied_voxels_and_increase_in_t() {
        let bounds = test_bounds();
        let mut occ = OccupancyGrid::cleared(bounds.bg, [8, 8, 8], test_params());
        // Occupy a scattering of voxels.
        for i in (0..512).step_by(3) {
            occ.bits[i] = true;
        }
        let ray = Ray::new(
            Vec3::new(-3.0, -1.5, 0.2),
            Vec3::new(0.9, 0.4, -0.1).normalize(),
            0.0,
            f64::MAX,
        )
        .unwrap();
        let samples = march_ray(&ray, &bounds, &occ, 0.03, 16, Some(0.37)).unwrap();
        let mut prev_t = f64::NEG_INFINITY;
        let mut seen_bg = false;
        for s in &samples {
            assert!(occ.is_occupied(s.position));
            assert!(s.t > prev_t, "t must strictly increase");
            assert!(s.delta > 0.0);
            prev_t = s.t;
            match s.segment {
                Segment::Foreground => assert!(!seen_bg, "fg samples precede bg samples"),
                Segment::Background => seen_bg = true,
            }
        }
    }

    #[test]
    fn update_clears_zero_density_after_geometric_decay() {
        let bounds = test_bounds();
        let params = OccupancyParams { update_interval: 1, decay: 0.5, occ_threshold: 0.01 };
        let step = 1.0;
        let mut occ = OccupancyGrid::cleared(bounds.bg, [2, 2, 2], params);
        occ.ema.fill(1.0);
        occ.bits.fill(true);
        // bit clears when 0.5^k <= 0.01: k = ceil(ln 0.01 / ln 0.5) = 7.
        let mut updates = 0;
        for iter in 1..=20u64 {
            if occ.bits[0] {
                update_occupancy(&mut occ, step, iter, 0, |_| 0.0);
                updates += 1;
            } else {
                break;
            }
        }
        assert_eq!(updates, 7);
        assert!(occ.bits.iter().all(|&b| !b));
    }

    #[test]
    fn update_sets_bits_above_threshold() {
        let bounds = test_bounds();
        let mut occ = OccupancyGrid::cleared(bounds.bg, [4, 4, 4], test_params());
        update_occupancy(&mut occ, 0.05, 0, 0, |x| if x.x > 0.0 { 10.0 } else { 0.0 });
        assert!(occ.occupied_count() > 0);
        assert!(occ.is_occupied(Vec3::new(1.5, 0.0, 0.0)));
        assert!(!occ.is_occupied(Vec3::new(-1.5, 0.0, 0.0)));
        // Off-schedule iterations leave the grid untouched.
        let before = occ.bits.clone();
        update_occupancy(&mut occ, 0.05, 3, 0, |_| 0.0);
        assert_eq!(before, occ.bits);
    }
}
