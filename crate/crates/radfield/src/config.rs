//! Run configuration: flat `section.key = value` text, `#` comments, UTF-8.
//!
//! Every key has a default documented on the corresponding field. Unknown
//! keys are rejected with the offending key named, so typos fail fast.

use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::PathBuf;

/// How the region outside the foreground box is modeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BgMode {
    /// Warped 4D density/color grids (the default).
    WarpedGrid,
    /// No background model at all; rays only see the foreground box.
    None,
}

/// Scene geometry and dataset location.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    /// `scene.dataset_dir` — dataset root directory. Default `data/scene`.
    pub dataset_dir: PathBuf,
    /// `scene.frustum_near` — near depth used when wrapping camera
    /// frustums. Default 0.
    pub frustum_near: f64,
    /// `scene.frustum_far` — far depth used when wrapping camera frustums.
    /// Default 50.
    pub frustum_far: f64,
    /// `scene.enlargement` — per-axis background enlargement factor,
    /// written `x,y,z`. Default `2,2,2`.
    pub enlargement: [f64; 3],
}

/// Density and color grid shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    /// `grid.fg_resolution` — vertices per axis of the foreground density
    /// grid. Default 128.
    pub fg_resolution: usize,
    /// `grid.bg_resolution` — spatial vertices per axis of the warped
    /// background density grid. Default 64.
    pub bg_resolution: usize,
    /// `grid.bg_radial_resolution` — vertices along the inverse-radius
    /// axis. Default 16.
    pub bg_radial_resolution: usize,
    /// `grid.hash_levels` — resolution levels per hash grid. Default 8.
    pub hash_levels: usize,
    /// `grid.hash_features` — features per level. Default 4.
    pub hash_features: usize,
    /// `grid.hash_table_log2` — log2 of the per-level table size.
    /// Default 19.
    pub hash_table_log2: u32,
    /// `grid.hash_base_resolution` — cells per axis at level 0. Default 16.
    pub hash_base_resolution: usize,
    /// `grid.hash_growth` — per-level resolution growth factor.
    /// Default 1.45.
    pub hash_growth: f64,
    /// `grid.init_density` — activated density the raw grids start at
    /// (near-transparent). Default 1e-3.
    pub init_density: f64,
}

/// Ray-march and occupancy maintenance knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    /// `sampler.occ_resolution` — occupancy voxels per axis over the
    /// background box. Default 128.
    pub occ_resolution: usize,
    /// `sampler.update_interval` — iterations between occupancy refreshes.
    /// Default 16.
    pub update_interval: u64,
    /// `sampler.decay` — occupancy EMA decay. Default 0.95.
    pub decay: f64,
    /// `sampler.occ_threshold` — opacity-per-step occupancy cutoff.
    /// Default 0.01.
    pub occ_threshold: f64,
    /// `sampler.steps_per_diagonal` — march step count across the
    /// foreground diagonal. Default 1024.
    pub steps_per_diagonal: usize,
    /// `sampler.bg_samples` — inverse-radius samples per ray behind the
    /// foreground. Default 64.
    pub bg_samples: usize,
}

/// Color-head shapes and rendering behavior.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderConfig {
    /// `render.hidden_width` — units per hidden MLP layer. Default 64.
    pub hidden_width: usize,
    /// `render.hidden_layers` — hidden layers per head. Default 2.
    pub hidden_layers: usize,
    /// `render.dir_bands` — sinusoidal direction-encoding bands.
    /// Default 4.
    pub dir_bands: usize,
    /// `render.bg_fill` — color for rays with no samples, written `r,g,b`.
    /// Default `0,0,0`.
    pub bg_fill: [f64; 3],
    /// `render.termination` — stop evaluation compositing once
    /// transmittance falls below this. Default 1e-4.
    pub termination: f64,
    /// `render.vd_bias_init` — initial output bias of the view-dependent
    /// head; softplus of it is the starting specular level. Default -3.
    pub vd_bias_init: f64,
}

/// Optimization schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// `train.lambda_reg` — weight of the view-dependent l1 regularizer.
    /// Default 0.01.
    pub lambda_reg: f64,
    /// `train.batch_rays` — rays per optimization step. Default 4096.
    pub batch_rays: usize,
    /// `train.iterations` — total optimization steps. Default 2000.
    pub iterations: u64,
    /// `train.lr_grids` — initial learning rate of the grid group.
    /// Default 1.0.
    pub lr_grids: f64,
    /// `train.lr_mlps` — initial learning rate of the MLP group.
    /// Default 0.01.
    pub lr_mlps: f64,
    /// `train.clamp_lo` — lower ray-weight clamp. Default 1.
    pub clamp_lo: f64,
    /// `train.clamp_hi` — upper ray-weight clamp. Default 10.
    pub clamp_hi: f64,
    /// `train.eps_weight` — guard added to the minimum batch error in the
    /// weight ratio. Default 1e-12.
    pub eps_weight: f64,
    /// `train.beta1` — first-moment decay. Default 0.9.
    pub beta1: f64,
    /// `train.beta2` — second-moment decay. Default 0.999.
    pub beta2: f64,
    /// `train.adam_guard` — denominator guard in the update. Default 1e-15.
    pub adam_guard: f64,
    /// `train.eval_every` — iterations between evaluations/log lines.
    /// Default 100.
    pub eval_every: u64,
    /// `train.seed` — master seed for every random stream. Default 0.
    pub seed: u64,
    /// `train.deterministic` — fixed-order gradient merges and placeholder
    /// timing columns; bit-reproducible runs. Default true.
    pub deterministic: bool,
    /// `train.warmup_iters` — linear learning-rate warmup of the grid
    /// group. Default 200.
    pub warmup_iters: u64,
    /// `train.lr_decay` — factor the learning rates decay to over the run.
    /// Default 0.1.
    pub lr_decay: f64,
    /// `train.target_psnr` — stop once the eval PSNR reaches this;
    /// 0 disables. Default 0.
    pub target_psnr: f64,
    /// `train.out_dir` — directory for checkpoints and logs.
    /// Default `runs/default`.
    pub out_dir: PathBuf,
}

/// Geometry-prior initialization.
#[derive(Debug, Clone, PartialEq)]
pub struct LidarConfig {
    /// `lidar.pointcloud` — point cloud path; empty means
    /// `<dataset_dir>/pointcloud.ply`. Default empty.
    pub pointcloud: Option<PathBuf>,
    /// `lidar.sigma0` — density written at prior locations; 0 derives it
    /// from the voxel size so one voxel is near-opaque. Default 0.
    pub sigma0: f64,
    /// `lidar.shell_points_per_face` — lattice side of each synthesized
    /// background face. Default 64.
    pub shell_points_per_face: usize,
    /// `lidar.mark_occupancy` — also mark occupancy voxels at prior
    /// locations. Default true.
    pub mark_occupancy: bool,
}

/// Benchmark harness knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    /// `bench.target_psnr` — PSNR each variant races to. Default 30.
    pub target_psnr: f64,
    /// `bench.max_iterations` — per-variant iteration cap. Default 4000.
    pub max_iterations: u64,
    /// `bench.wall_clock_cap_sec` — per-variant wall-clock cap; rows that
    /// miss the target are marked `inf`. Default 600.
    pub wall_clock_cap_sec: f64,
    /// `bench.out_dir` — directory for benchmark tables and curves.
    /// Default `runs/bench`.
    pub out_dir: PathBuf,
}

/// Full run configuration: one section per module plus the ablation flags
/// `no_lidar_init`, `no_color_decomp`, and `bg_mode` (`warped_grid` or
/// `none`).
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scene: SceneConfig,
    pub grid: GridConfig,
    pub sampler: SamplerConfig,
    pub render: RenderConfig,
    pub train: TrainConfig,
    pub lidar: LidarConfig,
    pub bench: BenchConfig,
    pub no_lidar_init: bool,
    pub no_color_decomp: bool,
    pub bg_mode: BgMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scene: SceneConfig {
                dataset_dir: PathBuf::from("data/scene"),
                frustum_near: 0.0,
                frustum_far: 50.0,
                enlargement: [2.0, 2.0, 2.0],
            },
            grid: GridConfig {
                fg_resolution: 128,
                bg_resolution: 64,
                bg_radial_resolution: 16,
                hash_levels: 8,
                hash_features: 4,
                hash_table_log2: 19,
                hash_base_resolution: 16,
                hash_growth: 1.45,
                init_density: 1e-3,
            },
            sampler: SamplerConfig {
                occ_resolution: 128,
                update_interval: 16,
                decay: 0.95,
                occ_threshold: 0.01,
                steps_per_diagonal: 1024,
                bg_samples: 64,
            },
            render: RenderConfig {
                hidden_width: 64,
                hidden_layers: 2,
                dir_bands: 4,
                bg_fill: [0.0, 0.0, 0.0],
                termination: 1e-4,
                vd_bias_init: -3.0,
            },
            train: TrainConfig {
                lambda_reg: 0.01,
                batch_rays: 4096,
                iterations: 2000,
                lr_grids: 1.0,
                lr_mlps: 0.01,
                clamp_lo: 1.0,
                clamp_hi: 10.0,
                eps_weight: 1e-12,
                beta1: 0.9,
                beta2: 0.999,
                adam_guard: 1e-15,
                eval_every: 100,
                seed: 0,
                deterministic: true,
                warmup_iters: 200,
                lr_decay: 0.1,
                target_psnr: 0.0,
                out_dir: PathBuf::from("runs/default"),
            },
            lidar: LidarConfig {
                pointcloud: None,
                sigma0: 0.0,
                shell_points_per_face: 64,
                mark_occupancy: true,
            },
            bench: BenchConfig {
                target_psnr: 30.0,
                max_iterations: 4000,
                wall_clock_cap_sec: 600.0,
                out_dir: PathBuf::from("runs/bench"),
            },
            no_lidar_init: false,
            no_color_decomp: false,
            bg_mode: BgMode::WarpedGrid,
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse().map_err(|_| Error::Config(format!("key `{key}`: `{v}` is not a number")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse().map_err(|_| Error::Config(format!("key `{key}`: `{v}` is not an integer")))
}

fn parse_u64(key: &str, v: &str) -> Result<u64> {
    v.parse().map_err(|_| Error::Config(format!("key `{key}`: `{v}` is not an integer")))
}

fn parse_u32(key: &str, v: &str) -> Result<u32> {
    v.parse().map_err(|_| Error::Config(format!("key `{key}`: `{v}` is not an integer")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(Error::Config(format!("key `{key}`: `{v}` is not a bool"))),
    }
}

fn parse_triple(key: &str, v: &str) -> Result<[f64; 3]> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!("key `{key}`: expected three comma-separated numbers")));
    }
    Ok([parse_f64(key, parts[0])?, parse_f64(key, parts[1])?, parse_f64(key, parts[2])?])
}

impl RunConfig {
    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value;
        match key {
            "scene.dataset_dir" => self.scene.dataset_dir = PathBuf::from(v),
            "scene.frustum_near" => self.scene.frustum_near = parse_f64(key, v)?,
            "scene.frustum_far" => self.scene.frustum_far = parse_f64(key, v)?,
            "scene.enlargement" => self.scene.enlargement = parse_triple(key, v)?,
            "grid.fg_resolution" => self.grid.fg_resolution = parse_usize(key, v)?,
            "grid.bg_resolution" => self.grid.bg_resolution = parse_usize(key, v)?,
            "grid.bg_radial_resolution" => self.grid.bg_radial_resolution = parse_usize(key, v)?,
            "grid.hash_levels" => self.grid.hash_levels = parse_usize(key, v)?,
            "grid.hash_features" => self.grid.hash_features = parse_usize(key, v)?,
            "grid.hash_table_log2" => self.grid.hash_table_log2 = parse_u32(key, v)?,
            "grid.hash_base_resolution" => self.grid.hash_base_resolution = parse_usize(key, v)?,
            "grid.hash_growth" => self.grid.hash_growth = parse_f64(key, v)?,
            "grid.init_density" => self.grid.init_density = parse_f64(key, v)?,
            "sampler.occ_resolution" => self.sampler.occ_resolution = parse_usize(key, v)?,
            "sampler.update_interval" => self.sampler.update_interval = parse_u64(key, v)?,
            "sampler.decay" => self.sampler.decay = parse_f64(key, v)?,
            "sampler.occ_threshold" => self.sampler.occ_threshold = parse_f64(key, v)?,
            "sampler.steps_per_diagonal" => {
                self.sampler.steps_per_diagonal = parse_usize(key, v)?
            }
            "sampler.bg_samples" => self.sampler.bg_samples = parse_usize(key, v)?,
            "render.hidden_width" => self.render.hidden_width = parse_usize(key, v)?,
            "render.hidden_layers" => self.render.hidden_layers = parse_usize(key, v)?,
            "render.dir_bands" => self.render.dir_bands = parse_usize(key, v)?,
            "render.bg_fill" => self.render.bg_fill = parse_triple(key, v)?,
            "render.termination" => self.render.termination = parse_f64(key, v)?,
            "render.vd_bias_init" => self.render.vd_bias_init = parse_f64(key, v)?,
            "train.lambda_reg" => self.train.lambda_reg = parse_f64(key, v)?,
            "train.batch_rays" => self.train.batch_rays = parse_usize(key, v)?,
            "train.iterations" => self.train.iterations = parse_u64(key, v)?,
            "train.lr_grids" => self.train.lr_grids = parse_f64(key, v)?,
            "train.lr_mlps" => self.train.lr_mlps = parse_f64(key, v)?,
            "train.clamp_lo" => self.train.clamp_lo = parse_f64(key, v)?,
            "train.clamp_hi" => self.train.clamp_hi = parse_f64(key, v)?,
            "train.eps_weight" => self.train.eps_weight = parse_f64(key, v)?,
            "train.beta1" => self.train.beta1 = parse_f64(key, v)?,
            "train.beta2" => self.train.beta2 = parse_f64(key, v)?,
            "train.adam_guard" => self.train.adam_guard = parse_f64(key, v)?,
            "train.eval_every" => self.train.eval_every = parse_u64(key, v)?,
            "train.seed" => self.train.seed = parse_u64(key, v)?,
            "train.deterministic" => self.train.deterministic = parse_bool(key, v)?,
            "train.warmup_iters" => self.train.warmup_iters = parse_u64(key, v)?,
            "train.lr_decay" => self.train.lr_decay = parse_f64(key, v)?,
            "train.target_psnr" => self.train.target_psnr = parse_f64(key, v)?,
            "train.out_dir" => self.train.out_dir = PathBuf::from(v),
            "lidar.pointcloud" => {
                self.lidar.pointcloud = if v.is_empty() { None } else { Some(PathBuf::from(v)) }
            }
            "lidar.sigma0" => self.lidar.sigma0 = parse_f64(key, v)?,
            "lidar.shell_points_per_face" => {
                self.lidar.shell_points_per_face = parse_usize(key, v)?
            }
            "lidar.mark_occupancy" => self.lidar.mark_occupancy = parse_bool(key, v)?,
            "bench.target_psnr" => self.bench.target_psnr = parse_f64(key, v)?,
            "bench.max_iterations" => self.bench.max_iterations = parse_u64(key, v)?,
            "bench.wall_clock_cap_sec" => self.bench.wall_clock_cap_sec = parse_f64(key, v)?,
            "bench.out_dir" => self.bench.out_dir = PathBuf::from(v),
            "no_lidar_init" => self.no_lidar_init = parse_bool(key, v)?,
            "no_color_decomp" => self.no_color_decomp = parse_bool(key, v)?,
            "bg_mode" => {
                self.bg_mode = match v {
                    "warped_grid" => BgMode::WarpedGrid,
                    "none" => BgMode::None,
                    _ => {
                        return Err(Error::Config(format!(
                            "key `bg_mode`: `{v}` is not one of warped_grid, none"
                        )))
                    }
                }
            }
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn parse_str(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::parse(idx + 1, format!("expected `key = value`, got `{line}`")));
            };
            cfg.set(key.trim(), value.trim()).map_err(|e| match e {
                Error::Config(msg) => Error::parse(idx + 1, msg),
                other => other,
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_str(&text)
    }

    fn validate(&self) -> Result<()> {
        if self.train.lambda_reg < 0.0 {
            return Err(Error::Config("train.lambda_reg must be nonnegative".into()));
        }
        if self.train.clamp_lo != 1.0 || self.train.clamp_hi < self.train.clamp_lo {
            return Err(Error::Config("weight clamp must satisfy clamp_lo = 1 <= clamp_hi".into()));
        }
        if self.train.batch_rays == 0 {
            return Err(Error::Config("train.batch_rays must be at least 1".into()));
        }
        if !(self.sampler.decay > 0.0 && self.sampler.decay < 1.0) {
            return Err(Error::Config("sampler.decay must lie in (0, 1)".into()));
        }
        if self.scene.enlargement.iter().any(|&e| e <= 1.0) {
            return Err(Error::Config("scene.enlargement must exceed 1 per axis".into()));
        }
        Ok(())
    }

    /// Serializes every key in section order; `parse_str` of the output
    /// reproduces the config.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scene.dataset_dir = {}", self.scene.dataset_dir.display());
        let _ = writeln!(s, "scene.frustum_near = {}", self.scene.frustum_near);
        let _ = writeln!(s, "scene.frustum_far = {}", self.scene.frustum_far);
        let e = self.scene.enlargement;
        let _ = writeln!(s, "scene.enlargement = {},{},{}", e[0], e[1], e[2]);
        let _ = writeln!(s, "grid.fg_resolution = {}", self.grid.fg_resolution);
        let _ = writeln!(s, "grid.bg_resolution = {}", self.grid.bg_resolution);
        let _ = writeln!(s, "grid.bg_radial_resolution = {}", self.grid.bg_radial_resolution);
        let _ = writeln!(s, "grid.hash_levels = {}", self.grid.hash_levels);
        let _ = writeln!(s, "grid.hash_features = {}", self.grid.hash_features);
        let _ = writeln!(s, "grid.hash_table_log2 = {}", self.grid.hash_table_log2);
        let _ = writeln!(s, "grid.hash_base_resolution = {}", self.grid.hash_base_resolution);
        let _ = writeln!(s, "grid.hash_growth = {}", self.grid.hash_growth);
        let _ = writeln!(s, "grid.init_density = {}", self.grid.init_density);
        let _ = writeln!(s, "sampler.occ_resolution = {}", self.sampler.occ_resolution);
        let _ = writeln!(s, "sampler.update_interval = {}", self.sampler.update_interval);
        let _ = writeln!(s, "sampler.decay = {}", self.sampler.decay);
        let _ = writeln!(s, "sampler.occ_threshold = {}", self.sampler.occ_threshold);
        let _ = writeln!(s, "sampler.steps_per_diagonal = {}", self.sampler.steps_per_diagonal);
        let _ = writeln!(s, "sampler.bg_samples = {}", self.sampler.bg_samples);
        let _ = writeln!(s, "render.hidden_width = {}", self.render.hidden_width);
        let _ = writeln!(s, "render.hidden_layers = {}", self.render.hidden_layers);
        let _ = writeln!(s, "render.dir_bands = {}", self.render.dir_bands);
        let f = self.render.bg_fill;
        let _ = writeln!(s, "render.bg_fill = {},{},{}", f[0], f[1], f[2]);
        let _ = writeln!(s, "render.termination = {}", self.render.termination);
        let _ = writeln!(s, "render.vd_bias_init = {}", self.render.vd_bias_init);
        let _ = writeln!(s, "train.lambda_reg = {}", self.train.lambda_reg);
        let _ = writeln!(s, "train.batch_rays = {}", self.train.batch_rays);
        let _ = writeln!(s, "train.iterations = {}", self.train.iterations);
        let _ = writeln!(s, "train.lr_grids = {}", self.train.lr_grids);
        let _ = writeln!(s, "train.lr_mlps = {}", self.train.lr_mlps);
        let _ = writeln!(s, "train.clamp_lo = {}", self.train.clamp_lo);
        let _ = writeln!(s, "train.clamp_hi = {}", self.train.clamp_hi);
        let _ = writeln!(s, "train.eps_weight = {}", self.train.eps_weight);
        let _ = writeln!(s, "train.beta1 = {}", self.train.beta1);
        let _ = writeln!(s, "train.beta2 = {}", self.train.beta2);
        let _ = writeln!(s, "train.adam_guard = {}", self.train.adam_guard);
        let _ = writeln!(s, "train.eval_every = {}", self.train.eval_every);
        let _ = writeln!(s, "train.seed = {}", self.train.seed);
        let _ = writeln!(s, "train.deterministic = {}", self.train.deterministic);
        let _ = writeln!(s, "train.warmup_iters = {}", self.train.warmup_iters);
        let _ = writeln!(s, "train.lr_decay = {}", self.train.lr_decay);
        let _ = writeln!(s, "train.target_psnr = {}", self.train.target_psnr);
        let _ = writeln!(s, "train.out_dir = {}", self.train.out_dir.display());
        let _ = writeln!(
            s,
            "lidar.pointcloud = {}",
            self.lidar.pointcloud.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
        );
        let _ = writeln!(s, "lidar.sigma0 = {}", self.lidar.sigma0);
        let _ = writeln!(s, "lidar.shell_points_per_face = {}", self.lidar.shell_points_per_face);
        let _ = writeln!(s, "lidar.mark_occupancy = {}", self.lidar.mark_occupancy);
        let _ = writeln!(s, "bench.target_psnr = {}", self.bench.target_psnr);
        let _ = writeln!(s, "bench.max_iterations = {}", self.bench.max_iterations);
        let _ = writeln!(s, "bench.wall_clock_cap_sec = {}", self.bench.wall_clock_cap_sec);
        let _ = writeln!(s, "bench.out_dir = {}", self.bench.out_dir.display());
        let _ = writeln!(s, "no_lidar_init = {}", self.no_lidar_init);
        let _ = writeln!(s, "no_color_decomp = {}", self.no_color_decomp);
        let _ = writeln!(
            s,
            "bg_mode = {}",
            match self.bg_mode {
                BgMode::WarpedGrid => "warped_grid",
                BgMode::None => "none",
            }
        );
        s
    }
}
