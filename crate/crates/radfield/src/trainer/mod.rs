//! The training loop: batch sampling, weighted losses, backprop, the
//! optimizer schedule, occupancy maintenance, evaluation, and logging.

mod adam;
mod gradcheck;
mod loss;

pub use adam::{AdamHyper, AdamState};
pub use gradcheck::{finite_diff_check, GradCheckReport};
pub use loss::{
    compute_ray_weights, loss_report, photometric_loss, regularization_from_sum,
    regularization_loss, total_loss, LossReport,
};

use crate::config::RunConfig;
use crate::dataset::SceneDataset;
use crate::error::{Error, Result};
use crate::fields::{GradientBuffer, ParamGroup, PARAM_GROUPS};
use crate::geometry::generate_ray;
use crate::io::save_checkpoint;
use crate::lidar::{
    default_sigma0, initialize_from_points, synthesize_shell_points, InitReport, LidarInitConfig,
    PointCloud, ShellConfig,
};
use crate::metrics::{psnr, ssim};
use crate::parallel::RAY_CHUNK;
use crate::renderer::{self, render_camera, render_rays, RenderCtx};
use crate::rng;
use crate::sampler::{update_occupancy, OccupancyGrid, OccupancyParams};
use crate::scene::SceneModel;
use rand::Rng;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

/// Test-split evaluation result.
#[derive(Debug, Clone)]
pub struct EvalStats {
    pub psnr: f64,
    pub ssim: f64,
    pub samples_per_ray: f64,
    pub rays: usize,
    /// Per test image `(psnr, ssim)`.
    pub per_image: Vec<(f64, f64)>,
}

/// One point of the PSNR-over-time curve.
#[derive(Debug, Clone, Copy)]
pub struct CurvePoint {
    pub iteration: u64,
    pub elapsed_sec: f64,
    pub psnr: f64,
    pub samples_per_ray: f64,
    pub rays_per_sec: f64,
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub iterations_run: u64,
    pub reached_target_at: Option<u64>,
    pub final_psnr: f64,
    pub final_ssim: f64,
    pub samples_per_ray: f64,
    pub curve: Vec<CurvePoint>,
}

/// Caps and goals for one training run.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub max_iterations: Option<u64>,
    pub wall_cap_sec: Option<f64>,
    pub target_psnr: Option<f64>,
}

pub struct Trainer<'d> {
    pub model: SceneModel,
    pub occ: OccupancyGrid,
    pub cfg: RunConfig,
    pub init_report: Option<InitReport>,
    dataset: &'d SceneDataset,
    train_idx: Vec<usize>,
    adam: Vec<AdamState>,
    buffers: Vec<GradientBuffer>,
    master: GradientBuffer,
    #[cfg(feature = "parallel")]
    shared: Option<crate::fields::SharedGradientBuffer>,
}

impl<'d> Trainer<'d> {
    /// Builds the model and occupancy structure and applies the geometry
    /// prior (unless ablated away).
    pub fn new(cfg: RunConfig, dataset: &'d SceneDataset) -> Result<Self> {
        let model = SceneModel::build(&cfg, &dataset.cameras)?;
        let occ_params = OccupancyParams {
            update_interval: cfg.sampler.update_interval,
            decay: cfg.sampler.decay,
            occ_threshold: cfg.sampler.occ_threshold,
        };
        let n = cfg.sampler.occ_resolution;
        let step = model.render.step;
        let mut occ = if cfg.no_lidar_init {
            OccupancyGrid::fully_occupied(model.bounds.bg, [n, n, n], occ_params, step)
        } else {
            OccupancyGrid::cleared(model.bounds.bg, [n, n, n], occ_params)
        };

        let mut trainer_model = model;
        let init_report = if cfg.no_lidar_init {
            None
        } else {
            let path = cfg
                .lidar
                .pointcloud
                .clone()
                .unwrap_or_else(|| dataset.pointcloud_path.clone());
            let mut cloud = PointCloud::load_ply(&path)?;
            if trainer_model.bg.is_some() && cfg.lidar.shell_points_per_face > 0 {
                let shell = synthesize_shell_points(
                    &trainer_model.bounds,
                    &ShellConfig {
                        points_per_face: cfg.lidar.shell_points_per_face,
                        inset_cells: cfg.grid.bg_resolution,
                    },
                );
                cloud.points.extend(shell.points);
            }
            let sigma0 = if cfg.lidar.sigma0 > 0.0 {
                cfg.lidar.sigma0
            } else {
                default_sigma0(&trainer_model.fg_density)
            };
            let init_cfg = LidarInitConfig {
                sigma0,
                also_mark_occupancy: cfg.lidar.mark_occupancy,
                march_step: step,
            };
            let bounds = trainer_model.bounds.clone();
            let bg_density = trainer_model.bg.as_mut().map(|b| &mut b.density);
            let report = initialize_from_points(
                &cloud,
                &bounds,
                &mut trainer_model.fg_density,
                bg_density,
                &mut occ,
                &init_cfg,
            )?;
            Some(report)
        };

        let sizes = trainer_model.lane_sizes();
        let dense = trainer_model.lane_dense();
        let chunk_count = cfg.train.batch_rays.div_ceil(RAY_CHUNK);
        let buffers = (0..chunk_count).map(|_| GradientBuffer::new(sizes, dense)).collect();
        let master = GradientBuffer::new(sizes, dense);
        #[cfg(feature = "parallel")]
        let shared = if cfg.train.deterministic {
            None
        } else {
            Some(crate::fields::SharedGradientBuffer::new(sizes))
        };
        let adam = PARAM_GROUPS.iter().map(|g| AdamState::new(sizes[g.index()])).collect();
        let train_idx = dataset.train_indices();
        if train_idx.is_empty() {
            return Err(Error::domain("dataset has no training views"));
        }
        Ok(Self {
            model: trainer_model,
            occ,
            cfg,
            init_report,
            dataset,
            train_idx,
            adam,
            buffers,
            master,
            #[cfg(feature = "parallel")]
            shared,
        })
    }

    fn hyper(&self) -> AdamHyper {
        AdamHyper {
            beta1: self.cfg.train.beta1,
            beta2: self.cfg.train.beta2,
            guard: self.cfg.train.adam_guard,
        }
    }

    /// Group learning rate at an iteration: exponential decay to
    /// `lr_decay x` over the run, with a linear warmup on the grid group
    /// standing in for rectified early-step variance control.
    fn lr_at(&self, group: ParamGroup, iteration: u64) -> f64 {
        let t = &self.cfg.train;
        let total = t.iterations.max(1) as f64;
        let decay = t.lr_decay.powf(iteration as f64 / total);
        if group.is_grid() {
            let warm = if t.warmup_iters == 0 {
                1.0
            } else {
                (iteration as f64 / t.warmup_iters as f64).min(1.0)
            };
            t.lr_grids * warm * decay
        } else {
            t.lr_mlps * decay
        }
    }

    /// Draws the iteration's pixel batch (uniform over training images).
    fn sample_batch(&self, iteration: u64) -> Result<(Vec<crate::geometry::Ray>, Vec<[f64; 3]>)> {
        let t = &self.cfg.train;
        let mut rng = rng::stream(t.seed, rng::domain::PIXEL_SAMPLES, iteration, 0);
        let mut rays = Vec::with_capacity(t.batch_rays);
        let mut targets = Vec::with_capacity(t.batch_rays);
        for _ in 0..t.batch_rays {
            let which = self.train_idx[rng.gen_range(0..self.train_idx.len())];
            let cam = &self.dataset.cameras[which];
            let px = rng.gen_range(0..cam.width);
            let py = rng.gen_range(0..cam.height);
            rays.push(generate_ray(cam, px as f64, py as f64)?);
            targets.push(self.dataset.images[which].pixel(px as usize, py as usize));
        }
        Ok((rays, targets))
    }

    /// One optimization step: render, weight, differentiate, update, and
    /// refresh the occupancy grid.
    pub fn train_step(&mut self, iteration: u64) -> Result<LossReport> {
        let tc = self.cfg.train.clone();
        let decomposed = !self.cfg.no_color_decomp;
        let (rays, targets) = self.sample_batch(iteration)?;

        let ctx = RenderCtx::train(tc.seed, iteration);
        let batch = render_rays(&self.model, &self.occ, &rays, &ctx)?;
        let tapes = batch.tapes.expect("train mode keeps tapes");

        let sq_errors: Vec<f64> = batch
            .outputs
            .iter()
            .zip(&targets)
            .map(|(o, t)| (0..3).map(|ch| (o.rgb[ch] - t[ch]).powi(2)).sum())
            .collect();
        let weights = compute_ray_weights(&sq_errors, tc.eps_weight, tc.clamp_lo, tc.clamp_hi);
        let preds: Vec<[f64; 3]> = batch.outputs.iter().map(|o| o.rgb).collect();
        let (l_p, upstream) = photometric_loss(&preds, &targets, &weights)?;

        let mut l1_sum = 0.0;
        let mut m = 0usize;
        for tape in &tapes {
            m += tape.colors.len();
            if decomposed {
                for c in &tape.colors {
                    l1_sum += c.c_vd[0].abs() + c.c_vd[1].abs() + c.c_vd[2].abs();
                }
            }
        }
        let lambda = if decomposed { tc.lambda_reg } else { 0.0 };
        let l_r = if decomposed { regularization_from_sum(l1_sum, m) } else { 0.0 };
        let report = loss_report(l_p, l_r, lambda, &weights);
        let reg_grad = if decomposed && m > 0 { lambda / m as f64 } else { 0.0 };

        self.master.clear();
        #[cfg(feature = "parallel")]
        let fast = self.shared.as_ref();
        #[cfg(not(feature = "parallel"))]
        let fast: Option<&()> = None;
        match fast {
            #[cfg(feature = "parallel")]
            Some(shared) => {
                renderer::backward_rays_shared(
                    &self.model,
                    &rays,
                    &tapes,
                    &upstream,
                    reg_grad,
                    shared,
                )?;
                shared.drain_into(&mut self.master);
            }
            _ => {
                renderer::backward_rays(
                    &self.model,
                    &rays,
                    &tapes,
                    &upstream,
                    reg_grad,
                    &mut self.buffers,
                )?;
                let used = rays.len().div_ceil(RAY_CHUNK);
                for buf in &self.buffers[..used] {
                    self.master.merge_from(buf);
                }
            }
        }

        let hyper = self.hyper();
        for g in PARAM_GROUPS {
            let lr = self.lr_at(g, iteration);
            let lane = &self.master;
            let lane = lane.lane(g);
            if lane.is_empty() {
                continue;
            }
            let state = &mut self.adam[g.index()];
            let params = match g {
                ParamGroup::FgDensity => self.model.fg_density.raw.as_mut_slice(),
                ParamGroup::BgDensity => self
                    .model
                    .bg
                    .as_mut()
                    .map(|b| b.density.raw.as_mut_slice())
                    .unwrap_or(&mut []),
                ParamGroup::FgColor => self.model.fg_color.data.as_mut_slice(),
                ParamGroup::BgColor => {
                    self.model.bg.as_mut().map(|b| b.color.data.as_mut_slice()).unwrap_or(&mut [])
                }
                ParamGroup::MlpVi => match &mut self.model.color {
                    crate::renderer::ColorModel::Decomposed { vi, .. } => vi.data.as_mut_slice(),
                    crate::renderer::ColorModel::Entangled { .. } => &mut [],
                },
                ParamGroup::MlpVd => match &mut self.model.color {
                    crate::renderer::ColorModel::Decomposed { vd, .. } => vd.data.as_mut_slice(),
                    crate::renderer::ColorModel::Entangled { head, .. } => head.data.as_mut_slice(),
                },
            };
            if params.is_empty() {
                continue;
            }
            if lane.is_dense() {
                state.update_dense(params, lane.grads(), lr, &hyper);
            } else {
                state.update_sparse(params, lane, lr, &hyper);
            }
        }

        let model = &self.model;
        let step = model.render.step;
        update_occupancy(&mut self.occ, step, iteration, tc.seed, |x| model.density_at(x));
        Ok(report)
    }

    /// Renders every test view and reports image metrics.
    pub fn evaluate(&self) -> Result<EvalStats> {
        let test = self.dataset.test_indices();
        if test.is_empty() {
            return Err(Error::domain("dataset has no test split"));
        }
        let mut per_image = Vec::with_capacity(test.len());
        let mut spr_weighted = 0.0;
        let mut rays = 0usize;
        for &i in &test {
            let cam = &self.dataset.cameras[i];
            let view = render_camera(&self.model, &self.occ, cam)?;
            let p = psnr(&view.image, &self.dataset.images[i])?;
            let s = ssim(&view.image, &self.dataset.images[i])?;
            per_image.push((p, s));
            let n = (cam.width * cam.height) as usize;
            spr_weighted += view.samples_per_ray * n as f64;
            rays += n;
        }
        let mean_psnr = per_image.iter().map(|x| x.0).sum::<f64>() / per_image.len() as f64;
        let mean_ssim = per_image.iter().map(|x| x.1).sum::<f64>() / per_image.len() as f64;
        Ok(EvalStats {
            psnr: mean_psnr,
            ssim: mean_ssim,
            samples_per_ray: spr_weighted / rays as f64,
            rays,
            per_image,
        })
    }

    /// Full training run with logging, periodic checkpoints, and optional
    /// early stopping at a PSNR target.
    pub fn run(&mut self, out_dir: Option<&Path>, opts: &RunOptions) -> Result<TrainSummary> {
        let tc = self.cfg.train.clone();
        let deterministic = tc.deterministic;
        let total = opts.max_iterations.unwrap_or(tc.iterations).min(tc.iterations).max(1);
        let target = opts
            .target_psnr
            .or(if tc.target_psnr > 0.0 { Some(tc.target_psnr) } else { None });

        let mut log: Option<std::fs::File> = None;
        let mut diag: Option<std::fs::File> = None;
        if let Some(dir) = out_dir {
            std::fs::create_dir_all(dir)?;
            let mut f = std::fs::File::create(dir.join("train_log.csv"))?;
            writeln!(f, "iter,L_p,L_r,total,weight_mean,psnr_eval,samples_per_ray,elapsed_sec")?;
            log = Some(f);
            let mut d = std::fs::File::create(dir.join("diagnostics.csv"))?;
            writeln!(d, "iter,psnr,samples_per_ray,rays_per_sec")?;
            diag = Some(d);
        }

        let started = Instant::now();
        let mut curve = Vec::new();
        let mut reached = None;
        let mut iterations_run = 0;
        let mut last_eval: Option<EvalStats> = None;
        for iteration in 1..=total {
            let report = self.train_step(iteration)?;
            iterations_run = iteration;
            let due = iteration % tc.eval_every == 0 || iteration == total;
            if !due {
                continue;
            }
            let eval_started = Instant::now();
            let stats = self.evaluate()?;
            let eval_elapsed = eval_started.elapsed().as_secs_f64();
            let elapsed = started.elapsed().as_secs_f64();
            let (logged_elapsed, rays_per_sec) = if deterministic {
                (0.0, 0.0)
            } else {
                (elapsed, stats.rays as f64 / eval_elapsed.max(1e-9))
            };
            if let Some(f) = log.as_mut() {
                writeln!(
                    f,
                    "{iteration},{:.8e},{:.8e},{:.8e},{:.6},{:.4},{:.3},{:.3}",
                    report.l_p,
                    report.l_r,
                    report.total,
                    report.weight_mean,
                    stats.psnr,
                    stats.samples_per_ray,
                    logged_elapsed
                )?;
                f.flush()?;
            }
            if let Some(d) = diag.as_mut() {
                writeln!(
                    d,
                    "{iteration},{:.4},{:.3},{:.3}",
                    stats.psnr, stats.samples_per_ray, rays_per_sec
                )?;
                d.flush()?;
            }
            if let Some(dir) = out_dir {
                save_checkpoint(&dir.join("checkpoint.bin"), &self.model, &self.occ)?;
            }
            curve.push(CurvePoint {
                iteration,
                elapsed_sec: elapsed,
                psnr: stats.psnr,
                samples_per_ray: stats.samples_per_ray,
                rays_per_sec,
            });
            let hit_target = target.map(|t| stats.psnr >= t).unwrap_or(false);
            if hit_target && reached.is_none() {
                reached = Some(iteration);
            }
            last_eval = Some(stats);
            if hit_target {
                break;
            }
            if let Some(cap) = opts.wall_cap_sec {
                if elapsed > cap {
                    break;
                }
            }
        }
        let final_eval = match last_eval {
            Some(e) => e,
            None => self.evaluate()?,
        };
        if let Some(dir) = out_dir {
            save_checkpoint(&dir.join("checkpoint.bin"), &self.model, &self.occ)?;
        }
        Ok(TrainSummary {
            iterations_run,
            reached_target_at: reached,
            final_psnr: final_eval.psnr,
            final_ssim: final_eval.ssim,
            samples_per_ray: final_eval.samples_per_ray,
            curve,
        })
    }
}
