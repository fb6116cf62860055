//! Command implementations behind the binary's subcommands. Kept as
//! library functions so integration tests can drive them directly.

use crate::config::RunConfig;
use crate::dataset::{load_poses, SceneDataset};
use crate::error::{Error, Result};
use crate::io::{load_checkpoint, write_pgm, write_ppm};
use crate::metrics::{psnr, ssim};
use crate::renderer::render_camera;
use crate::synth::{generate_dataset, SyntheticSceneSpec};
use crate::trainer::{RunOptions, Trainer, TrainSummary};
use crate::Vec3;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Generates a synthetic dataset from a scene spec file.
pub fn cmd_synth(spec_path: &Path, out_dir: &Path) -> Result<()> {
    let spec = SyntheticSceneSpec::load(spec_path)?;
    generate_dataset(&spec, out_dir)
}

/// Trains from a config file; returns the run summary. Checkpoint and logs
/// land in `train.out_dir`.
pub fn cmd_train(cfg: RunConfig) -> Result<TrainSummary> {
    let dataset = SceneDataset::load(&cfg.scene.dataset_dir)?;
    let out_dir = cfg.train.out_dir.clone();
    let mut trainer = Trainer::new(cfg, &dataset)?;
    if let Some(report) = trainer.init_report {
        eprintln!(
            "prior init: {} foreground points, {} background points, {} skipped",
            report.fg_points, report.bg_points, report.skipped
        );
    }
    trainer.run(Some(&out_dir), &RunOptions::default())
}

/// Renders every pose in a poses file from a checkpoint, optionally
/// shifting each camera left (camera frame) by `shift_left` world units.
pub fn cmd_render(
    checkpoint: &Path,
    poses: &Path,
    out_dir: &Path,
    shift_left: f64,
) -> Result<Vec<PathBuf>> {
    let (model, occ) = load_checkpoint(checkpoint)?;
    let cams = load_poses(poses)?;
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for (i, (cam, _)) in cams.iter().enumerate() {
        // Left is -x in the camera frame (x points right).
        let cam = cam.translated_in_camera_frame(Vec3::new(-shift_left, 0.0, 0.0));
        let view = render_camera(&model, &occ, &cam)?;
        let img_path = out_dir.join(format!("{i:04}.ppm"));
        write_ppm(&img_path, &view.image)?;
        write_pgm(&out_dir.join(format!("{i:04}.pgm")), &view.depth)?;
        written.push(img_path);
    }
    Ok(written)
}

/// Per-image and mean metrics over the dataset's test split.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub per_image: Vec<(usize, f64, f64)>,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
}

impl MetricsReport {
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:>6} {:>10} {:>8}", "view", "psnr", "ssim");
        for (i, p, m) in &self.per_image {
            let _ = writeln!(s, "{i:>6} {p:>10.4} {m:>8.4}");
        }
        let _ = writeln!(s, "{:>6} {:>10.4} {:>8.4}", "mean", self.mean_psnr, self.mean_ssim);
        s
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("view,psnr,ssim\n");
        for (i, p, m) in &self.per_image {
            let _ = writeln!(s, "{i},{p:.4},{m:.4}");
        }
        let _ = writeln!(s, "mean,{:.4},{:.4}", self.mean_psnr, self.mean_ssim);
        s
    }
}

/// Evaluates a checkpoint on a dataset's test split.
pub fn cmd_eval(checkpoint: &Path, dataset_dir: &Path, out_csv: Option<&Path>) -> Result<MetricsReport> {
    let (model, occ) = load_checkpoint(checkpoint)?;
    let dataset = SceneDataset::load(dataset_dir)?;
    let test = dataset.test_indices();
    if test.is_empty() {
        return Err(Error::domain("dataset has no test split"));
    }
    let mut per_image = Vec::with_capacity(test.len());
    for &i in &test {
        let view = render_camera(&model, &occ, &dataset.cameras[i])?;
        per_image.push((
            i,
            psnr(&view.image, &dataset.images[i])?,
            ssim(&view.image, &dataset.images[i])?,
        ));
    }
    let mean_psnr = per_image.iter().map(|x| x.1).sum::<f64>() / per_image.len() as f64;
    let mean_ssim = per_image.iter().map(|x| x.2).sum::<f64>() / per_image.len() as f64;
    let report = MetricsReport { per_image, mean_psnr, mean_ssim };
    if let Some(path) = out_csv {
        std::fs::write(path, report.csv())?;
    }
    Ok(report)
}

/// One benchmark row.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub variant: String,
    /// Iterations to the PSNR target; `None` renders as `inf`.
    pub iterations_to_target: Option<u64>,
    pub wall_sec_to_target: Option<f64>,
    pub samples_per_ray: f64,
    pub final_psnr: f64,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn csv(&self) -> String {
        let mut s =
            String::from("variant,iterations_to_target,wall_sec_to_target,samples_per_ray,final_psnr\n");
        for r in &self.rows {
            let iters = r
                .iterations_to_target
                .map(|v| v.to_string())
                .unwrap_or_else(|| "inf".into());
            let wall = r
                .wall_sec_to_target
                .map(|v| format!("{v:.3}"))
                .unwrap_or_else(|| "inf".into());
            let _ = writeln!(
                s,
                "{},{},{},{:.3},{:.4}",
                r.variant, iters, wall, r.samples_per_ray, r.final_psnr
            );
        }
        s
    }

    pub fn row(&self, variant: &str) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.variant == variant)
    }
}

/// The benchmark variant set mirroring the component ablations.
pub fn bench_variants(base: &RunConfig) -> Vec<(String, RunConfig)> {
    let mut variants = Vec::new();
    variants.push(("full".to_string(), base.clone()));
    let mut no_li = base.clone();
    no_li.no_lidar_init = true;
    variants.push(("no_lidar_init".to_string(), no_li));
    let mut no_cd = base.clone();
    no_cd.no_color_decomp = true;
    variants.push(("no_color_decomp".to_string(), no_cd));
    let mut no_bg = base.clone();
    no_bg.bg_mode = crate::config::BgMode::None;
    variants.push(("bg_none".to_string(), no_bg));
    variants
}

/// Runs every variant to the target PSNR (or its caps) and writes the
/// results table plus one PSNR-over-time curve file per variant.
pub fn cmd_bench(cfg: RunConfig) -> Result<BenchReport> {
    let dataset = SceneDataset::load(&cfg.scene.dataset_dir)?;
    let out_dir = cfg.bench.out_dir.clone();
    std::fs::create_dir_all(&out_dir)?;
    let opts = RunOptions {
        max_iterations: Some(cfg.bench.max_iterations),
        wall_cap_sec: Some(cfg.bench.wall_clock_cap_sec),
        target_psnr: Some(cfg.bench.target_psnr),
    };
    let mut rows = Vec::new();
    for (name, variant_cfg) in bench_variants(&cfg) {
        let mut trainer = Trainer::new(variant_cfg, &dataset)?;
        let summary = trainer.run(None, &opts)?;
        let mut curve = String::from("iter,elapsed_sec,psnr,samples_per_ray\n");
        for p in &summary.curve {
            let _ = writeln!(
                curve,
                "{},{:.3},{:.4},{:.3}",
                p.iteration, p.elapsed_sec, p.psnr, p.samples_per_ray
            );
        }
        std::fs::write(out_dir.join(format!("curve_{name}.csv")), curve)?;
        let wall = summary.reached_target_at.and_then(|it| {
            summary.curve.iter().find(|p| p.iteration == it).map(|p| p.elapsed_sec)
        });
        rows.push(BenchRow {
            variant: name,
            iterations_to_target: summary.reached_target_at,
            wall_sec_to_target: wall,
            samples_per_ray: summary.samples_per_ray,
            final_psnr: summary.final_psnr,
        });
    }
    let report = BenchReport { rows };
    std::fs::write(out_dir.join("bench_results.csv"), report.csv())?;
    Ok(report)
}

/// Shared CLI overrides applied on top of a loaded config.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub deterministic: bool,
}

pub fn apply_overrides(cfg: &mut RunConfig, ov: &Overrides) {
    if let Some(seed) = ov.seed {
        cfg.train.seed = seed;
    }
    if ov.deterministic {
        cfg.train.deterministic = true;
    }
}

/// Split helper for tests: which poses the every-10th rule marks as test.
pub fn expected_test_indices(count: usize) -> Vec<usize> {
    (0..count).filter(|i| i % 10 == 0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_tenth_split_never_overlaps_and_covers() {
        for count in [1usize, 9, 10, 20, 25] {
            let test = expected_test_indices(count);
            assert_eq!(test.len(), count.div_ceil(10));
            let train: Vec<usize> = (0..count).filter(|i| !test.contains(i)).collect();
            assert_eq!(test.len() + train.len(), count);
        }
    }

    #[test]
    fn bench_variant_set_matches_the_ablations() {
        let base = RunConfig::default();
        let variants = bench_variants(&base);
        let names: Vec<&str> = variants.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(names, ["full", "no_lidar_init", "no_color_decomp", "bg_none"]);
        assert!(variants[1].1.no_lidar_init);
        assert!(variants[2].1.no_color_decomp);
        assert_eq!(variants[3].1.bg_mode, crate::config::BgMode::None);
    }
}
