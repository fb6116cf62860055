use clap::{Parser, Subcommand};
use radfield::cli::{self, Overrides};
use radfield::config::RunConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "radfield", about = "Hybrid voxel/hash radiance-field engine", version)]
struct Cli {
    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker thread count (0 = library default).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Force bit-reproducible gradient merges and placeholder timing
    /// columns in logs.
    #[arg(long, global = true)]
    deterministic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset from a scene spec.
    Synth {
        /// Scene spec JSON.
        #[arg(long)]
        spec: PathBuf,
        /// Output dataset directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a scene from a run config.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Point cloud override.
        #[arg(long)]
        pointcloud: Option<PathBuf>,
        /// Disable the geometry-prior initialization.
        #[arg(long)]
        no_lidar_init: bool,
    },
    /// Render poses from a checkpoint.
    Render {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        poses: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Lateral camera-frame shift in world units.
        #[arg(long, default_value_t = 0.0)]
        shift_left: f64,
    },
    /// Evaluate a checkpoint on a dataset's test split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Also write the metrics table as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the ablation benchmark harness.
    Bench {
        #[arg(long)]
        config: PathBuf,
    },
}

fn run(cli: Cli) -> radfield::Result<()> {
    radfield::parallel::set_threads(cli.threads);
    let overrides = Overrides { seed: cli.seed, deterministic: cli.deterministic };
    match cli.command {
        Command::Synth { spec, out } => cli::cmd_synth(&spec, &out),
        Command::Train { config, pointcloud, no_lidar_init } => {
            let mut cfg = RunConfig::load(&config)?;
            cli::apply_overrides(&mut cfg, &overrides);
            if let Some(pc) = pointcloud {
                cfg.lidar.pointcloud = Some(pc);
            }
            if no_lidar_init {
                cfg.no_lidar_init = true;
            }
            let summary = cli::cmd_train(cfg)?;
            println!(
                "trained {} iterations, test psnr {:.3} dB, ssim {:.4}, {:.2} samples/ray",
                summary.iterations_run,
                summary.final_psnr,
                summary.final_ssim,
                summary.samples_per_ray
            );
            Ok(())
        }
        Command::Render { checkpoint, poses, out, shift_left } => {
            let written = cli::cmd_render(&checkpoint, &poses, &out, shift_left)?;
            println!("rendered {} views into {}", written.len(), out.display());
            Ok(())
        }
        Command::Eval { checkpoint, dataset, out } => {
            let report = cli::cmd_eval(&checkpoint, &dataset, out.as_deref())?;
            print!("{}", report.table());
            Ok(())
        }
        Command::Bench { config } => {
            let mut cfg = RunConfig::load(&config)?;
            cli::apply_overrides(&mut cfg, &overrides);
            let report = cli::cmd_bench(cfg)?;
            print!("{}", report.csv());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
