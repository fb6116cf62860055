//! Throughput comparison of the rayon data-parallel lanes against their
//! sequential fallbacks: evaluation rendering, the training forward pass,
//! and the backward scatter.

use criterion::{criterion_group, criterion_main, Criterion};
use radfield::config::RunConfig;
use radfield::fields::GradientBuffer;
use radfield::geometry::{generate_ray, Aabb, Ray, SceneBounds};
use radfield::parallel::RAY_CHUNK;
use radfield::renderer::{
    backward_rays, backward_rays_seq, render_rays, render_rays_seq, RenderCtx,
};
use radfield::sampler::{OccupancyGrid, OccupancyParams};
use radfield::scene::SceneModel;
use radfield::Vec3;
use std::hint::black_box;

struct Setup {
    model: SceneModel,
    occ: OccupancyGrid,
    rays: Vec<Ray>,
}

fn setup() -> Setup {
    let mut cfg = RunConfig::default();
    cfg.grid.fg_resolution = 48;
    cfg.grid.bg_resolution = 16;
    cfg.grid.bg_radial_resolution = 6;
    cfg.grid.hash_levels = 4;
    cfg.grid.hash_features = 2;
    cfg.grid.hash_table_log2 = 14;
    cfg.grid.hash_base_resolution = 8;
    cfg.grid.hash_growth = 1.7;
    cfg.render.hidden_width = 16;
    cfg.render.hidden_layers = 1;
    cfg.render.dir_bands = 2;
    cfg.sampler.steps_per_diagonal = 256;
    cfg.sampler.bg_samples = 8;
    let fg = Aabb::new(Vec3::new(-1.0, -1.0, -1.0), Vec3::new(1.0, 1.0, 1.0)).unwrap();
    let bounds = SceneBounds::new(fg, Vec3::new(2.0, 2.0, 2.0)).unwrap();
    let mut model = SceneModel::build_with_bounds(&cfg, bounds).unwrap();
    // A slab of solid density through the middle of the box.
    for iz in 0..48 {
        for iy in 20..28 {
            for ix in 0..48 {
                let idx = model.fg_density.vertex_index(ix, iy, iz);
                model.fg_density.raw[idx] = 20.0;
            }
        }
    }
    let occ = OccupancyGrid::fully_occupied(
        model.bounds.bg,
        [32, 32, 32],
        OccupancyParams { update_interval: 16, decay: 0.95, occ_threshold: 0.01 },
        model.render.step,
    );
    let cam = radfield::geometry::CameraModel::new(
        24.0,
        24.0,
        16.0,
        12.0,
        32,
        24,
        {
            let mut pose = radfield::Mat4::identity();
            pose[(2, 3)] = -2.5;
            pose
        },
    )
    .unwrap();
    let mut rays = Vec::new();
    for py in 0..24 {
        for px in 0..32 {
            rays.push(generate_ray(&cam, px as f64, py as f64).unwrap());
        }
    }
    Setup { model, occ, rays }
}

fn bench_render_eval(c: &mut Criterion) {
    let s = setup();
    let ctx = RenderCtx::eval();
    let mut group = c.benchmark_group("render_eval");
    group.sample_size(10);
    group.bench_function("sequential", |b| {
        b.iter(|| black_box(render_rays_seq(&s.model, &s.occ, &s.rays, &ctx).unwrap()))
    });
    group.bench_function("parallel", |b| {
        b.iter(|| black_box(render_rays(&s.model, &s.occ, &s.rays, &ctx).unwrap()))
    });
    group.finish();
}

fn bench_train_forward(c: &mut Criterion) {
    let s = setup();
    let ctx = RenderCtx::train(0, 1);
    let mut group = c.benchmark_group("train_forward");
    group.sample_size(10);
    group.bench_function("sequential", |b| {
        b.iter(|| black_box(render_rays_seq(&s.model, &s.occ, &s.rays, &ctx).unwrap()))
    });
    group.bench_function("parallel", |b| {
        b.iter(|| black_box(render_rays(&s.model, &s.occ, &s.rays, &ctx).unwrap()))
    });
    group.finish();
}

fn bench_backward(c: &mut Criterion) {
    let s = setup();
    let ctx = RenderCtx::train(0, 1);
    let batch = render_rays(&s.model, &s.occ, &s.rays, &ctx).unwrap();
    let tapes = batch.tapes.unwrap();
    let upstream = vec![[1e-3, -2e-3, 5e-4]; s.rays.len()];
    let sizes = s.model.lane_sizes();
    let dense = s.model.lane_dense();
    let mut buffers: Vec<GradientBuffer> = (0..s.rays.len().div_ceil(RAY_CHUNK))
        .map(|_| GradientBuffer::new(sizes, dense))
        .collect();
    let mut group = c.benchmark_group("backward");
    group.sample_size(10);
    group.bench_function("sequential", |b| {
        b.iter(|| {
            backward_rays_seq(&s.model, &s.rays, &tapes, &upstream, 1e-6, &mut buffers).unwrap();
        })
    });
    group.bench_function("parallel", |b| {
        b.iter(|| {
            backward_rays(&s.model, &s.rays, &tapes, &upstream, 1e-6, &mut buffers).unwrap();
        })
    });
    group.finish();
}

criterion_group!(benches, bench_render_eval, bench_train_forward, bench_backward);
criterion_main!(benches);
