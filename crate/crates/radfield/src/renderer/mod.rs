//! Color heads, differentiable volume compositing, and the ray pipeline
//! (march, field queries, heads, accumulation) forward and backward.

mod mlp;

pub use mlp::{DirectionEncoding, MlpCache, MlpParams};

use crate::error::{Error, Result};
use crate::fields::{logistic, GradientSink, ParamGroup};
use crate::geometry::Ray;
use crate::parallel::{self, RAY_CHUNK};
use crate::rng;
use crate::sampler::{march_ray, OccupancyGrid, SamplePoint};
use crate::scene::{FieldQuery, SceneModel};
use crate::Vec3;

/// Per-sample color factors. The composited color uses their sum.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SampleColor {
    /// View-dependent factor, nonnegative (softplus head).
    pub c_vd: [f64; 3],
    /// View-independent factor in (0, 1) (logistic head).
    pub c_vi: [f64; 3],
}

/// The color decoder: either the decomposed pair of heads or a single
/// direction-conditioned head (the no-decomposition ablation).
#[derive(Debug, Clone, PartialEq)]
pub enum ColorModel {
    Decomposed { vi: MlpParams, vd: MlpParams, encoding: DirectionEncoding },
    Entangled { head: MlpParams, encoding: DirectionEncoding },
}

impl ColorModel {
    pub fn encoding(&self) -> DirectionEncoding {
        match self {
            ColorModel::Decomposed { encoding, .. } | ColorModel::Entangled { encoding, .. } => {
                *encoding
            }
        }
    }

    pub fn embedding_len(&self) -> usize {
        match self {
            ColorModel::Decomposed { vi, .. } => vi.input_len(),
            ColorModel::Entangled { head, encoding } => head.input_len() - encoding.output_len(),
        }
    }

    /// Evaluates both factors for one sample. `dir_enc` must come from
    /// `self.encoding()` applied to the ray direction.
    fn eval(&self, emb: &[f64], dir_enc: &[f64], scratch: &mut HeadScratch) -> Result<SampleColor> {
        match self {
            ColorModel::Decomposed { vi, vd, .. } => {
                let y_vi = vi.forward(emb, &mut scratch.cache_vi)?;
                let mut c_vi = [0.0; 3];
                for (c, &z) in c_vi.iter_mut().zip(y_vi.iter()) {
                    *c = logistic(z);
                }
                scratch.joint.clear();
                scratch.joint.extend_from_slice(emb);
                scratch.joint.extend_from_slice(dir_enc);
                let y_vd = vd.forward(&scratch.joint, &mut scratch.cache_vd)?;
                let mut c_vd = [0.0; 3];
                for (c, &z) in c_vd.iter_mut().zip(y_vd.iter()) {
                    *c = crate::fields::density_activation(z);
                }
                Ok(SampleColor { c_vd, c_vi })
            }
            ColorModel::Entangled { head, .. } => {
                scratch.joint.clear();
                scratch.joint.extend_from_slice(emb);
                scratch.joint.extend_from_slice(dir_enc);
                let y = head.forward(&scratch.joint, &mut scratch.cache_vd)?;
                let mut c = [0.0; 3];
                for (ci, &z) in c.iter_mut().zip(y.iter()) {
                    *ci = logistic(z);
                }
                Ok(SampleColor { c_vd: [0.0; 3], c_vi: c })
            }
        }
    }

    /// Backward through the heads for one sample. `d_vd` and `d_vi` are the
    /// loss gradients w.r.t. the two factors; the gradient w.r.t. the
    /// embedding is written to `d_emb`.
    fn backward(
        &self,
        emb: &[f64],
        dir_enc: &[f64],
        d_vd: [f64; 3],
        d_vi: [f64; 3],
        scratch: &mut HeadScratch,
        sink: &mut impl GradientSink,
        d_emb: &mut [f64],
    ) -> Result<()> {
        d_emb.fill(0.0);
        match self {
            ColorModel::Decomposed { vi, vd, .. } => {
                let y_vi = vi.forward(emb, &mut scratch.cache_vi)?;
                let mut dz_vi = [0.0; 3];
                for i in 0..3 {
                    let y = logistic(y_vi[i]);
                    dz_vi[i] = d_vi[i] * y * (1.0 - y);
                }
                vi.backward(&scratch.cache_vi, &dz_vi, ParamGroup::MlpVi, sink, d_emb)?;

                scratch.joint.clear();
                scratch.joint.extend_from_slice(emb);
                scratch.joint.extend_from_slice(dir_enc);
                let y_vd = vd.forward(&scratch.joint, &mut scratch.cache_vd)?;
                let mut dz_vd = [0.0; 3];
                for i in 0..3 {
                    dz_vd[i] = d_vd[i] * logistic(y_vd[i]);
                }
                scratch.joint_grad.resize(vd.input_len(), 0.0);
                vd.backward(
                    &scratch.cache_vd,
                    &dz_vd,
                    ParamGroup::MlpVd,
                    sink,
                    &mut scratch.joint_grad,
                )?;
                for (slot, &g) in d_emb.iter_mut().zip(scratch.joint_grad.iter()) {
                    *slot += g;
                }
                Ok(())
            }
            ColorModel::Entangled { head, .. } => {
                scratch.joint.clear();
                scratch.joint.extend_from_slice(emb);
                scratch.joint.extend_from_slice(dir_enc);
                let y = head.forward(&scratch.joint, &mut scratch.cache_vd)?;
                let mut dz = [0.0; 3];
                for i in 0..3 {
                    let s = logistic(y[i]);
                    dz[i] = d_vi[i] * s * (1.0 - s);
                }
                scratch.joint_grad.resize(head.input_len(), 0.0);
                head.backward(
                    &scratch.cache_vd,
                    &dz,
                    ParamGroup::MlpVd,
                    sink,
                    &mut scratch.joint_grad,
                )?;
                d_emb.copy_from_slice(&scratch.joint_grad[..d_emb.len()]);
                Ok(())
            }
        }
    }
}

/// Decodes one sample's color factors from embedding and view direction.
/// `d` must be unit-norm. Returns `(c_vd, c_vi, c)`.
pub fn color_heads(
    model: &ColorModel,
    emb: &[f64],
    d: Vec3,
) -> Result<([f64; 3], [f64; 3], [f64; 3])> {
    if (d.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::domain("viewing direction must be unit-norm"));
    }
    let mut scratch = HeadScratch::default();
    let mut dir_enc = vec![0.0; model.encoding().output_len()];
    model.encoding().encode_into(d, &mut dir_enc);
    let sc = model.eval(emb, &dir_enc, &mut scratch)?;
    let mut c = [0.0; 3];
    for i in 0..3 {
        c[i] = sc.c_vd[i] + sc.c_vi[i];
    }
    Ok((sc.c_vd, sc.c_vi, c))
}

#[derive(Debug, Default, Clone)]
struct HeadScratch {
    cache_vi: MlpCache,
    cache_vd: MlpCache,
    joint: Vec<f64>,
    joint_grad: Vec<f64>,
}

/// Everything `composite` needs from one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompositeSample {
    pub sigma: f64,
    pub delta: f64,
    pub t: f64,
    pub color: SampleColor,
}

/// Per-ray rendering result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOutput {
    /// Final color, clamped to `[0, 1]`.
    pub rgb: [f64; 3],
    /// Composited view-dependent factor (unclamped).
    pub rgb_vd: [f64; 3],
    /// Composited view-independent factor (unclamped).
    pub rgb_vi: [f64; 3],
    /// Expected termination distance along the ray.
    pub depth: f64,
    /// Accumulated weight `sum T_i alpha_i`, in `[0, 1]`.
    pub opacity: f64,
    /// Samples the march produced for this ray.
    pub n_samples: usize,
}

/// Incremental front-to-back accumulator shared by the batch pipeline and
/// the standalone `composite` entry point.
struct Compositor {
    transmittance: f64,
    rgb: [f64; 3],
    rgb_vd: [f64; 3],
    rgb_vi: [f64; 3],
    depth: f64,
    opacity: f64,
    /// Stop compositing once transmittance falls below this (evaluation
    /// only; training keeps every sample so gradients match the forward).
    termination: Option<f64>,
}

impl Compositor {
    fn new(termination: Option<f64>) -> Self {
        Self {
            transmittance: 1.0,
            rgb: [0.0; 3],
            rgb_vd: [0.0; 3],
            rgb_vi: [0.0; 3],
            depth: 0.0,
            opacity: 0.0,
            termination,
        }
    }

    /// Accumulates one sample; returns false once the ray is saturated.
    fn add(&mut self, s: &CompositeSample) -> Result<bool> {
        if s.sigma < 0.0 || s.delta <= 0.0 {
            return Err(Error::domain(format!(
                "composite needs sigma >= 0 and delta > 0, got ({}, {})",
                s.sigma, s.delta
            )));
        }
        let alpha = -(-s.sigma * s.delta).exp_m1();
        let w = self.transmittance * alpha;
        for ch in 0..3 {
            self.rgb[ch] += w * (s.color.c_vd[ch] + s.color.c_vi[ch]);
            self.rgb_vd[ch] += w * s.color.c_vd[ch];
            self.rgb_vi[ch] += w * s.color.c_vi[ch];
        }
        self.depth += w * s.t;
        self.opacity += w;
        self.transmittance *= 1.0 - alpha;
        if let Some(eps) = self.termination {
            if self.transmittance < eps {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn finish(self, bg_fill: [f64; 3], n_samples: usize, saw_samples: bool) -> RenderOutput {
        let mut rgb = [0.0; 3];
        if saw_samples {
            for ch in 0..3 {
                rgb[ch] = self.rgb[ch].clamp(0.0, 1.0);
            }
        } else {
            for ch in 0..3 {
                rgb[ch] = bg_fill[ch].clamp(0.0, 1.0);
            }
        }
        debug_assert!(self.opacity <= 1.0 + 1e-9);
        RenderOutput {
            rgb,
            rgb_vd: self.rgb_vd,
            rgb_vi: self.rgb_vi,
            depth: self.depth,
            opacity: self.opacity,
            n_samples,
        }
    }
}

/// Front-to-back accumulation of per-sample densities and color factors.
/// An empty sample list renders the background fill with zero opacity.
pub fn composite(
    samples: &[CompositeSample],
    bg_fill: [f64; 3],
    termination: Option<f64>,
) -> Result<RenderOutput> {
    let mut comp = Compositor::new(termination);
    for s in samples {
        if !comp.add(s)? {
            break;
        }
    }
    Ok(comp.finish(bg_fill, samples.len(), !samples.is_empty()))
}

/// Gradients w.r.t. one sample's density and summed color.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SampleGrad {
    pub d_sigma: f64,
    /// Gradient w.r.t. the per-sample color sum `c = c_vd + c_vi`.
    pub d_color: [f64; 3],
}

/// Adjoint of `composite` w.r.t. the clamped rgb output. Channels that were
/// clamped receive zero gradient. `grads` is resized to `samples.len()`.
pub fn composite_backward(
    samples: &[CompositeSample],
    upstream_rgb: [f64; 3],
    grads: &mut Vec<SampleGrad>,
) -> Result<()> {
    grads.clear();
    grads.resize(samples.len(), SampleGrad::default());
    if samples.is_empty() {
        return Ok(());
    }
    // Forward replay for transmittances, weights, and the clamp mask.
    let n = samples.len();
    let mut weights = vec![0.0; n];
    let mut trans = vec![0.0; n];
    let mut t_acc = 1.0;
    let mut sums = [0.0; 3];
    for (i, s) in samples.iter().enumerate() {
        if s.sigma < 0.0 || s.delta <= 0.0 {
            return Err(Error::domain("composite backward on invalid sample"));
        }
        let alpha = -(-s.sigma * s.delta).exp_m1();
        trans[i] = t_acc;
        weights[i] = t_acc * alpha;
        for ch in 0..3 {
            sums[ch] += weights[i] * (s.color.c_vd[ch] + s.color.c_vi[ch]);
        }
        t_acc *= 1.0 - alpha;
    }
    let mut g = upstream_rgb;
    for ch in 0..3 {
        if !(0.0..=1.0).contains(&sums[ch]) {
            g[ch] = 0.0;
        }
    }
    // d rgb / d c_i = w_i; d rgb / d sigma_i has the direct alpha term plus
    // the attenuation of every later sample. The suffix accumulates
    // sum_{j > i} w_j <g, c_j>.
    let mut suffix = 0.0;
    for i in (0..n).rev() {
        let s = &samples[i];
        let gc = g[0] * (s.color.c_vd[0] + s.color.c_vi[0])
            + g[1] * (s.color.c_vd[1] + s.color.c_vi[1])
            + g[2] * (s.color.c_vd[2] + s.color.c_vi[2]);
        let alpha = -(-s.sigma * s.delta).exp_m1();
        grads[i].d_color = [g[0] * weights[i], g[1] * weights[i], g[2] * weights[i]];
        grads[i].d_sigma = s.delta * (trans[i] * (1.0 - alpha) * gc - suffix);
        suffix += weights[i] * gc;
    }
    Ok(())
}

/// Training keeps a tape per ray so the backward pass can revisit every
/// sample without re-marching. MLP activations are recomputed on the way
/// back instead of stored.
#[derive(Debug, Clone, Default)]
pub struct RayTape {
    pub samples: Vec<SamplePoint>,
    pub field: Vec<FieldQuery>,
    /// Per-sample embeddings, flattened (`embedding_len` scalars each).
    pub emb: Vec<f64>,
    pub colors: Vec<SampleColor>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderMode {
    Train,
    Eval,
}

/// Keys for the per-ray jitter stream.
#[derive(Debug, Clone, Copy)]
pub struct RenderCtx {
    pub mode: RenderMode,
    pub seed: u64,
    pub iteration: u64,
}

impl RenderCtx {
    pub fn eval() -> Self {
        Self { mode: RenderMode::Eval, seed: 0, iteration: 0 }
    }

    pub fn train(seed: u64, iteration: u64) -> Self {
        Self { mode: RenderMode::Train, seed, iteration }
    }
}

/// Per-worker scratch for the pipeline.
struct RenderScratch {
    heads: HeadScratch,
    emb: Vec<f64>,
    dir_enc: Vec<f64>,
    comp_grads: Vec<SampleGrad>,
    d_emb: Vec<f64>,
}

impl RenderScratch {
    fn new(model: &SceneModel) -> Self {
        Self {
            heads: HeadScratch::default(),
            emb: vec![0.0; model.embedding_len()],
            dir_enc: vec![0.0; model.color.encoding().output_len()],
            comp_grads: Vec::new(),
            d_emb: vec![0.0; model.embedding_len()],
        }
    }
}

fn render_one(
    model: &SceneModel,
    occ: &OccupancyGrid,
    ray: &Ray,
    jitter: Option<f64>,
    scratch: &mut RenderScratch,
    mut tape: Option<&mut RayTape>,
) -> Result<RenderOutput> {
    let params = &model.render;
    let n_bg = if model.bg.is_some() { params.bg_samples } else { 0 };
    let samples = march_ray(ray, &model.bounds, occ, params.step, n_bg, jitter)?;
    model.color.encoding().encode_into(ray.direction, &mut scratch.dir_enc);

    let termination = match tape {
        Some(_) => None,
        None => Some(params.termination),
    };
    if let Some(t) = tape.as_deref_mut() {
        t.samples.clear();
        t.field.clear();
        t.emb.clear();
        t.colors.clear();
    }
    let mut comp = Compositor::new(termination);
    for s in &samples {
        let q = model.query_fields(s.position, &mut scratch.emb)?;
        let color = model.color.eval(&scratch.emb, &scratch.dir_enc, &mut scratch.heads)?;
        let keep_going =
            comp.add(&CompositeSample { sigma: q.sigma, delta: s.delta, t: s.t, color })?;
        if let Some(t) = tape.as_deref_mut() {
            t.samples.push(*s);
            t.field.push(q);
            t.emb.extend_from_slice(&scratch.emb);
            t.colors.push(color);
        }
        if !keep_going {
            break;
        }
    }
    Ok(comp.finish(params.bg_fill, samples.len(), !samples.is_empty()))
}

/// Rendered batch plus (in train mode) the tapes needed for backprop.
pub struct RenderBatch {
    pub outputs: Vec<RenderOutput>,
    pub tapes: Option<Vec<RayTape>>,
}

/// Renders a batch of rays, data-parallel over fixed-size chunks. Output
/// order follows ray order regardless of scheduling.
pub fn render_rays(
    model: &SceneModel,
    occ: &OccupancyGrid,
    rays: &[Ray],
    ctx: &RenderCtx,
) -> Result<RenderBatch> {
    render_rays_impl(model, occ, rays, ctx, false)
}

/// Single-threaded variant of `render_rays`; numerically identical, kept
/// callable alongside the parallel path for benchmarking.
pub fn render_rays_seq(
    model: &SceneModel,
    occ: &OccupancyGrid,
    rays: &[Ray],
    ctx: &RenderCtx,
) -> Result<RenderBatch> {
    render_rays_impl(model, occ, rays, ctx, true)
}

fn render_rays_impl(
    model: &SceneModel,
    occ: &OccupancyGrid,
    rays: &[Ray],
    ctx: &RenderCtx,
    sequential: bool,
) -> Result<RenderBatch> {
    let train = ctx.mode == RenderMode::Train;
    let run = |range: std::ops::Range<usize>| {
        let mut scratch = RenderScratch::new(model);
        let mut outputs = Vec::with_capacity(range.len());
        let mut tapes = if train { Some(Vec::with_capacity(range.len())) } else { None };
        for i in range {
            let jitter = if train {
                Some(rng::unit_f64(ctx.seed, rng::domain::RAY_JITTER, ctx.iteration, i as u64))
            } else {
                None
            };
            let mut tape = if train { Some(RayTape::default()) } else { None };
            let out = render_one(model, occ, &rays[i], jitter, &mut scratch, tape.as_mut())?;
            outputs.push(out);
            if let Some(ts) = tapes.as_mut() {
                ts.push(tape.unwrap());
            }
        }
        Ok::<_, Error>((outputs, tapes))
    };
    let chunks = if sequential {
        parallel::map_chunks_seq(rays.len(), RAY_CHUNK, run)
    } else {
        parallel::map_chunks(rays.len(), RAY_CHUNK, run)
    };
    let mut outputs = Vec::with_capacity(rays.len());
    let mut tapes = if train { Some(Vec::with_capacity(rays.len())) } else { None };
    for chunk in chunks {
        let (o, t) = chunk?;
        outputs.extend(o);
        if let (Some(all), Some(part)) = (tapes.as_mut(), t) {
            all.extend(part);
        }
    }
    Ok(RenderBatch { outputs, tapes })
}

/// Backpropagates one ray's photometric gradient (plus the per-sample
/// view-dependent regularizer weight) through compositing, heads,
/// embeddings, and density grids into `sink`.
pub fn backward_ray(
    model: &SceneModel,
    ray: &Ray,
    tape: &RayTape,
    upstream_rgb: [f64; 3],
    reg_grad: f64,
    sink: &mut impl GradientSink,
) -> Result<()> {
    let mut scratch = RenderScratch::new(model);
    backward_ray_with(model, ray, tape, upstream_rgb, reg_grad, sink, &mut scratch)
}

fn backward_ray_with(
    model: &SceneModel,
    ray: &Ray,
    tape: &RayTape,
    upstream_rgb: [f64; 3],
    reg_grad: f64,
    sink: &mut impl GradientSink,
    scratch: &mut RenderScratch,
) -> Result<()> {
    let n = tape.samples.len();
    if n == 0 {
        return Ok(());
    }
    let emb_len = model.embedding_len();
    // Rebuild the composite inputs from the tape.
    let comp: Vec<CompositeSample> = (0..n)
        .map(|i| CompositeSample {
            sigma: tape.field[i].sigma,
            delta: tape.samples[i].delta,
            t: tape.samples[i].t,
            color: tape.colors[i],
        })
        .collect();
    composite_backward(&comp, upstream_rgb, &mut scratch.comp_grads)?;
    model.color.encoding().encode_into(ray.direction, &mut scratch.dir_enc);

    let decomposed = matches!(model.color, ColorModel::Decomposed { .. });
    let mut d_emb = std::mem::take(&mut scratch.d_emb);
    for i in 0..n {
        let g = scratch.comp_grads[i];
        let emb = &tape.emb[i * emb_len..(i + 1) * emb_len];
        let d_vi = g.d_color;
        let mut d_vd = g.d_color;
        if decomposed && reg_grad != 0.0 {
            for ch in 0..3 {
                d_vd[ch] += reg_grad;
            }
        }
        model.color.backward(
            emb,
            &scratch.dir_enc,
            d_vd,
            d_vi,
            &mut scratch.heads,
            sink,
            &mut d_emb,
        )?;
        model.scatter_field_grads(
            tape.samples[i].position,
            &tape.field[i],
            g.d_sigma,
            &d_emb,
            sink,
        )?;
    }
    scratch.d_emb = d_emb;
    Ok(())
}

/// Renders every pixel of a camera in evaluation mode.
pub struct CameraView {
    pub image: crate::io::Image,
    pub depth: crate::io::DepthImage,
    pub samples_per_ray: f64,
}

pub fn render_camera(
    model: &SceneModel,
    occ: &OccupancyGrid,
    cam: &crate::geometry::CameraModel,
) -> Result<CameraView> {
    let (w, h) = (cam.width as usize, cam.height as usize);
    let mut rays = Vec::with_capacity(w * h);
    for py in 0..h {
        for px in 0..w {
            rays.push(crate::geometry::generate_ray(cam, px as f64, py as f64)?);
        }
    }
    let batch = render_rays(model, occ, &rays, &RenderCtx::eval())?;
    let mut image = crate::io::Image::new(w, h);
    let mut depths = vec![None; w * h];
    let mut samples = 0usize;
    for (i, out) in batch.outputs.iter().enumerate() {
        image.pixels[i] = out.rgb;
        if out.opacity > 1e-3 {
            depths[i] = Some(out.depth);
        }
        samples += out.n_samples;
    }
    Ok(CameraView {
        image,
        depth: crate::io::DepthImage::quantize(w, h, &depths),
        samples_per_ray: samples as f64 / rays.len().max(1) as f64,
    })
}

/// Atomic-accumulation variant of `backward_rays` (fast mode). Summation
/// order depends on scheduling, so results are not bit-reproducible.
#[cfg(feature = "parallel")]
pub fn backward_rays_shared(
    model: &SceneModel,
    rays: &[Ray],
    tapes: &[RayTape],
    upstream: &[[f64; 3]],
    reg_grad: f64,
    shared: &crate::fields::SharedGradientBuffer,
) -> Result<()> {
    use rayon::prelude::*;
    let n = rays.len();
    assert_eq!(tapes.len(), n);
    assert_eq!(upstream.len(), n);
    let failures: Vec<Error> = parallel::chunk_ranges(n, RAY_CHUNK)
        .into_par_iter()
        .filter_map(|range| {
            let mut scratch = RenderScratch::new(model);
            let mut sink = shared.sink();
            for i in range {
                if let Err(e) = backward_ray_with(
                    model,
                    &rays[i],
                    &tapes[i],
                    upstream[i],
                    reg_grad,
                    &mut sink,
                    &mut scratch,
                ) {
                    return Some(e);
                }
            }
            None
        })
        .collect();
    match failures.into_iter().next() {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Chunk-parallel backward pass. `upstream[i]` is the loss gradient w.r.t.
/// ray `i`'s clamped rgb; `buffers` must hold one `GradientBuffer` per
/// `RAY_CHUNK` chunk of the batch. Buffers are cleared before use and
/// filled in chunk order.
pub fn backward_rays(
    model: &SceneModel,
    rays: &[Ray],
    tapes: &[RayTape],
    upstream: &[[f64; 3]],
    reg_grad: f64,
    buffers: &mut [crate::fields::GradientBuffer],
) -> Result<()> {
    backward_rays_impl(model, rays, tapes, upstream, reg_grad, buffers, false)
}

/// Single-threaded variant of `backward_rays` for benchmarking.
pub fn backward_rays_seq(
    model: &SceneModel,
    rays: &[Ray],
    tapes: &[RayTape],
    upstream: &[[f64; 3]],
    reg_grad: f64,
    buffers: &mut [crate::fields::GradientBuffer],
) -> Result<()> {
    backward_rays_impl(model, rays, tapes, upstream, reg_grad, buffers, true)
}

fn backward_rays_impl(
    model: &SceneModel,
    rays: &[Ray],
    tapes: &[RayTape],
    upstream: &[[f64; 3]],
    reg_grad: f64,
    buffers: &mut [crate::fields::GradientBuffer],
    sequential: bool,
) -> Result<()> {
    let n = rays.len();
    assert_eq!(tapes.len(), n);
    assert_eq!(upstream.len(), n);
    assert!(buffers.len() >= n.div_ceil(RAY_CHUNK));
    let failures = std::sync::Mutex::new(Vec::new());
    let run_chunk = |chunk_idx: usize, buf: &mut crate::fields::GradientBuffer| {
        let start = chunk_idx * RAY_CHUNK;
        if start >= n {
            return;
        }
        let end = (start + RAY_CHUNK).min(n);
        buf.clear();
        let mut scratch = RenderScratch::new(model);
        for i in start..end {
            if let Err(e) = backward_ray_with(
                model,
                &rays[i],
                &tapes[i],
                upstream[i],
                reg_grad,
                buf,
                &mut scratch,
            ) {
                failures.lock().unwrap().push(e);
                return;
            }
        }
    };
    if sequential {
        for (chunk_idx, buf) in buffers.iter_mut().enumerate() {
            run_chunk(chunk_idx, buf);
        }
    } else {
        parallel::for_each_slice_mut(buffers, 1, |chunk_idx, slot| run_chunk(chunk_idx, &mut slot[0]));
    }
    match failures.into_inner().unwrap().pop() {
        Some(e) => Err(e),
        None => Ok(()),
    }
}
