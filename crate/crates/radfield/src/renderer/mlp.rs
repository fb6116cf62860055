//! Small dense MLPs with hand-written reverse passes, plus the sinusoidal
//! direction encoding feeding the view-dependent head.
//!
//! Parameters live in one flat array per network (per layer: row-major
//! weights, then biases) so the optimizer and checkpoint code can treat a
//! head as a single parameter lane.

use super::super::fields::{GradientSink, ParamGroup};
use crate::error::{Error, Result};
use crate::Vec3;
use rand::Rng;

/// Affine-rectifier chain; the final layer is affine with no activation.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    /// `(in, out)` per layer.
    pub dims: Vec<(usize, usize)>,
    /// Flat parameters, layer-major: weights then bias per layer.
    pub data: Vec<f64>,
    /// `(weight_offset, bias_offset)` per layer.
    offsets: Vec<(usize, usize)>,
}

impl MlpParams {
    /// Zero-initialized network with the given layer widths
    /// (`input -> hidden... -> output`).
    pub fn new(widths: &[usize]) -> Result<Self> {
        if widths.len() < 2 || widths.iter().any(|&w| w == 0) {
            return Err(Error::domain("mlp needs at least input and output widths"));
        }
        let mut dims = Vec::new();
        let mut offsets = Vec::new();
        let mut len = 0usize;
        for pair in widths.windows(2) {
            let (n_in, n_out) = (pair[0], pair[1]);
            offsets.push((len, len + n_in * n_out));
            len += n_in * n_out + n_out;
            dims.push((n_in, n_out));
        }
        Ok(Self { dims, data: vec![0.0; len], offsets })
    }

    pub fn input_len(&self) -> usize {
        self.dims[0].0
    }

    pub fn output_len(&self) -> usize {
        self.dims.last().unwrap().1
    }

    pub fn layer_count(&self) -> usize {
        self.dims.len()
    }

    /// He-uniform weight init (`+-sqrt(6 / fan_in)`), zero biases.
    pub fn init_he(&mut self, rng: &mut impl Rng) {
        for (l, &(n_in, n_out)) in self.dims.iter().enumerate() {
            let bound = (6.0 / n_in as f64).sqrt();
            let (w_off, b_off) = self.offsets[l];
            for w in &mut self.data[w_off..w_off + n_in * n_out] {
                *w = rng.gen_range(-bound..bound);
            }
            for b in &mut self.data[b_off..b_off + n_out] {
                *b = 0.0;
            }
        }
    }

    /// Overwrites the final layer's bias vector.
    pub fn set_output_bias(&mut self, bias: f64) {
        let l = self.dims.len() - 1;
        let (_, b_off) = self.offsets[l];
        let n_out = self.dims[l].1;
        for b in &mut self.data[b_off..b_off + n_out] {
            *b = bias;
        }
    }

    #[inline]
    fn weights(&self, layer: usize) -> &[f64] {
        let (w_off, b_off) = self.offsets[layer];
        &self.data[w_off..b_off]
    }

    #[inline]
    fn biases(&self, layer: usize) -> &[f64] {
        let (_, b_off) = self.offsets[layer];
        let n_out = self.dims[layer].1;
        &self.data[b_off..b_off + n_out]
    }

    /// Runs the network, recording per-layer activations in `cache`.
    /// Returns the output slice (the final, unactivated affine layer).
    pub fn forward<'c>(&self, input: &[f64], cache: &'c mut MlpCache) -> Result<&'c [f64]> {
        if input.len() != self.input_len() {
            return Err(Error::domain(format!(
                "mlp input length {} does not match first layer width {}",
                input.len(),
                self.input_len()
            )));
        }
        cache.resize_for(self);
        cache.acts[0].copy_from_slice(input);
        for l in 0..self.dims.len() {
            let (n_in, n_out) = self.dims[l];
            let w = self.weights(l);
            let b = self.biases(l);
            let last = l + 1 == self.dims.len();
            let (before, after) = cache.acts.split_at_mut(l + 1);
            let x = &before[l];
            let out = &mut after[0];
            for i in 0..n_out {
                let row = &w[i * n_in..(i + 1) * n_in];
                let mut acc = b[i];
                for (wj, xj) in row.iter().zip(x.iter()) {
                    acc += wj * xj;
                }
                out[i] = if last { acc } else { acc.max(0.0) };
            }
        }
        Ok(cache.acts.last().unwrap())
    }

    /// Reverse pass from a forward `cache` of the same input. Accumulates
    /// parameter gradients into `sink` under `group` and writes the
    /// gradient w.r.t. the network input into `input_grad`.
    pub fn backward(
        &self,
        cache: &MlpCache,
        upstream: &[f64],
        group: ParamGroup,
        sink: &mut impl GradientSink,
        input_grad: &mut [f64],
    ) -> Result<()> {
        if cache.acts.len() != self.dims.len() + 1
            || cache.acts.last().map(Vec::len) != Some(self.output_len())
        {
            return Err(Error::domain("mlp backward cache does not match network shape"));
        }
        if upstream.len() != self.output_len() || input_grad.len() != self.input_len() {
            return Err(Error::domain("mlp backward gradient lengths mismatch"));
        }
        let mut delta = upstream.to_vec();
        for l in (0..self.dims.len()).rev() {
            let (n_in, n_out) = self.dims[l];
            let (w_off, b_off) = self.offsets[l];
            let w = self.weights(l);
            let x = &cache.acts[l];
            // Parameter gradients.
            for i in 0..n_out {
                let d = delta[i];
                if d != 0.0 {
                    let row = w_off + i * n_in;
                    for j in 0..n_in {
                        sink.add(group, row + j, d * x[j]);
                    }
                }
                sink.add(group, b_off + i, d);
            }
            // Input gradient, masked by the rectifier of the previous layer.
            let mut next = vec![0.0; n_in];
            for i in 0..n_out {
                let d = delta[i];
                if d != 0.0 {
                    let row = &w[i * n_in..(i + 1) * n_in];
                    for (nj, wj) in next.iter_mut().zip(row.iter()) {
                        *nj += d * wj;
                    }
                }
            }
            if l > 0 {
                for (nj, &a) in next.iter_mut().zip(cache.acts[l].iter()) {
                    if a <= 0.0 {
                        *nj = 0.0;
                    }
                }
            }
            delta = next;
        }
        input_grad.copy_from_slice(&delta);
        Ok(())
    }
}

/// Per-layer activation storage, reusable across forward calls.
#[derive(Debug, Clone, Default)]
pub struct MlpCache {
    acts: Vec<Vec<f64>>,
}

impl MlpCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn resize_for(&mut self, mlp: &MlpParams) {
        let want = mlp.dims.len() + 1;
        self.acts.resize_with(want, Vec::new);
        self.acts[0].resize(mlp.input_len(), 0.0);
        for (l, &(_, n_out)) in mlp.dims.iter().enumerate() {
            self.acts[l + 1].resize(n_out, 0.0);
        }
    }

    pub fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Sin/cos features of a unit direction over `bands` octave frequencies.
/// Output layout: per axis, `sin(2^j d), cos(2^j d)` for each band.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DirectionEncoding {
    pub bands: usize,
}

impl DirectionEncoding {
    pub fn output_len(&self) -> usize {
        6 * self.bands
    }

    pub fn encode_into(&self, d: Vec3, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.output_len());
        let mut k = 0;
        for axis in 0..3 {
            let mut scaled = d[axis];
            for _ in 0..self.bands {
                out[k] = scaled.sin();
                out[k + 1] = scaled.cos();
                k += 2;
                scaled *= 2.0;
            }
        }
    }
}
