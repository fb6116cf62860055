//! Multi-resolution hashed feature grids for color embeddings.
//!
//! Each of the `L` levels is a virtual lattice of `N_l` cells per axis.
//! Levels small enough to fit their vertices in the table are stored dense
//! and collision-free; larger levels hash lattice coordinates into a
//! fixed-size table. Querying multi-linearly interpolates the `2^dim`
//! corner feature rows per level and concatenates the level outputs.

use super::grad::{GradientSink, ParamGroup};
use crate::error::{Error, Result};
use rand::Rng;

/// Fixed odd multipliers for the coordinate XOR fold, one per axis. The
/// first axis uses 1 so dense-ish coordinates stay well spread.
const HASH_PRIMES: [u32; 4] = [1, 2_654_435_761, 805_459_861, 3_674_653_429];

/// Concatenated per-level features, length `L * C`.
pub type ColorEmbedding = Vec<f64>;

/// Hash slot for lattice vertex `v` of a level with `resolution` cells per
/// axis (`resolution + 1` vertices). Dense row-major indexing (x fastest)
/// when the level fits in the table, XOR-fold hashing otherwise.
#[inline]
pub fn hash_index(v: &[u32], resolution: usize, table_size: usize) -> usize {
    debug_assert!(table_size.is_power_of_two());
    let verts = resolution as u128 + 1;
    if verts.pow(v.len() as u32) <= table_size as u128 {
        let mut idx = 0usize;
        for a in (0..v.len()).rev() {
            idx = idx * (resolution + 1) + v[a] as usize;
        }
        idx
    } else {
        let mut h = 0u32;
        for (a, &coord) in v.iter().enumerate() {
            h ^= coord.wrapping_mul(HASH_PRIMES[a]);
        }
        (h as usize) & (table_size - 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct LevelMeta {
    /// Cells per axis at this level.
    resolution: usize,
    /// Feature rows actually stored (dense vertex count or `table_size`).
    rows: usize,
    /// Scalar offset of this level's rows in `data`.
    offset: usize,
    dense: bool,
}

/// `L`-level hashed feature lattice over `[0, 1]^dim`, `dim` 3 or 4.
#[derive(Debug, Clone, PartialEq)]
pub struct HashFeatureGrid {
    pub dim: usize,
    pub levels: usize,
    pub features: usize,
    pub table_size: usize,
    pub base_resolution: usize,
    pub growth_factor: f64,
    meta: Vec<LevelMeta>,
    /// All level tables, level-major: level 0 rows, then level 1, ...
    pub data: Vec<f64>,
}

impl HashFeatureGrid {
    pub fn new(
        dim: usize,
        levels: usize,
        features: usize,
        table_size: usize,
        base_resolution: usize,
        growth_factor: f64,
    ) -> Result<Self> {
        if !(dim == 3 || dim == 4) {
            return Err(Error::domain("hash grid supports dim 3 or 4"));
        }
        if !table_size.is_power_of_two() {
            return Err(Error::domain(format!("table size {table_size} is not a power of two")));
        }
        if levels == 0 || features == 0 || base_resolution == 0 || growth_factor < 1.0 {
            return Err(Error::domain("invalid hash grid schedule"));
        }
        let mut meta = Vec::with_capacity(levels);
        let mut offset = 0usize;
        for l in 0..levels {
            let resolution =
                (base_resolution as f64 * growth_factor.powi(l as i32)).floor() as usize;
            let verts = (resolution as u128 + 1).pow(dim as u32);
            let dense = verts <= table_size as u128;
            let rows = if dense { verts as usize } else { table_size };
            meta.push(LevelMeta { resolution, rows, offset, dense });
            offset += rows * features;
        }
        Ok(Self {
            dim,
            levels,
            features,
            table_size,
            base_resolution,
            growth_factor,
            meta,
            data: vec![0.0; offset],
        })
    }

    /// Fills all tables uniformly in `[-1e-4, 1e-4]`.
    pub fn init_uniform(&mut self, rng: &mut impl Rng) {
        for v in &mut self.data {
            *v = rng.gen_range(-1e-4..1e-4);
        }
    }

    /// Output embedding length `L * C`.
    pub fn embedding_len(&self) -> usize {
        self.levels * self.features
    }

    pub fn level_resolution(&self, level: usize) -> usize {
        self.meta[level].resolution
    }

    pub fn level_is_dense(&self, level: usize) -> bool {
        self.meta[level].dense
    }

    /// Rows stored for a level (dense vertex count or the table size).
    pub fn level_rows(&self, level: usize) -> usize {
        self.meta[level].rows
    }

    pub fn level_offset(&self, level: usize) -> usize {
        self.meta[level].offset
    }

    fn check_range(&self, x: &[f64]) -> Result<()> {
        debug_assert_eq!(x.len(), self.dim);
        for &c in x {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::domain(format!("hash query coordinate {c} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Interpolated embedding at `x` in `[0, 1]^dim`, written to `out`
    /// (length `L * C`).
    pub fn encode_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_range(x)?;
        debug_assert_eq!(out.len(), self.embedding_len());
        out.fill(0.0);
        self.visit_corners(x, |level, corner_row, weight| {
            let base = self.meta[level].offset + corner_row * self.features;
            let dst = &mut out[level * self.features..(level + 1) * self.features];
            for (f, slot) in dst.iter_mut().enumerate() {
                *slot += weight * self.data[base + f];
            }
        });
        Ok(())
    }

    pub fn encode(&self, x: &[f64]) -> Result<ColorEmbedding> {
        let mut out = vec![0.0; self.embedding_len()];
        self.encode_into(x, &mut out)?;
        Ok(out)
    }

    /// Adjoint of `encode_into`: scatters `upstream` (length `L * C`)
    /// through the interpolation weights into the touched table rows.
    /// Colliding vertices naturally receive summed contributions.
    pub fn encode_backward(
        &self,
        x: &[f64],
        upstream: &[f64],
        group: ParamGroup,
        sink: &mut impl GradientSink,
    ) -> Result<()> {
        self.check_range(x)?;
        debug_assert_eq!(upstream.len(), self.embedding_len());
        self.visit_corners(x, |level, corner_row, weight| {
            if weight == 0.0 {
                return;
            }
            let base = self.meta[level].offset + corner_row * self.features;
            let up = &upstream[level * self.features..(level + 1) * self.features];
            for (f, &u) in up.iter().enumerate() {
                if u != 0.0 {
                    sink.add(group, base + f, weight * u);
                }
            }
        });
        Ok(())
    }

    /// Walks the `2^dim` interpolation corners of every level, passing
    /// `(level, row, weight)` to `visit`.
    fn visit_corners(&self, x: &[f64], mut visit: impl FnMut(usize, usize, f64)) {
        let dim = self.dim;
        for (level, meta) in self.meta.iter().enumerate() {
            let n = meta.resolution;
            let mut base = [0u32; 4];
            let mut frac = [0.0f64; 4];
            for a in 0..dim {
                let u = x[a] * n as f64;
                let cell = u.floor().clamp(0.0, (n - 1) as f64);
                base[a] = cell as u32;
                frac[a] = u - cell;
            }
            let mut v = [0u32; 4];
            for corner in 0..(1usize << dim) {
                let mut w = 1.0;
                for a in 0..dim {
                    let bit = ((corner >> a) & 1) as u32;
                    w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
                    v[a] = base[a] + bit;
                }
                let row = hash_index(&v[..dim], n, self.table_size);
                visit(level, row, w);
            }
        }
    }
}
