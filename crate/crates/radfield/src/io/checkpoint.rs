//! Binary checkpoint: a 16-byte magic/version header followed by fixed
//! sections in a documented order. Scalar arrays are little-endian f32;
//! shape metadata uses little-endian integers and f64.
//!
//! Section order:
//!  1. scene bounds (fg box, enlargement) and render parameters
//!  2. foreground density grid (dims, raws)
//!  3. background density grid (dims, raws), when backgrounds are enabled
//!  4. foreground color tables, level-major (schedule metadata, data)
//!  5. background color tables, when enabled
//!  6. MLP parameters (direction bands, then each head's layer dims and
//!     flat data)
//!  7. occupancy grid (dims, maintenance params, EMA, packed bits)
//!
//! The occupancy section exists so rendering from a checkpoint reproduces
//! the exact sampling the trainer last used.

use crate::error::{Error, Result};
use crate::fields::{BackgroundDensityGrid, DensityGrid, HashFeatureGrid};
use crate::geometry::{Aabb, SceneBounds};
use crate::renderer::{ColorModel, DirectionEncoding, MlpParams};
use crate::sampler::{OccupancyGrid, OccupancyParams};
use crate::scene::{BackgroundFields, RenderParams, SceneModel};
use crate::Vec3;
use std::path::Path;

const MAGIC: &[u8; 8] = b"RFCHKPT\0";
const VERSION: u32 = 1;

const FLAG_BG: u32 = 1;
const FLAG_DECOMPOSED: u32 = 2;

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new() -> Self {
        Self { buf: Vec::new() }
    }

    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn vec3(&mut self, v: Vec3) {
        self.f64(v.x);
        self.f64(v.y);
        self.f64(v.z);
    }

    fn f32_array(&mut self, values: &[f64]) {
        self.u64(values.len() as u64);
        for &v in values {
            self.buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }

    fn bit_array(&mut self, bits: &[bool]) {
        self.u64(bits.len() as u64);
        let mut byte = 0u8;
        for (i, &b) in bits.iter().enumerate() {
            if b {
                byte |= 1 << (i % 8);
            }
            if i % 8 == 7 {
                self.buf.push(byte);
                byte = 0;
            }
        }
        if bits.len() % 8 != 0 {
            self.buf.push(byte);
        }
    }

    fn mlp(&mut self, mlp: &MlpParams) {
        self.u32(mlp.dims.len() as u32);
        for &(n_in, n_out) in &mlp.dims {
            self.u32(n_in as u32);
            self.u32(n_out as u32);
        }
        self.f32_array(&mlp.data);
    }

    fn hash_grid(&mut self, grid: &HashFeatureGrid) {
        self.u32(grid.dim as u32);
        self.u32(grid.levels as u32);
        self.u32(grid.features as u32);
        self.u32(grid.table_size.trailing_zeros());
        self.u32(grid.base_resolution as u32);
        self.f64(grid.growth_factor);
        self.f32_array(&grid.data);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Format("checkpoint truncated".into()));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn vec3(&mut self) -> Result<Vec3> {
        Ok(Vec3::new(self.f64()?, self.f64()?, self.f64()?))
    }

    fn f32_array(&mut self) -> Result<Vec<f64>> {
        let len = self.u64()? as usize;
        let raw = self.take(len * 4)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect())
    }

    fn bit_array(&mut self) -> Result<Vec<bool>> {
        let len = self.u64()? as usize;
        let raw = self.take(len.div_ceil(8))?;
        Ok((0..len).map(|i| raw[i / 8] & (1 << (i % 8)) != 0).collect())
    }

    fn mlp(&mut self) -> Result<MlpParams> {
        let layers = self.u32()? as usize;
        let mut widths = Vec::with_capacity(layers + 1);
        for l in 0..layers {
            let n_in = self.u32()? as usize;
            let n_out = self.u32()? as usize;
            if l == 0 {
                widths.push(n_in);
            } else if widths[l] != n_in {
                return Err(Error::Format("checkpoint MLP layer dims are inconsistent".into()));
            }
            widths.push(n_out);
        }
        let mut mlp = MlpParams::new(&widths)?;
        let data = self.f32_array()?;
        if data.len() != mlp.data.len() {
            return Err(Error::Format("checkpoint MLP data length mismatch".into()));
        }
        mlp.data = data;
        Ok(mlp)
    }

    fn hash_grid(&mut self) -> Result<HashFeatureGrid> {
        let dim = self.u32()? as usize;
        let levels = self.u32()? as usize;
        let features = self.u32()? as usize;
        let table_log2 = self.u32()?;
        let base = self.u32()? as usize;
        let growth = self.f64()?;
        let mut grid = HashFeatureGrid::new(dim, levels, features, 1usize << table_log2, base, growth)?;
        let data = self.f32_array()?;
        if data.len() != grid.data.len() {
            return Err(Error::Format("checkpoint hash table length mismatch".into()));
        }
        grid.data = data;
        Ok(grid)
    }
}

pub fn save_checkpoint(path: &Path, model: &SceneModel, occ: &OccupancyGrid) -> Result<()> {
    let mut w = Writer::new();
    w.buf.extend_from_slice(MAGIC);
    w.u32(VERSION);
    let mut flags = 0u32;
    if model.bg.is_some() {
        flags |= FLAG_BG;
    }
    if matches!(model.color, ColorModel::Decomposed { .. }) {
        flags |= FLAG_DECOMPOSED;
    }
    w.u32(flags);

    // Bounds and render parameters.
    w.vec3(model.bounds.fg.min);
    w.vec3(model.bounds.fg.max);
    w.vec3(model.bounds.enlargement);
    w.f64(model.render.step);
    w.u32(model.render.bg_samples as u32);
    for ch in 0..3 {
        w.f64(model.render.bg_fill[ch]);
    }
    w.f64(model.render.termination);

    // Foreground density.
    for r in model.fg_density.resolution {
        w.u32(r as u32);
    }
    w.f32_array(&model.fg_density.raw);

    // Background density.
    if let Some(bg) = &model.bg {
        for r in bg.density.resolution {
            w.u32(r as u32);
        }
        w.f32_array(&bg.density.raw);
    }

    // Color tables, foreground then background.
    w.hash_grid(&model.fg_color);
    if let Some(bg) = &model.bg {
        w.hash_grid(&bg.color);
    }

    // MLP parameters.
    match &model.color {
        ColorModel::Decomposed { vi, vd, encoding } => {
            w.u32(encoding.bands as u32);
            w.mlp(vi);
            w.mlp(vd);
        }
        ColorModel::Entangled { head, encoding } => {
            w.u32(encoding.bands as u32);
            w.mlp(head);
        }
    }

    // Occupancy.
    for r in occ.resolution {
        w.u32(r as u32);
    }
    w.u64(occ.params.update_interval);
    w.f64(occ.params.decay);
    w.f64(occ.params.occ_threshold);
    w.f32_array(&occ.ema);
    w.bit_array(&occ.bits);

    std::fs::write(path, w.buf)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(SceneModel, OccupancyGrid)> {
    let data = std::fs::read(path)?;
    let mut r = Reader { buf: &data, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Format("not a checkpoint file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let flags = r.u32()?;
    let has_bg = flags & FLAG_BG != 0;
    let decomposed = flags & FLAG_DECOMPOSED != 0;

    let fg_min = r.vec3()?;
    let fg_max = r.vec3()?;
    let enlargement = r.vec3()?;
    let bounds = SceneBounds::new(Aabb::new(fg_min, fg_max)?, enlargement)?;
    let step = r.f64()?;
    let bg_samples = r.u32()? as usize;
    let mut bg_fill = [0.0; 3];
    for slot in &mut bg_fill {
        *slot = r.f64()?;
    }
    let termination = r.f64()?;
    let render = RenderParams { step, bg_samples, bg_fill, termination };

    let mut fg_res = [0usize; 3];
    for slot in &mut fg_res {
        *slot = r.u32()? as usize;
    }
    let mut fg_density = DensityGrid::new(bounds.fg, fg_res, 0.0)?;
    let raw = r.f32_array()?;
    if raw.len() != fg_density.raw.len() {
        return Err(Error::Format("foreground density length mismatch".into()));
    }
    fg_density.raw = raw;

    let bg_density = if has_bg {
        let mut res = [0usize; 4];
        for slot in &mut res {
            *slot = r.u32()? as usize;
        }
        let mut grid = BackgroundDensityGrid::new(res, 0.0)?;
        let raw = r.f32_array()?;
        if raw.len() != grid.raw.len() {
            return Err(Error::Format("background density length mismatch".into()));
        }
        grid.raw = raw;
        Some(grid)
    } else {
        None
    };

    let fg_color = r.hash_grid()?;
    let bg_color = if has_bg { Some(r.hash_grid()?) } else { None };

    let bands = r.u32()? as usize;
    let encoding = DirectionEncoding { bands };
    let color = if decomposed {
        let vi = r.mlp()?;
        let vd = r.mlp()?;
        ColorModel::Decomposed { vi, vd, encoding }
    } else {
        ColorModel::Entangled { head: r.mlp()?, encoding }
    };

    let mut occ_res = [0usize; 3];
    for slot in &mut occ_res {
        *slot = r.u32()? as usize;
    }
    let params = OccupancyParams {
        update_interval: r.u64()?,
        decay: r.f64()?,
        occ_threshold: r.f64()?,
    };
    let ema = r.f32_array()?;
    let bits = r.bit_array()?;
    let expected: usize = occ_res.iter().product();
    if ema.len() != expected || bits.len() != expected {
        return Err(Error::Format("occupancy grid length mismatch".into()));
    }
    let occ = OccupancyGrid { bbox: bounds.bg, resolution: occ_res, bits, ema, params };

    let bg = match (bg_density, bg_color) {
        (Some(density), Some(color)) => Some(BackgroundFields { density, color }),
        _ => None,
    };
    let model = SceneModel { bounds, fg_density, fg_color, bg, color, render };
    if r.pos != data.len() {
        return Err(Error::Format("trailing bytes after checkpoint payload".into()));
    }
    Ok((model, occ))
}
