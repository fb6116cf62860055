//! In-memory image types. Color lives in `[0, 1]` doubles; depth maps are
//! stored quantized exactly as they appear on disk so write/read round
//! trips are lossless.

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    /// Row-major RGB pixels.
    pub pixels: Vec<[f64; 3]>,
}

impl Image {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, pixels: vec![[0.0; 3]; width * height] }
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, value: [f64; 3]) {
        self.pixels[y * self.width + x] = value;
    }

    /// Mean absolute channel difference against another image of the same
    /// size.
    pub fn mean_abs_diff(&self, other: &Image) -> f64 {
        assert_eq!(self.pixels.len(), other.pixels.len());
        let mut acc = 0.0;
        for (a, b) in self.pixels.iter().zip(&other.pixels) {
            for ch in 0..3 {
                acc += (a[ch] - b[ch]).abs();
            }
        }
        acc / (3 * self.pixels.len()) as f64
    }
}

/// 16-bit quantized depth map with its world-units-per-count scale.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    /// World units per quantization step.
    pub scale: f64,
    /// Row-major quantized depths; 0 means no hit.
    pub values: Vec<u16>,
}

impl DepthImage {
    /// Quantizes raw depths (`None` entries mean no hit). The scale maps
    /// the maximum depth to the top of the 16-bit range.
    pub fn quantize(width: usize, height: usize, depths: &[Option<f64>]) -> Self {
        assert_eq!(depths.len(), width * height);
        let max = depths.iter().flatten().fold(0.0f64, |m, &d| m.max(d));
        let scale = if max > 0.0 { max / 65535.0 } else { 1.0 };
        let values = depths
            .iter()
            .map(|d| match d {
                Some(d) => ((d / scale).round() as u64).clamp(1, 65535) as u16,
                None => 0,
            })
            .collect();
        Self { width, height, scale, values }
    }

    pub fn depth_at(&self, x: usize, y: usize) -> Option<f64> {
        match self.values[y * self.width + x] {
            0 => None,
            v => Some(v as f64 * self.scale),
        }
    }
}
