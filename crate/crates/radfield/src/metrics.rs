//! Image quality metrics: PSNR and single-scale SSIM on `[0, 1]` images.

use crate::error::{Error, Result};
use crate::io::Image;

/// PSNR cap reported for (near-)identical images.
pub const PSNR_SENTINEL: f64 = 99.0;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

fn check_dims(pred: &Image, target: &Image) -> Result<()> {
    if pred.width != target.width || pred.height != target.height {
        return Err(Error::domain(format!(
            "image dimensions differ: {}x{} vs {}x{}",
            pred.width, pred.height, target.width, target.height
        )));
    }
    Ok(())
}

/// Peak signal-to-noise ratio in dB over all channels, capped at the
/// sentinel for identical inputs.
pub fn psnr(pred: &Image, target: &Image) -> Result<f64> {
    check_dims(pred, target)?;
    let mut mse = 0.0;
    for (a, b) in pred.pixels.iter().zip(&target.pixels) {
        for ch in 0..3 {
            let d = a[ch] - b[ch];
            mse += d * d;
        }
    }
    mse /= (3 * pred.pixels.len()) as f64;
    if mse == 0.0 {
        return Ok(PSNR_SENTINEL);
    }
    Ok((-10.0 * mse.log10()).min(PSNR_SENTINEL))
}

fn to_gray(image: &Image) -> Vec<f64> {
    image.pixels.iter().map(|p| (p[0] + p[1] + p[2]) / 3.0).collect()
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW * SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW * SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for y in 0..SSIM_WINDOW {
        for x in 0..SSIM_WINDOW {
            let d2 = (x as f64 - c).powi(2) + (y as f64 - c).powi(2);
            let v = (-d2 / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
            k[y * SSIM_WINDOW + x] = v;
            sum += v;
        }
    }
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Mean local SSIM over valid window positions (no padding), computed on
/// the channel-mean grayscale with an 11x11 Gaussian window (sigma 1.5).
pub fn ssim(pred: &Image, target: &Image) -> Result<f64> {
    check_dims(pred, target)?;
    if pred.width < SSIM_WINDOW || pred.height < SSIM_WINDOW {
        return Err(Error::domain(format!(
            "images must be at least {SSIM_WINDOW}x{SSIM_WINDOW} for SSIM"
        )));
    }
    let gx = to_gray(pred);
    let gy = to_gray(target);
    let kernel = gaussian_kernel();
    let (w, h) = (pred.width, pred.height);
    let mut total = 0.0;
    let mut count = 0usize;
    for wy in 0..=(h - SSIM_WINDOW) {
        for wx in 0..=(w - SSIM_WINDOW) {
            let mut mx = 0.0;
            let mut my = 0.0;
            let mut mxx = 0.0;
            let mut myy = 0.0;
            let mut mxy = 0.0;
            for ky in 0..SSIM_WINDOW {
                let row = (wy + ky) * w + wx;
                let krow = ky * SSIM_WINDOW;
                for kx in 0..SSIM_WINDOW {
                    let kw = kernel[krow + kx];
                    let a = gx[row + kx];
                    let b = gy[row + kx];
                    mx += kw * a;
                    my += kw * b;
                    mxx += kw * a * a;
                    myy += kw * b * b;
                    mxy += kw * a * b;
                }
            }
            let vx = mxx - mx * mx;
            let vy = myy - my * my;
            let cov = mxy - mx * my;
            let s = ((2.0 * mx * my + SSIM_C1) * (2.0 * cov + SSIM_C2))
                / ((mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2));
            total += s;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn uniform(width: usize, height: usize, v: f64) -> Image {
        let mut img = Image::new(width, height);
        for p in &mut img.pixels {
            *p = [v; 3];
        }
        img
    }

    #[test]
    fn psnr_reference_points() {
        let a = uniform(8, 8, 0.5);
        let mut b = a.clone();
        for p in &mut b.pixels {
            *p = [0.6; 3]; // MSE = 0.01
        }
        assert_relative_eq!(psnr(&a, &b).unwrap(), 20.0, epsilon = 1e-9);
        assert_eq!(psnr(&a, &a).unwrap(), PSNR_SENTINEL);
        let black = uniform(8, 8, 0.0);
        let white = uniform(8, 8, 1.0);
        assert_relative_eq!(psnr(&black, &white).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn psnr_rejects_dimension_mismatch() {
        assert!(psnr(&uniform(4, 4, 0.0), &uniform(4, 5, 0.0)).is_err());
    }

    #[test]
    fn ssim_identical_and_constant_images() {
        let img = uniform(16, 16, 0.3);
        assert_relative_eq!(ssim(&img, &img).unwrap(), 1.0, epsilon = 1e-12);
        let other = uniform(16, 16, 0.3);
        assert_relative_eq!(ssim(&img, &other).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ssim_of_negated_checkerboard_is_negative() {
        let mut a = Image::new(16, 16);
        let mut b = Image::new(16, 16);
        for y in 0..16 {
            for x in 0..16 {
                let v = if (x + y) % 2 == 0 { 1.0 } else { 0.0 };
                a.set_pixel(x, y, [v; 3]);
                b.set_pixel(x, y, [1.0 - v; 3]);
            }
        }
        assert!(ssim(&a, &b).unwrap() < 0.0);
    }

    #[test]
    fn ssim_rejects_small_images() {
        assert!(ssim(&uniform(8, 8, 0.1), &uniform(8, 8, 0.1)).is_err());
    }
}
