//! Binary PPM (P6, maxval 255) images and 16-bit PGM (P5) depth maps.
//!
//! Depth maps record their world-units-per-count factor in a header
//! comment line `# scale <f>`, and 16-bit PGM samples are big-endian as
//! the format requires.

use super::image::{DepthImage, Image};
use crate::error::{Error, Result};
use std::io::Write;
use std::path::Path;

fn quantize_channel(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn write_ppm(path: &Path, image: &Image) -> Result<()> {
    let mut buf = Vec::with_capacity(32 + image.pixels.len() * 3);
    write!(buf, "P6\n{} {}\n255\n", image.width, image.height)?;
    for px in &image.pixels {
        buf.extend_from_slice(&[
            quantize_channel(px[0]),
            quantize_channel(px[1]),
            quantize_channel(px[2]),
        ]);
    }
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn write_pgm(path: &Path, depth: &DepthImage) -> Result<()> {
    let mut buf = Vec::with_capacity(64 + depth.values.len() * 2);
    write!(buf, "P5\n# scale {}\n{} {}\n65535\n", depth.scale, depth.width, depth.height)?;
    for v in &depth.values {
        buf.extend_from_slice(&v.to_be_bytes());
    }
    std::fs::write(path, buf)?;
    Ok(())
}

/// Pulls the next whitespace-delimited token, skipping `#` comments.
/// Returns the token bytes and the remainder offset.
fn next_token(data: &[u8], mut pos: usize) -> Result<(String, usize)> {
    loop {
        while pos < data.len() && data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < data.len() && data[pos] == b'#' {
            while pos < data.len() && data[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        break;
    }
    let start = pos;
    while pos < data.len() && !data[pos].is_ascii_whitespace() {
        pos += 1;
    }
    if start == pos {
        return Err(Error::Format("unexpected end of PNM header".into()));
    }
    Ok((String::from_utf8_lossy(&data[start..pos]).into_owned(), pos))
}

/// Scans header comments for `# scale <f>`.
fn find_scale(data: &[u8], header_end: usize) -> Option<f64> {
    let header = String::from_utf8_lossy(&data[..header_end]);
    for line in header.lines() {
        if let Some(rest) = line.trim().strip_prefix("# scale ") {
            if let Ok(v) = rest.trim().parse() {
                return Some(v);
            }
        }
    }
    None
}

pub fn read_ppm(path: &Path) -> Result<Image> {
    let data = std::fs::read(path)?;
    let (magic, pos) = next_token(&data, 0)?;
    if magic != "P6" {
        return Err(Error::Format(format!("expected P6 magic, got `{magic}`")));
    }
    let (w, pos) = next_token(&data, pos)?;
    let (h, pos) = next_token(&data, pos)?;
    let (maxval, pos) = next_token(&data, pos)?;
    if maxval != "255" {
        return Err(Error::Format(format!("expected maxval 255, got `{maxval}`")));
    }
    let width: usize =
        w.parse().map_err(|_| Error::Format(format!("bad PPM width `{w}`")))?;
    let height: usize =
        h.parse().map_err(|_| Error::Format(format!("bad PPM height `{h}`")))?;
    let body = pos + 1; // single whitespace byte after maxval
    let need = width * height * 3;
    if data.len() < body + need {
        return Err(Error::Format("PPM payload truncated".into()));
    }
    let mut image = Image::new(width, height);
    for (i, px) in image.pixels.iter_mut().enumerate() {
        for ch in 0..3 {
            px[ch] = data[body + i * 3 + ch] as f64 / 255.0;
        }
    }
    Ok(image)
}

pub fn read_pgm(path: &Path) -> Result<DepthImage> {
    let data = std::fs::read(path)?;
    let (magic, pos) = next_token(&data, 0)?;
    if magic != "P5" {
        return Err(Error::Format(format!("expected P5 magic, got `{magic}`")));
    }
    let (w, pos) = next_token(&data, pos)?;
    let (h, pos) = next_token(&data, pos)?;
    let (maxval, pos) = next_token(&data, pos)?;
    if maxval != "65535" {
        return Err(Error::Format(format!("expected maxval 65535, got `{maxval}`")));
    }
    let width: usize =
        w.parse().map_err(|_| Error::Format(format!("bad PGM width `{w}`")))?;
    let height: usize =
        h.parse().map_err(|_| Error::Format(format!("bad PGM height `{h}`")))?;
    let scale = find_scale(&data, pos).unwrap_or(1.0);
    let body = pos + 1;
    let need = width * height * 2;
    if data.len() < body + need {
        return Err(Error::Format("PGM payload truncated".into()));
    }
    let values = (0..width * height)
        .map(|i| u16::from_be_bytes([data[body + i * 2], data[body + i * 2 + 1]]))
        .collect();
    Ok(DepthImage { width, height, scale, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_write_read_write_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let mut img = Image::new(4, 3);
        for (i, px) in img.pixels.iter_mut().enumerate() {
            *px = [i as f64 / 11.0, 1.0 - i as f64 / 11.0, 0.5];
        }
        let p1 = dir.path().join("a.ppm");
        let p2 = dir.path().join("b.ppm");
        write_ppm(&p1, &img).unwrap();
        let back = read_ppm(&p1).unwrap();
        write_ppm(&p2, &back).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn pgm_round_trip_preserves_scale_and_values() {
        let dir = tempfile::tempdir().unwrap();
        let depths: Vec<Option<f64>> =
            vec![Some(0.7), None, Some(12.25), Some(3.0), Some(0.01), None];
        let depth = DepthImage::quantize(3, 2, &depths);
        let p1 = dir.path().join("a.pgm");
        let p2 = dir.path().join("b.pgm");
        write_pgm(&p1, &depth).unwrap();
        let back = read_pgm(&p1).unwrap();
        assert_eq!(back, depth);
        write_pgm(&p2, &back).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn malformed_headers_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.ppm");
        std::fs::write(&p, b"P3\n2 2\n255\n").unwrap();
        assert!(read_ppm(&p).is_err());
        std::fs::write(&p, b"P6\n2 2\n255\nxx").unwrap();
        assert!(read_ppm(&p).is_err());
    }
}
