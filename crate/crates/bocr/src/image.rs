//! 8-bit grayscale images and their file formats.
//!
//! Intensity convention: 0 is black ink, 255 is white paper. Binary PGM
//! (P5) is read and written by this module directly so the byte layout is
//! fully under our control; PNG input goes through the `image` crate and
//! must already be 8-bit grayscale — color inputs are rejected rather than
//! silently converted.

use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput(format!(
                "image dimensions must be at least 1x1, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "pixel buffer has {} bytes for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    /// Solid image of one intensity.
    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        GrayImage::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.pixels[y * self.width + x] = value;
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.pixels[y * self.width..(y + 1) * self.width]
    }

    /// Copy out the half-open window `[left, right) × [top, bottom)`.
    pub fn crop(&self, top: usize, bottom: usize, left: usize, right: usize) -> Result<GrayImage> {
        if top >= bottom || left >= right || bottom > self.height || right > self.width {
            return Err(Error::InvalidInput(format!(
                "crop window t{top} b{bottom} l{left} r{right} invalid for {}x{}",
                self.width, self.height
            )));
        }
        let mut pixels = Vec::with_capacity((bottom - top) * (right - left));
        for y in top..bottom {
            pixels.extend_from_slice(&self.row(y)[left..right]);
        }
        GrayImage::new(right - left, bottom - top, pixels)
    }

    /// Bilinear rescale to an exact target size. Sample positions use the
    /// usual pixel-center mapping `src = (dst + 0.5)·scale − 0.5`, clamped
    /// at the borders; results round to nearest.
    pub fn resize_bilinear(&self, new_width: usize, new_height: usize) -> Result<GrayImage> {
        if new_width == 0 || new_height == 0 {
            return Err(Error::InvalidInput(
                "resize target must be at least 1x1".into(),
            ));
        }
        let sx = self.width as f64 / new_width as f64;
        let sy = self.height as f64 / new_height as f64;
        let mut pixels = Vec::with_capacity(new_width * new_height);
        for dy in 0..new_height {
            let fy = ((dy as f64 + 0.5) * sy - 0.5).clamp(0.0, (self.height - 1) as f64);
            let y0 = fy.floor() as usize;
            let y1 = (y0 + 1).min(self.height - 1);
            let wy = fy - y0 as f64;
            for dx in 0..new_width {
                let fx = ((dx as f64 + 0.5) * sx - 0.5).clamp(0.0, (self.width - 1) as f64);
                let x0 = fx.floor() as usize;
                let x1 = (x0 + 1).min(self.width - 1);
                let wx = fx - x0 as f64;
                let top = self.get(x0, y0) as f64 * (1.0 - wx) + self.get(x1, y0) as f64 * wx;
                let bot = self.get(x0, y1) as f64 * (1.0 - wx) + self.get(x1, y1) as f64 * wx;
                let v = top * (1.0 - wy) + bot * wy;
                pixels.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
        GrayImage::new(new_width, new_height, pixels)
    }
}

/// Read a line image in PGM (P5) or PNG (8-bit grayscale) form, chosen by
/// content, not extension.
pub fn load_gray<P: AsRef<Path>>(path: P) -> Result<GrayImage> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.starts_with(b"P5") {
        return decode_pgm(&bytes);
    }
    let decoded = image::load_from_memory(&bytes)
        .map_err(|e| Error::Image(format!("{}: {e}", path.display())))?;
    match decoded {
        image::DynamicImage::ImageLuma8(img) => {
            let (w, h) = (img.width() as usize, img.height() as usize);
            GrayImage::new(w, h, img.into_raw())
        }
        other => Err(Error::Image(format!(
            "{}: {:?} input not supported; convert to 8-bit grayscale first",
            path.display(),
            other.color()
        ))),
    }
}

/// Write binary PGM (P5), maxval 255.
pub fn save_pgm<P: AsRef<Path>>(img: &GrayImage, path: P) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    write!(out, "P5\n{} {}\n255\n", img.width, img.height)?;
    out.write_all(&img.pixels)?;
    out.flush()?;
    Ok(())
}

fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    // Header: "P5" then width, height, maxval as whitespace-separated
    // tokens with `#` comments, then a single whitespace byte and raster.
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        // Skip whitespace and comments.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Image("truncated PGM header".into()));
        }
        let token = std::str::from_utf8(&bytes[start..pos]).unwrap();
        *field = token
            .parse()
            .map_err(|_| Error::Image(format!("bad PGM header field `{token}`")))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(Error::Image(format!(
            "PGM maxval {maxval} not supported; expected 255"
        )));
    }
    pos += 1; // single whitespace after maxval
    let expected = width
        .checked_mul(height)
        .ok_or_else(|| Error::Image("PGM dimensions overflow".into()))?;
    let raster = bytes
        .get(pos..pos + expected)
        .ok_or_else(|| Error::Image("PGM raster shorter than header promises".into()))?;
    GrayImage::new(width, height, raster.to_vec())
}
