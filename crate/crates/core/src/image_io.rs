//! Raster loading, intensity normalization and resizing.
//!
//! Supported inputs are PGM (P2/P5, maxval up to 65535) and PNG
//! (grayscale, gray+alpha, RGB, RGBA or palette; 1 to 16 bits). Color
//! pixels are reduced to luma with integer weights 299/587/114 and
//! half-up rounding, which is exact for every 8- and 16-bit input.

use std::io::Cursor;
use std::path::Path;

use crate::error::{Error, Result};

/// Decoded single-channel raster at its native bit depth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImage {
    pub width: usize,
    pub height: usize,
    pub bit_depth: u8,
    pub samples: Vec<u16>,
}

/// Normalized 8-bit grayscale raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResizeMode {
    Bilinear,
    Nearest,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::InvalidValue(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        GrayImage {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: u8) {
        self.pixels[row * self.width + col] = value;
    }

    /// Binary PGM (P5) encoding.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }
}

impl RawImage {
    fn validate(self) -> std::result::Result<Self, String> {
        if self.width == 0 || self.height == 0 {
            return Err("image has zero size".into());
        }
        if self.samples.len() != self.width * self.height {
            return Err("truncated pixel data".into());
        }
        Ok(self)
    }
}

/// Reads a PGM or PNG file into a single-channel raster.
pub fn load_grayscale(path: impl AsRef<Path>) -> Result<RawImage> {
    let path = path.as_ref();
    let fail = |reason: String| Error::Image {
        path: path.to_path_buf(),
        reason,
    };
    let bytes = std::fs::read(path).map_err(|e| fail(e.to_string()))?;
    decode_grayscale(&bytes).map_err(fail)
}

/// Decodes in-memory PGM or PNG bytes, sniffing the format from the magic.
pub fn decode_grayscale(bytes: &[u8]) -> std::result::Result<RawImage, String> {
    if bytes.starts_with(b"\x89PNG") {
        decode_png(bytes)
    } else if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
        decode_pgm(bytes)
    } else {
        Err("unsupported format (expected PGM P2/P5 or PNG)".into())
    }
}

fn decode_pgm(bytes: &[u8]) -> std::result::Result<RawImage, String> {
    let mut pos = 2;
    let mut header = [0usize; 3];
    for field in header.iter_mut() {
        *field = next_ascii_uint(bytes, &mut pos)?.ok_or("truncated PGM header")?;
    }
    let [width, height, maxval] = header;
    if maxval == 0 || maxval > 65535 {
        return Err(format!("PGM maxval {maxval} out of range 1..=65535"));
    }
    let n = width.checked_mul(height).ok_or("PGM dimensions overflow")?;
    let mut samples = Vec::with_capacity(n);
    if bytes[1] == b'2' {
        for _ in 0..n {
            let v = next_ascii_uint(bytes, &mut pos)?.ok_or("truncated data")?;
            if v > maxval {
                return Err(format!("sample {v} exceeds maxval {maxval}"));
            }
            samples.push(v as u16);
        }
    } else {
        // Exactly one whitespace byte separates maxval from the raster.
        pos += 1;
        let wide = maxval > 255;
        let need = if wide { 2 * n } else { n };
        let data = bytes.get(pos..pos + need).ok_or("truncated data")?;
        if wide {
            samples.extend(
                data.chunks_exact(2)
                    .map(|c| u16::from_be_bytes([c[0], c[1]])),
            );
        } else {
            samples.extend(data.iter().map(|&b| b as u16));
        }
        if let Some(v) = samples.iter().find(|&&v| v as usize > maxval) {
            return Err(format!("sample {v} exceeds maxval {maxval}"));
        }
    }
    RawImage {
        width,
        height,
        bit_depth: if maxval > 255 { 16 } else { 8 },
        samples,
    }
    .validate()
}

/// Skips whitespace and `#` comments, then parses one unsigned integer.
fn next_ascii_uint(bytes: &[u8], pos: &mut usize) -> std::result::Result<Option<usize>, String> {
    loop {
        match bytes.get(*pos) {
            None => return Ok(None),
            Some(b'#') => {
                while bytes.get(*pos).is_some_and(|&b| b != b'\n') {
                    *pos += 1;
                }
            }
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(_) => break,
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(u8::is_ascii_digit) {
        *pos += 1;
    }
    if start == *pos {
        return Err(format!("unexpected byte 0x{:02x} in PGM", bytes[start]));
    }
    std::str::from_utf8(&bytes[start..*pos])
        .expect("ascii digits")
        .parse()
        .map(Some)
        .map_err(|e| format!("bad PGM integer: {e}"))
}

fn decode_png(bytes: &[u8]) -> std::result::Result<RawImage, String> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(|e| e.to_string())?;
    let size = reader
        .output_buffer_size()
        .ok_or("PNG too large to decode")?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(|e| e.to_string())?;
    let buf = &buf[..info.buffer_size()];
    let (width, height) = (info.width as usize, info.height as usize);
    let wide = info.bit_depth == png::BitDepth::Sixteen;
    let values: Vec<u16> = if wide {
        buf.chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    } else {
        buf.iter().map(|&b| b as u16).collect()
    };
    let channels = info.color_type.samples();
    let samples = match info.color_type {
        png::ColorType::Grayscale | png::ColorType::GrayscaleAlpha => {
            values.chunks_exact(channels).map(|p| p[0]).collect()
        }
        png::ColorType::Rgb | png::ColorType::Rgba => values
            .chunks_exact(channels)
            .map(|p| luma(p[0], p[1], p[2]))
            .collect(),
        png::ColorType::Indexed => return Err("palette PNG was not expanded".into()),
    };
    RawImage {
        width,
        height,
        bit_depth: if wide { 16 } else { 8 },
        samples,
    }
    .validate()
}

/// round(0.299 R + 0.587 G + 0.114 B), evaluated in integer thousandths.
pub fn luma(r: u16, g: u16, b: u16) -> u16 {
    let sum = 299 * r as u64 + 587 * g as u64 + 114 * b as u64;
    ((sum + 500) / 1000) as u16
}

/// Per-image linear min-max map onto 0..=255 with half-away-from-zero rounding.
/// Constant images map to all zeros.
pub fn normalize_to_u8(img: &RawImage) -> Result<GrayImage> {
    let (Some(&lo), Some(&hi)) = (img.samples.iter().min(), img.samples.iter().max()) else {
        return Err(Error::InvalidValue(
            "cannot normalize an empty image".into(),
        ));
    };
    let range = (hi - lo) as u64;
    let pixels = img
        .samples
        .iter()
        .map(|&p| {
            if range == 0 {
                0
            } else {
                // round(255 (p - lo) / range) with ties up, in exact integers.
                ((2 * 255 * (p - lo) as u64 + range) / (2 * range)) as u8
            }
        })
        .collect();
    GrayImage::new(img.width, img.height, pixels)
}

/// For each output index, the source index under center-aligned
/// nearest sampling: floor((i + 0.5) * in / out), clamped.
pub(crate) fn nearest_indices(len_in: usize, len_out: usize) -> Vec<usize> {
    (0..len_out)
        .map(|i| (((2 * i + 1) * len_in) / (2 * len_out)).min(len_in - 1))
        .collect()
}

/// Source coordinate (i + 0.5) * in / out - 0.5 clamped to the image, split
/// into a base index, the next index and the fractional weight.
fn bilinear_taps(len_in: usize, len_out: usize) -> Vec<(usize, usize, f64)> {
    (0..len_out)
        .map(|i| {
            let src = ((2 * i + 1) as f64 * len_in as f64) / (2 * len_out) as f64 - 0.5;
            let src = src.clamp(0.0, (len_in - 1) as f64);
            let base = src.floor() as usize;
            (base, (base + 1).min(len_in - 1), src - base as f64)
        })
        .collect()
}

pub fn resize(img: &GrayImage, out_w: usize, out_h: usize, mode: ResizeMode) -> Result<GrayImage> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::ZeroDimension(out_w, out_h));
    }
    if (out_w, out_h) == img.dims() {
        return Ok(img.clone());
    }
    let mut pixels = Vec::with_capacity(out_w * out_h);
    match mode {
        ResizeMode::Nearest => {
            let cols = nearest_indices(img.width, out_w);
            let rows = nearest_indices(img.height, out_h);
            for &r in &rows {
                pixels.extend(cols.iter().map(|&c| img.get(r, c)));
            }
        }
        ResizeMode::Bilinear => {
            let cols = bilinear_taps(img.width, out_w);
            let rows = bilinear_taps(img.height, out_h);
            for &(r0, r1, fy) in &rows {
                for &(c0, c1, fx) in &cols {
                    let top = (1.0 - fx) * img.get(r0, c0) as f64 + fx * img.get(r0, c1) as f64;
                    let bottom = (1.0 - fx) * img.get(r1, c0) as f64 + fx * img.get(r1, c1) as f64;
                    let v = (1.0 - fy) * top + fy * bottom;
                    pixels.push(v.round().clamp(0.0, 255.0) as u8);
                }
            }
        }
    }
    GrayImage::new(out_w, out_h, pixels)
}

/// Grayscale 8-bit PNG encoding.
pub fn encode_png_gray(img: &GrayImage) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width as u32, img.height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().expect("in-memory PNG header");
        writer
            .write_image_data(&img.pixels)
            .expect("in-memory PNG data");
    }
    out
}

/// RGB 8-bit PNG encoding of interleaved pixels.
pub fn encode_png_rgb(width: usize, height: usize, rgb: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().expect("in-memory PNG header");
        writer.write_image_data(rgb).expect("in-memory PNG data");
    }
    out
}
