//! Grayscale face rasters, preprocessing and the two image-quality scores.
//!
//! Pixels are stored row-major as `f64` intensities in `[0, 1]`. The on-disk
//! format is binary PGM (P5, maxval 255).

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest side a [`FaceImage`] may have.
pub const MIN_SIDE: usize = 8;

/// ITU-R BT.601 luma weights.
const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ImagingError {
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("malformed PGM: {0}")]
    Pgm(String),
}

/// A grayscale raster with every pixel in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl FaceImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self, ImagingError> {
        if width < MIN_SIDE || height < MIN_SIDE {
            return Err(ImagingError::InvalidImage(format!(
                "{width}x{height} is below the {MIN_SIDE}x{MIN_SIDE} minimum"
            )));
        }
        if pixels.len() != width * height {
            return Err(ImagingError::InvalidImage(format!(
                "expected {} pixels for {width}x{height}, got {}",
                width * height,
                pixels.len()
            )));
        }
        if let Some(p) = pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(ImagingError::InvalidImage(format!("pixel value {p} outside [0,1]")));
        }
        Ok(Self { width, height, pixels })
    }

    /// Builds an image from arbitrary finite values, clamping them into `[0, 1]`.
    pub fn from_clamped(width: usize, height: usize, values: Vec<f64>) -> Result<Self, ImagingError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ImagingError::InvalidImage("non-finite pixel value".into()));
        }
        Self::new(width, height, values.into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self, ImagingError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn same_size(&self, other: &FaceImage) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Snaps every pixel to the nearest 8-bit level, i.e. what a PGM write/read
    /// round trip would produce.
    pub fn quantized(&self) -> FaceImage {
        FaceImage {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|&p| to_byte(p) as f64 / 255.0).collect(),
        }
    }

    /// Encodes as binary PGM (P5, maxval 255).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.pixels.iter().map(|&p| to_byte(p)));
        out
    }

    /// Decodes a binary PGM with maxval 255.
    pub fn from_pgm(bytes: &[u8]) -> Result<Self, ImagingError> {
        let mut cursor = PgmCursor { bytes, pos: 0 };
        if cursor.token()? != b"P5" {
            return Err(ImagingError::Pgm("missing P5 magic".into()));
        }
        let width = cursor.number()?;
        let height = cursor.number()?;
        let maxval = cursor.number()?;
        if maxval != 255 {
            return Err(ImagingError::Pgm(format!("unsupported maxval {maxval}")));
        }
        // exactly one whitespace byte separates the header from the raster
        cursor.pos += 1;
        let raster = bytes.get(cursor.pos..).ok_or_else(|| ImagingError::Pgm("truncated header".into()))?;
        if raster.len() != width * height {
            return Err(ImagingError::Pgm(format!("expected {} raster bytes, found {}", width * height, raster.len())));
        }
        Self::new(width, height, raster.iter().map(|&b| b as f64 / 255.0).collect())
    }
}

fn to_byte(p: f64) -> u8 {
    (p * 255.0).round().clamp(0.0, 255.0) as u8
}

struct PgmCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> PgmCursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<&'a [u8], ImagingError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(|b| !b.is_ascii_whitespace()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(ImagingError::Pgm("unexpected end of header".into()));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self) -> Result<usize, ImagingError> {
        let tok = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| ImagingError::Pgm(format!("bad header field {:?}", String::from_utf8_lossy(tok))))
    }
}

/// Pixel layout of a [`Raster`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channels {
    Gray,
    Rgb,
}

/// Unprocessed input raster of any size, grayscale or interleaved RGB, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub channels: Channels,
    pub data: Vec<f64>,
}

impl Raster {
    pub fn gray(width: usize, height: usize, data: Vec<f64>) -> Self {
        Self { width, height, channels: Channels::Gray, data }
    }

    pub fn rgb(width: usize, height: usize, data: Vec<f64>) -> Self {
        Self { width, height, channels: Channels::Rgb, data }
    }

    fn luminance(&self) -> Result<Vec<f64>, ImagingError> {
        if self.width == 0 || self.height == 0 {
            return Err(ImagingError::InvalidImage("zero-dimension input".into()));
        }
        let per_pixel = match self.channels {
            Channels::Gray => 1,
            Channels::Rgb => 3,
        };
        if self.data.len() != self.width * self.height * per_pixel {
            return Err(ImagingError::InvalidImage(format!(
                "raster data length {} does not match {}x{}x{per_pixel}",
                self.data.len(),
                self.width,
                self.height
            )));
        }
        if self.data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(ImagingError::InvalidImage("raster value outside [0,1]".into()));
        }
        Ok(match self.channels {
            Channels::Gray => self.data.clone(),
            Channels::Rgb => self
                .data
                .chunks_exact(3)
                .map(|c| (LUMA[0] * c[0] + LUMA[1] * c[1] + LUMA[2] * c[2]).clamp(0.0, 1.0))
                .collect(),
        })
    }
}

impl From<&FaceImage> for Raster {
    fn from(img: &FaceImage) -> Self {
        Raster::gray(img.width, img.height, img.pixels.clone())
    }
}

/// Output of [`preprocess`].
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    pub image: FaceImage,
    /// Set when the centered crop was smaller than the target side.
    pub upscaled: bool,
}

/// Converts to grayscale, center-crops to the largest centered square and
/// area-averages down (or up) to `target_side × target_side`.
pub fn preprocess(input: &Raster, target_side: usize) -> Result<Preprocessed, ImagingError> {
    if target_side < MIN_SIDE {
        return Err(ImagingError::InvalidImage(format!("target side {target_side} is below {MIN_SIDE}")));
    }
    let gray = input.luminance()?;
    let side = input.width.min(input.height);
    let x0 = (input.width - side) / 2;
    let y0 = (input.height - side) / 2;

    let weights = area_weights(side, target_side);
    // separable box filter: rows first, then columns
    let mut horizontal = vec![0.0; side * target_side];
    for y in 0..side {
        let row = &gray[(y0 + y) * input.width + x0..(y0 + y) * input.width + x0 + side];
        for (ox, taps) in weights.iter().enumerate() {
            horizontal[y * target_side + ox] = taps.iter().map(|&(i, w)| w * row[i]).sum();
        }
    }
    let mut out = vec![0.0; target_side * target_side];
    for (oy, taps) in weights.iter().enumerate() {
        for ox in 0..target_side {
            out[oy * target_side + ox] = taps.iter().map(|&(i, w)| w * horizontal[i * target_side + ox]).sum();
        }
    }
    Ok(Preprocessed { image: FaceImage::from_clamped(target_side, target_side, out)?, upscaled: side < target_side })
}

/// For each output cell, the source indices it overlaps and their normalized
/// overlap weights.
fn area_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|o| {
            let lo = (o * src) as f64 / dst as f64;
            let hi = ((o + 1) * src) as f64 / dst as f64;
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(src);
            (first..last)
                .filter_map(|i| {
                    let overlap = (hi.min(i as f64 + 1.0) - lo.max(i as f64)).max(0.0);
                    (overlap > 0.0).then_some((i, overlap / scale))
                })
                .collect()
        })
        .collect()
}

/// Mean intensity scaled to `[0, 100]`.
pub fn brightness(img: &FaceImage) -> f64 {
    100.0 * img.pixels.iter().sum::<f64>() / img.pixels.len() as f64
}

/// Population variance of the 4-neighbour Laplacian over interior pixels.
pub fn laplacian_variance(img: &FaceImage) -> Result<f64, ImagingError> {
    let (w, h) = (img.width, img.height);
    if w < 3 || h < 3 {
        return Err(ImagingError::InvalidImage("image smaller than 3x3".into()));
    }
    let mut responses = Vec::with_capacity((w - 2) * (h - 2));
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            responses.push(
                img.get(x - 1, y) + img.get(x + 1, y) + img.get(x, y - 1) + img.get(x, y + 1) - 4.0 * img.get(x, y),
            );
        }
    }
    let n = responses.len() as f64;
    let mean = responses.iter().sum::<f64>() / n;
    Ok(responses.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n)
}

/// Laplacian variance relative to `reference_scale`, saturating at 100.
pub fn sharpness(img: &FaceImage, reference_scale: f64) -> Result<f64, ImagingError> {
    if !(reference_scale > 0.0 && reference_scale.is_finite()) {
        return Err(ImagingError::InvalidImage(format!("reference scale must be positive, got {reference_scale}")));
    }
    Ok(100.0 * (laplacian_variance(img)? / reference_scale).min(1.0))
}
