//! Procedural, labeled synthetic faces.
//!
//! Every image is rendered from an [`IdentityParams`] (who) and an
//! [`ExpressionParams`] (how they look right now), so the ground-truth label of
//! any sample is known exactly.

use std::fs;
use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::{FaceImage, ImagingError};

/// Smallest side [`render`] accepts.
pub const MIN_RENDER_SIDE: usize = 32;

const BACKGROUND: f64 = 0.12;
const SUPERSAMPLE: usize = 3;
const HEAD_CENTER: (f64, f64) = (0.5, 0.52);
const HEAD_RADIUS: f64 = 0.40;
const EYE_HALF_WIDTH: f64 = 0.065;
const EYE_HALF_HEIGHT: f64 = 0.045;

#[derive(Error, Debug)]
pub enum SynthError {
    #[error("render side {0} is below the minimum of {MIN_RENDER_SIDE}")]
    TooSmall(usize),
    #[error("invalid dataset request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error("dataset io: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest: {0}")]
    Manifest(String),
}

/// Closed ranges for each identity parameter.
pub mod identity_ranges {
    pub const FACE_ASPECT: (f64, f64) = (0.75, 1.0);
    pub const EYE_SEPARATION: (f64, f64) = (0.28, 0.42);
    pub const EYE_HEIGHT: (f64, f64) = (0.35, 0.45);
    pub const NOSE_LENGTH: (f64, f64) = (0.15, 0.30);
    pub const MOUTH_WIDTH: (f64, f64) = (0.25, 0.45);
    pub const BROW_THICKNESS: (f64, f64) = (0.01, 0.04);
    pub const BASE_TONE: (f64, f64) = (0.35, 0.75);
}

/// Closed ranges for each expression parameter.
pub mod expression_ranges {
    pub const MOUTH_CURVATURE: (f64, f64) = (-1.0, 1.0);
    pub const EYE_OPENNESS: (f64, f64) = (0.2, 1.0);
    pub const HEAD_TILT: (f64, f64) = (-0.15, 0.15);
    pub const ILLUMINATION: (f64, f64) = (0.85, 1.15);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityParams {
    pub face_aspect: f64,
    pub eye_separation: f64,
    pub eye_height: f64,
    pub nose_length: f64,
    pub mouth_width: f64,
    pub brow_thickness: f64,
    pub base_tone: f64,
}

impl IdentityParams {
    pub fn in_range(&self) -> bool {
        use identity_ranges::*;
        within(self.face_aspect, FACE_ASPECT)
            && within(self.eye_separation, EYE_SEPARATION)
            && within(self.eye_height, EYE_HEIGHT)
            && within(self.nose_length, NOSE_LENGTH)
            && within(self.mouth_width, MOUTH_WIDTH)
            && within(self.brow_thickness, BROW_THICKNESS)
            && within(self.base_tone, BASE_TONE)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpressionParams {
    pub mouth_curvature: f64,
    pub eye_openness: f64,
    pub head_tilt: f64,
    pub illumination: f64,
}

impl Default for ExpressionParams {
    fn default() -> Self {
        use expression_ranges::*;
        Self {
            mouth_curvature: midpoint(MOUTH_CURVATURE),
            eye_openness: midpoint(EYE_OPENNESS),
            head_tilt: midpoint(HEAD_TILT),
            illumination: midpoint(ILLUMINATION),
        }
    }
}

impl ExpressionParams {
    pub fn in_range(&self) -> bool {
        use expression_ranges::*;
        within(self.mouth_curvature, MOUTH_CURVATURE)
            && within(self.eye_openness, EYE_OPENNESS)
            && within(self.head_tilt, HEAD_TILT)
            && within(self.illumination, ILLUMINATION)
    }

    /// Draws every field uniformly from its range shrunk around the midpoint by `spread` (1 = full range).
    fn sample(rng: &mut impl Rng, spread: f64) -> Self {
        use expression_ranges::*;
        Self {
            mouth_curvature: uniform_around(rng, MOUTH_CURVATURE, spread),
            eye_openness: uniform_around(rng, EYE_OPENNESS, spread),
            head_tilt: uniform_around(rng, HEAD_TILT, spread),
            illumination: uniform_around(rng, ILLUMINATION, spread),
        }
    }
}

fn within(v: f64, (lo, hi): (f64, f64)) -> bool {
    (lo..=hi).contains(&v)
}

fn midpoint((lo, hi): (f64, f64)) -> f64 {
    0.5 * (lo + hi)
}

fn uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn uniform_around(rng: &mut impl Rng, range: (f64, f64), spread: f64) -> f64 {
    let mid = midpoint(range);
    let half = 0.5 * (range.1 - range.0) * spread;
    uniform(rng, (mid - half, mid + half))
}

/// Deterministically samples an identity from `seed`.
pub fn gen_identity(seed: u64) -> IdentityParams {
    use identity_ranges::*;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    IdentityParams {
        face_aspect: uniform(&mut rng, FACE_ASPECT),
        eye_separation: uniform(&mut rng, EYE_SEPARATION),
        eye_height: uniform(&mut rng, EYE_HEIGHT),
        nose_length: uniform(&mut rng, NOSE_LENGTH),
        mouth_width: uniform(&mut rng, MOUTH_WIDTH),
        brow_thickness: uniform(&mut rng, BROW_THICKNESS),
        base_tone: uniform(&mut rng, BASE_TONE),
    }
}

/// Shades one point in face coordinates (already rotated into the face frame).
fn shade(id: &IdentityParams, ex: &ExpressionParams, u: f64, v: f64) -> f64 {
    let (hx, hy) = HEAD_CENTER;
    let head_rx = HEAD_RADIUS * id.face_aspect;
    let inside_head = ((u - hx) / head_rx).powi(2) + ((v - hy) / HEAD_RADIUS).powi(2) <= 1.0;
    if !inside_head {
        return BACKGROUND;
    }

    for side in [-1.0, 1.0] {
        let ex_c = 0.5 + side * id.eye_separation / 2.0;
        let ey_c = id.eye_height;

        let eye_ry = EYE_HALF_HEIGHT * ex.eye_openness;
        let eye_r2 = ((u - ex_c) / EYE_HALF_WIDTH).powi(2) + ((v - ey_c) / eye_ry).powi(2);
        if eye_r2 <= 1.0 {
            let pupil = (u - ex_c).powi(2) + (v - ey_c).powi(2) <= 0.022f64.powi(2);
            return if pupil { 0.05 } else { 0.92 };
        }

        let brow_y = ey_c - 0.075;
        if (u - ex_c).abs() <= 0.075 && (v - brow_y).abs() <= id.brow_thickness / 2.0 {
            return 0.15;
        }
    }

    let nose_top = id.eye_height + 0.04;
    if (u - 0.5).abs() <= 0.012 && v >= nose_top && v <= nose_top + id.nose_length {
        return id.base_tone * 0.6;
    }

    let mouth_y = (nose_top + id.nose_length + 0.07).min(0.84);
    let half_w = id.mouth_width / 2.0;
    let s = (u - 0.5) / half_w;
    if s.abs() <= 1.0 {
        let curve_y = mouth_y + ex.mouth_curvature * 0.05 * (1.0 - s * s);
        if (v - curve_y).abs() <= 0.014 {
            return 0.2;
        }
    }

    id.base_tone
}

/// Renders a `side × side` face.
pub fn render(identity: &IdentityParams, expression: &ExpressionParams, side: usize) -> Result<FaceImage, SynthError> {
    if side < MIN_RENDER_SIDE {
        return Err(SynthError::TooSmall(side));
    }
    let (sin_t, cos_t) = (-expression.head_tilt).sin_cos();
    let n = SUPERSAMPLE as f64;
    let mut pixels = Vec::with_capacity(side * side);
    for py in 0..side {
        for px in 0..side {
            let mut acc = 0.0;
            for sy in 0..SUPERSAMPLE {
                for sx in 0..SUPERSAMPLE {
                    let x = (px as f64 + (sx as f64 + 0.5) / n) / side as f64 - 0.5;
                    let y = (py as f64 + (sy as f64 + 0.5) / n) / side as f64 - 0.5;
                    let u = cos_t * x - sin_t * y + 0.5;
                    let v = sin_t * x + cos_t * y + 0.5;
                    acc += shade(identity, expression, u, v);
                }
            }
            pixels.push((acc / (n * n) * expression.illumination).clamp(0.0, 1.0));
        }
    }
    Ok(FaceImage::new(side, side, pixels)?)
}

/// Pixel-space axis-aligned boxes `(x0, y0, x1, y1)`, inclusive, that contain
/// each eye at full openness for the given tilt.
pub fn eye_regions(identity: &IdentityParams, head_tilt: f64, side: usize) -> Vec<(usize, usize, usize, usize)> {
    let (sin_t, cos_t) = head_tilt.sin_cos();
    let margin = 1.5 / side as f64;
    [-1.0, 1.0]
        .iter()
        .map(|&s| {
            let cx = s * id_eye_offset(identity);
            let cy = identity.eye_height - 0.5;
            // rotate the eye center into image space; the box covers the rotated ellipse
            let ix = cos_t * cx - sin_t * cy + 0.5;
            let iy = sin_t * cx + cos_t * cy + 0.5;
            let ext_x = (EYE_HALF_WIDTH * cos_t).hypot(EYE_HALF_HEIGHT * sin_t) + margin;
            let ext_y = (EYE_HALF_WIDTH * sin_t).hypot(EYE_HALF_HEIGHT * cos_t) + margin;
            let to_px = |f: f64| ((f * side as f64).floor().max(0.0) as usize).min(side - 1);
            (to_px(ix - ext_x), to_px(iy - ext_y), to_px(ix + ext_x), to_px(iy + ext_y))
        })
        .collect()
}

fn id_eye_offset(identity: &IdentityParams) -> f64 {
    identity.eye_separation / 2.0
}

/// One generated sample with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub image: FaceImage,
    pub label: String,
    pub identity: IdentityParams,
    pub expression: ExpressionParams,
    pub sample_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub num_identities: usize,
    pub samples_per_identity: usize,
    pub side: usize,
    pub seed: u64,
    /// When set, every identity except the first draws expressions from a
    /// range narrowed around the midpoint by this factor.
    #[serde(default)]
    pub expression_skew: Option<f64>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self { num_identities: 2, samples_per_identity: 100, side: 64, seed: 7, expression_skew: None }
    }
}

pub fn label_for(index: usize) -> String {
    format!("id{index:02}")
}

/// Generates `num_identities × samples_per_identity` labeled faces, grouped by identity.
pub fn gen_dataset(cfg: &DatasetConfig) -> Result<Vec<LabeledImage>, SynthError> {
    if cfg.num_identities < 2 || cfg.samples_per_identity < 2 {
        return Err(SynthError::InvalidRequest(format!(
            "need at least 2 identities and 2 samples each, got {}x{}",
            cfg.num_identities, cfg.samples_per_identity
        )));
    }
    if let Some(skew) = cfg.expression_skew {
        if !(0.0..=1.0).contains(&skew) {
            return Err(SynthError::InvalidRequest(format!("expression skew {skew} outside [0,1]")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let identities: Vec<IdentityParams> = (0..cfg.num_identities).map(|_| gen_identity(rng.next_u64())).collect();

    let mut out = Vec::with_capacity(cfg.num_identities * cfg.samples_per_identity);
    for (i, identity) in identities.iter().enumerate() {
        let spread = match cfg.expression_skew {
            Some(skew) if i > 0 => skew,
            _ => 1.0,
        };
        let label = label_for(i);
        for j in 0..cfg.samples_per_identity {
            let expression = ExpressionParams::sample(&mut rng, spread);
            out.push(LabeledImage {
                image: render(identity, &expression, cfg.side)?,
                label: label.clone(),
                identity: *identity,
                expression,
                sample_id: format!("{label}-{j:03}"),
            });
        }
    }
    Ok(out)
}

/// One row of `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub sample_id: String,
    pub label: String,
    pub file: String,
    pub identity: IdentityParams,
    pub expression: ExpressionParams,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes every sample as `<sample_id>.pgm` plus `manifest.json` into `dir`.
pub fn write_dataset(dir: &Path, samples: &[LabeledImage]) -> Result<Vec<ManifestEntry>, SynthError> {
    fs::create_dir_all(dir)?;
    let mut manifest = Vec::with_capacity(samples.len());
    for s in samples {
        let file = format!("{}.pgm", s.sample_id);
        fs::write(dir.join(&file), s.image.to_pgm())?;
        manifest.push(ManifestEntry {
            sample_id: s.sample_id.clone(),
            label: s.label.clone(),
            file,
            identity: s.identity,
            expression: s.expression,
        });
    }
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| SynthError::Manifest(e.to_string()))?;
    fs::write(dir.join(MANIFEST_FILE), json)?;
    Ok(manifest)
}

/// Reads a dataset directory back, in manifest order.
pub fn read_dataset(dir: &Path) -> Result<Vec<LabeledImage>, SynthError> {
    let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
    let manifest: Vec<ManifestEntry> = serde_json::from_str(&text).map_err(|e| SynthError::Manifest(e.to_string()))?;
    let mut seen = std::collections::HashSet::new();
    manifest
        .into_iter()
        .map(|entry| {
            if !seen.insert(entry.sample_id.clone()) {
                return Err(SynthError::Manifest(format!("duplicate sample_id {}", entry.sample_id)));
            }
            let image = FaceImage::from_pgm(&fs::read(dir.join(&entry.file))?)?;
            Ok(LabeledImage {
                image,
                label: entry.label,
                identity: entry.identity,
                expression: entry.expression,
                sample_id: entry.sample_id,
            })
        })
        .collect()
}
