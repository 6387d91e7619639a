//! The black-box face matcher: a client contract, an eigenfaces simulator
//! implementing it, and the baseline statistics computed against a gallery.
//!
//! The simulator projects images onto the top eigenfaces of the enrolled
//! gallery and maps projection cosine to a 0–100 similarity through a
//! logistic curve calibrated on the gallery itself.

use std::collections::{BTreeMap, BTreeSet};

use base64::Engine;
use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::{self, FaceImage, ImagingError};
use crate::linalg::jacobi_eigen;

pub const EIGENFACE_COMPONENTS: usize = 32;
/// Similarity the median intra-label gallery pair is calibrated to.
pub const INTRA_ANCHOR: f64 = 99.0;
/// Similarity the median inter-label gallery pair is calibrated to.
pub const INTER_ANCHOR: f64 = 2.0;
pub const SHARPNESS_PERCENTILE: f64 = 95.0;

#[derive(Error, Debug)]
pub enum RecognitionError {
    #[error("cannot calibrate: {0}")]
    CannotCalibrate(String),
    #[error("degenerate gallery: {0}")]
    DegenerateGallery(String),
    #[error("probe is {actual_w}x{actual_h}, gallery images are {expected_w}x{expected_h}")]
    Shape { expected_w: usize, expected_h: usize, actual_w: usize, actual_h: usize },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("unknown label {0}")]
    UnknownLabel(String),
    #[error("invalid gallery: {0}")]
    InvalidGallery(String),
    #[error("wire format: {0}")]
    Wire(String),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

/// One stored image of the gallery.
#[derive(Debug, Clone, PartialEq)]
pub struct GalleryEntry {
    pub entry_id: String,
    pub label: String,
    pub image: FaceImage,
}

/// Score of a probe against one gallery entry; every metric is in `[0, 100]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub entry_id: String,
    pub entry_label: String,
    pub similarity: f64,
    pub confidence: f64,
    pub brightness: f64,
    pub sharpness: f64,
}

/// Anything that can score a probe against its stored gallery.
///
/// Attack evaluation only ever talks to this trait, never to matcher internals.
pub trait RecognitionClient: Send + Sync {
    /// One result per gallery entry, ordered by `entry_id`.
    fn compare(&self, probe: &FaceImage) -> Result<Vec<MatchResult>, RecognitionError>;
    /// Distinct gallery labels, sorted.
    fn labels(&self) -> Vec<String>;
}

#[derive(Debug, Clone, PartialEq)]
struct StoredEntry {
    entry_id: String,
    label: String,
    projection: Vec<f64>,
}

/// Enrolled eigenfaces matcher.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatorModel {
    width: usize,
    height: usize,
    /// Mean gallery face; also the confidence template.
    mean_face: Array1<f64>,
    /// `k × pixels`, rows orthonormal.
    eigenfaces: Array2<f64>,
    entries: Vec<StoredEntry>,
    /// Logistic steepness.
    pub a: f64,
    /// Logistic midpoint in cosine units.
    pub b: f64,
    pub reference_scale: f64,
    pub intra_median_cos: f64,
    pub inter_median_cos: f64,
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Linear-interpolated percentile (`p` in `[0, 100]`).
fn percentile(values: &mut [f64], p: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let rank = p / 100.0 * (values.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    values[lo] + (values[hi] - values[lo]) * (rank - lo as f64)
}

/// Cosine similarity, or `None` when either vector has zero norm.
fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        None
    } else {
        Some((dot / (na * nb)).clamp(-1.0, 1.0))
    }
}

fn pearson(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    let (ma, mb) = (a.mean().unwrap_or(0.0), b.mean().unwrap_or(0.0));
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}

impl SimulatorModel {
    /// Builds the eigenface basis, calibrates the similarity curve and the
    /// sharpness reference on `gallery`.
    pub fn enroll(gallery: &[GalleryEntry]) -> Result<Self, RecognitionError> {
        if gallery.len() < 2 {
            return Err(RecognitionError::InsufficientData(format!("gallery has {} entries", gallery.len())));
        }
        let labels: BTreeSet<&str> = gallery.iter().map(|e| e.label.as_str()).collect();
        if labels.len() < 2 {
            return Err(RecognitionError::CannotCalibrate("gallery has a single label".into()));
        }
        let (width, height) = (gallery[0].image.width(), gallery[0].image.height());
        if gallery.iter().any(|e| e.image.width() != width || e.image.height() != height) {
            return Err(RecognitionError::InvalidGallery("gallery images differ in size".into()));
        }
        let ids: BTreeSet<&str> = gallery.iter().map(|e| e.entry_id.as_str()).collect();
        if ids.len() != gallery.len() {
            return Err(RecognitionError::InvalidGallery("duplicate entry_id".into()));
        }

        let mut ordered: Vec<&GalleryEntry> = gallery.iter().collect();
        ordered.sort_by(|x, y| x.entry_id.cmp(&y.entry_id));

        let pixels = width * height;
        let n = ordered.len();
        let mut x = Array2::zeros((n, pixels));
        for (mut row, e) in x.outer_iter_mut().zip(&ordered) {
            row.assign(&ArrayView1::from(e.image.pixels()));
        }
        let mean_face = x.mean_axis(Axis(0)).expect("non-empty");
        let centered = &x - &mean_face;

        // eigenvectors of the pixel covariance via the n × n Gram matrix
        let gram = centered.dot(&centered.t());
        let scale = gram.iter().map(|g| g * g).sum::<f64>().sqrt();
        let eig = jacobi_eigen(gram.as_slice().expect("standard layout"), n, 1e-12 * scale.max(1e-300), 100);
        let keep: Vec<usize> = (0..n)
            .filter(|&k| eig.values[k] > 1e-9 * scale.max(f64::MIN_POSITIVE))
            .take(EIGENFACE_COMPONENTS)
            .collect();
        let mut eigenfaces = Array2::zeros((keep.len(), pixels));
        for (mut face, &k) in eigenfaces.outer_iter_mut().zip(&keep) {
            let v = ArrayView1::from(&eig.vectors[k]);
            let mut f = centered.t().dot(&v);
            let norm = f.dot(&f).sqrt();
            f /= norm;
            let pivot = f.iter().enumerate().fold(0, |best, (i, x)| if x.abs() > f[best].abs() { i } else { best });
            if f[pivot] < 0.0 {
                f.mapv_inplace(|x| -x);
            }
            face.assign(&f);
        }

        let projections = centered.dot(&eigenfaces.t());
        let entries: Vec<StoredEntry> = ordered
            .iter()
            .zip(projections.outer_iter())
            .map(|(e, p)| StoredEntry { entry_id: e.entry_id.clone(), label: e.label.clone(), projection: p.to_vec() })
            .collect();

        let (mut intra, mut inter) = (Vec::new(), Vec::new());
        for i in 0..n {
            for j in (i + 1)..n {
                let c = cosine(&entries[i].projection, &entries[j].projection).unwrap_or(0.0);
                if entries[i].label == entries[j].label {
                    intra.push(c);
                } else {
                    inter.push(c);
                }
            }
        }
        if intra.is_empty() {
            return Err(RecognitionError::CannotCalibrate("no label has two gallery entries".into()));
        }
        let intra_median_cos = median(&mut intra);
        let inter_median_cos = median(&mut inter);
        if intra_median_cos - inter_median_cos <= 1e-12 {
            return Err(RecognitionError::DegenerateGallery(format!(
                "intra-label median cosine {intra_median_cos} does not exceed inter-label {inter_median_cos}"
            )));
        }
        let hi = logit(INTRA_ANCHOR / 100.0);
        let lo = logit(INTER_ANCHOR / 100.0);
        let a = (hi - lo) / (intra_median_cos - inter_median_cos);
        let b = intra_median_cos - hi / a;

        let mut lap: Vec<f64> =
            ordered.iter().map(|e| imaging::laplacian_variance(&e.image)).collect::<Result<_, _>>()?;
        let reference_scale = percentile(&mut lap, SHARPNESS_PERCENTILE);
        if reference_scale.is_nan() || reference_scale <= 0.0 {
            return Err(RecognitionError::DegenerateGallery("gallery images have no Laplacian response".into()));
        }

        Ok(Self {
            width,
            height,
            mean_face,
            eigenfaces,
            entries,
            a,
            b,
            reference_scale,
            intra_median_cos,
            inter_median_cos,
        })
    }

    /// `100 · logistic(a · (cos − b))`.
    pub fn similarity_from_cos(&self, cos: f64) -> f64 {
        100.0 / (1.0 + (-self.a * (cos - self.b)).exp())
    }

    pub fn component_count(&self) -> usize {
        self.eigenfaces.nrows()
    }

    pub fn entry_count(&self) -> usize {
        self.entries.len()
    }

    fn project(&self, probe: &FaceImage) -> Array1<f64> {
        let centered = &ArrayView1::from(probe.pixels()) - &self.mean_face;
        self.eigenfaces.dot(&centered)
    }

    /// `100 · max(0, ρ)^¼`, ρ the Pearson correlation with the mean face.
    pub fn confidence(&self, probe: &FaceImage) -> f64 {
        let rho = pearson(ArrayView1::from(probe.pixels()), self.mean_face.view());
        100.0 * rho.max(0.0).powf(0.25)
    }

    /// Similarity of every unordered pair of gallery entries, as `(label, label, similarity)`.
    pub fn gallery_pair_similarities(&self) -> Vec<(String, String, f64)> {
        let mut out = Vec::new();
        for (i, x) in self.entries.iter().enumerate() {
            for y in &self.entries[i + 1..] {
                let s = cosine(&x.projection, &y.projection).map_or(0.0, |c| self.similarity_from_cos(c));
                out.push((x.label.clone(), y.label.clone(), s));
            }
        }
        out
    }
}

impl RecognitionClient for SimulatorModel {
    fn compare(&self, probe: &FaceImage) -> Result<Vec<MatchResult>, RecognitionError> {
        if probe.width() != self.width || probe.height() != self.height {
            return Err(RecognitionError::Shape {
                expected_w: self.width,
                expected_h: self.height,
                actual_w: probe.width(),
                actual_h: probe.height(),
            });
        }
        let projection = self.project(probe);
        let projection = projection.as_slice().expect("contiguous");
        let confidence = self.confidence(probe);
        let brightness = imaging::brightness(probe);
        let sharpness = imaging::sharpness(probe, self.reference_scale)?;
        Ok(self
            .entries
            .iter()
            .map(|e| MatchResult {
                entry_id: e.entry_id.clone(),
                entry_label: e.label.clone(),
                similarity: cosine(projection, &e.projection).map_or(0.0, |c| self.similarity_from_cos(c)),
                confidence,
                brightness,
                sharpness,
            })
            .collect())
    }

    fn labels(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.entries.iter().map(|e| &e.label).collect();
        set.into_iter().cloned().collect()
    }
}

/// Mean and sample standard deviation (`n − 1`; 0 when `n = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: 0.0, std: 0.0, count: 0 };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std =
            if n == 1 { 0.0 } else { (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() };
        Self { mean, std, count: n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityCell {
    pub probe_label: String,
    pub gallery_label: String,
    #[serde(flatten)]
    pub stats: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityBaseline {
    pub confidence: MeanStd,
    pub brightness: MeanStd,
    pub sharpness: MeanStd,
}

/// Gallery self-probe statistics: the reference any candidate is judged against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineStats {
    /// Every ordered (probe label, gallery label) pair, sorted.
    pub similarity_matrix: Vec<SimilarityCell>,
    pub quality: QualityBaseline,
}

impl BaselineStats {
    pub fn cell(&self, probe_label: &str, gallery_label: &str) -> Option<&SimilarityCell> {
        self.similarity_matrix.iter().find(|c| c.probe_label == probe_label && c.gallery_label == gallery_label)
    }
}

/// Probes `dataset` against `client` and aggregates similarity per ordered
/// label pair and the quality metrics over all probes.
pub fn compute_baselines(
    client: &dyn RecognitionClient,
    dataset: &[GalleryEntry],
) -> Result<BaselineStats, RecognitionError> {
    if dataset.is_empty() {
        return Err(RecognitionError::InsufficientData("empty baseline dataset".into()));
    }
    let gallery_labels = client.labels();
    if let Some(e) = dataset.iter().find(|e| !gallery_labels.contains(&e.label)) {
        return Err(RecognitionError::UnknownLabel(e.label.clone()));
    }
    let mut cells: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    let (mut conf, mut bright, mut sharp) = (Vec::new(), Vec::new(), Vec::new());
    for probe in dataset {
        let results = client.compare(&probe.image)?;
        for r in &results {
            cells.entry((probe.label.clone(), r.entry_label.clone())).or_default().push(r.similarity);
        }
        if let Some(first) = results.first() {
            conf.push(first.confidence);
            bright.push(first.brightness);
            sharp.push(first.sharpness);
        }
    }
    let probe_labels: BTreeSet<&String> = dataset.iter().map(|e| &e.label).collect();
    let similarity_matrix = probe_labels
        .iter()
        .flat_map(|p| gallery_labels.iter().map(move |g| ((*p).clone(), g.clone())))
        .map(|key| {
            let stats = MeanStd::of(cells.get(&key).map(Vec::as_slice).unwrap_or(&[]));
            SimilarityCell { probe_label: key.0, gallery_label: key.1, stats }
        })
        .collect();
    Ok(BaselineStats {
        similarity_matrix,
        quality: QualityBaseline {
            confidence: MeanStd::of(&conf),
            brightness: MeanStd::of(&bright),
            sharpness: MeanStd::of(&sharp),
        },
    })
}

/// Request body of the matcher wire format: a base64-encoded PGM probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRequest {
    pub probe: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareResponse {
    pub results: Vec<MatchResult>,
}

pub fn encode_image_b64(img: &FaceImage) -> String {
    base64::engine::general_purpose::STANDARD.encode(img.to_pgm())
}

pub fn decode_image_b64(data: &str) -> Result<FaceImage, RecognitionError> {
    let bytes = base64::engine::general_purpose::STANDARD
        .decode(data.trim())
        .map_err(|e| RecognitionError::Wire(format!("base64: {e}")))?;
    Ok(FaceImage::from_pgm(&bytes)?)
}

impl CompareRequest {
    pub fn for_probe(img: &FaceImage) -> Self {
        Self { probe: encode_image_b64(img) }
    }
}

/// Serves a [`CompareRequest`] with any client; the HTTP gateway and tests share it.
pub fn handle_compare(
    client: &dyn RecognitionClient,
    req: &CompareRequest,
) -> Result<CompareResponse, RecognitionError> {
    let probe = decode_image_b64(&req.probe)?;
    Ok(CompareResponse { results: client.compare(&probe)? })
}
