//! PCA over the autoencoder latent space.
//!
//! Components are rows of [`PcaModel::basis`] ordered by descending variance;
//! coordinate index 0 is PC1. Each component's sign is fixed so its
//! largest-magnitude entry is positive, which keeps "increase PC1" stable
//! across refits of the same data.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autoencoder::{LatentVector, LATENT_DIM};
use crate::linalg::jacobi_eigen;

pub const JACOBI_TOLERANCE: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 100;
/// Denominator regularizer of the Fisher ratio.
pub const FISHER_EPSILON: f64 = 1e-12;
/// Reported Fisher ratios are capped here.
pub const FISHER_CAP: f64 = 1e12;

const PCA_MAGIC: &[u8; 4] = b"LFPC";

#[derive(Error, Debug, PartialEq)]
pub enum PcaError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("PCA file: {0}")]
    Format(String),
}

/// Coordinates in the PCA basis; index 0 is PC1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PcaCoords(Vec<f64>);

impl TryFrom<Vec<f64>> for PcaCoords {
    type Error = PcaError;
    fn try_from(values: Vec<f64>) -> Result<Self, PcaError> {
        Self::new(values)
    }
}

impl From<PcaCoords> for Vec<f64> {
    fn from(coords: PcaCoords) -> Self {
        coords.0
    }
}

impl PcaCoords {
    pub fn new(values: Vec<f64>) -> Result<Self, PcaError> {
        check_vector(&values, "coords")?;
        Ok(Self(values))
    }

    pub fn zeros() -> Self {
        Self(vec![0.0; LATENT_DIM])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), LATENT_DIM);
        Self(values)
    }
}

impl std::ops::Index<usize> for PcaCoords {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

fn check_vector(values: &[f64], what: &str) -> Result<(), PcaError> {
    if values.len() != LATENT_DIM {
        return Err(PcaError::Invalid(format!("{what} must have {LATENT_DIM} values, got {}", values.len())));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(PcaError::Invalid(format!("{what} contains a non-finite value")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Rows are components, PC1 first.
    pub basis: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
}

/// Sample covariance (divisor `n − 1`) of row vectors, row-major.
pub fn sample_covariance(rows: &[&[f64]], mean: &[f64]) -> Vec<f64> {
    let d = mean.len();
    let mut cov = vec![0.0; d * d];
    for row in rows {
        for i in 0..d {
            let di = row[i] - mean[i];
            for j in i..d {
                cov[i * d + j] += di * (row[j] - mean[j]);
            }
        }
    }
    let denom = (rows.len() - 1) as f64;
    for i in 0..d {
        for j in i..d {
            cov[i * d + j] /= denom;
            cov[j * d + i] = cov[i * d + j];
        }
    }
    cov
}

/// Fits the PCA of `latents`.
pub fn fit(latents: &[LatentVector]) -> Result<PcaModel, PcaError> {
    if latents.len() < 2 {
        return Err(PcaError::InsufficientData(format!("need at least 2 latents, got {}", latents.len())));
    }
    for z in latents {
        check_vector(z.values(), "latent")?;
    }
    let n = latents.len() as f64;
    let mut mean = vec![0.0; LATENT_DIM];
    for z in latents {
        for (m, v) in mean.iter_mut().zip(z.values()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);

    let rows: Vec<&[f64]> = latents.iter().map(|z| z.values()).collect();
    let cov = sample_covariance(&rows, &mean);
    let eig = jacobi_eigen(&cov, LATENT_DIM, JACOBI_TOLERANCE, JACOBI_MAX_SWEEPS);
    let eigenvalues = eig.values.iter().map(|&l| if (-1e-10..0.0).contains(&l) { 0.0 } else { l }).collect();

    let model = PcaModel { mean, basis: eig.vectors, eigenvalues };
    model.check_invariants()?;
    Ok(model)
}

impl PcaModel {
    /// Orthonormality within 1e-8 and non-increasing, non-negative eigenvalues.
    pub fn check_invariants(&self) -> Result<(), PcaError> {
        if self.max_orthonormality_error() > 1e-8 {
            return Err(PcaError::Invalid(format!(
                "basis not orthonormal (error {:e})",
                self.max_orthonormality_error()
            )));
        }
        if self.eigenvalues.windows(2).any(|w| w[0] < w[1]) || self.eigenvalues.iter().any(|&l| l < 0.0) {
            return Err(PcaError::Invalid("eigenvalues not non-negative and descending".into()));
        }
        Ok(())
    }

    /// `max_ij |⟨r_i, r_j⟩ − δ_ij|`.
    pub fn max_orthonormality_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, ri) in self.basis.iter().enumerate() {
            for (j, rj) in self.basis.iter().enumerate().skip(i) {
                let dot: f64 = ri.iter().zip(rj).map(|(a, b)| a * b).sum();
                worst = worst.max((dot - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        worst
    }

    /// `basisᵀ · diag(eigenvalues) · basis`, row-major.
    pub fn reconstructed_covariance(&self) -> Vec<f64> {
        let d = self.mean.len();
        let mut out = vec![0.0; d * d];
        for (row, &lambda) in self.basis.iter().zip(&self.eigenvalues) {
            for i in 0..d {
                let li = lambda * row[i];
                for j in 0..d {
                    out[i * d + j] += li * row[j];
                }
            }
        }
        out
    }

    /// `basis · (z − mean)`.
    pub fn transform(&self, z: &LatentVector) -> Result<PcaCoords, PcaError> {
        check_vector(z.values(), "latent")?;
        let centered: Vec<f64> = z.values().iter().zip(&self.mean).map(|(v, m)| v - m).collect();
        Ok(PcaCoords(self.basis.iter().map(|row| row.iter().zip(&centered).map(|(a, b)| a * b).sum()).collect()))
    }

    /// `mean + basisᵀ · coords`.
    pub fn inverse(&self, coords: &PcaCoords) -> Result<LatentVector, PcaError> {
        check_vector(coords.values(), "coords")?;
        let mut z = self.mean.clone();
        for (row, &c) in self.basis.iter().zip(coords.values()) {
            for (zi, r) in z.iter_mut().zip(row) {
                *zi += c * r;
            }
        }
        LatentVector::new(z).map_err(|e| PcaError::Invalid(e.to_string()))
    }

    /// Serializes to the `LFPC` format (f32, little-endian).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 4 * (2 * LATENT_DIM + LATENT_DIM * LATENT_DIM));
        out.extend_from_slice(PCA_MAGIC);
        let floats = self.mean.iter().chain(&self.eigenvalues).chain(self.basis.iter().flatten());
        for v in floats {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        out
    }

    /// Parses an `LFPC` file. The f32-rounded basis is re-orthonormalized
    /// (modified Gram-Schmidt in component order) so round trips stay exact.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PcaError> {
        if bytes.len() < 4 || &bytes[..4] != PCA_MAGIC {
            return Err(PcaError::Format("unknown magic".into()));
        }
        let expected = 4 * (2 * LATENT_DIM + LATENT_DIM * LATENT_DIM);
        let payload = &bytes[4..];
        if payload.len() != expected {
            return Err(PcaError::Format(format!("payload is {} bytes, expected {expected}", payload.len())));
        }
        let floats: Vec<f64> =
            payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64).collect();
        let mean = floats[..LATENT_DIM].to_vec();
        let eigenvalues = floats[LATENT_DIM..2 * LATENT_DIM].to_vec();
        let mut basis: Vec<Vec<f64>> = floats[2 * LATENT_DIM..].chunks_exact(LATENT_DIM).map(<[f64]>::to_vec).collect();
        if floats.iter().any(|v| !v.is_finite()) {
            return Err(PcaError::Format("non-finite value".into()));
        }
        for i in 0..LATENT_DIM {
            for j in 0..i {
                let dot: f64 = basis[i].iter().zip(&basis[j]).map(|(a, b)| a * b).sum();
                let prev = basis[j].clone();
                basis[i].iter_mut().zip(&prev).for_each(|(a, b)| *a -= dot * b);
            }
            let norm = basis[i].iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm < 0.5 {
                return Err(PcaError::Format(format!("component {i} is degenerate")));
            }
            basis[i].iter_mut().for_each(|a| *a /= norm);
        }
        let model = PcaModel { mean, basis, eigenvalues };
        model.check_invariants().map_err(|e| PcaError::Format(e.to_string()))?;
        Ok(model)
    }
}

/// Per-component mean and sample variance for one label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentStats {
    pub count: usize,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

/// Fisher ratios for one pair of labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSeparation {
    pub label_a: String,
    pub label_b: String,
    pub fisher_ratios: Vec<f64>,
    pub argmax: usize,
}

impl PairSeparation {
    pub fn top_ratio(&self) -> f64 {
        self.fisher_ratios[self.argmax]
    }

    pub fn median_ratio(&self) -> f64 {
        let mut sorted = self.fisher_ratios.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub per_label: BTreeMap<String, ComponentStats>,
    /// One entry per unordered label pair, in label order.
    pub pairs: Vec<PairSeparation>,
}

impl SeparationReport {
    /// The first (and for two labels, only) pair.
    pub fn primary(&self) -> &PairSeparation {
        &self.pairs[0]
    }
}

fn component_stats(samples: &[PcaCoords]) -> ComponentStats {
    let n = samples.len() as f64;
    let dims = samples[0].values().len();
    let mut means = vec![0.0; dims];
    for s in samples {
        for (m, v) in means.iter_mut().zip(s.values()) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n);
    let mut variances = vec![0.0; dims];
    for s in samples {
        for ((acc, v), m) in variances.iter_mut().zip(s.values()).zip(&means) {
            *acc += (v - m).powi(2);
        }
    }
    variances.iter_mut().for_each(|v| *v /= n - 1.0);
    ComponentStats { count: samples.len(), means, variances }
}

/// Per-component Fisher ratio `(μ_A − μ_B)² / (σ²_A + σ²_B + ε)` for every label pair.
pub fn separation(coords_by_label: &BTreeMap<String, Vec<PcaCoords>>) -> Result<SeparationReport, PcaError> {
    if coords_by_label.len() < 2 {
        return Err(PcaError::InsufficientData(format!("need at least 2 labels, got {}", coords_by_label.len())));
    }
    let mut per_label = BTreeMap::new();
    for (label, samples) in coords_by_label {
        if samples.len() < 2 {
            return Err(PcaError::InsufficientData(format!("label {label} has {} sample(s), need 2", samples.len())));
        }
        per_label.insert(label.clone(), component_stats(samples));
    }
    let labels: Vec<&String> = per_label.keys().collect();
    let mut pairs = Vec::new();
    for (i, a) in labels.iter().enumerate() {
        for b in &labels[i + 1..] {
            let (sa, sb) = (&per_label[*a], &per_label[*b]);
            let fisher_ratios: Vec<f64> = (0..sa.means.len())
                .map(|k| {
                    let r = (sa.means[k] - sb.means[k]).powi(2) / (sa.variances[k] + sb.variances[k] + FISHER_EPSILON);
                    r.min(FISHER_CAP)
                })
                .collect();
            let argmax = fisher_ratios
                .iter()
                .enumerate()
                .fold(0, |best, (k, &r)| if r > fisher_ratios[best] { k } else { best });
            pairs.push(PairSeparation { label_a: (*a).clone(), label_b: (*b).clone(), fisher_ratios, argmax });
        }
    }
    Ok(SeparationReport { per_label, pairs })
}
