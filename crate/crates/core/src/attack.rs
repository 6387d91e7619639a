//! Attack classification, the quality gate and experiment orchestration.
//!
//! A candidate dodges when its mean similarity to its true label's gallery
//! entries falls strictly below the threshold, and impersonates a label when
//! its mean similarity to that label's entries is strictly above it. Only
//! candidates whose quality metrics stay inside the baseline band count as
//! attacks.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::autoencoder::AutoencoderModel;
use crate::latent_pca::{PcaCoords, PcaModel};
use crate::manipulate::{self, ManipulateError, SweepSpec};
use crate::recognition::{BaselineStats, MatchResult, RecognitionClient};

pub const DEFAULT_THRESHOLD: f64 = 80.0;
pub const DEFAULT_GATE_K: f64 = 2.0;
pub const DEFAULT_CONFIDENCE_SLACK: f64 = 5.0;
/// Candidates evaluated per parallel batch; records are emitted after each batch.
const EVAL_CHUNK: usize = 64;

#[derive(Error, Debug)]
pub enum AttackError {
    #[error("no match results to classify")]
    EmptyResults,
    #[error("true label {0} is not in the gallery")]
    UnknownLabel(String),
    #[error("unknown sample {0}")]
    UnknownSample(String),
    #[error("strategy: {0}")]
    Strategy(String),
    #[error(transparent)]
    Manipulate(#[from] ManipulateError),
}

/// Verdict for one candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub true_label: String,
    pub mean_similarity: BTreeMap<String, f64>,
    pub dodging: bool,
    pub impersonated_labels: Vec<String>,
    /// `None` until the quality gate has run.
    pub quality_pass: Option<bool>,
    pub quality_reasons: Vec<String>,
}

impl AttackOutcome {
    pub fn is_attack(&self) -> bool {
        self.quality_pass == Some(true) && (self.dodging || !self.impersonated_labels.is_empty())
    }

    /// Highest mean similarity to any label other than the true one.
    pub fn max_off_label_similarity(&self) -> f64 {
        self.mean_similarity
            .iter()
            .filter(|(l, _)| **l != self.true_label)
            .map(|(_, &s)| s)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Averages similarity per gallery label and applies the strict thresholds.
pub fn classify(results: &[MatchResult], true_label: &str, threshold: f64) -> Result<AttackOutcome, AttackError> {
    if results.is_empty() {
        return Err(AttackError::EmptyResults);
    }
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for r in results {
        let slot = sums.entry(r.entry_label.clone()).or_insert((0.0, 0));
        slot.0 += r.similarity;
        slot.1 += 1;
    }
    let mean_similarity: BTreeMap<String, f64> =
        sums.into_iter().map(|(label, (sum, n))| (label, sum / n as f64)).collect();
    let own = *mean_similarity.get(true_label).ok_or_else(|| AttackError::UnknownLabel(true_label.to_string()))?;
    let impersonated_labels = mean_similarity
        .iter()
        .filter(|(l, &s)| l.as_str() != true_label && s > threshold)
        .map(|(l, _)| l.clone())
        .collect();
    Ok(AttackOutcome {
        true_label: true_label.to_string(),
        mean_similarity,
        dodging: own < threshold,
        impersonated_labels,
        quality_pass: None,
        quality_reasons: Vec::new(),
    })
}

/// Probe-level quality metrics, as reported by the matcher.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityMetrics {
    pub confidence: f64,
    pub brightness: f64,
    pub sharpness: f64,
}

impl QualityMetrics {
    pub fn from_results(results: &[MatchResult]) -> Option<Self> {
        results.first().map(|r| Self { confidence: r.confidence, brightness: r.brightness, sharpness: r.sharpness })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateVerdict {
    pub pass: bool,
    pub reasons: Vec<String>,
}

/// Brightness and sharpness must lie within `mean ± k·std` of the baseline;
/// confidence must be at least `baseline mean − confidence_slack`.
pub fn quality_gate(metrics: &QualityMetrics, baselines: &BaselineStats, k: f64, confidence_slack: f64) -> GateVerdict {
    let q = &baselines.quality;
    let within = |v: f64, mean: f64, std: f64| v >= mean - k * std && v <= mean + k * std;
    let mut reasons = Vec::new();
    if metrics.confidence < q.confidence.mean - confidence_slack {
        reasons.push("confidence".to_string());
    }
    if !within(metrics.brightness, q.brightness.mean, q.brightness.std) {
        reasons.push("brightness".to_string());
    }
    if !within(metrics.sharpness, q.sharpness.mean, q.sharpness.std) {
        reasons.push("sharpness".to_string());
    }
    GateVerdict { pass: reasons.is_empty(), reasons }
}

/// Thresholds of one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub threshold: f64,
    pub gate_k: f64,
    pub confidence_slack: f64,
    /// Overrides the content-derived run id.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_id: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            gate_k: DEFAULT_GATE_K,
            confidence_slack: DEFAULT_CONFIDENCE_SLACK,
            run_id: None,
        }
    }
}

/// Where a strategy's starting coordinates come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoordsSource {
    /// A dataset sample, by id; its label is the true label.
    Sample { sample_id: String },
    /// The class mean of a label.
    ClassMean { label: String },
    /// Explicit coordinates with an asserted true label.
    Explicit { coords: PcaCoords, label: String },
}

/// Which candidates to generate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum Strategy {
    Sweep { base: CoordsSource, spec: SweepSpec },
    Transition { from_label: String, to_label: String, steps: usize },
    Substitute { original: CoordsSource, reference: CoordsSource, keep: BTreeSet<usize> },
    Swaps { original: CoordsSource, reference: CoordsSource },
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Sweep { .. } => "sweep",
            Strategy::Transition { .. } => "transition",
            Strategy::Substitute { .. } => "substitute",
            Strategy::Swaps { .. } => "swaps",
        }
    }
}

/// PCA coordinates of one dataset sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleCoords {
    pub sample_id: String,
    pub label: String,
    pub coords: PcaCoords,
}

/// Group coordinates by label.
pub fn coords_by_label(samples: &[SampleCoords]) -> BTreeMap<String, Vec<PcaCoords>> {
    let mut out: BTreeMap<String, Vec<PcaCoords>> = BTreeMap::new();
    for s in samples {
        out.entry(s.label.clone()).or_default().push(s.coords.clone());
    }
    out
}

/// Everything a run reads; all of it is immutable during the run.
pub struct ExperimentContext<'a> {
    pub autoencoder: &'a AutoencoderModel,
    pub pca: &'a PcaModel,
    pub client: &'a dyn RecognitionClient,
    pub baselines: &'a BaselineStats,
    pub samples: &'a [SampleCoords],
}

/// A candidate before evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub coords: PcaCoords,
    pub true_label: String,
    pub coords_before: PcaCoords,
    pub params: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManipulationDescriptor {
    pub strategy: String,
    pub params: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub candidate_id: usize,
    pub manipulation: ManipulationDescriptor,
    pub coords_before: PcaCoords,
    pub coords_after: PcaCoords,
    pub outcome: Option<AttackOutcome>,
    pub results: Vec<MatchResult>,
    /// Set when this candidate could not be evaluated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Counts over the records; attack successes only count quality-passing records.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub candidates: usize,
    pub failed: usize,
    pub quality_passed: usize,
    pub dodging_successes: usize,
    pub impersonation_successes: BTreeMap<String, usize>,
}

impl ReportSummary {
    pub fn from_records(records: &[ExperimentRecord]) -> Self {
        let mut s = ReportSummary { candidates: records.len(), ..Default::default() };
        for r in records {
            let Some(outcome) = &r.outcome else {
                s.failed += 1;
                continue;
            };
            if outcome.quality_pass != Some(true) {
                continue;
            }
            s.quality_passed += 1;
            if outcome.dodging {
                s.dodging_successes += 1;
            }
            for label in &outcome.impersonated_labels {
                *s.impersonation_successes.entry(label.clone()).or_default() += 1;
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub strategy: Strategy,
    pub experiment: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub run_id: String,
    pub created_at: String,
    pub config: ConfigSnapshot,
    pub baselines: BaselineStats,
    pub records: Vec<ExperimentRecord>,
    pub summary: ReportSummary,
}

impl ExperimentReport {
    pub fn summary_is_consistent(&self) -> bool {
        ReportSummary::from_records(&self.records) == self.summary
    }
}

fn resolve(samples: &[SampleCoords], source: &CoordsSource) -> Result<(PcaCoords, String), AttackError> {
    match source {
        CoordsSource::Sample { sample_id } => samples
            .iter()
            .find(|s| &s.sample_id == sample_id)
            .map(|s| (s.coords.clone(), s.label.clone()))
            .ok_or_else(|| AttackError::UnknownSample(sample_id.clone())),
        CoordsSource::ClassMean { label } => {
            let means = manipulate::class_mean_coords(&coords_by_label(samples))?;
            means.get(label).map(|c| (c.clone(), label.clone())).ok_or_else(|| AttackError::UnknownLabel(label.clone()))
        }
        CoordsSource::Explicit { coords, label } => Ok((coords.clone(), label.clone())),
    }
}

/// Expands a strategy into concrete candidates.
pub fn generate_candidates(samples: &[SampleCoords], strategy: &Strategy) -> Result<Vec<Candidate>, AttackError> {
    Ok(match strategy {
        Strategy::Sweep { base, spec } => {
            let (base_coords, label) = resolve(samples, base)?;
            manipulate::sweep(&base_coords, spec)?
                .into_iter()
                .map(|g| Candidate {
                    params: serde_json::json!({ "grid_position": g.grid_position }),
                    coords: g.coords,
                    true_label: label.clone(),
                    coords_before: base_coords.clone(),
                })
                .collect()
        }
        Strategy::Transition { from_label, to_label, steps } => {
            let means = manipulate::class_mean_coords(&coords_by_label(samples))?;
            let from = means.get(from_label).ok_or_else(|| AttackError::UnknownLabel(from_label.clone()))?;
            let to = means.get(to_label).ok_or_else(|| AttackError::UnknownLabel(to_label.clone()))?;
            manipulate::pc1_transition(from, to, *steps)?
                .into_iter()
                .enumerate()
                .map(|(j, coords)| Candidate {
                    params: serde_json::json!({ "step": j, "t": j as f64 / (*steps - 1) as f64 }),
                    coords,
                    true_label: from_label.clone(),
                    coords_before: from.clone(),
                })
                .collect()
        }
        Strategy::Substitute { original, reference, keep } => {
            let (orig, label) = resolve(samples, original)?;
            let (reference, _) = resolve(samples, reference)?;
            vec![Candidate {
                coords: manipulate::substitute_except(&orig, &reference, keep)?,
                true_label: label,
                coords_before: orig,
                params: serde_json::json!({ "keep": keep }),
            }]
        }
        Strategy::Swaps { original, reference } => {
            let (orig, label) = resolve(samples, original)?;
            let (reference, _) = resolve(samples, reference)?;
            manipulate::per_component_swaps(&orig, &reference)
                .into_iter()
                .enumerate()
                .map(|(k, coords)| Candidate {
                    coords,
                    true_label: label.clone(),
                    coords_before: orig.clone(),
                    params: serde_json::json!({ "component": k }),
                })
                .collect()
        }
    })
}

/// Decodes `coords`, scores the image and classifies it behind the gate.
pub fn evaluate_coords(
    ctx: &ExperimentContext<'_>,
    coords: &PcaCoords,
    true_label: &str,
    cfg: &ExperimentConfig,
) -> Result<(AttackOutcome, Vec<MatchResult>), String> {
    let latent = ctx.pca.inverse(coords).map_err(|e| e.to_string())?;
    let image = ctx.autoencoder.decode(&latent).map_err(|e| e.to_string())?;
    let results = ctx.client.compare(&image).map_err(|e| e.to_string())?;
    let mut outcome = classify(&results, true_label, cfg.threshold).map_err(|e| e.to_string())?;
    let metrics = QualityMetrics::from_results(&results).ok_or("matcher returned no results")?;
    let verdict = quality_gate(&metrics, ctx.baselines, cfg.gate_k, cfg.confidence_slack);
    outcome.quality_pass = Some(verdict.pass);
    outcome.quality_reasons = verdict.reasons;
    Ok((outcome, results))
}

/// The configured run id, or `<strategy>-<hash of strategy and config>`.
pub fn run_id_for(strategy: &Strategy, cfg: &ExperimentConfig) -> String {
    if let Some(id) = &cfg.run_id {
        return id.clone();
    }
    let snapshot = ConfigSnapshot { strategy: strategy.clone(), experiment: cfg.clone() };
    let bytes = serde_json::to_vec(&snapshot).expect("snapshot serializes");
    let digest = Sha256::digest(&bytes);
    format!("{}-{}", strategy.name(), hex::encode(&digest[..6]))
}

/// Runs every candidate of `strategy` through decode → compare → classify →
/// gate. Per-candidate failures are recorded, not propagated; `on_record` sees
/// records in candidate order as they complete.
pub fn run_experiment_with(
    ctx: &ExperimentContext<'_>,
    strategy: &Strategy,
    cfg: &ExperimentConfig,
    on_record: &mut dyn FnMut(&ExperimentRecord),
) -> Result<ExperimentReport, AttackError> {
    let candidates = generate_candidates(ctx.samples, strategy)?;
    let mut records = Vec::with_capacity(candidates.len());
    for (chunk_idx, chunk) in candidates.chunks(EVAL_CHUNK).enumerate() {
        let evaluated: Vec<ExperimentRecord> = chunk
            .par_iter()
            .enumerate()
            .map(|(i, c)| {
                let (outcome, results, error) = match evaluate_coords(ctx, &c.coords, &c.true_label, cfg) {
                    Ok((o, r)) => (Some(o), r, None),
                    Err(e) => (None, Vec::new(), Some(e)),
                };
                ExperimentRecord {
                    candidate_id: chunk_idx * EVAL_CHUNK + i,
                    manipulation: ManipulationDescriptor {
                        strategy: strategy.name().to_string(),
                        params: c.params.clone(),
                    },
                    coords_before: c.coords_before.clone(),
                    coords_after: c.coords.clone(),
                    outcome,
                    results,
                    error,
                }
            })
            .collect();
        for r in &evaluated {
            on_record(r);
        }
        records.extend(evaluated);
    }

    let run_id = run_id_for(strategy, cfg);
    let config = ConfigSnapshot { strategy: strategy.clone(), experiment: cfg.clone() };
    let summary = ReportSummary::from_records(&records);
    Ok(ExperimentReport {
        run_id,
        created_at: chrono::Utc::now().to_rfc3339(),
        config,
        baselines: ctx.baselines.clone(),
        records,
        summary,
    })
}

pub fn run_experiment(
    ctx: &ExperimentContext<'_>,
    strategy: &Strategy,
    cfg: &ExperimentConfig,
) -> Result<ExperimentReport, AttackError> {
    run_experiment_with(ctx, strategy, cfg, &mut |_| {})
}

/// Quality-passing dodging or impersonation records, strongest off-label
/// similarity first.
pub fn find_attacks(report: &ExperimentReport) -> Vec<&ExperimentRecord> {
    let mut hits: Vec<&ExperimentRecord> =
        report.records.iter().filter(|r| r.outcome.as_ref().is_some_and(AttackOutcome::is_attack)).collect();
    let key =
        |r: &ExperimentRecord| r.outcome.as_ref().map_or(f64::NEG_INFINITY, AttackOutcome::max_off_label_similarity);
    hits.sort_by(|a, b| key(b).total_cmp(&key(a)));
    hits
}
