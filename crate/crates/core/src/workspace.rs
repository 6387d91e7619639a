//! On-disk workspace layout and the pipeline steps that fill it.
//!
//! ```text
//! <root>/
//!   dataset/      <sample_id>.pgm, manifest.json
//!   models/       autoencoder.lf01, pca.lfpc, separation.json, training.json
//!   gallery/      reconstructed <sample_id>.pgm, manifest.json, baselines.json
//!   reports/      <run-id>/report-<run-id>.json, <run-id>/records.jsonl
//!   bookmarks.json
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack::{
    self, AttackError, AttackOutcome, CoordsSource, ExperimentConfig, ExperimentContext, ExperimentReport,
    SampleCoords, Strategy,
};
use crate::autoencoder::{self, AutoencoderError, AutoencoderModel, TrainConfig, DEFAULT_HIDDEN};
use crate::latent_pca::{self, PcaCoords, PcaError, PcaModel, SeparationReport};
use crate::manipulate::{self, ManipulateError, SweepSpec, DEFAULT_STEPS};
use crate::recognition::{self, BaselineStats, GalleryEntry, RecognitionError, SimulatorModel};
use crate::synthface::{self, DatasetConfig, LabeledImage, SynthError};

pub const MODEL_FILE: &str = "autoencoder.lf01";
pub const PCA_FILE: &str = "pca.lfpc";
pub const SEPARATION_FILE: &str = "separation.json";
pub const TRAINING_FILE: &str = "training.json";
pub const BASELINES_FILE: &str = "baselines.json";
pub const BOOKMARKS_FILE: &str = "bookmarks.json";
pub const RECORDS_FILE: &str = "records.jsonl";

#[derive(Error, Debug)]
pub enum WorkspaceError {
    #[error("missing {what}: {path} (run `{step}` first)")]
    Missing { what: &'static str, path: PathBuf, step: &'static str },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Autoencoder(#[from] AutoencoderError),
    #[error(transparent)]
    Pca(#[from] PcaError),
    #[error(transparent)]
    Recognition(#[from] RecognitionError),
    #[error(transparent)]
    Manipulate(#[from] ManipulateError),
    #[error(transparent)]
    Attack(#[from] AttackError),
}

type Result<T> = std::result::Result<T, WorkspaceError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> WorkspaceError + '_ {
    move |source| WorkspaceError::Io { path: path.to_path_buf(), source }
}

/// Every knob of the offline pipeline. Missing keys take defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub dataset: DatasetConfig,
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
    pub experiment: ExperimentConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetConfig::default(),
            hidden: DEFAULT_HIDDEN.to_vec(),
            train: TrainConfig::default(),
            experiment: ExperimentConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// One seed drives both dataset generation and training.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.dataset.seed = seed;
        self.train.seed = seed;
        self
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text)
            .map_err(|e| WorkspaceError::Parse { path: path.to_path_buf(), message: e.to_string() })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkspaceLayout {
    root: PathBuf,
}

impl WorkspaceLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.root.join("dataset")
    }

    pub fn models_dir(&self) -> PathBuf {
        self.root.join("models")
    }

    pub fn gallery_dir(&self) -> PathBuf {
        self.root.join("gallery")
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.root.join("reports")
    }

    pub fn model_path(&self) -> PathBuf {
        self.models_dir().join(MODEL_FILE)
    }

    pub fn pca_path(&self) -> PathBuf {
        self.models_dir().join(PCA_FILE)
    }

    pub fn separation_path(&self) -> PathBuf {
        self.models_dir().join(SEPARATION_FILE)
    }

    pub fn training_path(&self) -> PathBuf {
        self.models_dir().join(TRAINING_FILE)
    }

    pub fn baselines_path(&self) -> PathBuf {
        self.gallery_dir().join(BASELINES_FILE)
    }

    pub fn bookmarks_path(&self) -> PathBuf {
        self.root.join(BOOKMARKS_FILE)
    }

    pub fn run_dir(&self, run_id: &str) -> PathBuf {
        self.reports_dir().join(run_id)
    }

    pub fn report_path(&self, run_id: &str) -> PathBuf {
        self.run_dir(run_id).join(format!("report-{run_id}.json"))
    }

    fn require(&self, path: PathBuf, what: &'static str, step: &'static str) -> Result<PathBuf> {
        if path.exists() {
            Ok(path)
        } else {
            Err(WorkspaceError::Missing { what, path, step })
        }
    }

    pub fn load_dataset(&self) -> Result<Vec<LabeledImage>> {
        let dir = self.dataset_dir();
        self.require(dir.join(synthface::MANIFEST_FILE), "dataset manifest", "gen")?;
        Ok(synthface::read_dataset(&dir)?)
    }

    pub fn load_model(&self) -> Result<AutoencoderModel> {
        let path = self.require(self.model_path(), "autoencoder model", "train")?;
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        AutoencoderModel::from_bytes(&bytes)
            .map_err(|e| WorkspaceError::Parse { path: path.clone(), message: e.to_string() })
    }

    pub fn load_pca(&self) -> Result<PcaModel> {
        let path = self.require(self.pca_path(), "PCA model", "pca")?;
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        PcaModel::from_bytes(&bytes).map_err(|e| WorkspaceError::Parse { path: path.clone(), message: e.to_string() })
    }

    pub fn load_separation(&self) -> Result<SeparationReport> {
        read_json(&self.require(self.separation_path(), "separation report", "pca")?)
    }

    pub fn load_gallery(&self) -> Result<Vec<GalleryEntry>> {
        let dir = self.gallery_dir();
        self.require(dir.join(synthface::MANIFEST_FILE), "gallery manifest", "enroll")?;
        Ok(synthface::read_dataset(&dir)?
            .into_iter()
            .map(|s| GalleryEntry { entry_id: s.sample_id, label: s.label, image: s.image })
            .collect())
    }

    pub fn load_baselines(&self) -> Result<BaselineStats> {
        read_json(&self.require(self.baselines_path(), "baselines", "enroll")?)
    }

    pub fn load_report(&self, run_id: &str) -> Result<ExperimentReport> {
        read_json(&self.require(self.report_path(run_id), "report", "sweep")?)
    }

    /// Run ids of every stored report, sorted.
    pub fn list_reports(&self) -> Result<Vec<String>> {
        let dir = self.reports_dir();
        if !dir.exists() {
            return Ok(Vec::new());
        }
        let mut ids = Vec::new();
        for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
            let entry = entry.map_err(io_err(&dir))?;
            let id = entry.file_name().to_string_lossy().into_owned();
            if self.report_path(&id).exists() {
                ids.push(id);
            }
        }
        ids.sort();
        Ok(ids)
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| WorkspaceError::Parse { path: path.to_path_buf(), message: e.to_string() })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let json = serde_json::to_string_pretty(value).expect("artifact serializes");
    fs::write(path, json).map_err(io_err(path))
}

/// Renders the dataset into `dataset/`.
pub fn step_gen(layout: &WorkspaceLayout, cfg: &PipelineConfig) -> Result<usize> {
    let samples = synthface::gen_dataset(&cfg.dataset)?;
    synthface::write_dataset(&layout.dataset_dir(), &samples)?;
    log::info!("wrote {} samples to {}", samples.len(), layout.dataset_dir().display());
    Ok(samples.len())
}

/// Loss curve persisted next to the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub config: TrainConfig,
    pub hidden: Vec<usize>,
    pub loss_history: Vec<f64>,
    pub validation_history: Vec<f64>,
    pub final_mse: f64,
}

/// Trains the autoencoder on `dataset/` and writes `models/autoencoder.lf01`.
pub fn step_train(layout: &WorkspaceLayout, cfg: &PipelineConfig) -> Result<TrainingSummary> {
    let dataset = layout.load_dataset()?;
    let images: Vec<_> = dataset.iter().map(|s| &s.image).collect();
    let side = images[0].width();
    let mut model = autoencoder::init_model(side, &cfg.hidden, cfg.train.seed)?;
    model.init_biases_from_data(&images)?;
    let report = autoencoder::train(&model, &images, &cfg.train)?;
    let final_mse = report.model.reconstruction_mse(&images)?;

    let path = layout.model_path();
    fs::create_dir_all(layout.models_dir()).map_err(io_err(&path))?;
    fs::write(&path, report.model.to_bytes()).map_err(io_err(&path))?;
    let summary = TrainingSummary {
        config: cfg.train.clone(),
        hidden: cfg.hidden.clone(),
        loss_history: report.loss_history,
        validation_history: report.validation_history,
        final_mse,
    };
    write_json(&layout.training_path(), &summary)?;
    log::info!("trained autoencoder, reconstruction MSE {final_mse:.5}");
    Ok(summary)
}

/// PCA coordinates of every dataset image.
pub fn sample_coords(model: &AutoencoderModel, pca: &PcaModel, dataset: &[LabeledImage]) -> Result<Vec<SampleCoords>> {
    dataset
        .iter()
        .map(|s| {
            let z = model.encode(&s.image)?;
            Ok(SampleCoords { sample_id: s.sample_id.clone(), label: s.label.clone(), coords: pca.transform(&z)? })
        })
        .collect()
}

/// Fits PCA over the dataset latents; writes `pca.lfpc` and `separation.json`.
pub fn step_pca(layout: &WorkspaceLayout) -> Result<SeparationReport> {
    let dataset = layout.load_dataset()?;
    let model = layout.load_model()?;
    let images: Vec<_> = dataset.iter().map(|s| &s.image).collect();
    let latents = model.encode_batch(&images)?;
    let pca = latent_pca::fit(&latents)?;
    let path = layout.pca_path();
    fs::write(&path, pca.to_bytes()).map_err(io_err(&path))?;

    let coords = sample_coords(&model, &pca, &dataset)?;
    let report = latent_pca::separation(&attack::coords_by_label(&coords))?;
    write_json(&layout.separation_path(), &report)?;
    let primary = report.primary();
    log::info!(
        "PCA fitted; top separating component {} with ratio {:.3} (median {:.3})",
        primary.argmax,
        primary.top_ratio(),
        primary.median_ratio()
    );
    Ok(report)
}

/// Stores 8-bit reconstructions of the dataset as the gallery, enrolls them
/// and writes self-probe baselines.
pub fn step_enroll(layout: &WorkspaceLayout) -> Result<BaselineStats> {
    let dataset = layout.load_dataset()?;
    let model = layout.load_model()?;
    let reconstructed = dataset
        .iter()
        .map(|s| Ok(LabeledImage { image: model.reconstruct(&s.image)?.quantized(), ..s.clone() }))
        .collect::<Result<Vec<_>>>()?;
    synthface::write_dataset(&layout.gallery_dir(), &reconstructed)?;

    let gallery = layout.load_gallery()?;
    let simulator = SimulatorModel::enroll(&gallery)?;
    let baselines = recognition::compute_baselines(&simulator, &gallery)?;
    write_json(&layout.baselines_path(), &baselines)?;
    log::info!("enrolled {} gallery entries", gallery.len());
    Ok(baselines)
}

/// Runs `gen`, `train`, `pca` and `enroll` in order.
pub fn build_all(layout: &WorkspaceLayout, cfg: &PipelineConfig) -> Result<()> {
    step_gen(layout, cfg)?;
    step_train(layout, cfg)?;
    step_pca(layout)?;
    step_enroll(layout)?;
    Ok(())
}

/// Everything needed to evaluate candidates, loaded once.
pub struct Artifacts {
    pub autoencoder: AutoencoderModel,
    pub pca: PcaModel,
    pub simulator: SimulatorModel,
    pub baselines: BaselineStats,
    pub separation: SeparationReport,
    pub gallery: Vec<GalleryEntry>,
    pub samples: Vec<SampleCoords>,
}

impl Artifacts {
    /// Loads the models and re-enrolls the stored gallery; enrollment is
    /// deterministic, so this reproduces the simulator used for the baselines.
    pub fn load(layout: &WorkspaceLayout) -> Result<Self> {
        let autoencoder = layout.load_model()?;
        let pca = layout.load_pca()?;
        let separation = layout.load_separation()?;
        let gallery = layout.load_gallery()?;
        let baselines = layout.load_baselines()?;
        let dataset = layout.load_dataset()?;
        if autoencoder.input_width() != gallery[0].image.width() {
            return Err(WorkspaceError::Invalid("gallery and model image sizes differ".into()));
        }
        let simulator = SimulatorModel::enroll(&gallery)?;
        let samples = sample_coords(&autoencoder, &pca, &dataset)?;
        Ok(Self { autoencoder, pca, simulator, baselines, separation, gallery, samples })
    }

    pub fn context(&self) -> ExperimentContext<'_> {
        ExperimentContext {
            autoencoder: &self.autoencoder,
            pca: &self.pca,
            client: &self.simulator,
            baselines: &self.baselines,
            samples: &self.samples,
        }
    }

    pub fn labels(&self) -> Vec<String> {
        let mut labels: Vec<String> = self.samples.iter().map(|s| s.label.clone()).collect();
        labels.sort();
        labels.dedup();
        labels
    }

    /// Per-component `(min, max)` over the dataset coordinates.
    pub fn component_ranges(&self) -> Result<Vec<(f64, f64)>> {
        let coords: Vec<PcaCoords> = self.samples.iter().map(|s| s.coords.clone()).collect();
        Ok(manipulate::component_ranges(&coords)?)
    }

    /// A sweep of `indices` over their dataset ranges, starting from the
    /// class mean of `label`.
    pub fn range_sweep(&self, label: &str, indices: &[usize], steps: usize) -> Result<Strategy> {
        let ranges = self.component_ranges()?;
        let picked = indices
            .iter()
            .map(|&i| {
                ranges.get(i).copied().ok_or_else(|| WorkspaceError::Invalid(format!("component {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Strategy::Sweep {
            base: CoordsSource::ClassMean { label: label.to_string() },
            spec: SweepSpec { indices: indices.to_vec(), ranges: picked, steps },
        })
    }

    /// The first-component sweep from the first label's class mean.
    pub fn default_pc1_sweep(&self) -> Result<Strategy> {
        let labels = self.labels();
        self.range_sweep(&labels[0], &[0], DEFAULT_STEPS)
    }

    /// Class-mean transition from the first label toward the second.
    pub fn default_transition(&self) -> Strategy {
        let labels = self.labels();
        Strategy::Transition { from_label: labels[0].clone(), to_label: labels[1].clone(), steps: DEFAULT_STEPS }
    }

    /// Decodes `coords` and evaluates them as a candidate of `true_label`.
    pub fn explore(
        &self,
        coords: &PcaCoords,
        true_label: &str,
        cfg: &ExperimentConfig,
    ) -> std::result::Result<(crate::imaging::FaceImage, AttackOutcome, Vec<recognition::MatchResult>), String> {
        let latent = self.pca.inverse(coords).map_err(|e| e.to_string())?;
        let image = self.autoencoder.decode(&latent).map_err(|e| e.to_string())?;
        let (outcome, results) = attack::evaluate_coords(&self.context(), coords, true_label, cfg)?;
        Ok((image, outcome, results))
    }
}

/// Runs `strategy`, streaming records to `records.jsonl`, and writes the report.
pub fn run_and_save(
    layout: &WorkspaceLayout,
    artifacts: &Artifacts,
    strategy: &Strategy,
    cfg: &ExperimentConfig,
) -> Result<ExperimentReport> {
    let staging = layout.reports_dir().join(format!(".running-{}", std::process::id()));
    fs::create_dir_all(&staging).map_err(io_err(&staging))?;
    let records_path = staging.join(RECORDS_FILE);
    let file = fs::File::create(&records_path).map_err(io_err(&records_path))?;
    let mut out = BufWriter::new(file);
    let mut write_failed: Option<std::io::Error> = None;
    let report = attack::run_experiment_with(&artifacts.context(), strategy, cfg, &mut |record| {
        if write_failed.is_none() {
            let line = serde_json::to_string(record).expect("record serializes");
            if let Err(e) = writeln!(out, "{line}") {
                write_failed = Some(e);
            }
        }
    })?;
    if let Some(e) = write_failed {
        return Err(WorkspaceError::Io { path: records_path, source: e });
    }
    out.flush().map_err(io_err(&records_path))?;
    drop(out);

    let run_dir = layout.run_dir(&report.run_id);
    if run_dir.exists() {
        fs::remove_dir_all(&run_dir).map_err(io_err(&run_dir))?;
    }
    fs::rename(&staging, &run_dir).map_err(io_err(&run_dir))?;
    write_json(&layout.report_path(&report.run_id), &report)?;
    log::info!(
        "run {}: {} candidates, {} quality-passing, {} dodging",
        report.run_id,
        report.summary.candidates,
        report.summary.quality_passed,
        report.summary.dodging_successes
    );
    Ok(report)
}

/// A human-selected candidate kept across sessions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bookmark {
    pub bookmark_id: String,
    pub coords: PcaCoords,
    pub outcome: Option<AttackOutcome>,
    #[serde(default)]
    pub note: String,
    pub created_at: String,
}

/// Fields a client supplies; the id and timestamp are assigned on save.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewBookmark {
    pub coords: PcaCoords,
    #[serde(default)]
    pub outcome: Option<AttackOutcome>,
    #[serde(default)]
    pub note: String,
}

pub fn load_bookmarks(layout: &WorkspaceLayout) -> Result<Vec<Bookmark>> {
    let path = layout.bookmarks_path();
    if !path.exists() {
        return Ok(Vec::new());
    }
    read_json(&path)
}

/// Appends a bookmark with the next free id. Callers serialize writes.
pub fn add_bookmark(layout: &WorkspaceLayout, new: NewBookmark) -> Result<Bookmark> {
    let mut all = load_bookmarks(layout)?;
    let next = all
        .iter()
        .filter_map(|b| b.bookmark_id.strip_prefix("bm-").and_then(|n| n.parse::<u64>().ok()))
        .max()
        .map_or(1, |n| n + 1);
    let bookmark = Bookmark {
        bookmark_id: format!("bm-{next:04}"),
        coords: new.coords,
        outcome: new.outcome,
        note: new.note,
        created_at: chrono::Utc::now().to_rfc3339(),
    };
    all.push(bookmark.clone());
    let path = layout.bookmarks_path();
    let tmp = path.with_extension("json.tmp");
    write_json(&tmp, &all)?;
    fs::rename(&tmp, &path).map_err(io_err(&path))?;
    Ok(bookmark)
}

/// Compact per-run view for `report`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub strategy: String,
    pub summary: attack::ReportSummary,
    pub consistent: bool,
    pub top_attacks: Vec<usize>,
}

pub fn summarize(report: &ExperimentReport) -> RunSummary {
    RunSummary {
        run_id: report.run_id.clone(),
        strategy: report.config.strategy.name().to_string(),
        summary: report.summary.clone(),
        consistent: report.summary_is_consistent(),
        top_attacks: attack::find_attacks(report).iter().take(10).map(|r| r.candidate_id).collect(),
    }
}

/// Per-label record counts, for quick inspection of a stored dataset.
pub fn label_counts(dataset: &[LabeledImage]) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for s in dataset {
        *counts.entry(s.label.clone()).or_default() += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> PipelineConfig {
        PipelineConfig {
            dataset: DatasetConfig {
                num_identities: 2,
                samples_per_identity: 6,
                side: 64,
                seed: 5,
                expression_skew: None,
            },
            hidden: vec![256, 128],
            train: TrainConfig { epochs: 2, batch_size: 4, ..TrainConfig::default() },
            experiment: ExperimentConfig::default(),
        }
    }

    #[test]
    fn missing_model_names_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let layout = WorkspaceLayout::new(dir.path());
        let err = layout.load_model().unwrap_err();
        assert!(err.to_string().contains(MODEL_FILE), "{err}");
        assert!(err.to_string().contains("train"));
        assert!(matches!(step_pca(&layout), Err(WorkspaceError::Missing { what: "dataset manifest", .. })));
    }

    #[test]
    fn config_defaults_and_partial_json() {
        let cfg: PipelineConfig = serde_json::from_str(r#"{"train": {"epochs": 3}}"#).unwrap();
        assert_eq!(cfg.train.epochs, 3);
        assert_eq!(cfg.train.batch_size, TrainConfig::default().batch_size);
        assert_eq!(cfg.dataset, DatasetConfig::default());
        let seeded = cfg.with_seed(11);
        assert_eq!((seeded.dataset.seed, seeded.train.seed), (11, 11));
    }

    #[test]
    fn tiny_pipeline_end_to_end() {
        let dir = tempfile::tempdir().unwrap();
        let layout = WorkspaceLayout::new(dir.path());
        build_all(&layout, &tiny()).unwrap();
        let artifacts = Artifacts::load(&layout).unwrap();
        assert_eq!(artifacts.labels(), vec!["id00", "id01"]);
        assert_eq!(artifacts.component_ranges().unwrap().len(), 64);

        let strategy = artifacts.range_sweep("id00", &[0], 3).unwrap();
        let report = run_and_save(&layout, &artifacts, &strategy, &ExperimentConfig::default()).unwrap();
        assert_eq!(report.records.len(), 3);
        assert!(report.summary_is_consistent());
        assert_eq!(layout.list_reports().unwrap(), vec![report.run_id.clone()]);
        let lines = fs::read_to_string(layout.run_dir(&report.run_id).join(RECORDS_FILE)).unwrap();
        assert_eq!(lines.lines().count(), 3);
        assert_eq!(layout.load_report(&report.run_id).unwrap(), report);
        assert_eq!(summarize(&report).strategy, "sweep");
    }

    #[test]
    fn bookmarks_get_unique_ids_and_persist() {
        let dir = tempfile::tempdir().unwrap();
        let layout = WorkspaceLayout::new(dir.path());
        let a =
            add_bookmark(&layout, NewBookmark { coords: PcaCoords::zeros(), outcome: None, note: "a".into() }).unwrap();
        let b =
            add_bookmark(&layout, NewBookmark { coords: PcaCoords::zeros(), outcome: None, note: "b".into() }).unwrap();
        assert_ne!(a.bookmark_id, b.bookmark_id);
        let loaded = load_bookmarks(&layout).unwrap();
        assert_eq!(loaded, vec![a, b]);
    }
}
