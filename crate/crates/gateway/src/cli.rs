//! Command-line front end. Exit codes: 0 success, 1 usage error, 2 pipeline error.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use latentforge::attack::{CoordsSource, ExperimentConfig, Strategy};
use latentforge::manipulate::{SweepSpec, DEFAULT_STEPS};
use latentforge::workspace::{self, Artifacts, PipelineConfig, WorkspaceError, WorkspaceLayout};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::server;

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_PIPELINE: u8 = 2;

#[derive(Error, Debug)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Workspace(#[from] WorkspaceError),
    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("workspace not ready: {0}")]
    NotReady(String),
    #[error("server: {0}")]
    Server(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            _ => EXIT_PIPELINE,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "latentforge", version, about = "Latent-space PCA manipulation against a face matcher")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct GlobalArgs {
    /// Workspace root directory [default: ./workspace]
    #[arg(long, global = true)]
    pub workspace: Option<PathBuf>,
    /// Seed for dataset generation and training
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON config file; keys mirror the long flags, flags win
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Render the labeled synthetic dataset
    Gen(GenArgs),
    /// Train the autoencoder on the dataset
    Train(TrainArgs),
    /// Fit PCA over the latents and write the separation report
    Pca,
    /// Store reconstructions as the gallery, enroll them, compute baselines
    Enroll,
    /// Grid-sweep principal components around a base point
    Sweep(SweepArgs),
    /// Walk PC1 from one class mean to another
    Transition(TransitionArgs),
    /// Swap each component of a sample with a reference, one at a time
    Swaps(SwapsArgs),
    /// Summarize stored experiment reports
    Report(ReportArgs),
    /// Start the HTTP/JSON service
    Serve(ServeArgs),
}

#[derive(Args, Debug, Default)]
pub struct GenArgs {
    #[arg(long)]
    pub identities: Option<usize>,
    #[arg(long, visible_alias = "samples")]
    pub samples_per_identity: Option<usize>,
    #[arg(long)]
    pub side: Option<usize>,
}

#[derive(Args, Debug, Default)]
pub struct TrainArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct GateArgs {
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub gate_k: Option<f64>,
    #[arg(long)]
    pub confidence_slack: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Comma-separated component indices (0 is PC1)
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub indices: Vec<usize>,
    /// Explicit `lo:hi` ranges, one per index; defaults to the dataset range
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub ranges: Vec<String>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Start from this dataset sample instead of a class mean
    #[arg(long, conflicts_with = "label")]
    pub sample: Option<String>,
    /// Start from this label's class mean [default: first label]
    #[arg(long)]
    pub label: Option<String>,
    #[command(flatten)]
    pub gate: GateArgs,
}

#[derive(Args, Debug)]
pub struct TransitionArgs {
    #[arg(long)]
    pub from: Option<String>,
    #[arg(long)]
    pub to: Option<String>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[command(flatten)]
    pub gate: GateArgs,
}

#[derive(Args, Debug)]
pub struct SwapsArgs {
    /// Sample whose components are swapped
    #[arg(long)]
    pub sample: String,
    /// Take replacement values from this label's class mean
    #[arg(long, conflicts_with = "reference_sample")]
    pub reference_label: Option<String>,
    /// Take replacement values from this sample
    #[arg(long)]
    pub reference_sample: Option<String>,
    #[command(flatten)]
    pub gate: GateArgs,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Run to summarize; all runs when omitted
    pub run_id: Option<String>,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long)]
    pub host: Option<String>,
    #[arg(long)]
    pub port: Option<u16>,
}

/// Config file contents. Every key is optional and mirrors a long flag.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub workspace: Option<PathBuf>,
    pub seed: Option<u64>,
    pub identities: Option<usize>,
    pub samples_per_identity: Option<usize>,
    pub side: Option<usize>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub steps: Option<usize>,
    pub threshold: Option<f64>,
    pub gate_k: Option<f64>,
    pub confidence_slack: Option<f64>,
    pub host: Option<String>,
    pub port: Option<u16>,
}

impl FileConfig {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config { path: path.to_path_buf(), message: e.to_string() })?;
        serde_json::from_str(&text).map_err(|e| CliError::Config { path: path.to_path_buf(), message: e.to_string() })
    }
}

/// Flags merged over the config file over built-in defaults.
struct Resolved {
    layout: WorkspaceLayout,
    file: FileConfig,
    pipeline: PipelineConfig,
}

fn resolve(global: &GlobalArgs) -> Result<Resolved, CliError> {
    let file = match &global.config {
        Some(path) => FileConfig::read(path)?,
        None => FileConfig::default(),
    };
    let root =
        global.workspace.clone().or_else(|| file.workspace.clone()).unwrap_or_else(|| PathBuf::from("workspace"));
    let mut pipeline = PipelineConfig::default();
    if let Some(seed) = global.seed.or(file.seed) {
        pipeline = pipeline.with_seed(seed);
    }
    let d = &mut pipeline.dataset;
    d.num_identities = file.identities.unwrap_or(d.num_identities);
    d.samples_per_identity = file.samples_per_identity.unwrap_or(d.samples_per_identity);
    d.side = file.side.unwrap_or(d.side);
    let t = &mut pipeline.train;
    t.epochs = file.epochs.unwrap_or(t.epochs);
    t.batch_size = file.batch_size.unwrap_or(t.batch_size);
    t.learning_rate = file.learning_rate.unwrap_or(t.learning_rate);
    let e = &mut pipeline.experiment;
    e.threshold = file.threshold.unwrap_or(e.threshold);
    e.gate_k = file.gate_k.unwrap_or(e.gate_k);
    e.confidence_slack = file.confidence_slack.unwrap_or(e.confidence_slack);
    Ok(Resolved { layout: WorkspaceLayout::new(root), file, pipeline })
}

fn experiment(base: &ExperimentConfig, gate: &GateArgs) -> ExperimentConfig {
    ExperimentConfig {
        threshold: gate.threshold.unwrap_or(base.threshold),
        gate_k: gate.gate_k.unwrap_or(base.gate_k),
        confidence_slack: gate.confidence_slack.unwrap_or(base.confidence_slack),
        run_id: None,
    }
}

fn parse_range(text: &str) -> Result<(f64, f64), CliError> {
    let bad = || CliError::Usage(format!("range `{text}` is not lo:hi"));
    let (lo, hi) = text.split_once(':').ok_or_else(bad)?;
    Ok((lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?))
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("output serializes"));
}

fn run_strategy(
    r: &Resolved,
    artifacts: &Artifacts,
    strategy: Strategy,
    cfg: &ExperimentConfig,
) -> Result<(), CliError> {
    let report = workspace::run_and_save(&r.layout, artifacts, &strategy, cfg)?;
    print_json(&workspace::summarize(&report));
    eprintln!("report: {}", r.layout.report_path(&report.run_id).display());
    Ok(())
}

fn sweep_strategy(r: &Resolved, args: &SweepArgs, artifacts: &Artifacts) -> Result<Strategy, CliError> {
    let steps = args.steps.or(r.file.steps).unwrap_or(DEFAULT_STEPS);
    let base = match (&args.sample, &args.label) {
        (Some(id), _) => CoordsSource::Sample { sample_id: id.clone() },
        (None, Some(label)) => CoordsSource::ClassMean { label: label.clone() },
        (None, None) => CoordsSource::ClassMean { label: artifacts.labels()[0].clone() },
    };
    let ranges = if args.ranges.is_empty() {
        let all = artifacts.component_ranges()?;
        args.indices
            .iter()
            .map(|&i| all.get(i).copied().ok_or_else(|| CliError::Usage(format!("component index {i} out of range"))))
            .collect::<Result<Vec<_>, _>>()?
    } else {
        if args.ranges.len() != args.indices.len() {
            return Err(CliError::Usage(format!("{} indices but {} ranges", args.indices.len(), args.ranges.len())));
        }
        args.ranges.iter().map(|s| parse_range(s)).collect::<Result<Vec<_>, _>>()?
    };
    let spec = SweepSpec { indices: args.indices.clone(), ranges, steps };
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(Strategy::Sweep { base, spec })
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let mut r = resolve(&cli.global)?;
    match cli.command {
        Command::Gen(args) => {
            let d = &mut r.pipeline.dataset;
            d.num_identities = args.identities.unwrap_or(d.num_identities);
            d.samples_per_identity = args.samples_per_identity.unwrap_or(d.samples_per_identity);
            d.side = args.side.unwrap_or(d.side);
            let n = workspace::step_gen(&r.layout, &r.pipeline)?;
            print_json(&serde_json::json!({ "samples": n, "dataset": r.layout.dataset_dir() }));
        }
        Command::Train(args) => {
            let t = &mut r.pipeline.train;
            t.epochs = args.epochs.unwrap_or(t.epochs);
            t.batch_size = args.batch_size.unwrap_or(t.batch_size);
            t.learning_rate = args.learning_rate.unwrap_or(t.learning_rate);
            let summary = workspace::step_train(&r.layout, &r.pipeline)?;
            print_json(&serde_json::json!({
                "final_mse": summary.final_mse,
                "epochs": summary.loss_history.len(),
                "model": r.layout.model_path(),
            }));
        }
        Command::Pca => {
            let report = workspace::step_pca(&r.layout)?;
            let p = report.primary();
            print_json(&serde_json::json!({
                "labels": [p.label_a, p.label_b],
                "top_component": p.argmax,
                "top_ratio": p.top_ratio(),
                "median_ratio": p.median_ratio(),
                "report": r.layout.separation_path(),
            }));
        }
        Command::Enroll => {
            let baselines = workspace::step_enroll(&r.layout)?;
            print_json(&baselines);
        }
        Command::Sweep(args) => {
            let artifacts = Artifacts::load(&r.layout)?;
            let strategy = sweep_strategy(&r, &args, &artifacts)?;
            let cfg = experiment(&r.pipeline.experiment, &args.gate);
            run_strategy(&r, &artifacts, strategy, &cfg)?;
        }
        Command::Transition(args) => {
            let steps = args.steps.or(r.file.steps).unwrap_or(DEFAULT_STEPS);
            let artifacts = Artifacts::load(&r.layout)?;
            let (from, to) = match (args.from, args.to) {
                (Some(f), Some(t)) => (f, t),
                (None, None) => {
                    let labels = artifacts.labels();
                    (labels[0].clone(), labels[1].clone())
                }
                _ => return Err(CliError::Usage("--from and --to go together".into())),
            };
            let cfg = experiment(&r.pipeline.experiment, &args.gate);
            run_strategy(&r, &artifacts, Strategy::Transition { from_label: from, to_label: to, steps }, &cfg)?;
        }
        Command::Swaps(args) => {
            let reference = match (args.reference_label, args.reference_sample) {
                (Some(label), None) => CoordsSource::ClassMean { label },
                (None, Some(sample_id)) => CoordsSource::Sample { sample_id },
                _ => return Err(CliError::Usage("give --reference-label or --reference-sample".into())),
            };
            let artifacts = Artifacts::load(&r.layout)?;
            let strategy = Strategy::Swaps { original: CoordsSource::Sample { sample_id: args.sample }, reference };
            let cfg = experiment(&r.pipeline.experiment, &args.gate);
            run_strategy(&r, &artifacts, strategy, &cfg)?;
        }
        Command::Report(args) => {
            let ids = match args.run_id {
                Some(id) => vec![id],
                None => r.layout.list_reports()?,
            };
            let summaries = ids
                .iter()
                .map(|id| r.layout.load_report(id).map(|rep| workspace::summarize(&rep)))
                .collect::<Result<Vec<_>, _>>()?;
            print_json(&summaries);
        }
        Command::Serve(args) => {
            let host = args.host.or(r.file.host.clone()).unwrap_or_else(|| "127.0.0.1".into());
            let port = args.port.or(r.file.port).unwrap_or(8080);
            let addr: SocketAddr =
                format!("{host}:{port}").parse().map_err(|e| CliError::Usage(format!("address {host}:{port}: {e}")))?;
            let state = server::AppState::load(r.layout.clone(), r.pipeline.experiment.clone());
            if let Some(reason) = state.unavailable_reason() {
                return Err(CliError::NotReady(reason.to_string()));
            }
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(server::serve(state, addr))?;
        }
    }
    Ok(())
}

/// Parses `argv`, runs the command and maps the outcome to an exit code.
pub fn dispatch<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_parse() {
        assert_eq!(parse_range("-1.5:2").unwrap(), (-1.5, 2.0));
        assert!(matches!(parse_range("1..2"), Err(CliError::Usage(_))));
        assert!(parse_range("a:1").is_err());
    }

    #[test]
    fn flags_override_config_over_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"seed": 5, "workspace": "from-file", "epochs": 9, "gate-k": 3.0}"#).unwrap();
        let global = GlobalArgs { workspace: None, seed: Some(11), config: Some(path) };
        let r = resolve(&global).unwrap();
        assert_eq!(r.layout.root(), Path::new("from-file"));
        assert_eq!((r.pipeline.dataset.seed, r.pipeline.train.seed), (11, 11));
        assert_eq!(r.pipeline.train.epochs, 9);
        assert_eq!(r.pipeline.experiment.gate_k, 3.0);
        assert_eq!(r.pipeline.train.batch_size, PipelineConfig::default().train.batch_size);

        let defaults = resolve(&GlobalArgs::default()).unwrap();
        assert_eq!(defaults.layout.root(), Path::new("workspace"));
        assert_eq!(defaults.pipeline, PipelineConfig::default());
    }

    #[test]
    fn gate_flags_override_base() {
        let base = ExperimentConfig::default();
        let cfg = experiment(&base, &GateArgs { threshold: Some(70.0), ..GateArgs::default() });
        assert_eq!(cfg.threshold, 70.0);
        assert_eq!(cfg.gate_k, base.gate_k);
    }
}
