//! End-to-end acceptance run on the default synthetic workspace.
//!
//! Prints one PASS/FAIL line per criterion and exits non-zero if any fails.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use latentforge::attack::{self, ExperimentConfig, ExperimentReport};
use latentforge::autoencoder::{gradient_check_pixels, Activation, AutoencoderModel, Dense, LatentVector};
use latentforge::latent_pca;
use latentforge::recognition::MatchResult;
use latentforge::workspace::{self, Artifacts, PipelineConfig, WorkspaceLayout};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Default)]
struct Gate {
    failures: usize,
}

impl Gate {
    fn check(&mut self, criterion: &str, pass: bool, detail: String) {
        println!("{} {criterion}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failures += 1;
        }
    }
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

fn pca_correctness(gate: &mut Gate) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 1000;
    let d = 64;
    // correlated latents with a spread-out spectrum
    let mixing: Vec<f64> = (0..d * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let scales: Vec<f64> = (0..d).map(|k| 3.0 * 0.93f64.powi(k as i32)).collect();
    let offset: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let g: Vec<f64> = (0..d).map(|k| scales[k] * rng.random_range(-1.0..1.0)).collect();
            (0..d).map(|i| offset[i] + (0..d).map(|k| mixing[i * d + k] * g[k]).sum::<f64>()).collect()
        })
        .collect();
    let latents: Vec<LatentVector> = rows.iter().map(|r| LatentVector::new(r.clone()).unwrap()).collect();
    let pca = latent_pca::fit(&latents).unwrap();

    let mut round_trip = 0.0f64;
    for z in &latents {
        let back = pca.inverse(&pca.transform(z).unwrap()).unwrap();
        for (a, b) in back.values().iter().zip(z.values()) {
            round_trip = round_trip.max((a - b).abs());
        }
    }

    let mut ortho = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            let dot: f64 = (0..d).map(|k| pca.basis[i][k] * pca.basis[j][k]).sum();
            ortho = ortho.max((dot - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }

    // brute-force two-pass sample covariance
    let mean: Vec<f64> = (0..d).map(|i| rows.iter().map(|r| r[i]).sum::<f64>() / n as f64).collect();
    let mut cov_err = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            let brute: f64 = rows.iter().map(|r| (r[i] - mean[i]) * (r[j] - mean[j])).sum::<f64>() / (n - 1) as f64;
            let rebuilt: f64 = (0..d).map(|k| pca.eigenvalues[k] * pca.basis[k][i] * pca.basis[k][j]).sum();
            cov_err = cov_err.max((brute - rebuilt).abs());
        }
    }
    let elapsed = start.elapsed();
    gate.check(
        "PCA correctness",
        round_trip <= 1e-9 && ortho <= 1e-8 && cov_err <= 1e-8 && elapsed < Duration::from_secs(10),
        format!("round trip {round_trip:.2e} (<=1e-9), orthonormality {ortho:.2e} (<=1e-8), covariance {cov_err:.2e} (<=1e-8), {} (<10s)", secs(elapsed)),
    );
}

fn dense(rng: &mut ChaCha8Rng, input: usize, output: usize, activation: Activation) -> Dense {
    let limit = (6.0 / (input + output) as f64).sqrt();
    Dense {
        activation,
        weights: Array2::from_shape_simple_fn((output, input), || rng.random_range(-limit..limit)),
        bias: Array1::from_shape_simple_fn(output, || rng.random_range(-0.1..0.1)),
    }
}

fn gradient_check(gate: &mut Gate) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let model = AutoencoderModel::from_layers(
        8,
        8,
        vec![dense(&mut rng, 64, 32, Activation::Tanh), dense(&mut rng, 32, 64, Activation::Linear)],
        vec![dense(&mut rng, 64, 32, Activation::Tanh), dense(&mut rng, 32, 64, Activation::Sigmoid)],
    )
    .unwrap();
    let pixels: Vec<f64> = (0..64).map(|_| rng.random_range(0.05..0.95)).collect();
    let err = gradient_check_pixels(&model, &pixels, 1e-5).unwrap();
    let elapsed = start.elapsed();
    gate.check(
        "Gradient check",
        model.param_count() <= 10_000 && err < 1e-4 && elapsed < Duration::from_secs(60),
        format!("{} params, max relative error {err:.2e} (<1e-4), {} (<60s)", model.param_count(), secs(elapsed)),
    );
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn strip_timestamp(report: &ExperimentReport) -> serde_json::Value {
    let mut v = serde_json::to_value(report).unwrap();
    v.as_object_mut().unwrap().remove("created_at");
    v
}

struct Runs {
    transition: ExperimentReport,
    pc1: ExperimentReport,
    three: ExperimentReport,
    sweeps_elapsed: Duration,
}

fn run_standard(layout: &WorkspaceLayout, artifacts: &Artifacts) -> Runs {
    let cfg = ExperimentConfig::default();
    let transition = workspace::run_and_save(layout, artifacts, &artifacts.default_transition(), &cfg).unwrap();
    let start = Instant::now();
    let pc1 = workspace::run_and_save(layout, artifacts, &artifacts.default_pc1_sweep().unwrap(), &cfg).unwrap();
    let labels = artifacts.labels();
    let three_strategy = artifacts.range_sweep(&labels[0], &[0, 1, 2], 5).unwrap();
    let three = workspace::run_and_save(layout, artifacts, &three_strategy, &cfg).unwrap();
    Runs { transition, pc1, three, sweeps_elapsed: start.elapsed() }
}

fn pipeline_criteria(gate: &mut Gate, root: &Path) -> (WorkspaceLayout, Runs) {
    let layout = WorkspaceLayout::new(root);
    let cfg = PipelineConfig::default();

    let start = Instant::now();
    workspace::step_gen(&layout, &cfg).unwrap();
    let training = workspace::step_train(&layout, &cfg).unwrap();
    let elapsed = start.elapsed();
    gate.check(
        "Training",
        training.final_mse <= 0.01 && elapsed < Duration::from_secs(600),
        format!(
            "MSE {:.5} (<=0.01) after {} epochs, {} (<10min)",
            training.final_mse,
            training.loss_history.len(),
            secs(elapsed)
        ),
    );

    let separation = workspace::step_pca(&layout).unwrap();
    let primary = separation.primary();
    gate.check(
        "Separation finding",
        primary.top_ratio() >= 2.0 * primary.median_ratio(),
        format!(
            "component {} ratio {:.3} vs median {:.3e} (>= 2x)",
            primary.argmax,
            primary.top_ratio(),
            primary.median_ratio()
        ),
    );

    let baselines = workspace::step_enroll(&layout).unwrap();
    let artifacts = Artifacts::load(&layout).unwrap();
    let (mut intra_min, mut inter_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for cell in &baselines.similarity_matrix {
        if cell.probe_label == cell.gallery_label {
            intra_min = intra_min.min(cell.stats.mean);
        } else {
            inter_max = inter_max.max(cell.stats.mean);
        }
    }
    let intra_pairs: Vec<f64> = artifacts
        .simulator
        .gallery_pair_similarities()
        .into_iter()
        .filter(|(a, b, _)| a == b)
        .map(|(_, _, s)| s)
        .collect();
    let intra_median = median(intra_pairs);
    gate.check(
        "Baseline structure",
        intra_min >= 95.0 && inter_max <= 20.0 && (intra_median - 99.0).abs() <= 0.5,
        format!("min intra mean {intra_min:.3} (>=95), max inter mean {inter_max:.3} (<=20), intra median {intra_median:.4} (99.0 +/- 0.5)"),
    );

    let runs = run_standard(&layout, &artifacts);

    let first = runs.transition.records.first().and_then(|r| r.outcome.clone());
    let last = runs.transition.records.last().and_then(|r| r.outcome.clone());
    let (pass, detail) = match (first, last) {
        (Some(first), Some(last)) => {
            let own = last.mean_similarity[&last.true_label];
            let other = last.max_off_label_similarity();
            (
                runs.transition.records.len() == 9 && !first.dodging && other > own,
                format!(
                    "{} steps; t=0 dodging={}; t=1 opposite {other:.3} vs source {own:.3}",
                    runs.transition.records.len(),
                    first.dodging
                ),
            )
        }
        _ => (false, "transition endpoints failed to evaluate".to_string()),
    };
    gate.check("PC1 transition", pass, detail);

    let dodging_hits =
        attack::find_attacks(&runs.pc1).iter().filter(|r| r.outcome.as_ref().is_some_and(|o| o.dodging)).count();
    let recount = attack::ReportSummary::from_records(&runs.three.records);
    gate.check(
        "Attack discovery",
        dodging_hits >= 1
            && runs.pc1.records.len() == 9
            && runs.three.records.len() == 125
            && recount == runs.three.summary
            && runs.sweeps_elapsed < Duration::from_secs(300),
        format!(
            "PC1 sweep quality-passing dodging {dodging_hits} (>=1); 3-component sweep {} candidates, summary recount {}; {} (<5min)",
            runs.three.records.len(),
            if recount == runs.three.summary { "matches" } else { "differs" },
            secs(runs.sweeps_elapsed)
        ),
    );
    (layout, runs)
}

fn threshold_boundary(gate: &mut Gate) {
    let result = |label: &str| MatchResult {
        entry_id: format!("{label}-0"),
        entry_label: label.into(),
        similarity: 80.0,
        confidence: 99.0,
        brightness: 50.0,
        sharpness: 50.0,
    };
    let outcome = attack::classify(&[result("A"), result("B")], "A", 80.0).unwrap();
    gate.check(
        "Threshold boundary",
        !outcome.dodging && outcome.impersonated_labels.is_empty(),
        format!("means exactly 80.0: dodging={}, impersonated={:?}", outcome.dodging, outcome.impersonated_labels),
    );
}

fn determinism(gate: &mut Gate, first: &(WorkspaceLayout, Runs), root: &Path) {
    let layout = WorkspaceLayout::new(root);
    workspace::build_all(&layout, &PipelineConfig::default()).unwrap();
    let artifacts = Artifacts::load(&layout).unwrap();
    let runs = run_standard(&layout, &artifacts);

    let read = |l: &WorkspaceLayout, p: fn(&WorkspaceLayout) -> std::path::PathBuf| std::fs::read(p(l)).unwrap();
    let model_same = read(&first.0, WorkspaceLayout::model_path) == read(&layout, WorkspaceLayout::model_path);
    let pca_same = read(&first.0, WorkspaceLayout::pca_path) == read(&layout, WorkspaceLayout::pca_path);
    let baselines_same =
        read(&first.0, WorkspaceLayout::baselines_path) == read(&layout, WorkspaceLayout::baselines_path);
    let reports_same =
        [(&first.1.transition, &runs.transition), (&first.1.pc1, &runs.pc1), (&first.1.three, &runs.three)]
            .iter()
            .all(|(a, b)| strip_timestamp(a) == strip_timestamp(b));
    let records_same = [&runs.transition, &runs.pc1, &runs.three].iter().all(|r| {
        std::fs::read(first.0.run_dir(&r.run_id).join(workspace::RECORDS_FILE)).unwrap()
            == std::fs::read(layout.run_dir(&r.run_id).join(workspace::RECORDS_FILE)).unwrap()
    });
    gate.check(
        "Determinism",
        model_same && pca_same && baselines_same && reports_same && records_same,
        format!(
            "model identical={model_same}, PCA identical={pca_same}, baselines identical={baselines_same}, reports identical modulo timestamps={reports_same}, record streams identical={records_same}"
        ),
    );
}

fn main() -> ExitCode {
    let mut gate = Gate::default();
    pca_correctness(&mut gate);
    gradient_check(&mut gate);
    threshold_boundary(&mut gate);

    let first_root = tempfile::tempdir().unwrap();
    let second_root = tempfile::tempdir().unwrap();
    let first = pipeline_criteria(&mut gate, first_root.path());
    determinism(&mut gate, &first, second_root.path());

    println!("acceptance: {} failed", gate.failures);
    if gate.failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
