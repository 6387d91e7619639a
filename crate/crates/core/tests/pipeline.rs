//! End-to-end behavior of the default workspace beyond the acceptance gate.

use std::sync::OnceLock;

use latentforge::attack::{self, CoordsSource, ExperimentConfig, Strategy};
use latentforge::imaging::FaceImage;
use latentforge::manipulate::{self, SweepSpec};
use latentforge::recognition::{self, CompareRequest, RecognitionClient, SimulatorModel};
use latentforge::workspace::{self, Artifacts, PipelineConfig, WorkspaceLayout};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Shared {
    _dir: tempfile::TempDir,
    layout: WorkspaceLayout,
    artifacts: Artifacts,
}

fn shared() -> &'static Shared {
    static CELL: OnceLock<Shared> = OnceLock::new();
    CELL.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let layout = WorkspaceLayout::new(dir.path());
        workspace::build_all(&layout, &PipelineConfig::default()).unwrap();
        let artifacts = Artifacts::load(&layout).unwrap();
        Shared { _dir: dir, layout, artifacts }
    })
}

#[test]
fn empty_sweep_on_a_training_image_is_a_clean_self_probe() {
    let s = shared();
    for sample_id in ["id00-000", "id01-042"] {
        let strategy = Strategy::Sweep {
            base: CoordsSource::Sample { sample_id: sample_id.into() },
            spec: SweepSpec { indices: vec![], ranges: vec![], steps: 2 },
        };
        let report = attack::run_experiment(&s.artifacts.context(), &strategy, &ExperimentConfig::default()).unwrap();
        assert_eq!(report.records.len(), 1);
        let outcome = report.records[0].outcome.as_ref().unwrap();
        assert_eq!(outcome.quality_pass, Some(true), "{sample_id}: {:?}", outcome.quality_reasons);
        assert!(!outcome.dodging, "{sample_id}: {:?}", outcome.mean_similarity);
    }
}

#[test]
fn explore_of_encoded_gallery_image_does_not_dodge() {
    let s = shared();
    let a = &s.artifacts;
    for entry in a.gallery.iter().step_by(37) {
        let coords = a.pca.transform(&a.autoencoder.encode(&entry.image).unwrap()).unwrap();
        let (image, outcome, results) = a.explore(&coords, &entry.label, &ExperimentConfig::default()).unwrap();
        assert_eq!(image.width(), 64);
        assert_eq!(results.len(), a.gallery.len());
        assert!(!outcome.dodging, "{}: {:?}", entry.entry_id, outcome.mean_similarity);
    }
}

#[test]
fn gallery_probe_matches_itself_best() {
    let s = shared();
    let sim = &s.artifacts.simulator;
    for entry in s.artifacts.gallery.iter().step_by(11) {
        let results = sim.compare(&entry.image).unwrap();
        let own = results.iter().find(|r| r.entry_id == entry.entry_id).unwrap().similarity;
        let mut sims: Vec<f64> = results.iter().map(|r| r.similarity).collect();
        sims.sort_by(f64::total_cmp);
        let p99 = sims[((sims.len() - 1) as f64 * 0.99).round() as usize];
        assert!(own >= p99, "{}: own {own} vs p99 {p99}", entry.entry_id);
    }
}

#[test]
fn noise_probe_has_lower_confidence_than_any_gallery_self_probe() {
    let s = shared();
    let sim = &s.artifacts.simulator;
    let gallery_min = s.artifacts.gallery.iter().map(|e| sim.confidence(&e.image)).fold(f64::INFINITY, f64::min);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..5 {
        let noise = FaceImage::new(64, 64, (0..64 * 64).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
        let conf = sim.compare(&noise).unwrap()[0].confidence;
        assert!(conf < gallery_min, "noise {conf} vs gallery min {gallery_min}");
    }
}

#[test]
fn enrollment_is_deterministic() {
    let s = shared();
    let again = SimulatorModel::enroll(&s.artifacts.gallery).unwrap();
    assert_eq!(again, s.artifacts.simulator);
    assert_eq!(again.a.to_bits(), s.artifacts.simulator.a.to_bits());
    assert_eq!(again.b.to_bits(), s.artifacts.simulator.b.to_bits());
}

#[test]
fn wire_compare_matches_direct_compare() {
    let s = shared();
    let probe = &s.artifacts.gallery[3].image;
    let via_wire = recognition::handle_compare(&s.artifacts.simulator, &CompareRequest::for_probe(probe)).unwrap();
    assert_eq!(via_wire.results, s.artifacts.simulator.compare(probe).unwrap());
}

#[test]
fn stored_baselines_match_a_fresh_computation() {
    let s = shared();
    let fresh = recognition::compute_baselines(&s.artifacts.simulator, &s.artifacts.gallery).unwrap();
    assert_eq!(fresh, s.artifacts.baselines);
}

#[test]
fn saved_run_streams_every_record_in_order() {
    let s = shared();
    let strategy = Strategy::Swaps {
        original: CoordsSource::Sample { sample_id: "id00-005".into() },
        reference: CoordsSource::ClassMean { label: "id01".into() },
    };
    let report = workspace::run_and_save(&s.layout, &s.artifacts, &strategy, &ExperimentConfig::default()).unwrap();
    assert_eq!(report.records.len(), 64);
    let text = std::fs::read_to_string(s.layout.run_dir(&report.run_id).join(workspace::RECORDS_FILE)).unwrap();
    let ids: Vec<usize> =
        text.lines().map(|l| serde_json::from_str::<attack::ExperimentRecord>(l).unwrap().candidate_id).collect();
    assert_eq!(ids, (0..64).collect::<Vec<_>>());
    assert!(report.summary_is_consistent());

    let hits = attack::find_attacks(&report);
    let keys: Vec<f64> = hits.iter().map(|r| r.outcome.as_ref().unwrap().max_off_label_similarity()).collect();
    assert!(keys.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn training_loss_rarely_increases() {
    let text = std::fs::read_to_string(shared().layout.training_path()).unwrap();
    let summary: workspace::TrainingSummary = serde_json::from_str(&text).unwrap();
    let h = &summary.loss_history;
    let increases = h.windows(2).filter(|w| w[1] > w[0]).count();
    assert!((increases as f64) < 0.1 * (h.len() - 1) as f64, "{increases} increases over {} epochs", h.len());
}

#[test]
fn class_means_match_independent_accumulation() {
    let samples = &shared().artifacts.samples;
    let means = manipulate::class_mean_coords(&attack::coords_by_label(samples)).unwrap();
    for (label, mean) in &means {
        for (i, &m) in mean.values().iter().enumerate() {
            let own: Vec<f64> = samples.iter().filter(|s| &s.label == label).map(|s| s.coords.values()[i]).collect();
            let naive = own.iter().rev().sum::<f64>() / own.len() as f64;
            assert!((m - naive).abs() <= 1e-10, "{label}[{i}]: {m} vs {naive}");
        }
    }
}

#[test]
fn component_ranges_match_exhaustive_scan() {
    let a = &shared().artifacts;
    let ranges = a.component_ranges().unwrap();
    for (i, &(lo, hi)) in ranges.iter().enumerate() {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for s in &a.samples {
            let v = s.coords.values()[i];
            if v < min {
                min = v;
            }
            if v > max {
                max = v;
            }
        }
        assert_eq!((lo, hi), (min, max), "component {i}");
    }
}
