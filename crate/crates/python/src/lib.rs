//! Python bindings. Structured results (reports, match results, outcomes)
//! cross the boundary as plain dicts and lists.

use std::path::PathBuf;

use latentforge::attack::{self, CoordsSource, ExperimentConfig, Strategy};
use latentforge::imaging;
use latentforge::latent_pca::PcaCoords;
use latentforge::manipulate::SweepSpec;
use latentforge::recognition::{MatchResult, RecognitionClient};
use latentforge::workspace::{self, Artifacts, PipelineConfig, WorkspaceLayout};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict, PyList};
use serde::Serialize;

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py(py: Python<'_>, value: &serde_json::Value) -> PyResult<Py<PyAny>> {
    use serde_json::Value;
    Ok(match value {
        Value::Null => py.None(),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any().unbind(),
        Value::Number(n) => match (n.as_i64(), n.as_u64()) {
            (Some(i), _) => i.into_pyobject(py)?.into_any().unbind(),
            (None, Some(u)) => u.into_pyobject(py)?.into_any().unbind(),
            _ => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any().unbind(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any().unbind(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(to_py(py, item)?)?;
            }
            list.into_any().unbind()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, v) in map {
                dict.set_item(k, to_py(py, v)?)?;
            }
            dict.into_any().unbind()
        }
    })
}

fn serialize<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    to_py(py, &serde_json::to_value(value).map_err(runtime_err)?)
}

fn to_coords(values: Vec<f64>) -> PyResult<PcaCoords> {
    PcaCoords::new(values).map_err(value_err)
}

/// Grayscale image with pixels in [0, 1], row-major.
#[pyclass(name = "FaceImage", module = "latentforge", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyFaceImage {
    inner: imaging::FaceImage,
}

#[pymethods]
impl PyFaceImage {
    #[new]
    fn new(width: usize, height: usize, pixels: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: imaging::FaceImage::new(width, height, pixels).map_err(value_err)? })
    }

    #[staticmethod]
    fn from_pgm(data: &[u8]) -> PyResult<Self> {
        Ok(Self { inner: imaging::FaceImage::from_pgm(data).map_err(value_err)? })
    }

    fn to_pgm<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.inner.to_pgm())
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    #[getter]
    fn pixels(&self) -> Vec<f64> {
        self.inner.pixels().to_vec()
    }

    fn brightness(&self) -> f64 {
        imaging::brightness(&self.inner)
    }

    fn laplacian_variance(&self) -> PyResult<f64> {
        imaging::laplacian_variance(&self.inner).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!("FaceImage({}x{})", self.inner.width(), self.inner.height())
    }
}

/// A workspace directory and the pipeline steps that build it.
#[pyclass(name = "Workspace", module = "latentforge", frozen)]
pub struct PyWorkspace {
    layout: WorkspaceLayout,
    config: PipelineConfig,
}

#[pymethods]
impl PyWorkspace {
    /// `config` is an optional JSON string in the pipeline config shape.
    #[new]
    #[pyo3(signature = (root, seed=None, config=None))]
    fn new(root: PathBuf, seed: Option<u64>, config: Option<&str>) -> PyResult<Self> {
        let mut cfg: PipelineConfig = match config {
            Some(text) => serde_json::from_str(text).map_err(value_err)?,
            None => PipelineConfig::default(),
        };
        if let Some(seed) = seed {
            cfg = cfg.with_seed(seed);
        }
        Ok(Self { layout: WorkspaceLayout::new(root), config: cfg })
    }

    #[getter]
    fn config(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        serialize(py, &self.config)
    }

    fn gen(&self) -> PyResult<usize> {
        workspace::step_gen(&self.layout, &self.config).map_err(runtime_err)
    }

    /// Returns the final reconstruction MSE.
    fn train(&self) -> PyResult<f64> {
        Ok(workspace::step_train(&self.layout, &self.config).map_err(runtime_err)?.final_mse)
    }

    fn pca(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        serialize(py, &workspace::step_pca(&self.layout).map_err(runtime_err)?)
    }

    fn enroll(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        serialize(py, &workspace::step_enroll(&self.layout).map_err(runtime_err)?)
    }

    fn build(&self) -> PyResult<()> {
        workspace::build_all(&self.layout, &self.config).map_err(runtime_err)
    }

    fn load(&self) -> PyResult<PySession> {
        let artifacts = Artifacts::load(&self.layout).map_err(runtime_err)?;
        Ok(PySession { layout: self.layout.clone(), artifacts, experiment: self.config.experiment.clone() })
    }
}

/// Loaded models, gallery and baselines of a built workspace.
#[pyclass(name = "Session", module = "latentforge", frozen)]
pub struct PySession {
    layout: WorkspaceLayout,
    artifacts: Artifacts,
    experiment: ExperimentConfig,
}

impl PySession {
    fn save(&self, py: Python<'_>, strategy: Strategy) -> PyResult<Py<PyAny>> {
        let report =
            workspace::run_and_save(&self.layout, &self.artifacts, &strategy, &self.experiment).map_err(runtime_err)?;
        serialize(py, &report)
    }
}

#[pymethods]
impl PySession {
    fn labels(&self) -> Vec<String> {
        self.artifacts.labels()
    }

    fn component_ranges(&self) -> PyResult<Vec<(f64, f64)>> {
        self.artifacts.component_ranges().map_err(runtime_err)
    }

    fn eigenvalues(&self) -> Vec<f64> {
        self.artifacts.pca.eigenvalues.clone()
    }

    fn baselines(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        serialize(py, &self.artifacts.baselines)
    }

    fn separation(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        serialize(py, &self.artifacts.separation)
    }

    /// PCA coordinates of a dataset sample.
    fn sample_coords(&self, sample_id: &str) -> PyResult<Vec<f64>> {
        self.artifacts
            .samples
            .iter()
            .find(|s| s.sample_id == sample_id)
            .map(|s| s.coords.values().to_vec())
            .ok_or_else(|| PyValueError::new_err(format!("unknown sample {sample_id}")))
    }

    fn encode(&self, image: &PyFaceImage) -> PyResult<Vec<f64>> {
        let z = self.artifacts.autoencoder.encode(&image.inner).map_err(value_err)?;
        Ok(self.artifacts.pca.transform(&z).map_err(value_err)?.into_values())
    }

    fn decode(&self, coords: Vec<f64>) -> PyResult<PyFaceImage> {
        let z = self.artifacts.pca.inverse(&to_coords(coords)?).map_err(value_err)?;
        Ok(PyFaceImage { inner: self.artifacts.autoencoder.decode(&z).map_err(value_err)? })
    }

    fn compare(&self, py: Python<'_>, image: &PyFaceImage) -> PyResult<Py<PyAny>> {
        serialize(py, &self.artifacts.simulator.compare(&image.inner).map_err(value_err)?)
    }

    /// Decode, compare, classify and gate one candidate.
    fn explore(&self, py: Python<'_>, coords: Vec<f64>, true_label: &str) -> PyResult<Py<PyAny>> {
        let (image, outcome, results) =
            self.artifacts.explore(&to_coords(coords)?, true_label, &self.experiment).map_err(runtime_err)?;
        let out = serde_json::json!({ "outcome": outcome, "results": results });
        let dict = to_py(py, &out)?;
        dict.bind(py).set_item("image", PyFaceImage { inner: image })?;
        Ok(dict)
    }

    /// Sweep `indices` over `ranges` from a label's class mean.
    #[pyo3(signature = (indices, ranges=None, steps=9, label=None))]
    fn sweep(
        &self,
        py: Python<'_>,
        indices: Vec<usize>,
        ranges: Option<Vec<(f64, f64)>>,
        steps: usize,
        label: Option<String>,
    ) -> PyResult<Py<PyAny>> {
        let label = label.unwrap_or_else(|| self.artifacts.labels()[0].clone());
        let strategy = match ranges {
            None => self.artifacts.range_sweep(&label, &indices, steps).map_err(value_err)?,
            Some(ranges) => {
                Strategy::Sweep { base: CoordsSource::ClassMean { label }, spec: SweepSpec { indices, ranges, steps } }
            }
        };
        self.save(py, strategy)
    }

    #[pyo3(signature = (from_label, to_label, steps=9))]
    fn transition(&self, py: Python<'_>, from_label: String, to_label: String, steps: usize) -> PyResult<Py<PyAny>> {
        self.save(py, Strategy::Transition { from_label, to_label, steps })
    }

    fn swaps(&self, py: Python<'_>, sample_id: String, reference_label: String) -> PyResult<Py<PyAny>> {
        self.save(
            py,
            Strategy::Swaps {
                original: CoordsSource::Sample { sample_id },
                reference: CoordsSource::ClassMean { label: reference_label },
            },
        )
    }
}

/// Classify `(label, similarity)` pairs against `true_label`.
#[pyfunction]
#[pyo3(signature = (similarities, true_label, threshold=80.0))]
fn classify(py: Python<'_>, similarities: Vec<(String, f64)>, true_label: &str, threshold: f64) -> PyResult<Py<PyAny>> {
    let results: Vec<MatchResult> = similarities
        .into_iter()
        .enumerate()
        .map(|(i, (label, similarity))| MatchResult {
            entry_id: format!("{label}-{i}"),
            entry_label: label,
            similarity,
            confidence: 0.0,
            brightness: 0.0,
            sharpness: 0.0,
        })
        .collect();
    serialize(py, &attack::classify(&results, true_label, threshold).map_err(value_err)?)
}

/// Render one synthetic face for identity seed `seed` at neutral expression.
#[pyfunction]
#[pyo3(signature = (seed, side=64))]
fn render_identity(seed: u64, side: usize) -> PyResult<PyFaceImage> {
    let identity = latentforge::synthface::gen_identity(seed);
    let image = latentforge::synthface::render(&identity, &Default::default(), side).map_err(value_err)?;
    Ok(PyFaceImage { inner: image })
}

#[pymodule]
#[pyo3(name = "latentforge")]
fn latentforge_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFaceImage>()?;
    m.add_class::<PyWorkspace>()?;
    m.add_class::<PySession>()?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(render_identity, m)?)?;
    m.add("LATENT_DIM", latentforge::autoencoder::LATENT_DIM)?;
    Ok(())
}
