//! Python bindings: synthetic recordings, feature extraction, training and
//! the online learner, operating on plain lists and file paths.

use std::path::PathBuf;

use har_core::features::feature_names as core_feature_names;
use har_core::harness::{
    extract_records, load_stream, run_pipeline as core_run_pipeline, synthesize_user, training_profile, HarnessConfig,
    PipelineMode, RecordingPaths,
};
use har_core::model::{load_model, read_model, save_model, train_supervised, weight_bytes, write_model, TrainConfig};
use har_core::online::update_weights_in_place;
use har_core::{segment_stream, ActivityLabel, FeatureVector, NetworkParams, RewardEvent};
use pyo3::exceptions::{PyArithmeticError, PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

fn to_py(err: har_core::Error) -> PyErr {
    let message = err.to_string();
    if err.is_numeric() {
        PyArithmeticError::new_err(message)
    } else if matches!(err, har_core::Error::Io(_)) {
        PyIOError::new_err(message)
    } else {
        PyValueError::new_err(message)
    }
}

fn label(code: &str) -> PyResult<ActivityLabel> {
    code.parse().map_err(to_py)
}

fn features(values: &[f64]) -> PyResult<FeatureVector> {
    FeatureVector::from_slice(values).map_err(to_py)
}

type Labeled = (Vec<Vec<f64>>, Vec<Option<String>>);
type RecognizedRow = (String, i64, i64, Option<String>, f64);

/// A trained classifier. Probabilities are returned in activity-code order,
/// see `activities()`.
#[pyclass(name = "Model", module = "har")]
pub struct PyModel {
    params: NetworkParams,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            params: load_model(path).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        Ok(Self {
            params: read_model(data).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_model(&self.params, path).map_err(to_py)
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &write_model(&self.params))
    }

    #[getter]
    fn n_hidden(&self) -> usize {
        self.params.n_hidden()
    }

    #[getter]
    fn weight_bytes(&self) -> usize {
        weight_bytes(self.params.n_hidden())
    }

    /// Most probable activity code and the full probability vector.
    fn classify(&self, x: Vec<f64>) -> PyResult<(String, Vec<f64>)> {
        let policy = self.params.forward(&features(&x)?).map_err(to_py)?;
        Ok((policy.action().code().to_string(), policy.probs))
    }

    /// One policy-gradient step on the output layer after taking `action`
    /// for input `x` and receiving `reward` in {-1, 0, +1}.
    #[pyo3(signature = (x, action, reward, alpha=0.01))]
    fn update(&mut self, x: Vec<f64>, action: &str, reward: f64, alpha: f64) -> PyResult<()> {
        let policy = self.params.forward(&features(&x)?).map_err(to_py)?;
        let event = RewardEvent::new(reward, label(action)?, policy).map_err(to_py)?;
        update_weights_in_place(&mut self.params, &event, alpha).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("Model(n_hidden={})", self.params.n_hidden())
    }
}

/// Activity codes in output order.
#[pyfunction]
fn activities() -> Vec<&'static str> {
    ActivityLabel::ALL.iter().map(|a| a.code()).collect()
}

/// Feature column names in vector order.
#[pyfunction]
fn feature_names() -> Vec<String> {
    core_feature_names()
}

/// Write a labeled synthetic recording (stretch.csv, accel.csv, labels.csv)
/// into `out_dir`. Returns the number of segments the default pipeline cuts.
#[pyfunction]
#[pyo3(signature = (out_dir, seed=0, duration_s=120.0, user=0))]
fn synthesize(out_dir: PathBuf, seed: u64, duration_s: f64, user: usize) -> PyResult<usize> {
    let config = HarnessConfig::default();
    let profile = training_profile(&config.synth.profile, user);
    let corpus = synthesize_user(seed, &profile, duration_s, &config).map_err(to_py)?;
    let rec = &corpus.recording;
    har_core::harness::write_recording(&out_dir, &rec.raw, Some(&rec.labels)).map_err(to_py)?;
    Ok(corpus.records.len())
}

/// Segment a recording directory and extract one feature vector per
/// segment. Labels are activity codes, or None where no label covers the
/// majority of the segment.
#[pyfunction]
fn extract_features(input_dir: PathBuf) -> PyResult<Labeled> {
    let config = HarnessConfig::default();
    let stream = load_stream(&RecordingPaths::in_dir(&input_dir), &config.preprocess).map_err(to_py)?;
    let segments = segment_stream(&stream, config.segmenter).map_err(to_py)?;
    let records = extract_records(&stream, &segments);
    let xs = records.iter().map(|r| r.features.as_slice().to_vec()).collect();
    let ys = records.iter().map(|r| r.label.map(|l| l.code().to_string())).collect();
    Ok((xs, ys))
}

/// Train a classifier. Returns the model and its held-out test accuracy.
#[pyfunction]
#[pyo3(signature = (x, y, n_hidden=4, epochs=1500, seed=0, test_fraction=0.2, restarts=4))]
#[allow(clippy::too_many_arguments)]
fn train(
    py: Python<'_>,
    x: Vec<Vec<f64>>,
    y: Vec<String>,
    n_hidden: usize,
    epochs: usize,
    seed: u64,
    test_fraction: f64,
    restarts: usize,
) -> PyResult<(PyModel, Option<f64>)> {
    if x.len() != y.len() {
        return Err(PyValueError::new_err(format!(
            "{} feature rows but {} labels",
            x.len(),
            y.len()
        )));
    }
    let data = x
        .iter()
        .zip(&y)
        .map(|(row, code)| Ok((features(row)?, label(code)?)))
        .collect::<PyResult<Vec<_>>>()?;
    let config = TrainConfig {
        n_hidden,
        epochs,
        seed,
        test_fraction,
        restarts,
        ..TrainConfig::default()
    };
    let outcome = py.detach(|| train_supervised(&data, &config)).map_err(to_py)?;
    Ok((PyModel { params: outcome.params }, outcome.test_accuracy))
}

/// Run the full pipeline over a recording directory. Returns
/// `(activity, start_ms, end_ms, truth, confidence)` tuples and writes the
/// updated model to `model_out` when given.
#[pyfunction]
#[pyo3(signature = (input_dir, model_path, mode="infer", alpha=0.01, model_out=None))]
fn run_pipeline(
    py: Python<'_>,
    input_dir: PathBuf,
    model_path: PathBuf,
    mode: &str,
    alpha: f64,
    model_out: Option<PathBuf>,
) -> PyResult<Vec<RecognizedRow>> {
    let mode: PipelineMode = mode.parse().map_err(to_py)?;
    let mut config = HarnessConfig::default();
    config.learner.alpha = alpha;
    let paths = RecordingPaths::in_dir(&input_dir);
    let out = py
        .detach(|| core_run_pipeline(&paths, &model_path, mode, &config))
        .map_err(to_py)?;
    if let Some(path) = model_out {
        save_model(&out.params, path).map_err(to_py)?;
    }
    Ok(out
        .recognized
        .iter()
        .map(|r| {
            (
                r.activity.code().to_string(),
                r.start_ms,
                r.end_ms,
                r.truth.map(|t| t.code().to_string()),
                r.confidence,
            )
        })
        .collect())
}

#[pymodule]
pub fn har(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(activities, m)?)?;
    m.add_function(wrap_pyfunction!(feature_names, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    m.add_function(wrap_pyfunction!(extract_features, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add("N_FEATURES", har_core::features::N_FEATURES)?;
    Ok(())
}
