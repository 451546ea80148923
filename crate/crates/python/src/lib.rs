//! Python bindings. Structured values cross the boundary as JSON strings so the
//! Python side can use `json.loads` and stay independent of the Rust types.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use stiln::data::{
    loocv_split as split, map_label as label, synth_generate, DatasetManifest, Label, SynthSpec,
};
use stiln::harness::{load_samples, run_loocv, RunConfig};
use stiln::model::Stiln;
use stiln::topomap::{TopoMapper, GRID_SIZE};

create_exception!(stiln_py, StilnError, PyException);

fn py_err(e: stiln::Error) -> PyErr {
    StilnError::new_err(format!("{}: {e}", e.kind()))
}

fn to_json<T: serde::Serialize>(v: &T) -> PyResult<String> {
    serde_json::to_string(v).map_err(|e| py_err(e.into()))
}

fn config(json: Option<&str>) -> PyResult<RunConfig> {
    let mut cfg = match json {
        Some(text) => RunConfig::from_json(text).map_err(py_err)?,
        None => RunConfig::default(),
    };
    cfg.apply_env().map_err(py_err)?;
    Ok(cfg)
}

/// Binary label for a 1..9 rating: "low", "high", or None for the midpoint.
#[pyfunction]
fn map_label(score: f64) -> PyResult<Option<&'static str>> {
    Ok(label(score).map_err(py_err)?.map(|l| match l {
        Label::Low => "low",
        Label::High => "high",
    }))
}

/// Leave-one-subject-out plan as JSON.
#[pyfunction]
fn loocv_split(subjects: Vec<u32>) -> PyResult<String> {
    let plan = split(&subjects).map_err(py_err)?;
    let folds: Vec<_> = plan
        .folds
        .iter()
        .map(|f| serde_json::json!({ "test": f.test_subject, "train": f.train_subjects }))
        .collect();
    to_json(&serde_json::json!({ "hash": plan.hash(), "folds": folds }))
}

/// Interpolated map for 32 electrode values, row-major, NaN outside the head.
#[pyfunction]
fn topomap(values: Vec<f64>) -> PyResult<Vec<f64>> {
    if values.len() != 32 {
        return Err(py_err(stiln::Error::InvalidShape(format!(
            "expected 32 electrode values, got {}",
            values.len()
        ))));
    }
    Ok(TopoMapper::deap().interior(&values))
}

/// Write a synthetic trial directory; returns a JSON summary.
#[pyfunction]
#[pyo3(signature = (out, spec=None))]
fn synth(out: PathBuf, spec: Option<&str>) -> PyResult<String> {
    let spec: SynthSpec = match spec {
        Some(text) => {
            serde_json::from_str(text).map_err(|e| py_err(stiln::Error::Config(e.to_string())))?
        }
        None => SynthSpec::default(),
    };
    let trials = synth_generate(&spec).map_err(py_err)?;
    let manifest = DatasetManifest::write(&out, &trials, Some(spec)).map_err(py_err)?;
    to_json(
        &serde_json::json!({ "trials": manifest.trials.len(), "split_hash": manifest.split.hash() }),
    )
}

/// Layer table of the configured model as JSON.
#[pyfunction]
#[pyo3(signature = (config_json=None))]
fn describe(config_json: Option<&str>) -> PyResult<String> {
    let cfg = config(config_json)?;
    let model = Stiln::new(cfg.train.model, cfg.train.seed).map_err(py_err)?;
    to_json(&serde_json::json!({ "layers": model.describe(), "total": model.param_count() }))
}

/// Full leave-one-subject-out run; returns the report as JSON.
#[pyfunction]
fn loocv(py: Python<'_>, config_json: &str) -> PyResult<String> {
    let cfg = config(Some(config_json))?;
    let report = py
        .detach(|| {
            let samples = load_samples(&cfg.data, cfg.train.task)?;
            run_loocv(&samples, &cfg.train, cfg.top_k())
        })
        .map_err(py_err)?;
    to_json(&report)
}

#[pymodule]
fn stiln_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("StilnError", m.py().get_type::<StilnError>())?;
    m.add("GRID_SIZE", GRID_SIZE)?;
    m.add_function(wrap_pyfunction!(map_label, m)?)?;
    m.add_function(wrap_pyfunction!(loocv_split, m)?)?;
    m.add_function(wrap_pyfunction!(topomap, m)?)?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(describe, m)?)?;
    m.add_function(wrap_pyfunction!(loocv, m)?)?;
    Ok(())
}
