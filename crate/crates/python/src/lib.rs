//! Python bindings for `mdma_core`.
//!
//! Structured results (summaries, records, sweep rows) cross the boundary as
//! plain dicts and lists built from their serde form.

use std::path::PathBuf;

use mdma_core::coalition::total_conflict;
use mdma_core::harness::{self, write_run_outputs, write_sweep_outputs};
use mdma_core::topology::{stream_rng, STREAM_MATCHING};
use mdma_core::{allocator, hungarian};
use pyo3::exceptions::{PyRuntimeError, PyTypeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyFloat, PyInt, PyList, PyString};
use serde_json::Value;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py(py: Python<'_>, v: &Value) -> PyResult<PyObject> {
    Ok(match v {
        Value::Null => py.None(),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any().unbind(),
        Value::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) => u.into_pyobject(py)?.into_any().unbind(),
            (_, Some(i)) => i.into_pyobject(py)?.into_any().unbind(),
            _ => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any().unbind(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any().unbind(),
        Value::Array(a) => {
            let items = a.iter().map(|x| to_py(py, x)).collect::<PyResult<Vec<_>>>()?;
            PyList::new(py, items)?.into_any().unbind()
        }
        Value::Object(m) => {
            let d = PyDict::new(py);
            for (k, x) in m {
                d.set_item(k, to_py(py, x)?)?;
            }
            d.into_any().unbind()
        }
    })
}

fn from_py(obj: &Bound<'_, PyAny>) -> PyResult<Value> {
    if obj.is_none() {
        Ok(Value::Null)
    } else if obj.is_instance_of::<PyBool>() {
        Ok(Value::Bool(obj.extract()?))
    } else if obj.is_instance_of::<PyInt>() {
        Ok(Value::from(obj.extract::<i64>()?))
    } else if obj.is_instance_of::<PyFloat>() {
        Ok(serde_json::Number::from_f64(obj.extract()?).map_or(Value::Null, Value::Number))
    } else if obj.is_instance_of::<PyString>() {
        Ok(Value::String(obj.extract()?))
    } else if let Ok(d) = obj.downcast::<PyDict>() {
        let mut m = serde_json::Map::new();
        for (k, v) in d.iter() {
            m.insert(k.extract()?, from_py(&v)?);
        }
        Ok(Value::Object(m))
    } else if let Ok(l) = obj.downcast::<PyList>() {
        Ok(Value::Array(l.iter().map(|x| from_py(&x)).collect::<PyResult<_>>()?))
    } else {
        Err(PyTypeError::new_err(format!("unsupported value {obj}")))
    }
}

fn serde_to_py<T: serde::Serialize>(py: Python<'_>, v: &T) -> PyResult<PyObject> {
    to_py(py, &serde_json::to_value(v).map_err(err)?)
}

/// Overlays `overrides` onto the serde form of `base`.
fn merged<T: serde::Serialize + serde::de::DeserializeOwned>(base: &T, overrides: Option<&Bound<'_, PyDict>>) -> PyResult<T> {
    let mut v = serde_json::to_value(base).map_err(err)?;
    if let (Some(o), Value::Object(m)) = (overrides, &mut v) {
        for (k, x) in o.iter() {
            let key: String = k.extract()?;
            if !m.contains_key(&key) {
                return Err(PyValueError::new_err(format!("unknown field `{key}`")));
            }
            m.insert(key, from_py(&x)?);
        }
    }
    serde_json::from_value(v).map_err(err)
}

#[pyclass(name = "SystemParams", module = "mdma")]
#[derive(Clone)]
struct PySystemParams {
    inner: mdma_core::SystemParams,
}

#[pymethods]
impl PySystemParams {
    /// Defaults with any field overridden by keyword, e.g. `SystemParams(num_ues=20)`.
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let inner: mdma_core::SystemParams = merged(&mdma_core::SystemParams::default(), kwargs)?;
        inner.validate().map_err(err)?;
        Ok(Self { inner })
    }

    fn subchannel_bandwidth(&self) -> f64 {
        self.inner.subchannel_bandwidth()
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<PyObject> {
        serde_to_py(py, &self.inner)
    }

    #[getter]
    fn num_ues(&self) -> usize {
        self.inner.num_ues
    }

    #[getter]
    fn num_subchannels(&self) -> usize {
        self.inner.num_subchannels
    }

    #[getter]
    fn max_bs_power(&self) -> f64 {
        self.inner.max_bs_power
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

#[pyclass(name = "ExperimentConfig", module = "mdma")]
#[derive(Clone)]
struct PyExperimentConfig {
    inner: harness::ExperimentConfig,
}

#[pymethods]
impl PyExperimentConfig {
    #[new]
    #[pyo3(signature = (params=None, **kwargs))]
    fn new(params: Option<PySystemParams>, kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut inner: harness::ExperimentConfig = merged(&harness::ExperimentConfig::default(), kwargs)?;
        if let Some(p) = params {
            inner.params = p.inner;
        }
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        harness::ExperimentConfig::from_toml_str(text).map(|inner| Self { inner }).map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        harness::ExperimentConfig::load(path).map(|inner| Self { inner }).map_err(err)
    }

    #[getter]
    fn params(&self) -> PySystemParams {
        PySystemParams { inner: self.inner.params.clone() }
    }

    #[getter]
    fn seeds(&self) -> Vec<u64> {
        self.inner.seeds.clone()
    }

    #[setter]
    fn set_seeds(&mut self, seeds: Vec<u64>) {
        self.inner.seeds = seeds;
    }

    #[getter]
    fn ue_counts(&self) -> Vec<usize> {
        self.inner.ue_counts.clone()
    }

    #[setter]
    fn set_ue_counts(&mut self, counts: Vec<usize>) {
        self.inner.ue_counts = counts;
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(err)
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<PyObject> {
        serde_to_py(py, &self.inner)
    }
}

fn parse_scheme(s: &str) -> PyResult<harness::Scheme> {
    s.parse().map_err(PyValueError::new_err)
}

/// UE profiles of one drop as dicts.
#[pyfunction]
#[pyo3(signature = (config, seed))]
fn generate_drop(py: Python<'_>, config: &PyExperimentConfig, seed: u64) -> PyResult<PyObject> {
    let ues = mdma_core::generate_drop(&config.inner.params, &config.inner.qos(), seed).map_err(err)?;
    serde_to_py(py, &ues)
}

/// Greedy then rotation-refined coalitions for one drop, with their total conflict.
#[pyfunction]
fn form_coalitions(config: &PyExperimentConfig, seed: u64) -> PyResult<(Vec<Vec<usize>>, f64)> {
    let c = &config.inner;
    let ues = mdma_core::generate_drop(&c.params, &c.qos(), seed).map_err(err)?;
    let model = mdma_core::ConflictModel::new(&ues, &c.params).map_err(err)?;
    let mut rng = stream_rng(seed, STREAM_MATCHING);
    let init = mdma_core::greedy_init(&model, c.params.num_subchannels, &mut rng).map_err(err)?;
    let refined = mdma_core::rotation_refine(&init, &model, c.max_rotation_size, c.max_rotations).structure;
    let conflict = total_conflict(&refined, &model);
    Ok((refined.coalitions().to_vec(), conflict))
}

/// One drop end to end; returns `{"summary": {...}, "records": [...]}`.
#[pyfunction]
#[pyo3(signature = (config, seed, scheme="mdma"))]
fn run_drop(py: Python<'_>, config: &PyExperimentConfig, seed: u64, scheme: &str) -> PyResult<PyObject> {
    let scheme = parse_scheme(scheme)?;
    let cfg = config.inner.clone();
    let result = py.allow_threads(|| harness::run_drop(&cfg, seed, scheme)).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    serde_to_py(py, &result)
}

/// Every (UE count, scheme, seed) of the config; writes outputs when `out_dir` is given.
#[pyfunction]
#[pyo3(signature = (config, out_dir=None))]
fn sweep(py: Python<'_>, config: &PyExperimentConfig, out_dir: Option<PathBuf>) -> PyResult<PyObject> {
    let cfg = config.inner.clone();
    let outcome = py.allow_threads(|| harness::sweep(&cfg)).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    if let Some(dir) = out_dir {
        write_sweep_outputs(&dir, &cfg, &outcome).map_err(err)?;
    }
    serde_to_py(py, &outcome.rows)
}

/// Runs the configured seeds and schemes at the configured UE count and writes the outputs.
#[pyfunction]
fn run_to_dir(py: Python<'_>, config: &PyExperimentConfig, out_dir: PathBuf) -> PyResult<usize> {
    let cfg = config.inner.clone();
    let drops = py
        .allow_threads(|| {
            cfg.schemes
                .iter()
                .flat_map(|&s| cfg.seeds.iter().map(move |&seed| (s, seed)))
                .map(|(s, seed)| harness::run_drop(&cfg, seed, s))
                .collect::<Result<Vec<_>, _>>()
        })
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    write_run_outputs(&out_dir, &cfg, &drops).map_err(err)?;
    Ok(drops.len())
}

/// Column per row maximizing the total weight; `-inf` marks forbidden pairs.
#[pyfunction]
fn assign_subchannels(weights: Vec<Vec<f64>>) -> PyResult<Vec<usize>> {
    hungarian::assign_subchannels(&weights).map_err(err)
}

/// Tangent constants `(a, b)` of the rate lower bound at the rate floor.
#[pyfunction]
fn sca_constants(rate_min: f64, rate_max: f64, bandwidth: f64) -> PyResult<(f64, f64)> {
    let s = allocator::ScaConstants::new(rate_min, rate_max, bandwidth).map_err(err)?;
    Ok((s.a, s.b))
}

#[pyfunction]
fn empirical_cdf(values: Vec<f64>) -> PyResult<Vec<(f64, f64)>> {
    harness::empirical_cdf(&values).map_err(err)
}

#[pymodule]
fn mdma(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySystemParams>()?;
    m.add_class::<PyExperimentConfig>()?;
    m.add_function(wrap_pyfunction!(generate_drop, m)?)?;
    m.add_function(wrap_pyfunction!(form_coalitions, m)?)?;
    m.add_function(wrap_pyfunction!(run_drop, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(run_to_dir, m)?)?;
    m.add_function(wrap_pyfunction!(assign_subchannels, m)?)?;
    m.add_function(wrap_pyfunction!(sca_constants, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_cdf, m)?)?;
    m.add("SCHEMES", harness::Scheme::ALL.iter().map(|s| s.as_str()).collect::<Vec<_>>())?;
    Ok(())
}
