//! Python bindings. Documents are exposed as a `Document` class; scenario
//! runs, oracle results and bindings cross the boundary as plain Python
//! dicts and lists.

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyModule;

use wsag_market::aggregation;
use wsag_market::contract::{self, AgreementDocument, Bindings, DomainSchema, ProviderProperties};
use wsag_market::decimal::Decimal;
use wsag_market::sim::{self, Scenario};
use wsag_market::strategy::{self, ScoringModel};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn dumps(obj: &Bound<'_, PyAny>) -> PyResult<String> {
    obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()
}

fn loads<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    loads(py, &serde_json::to_string(v).map_err(value_err)?)
}

fn from_py<T: serde::de::DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    serde_json::from_str(&dumps(obj)?).map_err(value_err)
}

/// A bundled scenario name, a path to a scenario file, or scenario JSON.
fn load_scenario(spec: &str) -> PyResult<Scenario> {
    let trimmed = spec.trim_start();
    if trimmed.starts_with('{') {
        return Scenario::from_json(spec).map_err(value_err);
    }
    let path = PathBuf::from(spec);
    if path.exists() {
        let text = std::fs::read_to_string(&path).map_err(value_err)?;
        return Scenario::from_json(&text).map_err(value_err);
    }
    sim::bundled_scenario(spec).map_err(value_err)
}

/// An agreement template, offer or agreement.
#[pyclass(name = "Document", module = "wsag_market", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyDocument {
    inner: AgreementDocument,
}

#[pymethods]
impl PyDocument {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = AgreementDocument::from_json(text).map_err(value_err)?;
        Ok(PyDocument { inner })
    }

    fn to_json(&self) -> String {
        self.inner.to_canonical_json()
    }

    fn digest(&self) -> String {
        self.inner.digest()
    }

    #[getter]
    fn stage(&self) -> PyResult<String> {
        serde_json::to_value(self.inner.stage)
            .map(|v| v.as_str().unwrap_or_default().to_string())
            .map_err(value_err)
    }

    #[getter]
    fn level(&self) -> PyResult<String> {
        serde_json::to_value(self.inner.level)
            .map(|v| v.as_str().unwrap_or_default().to_string())
            .map_err(value_err)
    }

    #[getter]
    fn provider_id(&self) -> String {
        self.inner.context.provider_id.clone()
    }

    #[getter]
    fn agreement_id(&self) -> String {
        self.inner.context.agreement_id.clone()
    }

    #[getter]
    fn term_ids(&self) -> Vec<String> {
        self.inner.terms.iter().map(|t| t.id.clone()).collect()
    }

    #[getter]
    fn bindings<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.bindings)
    }

    /// `(min, max)` a numeric term may take, as strings.
    fn permissible_range(&self, term_id: &str) -> Option<(String, String)> {
        self.inner
            .permissible_range(term_id)
            .map(|(lo, hi)| (lo.to_string(), hi.to_string()))
    }

    fn __repr__(&self) -> String {
        format!(
            "Document(stage={:?}, level={:?}, provider_id={:?}, terms={})",
            self.inner.stage,
            self.inner.level,
            self.inner.context.provider_id,
            self.inner.terms.len()
        )
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner.digest() == other.inner.digest()
    }
}

fn doc(inner: AgreementDocument) -> PyDocument {
    PyDocument { inner }
}

/// Service template from provider properties and a domain schema (dicts).
#[pyfunction]
fn generate_template(properties: &Bound<'_, PyAny>, schema: &Bound<'_, PyAny>) -> PyResult<PyDocument> {
    let props: ProviderProperties = from_py(properties)?;
    let schema: DomainSchema = from_py(schema)?;
    contract::generate_service_template(&props, &schema)
        .map(doc)
        .map_err(value_err)
}

#[pyfunction]
fn fill_template(template: &PyDocument, bindings: &Bound<'_, PyAny>) -> PyResult<PyDocument> {
    let b: Bindings = from_py(bindings)?;
    contract::fill_template(&template.inner, &b).map(doc).map_err(value_err)
}

/// Violations of `offer` against `template`; empty when admissible.
#[pyfunction]
fn validate_offer(template: &PyDocument, offer: &PyDocument) -> PyResult<Vec<String>> {
    let report = contract::validate_offer(&template.inner, &offer.inner).map_err(value_err)?;
    Ok(report.violations.iter().map(ToString::to_string).collect())
}

#[pyfunction]
fn accept_offer(offer: &PyDocument, agreement_id: &str, provider_id: &str) -> PyResult<PyDocument> {
    contract::accept_offer(&offer.inner, agreement_id, provider_id)
        .map(doc)
        .map_err(value_err)
}

#[pyfunction]
fn aggregate_templates(templates: Vec<PyDocument>) -> PyResult<PyDocument> {
    let docs: Vec<AgreementDocument> = templates.into_iter().map(|d| d.inner).collect();
    aggregation::aggregate_templates(&docs).map(doc).map_err(value_err)
}

#[pyfunction]
fn filter_templates(templates: Vec<PyDocument>, domain_offer: &PyDocument) -> PyResult<Vec<PyDocument>> {
    let docs: Vec<AgreementDocument> = templates.into_iter().map(|d| d.inner).collect();
    aggregation::filter_templates(&docs, &domain_offer.inner)
        .map(|v| v.into_iter().map(doc).collect())
        .map_err(value_err)
}

/// Utility of a document's bindings under a scoring model (dict).
#[pyfunction]
fn score(model: &Bound<'_, PyAny>, document: &PyDocument) -> PyResult<f64> {
    let model: ScoringModel = from_py(model)?;
    strategy::score_offer(&model, &document.inner).map_err(value_err)
}

/// Schema of the simulated cinema domain.
#[pyfunction]
fn cinema_schema(py: Python<'_>) -> PyResult<Bound<'_, PyAny>> {
    to_py(py, &sim::cinema_schema())
}

#[pyfunction]
fn list_scenarios() -> Vec<String> {
    sim::bundled_names().into_iter().map(String::from).collect()
}

#[pyfunction]
fn scenario<'py>(py: Python<'py>, spec: &str) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &load_scenario(spec)?)
}

/// Runs a scenario and returns its summary. With `out_dir` the transcript,
/// trace and agreement store are written there.
#[pyfunction]
#[pyo3(signature = (spec, seed=None, out_dir=None))]
fn run_scenario<'py>(
    py: Python<'py>,
    spec: &str,
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
) -> PyResult<Bound<'py, PyAny>> {
    let mut s = load_scenario(spec)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    let report = sim::run_scenario(&s, out_dir.as_deref()).map_err(value_err)?;
    to_py(py, &report.summary)
}

#[pyfunction]
#[pyo3(signature = (spec, grid="0.50"))]
fn oracle<'py>(py: Python<'py>, spec: &str, grid: &str) -> PyResult<Bound<'py, PyAny>> {
    let step: Decimal = grid.parse().map_err(value_err)?;
    let out = sim::oracle_best_outcome(&load_scenario(spec)?, step).map_err(value_err)?;
    to_py(py, &out)
}

/// Re-runs the scenario stored next to a transcript; true when identical.
#[pyfunction]
fn replay(transcript: PathBuf) -> PyResult<bool> {
    sim::replay(&transcript).map(|r| r.identical).map_err(value_err)
}

/// Adds the classes and functions to `m`.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDocument>()?;
    m.add_function(wrap_pyfunction!(generate_template, m)?)?;
    m.add_function(wrap_pyfunction!(fill_template, m)?)?;
    m.add_function(wrap_pyfunction!(validate_offer, m)?)?;
    m.add_function(wrap_pyfunction!(accept_offer, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate_templates, m)?)?;
    m.add_function(wrap_pyfunction!(filter_templates, m)?)?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(cinema_schema, m)?)?;
    m.add_function(wrap_pyfunction!(list_scenarios, m)?)?;
    m.add_function(wrap_pyfunction!(scenario, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    m.add_function(wrap_pyfunction!(replay, m)?)?;
    Ok(())
}

#[pymodule]
#[pyo3(name = "wsag_market")]
fn wsag_market_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}
