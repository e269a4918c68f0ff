//! Python bindings: typecheck OML source, compare schemes, and query the
//! semantic oracle.

use std::collections::HashMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use omni_infer::driver::{self, DriverOptions, OracleVerdict, Outcome};
use omni_infer::solver::ConjunctionOrder;
use omni_infer::surface::parse_scheme_text;
use omni_infer::types::LabelEnv;

/// Result of checking one top-level binding.
#[pyclass(frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
pub struct Binding {
    pub name: String,
    /// One of `accepted`, `ambiguous`, `type_error`, `scope_error`, `internal`.
    pub outcome: String,
    /// The inferred scheme when accepted.
    pub scheme: Option<String>,
    /// The `name : ...` line printed by the command-line checker.
    pub line: String,
    /// Why the binding's expectation comment was not met, if it was not.
    pub unmet: Option<String>,
    /// `agrees`, `disagrees: ...` or `skipped: ...` when the oracle ran.
    pub oracle: Option<String>,
    /// `(name, scheme)` for every `let` nested inside the binding.
    pub nested: Vec<(String, String)>,
    pub steps: u64,
}

#[pymethods]
impl Binding {
    fn __repr__(&self) -> String {
        format!("Binding({:?})", self.line)
    }
}

#[pyclass(frozen, get_all)]
pub struct Report {
    pub bindings: Vec<Binding>,
    /// The checker's exit code: 0 when every expectation is met.
    pub exit_code: i32,
}

#[pymethods]
impl Report {
    fn __repr__(&self) -> String {
        format!("Report(exit_code={}, bindings={})", self.exit_code, self.bindings.len())
    }
}

fn convert(b: &driver::BindingReport) -> Binding {
    let (outcome, scheme) = match &b.outcome {
        Outcome::Accepted(s) => ("accepted", Some(s.to_string())),
        Outcome::Ambiguous(_) => ("ambiguous", None),
        Outcome::TypeError(_) => ("type_error", None),
        Outcome::ScopeError(_) => ("scope_error", None),
        Outcome::Internal(_) => ("internal", None),
    };
    let oracle = b.oracle.as_ref().map(|v| match v {
        OracleVerdict::Agrees { .. } => "agrees".to_string(),
        OracleVerdict::Disagrees(m) => format!("disagrees: {m}"),
        OracleVerdict::Skipped(m) => format!("skipped: {m}"),
    });
    Binding {
        name: b.name.clone(),
        outcome: outcome.to_string(),
        scheme,
        line: b.line(),
        unmet: b.unmet.clone(),
        oracle,
        nested: b.nested.iter().map(|l| (l.name.clone(), l.scheme.to_string())).collect(),
        steps: b.stats.steps,
    }
}

/// Typechecks a whole program. `oracle_depth` cross-checks each binding
/// against the oracle over a universe of that depth; `order` is `left` or
/// `right` and picks which side of a conjunction is solved first.
#[pyfunction]
#[pyo3(signature = (source, oracle_depth=None, order="left"))]
fn check(source: &str, oracle_depth: Option<usize>, order: &str) -> PyResult<Report> {
    let mut opts = DriverOptions { oracle_depth, ..DriverOptions::default() };
    opts.solver.order = match order {
        "left" => ConjunctionOrder::LeftFirst,
        "right" => ConjunctionOrder::RightFirst,
        other => return Err(PyValueError::new_err(format!("unknown order `{other}`"))),
    };
    let report = driver::check_source(source, &opts).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(Report { bindings: report.bindings.iter().map(convert).collect(), exit_code: report.exit_code() })
}

/// Schemes of the accepted top-level bindings, by name.
#[pyfunction]
fn infer(source: &str) -> PyResult<HashMap<String, String>> {
    let report = check(source, None, "left")?;
    Ok(report.bindings.into_iter().filter_map(|b| b.scheme.map(|s| (b.name, s))).collect())
}

/// Whether two closed schemes such as `'a. 'a -> 'a` and `'b -> 'b` are
/// equal up to renaming of bound variables. Record types are not allowed.
#[pyfunction]
fn schemes_equal(a: &str, b: &str) -> PyResult<bool> {
    let read = |text: &str| {
        let e = parse_scheme_text(text, &[]).map_err(|e| PyValueError::new_err(e.to_string()))?;
        driver::scheme_of_expr(&e, &LabelEnv::new()).map_err(PyValueError::new_err)
    };
    Ok(read(a)?.alpha_eq(&read(b)?))
}

#[pymodule]
#[pyo3(name = "omni_infer")]
fn omni_infer_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Binding>()?;
    m.add_class::<Report>()?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(infer, m)?)?;
    m.add_function(wrap_pyfunction!(schemes_equal, m)?)?;
    Ok(())
}
