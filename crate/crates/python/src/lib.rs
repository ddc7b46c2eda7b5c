//! Python bindings: specifications, derived models, equivalence checks,
//! formula evaluation and the congruence probe.

use std::collections::BTreeMap;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ptss_core::bisim::{equivalent, quotient, Kind};
use ptss_core::derive::{build_pts, stable_model, DEFAULT_FUEL};
use ptss_core::dist::eval_dist;
use ptss_core::format::{check_spec, Format};
use ptss_core::lang::{parse_closed_state, parse_formula, parse_spec_with, ParseOptions, StateFormula};
use ptss_core::logic::{distinguishing_formula, fragment_of, sat_state};
use ptss_core::probe::congruence_probe;
use ptss_core::pts::Pts;
use ptss_core::rational::{fmt_rational, Rational};
use ptss_core::terms::StateTerm;

create_exception!(ptss, PtssError, PyException);

fn err(e: impl std::fmt::Display) -> PyErr {
    PtssError::new_err(e.to_string())
}

fn kind(name: &str) -> PyResult<Kind> {
    name.parse().map_err(err)
}

fn formula(text: &str) -> PyResult<StateFormula> {
    parse_formula(text).map_err(err)
}

fn fraction<'py>(py: Python<'py>, p: &Rational) -> PyResult<Bound<'py, PyAny>> {
    py.import("fractions")?.getattr("Fraction")?.call1((fmt_rational(p),))
}

/// A parsed specification.
#[pyclass(name = "Spec", frozen)]
struct PySpec {
    inner: ptss_core::lang::Spec,
}

impl PySpec {
    fn term(&self, text: &str) -> PyResult<StateTerm> {
        match self.inner.def(text.trim()) {
            Some(t) => Ok(t.clone()),
            None => parse_closed_state(text, &self.inner).map_err(err),
        }
    }
}

#[pymethods]
impl PySpec {
    #[new]
    #[pyo3(signature = (text, lenient = false))]
    fn new(text: &str, lenient: bool) -> PyResult<Self> {
        let options = if lenient { ParseOptions::lenient() } else { ParseOptions::default() };
        Ok(PySpec {
            inner: parse_spec_with(text, options).map_err(err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (path, lenient = false))]
    fn load(path: &str, lenient: bool) -> PyResult<Self> {
        let text = std::fs::read_to_string(path).map_err(err)?;
        Self::new(&text, lenient)
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    /// Named processes as `{name: term}`.
    #[getter]
    fn defs(&self) -> BTreeMap<String, String> {
        self.inner.defs.iter().map(|d| (d.name.clone(), d.term.to_string())).collect()
    }

    #[getter]
    fn rules(&self) -> Vec<String> {
        self.inner.rules.iter().map(|r| r.name.clone()).collect()
    }

    /// One dict per (rule, format) with `verdict`, `condition` and `witness`.
    #[pyo3(signature = (format = "all"))]
    fn check<'py>(&self, py: Python<'py>, format: &str) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let formats = match format {
            "all" => Format::ALL.to_vec(),
            name => vec![name.parse::<Format>().map_err(err)?],
        };
        check_spec(&self.inner, &formats)
            .entries()
            .into_iter()
            .map(|e| {
                let d = PyDict::new(py);
                d.set_item("rule", e.rule)?;
                d.set_item("format", e.format.name())?;
                d.set_item("verdict", e.verdict)?;
                d.set_item("condition", e.condition)?;
                d.set_item("witness", e.witness)?;
                Ok(d)
            })
            .collect()
    }

    fn conforms(&self, format: &str) -> PyResult<bool> {
        let format = format.parse::<Format>().map_err(err)?;
        Ok(check_spec(&self.inner, &[format]).conforms(format))
    }

    /// The 3-valued stable model rooted at `term`.
    #[pyo3(signature = (term, fuel = DEFAULT_FUEL))]
    fn derive<'py>(&self, py: Python<'py>, term: &str, fuel: usize) -> PyResult<Bound<'py, PyDict>> {
        let table = stable_model(&self.inner, &[self.term(term)?], fuel).map_err(err)?;
        let mut certain = Vec::new();
        for t in &table.certain {
            let target = PyDict::new(py);
            for (s, p) in eval_dist(&t.target, table.signature()).map_err(err)?.iter() {
                target.set_item(s.to_string(), fraction(py, p)?)?;
            }
            certain.push((t.source.to_string(), t.action.clone(), target));
        }
        let d = PyDict::new(py);
        d.set_item("complete", table.is_complete())?;
        d.set_item("iterations", table.iterations)?;
        d.set_item("explored", table.explored.iter().map(ToString::to_string).collect::<Vec<_>>())?;
        d.set_item("certain", certain)?;
        d.set_item("unknown", table.unknown().map(ToString::to_string).collect::<Vec<_>>())?;
        d.set_item("budget_exhausted", table.budget_exhausted)?;
        d.set_item("warnings", table.warnings.clone())?;
        Ok(d)
    }

    /// The finite model reachable from `terms`; defaults to every `def`.
    #[pyo3(signature = (terms = None, fuel = DEFAULT_FUEL))]
    fn model(&self, terms: Option<Vec<String>>, fuel: usize) -> PyResult<PyModel> {
        let roots = match terms {
            Some(ts) => ts.iter().map(|t| self.term(t)).collect::<PyResult<Vec<_>>>()?,
            None => self.inner.defs.iter().map(|d| d.term.clone()).collect(),
        };
        let table = stable_model(&self.inner, &roots, fuel).map_err(err)?;
        let pts = build_pts(&table).map_err(err)?;
        let names = self.inner.defs.iter().map(|d| (d.name.clone(), d.term.to_string())).collect();
        Ok(PyModel { pts, names })
    }

    /// Congruence probe; returns a dict mirroring the CLI's machine output.
    #[pyo3(signature = (rel, trials = 200, seed = 0))]
    fn probe<'py>(&self, py: Python<'py>, rel: &str, trials: usize, seed: u64) -> PyResult<Bound<'py, PyDict>> {
        let report = congruence_probe(&self.inner, kind(rel)?, trials, seed);
        let d = PyDict::new(py);
        d.set_item("found", report.found())?;
        d.set_item("trials", report.trials)?;
        d.set_item("pairs_tested", report.pairs_tested)?;
        d.set_item("contexts_checked", report.contexts_checked)?;
        d.set_item("inconclusive", report.inconclusive)?;
        let violations: Vec<(String, String, String)> = report
            .violations
            .iter()
            .map(|v| (v.context.clone(), v.left.clone(), v.right.clone()))
            .collect();
        d.set_item("violations", violations)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!("Spec({:?}, {} rules)", self.inner.name, self.inner.rules.len())
    }
}

/// A finite probabilistic transition system. States can be named by label
/// or, for models derived from a spec, by `def` name.
#[pyclass(name = "Model", frozen)]
struct PyModel {
    pts: Pts,
    names: BTreeMap<String, String>,
}

impl PyModel {
    fn label<'a>(&'a self, state: &'a str) -> &'a str {
        self.names.get(state).map_or(state, String::as_str)
    }
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(PyModel {
            pts: Pts::from_text(text).map_err(err)?,
            names: BTreeMap::new(),
        })
    }

    fn to_text(&self) -> String {
        self.pts.to_text()
    }

    #[getter]
    fn states(&self) -> Vec<String> {
        self.pts.states.clone()
    }

    /// Outgoing steps of `state` as `(action, {target: Fraction})`.
    fn steps<'py>(&self, py: Python<'py>, state: &str) -> PyResult<Vec<(String, Bound<'py, PyDict>)>> {
        let s = self.pts.state(self.label(state)).map_err(err)?;
        self.pts.steps[s]
            .iter()
            .map(|step| {
                let d = PyDict::new(py);
                for (t, p) in &step.dist {
                    d.set_item(&self.pts.states[*t], fraction(py, p)?)?;
                }
                Ok((step.action.clone(), d))
            })
            .collect()
    }

    fn equivalent(&self, left: &str, right: &str, rel: &str) -> PyResult<bool> {
        equivalent(&self.pts, self.label(left), self.label(right), kind(rel)?).map_err(err)
    }

    /// Equivalence classes under `rel`, as lists of state labels.
    fn quotient(&self, rel: &str) -> PyResult<Vec<Vec<String>>> {
        let partition = quotient(&self.pts, kind(rel)?);
        Ok(partition
            .blocks()
            .into_iter()
            .map(|b| b.into_iter().map(|s| self.pts.states[s].clone()).collect())
            .collect())
    }

    fn sat(&self, state: &str, formula_text: &str) -> PyResult<bool> {
        sat_state(&self.pts, self.label(state), &formula(formula_text)?).map_err(err)
    }

    /// A formula of the logic for `rel` separating the two states, or
    /// `None` when they are related.
    fn distinguish(&self, left: &str, right: &str, rel: &str) -> PyResult<Option<String>> {
        let phi = distinguishing_formula(&self.pts, self.label(left), self.label(right), kind(rel)?).map_err(err)?;
        Ok(phi.map(|f| f.to_string()))
    }

    fn __len__(&self) -> usize {
        self.pts.len()
    }

    fn __repr__(&self) -> String {
        format!("Model({} states, {} steps)", self.pts.len(), self.pts.num_steps())
    }
}

/// Names of the logics (`strong`, `convex`, ...) a formula belongs to.
#[pyfunction]
fn fragment(formula_text: &str) -> PyResult<Vec<&'static str>> {
    Ok(fragment_of(&formula(formula_text)?).into_iter().map(Kind::name).collect())
}

#[pymodule]
fn ptss(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpec>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(fragment, m)?)?;
    m.add("PtssError", m.py().get_type::<PtssError>())?;
    m.add("DEFAULT_FUEL", DEFAULT_FUEL)?;
    Ok(())
}
