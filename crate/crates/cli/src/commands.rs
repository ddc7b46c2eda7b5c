use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use ptss_core::bisim::{equivalent, Kind};
use ptss_core::derive::{build_pts, stable_model, DeriveError, TransitionTable};
use ptss_core::dist::eval_dist;
use ptss_core::format::{check_spec, Format};
use ptss_core::lang::{parse_closed_state, parse_formula, parse_spec_with, ParseError, ParseOptions, Spec};
use ptss_core::logic::{distinguishing_formula, fragment_of, in_fragment, sat_state, LogicError};
use ptss_core::probe::congruence_probe;
use ptss_core::pts::{ModelError, Pts};
use ptss_core::rational::fmt_rational;
use ptss_core::terms::{StateTerm, TermError};
use serde_json::{json, Value};
use thiserror::Error;

/// Anything that ends a run with exit code 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    Spec { path: PathBuf, source: ParseError },
    #[error("cannot parse `{text}`: {source}")]
    Argument { text: String, source: ParseError },
    #[error("{0}")]
    Usage(String),
    #[error("formula `{formula}` is not in logic {wanted}; it belongs to {found}")]
    FragmentMismatch { formula: String, wanted: char, found: String },
    #[error("model incomplete: {0} transition(s) are neither certain nor impossible")]
    Incomplete(usize),
    #[error(transparent)]
    Derive(#[from] DeriveError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error(transparent)]
    Term(#[from] TermError),
}

pub struct Env {
    pub fuel: usize,
    pub lenient: bool,
}

/// Result of a command: exit code, a headline verdict, further text lines and
/// the machine-readable document.
pub struct Outcome {
    pub code: u8,
    pub headline: Option<(String, bool)>,
    pub body: Vec<String>,
    pub doc: Value,
}

impl Outcome {
    pub fn render(&self, color: bool) -> String {
        let mut lines = Vec::new();
        if let Some((text, good)) = &self.headline {
            lines.push(match (color, good) {
                (false, _) => text.clone(),
                (true, true) => format!("\x1b[32m{text}\x1b[0m"),
                (true, false) => format!("\x1b[31m{text}\x1b[0m"),
            });
        }
        lines.extend(self.body.iter().cloned());
        lines.join("\n")
    }
}

fn load(env: &Env, path: &Path) -> Result<Spec, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let options = if env.lenient { ParseOptions::lenient() } else { ParseOptions::default() };
    parse_spec_with(&text, options).map_err(|source| CliError::Spec {
        path: path.to_path_buf(),
        source,
    })
}

/// A `def` name or a closed state term.
fn resolve(spec: &Spec, text: &str) -> Result<StateTerm, CliError> {
    if let Some(t) = spec.def(text.trim()) {
        return Ok(t.clone());
    }
    parse_closed_state(text, spec).map_err(|source| CliError::Argument {
        text: text.to_string(),
        source,
    })
}

/// Derives a complete model for the given roots.
fn model(env: &Env, spec: &Spec, roots: &[StateTerm]) -> Result<Pts, CliError> {
    let table = stable_model(spec, roots, env.fuel)?;
    if !table.is_complete() {
        return Err(CliError::Incomplete(table.unknown().count()));
    }
    Ok(build_pts(&table)?)
}

pub fn check(env: &Env, path: &Path, format: &str) -> Result<Outcome, CliError> {
    let spec = load(env, path)?;
    let formats = match format {
        "all" => Format::ALL.to_vec(),
        name => vec![name.parse::<Format>().map_err(CliError::Usage)?],
    };
    let report = check_spec(&spec, &formats);
    let ok = formats.iter().all(|f| report.conforms(*f));
    let cycles: Vec<Value> = report
        .cycles
        .iter()
        .map(|(rule, cycle)| json!({ "rule": rule, "cycle": cycle }))
        .collect();
    let names: Vec<&str> = formats.iter().map(|f| f.name()).collect();
    Ok(Outcome {
        code: if ok { 0 } else { 1 },
        headline: Some((if ok { "conforms" } else { "violations found" }.to_string(), ok)),
        body: vec![report.to_string()],
        doc: json!({
            "formats": names,
            "conforms": ok,
            "entries": report.entries(),
            "well_founded": report.well_founded(),
            "cycles": cycles,
            "convex_closed": report.convex_closed,
        }),
    })
}

/// Source, action and target masses of one certain transition.
type Listed = (String, String, Vec<(String, String)>);

fn transition_lines(table: &TransitionTable) -> Result<Vec<Listed>, CliError> {
    table
        .certain
        .iter()
        .map(|t| {
            let pi = eval_dist(&t.target, table.signature())?;
            let dist = pi.iter().map(|(s, p)| (s.to_string(), fmt_rational(p))).collect();
            Ok((t.source.to_string(), t.action.clone(), dist))
        })
        .collect()
}

pub fn derive(env: &Env, path: &Path, term: &str, require_complete: bool) -> Result<Outcome, CliError> {
    let spec = load(env, path)?;
    let root = resolve(&spec, term)?;
    let table = stable_model(&spec, std::slice::from_ref(&root), env.fuel)?;
    let transitions = transition_lines(&table)?;
    let mut body: Vec<String> = transitions
        .iter()
        .map(|(s, a, dist)| {
            let parts: Vec<String> = dist.iter().map(|(t, p)| format!("{t}: {p}")).collect();
            format!("{s} --{a}--> {{{}}}", parts.join(", "))
        })
        .collect();
    let mut warnings = table.warnings.clone();
    if !table.is_complete() {
        warnings.push(format!("model incomplete: {} unknown transition(s)", table.unknown().count()));
        warnings.extend(table.unknown().map(|t| format!("unknown: {t}")));
    }
    if table.budget_exhausted {
        warnings.push(format!("fuel exhausted after {} terms", table.explored.len()));
    }
    body.extend(warnings.iter().map(|w| format!("warning: {w}")));
    let complete = table.is_complete();
    let listing: Vec<Value> = transitions
        .iter()
        .map(|(s, a, dist)| {
            let target: serde_json::Map<String, Value> = dist.iter().map(|(t, p)| (t.clone(), json!(p))).collect();
            json!({ "source": s, "action": a, "target": target })
        })
        .collect();
    Ok(Outcome {
        code: if require_complete && !complete { 1 } else { 0 },
        headline: None,
        body,
        doc: json!({
            "term": root.to_string(),
            "complete": complete,
            "iterations": table.iterations,
            "explored": table.explored.len(),
            "transitions": listing,
            "warnings": warnings,
        }),
    })
}

pub fn bisim(env: &Env, path: &Path, kind: Kind, left: &str, right: &str, explain: bool) -> Result<Outcome, CliError> {
    let spec = load(env, path)?;
    let (l, r) = (resolve(&spec, left)?, resolve(&spec, right)?);
    let pts = model(env, &spec, &[l.clone(), r.clone()])?;
    let (ls, rs) = (l.to_string(), r.to_string());
    let related = equivalent(&pts, &ls, &rs, kind)?;
    let mut body = Vec::new();
    let mut formula = Value::Null;
    if explain && !related {
        match distinguishing_formula(&pts, &ls, &rs, kind) {
            Ok(Some(phi)) => {
                body.push(format!("distinguishing formula: {phi}"));
                formula = json!(phi.to_string());
            }
            Ok(None) => {}
            Err(LogicError::Inexpressible { .. }) => {
                body.push(format!("no distinguishing formula of logic {} was found", kind.letter()));
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(Outcome {
        code: if related { 0 } else { 1 },
        headline: Some((related.to_string(), related)),
        body,
        doc: json!({
            "relation": kind,
            "left": ls,
            "right": rs,
            "verdict": related,
            "formula": formula,
        }),
    })
}

fn letters(kinds: impl IntoIterator<Item = Kind>) -> String {
    let names: Vec<String> = kinds.into_iter().map(|k| format!("L_{}", k.letter())).collect();
    if names.is_empty() {
        "no logic".to_string()
    } else {
        names.join(", ")
    }
}

pub fn mc(env: &Env, path: &Path, term: &str, formula: &str, logic: Option<Kind>) -> Result<Outcome, CliError> {
    let spec = load(env, path)?;
    let phi = parse_formula(formula).map_err(|source| CliError::Argument {
        text: formula.to_string(),
        source,
    })?;
    if let Some(kind) = logic {
        if !in_fragment(&phi, kind) {
            return Err(CliError::FragmentMismatch {
                formula: phi.to_string(),
                wanted: kind.letter(),
                found: letters(fragment_of(&phi)),
            });
        }
    }
    let root = resolve(&spec, term)?;
    let pts = model(env, &spec, std::slice::from_ref(&root))?;
    let holds = sat_state(&pts, &root.to_string(), &phi)?;
    let symbol = if holds { "⊨" } else { "⊭" };
    Ok(Outcome {
        code: if holds { 0 } else { 1 },
        headline: Some((format!("{} {symbol} {phi}", term.trim()), holds)),
        body: Vec::new(),
        doc: json!({
            "term": root.to_string(),
            "formula": phi.to_string(),
            "logics": fragment_of(&phi),
            "verdict": holds,
        }),
    })
}

pub fn distinguish(env: &Env, path: &Path, kind: Kind, left: &str, right: &str) -> Result<Outcome, CliError> {
    let spec = load(env, path)?;
    let (l, r) = (resolve(&spec, left)?, resolve(&spec, right)?);
    let pts = model(env, &spec, &[l.clone(), r.clone()])?;
    let (ls, rs) = (l.to_string(), r.to_string());
    let found = distinguishing_formula(&pts, &ls, &rs, kind)?;
    let doc = json!({
        "relation": kind,
        "left": ls,
        "right": rs,
        "formula": found.as_ref().map(|phi| phi.to_string()),
    });
    Ok(match found {
        Some(phi) => {
            let sat = |t: &str| sat_state(&pts, t, &phi);
            let body = vec![format!("{}: {}", left.trim(), sat(&ls)?), format!("{}: {}", right.trim(), sat(&rs)?)];
            Outcome {
                code: 0,
                headline: Some((phi.to_string(), true)),
                body,
                doc,
            }
        }
        None => Outcome {
            code: 1,
            headline: Some((format!("equivalent under {kind}; no distinguishing formula"), false)),
            body: Vec::new(),
            doc,
        },
    })
}

pub fn probe(env: &Env, path: &Path, kind: Kind, trials: usize, seed: u64) -> Result<Outcome, CliError> {
    let spec = load(env, path)?;
    let report = congruence_probe(&spec, kind, trials, seed);
    let found = report.found();
    Ok(Outcome {
        code: if found { 1 } else { 0 },
        headline: None,
        body: vec![report.to_string()],
        doc: serde_json::to_value(&report).expect("report serializes"),
    })
}
