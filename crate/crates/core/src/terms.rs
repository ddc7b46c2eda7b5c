//! Two-sorted terms: state terms over a user signature and distribution
//! terms built from Dirac, finite convex sums and lifted operators.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::rational::{fmt_rational, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Sort {
    #[serde(rename = "state")]
    State,
    #[serde(rename = "dist")]
    Dist,
}

impl Sort {
    pub fn letter(self) -> &'static str {
        match self {
            Sort::State => "S",
            Sort::Dist => "D",
        }
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sort::State => "state",
            Sort::Dist => "dist",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TermError {
    #[error("unknown operator `{0}`")]
    UnknownOperator(String),
    #[error("operator `{op}` expects {expected} argument(s), found {found}")]
    ArityMismatch {
        op: String,
        expected: usize,
        found: usize,
    },
    #[error("argument {position} of `{op}` must be a {expected} term, found a {found} term")]
    SortMismatch {
        op: String,
        position: usize,
        expected: Sort,
        found: Sort,
    },
    #[error("bad convex weights: {0}")]
    BadWeights(String),
    #[error("term `{0}` is not closed")]
    OpenTerm(String),
    #[error("operator `{0}` declared twice")]
    DuplicateOperator(String),
}

/// State-sorted operators with their argument sorts. Lifted operators, Dirac
/// and convex sums are derived from it and need no declaration.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Signature {
    ops: BTreeMap<String, Vec<Sort>>,
}

impl Signature {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_op(&mut self, name: &str, args: Vec<Sort>) -> Result<(), TermError> {
        if self.ops.contains_key(name) {
            return Err(TermError::DuplicateOperator(name.to_string()));
        }
        self.ops.insert(name.to_string(), args);
        Ok(())
    }

    pub fn with_op(mut self, name: &str, args: &[Sort]) -> Self {
        self.ops.insert(name.to_string(), args.to_vec());
        self
    }

    pub fn arity(&self, name: &str) -> Option<&[Sort]> {
        self.ops.get(name).map(Vec::as_slice)
    }

    pub fn ops(&self) -> impl Iterator<Item = (&str, &[Sort])> {
        self.ops.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StateTerm {
    Var(String),
    App(String, Vec<Term>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DistTerm {
    Var(String),
    Dirac(Box<StateTerm>),
    /// Finite convex sum; weights are positive and sum to one.
    Sum(Vec<(Rational, DistTerm)>),
    /// Probabilistic lifting of a state operator.
    Lift(String, Vec<DistTerm>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    State(StateTerm),
    Dist(DistTerm),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var {
    pub name: String,
    pub sort: Sort,
}

impl Var {
    pub fn state(name: &str) -> Self {
        Var {
            name: name.to_string(),
            sort: Sort::State,
        }
    }

    pub fn dist(name: &str) -> Self {
        Var {
            name: name.to_string(),
            sort: Sort::Dist,
        }
    }
}

impl StateTerm {
    pub fn var(name: &str) -> Self {
        StateTerm::Var(name.to_string())
    }

    pub fn app(op: &str, args: Vec<Term>) -> Self {
        StateTerm::App(op.to_string(), args)
    }

    pub fn constant(op: &str) -> Self {
        StateTerm::App(op.to_string(), Vec::new())
    }

    pub fn is_closed(&self) -> bool {
        match self {
            StateTerm::Var(_) => false,
            StateTerm::App(_, args) => args.iter().all(Term::is_closed),
        }
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            StateTerm::Var(x) => {
                out.insert(Var::state(x));
            }
            StateTerm::App(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn size(&self) -> usize {
        match self {
            StateTerm::Var(_) => 1,
            StateTerm::App(_, args) => 1 + args.iter().map(Term::size).sum::<usize>(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            StateTerm::Var(_) => 1,
            StateTerm::App(_, args) => 1 + args.iter().map(Term::depth).max().unwrap_or(0),
        }
    }

    /// Renames operators; used to expand action-indexed families.
    pub fn rename_ops(&self, f: &impl Fn(&str) -> String) -> StateTerm {
        match self {
            StateTerm::Var(_) => self.clone(),
            StateTerm::App(op, args) => {
                StateTerm::App(f(op), args.iter().map(|a| a.rename_ops(f)).collect())
            }
        }
    }

    pub fn collect_ops(&self, out: &mut BTreeSet<String>) {
        if let StateTerm::App(op, args) = self {
            out.insert(op.clone());
            args.iter().for_each(|a| a.collect_ops(out));
        }
    }
}

impl DistTerm {
    pub fn var(name: &str) -> Self {
        DistTerm::Var(name.to_string())
    }

    pub fn dirac(t: StateTerm) -> Self {
        DistTerm::Dirac(Box::new(t))
    }

    /// Binary sum `left (+)p right`.
    pub fn mix(p: Rational, left: DistTerm, right: DistTerm) -> Self {
        let q = Rational::one() - &p;
        DistTerm::Sum(vec![(p, left), (q, right)])
    }

    /// Convex sum; a one-element sum is its element, so that sums never
    /// differ syntactically from the term they denote.
    pub fn sum(mut parts: Vec<(Rational, DistTerm)>) -> Self {
        if parts.len() == 1 {
            parts.pop().unwrap().1
        } else {
            DistTerm::Sum(parts)
        }
    }

    pub fn lift(op: &str, args: Vec<DistTerm>) -> Self {
        DistTerm::Lift(op.to_string(), args)
    }

    pub fn is_closed(&self) -> bool {
        match self {
            DistTerm::Var(_) => false,
            DistTerm::Dirac(t) => t.is_closed(),
            DistTerm::Sum(parts) => parts.iter().all(|(_, d)| d.is_closed()),
            DistTerm::Lift(_, args) => args.iter().all(DistTerm::is_closed),
        }
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            DistTerm::Var(m) => {
                out.insert(Var::dist(m));
            }
            DistTerm::Dirac(t) => t.collect_vars(out),
            DistTerm::Sum(parts) => parts.iter().for_each(|(_, d)| d.collect_vars(out)),
            DistTerm::Lift(_, args) => args.iter().for_each(|d| d.collect_vars(out)),
        }
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn dist_vars(&self) -> BTreeSet<String> {
        self.vars()
            .into_iter()
            .filter(|v| v.sort == Sort::Dist)
            .map(|v| v.name)
            .collect()
    }

    pub fn size(&self) -> usize {
        match self {
            DistTerm::Var(_) => 1,
            DistTerm::Dirac(t) => 1 + t.size(),
            DistTerm::Sum(parts) => 1 + parts.iter().map(|(_, d)| d.size()).sum::<usize>(),
            DistTerm::Lift(_, args) => 1 + args.iter().map(DistTerm::size).sum::<usize>(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            DistTerm::Var(_) => 1,
            DistTerm::Dirac(t) => 1 + t.depth(),
            DistTerm::Sum(parts) => 1 + parts.iter().map(|(_, d)| d.depth()).max().unwrap_or(0),
            DistTerm::Lift(_, args) => 1 + args.iter().map(DistTerm::depth).max().unwrap_or(0),
        }
    }

    pub fn rename_ops(&self, f: &impl Fn(&str) -> String) -> DistTerm {
        match self {
            DistTerm::Var(_) => self.clone(),
            DistTerm::Dirac(t) => DistTerm::Dirac(Box::new(t.rename_ops(f))),
            DistTerm::Sum(parts) => DistTerm::Sum(
                parts
                    .iter()
                    .map(|(p, d)| (p.clone(), d.rename_ops(f)))
                    .collect(),
            ),
            DistTerm::Lift(op, args) => {
                DistTerm::Lift(f(op), args.iter().map(|a| a.rename_ops(f)).collect())
            }
        }
    }

    pub fn collect_ops(&self, out: &mut BTreeSet<String>) {
        match self {
            DistTerm::Var(_) => {}
            DistTerm::Dirac(t) => t.collect_ops(out),
            DistTerm::Sum(parts) => parts.iter().for_each(|(_, d)| d.collect_ops(out)),
            DistTerm::Lift(op, args) => {
                out.insert(op.clone());
                args.iter().for_each(|a| a.collect_ops(out));
            }
        }
    }
}

impl Term {
    pub fn sort(&self) -> Sort {
        match self {
            Term::State(_) => Sort::State,
            Term::Dist(_) => Sort::Dist,
        }
    }

    pub fn is_closed(&self) -> bool {
        match self {
            Term::State(t) => t.is_closed(),
            Term::Dist(d) => d.is_closed(),
        }
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Term::State(t) => t.collect_vars(out),
            Term::Dist(d) => d.collect_vars(out),
        }
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn size(&self) -> usize {
        match self {
            Term::State(t) => t.size(),
            Term::Dist(d) => d.size(),
        }
    }

    fn depth(&self) -> usize {
        match self {
            Term::State(t) => t.depth(),
            Term::Dist(d) => d.depth(),
        }
    }

    pub fn rename_ops(&self, f: &impl Fn(&str) -> String) -> Term {
        match self {
            Term::State(t) => Term::State(t.rename_ops(f)),
            Term::Dist(d) => Term::Dist(d.rename_ops(f)),
        }
    }

    pub fn collect_ops(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::State(t) => t.collect_ops(out),
            Term::Dist(d) => d.collect_ops(out),
        }
    }
}

impl From<StateTerm> for Term {
    fn from(t: StateTerm) -> Self {
        Term::State(t)
    }
}

impl From<DistTerm> for Term {
    fn from(d: DistTerm) -> Self {
        Term::Dist(d)
    }
}

/// Checks that convex weights are positive and sum to exactly one.
pub fn check_weights<'a>(weights: impl IntoIterator<Item = &'a Rational>) -> Result<(), TermError> {
    let mut total = Rational::zero();
    let mut count = 0usize;
    for w in weights {
        if !w.is_positive() {
            return Err(TermError::BadWeights(format!(
                "weight {} is not positive",
                fmt_rational(w)
            )));
        }
        total += w;
        count += 1;
    }
    if count == 0 {
        return Err(TermError::BadWeights("empty sum".into()));
    }
    if !total.is_one() {
        return Err(TermError::BadWeights(format!(
            "weights sum to {}, not 1",
            fmt_rational(&total)
        )));
    }
    Ok(())
}

pub fn check_state_sort(t: &StateTerm, sig: &Signature) -> Result<(), TermError> {
    match t {
        StateTerm::Var(_) => Ok(()),
        StateTerm::App(op, args) => {
            let sorts = sig
                .arity(op)
                .ok_or_else(|| TermError::UnknownOperator(op.clone()))?;
            if sorts.len() != args.len() {
                return Err(TermError::ArityMismatch {
                    op: op.clone(),
                    expected: sorts.len(),
                    found: args.len(),
                });
            }
            for (i, (arg, expected)) in args.iter().zip(sorts).enumerate() {
                let found = check_sort(arg, sig)?;
                if found != *expected {
                    return Err(TermError::SortMismatch {
                        op: op.clone(),
                        position: i + 1,
                        expected: *expected,
                        found,
                    });
                }
            }
            Ok(())
        }
    }
}

pub fn check_dist_sort(d: &DistTerm, sig: &Signature) -> Result<(), TermError> {
    match d {
        DistTerm::Var(_) => Ok(()),
        DistTerm::Dirac(t) => check_state_sort(t, sig),
        DistTerm::Sum(parts) => {
            check_weights(parts.iter().map(|(p, _)| p))?;
            parts.iter().try_for_each(|(_, d)| check_dist_sort(d, sig))
        }
        DistTerm::Lift(op, args) => {
            let sorts = sig
                .arity(op)
                .ok_or_else(|| TermError::UnknownOperator(op.clone()))?;
            if sorts.len() != args.len() {
                return Err(TermError::ArityMismatch {
                    op: format!("${op}"),
                    expected: sorts.len(),
                    found: args.len(),
                });
            }
            args.iter().try_for_each(|a| check_dist_sort(a, sig))
        }
    }
}

/// Sort of a well-formed term over `sig`.
pub fn check_sort(term: &Term, sig: &Signature) -> Result<Sort, TermError> {
    match term {
        Term::State(t) => check_state_sort(t, sig).map(|_| Sort::State),
        Term::Dist(d) => check_dist_sort(d, sig).map(|_| Sort::Dist),
    }
}

/// Sort-preserving substitution of state and distribution variables.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Substitution {
    pub state: BTreeMap<String, StateTerm>,
    pub dist: BTreeMap<String, DistTerm>,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind_state(mut self, x: &str, t: StateTerm) -> Self {
        self.state.insert(x.to_string(), t);
        self
    }

    pub fn bind_dist(mut self, m: &str, d: DistTerm) -> Self {
        self.dist.insert(m.to_string(), d);
        self
    }

    pub fn is_bound(&self, v: &Var) -> bool {
        match v.sort {
            Sort::State => self.state.contains_key(&v.name),
            Sort::Dist => self.dist.contains_key(&v.name),
        }
    }

    pub fn state_term(&self, t: &StateTerm) -> StateTerm {
        match t {
            StateTerm::Var(x) => self.state.get(x).cloned().unwrap_or_else(|| t.clone()),
            StateTerm::App(op, args) => {
                StateTerm::App(op.clone(), args.iter().map(|a| self.term(a)).collect())
            }
        }
    }

    pub fn dist_term(&self, d: &DistTerm) -> DistTerm {
        match d {
            DistTerm::Var(m) => self.dist.get(m).cloned().unwrap_or_else(|| d.clone()),
            DistTerm::Dirac(t) => DistTerm::Dirac(Box::new(self.state_term(t))),
            DistTerm::Sum(parts) => DistTerm::Sum(
                parts
                    .iter()
                    .map(|(p, d)| (p.clone(), self.dist_term(d)))
                    .collect(),
            ),
            DistTerm::Lift(op, args) => {
                DistTerm::Lift(op.clone(), args.iter().map(|a| self.dist_term(a)).collect())
            }
        }
    }

    pub fn term(&self, t: &Term) -> Term {
        match t {
            Term::State(s) => Term::State(self.state_term(s)),
            Term::Dist(d) => Term::Dist(self.dist_term(d)),
        }
    }

    /// `other ∘ self`: apply `self` first, then `other`.
    pub fn then(&self, other: &Substitution) -> Substitution {
        let mut out = Substitution::new();
        for (x, t) in &self.state {
            out.state.insert(x.clone(), other.state_term(t));
        }
        for (m, d) in &self.dist {
            out.dist.insert(m.clone(), other.dist_term(d));
        }
        for (x, t) in &other.state {
            out.state.entry(x.clone()).or_insert_with(|| t.clone());
        }
        for (m, d) in &other.dist {
            out.dist.entry(m.clone()).or_insert_with(|| d.clone());
        }
        out
    }
}

/// Homomorphic replacement of variables.
pub fn apply_subst(rho: &Substitution, term: &Term) -> Term {
    rho.term(term)
}

/// Extends `rho` so that `rho(pattern) == term`; on failure `rho` is left in
/// an unspecified state and `false` is returned.
pub fn match_state(pattern: &StateTerm, term: &StateTerm, rho: &mut Substitution) -> bool {
    match (pattern, term) {
        (StateTerm::Var(x), _) => match rho.state.get(x) {
            Some(bound) => bound == term,
            None => {
                rho.state.insert(x.clone(), term.clone());
                true
            }
        },
        (StateTerm::App(f, ps), StateTerm::App(g, ts)) => {
            f == g
                && ps.len() == ts.len()
                && ps.iter().zip(ts).all(|(p, t)| match_term(p, t, rho))
        }
        _ => false,
    }
}

pub fn match_dist(pattern: &DistTerm, term: &DistTerm, rho: &mut Substitution) -> bool {
    match (pattern, term) {
        (DistTerm::Var(m), _) => match rho.dist.get(m) {
            Some(bound) => bound == term,
            None => {
                rho.dist.insert(m.clone(), term.clone());
                true
            }
        },
        (DistTerm::Dirac(p), DistTerm::Dirac(t)) => match_state(p, t, rho),
        (DistTerm::Sum(ps), DistTerm::Sum(ts)) => {
            ps.len() == ts.len()
                && ps
                    .iter()
                    .zip(ts)
                    .all(|((wp, p), (wt, t))| wp == wt && match_dist(p, t, rho))
        }
        (DistTerm::Lift(f, ps), DistTerm::Lift(g, ts)) => {
            f == g && ps.len() == ts.len() && ps.iter().zip(ts).all(|(p, t)| match_dist(p, t, rho))
        }
        _ => false,
    }
}

pub fn match_term(pattern: &Term, term: &Term, rho: &mut Substitution) -> bool {
    match (pattern, term) {
        (Term::State(p), Term::State(t)) => match_state(p, t, rho),
        (Term::Dist(p), Term::Dist(t)) => match_dist(p, t, rho),
        _ => false,
    }
}

// ----------------------------------------------------------------------------
// Rendering. `stop` prints as `0`, `plus` as infix `+` and `pre_X(θ)` as `X.θ`;
// the parser reads those forms back to the same trees.

pub(crate) fn prefix_action(op: &str) -> Option<&str> {
    let rest = op.strip_prefix("pre_")?;
    let mut chars = rest.chars();
    let first = chars.next()?;
    (first.is_ascii_alphabetic() && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\''))
        .then_some(rest)
}

impl fmt::Display for StateTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateTerm::Var(x) => f.write_str(x),
            StateTerm::App(op, args) if op == "stop" && args.is_empty() => f.write_str("0"),
            StateTerm::App(op, args) if op == "plus" && args.len() == 2 => {
                match (&args[0], &args[1]) {
                    (Term::State(l), Term::State(r)) => {
                        let right_plus = matches!(r, StateTerm::App(o, a) if o == "plus" && a.len() == 2);
                        if right_plus {
                            write!(f, "{l} + ({r})")
                        } else {
                            write!(f, "{l} + {r}")
                        }
                    }
                    _ => write_call(f, op, args),
                }
            }
            StateTerm::App(op, args) if args.len() == 1 && prefix_action(op).is_some() => {
                match &args[0] {
                    Term::Dist(d) => {
                        let a = prefix_action(op).unwrap();
                        write!(f, "{a}.")?;
                        write_dist_atom(f, d)
                    }
                    Term::State(_) => write_call(f, op, args),
                }
            }
            StateTerm::App(op, args) => write_call(f, op, args),
        }
    }
}

fn write_call(f: &mut fmt::Formatter<'_>, op: &str, args: &[Term]) -> fmt::Result {
    write!(f, "{op}(")?;
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{a}")?;
    }
    f.write_str(")")
}

fn is_binary_sum(d: &DistTerm) -> bool {
    matches!(d, DistTerm::Sum(parts) if parts.len() == 2)
}

/// Writes `d`, parenthesized when it is an infix sum.
pub(crate) fn write_dist_atom(f: &mut fmt::Formatter<'_>, d: &DistTerm) -> fmt::Result {
    if is_binary_sum(d) {
        write!(f, "({d})")
    } else {
        write!(f, "{d}")
    }
}

impl fmt::Display for DistTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistTerm::Var(m) => f.write_str(m),
            DistTerm::Dirac(t) => write!(f, "dirac({t})"),
            DistTerm::Lift(op, args) => {
                write!(f, "${op}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
            DistTerm::Sum(parts) if parts.len() == 2 => {
                let (p, left) = &parts[0];
                let (_, right) = &parts[1];
                write_dist_atom(f, left)?;
                write!(f, " (+) {} {right}", fmt_rational(p))
            }
            DistTerm::Sum(parts) => {
                f.write_str("oplus(")?;
                for (i, (p, d)) in parts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{}: {d}", fmt_rational(p))?;
                }
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::State(t) => t.fmt(f),
            Term::Dist(d) => d.fmt(f),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn pa() -> Signature {
        Signature::new()
            .with_op("stop", &[])
            .with_op("plus", &[Sort::State, Sort::State])
            .with_op("pre_a", &[Sort::Dist])
            .with_op("pre_b", &[Sort::Dist])
    }

    fn stop() -> StateTerm {
        StateTerm::constant("stop")
    }

    #[test]
    fn sorts_of_basic_terms() {
        let sig = pa();
        let plus = Term::State(StateTerm::app(
            "plus",
            vec![stop().into(), stop().into()],
        ));
        assert_eq!(check_sort(&plus, &sig), Ok(Sort::State));
        let d = Term::Dist(DistTerm::dirac(StateTerm::var("x")));
        assert_eq!(check_sort(&d, &sig), Ok(Sort::Dist));
    }

    #[test]
    fn prefix_of_state_term_is_a_sort_mismatch() {
        let bad = Term::State(StateTerm::app("pre_a", vec![stop().into()]));
        assert!(matches!(
            check_sort(&bad, &pa()),
            Err(TermError::SortMismatch { position: 1, expected: Sort::Dist, found: Sort::State, .. })
        ));
    }

    #[test]
    fn unknown_and_arity_errors() {
        let sig = pa();
        let t = Term::State(StateTerm::constant("nope"));
        assert_eq!(check_sort(&t, &sig), Err(TermError::UnknownOperator("nope".into())));
        let t = Term::State(StateTerm::app("plus", vec![stop().into()]));
        assert!(matches!(check_sort(&t, &sig), Err(TermError::ArityMismatch { expected: 2, found: 1, .. })));
        let t = Term::Dist(DistTerm::Sum(vec![(rat(1, 2), DistTerm::dirac(stop()))]));
        assert!(matches!(check_sort(&t, &sig), Err(TermError::BadWeights(_))));
    }

    #[test]
    fn substitution_replaces_homomorphically() {
        let rho = Substitution::new().bind_dist("mu", DistTerm::dirac(stop()));
        let t = Term::State(StateTerm::app("pre_a", vec![DistTerm::var("mu").into()]));
        let expected = Term::State(StateTerm::app("pre_a", vec![DistTerm::dirac(stop()).into()]));
        assert_eq!(apply_subst(&rho, &t), expected);
        assert_eq!(apply_subst(&Substitution::new(), &t), t);
    }

    #[test]
    fn substitution_leaves_unbound_variables() {
        let b0 = StateTerm::app("pre_b", vec![DistTerm::dirac(stop()).into()]);
        let rho = Substitution::new().bind_state("x", b0.clone());
        let d = DistTerm::mix(
            rat(1, 2),
            DistTerm::dirac(StateTerm::var("x")),
            DistTerm::dirac(StateTerm::var("y")),
        );
        let expected = DistTerm::mix(rat(1, 2), DistTerm::dirac(b0), DistTerm::dirac(StateTerm::var("y")));
        assert_eq!(rho.dist_term(&d), expected);
    }

    #[test]
    fn composition_applies_left_then_right() {
        let r1 = Substitution::new().bind_state("x", StateTerm::app("plus", vec![StateTerm::var("y").into(), stop().into()]));
        let r2 = Substitution::new().bind_state("y", stop()).bind_state("x", StateTerm::var("z"));
        let t = StateTerm::app("plus", vec![StateTerm::var("x").into(), StateTerm::var("y").into()]);
        assert_eq!(r2.state_term(&r1.state_term(&t)), r1.then(&r2).state_term(&t));
    }

    #[test]
    fn matching_binds_consistently() {
        let pat = StateTerm::app("plus", vec![StateTerm::var("x").into(), StateTerm::var("x").into()]);
        let same = StateTerm::app("plus", vec![stop().into(), stop().into()]);
        let mut rho = Substitution::new();
        assert!(match_state(&pat, &same, &mut rho));
        assert_eq!(rho.state["x"], stop());
        let b0 = StateTerm::app("pre_b", vec![DistTerm::dirac(stop()).into()]);
        let diff = StateTerm::app("plus", vec![stop().into(), b0.into()]);
        assert!(!match_state(&pat, &diff, &mut Substitution::new()));
    }

    #[test]
    fn rendering_uses_sugar() {
        let b0 = StateTerm::app("pre_b", vec![DistTerm::dirac(stop()).into()]);
        assert_eq!(b0.to_string(), "b.dirac(0)");
        let mix = DistTerm::mix(rat(1, 2), DistTerm::dirac(b0.clone()), DistTerm::dirac(stop()));
        let t3 = StateTerm::app("pre_a", vec![mix.into()]);
        assert_eq!(t3.to_string(), "a.(dirac(b.dirac(0)) (+) 1/2 dirac(0))");
        let sum = StateTerm::app("plus", vec![b0.clone().into(), StateTerm::app("plus", vec![stop().into(), stop().into()]).into()]);
        assert_eq!(sum.to_string(), "b.dirac(0) + (0 + 0)");
        let three = DistTerm::Sum(vec![
            (rat(1, 3), DistTerm::dirac(stop())),
            (rat(1, 3), DistTerm::dirac(b0.clone())),
            (rat(1, 3), DistTerm::var("mu")),
        ]);
        assert_eq!(three.to_string(), "oplus(1/3: dirac(0), 1/3: dirac(b.dirac(0)), 1/3: mu)");
        assert_eq!(DistTerm::lift("g", vec![DistTerm::var("mu"), DistTerm::var("mu")]).to_string(), "$g(mu, mu)");
    }
}
