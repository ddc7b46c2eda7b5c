//! Static rule-format analysis: the general ntμfθ/ntμxθ format, its convex,
//! probability abstracted and probability obliterated restrictions, and
//! well-foundedness of the variable dependency graph.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_traits::Zero;
use serde::Serialize;

use crate::lang::{Comparator, Premise, Quantitative, RuleSchema, SetSpec, Spec, Transition};
use crate::terms::{DistTerm, Signature, Sort, StateTerm, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Ntmufxtheta,
    Convex,
    Abstracted,
    Obliterated,
}

impl Format {
    pub const ALL: [Format; 4] = [Format::Ntmufxtheta, Format::Convex, Format::Abstracted, Format::Obliterated];

    pub fn name(self) -> &'static str {
        match self {
            Format::Ntmufxtheta => "ntmufxtheta",
            Format::Convex => "convex",
            Format::Abstracted => "abstracted",
            Format::Obliterated => "obliterated",
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Format::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown format `{s}`"))
    }
}

/// A violated requirement. Numbered conditions refer to the numbering of
/// the format being checked (the obliterated format has its own 1–3).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Condition {
    /// The rule does not have the premise/conclusion shape of the format.
    Shape,
    Num(u8),
    /// A quantitative comparator outside `{>, >=}`.
    Comparator,
    /// A quantitative bound other than 0 (abstracted format).
    ZeroBound,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Shape => f.write_str("shape"),
            Condition::Num(n) => write!(f, "{n}"),
            Condition::Comparator => f.write_str("comparator"),
            Condition::ZeroBound => f.write_str("p=0"),
        }
    }
}

impl Serialize for Condition {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub condition: Condition,
    pub witness: String,
}

impl Violation {
    fn new(condition: Condition, witness: impl Into<String>) -> Self {
        Violation {
            condition,
            witness: witness.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleVerdict {
    pub rule: String,
    pub format: Format,
    /// Sorted; the first entry is the reported one.
    pub violations: Vec<Violation>,
}

impl RuleVerdict {
    pub fn conforms(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn primary(&self) -> Option<&Violation> {
        self.violations.first()
    }
}

/// One line of a report with the stable field names used by `--output=machine`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReportEntry {
    pub rule: String,
    pub format: Format,
    pub verdict: &'static str,
    pub condition: Option<String>,
    pub witness: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormatReport {
    pub verdicts: Vec<RuleVerdict>,
    /// Rules whose dependency graph has a cycle, with the cycle.
    pub cycles: Vec<(String, Vec<String>)>,
    /// Every quantitative premise measures an existentially weighted combination.
    pub convex_closed: bool,
}

impl FormatReport {
    pub fn well_founded(&self) -> bool {
        self.cycles.is_empty()
    }

    pub fn conforms(&self, format: Format) -> bool {
        self.verdicts.iter().filter(|v| v.format == format).all(RuleVerdict::conforms)
    }

    pub fn verdict(&self, rule: &str, format: Format) -> Option<&RuleVerdict> {
        self.verdicts.iter().find(|v| v.rule == rule && v.format == format)
    }

    pub fn entries(&self) -> Vec<ReportEntry> {
        self.verdicts
            .iter()
            .map(|v| ReportEntry {
                rule: v.rule.clone(),
                format: v.format,
                verdict: if v.conforms() { "conforms" } else { "violates" },
                condition: v.primary().map(|x| x.condition.to_string()),
                witness: v.primary().map(|x| x.witness.clone()),
            })
            .collect()
    }
}

impl fmt::Display for FormatReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.verdicts {
            match v.primary() {
                None => writeln!(f, "{}: {}: conforms", v.rule, v.format)?,
                Some(x) => writeln!(
                    f,
                    "{}: {}: violates condition {} ({})",
                    v.rule, v.format, x.condition, x.witness
                )?,
            }
        }
        for (rule, cycle) in &self.cycles {
            writeln!(f, "{rule}: not well-founded: cycle {}", cycle.join(" -> "))?;
        }
        writeln!(f, "well-founded: {}", self.well_founded())?;
        write!(f, "convex-closed: {}", self.convex_closed)
    }
}

// ----------------------------------------------------------------------------
// Dependency graph

/// Variables of a rule with edges from the variables of a premise source to
/// its target, and from the variables of a measured term to the elements of
/// the measured set.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DependencyGraph {
    pub vertices: BTreeSet<String>,
    pub edges: BTreeSet<(String, String)>,
}

impl DependencyGraph {
    pub fn of(rule: &RuleSchema) -> Self {
        let mut g = DependencyGraph::default();
        for v in rule.vars() {
            g.vertices.insert(v.name);
        }
        let mut elems: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for p in &rule.premises {
            if let Premise::Forall { elem, set, .. } = p {
                elems.entry(set).or_default().push(elem);
            }
        }
        for p in &rule.premises {
            g.add_premise(p, &elems);
        }
        g
    }

    fn add_premise(&mut self, p: &Premise, elems: &BTreeMap<&str, Vec<&str>>) {
        match p {
            Premise::Positive(t) => {
                for m in t.target.vars() {
                    for z in t.source.vars() {
                        self.edges.insert((z.name, m.name.clone()));
                    }
                }
            }
            Premise::Negative { .. } => {}
            Premise::Quantitative(q) => {
                let targets: Vec<String> = match &q.set {
                    SetSpec::Var(y) => elems
                        .get(y.as_str())
                        .map(|es| es.iter().map(|e| e.to_string()).collect())
                        .unwrap_or_default(),
                    SetSpec::Explicit(ts) => {
                        ts.iter().flat_map(|t| t.vars()).map(|v| v.name).collect()
                    }
                };
                for z in q.term.vars() {
                    for y in &targets {
                        self.edges.insert((z.name.clone(), y.clone()));
                    }
                }
            }
            Premise::Forall { body, .. } => self.add_premise(body, elems),
            Premise::Combine { alias, link, .. } => {
                self.add_premise(&Premise::Positive(link.clone()), elems);
                for z in link.source.vars() {
                    self.edges.insert((z.name, alias.clone()));
                }
            }
        }
        for (a, b) in self.edges.clone() {
            self.vertices.insert(a);
            self.vertices.insert(b);
        }
    }

    /// A cycle `v0 -> v1 -> ... -> v0`, if any (iterative DFS, O(V + E)).
    pub fn find_cycle(&self) -> Option<Vec<String>> {
        let mut succ: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (a, b) in &self.edges {
            succ.entry(a).or_default().push(b);
        }
        // 0 unvisited, 1 on stack, 2 done
        let mut state: BTreeMap<&str, u8> = BTreeMap::new();
        for root in &self.vertices {
            if state.get(root.as_str()).copied().unwrap_or(0) != 0 {
                continue;
            }
            let mut stack: Vec<(&str, usize)> = vec![(root, 0)];
            state.insert(root, 1);
            while let Some(&mut (v, ref mut i)) = stack.last_mut() {
                let next = succ.get(v).and_then(|s| s.get(*i)).copied();
                *i += 1;
                match next {
                    None => {
                        state.insert(v, 2);
                        stack.pop();
                    }
                    Some(w) => match state.get(w).copied().unwrap_or(0) {
                        0 => {
                            state.insert(w, 1);
                            stack.push((w, 0));
                        }
                        1 => {
                            let start = stack.iter().position(|(u, _)| *u == w).unwrap();
                            let mut cycle: Vec<String> = stack[start..].iter().map(|(u, _)| u.to_string()).collect();
                            cycle.push(w.to_string());
                            return Some(cycle);
                        }
                        _ => {}
                    },
                }
            }
        }
        None
    }
}

/// `Err(cycle)` when the dependency graph of `rule` has a cycle.
pub fn check_well_founded(rule: &RuleSchema) -> Result<(), Vec<String>> {
    match DependencyGraph::of(rule).find_cycle() {
        Some(c) => Err(c),
        None => Ok(()),
    }
}

// ----------------------------------------------------------------------------
// Linearity

fn dist_var_names(d: &DistTerm) -> BTreeSet<String> {
    d.dist_vars()
}

/// Whether `theta` is linear for the distribution variables `v`: no variable
/// of `v` occurs in two different arguments of one lifted operator.
/// `Err` names the repeated variable.
pub fn check_linear(theta: &DistTerm, v: &BTreeSet<String>) -> Result<(), String> {
    match theta {
        DistTerm::Var(_) => Ok(()),
        // A Dirac term is a constant with respect to `v` unless its state
        // term mentions a variable of `v`, which can only sit in a
        // dist-sorted position; that is reported as non-linear.
        DistTerm::Dirac(t) => match t.vars().into_iter().find(|x| x.sort == Sort::Dist && v.contains(&x.name)) {
            Some(x) => Err(x.name),
            None => Ok(()),
        },
        DistTerm::Sum(parts) => parts.iter().try_for_each(|(_, d)| check_linear(d, v)),
        DistTerm::Lift(_, args) => {
            let mut seen = BTreeSet::new();
            for a in args {
                check_linear(a, v)?;
                for m in dist_var_names(a) {
                    if v.contains(&m) && !seen.insert(m.clone()) {
                        return Err(m);
                    }
                }
            }
            Ok(())
        }
    }
}

/// Distribution variables that occur below a dist-sorted argument position.
pub fn dist_sorted_vars(theta: &DistTerm, sig: &Signature) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    collect_dist_sorted(theta, sig, &mut out);
    out
}

fn collect_dist_sorted(theta: &DistTerm, sig: &Signature, out: &mut BTreeSet<String>) {
    match theta {
        DistTerm::Var(_) => {}
        // Inside a state term every distribution variable is an argument of
        // some dist-sorted position.
        DistTerm::Dirac(t) => out.extend(t.vars().into_iter().filter(|x| x.sort == Sort::Dist).map(|x| x.name)),
        DistTerm::Sum(parts) => parts.iter().for_each(|(_, d)| collect_dist_sorted(d, sig, out)),
        DistTerm::Lift(op, args) => {
            let sorts = sig.arity(op).unwrap_or(&[]);
            for (i, a) in args.iter().enumerate() {
                if sorts.get(i) == Some(&Sort::Dist) {
                    out.extend(a.dist_vars());
                } else {
                    collect_dist_sorted(a, sig, out);
                }
            }
        }
    }
}

// ----------------------------------------------------------------------------
// Rule analysis

/// The signature a rule schema is checked against: family operators also
/// appear under the rule's action metavariable (`pre_A`).
pub fn rule_signature(spec: &Spec, rule: &RuleSchema) -> Signature {
    let mut sig = spec.signature();
    if let Some(var) = &rule.action_var {
        for op in spec.ops.iter().filter(|o| o.family.is_some()) {
            sig = sig.with_op(&format!("{}_{var}", op.name), &op.args);
        }
    }
    sig
}

/// Facts about a rule shared by all format checks.
struct Anatomy<'r> {
    rule: &'r RuleSchema,
    /// Conclusion source variables ζ (or the single x).
    zetas: Vec<String>,
    /// Targets of positive premises, including per-element ones.
    targets: Vec<String>,
    /// Premise sources (positive, negative, combine links).
    sources: Vec<&'r StateTerm>,
    quantitative: Vec<&'r Quantitative>,
    /// (element variable, set variable) per forall block.
    blocks: Vec<(&'r str, &'r str)>,
    combines: Vec<(&'r str, &'r str, &'r Transition)>,
    shape: Vec<Violation>,
}

impl<'r> Anatomy<'r> {
    fn of(rule: &'r RuleSchema) -> Self {
        let mut a = Anatomy {
            rule,
            zetas: Vec::new(),
            targets: Vec::new(),
            sources: Vec::new(),
            quantitative: Vec::new(),
            blocks: Vec::new(),
            combines: Vec::new(),
            shape: Vec::new(),
        };
        match &rule.conclusion.source {
            StateTerm::Var(x) => a.zetas.push(x.clone()),
            StateTerm::App(_, args) => {
                for arg in args {
                    match arg {
                        Term::State(StateTerm::Var(x)) | Term::Dist(DistTerm::Var(x)) => a.zetas.push(x.clone()),
                        other => a.shape.push(Violation::new(
                            Condition::Shape,
                            format!("conclusion source argument `{other}` is not a variable"),
                        )),
                    }
                }
            }
        }
        for p in &rule.premises {
            a.add(p);
        }
        a
    }

    fn add(&mut self, p: &'r Premise) {
        match p {
            Premise::Positive(t) => {
                self.sources.push(&t.source);
                match &t.target {
                    DistTerm::Var(m) => self.targets.push(m.clone()),
                    other => self.shape.push(Violation::new(
                        Condition::Shape,
                        format!("premise target `{other}` is not a variable"),
                    )),
                }
            }
            Premise::Negative { source, .. } => self.sources.push(source),
            Premise::Quantitative(q) => self.quantitative.push(q),
            Premise::Forall { elem, set, body } => {
                self.blocks.push((elem, set));
                self.add(body);
            }
            Premise::Combine { family, alias, link } => {
                self.sources.push(&link.source);
                self.combines.push((family, alias, link));
            }
        }
    }

    fn target_set(&self) -> BTreeSet<String> {
        self.targets.iter().cloned().collect()
    }

    fn aliases(&self) -> BTreeSet<String> {
        self.combines.iter().map(|(_, m, _)| m.to_string()).collect()
    }

    /// Element variables of explicit measured sets, or a shape violation for
    /// a non-variable element.
    fn explicit_elements(&self, out: &mut Vec<Violation>) -> Vec<String> {
        let mut elems = Vec::new();
        for q in &self.quantitative {
            if let SetSpec::Explicit(ts) = &q.set {
                for t in ts {
                    match t {
                        StateTerm::Var(y) => elems.push(y.clone()),
                        other => out.push(Violation::new(
                            Condition::Shape,
                            format!("measured set element `{other}` is not a variable"),
                        )),
                    }
                }
            }
        }
        elems
    }
}

fn first_duplicate<'a>(xs: impl IntoIterator<Item = &'a String>) -> Option<&'a String> {
    let mut seen = BTreeSet::new();
    xs.into_iter().find(|x| !seen.insert(*x))
}

/// Conditions of the general format shared by its restrictions.
fn general_conditions(a: &Anatomy<'_>) -> Vec<Violation> {
    let mut out = a.shape.clone();
    let elems = a.explicit_elements(&mut out);
    let zetas: BTreeSet<&String> = a.zetas.iter().collect();

    // 1: measured sets must be infinite. A finite explicit set is admitted
    // only in `θ({y1..yk}) > 0`, which says the same as measuring an
    // infinite set containing the elements.
    for q in &a.quantitative {
        if matches!(q.set, SetSpec::Explicit(_)) && !(q.cmp == Comparator::Gt && q.bound.is_zero()) {
            out.push(Violation::new(Condition::Num(1), format!("finite measured set in `{q}`")));
        }
    }
    if let Some(z) = first_duplicate(&a.zetas) {
        out.push(Violation::new(Condition::Num(2), format!("source variable `{z}` occurs twice")));
    }
    if let Some(m) = first_duplicate(&a.targets) {
        out.push(Violation::new(Condition::Num(3), format!("premise target `{m}` is bound twice")));
    }
    if let Some(m) = a.targets.iter().find(|m| zetas.contains(m)) {
        out.push(Violation::new(Condition::Num(3), format!("premise target `{m}` is a source variable")));
    }
    let block_elems: Vec<&str> = a.blocks.iter().map(|(y, _)| *y).collect();
    for y in block_elems.iter().copied().chain(elems.iter().map(String::as_str)) {
        if a.zetas.iter().any(|z| z == y) {
            out.push(Violation::new(Condition::Num(4), format!("set element `{y}` is a source variable")));
        }
    }
    let mut owner: BTreeMap<&str, &str> = BTreeMap::new();
    for (y, set) in &a.blocks {
        if let Some(prev) = owner.insert(y, set) {
            if prev != *set {
                out.push(Violation::new(Condition::Num(4), format!("`{y}` ranges over `{prev}` and `{set}`")));
            }
        }
    }
    if let Some(y) = first_duplicate(&elems) {
        out.push(Violation::new(Condition::Num(4), format!("`{y}` is an element of two measured sets")));
    }
    if let Some(y) = elems.iter().find(|y| owner.contains_key(y.as_str())) {
        out.push(Violation::new(Condition::Num(4), format!("`{y}` is an element of two measured sets")));
    }
    for q in &a.quantitative {
        if !q.cmp.is_lower_bound() {
            out.push(Violation::new(Condition::Comparator, format!("comparator `{}` in `{q}`", q.cmp)));
        }
    }
    out
}

fn convex_conditions(a: &Anatomy<'_>, sig: &Signature) -> Vec<Violation> {
    let mut out = Vec::new();
    let aliases = a.aliases();
    let targets = a.target_set();
    let rule = a.rule;

    // 7: measured terms are existential combinations, used nowhere else.
    for q in &a.quantitative {
        match &q.term {
            DistTerm::Var(m) if aliases.contains(m) => {}
            other => out.push(Violation::new(
                Condition::Num(7),
                format!("`{other}` is measured directly instead of through a combination"),
            )),
        }
    }
    let mut elsewhere = rule.conclusion.target.dist_vars();
    for s in &a.sources {
        elsewhere.extend(s.vars().into_iter().filter(|v| v.sort == Sort::Dist).map(|v| v.name));
    }
    for q in &a.quantitative {
        if !matches!(q.term, DistTerm::Var(_)) {
            elsewhere.extend(q.term.dist_vars());
        }
    }
    if let Some(m) = aliases.iter().find(|m| elsewhere.contains(*m)) {
        out.push(Violation::new(Condition::Num(7), format!("combination `{m}` is used outside a measured term")));
    }

    // 8: each combination is linked to exactly one real premise, and the
    // families are pairwise disjoint.
    let positives: Vec<&Transition> = rule
        .premises
        .iter()
        .filter_map(|p| match p {
            Premise::Positive(t) => Some(t),
            _ => None,
        })
        .collect();
    let mut linked = BTreeSet::new();
    for (_, alias, link) in &a.combines {
        let n = positives.iter().filter(|t| **t == *link).count();
        if n != 1 {
            out.push(Violation::new(
                Condition::Num(8),
                format!("combination `{alias}` is linked to {n} premises `{link}`"),
            ));
        }
        if !linked.insert(link.target.to_string()) {
            out.push(Violation::new(
                Condition::Num(8),
                format!("combination `{alias}` shares its family with another combination"),
            ));
        }
    }

    // 9: premise targets stay out of premise sources and dist-sorted
    // positions of the conclusion target.
    for s in &a.sources {
        if let Some(m) = s.vars().into_iter().find(|v| v.sort == Sort::Dist && targets.contains(&v.name)) {
            out.push(Violation::new(
                Condition::Num(9),
                format!("premise target `{}` occurs in the premise source `{s}`", m.name),
            ));
        }
    }
    if let Some(m) = dist_sorted_vars(&rule.conclusion.target, sig).intersection(&targets).next() {
        out.push(Violation::new(
            Condition::Num(9),
            format!("premise target `{m}` occurs in a dist-sorted position of `{}`", rule.conclusion.target),
        ));
    }

    // 10
    if let Err(m) = check_linear(&rule.conclusion.target, &targets) {
        out.push(Violation::new(
            Condition::Num(10),
            format!("conclusion target `{}` is not linear: `{m}` is shared", rule.conclusion.target),
        ));
    }
    out
}

fn obliterated_conditions(a: &Anatomy<'_>, sig: &Signature) -> Vec<Violation> {
    let mut out = a.shape.clone();
    let rule = a.rule;
    for (y, set) in &a.blocks {
        out.push(Violation::new(Condition::Shape, format!("set-quantified block `forall {y} in {set}`")));
    }
    for (family, alias, _) in &a.combines {
        out.push(Violation::new(Condition::Shape, format!("combination block `combine {family} as {alias}`")));
    }
    for q in &a.quantitative {
        let single_var = matches!(&q.set, SetSpec::Explicit(ts) if ts.len() == 1 && matches!(ts[0], StateTerm::Var(_)));
        if !single_var || q.cmp != Comparator::Gt || !q.bound.is_zero() {
            out.push(Violation::new(Condition::Shape, format!("`{q}` is not of the form `θ({{y}}) > 0`")));
        }
    }
    let mut binders: Vec<String> = a.zetas.clone();
    binders.extend(a.targets.iter().cloned());
    binders.extend(a.explicit_elements(&mut Vec::new()));
    if let Some(v) = first_duplicate(&binders) {
        out.push(Violation::new(Condition::Shape, format!("variable `{v}` is bound twice")));
    }

    let targets = a.target_set();
    // 1
    for s in &a.sources {
        if let Some(m) = s.vars().into_iter().find(|v| v.sort == Sort::Dist && targets.contains(&v.name)) {
            out.push(Violation::new(
                Condition::Num(1),
                format!("premise target `{}` occurs in the premise source `{s}`", m.name),
            ));
        }
    }
    // 2
    let mut measured: BTreeMap<String, String> = BTreeMap::new();
    for q in &a.quantitative {
        if let Err(m) = check_linear(&q.term, &targets) {
            out.push(Violation::new(Condition::Num(2), format!("`{}` is not linear: `{m}` is shared", q.term)));
        }
        for m in q.term.dist_vars().intersection(&targets) {
            if let Some(prev) = measured.insert(m.clone(), q.term.to_string()) {
                out.push(Violation::new(
                    Condition::Num(2),
                    format!("premise target `{m}` is measured by both `{prev}` and `{}`", q.term),
                ));
            }
        }
    }
    // 3
    let theta = &rule.conclusion.target;
    if let Err(m) = check_linear(theta, &targets) {
        out.push(Violation::new(Condition::Num(3), format!("conclusion target `{theta}` is not linear: `{m}` is shared")));
    }
    if let Some(m) = theta.dist_vars().into_iter().find(|m| measured.contains_key(m)) {
        out.push(Violation::new(
            Condition::Num(3),
            format!("premise target `{m}` is both measured and used in `{theta}`"),
        ));
    }
    if let Some(m) = dist_sorted_vars(theta, sig).intersection(&targets).next() {
        out.push(Violation::new(
            Condition::Num(3),
            format!("premise target `{m}` occurs in a dist-sorted position of `{theta}`"),
        ));
    }
    out
}

/// Checks one rule schema against one format.
pub fn check_rule(rule: &RuleSchema, format: Format, sig: &Signature) -> RuleVerdict {
    let a = Anatomy::of(rule);
    let mut violations = match format {
        Format::Ntmufxtheta => general_conditions(&a),
        Format::Convex => {
            let mut v = general_conditions(&a);
            v.extend(convex_conditions(&a, sig));
            v
        }
        Format::Abstracted => {
            let mut v = general_conditions(&a);
            for q in &a.quantitative {
                if !q.bound.is_zero() {
                    v.push(Violation::new(Condition::ZeroBound, format!("`{q}` tests a non-zero bound")));
                }
            }
            v
        }
        Format::Obliterated => obliterated_conditions(&a, sig),
    };
    violations.sort_by_key(|x| x.condition);
    violations.dedup();
    RuleVerdict {
        rule: rule.name.clone(),
        format,
        violations,
    }
}

/// Checks every rule of `spec` against each of `formats`.
pub fn check_spec(spec: &Spec, formats: &[Format]) -> FormatReport {
    let mut verdicts = Vec::new();
    let mut cycles = Vec::new();
    let mut convex_closed = true;
    for rule in &spec.rules {
        let sig = rule_signature(spec, rule);
        for &f in formats {
            verdicts.push(check_rule(rule, f, &sig));
        }
        if let Err(c) = check_well_founded(rule) {
            cycles.push((rule.name.clone(), c));
        }
        let aliases = Anatomy::of(rule).aliases();
        convex_closed &= rule
            .quantitative_premises()
            .iter()
            .all(|q| matches!(&q.term, DistTerm::Var(m) if aliases.contains(m)));
    }
    FormatReport {
        verdicts,
        cycles,
        convex_closed,
    }
}
