use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::lp::Cmp;
use crate::rational::{fmt_rational, Rational};
use crate::terms::{write_dist_atom, DistTerm, Signature, Sort, StateTerm, Var};

/// A declared state operator. `family` is set for action-indexed families
/// such as `op pre[A] : D -> S`, which expand to one operator per action.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpDecl {
    pub name: String,
    pub family: Option<String>,
    pub args: Vec<Sort>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Def {
    pub name: String,
    pub term: StateTerm,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Transition {
    pub source: StateTerm,
    pub action: String,
    pub target: DistTerm,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum SetSpec {
    Explicit(Vec<StateTerm>),
    Var(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Comparator {
    Gt,
    Ge,
    Lt,
    Le,
}

impl Comparator {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
            Comparator::Lt => "<",
            Comparator::Le => "<=",
        }
    }

    pub fn to_cmp(self) -> Cmp {
        match self {
            Comparator::Gt => Cmp::Gt,
            Comparator::Ge => Cmp::Ge,
            Comparator::Lt => Cmp::Lt,
            Comparator::Le => Cmp::Le,
        }
    }

    pub fn holds(self, lhs: &Rational, rhs: &Rational) -> bool {
        self.to_cmp().holds(lhs, rhs)
    }

    /// `>` and `>=` are monotone in the measured set.
    pub fn is_lower_bound(self) -> bool {
        matches!(self, Comparator::Gt | Comparator::Ge)
    }
}

/// `θ(T) ⋈ q`
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Quantitative {
    pub term: DistTerm,
    pub set: SetSpec,
    pub cmp: Comparator,
    pub bound: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Premise {
    Positive(Transition),
    Negative { source: StateTerm, action: String },
    Quantitative(Quantitative),
    /// Per-element premise template for every `elem` in the set variable `set`.
    Forall {
        elem: String,
        set: String,
        body: Box<Premise>,
    },
    /// The family `family` of all `link.action`-targets of `link.source`,
    /// combined with existential weights into the distribution `alias`.
    Combine {
        family: String,
        alias: String,
        link: Transition,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleSchema {
    pub name: String,
    pub action_var: Option<String>,
    pub premises: Vec<Premise>,
    pub conclusion: Transition,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Spec {
    pub name: String,
    pub actions: Vec<String>,
    pub ops: Vec<OpDecl>,
    pub rules: Vec<RuleSchema>,
    pub defs: Vec<Def>,
}

impl Spec {
    pub fn signature(&self) -> Signature {
        let mut sig = Signature::new();
        for op in &self.ops {
            match &op.family {
                Some(_) => {
                    for a in &self.actions {
                        sig = sig.with_op(&format!("{}_{a}", op.name), &op.args);
                    }
                }
                None => sig = sig.with_op(&op.name, &op.args),
            }
        }
        sig
    }

    pub fn family_bases(&self) -> Vec<&str> {
        self.ops
            .iter()
            .filter(|o| o.family.is_some())
            .map(|o| o.name.as_str())
            .collect()
    }

    pub fn def(&self, name: &str) -> Option<&StateTerm> {
        self.defs.iter().find(|d| d.name == name).map(|d| &d.term)
    }

    pub fn rule(&self, name: &str) -> Option<&RuleSchema> {
        self.rules.iter().find(|r| r.name == name)
    }

    /// Rules with their action metavariable replaced by every action.
    pub fn expanded_rules(&self) -> Vec<RuleSchema> {
        let bases = self.family_bases();
        let mut out = Vec::new();
        for r in &self.rules {
            match &r.action_var {
                None => out.push(r.clone()),
                Some(var) => {
                    for a in &self.actions {
                        out.push(r.instantiate_action(var, a, &bases));
                    }
                }
            }
        }
        out
    }

    /// A copy extended with extra rules and the operators they need.
    pub fn with_rules(&self, extra_ops: &[OpDecl], rules: &[RuleSchema]) -> Spec {
        let mut s = self.clone();
        for op in extra_ops {
            if !s.ops.iter().any(|o| o.name == op.name) {
                s.ops.push(op.clone());
            }
        }
        s.rules.extend(rules.iter().cloned());
        s
    }
}

impl Premise {
    pub fn is_positive(&self) -> bool {
        matches!(self, Premise::Positive(_))
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Premise::Positive(t) => t.collect_vars(out),
            Premise::Negative { source, .. } => source.collect_vars(out),
            Premise::Quantitative(q) => {
                q.term.collect_vars(out);
                if let SetSpec::Explicit(ts) = &q.set {
                    ts.iter().for_each(|t| t.collect_vars(out));
                }
            }
            Premise::Forall { elem, body, .. } => {
                out.insert(Var::state(elem));
                body.collect_vars(out);
            }
            Premise::Combine { alias, link, .. } => {
                out.insert(Var::dist(alias));
                link.collect_vars(out);
            }
        }
    }

    fn rename(&self, var: &str, action: &str, rename: &impl Fn(&str) -> String) -> Premise {
        let act = |a: &String| if a == var { action.to_string() } else { a.clone() };
        match self {
            Premise::Positive(t) => Premise::Positive(t.rename(var, action, rename)),
            Premise::Negative { source, action: a } => Premise::Negative {
                source: source.rename_ops(rename),
                action: act(a),
            },
            Premise::Quantitative(q) => Premise::Quantitative(Quantitative {
                term: q.term.rename_ops(rename),
                set: match &q.set {
                    SetSpec::Explicit(ts) => {
                        SetSpec::Explicit(ts.iter().map(|t| t.rename_ops(rename)).collect())
                    }
                    SetSpec::Var(y) => SetSpec::Var(y.clone()),
                },
                cmp: q.cmp,
                bound: q.bound.clone(),
            }),
            Premise::Forall { elem, set, body } => Premise::Forall {
                elem: elem.clone(),
                set: set.clone(),
                body: Box::new(body.rename(var, action, rename)),
            },
            Premise::Combine { family, alias, link } => Premise::Combine {
                family: family.clone(),
                alias: alias.clone(),
                link: link.rename(var, action, rename),
            },
        }
    }
}

impl Transition {
    pub fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        self.source.collect_vars(out);
        self.target.collect_vars(out);
    }

    fn rename(&self, var: &str, action: &str, rename: &impl Fn(&str) -> String) -> Transition {
        Transition {
            source: self.source.rename_ops(rename),
            action: if self.action == var {
                action.to_string()
            } else {
                self.action.clone()
            },
            target: self.target.rename_ops(rename),
        }
    }
}

impl RuleSchema {
    /// Replaces the action metavariable `var` by `action`, including in the
    /// names of family operators (`pre_A` becomes `pre_a`).
    pub fn instantiate_action(&self, var: &str, action: &str, bases: &[&str]) -> RuleSchema {
        let suffix = format!("_{var}");
        let rename = |op: &str| -> String {
            match op.strip_suffix(&suffix) {
                Some(base) if bases.contains(&base) => format!("{base}_{action}"),
                _ => op.to_string(),
            }
        };
        RuleSchema {
            name: format!("{}[{action}]", self.name),
            action_var: None,
            premises: self
                .premises
                .iter()
                .map(|p| p.rename(var, action, &rename))
                .collect(),
            conclusion: self.conclusion.rename(var, action, &rename),
        }
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.premises.iter().for_each(|p| p.collect_vars(&mut out));
        self.conclusion.collect_vars(&mut out);
        out
    }

    /// Positive premises, including those inside `forall` blocks.
    pub fn positive_premises(&self) -> Vec<&Transition> {
        let mut out = Vec::new();
        for p in &self.premises {
            match p {
                Premise::Positive(t) => out.push(t),
                Premise::Forall { body, .. } => {
                    if let Premise::Positive(t) = body.as_ref() {
                        out.push(t);
                    }
                }
                _ => {}
            }
        }
        out
    }

    pub fn quantitative_premises(&self) -> Vec<&Quantitative> {
        self.premises
            .iter()
            .filter_map(|p| match p {
                Premise::Quantitative(q) => Some(q),
                _ => None,
            })
            .collect()
    }

    pub fn combine_blocks(&self) -> Vec<(&str, &str, &Transition)> {
        self.premises
            .iter()
            .filter_map(|p| match p {
                Premise::Combine { family, alias, link } => Some((family.as_str(), alias.as_str(), link)),
                _ => None,
            })
            .collect()
    }

    pub fn has_negative_premises(&self) -> bool {
        self.premises.iter().any(|p| match p {
            Premise::Negative { .. } => true,
            Premise::Forall { body, .. } => matches!(body.as_ref(), Premise::Negative { .. }),
            _ => false,
        })
    }
}

// ----------------------------------------------------------------------------
// Rendering

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -{}-> {}", self.source, self.action, self.target)
    }
}

impl fmt::Display for SetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetSpec::Var(y) => f.write_str(y),
            SetSpec::Explicit(ts) => {
                f.write_str("{")?;
                for (i, t) in ts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{t}")?;
                }
                f.write_str("}")
            }
        }
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl fmt::Display for Quantitative {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_dist_atom(f, &self.term)?;
        write!(f, "({}) {} {}", self.set, self.cmp, fmt_rational(&self.bound))
    }
}

impl fmt::Display for Premise {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Premise::Positive(t) => write!(f, "{t}"),
            Premise::Negative { source, action } => write!(f, "{source} -/{action}->"),
            Premise::Quantitative(q) => write!(f, "{q}"),
            Premise::Forall { elem, set, body } => write!(f, "forall {elem} in {set}: {body}"),
            Premise::Combine { family, alias, link } => {
                write!(f, "combine {family} as {alias} from {link}")
            }
        }
    }
}

impl fmt::Display for RuleSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rule {}", self.name)?;
        if let Some(v) = &self.action_var {
            write!(f, "[{v}]")?;
        }
        f.write_str(":")?;
        for (i, p) in self.premises.iter().enumerate() {
            f.write_str(if i == 0 { " " } else { ", " })?;
            write!(f, "{p}")?;
        }
        write!(f, " => {}", self.conclusion)
    }
}

impl fmt::Display for OpDecl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "op {}", self.name)?;
        if let Some(v) = &self.family {
            write!(f, "[{v}]")?;
        }
        f.write_str(" :")?;
        for s in &self.args {
            write!(f, " {}", s.letter())?;
        }
        f.write_str(" -> S")
    }
}

impl fmt::Display for Spec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "spec {}", self.name)?;
        if !self.actions.is_empty() {
            writeln!(f, "actions {}", self.actions.join(", "))?;
        }
        for op in &self.ops {
            writeln!(f, "{op}")?;
        }
        for r in &self.rules {
            writeln!(f, "{r}")?;
        }
        for d in &self.defs {
            writeln!(f, "def {} = {}", d.name, d.term)?;
        }
        Ok(())
    }
}
