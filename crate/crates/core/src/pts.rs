//! Finite probabilistic transition systems over labelled states.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Signed, Zero};
use rand::Rng;
use thiserror::Error;

use crate::lp::{lp_feasible, Cmp, LpProblem};
use crate::rational::{fmt_rational, parse_rational, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("state `{state}` has no `{action}` transitions")]
    NoSuchAction { state: String, action: String },
    #[error("model incomplete: {unknown} transitions are possible but not certain")]
    IncompleteModel { unknown: usize },
    #[error("bad step: {0}")]
    BadStep(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// One transition `s --a--> π`, with π as sorted `(state, mass)` pairs.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Step {
    pub action: String,
    pub dist: Vec<(usize, Rational)>,
}

impl Step {
    pub fn new(action: &str, dist: impl IntoIterator<Item = (usize, Rational)>) -> Result<Self, ModelError> {
        let mut mass: BTreeMap<usize, Rational> = BTreeMap::new();
        for (s, p) in dist {
            if p.is_negative() {
                return Err(ModelError::BadStep(format!("negative mass {}", fmt_rational(&p))));
            }
            *mass.entry(s).or_insert_with(Rational::zero) += p;
        }
        mass.retain(|_, p| !p.is_zero());
        let total: Rational = mass.values().sum();
        if !total.is_one() {
            return Err(ModelError::BadStep(format!("total mass {}", fmt_rational(&total))));
        }
        Ok(Step {
            action: action.to_string(),
            dist: mass.into_iter().collect(),
        })
    }

    pub fn prob(&self, s: usize) -> Rational {
        self.dist
            .iter()
            .find(|(t, _)| *t == s)
            .map_or_else(Rational::zero, |(_, p)| p.clone())
    }

    /// Mass of the states satisfying `member`.
    pub fn mass(&self, member: impl Fn(usize) -> bool) -> Rational {
        self.dist.iter().filter(|(s, _)| member(*s)).map(|(_, p)| p).sum()
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.dist.iter().map(|(s, _)| *s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Pts {
    pub states: Vec<String>,
    /// Sorted and deduplicated per state.
    pub steps: Vec<Vec<Step>>,
    index: BTreeMap<String, usize>,
}

impl Pts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn add_state(&mut self, label: &str) -> usize {
        if let Some(&i) = self.index.get(label) {
            return i;
        }
        self.states.push(label.to_string());
        self.steps.push(Vec::new());
        self.index.insert(label.to_string(), self.states.len() - 1);
        self.states.len() - 1
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn state(&self, label: &str) -> Result<usize, ModelError> {
        self.index_of(label).ok_or_else(|| ModelError::UnknownState(label.to_string()))
    }

    /// Adds a step; an identical step is stored once.
    pub fn add_step(&mut self, source: usize, step: Step) {
        assert!(step.support().all(|s| s < self.len()), "step target outside the state set");
        let list = &mut self.steps[source];
        if let Err(pos) = list.binary_search(&step) {
            list.insert(pos, step);
        }
    }

    pub fn steps_of<'a>(&'a self, s: usize, action: &'a str) -> impl Iterator<Item = &'a Step> + 'a {
        self.steps[s].iter().filter(move |st| st.action == action)
    }

    pub fn actions(&self) -> BTreeSet<String> {
        self.steps.iter().flatten().map(|s| s.action.clone()).collect()
    }

    pub fn num_steps(&self) -> usize {
        self.steps.iter().map(Vec::len).sum()
    }

    /// Plain-text listing: `state LABEL` lines, then `LABEL --a--> {LABEL: p, ...}`.
    pub fn to_text(&self) -> String {
        self.to_string()
    }

    pub fn from_text(text: &str) -> Result<Pts, ModelError> {
        let mut pts = Pts::new();
        let mut pending = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let err = |message: String| ModelError::Parse { line: n + 1, message };
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(label) = line.strip_prefix("state ") {
                pts.add_state(label.trim());
                continue;
            }
            let (source, rest) = line
                .split_once(" --")
                .ok_or_else(|| err("expected `state L` or `L --a--> {...}`".into()))?;
            let (action, dist) = rest.split_once("--> ").ok_or_else(|| err("missing `-->`".into()))?;
            let body = dist
                .trim()
                .strip_prefix('{')
                .and_then(|d| d.strip_suffix('}'))
                .ok_or_else(|| err("distribution must be written `{...}`".into()))?;
            let mut pairs = Vec::new();
            for entry in split_top(body, ',') {
                let entry = entry.trim();
                if entry.is_empty() {
                    continue;
                }
                let colon = last_top(entry, ':').ok_or_else(|| err(format!("entry `{entry}` lacks `: p`")))?;
                let p = parse_rational(entry[colon + 1..].trim())
                    .ok_or_else(|| err(format!("bad probability in `{entry}`")))?;
                pairs.push((entry[..colon].trim().to_string(), p));
            }
            pending.push((n + 1, source.trim().to_string(), action.trim().to_string(), pairs));
        }
        for (line, source, action, pairs) in pending {
            let s = pts.add_state(&source);
            let dist: Vec<(usize, Rational)> = pairs.into_iter().map(|(l, p)| (pts.add_state(&l), p)).collect();
            let step = Step::new(&action, dist).map_err(|e| ModelError::Parse {
                line,
                message: e.to_string(),
            })?;
            pts.add_step(s, step);
        }
        Ok(pts)
    }
}

fn depth_delta(c: char) -> i32 {
    match c {
        '(' | '{' | '[' => 1,
        ')' | '}' | ']' => -1,
        _ => 0,
    }
}

fn split_top(text: &str, sep: char) -> Vec<&str> {
    let mut out = Vec::new();
    let (mut depth, mut start) = (0, 0);
    for (i, c) in text.char_indices() {
        depth += depth_delta(c);
        if c == sep && depth == 0 {
            out.push(&text[start..i]);
            start = i + c.len_utf8();
        }
    }
    out.push(&text[start..]);
    out
}

fn last_top(text: &str, sep: char) -> Option<usize> {
    let mut depth = 0;
    let mut found = None;
    for (i, c) in text.char_indices() {
        depth += depth_delta(c);
        if c == sep && depth == 0 {
            found = Some(i);
        }
    }
    found
}

impl fmt::Display for Pts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.states {
            writeln!(f, "state {s}")?;
        }
        for (i, steps) in self.steps.iter().enumerate() {
            for st in steps {
                write!(f, "{} --{}--> {{", self.states[i], st.action)?;
                for (k, (t, p)) in st.dist.iter().enumerate() {
                    if k > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{}: {}", self.states[*t], fmt_rational(p))?;
                }
                writeln!(f, "}}")?;
            }
        }
        Ok(())
    }
}

/// The stripped system: `s --a--> t` whenever some `a`-step of `s` gives `t`
/// positive mass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObliteratedLts {
    pub states: Vec<String>,
    pub edges: Vec<BTreeSet<(String, usize)>>,
}

impl ObliteratedLts {
    pub fn successors<'a>(&'a self, s: usize, action: &'a str) -> impl Iterator<Item = usize> + 'a {
        self.edges[s].iter().filter(move |(a, _)| a == action).map(|(_, t)| *t)
    }
}

pub fn build_oblit_lts(pts: &Pts) -> ObliteratedLts {
    let edges = pts
        .steps
        .iter()
        .map(|steps| {
            steps
                .iter()
                .flat_map(|st| st.support().map(move |t| (st.action.clone(), t)))
                .collect()
        })
        .collect();
    ObliteratedLts {
        states: pts.states.clone(),
        edges,
    }
}

/// Weights λ over the `a`-steps of `t` (in `steps_of` order) whose combination
/// satisfies `Σ λ_i π_i(S_j) ⋈_j p_j` for every constraint, if any exist.
pub fn combined_feasible(
    pts: &Pts,
    t: usize,
    action: &str,
    constraints: &[(BTreeSet<usize>, Cmp, Rational)],
) -> Result<Option<Vec<Rational>>, ModelError> {
    let steps: Vec<&Step> = pts.steps_of(t, action).collect();
    if steps.is_empty() {
        return Err(ModelError::NoSuchAction {
            state: pts.states[t].clone(),
            action: action.to_string(),
        });
    }
    let mut lp = LpProblem::new(steps.len());
    for (set, cmp, bound) in constraints {
        let coeffs = steps.iter().map(|st| st.mass(|s| set.contains(&s))).collect();
        lp.constrain(coeffs, *cmp, bound.clone());
    }
    Ok(lp_feasible(&lp))
}

/// A random PTS for property testing: between 1 and `max_states` states
/// named `s0, s1, ..`, actions drawn from the first `num_actions` letters,
/// and every probability a multiple of `1/d` for some `d <= max_den`.
pub fn random_pts<R: Rng + ?Sized>(rng: &mut R, max_states: usize, num_actions: usize, max_den: u32) -> Pts {
    let mut pts = Pts::new();
    let n = rng.gen_range(1..=max_states.max(1));
    for i in 0..n {
        pts.add_state(&format!("s{i}"));
    }
    let actions: Vec<String> = (0..num_actions.max(1)).map(|i| ((b'a' + i as u8) as char).to_string()).collect();
    for s in 0..n {
        for _ in 0..rng.gen_range(0..=3) {
            let action = &actions[rng.gen_range(0..actions.len())];
            let den = rng.gen_range(1..=max_den.max(1));
            let mut dist = Vec::new();
            let mut left = den;
            while left > 0 {
                let units = if rng.gen_bool(0.5) { left } else { rng.gen_range(1..=left) };
                dist.push((rng.gen_range(0..n), Rational::new(units.into(), den.into())));
                left -= units;
            }
            pts.add_step(s, Step::new(action, dist).expect("masses sum to one"));
        }
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};

    /// t1 = a.b + a.c, t5 = a.(b ½ c), plus b, c and the deadlock.
    pub(crate) fn sample() -> Pts {
        let mut p = Pts::new();
        let [t1, t5, b, c, z] = ["t1", "t5", "b", "c", "0"].map(|l| p.add_state(l));
        p.add_step(t1, Step::new("a", [(b, int(1))]).unwrap());
        p.add_step(t1, Step::new("a", [(c, int(1))]).unwrap());
        p.add_step(t5, Step::new("a", [(b, rat(1, 2)), (c, rat(1, 2))]).unwrap());
        p.add_step(b, Step::new("b", [(z, int(1))]).unwrap());
        p.add_step(c, Step::new("c", [(z, int(1))]).unwrap());
        p
    }

    #[test]
    fn steps_validate_mass() {
        assert!(Step::new("a", [(0, rat(1, 2))]).is_err());
        assert!(Step::new("a", [(0, rat(-1, 2)), (1, rat(3, 2))]).is_err());
        let st = Step::new("a", [(1, rat(1, 2)), (0, rat(1, 4)), (1, rat(1, 4))]).unwrap();
        assert_eq!(st.dist, vec![(0, rat(1, 4)), (1, rat(3, 4))]);
    }

    #[test]
    fn duplicate_steps_are_stored_once() {
        let mut p = sample();
        let before = p.num_steps();
        p.add_step(0, Step::new("a", [(2, int(1))]).unwrap());
        assert_eq!(p.num_steps(), before);
    }

    #[test]
    fn text_round_trip() {
        let p = sample();
        let text = p.to_text();
        assert!(text.contains("t5 --a--> {b: 1/2, c: 1/2}"));
        assert_eq!(Pts::from_text(&text).unwrap(), p);
    }

    #[test]
    fn text_labels_may_contain_separators() {
        let text = "x --a--> {oplus(1/3: dirac(0), 2/3: dirac(0)): 1/2, f(0, 0): 1/2}\n";
        let p = Pts::from_text(text).unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p.index_of("f(0, 0)"), Some(2));
        assert!(matches!(Pts::from_text("x --a--> {y: 1/2}"), Err(ModelError::Parse { line: 1, .. })));
    }

    #[test]
    fn oblit_edges_follow_supports() {
        let p = sample();
        let lts = build_oblit_lts(&p);
        let t5: Vec<usize> = lts.successors(1, "a").collect();
        let t1: Vec<usize> = lts.successors(0, "a").collect();
        assert_eq!(t5, vec![2, 3]);
        assert_eq!(t1, t5);
        assert!(lts.edges[4].is_empty());
    }

    #[test]
    fn combined_feasibility() {
        let p = sample();
        let half = |s: usize| (BTreeSet::from([s]), Cmp::Ge, rat(1, 2));
        let w = combined_feasible(&p, 0, "a", &[half(2), half(3)]).unwrap().unwrap();
        assert_eq!(w, vec![rat(1, 2), rat(1, 2)]);
        let all_b = (BTreeSet::from([2]), Cmp::Ge, int(1));
        assert!(combined_feasible(&p, 0, "a", &[all_b.clone()]).unwrap().is_some());
        assert_eq!(combined_feasible(&p, 1, "a", &[all_b]).unwrap(), None);
        assert!(matches!(combined_feasible(&p, 2, "a", &[]), Err(ModelError::NoSuchAction { .. })));
    }
}
