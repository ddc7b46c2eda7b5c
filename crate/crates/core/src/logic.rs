//! Model checking for the four modal logics and distinguishing formulas.
//!
//! | logic | modalities      | bounds | meets |
//! |-------|-----------------|--------|-------|
//! | b     | `<a>`, `<a>_c`  | any    | yes   |
//! | c     | `<a>_c`         | any    | yes   |
//! | a     | `<a>`           | 0      | yes   |
//! | o     | `<a>`           | 0      | no    |

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};
use thiserror::Error;

use crate::bisim::{quotient_with_trace, Dist, Kind, Partition, Trace};
use crate::lang::{DistFormula, StateFormula};
use crate::lp::{lp_feasible, Cmp, LpProblem};
use crate::pts::{build_oblit_lts, ModelError, Pts, Step};
use crate::rational::{rat, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LogicError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("`{left}` and `{right}` are not {kind} bisimilar, but no separating formula of logic {letter} was found", letter = kind.letter())]
    Inexpressible { kind: Kind, left: String, right: String },
}

/// The logics a formula belongs to.
pub fn fragment_of(phi: &StateFormula) -> BTreeSet<Kind> {
    let mut shape = Shape::default();
    shape.state(phi);
    let mut out = BTreeSet::from([Kind::Strong]);
    if !shape.diamond {
        out.insert(Kind::Convex);
    }
    if !shape.combined && !shape.positive_bound {
        out.insert(Kind::Abstracted);
        if !shape.meet {
            out.insert(Kind::Obliterated);
        }
    }
    out
}

pub fn in_fragment(phi: &StateFormula, kind: Kind) -> bool {
    fragment_of(phi).contains(&kind)
}

#[derive(Default)]
struct Shape {
    diamond: bool,
    combined: bool,
    positive_bound: bool,
    meet: bool,
}

impl Shape {
    fn state(&mut self, phi: &StateFormula) {
        match phi {
            StateFormula::True => {}
            // `<a>tt` and `<a>_c tt` agree, so neither commits to a modality.
            StateFormula::Diamond(_, psi) | StateFormula::Combined(_, psi) if *psi == tt_atom() => {}
            StateFormula::Diamond(_, psi) => {
                self.diamond = true;
                self.dist(psi);
            }
            StateFormula::Combined(_, psi) => {
                self.combined = true;
                self.dist(psi);
            }
            StateFormula::And(parts) => parts.iter().for_each(|p| self.state(p)),
            StateFormula::Not(p) => self.state(p),
        }
    }

    fn dist(&mut self, psi: &DistFormula) {
        match psi {
            DistFormula::Atom(phi, p) => {
                self.positive_bound |= !p.is_zero();
                self.state(phi);
            }
            DistFormula::Meet(parts) => {
                self.meet |= parts.len() > 1;
                parts.iter().for_each(|p| self.dist(p));
            }
        }
    }
}

/// Satisfaction of `phi` at every state.
pub fn satisfying_states(pts: &Pts, phi: &StateFormula) -> Vec<bool> {
    let n = pts.len();
    match phi {
        StateFormula::True => vec![true; n],
        StateFormula::Not(p) => satisfying_states(pts, p).into_iter().map(|b| !b).collect(),
        StateFormula::And(parts) => {
            let mut out = vec![true; n];
            for p in parts {
                for (o, b) in out.iter_mut().zip(satisfying_states(pts, p)) {
                    *o &= b;
                }
            }
            out
        }
        StateFormula::Diamond(a, psi) => {
            let atoms = compile(pts, psi);
            (0..n)
                .map(|s| pts.steps_of(s, a).any(|st| atoms_hold(&atoms, &st.dist)))
                .collect()
        }
        StateFormula::Combined(a, psi) => {
            let atoms = compile(pts, psi);
            (0..n)
                .map(|s| {
                    let steps: Vec<&Step> = pts.steps_of(s, a).collect();
                    combination_satisfies(&steps, &atoms)
                })
                .collect()
        }
    }
}

/// The `[φ]_p` atoms of a distribution formula with their satisfaction sets.
fn compile(pts: &Pts, psi: &DistFormula) -> Vec<(Vec<bool>, Rational)> {
    psi.atoms()
        .into_iter()
        .map(|(phi, p)| (satisfying_states(pts, phi), p.clone()))
        .collect()
}

fn atoms_hold(atoms: &[(Vec<bool>, Rational)], pi: &Dist) -> bool {
    atoms.iter().all(|(sat, p)| {
        let mass: Rational = pi.iter().filter(|(s, _)| sat[*s]).map(|(_, q)| q).sum();
        mass > *p
    })
}

fn combination_satisfies(steps: &[&Step], atoms: &[(Vec<bool>, Rational)]) -> bool {
    if steps.is_empty() {
        return false;
    }
    let mut lp = LpProblem::new(steps.len());
    for (sat, p) in atoms {
        lp.constrain(steps.iter().map(|st| st.mass(|s| sat[s])).collect(), Cmp::Gt, p.clone());
    }
    lp_feasible(&lp).is_some()
}

pub fn sat_state(pts: &Pts, t: &str, phi: &StateFormula) -> Result<bool, ModelError> {
    let s = pts.state(t)?;
    Ok(satisfying_states(pts, phi)[s])
}

/// `π ⊨ ψ`, where `π` ranges over the states of `pts`.
pub fn sat_dist(pts: &Pts, pi: &Dist, psi: &DistFormula) -> bool {
    atoms_hold(&compile(pts, psi), pi)
}

fn tt_atom() -> DistFormula {
    DistFormula::atom(StateFormula::True, Rational::zero())
}

/// A formula of logic `kind` that holds at exactly one of `t1`, `t2`, or
/// `None` when they are `kind`-bisimilar.
pub fn distinguishing_formula(pts: &Pts, t1: &str, t2: &str, kind: Kind) -> Result<Option<StateFormula>, LogicError> {
    let (s, t) = (pts.state(t1)?, pts.state(t2)?);
    let trace = quotient_with_trace(pts, kind);
    if trace.last().same_block(s, t) {
        return Ok(None);
    }
    let inexpressible = || LogicError::Inexpressible {
        kind,
        left: t1.to_string(),
        right: t2.to_string(),
    };
    let mut builder = Builder::new(pts, kind, trace);
    let phi = builder.separate(s, t).ok_or_else(inexpressible)?;
    let separates = |f: &StateFormula| {
        let sat = satisfying_states(pts, f);
        sat[s] != sat[t] && in_fragment(f, kind)
    };
    if !separates(&phi) {
        return Err(inexpressible());
    }
    Ok(Some(minimize(phi, &separates)))
}

/// Builds separating formulas level by level along a refinement trace. At
/// each level `k`, `chi(k, B)` holds exactly on block `B` of the level-`k`
/// partition; a separator for states split at level `k` only refers to
/// level `k-1` block formulas, so its truth value is constant on level-`k`
/// blocks.
struct Builder<'p> {
    pts: &'p Pts,
    kind: Kind,
    trace: Trace,
    oblit: Vec<BTreeSet<(String, usize)>>,
    separators: BTreeMap<(usize, usize), Option<StateFormula>>,
    chars: BTreeMap<(usize, usize), Option<StateFormula>>,
}

impl<'p> Builder<'p> {
    fn new(pts: &'p Pts, kind: Kind, trace: Trace) -> Self {
        Builder {
            pts,
            kind,
            trace,
            oblit: build_oblit_lts(pts).edges,
            separators: BTreeMap::new(),
            chars: BTreeMap::new(),
        }
    }

    /// True at `s`, false at `t`.
    fn separate(&mut self, s: usize, t: usize) -> Option<StateFormula> {
        if let Some(hit) = self.separators.get(&(s, t)) {
            return hit.clone();
        }
        let found = self.trace.split_level(s, t).and_then(|k| {
            self.witness(s, t, k - 1)
                .or_else(|| self.witness(t, s, k - 1).map(StateFormula::not))
        });
        self.separators.insert((s, t), found.clone());
        found
    }

    fn chi(&mut self, level: usize, block: usize) -> Option<StateFormula> {
        if level == 0 {
            return Some(StateFormula::True);
        }
        if let Some(hit) = self.chars.get(&(level, block)) {
            return hit.clone();
        }
        let blocks = self.trace.levels[level].blocks();
        let rep = blocks[block][0];
        let mut parts = Vec::new();
        let mut ok = true;
        for (other, members) in blocks.iter().enumerate() {
            if other == block {
                continue;
            }
            match self.separate(rep, members[0]) {
                Some(f) => parts.push(f),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        let out = ok.then(|| StateFormula::and(dedup(parts)));
        self.chars.insert((level, block), out.clone());
        out
    }

    /// A formula true at `s` and false at `t`, from a step of `s` that `t`
    /// cannot match at `level`.
    fn witness(&mut self, s: usize, t: usize, level: usize) -> Option<StateFormula> {
        let part = self.trace.levels[level].clone();
        if self.kind == Kind::Obliterated {
            let edges: Vec<(String, usize)> = self.oblit[s].iter().cloned().collect();
            for (a, x) in edges {
                let unmatched = !self.oblit[t]
                    .iter()
                    .any(|(b, y)| *b == a && part.same_block(x, *y));
                if unmatched {
                    if let Some(chi) = self.chi(level, part.block_of[x]) {
                        return Some(StateFormula::diamond(&a, DistFormula::atom(chi, Rational::zero())));
                    }
                }
            }
            return None;
        }
        let steps: Vec<Step> = self.pts.steps[s].clone();
        for st in &steps {
            let others: Vec<Step> = self.pts.steps_of(t, &st.action).cloned().collect();
            let found = match self.kind {
                Kind::Strong => self.strong_witness(st, &others, &part, level),
                Kind::Abstracted => self.abstracted_witness(st, &others, &part, level),
                Kind::Convex => self.convex_witness(st, &others, &part, level),
                Kind::Obliterated => unreachable!(),
            };
            if found.is_some() {
                return found;
            }
        }
        None
    }

    fn strong_witness(&mut self, st: &Step, others: &[Step], part: &Partition, level: usize) -> Option<StateFormula> {
        let mine = part.lift(&st.dist);
        let mut atoms = Vec::new();
        for o in others {
            let theirs = part.lift(&o.dist);
            if theirs == mine {
                return None;
            }
            let (block, bound) = mine.iter().find_map(|(b, p)| {
                let q = theirs.iter().find(|(x, _)| x == b).map_or_else(Rational::zero, |(_, q)| q.clone());
                (q < *p).then_some((*b, q))
            })?;
            atoms.push(DistFormula::atom(self.chi(level, block)?, bound));
        }
        Some(StateFormula::diamond(&st.action, meet_or_tt(atoms)))
    }

    fn abstracted_witness(&mut self, st: &Step, others: &[Step], part: &Partition, level: usize) -> Option<StateFormula> {
        let mine = part.support_blocks(&st.dist);
        let mut atoms = Vec::new();
        for o in others {
            let theirs = part.support_blocks(&o.dist);
            if theirs == mine {
                return None;
            }
            // A positivity test only fails on `o` if `o` misses a block of ours.
            let block = *mine.difference(&theirs).next()?;
            atoms.push(DistFormula::atom(self.chi(level, block)?, Rational::zero()));
        }
        Some(StateFormula::diamond(&st.action, meet_or_tt(atoms)))
    }

    /// Separates `st` from the hull of `others` with an open box of block
    /// masses around `st`.
    fn convex_witness(&mut self, st: &Step, others: &[Step], part: &Partition, level: usize) -> Option<StateFormula> {
        if others.is_empty() {
            return Some(StateFormula::combined(&st.action, tt_atom()));
        }
        let mine: BTreeMap<usize, Rational> = part.lift(&st.dist).into_iter().collect();
        let mut blocks: BTreeSet<usize> = mine.keys().copied().collect();
        for o in others {
            blocks.extend(part.support_blocks(&o.dist));
        }
        let refs: Vec<&Step> = others.iter().collect();
        let mass = |o: &Step, b: usize| o.mass(|s| part.block_of[s] == b);
        let mut eps = rat(1, 2);
        for _ in 0..40 {
            // (block, complement?, bound)
            let mut box_atoms: Vec<(usize, bool, Rational)> = Vec::new();
            for &b in &blocks {
                let p = mine.get(&b).cloned().unwrap_or_else(Rational::zero);
                let low = &p - &eps;
                let high = Rational::one() - &p - &eps;
                if low >= Rational::zero() {
                    box_atoms.push((b, false, low));
                }
                if high >= Rational::zero() {
                    box_atoms.push((b, true, high));
                }
            }
            let mut lp = LpProblem::new(refs.len());
            for (b, complement, bound) in &box_atoms {
                let coeffs = refs
                    .iter()
                    .map(|o| if *complement { Rational::one() - mass(o, *b) } else { mass(o, *b) })
                    .collect();
                lp.constrain(coeffs, Cmp::Gt, bound.clone());
            }
            if lp_feasible(&lp).is_none() {
                let mut atoms = Vec::new();
                for (b, complement, bound) in box_atoms {
                    let chi = self.chi(level, b)?;
                    let phi = if complement { StateFormula::not(chi) } else { chi };
                    atoms.push(DistFormula::atom(phi, bound));
                }
                return Some(StateFormula::combined(&st.action, meet_or_tt(atoms)));
            }
            eps /= Rational::from_integer(2.into());
        }
        None
    }
}

fn dedup<T: Ord>(items: Vec<T>) -> Vec<T> {
    items.into_iter().collect::<BTreeSet<_>>().into_iter().collect()
}

fn meet_or_tt(atoms: Vec<DistFormula>) -> DistFormula {
    let atoms = dedup(atoms);
    if atoms.is_empty() {
        tt_atom()
    } else {
        DistFormula::meet(atoms)
    }
}

/// Drops conjuncts and meet atoms while `keep` still holds.
pub fn minimize(mut phi: StateFormula, keep: &impl Fn(&StateFormula) -> bool) -> StateFormula {
    'outer: loop {
        for candidate in shrink_state(&phi) {
            if candidate.size() < phi.size() && keep(&candidate) {
                phi = candidate;
                continue 'outer;
            }
        }
        return phi;
    }
}

fn shrink_state(phi: &StateFormula) -> Vec<StateFormula> {
    let mut out = Vec::new();
    match phi {
        StateFormula::True => {}
        StateFormula::Not(inner) => {
            if let StateFormula::Not(x) = inner.as_ref() {
                out.push((**x).clone());
            }
            out.extend(shrink_state(inner).into_iter().map(StateFormula::not));
        }
        StateFormula::And(parts) => {
            for i in 0..parts.len() {
                let mut rest = parts.clone();
                rest.remove(i);
                out.push(StateFormula::and(rest));
            }
            for (i, p) in parts.iter().enumerate() {
                for smaller in shrink_state(p) {
                    let mut next = parts.clone();
                    next[i] = smaller;
                    out.push(StateFormula::and(next));
                }
            }
        }
        StateFormula::Diamond(a, psi) => {
            out.extend(shrink_dist(psi).into_iter().map(|d| StateFormula::diamond(a, d)));
        }
        StateFormula::Combined(a, psi) => {
            out.extend(shrink_dist(psi).into_iter().map(|d| StateFormula::combined(a, d)));
        }
    }
    out
}

fn shrink_dist(psi: &DistFormula) -> Vec<DistFormula> {
    let mut out = Vec::new();
    match psi {
        DistFormula::Atom(phi, p) => {
            out.extend(shrink_state(phi).into_iter().map(|f| DistFormula::atom(f, p.clone())));
        }
        DistFormula::Meet(parts) => {
            for i in 0..parts.len() {
                let mut rest = parts.clone();
                rest.remove(i);
                if !rest.is_empty() {
                    out.push(DistFormula::meet(rest));
                }
            }
            for (i, p) in parts.iter().enumerate() {
                for smaller in shrink_dist(p) {
                    let mut next = parts.clone();
                    next[i] = smaller;
                    out.push(DistFormula::meet(next));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_formula;
    use crate::rational::int;

    fn examples() -> Pts {
        let mut p = Pts::new();
        let names = ["t1", "t2", "t3", "t4", "t5", "t6", "b", "c", "0"];
        let [t1, t2, t3, t4, t5, t6, b, c, z] = names.map(|l| p.add_state(l));
        let pure = |x| Step::new("a", [(x, int(1))]).unwrap();
        let half = Step::new("a", [(b, rat(1, 2)), (c, rat(1, 2))]).unwrap();
        for t in [t1, t2, t6] {
            p.add_step(t, pure(b));
            p.add_step(t, pure(c));
        }
        p.add_step(t2, half.clone());
        p.add_step(t3, half.clone());
        p.add_step(t4, Step::new("a", [(b, rat(1, 10)), (c, rat(9, 10))]).unwrap());
        p.add_step(t5, half);
        p.add_step(b, Step::new("b", [(z, int(1))]).unwrap());
        p.add_step(c, Step::new("c", [(z, int(1))]).unwrap());
        p
    }

    fn f(text: &str) -> StateFormula {
        parse_formula(text).unwrap()
    }

    #[test]
    fn fragments() {
        let set = |ks: &[Kind]| ks.iter().copied().collect::<BTreeSet<_>>();
        assert_eq!(fragment_of(&f("<a>([<b>tt]_1/2 /\\ [<c>tt]_1/2)")), set(&[Kind::Strong]));
        assert_eq!(
            fragment_of(&f("<a>[<b>tt]_0")),
            set(&[Kind::Strong, Kind::Abstracted, Kind::Obliterated])
        );
        assert_eq!(fragment_of(&f("<a>_c [<b>tt]_1/2")), set(&[Kind::Strong, Kind::Convex]));
        assert_eq!(fragment_of(&f("tt")), set(&Kind::ALL));
    }

    #[test]
    fn the_meet_formula_separates_t1_from_t2() {
        let p = examples();
        let phi = f("<a>([<b>tt]_1/2 /\\ [<c>tt]_1/2)");
        let weak = f("<a>([<b>tt]_0 /\\ [<c>tt]_0)");
        assert!(!sat_state(&p, "t2", &phi).unwrap() || !sat_state(&p, "t1", &phi).unwrap());
        // Strict bounds: the half/half step has exactly 1/2 on each side.
        assert!(!sat_state(&p, "t2", &phi).unwrap());
        assert!(sat_state(&p, "t2", &weak).unwrap() && !sat_state(&p, "t1", &weak).unwrap());
        let combined = f("<a>_c ([<b>tt]_1/3 /\\ [<c>tt]_1/3)");
        assert!(sat_state(&p, "t1", &combined).unwrap() && sat_state(&p, "t2", &combined).unwrap());
        assert!(sat_state(&p, "0", &f("tt")).unwrap());
    }

    #[test]
    fn distribution_atoms_are_strict() {
        let p = examples();
        let (b, c) = (p.index_of("b").unwrap(), p.index_of("c").unwrap());
        let half = [(b, rat(1, 2)), (c, rat(1, 2))];
        let tenth = [(b, rat(1, 10)), (c, rat(9, 10))];
        let atom = |text: &str| crate::lang::parse_dist_formula(text).unwrap();
        assert!(!sat_dist(&p, &half, &atom("[<b>tt]_1/2")));
        assert!(sat_dist(&p, &tenth, &atom("[<c>tt]_1/2")));
        assert!(sat_dist(&p, &half, &atom("[tt]_0")));
        assert!(!sat_dist(&p, &[(c, int(1))], &atom("[<b>tt]_0")));
    }

    #[test]
    fn distinguishers_are_verified() {
        let p = examples();
        let names = ["t1", "t2", "t3", "t4", "t5", "t6"];
        let mut gaps = Vec::new();
        for k in Kind::ALL {
            let q = crate::bisim::quotient(&p, k);
            for (i, x) in names.iter().enumerate() {
                for y in &names[i + 1..] {
                    let same = q.same_block(p.index_of(x).unwrap(), p.index_of(y).unwrap());
                    match distinguishing_formula(&p, x, y, k) {
                        Ok(None) => assert!(same, "{k} {x} {y}"),
                        Ok(Some(phi)) => {
                            assert!(!same);
                            assert!(in_fragment(&phi, k), "{phi}");
                            assert_ne!(sat_state(&p, x, &phi).unwrap(), sat_state(&p, y, &phi).unwrap());
                        }
                        Err(LogicError::Inexpressible { .. }) => gaps.push(format!("{k} {x} {y}")),
                        Err(e) => panic!("{e}"),
                    }
                }
            }
        }
        // Positivity atoms cannot tell a pure step from a wider-support step.
        assert!(gaps.iter().all(|g| g.starts_with("abstracted")), "{gaps:?}");
    }

    #[test]
    fn t5_t6_under_abstraction() {
        let p = examples();
        let phi = distinguishing_formula(&p, "t5", "t6", Kind::Abstracted).unwrap().unwrap();
        assert!(in_fragment(&phi, Kind::Abstracted));
        assert!(sat_state(&p, "t5", &phi).unwrap() != sat_state(&p, "t6", &phi).unwrap());
        assert_eq!(distinguishing_formula(&p, "t1", "t1", Kind::Strong).unwrap(), None);
    }
}
