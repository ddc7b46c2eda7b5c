//! The four bisimulation equivalences on finite systems.
//!
//! `quotient` refines the one-block partition until the transfer property of
//! the chosen kind holds inside every block. Closed sets of a partition are
//! unions of blocks, so per-block comparisons suffice. `naive_fixpoint` is an
//! independent oracle that enumerates closed sets of arbitrary relations.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_traits::Zero;
use serde::Serialize;
use thiserror::Error;

use crate::lp::{lp_feasible, Cmp, LpProblem};
use crate::pts::{build_oblit_lts, ModelError, Pts, Step};
use crate::rational::Rational;

/// A finite distribution over state indices, sorted by index.
pub type Dist = [(usize, Rational)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Strong,
    Convex,
    Abstracted,
    Obliterated,
}

impl Kind {
    pub const ALL: [Kind; 4] = [Kind::Strong, Kind::Convex, Kind::Abstracted, Kind::Obliterated];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Strong => "strong",
            Kind::Convex => "convex",
            Kind::Abstracted => "abstracted",
            Kind::Obliterated => "obliterated",
        }
    }

    /// The logic letter: b, c, a or o.
    pub fn letter(self) -> char {
        match self {
            Kind::Strong => 'b',
            Kind::Convex => 'c',
            Kind::Abstracted => 'a',
            Kind::Obliterated => 'o',
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Kind::ALL
            .into_iter()
            .find(|k| k.name() == s || s.len() == 1 && s.starts_with(k.letter()))
            .ok_or_else(|| format!("unknown relation `{s}` (strong, convex, abstracted, obliterated or b, c, a, o)"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BisimError {
    #[error("the naive oracle handles at most {limit} states, got {states}")]
    TooLarge { states: usize, limit: usize },
}

pub const NAIVE_LIMIT: usize = 10;

/// Blocks are numbered by their least state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub kind: Kind,
    pub block_of: Vec<usize>,
}

impl Partition {
    fn canonical(kind: Kind, raw: &[usize]) -> Partition {
        let mut ids = BTreeMap::new();
        let block_of = raw
            .iter()
            .map(|b| {
                let next = ids.len();
                *ids.entry(*b).or_insert(next)
            })
            .collect();
        Partition { kind, block_of }
    }

    pub fn num_blocks(&self) -> usize {
        self.block_of.iter().max().map_or(0, |m| m + 1)
    }

    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_blocks()];
        for (s, &b) in self.block_of.iter().enumerate() {
            out[b].push(s);
        }
        out
    }

    pub fn same_block(&self, s: usize, t: usize) -> bool {
        self.block_of[s] == self.block_of[t]
    }

    /// Every block of `self` lies inside a block of `other`.
    pub fn refines(&self, other: &Partition) -> bool {
        let mut image = BTreeMap::new();
        self.block_of
            .iter()
            .zip(&other.block_of)
            .all(|(mine, theirs)| *image.entry(*mine).or_insert(*theirs) == *theirs)
    }

    /// Mass per block, sorted by block.
    pub fn lift(&self, pi: &Dist) -> Vec<(usize, Rational)> {
        let mut mass: BTreeMap<usize, Rational> = BTreeMap::new();
        for (s, p) in pi {
            *mass.entry(self.block_of[*s]).or_insert_with(Rational::zero) += p;
        }
        mass.into_iter().collect()
    }

    pub fn support_blocks(&self, pi: &Dist) -> BTreeSet<usize> {
        pi.iter().map(|(s, _)| self.block_of[*s]).collect()
    }

    pub fn relation(&self) -> Vec<Vec<bool>> {
        let n = self.block_of.len();
        (0..n).map(|s| (0..n).map(|t| self.same_block(s, t)).collect()).collect()
    }
}

/// Partitions after each refinement pass; `levels[0]` is the one-block partition.
#[derive(Debug, Clone)]
pub struct Trace {
    pub levels: Vec<Partition>,
}

impl Trace {
    pub fn last(&self) -> &Partition {
        self.levels.last().expect("a trace has at least one level")
    }

    /// First level at which `s` and `t` sit in different blocks.
    pub fn split_level(&self, s: usize, t: usize) -> Option<usize> {
        self.levels.iter().position(|p| !p.same_block(s, t))
    }
}

/// Same mass on every block (strong and convex) or same positive blocks
/// (abstracted and obliterated).
pub fn dist_match(pi1: &Dist, pi2: &Dist, partition: &Partition, kind: Kind) -> bool {
    match kind {
        Kind::Strong | Kind::Convex => partition.lift(pi1) == partition.lift(pi2),
        Kind::Abstracted | Kind::Obliterated => partition.support_blocks(pi1) == partition.support_blocks(pi2),
    }
}

/// Every support element of each side is related to one on the other side.
pub fn support_match(pi1: &Dist, pi2: &Dist, related: impl Fn(usize, usize) -> bool) -> bool {
    let covered = |a: &Dist, b: &Dist, flip: bool| {
        a.iter().all(|(x, _)| {
            b.iter()
                .any(|(y, _)| if flip { related(*y, *x) } else { related(*x, *y) })
        })
    };
    covered(pi1, pi2, false) && covered(pi2, pi1, true)
}

/// Some combination of `t2`'s `a`-steps has the block masses of `pi1`.
pub fn combined_match(pts: &Pts, t2: usize, action: &str, pi1: &Dist, partition: &Partition) -> bool {
    let steps: Vec<&Step> = pts.steps_of(t2, action).collect();
    hull_contains(&steps, pi1, partition)
}

fn hull_contains(steps: &[&Step], pi: &Dist, partition: &Partition) -> bool {
    if steps.is_empty() {
        return false;
    }
    let target = partition.lift(pi);
    let mut blocks: BTreeSet<usize> = target.iter().map(|(b, _)| *b).collect();
    for st in steps {
        blocks.extend(partition.support_blocks(&st.dist));
    }
    let mut lp = LpProblem::new(steps.len());
    for b in blocks {
        let coeffs = steps
            .iter()
            .map(|st| st.mass(|s| partition.block_of[s] == b))
            .collect();
        let rhs = target.iter().find(|(x, _)| *x == b).map_or_else(Rational::zero, |(_, p)| p.clone());
        lp.constrain(coeffs, Cmp::Eq, rhs);
    }
    lp_feasible(&lp).is_some()
}

type Signature = BTreeSet<(String, Vec<(usize, Rational)>)>;

fn signature(pts: &Pts, s: usize, partition: &Partition, kind: Kind, oblit: &[BTreeSet<(String, usize)>]) -> Signature {
    match kind {
        Kind::Strong => pts.steps[s]
            .iter()
            .map(|st| (st.action.clone(), partition.lift(&st.dist)))
            .collect(),
        Kind::Abstracted => pts.steps[s]
            .iter()
            .map(|st| {
                let blocks = partition.support_blocks(&st.dist).into_iter().map(|b| (b, Rational::zero()));
                (st.action.clone(), blocks.collect())
            })
            .collect(),
        Kind::Obliterated => oblit[s]
            .iter()
            .map(|(a, t)| (a.clone(), vec![(partition.block_of[*t], Rational::zero())]))
            .collect(),
        Kind::Convex => unreachable!("convex refinement compares hulls"),
    }
}

/// Every step of `s` lies in the hull of the same-action steps of `t`.
fn hull_covers(pts: &Pts, s: usize, t: usize, partition: &Partition) -> bool {
    pts.steps[s].iter().all(|st| {
        let others: Vec<&Step> = pts.steps_of(t, &st.action).collect();
        hull_contains(&others, &st.dist, partition)
    })
}

fn convex_equal(pts: &Pts, s: usize, t: usize, partition: &Partition) -> bool {
    hull_covers(pts, s, t, partition) && hull_covers(pts, t, s, partition)
}

fn refine_once(pts: &Pts, partition: &Partition, oblit: &[BTreeSet<(String, usize)>]) -> Partition {
    let kind = partition.kind;
    let mut raw = vec![0usize; pts.len()];
    match kind {
        Kind::Convex => {
            // Hull equality is an equivalence, so one representative per class suffices.
            let mut reps: Vec<usize> = Vec::new();
            for s in 0..pts.len() {
                let found = reps
                    .iter()
                    .position(|&r| partition.same_block(r, s) && convex_equal(pts, r, s, partition));
                raw[s] = match found {
                    Some(k) => k,
                    None => {
                        reps.push(s);
                        reps.len() - 1
                    }
                };
            }
        }
        _ => {
            let mut keys: BTreeMap<(usize, Signature), usize> = BTreeMap::new();
            for s in 0..pts.len() {
                let key = (partition.block_of[s], signature(pts, s, partition, kind, oblit));
                let next = keys.len();
                raw[s] = *keys.entry(key).or_insert(next);
            }
        }
    }
    Partition::canonical(kind, &raw)
}

pub fn quotient_with_trace(pts: &Pts, kind: Kind) -> Trace {
    let oblit = if kind == Kind::Obliterated { build_oblit_lts(pts).edges } else { Vec::new() };
    let mut levels = vec![Partition::canonical(kind, &vec![0; pts.len()])];
    loop {
        let current = levels.last().unwrap();
        let next = refine_once(pts, current, &oblit);
        if next.num_blocks() == current.num_blocks() {
            return Trace { levels };
        }
        levels.push(next);
    }
}

/// The coarsest partition whose blocks satisfy the transfer property of `kind`.
pub fn quotient(pts: &Pts, kind: Kind) -> Partition {
    quotient_with_trace(pts, kind).last().clone()
}

/// True when one further refinement pass leaves `partition` unchanged.
pub fn is_stable(pts: &Pts, partition: &Partition) -> bool {
    let oblit = if partition.kind == Kind::Obliterated { build_oblit_lts(pts).edges } else { Vec::new() };
    refine_once(pts, partition, &oblit).num_blocks() == partition.num_blocks()
}

pub fn equivalent(pts: &Pts, t1: &str, t2: &str, kind: Kind) -> Result<bool, ModelError> {
    let (s, t) = (pts.state(t1)?, pts.state(t2)?);
    Ok(quotient(pts, kind).same_block(s, t))
}

/// Unions of the connected components of a symmetric relation.
fn closed_sets(rel: &[Vec<bool>]) -> Vec<Vec<bool>> {
    let n = rel.len();
    let mut comp = vec![usize::MAX; n];
    let mut count = 0;
    for s in 0..n {
        if comp[s] != usize::MAX {
            continue;
        }
        let mut stack = vec![s];
        comp[s] = count;
        while let Some(x) = stack.pop() {
            for y in 0..n {
                if (rel[x][y] || rel[y][x]) && comp[y] == usize::MAX {
                    comp[y] = count;
                    stack.push(y);
                }
            }
        }
        count += 1;
    }
    (1u32..(1 << count))
        .map(|mask| (0..n).map(|s| mask & (1 << comp[s]) != 0).collect())
        .collect()
}

fn mass_in(pi: &Dist, q: &[bool]) -> Rational {
    pi.iter().filter(|(s, _)| q[*s]).map(|(_, p)| p).sum()
}

fn transfer(pts: &Pts, s: usize, t: usize, rel: &[Vec<bool>], sets: &[Vec<bool>], kind: Kind, oblit: &[BTreeSet<(String, usize)>]) -> bool {
    match kind {
        Kind::Obliterated => oblit[s]
            .iter()
            .all(|(a, x)| oblit[t].iter().any(|(b, y)| a == b && rel[*x][*y])),
        Kind::Strong => pts.steps[s].iter().all(|st| {
            pts.steps_of(t, &st.action)
                .any(|other| sets.iter().all(|q| mass_in(&st.dist, q) == mass_in(&other.dist, q)))
        }),
        Kind::Abstracted => pts.steps[s].iter().all(|st| {
            pts.steps_of(t, &st.action).any(|other| {
                sets.iter()
                    .all(|q| mass_in(&st.dist, q).is_zero() == mass_in(&other.dist, q).is_zero())
            })
        }),
        Kind::Convex => pts.steps[s].iter().all(|st| {
            let others: Vec<&Step> = pts.steps_of(t, &st.action).collect();
            if others.is_empty() {
                return false;
            }
            let mut lp = LpProblem::new(others.len());
            for q in sets {
                let coeffs = others.iter().map(|o| mass_in(&o.dist, q)).collect();
                lp.constrain(coeffs, Cmp::Eq, mass_in(&st.dist, q));
            }
            lp_feasible(&lp).is_some()
        }),
    }
}

/// The largest relation satisfying the transfer property literally, computed
/// over all closed sets rather than blocks.
pub fn naive_fixpoint(pts: &Pts, kind: Kind) -> Result<Vec<Vec<bool>>, BisimError> {
    let n = pts.len();
    if n > NAIVE_LIMIT {
        return Err(BisimError::TooLarge { states: n, limit: NAIVE_LIMIT });
    }
    let oblit = build_oblit_lts(pts).edges;
    let mut rel = vec![vec![true; n]; n];
    loop {
        let sets = closed_sets(&rel);
        let next: Vec<Vec<bool>> = (0..n)
            .map(|s| {
                (0..n)
                    .map(|t| {
                        rel[s][t]
                            && transfer(pts, s, t, &rel, &sets, kind, &oblit)
                            && transfer(pts, t, s, &rel, &sets, kind, &oblit)
                    })
                    .collect()
            })
            .collect();
        if next == rel {
            return Ok(rel);
        }
        rel = next;
    }
}
