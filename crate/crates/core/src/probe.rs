//! Randomized search for congruence failures.
//!
//! Each trial draws a pair of closed terms that is likely to be equivalent
//! under the chosen relation, checks that it is, and then compares the pair
//! inside every one-hole context of depth one. The first trials pair up the
//! spec's named terms; the rest are random.

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bisim::{quotient, Kind};
use crate::derive::{build_pts, stable_model};
use crate::lang::Spec;
use crate::rational::{rat, Rational};
use crate::terms::{DistTerm, Signature, Sort, StateTerm, Term};

/// States explored per trial before the trial is declared inconclusive.
pub const PROBE_FUEL: usize = 2_000;

/// The probe stops collecting after this many violations.
pub const MAX_VIOLATIONS: usize = 20;

/// `op(.., ·, ..)` with the hole at `position`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Context {
    pub op: String,
    pub position: usize,
    args: Vec<Term>,
}

const HOLE: &str = "·";

impl Context {
    pub fn plug(&self, t: &StateTerm) -> StateTerm {
        let mut args = self.args.clone();
        args[self.position] = match &args[self.position] {
            Term::State(_) => Term::State(t.clone()),
            Term::Dist(_) => Term::Dist(DistTerm::dirac(t.clone())),
        };
        StateTerm::app(&self.op, args)
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.plug(&StateTerm::var(HOLE)))
    }
}

/// Every depth-one context: one operator, one hole, other arguments filled
/// with the deadlock (or `filler` when the signature has no constant).
pub fn contexts(sig: &Signature, filler: &StateTerm) -> Vec<Context> {
    let constant = sig
        .ops()
        .find(|(name, args)| args.is_empty() && *name == "stop")
        .or_else(|| sig.ops().find(|(_, args)| args.is_empty()))
        .map(|(name, _)| StateTerm::constant(name))
        .unwrap_or_else(|| filler.clone());
    let mut out = Vec::new();
    for (op, sorts) in sig.ops() {
        for position in 0..sorts.len() {
            let args = sorts
                .iter()
                .map(|s| match s {
                    Sort::State => Term::State(constant.clone()),
                    Sort::Dist => Term::Dist(DistTerm::dirac(constant.clone())),
                })
                .collect();
            out.push(Context {
                op: op.to_string(),
                position,
                args,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProbeViolation {
    pub trial: usize,
    pub context: String,
    pub left: String,
    pub right: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProbeReport {
    pub kind: Kind,
    pub trials: usize,
    pub seed: u64,
    /// Trials whose pair was equivalent, so contexts were checked.
    pub pairs_tested: usize,
    pub contexts_checked: usize,
    pub violations: Vec<ProbeViolation>,
    /// Trials skipped because the model was incomplete or over budget.
    pub inconclusive: usize,
}

impl ProbeReport {
    pub fn found(&self) -> bool {
        !self.violations.is_empty()
    }
}

impl fmt::Display for ProbeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            writeln!(f, "no violations in {} trials", self.trials)?;
        }
        for v in &self.violations {
            writeln!(
                f,
                "violation (trial {}): {} ~{} {} but not in context {}",
                v.trial, v.left, self.kind.letter(), v.right, v.context
            )?;
        }
        write!(
            f,
            "{} equivalent pairs tested in {} contexts; {} inconclusive trials",
            self.pairs_tested, self.contexts_checked, self.inconclusive
        )
    }
}

#[derive(Debug, Clone, Copy)]
enum Strategy {
    /// `x + y` against `x + y + a.(θx ⊕ θy)`.
    ConvexAdd,
    /// `a.(θ1 ⊕p θ2)` against `a.(θ1 ⊕q θ2)`.
    Reweight,
    /// `a.(θ1 ⊕p θ2)` against `a.θ1 + a.θ2`.
    Split,
    Commute,
    Idempotence,
    Defs,
    Independent,
}

fn weights(kind: Kind) -> [(Strategy, u32); 7] {
    use Strategy::*;
    let [c, r, s, m, i, d, n] = match kind {
        Kind::Strong => [1, 1, 1, 3, 3, 2, 1],
        Kind::Convex => [4, 1, 1, 1, 1, 2, 1],
        Kind::Abstracted => [1, 4, 1, 1, 1, 2, 1],
        Kind::Obliterated => [1, 2, 3, 1, 1, 2, 1],
    };
    [
        (ConvexAdd, c),
        (Reweight, r),
        (Split, s),
        (Commute, m),
        (Idempotence, i),
        (Defs, d),
        (Independent, n),
    ]
}

const WEIGHTS: [(i64, i64); 5] = [(1, 2), (1, 3), (2, 3), (1, 4), (3, 4)];

struct Gen<'s> {
    spec: &'s Spec,
    sig: Signature,
    rng: ChaCha8Rng,
}

impl Gen<'_> {
    fn has(&self, op: &str) -> bool {
        self.sig.arity(op).is_some()
    }

    fn pa(&self) -> bool {
        self.has("stop") && self.has("plus") && self.spec.actions.iter().all(|a| self.has(&format!("pre_{a}")))
    }

    fn action(&mut self) -> String {
        self.spec.actions.choose(&mut self.rng).cloned().unwrap_or_default()
    }

    fn prob(&mut self) -> Rational {
        let (n, d) = *WEIGHTS.choose(&mut self.rng).unwrap();
        rat(n, d)
    }

    fn prefix(&self, a: &str, theta: DistTerm) -> StateTerm {
        StateTerm::app(&format!("pre_{a}"), vec![theta.into()])
    }

    fn plus(&self, x: StateTerm, y: StateTerm) -> StateTerm {
        StateTerm::app("plus", vec![x.into(), y.into()])
    }

    /// A random closed state term of the given depth over the whole signature.
    fn term(&mut self, depth: usize) -> StateTerm {
        let ops: Vec<(String, Vec<Sort>)> = self
            .sig
            .ops()
            .filter(|(_, args)| depth > 0 || args.is_empty())
            .map(|(n, a)| (n.to_string(), a.to_vec()))
            .collect();
        if ops.is_empty() {
            return self.spec.defs.first().map(|d| d.term.clone()).unwrap_or_else(|| StateTerm::constant("stop"));
        }
        if self.pa() {
            // Mostly prefix and choice, so that steps have interesting targets.
            let roll = self.rng.gen_range(0..10);
            if depth == 0 || roll < 2 {
                return StateTerm::constant("stop");
            }
            if roll < 7 {
                let a = self.action();
                let theta = self.dist(depth - 1);
                return self.prefix(&a, theta);
            }
            if roll < 9 {
                let (x, y) = (self.term(depth - 1), self.term(depth - 1));
                return self.plus(x, y);
            }
        }
        let (op, sorts) = ops.choose(&mut self.rng).cloned().unwrap();
        let args = sorts
            .iter()
            .map(|s| match s {
                Sort::State => Term::State(self.term(depth.saturating_sub(1))),
                Sort::Dist => Term::Dist(self.dist(depth.saturating_sub(1))),
            })
            .collect();
        StateTerm::app(&op, args)
    }

    fn dist(&mut self, depth: usize) -> DistTerm {
        let t = self.term(depth);
        if self.rng.gen_bool(0.3) {
            let p = self.prob();
            let u = self.term(depth);
            DistTerm::mix(p, DistTerm::dirac(t), DistTerm::dirac(u))
        } else {
            DistTerm::dirac(t)
        }
    }

    /// A Dirac target, usually over a one-step prefix `x.δ(0)`.
    fn small_target(&mut self) -> DistTerm {
        if self.pa() && self.rng.gen_bool(0.7) {
            let x = self.action();
            return DistTerm::dirac(self.prefix(&x, DistTerm::dirac(StateTerm::constant("stop"))));
        }
        let t = self.term(1);
        DistTerm::dirac(t)
    }

    fn pair(&mut self, strategy: Strategy) -> (StateTerm, StateTerm) {
        use Strategy::*;
        let pa = self.pa();
        match strategy {
            Defs if !self.spec.defs.is_empty() => {
                let x = self.spec.defs.choose(&mut self.rng).unwrap().term.clone();
                let y = self.spec.defs.choose(&mut self.rng).unwrap().term.clone();
                (x, y)
            }
            ConvexAdd if pa => {
                let a = self.action();
                let (t1, t2) = (self.small_target(), self.small_target());
                let p = self.prob();
                let base = self.plus(self.prefix(&a, t1.clone()), self.prefix(&a, t2.clone()));
                let extra = self.prefix(&a, DistTerm::mix(p, t1, t2));
                (base.clone(), self.plus(base, extra))
            }
            Reweight if pa => {
                let a = self.action();
                let (t1, t2) = (self.small_target(), self.small_target());
                let (p, q) = (self.prob(), self.prob());
                let x = self.prefix(&a, DistTerm::mix(p, t1.clone(), t2.clone()));
                (x, self.prefix(&a, DistTerm::mix(q, t1, t2)))
            }
            Split if pa => {
                let a = self.action();
                let (t1, t2) = (self.small_target(), self.small_target());
                let p = self.prob();
                let x = self.prefix(&a, DistTerm::mix(p, t1.clone(), t2.clone()));
                (x, self.plus(self.prefix(&a, t1), self.prefix(&a, t2)))
            }
            Commute if pa => {
                let (x, y) = (self.term(2), self.term(2));
                (self.plus(x.clone(), y.clone()), self.plus(y, x))
            }
            Idempotence if pa => {
                let x = self.term(2);
                (x.clone(), self.plus(x.clone(), x))
            }
            _ => (self.term(2), self.term(2)),
        }
    }

    fn strategy(&mut self, kind: Kind) -> Strategy {
        let table = weights(kind);
        let total: u32 = table.iter().map(|(_, w)| w).sum();
        let mut roll = self.rng.gen_range(0..total);
        for (s, w) in table {
            if roll < w {
                return s;
            }
            roll -= w;
        }
        unreachable!()
    }
}

/// Searches for equivalent pairs that some context separates.
pub fn congruence_probe(spec: &Spec, kind: Kind, trials: usize, seed: u64) -> ProbeReport {
    let mut gen = Gen {
        spec,
        sig: spec.signature(),
        rng: ChaCha8Rng::seed_from_u64(seed),
    };
    let mut report = ProbeReport {
        kind,
        trials,
        seed,
        pairs_tested: 0,
        contexts_checked: 0,
        violations: Vec::new(),
        inconclusive: 0,
    };
    let named: Vec<(StateTerm, StateTerm)> = spec
        .defs
        .iter()
        .enumerate()
        .flat_map(|(i, x)| spec.defs[i + 1..].iter().map(move |y| (x.term.clone(), y.term.clone())))
        .collect();
    let mut seen = BTreeSet::new();
    for trial in 0..trials {
        let (u, v) = match named.get(trial) {
            Some(pair) => pair.clone(),
            None => {
                let strategy = gen.strategy(kind);
                gen.pair(strategy)
            }
        };
        if u == v || !seen.insert((u.clone(), v.clone())) {
            continue;
        }
        let ctxs = contexts(&gen.sig, &u);
        let mut roots = vec![u.clone(), v.clone()];
        for c in &ctxs {
            roots.push(c.plug(&u));
            roots.push(c.plug(&v));
        }
        let pts = match stable_model(spec, &roots, PROBE_FUEL).map(|t| build_pts(&t)) {
            Ok(Ok(pts)) => pts,
            _ => {
                report.inconclusive += 1;
                continue;
            }
        };
        let part = quotient(&pts, kind);
        let idx = |t: &StateTerm| pts.index_of(&t.to_string()).expect("roots are explored");
        if !part.same_block(idx(&u), idx(&v)) {
            continue;
        }
        report.pairs_tested += 1;
        for c in &ctxs {
            report.contexts_checked += 1;
            let (cu, cv) = (c.plug(&u), c.plug(&v));
            if !part.same_block(idx(&cu), idx(&cv)) {
                report.violations.push(ProbeViolation {
                    trial,
                    context: c.to_string(),
                    left: u.to_string(),
                    right: v.to_string(),
                });
            }
        }
        if report.violations.len() >= MAX_VIOLATIONS {
            break;
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_spec;

    const PA: &str = "\
spec pa
actions a, b, c
op stop : -> S
op pre[A] : D -> S
op plus : S S -> S
rule prefix[A]: => A.mu -A-> mu
rule plus_left[A]: x -A-> mu => x + y -A-> mu
rule plus_right[A]: y -A-> mu => x + y -A-> mu
def t1 = a.dirac(b.dirac(0)) + a.dirac(c.dirac(0))
def t2 = a.dirac(b.dirac(0)) + a.dirac(c.dirac(0)) + a.(dirac(b.dirac(0)) (+) 1/2 dirac(c.dirac(0)))
";

    #[test]
    fn contexts_cover_every_argument() {
        let spec = parse_spec(PA).unwrap();
        let cs = contexts(&spec.signature(), &StateTerm::constant("stop"));
        // three prefixes and two positions of the choice
        assert_eq!(cs.len(), 5);
        let shown: Vec<String> = cs.iter().map(|c| c.to_string()).collect();
        assert!(shown.contains(&"a.dirac(·)".to_string()), "{shown:?}");
        assert!(shown.contains(&"0 + ·".to_string()), "{shown:?}");
    }

    #[test]
    fn base_pa_is_a_congruence() {
        let spec = parse_spec(PA).unwrap();
        for kind in Kind::ALL {
            let report = congruence_probe(&spec, kind, 40, 0);
            assert!(!report.found(), "{kind}: {report}");
            assert!(report.pairs_tested > 0, "{kind}");
        }
    }

    #[test]
    fn zero_trials_pass_vacuously() {
        let spec = parse_spec(PA).unwrap();
        let report = congruence_probe(&spec, Kind::Convex, 0, 0);
        assert_eq!((report.pairs_tested, report.found()), (0, false));
    }

    #[test]
    fn eq1_breaks_convex_congruence() {
        let spec = parse_spec(&format!(
            "{PA}op f : S -> S\nrule f_eq1: x -a-> mu, mu(Y) >= 1/2, forall y in Y: y -b-> nu, mu(Z) >= 1/2, \
             forall z in Z: z -c-> nu2 => f(x) -a-> dirac(0)\n"
        ))
        .unwrap();
        let report = congruence_probe(&spec, Kind::Convex, 200, 0);
        assert!(report.violations.iter().any(|v| v.context == "f(·)"), "{report}");
    }

    #[test]
    fn probe_is_deterministic() {
        let spec = parse_spec(PA).unwrap();
        assert_eq!(congruence_probe(&spec, Kind::Strong, 20, 7), congruence_probe(&spec, Kind::Strong, 20, 7));
    }
}
