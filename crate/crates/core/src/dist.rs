//! Finite-support distributions over closed state terms and the
//! interpretation of closed distribution terms.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::rational::{fmt_rational, Rational};
use crate::terms::{check_weights, DistTerm, Signature, Sort, StateTerm, Term, TermError};

/// Canonical form: support sorted by term order, no zero entries, mass one.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FiniteDistribution {
    mass: BTreeMap<StateTerm, Rational>,
}

impl FiniteDistribution {
    pub fn dirac(t: StateTerm) -> Self {
        let mut mass = BTreeMap::new();
        mass.insert(t, Rational::one());
        FiniteDistribution { mass }
    }

    /// Builds a distribution from (term, mass) pairs, merging duplicates.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (StateTerm, Rational)>) -> Result<Self, TermError> {
        let mut mass: BTreeMap<StateTerm, Rational> = BTreeMap::new();
        for (t, p) in pairs {
            if p.is_negative() {
                return Err(TermError::BadWeights(format!("negative mass {}", fmt_rational(&p))));
            }
            *mass.entry(t).or_insert_with(Rational::zero) += p;
        }
        mass.retain(|_, p| !p.is_zero());
        let total: Rational = mass.values().sum();
        if !total.is_one() {
            return Err(TermError::BadWeights(format!(
                "total mass {} is not 1",
                fmt_rational(&total)
            )));
        }
        Ok(FiniteDistribution { mass })
    }

    pub fn get(&self, t: &StateTerm) -> Rational {
        self.mass.get(t).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn support(&self) -> impl Iterator<Item = &StateTerm> {
        self.mass.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&StateTerm, &Rational)> {
        self.mass.iter()
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn contains(&self, t: &StateTerm) -> bool {
        self.mass.contains_key(t)
    }

    pub fn total(&self) -> Rational {
        self.mass.values().sum()
    }
}

impl fmt::Display for FiniteDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (t, p)) in self.mass.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{t}: {}", fmt_rational(p))?;
        }
        f.write_str("}")
    }
}

/// `π(X) = Σ_{t∈X} π(t)`; duplicates in `X` count once.
pub fn measure<'a>(pi: &FiniteDistribution, set: impl IntoIterator<Item = &'a StateTerm>) -> Rational {
    let mut seen = std::collections::BTreeSet::new();
    let mut total = Rational::zero();
    for t in set {
        if seen.insert(t) {
            total += pi.get(t);
        }
    }
    total
}

/// Pointwise weighted sum.
pub fn convex_combine(weights: &[Rational], dists: &[FiniteDistribution]) -> Result<FiniteDistribution, TermError> {
    if weights.len() != dists.len() {
        return Err(TermError::BadWeights(format!(
            "{} weights for {} distributions",
            weights.len(),
            dists.len()
        )));
    }
    check_weights(weights)?;
    let mut mass: BTreeMap<StateTerm, Rational> = BTreeMap::new();
    for (w, d) in weights.iter().zip(dists) {
        for (t, p) in d.iter() {
            *mass.entry(t.clone()).or_insert_with(Rational::zero) += w * p;
        }
    }
    mass.retain(|_, p| !p.is_zero());
    Ok(FiniteDistribution { mass })
}

/// Interprets a closed distribution term.
pub fn eval_dist(theta: &DistTerm, sig: &Signature) -> Result<FiniteDistribution, TermError> {
    match theta {
        DistTerm::Var(_) => Err(TermError::OpenTerm(theta.to_string())),
        DistTerm::Dirac(t) => {
            if !t.is_closed() {
                return Err(TermError::OpenTerm(t.to_string()));
            }
            Ok(FiniteDistribution::dirac((**t).clone()))
        }
        DistTerm::Sum(parts) => {
            let weights: Vec<Rational> = parts.iter().map(|(p, _)| p.clone()).collect();
            let dists = parts
                .iter()
                .map(|(_, d)| eval_dist(d, sig))
                .collect::<Result<Vec<_>, _>>()?;
            convex_combine(&weights, &dists)
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
            // Each argument contributes either a weighted choice of state terms
            // (state positions) or itself verbatim (distribution positions).
            let mut partial: Vec<(Vec<Term>, Rational)> = vec![(Vec::new(), Rational::one())];
            for (arg, sort) in args.iter().zip(sorts) {
                if !arg.is_closed() {
                    return Err(TermError::OpenTerm(arg.to_string()));
                }
                match sort {
                    Sort::Dist => {
                        for (prefix, _) in partial.iter_mut() {
                            prefix.push(Term::Dist(arg.clone()));
                        }
                    }
                    Sort::State => {
                        let component = eval_dist(arg, sig)?;
                        let mut next = Vec::with_capacity(partial.len() * component.len());
                        for (prefix, p) in &partial {
                            for (t, q) in component.iter() {
                                let mut args = prefix.clone();
                                args.push(Term::State(t.clone()));
                                next.push((args, p * q));
                            }
                        }
                        partial = next;
                    }
                }
            }
            FiniteDistribution::from_pairs(
                partial
                    .into_iter()
                    .map(|(args, p)| (StateTerm::App(op.clone(), args), p)),
            )
        }
    }
}

/// Compares `$f(.., ⊕ p_i θ_i, ..)` with `⊕ p_i $f(.., θ_i, ..)` at argument
/// `position` (zero-based).
pub fn distributivity_check(
    sig: &Signature,
    op: &str,
    position: usize,
    args: &[DistTerm],
    parts: &[(Rational, DistTerm)],
) -> Result<bool, TermError> {
    if position >= args.len() {
        return Err(TermError::ArityMismatch {
            op: format!("${op}"),
            expected: args.len(),
            found: position + 1,
        });
    }
    let with = |d: DistTerm| {
        let mut a = args.to_vec();
        a[position] = d;
        DistTerm::Lift(op.to_string(), a)
    };
    let inside = with(DistTerm::sum(parts.to_vec()));
    let outside = DistTerm::Sum(parts.iter().map(|(p, d)| (p.clone(), with(d.clone()))).collect());
    Ok(eval_dist(&inside, sig)? == eval_dist(&outside, sig)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn sig() -> Signature {
        Signature::new()
            .with_op("stop", &[])
            .with_op("pre_b", &[Sort::Dist])
            .with_op("pre_c", &[Sort::Dist])
            .with_op("g", &[Sort::State, Sort::State])
            .with_op("h", &[Sort::State, Sort::Dist])
    }

    fn stop() -> StateTerm {
        StateTerm::constant("stop")
    }

    fn pre(a: &str) -> StateTerm {
        StateTerm::app(&format!("pre_{a}"), vec![DistTerm::dirac(stop()).into()])
    }

    fn half_half() -> DistTerm {
        DistTerm::mix(rat(1, 2), DistTerm::dirac(pre("b")), DistTerm::dirac(pre("c")))
    }

    #[test]
    fn dirac_and_sum_clauses() {
        let d = eval_dist(&DistTerm::dirac(pre("b")), &sig()).unwrap();
        assert_eq!(d.get(&pre("b")), rat(1, 1));
        let d = eval_dist(&half_half(), &sig()).unwrap();
        assert_eq!(d.get(&pre("b")), rat(1, 2));
        assert_eq!(d.get(&pre("c")), rat(1, 2));
        assert_eq!(d.len(), 2);
    }

    #[test]
    fn lifted_product_over_state_positions() {
        let g = DistTerm::lift("g", vec![half_half(), half_half()]);
        let d = eval_dist(&g, &sig()).unwrap();
        assert_eq!(d.len(), 4);
        for x in ["b", "c"] {
            for y in ["b", "c"] {
                let t = StateTerm::app("g", vec![pre(x).into(), pre(y).into()]);
                assert_eq!(d.get(&t), rat(1, 4));
            }
        }
    }

    #[test]
    fn dist_positions_are_kept_verbatim() {
        let h = DistTerm::lift("h", vec![half_half(), half_half()]);
        let d = eval_dist(&h, &sig()).unwrap();
        assert_eq!(d.len(), 2);
        let t = StateTerm::app("h", vec![pre("b").into(), half_half().into()]);
        assert_eq!(d.get(&t), rat(1, 2));
    }

    #[test]
    fn open_terms_are_rejected() {
        assert!(matches!(eval_dist(&DistTerm::var("mu"), &sig()), Err(TermError::OpenTerm(_))));
        let open = DistTerm::dirac(StateTerm::var("x"));
        assert!(matches!(eval_dist(&open, &sig()), Err(TermError::OpenTerm(_))));
    }

    #[test]
    fn measure_examples() {
        let pi = eval_dist(&half_half(), &sig()).unwrap();
        assert_eq!(measure(&pi, [&pre("b")]), rat(1, 2));
        assert_eq!(measure(&pi, std::iter::empty()), rat(0, 1));
        let all: Vec<StateTerm> = pi.support().cloned().chain([stop()]).collect();
        assert_eq!(measure(&pi, &all), rat(1, 1));
        assert_eq!(measure(&pi, [&pre("b"), &pre("b")]), rat(1, 2));
    }

    #[test]
    fn convex_combine_examples() {
        let pi = eval_dist(&half_half(), &sig()).unwrap();
        assert_eq!(convex_combine(&[rat(1, 1)], &[pi.clone()]).unwrap(), pi);
        let b = FiniteDistribution::dirac(pre("b"));
        let c = FiniteDistribution::dirac(pre("c"));
        assert_eq!(convex_combine(&[rat(1, 2), rat(1, 2)], &[b.clone(), c]).unwrap(), pi);
        assert_eq!(convex_combine(&[rat(1, 4), rat(3, 4)], &[b.clone(), b.clone()]).unwrap(), b);
        assert!(matches!(convex_combine(&[rat(1, 2)], &[b.clone()]), Err(TermError::BadWeights(_))));
        assert!(matches!(convex_combine(&[rat(1, 1), rat(0, 1)], &[b.clone(), b]), Err(TermError::BadWeights(_))));
    }

    #[test]
    fn distributivity_examples() {
        let parts = vec![(rat(1, 2), DistTerm::dirac(pre("b"))), (rat(1, 2), DistTerm::dirac(pre("c")))];
        let args = vec![DistTerm::dirac(stop()), DistTerm::dirac(stop())];
        assert!(distributivity_check(&sig(), "g", 0, &args, &parts).unwrap());
        assert!(!distributivity_check(&sig(), "h", 1, &args, &parts).unwrap());
        let single = vec![(rat(1, 1), DistTerm::dirac(pre("b")))];
        assert!(distributivity_check(&sig(), "h", 1, &args, &single).unwrap());
    }
}
