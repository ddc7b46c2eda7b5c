use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ptss_core::bisim::{is_stable, naive_fixpoint, quotient, Kind};
use ptss_core::derive::{build_pts, stable_model, DEFAULT_FUEL};
use ptss_core::lang::{parse_closed_state, parse_dist_formula, parse_spec, DistFormula, StateFormula};
use ptss_core::logic::{distinguishing_formula, in_fragment, sat_dist, satisfying_states, LogicError};
use ptss_core::pts::{random_pts, Pts, Step};
use ptss_core::rational::{one, rat};

fn system(seed: u64) -> Pts {
    random_pts(&mut ChaCha8Rng::seed_from_u64(seed), 6, 2, 4)
}

fn kind() -> impl Strategy<Value = Kind> {
    prop::sample::select(Kind::ALL.to_vec())
}

const PA: &str = "spec pa
actions a, b, c
op stop : -> S
op pre[A] : D -> S
op plus : S S -> S
rule prefix[A]: => A.mu -A-> mu
rule plus_left[A]: x -A-> mu => x + y -A-> mu
rule plus_right[A]: y -A-> mu => x + y -A-> mu
";

fn pa_term() -> impl Strategy<Value = String> {
    let leaf = Just("0".to_string());
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            (prop::sample::select(vec!["a", "b", "c"]), inner.clone()).prop_map(|(a, t)| format!("{a}.dirac({t})")),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| format!("{l} + {r}")),
            (1..4i64, inner.clone(), inner).prop_map(|(k, l, r)| format!("a.(dirac({l}) (+) {k}/4 dirac({r}))")),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quotients_are_stable(seed in any::<u64>(), kind in kind()) {
        let pts = system(seed);
        prop_assert!(is_stable(&pts, &quotient(&pts, kind)));
    }

    #[test]
    fn quotients_match_the_naive_fixpoint(seed in any::<u64>(), kind in kind()) {
        let pts = system(seed);
        prop_assert_eq!(quotient(&pts, kind).relation(), naive_fixpoint(&pts, kind).unwrap());
    }

    #[test]
    fn text_round_trip(seed in any::<u64>()) {
        let pts = system(seed);
        let again = Pts::from_text(&pts.to_text()).unwrap();
        prop_assert_eq!(again.to_text(), pts.to_text());
    }

    #[test]
    fn adding_a_combined_step_preserves_convex_and_obliterated_classes(seed in any::<u64>(), k in 1..4i64) {
        let pts = system(seed);
        let mut extended = pts.clone();
        let w = rat(k, 4);
        for s in 0..pts.len() {
            for a in pts.actions() {
                let steps: Vec<&Step> = pts.steps_of(s, &a).collect();
                if let [x, y, ..] = steps.as_slice() {
                    let mix = x.dist.iter().map(|(t, p)| (*t, p * &w))
                        .chain(y.dist.iter().map(|(t, p)| (*t, p * (one() - &w))));
                    extended.add_step(s, Step::new(&a, mix).unwrap());
                }
            }
        }
        for kind in [Kind::Convex, Kind::Obliterated] {
            prop_assert_eq!(quotient(&extended, kind).relation(), quotient(&pts, kind).relation());
        }
    }

    #[test]
    fn atoms_are_antitone_in_their_bound(seed in any::<u64>(), lo in 0..8i64, hi in 0..8i64) {
        let pts = system(seed);
        let (lo, hi) = (lo.min(hi), lo.max(hi));
        let at = |p: i64| parse_dist_formula(&format!("[<a>tt]_{p}/8")).unwrap();
        for step in pts.steps.iter().flatten() {
            if sat_dist(&pts, &step.dist, &at(hi)) {
                prop_assert!(sat_dist(&pts, &step.dist, &at(lo)));
            }
        }
    }

    #[test]
    fn separators_exist_for_every_inequivalent_pair(seed in any::<u64>(), kind in kind()) {
        let pts = system(seed);
        let partition = quotient(&pts, kind);
        for s in 0..pts.len() {
            for t in s + 1..pts.len() {
                if partition.same_block(s, t) {
                    continue;
                }
                match distinguishing_formula(&pts, &pts.states[s], &pts.states[t], kind) {
                    Ok(Some(phi)) => {
                        let sat = satisfying_states(&pts, &phi);
                        prop_assert!(in_fragment(&phi, kind), "{} not in {}", phi, kind);
                        prop_assert_ne!(sat[s], sat[t], "{} does not separate", phi);
                    }
                    Ok(None) => prop_assert!(false, "no separator for inequivalent states"),
                    Err(LogicError::Inexpressible { .. }) => prop_assert_eq!(kind, Kind::Abstracted),
                    Err(e) => prop_assert!(false, "{}", e),
                }
            }
        }
    }

    #[test]
    fn equivalent_states_agree_on_fragment_formulas(seed in any::<u64>(), kind in kind()) {
        let pts = system(seed);
        let partition = quotient(&pts, kind);
        let formulas = [
            StateFormula::diamond("a", DistFormula::atom(StateFormula::diamond("b", DistFormula::atom(StateFormula::True, rat(0, 1))), rat(1, 2))),
            StateFormula::combined("a", DistFormula::atom(StateFormula::not(StateFormula::diamond("a", DistFormula::atom(StateFormula::True, rat(0, 1)))), rat(1, 4))),
            StateFormula::diamond("b", DistFormula::atom(StateFormula::diamond("a", DistFormula::atom(StateFormula::True, rat(0, 1))), rat(0, 1))),
        ];
        for phi in formulas.iter().filter(|phi| in_fragment(phi, kind)) {
            let sat = satisfying_states(&pts, phi);
            for s in 0..pts.len() {
                for t in 0..pts.len() {
                    if partition.same_block(s, t) {
                        prop_assert_eq!(sat[s], sat[t], "{} splits a {} class", phi, kind);
                    }
                }
            }
        }
    }

    #[test]
    fn positive_specs_have_complete_models(term in pa_term()) {
        let spec = parse_spec(PA).unwrap();
        let root = parse_closed_state(&term, &spec).unwrap();
        let table = stable_model(&spec, &[root], DEFAULT_FUEL).unwrap();
        prop_assert!(table.certain.is_subset(&table.possible));
        prop_assert!(table.is_complete());
        prop_assert!(table.iterations <= table.explored.len().max(1));
        prop_assert!(build_pts(&table).is_ok());
    }
}
