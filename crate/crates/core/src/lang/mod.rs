//! The `.ptss` surface language: specs, terms and formulas.
//!
//! ```text
//! spec pa
//! actions a, b, c
//! op stop : -> S
//! op pre[A] : D -> S
//! op plus : S S -> S
//! rule prefix[A]: => A.mu -A-> mu
//! rule plus_left[A]: x -A-> mu => x + y -A-> mu
//! def t5 = a.(dirac(b.dirac(0)) (+) 1/2 dirac(c.dirac(0)))
//! ```

mod ast;
mod formula;
mod lexer;
mod parser;

use std::fmt;

use thiserror::Error;

pub use ast::{Comparator, Def, OpDecl, Premise, Quantitative, RuleSchema, SetSpec, Spec, Transition};
pub use formula::{parse_dist_formula, parse_formula, DistFormula, StateFormula};
pub use parser::{parse_closed_state, parse_spec_with, parse_term, ParseOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParseErrorKind {
    Syntax,
    UnresolvedName,
    Sort,
    Rebinding,
    Layer,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParseErrorKind::Syntax => "syntax error",
            ParseErrorKind::UnresolvedName => "unresolved name",
            ParseErrorKind::Sort => "sort error",
            ParseErrorKind::Rebinding => "rebinding error",
            ParseErrorKind::Layer => "layer error",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {kind}: {message}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(kind: ParseErrorKind, line: usize, col: usize, message: impl Into<String>) -> Self {
        ParseError {
            kind,
            line,
            col,
            message: message.into(),
        }
    }
}

/// Parses a spec, rejecting rules whose binders collide.
pub fn parse_spec(text: &str) -> Result<Spec, ParseError> {
    parse_spec_with(text, ParseOptions::default())
}

/// Text that parses back to `x`.
pub fn render<T: fmt::Display + ?Sized>(x: &T) -> String {
    x.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use crate::terms::{DistTerm, StateTerm, Term};

    pub(crate) const PA: &str = "\
spec pa
actions a, b, c
op stop : -> S
op pre[A] : D -> S
op plus : S S -> S
rule prefix[A]: => A.mu -A-> mu
rule plus_left[A]: x -A-> mu => x + y -A-> mu
rule plus_right[A]: y -A-> mu => x + y -A-> mu
def t1 = a.dirac(b.dirac(0)) + a.dirac(c.dirac(0))
def t3 = a.(dirac(b.dirac(0)) (+) 1/2 dirac(c.dirac(0)))
";

    fn pa() -> Spec {
        parse_spec(PA).unwrap()
    }

    fn with_rule(rule: &str) -> String {
        format!("{PA}op f : S -> S\nop g : S S -> S\n{rule}\n")
    }

    #[test]
    fn base_pa_parses() {
        let spec = pa();
        assert_eq!(spec.rules.len(), 3);
        assert_eq!(spec.actions, vec!["a", "b", "c"]);
        assert_eq!(spec.expanded_rules().len(), 9);
        assert_eq!(spec.signature().len(), 5);
    }

    #[test]
    fn signature_only_spec_is_valid() {
        let spec = parse_spec("spec s actions a op stop : -> S").unwrap();
        assert!(spec.rules.is_empty());
    }

    #[test]
    fn duplicated_premise_target_is_a_rebinding() {
        let text = with_rule("rule r: x -a-> mu, x -b-> mu => f(x) -a-> mu");
        assert_eq!(parse_spec(&text).unwrap_err().kind, ParseErrorKind::Rebinding);
        assert!(parse_spec_with(&text, ParseOptions::lenient()).is_ok());
    }

    #[test]
    fn other_binder_collisions() {
        for rule in [
            "rule r: => g(x, x) -a-> dirac(x)",
            "rule r: x -a-> x => f(x) -a-> dirac(x)",
            "rule r: x -a-> mu, mu(Y) > 0, forall x in Y: x -b-> nu => f(x) -a-> mu",
            "rule r: x -a-> mu, mu(Y) > 0, forall y in Y: y -b-> nu => f(x) -a-> nu",
        ] {
            let err = parse_spec(&with_rule(rule)).unwrap_err();
            assert!(
                matches!(err.kind, ParseErrorKind::Rebinding | ParseErrorKind::Sort),
                "{rule}: {err}"
            );
        }
    }

    #[test]
    fn unmeasured_set_variable_is_unresolved() {
        let err = parse_spec(&with_rule("rule r: forall y in Y: y -b-> nu => f(x) -a-> dirac(x)")).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnresolvedName);
    }

    #[test]
    fn unknown_action_and_operator() {
        let err = parse_spec(&with_rule("rule r: x -d-> mu => f(x) -a-> mu")).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnresolvedName);
        let err = parse_spec(&with_rule("rule r: x -a-> mu => h(x) -a-> mu")).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnresolvedName);
    }

    #[test]
    fn errors_carry_positions() {
        let err = parse_spec("spec s\nactions a\nop f : S -> D\n").unwrap_err();
        assert_eq!((err.kind, err.line, err.col), (ParseErrorKind::Sort, 3, 13));
        let err = parse_spec("spec s\nactions a\nrule r: => x -a-> ,\n").unwrap_err();
        assert_eq!((err.kind, err.line), (ParseErrorKind::Syntax, 3));
    }

    #[test]
    fn terms_from_the_examples() {
        let spec = pa();
        let t3 = parse_term("a.(dirac(b.dirac(0)) (+) 1/2 dirac(c.dirac(0)))", &spec).unwrap();
        assert_eq!(t3, Term::State(spec.def("t3").unwrap().clone()));
        let zero = parse_term("0", &spec).unwrap();
        assert_eq!(zero, Term::State(StateTerm::constant("stop")));
        assert_eq!(parse_term("a.0", &spec).unwrap_err().kind, ParseErrorKind::Sort);
        let mix = parse_term("dirac(0) (+) 0.25 dirac(x)", &spec).unwrap();
        let expected = DistTerm::mix(rat(1, 4), DistTerm::dirac(StateTerm::constant("stop")), DistTerm::dirac(StateTerm::var("x")));
        assert_eq!(mix, Term::Dist(expected));
        assert_eq!(parse_term("dirac(0) (+) 1 dirac(0)", &spec).unwrap_err().kind, ParseErrorKind::Sort);
    }

    #[test]
    fn spec_round_trip_is_a_fixpoint() {
        let spec = pa();
        let once = render(&spec);
        let again = parse_spec(&once).unwrap();
        assert_eq!(again, spec);
        assert_eq!(render(&again), once);
    }

    #[test]
    fn forall_block_round_trips() {
        let text = with_rule(
            "rule r: x -a-> mu, combine M as mc from x -a-> mu, mc(Y) >= 1/2, forall y in Y: y -b-> nu, $g(mu, mu)({z}) > 0 => f(x) -a-> dirac(0)",
        );
        let spec = parse_spec(&text).unwrap();
        let rule = spec.rule("r").unwrap();
        assert!(matches!(rule.premises[3], Premise::Forall { .. }));
        assert_eq!(parse_spec(&render(&spec)).unwrap(), spec);
        assert!(render(rule).contains("forall y in Y: y -b-> nu"));
    }

    #[test]
    fn term_and_formula_round_trips() {
        let spec = pa();
        let t1 = spec.def("t1").unwrap().clone();
        assert_eq!(parse_term(&render(&t1), &spec).unwrap(), Term::State(t1));
        let phi = parse_formula("<a>([<b>tt]_1/2 /\\ [<c>tt]_1/2)").unwrap();
        assert_eq!(parse_formula(&render(&phi)).unwrap(), phi);
    }
}
