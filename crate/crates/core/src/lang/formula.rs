use std::fmt;

use num_traits::{One, Signed, Zero};

use super::lexer::Tok;
use super::parser::Parser;
use super::{ParseError, ParseErrorKind};
use crate::rational::{fmt_rational, Rational};

/// State-layer formula.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StateFormula {
    True,
    /// `<a>ψ`: some `a`-transition satisfies ψ.
    Diamond(String, DistFormula),
    /// `<a>_c ψ`: some combined `a`-transition satisfies ψ.
    Combined(String, DistFormula),
    And(Vec<StateFormula>),
    Not(Box<StateFormula>),
}

/// Distribution-layer formula.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DistFormula {
    /// `[φ]_p`: the set of states satisfying φ has mass strictly above p.
    Atom(Box<StateFormula>, Rational),
    Meet(Vec<DistFormula>),
}

impl StateFormula {
    pub fn diamond(action: &str, body: DistFormula) -> Self {
        StateFormula::Diamond(action.to_string(), body)
    }

    pub fn combined(action: &str, body: DistFormula) -> Self {
        StateFormula::Combined(action.to_string(), body)
    }

    pub fn not(phi: StateFormula) -> Self {
        StateFormula::Not(Box::new(phi))
    }

    /// Conjunction of a list, collapsing the trivial cases.
    pub fn and(mut parts: Vec<StateFormula>) -> Self {
        parts.retain(|p| *p != StateFormula::True);
        match parts.len() {
            0 => StateFormula::True,
            1 => parts.pop().unwrap(),
            _ => StateFormula::And(parts),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            StateFormula::True => 1,
            StateFormula::Diamond(_, d) | StateFormula::Combined(_, d) => 1 + d.size(),
            StateFormula::And(ps) => 1 + ps.iter().map(StateFormula::size).sum::<usize>(),
            StateFormula::Not(p) => 1 + p.size(),
        }
    }
}

impl DistFormula {
    pub fn atom(phi: StateFormula, bound: Rational) -> Self {
        DistFormula::Atom(Box::new(phi), bound)
    }

    pub fn meet(mut parts: Vec<DistFormula>) -> Self {
        if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            DistFormula::Meet(parts)
        }
    }

    pub fn size(&self) -> usize {
        match self {
            DistFormula::Atom(p, _) => 1 + p.size(),
            DistFormula::Meet(ps) => 1 + ps.iter().map(DistFormula::size).sum::<usize>(),
        }
    }

    /// The `[φ]_p` atoms of nested meets.
    pub fn atoms(&self) -> Vec<(&StateFormula, &Rational)> {
        match self {
            DistFormula::Atom(p, q) => vec![(p.as_ref(), q)],
            DistFormula::Meet(ps) => ps.iter().flat_map(DistFormula::atoms).collect(),
        }
    }
}

fn layer_error(p: &Parser, message: &str) -> ParseError {
    p.error(ParseErrorKind::Layer, message)
}

impl Parser {
    fn state_formula(&mut self) -> Result<StateFormula, ParseError> {
        let mut parts = vec![self.state_unary()?];
        while self.eat(&Tok::Meet) {
            parts.push(self.state_unary()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { StateFormula::And(parts) })
    }

    fn state_unary(&mut self) -> Result<StateFormula, ParseError> {
        match self.peek().clone() {
            Tok::Not => {
                self.advance();
                Ok(StateFormula::Not(Box::new(self.state_unary()?)))
            }
            Tok::Ident(s) if s == "tt" => {
                self.advance();
                Ok(StateFormula::True)
            }
            Tok::Lt => {
                self.advance();
                let a = self.ident("an action")?;
                self.expect(&Tok::Gt, "`>`")?;
                let combined = if self.peek() == &Tok::Underscore {
                    self.advance();
                    match self.advance() {
                        Tok::Ident(c) if c == "c" => true,
                        _ => return Err(self.unexpected("`c` after `<a>_`")),
                    }
                } else {
                    false
                };
                // `<a>tt` abbreviates `<a>[tt]_0`.
                let body = if matches!(self.peek(), Tok::Ident(s) if s == "tt") {
                    self.advance();
                    DistFormula::Atom(Box::new(StateFormula::True), Rational::zero())
                } else {
                    self.dist_unary()?
                };
                Ok(if combined { StateFormula::Combined(a, body) } else { StateFormula::Diamond(a, body) })
            }
            Tok::LParen => {
                self.advance();
                let inner = self.state_formula()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::LBracket => Err(layer_error(
                self,
                "distribution formula `[φ]_p` used where a state formula is expected",
            )),
            _ => Err(self.unexpected("a state formula (`tt`, `<a>`, `!`, `(`)")),
        }
    }

    fn dist_formula(&mut self) -> Result<DistFormula, ParseError> {
        let mut parts = vec![self.dist_unary()?];
        while self.eat(&Tok::Meet) {
            parts.push(self.dist_unary()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { DistFormula::Meet(parts) })
    }

    fn dist_unary(&mut self) -> Result<DistFormula, ParseError> {
        match self.peek().clone() {
            Tok::LBracket => {
                self.advance();
                let phi = self.state_formula()?;
                self.expect(&Tok::RBracket, "`]`")?;
                self.expect(&Tok::Underscore, "`_` before the probability bound")?;
                let at = self.loc();
                let p = self.rational()?;
                if p.is_negative() || p > Rational::one() {
                    return Err(ParseError::new(
                        ParseErrorKind::Syntax,
                        at.0,
                        at.1,
                        format!("probability bound {} is outside [0, 1]", fmt_rational(&p)),
                    ));
                }
                Ok(DistFormula::Atom(Box::new(phi), p))
            }
            Tok::LParen => {
                self.advance();
                let inner = self.dist_formula()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Not | Tok::Lt => Err(layer_error(
                self,
                "state formula used where a distribution formula `[φ]_p` is expected",
            )),
            Tok::Ident(s) if s == "tt" => Err(layer_error(
                self,
                "state formula used where a distribution formula `[φ]_p` is expected",
            )),
            _ => Err(self.unexpected("a distribution formula (`[φ]_p` or `(`)")),
        }
    }
}

pub fn parse_formula(text: &str) -> Result<StateFormula, ParseError> {
    let mut p = Parser::new(text)?;
    let phi = p.state_formula()?;
    if p.peek() != &Tok::Eof {
        return Err(p.unexpected("end of formula"));
    }
    Ok(phi)
}

pub fn parse_dist_formula(text: &str) -> Result<DistFormula, ParseError> {
    let mut p = Parser::new(text)?;
    let psi = p.dist_formula()?;
    if p.peek() != &Tok::Eof {
        return Err(p.unexpected("end of formula"));
    }
    Ok(psi)
}

fn write_state_unary(f: &mut fmt::Formatter<'_>, phi: &StateFormula) -> fmt::Result {
    if matches!(phi, StateFormula::And(_)) {
        write!(f, "({phi})")
    } else {
        write!(f, "{phi}")
    }
}

fn is_tt_atom(psi: &DistFormula) -> bool {
    matches!(psi, DistFormula::Atom(phi, p) if **phi == StateFormula::True && p.is_zero())
}

fn write_dist_unary(f: &mut fmt::Formatter<'_>, psi: &DistFormula) -> fmt::Result {
    if matches!(psi, DistFormula::Meet(_)) {
        write!(f, "({psi})")
    } else {
        write!(f, "{psi}")
    }
}

impl fmt::Display for StateFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateFormula::True => f.write_str("tt"),
            StateFormula::Diamond(a, psi) if is_tt_atom(psi) => write!(f, "<{a}>tt"),
            StateFormula::Combined(a, psi) if is_tt_atom(psi) => write!(f, "<{a}>_c tt"),
            StateFormula::Diamond(a, psi) => {
                write!(f, "<{a}>")?;
                write_dist_unary(f, psi)
            }
            StateFormula::Combined(a, psi) => {
                write!(f, "<{a}>_c ")?;
                write_dist_unary(f, psi)
            }
            StateFormula::Not(phi) => {
                f.write_str("!")?;
                write_state_unary(f, phi)
            }
            StateFormula::And(parts) => {
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" /\\ ")?;
                    }
                    write_state_unary(f, p)?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for DistFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistFormula::Atom(phi, p) => write!(f, "[{phi}]_{}", fmt_rational(p)),
            DistFormula::Meet(parts) => {
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" /\\ ")?;
                    }
                    write_dist_unary(f, p)?;
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{rat, zero};

    fn has(a: &str) -> StateFormula {
        StateFormula::diamond(a, DistFormula::atom(StateFormula::True, zero()))
    }

    #[test]
    fn parses_the_meet_example() {
        let phi = parse_formula("<a>([<b>tt]_1/2 /\\ [<c>tt]_1/2)").unwrap();
        let expected = StateFormula::diamond(
            "a",
            DistFormula::Meet(vec![DistFormula::atom(has("b"), rat(1, 2)), DistFormula::atom(has("c"), rat(1, 2))]),
        );
        assert_eq!(phi, expected);
        assert_eq!(phi.to_string(), "<a>([<b>tt]_1/2 /\\ [<c>tt]_1/2)");
    }

    #[test]
    fn diamond_tt_abbreviates_a_zero_atom() {
        assert_eq!(parse_formula("<b>tt").unwrap(), has("b"));
        assert_eq!(parse_formula("<b>[tt]_0").unwrap(), has("b"));
        assert_eq!(parse_formula("<b>!tt").unwrap_err().kind, ParseErrorKind::Layer);
    }

    #[test]
    fn top_and_layer_errors() {
        assert_eq!(parse_formula("tt").unwrap(), StateFormula::True);
        assert_eq!(parse_formula("[tt]_1/2 ").unwrap_err().kind, ParseErrorKind::Layer);
        assert_eq!(parse_formula("<a>[tt]_2").unwrap_err().kind, ParseErrorKind::Syntax);
    }

    #[test]
    fn combined_and_negation_round_trip() {
        for text in [
            "<a>_c ([<b>[tt]_0]_1/2 /\\ [<c>[tt]_0]_1/2)",
            "!<a>[tt]_0 /\\ <b>[!(tt /\\ tt)]_1/3",
            "(tt /\\ tt) /\\ tt",
            "<a>(([tt]_0 /\\ [tt]_0) /\\ [tt]_1)",
            "<a>[tt]_0.25",
        ] {
            let phi = parse_formula(text).unwrap();
            let again = parse_formula(&phi.to_string()).unwrap();
            assert_eq!(phi, again, "{text}");
        }
    }
}
