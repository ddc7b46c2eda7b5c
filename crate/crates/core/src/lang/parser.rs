use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Signed};

use super::ast::{Comparator, Def, OpDecl, Premise, Quantitative, RuleSchema, SetSpec, Spec, Transition};
use super::lexer::{tokenize, Tok, Token};
use super::{ParseError, ParseErrorKind};
use crate::rational::{fmt_rational, parse_rational, Rational};
use crate::terms::{check_weights, DistTerm, Signature, Sort, StateTerm, Term};

/// Controls the binder-distinctness checks run while parsing rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParseOptions {
    /// Reject rules whose binders collide (duplicate source variables,
    /// shared premise targets, element variables clashing with sources).
    /// Turning this off lets the format checker report such rules instead.
    pub check_binders: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions { check_binders: true }
    }
}

impl ParseOptions {
    pub fn lenient() -> Self {
        ParseOptions { check_binders: false }
    }
}

pub(crate) type Loc = (usize, usize);

#[derive(Debug, Clone)]
pub(crate) enum Raw {
    Name(String, Loc),
    Call(String, Vec<Raw>, Loc),
    Zero(Loc),
    Plus(Box<Raw>, Box<Raw>, Loc),
    Prefix(String, Box<Raw>, Loc),
    Dirac(Box<Raw>, Loc),
    Lift(String, Vec<Raw>, Loc),
    Mix(Rational, Box<Raw>, Box<Raw>, Loc),
    Oplus(Vec<(Rational, Raw)>, Loc),
}

impl Raw {
    fn loc(&self) -> Loc {
        match self {
            Raw::Name(_, l)
            | Raw::Call(_, _, l)
            | Raw::Zero(l)
            | Raw::Plus(_, _, l)
            | Raw::Prefix(_, _, l)
            | Raw::Dirac(_, l)
            | Raw::Lift(_, _, l)
            | Raw::Mix(_, _, _, l)
            | Raw::Oplus(_, l) => *l,
        }
    }
}

pub(crate) struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    pub(crate) fn new(text: &str) -> Result<Self, ParseError> {
        Ok(Parser {
            toks: tokenize(text)?,
            pos: 0,
        })
    }

    pub(crate) fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    pub(crate) fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    pub(crate) fn loc(&self) -> Loc {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    pub(crate) fn advance(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    pub(crate) fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.advance();
            true
        } else {
            false
        }
    }

    pub(crate) fn error(&self, kind: ParseErrorKind, message: impl Into<String>) -> ParseError {
        let (line, col) = self.loc();
        ParseError::new(kind, line, col, message)
    }

    pub(crate) fn unexpected(&self, wanted: &str) -> ParseError {
        self.error(
            ParseErrorKind::Syntax,
            format!("expected {wanted}, found {}", self.peek().describe()),
        )
    }

    pub(crate) fn expect(&mut self, tok: &Tok, wanted: &str) -> Result<(), ParseError> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.unexpected(wanted))
        }
    }

    pub(crate) fn ident(&mut self, wanted: &str) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.advance();
                Ok(s)
            }
            _ => Err(self.unexpected(wanted)),
        }
    }

    pub(crate) fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        match self.peek() {
            Tok::Ident(s) if s == kw => {
                self.advance();
                Ok(())
            }
            _ => Err(self.unexpected(&format!("`{kw}`"))),
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    pub(crate) fn rational(&mut self) -> Result<Rational, ParseError> {
        let loc = self.loc();
        let text = match self.advance() {
            Tok::Int(n) => {
                if self.peek() == &Tok::Slash {
                    self.advance();
                    match self.advance() {
                        Tok::Int(d) => format!("{n}/{d}"),
                        _ => {
                            return Err(ParseError::new(
                                ParseErrorKind::Syntax,
                                loc.0,
                                loc.1,
                                "expected a denominator after `/`",
                            ))
                        }
                    }
                } else {
                    n
                }
            }
            Tok::Decimal(d) => d,
            other => {
                return Err(ParseError::new(
                    ParseErrorKind::Syntax,
                    loc.0,
                    loc.1,
                    format!("expected a rational number, found {}", other.describe()),
                ))
            }
        };
        parse_rational(&text).ok_or_else(|| {
            ParseError::new(ParseErrorKind::Syntax, loc.0, loc.1, format!("invalid rational `{text}`"))
        })
    }

    // --- terms -------------------------------------------------------------

    pub(crate) fn expr(&mut self) -> Result<Raw, ParseError> {
        let loc = self.loc();
        let left = self.plus_expr()?;
        if self.eat(&Tok::OPlus) {
            let p = self.rational()?;
            let right = self.expr()?;
            return Ok(Raw::Mix(p, Box::new(left), Box::new(right), loc));
        }
        Ok(left)
    }

    fn plus_expr(&mut self) -> Result<Raw, ParseError> {
        let loc = self.loc();
        let mut left = self.unary()?;
        while self.peek() == &Tok::Plus {
            self.advance();
            let right = self.unary()?;
            left = Raw::Plus(Box::new(left), Box::new(right), loc);
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<Raw, ParseError> {
        let loc = self.loc();
        if let (Tok::Ident(a), Tok::Dot) = (self.peek().clone(), self.peek_at(1)) {
            self.advance();
            self.advance();
            let arg = self.atom()?;
            return Ok(Raw::Prefix(a, Box::new(arg), loc));
        }
        self.atom()
    }

    fn args(&mut self) -> Result<Vec<Raw>, ParseError> {
        self.expect(&Tok::LParen, "`(`")?;
        let mut out = Vec::new();
        if self.eat(&Tok::RParen) {
            return Ok(out);
        }
        loop {
            out.push(self.expr()?);
            if self.eat(&Tok::RParen) {
                return Ok(out);
            }
            self.expect(&Tok::Comma, "`,` or `)`")?;
        }
    }

    fn atom(&mut self) -> Result<Raw, ParseError> {
        let loc = self.loc();
        match self.peek().clone() {
            Tok::Int(n) => {
                if n == "0" {
                    self.advance();
                    Ok(Raw::Zero(loc))
                } else {
                    Err(self.error(ParseErrorKind::Syntax, format!("numeral `{n}` is not a term; only `0` is")))
                }
            }
            Tok::Ident(name) if name == "dirac" && self.peek_at(1) == &Tok::LParen => {
                self.advance();
                self.advance();
                let inner = self.expr()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(Raw::Dirac(Box::new(inner), loc))
            }
            Tok::Ident(name) if name == "oplus" && self.peek_at(1) == &Tok::LParen => {
                self.advance();
                self.advance();
                let mut parts = Vec::new();
                loop {
                    let p = self.rational()?;
                    self.expect(&Tok::Colon, "`:`")?;
                    parts.push((p, self.expr()?));
                    if self.eat(&Tok::RParen) {
                        break;
                    }
                    self.expect(&Tok::Comma, "`,` or `)`")?;
                }
                Ok(Raw::Oplus(parts, loc))
            }
            Tok::Dollar => {
                self.advance();
                let name = self.ident("an operator name after `$`")?;
                let args = self.args()?;
                Ok(Raw::Lift(name, args, loc))
            }
            Tok::Ident(name) => {
                self.advance();
                if self.peek() == &Tok::LParen {
                    let args = self.args()?;
                    Ok(Raw::Call(name, args, loc))
                } else {
                    Ok(Raw::Name(name, loc))
                }
            }
            Tok::LParen => {
                self.advance();
                let inner = self.expr()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(inner)
            }
            _ => Err(self.unexpected("a term")),
        }
    }

    /// The measured term of a quantitative premise: a bare identifier is a
    /// distribution variable even when followed by `(`.
    fn measured_term(&mut self) -> Result<Raw, ParseError> {
        let loc = self.loc();
        match self.peek().clone() {
            Tok::Ident(name) if name != "dirac" && name != "oplus" => {
                self.advance();
                Ok(Raw::Name(name, loc))
            }
            _ => self.atom(),
        }
    }
}

// ----------------------------------------------------------------------------
// Elaboration of raw terms into sorted terms.

pub(crate) struct Env<'a> {
    pub sig: Signature,
    pub defs: &'a [Def],
    pub vars: BTreeMap<String, Sort>,
    pub allow_vars: bool,
}

fn sort_error(loc: Loc, message: impl Into<String>) -> ParseError {
    ParseError::new(ParseErrorKind::Sort, loc.0, loc.1, message)
}

fn unresolved(loc: Loc, message: impl Into<String>) -> ParseError {
    ParseError::new(ParseErrorKind::UnresolvedName, loc.0, loc.1, message)
}

impl<'a> Env<'a> {
    pub(crate) fn new(sig: Signature, defs: &'a [Def], allow_vars: bool) -> Self {
        Env {
            sig,
            defs,
            vars: BTreeMap::new(),
            allow_vars,
        }
    }

    fn def(&self, name: &str) -> Option<&StateTerm> {
        self.defs.iter().find(|d| d.name == name).map(|d| &d.term)
    }

    fn bind_var(&mut self, name: &str, sort: Sort, loc: Loc) -> Result<(), ParseError> {
        if !self.allow_vars {
            return Err(unresolved(loc, format!("unknown name `{name}`")));
        }
        match self.vars.get(name) {
            Some(s) if *s != sort => Err(sort_error(
                loc,
                format!("variable `{name}` is used both as a {s} and as a {sort} variable"),
            )),
            _ => {
                self.vars.insert(name.to_string(), sort);
                Ok(())
            }
        }
    }

    fn app(&mut self, op: &str, args: &[Raw], loc: Loc, shown: &str) -> Result<StateTerm, ParseError> {
        let sorts = self
            .sig
            .arity(op)
            .ok_or_else(|| unresolved(loc, format!("unknown operator `{shown}`")))?
            .to_vec();
        if sorts.len() != args.len() {
            return Err(sort_error(
                loc,
                format!("operator `{shown}` expects {} argument(s), found {}", sorts.len(), args.len()),
            ));
        }
        let mut out = Vec::with_capacity(args.len());
        for (i, (arg, sort)) in args.iter().zip(&sorts).enumerate() {
            let t = match sort {
                Sort::State => Term::State(self.state(arg)?),
                Sort::Dist => Term::Dist(self.dist(arg).map_err(|e| {
                    if e.kind == ParseErrorKind::Sort && e.message.starts_with("expected a distribution") {
                        sort_error(
                            arg.loc(),
                            format!("argument {} of `{shown}` must be a dist term, found a state term", i + 1),
                        )
                    } else {
                        e
                    }
                })?),
            };
            out.push(t);
        }
        Ok(StateTerm::App(op.to_string(), out))
    }

    pub(crate) fn state(&mut self, raw: &Raw) -> Result<StateTerm, ParseError> {
        match raw {
            Raw::Name(name, loc) => {
                if let Some(t) = self.def(name) {
                    return Ok(t.clone());
                }
                if self.sig.arity(name).is_some_and(|a| a.is_empty()) {
                    return Ok(StateTerm::constant(name));
                }
                self.bind_var(name, Sort::State, *loc)?;
                Ok(StateTerm::Var(name.clone()))
            }
            Raw::Call(f, args, loc) => self.app(f, args, *loc, f),
            Raw::Zero(loc) => {
                if self.sig.arity("stop").is_some_and(|a| a.is_empty()) {
                    Ok(StateTerm::constant("stop"))
                } else {
                    Err(unresolved(*loc, "`0` needs a declared constant `op stop : -> S`"))
                }
            }
            Raw::Plus(l, r, loc) => {
                if self.sig.arity("plus") != Some(&[Sort::State, Sort::State][..]) {
                    return Err(unresolved(*loc, "`+` needs a declared operator `op plus : S S -> S`"));
                }
                let l = self.state(l)?;
                let r = self.state(r)?;
                Ok(StateTerm::app("plus", vec![l.into(), r.into()]))
            }
            Raw::Prefix(a, arg, loc) => {
                let op = format!("pre_{a}");
                if self.sig.arity(&op).is_none() {
                    return Err(unresolved(
                        *loc,
                        format!("`{a}.` needs a prefix operator `pre_{a}` (declare `op pre[A] : D -> S`)"),
                    ));
                }
                self.app(&op, std::slice::from_ref(arg.as_ref()), *loc, &op)
            }
            Raw::Dirac(_, loc) | Raw::Lift(_, _, loc) | Raw::Mix(_, _, _, loc) | Raw::Oplus(_, loc) => {
                Err(sort_error(*loc, "expected a state term, found a distribution term"))
            }
        }
    }

    pub(crate) fn dist(&mut self, raw: &Raw) -> Result<DistTerm, ParseError> {
        match raw {
            Raw::Name(name, loc) => {
                if self.def(name).is_some() || self.sig.arity(name).is_some_and(|a| a.is_empty()) {
                    return Err(sort_error(
                        *loc,
                        format!("expected a distribution term, found state term `{name}`"),
                    ));
                }
                self.bind_var(name, Sort::Dist, *loc)?;
                Ok(DistTerm::Var(name.clone()))
            }
            Raw::Dirac(inner, _) => Ok(DistTerm::dirac(self.state(inner)?)),
            Raw::Lift(f, args, loc) => {
                let sorts = self
                    .sig
                    .arity(f)
                    .ok_or_else(|| unresolved(*loc, format!("unknown operator `{f}` in lifting `${f}`")))?;
                if sorts.len() != args.len() {
                    return Err(sort_error(
                        *loc,
                        format!("lifting `${f}` expects {} argument(s), found {}", sorts.len(), args.len()),
                    ));
                }
                let args = args.iter().map(|a| self.dist(a)).collect::<Result<Vec<_>, _>>()?;
                Ok(DistTerm::Lift(f.clone(), args))
            }
            Raw::Mix(p, l, r, loc) => {
                if !p.is_positive() || *p >= Rational::one() {
                    return Err(sort_error(
                        *loc,
                        format!("weight {} of `(+)` must lie strictly between 0 and 1", fmt_rational(p)),
                    ));
                }
                let l = self.dist(l)?;
                let r = self.dist(r)?;
                Ok(DistTerm::mix(p.clone(), l, r))
            }
            Raw::Oplus(parts, loc) => {
                check_weights(parts.iter().map(|(p, _)| p)).map_err(|e| sort_error(*loc, e.to_string()))?;
                let parts = parts
                    .iter()
                    .map(|(p, d)| Ok((p.clone(), self.dist(d)?)))
                    .collect::<Result<Vec<_>, ParseError>>()?;
                Ok(DistTerm::sum(parts))
            }
            Raw::Call(..) | Raw::Zero(_) | Raw::Plus(..) | Raw::Prefix(..) => Err(sort_error(
                raw.loc(),
                "expected a distribution term, found a state term",
            )),
        }
    }

    pub(crate) fn any(&mut self, raw: &Raw) -> Result<Term, ParseError> {
        match raw {
            Raw::Dirac(..) | Raw::Lift(..) | Raw::Mix(..) | Raw::Oplus(..) => Ok(Term::Dist(self.dist(raw)?)),
            Raw::Name(name, _) if self.vars.get(name) == Some(&Sort::Dist) => Ok(Term::Dist(self.dist(raw)?)),
            _ => Ok(Term::State(self.state(raw)?)),
        }
    }
}

// ----------------------------------------------------------------------------
// Spec parsing

const RESERVED: &[&str] = &["dirac", "oplus", "forall", "combine", "spec", "actions", "op", "rule", "def"];

enum RawPremise {
    Trans(Raw, String, Raw, Loc),
    Neg(Raw, String, Loc),
    Quant(Raw, RawSet, Comparator, Rational, Loc),
    Forall(String, String, Box<RawPremise>, Loc),
    Combine(String, String, Raw, String, Raw, Loc),
}

enum RawSet {
    Explicit(Vec<Raw>),
    Var(String),
}

impl RawPremise {
    fn loc(&self) -> Loc {
        match self {
            RawPremise::Trans(.., l)
            | RawPremise::Neg(.., l)
            | RawPremise::Quant(.., l)
            | RawPremise::Forall(.., l)
            | RawPremise::Combine(.., l) => *l,
        }
    }
}

impl Parser {
    fn comparator(&mut self) -> Result<Comparator, ParseError> {
        let c = match self.peek() {
            Tok::Gt => Comparator::Gt,
            Tok::Ge => Comparator::Ge,
            Tok::Lt => Comparator::Lt,
            Tok::Le => Comparator::Le,
            _ => return Err(self.unexpected("a comparator (`>`, `>=`, `<`, `<=`)")),
        };
        self.advance();
        Ok(c)
    }

    fn transition_tail(&mut self, source: Raw, loc: Loc) -> Result<RawPremise, ParseError> {
        if self.eat(&Tok::NegArrow) {
            let a = self.ident("an action")?;
            self.expect(&Tok::Arrow, "`->`")?;
            return Ok(RawPremise::Neg(source, a, loc));
        }
        self.expect(&Tok::Minus, "`-a->` or `-/a->`")?;
        let a = self.ident("an action")?;
        self.expect(&Tok::Arrow, "`->`")?;
        let target = self.expr()?;
        Ok(RawPremise::Trans(source, a, target, loc))
    }

    fn transition(&mut self) -> Result<(Raw, String, Raw, Loc), ParseError> {
        let loc = self.loc();
        let source = self.expr()?;
        match self.transition_tail(source, loc)? {
            RawPremise::Trans(s, a, t, l) => Ok((s, a, t, l)),
            _ => Err(ParseError::new(
                ParseErrorKind::Syntax,
                loc.0,
                loc.1,
                "expected a positive transition `t -a-> θ`",
            )),
        }
    }

    fn quantitative(&mut self) -> Result<RawPremise, ParseError> {
        let loc = self.loc();
        let term = self.measured_term()?;
        self.expect(&Tok::LParen, "`(` before the measured set")?;
        let set = if self.eat(&Tok::LBrace) {
            let mut elems = Vec::new();
            if !self.eat(&Tok::RBrace) {
                loop {
                    elems.push(self.expr()?);
                    if self.eat(&Tok::RBrace) {
                        break;
                    }
                    self.expect(&Tok::Comma, "`,` or `}`")?;
                }
            }
            RawSet::Explicit(elems)
        } else {
            RawSet::Var(self.ident("a set variable or `{`")?)
        };
        self.expect(&Tok::RParen, "`)`")?;
        let cmp = self.comparator()?;
        let bound = self.rational()?;
        Ok(RawPremise::Quant(term, set, cmp, bound, loc))
    }

    fn premise(&mut self) -> Result<RawPremise, ParseError> {
        let loc = self.loc();
        if self.at_keyword("forall") {
            self.advance();
            let elem = self.ident("an element variable")?;
            self.keyword("in")?;
            let set = self.ident("a set variable")?;
            self.expect(&Tok::Colon, "`:`")?;
            let body = self.premise()?;
            if !matches!(body, RawPremise::Trans(..) | RawPremise::Neg(..)) {
                return Err(ParseError::new(
                    ParseErrorKind::Syntax,
                    body.loc().0,
                    body.loc().1,
                    "the body of `forall` must be a positive or negative transition premise",
                ));
            }
            return Ok(RawPremise::Forall(elem, set, Box::new(body), loc));
        }
        if self.at_keyword("combine") {
            self.advance();
            let family = self.ident("a family name")?;
            self.keyword("as")?;
            let alias = self.ident("a combined-distribution name")?;
            self.keyword("from")?;
            let (s, a, t, _) = self.transition()?;
            return Ok(RawPremise::Combine(family, alias, s, a, t, loc));
        }
        let start = self.pos;
        let first = self.expr().and_then(|src| self.transition_tail(src, loc));
        match first {
            Ok(p) => Ok(p),
            Err(e1) => {
                let reached = self.pos;
                self.pos = start;
                match self.quantitative() {
                    Ok(q) => Ok(q),
                    Err(e2) => {
                        let e2_reached = self.pos;
                        self.pos = start;
                        Err(if e2_reached > reached { e2 } else { e1 })
                    }
                }
            }
        }
    }

    fn sort(&mut self) -> Result<Sort, ParseError> {
        match self.peek() {
            Tok::Ident(s) if s == "S" => {
                self.advance();
                Ok(Sort::State)
            }
            Tok::Ident(s) if s == "D" => {
                self.advance();
                Ok(Sort::Dist)
            }
            _ => Err(self.unexpected("a sort (`S` or `D`)")),
        }
    }
}

fn rebinding(loc: Loc, message: impl Into<String>) -> ParseError {
    ParseError::new(ParseErrorKind::Rebinding, loc.0, loc.1, message)
}

struct SpecBuilder {
    name: String,
    actions: Vec<String>,
    ops: Vec<OpDecl>,
    rules: Vec<RuleSchema>,
    defs: Vec<Def>,
}

impl SpecBuilder {
    fn spec(&self) -> Spec {
        Spec {
            name: self.name.clone(),
            actions: self.actions.clone(),
            ops: self.ops.clone(),
            rules: self.rules.clone(),
            defs: self.defs.clone(),
        }
    }

    fn check_fresh_name(&self, name: &str, loc: Loc, what: &str) -> Result<(), ParseError> {
        if RESERVED.contains(&name) {
            return Err(ParseError::new(
                ParseErrorKind::Syntax,
                loc.0,
                loc.1,
                format!("`{name}` is reserved and cannot name {what}"),
            ));
        }
        Ok(())
    }
}

pub fn parse_spec_with(text: &str, options: ParseOptions) -> Result<Spec, ParseError> {
    let mut p = Parser::new(text)?;
    p.keyword("spec")?;
    let name = p.ident("the spec name")?;
    let mut b = SpecBuilder {
        name,
        actions: Vec::new(),
        ops: Vec::new(),
        rules: Vec::new(),
        defs: Vec::new(),
    };
    loop {
        let loc = p.loc();
        match p.peek().clone() {
            Tok::Eof => break,
            Tok::Ident(kw) if kw == "actions" => {
                p.advance();
                loop {
                    let aloc = p.loc();
                    let a = p.ident("an action name")?;
                    b.check_fresh_name(&a, aloc, "an action")?;
                    if b.actions.contains(&a) {
                        return Err(rebinding(aloc, format!("action `{a}` declared twice")));
                    }
                    b.actions.push(a);
                    if !p.eat(&Tok::Comma) {
                        break;
                    }
                }
            }
            Tok::Ident(kw) if kw == "op" => {
                p.advance();
                let oloc = p.loc();
                let name = p.ident("an operator name")?;
                b.check_fresh_name(&name, oloc, "an operator")?;
                let family = if p.eat(&Tok::LBracket) {
                    let v = p.ident("an action variable")?;
                    p.expect(&Tok::RBracket, "`]`")?;
                    Some(v)
                } else {
                    None
                };
                p.expect(&Tok::Colon, "`:`")?;
                let mut args = Vec::new();
                while matches!(p.peek(), Tok::Ident(s) if s == "S" || s == "D") {
                    args.push(p.sort()?);
                }
                p.expect(&Tok::Arrow, "`->`")?;
                let rloc = p.loc();
                if p.sort()? != Sort::State {
                    return Err(sort_error(
                        rloc,
                        format!("operator `{name}` must have result sort S; distribution operators are obtained by lifting with `$`"),
                    ));
                }
                if b.ops.iter().any(|o| o.name == name) {
                    return Err(rebinding(oloc, format!("operator `{name}` declared twice")));
                }
                b.ops.push(OpDecl { name, family, args });
            }
            Tok::Ident(kw) if kw == "rule" => {
                p.advance();
                let rule = parse_rule(&mut p, &b, loc, options)?;
                if b.rules.iter().any(|r| r.name == rule.name) {
                    return Err(rebinding(loc, format!("rule `{}` declared twice", rule.name)));
                }
                b.rules.push(rule);
            }
            Tok::Ident(kw) if kw == "def" => {
                p.advance();
                let dloc = p.loc();
                let name = p.ident("a definition name")?;
                b.check_fresh_name(&name, dloc, "a definition")?;
                p.expect(&Tok::Eq, "`=`")?;
                let raw = p.expr()?;
                let spec = b.spec();
                let mut env = Env::new(spec.signature(), &b.defs, false);
                let term = env.state(&raw)?;
                if b.defs.iter().any(|d| d.name == name) || spec.signature().arity(&name).is_some() {
                    return Err(rebinding(dloc, format!("`{name}` is already defined")));
                }
                b.defs.push(Def { name, term });
            }
            _ => return Err(p.unexpected("`actions`, `op`, `rule` or `def`")),
        }
    }
    if b.actions.is_empty() {
        return Err(ParseError::new(ParseErrorKind::Syntax, 1, 1, "the spec declares no actions"));
    }
    let spec = b.spec();
    let sig_names: BTreeSet<String> = spec.signature().ops().map(|(n, _)| n.to_string()).collect();
    if sig_names.len() != spec.ops.iter().map(|o| if o.family.is_some() { spec.actions.len() } else { 1 }).sum::<usize>() {
        return Err(rebinding((1, 1), "an operator family expands to the name of a declared operator"));
    }
    Ok(spec)
}

fn parse_rule(p: &mut Parser, b: &SpecBuilder, loc: Loc, options: ParseOptions) -> Result<RuleSchema, ParseError> {
    let name = p.ident("a rule name")?;
    let action_var = if p.eat(&Tok::LBracket) {
        let v = p.ident("an action variable")?;
        p.expect(&Tok::RBracket, "`]`")?;
        if b.actions.contains(&v) {
            return Err(rebinding(loc, format!("action variable `{v}` clashes with a declared action")));
        }
        Some(v)
    } else {
        None
    };
    p.expect(&Tok::Colon, "`:`")?;
    let mut raws = Vec::new();
    if !p.eat(&Tok::Implies) {
        loop {
            raws.push(p.premise()?);
            if p.eat(&Tok::Implies) {
                break;
            }
            p.expect(&Tok::Comma, "`,` or `=>`")?;
        }
    }
    let (cs, ca, ct, cloc) = p.transition()?;

    let spec = b.spec();
    let mut sig = spec.signature();
    if let Some(v) = &action_var {
        for op in spec.ops.iter().filter(|o| o.family.is_some()) {
            sig = sig.with_op(&format!("{}_{v}", op.name), &op.args);
        }
    }
    let mut env = Env::new(sig, &b.defs, true);
    let check_action = |a: &str, at: Loc| -> Result<String, ParseError> {
        if b.actions.iter().any(|x| x == a) || action_var.as_deref() == Some(a) {
            Ok(a.to_string())
        } else {
            Err(unresolved(at, format!("unknown action `{a}`")))
        }
    };

    let mut premises = Vec::new();
    let mut locs = Vec::new();
    for raw in &raws {
        premises.push(elab_premise(raw, &mut env, &check_action)?);
        locs.push(raw.loc());
    }
    let conclusion = Transition {
        source: env.state(&cs)?,
        action: check_action(&ca, cloc)?,
        target: env.dist(&ct)?,
    };
    let rule = RuleSchema {
        name,
        action_var,
        premises,
        conclusion,
    };
    check_rule_names(&rule, &env, &locs, loc)?;
    if options.check_binders {
        check_binders(&rule, &locs, loc)?;
    }
    Ok(rule)
}

fn elab_premise(
    raw: &RawPremise,
    env: &mut Env<'_>,
    check_action: &impl Fn(&str, Loc) -> Result<String, ParseError>,
) -> Result<Premise, ParseError> {
    Ok(match raw {
        RawPremise::Trans(s, a, t, loc) => Premise::Positive(Transition {
            source: env.state(s)?,
            action: check_action(a, *loc)?,
            target: env.dist(t)?,
        }),
        RawPremise::Neg(s, a, loc) => Premise::Negative {
            source: env.state(s)?,
            action: check_action(a, *loc)?,
        },
        RawPremise::Quant(term, set, cmp, bound, _) => {
            let term = env.dist(term)?;
            let set = match set {
                RawSet::Var(y) => SetSpec::Var(y.clone()),
                RawSet::Explicit(elems) => {
                    SetSpec::Explicit(elems.iter().map(|e| env.state(e)).collect::<Result<_, _>>()?)
                }
            };
            Premise::Quantitative(Quantitative {
                term,
                set,
                cmp: *cmp,
                bound: bound.clone(),
            })
        }
        RawPremise::Forall(elem, set, body, loc) => {
            env.bind_var(elem, Sort::State, *loc)?;
            Premise::Forall {
                elem: elem.clone(),
                set: set.clone(),
                body: Box::new(elab_premise(body, env, check_action)?),
            }
        }
        RawPremise::Combine(family, alias, s, a, t, loc) => {
            env.bind_var(alias, Sort::Dist, *loc)?;
            Premise::Combine {
                family: family.clone(),
                alias: alias.clone(),
                link: Transition {
                    source: env.state(s)?,
                    action: check_action(a, *loc)?,
                    target: env.dist(t)?,
                },
            }
        }
    })
}

/// Name-level well-formedness that holds in every parsing mode.
fn check_rule_names(rule: &RuleSchema, env: &Env<'_>, locs: &[Loc], loc: Loc) -> Result<(), ParseError> {
    let mut measured = BTreeSet::new();
    for q in rule.quantitative_premises() {
        if let SetSpec::Var(y) = &q.set {
            measured.insert(y.clone());
        }
    }
    let mut families = BTreeSet::new();
    for (i, p) in rule.premises.iter().enumerate() {
        match p {
            Premise::Forall { set, .. } if !measured.contains(set) => {
                return Err(unresolved(
                    locs[i],
                    format!("set variable `{set}` is not measured by any quantitative premise"),
                ));
            }
            Premise::Combine { family, .. } => {
                if env.vars.contains_key(family) || measured.contains(family) || !families.insert(family.clone()) {
                    return Err(rebinding(locs[i], format!("family name `{family}` is already in use")));
                }
            }
            _ => {}
        }
    }
    for y in &measured {
        if env.vars.contains_key(y) {
            return Err(sort_error(loc, format!("`{y}` is used both as a set variable and as a term variable")));
        }
    }
    Ok(())
}

/// Binder distinctness: conclusion-source variables, premise targets and
/// set elements must not collide, and per-element targets stay local.
fn check_binders(rule: &RuleSchema, locs: &[Loc], loc: Loc) -> Result<(), ParseError> {
    let src = &rule.conclusion.source;
    let mut occurrences: BTreeMap<String, usize> = BTreeMap::new();
    count_vars_state(src, &mut occurrences);
    if let StateTerm::App(..) = src {
        if let Some((v, _)) = occurrences.iter().find(|(_, n)| **n > 1) {
            return Err(rebinding(loc, format!("variable `{v}` occurs more than once in the conclusion source")));
        }
    }
    let source_vars: BTreeSet<String> = occurrences.keys().cloned().collect();

    // Premise targets, top-level and per element.
    let mut targets: BTreeMap<String, usize> = BTreeMap::new();
    let mut local_targets: BTreeMap<String, usize> = BTreeMap::new();
    for (i, p) in rule.premises.iter().enumerate() {
        let (t, local) = match p {
            Premise::Positive(t) => (t, false),
            Premise::Forall { body, .. } => match body.as_ref() {
                Premise::Positive(t) => (t, true),
                _ => continue,
            },
            _ => continue,
        };
        if let DistTerm::Var(m) = &t.target {
            if source_vars.contains(m) {
                return Err(rebinding(locs[i], format!("premise target `{m}` also occurs in the conclusion source")));
            }
            if targets.contains_key(m) || local_targets.contains_key(m) {
                return Err(rebinding(locs[i], format!("premise target `{m}` is bound twice")));
            }
            if local {
                local_targets.insert(m.clone(), i);
            } else {
                targets.insert(m.clone(), i);
            }
        }
    }
    // Per-element targets must not escape their block.
    for (m, &i) in &local_targets {
        let escapes = rule.premises.iter().enumerate().any(|(j, p)| {
            j != i && {
                let mut vs = BTreeSet::new();
                p.collect_vars(&mut vs);
                vs.iter().any(|v| &v.name == m)
            }
        }) || rule.conclusion.target.dist_vars().contains(m);
        if escapes {
            return Err(rebinding(locs[i], format!("per-element target `{m}` is used outside its `forall` block")));
        }
    }

    // Element variables: fresh, and tied to a single set.
    let mut elem_sets: BTreeMap<&str, &str> = BTreeMap::new();
    for (i, p) in rule.premises.iter().enumerate() {
        if let Premise::Forall { elem, set, .. } = p {
            if source_vars.contains(elem) {
                return Err(rebinding(locs[i], format!("element variable `{elem}` also occurs in the conclusion source")));
            }
            match elem_sets.get(elem.as_str()) {
                Some(s) if *s != set.as_str() => {
                    return Err(rebinding(locs[i], format!("element variable `{elem}` ranges over two different sets")));
                }
                _ => {
                    elem_sets.insert(elem, set);
                }
            }
        }
    }
    let mut explicit_elems: BTreeSet<String> = BTreeSet::new();
    for (i, p) in rule.premises.iter().enumerate() {
        if let Premise::Quantitative(Quantitative { set: SetSpec::Explicit(ts), .. }) = p {
            let mut here = BTreeSet::new();
            for t in ts {
                if let StateTerm::Var(y) = t {
                    here.insert(y.clone());
                }
            }
            for y in &here {
                if source_vars.contains(y) || elem_sets.contains_key(y.as_str()) {
                    return Err(rebinding(locs[i], format!("set element `{y}` clashes with another binder")));
                }
                if explicit_elems.contains(y) {
                    return Err(rebinding(locs[i], format!("set element `{y}` is measured twice")));
                }
            }
            explicit_elems.extend(here);
        }
    }

    // Combined distributions are fresh names.
    for (i, p) in rule.premises.iter().enumerate() {
        if let Premise::Combine { alias, .. } = p {
            if source_vars.contains(alias) || targets.contains_key(alias) || local_targets.contains_key(alias) {
                return Err(rebinding(locs[i], format!("combined distribution `{alias}` clashes with another binder")));
            }
            let twice = rule
                .premises
                .iter()
                .filter(|q| matches!(q, Premise::Combine { alias: a, .. } if a == alias))
                .count();
            if twice > 1 {
                return Err(rebinding(locs[i], format!("combined distribution `{alias}` is bound twice")));
            }
        }
    }
    Ok(())
}

fn count_vars_state(t: &StateTerm, out: &mut BTreeMap<String, usize>) {
    match t {
        StateTerm::Var(x) => *out.entry(x.clone()).or_default() += 1,
        StateTerm::App(_, args) => {
            for a in args {
                match a {
                    Term::State(s) => count_vars_state(s, out),
                    Term::Dist(d) => count_vars_dist(d, out),
                }
            }
        }
    }
}

fn count_vars_dist(d: &DistTerm, out: &mut BTreeMap<String, usize>) {
    match d {
        DistTerm::Var(m) => *out.entry(m.clone()).or_default() += 1,
        DistTerm::Dirac(t) => count_vars_state(t, out),
        DistTerm::Sum(parts) => parts.iter().for_each(|(_, d)| count_vars_dist(d, out)),
        DistTerm::Lift(_, args) => args.iter().for_each(|a| count_vars_dist(a, out)),
    }
}

/// Parses a term against a spec's signature and definitions. Bare names
/// that are not definitions or constants become variables.
pub fn parse_term(text: &str, spec: &Spec) -> Result<Term, ParseError> {
    let mut p = Parser::new(text)?;
    let raw = p.expr()?;
    if p.peek() != &Tok::Eof {
        return Err(p.unexpected("end of term"));
    }
    let mut env = Env::new(spec.signature(), &spec.defs, true);
    env.any(&raw)
}

/// Parses a closed state term or the name of a definition.
pub fn parse_closed_state(text: &str, spec: &Spec) -> Result<StateTerm, ParseError> {
    if let Some(t) = spec.def(text.trim()) {
        return Ok(t.clone());
    }
    match parse_term(text, spec)? {
        Term::State(t) if t.is_closed() => Ok(t),
        Term::State(t) => {
            let names: Vec<String> = t.vars().into_iter().map(|v| v.name).collect();
            Err(ParseError::new(
                ParseErrorKind::UnresolvedName,
                1,
                1,
                format!("unknown name(s) {} in `{text}`", names.join(", ")),
            ))
        }
        Term::Dist(_) => Err(ParseError::new(
            ParseErrorKind::Sort,
            1,
            1,
            format!("`{text}` is a distribution term; a state term is expected"),
        )),
    }
}
