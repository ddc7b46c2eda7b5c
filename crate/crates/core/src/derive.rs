//! Ground transition relations via the three-valued stable model.
//!
//! The relation is computed on the fragment of closed state terms reachable
//! from a set of roots. Exploration grants every negative literal, which yields
//! the possible set after one round; the certain and possible sets are then
//! refined together until both are stable:
//!
//! ```text
//! CT_0 = ∅            PT_0 = everything
//! CT_k = Γ(neg holds in PT_{k-1})   PT_k = Γ(neg holds in CT_{k-1})
//! ```
//!
//! where Γ(oracle) is the least set of transitions closed under the rules
//! when negative premises are answered by the oracle.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::rc::Rc;

use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::dist::{eval_dist, measure, FiniteDistribution};
use crate::lang::{Premise, Quantitative, RuleSchema, SetSpec, Spec, Transition};
use crate::lp::{lp_feasible, Cmp, LpProblem};
use crate::pts::{ModelError, Pts, Step};
use crate::rational::Rational;
use crate::terms::{check_state_sort, match_dist, match_state, DistTerm, Signature, StateTerm, Substitution, TermError, Var};

/// Subsets of a set variable's candidates are enumerated exhaustively only
/// up to this many candidates when bounds point in both directions.
pub const SUBSET_CAP: usize = 12;

/// Upper limit on LP attempts for a single combination block.
const ALIAS_COMBO_CAP: usize = 4096;

pub const DEFAULT_FUEL: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeriveError {
    #[error("fuel must be at least 1")]
    ZeroFuel,
    #[error("root `{0}` is not a closed state term")]
    OpenRoot(String),
    #[error(transparent)]
    Term(#[from] TermError),
}

/// Certain and possible transitions over an explored fragment.
#[derive(Debug, Clone)]
pub struct TransitionTable {
    pub certain: BTreeSet<Transition>,
    pub possible: BTreeSet<Transition>,
    /// In discovery order; roots first.
    pub explored: Vec<StateTerm>,
    pub budget_exhausted: bool,
    /// Least k with (CT_k, PT_k) = (CT_{k+1}, PT_{k+1}).
    pub iterations: usize,
    /// `(|CT_k|, |PT_k|)` for k = 1..=iterations+1.
    pub history: Vec<(usize, usize)>,
    /// Rule shapes the engine could not instantiate, deduplicated.
    pub warnings: Vec<String>,
    sig: Signature,
    actions: Vec<String>,
    bases: Vec<String>,
}

impl TransitionTable {
    pub fn is_complete(&self) -> bool {
        self.certain == self.possible && !self.budget_exhausted
    }

    /// Possible but not certain.
    pub fn unknown(&self) -> impl Iterator<Item = &Transition> {
        self.possible.difference(&self.certain)
    }

    pub fn signature(&self) -> &Signature {
        &self.sig
    }

    pub fn certain_from<'a>(&'a self, source: &'a StateTerm) -> impl Iterator<Item = &'a Transition> + 'a {
        self.certain.iter().filter(move |t| &t.source == source)
    }
}

pub fn is_complete(table: &TransitionTable) -> bool {
    table.is_complete()
}

/// Per explored state: `(action, target)` pairs.
type Rel = Vec<BTreeSet<(String, DistTerm)>>;

#[derive(Clone, Copy)]
enum Neg<'a> {
    /// No negative literal holds (the oracle for PT_0 = everything).
    Never,
    /// `t -/a->` holds iff `t` has no `a`-transition in the relation.
    Against(&'a Rel),
}

#[derive(Clone, Copy)]
struct Ctx<'a> {
    pos: &'a Rel,
    neg: Neg<'a>,
}

/// Premises measuring the same set variable, plus its `forall` blocks.
#[derive(Debug, Clone, Default)]
struct Group {
    measures: Vec<Quantitative>,
    blocks: Vec<(String, Premise)>,
}

impl Group {
    fn all_lower(&self) -> bool {
        self.measures.iter().all(|q| q.cmp.is_lower_bound())
    }

    fn all_upper(&self) -> bool {
        self.measures.iter().all(|q| !q.cmp.is_lower_bound())
    }

    fn blocks_ready(&self, bound: &BTreeSet<Var>) -> bool {
        self.blocks.iter().all(|(elem, body)| {
            premise_inputs(body)
                .into_iter()
                .all(|v| bound.contains(&v) || (v == Var::state(elem)))
        })
    }
}

#[derive(Debug, Clone)]
enum Item {
    Pos(Transition),
    Neg(StateTerm, String),
    Explicit(Quantitative, Vec<StateTerm>),
    Group(Group),
    Alias {
        alias: String,
        link: Transition,
        explicit: Vec<(Quantitative, Vec<StateTerm>)>,
        groups: Vec<Group>,
    },
}

impl Item {
    fn ready(&self, bound: &BTreeSet<Var>) -> bool {
        let covered = |vs: BTreeSet<Var>| vs.iter().all(|v| bound.contains(v));
        match self {
            Item::Pos(t) => covered(t.source.vars()),
            Item::Neg(s, _) => covered(s.vars()),
            Item::Explicit(q, _) => covered(q.term.vars()),
            Item::Group(g) => g.measures.iter().all(|q| covered(q.term.vars())) && g.blocks_ready(bound),
            Item::Alias { link, groups, .. } => {
                covered(link.source.vars()) && groups.iter().all(|g| g.blocks_ready(bound))
            }
        }
    }

    fn binds(&self, bound: &mut BTreeSet<Var>) {
        match self {
            Item::Pos(t) => bound.extend(t.target.vars()),
            Item::Explicit(_, elems) => elems.iter().for_each(|e| bound.extend(e.vars())),
            Item::Alias { alias, explicit, .. } => {
                bound.insert(Var::dist(alias));
                for (_, elems) in explicit {
                    elems.iter().for_each(|e| bound.extend(e.vars()));
                }
            }
            Item::Neg(..) | Item::Group(_) => {}
        }
    }
}

/// Variables a per-element premise reads (its target pattern binds locally).
fn premise_inputs(p: &Premise) -> BTreeSet<Var> {
    match p {
        Premise::Positive(t) => t.source.vars(),
        Premise::Negative { source, .. } => source.vars(),
        other => {
            let mut out = BTreeSet::new();
            other.collect_vars(&mut out);
            out
        }
    }
}

#[derive(Debug, Clone)]
struct Plan {
    rule: RuleSchema,
    items: Vec<Item>,
}

/// Orders a rule's premises so that each is evaluated once its inputs are bound.
fn plan_rule(rule: &RuleSchema) -> Result<Plan, String> {
    let aliases: BTreeMap<&str, &Transition> = rule
        .combine_blocks()
        .into_iter()
        .map(|(_, alias, link)| (alias, link))
        .collect();
    let alias_of = |q: &Quantitative| -> Result<Option<String>, String> {
        let used: Vec<String> = q.term.dist_vars().into_iter().filter(|m| aliases.contains_key(m.as_str())).collect();
        match (used.len(), &q.term) {
            (0, _) => Ok(None),
            (1, DistTerm::Var(m)) => Ok(Some(m.clone())),
            _ => Err(format!("combined distribution used inside the term `{}`", q.term)),
        }
    };

    let mut items = Vec::new();
    let mut groups: BTreeMap<String, Group> = BTreeMap::new();
    let mut alias_explicit: BTreeMap<String, Vec<(Quantitative, Vec<StateTerm>)>> = BTreeMap::new();
    let mut group_alias: BTreeMap<String, BTreeSet<Option<String>>> = BTreeMap::new();
    for p in &rule.premises {
        match p {
            Premise::Positive(t) => items.push(Item::Pos(t.clone())),
            Premise::Negative { source, action } => items.push(Item::Neg(source.clone(), action.clone())),
            Premise::Quantitative(q) => {
                let alias = alias_of(q)?;
                match (&q.set, alias) {
                    (SetSpec::Explicit(elems), None) => items.push(Item::Explicit(q.clone(), elems.clone())),
                    (SetSpec::Explicit(elems), Some(m)) => {
                        alias_explicit.entry(m).or_default().push((q.clone(), elems.clone()))
                    }
                    (SetSpec::Var(y), alias) => {
                        groups.entry(y.clone()).or_default().measures.push(q.clone());
                        group_alias.entry(y.clone()).or_default().insert(alias);
                    }
                }
            }
            Premise::Forall { elem, set, body } => {
                if !matches!(body.as_ref(), Premise::Positive(_) | Premise::Negative { .. }) {
                    return Err(format!("unsupported premise inside `forall {elem} in {set}`"));
                }
                groups.entry(set.clone()).or_default().blocks.push((elem.clone(), (**body).clone()));
            }
            Premise::Combine { .. } => {}
        }
    }
    let mut alias_groups: BTreeMap<String, Vec<Group>> = BTreeMap::new();
    for (y, group) in groups {
        let owners = group_alias.remove(&y).unwrap_or_default();
        if owners.len() != 1 {
            return Err(format!("set `{y}` is measured by more than one distribution kind"));
        }
        match owners.into_iter().next().unwrap() {
            None => items.push(Item::Group(group)),
            Some(m) => alias_groups.entry(m).or_default().push(group),
        }
    }
    for (alias, link) in &aliases {
        items.push(Item::Alias {
            alias: alias.to_string(),
            link: (*link).clone(),
            explicit: alias_explicit.remove(*alias).unwrap_or_default(),
            groups: alias_groups.remove(*alias).unwrap_or_default(),
        });
    }

    let mut bound = rule.conclusion.source.vars();
    let mut ordered = Vec::with_capacity(items.len());
    while !items.is_empty() {
        let Some(k) = items.iter().position(|it| it.ready(&bound)) else {
            let mut open = BTreeSet::new();
            for it in &items {
                if let Item::Pos(t) = it {
                    open.extend(t.source.vars().into_iter().filter(|v| !bound.contains(v)));
                }
            }
            let names: Vec<String> = open.iter().map(|v| v.name.clone()).collect();
            return Err(format!("premise inputs not bound by the conclusion source or earlier premises {names:?}"));
        };
        let it = items.remove(k);
        it.binds(&mut bound);
        ordered.push(it);
    }
    if !rule.conclusion.target.vars().iter().all(|v| bound.contains(v)) {
        return Err("conclusion target has unbound variables".into());
    }
    Ok(Plan {
        rule: rule.clone(),
        items: ordered,
    })
}

fn has_action(rel: &Rel, i: usize, action: &str) -> bool {
    rel.get(i).is_some_and(|ts| ts.iter().any(|(a, _)| a == action))
}

/// Candidate sets over `n` candidates, as index lists.
fn set_choices(n: usize, group: &Group, warnings: &RefCell<BTreeSet<String>>) -> Vec<Vec<usize>> {
    if group.all_lower() {
        return vec![(0..n).collect()];
    }
    let mut out = vec![Vec::new()];
    if group.all_upper() {
        out.extend((0..n).map(|i| vec![i]));
        return out;
    }
    if n > SUBSET_CAP {
        warnings.borrow_mut().insert(format!(
            "{n} candidates exceed the subset cap of {SUBSET_CAP}; only singletons and the full set were tried"
        ));
        out.extend((0..n).map(|i| vec![i]));
        out.push((0..n).collect());
        return out;
    }
    for mask in 1u32..(1 << n) {
        out.push((0..n).filter(|i| mask & (1 << i) != 0).collect());
    }
    out
}

struct Engine {
    sig: Signature,
    plans: Vec<Plan>,
    states: Vec<StateTerm>,
    index: BTreeMap<StateTerm, usize>,
    fuel: usize,
    budget_exhausted: bool,
    demands: RefCell<Vec<StateTerm>>,
    warnings: RefCell<BTreeSet<String>>,
    evals: RefCell<BTreeMap<DistTerm, Option<Rc<FiniteDistribution>>>>,
}

impl Engine {
    fn new(sig: Signature, rules: &[RuleSchema], fuel: usize) -> Engine {
        let mut warnings = BTreeSet::new();
        let mut plans = Vec::new();
        for r in rules {
            match plan_rule(r) {
                Ok(p) => plans.push(p),
                Err(e) => {
                    warnings.insert(format!("rule {} skipped: {e}", r.name));
                }
            }
        }
        Engine {
            sig,
            plans,
            states: Vec::new(),
            index: BTreeMap::new(),
            fuel,
            budget_exhausted: false,
            demands: RefCell::new(Vec::new()),
            warnings: RefCell::new(warnings),
            evals: RefCell::new(BTreeMap::new()),
        }
    }

    fn intern(&mut self, t: StateTerm) -> Option<usize> {
        if let Some(&i) = self.index.get(&t) {
            return Some(i);
        }
        if self.states.len() >= self.fuel {
            self.budget_exhausted = true;
            return None;
        }
        self.index.insert(t.clone(), self.states.len());
        self.states.push(t);
        Some(self.states.len() - 1)
    }

    /// Index of an explored state; unexplored ones are queued for exploration.
    fn lookup(&self, t: &StateTerm) -> Option<usize> {
        let found = self.index.get(t).copied();
        if found.is_none() && t.is_closed() {
            self.demands.borrow_mut().push(t.clone());
        }
        found
    }

    fn eval(&self, theta: &DistTerm) -> Option<Rc<FiniteDistribution>> {
        if let Some(hit) = self.evals.borrow().get(theta) {
            return hit.clone();
        }
        let value = match eval_dist(theta, &self.sig) {
            Ok(pi) => Some(Rc::new(pi)),
            Err(e) => {
                self.warn(format!("cannot evaluate `{theta}`: {e}"));
                None
            }
        };
        self.evals.borrow_mut().insert(theta.clone(), value.clone());
        value
    }

    fn warn(&self, message: String) {
        self.warnings.borrow_mut().insert(message);
    }

    fn neg_holds(&self, ctx: Ctx, source: &StateTerm, action: &str) -> bool {
        match ctx.neg {
            Neg::Never => false,
            Neg::Against(rel) => self.lookup(source).map_or(true, |i| !has_action(rel, i, action)),
        }
    }

    fn targets<'c>(&self, ctx: Ctx<'c>, source: &StateTerm, action: &'c str) -> Vec<&'c DistTerm> {
        match self.lookup(source) {
            Some(i) => ctx.pos.get(i).into_iter().flatten().filter(|(a, _)| a == action).map(|(_, t)| t).collect(),
            None => Vec::new(),
        }
    }

    /// Whether a per-element premise holds with `elem ↦ y`.
    fn block_holds(&self, ctx: Ctx, rho: &Substitution, elem: &str, y: &StateTerm, body: &Premise) -> bool {
        let mut local = rho.clone();
        local.state.insert(elem.to_string(), y.clone());
        match body {
            Premise::Positive(t) => {
                let src = local.state_term(&t.source);
                self.targets(ctx, &src, &t.action)
                    .into_iter()
                    .any(|target| match_dist(&t.target, target, &mut local.clone()))
            }
            Premise::Negative { source, action } => self.neg_holds(ctx, &local.state_term(source), action),
            _ => false,
        }
    }

    fn filter_candidates(
        &self,
        ctx: Ctx,
        rho: &Substitution,
        pool: impl IntoIterator<Item = StateTerm>,
        group: &Group,
    ) -> Vec<StateTerm> {
        pool.into_iter()
            .filter(|y| group.blocks.iter().all(|(elem, body)| self.block_holds(ctx, rho, elem, y, body)))
            .collect()
    }

    /// Every extension of `rho` under which `items[k..]` hold.
    fn run(&self, items: &[Item], k: usize, rho: Substitution, ctx: Ctx, out: &mut Vec<Substitution>) {
        let Some(item) = items.get(k) else {
            out.push(rho);
            return;
        };
        match item {
            Item::Pos(t) => {
                let src = rho.state_term(&t.source);
                for target in self.targets(ctx, &src, &t.action) {
                    let mut r = rho.clone();
                    if match_dist(&t.target, target, &mut r) {
                        self.run(items, k + 1, r, ctx, out);
                    }
                }
            }
            Item::Neg(source, action) => {
                if self.neg_holds(ctx, &rho.state_term(source), action) {
                    self.run(items, k + 1, rho, ctx, out);
                }
            }
            Item::Explicit(q, elems) => {
                let Some(pi) = self.eval(&rho.dist_term(&q.term)) else { return };
                let support: Vec<StateTerm> = pi.support().cloned().collect();
                let mut assignments = Vec::new();
                assign_elems(elems, 0, rho, &support, &mut assignments);
                for r in assignments {
                    let set: Vec<StateTerm> = elems.iter().map(|e| r.state_term(e)).collect();
                    if q.cmp.holds(&measure(&pi, &set), &q.bound) {
                        self.run(items, k + 1, r, ctx, out);
                    }
                }
            }
            Item::Group(group) => {
                let mut dists = Vec::new();
                for q in &group.measures {
                    match self.eval(&rho.dist_term(&q.term)) {
                        Some(pi) => dists.push(pi),
                        None => return,
                    }
                }
                let pool = dists[0]
                    .support()
                    .filter(|s| dists[1..].iter().all(|d| d.contains(s)))
                    .cloned()
                    .collect::<Vec<_>>();
                let cands = self.filter_candidates(ctx, &rho, pool, group);
                let ok = set_choices(cands.len(), group, &self.warnings).into_iter().any(|choice| {
                    let set: Vec<&StateTerm> = choice.iter().map(|&i| &cands[i]).collect();
                    group
                        .measures
                        .iter()
                        .zip(&dists)
                        .all(|(q, pi)| q.cmp.holds(&measure(pi, set.iter().copied()), &q.bound))
                });
                if ok {
                    self.run(items, k + 1, rho, ctx, out);
                }
            }
            Item::Alias {
                alias,
                link,
                explicit,
                groups,
            } => self.run_alias(items, k, rho, ctx, out, alias, link, explicit, groups),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn run_alias(
        &self,
        items: &[Item],
        k: usize,
        rho: Substitution,
        ctx: Ctx,
        out: &mut Vec<Substitution>,
        alias: &str,
        link: &Transition,
        explicit: &[(Quantitative, Vec<StateTerm>)],
        groups: &[Group],
    ) {
        let src = rho.state_term(&link.source);
        let family: Vec<DistTerm> = self.targets(ctx, &src, &link.action).into_iter().cloned().collect();
        let mut dists = Vec::new();
        for theta in &family {
            match self.eval(theta) {
                Some(pi) => dists.push(pi),
                None => return,
            }
        }
        if dists.is_empty() {
            return;
        }
        let union: Vec<StateTerm> = dists
            .iter()
            .flat_map(|d| d.support().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let coeffs = |set: &[&StateTerm]| -> Vec<Rational> { dists.iter().map(|d| measure(d, set.iter().copied())).collect() };

        // Element variables of explicit sets range over the union of supports.
        let mut assignments = vec![rho];
        for (_, elems) in explicit {
            let mut next = Vec::new();
            for r in assignments {
                assign_elems(elems, 0, r, &union, &mut next);
            }
            assignments = next;
        }
        for r in assignments {
            let mut base: Vec<(Vec<Rational>, Cmp, Rational)> = Vec::new();
            for (q, elems) in explicit {
                let set: Vec<StateTerm> = elems.iter().map(|e| r.state_term(e)).collect();
                let refs: Vec<&StateTerm> = set.iter().collect();
                base.push((coeffs(&refs), q.cmp.to_cmp(), q.bound.clone()));
                for e in &set {
                    base.push((coeffs(&[e]), Cmp::Gt, Rational::zero()));
                }
            }
            let per_group: Vec<(Vec<StateTerm>, Vec<Vec<usize>>)> = groups
                .iter()
                .map(|g| {
                    let cands = self.filter_candidates(ctx, &r, union.iter().cloned(), g);
                    let choices = set_choices(cands.len(), g, &self.warnings);
                    (cands, choices)
                })
                .collect();
            let total: usize = per_group.iter().map(|(_, c)| c.len()).product();
            if total > ALIAS_COMBO_CAP {
                self.warn(format!("combination `{alias}`: {total} set choices exceed the cap of {ALIAS_COMBO_CAP}"));
            }
            let mut cursor = vec![0usize; per_group.len()];
            for _ in 0..total.min(ALIAS_COMBO_CAP) {
                let mut lp = LpProblem::new(dists.len());
                for (c, cmp, b) in &base {
                    lp.constrain(c.clone(), *cmp, b.clone());
                }
                for ((g, (cands, choices)), &pick) in groups.iter().zip(&per_group).zip(&cursor) {
                    let choice = &choices[pick];
                    let set: Vec<&StateTerm> = choice.iter().map(|&i| &cands[i]).collect();
                    for q in &g.measures {
                        lp.constrain(coeffs(&set), q.cmp.to_cmp(), q.bound.clone());
                    }
                    if !g.all_lower() {
                        for y in &set {
                            lp.constrain(coeffs(&[y]), Cmp::Gt, Rational::zero());
                        }
                    }
                }
                if let Some(lambda) = lp_feasible(&lp) {
                    let parts: Vec<(Rational, DistTerm)> = lambda
                        .iter()
                        .zip(&family)
                        .filter(|(l, _)| l.is_positive())
                        .map(|(l, t)| (l.clone(), t.clone()))
                        .collect();
                    let mut bound = r.clone();
                    bound.dist.insert(alias.to_string(), DistTerm::sum(parts));
                    self.run(items, k + 1, bound, ctx, out);
                    break;
                }
                for (slot, (_, choices)) in cursor.iter_mut().zip(&per_group) {
                    *slot += 1;
                    if *slot < choices.len() {
                        break;
                    }
                    *slot = 0;
                }
            }
        }
    }

    fn instances(&self, plan: &Plan, goal: &StateTerm, ctx: Ctx) -> Vec<Substitution> {
        let mut rho = Substitution::new();
        if !match_state(&plan.rule.conclusion.source, goal, &mut rho) {
            return Vec::new();
        }
        let mut out = Vec::new();
        self.run(&plan.items, 0, rho, ctx, &mut out);
        out
    }

    fn derive_from(&self, i: usize, ctx: Ctx) -> Vec<(String, DistTerm)> {
        let goal = &self.states[i];
        let mut out = Vec::new();
        for plan in &self.plans {
            for rho in self.instances(plan, goal, ctx) {
                let target = rho.dist_term(&plan.rule.conclusion.target);
                if target.is_closed() {
                    out.push((plan.rule.conclusion.action.clone(), target));
                }
            }
        }
        out
    }

    /// Least relation closed under the rules on the current fragment.
    fn gamma(&self, neg: Neg) -> Rel {
        let mut rel: Rel = vec![BTreeSet::new(); self.states.len()];
        loop {
            let mut changed = false;
            for i in 0..self.states.len() {
                let found = self.derive_from(i, Ctx { pos: &rel, neg });
                for x in found {
                    changed |= rel[i].insert(x);
                }
            }
            if !changed {
                return rel;
            }
        }
    }

    /// Grows the fragment with all negatives granted; returns the final relation.
    fn explore(&mut self) -> Rel {
        let empty: Rel = Vec::new();
        let mut rel: Rel = Vec::new();
        loop {
            rel.resize(self.states.len(), BTreeSet::new());
            let mut fresh = Vec::new();
            for i in 0..self.states.len() {
                let found = self.derive_from(
                    i,
                    Ctx {
                        pos: &rel,
                        neg: Neg::Against(&empty),
                    },
                );
                for x in found {
                    if rel[i].insert(x.clone()) {
                        fresh.push(x.1);
                    }
                }
            }
            let before = self.states.len();
            for theta in fresh.iter() {
                if let Some(pi) = self.eval(theta) {
                    for s in pi.support() {
                        self.intern(s.clone());
                    }
                }
            }
            let demands = std::mem::take(&mut *self.demands.borrow_mut());
            for d in demands {
                self.intern(d);
            }
            if fresh.is_empty() && self.states.len() == before {
                return rel;
            }
        }
    }

    fn to_set(&self, rel: &Rel) -> BTreeSet<Transition> {
        rel.iter()
            .enumerate()
            .flat_map(|(i, ts)| {
                ts.iter().map(move |(a, t)| Transition {
                    source: self.states[i].clone(),
                    action: a.clone(),
                    target: t.clone(),
                })
            })
            .collect()
    }

    fn rel_of(&self, set: &BTreeSet<Transition>) -> Rel {
        let mut rel: Rel = vec![BTreeSet::new(); self.states.len()];
        for t in set {
            if let Some(&i) = self.index.get(&t.source) {
                rel[i].insert((t.action.clone(), t.target.clone()));
            }
        }
        rel
    }
}

/// Matches element patterns one by one against support members.
fn assign_elems(
    elems: &[StateTerm],
    j: usize,
    rho: Substitution,
    support: &[StateTerm],
    out: &mut Vec<Substitution>,
) {
    let Some(e) = elems.get(j) else {
        out.push(rho);
        return;
    };
    for s in support {
        let mut r = rho.clone();
        if match_state(e, s, &mut r) {
            assign_elems(elems, j + 1, r, support, out);
        }
    }
}

/// The stable model restricted to states reachable from `roots`.
pub fn stable_model(spec: &Spec, roots: &[StateTerm], fuel: usize) -> Result<TransitionTable, DeriveError> {
    if fuel == 0 {
        return Err(DeriveError::ZeroFuel);
    }
    let sig = spec.signature();
    for r in roots {
        if !r.is_closed() {
            return Err(DeriveError::OpenRoot(r.to_string()));
        }
        check_state_sort(r, &sig)?;
    }
    let mut engine = Engine::new(sig.clone(), &spec.expanded_rules(), fuel);
    for r in roots {
        engine.intern(r.clone());
    }
    let mut pt = engine.explore();

    let mut ct = engine.gamma(Neg::Never);
    let mut history = vec![(engine.to_set(&ct).len(), engine.to_set(&pt).len())];
    let mut iterations = 1;
    loop {
        let next_ct = engine.gamma(Neg::Against(&pt));
        let next_pt = engine.gamma(Neg::Against(&ct));
        if next_ct == ct && next_pt == pt {
            break;
        }
        ct = next_ct;
        pt = next_pt;
        iterations += 1;
        history.push((engine.to_set(&ct).len(), engine.to_set(&pt).len()));
    }
    let certain = engine.to_set(&ct);
    let possible = engine.to_set(&pt);
    debug_assert!(certain.is_subset(&possible));
    let warnings = engine.warnings.borrow().iter().cloned().collect();
    Ok(TransitionTable {
        certain,
        possible,
        explored: engine.states,
        budget_exhausted: engine.budget_exhausted,
        iterations,
        history,
        warnings,
        sig,
        actions: spec.actions.clone(),
        bases: spec.family_bases().into_iter().map(str::to_string).collect(),
    })
}

/// A closed rule instance: the substitution and the conclusion it yields.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Instance {
    pub rule: String,
    pub subst: Substitution,
    pub conclusion: Transition,
}

/// Closed instances of `rule` with conclusion source `goal`: positive premises
/// are read from the certain set, negative ones against the possible set.
pub fn instantiate(rule: &RuleSchema, goal: &StateTerm, table: &TransitionTable) -> Vec<Instance> {
    let rules = match &rule.action_var {
        None => vec![rule.clone()],
        Some(var) => {
            let bases: Vec<&str> = table.bases.iter().map(String::as_str).collect();
            table.actions.iter().map(|a| rule.instantiate_action(var, a, &bases)).collect()
        }
    };
    let mut engine = Engine::new(table.sig.clone(), &rules, usize::MAX);
    for s in &table.explored {
        engine.intern(s.clone());
    }
    let ct = engine.rel_of(&table.certain);
    let pt = engine.rel_of(&table.possible);
    let ctx = Ctx {
        pos: &ct,
        neg: Neg::Against(&pt),
    };
    let mut out = BTreeSet::new();
    for plan in &engine.plans {
        for rho in engine.instances(plan, goal, ctx) {
            let target = rho.dist_term(&plan.rule.conclusion.target);
            if !target.is_closed() {
                continue;
            }
            let conclusion = Transition {
                source: goal.clone(),
                action: plan.rule.conclusion.action.clone(),
                target,
            };
            out.insert(Instance {
                rule: plan.rule.name.clone(),
                subst: rho,
                conclusion,
            });
        }
    }
    out.into_iter().collect()
}

/// The concrete system of a complete table; states are labelled by their terms.
pub fn build_pts(table: &TransitionTable) -> Result<Pts, ModelError> {
    if !table.is_complete() {
        return Err(ModelError::IncompleteModel {
            unknown: table.unknown().count(),
        });
    }
    let mut pts = Pts::new();
    for s in &table.explored {
        pts.add_state(&s.to_string());
    }
    for t in &table.certain {
        let pi = eval_dist(&t.target, &table.sig).map_err(|e| ModelError::BadStep(e.to_string()))?;
        let mut dist = Vec::new();
        for (s, p) in pi.iter() {
            dist.push((pts.add_state(&s.to_string()), p.clone()));
        }
        let src = pts.add_state(&t.source.to_string());
        pts.add_step(src, Step::new(&t.action, dist)?);
    }
    Ok(pts)
}
