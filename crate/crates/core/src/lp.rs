//! Exact rational linear programming: a dense two-phase simplex with Bland's
//! rule, and feasibility over the probability simplex with strict rows.

use num_traits::{One, Signed, Zero};

use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

/// `coeffs · x  rel  rhs`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub coeffs: Vec<Rational>,
    pub rel: Relation,
    pub rhs: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpOutcome {
    Optimal { value: Rational, point: Vec<Rational> },
    Infeasible,
    Unbounded,
}

struct Tableau {
    rows: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
    basis: Vec<usize>,
    columns: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let factor = self.rows[row][col].clone();
        for v in self.rows[row].iter_mut() {
            *v /= &factor;
        }
        self.rhs[row] /= &factor;
        let pivot_row = self.rows[row].clone();
        let pivot_rhs = self.rhs[row].clone();
        for i in 0..self.rows.len() {
            if i == row || self.rows[i][col].is_zero() {
                continue;
            }
            let k = self.rows[i][col].clone();
            for (v, p) in self.rows[i].iter_mut().zip(&pivot_row) {
                if !p.is_zero() {
                    *v -= &k * p;
                }
            }
            self.rhs[i] -= &k * &pivot_rhs;
        }
        self.basis[row] = col;
    }

    fn value(&self, cost: &[Rational]) -> Rational {
        self.basis
            .iter()
            .zip(&self.rhs)
            .map(|(&b, r)| &cost[b] * r)
            .sum()
    }

    /// Maximizes `cost · x` from the current basic feasible solution.
    /// Returns `false` when the objective is unbounded.
    fn optimize(&mut self, cost: &[Rational], allowed: &[bool]) -> bool {
        loop {
            let mut entering = None;
            for j in 0..self.columns {
                if !allowed[j] || self.basis.contains(&j) {
                    continue;
                }
                let mut reduced = cost[j].clone();
                for (i, &b) in self.basis.iter().enumerate() {
                    if !cost[b].is_zero() && !self.rows[i][j].is_zero() {
                        reduced -= &cost[b] * &self.rows[i][j];
                    }
                }
                if reduced.is_positive() {
                    entering = Some(j);
                    break;
                }
            }
            let Some(col) = entering else { return true };
            let mut leaving: Option<(usize, Rational)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][col];
                if !a.is_positive() {
                    continue;
                }
                let ratio = &self.rhs[i] / a;
                let better = match &leaving {
                    None => true,
                    Some((l, best)) => ratio < *best || (ratio == *best && self.basis[i] < self.basis[*l]),
                };
                if better {
                    leaving = Some((i, ratio));
                }
            }
            let Some((row, _)) = leaving else { return false };
            self.pivot(row, col);
        }
    }
}

/// Maximizes `objective · x` subject to `rows` and `x ≥ 0`.
pub fn maximize(num_vars: usize, objective: &[Rational], rows: &[Row]) -> LpOutcome {
    assert_eq!(objective.len(), num_vars, "objective length must equal the variable count");
    let m = rows.len();
    let mut slack_count = 0;
    let mut artificial_count = 0;
    let mut normalized = Vec::with_capacity(m);
    for row in rows {
        assert_eq!(row.coeffs.len(), num_vars, "row length must equal the variable count");
        let (coeffs, rel, rhs) = if row.rhs.is_negative() {
            let flipped = match row.rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
            (row.coeffs.iter().map(|c| -c).collect::<Vec<_>>(), flipped, -row.rhs.clone())
        } else {
            (row.coeffs.clone(), row.rel, row.rhs.clone())
        };
        match rel {
            Relation::Le => slack_count += 1,
            Relation::Ge => {
                slack_count += 1;
                artificial_count += 1;
            }
            Relation::Eq => artificial_count += 1,
        }
        normalized.push((coeffs, rel, rhs));
    }
    let columns = num_vars + slack_count + artificial_count;
    let first_artificial = num_vars + slack_count;
    let mut tab = Tableau {
        rows: Vec::with_capacity(m),
        rhs: Vec::with_capacity(m),
        basis: Vec::with_capacity(m),
        columns,
    };
    let (mut next_slack, mut next_art) = (num_vars, first_artificial);
    for (coeffs, rel, rhs) in normalized {
        let mut r = coeffs;
        r.resize(columns, Rational::zero());
        match rel {
            Relation::Le => {
                r[next_slack] = Rational::one();
                tab.basis.push(next_slack);
                next_slack += 1;
            }
            Relation::Ge => {
                r[next_slack] = -Rational::one();
                next_slack += 1;
                r[next_art] = Rational::one();
                tab.basis.push(next_art);
                next_art += 1;
            }
            Relation::Eq => {
                r[next_art] = Rational::one();
                tab.basis.push(next_art);
                next_art += 1;
            }
        }
        tab.rows.push(r);
        tab.rhs.push(rhs);
    }

    let all = vec![true; columns];
    if artificial_count > 0 {
        let phase1: Vec<Rational> = (0..columns)
            .map(|j| if j >= first_artificial { -Rational::one() } else { Rational::zero() })
            .collect();
        tab.optimize(&phase1, &all);
        if tab.value(&phase1).is_negative() {
            return LpOutcome::Infeasible;
        }
        // Drive zero-valued artificials out of the basis; drop redundant rows.
        let mut i = 0;
        while i < tab.rows.len() {
            if tab.basis[i] >= first_artificial {
                match (0..first_artificial).find(|&j| !tab.rows[i][j].is_zero()) {
                    Some(j) => {
                        tab.pivot(i, j);
                        i += 1;
                    }
                    None => {
                        tab.rows.remove(i);
                        tab.rhs.remove(i);
                        tab.basis.remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }
    }
    let allowed: Vec<bool> = (0..columns).map(|j| j < first_artificial).collect();
    let mut cost = objective.to_vec();
    cost.resize(columns, Rational::zero());
    if !tab.optimize(&cost, &allowed) {
        return LpOutcome::Unbounded;
    }
    let mut point = vec![Rational::zero(); num_vars];
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < num_vars {
            point[b] = tab.rhs[i].clone();
        }
    }
    LpOutcome::Optimal {
        value: tab.value(&cost),
        point,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Ge,
    Gt,
    Eq,
    Le,
    Lt,
}

impl Cmp {
    pub fn holds(self, lhs: &Rational, rhs: &Rational) -> bool {
        match self {
            Cmp::Ge => lhs >= rhs,
            Cmp::Gt => lhs > rhs,
            Cmp::Eq => lhs == rhs,
            Cmp::Le => lhs <= rhs,
            Cmp::Lt => lhs < rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearConstraint {
    pub coeffs: Vec<Rational>,
    pub cmp: Cmp,
    pub rhs: Rational,
}

/// Feasibility of `λ ≥ 0, Σλ = 1` together with the listed constraints.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LpProblem {
    pub num_vars: usize,
    pub constraints: Vec<LinearConstraint>,
}

impl LpProblem {
    pub fn new(num_vars: usize) -> Self {
        LpProblem {
            num_vars,
            constraints: Vec::new(),
        }
    }

    pub fn constrain(&mut self, coeffs: Vec<Rational>, cmp: Cmp, rhs: Rational) -> &mut Self {
        assert_eq!(coeffs.len(), self.num_vars, "constraint length must equal the variable count");
        self.constraints.push(LinearConstraint { coeffs, cmp, rhs });
        self
    }

    /// True when `lambda` lies on the simplex and satisfies every constraint.
    pub fn satisfied_by(&self, lambda: &[Rational]) -> bool {
        lambda.len() == self.num_vars
            && lambda.iter().all(|l| !l.is_negative())
            && lambda.iter().sum::<Rational>().is_one()
            && self.constraints.iter().all(|c| {
                let lhs: Rational = c.coeffs.iter().zip(lambda).map(|(a, l)| a * l).sum();
                c.cmp.holds(&lhs, &c.rhs)
            })
    }
}

/// Decides feasibility exactly. Strict rows get a shared slack `t ≤ 1` that is
/// maximized; the problem is feasible iff the optimum has `t > 0`.
pub fn lp_feasible(problem: &LpProblem) -> Option<Vec<Rational>> {
    let n = problem.num_vars;
    if n == 0 {
        return None;
    }
    let strict = problem
        .constraints
        .iter()
        .any(|c| matches!(c.cmp, Cmp::Gt | Cmp::Lt));
    let width = if strict { n + 1 } else { n };
    let pad = |coeffs: &[Rational], t: Rational| {
        let mut v = coeffs.to_vec();
        if strict {
            v.push(t);
        }
        v
    };
    let mut rows = vec![Row {
        coeffs: pad(&vec![Rational::one(); n], Rational::zero()),
        rel: Relation::Eq,
        rhs: Rational::one(),
    }];
    for c in &problem.constraints {
        let (t, rel) = match c.cmp {
            Cmp::Ge => (Rational::zero(), Relation::Ge),
            Cmp::Gt => (-Rational::one(), Relation::Ge),
            Cmp::Eq => (Rational::zero(), Relation::Eq),
            Cmp::Le => (Rational::zero(), Relation::Le),
            Cmp::Lt => (Rational::one(), Relation::Le),
        };
        rows.push(Row {
            coeffs: pad(&c.coeffs, t),
            rel,
            rhs: c.rhs.clone(),
        });
    }
    let mut objective = vec![Rational::zero(); width];
    if strict {
        let mut bound = vec![Rational::zero(); width];
        bound[n] = Rational::one();
        rows.push(Row {
            coeffs: bound,
            rel: Relation::Le,
            rhs: Rational::one(),
        });
        objective[n] = Rational::one();
    }
    match maximize(width, &objective, &rows) {
        LpOutcome::Optimal { value, mut point } => {
            if strict && !value.is_positive() {
                return None;
            }
            point.truncate(n);
            Some(point)
        }
        LpOutcome::Infeasible | LpOutcome::Unbounded => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};

    #[test]
    fn two_half_constraints_are_feasible() {
        let mut p = LpProblem::new(2);
        p.constrain(vec![int(1), int(0)], Cmp::Ge, rat(1, 2));
        p.constrain(vec![int(0), int(1)], Cmp::Ge, rat(1, 2));
        let w = lp_feasible(&p).expect("feasible");
        assert_eq!(w, vec![rat(1, 2), rat(1, 2)]);
    }

    #[test]
    fn strict_excess_is_infeasible() {
        let mut p = LpProblem::new(1);
        p.constrain(vec![int(1)], Cmp::Eq, int(1));
        p.constrain(vec![int(1)], Cmp::Gt, int(1));
        assert_eq!(lp_feasible(&p), None);
    }

    #[test]
    fn strict_rows_need_interior_points() {
        let mut p = LpProblem::new(2);
        p.constrain(vec![int(1), int(0)], Cmp::Gt, rat(1, 2));
        p.constrain(vec![int(0), int(1)], Cmp::Gt, rat(1, 3));
        let w = lp_feasible(&p).expect("feasible");
        assert!(p.satisfied_by(&w));
        let mut q = LpProblem::new(2);
        q.constrain(vec![int(1), int(0)], Cmp::Gt, rat(1, 2));
        q.constrain(vec![int(0), int(1)], Cmp::Gt, rat(1, 2));
        assert_eq!(lp_feasible(&q), None);
    }

    #[test]
    fn no_variables_is_infeasible() {
        assert_eq!(lp_feasible(&LpProblem::new(0)), None);
    }

    #[test]
    fn maximize_textbook_problem() {
        // max 3x + 5y, x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18  → 36 at (2, 6)
        let rows = vec![
            Row { coeffs: vec![int(1), int(0)], rel: Relation::Le, rhs: int(4) },
            Row { coeffs: vec![int(0), int(2)], rel: Relation::Le, rhs: int(12) },
            Row { coeffs: vec![int(3), int(2)], rel: Relation::Le, rhs: int(18) },
        ];
        match maximize(2, &[int(3), int(5)], &rows) {
            LpOutcome::Optimal { value, point } => {
                assert_eq!(value, int(36));
                assert_eq!(point, vec![int(2), int(6)]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn maximize_detects_unbounded_and_infeasible() {
        let rows = vec![Row { coeffs: vec![int(1), int(-1)], rel: Relation::Le, rhs: int(1) }];
        assert_eq!(maximize(2, &[int(0), int(1)], &rows), LpOutcome::Unbounded);
        let rows = vec![
            Row { coeffs: vec![int(1)], rel: Relation::Ge, rhs: int(2) },
            Row { coeffs: vec![int(1)], rel: Relation::Le, rhs: int(1) },
        ];
        assert_eq!(maximize(1, &[int(1)], &rows), LpOutcome::Infeasible);
    }

    #[test]
    fn redundant_equalities_are_dropped() {
        let rows = vec![
            Row { coeffs: vec![int(1), int(1)], rel: Relation::Eq, rhs: int(1) },
            Row { coeffs: vec![int(2), int(2)], rel: Relation::Eq, rhs: int(2) },
        ];
        match maximize(2, &[int(1), int(0)], &rows) {
            LpOutcome::Optimal { value, .. } => assert_eq!(value, int(1)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_right_hand_sides() {
        // -x ≥ -3 with max x → 3
        let rows = vec![Row { coeffs: vec![int(-1)], rel: Relation::Ge, rhs: int(-3) }];
        match maximize(1, &[int(1)], &rows) {
            LpOutcome::Optimal { value, .. } => assert_eq!(value, int(3)),
            other => panic!("unexpected {other:?}"),
        }
    }
}
