//! Exact two-phase primal simplex with Bland's pivoting rule.
//!
//! [`LpModel`] is the working interface: variables are either free or
//! non-negative, rows are `expr ≤ 0` or `expr = 0`, and the objective is
//! maximized. [`lp_solve`] and [`entails`] are thin wrappers for the
//! polyhedron-shaped queries.
//!
//! Strict atoms: [`entails`] and [`maximize`] work over the topological
//! closure of the antecedent, so a `true` from them is sound for the original
//! polyhedron (it quantifies over a superset). A strict consequent is compared
//! non-strictly there, which can accept a boundary point where the strict
//! version fails; callers that need the exact strict answer use
//! [`entails_exact`], which decides the mixed strict/non-strict system exactly.

use std::collections::BTreeMap;
use std::time::Instant;

use crate::linexpr::{LinConstraint, LinExpr, Polyhedron, Rel, Var};
use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("time budget exhausted")]
pub struct Cancelled;

/// Wall-clock budget threaded through long-running solves.
#[derive(Debug, Clone, Copy, Default)]
pub struct Budget {
    pub deadline: Option<Instant>,
}

impl Budget {
    pub fn unlimited() -> Self {
        Budget { deadline: None }
    }

    pub fn until(deadline: Instant) -> Self {
        Budget {
            deadline: Some(deadline),
        }
    }

    pub fn check(&self) -> Result<(), Cancelled> {
        match self.deadline {
            Some(d) if Instant::now() >= d => Err(Cancelled),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Le,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Row {
    pub expr: LinExpr,
    pub kind: RowKind,
}

/// Maximize `objective` subject to `rows`; variables carry their own sign.
#[derive(Debug, Clone, Default)]
pub struct LpModel {
    names: Vec<String>,
    nonneg: Vec<bool>,
    rows: Vec<Row>,
    objective: LinExpr,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Solution {
    Infeasible,
    /// `point + t·ray` stays feasible for every `t ≥ 0` and the objective
    /// grows by `slope·t`.
    Unbounded {
        point: Vec<Rational>,
        ray: Vec<Rational>,
        slope: Rational,
    },
    /// `duals[i]` belongs to row `i`: non-negative for `≤` rows, free for `=`.
    Optimal {
        value: Rational,
        values: Vec<Rational>,
        duals: Vec<Rational>,
    },
}

impl LpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, nonneg: bool) -> Var {
        self.names.push(name.into());
        self.nonneg.push(nonneg);
        self.names.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn is_nonneg(&self, v: Var) -> bool {
        self.nonneg[v]
    }

    pub fn var_index(&self, name: &str) -> Option<Var> {
        self.names.iter().position(|n| n == name)
    }

    /// `expr ≤ 0`
    pub fn add_le(&mut self, expr: LinExpr) {
        self.push_row(expr, RowKind::Le);
    }

    /// `expr = 0`
    pub fn add_eq(&mut self, expr: LinExpr) {
        self.push_row(expr, RowKind::Eq);
    }

    fn push_row(&mut self, expr: LinExpr, kind: RowKind) {
        debug_assert!(expr.vars().all(|v| v < self.names.len()));
        self.rows.push(Row { expr, kind });
    }

    pub fn set_objective(&mut self, objective: LinExpr) {
        self.objective = objective;
    }

    pub fn objective(&self) -> &LinExpr {
        &self.objective
    }

    /// Whether `values` satisfies every row and sign restriction exactly.
    pub fn is_feasible_point(&self, values: &[Rational]) -> bool {
        self.nonneg
            .iter()
            .zip(values)
            .all(|(nn, x)| !nn || !x.is_negative())
            && self.rows.iter().all(|r| {
                let v = r.expr.eval(values);
                match r.kind {
                    RowKind::Le => !v.is_positive(),
                    RowKind::Eq => v.is_zero(),
                }
            })
    }

    pub fn solve(&self, budget: &Budget) -> Result<Solution, Cancelled> {
        Tableau::build(self).run(self, budget)
    }
}

/// Column bookkeeping for the standard form `max c·z, Az = b, z ≥ 0, b ≥ 0`.
#[derive(Debug, Clone, Copy)]
enum Col {
    Pos,
    Neg,
    Slack,
    Artificial,
}

struct Tableau {
    cols: Vec<Col>,
    /// Column where each model variable's positive part lives.
    var_col: Vec<usize>,
    /// `m` rows of `ncols + 1` entries; the last entry is the right-hand side.
    t: Vec<Vec<Rational>>,
    basis: Vec<usize>,
    /// Identity column of each row at construction time, and whether the row
    /// was negated to make its right-hand side non-negative.
    ident: Vec<usize>,
    negated: Vec<bool>,
    first_artificial: usize,
    cost: Vec<Rational>,
}

impl Tableau {
    fn build(model: &LpModel) -> Tableau {
        let mut cols = Vec::new();
        let mut var_col = Vec::with_capacity(model.num_vars());
        for v in 0..model.num_vars() {
            var_col.push(cols.len());
            cols.push(Col::Pos);
            if !model.nonneg[v] {
                cols.push(Col::Neg);
            }
        }
        let m = model.rows.len();
        let mut negated = vec![false; m];
        let mut slack_col = vec![None; m];
        for (i, r) in model.rows.iter().enumerate() {
            if r.kind == RowKind::Le {
                slack_col[i] = Some(cols.len());
                cols.push(Col::Slack);
            }
            // b = -constant; negate when b < 0
            negated[i] = r.expr.constant_term().is_positive();
        }
        let first_artificial = cols.len();
        let mut ident = vec![0; m];
        for i in 0..m {
            match slack_col[i] {
                Some(s) if !negated[i] => ident[i] = s,
                _ => {
                    ident[i] = cols.len();
                    cols.push(Col::Artificial);
                }
            }
        }
        let n = cols.len();
        let mut t = Vec::with_capacity(m);
        for (i, r) in model.rows.iter().enumerate() {
            let mut row = vec![Rational::zero(); n + 1];
            let sign = if negated[i] {
                -Rational::one()
            } else {
                Rational::one()
            };
            for (v, c) in r.expr.terms() {
                let j = var_col[v];
                let a = c * &sign;
                if !model.nonneg[v] {
                    row[j + 1] = -&a;
                }
                row[j] = a;
            }
            if let Some(s) = slack_col[i] {
                row[s] = sign.clone();
            }
            if ident[i] >= first_artificial {
                row[ident[i]] = Rational::one();
            }
            row[n] = -(r.expr.constant_term() * &sign);
            t.push(row);
        }
        let mut cost = vec![Rational::zero(); n];
        for (v, c) in model.objective.terms() {
            let j = var_col[v];
            cost[j] = c.clone();
            if !model.nonneg[v] {
                cost[j + 1] = -c;
            }
        }
        Tableau {
            cols,
            var_col,
            t,
            basis: ident.clone(),
            ident,
            negated,
            first_artificial,
            cost,
        }
    }

    fn ncols(&self) -> usize {
        self.cols.len()
    }

    fn pivot(&mut self, r: usize, c: usize, obj: &mut [Rational]) {
        let n = self.ncols();
        let p = self.t[r][c].recip();
        if !p.is_one() {
            for x in self.t[r].iter_mut() {
                if !x.is_zero() {
                    *x = &*x * &p;
                }
            }
        }
        let nz: Vec<usize> = (0..=n).filter(|&j| !self.t[r][j].is_zero()).collect();
        let prow = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for &j in &nz {
                row[j] = &row[j] - &(&f * &prow[j]);
            }
        }
        if !obj[c].is_zero() {
            let f = obj[c].clone();
            for &j in &nz {
                obj[j] = &obj[j] - &(&f * &prow[j]);
            }
        }
        self.basis[r] = c;
    }

    /// Bland iterations on `obj` (reduced costs, last entry = objective value).
    /// Returns `Some(col)` when column `col` proves unboundedness.
    fn iterate(
        &mut self,
        obj: &mut [Rational],
        budget: &Budget,
    ) -> Result<Option<usize>, Cancelled> {
        let mut steps = 0u64;
        loop {
            steps += 1;
            if steps % 32 == 0 {
                budget.check()?;
            }
            let Some(c) = (0..self.first_artificial).find(|&j| obj[j].is_negative()) else {
                return Ok(None);
            };
            let n = self.ncols();
            let mut best: Option<(usize, Rational)> = None;
            for (i, row) in self.t.iter().enumerate() {
                if !row[c].is_positive() {
                    continue;
                }
                let ratio = &row[n] / &row[c];
                let better = match &best {
                    None => true,
                    Some((bi, br)) => {
                        ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi])
                    }
                };
                if better {
                    best = Some((i, ratio));
                }
            }
            match best {
                None => return Ok(Some(c)),
                Some((r, _)) => self.pivot(r, c, obj),
            }
        }
    }

    fn run(mut self, model: &LpModel, budget: &Budget) -> Result<Solution, Cancelled> {
        let n = self.ncols();
        let m = self.t.len();
        // Phase 1: maximize -Σ artificials.
        let art_rows: Vec<usize> = (0..m)
            .filter(|&i| self.basis[i] >= self.first_artificial)
            .collect();
        if !art_rows.is_empty() {
            let mut obj = vec![Rational::zero(); n + 1];
            for &i in &art_rows {
                for j in 0..self.first_artificial {
                    obj[j] -= &self.t[i][j];
                }
                obj[n] -= &self.t[i][n];
            }
            self.iterate(&mut obj, budget)?;
            if obj[n].is_negative() {
                return Ok(Solution::Infeasible);
            }
            // Drive zero-level artificials out of the basis where possible.
            for r in 0..m {
                if self.basis[r] < self.first_artificial {
                    continue;
                }
                if let Some(c) = (0..self.first_artificial).find(|&j| !self.t[r][j].is_zero()) {
                    self.pivot(r, c, &mut obj);
                }
            }
        }
        // Phase 2.
        let mut obj = vec![Rational::zero(); n + 1];
        for j in 0..n {
            if !self.cost[j].is_zero() {
                obj[j] = -&self.cost[j];
            }
        }
        for r in 0..m {
            let cb = self.cost.get(self.basis[r]).cloned().unwrap_or_default();
            if cb.is_zero() {
                continue;
            }
            for j in 0..=n {
                if !self.t[r][j].is_zero() {
                    obj[j] += &(&cb * &self.t[r][j]);
                }
            }
        }
        let unbounded = self.iterate(&mut obj, budget)?;
        let point = self.primal(model);
        if let Some(c) = unbounded {
            let mut dir = vec![Rational::zero(); n];
            dir[c] = Rational::one();
            for r in 0..m {
                if !self.t[r][c].is_zero() {
                    dir[self.basis[r]] = -&self.t[r][c];
                }
            }
            let ray = self.to_model(model, &dir);
            let slope = -&obj[c];
            return Ok(Solution::Unbounded { point, ray, slope });
        }
        let value = &obj[n] + model.objective.constant_term();
        let duals = (0..m)
            .map(|i| {
                let y = obj[self.ident[i]].clone();
                if self.negated[i] {
                    -y
                } else {
                    y
                }
            })
            .collect();
        Ok(Solution::Optimal {
            value,
            values: point,
            duals,
        })
    }

    fn primal(&self, model: &LpModel) -> Vec<Rational> {
        let n = self.ncols();
        let mut z = vec![Rational::zero(); n];
        for (r, &b) in self.basis.iter().enumerate() {
            z[b] = self.t[r][n].clone();
        }
        self.to_model(model, &z)
    }

    fn to_model(&self, model: &LpModel, z: &[Rational]) -> Vec<Rational> {
        (0..model.num_vars())
            .map(|v| {
                let j = self.var_col[v];
                debug_assert!(matches!(self.cols[j], Col::Pos));
                if model.nonneg[v] {
                    z[j].clone()
                } else {
                    debug_assert!(matches!(self.cols[j + 1], Col::Neg));
                    &z[j] - &z[j + 1]
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Max,
    Min,
}

/// Optimize a linear objective over a non-strict polyhedron; all variables free.
#[derive(Debug, Clone)]
pub struct LpProblem {
    pub objective: LinExpr,
    pub direction: Direction,
    pub constraints: Polyhedron,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpResult {
    Infeasible,
    Unbounded,
    Optimal {
        value: Rational,
        assignment: BTreeMap<Var, Rational>,
    },
}

fn num_vars_of(p: &Polyhedron, e: &LinExpr) -> usize {
    p.constraints
        .iter()
        .flat_map(|c| c.expr.vars())
        .chain(e.vars())
        .max()
        .map_or(0, |m| m + 1)
}

fn model_for(p: &Polyhedron, objective: &LinExpr, nvars: usize) -> LpModel {
    let mut m = LpModel::new();
    for v in 0..nvars {
        m.add_var(format!("x{v}"), false);
    }
    for c in &p.constraints {
        m.add_le(c.expr.clone());
    }
    m.set_objective(objective.clone());
    m
}

/// Solve `p`. Strict atoms must not occur (they are a caller error).
pub fn lp_solve(p: &LpProblem) -> LpResult {
    assert!(
        !p.constraints.has_strict(),
        "lp_solve takes non-strict constraints only"
    );
    let nvars = num_vars_of(&p.constraints, &p.objective);
    let obj = match p.direction {
        Direction::Max => p.objective.clone(),
        Direction::Min => -&p.objective,
    };
    let model = model_for(&p.constraints, &obj, nvars);
    let mentioned: Vec<Var> = {
        let mut vs: Vec<Var> = p
            .constraints
            .constraints
            .iter()
            .flat_map(|c| c.expr.vars())
            .chain(p.objective.vars())
            .collect();
        vs.sort_unstable();
        vs.dedup();
        vs
    };
    match model.solve(&Budget::unlimited()).expect("unlimited budget") {
        Solution::Infeasible => LpResult::Infeasible,
        Solution::Unbounded { .. } => LpResult::Unbounded,
        Solution::Optimal { value, values, .. } => {
            let value = match p.direction {
                Direction::Max => value,
                Direction::Min => -value,
            };
            let assignment = mentioned
                .into_iter()
                .map(|v| (v, values[v].clone()))
                .collect();
            LpResult::Optimal { value, assignment }
        }
    }
}

/// Outcome of maximizing an expression over the closure of a polyhedron.
#[derive(Debug, Clone, PartialEq)]
pub enum MaxResult {
    Empty,
    Unbounded {
        point: Vec<Rational>,
        ray: Vec<Rational>,
        slope: Rational,
    },
    Optimal {
        value: Rational,
        point: Vec<Rational>,
    },
}

/// `max expr` over `closure(p)`, with points sized to `nvars`.
pub fn maximize(
    p: &Polyhedron,
    expr: &LinExpr,
    nvars: usize,
    budget: &Budget,
) -> Result<MaxResult, Cancelled> {
    let nvars = nvars.max(num_vars_of(p, expr));
    let model = model_for(&p.closure(), expr, nvars);
    Ok(match model.solve(budget)? {
        Solution::Infeasible => MaxResult::Empty,
        Solution::Unbounded { point, ray, slope } => MaxResult::Unbounded { point, ray, slope },
        Solution::Optimal { value, values, .. } => MaxResult::Optimal {
            value,
            point: values,
        },
    })
}

/// Whether `closure(p)` is nonempty.
pub fn is_satisfiable(p: &Polyhedron, budget: &Budget) -> Result<bool, Cancelled> {
    Ok(!matches!(
        maximize(p, &LinExpr::zero(), 0, budget)?,
        MaxResult::Empty
    ))
}

/// `∀x ∈ closure(P). c.expr(x) ≤ 0`; a strict `c` is compared non-strictly.
pub fn entails(p: &Polyhedron, c: &LinConstraint) -> bool {
    match maximize(p, &c.expr, 0, &Budget::unlimited()).expect("unlimited budget") {
        MaxResult::Empty => true,
        MaxResult::Unbounded { .. } => false,
        MaxResult::Optimal { value, .. } => !value.is_positive(),
    }
}

/// Exact decision of `P ⇒ c` honoring strict atoms on both sides. Returns a
/// point of `P ∧ ¬c` when the implication fails.
pub fn entails_exact(
    p: &Polyhedron,
    c: &LinConstraint,
    nvars: usize,
    budget: &Budget,
) -> Result<Option<Vec<Rational>>, Cancelled> {
    let mut q = p.clone();
    q.constraints.push(c.negate());
    find_point(&q, nvars, budget)
}

/// A point of `q` (strict atoms respected), or `None` when `q` is empty.
///
/// Strict atoms `e < 0` become `e + δ ≤ 0` and `δ` is maximized up to 1; the
/// system has a solution iff the optimum is positive.
pub fn find_point(
    q: &Polyhedron,
    nvars: usize,
    budget: &Budget,
) -> Result<Option<Vec<Rational>>, Cancelled> {
    let nvars = nvars.max(num_vars_of(q, &LinExpr::zero()));
    let mut m = LpModel::new();
    for v in 0..nvars {
        m.add_var(format!("x{v}"), false);
    }
    let delta = m.add_var("delta", false);
    for atom in &q.constraints {
        let mut e = atom.expr.clone();
        if atom.rel == Rel::Lt {
            e.add_term(delta, &Rational::one());
        }
        m.add_le(e);
    }
    m.add_le(LinExpr::from_parts(
        [(delta, Rational::one())],
        -Rational::one(),
    ));
    m.set_objective(LinExpr::var(delta));
    Ok(match m.solve(budget)? {
        Solution::Optimal {
            value, mut values, ..
        } => {
            let strict = q.has_strict();
            if strict && !value.is_positive() {
                None
            } else {
                values.truncate(nvars);
                Some(values)
            }
        }
        Solution::Infeasible => None,
        Solution::Unbounded { .. } => unreachable!("delta is bounded above"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;
    use proptest::prelude::*;

    fn x(v: Var) -> LinExpr {
        LinExpr::var(v)
    }

    fn le(e: LinExpr, k: i64) -> LinConstraint {
        // e ≤ k
        let mut e = e;
        e.add_constant(&q(-k, 1));
        LinConstraint::le(e)
    }

    fn ge(e: LinExpr, k: i64) -> LinConstraint {
        le(-&e, -k)
    }

    #[test]
    fn box_optimum_at_corner() {
        let p = LpProblem {
            objective: &x(0) + &x(1),
            direction: Direction::Max,
            constraints: Polyhedron::new(vec![le(x(0), 1), le(x(1), 1), ge(x(0), 0), ge(x(1), 0)]),
        };
        let expect: BTreeMap<Var, Rational> = [(0, q(1, 1)), (1, q(1, 1))].into_iter().collect();
        assert_eq!(
            lp_solve(&p),
            LpResult::Optimal {
                value: q(2, 1),
                assignment: expect
            }
        );
    }

    #[test]
    fn contradictory_bounds() {
        let p = LpProblem {
            objective: x(0),
            direction: Direction::Max,
            constraints: Polyhedron::new(vec![le(x(0), 0), ge(x(0), 1)]),
        };
        assert_eq!(lp_solve(&p), LpResult::Infeasible);
    }

    #[test]
    fn open_ray() {
        let p = LpProblem {
            objective: x(0),
            direction: Direction::Max,
            constraints: Polyhedron::new(vec![ge(x(0), 0)]),
        };
        assert_eq!(lp_solve(&p), LpResult::Unbounded);
    }

    #[test]
    fn minimize_direction() {
        let p = LpProblem {
            objective: &x(0) - &x(1),
            direction: Direction::Min,
            constraints: Polyhedron::new(vec![le(x(0), 3), ge(x(0), -2), le(x(1), 4), ge(x(1), 1)]),
        };
        match lp_solve(&p) {
            LpResult::Optimal { value, .. } => assert_eq!(value, q(-6, 1)),
            r => panic!("{r:?}"),
        }
    }

    #[test]
    fn entailment_examples() {
        let p = Polyhedron::new(vec![ge(x(0), 0), le(x(0), 5)]);
        assert!(entails(&p, &le(x(0), 7)));
        assert!(!entails(&p, &le(x(0), 3)));
        let empty = Polyhedron::new(vec![le(x(0), 0), ge(x(0), 1)]);
        assert!(entails(&empty, &le(x(1), -100)));
    }

    #[test]
    fn exact_entailment_with_strict_atoms() {
        // x < 5 ⇒ x < 5 holds exactly, but only non-strictly over the closure
        let p = Polyhedron::new(vec![LinConstraint::lt(LinExpr::from_parts(
            [(0, q(1, 1))],
            q(-5, 1),
        ))]);
        let c = LinConstraint::lt(LinExpr::from_parts([(0, q(1, 1))], q(-5, 1)));
        assert_eq!(
            entails_exact(&p, &c, 1, &Budget::unlimited()).unwrap(),
            None
        );
        // x < 5 does not imply x < 4
        let c = LinConstraint::lt(LinExpr::from_parts([(0, q(1, 1))], q(-4, 1)));
        let w = entails_exact(&p, &c, 1, &Budget::unlimited())
            .unwrap()
            .unwrap();
        assert!(p.contains(&w) && !c.holds_at(&w));
        // x < 0 and x > 0 is empty although its closure is not
        let q2 = Polyhedron::new(vec![LinConstraint::lt(x(0)), LinConstraint::lt(-&x(0))]);
        assert_eq!(find_point(&q2, 1, &Budget::unlimited()).unwrap(), None);
    }

    #[test]
    fn equality_rows_and_duals() {
        // max 3a + 2b s.t. a + b = 4, a ≤ 3, a,b ≥ 0 → a=3, b=1, value 11
        let mut m = LpModel::new();
        let a = m.add_var("a", true);
        let b = m.add_var("b", true);
        m.add_eq(LinExpr::from_parts([(a, q(1, 1)), (b, q(1, 1))], q(-4, 1)));
        m.add_le(LinExpr::from_parts([(a, q(1, 1))], q(-3, 1)));
        m.set_objective(LinExpr::from_parts(
            [(a, q(3, 1)), (b, q(2, 1))],
            Rational::zero(),
        ));
        match m.solve(&Budget::unlimited()).unwrap() {
            Solution::Optimal {
                value,
                values,
                duals,
            } => {
                assert_eq!(value, q(11, 1));
                assert_eq!(values, vec![q(3, 1), q(1, 1)]);
                assert_eq!(duals, vec![q(2, 1), q(1, 1)]);
            }
            s => panic!("{s:?}"),
        }
    }

    #[test]
    fn unbounded_ray_is_improving() {
        let mut m = LpModel::new();
        let a = m.add_var("a", false);
        let b = m.add_var("b", false);
        m.add_le(LinExpr::from_parts([(a, q(1, 1)), (b, q(-1, 1))], q(-2, 1)));
        m.set_objective(LinExpr::from_parts(
            [(a, q(1, 1)), (b, q(1, 1))],
            Rational::zero(),
        ));
        match m.solve(&Budget::unlimited()).unwrap() {
            Solution::Unbounded { point, ray, slope } => {
                assert!(slope.is_positive());
                let far: Vec<Rational> = point
                    .iter()
                    .zip(&ray)
                    .map(|(p, r)| p + &(r * &q(1000, 1)))
                    .collect();
                assert!(m.is_feasible_point(&far));
                let gain = m.objective().eval(&far) - m.objective().eval(&point);
                assert_eq!(gain, &slope * &q(1000, 1));
            }
            s => panic!("{s:?}"),
        }
    }

    fn small_expr(nv: usize) -> impl Strategy<Value = LinExpr> {
        (prop::collection::vec(-4i64..=4, nv), -6i64..=6).prop_map(|(cs, k)| {
            LinExpr::from_parts(
                cs.into_iter().enumerate().map(|(v, c)| (v, q(c, 1))),
                q(k, 1),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        /// Optimal points are feasible, duals certify the optimum, and
        /// entailment agrees with the optimum's sign.
        #[test]
        fn optimality_certificates(rows in prop::collection::vec(small_expr(3), 1..7), obj in small_expr(3)) {
            let mut m = LpModel::new();
            for v in 0..3 { m.add_var(format!("x{v}"), v == 0); }
            for r in &rows { m.add_le(r.clone()); }
            m.set_objective(obj.clone());
            let s1 = m.solve(&Budget::unlimited()).unwrap();
            let s2 = m.solve(&Budget::unlimited()).unwrap();
            prop_assert_eq!(&s1, &s2);
            match s1 {
                Solution::Optimal { value, values, duals } => {
                    prop_assert!(m.is_feasible_point(&values));
                    prop_assert_eq!(obj.eval(&values), value.clone());
                    prop_assert!(duals.iter().all(|y| !y.is_negative()));
                    // Σ y_i a_i = c on free columns, ≥ c on the non-negative one;
                    // Σ y_i b_i + c0 = value with b_i = -const_i.
                    for v in 0..3 {
                        let s: Rational = rows.iter().zip(&duals).map(|(r, y)| &r.coeff(v) * y).sum();
                        if v == 0 { prop_assert!(s >= obj.coeff(v)); } else { prop_assert_eq!(s, obj.coeff(v)); }
                    }
                    let db: Rational = rows.iter().zip(&duals).map(|(r, y)| -(r.constant_term() * y)).sum();
                    prop_assert_eq!(db + obj.constant_term(), value);
                }
                Solution::Unbounded { point, ray, slope } => {
                    prop_assert!(slope.is_positive());
                    let far: Vec<Rational> = point.iter().zip(&ray).map(|(p, r)| p + &(r * &q(7, 1))).collect();
                    prop_assert!(m.is_feasible_point(&far));
                }
                Solution::Infeasible => {}
            }
        }

        #[test]
        fn entails_matches_lp(rows in prop::collection::vec(small_expr(2), 1..6), c in small_expr(2)) {
            let p = Polyhedron { constraints: rows.into_iter().map(LinConstraint::le).collect() };
            let c = LinConstraint::le(c);
            let via_lp = match lp_solve(&LpProblem { objective: c.expr.clone(), direction: Direction::Max, constraints: p.clone() }) {
                LpResult::Infeasible => true,
                LpResult::Unbounded => false,
                LpResult::Optimal { value, .. } => !value.is_positive(),
            };
            prop_assert_eq!(entails(&p, &c), via_lp);
            let exact = entails_exact(&p, &c, 2, &Budget::unlimited()).unwrap();
            prop_assert_eq!(exact.is_none(), via_lp);
            if let Some(w) = exact {
                prop_assert!(p.contains(&w) && !c.holds_at(&w));
            }
        }
    }
}
