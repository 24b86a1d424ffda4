//! Affine expressions, linear constraints and polyhedra over exact rationals.
//!
//! Variables are plain indices; their meaning (program variable, template
//! unknown, Farkas multiplier) is owned by whoever allocates them.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::rational::Rational;

pub type Var = usize;

/// `constant + Σ coeffs[v]·v`, never storing a zero coefficient.
#[derive(Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LinExpr {
    coeffs: BTreeMap<Var, Rational>,
    constant: Rational,
}

impl LinExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Rational) -> Self {
        LinExpr {
            coeffs: BTreeMap::new(),
            constant: c,
        }
    }

    pub fn var(v: Var) -> Self {
        Self::term(v, Rational::one())
    }

    pub fn term(v: Var, c: Rational) -> Self {
        let mut e = Self::zero();
        e.add_term(v, &c);
        e
    }

    pub fn from_parts<I: IntoIterator<Item = (Var, Rational)>>(
        terms: I,
        constant: Rational,
    ) -> Self {
        let mut e = Self::constant(constant);
        for (v, c) in terms {
            e.add_term(v, &c);
        }
        e
    }

    pub fn coeff(&self, v: Var) -> Rational {
        self.coeffs.get(&v).cloned().unwrap_or_default()
    }

    pub fn constant_term(&self) -> &Rational {
        &self.constant
    }

    pub fn terms(&self) -> impl Iterator<Item = (Var, &Rational)> {
        self.coeffs.iter().map(|(v, c)| (*v, c))
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.coeffs.keys().copied()
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty() && self.constant.is_zero()
    }

    pub fn mentions(&self, v: Var) -> bool {
        self.coeffs.contains_key(&v)
    }

    pub fn add_term(&mut self, v: Var, c: &Rational) {
        if c.is_zero() {
            return;
        }
        let slot = self.coeffs.entry(v).or_default();
        *slot += c;
        if slot.is_zero() {
            self.coeffs.remove(&v);
        }
    }

    pub fn add_constant(&mut self, c: &Rational) {
        self.constant += c;
    }

    pub fn set_constant(&mut self, c: Rational) {
        self.constant = c;
    }

    /// `self += k·other`
    pub fn add_scaled(&mut self, other: &LinExpr, k: &Rational) {
        if k.is_zero() {
            return;
        }
        for (v, c) in &other.coeffs {
            self.add_term(*v, &(c * k));
        }
        self.constant += &(&other.constant * k);
    }

    pub fn scale(&self, k: &Rational) -> LinExpr {
        if k.is_zero() {
            return LinExpr::zero();
        }
        LinExpr {
            coeffs: self.coeffs.iter().map(|(v, c)| (*v, c * k)).collect(),
            constant: &self.constant * k,
        }
    }

    /// Replace `v` by `by`.
    pub fn substitute(&self, v: Var, by: &LinExpr) -> LinExpr {
        match self.coeffs.get(&v) {
            None => self.clone(),
            Some(c) => {
                let c = c.clone();
                let mut out = self.clone();
                out.coeffs.remove(&v);
                out.add_scaled(by, &c);
                out
            }
        }
    }

    /// Evaluate with `val(v)` for every variable.
    pub fn eval_with<F: Fn(Var) -> Rational>(&self, val: F) -> Rational {
        let mut acc = self.constant.clone();
        for (v, c) in &self.coeffs {
            acc += &(c * &val(*v));
        }
        acc
    }

    /// Evaluate against a dense point; missing entries count as zero.
    pub fn eval(&self, point: &[Rational]) -> Rational {
        self.eval_with(|v| point.get(v).cloned().unwrap_or_default())
    }

    pub fn eval_f64(&self, point: &[f64]) -> f64 {
        let mut acc = self.constant.to_f64();
        for (v, c) in &self.coeffs {
            acc += c.to_f64() * point.get(*v).copied().unwrap_or(0.0);
        }
        acc
    }

    /// Rename variables through `f`.
    pub fn map_vars<F: Fn(Var) -> Var>(&self, f: F) -> LinExpr {
        let mut out = LinExpr::constant(self.constant.clone());
        for (v, c) in &self.coeffs {
            out.add_term(f(*v), c);
        }
        out
    }

    pub fn display<'a>(&'a self, names: &'a [String]) -> impl fmt::Display + 'a {
        Named { expr: self, names }
    }
}

struct Named<'a> {
    expr: &'a LinExpr,
    names: &'a [String],
}

impl fmt::Display for Named<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (v, c) in &self.expr.coeffs {
            let name = self
                .names
                .get(*v)
                .cloned()
                .unwrap_or_else(|| format!("v{v}"));
            let neg = c.is_negative();
            let mag = c.abs();
            if first {
                if neg {
                    f.write_str("-")?;
                }
            } else {
                f.write_str(if neg { " - " } else { " + " })?;
            }
            if mag.is_one() {
                write!(f, "{name}")?;
            } else {
                write!(f, "{mag}*{name}")?;
            }
            first = false;
        }
        let k = &self.expr.constant;
        if first {
            write!(f, "{k}")
        } else if k.is_zero() {
            Ok(())
        } else if k.is_negative() {
            write!(f, " - {}", k.abs())
        } else {
            write!(f, " + {k}")
        }
    }
}

impl fmt::Debug for LinExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.display(&[]))
    }
}

impl std::ops::Add<&LinExpr> for &LinExpr {
    type Output = LinExpr;
    fn add(self, rhs: &LinExpr) -> LinExpr {
        let mut out = self.clone();
        out.add_scaled(rhs, &Rational::one());
        out
    }
}

impl std::ops::Sub<&LinExpr> for &LinExpr {
    type Output = LinExpr;
    fn sub(self, rhs: &LinExpr) -> LinExpr {
        let mut out = self.clone();
        out.add_scaled(rhs, &-Rational::one());
        out
    }
}

impl std::ops::Neg for &LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self.scale(&-Rational::one())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rel {
    /// `expr ≤ 0`
    Le,
    /// `expr < 0`
    Lt,
}

/// `expr ≤ 0` or `expr < 0`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LinConstraint {
    pub expr: LinExpr,
    pub rel: Rel,
}

impl LinConstraint {
    pub fn le(expr: LinExpr) -> Self {
        LinConstraint { expr, rel: Rel::Le }
    }

    pub fn lt(expr: LinExpr) -> Self {
        LinConstraint { expr, rel: Rel::Lt }
    }

    /// `lhs ≤ rhs`
    pub fn le_of(lhs: &LinExpr, rhs: &LinExpr) -> Self {
        Self::le(lhs - rhs)
    }

    /// `lhs < rhs`
    pub fn lt_of(lhs: &LinExpr, rhs: &LinExpr) -> Self {
        Self::lt(lhs - rhs)
    }

    pub fn is_strict(&self) -> bool {
        self.rel == Rel::Lt
    }

    pub fn closure(&self) -> LinConstraint {
        LinConstraint::le(self.expr.clone())
    }

    /// The complement: `¬(e ≤ 0)` is `-e < 0`, `¬(e < 0)` is `-e ≤ 0`.
    pub fn negate(&self) -> LinConstraint {
        match self.rel {
            Rel::Le => LinConstraint::lt(-&self.expr),
            Rel::Lt => LinConstraint::le(-&self.expr),
        }
    }

    pub fn holds_at(&self, point: &[Rational]) -> bool {
        let v = self.expr.eval(point);
        match self.rel {
            Rel::Le => !v.is_positive(),
            Rel::Lt => v.is_negative(),
        }
    }

    pub fn holds_at_f64(&self, point: &[f64]) -> bool {
        let v = self.expr.eval_f64(point);
        match self.rel {
            Rel::Le => v <= 0.0,
            Rel::Lt => v < 0.0,
        }
    }

    pub fn substitute(&self, v: Var, by: &LinExpr) -> LinConstraint {
        LinConstraint {
            expr: self.expr.substitute(v, by),
            rel: self.rel,
        }
    }

    /// Trivially true (`c ≤ 0` / `c < 0` with a constant that satisfies it).
    pub fn is_tautology(&self) -> bool {
        self.expr.is_constant() && self.holds_at(&[])
    }

    pub fn is_contradiction(&self) -> bool {
        self.expr.is_constant() && !self.holds_at(&[])
    }

    /// Scale to a canonical form so syntactically different multiples compare
    /// equal: the first nonzero coefficient gets magnitude one.
    pub fn normalized(&self) -> LinConstraint {
        match self.expr.terms().next() {
            Some((_, c)) => {
                let k = c.abs().recip();
                LinConstraint {
                    expr: self.expr.scale(&k),
                    rel: self.rel,
                }
            }
            None => self.clone(),
        }
    }

    pub fn display<'a>(&'a self, names: &'a [String]) -> impl fmt::Display + 'a {
        ConstraintNamed { c: self, names }
    }
}

struct ConstraintNamed<'a> {
    c: &'a LinConstraint,
    names: &'a [String],
}

impl fmt::Display for ConstraintNamed<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Print as `lhs op rhs` with the constant moved right.
        let mut lhs = self.c.expr.clone();
        let k = lhs.constant_term().clone();
        lhs.set_constant(Rational::zero());
        let op = match self.c.rel {
            Rel::Le => "<=",
            Rel::Lt => "<",
        };
        if lhs.is_constant() {
            return write!(f, "{} {op} 0", k);
        }
        let shown = lhs.display(self.names).to_string();
        write!(f, "{shown} {op} {}", -k)
    }
}

impl fmt::Debug for LinConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.display(&[]))
    }
}

/// A conjunction of linear constraints. The empty conjunction is `true`.
#[derive(Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Polyhedron {
    pub constraints: Vec<LinConstraint>,
}

impl Polyhedron {
    pub fn top() -> Self {
        Self::default()
    }

    pub fn new(constraints: Vec<LinConstraint>) -> Self {
        let mut p = Polyhedron::top();
        for c in constraints {
            p.push(c);
        }
        p
    }

    /// Add a constraint, dropping tautologies and exact duplicates.
    pub fn push(&mut self, c: LinConstraint) {
        if c.is_tautology() {
            return;
        }
        let n = c.normalized();
        if self.constraints.iter().any(|d| d.normalized() == n) {
            return;
        }
        self.constraints.push(c);
    }

    pub fn and(&self, other: &Polyhedron) -> Polyhedron {
        let mut p = self.clone();
        for c in &other.constraints {
            p.push(c.clone());
        }
        p
    }

    pub fn is_top(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn has_strict(&self) -> bool {
        self.constraints.iter().any(|c| c.is_strict())
    }

    /// Topological closure: every strict atom relaxed to non-strict.
    pub fn closure(&self) -> Polyhedron {
        Polyhedron::new(self.constraints.iter().map(|c| c.closure()).collect())
    }

    pub fn contains(&self, point: &[Rational]) -> bool {
        self.constraints.iter().all(|c| c.holds_at(point))
    }

    pub fn contains_f64(&self, point: &[f64]) -> bool {
        self.constraints.iter().all(|c| c.holds_at_f64(point))
    }

    pub fn substitute(&self, v: Var, by: &LinExpr) -> Polyhedron {
        Polyhedron::new(
            self.constraints
                .iter()
                .map(|c| c.substitute(v, by))
                .collect(),
        )
    }

    pub fn mentions(&self, v: Var) -> bool {
        self.constraints.iter().any(|c| c.expr.mentions(v))
    }

    /// Drop every atom mentioning `v`. Sound as an over-approximation of
    /// the post-state after `v` is overwritten.
    pub fn forget(&self, v: Var) -> Polyhedron {
        Polyhedron {
            constraints: self
                .constraints
                .iter()
                .filter(|c| !c.expr.mentions(v))
                .cloned()
                .collect(),
        }
    }

    pub fn display<'a>(&'a self, names: &'a [String]) -> impl fmt::Display + 'a {
        PolyNamed { p: self, names }
    }
}

struct PolyNamed<'a> {
    p: &'a Polyhedron,
    names: &'a [String],
}

impl fmt::Display for PolyNamed<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.p.constraints.is_empty() {
            return f.write_str("true");
        }
        for (i, c) in self.p.constraints.iter().enumerate() {
            if i > 0 {
                f.write_str(" and ")?;
            }
            write!(f, "{}", c.display(self.names))?;
        }
        Ok(())
    }
}

impl fmt::Debug for Polyhedron {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.display(&[]))
    }
}
