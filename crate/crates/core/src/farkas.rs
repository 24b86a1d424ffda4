//! Farkas-lemma encoding of `∀x ∈ P. consequent(x) ≤ 0` into LP rows.
//!
//! For a nonempty `P = {x | Ax ≤ b}`, `∀x ∈ P. c·x ≤ d` holds iff there are
//! multipliers `λ ≥ 0` with `λᵀA = c` and `λᵀb ≤ d`. The consequent's
//! coefficients may be affine in template unknowns; the resulting rows stay
//! linear because `A` and `b` are numeric.
//!
//! Strict antecedent atoms are relaxed to their closure before encoding. The
//! implication is then proved for a superset of `P`, so any certificate found
//! this way is sound for `P`; some valid certificates may be missed.

use std::collections::{BTreeMap, BTreeSet};

use crate::linexpr::{LinExpr, Polyhedron, Var};
use crate::lp::{self, Budget, Cancelled, LpModel};
use crate::rational::Rational;

/// `Σ coeffs[v]·x_v + constant` where each coefficient is itself an affine
/// expression over LP unknowns. Program variables index `coeffs`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TemplateExpr {
    pub coeffs: BTreeMap<Var, LinExpr>,
    pub constant: LinExpr,
}

impl TemplateExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    /// A fully numeric expression lifted to template form.
    pub fn from_numeric(e: &LinExpr) -> Self {
        let mut t = TemplateExpr::zero();
        for (v, c) in e.terms() {
            t.coeffs.insert(v, LinExpr::constant(c.clone()));
        }
        t.constant = LinExpr::constant(e.constant_term().clone());
        t
    }

    pub fn coeff(&self, v: Var) -> LinExpr {
        self.coeffs.get(&v).cloned().unwrap_or_default()
    }

    fn add_coeff(&mut self, v: Var, e: &LinExpr, k: &Rational) {
        if k.is_zero() || e.is_zero() {
            return;
        }
        let slot = self.coeffs.entry(v).or_default();
        slot.add_scaled(e, k);
        if slot.is_zero() {
            self.coeffs.remove(&v);
        }
    }

    /// `self += k·other`
    pub fn add_scaled(&mut self, other: &TemplateExpr, k: &Rational) {
        for (v, e) in &other.coeffs {
            self.add_coeff(*v, e, k);
        }
        self.constant.add_scaled(&other.constant, k);
    }

    /// `self += k` for an expression over LP unknowns.
    pub fn add_unknown_constant(&mut self, e: &LinExpr, k: &Rational) {
        self.constant.add_scaled(e, k);
    }

    /// Replace program variable `v` by the numeric expression `by`.
    pub fn substitute(&self, v: Var, by: &LinExpr) -> TemplateExpr {
        let Some(cv) = self.coeffs.get(&v) else {
            return self.clone();
        };
        let cv = cv.clone();
        let mut out = self.clone();
        out.coeffs.remove(&v);
        for (w, b) in by.terms() {
            out.add_coeff(w, &cv, b);
        }
        out.constant.add_scaled(&cv, by.constant_term());
        out
    }

    /// Numeric expression obtained by fixing the LP unknowns.
    pub fn instantiate(&self, values: &[Rational]) -> LinExpr {
        let mut e = LinExpr::constant(self.constant.eval(values));
        for (v, c) in &self.coeffs {
            e.add_term(*v, &c.eval(values));
        }
        e
    }

    pub fn program_vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.coeffs.keys().copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FarkasError {
    #[error("antecedent polyhedron is empty; the implication is vacuous")]
    UnsatisfiableAntecedent,
    #[error(transparent)]
    Cancelled(#[from] Cancelled),
}

/// Record of one emitted implication, kept for auditing and tracing.
#[derive(Debug, Clone)]
pub struct FarkasEncoding {
    pub name: String,
    /// The closed antecedent actually encoded.
    pub antecedent: Polyhedron,
    pub consequent: TemplateExpr,
    pub multipliers: Vec<Var>,
}

impl FarkasEncoding {
    /// Check the multiplier certificate exactly under an LP solution.
    pub fn certifies(&self, values: &[Rational]) -> bool {
        let lambda: Vec<&Rational> = self.multipliers.iter().map(|&m| &values[m]).collect();
        if lambda.iter().any(|l| l.is_negative()) {
            return false;
        }
        let c = self.consequent.instantiate(values);
        let rows = &self.antecedent.constraints;
        let vars: BTreeSet<Var> = rows
            .iter()
            .flat_map(|r| r.expr.vars())
            .chain(c.vars())
            .collect();
        for v in vars {
            let s: Rational = rows
                .iter()
                .zip(&lambda)
                .map(|(r, l)| &r.expr.coeff(v) * *l)
                .sum();
            if s != c.coeff(v) {
                return false;
            }
        }
        let lb: Rational = rows
            .iter()
            .zip(&lambda)
            .map(|(r, l)| -(r.expr.constant_term() * *l))
            .sum();
        !(lb + c.constant_term()).is_positive()
    }
}

/// Emit rows into `model` forcing `∀x ∈ closure(P). consequent(x) ≤ 0`.
///
/// Multipliers are named `λ_<transition>_<constraint>_<row>`. The antecedent
/// is checked for satisfiability first; an empty one is reported rather than
/// encoded.
pub fn farkas_encode(
    model: &mut LpModel,
    p: &Polyhedron,
    consequent: &TemplateExpr,
    transition: &str,
    constraint: usize,
    budget: &Budget,
) -> Result<FarkasEncoding, FarkasError> {
    if !lp::is_satisfiable(p, budget)? {
        return Err(FarkasError::UnsatisfiableAntecedent);
    }
    Ok(encode_nonempty(
        model, p, consequent, transition, constraint,
    ))
}

/// [`farkas_encode`] without the emptiness check, for callers that cache it.
pub fn encode_nonempty(
    model: &mut LpModel,
    p: &Polyhedron,
    consequent: &TemplateExpr,
    transition: &str,
    constraint: usize,
) -> FarkasEncoding {
    let closed = p.closure();
    let rows = &closed.constraints;
    let multipliers: Vec<Var> = (0..rows.len())
        .map(|i| model.add_var(format!("λ_{transition}_{constraint}_{i}"), true))
        .collect();
    let vars: BTreeSet<Var> = rows
        .iter()
        .flat_map(|r| r.expr.vars())
        .chain(consequent.program_vars())
        .collect();
    for v in vars {
        // Σ λ_i A_{i,v} − C_v = 0
        let mut e = -&consequent.coeff(v);
        for (r, &l) in rows.iter().zip(&multipliers) {
            e.add_term(l, &r.expr.coeff(v));
        }
        model.add_eq(e);
    }
    // Σ λ_i b_i + C_0 ≤ 0 with b_i = −(row constant)
    let mut e = consequent.constant.clone();
    for (r, &l) in rows.iter().zip(&multipliers) {
        e.add_term(l, &-r.expr.constant_term());
    }
    model.add_le(e);
    FarkasEncoding {
        name: format!("{transition}_{constraint}"),
        antecedent: closed,
        consequent: consequent.clone(),
        multipliers,
    }
}
