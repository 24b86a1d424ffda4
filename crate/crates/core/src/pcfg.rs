//! Probabilistic control-flow graphs and symbolic pre-expectation.
//!
//! A transition leaves one location, optionally updates one variable, and
//! picks its target location from a finite distribution. The update is
//! independent of the branch taken, so `if prob(p)` is one transition with
//! two branches and the assignments of each arm sit on the following
//! transitions.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::farkas::TemplateExpr;
use crate::linexpr::{LinConstraint, LinExpr, Polyhedron, Var};
use crate::lp::{self, Budget, Cancelled};
use crate::rational::Rational;

pub type LocId = usize;
pub type TransId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Distribution {
    Dirac(Rational),
    Uniform(Rational, Rational),
    Normal(Rational, Rational),
}

impl Distribution {
    pub fn mean(&self) -> Rational {
        match self {
            Distribution::Dirac(v) => v.clone(),
            Distribution::Uniform(lo, hi) => (lo + hi) / Rational::from_int(2),
            Distribution::Normal(m, _) => m.clone(),
        }
    }

    pub fn bounded_support(&self) -> bool {
        !matches!(self, Distribution::Normal(..))
    }

    /// Closed hull of the support, when bounded.
    pub fn support(&self) -> Option<(Rational, Rational)> {
        match self {
            Distribution::Dirac(v) => Some((v.clone(), v.clone())),
            Distribution::Uniform(lo, hi) => Some((lo.clone(), hi.clone())),
            Distribution::Normal(..) => None,
        }
    }
}

/// Right-hand side of an assignment to one variable.
///
/// `Sample` and `Ndet` carry an affine offset so `x := x + Unif[1,2]` is a
/// single update; a bare `x := sample(d)` has a zero offset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum UpdateElem {
    Det(LinExpr),
    Sample {
        base: LinExpr,
        dist: Distribution,
    },
    Ndet {
        base: LinExpr,
        lo: Rational,
        hi: Rational,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Update {
    pub var: Var,
    pub elem: UpdateElem,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Branch {
    pub prob: Rational,
    pub target: LocId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub id: TransId,
    pub source: LocId,
    pub branches: Vec<Branch>,
    pub update: Option<Update>,
    pub guard: Polyhedron,
    /// When set, the first branch is taken with probability `2^(-var)` and the
    /// second with the complement. Such transitions are outside the linear
    /// fragment: the simulator runs them, synthesis and checking refuse them.
    pub pow2_prob: Option<Var>,
}

impl Transition {
    pub fn name(&self) -> String {
        format!("t{}", self.id)
    }

    pub fn is_probabilistic(&self) -> bool {
        self.branches.len() > 1
    }

    pub fn targets(&self) -> impl Iterator<Item = LocId> + '_ {
        self.branches.iter().map(|b| b.target)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Location {
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pcfg {
    pub vars: Vec<String>,
    pub locations: Vec<Location>,
    pub transitions: Vec<Transition>,
    pub l_in: LocId,
    pub l_out: LocId,
    pub t_out: TransId,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PcfgError {
    #[error("transition {0}: branch probabilities must be positive and sum to 1")]
    BadProbabilities(String),
    #[error("transition {0}: empty or reversed interval")]
    BadInterval(String),
    #[error("transition {0}: normal distribution needs a positive standard deviation")]
    BadNormal(String),
    #[error("the exit location must have exactly one transition, an update-free self-loop with guard true")]
    BadExit,
    #[error("transition {0} refers to an unknown location or variable")]
    Dangling(String),
    #[error("transition {0}: no expression for target location {1}")]
    UndefinedTarget(String, String),
    #[error("transition {0} has a state-dependent probability and is outside the linear fragment")]
    NonLinear(String),
}

impl Pcfg {
    pub fn loc_name(&self, l: LocId) -> &str {
        &self.locations[l].name
    }

    /// Accepts `l3` and `ℓ3` spellings.
    pub fn loc_by_name(&self, name: &str) -> Option<LocId> {
        let norm = name.trim().replace('ℓ', "l");
        self.locations.iter().position(|l| l.name == norm)
    }

    pub fn trans_by_name(&self, name: &str) -> Option<TransId> {
        self.transitions.iter().position(|t| t.name() == name)
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn outgoing(&self, l: LocId) -> impl Iterator<Item = &Transition> {
        self.transitions.iter().filter(move |t| t.source == l)
    }

    /// Transitions other than the exit self-loop.
    pub fn proper_transitions(&self) -> impl Iterator<Item = &Transition> {
        let t_out = self.t_out;
        self.transitions.iter().filter(move |t| t.id != t_out)
    }

    pub fn describe(&self, t: &Transition) -> String {
        let targets: Vec<&str> = t.targets().map(|l| self.loc_name(l)).collect();
        format!(
            "{}: {}→{}",
            t.name(),
            self.loc_name(t.source),
            targets.join("|")
        )
    }

    pub fn is_linear(&self) -> bool {
        self.transitions.iter().all(|t| t.pow2_prob.is_none())
    }

    pub fn has_prob_branching(&self) -> bool {
        self.transitions.iter().any(|t| t.is_probabilistic())
    }

    pub fn has_sampling(&self) -> bool {
        self.transitions.iter().any(|t| {
            matches!(
                t.update,
                Some(Update {
                    elem: UpdateElem::Sample { .. },
                    ..
                })
            )
        })
    }

    pub fn has_unbounded_sampling(&self) -> bool {
        self.transitions.iter().any(|t| {
            matches!(&t.update, Some(Update { elem: UpdateElem::Sample { dist, .. }, .. }) if !dist.bounded_support())
        })
    }

    pub fn validate(&self) -> Result<(), PcfgError> {
        let nl = self.locations.len();
        let nv = self.vars.len();
        for (i, t) in self.transitions.iter().enumerate() {
            let name = t.name();
            let var_ok = |e: &LinExpr| e.vars().all(|v| v < nv);
            if t.id != i || t.source >= nl || t.branches.iter().any(|b| b.target >= nl) {
                return Err(PcfgError::Dangling(name));
            }
            if !t.guard.constraints.iter().all(|c| var_ok(&c.expr)) {
                return Err(PcfgError::Dangling(name));
            }
            let sum: Rational = t.branches.iter().map(|b| &b.prob).sum();
            if t.branches.is_empty()
                || !sum.is_one()
                || t.branches.iter().any(|b| !b.prob.is_positive())
            {
                return Err(PcfgError::BadProbabilities(name));
            }
            if let Some(v) = t.pow2_prob {
                if v >= nv || t.branches.len() != 2 {
                    return Err(PcfgError::Dangling(name));
                }
            }
            if let Some(u) = &t.update {
                if u.var >= nv {
                    return Err(PcfgError::Dangling(name));
                }
                match &u.elem {
                    UpdateElem::Det(f) if !var_ok(f) => return Err(PcfgError::Dangling(name)),
                    UpdateElem::Sample { base, dist } => {
                        if !var_ok(base) {
                            return Err(PcfgError::Dangling(name));
                        }
                        match dist {
                            Distribution::Uniform(lo, hi) if lo > hi => {
                                return Err(PcfgError::BadInterval(name))
                            }
                            Distribution::Normal(_, sd) if !sd.is_positive() => {
                                return Err(PcfgError::BadNormal(name))
                            }
                            _ => {}
                        }
                    }
                    UpdateElem::Ndet { base, lo, hi } => {
                        if !var_ok(base) {
                            return Err(PcfgError::Dangling(name));
                        }
                        if lo > hi {
                            return Err(PcfgError::BadInterval(name));
                        }
                    }
                    _ => {}
                }
            }
        }
        let out: Vec<&Transition> = self.outgoing(self.l_out).collect();
        let ok = out.len() == 1
            && out[0].id == self.t_out
            && out[0].update.is_none()
            && out[0].guard.is_top()
            && out[0].branches.len() == 1
            && out[0].branches[0].target == self.l_out;
        if !ok {
            return Err(PcfgError::BadExit);
        }
        Ok(())
    }

    /// `I(src) ∧ G(τ)`
    pub fn antecedent(&self, inv: &[Polyhedron], t: &Transition) -> Polyhedron {
        inv[t.source].and(&t.guard)
    }

    /// Check that the guards at every location cover its invariant.
    ///
    /// A gap is a point of `I(ℓ)` enabling no transition. Locations whose
    /// guard complement needs more than `limit` cases are left unverified.
    pub fn deadlock_check(
        &self,
        inv: &[Polyhedron],
        limit: usize,
        budget: &Budget,
    ) -> Result<Vec<DeadlockVerdict>, Cancelled> {
        let mut out = Vec::new();
        for l in 0..self.locations.len() {
            let guards: Vec<&Polyhedron> = self.outgoing(l).map(|t| &t.guard).collect();
            if guards.is_empty() {
                let w = lp::find_point(&inv[l], self.num_vars(), budget)?;
                out.push(match w {
                    Some(w) => DeadlockVerdict::Gap { loc: l, witness: w },
                    None => DeadlockVerdict::Covered { loc: l },
                });
                continue;
            }
            if guards.iter().any(|g| g.is_top()) {
                out.push(DeadlockVerdict::Covered { loc: l });
                continue;
            }
            let cases: usize = guards.iter().map(|g| g.constraints.len()).product();
            if cases > limit {
                out.push(DeadlockVerdict::Unverified { loc: l });
                continue;
            }
            // Every choice of one violated atom per guard must be infeasible.
            let mut idx = vec![0usize; guards.len()];
            let mut verdict = DeadlockVerdict::Covered { loc: l };
            'outer: loop {
                let mut q = inv[l].clone();
                for (g, &i) in guards.iter().zip(&idx) {
                    q.constraints.push(g.constraints[i].negate());
                }
                if let Some(w) = lp::find_point(&q, self.num_vars(), budget)? {
                    verdict = DeadlockVerdict::Gap { loc: l, witness: w };
                    break;
                }
                for k in 0..idx.len() {
                    idx[k] += 1;
                    if idx[k] < guards[k].constraints.len() {
                        continue 'outer;
                    }
                    idx[k] = 0;
                }
                break;
            }
            out.push(verdict);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DeadlockVerdict {
    Covered { loc: LocId },
    Gap { loc: LocId, witness: Vec<Rational> },
    Unverified { loc: LocId },
}

/// Affine expressions over program variables whose coefficients may be
/// numeric ([`LinExpr`]) or template unknowns ([`TemplateExpr`]).
pub trait Affine: Clone {
    fn zero() -> Self;
    fn add_scaled(&mut self, other: &Self, k: &Rational);
    fn substitute(&self, v: Var, by: &LinExpr) -> Self;
}

impl Affine for LinExpr {
    fn zero() -> Self {
        LinExpr::zero()
    }
    fn add_scaled(&mut self, other: &Self, k: &Rational) {
        LinExpr::add_scaled(self, other, k)
    }
    fn substitute(&self, v: Var, by: &LinExpr) -> Self {
        LinExpr::substitute(self, v, by)
    }
}

impl Affine for TemplateExpr {
    fn zero() -> Self {
        TemplateExpr::zero()
    }
    fn add_scaled(&mut self, other: &Self, k: &Rational) {
        TemplateExpr::add_scaled(self, other, k)
    }
    fn substitute(&self, v: Var, by: &LinExpr) -> Self {
        TemplateExpr::substitute(self, v, by)
    }
}

fn offset(base: &LinExpr, k: &Rational) -> LinExpr {
    let mut e = base.clone();
    e.add_constant(k);
    e
}

/// The values a transition's update may produce, as substitutions.
fn endpoint_substitutions(u: &Update) -> (Vec<LinExpr>, Option<Var>) {
    match &u.elem {
        UpdateElem::Det(f) => (vec![f.clone()], None),
        UpdateElem::Sample { base, dist } => match dist.support() {
            Some((lo, hi)) if lo == hi => (vec![offset(base, &lo)], None),
            Some((lo, hi)) => (vec![offset(base, &lo), offset(base, &hi)], None),
            None => (vec![offset(base, &dist.mean())], Some(u.var)),
        },
        UpdateElem::Ndet { base, lo, hi } => (vec![offset(base, lo), offset(base, hi)], None),
    }
}

fn lookup<E: Clone, F: Fn(LocId) -> Option<E>>(
    pcfg: &Pcfg,
    t: &Transition,
    eta: &F,
    l: LocId,
) -> Result<E, PcfgError> {
    eta(l).ok_or_else(|| PcfgError::UndefinedTarget(t.name(), pcfg.loc_name(l).to_string()))
}

/// Maximal pre-expectation of `eta` along `t`, as a set of affine expressions
/// in the source valuation whose pointwise maximum is the pre-expectation.
pub fn pre_expectation<E: Affine, F: Fn(LocId) -> Option<E>>(
    pcfg: &Pcfg,
    eta: F,
    t: &Transition,
) -> Result<Vec<E>, PcfgError> {
    if t.pow2_prob.is_some() {
        return Err(PcfgError::NonLinear(t.name()));
    }
    let mut mix = E::zero();
    for b in &t.branches {
        mix.add_scaled(&lookup(pcfg, t, &eta, b.target)?, &b.prob);
    }
    let Some(u) = &t.update else {
        return Ok(vec![mix]);
    };
    Ok(match &u.elem {
        UpdateElem::Det(f) => vec![mix.substitute(u.var, f)],
        UpdateElem::Sample { base, dist } => {
            vec![mix.substitute(u.var, &offset(base, &dist.mean()))]
        }
        UpdateElem::Ndet { base, lo, hi } => {
            vec![
                mix.substitute(u.var, &offset(base, lo)),
                mix.substitute(u.var, &offset(base, hi)),
            ]
        }
    })
}

/// Worst-case successor expressions of one branch.
#[derive(Debug, Clone)]
pub struct Successor<E> {
    pub target: LocId,
    pub prob: Rational,
    /// `eta(target)` under each extreme value of the update.
    pub exprs: Vec<E>,
    /// Set when the update samples from an unbounded distribution: the
    /// successor is bounded only if `eta(target)` ignores this variable.
    pub unbounded_var: Option<Var>,
}

/// Per-branch successor expressions covering every reachable extreme.
pub fn successors<E: Affine, F: Fn(LocId) -> Option<E>>(
    pcfg: &Pcfg,
    eta: F,
    t: &Transition,
) -> Result<Vec<Successor<E>>, PcfgError> {
    let mut out = Vec::new();
    for b in &t.branches {
        let e = lookup(pcfg, t, &eta, b.target)?;
        let (exprs, unbounded_var) = match &t.update {
            None => (vec![e], None),
            Some(u) => {
                let (subs, unb) = endpoint_substitutions(u);
                (subs.iter().map(|s| e.substitute(u.var, s)).collect(), unb)
            }
        };
        out.push(Successor {
            target: b.target,
            prob: b.prob.clone(),
            exprs,
            unbounded_var,
        });
    }
    Ok(out)
}

/// Post-state constraints: `c` over the target holds after `t` from every
/// point of the antecedent iff each returned constraint (over the source)
/// does. `None` when an unbounded sample makes `c` depend on a fresh value.
pub fn pull_back(t: &Transition, c: &LinConstraint) -> Option<Vec<LinConstraint>> {
    let Some(u) = &t.update else {
        return Some(vec![c.clone()]);
    };
    if !c.expr.mentions(u.var) {
        return Some(vec![c.clone()]);
    }
    let (subs, unb) = endpoint_substitutions(u);
    if unb.is_some() {
        return None;
    }
    Some(subs.iter().map(|s| c.substitute(u.var, s)).collect())
}

/// An `n`-dimensional linear map: `exprs[l][k]` is `η[k]` at location `l`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurableMap {
    pub dim: usize,
    pub exprs: Vec<Vec<LinExpr>>,
}

impl MeasurableMap {
    pub fn zeros(nlocs: usize, dim: usize) -> Self {
        MeasurableMap {
            dim,
            exprs: vec![vec![LinExpr::zero(); dim]; nlocs],
        }
    }

    pub fn component(&self, k: usize) -> impl Fn(LocId) -> Option<LinExpr> + '_ {
        move |l| self.exprs.get(l).and_then(|v| v.get(k)).cloned()
    }
}

/// `lv[τ]` is the ranking dimension of transition `τ` (1-based; 0 only for
/// the exit self-loop).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelMap(pub Vec<usize>);

impl LevelMap {
    pub fn get(&self, t: TransId) -> usize {
        self.0[t]
    }

    /// `Lv(τ) = 0` iff `τ = τ_out`, and every level within the dimension.
    pub fn is_well_formed(&self, pcfg: &Pcfg, dim: usize) -> bool {
        self.0.len() == pcfg.transitions.len()
            && self
                .0
                .iter()
                .enumerate()
                .all(|(t, &lv)| (lv == 0) == (t == pcfg.t_out) && lv <= dim)
    }
}

impl fmt::Display for MeasurableMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (l, row) in self.exprs.iter().enumerate() {
            let parts: Vec<String> = row.iter().map(|e| format!("{e:?}")).collect();
            writeln!(f, "{l}: ({})", parts.join(", "))?;
        }
        Ok(())
    }
}

/// Variables touched by some update.
pub fn updated_vars(pcfg: &Pcfg) -> BTreeSet<Var> {
    pcfg.transitions
        .iter()
        .filter_map(|t| t.update.as_ref().map(|u| u.var))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn lin(terms: &[(Var, i64)], k: i64) -> LinExpr {
        LinExpr::from_parts(terms.iter().map(|&(v, c)| (v, q(c, 1))), q(k, 1))
    }

    /// l0 --t0--> l1 (with the given update/branches), l1 = exit
    fn one_step(branches: Vec<Branch>, update: Option<Update>, nlocs: usize) -> Pcfg {
        let out = nlocs - 1;
        Pcfg {
            vars: vec!["x".into(), "t".into()],
            locations: (0..nlocs)
                .map(|i| Location {
                    name: format!("l{i}"),
                })
                .collect(),
            transitions: vec![
                Transition {
                    id: 0,
                    source: 0,
                    branches,
                    update,
                    guard: Polyhedron::top(),
                    pow2_prob: None,
                },
                Transition {
                    id: 1,
                    source: out,
                    branches: vec![Branch {
                        prob: Rational::one(),
                        target: out,
                    }],
                    update: None,
                    guard: Polyhedron::top(),
                    pow2_prob: None,
                },
            ],
            l_in: 0,
            l_out: out,
            t_out: 1,
        }
    }

    #[test]
    fn identity_transition() {
        let p = one_step(
            vec![Branch {
                prob: Rational::one(),
                target: 1,
            }],
            None,
            2,
        );
        p.validate().unwrap();
        let eta = [LinExpr::zero(), lin(&[(0, 1)], 0)];
        let pe = pre_expectation(&p, |l| eta.get(l).cloned(), &p.transitions[0]).unwrap();
        assert_eq!(pe, vec![lin(&[(0, 1)], 0)]);
    }

    #[test]
    fn probabilistic_branches_mix() {
        // l2-style coin flip over t: ½(4t+2) + ½(−2t−4) = t − 1
        let half = q(1, 2);
        let p = one_step(
            vec![
                Branch {
                    prob: half.clone(),
                    target: 1,
                },
                Branch {
                    prob: half,
                    target: 2,
                },
            ],
            None,
            3,
        );
        p.validate().unwrap();
        let eta = [LinExpr::zero(), lin(&[(1, 4)], 2), lin(&[(1, -2)], -4)];
        let pe = pre_expectation(&p, |l| eta.get(l).cloned(), &p.transitions[0]).unwrap();
        assert_eq!(pe, vec![lin(&[(1, 1)], -1)]);
    }

    #[test]
    fn uniform_sample_uses_mean() {
        let u = Update {
            var: 0,
            elem: UpdateElem::Sample {
                base: lin(&[(0, 1)], 0),
                dist: Distribution::Uniform(q(1, 1), q(2, 1)),
            },
        };
        let p = one_step(
            vec![Branch {
                prob: Rational::one(),
                target: 1,
            }],
            Some(u),
            2,
        );
        let eta = [LinExpr::zero(), lin(&[(0, -2)], 15)];
        let pe = pre_expectation(&p, |l| eta.get(l).cloned(), &p.transitions[0]).unwrap();
        assert_eq!(pe, vec![lin(&[(0, -2)], 12)]);
        let succ = successors(&p, |l| eta.get(l).cloned(), &p.transitions[0]).unwrap();
        assert_eq!(
            succ[0].exprs,
            vec![lin(&[(0, -2)], 13), lin(&[(0, -2)], 11)]
        );
    }

    #[test]
    fn ndet_gives_both_endpoints() {
        let u = Update {
            var: 0,
            elem: UpdateElem::Ndet {
                base: LinExpr::zero(),
                lo: q(1, 1),
                hi: q(2, 1),
            },
        };
        let p = one_step(
            vec![Branch {
                prob: Rational::one(),
                target: 1,
            }],
            Some(u),
            2,
        );
        let eta = [LinExpr::zero(), lin(&[(0, 3)], 0)];
        let pe = pre_expectation(&p, |l| eta.get(l).cloned(), &p.transitions[0]).unwrap();
        assert_eq!(pe, vec![lin(&[], 3), lin(&[], 6)]);
    }

    #[test]
    fn missing_target_expression() {
        let p = one_step(
            vec![Branch {
                prob: Rational::one(),
                target: 1,
            }],
            None,
            2,
        );
        let err = pre_expectation(
            &p,
            |l| if l == 0 { Some(LinExpr::zero()) } else { None },
            &p.transitions[0],
        )
        .unwrap_err();
        assert!(matches!(err, PcfgError::UndefinedTarget(..)));
    }

    #[test]
    fn validation_rejects_bad_inputs() {
        let bad = one_step(
            vec![
                Branch {
                    prob: q(1, 2),
                    target: 1,
                },
                Branch {
                    prob: q(1, 3),
                    target: 1,
                },
            ],
            None,
            2,
        );
        assert!(matches!(
            bad.validate(),
            Err(PcfgError::BadProbabilities(_))
        ));
        let u = Update {
            var: 0,
            elem: UpdateElem::Ndet {
                base: LinExpr::zero(),
                lo: q(2, 1),
                hi: q(1, 1),
            },
        };
        let bad = one_step(
            vec![Branch {
                prob: Rational::one(),
                target: 1,
            }],
            Some(u),
            2,
        );
        assert!(matches!(bad.validate(), Err(PcfgError::BadInterval(_))));
    }

    #[test]
    fn deadlock_gap_found() {
        // l0 guarded by x ≤ 0 only: x = 1 deadlocks
        let mut p = one_step(
            vec![Branch {
                prob: Rational::one(),
                target: 1,
            }],
            None,
            2,
        );
        p.transitions[0].guard = Polyhedron::new(vec![LinConstraint::le(lin(&[(0, 1)], 0))]);
        let inv = vec![Polyhedron::top(); 2];
        let v = p.deadlock_check(&inv, 64, &Budget::unlimited()).unwrap();
        assert!(
            matches!(&v[0], DeadlockVerdict::Gap { loc: 0, witness } if witness[0].is_positive())
        );
        assert_eq!(v[1], DeadlockVerdict::Covered { loc: 1 });
    }
}
