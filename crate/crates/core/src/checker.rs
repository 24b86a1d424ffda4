//! Independent verification of LexRSM certificates by entailment queries.
//!
//! Every clause is an implication `∀s ∈ closure(I(ℓ) ∧ G(τ)). e(s) ≤ 0`
//! decided by one LP. A transition whose antecedent has no point at all
//! (strict atoms respected) can never fire and is skipped. A failing clause
//! yields the LP maximizer as witness, or a far point along an improving ray
//! when the maximum is unbounded.

use serde::Serialize;

use crate::linexpr::{LinConstraint, LinExpr, Polyhedron};
use crate::lp::{self, Budget, MaxResult};
use crate::pcfg::{self, LevelMap, LocId, MeasurableMap, Pcfg, PcfgError, TransId, Transition};
use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    St,
    Lw,
    Sc,
    ScMclc,
    Llex,
}

impl std::str::FromStr for Flavor {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(
            match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
                "st" => Flavor::St,
                "lw" => Flavor::Lw,
                "sc" => Flavor::Sc,
                "scmclc" | "mclc" => Flavor::ScMclc,
                "llex" => Flavor::Llex,
                _ => return Err(format!("unknown flavor {s}")),
            },
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Clause {
    Ranking,
    Unaffecting,
    NonNegativity,
    Mclc,
    Stability,
    InvariantInductiveness,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub transition: Option<TransId>,
    pub location: LocId,
    /// 1-based dimension; 0 for invariant clauses.
    pub dim: usize,
    pub clause: Clause,
    pub detail: String,
    pub witness: Vec<Rational>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Report {
    pub violations: Vec<Violation>,
    /// Clauses that fail on the closure but may hold with strict inequalities.
    pub inconclusive: Vec<Violation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Ok,
    Violations,
    Inconclusive,
}

impl Report {
    pub fn verdict(&self) -> Verdict {
        if !self.violations.is_empty() {
            Verdict::Violations
        } else if !self.inconclusive.is_empty() {
            Verdict::Inconclusive
        } else {
            Verdict::Ok
        }
    }

    pub fn is_ok(&self) -> bool {
        self.verdict() == Verdict::Ok
    }

    fn merge(&mut self, other: Report) {
        self.violations.extend(other.violations);
        self.inconclusive.extend(other.inconclusive);
    }

    fn sort(&mut self) {
        let key = |v: &Violation| (v.transition, v.location, v.dim, v.clause);
        self.violations.sort_by_key(key);
        self.inconclusive.sort_by_key(key);
    }

    pub fn render(&self, pcfg: &Pcfg) -> String {
        let mut out = String::new();
        for (tag, list) in [
            ("violation", &self.violations),
            ("inconclusive", &self.inconclusive),
        ] {
            for v in list {
                let site = match v.transition {
                    Some(t) => pcfg.describe(&pcfg.transitions[t]),
                    None => pcfg.loc_name(v.location).to_string(),
                };
                let w: Vec<String> = pcfg
                    .vars
                    .iter()
                    .zip(&v.witness)
                    .map(|(n, x)| format!("{n}={x}"))
                    .collect();
                out.push_str(&format!(
                    "{tag}: {site} dim {} {:?}: {} at [{}]\n",
                    v.dim,
                    v.clause,
                    v.detail,
                    w.join(", ")
                ));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CheckError {
    #[error(transparent)]
    Pcfg(#[from] PcfgError),
    #[error("level map must give 0 exactly to the exit transition and stay within the dimension")]
    BadLevelMap,
    #[error("measurable map has the wrong number of locations or components")]
    BadShape,
    #[error("invariant map has the wrong number of locations")]
    BadInvariants,
}

const RAY_SCALE: i64 = 1_000_000;

/// A point of `closure(a)` where `e > 0`, if any.
pub fn refute(a: &Polyhedron, e: &LinExpr, nvars: usize) -> Option<Vec<Rational>> {
    match lp::maximize(a, e, nvars, &Budget::unlimited()).expect("unlimited budget") {
        MaxResult::Empty => None,
        MaxResult::Optimal { value, point } => value.is_positive().then(|| trim(point, nvars)),
        MaxResult::Unbounded { point, ray, slope } => {
            let base = e.eval(&point);
            let need = (Rational::one() - &base) / &slope;
            let mut t = Rational::from_int(RAY_SCALE);
            if need > t {
                t = Rational::from_bigints(need.floor(), 1.into()) + Rational::one();
            }
            let p: Vec<Rational> = point.iter().zip(&ray).map(|(p, r)| p + &(r * &t)).collect();
            Some(trim(p, nvars))
        }
    }
}

fn trim(mut p: Vec<Rational>, n: usize) -> Vec<Rational> {
    p.resize(n, Rational::zero());
    p
}

/// Antecedents of every transition, `None` when it can never fire.
pub fn live_antecedents(pcfg: &Pcfg, inv: &[Polyhedron]) -> Vec<Option<Polyhedron>> {
    pcfg.transitions
        .iter()
        .map(|t| {
            let a = pcfg.antecedent(inv, t);
            lp::find_point(&a, pcfg.num_vars(), &Budget::unlimited())
                .expect("unlimited budget")
                .map(|_| a)
        })
        .collect()
}

struct Ctx<'a> {
    pcfg: &'a Pcfg,
    inv: &'a [Polyhedron],
    eta: &'a MeasurableMap,
    lv: &'a LevelMap,
    live: Vec<Option<Polyhedron>>,
}

impl<'a> Ctx<'a> {
    fn new(
        pcfg: &'a Pcfg,
        inv: &'a [Polyhedron],
        eta: &'a MeasurableMap,
        lv: &'a LevelMap,
    ) -> Result<Self, CheckError> {
        if inv.len() != pcfg.locations.len() {
            return Err(CheckError::BadInvariants);
        }
        if eta.exprs.len() != pcfg.locations.len() || eta.exprs.iter().any(|r| r.len() != eta.dim) {
            return Err(CheckError::BadShape);
        }
        if !lv.is_well_formed(pcfg, eta.dim) {
            return Err(CheckError::BadLevelMap);
        }
        if let Some(t) = pcfg.transitions.iter().find(|t| t.pow2_prob.is_some()) {
            return Err(PcfgError::NonLinear(t.name()).into());
        }
        Ok(Ctx {
            pcfg,
            inv,
            eta,
            lv,
            live: live_antecedents(pcfg, inv),
        })
    }

    fn n(&self) -> usize {
        self.pcfg.num_vars()
    }

    fn eta(&self, l: LocId, k: usize) -> &LinExpr {
        &self.eta.exprs[l][k - 1]
    }

    fn proper(&self) -> impl Iterator<Item = (&'a Transition, &Polyhedron)> + '_ {
        self.pcfg
            .transitions
            .iter()
            .filter(|t| t.id != self.pcfg.t_out)
            .filter_map(|t| self.live[t.id].as_ref().map(|a| (t, a)))
    }

    fn violation(
        &self,
        t: &Transition,
        k: usize,
        clause: Clause,
        detail: String,
        witness: Vec<Rational>,
    ) -> Violation {
        Violation {
            transition: Some(t.id),
            location: t.source,
            dim: k,
            clause,
            detail,
            witness,
        }
    }

    fn ranking(&self, c: &Rational) -> Result<Report, CheckError> {
        let mut r = Report::default();
        for (t, a) in self.proper() {
            let lv = self.lv.get(t.id);
            for k in 1..=lv {
                let here = self.eta(t.source, k);
                for f in pcfg::pre_expectation(self.pcfg, self.eta.component(k - 1), t)? {
                    let mut e = &f - here;
                    let clause = if k == lv {
                        e.add_constant(c);
                        Clause::Ranking
                    } else {
                        Clause::Unaffecting
                    };
                    if let Some(w) = refute(a, &e, self.n()) {
                        let detail = format!(
                            "pre-expectation {} exceeds {}",
                            f.display(&self.pcfg.vars),
                            here.display(&self.pcfg.vars)
                        );
                        r.violations.push(self.violation(t, k, clause, detail, w));
                    }
                }
            }
        }
        Ok(r)
    }

    fn nonneg_at(&self, t: &Transition, a: &Polyhedron, k: usize) -> Option<Violation> {
        let e = -self.eta(t.source, k);
        refute(a, &e, self.n())
            .map(|w| self.violation(t, k, Clause::NonNegativity, "negative".into(), w))
    }

    fn nonnegativity(&self, flavor: Flavor) -> Report {
        let mut r = Report::default();
        if flavor == Flavor::St {
            for (l, i) in self.inv.iter().enumerate() {
                for k in 1..=self.eta.dim {
                    let e = -self.eta(l, k);
                    let witness = lp::find_point(i, self.n(), &Budget::unlimited())
                        .expect("unlimited budget")
                        .and_then(|_| refute(i, &e, self.n()));
                    if let Some(w) = witness {
                        r.violations.push(Violation {
                            transition: None,
                            location: l,
                            dim: k,
                            clause: Clause::NonNegativity,
                            detail: "negative on the invariant".into(),
                            witness: w,
                        });
                    }
                }
            }
            return r;
        }
        for (t, a) in self.proper() {
            let lv = self.lv.get(t.id);
            let dims = if flavor == Flavor::Lw {
                1..=lv
            } else {
                lv..=lv
            };
            for k in dims {
                r.violations.extend(self.nonneg_at(t, a, k));
            }
        }
        r
    }

    /// Condition (7) for one transition at dimension `k`.
    fn non_increase(
        &self,
        t: &Transition,
        a: &Polyhedron,
        k: usize,
    ) -> Result<Vec<Violation>, CheckError> {
        let here = self.eta(t.source, k);
        let mut out = Vec::new();
        for s in pcfg::successors(self.pcfg, self.eta.component(k - 1), t)? {
            if let Some(v) = s.unbounded_var {
                if self.eta(s.target, k).mentions(v) {
                    let w = lp::find_point(a, self.n(), &Budget::unlimited())
                        .expect("unlimited budget")
                        .unwrap_or_default();
                    out.push(self.violation(
                        t,
                        k,
                        Clause::Mclc,
                        "(7): successor unbounded above".into(),
                        trim(w, self.n()),
                    ));
                    continue;
                }
            }
            for e in &s.exprs {
                if let Some(w) = refute(a, &(e - here), self.n()) {
                    let detail = format!(
                        "(7): successor {} exceeds {}",
                        e.display(&self.pcfg.vars),
                        here.display(&self.pcfg.vars)
                    );
                    out.push(self.violation(t, k, Clause::Mclc, detail, w));
                    break;
                }
            }
        }
        Ok(out)
    }

    fn mclc(&self) -> Result<Report, CheckError> {
        let mut r = Report::default();
        for k in 1..=self.eta.dim {
            let left: Vec<(&Transition, &Polyhedron)> = self
                .proper()
                .filter(|(t, _)| k < self.lv.get(t.id))
                .collect();
            let mut six = Vec::new();
            for (t, a) in &left {
                if let Some(mut v) = self.nonneg_at(t, a, k) {
                    v.clause = Clause::Mclc;
                    v.detail = "(6): negative left of the ranking dimension".into();
                    six.push(v);
                }
            }
            if six.is_empty() {
                continue;
            }
            let mut seven = Vec::new();
            for (t, a) in &left {
                seven.extend(self.non_increase(t, a, k)?);
            }
            if seven.is_empty() {
                continue;
            }
            r.violations.extend(six);
            r.violations.extend(seven);
        }
        Ok(r)
    }

    fn stability(&self) -> Result<Report, CheckError> {
        let mut r = Report::default();
        let max_out: Vec<usize> = (0..self.pcfg.locations.len())
            .map(|l| {
                self.pcfg
                    .outgoing(l)
                    .map(|t| self.lv.get(t.id))
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        for (t, a) in self.proper() {
            for k in 1..self.lv.get(t.id) {
                let here = self.eta(t.source, k);
                let mut neg = a.clone();
                neg.push(LinConstraint::le(here.clone()));
                let mut strict = a.clone();
                strict.push(LinConstraint::lt(here.clone()));
                for s in pcfg::successors(self.pcfg, self.eta.component(k - 1), t)? {
                    if max_out[s.target] < k {
                        continue;
                    }
                    if let Some(v) = s.unbounded_var {
                        if self.eta(s.target, k).mentions(v) {
                            if let Some(w) = lp::find_point(&strict, self.n(), &Budget::unlimited())
                                .expect("unlimited budget")
                            {
                                r.violations.push(self.violation(
                                    t,
                                    k,
                                    Clause::Stability,
                                    "successor unbounded above".into(),
                                    w,
                                ));
                            }
                            continue;
                        }
                    }
                    for e in &s.exprs {
                        let Some(w) = refute(&neg, e, self.n()) else {
                            continue;
                        };
                        let exact = lp::entails_exact(
                            &strict,
                            &LinConstraint::lt(e.clone()),
                            self.n(),
                            &Budget::unlimited(),
                        )
                        .expect("unlimited budget");
                        let detail = format!(
                            "successor {} may leave the negative region",
                            e.display(&self.pcfg.vars)
                        );
                        match exact {
                            Some(w) => r.violations.push(self.violation(
                                t,
                                k,
                                Clause::Stability,
                                detail,
                                w,
                            )),
                            None => r.inconclusive.push(self.violation(
                                t,
                                k,
                                Clause::Stability,
                                detail,
                                w,
                            )),
                        }
                        break;
                    }
                }
            }
        }
        Ok(r)
    }
}

/// Check `(η, Lv)` against `flavor` with ranking constant `c`.
pub fn check_certificate(
    pcfg: &Pcfg,
    inv: &[Polyhedron],
    eta: &MeasurableMap,
    lv: &LevelMap,
    c: &Rational,
    flavor: Flavor,
) -> Result<Report, CheckError> {
    let ctx = Ctx::new(pcfg, inv, eta, lv)?;
    let mut r = ctx.ranking(c)?;
    let base = match flavor {
        Flavor::St | Flavor::Lw => flavor,
        _ => Flavor::Sc,
    };
    r.merge(ctx.nonnegativity(base));
    match flavor {
        Flavor::ScMclc => r.merge(ctx.mclc()?),
        Flavor::Llex => r.merge(ctx.stability()?),
        _ => {}
    }
    r.sort();
    Ok(r)
}

/// The multiple-choice leftward condition alone.
pub fn check_mclc(
    pcfg: &Pcfg,
    inv: &[Polyhedron],
    eta: &MeasurableMap,
    lv: &LevelMap,
) -> Result<Report, CheckError> {
    let mut r = Ctx::new(pcfg, inv, eta, lv)?.mclc()?;
    r.sort();
    Ok(r)
}

/// Stability at negativity alone.
pub fn check_stability_at_negativity(
    pcfg: &Pcfg,
    inv: &[Polyhedron],
    eta: &MeasurableMap,
    lv: &LevelMap,
) -> Result<Report, CheckError> {
    let mut r = Ctx::new(pcfg, inv, eta, lv)?.stability()?;
    r.sort();
    Ok(r)
}

/// Check that the invariant map is closed under every transition and that
/// the entry location's invariant holds for every initial valuation.
pub fn audit_invariant(pcfg: &Pcfg, inv: &[Polyhedron]) -> Result<Report, CheckError> {
    if inv.len() != pcfg.locations.len() {
        return Err(CheckError::BadInvariants);
    }
    let n = pcfg.num_vars();
    let budget = Budget::unlimited();
    let mut r = Report::default();
    for c in &inv[pcfg.l_in].constraints {
        if let Some(w) =
            lp::entails_exact(&Polyhedron::top(), c, n, &budget).expect("unlimited budget")
        {
            r.violations.push(Violation {
                transition: None,
                location: pcfg.l_in,
                dim: 0,
                clause: Clause::InvariantInductiveness,
                detail: format!(
                    "entry invariant atom {} fails for some initial valuation",
                    c.display(&pcfg.vars)
                ),
                witness: w,
            });
        }
    }
    for t in &pcfg.transitions {
        let a = pcfg.antecedent(inv, t);
        for tgt in t.targets() {
            for c in &inv[tgt].constraints {
                let atom = c.display(&pcfg.vars).to_string();
                let mk = |w: Vec<Rational>, why: &str| Violation {
                    transition: Some(t.id),
                    location: t.source,
                    dim: 0,
                    clause: Clause::InvariantInductiveness,
                    detail: format!("atom {atom} at {} {why}", pcfg.loc_name(tgt)),
                    witness: w,
                };
                match pcfg::pull_back(t, c) {
                    None => {
                        if let Some(w) = lp::find_point(&a, n, &budget).expect("unlimited budget") {
                            r.violations
                                .push(mk(w, "depends on an unboundedly sampled variable"));
                        }
                    }
                    Some(pre) => {
                        for p in pre {
                            if let Some(w) =
                                lp::entails_exact(&a, &p, n, &budget).expect("unlimited budget")
                            {
                                r.violations.push(mk(w, "is not preserved"));
                                break;
                            }
                        }
                    }
                }
            }
        }
    }
    r.sort();
    Ok(r)
}
