//! Iterative LP synthesis of lexicographic ranking supermartingales.
//!
//! Each round builds one component `η_k` from an affine template per
//! location (the exit location is fixed to zero) and ranks some of the still
//! unranked transitions `U`. The first attempt is one LP that maximizes
//! `Σ ε_τ` subject to non-negativity on every `τ ∈ U` and
//! `pre(η_k, τ) ≤ η_k − c·ε_τ`; transitions with `ε_τ = 1` are ranked.
//! Strategies with a candidate class then try, in order, to rank exactly a
//! set `T ⊆ U` while every other `τ ∈ U` is worst-case non-increasing.
//!
//! The baselines are the same loop: STR asks for non-negativity on the whole
//! invariant of every location, LWN uses the first attempt only.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checker::{self, Flavor, Report};
use crate::farkas::{encode_nonempty, FarkasEncoding, TemplateExpr};
use crate::linexpr::{LinExpr, Polyhedron, Var};
use crate::lp::{self, Budget, Cancelled, LpModel, Solution};
use crate::pcfg::{
    self, LevelMap, LocId, MeasurableMap, Pcfg, PcfgError, TransId, Transition, Update, UpdateElem,
};
use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Str,
    Lwn,
    Smc,
    Emc,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Str, Strategy::Lwn, Strategy::Smc, Strategy::Emc];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Str => "STR",
            Strategy::Lwn => "LWN",
            Strategy::Smc => "SMC",
            Strategy::Emc => "EMC",
        }
    }

    /// Flavor a certificate of this strategy satisfies.
    pub fn flavor(self) -> Flavor {
        match self {
            Strategy::Str => Flavor::St,
            Strategy::Lwn => Flavor::Lw,
            Strategy::Smc | Strategy::Emc => Flavor::ScMclc,
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "str" => Ok(Strategy::Str),
            "lwn" => Ok(Strategy::Lwn),
            "smc" => Ok(Strategy::Smc),
            "emc" => Ok(Strategy::Emc),
            _ => Err(format!("unknown method {s}")),
        }
    }
}

/// How a dimension treats transitions ranked further right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchChoice {
    /// Non-negative on their antecedents.
    NonNeg,
    /// Worst-case non-increasing along them.
    StrictDecrease,
}

#[derive(Debug, Clone)]
pub struct Options {
    pub strategy: Strategy,
    pub c: Rational,
    pub max_dim: usize,
    pub deadline: Option<Instant>,
    /// Skip the invariant audit.
    pub force_invariants: bool,
    /// Keep every feasible Farkas encoding together with its LP solution.
    pub trace: bool,
}

impl Options {
    pub fn new(strategy: Strategy) -> Self {
        Options {
            strategy,
            c: Rational::one(),
            max_dim: 16,
            deadline: None,
            force_invariants: false,
            trace: false,
        }
    }
}

/// A feasible LP together with the implications it encodes.
#[derive(Debug, Clone)]
pub struct TracedLp {
    pub encodings: Vec<FarkasEncoding>,
    pub values: Vec<Rational>,
}

#[derive(Debug, Clone)]
pub struct Synthesized {
    pub eta: MeasurableMap,
    pub lv: LevelMap,
    pub branches: Vec<BranchChoice>,
    pub ranked: Vec<Vec<TransId>>,
    pub dim_times: Vec<f64>,
    pub trace: Vec<TracedLp>,
}

impl Synthesized {
    pub fn dimension(&self) -> usize {
        self.eta.dim
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum SynthError {
    #[error("no component ranks any of the remaining transitions {unranked:?}")]
    NoProgress {
        unranked: Vec<TransId>,
        partial: Box<Synthesized>,
    },
    #[error("dimension bound reached with transitions {unranked:?} unranked")]
    MaxDim { unranked: Vec<TransId> },
    #[error("time limit reached")]
    Timeout,
    #[error("invariants are not inductive")]
    InvariantNotInductive(Report),
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Pcfg(#[from] PcfgError),
}

impl From<Cancelled> for SynthError {
    fn from(_: Cancelled) -> Self {
        SynthError::Timeout
    }
}

/// Candidate exact-rank sets, in trial order.
pub fn class_enumerate(strategy: Strategy, u: &[TransId]) -> Vec<Vec<TransId>> {
    let mut u = u.to_vec();
    u.sort_unstable();
    match strategy {
        Strategy::Str | Strategy::Lwn => Vec::new(),
        Strategy::Smc => u.iter().map(|&t| vec![t]).collect(),
        Strategy::Emc => (1..=u.len())
            .rev()
            .flat_map(|k| subsets_of_size(&u, k))
            .collect(),
    }
}

/// Subsets of sorted `u` of size `k`, in lexicographic order.
fn subsets_of_size(u: &[TransId], k: usize) -> Vec<Vec<TransId>> {
    let n = u.len();
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.iter().map(|&i| u[i]).collect());
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            break;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
    out
}

/// Per-location affine template over fresh LP unknowns.
struct Template {
    /// `unknowns[l]` lists the constant's unknown then one per variable.
    unknowns: Vec<Option<Vec<Var>>>,
}

impl Template {
    fn new(model: &mut LpModel, pcfg: &Pcfg) -> Self {
        let unknowns = (0..pcfg.locations.len())
            .map(|l| {
                (l != pcfg.l_out).then(|| {
                    let name = pcfg.loc_name(l);
                    let mut v = vec![model.add_var(format!("b_{name}"), false)];
                    v.extend(
                        pcfg.vars
                            .iter()
                            .map(|x| model.add_var(format!("a_{name}_{x}"), false)),
                    );
                    v
                })
            })
            .collect();
        Template { unknowns }
    }

    fn at(&self, l: LocId) -> Option<TemplateExpr> {
        let Some(u) = &self.unknowns[l] else {
            return Some(TemplateExpr::zero());
        };
        let mut t = TemplateExpr::zero();
        t.constant = LinExpr::var(u[0]);
        for (v, &a) in u[1..].iter().enumerate() {
            t.coeffs.insert(v, LinExpr::var(a));
        }
        Some(t)
    }

    fn coeff_unknown(&self, l: LocId, v: Var) -> Option<Var> {
        self.unknowns[l].as_ref().map(|u| u[v + 1])
    }

    fn extract(&self, values: &[Rational]) -> Vec<LinExpr> {
        self.unknowns
            .iter()
            .map(|u| match u {
                None => LinExpr::zero(),
                Some(u) => LinExpr::from_parts(
                    u[1..]
                        .iter()
                        .enumerate()
                        .map(|(v, &a)| (v, values[a].clone())),
                    values[u[0]].clone(),
                ),
            })
            .collect()
    }
}

fn neg(t: &TemplateExpr) -> TemplateExpr {
    let mut out = TemplateExpr::zero();
    out.add_scaled(t, &-Rational::one());
    out
}

/// `a − b`
fn minus(a: &TemplateExpr, b: &TemplateExpr) -> TemplateExpr {
    let mut out = a.clone();
    out.add_scaled(b, &-Rational::one());
    out
}

struct Engine<'a> {
    pcfg: &'a Pcfg,
    inv: &'a [Polyhedron],
    opts: &'a Options,
    /// Antecedent per transition, `None` when it can never fire.
    live: Vec<Option<Polyhedron>>,
    /// Locations whose invariant has a point.
    live_locs: Vec<bool>,
    budget: Budget,
}

struct Lp {
    model: LpModel,
    template: Template,
    encodings: Vec<FarkasEncoding>,
}

impl<'a> Engine<'a> {
    fn lp(&self) -> Lp {
        let mut model = LpModel::new();
        let template = Template::new(&mut model, self.pcfg);
        Lp {
            model,
            template,
            encodings: Vec::new(),
        }
    }

    fn encode(
        &self,
        lp: &mut Lp,
        site: &str,
        idx: &mut usize,
        p: &Polyhedron,
        consequent: &TemplateExpr,
    ) {
        let e = encode_nonempty(&mut lp.model, p, consequent, site, *idx);
        *idx += 1;
        lp.encodings.push(e);
    }

    fn solve(&self, lp: &Lp) -> Result<Option<Vec<Rational>>, SynthError> {
        Ok(match lp.model.solve(&self.budget)? {
            Solution::Optimal { values, .. } => Some(values),
            Solution::Infeasible => None,
            Solution::Unbounded { .. } => unreachable!("objectives are bounded"),
        })
    }

    /// The condition-(6) attempt; returns `η_k` and the transitions ranked.
    fn attempt_nonneg(
        &self,
        u: &[TransId],
    ) -> Result<Option<(Vec<LinExpr>, Vec<TransId>, TracedLp)>, SynthError> {
        let st = self.opts.strategy == Strategy::Str;
        let mut lp = self.lp();
        let mut eps = Vec::new();
        let mut objective = LinExpr::zero();
        for &t in u {
            let Some(a) = &self.live[t] else { continue };
            let tr = &self.pcfg.transitions[t];
            let here = lp.template.at(tr.source).expect("template");
            let e = lp.model.add_var(format!("ε_t{t}"), true);
            lp.model.add_le(LinExpr::from_parts(
                [(e, Rational::one())],
                -Rational::one(),
            ));
            objective.add_term(e, &Rational::one());
            eps.push((t, e));
            let mut idx = 0;
            for f in pcfg::pre_expectation(self.pcfg, |l| lp.template.at(l), tr)? {
                let mut cons = minus(&f, &here);
                cons.add_unknown_constant(&LinExpr::var(e), &self.opts.c);
                self.encode(&mut lp, &tr.name(), &mut idx, a, &cons);
            }
            if !st {
                self.encode(&mut lp, &tr.name(), &mut idx, a, &neg(&here));
            }
        }
        if st {
            for l in 0..self.pcfg.locations.len() {
                if l == self.pcfg.l_out || !self.live_locs[l] {
                    continue;
                }
                let here = lp.template.at(l).expect("template");
                let mut idx = 0;
                let site = self.pcfg.loc_name(l).to_string();
                self.encode(&mut lp, &site, &mut idx, &self.inv[l], &neg(&here));
            }
        }
        let dead: Vec<TransId> = u
            .iter()
            .copied()
            .filter(|&t| self.live[t].is_none())
            .collect();
        lp.model.set_objective(objective);
        let Some(mut values) = self.solve(&lp)? else {
            return Ok(None);
        };
        let positive: Vec<(TransId, Var)> = eps
            .iter()
            .copied()
            .filter(|&(_, e)| values[e].is_positive())
            .collect();
        if positive.iter().any(|&(_, e)| !values[e].is_one()) {
            for &(_, e) in &positive {
                lp.model.add_eq(LinExpr::from_parts(
                    [(e, Rational::one())],
                    -Rational::one(),
                ));
            }
            lp.model.set_objective(LinExpr::zero());
            values = self
                .solve(&lp)?
                .expect("scaling keeps the ranked set feasible");
        }
        let mut ranked: Vec<TransId> = positive.iter().map(|&(t, _)| t).chain(dead).collect();
        ranked.sort_unstable();
        if ranked.is_empty() {
            return Ok(None);
        }
        let eta = lp.template.extract(&values);
        Ok(Some((
            eta,
            ranked,
            TracedLp {
                encodings: lp.encodings,
                values,
            },
        )))
    }

    /// Rank exactly `tset`; every other transition of `u` must be worst-case
    /// non-increasing.
    fn attempt_strict(
        &self,
        u: &[TransId],
        tset: &[TransId],
    ) -> Result<Option<(Vec<LinExpr>, TracedLp)>, SynthError> {
        self.attempt_roles(u, |t| {
            if tset.contains(&t) {
                Role::Strict
            } else {
                Role::NonIncrease
            }
        })
    }

    fn attempt_roles(
        &self,
        u: &[TransId],
        role: impl Fn(TransId) -> Role,
    ) -> Result<Option<(Vec<LinExpr>, TracedLp)>, SynthError> {
        let mut lp = self.lp();
        for &t in u {
            let Some(a) = &self.live[t] else { continue };
            let tr = &self.pcfg.transitions[t];
            let here = lp.template.at(tr.source).expect("template");
            let mut idx = 0;
            match role(t) {
                Role::Strict => {
                    for f in pcfg::pre_expectation(self.pcfg, |l| lp.template.at(l), tr)? {
                        let mut cons = minus(&f, &here);
                        cons.constant.add_constant(&self.opts.c);
                        self.encode(&mut lp, &tr.name(), &mut idx, a, &cons);
                    }
                    self.encode(&mut lp, &tr.name(), &mut idx, a, &neg(&here));
                }
                Role::NonIncrease => {
                    for s in pcfg::successors(self.pcfg, |l| lp.template.at(l), tr)? {
                        if let Some(v) = s.unbounded_var {
                            if let Some(k) = lp.template.coeff_unknown(s.target, v) {
                                lp.model.add_eq(LinExpr::var(k));
                            }
                        }
                        for e in &s.exprs {
                            self.encode(&mut lp, &tr.name(), &mut idx, a, &minus(e, &here));
                        }
                    }
                }
                Role::ExpNonIncrease => {
                    for f in pcfg::pre_expectation(self.pcfg, |l| lp.template.at(l), tr)? {
                        self.encode(&mut lp, &tr.name(), &mut idx, a, &minus(&f, &here));
                    }
                }
            }
        }
        Ok(self.solve(&lp)?.map(|values| {
            (
                lp.template.extract(&values),
                TracedLp {
                    encodings: lp.encodings,
                    values,
                },
            )
        }))
    }

    /// Whether a relaxation of every exact-rank set containing `strict` is
    /// feasible.
    ///
    /// For a transition without probabilistic choice, strict decrease
    /// implies worst-case non-increase, so it may be required to be
    /// non-increasing whatever set it ends up in; the same holds for every
    /// transition outside `cand`. Any other transition is at least
    /// non-increasing in expectation.
    fn relaxed(
        &self,
        u: &[TransId],
        cand: &[TransId],
        strict: &[TransId],
    ) -> Result<bool, SynthError> {
        let role = |s: TransId| {
            let tr = &self.pcfg.transitions[s];
            if strict.contains(&s) {
                Role::Strict
            } else if (!tr.is_probabilistic() && !has_sampling(tr)) || !cand.contains(&s) {
                Role::NonIncrease
            } else {
                Role::ExpNonIncrease
            }
        };
        Ok(self.attempt_roles(u, role)?.is_some())
    }

    /// Transitions that can belong to some feasible exact-rank set. Excluding
    /// more transitions strengthens the requirements, so this is iterated to
    /// a fixpoint.
    fn emc_candidates(&self, u: &[TransId]) -> Result<Vec<TransId>, SynthError> {
        let mut cand: Vec<TransId> = u.to_vec();
        loop {
            let mut next = Vec::new();
            for &t in &cand {
                if self.live[t].is_none() || self.relaxed(u, &cand, &[t])? {
                    next.push(t);
                }
            }
            if next.len() == cand.len() {
                return Ok(cand);
            }
            cand = next;
        }
    }

    /// Candidate pairs that no feasible set contains together.
    fn emc_clashes(
        &self,
        u: &[TransId],
        cand: &[TransId],
    ) -> Result<Vec<(TransId, TransId)>, SynthError> {
        let live: Vec<TransId> = cand
            .iter()
            .copied()
            .filter(|&t| self.live[t].is_some())
            .collect();
        let pairs: Vec<(TransId, TransId)> = live
            .iter()
            .enumerate()
            .flat_map(|(i, &a)| live[i + 1..].iter().map(move |&b| (a, b)))
            .collect();
        let verdicts = pairs
            .par_iter()
            .map(|&(a, b)| self.relaxed(u, cand, &[a, b]))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(pairs
            .into_iter()
            .zip(verdicts)
            .filter(|(_, ok)| !ok)
            .map(|(p, _)| p)
            .collect())
    }

    fn attempt_class(
        &self,
        u: &[TransId],
    ) -> Result<Option<(Vec<LinExpr>, Vec<TransId>, TracedLp)>, SynthError> {
        if self.opts.strategy != Strategy::Emc {
            for tset in class_enumerate(self.opts.strategy, u) {
                if let Some((eta, tr)) = self.attempt_strict(u, &tset)? {
                    return Ok(Some((eta, tset, tr)));
                }
            }
            return Ok(None);
        }
        // Every feasible set lies inside the candidates and avoids the
        // clashing pairs, so the surviving subsets visit the feasible sets in
        // the same order as enumerating subsets of `u`. Equal-size sets are
        // independent; the first in order wins.
        let cand = self.emc_candidates(u)?;
        let clashes = self.emc_clashes(u, &cand)?;
        let candidates: Vec<Vec<TransId>> = class_enumerate(self.opts.strategy, &cand)
            .into_iter()
            .filter(|s| !clashes.iter().any(|(a, b)| s.contains(a) && s.contains(b)))
            .collect();
        let mut start = 0;
        while start < candidates.len() {
            let size = candidates[start].len();
            let end = candidates[start..]
                .iter()
                .position(|c| c.len() != size)
                .map_or(candidates.len(), |p| start + p);
            let found = candidates[start..end]
                .par_iter()
                .map(|tset| {
                    self.attempt_strict(u, tset)
                        .map(|r| r.map(|(eta, tr)| (eta, tset.clone(), tr)))
                })
                .find_first(|r| !matches!(r, Ok(None)));
            match found {
                Some(r) => return r,
                None => start = end,
            }
        }
        Ok(None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Strict,
    NonIncrease,
    ExpNonIncrease,
}

fn has_sampling(t: &Transition) -> bool {
    matches!(
        &t.update,
        Some(Update {
            elem: UpdateElem::Sample { .. },
            ..
        })
    )
}

/// Synthesize a certificate for `pcfg` under `inv`.
pub fn synthesize(
    pcfg: &Pcfg,
    inv: &[Polyhedron],
    opts: &Options,
) -> Result<Synthesized, SynthError> {
    if !pcfg.is_linear() {
        return Err(SynthError::Unsupported(
            "parametric branching probabilities are outside the linear fragment".into(),
        ));
    }
    if opts.strategy == Strategy::Str && pcfg.has_unbounded_sampling() {
        return Err(SynthError::Unsupported(
            "STR does not support sampling from unbounded distributions".into(),
        ));
    }
    if !opts.force_invariants {
        let audit = checker::audit_invariant(pcfg, inv)
            .map_err(|e| SynthError::Unsupported(e.to_string()))?;
        if !audit.violations.is_empty() {
            return Err(SynthError::InvariantNotInductive(audit));
        }
    }
    let budget = opts.deadline.map_or_else(Budget::unlimited, Budget::until);
    let n = pcfg.num_vars();
    let live = pcfg
        .transitions
        .iter()
        .map(|t| {
            let a = pcfg.antecedent(inv, t);
            Ok(lp::find_point(&a, n, &budget)?.map(|_| a))
        })
        .collect::<Result<Vec<_>, Cancelled>>()?;
    let live_locs = inv
        .iter()
        .map(|i| Ok(lp::find_point(i, n, &budget)?.is_some()))
        .collect::<Result<Vec<_>, Cancelled>>()?;
    let engine = Engine {
        pcfg,
        inv,
        opts,
        live,
        live_locs,
        budget,
    };

    let nlocs = pcfg.locations.len();
    let mut unranked: Vec<TransId> = pcfg.proper_transitions().map(|t| t.id).collect();
    let mut comps: Vec<Vec<LinExpr>> = Vec::new();
    let mut levels = vec![0usize; pcfg.transitions.len()];
    let mut out = Synthesized {
        eta: MeasurableMap::zeros(nlocs, 0),
        lv: LevelMap(levels.clone()),
        branches: Vec::new(),
        ranked: Vec::new(),
        dim_times: Vec::new(),
        trace: Vec::new(),
    };
    let assemble = |comps: &[Vec<LinExpr>], levels: &[usize], out: &mut Synthesized| {
        out.eta = MeasurableMap {
            dim: comps.len(),
            exprs: (0..nlocs)
                .map(|l| comps.iter().map(|c| c[l].clone()).collect())
                .collect(),
        };
        out.lv = LevelMap(levels.to_vec());
    };
    while !unranked.is_empty() {
        if comps.len() == opts.max_dim {
            return Err(SynthError::MaxDim { unranked });
        }
        let started = Instant::now();
        let mut found = engine
            .attempt_nonneg(&unranked)?
            .map(|(e, r, t)| (e, r, t, BranchChoice::NonNeg));
        if found.is_none() {
            found = engine
                .attempt_class(&unranked)?
                .map(|(e, r, t)| (e, r, t, BranchChoice::StrictDecrease));
        }
        let Some((eta, ranked, traced, choice)) = found else {
            assemble(&comps, &levels, &mut out);
            return Err(SynthError::NoProgress {
                unranked,
                partial: Box::new(out),
            });
        };
        comps.push(eta);
        let k = comps.len();
        for &t in &ranked {
            levels[t] = k;
        }
        unranked.retain(|t| !ranked.contains(t));
        out.branches.push(choice);
        out.ranked.push(ranked);
        out.dim_times.push(started.elapsed().as_secs_f64());
        if opts.trace {
            out.trace.push(traced);
        }
    }
    assemble(&comps, &levels, &mut out);
    Ok(out)
}

/// Certificate document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub strategy: Strategy,
    pub c: Rational,
    pub dimension: usize,
    pub vars: Vec<String>,
    pub locations: Vec<LocationEta>,
    pub levels: Vec<TransitionLevel>,
    pub branches: Vec<BranchChoice>,
    pub ranked: Vec<Vec<String>>,
    pub timings: Timings,
}

/// `eta[k]` is `[constant, coefficient of each variable]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationEta {
    pub name: String,
    pub eta: Vec<Vec<Rational>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionLevel {
    pub transition: String,
    pub level: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_secs: f64,
    pub per_dimension_secs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CertificateError {
    #[error("certificate variables {0:?} do not match the program")]
    Vars(Vec<String>),
    #[error("certificate has no entry for location {0}")]
    MissingLocation(String),
    #[error("certificate names unknown location {0}")]
    UnknownLocation(String),
    #[error("certificate has no level for transition {0}")]
    MissingLevel(String),
    #[error("certificate names unknown transition {0}")]
    UnknownTransition(String),
    #[error("location {0} has a malformed coefficient vector")]
    Shape(String),
}

impl Certificate {
    pub fn new(
        pcfg: &Pcfg,
        s: &Synthesized,
        strategy: Strategy,
        c: &Rational,
        total_secs: f64,
    ) -> Self {
        let locations = pcfg
            .locations
            .iter()
            .enumerate()
            .map(|(l, loc)| LocationEta {
                name: loc.name.clone(),
                eta: s.eta.exprs[l]
                    .iter()
                    .map(|e| {
                        std::iter::once(e.constant_term().clone())
                            .chain((0..pcfg.num_vars()).map(|v| e.coeff(v)))
                            .collect()
                    })
                    .collect(),
            })
            .collect();
        Certificate {
            strategy,
            c: c.clone(),
            dimension: s.dimension(),
            vars: pcfg.vars.clone(),
            locations,
            levels: pcfg
                .transitions
                .iter()
                .map(|t| TransitionLevel {
                    transition: t.name(),
                    level: s.lv.get(t.id),
                })
                .collect(),
            branches: s.branches.clone(),
            ranked: s
                .ranked
                .iter()
                .map(|r| r.iter().map(|&t| pcfg.transitions[t].name()).collect())
                .collect(),
            timings: Timings {
                total_secs,
                per_dimension_secs: s.dim_times.clone(),
            },
        }
    }

    /// Rebuild `(η, Lv)` against `pcfg`, matching locations and transitions by name.
    pub fn to_maps(&self, pcfg: &Pcfg) -> Result<(MeasurableMap, LevelMap), CertificateError> {
        if self.vars != pcfg.vars {
            return Err(CertificateError::Vars(self.vars.clone()));
        }
        let mut eta = MeasurableMap::zeros(pcfg.locations.len(), self.dimension);
        let mut seen = vec![false; pcfg.locations.len()];
        for row in &self.locations {
            let l = pcfg
                .loc_by_name(&row.name)
                .ok_or_else(|| CertificateError::UnknownLocation(row.name.clone()))?;
            if row.eta.len() != self.dimension
                || row.eta.iter().any(|c| c.len() != pcfg.num_vars() + 1)
            {
                return Err(CertificateError::Shape(row.name.clone()));
            }
            eta.exprs[l] = row
                .eta
                .iter()
                .map(|c| LinExpr::from_parts(c[1..].iter().cloned().enumerate(), c[0].clone()))
                .collect();
            seen[l] = true;
        }
        if let Some(l) = seen.iter().position(|s| !s) {
            return Err(CertificateError::MissingLocation(
                pcfg.loc_name(l).to_string(),
            ));
        }
        let mut lv = vec![None; pcfg.transitions.len()];
        for tl in &self.levels {
            let t = pcfg
                .trans_by_name(&tl.transition)
                .ok_or_else(|| CertificateError::UnknownTransition(tl.transition.clone()))?;
            lv[t] = Some(tl.level);
        }
        let lv = lv
            .into_iter()
            .enumerate()
            .map(|(t, x)| {
                x.ok_or_else(|| CertificateError::MissingLevel(pcfg.transitions[t].name()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok((eta, LevelMap(lv)))
    }
}

/// Check a synthesized result at its strategy's flavor.
pub fn verify(pcfg: &Pcfg, inv: &[Polyhedron], s: &Synthesized, opts: &Options) -> Report {
    checker::check_certificate(pcfg, inv, &s.eta, &s.lv, &opts.c, opts.strategy.flavor())
        .expect("synthesized maps are well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::load_str;

    #[test]
    fn class_orders() {
        assert_eq!(
            class_enumerate(Strategy::Smc, &[4, 2]),
            vec![vec![2], vec![4]]
        );
        assert_eq!(
            class_enumerate(Strategy::Emc, &[1, 0]),
            vec![vec![0, 1], vec![0], vec![1]]
        );
        assert!(class_enumerate(Strategy::Lwn, &[0, 1]).is_empty());
        assert!(class_enumerate(Strategy::Str, &[0]).is_empty());
        let all = class_enumerate(Strategy::Emc, &[0, 1, 2, 3]);
        assert_eq!(all.len(), 15);
        assert!(all.windows(2).all(|w| w[0].len() >= w[1].len()));
    }

    #[test]
    fn straight_line_is_one_dimensional() {
        let ld = load_str("x := 0", None).unwrap();
        for s in Strategy::ALL {
            let opts = Options::new(s);
            let r = synthesize(&ld.pcfg, &ld.inv, &opts).unwrap();
            assert_eq!(r.dimension(), 1, "{s:?}");
            assert!(verify(&ld.pcfg, &ld.inv, &r, &opts).is_ok());
        }
    }

    #[test]
    fn diverging_self_loop_makes_no_progress() {
        let ld = load_str("while true do x := x + 1 od", None).unwrap();
        for s in Strategy::ALL {
            let r = synthesize(&ld.pcfg, &ld.inv, &Options::new(s));
            assert!(matches!(r, Err(SynthError::NoProgress { .. })), "{s:?}");
        }
    }

    #[test]
    fn certificate_json_roundtrip() {
        let ld = load_str("x := 0; while x < 5 do x := x + 1 od", None).unwrap();
        let opts = Options::new(Strategy::Smc);
        let r = synthesize(&ld.pcfg, &ld.inv, &opts).unwrap();
        let cert = Certificate::new(&ld.pcfg, &r, Strategy::Smc, &opts.c, 0.0);
        let json = serde_json::to_string(&cert).unwrap();
        let back: Certificate = serde_json::from_str(&json).unwrap();
        let (eta, lv) = back.to_maps(&ld.pcfg).unwrap();
        assert_eq!((eta, lv), (r.eta, r.lv));
    }

    #[test]
    fn subsets_are_lexicographic() {
        assert_eq!(
            subsets_of_size(&[1, 2, 3], 2),
            vec![vec![1, 2], vec![1, 3], vec![2, 3]]
        );
        assert_eq!(subsets_of_size(&[7], 1), vec![vec![7]]);
    }
}
