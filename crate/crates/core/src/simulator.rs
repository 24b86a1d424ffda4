//! Concrete pCFG interpreter and Monte-Carlo termination estimates.
//!
//! State is `f64`, so guards at boundary values are evaluated approximately.
//! A run that never terminates under the schedulers tried refutes almost-sure
//! termination; frequencies of 1 never prove it.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linexpr::{LinExpr, Rel};
use crate::pcfg::{Distribution, LocId, Pcfg, TransId, UpdateElem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NdetChoice {
    Lo,
    Hi,
}

/// Location name → transition name, and transition name → end of the
/// `ndet` range, for transitions with a nondeterministic update.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyTable {
    #[serde(default)]
    pub transitions: BTreeMap<String, String>,
    #[serde(default)]
    pub ndet: BTreeMap<String, NdetChoice>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheduler {
    /// Uniform choice among enabled transitions and over `ndet` ranges.
    UniformRandom(u64),
    /// Lowest-numbered enabled transition; `ndet` takes the low end.
    FirstEnabled,
    /// Table lookup; unlisted or disabled entries fall back to the lowest
    /// enabled transition and the low end.
    PolicyTable(PolicyTable),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunOutcome {
    Terminated(u64),
    Timeout,
    /// No guard was enabled at this location and step.
    Deadlock {
        location: LocId,
        step: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("initial valuation has {got} values, the program has {want} variables")]
    Dimension { got: usize, want: usize },
    #[error("policy names unknown {0}")]
    Policy(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub n_runs: u64,
    pub n_terminated: u64,
    pub n_timeout: u64,
    pub n_deadlock: u64,
    pub mean_steps: Option<f64>,
    pub max_steps: u64,
    pub frequency: f64,
    /// Wilson score 95% interval on the termination frequency.
    pub wilson95: (f64, f64),
}

impl RunStats {
    pub fn render(&self) -> String {
        let mean = self
            .mean_steps
            .map_or("-".to_string(), |m| format!("{m:.2}"));
        format!(
            "runs {}  terminated {}  timeout {}  deadlock {}\nfrequency {:.6}  95% [{:.6}, {:.6}]  mean steps {}  cap {}\n\
             note: simulation can refute almost-sure termination under the schedulers run, never confirm it\n",
            self.n_runs,
            self.n_terminated,
            self.n_timeout,
            self.n_deadlock,
            self.frequency,
            self.wilson95.0,
            self.wilson95.1,
            mean,
            self.max_steps
        )
    }
}

/// Wilson score interval at `z = 1.96`.
pub fn wilson(successes: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let (n, p) = (n as f64, successes as f64 / n as f64);
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

struct Affine {
    terms: Vec<(usize, f64)>,
    constant: f64,
}

impl Affine {
    fn new(e: &LinExpr) -> Self {
        Affine {
            terms: e.terms().map(|(v, c)| (v, c.to_f64())).collect(),
            constant: e.constant_term().to_f64(),
        }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .fold(self.constant, |acc, &(v, c)| acc + c * x[v])
    }
}

enum Assign {
    Det(Affine),
    Uniform(Affine, f64, f64),
    Normal(Affine, Normal<f64>),
    Ndet(Affine, f64, f64),
}

struct Compiled {
    id: TransId,
    guard: Vec<(Affine, bool)>,
    branches: Vec<(f64, LocId)>,
    pow2: Option<usize>,
    update: Option<(usize, Assign)>,
}

/// A pcfg lowered to floating point for fast stepping.
pub struct Machine {
    nvars: usize,
    l_in: LocId,
    l_out: LocId,
    outgoing: Vec<Vec<Compiled>>,
}

impl Machine {
    pub fn new(pcfg: &Pcfg) -> Self {
        let mut outgoing: Vec<Vec<Compiled>> =
            (0..pcfg.locations.len()).map(|_| Vec::new()).collect();
        for t in pcfg.proper_transitions() {
            let update = t.update.as_ref().map(|u| {
                let a = match &u.elem {
                    UpdateElem::Det(e) => Assign::Det(Affine::new(e)),
                    UpdateElem::Sample { base, dist } => match dist {
                        Distribution::Dirac(v) => {
                            let mut b = Affine::new(base);
                            b.constant += v.to_f64();
                            Assign::Det(b)
                        }
                        Distribution::Uniform(lo, hi) => {
                            Assign::Uniform(Affine::new(base), lo.to_f64(), hi.to_f64())
                        }
                        Distribution::Normal(m, s) => Assign::Normal(
                            Affine::new(base),
                            Normal::new(m.to_f64(), s.to_f64()).expect("validated deviation"),
                        ),
                    },
                    UpdateElem::Ndet { base, lo, hi } => {
                        Assign::Ndet(Affine::new(base), lo.to_f64(), hi.to_f64())
                    }
                };
                (u.var, a)
            });
            outgoing[t.source].push(Compiled {
                id: t.id,
                guard: t
                    .guard
                    .constraints
                    .iter()
                    .map(|c| (Affine::new(&c.expr), c.rel == Rel::Lt))
                    .collect(),
                branches: t
                    .branches
                    .iter()
                    .map(|b| (b.prob.to_f64(), b.target))
                    .collect(),
                pow2: t.pow2_prob,
                update,
            });
        }
        Machine {
            nvars: pcfg.num_vars(),
            l_in: pcfg.l_in,
            l_out: pcfg.l_out,
            outgoing,
        }
    }
}

/// A scheduler resolved against a pcfg's names.
enum Policy {
    Uniform(u64),
    First,
    Table {
        pick: Vec<Option<TransId>>,
        hi: Vec<bool>,
    },
}

impl Policy {
    fn new(pcfg: &Pcfg, s: &Scheduler) -> Result<Self, SimError> {
        Ok(match s {
            Scheduler::UniformRandom(seed) => Policy::Uniform(*seed),
            Scheduler::FirstEnabled => Policy::First,
            Scheduler::PolicyTable(table) => {
                let mut pick = vec![None; pcfg.locations.len()];
                for (loc, tr) in &table.transitions {
                    let l = pcfg
                        .loc_by_name(loc)
                        .ok_or_else(|| SimError::Policy(format!("location {loc}")))?;
                    pick[l] = Some(
                        pcfg.trans_by_name(tr)
                            .ok_or_else(|| SimError::Policy(format!("transition {tr}")))?,
                    );
                }
                let mut hi = vec![false; pcfg.transitions.len()];
                for (tr, c) in &table.ndet {
                    let t = pcfg
                        .trans_by_name(tr)
                        .ok_or_else(|| SimError::Policy(format!("transition {tr}")))?;
                    hi[t] = *c == NdetChoice::Hi;
                }
                Policy::Table { pick, hi }
            }
        })
    }
}

fn run(
    m: &Machine,
    policy: &Policy,
    init: &[f64],
    max_steps: u64,
    seed: u64,
    stream: u64,
) -> RunOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut sched_rng = match policy {
        Policy::Uniform(s) => {
            let mut r = ChaCha8Rng::seed_from_u64(*s);
            r.set_stream(stream);
            Some(r)
        }
        _ => None,
    };
    let mut x = init.to_vec();
    let mut loc = m.l_in;
    let mut enabled: Vec<usize> = Vec::new();
    for step in 0..max_steps {
        if loc == m.l_out {
            return RunOutcome::Terminated(step);
        }
        let outs = &m.outgoing[loc];
        enabled.clear();
        enabled.extend(
            outs.iter()
                .enumerate()
                .filter(|(_, t)| {
                    t.guard.iter().all(|(g, strict)| {
                        let v = g.eval(&x);
                        if *strict {
                            v < 0.0
                        } else {
                            v <= 0.0
                        }
                    })
                })
                .map(|(i, _)| i),
        );
        if enabled.is_empty() {
            return RunOutcome::Deadlock {
                location: loc,
                step,
            };
        }
        let (choice, hi) = match (policy, sched_rng.as_mut()) {
            (Policy::Uniform(_), Some(r)) => (enabled[r.random_range(0..enabled.len())], None),
            (Policy::Table { pick, hi }, _) => {
                let i = pick[loc]
                    .and_then(|want| enabled.iter().copied().find(|&i| outs[i].id == want))
                    .unwrap_or(enabled[0]);
                (i, Some(hi[outs[i].id]))
            }
            _ => (enabled[0], Some(false)),
        };
        let t = &outs[choice];
        let target = match t.pow2 {
            Some(v) => {
                let p = (-x[v]).exp2();
                if rng.random::<f64>() < p {
                    t.branches[0].1
                } else {
                    t.branches[1].1
                }
            }
            None if t.branches.len() == 1 => t.branches[0].1,
            None => {
                let mut u = rng.random::<f64>();
                let mut target = t.branches[t.branches.len() - 1].1;
                for &(p, l) in &t.branches {
                    if u < p {
                        target = l;
                        break;
                    }
                    u -= p;
                }
                target
            }
        };
        if let Some((var, a)) = &t.update {
            x[*var] = match a {
                Assign::Det(e) => e.eval(&x),
                Assign::Uniform(e, lo, hi) => e.eval(&x) + lo + (hi - lo) * rng.random::<f64>(),
                Assign::Normal(e, n) => e.eval(&x) + n.sample(&mut rng),
                Assign::Ndet(e, lo, h) => {
                    e.eval(&x)
                        + match (hi, sched_rng.as_mut()) {
                            (Some(true), _) => *h,
                            (_, Some(r)) => lo + (h - lo) * r.random::<f64>(),
                            _ => *lo,
                        }
                }
            };
        }
        loc = target;
    }
    if loc == m.l_out {
        RunOutcome::Terminated(max_steps)
    } else {
        RunOutcome::Timeout
    }
}

/// One run from `l_in` with valuation `init`.
pub fn run_once(
    pcfg: &Pcfg,
    scheduler: &Scheduler,
    init: &[f64],
    max_steps: u64,
    seed: u64,
) -> Result<RunOutcome, SimError> {
    let m = Machine::new(pcfg);
    if init.len() != m.nvars {
        return Err(SimError::Dimension {
            got: init.len(),
            want: m.nvars,
        });
    }
    Ok(run(
        &m,
        &Policy::new(pcfg, scheduler)?,
        init,
        max_steps,
        seed,
        0,
    ))
}

/// `n_runs` independent runs; run `i` draws from stream `i` of the master
/// seed, so results do not depend on thread scheduling.
pub fn estimate_termination(
    pcfg: &Pcfg,
    scheduler: &Scheduler,
    init: &[f64],
    n_runs: u64,
    max_steps: u64,
    seed: u64,
) -> Result<RunStats, SimError> {
    let m = Machine::new(pcfg);
    if init.len() != m.nvars {
        return Err(SimError::Dimension {
            got: init.len(),
            want: m.nvars,
        });
    }
    let policy = Policy::new(pcfg, scheduler)?;
    let (term, steps, timeout, deadlock) = (0..n_runs)
        .into_par_iter()
        .map(|i| match run(&m, &policy, init, max_steps, seed, i) {
            RunOutcome::Terminated(s) => (1u64, s as u128, 0u64, 0u64),
            RunOutcome::Timeout => (0, 0, 1, 0),
            RunOutcome::Deadlock { .. } => (0, 0, 0, 1),
        })
        .reduce(
            || (0, 0, 0, 0),
            |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2, a.3 + b.3),
        );
    Ok(RunStats {
        n_runs,
        n_terminated: term,
        n_timeout: timeout,
        n_deadlock: deadlock,
        mean_steps: (term > 0).then(|| steps as f64 / term as f64),
        max_steps,
        frequency: term as f64 / n_runs.max(1) as f64,
        wilson95: wilson(term, n_runs),
    })
}
