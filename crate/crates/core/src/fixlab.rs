//! Finite tree-shaped probability spaces carrying LexRSM instances.
//!
//! A node is a history up to time `t`; its children are the one-step
//! extensions with their conditional probabilities, so conditional
//! expectation given the history is a weighted sum over children. Clauses are
//! checked only at nodes with `t < horizon - 1`; the frontier nodes are
//! leaves and have no successors to average over.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub t: usize,
    /// Probability of this edge given the parent.
    pub prob: Rational,
    #[serde(rename = "X")]
    pub x: Vec<Rational>,
    /// 0 once stopped, else the ranking dimension (1-based).
    #[serde(rename = "Lv")]
    pub lv: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiniteInstance {
    pub horizon: usize,
    pub c: Rational,
    pub root: Node,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InstanceError {
    #[error("node {path:?}: {msg}")]
    Malformed { path: Vec<usize>, msg: String },
    #[error("conditional expectation of a leaf")]
    Leaf,
    #[error("dimension {0} out of range")]
    Dimension(usize),
}

impl Node {
    pub fn new(t: usize, prob: Rational, x: Vec<Rational>, lv: usize) -> Self {
        Node {
            t,
            prob,
            x,
            lv,
            label: None,
            children: Vec::new(),
        }
    }

    pub fn labelled(mut self, label: &str) -> Self {
        self.label = Some(label.to_string());
        self
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    fn visit<'a>(&'a self, path: &mut Vec<usize>, f: &mut impl FnMut(&[usize], &'a Node)) {
        f(path, self);
        for (i, c) in self.children.iter().enumerate() {
            path.push(i);
            c.visit(path, f);
            path.pop();
        }
    }
}

/// `E[X_{t+1}[k] | F_t]` at `node`, for a 1-based dimension `k`.
pub fn cond_expect(node: &Node, k: usize) -> Result<Rational, InstanceError> {
    if node.is_leaf() {
        return Err(InstanceError::Leaf);
    }
    if k == 0 || k > node.x.len() {
        return Err(InstanceError::Dimension(k));
    }
    Ok(node.children.iter().map(|c| &c.prob * &c.x[k - 1]).sum())
}

/// `E[f(child) | F_t]` for an arbitrary child statistic.
fn expect(node: &Node, f: impl Fn(&Node) -> Rational) -> Rational {
    node.children.iter().map(|c| &c.prob * &f(c)).sum()
}

impl FiniteInstance {
    pub fn dimension(&self) -> usize {
        self.root.x.len()
    }

    pub fn nodes(&self) -> Vec<(Vec<usize>, &Node)> {
        let mut out = Vec::new();
        self.root
            .visit(&mut Vec::new(), &mut |p, n| out.push((p.to_vec(), n)));
        out
    }

    /// Structural checks: probabilities, times, shapes and stopping.
    pub fn validate(&self) -> Result<(), InstanceError> {
        let n = self.dimension();
        if self.horizon == 0 {
            return Err(InstanceError::Malformed {
                path: vec![],
                msg: "horizon must be positive".into(),
            });
        }
        if !self.root.prob.is_one() || self.root.t != 0 {
            return Err(InstanceError::Malformed {
                path: vec![],
                msg: "root must have t = 0 and probability 1".into(),
            });
        }
        let mut err = None;
        self.root.visit(&mut Vec::new(), &mut |path, node| {
            if err.is_some() {
                return;
            }
            let bad = |msg: String| {
                Some(InstanceError::Malformed {
                    path: path.to_vec(),
                    msg,
                })
            };
            if node.x.len() != n {
                err = bad(format!("X has {} components, expected {n}", node.x.len()));
            } else if node.lv > n {
                err = bad(format!("Lv {} exceeds dimension {n}", node.lv));
            } else if node.is_leaf() && node.t + 1 != self.horizon {
                err = bad(format!(
                    "leaf at t = {} before the horizon {}",
                    node.t, self.horizon
                ));
            } else if !node.is_leaf() {
                let total: Rational = node.children.iter().map(|c| c.prob.clone()).sum();
                if !total.is_one() {
                    err = bad(format!("children probabilities sum to {total}"));
                } else if let Some(c) = node.children.iter().find(|c| !c.prob.is_positive()) {
                    err = bad(format!("non-positive edge probability {}", c.prob));
                } else if node.children.iter().any(|c| c.t != node.t + 1) {
                    err = bad("child time is not t + 1".into());
                } else if node.lv == 0 && node.children.iter().any(|c| c.lv != 0 || c.x != node.x) {
                    err = bad("process is not stopped after Lv = 0".into());
                }
            }
        });
        err.map_or(Ok(()), Err)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Flavor {
    /// Uniform well-foundedness with the given bottom.
    Un(Rational),
    Lw,
    Sc,
    /// Leftward non-negativity plus expected leftward non-negativity.
    Glex,
    RankingOnly,
}

impl fmt::Display for Flavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Flavor::Un(b) => write!(f, "un({b})"),
            Flavor::Lw => f.write_str("lw"),
            Flavor::Sc => f.write_str("sc"),
            Flavor::Glex => f.write_str("glex"),
            Flavor::RankingOnly => f.write_str("ranking"),
        }
    }
}

impl FromStr for Flavor {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "lw" => Ok(Flavor::Lw),
            "sc" => Ok(Flavor::Sc),
            "glex" => Ok(Flavor::Glex),
            "ranking" => Ok(Flavor::RankingOnly),
            _ => match s.strip_prefix("un(").and_then(|r| r.strip_suffix(')')) {
                Some(b) => b
                    .parse()
                    .map(Flavor::Un)
                    .map_err(|e| format!("bad bottom: {e}")),
                None => Err(format!(
                    "unknown flavor {s} (expected un(b), lw, sc, glex or ranking)"
                )),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FixClause {
    Ranking,
    NonNegativity,
    ExpectedLeftward,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClauseOutcome {
    pub path: Vec<usize>,
    pub t: usize,
    /// 1-based dimension.
    pub k: usize,
    pub clause: FixClause,
    pub holds: bool,
    /// The ranking clause was waived by the γ-relaxation.
    #[serde(default)]
    pub waived: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlavorVerdict {
    pub outcomes: Vec<ClauseOutcome>,
    pub ok: bool,
}

impl FlavorVerdict {
    pub fn failures(&self) -> impl Iterator<Item = &ClauseOutcome> {
        self.outcomes.iter().filter(|o| !o.holds)
    }
}

fn check(
    inst: &FiniteInstance,
    flavor: &Flavor,
    relax: Option<(&Rational, &Rational)>,
) -> FlavorVerdict {
    let n = inst.dimension();
    let zero = Rational::zero();
    let mut outcomes = Vec::new();
    for (path, node) in inst.nodes() {
        if node.t + 1 >= inst.horizon {
            continue;
        }
        let mut push = |k: usize, clause: FixClause, holds: bool, waived: bool| {
            outcomes.push(ClauseOutcome {
                path: path.clone(),
                t: node.t,
                k,
                clause,
                holds,
                waived,
            });
        };
        if let Flavor::Un(bottom) = flavor {
            for k in 1..=n {
                push(k, FixClause::NonNegativity, node.x[k - 1] >= *bottom, false);
            }
        }
        if node.lv == 0 {
            continue;
        }
        for k in 1..=node.lv {
            let cur = &node.x[k - 1];
            let waived = relax.is_some_and(|(bottom, gamma)| {
                cur > bottom
                    && expect(node, |c| {
                        if c.x[k - 1] == *bottom {
                            Rational::one()
                        } else {
                            Rational::zero()
                        }
                    }) >= *gamma
            });
            let bound = if k == node.lv {
                cur - &inst.c
            } else {
                cur.clone()
            };
            let holds = waived || expect(node, |c| c.x[k - 1].clone()) <= bound;
            push(k, FixClause::Ranking, holds, waived);
            match flavor {
                Flavor::Lw | Flavor::Glex => push(k, FixClause::NonNegativity, *cur >= zero, false),
                Flavor::Sc if k == node.lv => {
                    push(k, FixClause::NonNegativity, *cur >= zero, false)
                }
                _ => {}
            }
            if *flavor == Flavor::Glex {
                let e = expect(node, |c| {
                    if k > c.lv {
                        c.x[k - 1].clone()
                    } else {
                        Rational::zero()
                    }
                });
                push(k, FixClause::ExpectedLeftward, e >= zero, false);
            }
        }
    }
    let ok = outcomes.iter().all(|o| o.holds);
    FlavorVerdict { outcomes, ok }
}

/// The ranking condition with the instance's constant plus the flavor's
/// non-negativity, at every node before the frontier.
pub fn check_flavor(inst: &FiniteInstance, flavor: &Flavor) -> FlavorVerdict {
    check(inst, flavor, None)
}

/// Replace `X[k]` by `-ε` wherever it is negative or right of the ranking
/// dimension.
pub fn eps_fix(inst: &FiniteInstance, eps: &Rational) -> FiniteInstance {
    fn go(node: &Node, eps: &Rational) -> Node {
        let x = node
            .x
            .iter()
            .enumerate()
            .map(|(i, v)| {
                if v.is_negative() || i + 1 > node.lv {
                    -eps.clone()
                } else {
                    v.clone()
                }
            })
            .collect();
        Node {
            t: node.t,
            prob: node.prob.clone(),
            x,
            lv: node.lv,
            label: node.label.clone(),
            children: node.children.iter().map(|c| go(c, eps)).collect(),
        }
    }
    FiniteInstance {
        horizon: inst.horizon,
        c: inst.c.clone(),
        root: go(&inst.root, eps),
    }
}

/// Whether the ε-fixing is a UN-LexRSM with bottom `-ε`.
pub fn is_eps_fixable(inst: &FiniteInstance, eps: &Rational) -> bool {
    check_flavor(&eps_fix(inst, eps), &Flavor::Un(-eps.clone())).ok
}

/// Whether the ε-fixing is a γ-relaxed UN-LexRSM: the ranking clause is
/// waived at `(ω, k)` when `X̃[k] > -ε` and the next value hits `-ε` with
/// conditional probability at least `γ`.
pub fn is_eps_gamma_fixable(inst: &FiniteInstance, eps: &Rational, gamma: &Rational) -> bool {
    eps_gamma_verdict(inst, eps, gamma).ok
}

pub fn eps_gamma_verdict(inst: &FiniteInstance, eps: &Rational, gamma: &Rational) -> FlavorVerdict {
    let bottom = -eps.clone();
    check(
        &eps_fix(inst, eps),
        &Flavor::Un(bottom.clone()),
        Some((&bottom, gamma)),
    )
}

/// Which flavor a generated instance satisfies by construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Kind {
    Glex,
    /// Single path (trivial probability space) with SC non-negativity.
    ScTrivialSpace,
    Lw,
}

impl FromStr for Kind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "glex" => Ok(Kind::Glex),
            "sc" | "sc-trivial" => Ok(Kind::ScTrivialSpace),
            "lw" => Ok(Kind::Lw),
            _ => Err(format!("unknown instance kind {s}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub dim: usize,
    pub horizon: usize,
    pub max_children: usize,
}

impl Default for Shape {
    fn default() -> Self {
        Shape {
            dim: 3,
            horizon: 5,
            max_children: 3,
        }
    }
}

/// A generated instance and the clause repairs applied while building it.
#[derive(Debug, Clone)]
pub struct Generated {
    pub instance: FiniteInstance,
    pub repairs: Vec<String>,
}

struct Gen {
    rng: ChaCha8Rng,
    kind: Kind,
    shape: Shape,
    c: Rational,
    repairs: Vec<String>,
}

impl Gen {
    fn value(&mut self, lo: i64, hi: i64) -> Rational {
        Rational::new(self.rng.random_range(lo * 2..=hi * 2), 2)
    }

    fn level(&mut self) -> usize {
        // Stopping is rare so trees stay interesting; levels are otherwise uniform.
        if self.rng.random_ratio(1, 8) {
            0
        } else {
            self.rng.random_range(1..=self.shape.dim)
        }
    }

    fn probs(&mut self, n: usize) -> Vec<Rational> {
        let w: Vec<i64> = (0..n).map(|_| self.rng.random_range(1..=4)).collect();
        let total: i64 = w.iter().sum();
        w.into_iter().map(|x| Rational::new(x, total)).collect()
    }

    fn stopped(&self, t: usize, prob: Rational, x: Vec<Rational>) -> Node {
        let mut node = Node::new(t, prob, x.clone(), 0);
        if t + 1 < self.shape.horizon {
            node.children.push(self.stopped(t + 1, Rational::one(), x));
        }
        node
    }

    /// Builds the subtree bottom-up: children first, then this node's values
    /// are sampled and raised just enough to satisfy its clauses.
    fn node(&mut self, t: usize, prob: Rational, lv: usize) -> Node {
        let n = self.shape.dim;
        let mut x: Vec<Rational> = (0..n).map(|_| self.value(-6, 10)).collect();
        if lv == 0 {
            return self.stopped(t, prob, x);
        }
        if t + 1 >= self.shape.horizon {
            for v in x.iter_mut().take(lv) {
                if v.is_negative() {
                    *v = v.abs();
                }
            }
            return Node::new(t, prob, x, lv);
        }
        let arity = match self.kind {
            Kind::ScTrivialSpace => 1,
            _ => self.rng.random_range(1..=self.shape.max_children),
        };
        let probs = self.probs(arity);
        let mut children: Vec<Node> = probs
            .into_iter()
            .map(|p| {
                let l = self.level();
                self.node(t + 1, p, l)
            })
            .collect();
        if self.kind == Kind::Glex {
            for k in 1..=lv {
                self.repair_expected_leftward(&mut children, k);
            }
        }
        let zero = Rational::zero();
        for k in 1..=lv {
            let e: Rational = children.iter().map(|c| &c.prob * &c.x[k - 1]).sum();
            let mut need = if k == lv { &e + &self.c } else { e };
            let nonneg = match self.kind {
                Kind::Glex | Kind::Lw => true,
                Kind::ScTrivialSpace => k == lv,
            };
            if nonneg {
                need = need.max(zero.clone());
            }
            if x[k - 1] < need {
                self.repairs
                    .push(format!("t={t} k={k}: raised {} to {need}", x[k - 1]));
                x[k - 1] = need;
            }
        }
        let mut node = Node::new(t, prob, x, lv);
        node.children = children;
        node
    }

    /// Raise the components that leave the left of the ranking dimension
    /// until their expectation is non-negative.
    fn repair_expected_leftward(&mut self, children: &mut [Node], k: usize) {
        let e: Rational = children
            .iter()
            .filter(|c| k > c.lv)
            .map(|c| &c.prob * &c.x[k - 1])
            .sum();
        if !e.is_negative() {
            return;
        }
        self.repairs
            .push(format!("k={k}: expected leftward value {e} raised to 0"));
        for c in children
            .iter_mut()
            .filter(|c| k > c.lv && c.x[k - 1].is_negative())
        {
            c.x[k - 1] = Rational::zero();
            if c.lv == 0 {
                let x = c.x.clone();
                *c = self.stopped(c.t, c.prob.clone(), x);
            }
        }
    }
}

/// A random instance satisfying `kind` by construction; identical for
/// identical seeds.
pub fn random_instance(kind: Kind, seed: u64, shape: Shape) -> Generated {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = [Rational::new(1, 2), Rational::one(), Rational::from_int(2)][rng.random_range(0..3)]
        .clone();
    let mut g = Gen {
        rng,
        kind,
        shape,
        c,
        repairs: Vec::new(),
    };
    let lv = g.rng.random_range(1..=shape.dim);
    let root = g.node(0, Rational::one(), lv);
    Generated {
        instance: FiniteInstance {
            horizon: shape.horizon,
            c: g.c,
            root,
        },
        repairs: g.repairs,
    }
}

/// Extend stopped leaves with constant copies up to the horizon.
fn pad_leaves(node: &mut Node, horizon: usize) {
    if node.is_leaf() && node.lv == 0 && node.t + 1 < horizon {
        let mut child = node.clone();
        child.t += 1;
        child.prob = Rational::one();
        node.children.push(child);
    }
    for c in &mut node.children {
        pad_leaves(c, horizon);
    }
}

/// Unfold a program-state graph into a tree up to `horizon`. `step` maps a
/// state to its labelled vector, level and probabilistic successors.
fn unfold<S: Clone>(
    state: S,
    horizon: usize,
    step: &impl Fn(&S) -> (String, Vec<Rational>, usize, Vec<(Rational, S)>),
) -> Node {
    fn go<S: Clone>(
        s: &S,
        t: usize,
        prob: Rational,
        horizon: usize,
        step: &impl Fn(&S) -> (String, Vec<Rational>, usize, Vec<(Rational, S)>),
    ) -> Node {
        let (label, x, lv, succ) = step(s);
        let mut node = Node::new(t, prob, x, lv).labelled(&label);
        if t + 1 < horizon && lv != 0 {
            node.children = succ
                .into_iter()
                .map(|(p, s2)| go(&s2, t + 1, p, horizon, step))
                .collect();
        }
        node
    }
    let mut root = go(&state, 0, Rational::one(), horizon, step);
    pad_leaves(&mut root, horizon);
    root
}

/// States of the `prob(2^(-t))` loop: location, `x`, `t`.
type Fig3State = (u8, i64, i32);

/// The `prob(2^(-t))` loop with its leftward non-negative map
/// `(2-x, 0, 2), (2, 0, 1), (2, 0, 0), (2, -2^t, 0), (0, 0, 0)`, unfolded
/// from the loop head with `x = 0, t = 1`.
pub fn fig3_instance(horizon: usize) -> FiniteInstance {
    let r = Rational::from_int;
    let step =
        |&(loc, x, t): &Fig3State| -> (String, Vec<Rational>, usize, Vec<(Rational, Fig3State)>) {
            let one = Rational::one();
            match loc {
                1 if x == 0 => (
                    "l1".into(),
                    vec![r(2), r(0), r(2)],
                    3,
                    vec![(one, (2, x, t))],
                ),
                1 => (
                    "l1".into(),
                    vec![r(2 - x), r(0), r(2)],
                    1,
                    vec![(one, (5, x, t))],
                ),
                2 => (
                    "l2".into(),
                    vec![r(2), r(0), r(1)],
                    3,
                    vec![(one, (3, x, t + 1))],
                ),
                3 => {
                    let p = Rational::pow2(-t);
                    let q = &one - &p;
                    (
                        "l3".into(),
                        vec![r(2), r(0), r(0)],
                        2,
                        vec![(p, (4, x, t)), (q, (1, x, t))],
                    )
                }
                4 => (
                    "l4".into(),
                    vec![r(2), -Rational::pow2(t), r(0)],
                    1,
                    vec![(one, (1, 1, t))],
                ),
                _ => (
                    "l5".into(),
                    vec![r(0), r(0), r(0)],
                    0,
                    vec![(one, (5, x, t))],
                ),
            }
        };
    FiniteInstance {
        horizon,
        c: Rational::one(),
        root: unfold((1, 0, 1), horizon, &step),
    }
}

/// Smallest horizon at least 8 that contains a loop-head node of the
/// `prob(2^(-t))` instance whose ε-fixed expectation misses the ranking bound.
pub fn fig3_horizon(eps: &Rational) -> usize {
    let mut t = 2;
    while Rational::pow2(t) <= *eps {
        t += 1;
    }
    // The coin at `t` is tossed at time 2 + 3(t - 2) and needs a successor.
    (3 * (t as usize - 2) + 4).max(8)
}

/// States of the `t := 4t` loop: location, `x`, `t`.
type Fig4State = (u8, i64, i64);

/// The `t := 4t` loop with its single-component non-negative map
/// `(2-x, t+1), (2, t), (2, 4t+2), (2, -2t-4), (0, 0)`, unfolded from the
/// loop head with `x = 0, t = 1`.
pub fn fig4_instance(horizon: usize) -> FiniteInstance {
    let r = Rational::from_int;
    let step =
        |&(loc, x, t): &Fig4State| -> (String, Vec<Rational>, usize, Vec<(Rational, Fig4State)>) {
            let one = Rational::one();
            let half = Rational::new(1, 2);
            match loc {
                1 if x == 0 => ("l1".into(), vec![r(2), r(t + 1)], 2, vec![(one, (2, x, t))]),
                1 => (
                    "l1".into(),
                    vec![r(2 - x), r(t + 1)],
                    1,
                    vec![(one, (5, x, t))],
                ),
                2 => (
                    "l2".into(),
                    vec![r(2), r(t)],
                    2,
                    vec![(half.clone(), (3, x, t)), (half, (4, x, t))],
                ),
                3 => (
                    "l3".into(),
                    vec![r(2), r(4 * t + 2)],
                    2,
                    vec![(one, (1, x, 4 * t))],
                ),
                4 => (
                    "l4".into(),
                    vec![r(2), r(-2 * t - 4)],
                    1,
                    vec![(one, (1, 1, t))],
                ),
                _ => ("l5".into(), vec![r(0), r(0)], 0, vec![(one, (5, x, t))]),
            }
        };
    FiniteInstance {
        horizon,
        c: Rational::one(),
        root: unfold((1, 0, 1), horizon, &step),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn leafy(children: Vec<(Rational, i64)>) -> Node {
        let mut n = Node::new(0, Rational::one(), vec![Rational::zero()], 1);
        n.children = children
            .into_iter()
            .map(|(p, v)| Node::new(1, p, vec![Rational::from_int(v)], 1))
            .collect();
        n
    }

    #[test]
    fn conditional_expectation() {
        assert_eq!(
            cond_expect(&leafy(vec![(q(1, 2), 3), (q(1, 2), -1)]), 1).unwrap(),
            Rational::one()
        );
        assert_eq!(
            cond_expect(&leafy(vec![(Rational::one(), 5)]), 1).unwrap(),
            Rational::from_int(5)
        );
        assert_eq!(
            cond_expect(&Node::new(0, Rational::one(), vec![], 0), 1),
            Err(InstanceError::Leaf)
        );
    }

    #[test]
    fn fig4_coin_node_expectation() {
        let inst = fig4_instance(8);
        let l2 = &inst.root.children[0];
        assert_eq!(l2.label.as_deref(), Some("l2"));
        // t = 1 at the first coin: (4t + 2 - 2t - 4) / 2 = t - 1
        assert_eq!(cond_expect(l2, 2).unwrap(), Rational::zero());
    }

    #[test]
    fn eps_fix_clauses() {
        let inst = FiniteInstance {
            horizon: 1,
            c: Rational::one(),
            root: Node::new(0, Rational::one(), vec![q(3, 1), q(-5, 1), q(2, 1)], 2),
        };
        assert_eq!(
            eps_fix(&inst, &Rational::one()).root.x,
            vec![q(3, 1), q(-1, 1), q(-1, 1)]
        );
        let fixed = eps_fix(&inst, &q(1, 3));
        assert_eq!(eps_fix(&fixed, &q(1, 3)), fixed);
    }

    #[test]
    fn stopped_root_is_vacuous() {
        let mut root = Node::new(0, Rational::one(), vec![Rational::zero(); 2], 0);
        root.children
            .push(Node::new(1, Rational::one(), vec![Rational::zero(); 2], 0));
        let inst = FiniteInstance {
            horizon: 2,
            c: Rational::one(),
            root,
        };
        inst.validate().unwrap();
        for f in [
            Flavor::Un(Rational::zero()),
            Flavor::Lw,
            Flavor::Sc,
            Flavor::Glex,
            Flavor::RankingOnly,
        ] {
            assert!(check_flavor(&inst, &f).ok, "{f}");
        }
    }

    #[test]
    fn single_path_decrease() {
        let mut root = Node::new(0, Rational::one(), vec![q(3, 1)], 1);
        let mut mid = Node::new(1, Rational::one(), vec![q(2, 1)], 1);
        mid.children
            .push(Node::new(2, Rational::one(), vec![q(1, 1)], 1));
        root.children.push(mid);
        let inst = FiniteInstance {
            horizon: 3,
            c: Rational::one(),
            root,
        };
        inst.validate().unwrap();
        assert!(check_flavor(&inst, &Flavor::RankingOnly).ok);
        assert!(is_eps_fixable(&inst, &Rational::one()));
    }

    #[test]
    fn validation_errors() {
        let mut inst = fig4_instance(4);
        inst.root.children[0].prob = q(1, 2);
        assert!(inst.validate().is_err());
        let mut inst = fig4_instance(4);
        inst.horizon = 5;
        assert!(inst.validate().is_err(), "leaves before the horizon");
    }

    #[test]
    fn figure_instances_are_valid() {
        for h in [4, 8, 10] {
            fig3_instance(h).validate().unwrap();
            fig4_instance(h).validate().unwrap();
        }
    }

    #[test]
    fn horizon_grows_with_eps() {
        assert_eq!(fig3_horizon(&q(1, 10)), 8);
        assert_eq!(fig3_horizon(&q(10, 1)), 10);
        assert!(fig3_horizon(&q(100, 1)) > fig3_horizon(&q(10, 1)));
    }

    #[test]
    fn flavor_parsing() {
        assert_eq!("un(-1/2)".parse::<Flavor>().unwrap(), Flavor::Un(q(-1, 2)));
        assert_eq!("glex".parse::<Flavor>().unwrap(), Flavor::Glex);
        assert!("un(x)".parse::<Flavor>().is_err());
    }

    #[test]
    fn generators_are_deterministic_and_valid() {
        for kind in [Kind::Glex, Kind::ScTrivialSpace, Kind::Lw] {
            let a = random_instance(kind, 7, Shape::default());
            let b = random_instance(kind, 7, Shape::default());
            assert_eq!(a.instance, b.instance);
            a.instance.validate().unwrap();
        }
    }
}
