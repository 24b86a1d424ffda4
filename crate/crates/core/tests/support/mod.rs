//! Test oracles shared by the integration suites.

#![allow(dead_code)]

use lexrsm::lp::{self, Budget, MaxResult};
use lexrsm::{LinConstraint, LinExpr, Polyhedron, Rational};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn corpus(rel: &str) -> std::path::PathBuf {
    std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(rel)
}

/// `closure(p)` intersected with `[-bound, bound]^nvars`.
pub fn boxed(p: &Polyhedron, nvars: usize, bound: i64) -> Polyhedron {
    let mut q = p.closure();
    for v in 0..nvars {
        q.push(LinConstraint::le(LinExpr::from_parts(
            [(v, Rational::one())],
            Rational::from(-bound),
        )));
        q.push(LinConstraint::le(LinExpr::from_parts(
            [(v, -Rational::one())],
            Rational::from(-bound),
        )));
    }
    q
}

/// Points of `closure(p) ∩ [-bound, bound]^nvars`: the extreme points found
/// by maximizing random integer directions, then random convex combinations
/// of them with small integer weights. Works for lower-dimensional `p`,
/// where rejection sampling would never hit. Empty when `p` is.
pub fn sample_points(
    p: &Polyhedron,
    nvars: usize,
    n: usize,
    bound: i64,
    seed: u64,
) -> Vec<Vec<Rational>> {
    let q = boxed(p, nvars, bound);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vertices: Vec<Vec<Rational>> = Vec::new();
    for _ in 0..(2 * nvars + 4) {
        let dir = LinExpr::from_parts(
            (0..nvars).map(|v| (v, Rational::from(rng.random_range(-3..=3i64)))),
            Rational::zero(),
        );
        match lp::maximize(&q, &dir, nvars, &Budget::unlimited()).expect("unlimited") {
            MaxResult::Empty => return Vec::new(),
            MaxResult::Optimal { point, .. } => {
                let point: Vec<Rational> = point.into_iter().take(nvars).collect();
                if !vertices.contains(&point) {
                    vertices.push(point);
                }
            }
            MaxResult::Unbounded { .. } => unreachable!("boxed polyhedron"),
        }
    }
    let mut out = vertices.clone();
    while out.len() < n {
        let w: Vec<i64> = vertices.iter().map(|_| rng.random_range(0..=6)).collect();
        let total: i64 = w.iter().sum();
        if total == 0 {
            continue;
        }
        let point = (0..nvars)
            .map(|v| {
                let s: Rational = vertices
                    .iter()
                    .zip(&w)
                    .map(|(x, &k)| &x[v] * &Rational::from(k))
                    .sum();
                s / Rational::from(total)
            })
            .collect();
        out.push(point);
    }
    out.truncate(n);
    out
}

/// Largest variable index mentioned, plus one.
pub fn nvars_of(p: &Polyhedron, e: &LinExpr) -> usize {
    p.constraints
        .iter()
        .flat_map(|c| c.expr.vars())
        .chain(e.vars())
        .max()
        .map_or(0, |v| v + 1)
}
