//! Per-location invariants: user annotations plus guard propagation.
//!
//! An atom is propagated to a location when every way into it passes
//! through that atom (as a guard, or carried from its source) and the
//! transition does not update a variable the atom mentions. Deterministic
//! assignments `x := e` with `x` not in `e` also contribute `x = e`. The
//! facts are the greatest fixpoint of that rule. The entry location starts
//! with no facts, and the exit location gets only its annotation.

use std::collections::BTreeSet;

use super::ast::BExpr;
use super::lower::dnf;
use super::parser::parse_bexpr;
use super::FrontendError;
use crate::linexpr::{LinConstraint, LinExpr, Polyhedron};
use crate::pcfg::{LocId, Pcfg, Transition, Update, UpdateElem};

/// Annotations as `(label, conjunction)` pairs, in file order.
pub type Annotations = Vec<(String, Polyhedron)>;

fn names_in(b: &BExpr, out: &mut BTreeSet<String>) {
    use super::ast::AExpr;
    fn a(e: &AExpr, out: &mut BTreeSet<String>) {
        match e {
            AExpr::Var(v) => {
                out.insert(v.clone());
            }
            AExpr::Num(_) => {}
            AExpr::Neg(x) => a(x, out),
            AExpr::Add(x, y)
            | AExpr::Sub(x, y)
            | AExpr::Mul(x, y)
            | AExpr::Div(x, y)
            | AExpr::Ndet(x, y) => {
                a(x, out);
                a(y, out);
            }
            AExpr::Sample(_) => {}
        }
    }
    match b {
        BExpr::True | BExpr::False => {}
        BExpr::Cmp(l, _, r) => {
            a(l, out);
            a(r, out);
        }
        BExpr::And(x, y) | BExpr::Or(x, y) => {
            names_in(x, out);
            names_in(y, out);
        }
        BExpr::Not(x) => names_in(x, out),
    }
}

/// A conjunction over the pcfg's variables.
pub fn conjunction(src: &str, vars: &[String]) -> Result<Polyhedron, String> {
    let b = parse_bexpr(src).map_err(|e| e.to_string())?;
    let mut names = BTreeSet::new();
    names_in(&b, &mut names);
    if let Some(n) = names.iter().find(|n| !vars.contains(n)) {
        return Err(format!("unknown variable {n}"));
    }
    let d = dnf(&b, false, vars).map_err(|e| e.to_string())?;
    match d.len() {
        0 => Ok(Polyhedron::new(vec![LinConstraint::le(
            crate::linexpr::LinExpr::constant(crate::rational::Rational::one()),
        )])),
        1 => Ok(Polyhedron::new(d.into_iter().next().unwrap())),
        _ => Err("annotations must be conjunctions".into()),
    }
}

/// Parse an `.inv` file: lines `label: conjunction`, `#` comments.
pub fn parse_annotations(src: &str, pcfg: &Pcfg) -> Result<Annotations, FrontendError> {
    let mut out = Vec::new();
    for (i, raw) in src.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: String| FrontendError::Annotation { line: i + 1, msg };
        let (label, body) = line
            .split_once(':')
            .ok_or_else(|| bad("expected `label: condition`".into()))?;
        let poly = conjunction(body, &pcfg.vars).map_err(bad)?;
        out.push((label.trim().to_string(), poly));
    }
    Ok(out)
}

fn intern(universe: &mut Vec<LinConstraint>, c: &LinConstraint) -> usize {
    let n = c.normalized();
    match universe.iter().position(|u| *u == n) {
        Some(i) => i,
        None => {
            universe.push(n);
            universe.len() - 1
        }
    }
}

/// `x = e` as two atoms, for a deterministic update whose right side does
/// not mention `x`.
fn assignment_atoms(t: &Transition) -> Vec<LinConstraint> {
    match &t.update {
        Some(Update {
            var,
            elem: UpdateElem::Det(e),
        }) if !e.mentions(*var) => {
            let d = &LinExpr::var(*var) - e;
            vec![LinConstraint::le(d.clone()), LinConstraint::le(-&d)]
        }
        _ => Vec::new(),
    }
}

/// Propagated facts per location, given the annotation atoms at each one.
///
/// A transition carries the facts and annotations of its source plus its
/// guard, drops atoms over the variable it updates, and adds `x = e` for a
/// deterministic `x := e`.
pub fn propagate_guards(pcfg: &Pcfg, annotated: &[Polyhedron]) -> Vec<Vec<LinConstraint>> {
    let mut universe: Vec<LinConstraint> = Vec::new();
    let ann: Vec<BTreeSet<usize>> = annotated
        .iter()
        .map(|p| {
            p.constraints
                .iter()
                .map(|c| intern(&mut universe, c))
                .collect()
        })
        .collect();
    let gen: Vec<(BTreeSet<usize>, BTreeSet<usize>)> = pcfg
        .transitions
        .iter()
        .map(|t| {
            let g = t
                .guard
                .constraints
                .iter()
                .map(|c| intern(&mut universe, c))
                .collect();
            let a = assignment_atoms(t)
                .iter()
                .map(|c| intern(&mut universe, c))
                .collect();
            (g, a)
        })
        .collect();
    let nlocs = pcfg.locations.len();

    let mut reach = vec![false; nlocs];
    reach[pcfg.l_in] = true;
    let mut stack = vec![pcfg.l_in];
    while let Some(l) = stack.pop() {
        for t in pcfg.outgoing(l) {
            for tgt in t.targets() {
                if !reach[tgt] {
                    reach[tgt] = true;
                    stack.push(tgt);
                }
            }
        }
    }

    let fixed = |l: LocId| l == pcfg.l_in || l == pcfg.l_out || !reach[l];
    let all: BTreeSet<usize> = (0..universe.len()).collect();
    let mut facts: Vec<BTreeSet<usize>> = (0..nlocs)
        .map(|l| {
            if fixed(l) {
                BTreeSet::new()
            } else {
                all.clone()
            }
        })
        .collect();
    loop {
        let mut changed = false;
        for l in 0..nlocs {
            if fixed(l) {
                continue;
            }
            let mut acc: Option<BTreeSet<usize>> = None;
            for t in pcfg
                .transitions
                .iter()
                .filter(|t| reach[t.source] && t.targets().any(|x| x == l))
            {
                let (g, a) = &gen[t.id];
                let mut s: BTreeSet<usize> =
                    facts[t.source].union(&ann[t.source]).copied().collect();
                s.extend(g);
                if let Some(u) = &t.update {
                    s.retain(|&i| !universe[i].expr.mentions(u.var));
                }
                s.extend(a);
                acc = Some(match acc {
                    None => s,
                    Some(x) => x.intersection(&s).copied().collect(),
                });
            }
            let next = acc.unwrap_or_default();
            if next != facts[l] {
                facts[l] = next;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    facts
        .into_iter()
        .map(|s| s.into_iter().map(|i| universe[i].clone()).collect())
        .collect()
}

/// `I(ℓ)`: annotation atoms first, then propagated guard facts.
pub fn attach_invariants(
    pcfg: &Pcfg,
    annotations: &[(String, Polyhedron)],
) -> Result<Vec<Polyhedron>, FrontendError> {
    let mut inv = vec![Polyhedron::top(); pcfg.locations.len()];
    for (label, poly) in annotations {
        let l = pcfg
            .loc_by_name(label)
            .ok_or_else(|| FrontendError::UnknownLabel(label.clone()))?;
        for c in &poly.constraints {
            inv[l].push(c.clone());
        }
    }
    let annotated = inv.clone();
    for (l, fs) in propagate_guards(pcfg, &annotated).into_iter().enumerate() {
        for c in fs {
            inv[l].push(c);
        }
    }
    Ok(inv)
}

/// Annotations found on loop heads, as labelled pairs.
pub fn loop_annotations(pcfg: &Pcfg, loops: &[(LocId, Polyhedron)]) -> Annotations {
    loops
        .iter()
        .map(|(l, p)| (pcfg.loc_name(*l).to_string(), p.clone()))
        .collect()
}
