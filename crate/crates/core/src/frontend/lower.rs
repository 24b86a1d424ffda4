//! Lowering of the syntax tree to a pCFG.
//!
//! Every statement gets one location, its entry point, numbered in preorder.
//! Leading simple statements of the program (the initialization prefix) are
//! named `l0`, `l0.1`, `l0.2`, ... so the first loop or branch is `l1`; the
//! exit location is numbered last. Conditions are put in disjunctive normal
//! form and each disjunct becomes its own transition. The last statement of
//! a loop body continues directly at the loop head.

use super::ast::*;
use super::linearize::{linearize, LinearizeError, RandAtom};
use crate::linexpr::{LinConstraint, LinExpr, Polyhedron, Var};
use crate::pcfg::{Branch, Distribution, LocId, Location, Pcfg, Transition, Update, UpdateElem};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LowerError {
    #[error("loop invariant annotations must be conjunctions")]
    DisjunctiveInvariant,
    #[error(transparent)]
    Expr(#[from] LinearizeError),
}

/// A lowered program plus the `@invariant` annotations found on loops.
#[derive(Debug, Clone)]
pub struct Lowered {
    pub pcfg: Pcfg,
    pub loop_invariants: Vec<(LocId, Polyhedron)>,
}

enum Shape {
    Leaf(LocId),
    If(LocId, Vec<Shape>, Option<Vec<Shape>>),
    While(LocId, Vec<Shape>),
}

impl Shape {
    fn entry(&self) -> LocId {
        match self {
            Shape::Leaf(l) | Shape::If(l, ..) | Shape::While(l, _) => *l,
        }
    }
}

struct Lowerer {
    vars: Vec<String>,
    locs: Vec<Location>,
    trans: Vec<Transition>,
    loop_invariants: Vec<(LocId, Polyhedron)>,
    next_number: usize,
}

pub type Dnf = Vec<Vec<LinConstraint>>;

fn collect_vars_a(e: &AExpr, out: &mut Vec<String>) {
    match e {
        AExpr::Num(_) => {}
        AExpr::Var(v) => {
            if !out.contains(v) {
                out.push(v.clone());
            }
        }
        AExpr::Neg(a) => collect_vars_a(a, out),
        AExpr::Add(a, b)
        | AExpr::Sub(a, b)
        | AExpr::Mul(a, b)
        | AExpr::Div(a, b)
        | AExpr::Ndet(a, b) => {
            collect_vars_a(a, out);
            collect_vars_a(b, out);
        }
        AExpr::Sample(d) => match d.as_ref() {
            Dist::Unif(a, b) | Dist::Norm(a, b) => {
                collect_vars_a(a, out);
                collect_vars_a(b, out);
            }
        },
    }
}

fn collect_vars_b(b: &BExpr, out: &mut Vec<String>) {
    match b {
        BExpr::True | BExpr::False => {}
        BExpr::Cmp(l, _, r) => {
            collect_vars_a(l, out);
            collect_vars_a(r, out);
        }
        BExpr::And(a, c) | BExpr::Or(a, c) => {
            collect_vars_b(a, out);
            collect_vars_b(c, out);
        }
        BExpr::Not(a) => collect_vars_b(a, out),
    }
}

fn collect_vars(body: &[Stmt], out: &mut Vec<String>) {
    for s in body {
        match s {
            Stmt::Skip => {}
            Stmt::Assign(v, e) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
                collect_vars_a(e, out);
            }
            Stmt::If { cond, then, els } => {
                match cond {
                    Cond::Bool(b) => collect_vars_b(b, out),
                    Cond::Prob(ProbArg::InvPow2(v)) => {
                        if !out.contains(v) {
                            out.push(v.clone());
                        }
                    }
                    _ => {}
                }
                collect_vars(then, out);
                if let Some(e) = els {
                    collect_vars(e, out);
                }
            }
            Stmt::While {
                cond,
                invariant,
                body,
            } => {
                collect_vars_b(cond, out);
                if let Some(i) = invariant {
                    collect_vars_b(i, out);
                }
                collect_vars(body, out);
            }
        }
    }
}

/// Affine form of a side-effect-free expression over `vars`.
pub fn pure_linear(e: &AExpr, vars: &[String]) -> Result<LinExpr, LinearizeError> {
    let mut missing = false;
    let mut lookup = |n: &str| {
        vars.iter().position(|v| v == n).unwrap_or_else(|| {
            missing = true;
            usize::MAX
        })
    };
    let l = linearize(e, &mut lookup)?;
    if missing {
        return Err(LinearizeError::NotConstant);
    }
    if l.rand.is_some() {
        return Err(LinearizeError::MisplacedRandom);
    }
    Ok(l.lin)
}

fn cmp_dnf(e: LinExpr, op: CmpOp) -> Dnf {
    let ne = -&e;
    match op {
        CmpOp::Lt => vec![vec![LinConstraint::lt(e)]],
        CmpOp::Le => vec![vec![LinConstraint::le(e)]],
        CmpOp::Gt => vec![vec![LinConstraint::lt(ne)]],
        CmpOp::Ge => vec![vec![LinConstraint::le(ne)]],
        CmpOp::Eq => vec![vec![LinConstraint::le(e), LinConstraint::le(ne)]],
        CmpOp::Ne => vec![vec![LinConstraint::lt(e)], vec![LinConstraint::lt(ne)]],
    }
}

fn negate_op(op: CmpOp) -> CmpOp {
    match op {
        CmpOp::Lt => CmpOp::Ge,
        CmpOp::Le => CmpOp::Gt,
        CmpOp::Gt => CmpOp::Le,
        CmpOp::Ge => CmpOp::Lt,
        CmpOp::Eq => CmpOp::Ne,
        CmpOp::Ne => CmpOp::Eq,
    }
}

fn and_dnf(a: Dnf, b: Dnf) -> Dnf {
    let mut out = Vec::new();
    for x in &a {
        for y in &b {
            let mut c = x.clone();
            c.extend(y.iter().cloned());
            out.push(c);
        }
    }
    out
}

/// Disjunctive normal form of `b` (or of `¬b` when `negate`). Disjuncts with
/// a constant-false atom are dropped and tautological atoms removed.
pub fn dnf(b: &BExpr, negate: bool, vars: &[String]) -> Result<Dnf, LinearizeError> {
    let raw = match (b, negate) {
        (BExpr::True, false) | (BExpr::False, true) => vec![vec![]],
        (BExpr::True, true) | (BExpr::False, false) => vec![],
        (BExpr::Cmp(l, op, r), neg) => {
            let e = &pure_linear(l, vars)? - &pure_linear(r, vars)?;
            cmp_dnf(e, if neg { negate_op(*op) } else { *op })
        }
        (BExpr::And(a, c), false) | (BExpr::Or(a, c), true) => {
            and_dnf(dnf(a, negate, vars)?, dnf(c, negate, vars)?)
        }
        (BExpr::Or(a, c), false) | (BExpr::And(a, c), true) => {
            let mut d = dnf(a, negate, vars)?;
            d.extend(dnf(c, negate, vars)?);
            d
        }
        (BExpr::Not(a), neg) => dnf(a, !neg, vars)?,
    };
    Ok(raw
        .into_iter()
        .filter(|conj| !conj.iter().any(|c| c.is_contradiction()))
        .map(|conj| conj.into_iter().filter(|c| !c.is_tautology()).collect())
        .collect())
}

impl Lowerer {
    fn new_loc(&mut self, name: String) -> LocId {
        self.locs.push(Location { name });
        self.locs.len() - 1
    }

    fn numbered(&mut self) -> LocId {
        let n = self.next_number;
        self.next_number += 1;
        self.new_loc(format!("l{n}"))
    }

    fn shape(&mut self, body: &[Stmt]) -> Vec<Shape> {
        body.iter().map(|s| self.shape_one(s)).collect()
    }

    fn shape_one(&mut self, s: &Stmt) -> Shape {
        match s {
            Stmt::Skip | Stmt::Assign(..) => Shape::Leaf(self.numbered()),
            Stmt::If { then, els, .. } => {
                let l = self.numbered();
                let t = self.shape(then);
                let e = els.as_ref().map(|e| self.shape(e));
                Shape::If(l, t, e)
            }
            Stmt::While { body, .. } => {
                let l = self.numbered();
                Shape::While(l, self.shape(body))
            }
        }
    }

    fn var(&self, name: &str) -> Var {
        self.vars.iter().position(|v| v == name).expect("collected")
    }

    fn push(
        &mut self,
        source: LocId,
        branches: Vec<Branch>,
        update: Option<Update>,
        guard: Polyhedron,
        pow2: Option<Var>,
    ) {
        let id = self.trans.len();
        self.trans.push(Transition {
            id,
            source,
            branches,
            update,
            guard,
            pow2_prob: pow2,
        });
    }

    fn goto(&mut self, source: LocId, target: LocId, update: Option<Update>, guard: Polyhedron) {
        self.push(
            source,
            vec![Branch {
                prob: Rational::one(),
                target,
            }],
            update,
            guard,
            None,
        );
    }

    fn guarded(&mut self, source: LocId, target: LocId, d: Dnf) {
        for conj in d {
            self.goto(source, target, None, Polyhedron::new(conj));
        }
    }

    fn gen(&mut self, body: &[Stmt], shapes: &[Shape], cont: LocId) -> Result<(), LowerError> {
        for (i, (s, sh)) in body.iter().zip(shapes).enumerate() {
            let next = shapes.get(i + 1).map_or(cont, Shape::entry);
            self.gen_one(s, sh, next)?;
        }
        Ok(())
    }

    fn gen_one(&mut self, s: &Stmt, sh: &Shape, cont: LocId) -> Result<(), LowerError> {
        match (s, sh) {
            (Stmt::Skip, Shape::Leaf(l)) => self.goto(*l, cont, None, Polyhedron::top()),
            (Stmt::Assign(v, e), Shape::Leaf(l)) => {
                let var = self.var(v);
                let vars = self.vars.clone();
                let mut lookup = |n: &str| vars.iter().position(|x| x == n).expect("collected");
                let lin = linearize(e, &mut lookup)?;
                let elem = match lin.rand {
                    None => UpdateElem::Det(lin.lin),
                    Some((_, RandAtom::Unif(lo, hi))) => UpdateElem::Sample {
                        base: lin.lin,
                        dist: Distribution::Uniform(lo, hi),
                    },
                    Some((_, RandAtom::Norm(m, sd))) => UpdateElem::Sample {
                        base: lin.lin,
                        dist: Distribution::Normal(m, sd),
                    },
                    Some((_, RandAtom::Ndet(lo, hi))) => UpdateElem::Ndet {
                        base: lin.lin,
                        lo,
                        hi,
                    },
                };
                self.goto(*l, cont, Some(Update { var, elem }), Polyhedron::top());
            }
            (Stmt::If { cond, then, els }, Shape::If(l, tsh, esh)) => {
                let t_entry = tsh[0].entry();
                let e_entry = esh.as_ref().map_or(cont, |e| e[0].entry());
                match cond {
                    Cond::Star => {
                        self.goto(*l, t_entry, None, Polyhedron::top());
                        self.goto(*l, e_entry, None, Polyhedron::top());
                    }
                    Cond::Prob(ProbArg::Const(p)) => {
                        let p = pure_linear(p, &self.vars)?.constant_term().clone();
                        let q = Rational::one() - &p;
                        let branches = if p.is_zero() || t_entry == e_entry {
                            vec![Branch {
                                prob: Rational::one(),
                                target: if p.is_zero() { e_entry } else { t_entry },
                            }]
                        } else if q.is_zero() {
                            vec![Branch {
                                prob: Rational::one(),
                                target: t_entry,
                            }]
                        } else {
                            vec![
                                Branch {
                                    prob: p,
                                    target: t_entry,
                                },
                                Branch {
                                    prob: q,
                                    target: e_entry,
                                },
                            ]
                        };
                        self.push(*l, branches, None, Polyhedron::top(), None);
                    }
                    Cond::Prob(ProbArg::InvPow2(v)) => {
                        let half = Rational::new(1, 2);
                        let branches = vec![
                            Branch {
                                prob: half.clone(),
                                target: t_entry,
                            },
                            Branch {
                                prob: half,
                                target: e_entry,
                            },
                        ];
                        let var = self.var(v);
                        self.push(*l, branches, None, Polyhedron::top(), Some(var));
                    }
                    Cond::Bool(b) => {
                        let pos = dnf(b, false, &self.vars)?;
                        let neg = dnf(b, true, &self.vars)?;
                        self.guarded(*l, t_entry, pos);
                        self.guarded(*l, e_entry, neg);
                    }
                }
                self.gen(then, tsh, cont)?;
                if let (Some(e), Some(esh)) = (els, esh) {
                    self.gen(e, esh, cont)?;
                }
            }
            (
                Stmt::While {
                    cond,
                    invariant,
                    body,
                },
                Shape::While(l, bsh),
            ) => {
                let pos = dnf(cond, false, &self.vars)?;
                let neg = dnf(cond, true, &self.vars)?;
                self.guarded(*l, bsh[0].entry(), pos);
                self.guarded(*l, cont, neg);
                if let Some(inv) = invariant {
                    let d = dnf(inv, false, &self.vars)?;
                    match d.len() {
                        0 => self.loop_invariants.push((
                            *l,
                            Polyhedron::new(vec![LinConstraint::le(LinExpr::constant(
                                Rational::one(),
                            ))]),
                        )),
                        1 => self
                            .loop_invariants
                            .push((*l, Polyhedron::new(d.into_iter().next().unwrap()))),
                        _ => return Err(LowerError::DisjunctiveInvariant),
                    }
                }
                self.gen(body, bsh, *l)?;
            }
            _ => unreachable!("shape mirrors the statement tree"),
        }
        Ok(())
    }
}

pub fn lower(p: &Program) -> Result<Lowered, LowerError> {
    let mut vars = Vec::new();
    collect_vars(&p.body, &mut vars);
    let mut lw = Lowerer {
        vars,
        locs: Vec::new(),
        trans: Vec::new(),
        loop_invariants: Vec::new(),
        next_number: 0,
    };

    let prefix = p.body.iter().take_while(|s| s.is_simple()).count();
    let mut shapes = Vec::new();
    for i in 0..prefix {
        let name = if i == 0 {
            "l0".to_string()
        } else {
            format!("l0.{i}")
        };
        shapes.push(Shape::Leaf(lw.new_loc(name)));
    }
    lw.next_number = usize::from(prefix > 0);
    shapes.extend(lw.shape(&p.body[prefix..]));
    let l_out = lw.numbered();
    lw.gen(&p.body, &shapes, l_out)?;
    let t_out = lw.trans.len();
    lw.goto(l_out, l_out, None, Polyhedron::top());

    let pcfg = Pcfg {
        vars: lw.vars,
        locations: lw.locs,
        transitions: lw.trans,
        l_in: shapes[0].entry(),
        l_out,
        t_out,
    };
    debug_assert_eq!(pcfg.validate(), Ok(()));
    Ok(Lowered {
        pcfg,
        loop_invariants: lw.loop_invariants,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parser::parse;

    fn lowered(src: &str) -> Pcfg {
        lower(&parse(src).unwrap()).unwrap().pcfg
    }

    fn edges(p: &Pcfg) -> Vec<(String, Vec<String>)> {
        p.transitions
            .iter()
            .map(|t| {
                (
                    p.loc_name(t.source).to_string(),
                    t.targets().map(|l| p.loc_name(l).to_string()).collect(),
                )
            })
            .collect()
    }

    #[test]
    fn skip_program() {
        let p = lowered("skip");
        assert_eq!(
            edges(&p),
            vec![
                ("l0".into(), vec!["l1".into()]),
                ("l1".into(), vec!["l1".into()])
            ]
        );
        assert_eq!((p.l_in, p.l_out, p.t_out), (0, 1, 1));
    }

    #[test]
    fn motivating_program_labels() {
        let p = lowered(
            "x := 0; while x < 5 do if y < 10 then y := y + sample(unif(1,2)) else x := x + sample(unif(1,2)) fi od",
        );
        let names: Vec<&str> = p.locations.iter().map(|l| l.name.as_str()).collect();
        assert_eq!(names, ["l0", "l1", "l2", "l3", "l4", "l5"]);
        let e = edges(&p);
        let want = [
            ("l0", "l1"),
            ("l1", "l2"),
            ("l1", "l5"),
            ("l2", "l3"),
            ("l2", "l4"),
            ("l3", "l1"),
            ("l4", "l1"),
            ("l5", "l5"),
        ];
        assert_eq!(e.len(), want.len());
        for ((s, t), (ws, wt)) in e.iter().zip(want) {
            assert_eq!((s.as_str(), t[0].as_str()), (ws, wt));
        }
        // six transitions among l1..l5 besides the exit loop, plus the prefix
        let inner = p
            .proper_transitions()
            .filter(|t| t.source != p.l_in)
            .count();
        assert_eq!(inner, 6);
    }

    #[test]
    fn coin_flip_is_one_transition() {
        let p = lowered(
            "x := 0; t := 1; while x = 0 do if prob(0.5) then t := 4 * t else x := 1 fi od",
        );
        let l2 = p.loc_by_name("l2").unwrap();
        let out: Vec<&Transition> = p.outgoing(l2).collect();
        assert_eq!(out.len(), 1);
        let probs: Vec<Rational> = out[0].branches.iter().map(|b| b.prob.clone()).collect();
        assert_eq!(probs, vec![Rational::new(1, 2), Rational::new(1, 2)]);
        assert_eq!(p.loc_name(out[0].branches[0].target), "l3");
        assert_eq!(p.loc_name(out[0].branches[1].target), "l4");
        assert_eq!(p.loc_name(p.l_in), "l0");
        assert!(p.loc_by_name("l0.1").is_some());
    }

    #[test]
    fn inequality_exit_splits() {
        // x = 0 loop exits through x < 0 and x > 0
        let p = lowered("while x = 0 do skip od");
        assert_eq!(p.outgoing(0).count(), 3);
    }

    #[test]
    fn star_gives_two_unguarded_transitions() {
        let p = lowered("if star then x := 1 else x := 2 fi");
        let out: Vec<&Transition> = p.outgoing(0).collect();
        assert_eq!(out.len(), 2);
        assert!(out.iter().all(|t| t.guard.is_top()));
    }

    #[test]
    fn deterministic() {
        let src = "a := 1; while a < 9 do if star then a := a + 2 else a := a + ndet(1, 3) fi od";
        assert_eq!(lowered(src), lowered(src));
    }
}
