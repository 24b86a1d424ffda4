//! Probabilistic mutations of deterministic programs.
//!
//! Loop mode wraps every loop body as `if prob(0.5) then body else skip fi`.
//! Assignment mode does that and also turns `x := f + a` (with `f` mentioning
//! a variable and `a` a nonzero literal) into `x := f + sample(unif(a-1, a+1))`.

use std::fmt;
use std::str::FromStr;

use super::ast::*;
use super::parser::{parse, ParseError};
use super::pretty;
use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Probabilistic loops.
    Loops,
    /// Probabilistic loops and assignments.
    LoopsAndAssignments,
}

impl Mode {
    /// Corpus file suffix for this mode.
    pub fn suffix(self) -> &'static str {
        match self {
            Mode::Loops => "_pl",
            Mode::LoopsAndAssignments => "_pl_pa",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Loops => "pl",
            Mode::LoopsAndAssignments => "pl-pa",
        })
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pl" | "loops" => Ok(Mode::Loops),
            "pl-pa" | "pl_pa" | "all" => Ok(Mode::LoopsAndAssignments),
            _ => Err(format!("unknown mutation mode {s} (expected pl or pl-pa)")),
        }
    }
}

fn mentions_var(e: &AExpr) -> bool {
    match e {
        AExpr::Var(_) => true,
        AExpr::Num(_) => false,
        AExpr::Neg(a) => mentions_var(a),
        AExpr::Add(a, b)
        | AExpr::Sub(a, b)
        | AExpr::Mul(a, b)
        | AExpr::Div(a, b)
        | AExpr::Ndet(a, b) => mentions_var(a) || mentions_var(b),
        AExpr::Sample(_) => false,
    }
}

fn unif_around(a: Rational) -> AExpr {
    let one = Rational::one();
    let lit = |r: Rational| {
        if r.is_negative() {
            AExpr::Neg(Box::new(AExpr::Num(-r)))
        } else {
            AExpr::Num(r)
        }
    };
    AExpr::Sample(Box::new(Dist::Unif(lit(&a - &one), lit(&a + &one))))
}

/// `f + a` split into `(f, a)` when `f` mentions a variable and `a` is a
/// nonzero literal.
fn split_offset(e: &AExpr) -> Option<(AExpr, Rational)> {
    let (f, a) = match e {
        AExpr::Add(f, k) => match k.as_ref() {
            AExpr::Num(a) => (f.as_ref().clone(), a.clone()),
            _ => match f.as_ref() {
                AExpr::Num(a) => (k.as_ref().clone(), a.clone()),
                _ => return None,
            },
        },
        AExpr::Sub(f, k) => match k.as_ref() {
            AExpr::Num(a) => (f.as_ref().clone(), -a.clone()),
            _ => return None,
        },
        _ => return None,
    };
    (mentions_var(&f) && !a.is_zero()).then_some((f, a))
}

fn assignment(e: &AExpr) -> AExpr {
    match split_offset(e) {
        Some((f, a)) => AExpr::Add(Box::new(f), Box::new(unif_around(a))),
        None => e.clone(),
    }
}

fn stmts(body: &[Stmt], mode: Mode) -> Vec<Stmt> {
    body.iter().map(|s| stmt(s, mode)).collect()
}

fn stmt(s: &Stmt, mode: Mode) -> Stmt {
    match s {
        Stmt::Skip => Stmt::Skip,
        Stmt::Assign(x, e) => match mode {
            Mode::Loops => s.clone(),
            Mode::LoopsAndAssignments => Stmt::Assign(x.clone(), assignment(e)),
        },
        Stmt::If { cond, then, els } => Stmt::If {
            cond: cond.clone(),
            then: stmts(then, mode),
            els: els.as_ref().map(|b| stmts(b, mode)),
        },
        Stmt::While {
            cond,
            invariant,
            body,
        } => Stmt::While {
            cond: cond.clone(),
            invariant: invariant.clone(),
            body: vec![Stmt::If {
                cond: Cond::Prob(ProbArg::Const(AExpr::Num(Rational::new(1, 2)))),
                then: stmts(body, mode),
                els: Some(vec![Stmt::Skip]),
            }],
        },
    }
}

pub fn mutate(p: &Program, mode: Mode) -> Program {
    Program {
        body: stmts(&p.body, mode),
    }
}

/// Mutate program text. Leading `#` comment lines are kept and a line naming
/// the mode is appended to them.
pub fn mutate_source(src: &str, mode: Mode) -> Result<String, ParseError> {
    let p = parse(src)?;
    let mut out = String::new();
    for line in src.lines().take_while(|l| l.trim_start().starts_with('#')) {
        out.push_str(line);
        out.push('\n');
    }
    out.push_str(&format!("# mutation: {mode}\n"));
    out.push_str(&pretty::program(&mutate(&p, mode)));
    out.push('\n');
    Ok(out)
}
