//! Syntax tree of the probabilistic programming language.

use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AExpr {
    /// Non-negative literal; negation is a separate node.
    Num(Rational),
    Var(String),
    Neg(Box<AExpr>),
    Add(Box<AExpr>, Box<AExpr>),
    Sub(Box<AExpr>, Box<AExpr>),
    Mul(Box<AExpr>, Box<AExpr>),
    Div(Box<AExpr>, Box<AExpr>),
    Sample(Box<Dist>),
    Ndet(Box<AExpr>, Box<AExpr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Dist {
    Unif(AExpr, AExpr),
    Norm(AExpr, AExpr),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BExpr {
    True,
    False,
    Cmp(AExpr, CmpOp, AExpr),
    And(Box<BExpr>, Box<BExpr>),
    Or(Box<BExpr>, Box<BExpr>),
    Not(Box<BExpr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProbArg {
    Const(AExpr),
    /// `2^(-v)`
    InvPow2(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Cond {
    Star,
    Prob(ProbArg),
    Bool(BExpr),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    Skip,
    Assign(String, AExpr),
    If {
        cond: Cond,
        then: Vec<Stmt>,
        els: Option<Vec<Stmt>>,
    },
    While {
        cond: BExpr,
        invariant: Option<BExpr>,
        body: Vec<Stmt>,
    },
}

impl Stmt {
    pub fn is_simple(&self) -> bool {
        matches!(self, Stmt::Skip | Stmt::Assign(..))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub body: Vec<Stmt>,
}
