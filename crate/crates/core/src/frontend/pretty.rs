//! Source printer. Output reparses to the same tree: every compound operand
//! is parenthesized and literals are printed as exact decimals.

use std::fmt::Write;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use super::ast::*;
use crate::rational::Rational;

/// Exact decimal when the denominator divides a power of ten, else `(n/d)`.
pub fn decimal(r: &Rational) -> String {
    let (n, d) = (r.numer(), r.denom());
    if d.is_one() {
        return n.to_string();
    }
    let ten = BigInt::from(10);
    let mut scale = BigInt::one();
    for k in 1..=128usize {
        scale *= &ten;
        if (&scale % &d).is_zero() {
            let digits = (&n * &scale / &d).to_string();
            let neg = digits.starts_with('-');
            let digits = digits.trim_start_matches('-');
            let padded = format!("{:0>width$}", digits, width = k + 1);
            let (ip, fp) = padded.split_at(padded.len() - k);
            return format!("{}{ip}.{fp}", if neg { "-" } else { "" });
        }
    }
    format!("({n}/{d})")
}

fn is_atomic(e: &AExpr) -> bool {
    matches!(
        e,
        AExpr::Num(_) | AExpr::Var(_) | AExpr::Sample(_) | AExpr::Ndet(..) | AExpr::Neg(_)
    )
}

fn operand(e: &AExpr) -> String {
    if is_atomic(e) {
        aexpr(e)
    } else {
        format!("({})", aexpr(e))
    }
}

pub fn aexpr(e: &AExpr) -> String {
    match e {
        AExpr::Num(r) => decimal(r),
        AExpr::Var(v) => v.clone(),
        AExpr::Neg(a) => format!(
            "-{}",
            if matches!(**a, AExpr::Neg(_)) {
                format!("({})", aexpr(a))
            } else {
                operand(a)
            }
        ),
        AExpr::Add(a, b) => format!("{} + {}", operand(a), operand(b)),
        AExpr::Sub(a, b) => format!("{} - {}", operand(a), operand(b)),
        AExpr::Mul(a, b) => format!("{} * {}", operand(a), operand(b)),
        AExpr::Div(a, b) => format!("{} / {}", operand(a), operand(b)),
        AExpr::Sample(d) => match d.as_ref() {
            Dist::Unif(a, b) => format!("sample(unif({}, {}))", aexpr(a), aexpr(b)),
            Dist::Norm(a, b) => format!("sample(norm({}, {}))", aexpr(a), aexpr(b)),
        },
        AExpr::Ndet(a, b) => format!("ndet({}, {})", aexpr(a), aexpr(b)),
    }
}

fn bterm(b: &BExpr) -> String {
    match b {
        BExpr::And(..) | BExpr::Or(..) => format!("({})", bexpr(b)),
        _ => bexpr(b),
    }
}

pub fn bexpr(b: &BExpr) -> String {
    match b {
        BExpr::True => "true".into(),
        BExpr::False => "false".into(),
        BExpr::Cmp(l, op, r) => format!("{} {} {}", aexpr(l), op.symbol(), aexpr(r)),
        BExpr::And(a, c) => format!("{} and {}", bterm(a), bterm(c)),
        BExpr::Or(a, c) => format!("{} or {}", bterm(a), bterm(c)),
        BExpr::Not(a) => match a.as_ref() {
            BExpr::Cmp(..) => format!("not ({})", bexpr(a)),
            _ => format!("not {}", bterm(a)),
        },
    }
}

fn cond(c: &Cond) -> String {
    match c {
        Cond::Star => "star".into(),
        Cond::Prob(ProbArg::Const(e)) => format!("prob({})", aexpr(e)),
        Cond::Prob(ProbArg::InvPow2(v)) => format!("prob(2^(-{v}))"),
        Cond::Bool(b) => bexpr(b),
    }
}

fn stmts(out: &mut String, body: &[Stmt], depth: usize) {
    for (i, s) in body.iter().enumerate() {
        stmt(out, s, depth);
        if i + 1 < body.len() {
            out.push(';');
        }
        out.push('\n');
    }
}

fn stmt(out: &mut String, s: &Stmt, depth: usize) {
    let pad = "  ".repeat(depth);
    match s {
        Stmt::Skip => {
            let _ = write!(out, "{pad}skip");
        }
        Stmt::Assign(v, e) => {
            let _ = write!(out, "{pad}{v} := {}", aexpr(e));
        }
        Stmt::If { cond: c, then, els } => {
            let _ = writeln!(out, "{pad}if {} then", cond(c));
            stmts(out, then, depth + 1);
            if let Some(els) = els {
                let _ = writeln!(out, "{pad}else");
                stmts(out, els, depth + 1);
            }
            let _ = write!(out, "{pad}fi");
        }
        Stmt::While {
            cond: c,
            invariant,
            body,
        } => {
            let _ = write!(out, "{pad}while {}", bexpr(c));
            if let Some(inv) = invariant {
                let _ = write!(out, " @invariant({})", bexpr(inv));
            }
            out.push_str(" do\n");
            stmts(out, body, depth + 1);
            let _ = write!(out, "{pad}od");
        }
    }
}

pub fn program(p: &Program) -> String {
    let mut out = String::new();
    stmts(&mut out, &p.body, 0);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parser::parse;
    use crate::rational::q;
    use proptest::prelude::*;

    #[test]
    fn decimals() {
        assert_eq!(decimal(&q(1, 4)), "0.25");
        assert_eq!(decimal(&q(-3, 2)), "-1.5");
        assert_eq!(decimal(&q(7, 1)), "7");
        assert_eq!(decimal(&q(1, 3)), "(1/3)");
    }

    #[test]
    fn reparses_fixed_program() {
        let src = "x := 0; t := 1;
while x = 0 and not (t < 0 or t > 100) @invariant(x >= 0) do
  t := 4t - -(t + 1) / 2;
  if prob(2^(-t)) then x := 1 fi;
  if star then y := ndet(-1, 1) else y := y + sample(norm(0, 1.5)) fi
od";
        let ast = parse(src).unwrap();
        let printed = program(&ast);
        assert_eq!(parse(&printed).unwrap(), ast, "{printed}");
    }

    fn arb_num() -> impl Strategy<Value = AExpr> {
        (0i64..50, prop::sample::select(vec![1i64, 2, 4, 5, 10]))
            .prop_map(|(n, d)| AExpr::Num(q(n, d)))
    }

    fn arb_aexpr() -> impl Strategy<Value = AExpr> {
        let leaf = prop_oneof![
            arb_num(),
            prop::sample::select(vec!["x", "y", "z"]).prop_map(|v| AExpr::Var(v.into()))
        ];
        leaf.prop_recursive(3, 12, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|a| AExpr::Neg(Box::new(a))),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| AExpr::Add(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| AExpr::Sub(Box::new(a), Box::new(b))),
                (arb_num(), inner.clone()).prop_map(|(a, b)| AExpr::Mul(Box::new(a), Box::new(b))),
                (inner, (1i64..9).prop_map(|d| AExpr::Num(q(d, 1))))
                    .prop_map(|(a, b)| AExpr::Div(Box::new(a), Box::new(b))),
            ]
        })
    }

    fn arb_bexpr() -> impl Strategy<Value = BExpr> {
        let ops = prop::sample::select(vec![
            CmpOp::Lt,
            CmpOp::Le,
            CmpOp::Gt,
            CmpOp::Ge,
            CmpOp::Eq,
            CmpOp::Ne,
        ]);
        let leaf = prop_oneof![
            Just(BExpr::True),
            (arb_aexpr(), ops, arb_aexpr()).prop_map(|(a, o, b)| BExpr::Cmp(a, o, b)),
        ];
        leaf.prop_recursive(2, 8, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|a| BExpr::Not(Box::new(a))),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| BExpr::And(Box::new(a), Box::new(b))),
                (inner.clone(), inner).prop_map(|(a, b)| BExpr::Or(Box::new(a), Box::new(b))),
            ]
        })
    }

    fn arb_stmt() -> impl Strategy<Value = Stmt> {
        let var = prop::sample::select(vec!["x", "y", "z"]).prop_map(String::from);
        let leaf = prop_oneof![
            Just(Stmt::Skip),
            (var.clone(), arb_aexpr()).prop_map(|(v, e)| Stmt::Assign(v, e)),
            (var, arb_aexpr(), 0i64..5).prop_map(|(v, e, k)| Stmt::Assign(
                v,
                AExpr::Add(
                    Box::new(e),
                    Box::new(AExpr::Sample(Box::new(Dist::Unif(
                        AExpr::Num(q(k, 1)),
                        AExpr::Num(q(k + 1, 1))
                    ))))
                )
            )),
        ];
        leaf.prop_recursive(3, 16, 3, |inner| {
            let body = prop::collection::vec(inner, 1..3);
            prop_oneof![
                (arb_bexpr(), body.clone(), prop::option::of(body.clone())).prop_map(
                    |(b, t, e)| Stmt::If {
                        cond: Cond::Bool(b),
                        then: t,
                        els: e
                    }
                ),
                (body.clone(), body.clone()).prop_map(|(t, e)| Stmt::If {
                    cond: Cond::Star,
                    then: t,
                    els: Some(e)
                }),
                ((0i64..=4).prop_map(|n| q(n, 4)), body.clone(), body.clone()).prop_map(
                    |(p, t, e)| Stmt::If {
                        cond: Cond::Prob(ProbArg::Const(AExpr::Num(p))),
                        then: t,
                        els: Some(e)
                    }
                ),
                (arb_bexpr(), prop::option::of(arb_bexpr()), body).prop_map(|(c, i, b)| {
                    Stmt::While {
                        cond: c,
                        invariant: i,
                        body: b,
                    }
                }),
            ]
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]
        #[test]
        fn print_parse_roundtrip(body in prop::collection::vec(arb_stmt(), 1..4)) {
            let ast = Program { body };
            let printed = program(&ast);
            let back = parse(&printed);
            prop_assert!(back.is_ok(), "{}\n{:?}", printed, back);
            prop_assert_eq!(back.unwrap(), ast);
        }
    }
}
