//! Turning arithmetic syntax into affine forms.

use std::collections::BTreeMap;

use super::ast::{AExpr, Dist};
use crate::linexpr::{LinExpr, Var};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LinearizeError {
    #[error("non-linear expression")]
    NonLinear,
    #[error("division by zero")]
    DivByZero,
    #[error("expected a constant")]
    NotConstant,
    #[error("sampling and ndet may only appear once, added to the rest of an assignment")]
    MisplacedRandom,
    #[error("empty interval: lower bound exceeds upper bound")]
    EmptyInterval,
    #[error("normal distribution needs a positive standard deviation")]
    BadStddev,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RandAtom {
    Unif(Rational, Rational),
    Norm(Rational, Rational),
    Ndet(Rational, Rational),
}

/// `lin + coeff·rand`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Linear {
    pub lin: LinExpr,
    pub rand: Option<(Rational, RandAtom)>,
}

impl Linear {
    fn constant(&self) -> Option<Rational> {
        (self.lin.is_constant() && self.rand.is_none()).then(|| self.lin.constant_term().clone())
    }

    fn scale(mut self, k: &Rational) -> Linear {
        self.lin = self.lin.scale(k);
        self.rand = self.rand.map(|(c, r)| (&c * k, r));
        self
    }
}

fn add(a: Linear, b: Linear, sign: &Rational) -> Result<Linear, LinearizeError> {
    let mut lin = a.lin;
    lin.add_scaled(&b.lin, sign);
    let rand = match (a.rand, b.rand) {
        (Some(_), Some(_)) => return Err(LinearizeError::MisplacedRandom),
        (Some(r), None) => Some(r),
        (None, Some((c, r))) => Some((&c * sign, r)),
        (None, None) => None,
    };
    Ok(Linear { lin, rand })
}

/// Affine form of `e`, resolving variable names through `var`.
pub fn linearize(e: &AExpr, var: &mut dyn FnMut(&str) -> Var) -> Result<Linear, LinearizeError> {
    let one = Rational::one();
    Ok(match e {
        AExpr::Num(r) => Linear {
            lin: LinExpr::constant(r.clone()),
            rand: None,
        },
        AExpr::Var(v) => Linear {
            lin: LinExpr::var(var(v)),
            rand: None,
        },
        AExpr::Neg(a) => linearize(a, var)?.scale(&-one),
        AExpr::Add(a, b) => add(linearize(a, var)?, linearize(b, var)?, &one)?,
        AExpr::Sub(a, b) => add(linearize(a, var)?, linearize(b, var)?, &-one)?,
        AExpr::Mul(a, b) => {
            let (a, b) = (linearize(a, var)?, linearize(b, var)?);
            match (a.constant(), b.constant()) {
                (Some(k), _) => b.scale(&k),
                (_, Some(k)) => a.scale(&k),
                _ => return Err(LinearizeError::NonLinear),
            }
        }
        AExpr::Div(a, b) => {
            let (a, b) = (linearize(a, var)?, linearize(b, var)?);
            match b.constant() {
                Some(k) if k.is_zero() => return Err(LinearizeError::DivByZero),
                Some(k) => a.scale(&k.recip()),
                None => return Err(LinearizeError::NonLinear),
            }
        }
        AExpr::Sample(d) => {
            let atom = match d.as_ref() {
                Dist::Unif(a, b) => {
                    let (lo, hi) = (constant_value(a)?, constant_value(b)?);
                    if lo > hi {
                        return Err(LinearizeError::EmptyInterval);
                    }
                    RandAtom::Unif(lo, hi)
                }
                Dist::Norm(a, b) => {
                    let (m, s) = (constant_value(a)?, constant_value(b)?);
                    if !s.is_positive() {
                        return Err(LinearizeError::BadStddev);
                    }
                    RandAtom::Norm(m, s)
                }
            };
            Linear {
                lin: LinExpr::zero(),
                rand: Some((one, atom)),
            }
        }
        AExpr::Ndet(a, b) => {
            let (lo, hi) = (constant_value(a)?, constant_value(b)?);
            if lo > hi {
                return Err(LinearizeError::EmptyInterval);
            }
            Linear {
                lin: LinExpr::zero(),
                rand: Some((one, RandAtom::Ndet(lo, hi))),
            }
        }
    })
}

fn scratch_names() -> impl FnMut(&str) -> Var {
    let mut names: BTreeMap<String, Var> = BTreeMap::new();
    move |n: &str| {
        let k = names.len();
        *names.entry(n.to_string()).or_insert(k)
    }
}

pub fn constant_value(e: &AExpr) -> Result<Rational, LinearizeError> {
    let mut f = scratch_names();
    linearize(e, &mut f)?
        .constant()
        .ok_or(LinearizeError::NotConstant)
}

/// A random term, if present, must enter with coefficient exactly one.
pub fn check_rhs(e: &AExpr) -> Result<(), LinearizeError> {
    let mut f = scratch_names();
    match linearize(e, &mut f)?.rand {
        Some((c, _)) if !c.is_one() => Err(LinearizeError::MisplacedRandom),
        _ => Ok(()),
    }
}

/// Linear and free of random terms.
pub fn check_pure(e: &AExpr) -> Result<(), LinearizeError> {
    let mut f = scratch_names();
    match linearize(e, &mut f)?.rand {
        Some(_) => Err(LinearizeError::MisplacedRandom),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::ast::Stmt;
    use crate::frontend::parser::parse;
    use crate::rational::q;

    fn rhs(src: &str) -> AExpr {
        match parse(src).unwrap().body.remove(0) {
            Stmt::Assign(_, e) => e,
            s => panic!("{s:?}"),
        }
    }

    #[test]
    fn folds_constants() {
        let e = rhs("x := 2 * (x - 1) / 4 + 3");
        let mut f = scratch_names();
        let l = linearize(&e, &mut f).unwrap();
        assert_eq!(l.lin, LinExpr::from_parts([(0, q(1, 2))], q(5, 2)));
    }

    #[test]
    fn random_terms() {
        assert!(check_rhs(&rhs("x := x + sample(unif(1, 2))")).is_ok());
        assert!(check_rhs(&rhs("x := ndet(0, 3)")).is_ok());
        assert!(parse("x := x - sample(unif(1, 2))").is_err());
        assert!(parse("x := sample(unif(2, 1))").is_err());
        assert!(parse("x := sample(norm(0, 0))").is_err());
        assert!(parse("x := ndet(0,1) + ndet(0,1)").is_err());
    }
}
