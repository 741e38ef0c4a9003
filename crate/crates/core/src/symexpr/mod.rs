//! Exact rational-function kernel.
//!
//! Every coefficient handled by the analysis is a [`Scalar`]: a quotient of
//! multivariate polynomials over the rationals, kept gcd-reduced with a
//! monic denominator so that equality is structural.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use thiserror::Error;

mod gcd;
mod parse;
mod poly;
mod scalar;

pub use gcd::{gcd, gcd_many};
pub use parse::{parse_rational, parse_scalar, parse_scalar_with, ParseError, ParseErrorKind};
pub use poly::{Monomial, Poly};
pub use scalar::Scalar;

pub type Rational = num_rational::BigRational;

/// A named variable. Ordering and equality are by name.
#[derive(Clone)]
pub struct Var(Arc<str>);

impl Var {
    pub fn new(name: &str) -> Self {
        Var(Arc::from(name))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl PartialEq for Var {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0
    }
}

impl Eq for Var {}

impl Ord for Var {
    fn cmp(&self, other: &Self) -> Ordering {
        if Arc::ptr_eq(&self.0, &other.0) {
            Ordering::Equal
        } else {
            self.0.cmp(&other.0)
        }
    }
}

impl PartialOrd for Var {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Hash for Var {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.hash(state)
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<&str> for Var {
    fn from(s: &str) -> Self {
        Var::new(s)
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum SymError {
    #[error("division by a rational function that is identically zero")]
    DivisionByZeroScalar,
    #[error("substitution makes a denominator vanish identically")]
    SubstitutionSingular,
    #[error("equation is not linear in `{0}`")]
    NotLinearInVariable(String),
    #[error("coefficient of `{0}` vanishes identically")]
    CoefficientVanishes(String),
    #[error("denominator vanishes at the evaluation point")]
    EvalSingular,
    #[error("no value supplied for variable `{0}`")]
    UnboundVariable(String),
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn s(src: &str) -> Scalar {
        parse_scalar(src).unwrap()
    }

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn add_examples() {
        assert_eq!(&s("x1/u1") + &Scalar::zero(), s("x1/u1"));
        assert_eq!(
            &s("1/(u1+2u2+1)") + &s("(u1+2u2)/(u1+2u2+1)"),
            Scalar::one()
        );
        assert!((&s("(x3+1)/x1") + &s("-(x3+1)/x1")).is_zero());
    }

    #[test]
    fn mul_div_examples() {
        assert_eq!(&s("x1") * &s("(x3+1)/x1"), s("x3+1"));
        let d = Scalar::one().checked_div(&s("u1+2u2+1")).unwrap();
        assert_eq!(d.numer(), &Poly::one());
        assert_eq!(d.denom(), s("u1+2u2+1").numer());
        let a = s("x2+x3+3x4");
        assert_eq!(&a * &Scalar::one().checked_div(&a).unwrap(), Scalar::one());
        assert_eq!(
            s("x1").checked_div(&Scalar::zero()),
            Err(SymError::DivisionByZeroScalar)
        );
    }

    #[test]
    fn canonical_denominator_is_monic() {
        let a = s("x/(2y+4)");
        assert_eq!(a.denom(), s("y+2").numer());
        assert_eq!(a.to_string(), "(1/2*x)/(y + 2)");
        assert_eq!(s("(2x+2)/(4x+4)"), s("1/2"));
    }

    #[test]
    fn display_reparses() {
        for src in ["x/(y*z)", "(x+1)/(y^2*z)", "x/y^3", "2/(3y)", "-x/(y+1)^2", "x*y/z"] {
            let a = s(src);
            assert_eq!(s(&a.to_string()), a, "{src} -> {a}");
        }
        assert_eq!(s("x/(y*z)").to_string(), "x/(y*z)");
    }

    #[test]
    fn differentiate_examples() {
        let x3 = Var::new("x3");
        assert_eq!(s("x1*(x3+1)").differentiate(&x3), s("x1"));
        assert!(s("7/3").differentiate(&x3).is_zero());
        let u2 = Var::new("u2");
        assert_eq!(
            s("(x2+x3+3x4)/(u1+2u2+1)").differentiate(&u2),
            s("-2(x2+x3+3x4)/(u1+2u2+1)^2")
        );
    }

    #[test]
    fn substitute_examples() {
        let f1 = s("(x2+x3+3x4)/(u1+2u2+1)");
        let b = BTreeMap::from([(Var::new("x1"), f1.clone()), (Var::new("u1"), s("u1"))]);
        assert_eq!(s("x1+u1").substitute(&b).unwrap(), &f1 + &s("u1"));
        assert_eq!(s("x1+u1").substitute(&BTreeMap::new()).unwrap(), s("x1+u1"));
        let zero = BTreeMap::from([(Var::new("x1"), Scalar::zero())]);
        assert_eq!(
            s("1/x1").substitute(&zero),
            Err(SymError::SubstitutionSingular)
        );
    }

    #[test]
    fn solve_linear_examples() {
        let u1 = Var::new("u1");
        assert_eq!(
            Scalar::solve_linear_in(&s("u1+2u2"), &s("th3"), &u1).unwrap(),
            s("th3-2u2")
        );
        let x1 = Var::new("x1");
        assert_eq!(Scalar::solve_linear_in(&s("x1"), &s("th1"), &x1).unwrap(), s("th1"));
        let x2 = Var::new("x2");
        let lhs = s("(x2+x3+3x4)/(u1+2u2+1)");
        let sol = Scalar::solve_linear_in(&lhs, &s("th1"), &x2).unwrap();
        assert_eq!(sol, s("th1*(u1+2u2+1) - x3 - 3x4"));
        let back = lhs
            .substitute(&BTreeMap::from([(x2.clone(), sol)]))
            .unwrap();
        assert_eq!(back, s("th1"));
        assert!(matches!(
            Scalar::solve_linear_in(&s("x1^2"), &s("th1"), &x1),
            Err(SymError::NotLinearInVariable(_))
        ));
        assert!(matches!(
            Scalar::solve_linear_in(&s("x1+1"), &s("x1"), &x1),
            Err(SymError::CoefficientVanishes(_))
        ));
    }

    #[test]
    fn zero_and_eval_examples() {
        assert!((&s("x1*x3") - &s("x3*x1")).is_zero());
        let pt = BTreeMap::from([(Var::new("x3"), q(1, 1)), (Var::new("x1"), q(2, 1))]);
        assert_eq!(s("(x3+1)/x1").eval_at(&pt).unwrap(), q(1, 1));
        let sing = BTreeMap::from([(Var::new("x1"), q(0, 1))]);
        assert_eq!(s("1/x1").eval_at(&sing), Err(SymError::EvalSingular));
    }

    #[test]
    fn negative_powers_and_rename() {
        assert_eq!(s("x").pow(-2).unwrap(), s("1/x^2"));
        let map = BTreeMap::from([(Var::new("a"), Var::new("z"))]);
        // renaming changes the term order, the denominator stays monic
        let r = s("1/(2a + b)").rename(&map);
        assert_eq!(r, s("1/(b + 2z)"));
        assert_eq!(r.denom().leading_coeff(), Rational::from_integer(1.into()));
    }
}
