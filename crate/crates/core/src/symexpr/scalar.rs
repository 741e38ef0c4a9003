use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Zero};

use super::gcd::gcd;
use super::poly::{Monomial, Poly};
use super::{Rational, SymError, Var};

/// A rational function `num / den` over the rationals in canonical form:
/// numerator and denominator coprime, denominator monic. Equality of
/// `Scalar`s is equality of rational functions.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Scalar {
    num: Poly,
    den: Poly,
}

impl Default for Scalar {
    fn default() -> Self {
        Scalar::zero()
    }
}

impl Scalar {
    pub fn zero() -> Self {
        Scalar {
            num: Poly::zero(),
            den: Poly::one(),
        }
    }

    pub fn one() -> Self {
        Scalar::from_poly(Poly::one())
    }

    pub fn from_int(n: i64) -> Self {
        Scalar::from_rational(Rational::from_integer(n.into()))
    }

    pub fn from_rational(q: Rational) -> Self {
        Scalar::from_poly(Poly::constant(q))
    }

    pub fn var(v: &Var) -> Self {
        Scalar::from_poly(Poly::var(v))
    }

    pub fn from_poly(p: Poly) -> Self {
        Scalar {
            num: p,
            den: Poly::one(),
        }
    }

    /// Builds `num / den` and brings it to canonical form.
    pub fn from_parts(num: Poly, den: Poly) -> Result<Self, SymError> {
        if den.is_zero() {
            return Err(SymError::DivisionByZeroScalar);
        }
        Ok(Scalar::reduce(num, den))
    }

    fn reduce(num: Poly, den: Poly) -> Self {
        if num.is_zero() {
            return Scalar::zero();
        }
        if let Some(c) = den.constant_value() {
            return Scalar::from_poly(num.scale(&(Rational::one() / c)));
        }
        let g = gcd(&num, &den);
        let (num, den) = if g.is_one() {
            (num, den)
        } else {
            (
                num.div_exact(&g).expect("gcd divides numerator"),
                den.div_exact(&g).expect("gcd divides denominator"),
            )
        };
        Scalar::normalize_unit(num, den)
    }

    fn normalize_unit(num: Poly, den: Poly) -> Self {
        let lc = den.leading_coeff();
        if lc.is_one() {
            Scalar { num, den }
        } else {
            let k = Rational::one() / lc;
            Scalar {
                num: num.scale(&k),
                den: den.scale(&k),
            }
        }
    }

    pub fn numer(&self) -> &Poly {
        &self.num
    }

    pub fn denom(&self) -> &Poly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.num.is_one() && self.den.is_one()
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_one()
    }

    pub fn is_constant(&self) -> bool {
        self.num.is_constant() && self.den.is_constant()
    }

    pub fn constant_value(&self) -> Option<Rational> {
        if self.den.is_one() {
            self.num.constant_value()
        } else {
            None
        }
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut s = self.num.vars();
        s.extend(self.den.vars());
        s
    }

    pub fn depends_on(&self, v: &Var) -> bool {
        self.num.contains_var(v) || self.den.contains_var(v)
    }

    pub fn depends_on_any<'a, I: IntoIterator<Item = &'a Var>>(&self, vars: I) -> bool {
        vars.into_iter().any(|v| self.depends_on(v))
    }

    pub fn checked_div(&self, other: &Scalar) -> Result<Scalar, SymError> {
        if other.is_zero() {
            return Err(SymError::DivisionByZeroScalar);
        }
        Ok(self.mul_ref(&other.inv_unchecked()))
    }

    pub fn inv(&self) -> Result<Scalar, SymError> {
        if self.is_zero() {
            return Err(SymError::DivisionByZeroScalar);
        }
        Ok(self.inv_unchecked())
    }

    fn inv_unchecked(&self) -> Scalar {
        Scalar::normalize_unit(self.den.clone(), self.num.clone())
    }

    fn add_ref(&self, other: &Scalar) -> Scalar {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        if self.den.is_one() && other.den.is_one() {
            return Scalar::from_poly(self.num.add(&other.num));
        }
        if self.den == other.den {
            return Scalar::reduce(self.num.add(&other.num), self.den.clone());
        }
        // a/b + c/d with g = gcd(b, d): only gcd(num, g) can remain
        let g = gcd(&self.den, &other.den);
        if g.is_one() {
            let num = self.num.mul(&other.den).add(&other.num.mul(&self.den));
            let den = self.den.mul(&other.den);
            if num.is_zero() {
                return Scalar::zero();
            }
            return Scalar::normalize_unit(num, den);
        }
        let b1 = self.den.div_exact(&g).expect("gcd divides");
        let d1 = other.den.div_exact(&g).expect("gcd divides");
        let num = self.num.mul(&d1).add(&other.num.mul(&b1));
        if num.is_zero() {
            return Scalar::zero();
        }
        let den = self.den.mul(&d1);
        let h = gcd(&num, &g);
        if h.is_one() {
            Scalar::normalize_unit(num, den)
        } else {
            Scalar::normalize_unit(
                num.div_exact(&h).expect("gcd divides"),
                den.div_exact(&h).expect("gcd divides"),
            )
        }
    }

    fn mul_ref(&self, other: &Scalar) -> Scalar {
        if self.is_zero() || other.is_zero() {
            return Scalar::zero();
        }
        if self.den.is_one() && other.den.is_one() {
            return Scalar::from_poly(self.num.mul(&other.num));
        }
        // cross-cancel: (a/b)(c/d) = (a/g1 * c/g2) / (b/g2 * d/g1)
        let g1 = gcd(&self.num, &other.den);
        let g2 = gcd(&other.num, &self.den);
        let a = self.num.div_exact(&g1).expect("gcd divides");
        let d = other.den.div_exact(&g1).expect("gcd divides");
        let c = other.num.div_exact(&g2).expect("gcd divides");
        let b = self.den.div_exact(&g2).expect("gcd divides");
        Scalar::normalize_unit(a.mul(&c), b.mul(&d))
    }

    pub fn pow(&self, e: i32) -> Result<Scalar, SymError> {
        if e < 0 {
            let inv = self.inv()?;
            return Ok(Scalar::normalize_unit(
                inv.num.pow(e.unsigned_abs()),
                inv.den.pow(e.unsigned_abs()),
            ));
        }
        let e = e as u32;
        Ok(Scalar::normalize_unit(self.num.pow(e), self.den.pow(e)))
    }

    /// Exact partial derivative.
    pub fn differentiate(&self, v: &Var) -> Scalar {
        let dn = self.num.derivative(v);
        if self.den.is_one() {
            return Scalar::from_poly(dn);
        }
        let dd = self.den.derivative(v);
        if dd.is_zero() {
            return Scalar::reduce(dn, self.den.clone());
        }
        // (n' d - n d') / d^2, with the common factor gcd(d, d') removed first
        let g = gcd(&self.den, &dd);
        let d_red = self.den.div_exact(&g).expect("gcd divides");
        let dd_red = dd.div_exact(&g).expect("gcd divides");
        let num = dn.mul(&d_red).sub(&self.num.mul(&dd_red));
        let den = self.den.mul(&d_red);
        Scalar::reduce(num, den)
    }

    /// Simultaneous substitution of the bound variables.
    pub fn substitute(&self, bindings: &BTreeMap<Var, Scalar>) -> Result<Scalar, SymError> {
        if bindings.is_empty() || !self.depends_on_any(bindings.keys()) {
            return Ok(self.clone());
        }
        let mut cache: BTreeMap<(Var, u32), Scalar> = BTreeMap::new();
        let num = subst_poly(&self.num, bindings, &mut cache);
        let den = subst_poly(&self.den, bindings, &mut cache);
        if den.is_zero() {
            return Err(SymError::SubstitutionSingular);
        }
        Ok(num.mul_ref(&den.inv_unchecked()))
    }

    /// Variable renaming (injective on the variables of `self`).
    pub fn rename(&self, map: &BTreeMap<Var, Var>) -> Scalar {
        if !self.depends_on_any(map.keys()) {
            return self.clone();
        }
        Scalar::normalize_unit(self.num.rename(map), self.den.rename(map))
    }

    pub fn eval_at(&self, point: &BTreeMap<Var, Rational>) -> Result<Rational, SymError> {
        let lookup = |v: &Var| point.get(v).cloned();
        let missing = || SymError::UnboundVariable(
            self.vars()
                .into_iter()
                .find(|v| !point.contains_key(v))
                .map(|v| v.to_string())
                .unwrap_or_default(),
        );
        let d = self.den.eval(&lookup).ok_or_else(missing)?;
        if d.is_zero() {
            return Err(SymError::EvalSingular);
        }
        let n = self.num.eval(&lookup).ok_or_else(missing)?;
        Ok(n / d)
    }

    /// Solves `lhs = rhs` for `v` when the cleared equation is linear in `v`.
    pub fn solve_linear_in(lhs: &Scalar, rhs: &Scalar, v: &Var) -> Result<Scalar, SymError> {
        let eq = lhs - rhs;
        let coeffs = eq.num.coeffs_in(v);
        match coeffs.len() {
            1 => {
                if lhs.depends_on(v) || rhs.depends_on(v) {
                    Err(SymError::CoefficientVanishes(v.to_string()))
                } else {
                    Err(SymError::NotLinearInVariable(v.to_string()))
                }
            }
            2 => {
                let a1 = &coeffs[1];
                if a1.is_zero() {
                    return Err(SymError::CoefficientVanishes(v.to_string()));
                }
                let sol = Scalar::reduce(coeffs[0].neg(), a1.clone());
                let check = lhs.substitute(&BTreeMap::from([(v.clone(), sol.clone())]));
                match check {
                    Ok(s) if s == *rhs => Ok(sol),
                    _ => Err(SymError::CoefficientVanishes(v.to_string())),
                }
            }
            _ => Err(SymError::NotLinearInVariable(v.to_string())),
        }
    }

    /// Largest total degree of numerator and denominator.
    pub fn degree(&self) -> u32 {
        self.num.total_degree().max(self.den.total_degree())
    }
}

fn subst_poly(
    p: &Poly,
    bindings: &BTreeMap<Var, Scalar>,
    cache: &mut BTreeMap<(Var, u32), Scalar>,
) -> Scalar {
    let mut acc = Scalar::zero();
    // group by the unbound part to keep the number of rational additions low
    let mut free_terms: Vec<(Monomial, Rational)> = Vec::new();
    for (m, c) in p.terms() {
        let mut factor = Scalar::one();
        let mut free = Vec::new();
        for (v, e) in m.powers() {
            match bindings.get(v) {
                Some(b) => {
                    let pw = cache
                        .entry((v.clone(), *e))
                        .or_insert_with(|| b.pow(*e as i32).expect("nonnegative power"))
                        .clone();
                    factor = factor.mul_ref(&pw);
                }
                None => free.push((v.clone(), *e)),
            }
        }
        if factor.is_one() {
            free_terms.push((Monomial::from_powers(free), c.clone()));
        } else {
            let t = Scalar::from_poly(Poly::monomial(Monomial::from_powers(free), c.clone()));
            acc = acc.add_ref(&t.mul_ref(&factor));
        }
    }
    if !free_terms.is_empty() {
        acc = acc.add_ref(&Scalar::from_poly(Poly::from_terms(free_terms)));
    }
    acc
}

fn needs_parens(p: &Poly) -> bool {
    match p.terms() {
        [(m, c)] => {
            let unit = c.is_one();
            let int_const = m.is_one() && c.is_integer() && c >= &Rational::zero();
            !(unit || int_const)
        }
        _ => true,
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_one() {
            return write!(f, "{}", self.num);
        }
        if needs_parens(&self.num) {
            write!(f, "({})", self.num)?;
        } else {
            write!(f, "{}", self.num)?;
        }
        let single_factor = matches!(self.den.terms(), [(m, c)] if c.is_one() && m.powers().len() == 1);
        if needs_parens(&self.den) || !(single_factor || self.den.is_constant()) {
            write!(f, "/({})", self.den)
        } else {
            write!(f, "/{}", self.den)
        }
    }
}

impl Add for &Scalar {
    type Output = Scalar;
    fn add(self, rhs: &Scalar) -> Scalar {
        self.add_ref(rhs)
    }
}

impl Sub for &Scalar {
    type Output = Scalar;
    fn sub(self, rhs: &Scalar) -> Scalar {
        self.add_ref(&-rhs)
    }
}

impl Mul for &Scalar {
    type Output = Scalar;
    fn mul(self, rhs: &Scalar) -> Scalar {
        self.mul_ref(rhs)
    }
}

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        -&self
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Scalar {
            type Output = Scalar;
            fn $m(self, rhs: Scalar) -> Scalar {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Scalar> for Scalar {
            type Output = Scalar;
            fn $m(self, rhs: &Scalar) -> Scalar {
                (&self).$m(rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl std::iter::Sum for Scalar {
    fn sum<I: Iterator<Item = Scalar>>(iter: I) -> Scalar {
        iter.fold(Scalar::zero(), |acc, x| acc + x)
    }
}

impl From<i64> for Scalar {
    fn from(n: i64) -> Self {
        Scalar::from_int(n)
    }
}

impl From<Rational> for Scalar {
    fn from(q: Rational) -> Self {
        Scalar::from_rational(q)
    }
}
