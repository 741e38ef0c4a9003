//! Sparse multivariate polynomials over the rationals.
//!
//! Terms are kept sorted in descending graded-lexicographic order, where the
//! variable order is the lexicographic order of the variable names. Zero
//! coefficients are never stored, so two polynomials are equal exactly when
//! their term vectors are equal.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Signed, Zero};

use super::{Rational, Var};

/// A power product `v1^e1 * v2^e2 * ...`, stored sorted by variable with
/// strictly positive exponents.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Monomial(Vec<(Var, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(v: &Var) -> Self {
        Monomial(vec![(v.clone(), 1)])
    }

    pub fn from_powers(mut powers: Vec<(Var, u32)>) -> Self {
        powers.retain(|(_, e)| *e > 0);
        powers.sort_by(|a, b| a.0.cmp(&b.0));
        let mut out: Vec<(Var, u32)> = Vec::with_capacity(powers.len());
        for (v, e) in powers {
            match out.last_mut() {
                Some((last, le)) if *last == v => *le += e,
                _ => out.push((v, e)),
            }
        }
        Monomial(out)
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn powers(&self) -> &[(Var, u32)] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| e).sum()
    }

    pub fn exponent(&self, v: &Var) -> u32 {
        self.0
            .binary_search_by(|(w, _)| w.cmp(v))
            .map(|i| self.0[i].1)
            .unwrap_or(0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => {
                    out.push(a[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((a[i].0.clone(), a[i].1 + b[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Monomial(out)
    }

    /// `self / other` when `other` divides `self`.
    pub fn div(&self, other: &Monomial) -> Option<Monomial> {
        let mut out = Vec::with_capacity(self.0.len());
        let mut j = 0;
        for (v, e) in &self.0 {
            if j < other.0.len() && other.0[j].0 < *v {
                return None;
            }
            if j < other.0.len() && other.0[j].0 == *v {
                let f = other.0[j].1;
                j += 1;
                match e.cmp(&f) {
                    Ordering::Less => return None,
                    Ordering::Equal => {}
                    Ordering::Greater => out.push((v.clone(), e - f)),
                }
            } else {
                out.push((v.clone(), *e));
            }
        }
        if j < other.0.len() {
            return None;
        }
        Some(Monomial(out))
    }

    /// Componentwise minimum of exponents.
    pub fn gcd(&self, other: &Monomial) -> Monomial {
        let mut out = Vec::new();
        for (v, e) in &self.0 {
            let f = other.exponent(v);
            if f > 0 {
                out.push((v.clone(), (*e).min(f)));
            }
        }
        Monomial(out)
    }

    /// Splits off the power of `v`: returns `(self / v^e, e)`.
    pub fn split(&self, v: &Var) -> (Monomial, u32) {
        match self.0.binary_search_by(|(w, _)| w.cmp(v)) {
            Ok(i) => {
                let mut rest = self.0.clone();
                let (_, e) = rest.remove(i);
                (Monomial(rest), e)
            }
            Err(_) => (self.clone(), 0),
        }
    }

    /// Splits into the part over variables in `set` and the rest.
    fn partition(&self, set: &BTreeSet<Var>) -> (Monomial, Monomial) {
        let (inside, outside): (Vec<_>, Vec<_>) =
            self.0.iter().cloned().partition(|(v, _)| set.contains(v));
        (Monomial(inside), Monomial(outside))
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        match self.degree().cmp(&other.degree()) {
            Ordering::Equal => {}
            ord => return ord,
        }
        let (a, b) = (&self.0, &other.0);
        for i in 0..a.len().max(b.len()) {
            match (a.get(i), b.get(i)) {
                (Some((va, ea)), Some((vb, eb))) => {
                    if va == vb {
                        if ea != eb {
                            return ea.cmp(eb);
                        }
                    } else if va < vb {
                        // `self` carries a positive power of an earlier variable
                        return Ordering::Greater;
                    } else {
                        return Ordering::Less;
                    }
                }
                (Some(_), None) => return Ordering::Greater,
                (None, Some(_)) => return Ordering::Less,
                (None, None) => break,
            }
        }
        Ordering::Equal
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        for (i, (v, e)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, "*")?;
            }
            if *e == 1 {
                write!(f, "{v}")?;
            } else {
                write!(f, "{v}^{e}")?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Poly {
    /// Descending term order, nonzero coefficients.
    terms: Vec<(Monomial, Rational)>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly { terms: Vec::new() }
    }

    pub fn one() -> Self {
        Poly::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        if c.is_zero() {
            Poly::zero()
        } else {
            Poly {
                terms: vec![(Monomial::one(), c)],
            }
        }
    }

    pub fn var(v: &Var) -> Self {
        Poly {
            terms: vec![(Monomial::var(v), Rational::one())],
        }
    }

    pub fn monomial(m: Monomial, c: Rational) -> Self {
        if c.is_zero() {
            Poly::zero()
        } else {
            Poly { terms: vec![(m, c)] }
        }
    }

    /// Builds a polynomial from arbitrary (unsorted, possibly repeated) terms.
    pub fn from_terms<I: IntoIterator<Item = (Monomial, Rational)>>(terms: I) -> Self {
        let mut acc: BTreeMap<Monomial, Rational> = BTreeMap::new();
        for (m, c) in terms {
            if c.is_zero() {
                continue;
            }
            match acc.get_mut(&m) {
                Some(x) => *x += c,
                None => {
                    acc.insert(m, c);
                }
            }
        }
        Poly {
            terms: acc.into_iter().rev().filter(|(_, c)| !c.is_zero()).collect(),
        }
    }

    pub fn terms(&self) -> &[(Monomial, Rational)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1 && self.terms[0].0.is_one() && self.terms[0].1.is_one()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty() || (self.terms.len() == 1 && self.terms[0].0.is_one())
    }

    pub fn constant_value(&self) -> Option<Rational> {
        match self.terms.as_slice() {
            [] => Some(Rational::zero()),
            [(m, c)] if m.is_one() => Some(c.clone()),
            _ => None,
        }
    }

    pub fn leading(&self) -> Option<&(Monomial, Rational)> {
        self.terms.first()
    }

    pub fn leading_coeff(&self) -> Rational {
        self.terms
            .first()
            .map(|(_, c)| c.clone())
            .unwrap_or_else(Rational::zero)
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.first().map(|(m, _)| m.degree()).unwrap_or(0)
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        for (m, _) in &self.terms {
            for (v, _) in m.powers() {
                out.insert(v.clone());
            }
        }
        out
    }

    pub fn contains_var(&self, v: &Var) -> bool {
        self.terms.iter().any(|(m, _)| m.exponent(v) > 0)
    }

    pub fn degree_in(&self, v: &Var) -> u32 {
        self.terms.iter().map(|(m, _)| m.exponent(v)).max().unwrap_or(0)
    }

    pub fn neg(&self) -> Poly {
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }

    pub fn scale(&self, k: &Rational) -> Poly {
        if k.is_zero() {
            return Poly::zero();
        }
        if k.is_one() {
            return self.clone();
        }
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * k)).collect(),
        }
    }

    fn merge(&self, other: &Poly, negate_other: bool) -> Poly {
        let (a, b) = (&self.terms, &other.terms);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        let take_b = |c: &Rational| if negate_other { -c } else { c.clone() };
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Greater => {
                    out.push(a[i].clone());
                    i += 1;
                }
                Ordering::Less => {
                    out.push((b[j].0.clone(), take_b(&b[j].1)));
                    j += 1;
                }
                Ordering::Equal => {
                    let c = if negate_other {
                        &a[i].1 - &b[j].1
                    } else {
                        &a[i].1 + &b[j].1
                    };
                    if !c.is_zero() {
                        out.push((a[i].0.clone(), c));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend(a[i..].iter().cloned());
        out.extend(b[j..].iter().map(|(m, c)| (m.clone(), take_b(c))));
        Poly { terms: out }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        self.merge(other, false)
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.merge(other, true)
    }

    pub fn mul_term(&self, m: &Monomial, c: &Rational) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        // multiplication by a monomial preserves the term order
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(tm, tc)| (tm.mul(m), tc * c))
                .collect(),
        }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        if let Some(c) = self.constant_value() {
            return other.scale(&c);
        }
        if let Some(c) = other.constant_value() {
            return self.scale(&c);
        }
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        if small.len() == 1 {
            let (m, c) = &small.terms[0];
            return large.mul_term(m, c);
        }
        let mut acc: BTreeMap<Monomial, Rational> = BTreeMap::new();
        for (ma, ca) in &small.terms {
            for (mb, cb) in &large.terms {
                let m = ma.mul(mb);
                let c = ca * cb;
                match acc.get_mut(&m) {
                    Some(x) => *x += c,
                    None => {
                        acc.insert(m, c);
                    }
                }
            }
        }
        Poly {
            terms: acc.into_iter().rev().filter(|(_, c)| !c.is_zero()).collect(),
        }
    }

    pub fn pow(&self, mut e: u32) -> Poly {
        let mut base = self.clone();
        let mut acc = Poly::one();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    pub fn derivative(&self, v: &Var) -> Poly {
        let mut terms = Vec::new();
        for (m, c) in &self.terms {
            let (rest, e) = m.split(v);
            if e == 0 {
                continue;
            }
            let mut powers = rest.powers().to_vec();
            if e > 1 {
                powers.push((v.clone(), e - 1));
            }
            terms.push((Monomial::from_powers(powers), c * Rational::from_integer(e.into())));
        }
        Poly::from_terms(terms)
    }

    /// Coefficients of `self` viewed as a univariate polynomial in `v`,
    /// indexed by power.
    pub fn coeffs_in(&self, v: &Var) -> Vec<Poly> {
        let deg = self.degree_in(v) as usize;
        let mut buckets: Vec<Vec<(Monomial, Rational)>> = vec![Vec::new(); deg + 1];
        for (m, c) in &self.terms {
            let (rest, e) = m.split(v);
            buckets[e as usize].push((rest, c.clone()));
        }
        buckets
            .into_iter()
            .map(|mut ts| {
                // removing one variable from every term of a bucket keeps the
                // relative order only for graded-lex within equal powers
                ts.sort_by(|a, b| b.0.cmp(&a.0));
                Poly { terms: ts }
            })
            .collect()
    }

    pub fn from_coeffs_in(v: &Var, coeffs: &[Poly]) -> Poly {
        let mut terms = Vec::new();
        for (e, c) in coeffs.iter().enumerate() {
            let vm = Monomial::from_powers(vec![(v.clone(), e as u32)]);
            for (m, k) in &c.terms {
                terms.push((m.mul(&vm), k.clone()));
            }
        }
        Poly::from_terms(terms)
    }

    /// Groups terms by their power product over `set`; the returned
    /// coefficients are free of the variables in `set`.
    pub fn coeffs_over(&self, set: &BTreeSet<Var>) -> Vec<Poly> {
        let mut groups: BTreeMap<Monomial, Vec<(Monomial, Rational)>> = BTreeMap::new();
        for (m, c) in &self.terms {
            let (inside, outside) = m.partition(set);
            groups.entry(inside).or_default().push((outside, c.clone()));
        }
        groups
            .into_values()
            .map(|mut ts| {
                ts.sort_by(|a, b| b.0.cmp(&a.0));
                Poly { terms: ts }
            })
            .collect()
    }

    /// Exact division; `None` when `d` does not divide `self`.
    pub fn div_exact(&self, d: &Poly) -> Option<Poly> {
        if d.is_zero() {
            return None;
        }
        if let Some(c) = d.constant_value() {
            return Some(self.scale(&(Rational::one() / c)));
        }
        if self.is_zero() {
            return Some(Poly::zero());
        }
        let (dm, dc) = d.terms[0].clone();
        let mut rem = self.clone();
        let mut quotient = Vec::new();
        while let Some((rm, rc)) = rem.terms.first() {
            let qm = rm.div(&dm)?;
            let qc = rc / &dc;
            rem = rem.sub(&d.mul_term(&qm, &qc));
            quotient.push((qm, qc));
        }
        // quotient terms are produced in strictly descending order
        Some(Poly { terms: quotient })
    }

    /// Positive rational `c` such that `self / c` has coprime integer
    /// coefficients and a positive leading coefficient (sign folded in).
    pub fn rational_content(&self) -> Rational {
        use num_integer::Integer;
        let mut num = num_bigint::BigInt::zero();
        let mut den = num_bigint::BigInt::one();
        for (_, c) in &self.terms {
            num = num.gcd(c.numer());
            den = den.lcm(c.denom());
        }
        if num.is_zero() {
            return Rational::one();
        }
        let content = Rational::new(num, den);
        if self.leading_coeff().is_negative() {
            -content
        } else {
            content
        }
    }

    /// Integer-primitive form with positive leading coefficient.
    pub fn primitive(&self) -> Poly {
        if self.is_zero() {
            return Poly::zero();
        }
        let c = self.rational_content();
        self.scale(&(Rational::one() / c))
    }

    /// Scales so the leading coefficient is one.
    pub fn monic(&self) -> Poly {
        match self.terms.first() {
            None => Poly::zero(),
            Some((_, c)) if c.is_one() => self.clone(),
            Some((_, c)) => self.scale(&(Rational::one() / c)),
        }
    }

    pub fn eval<F>(&self, value_of: &F) -> Option<Rational>
    where
        F: Fn(&Var) -> Option<Rational>,
    {
        let mut cache: BTreeMap<Var, Rational> = BTreeMap::new();
        let mut acc = Rational::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (v, e) in m.powers() {
                let base = match cache.get(v) {
                    Some(b) => b.clone(),
                    None => {
                        let b = value_of(v)?;
                        cache.insert(v.clone(), b.clone());
                        b
                    }
                };
                t *= num_traits::pow::pow(base, *e as usize);
            }
            acc += t;
        }
        Some(acc)
    }

    /// Applies a variable renaming. The map must be injective on the
    /// variables of `self`.
    pub fn rename(&self, map: &BTreeMap<Var, Var>) -> Poly {
        Poly::from_terms(self.terms.iter().map(|(m, c)| {
            let powers = m
                .powers()
                .iter()
                .map(|(v, e)| (map.get(v).cloned().unwrap_or_else(|| v.clone()), *e))
                .collect();
            (Monomial::from_powers(powers), c.clone())
        }))
    }
}

fn fmt_rational(q: &Rational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            let mag = c.abs();
            if i == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            if m.is_one() {
                write!(f, "{}", fmt_rational(&mag))?;
            } else if mag.is_one() {
                write!(f, "{m}")?;
            } else {
                write!(f, "{}*{m}", fmt_rational(&mag))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &str) -> Var {
        Var::new(s)
    }

    fn q(n: i64) -> Rational {
        Rational::from_integer(n.into())
    }

    #[test]
    fn graded_lex_order() {
        let x1 = Monomial::var(&v("x1"));
        let x2 = Monomial::var(&v("x2"));
        let x1x2 = x1.mul(&x2);
        let x2sq = x2.mul(&x2);
        assert!(x1 > x2);
        assert!(x1x2 > x2sq);
        assert!(x2 > Monomial::one());
        assert!(x1x2.mul(&x1) > x2sq);
    }

    #[test]
    fn monomial_division() {
        let a = Monomial::from_powers(vec![(v("x"), 2), (v("y"), 1)]);
        let b = Monomial::from_powers(vec![(v("x"), 1)]);
        assert_eq!(
            a.div(&b),
            Some(Monomial::from_powers(vec![(v("x"), 1), (v("y"), 1)]))
        );
        assert_eq!(b.div(&a), None);
        let c = Monomial::var(&v("z"));
        assert_eq!(a.div(&c), None);
    }

    #[test]
    fn exact_division_roundtrip() {
        let x = Poly::var(&v("x"));
        let y = Poly::var(&v("y"));
        let a = x.add(&y).add(&Poly::constant(q(3)));
        let b = x.mul(&y).sub(&Poly::constant(q(2)));
        let p = a.mul(&b);
        assert_eq!(p.div_exact(&a), Some(b.clone()));
        assert_eq!(p.div_exact(&b), Some(a));
        assert_eq!(x.div_exact(&y), None);
    }

    #[test]
    fn coefficient_split_and_join() {
        let x = Poly::var(&v("x"));
        let y = Poly::var(&v("y"));
        let p = x.mul(&x).mul(&y).add(&x.scale(&q(3))).add(&y);
        let cs = p.coeffs_in(&v("x"));
        assert_eq!(cs.len(), 3);
        assert_eq!(cs[0], y);
        assert_eq!(cs[1], Poly::constant(q(3)));
        assert_eq!(cs[2], y);
        assert_eq!(Poly::from_coeffs_in(&v("x"), &cs), p);
    }

    #[test]
    fn display_is_canonical() {
        let x = Poly::var(&v("x2"));
        let y = Poly::var(&v("x4"));
        let p = x.add(&y.scale(&q(3))).sub(&Poly::constant(Rational::new(1.into(), 2.into())));
        assert_eq!(p.to_string(), "x2 + 3*x4 - 1/2");
    }
}
