//! Multivariate polynomial gcd over the rationals.
//!
//! Recursive primitive polynomial remainder sequences: pick a main variable
//! shared by both inputs, split off contents (gcds of the coefficients, one
//! variable fewer), run the primitive PRS on the primitive parts. Variables
//! present in only one operand are removed first by taking contents.
//!
//! Before any remainder sequence, univariate images bound the degree of the
//! gcd in each variable. A zero bound removes that variable by taking
//! contents, which settles the common coprime case without a PRS.

use std::collections::{BTreeMap, BTreeSet};

use super::poly::{Monomial, Poly};
use super::{Rational, Var};
use num_traits::{One, Zero};

/// Monic gcd. `gcd(0, 0) = 0`.
pub fn gcd(a: &Poly, b: &Poly) -> Poly {
    gcd_rec(a, b).monic()
}

/// Gcd of a list; stops early once the result becomes constant.
pub fn gcd_many<'a, I: IntoIterator<Item = &'a Poly>>(items: I) -> Poly {
    let mut acc = Poly::zero();
    for p in items {
        acc = gcd_rec(&acc, p);
        if acc.is_one() {
            break;
        }
    }
    acc.monic()
}

/// Returns an integer-primitive gcd with positive leading coefficient.
fn gcd_rec(a: &Poly, b: &Poly) -> Poly {
    if a.is_zero() {
        return b.primitive();
    }
    if b.is_zero() {
        return a.primitive();
    }
    if a.is_constant() || b.is_constant() {
        return Poly::one();
    }
    if a.len() == 1 {
        return monomial_gcd(&a.terms()[0].0, b);
    }
    if b.len() == 1 {
        return monomial_gcd(&b.terms()[0].0, a);
    }
    let (pa, pb) = (a.primitive(), b.primitive());
    if pa == pb {
        return pa;
    }

    let va = pa.vars();
    let vb = pb.vars();
    let only_a: BTreeSet<Var> = va.difference(&vb).cloned().collect();
    let only_b: BTreeSet<Var> = vb.difference(&va).cloned().collect();
    if !only_a.is_empty() || !only_b.is_empty() {
        // the gcd cannot involve variables missing from either side
        let ca = if only_a.is_empty() {
            pa
        } else {
            content_over(&pa, &only_a)
        };
        let cb = if only_b.is_empty() {
            pb
        } else {
            content_over(&pb, &only_b)
        };
        return gcd_rec(&ca, &cb);
    }

    if va.len() == 1 {
        let v = va.iter().next().expect("one variable");
        return univariate_gcd(&pa, &pb, v).primitive();
    }

    let mut bounds = Vec::with_capacity(va.len());
    for v in &va {
        match degree_bound(&pa, &pb, v) {
            Some(0) => {
                // the gcd divides every coefficient in `v` of both operands
                let mut acc = Poly::zero();
                for c in pa.coeffs_in(v).iter().chain(pb.coeffs_in(v).iter()) {
                    if c.is_zero() {
                        continue;
                    }
                    acc = gcd_rec(&acc, c);
                    if acc.is_one() {
                        break;
                    }
                }
                return acc;
            }
            Some(d) => {
                for (p, q) in [(&pb, &pa), (&pa, &pb)] {
                    if d == p.degree_in(v) && q.div_exact(p).is_some() {
                        return p.clone();
                    }
                }
                bounds.push((d, v.clone()));
            }
            None => bounds.push((pa.degree_in(v).min(pb.degree_in(v)), v.clone())),
        }
    }
    // main variable: smallest degree bound keeps the remainder sequence short
    let main = bounds
        .into_iter()
        .min()
        .map(|(_, v)| v)
        .expect("non-constant polynomials share a variable here");

    let ca = content_in(&pa, &main);
    let cb = content_in(&pb, &main);
    let ppa = pa.div_exact(&ca).expect("content divides");
    let ppb = pb.div_exact(&cb).expect("content divides");
    let c = gcd_rec(&ca, &cb);
    let g = prs(&ppa, &ppb, &main);
    c.mul(&g).primitive()
}

/// Dense coefficients (index = power) of `p` in `v` after substituting
/// `point` for every other variable.
fn image(p: &Poly, v: &Var, point: &BTreeMap<Var, Rational>) -> Vec<Rational> {
    p.coeffs_in(v)
        .iter()
        .map(|c| c.eval(&|w: &Var| point.get(w).cloned()).expect("point covers the other variables"))
        .collect()
}

fn trim(mut a: Vec<Rational>) -> Vec<Rational> {
    while a.last().is_some_and(|c| c.is_zero()) {
        a.pop();
    }
    a
}

/// `a mod b` for dense univariate polynomials, `b` nonzero.
fn dense_rem(mut a: Vec<Rational>, b: &[Rational]) -> Vec<Rational> {
    let db = b.len() - 1;
    let lb = &b[db];
    while a.len() > db && !a.is_empty() {
        let k = a.len() - 1;
        let q = &a[k] / lb;
        for (i, bi) in b.iter().enumerate() {
            let idx = k - db + i;
            a[idx] = &a[idx] - &(&q * bi);
        }
        a.pop();
        a = trim(a);
    }
    a
}

/// Monic Euclid on dense coefficient vectors.
fn dense_gcd(a: Vec<Rational>, b: Vec<Rational>) -> Vec<Rational> {
    let (mut a, mut b) = (trim(a), trim(b));
    while !b.is_empty() {
        let r = dense_rem(a, &b);
        a = b;
        let lc = r.last().cloned();
        b = match lc {
            Some(lc) => r.into_iter().map(|c| c / &lc).collect(),
            None => r,
        };
    }
    a
}

fn univariate_gcd(a: &Poly, b: &Poly, v: &Var) -> Poly {
    let none = BTreeMap::new();
    let g = dense_gcd(image(a, v, &none), image(b, v, &none));
    let coeffs: Vec<Poly> = g.into_iter().map(Poly::constant).collect();
    Poly::from_coeffs_in(v, &coeffs)
}

/// Upper bound on the degree in `v` of `gcd(a, b)`, read off a univariate
/// image at a point that keeps both leading coefficients in `v` nonzero.
fn degree_bound(a: &Poly, b: &Poly, v: &Var) -> Option<u32> {
    let others: Vec<Var> = a.vars().union(&b.vars()).filter(|w| *w != v).cloned().collect();
    let (da, db) = (a.degree_in(v) as usize, b.degree_in(v) as usize);
    for attempt in 0..8i64 {
        let point: BTreeMap<Var, Rational> = others
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let x = 2 + attempt * 7 + (i as i64) * (3 + attempt);
                (w.clone(), Rational::from_integer((if i % 2 == 0 { x } else { -x }).into()))
            })
            .collect();
        let (ia, ib) = (image(a, v, &point), image(b, v, &point));
        if ia[da].is_zero() || ib[db].is_zero() {
            continue;
        }
        let g = dense_gcd(ia, ib);
        return Some(g.len().saturating_sub(1) as u32);
    }
    None
}

fn monomial_gcd(m: &Monomial, p: &Poly) -> Poly {
    let mut g = m.clone();
    for (tm, _) in p.terms() {
        g = g.gcd(tm);
        if g.is_one() {
            break;
        }
    }
    Poly::monomial(g, Rational::one())
}

/// Gcd of the coefficients of `p` viewed as a polynomial in `v`.
pub fn content_in(p: &Poly, v: &Var) -> Poly {
    let coeffs = p.coeffs_in(v);
    let mut acc = Poly::zero();
    for c in coeffs.iter().filter(|c| !c.is_zero()) {
        acc = gcd_rec(&acc, c);
        if acc.is_one() {
            break;
        }
    }
    acc
}

fn content_over(p: &Poly, set: &BTreeSet<Var>) -> Poly {
    let coeffs = p.coeffs_over(set);
    let mut acc = Poly::zero();
    for c in &coeffs {
        acc = gcd_rec(&acc, c);
        if acc.is_one() {
            break;
        }
    }
    acc
}

/// Primitive part with respect to `v`, integer-normalized.
fn primitive_in(p: &Poly, v: &Var) -> Poly {
    let c = content_in(p, v);
    p.div_exact(&c).expect("content divides").primitive()
}

/// Pseudo-remainder of `a` by `b` as polynomials in `v`.
fn prem(a: &Poly, b: &Poly, v: &Var) -> Poly {
    let db = b.degree_in(v);
    let bc = b.coeffs_in(v);
    let lb = bc[db as usize].clone();
    let mut r = a.clone();
    loop {
        let dr = r.degree_in(v);
        if r.is_zero() || dr < db {
            return r;
        }
        let lr = r.coeffs_in(v)[dr as usize].clone();
        let shift = Poly::monomial(
            Monomial::from_powers(vec![(v.clone(), dr - db)]),
            Rational::one(),
        );
        r = r.mul(&lb).sub(&b.mul(&lr).mul(&shift));
    }
}

fn prs(a: &Poly, b: &Poly, v: &Var) -> Poly {
    let (mut f, mut g) = if a.degree_in(v) >= b.degree_in(v) {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    };
    loop {
        if g.is_zero() {
            return primitive_in(&f, v);
        }
        if g.degree_in(v) == 0 {
            return Poly::one();
        }
        let r = prem(&f, &g, v);
        f = g;
        g = if r.is_zero() { r } else { primitive_in(&r, v) };
    }
}
