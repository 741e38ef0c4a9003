//! Gaussian elimination over the field of rational functions.
//!
//! Pivoting is deterministic: columns are visited in the given order and the
//! first row (top to bottom) whose entry is not identically zero becomes the
//! pivot row. Reduced row echelon forms are unique for a fixed column order,
//! which makes printed bases reproducible.

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::symexpr::{gcd, Monomial, Poly, Rational, Scalar, Var};

/// Reduced row echelon form: `rows[r]` has a one in column `pivots[r]` and
/// zeros in every other pivot column.
#[derive(Clone, Debug)]
pub struct Echelon {
    pub rows: Vec<Vec<Scalar>>,
    pub pivots: Vec<usize>,
    pub ncols: usize,
}

fn axpy(target: &mut [Scalar], factor: &Scalar, source: &[Scalar]) {
    // target -= factor * source
    for (t, s) in target.iter_mut().zip(source) {
        if !s.is_zero() {
            *t = &*t - &(factor * s);
        }
    }
}

fn scale_row(row: &mut [Scalar], k: &Scalar) {
    if k.is_one() {
        return;
    }
    for x in row.iter_mut() {
        if !x.is_zero() {
            *x = &*x * k;
        }
    }
}

/// Reduced row echelon form with columns visited in `order`. Columns not
/// listed in `order` never become pivots.
pub fn rref_with_order(rows: Vec<Vec<Scalar>>, ncols: usize, order: &[usize]) -> Echelon {
    let mut rows: Vec<Vec<Scalar>> = rows
        .into_iter()
        .filter(|r| r.iter().any(|x| !x.is_zero()))
        .collect();
    let mut pivots = Vec::new();
    let mut next = 0;
    for &col in order {
        if next == rows.len() {
            break;
        }
        let Some(found) = (next..rows.len()).find(|&r| !rows[r][col].is_zero()) else {
            continue;
        };
        rows.swap(next, found);
        let inv = rows[next][col].inv().expect("pivot is nonzero");
        scale_row(&mut rows[next], &inv);
        let pivot_row = rows[next].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != next && !row[col].is_zero() {
                let f = row[col].clone();
                axpy(row, &f, &pivot_row);
            }
        }
        pivots.push(col);
        next += 1;
    }
    rows.truncate(next);
    Echelon {
        rows,
        pivots,
        ncols,
    }
}

pub fn rref(rows: Vec<Vec<Scalar>>, ncols: usize) -> Echelon {
    let order: Vec<usize> = (0..ncols).collect();
    rref_with_order(rows, ncols, &order)
}

/// Rank over the rational-function field (forward elimination only).
pub fn generic_rank(rows: &[Vec<Scalar>]) -> usize {
    let ncols = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    let mut rows: Vec<Vec<Scalar>> = rows
        .iter()
        .filter(|r| r.iter().any(|x| !x.is_zero()))
        .cloned()
        .collect();
    let mut rank = 0;
    for col in 0..ncols {
        if rank == rows.len() {
            break;
        }
        let Some(found) = (rank..rows.len()).find(|&r| !rows[r][col].is_zero()) else {
            continue;
        };
        rows.swap(rank, found);
        let inv = rows[rank][col].inv().expect("pivot is nonzero");
        let pivot_row = rows[rank].clone();
        for row in rows.iter_mut().skip(rank + 1) {
            if !row[col].is_zero() {
                let f = &row[col] * &inv;
                axpy(row, &f, &pivot_row);
            }
        }
        rank += 1;
    }
    rank
}

impl Echelon {
    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Residual of `v` after eliminating every pivot column.
    pub fn reduce(&self, v: &[Scalar]) -> Vec<Scalar> {
        let mut out = v.to_vec();
        for (row, &p) in self.rows.iter().zip(&self.pivots) {
            if !out[p].is_zero() {
                let f = out[p].clone();
                axpy(&mut out, &f, row);
            }
        }
        out
    }

    pub fn contains(&self, v: &[Scalar]) -> bool {
        self.reduce(v).iter().all(Scalar::is_zero)
    }

    /// Basis of `{x : rows * x = 0}`, one vector per non-pivot column.
    pub fn kernel(&self) -> Vec<Vec<Scalar>> {
        let mut out = Vec::new();
        for free in 0..self.ncols {
            if self.pivots.contains(&free) {
                continue;
            }
            let mut x = vec![Scalar::zero(); self.ncols];
            x[free] = Scalar::one();
            for (row, &p) in self.rows.iter().zip(&self.pivots) {
                if !row[free].is_zero() {
                    x[p] = -&row[free];
                }
            }
            out.push(x);
        }
        out
    }
}

/// Basis of the right kernel of `rows` (each row has `ncols` entries).
pub fn kernel(rows: &[Vec<Scalar>], ncols: usize) -> Vec<Vec<Scalar>> {
    rref(rows.to_vec(), ncols).kernel()
}

/// Rank of the matrix evaluated at a rational point; `None` if some entry
/// is singular there.
pub fn rank_at(rows: &[Vec<Scalar>], point: &BTreeMap<Var, Rational>) -> Option<usize> {
    let mut m: Vec<Vec<Rational>> = Vec::with_capacity(rows.len());
    for r in rows {
        let mut out = Vec::with_capacity(r.len());
        for x in r {
            out.push(x.eval_at(point).ok()?);
        }
        m.push(out);
    }
    Some(rational_rank(m))
}

fn rational_rank(mut m: Vec<Vec<Rational>>) -> usize {
    let ncols = m.iter().map(|r| r.len()).max().unwrap_or(0);
    let mut rank = 0;
    for col in 0..ncols {
        let Some(found) = (rank..m.len()).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(rank, found);
        let pivot = m[rank].clone();
        for row in m.iter_mut().skip(rank + 1) {
            if !row[col].is_zero() {
                let f = &row[col] / &pivot[col];
                for (t, s) in row.iter_mut().zip(&pivot) {
                    *t -= &f * s;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Indices of a maximal subset of rows that is linearly independent over the
/// rational constants (as opposed to over the function field). Greedy in
/// row order.
pub fn constant_independent_rows(rows: &[Vec<Scalar>]) -> Vec<usize> {
    // common denominator turns each row into a vector of polynomials; the
    // constant-coefficient relations are relations between their coefficients
    let mut lcm = Poly::one();
    for r in rows {
        for x in r {
            let d = x.denom();
            if !d.is_one() {
                let g = gcd(&lcm, d);
                lcm = lcm.mul(&d.div_exact(&g).expect("gcd divides"));
            }
        }
    }
    let mut basis: Vec<(usize, BTreeMap<(usize, Monomial), Rational>)> = Vec::new();
    let mut chosen = Vec::new();
    for (idx, r) in rows.iter().enumerate() {
        let mut vec: BTreeMap<(usize, Monomial), Rational> = BTreeMap::new();
        for (col, x) in r.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            let cofactor = lcm.div_exact(x.denom()).expect("lcm is a multiple");
            for (m, c) in x.numer().mul(&cofactor).terms() {
                vec.insert((col, m.clone()), c.clone());
            }
        }
        // basis vectors have distinct leading (smallest) keys, sorted ascending
        for (_, b) in &basis {
            let (lead, lead_c) = b.iter().next().expect("basis vectors are nonempty");
            if let Some(c) = vec.get(lead).cloned() {
                let f = c / lead_c;
                for (k, bc) in b {
                    let e = vec.entry(k.clone()).or_insert_with(Rational::zero);
                    *e -= &f * bc;
                    if e.is_zero() {
                        vec.remove(k);
                    }
                }
            }
        }
        if !vec.is_empty() {
            chosen.push(idx);
            basis.push((idx, vec));
            basis.sort_by(|a, b| a.1.keys().next().cmp(&b.1.keys().next()));
        }
    }
    chosen
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::parse_scalar;

    fn row(src: &[&str]) -> Vec<Scalar> {
        src.iter().map(|s| parse_scalar(s).unwrap()).collect()
    }

    #[test]
    fn rank_examples() {
        let id: Vec<Vec<Scalar>> = (0..3)
            .map(|i| (0..3).map(|j| Scalar::from_int((i == j) as i64)).collect())
            .collect();
        assert_eq!(generic_rank(&id), 3);
        assert_eq!(generic_rank(&[row(&["1", "u1"]), row(&["u1", "u1^2"])]), 1);
        assert_eq!(generic_rank(&[]), 0);
    }

    #[test]
    fn kernel_is_annihilated() {
        let m = vec![row(&["1", "x", "y"]), row(&["x", "1", "0"])];
        let ker = kernel(&m, 3);
        assert_eq!(ker.len(), 1);
        for r in &m {
            let dot: Scalar = r.iter().zip(&ker[0]).map(|(a, b)| a * b).sum();
            assert!(dot.is_zero());
        }
    }

    #[test]
    fn rref_is_unique_for_fixed_order() {
        let a = rref(vec![row(&["1", "x"]), row(&["0", "1"])], 2);
        let b = rref(vec![row(&["x", "1"]), row(&["2", "3"])], 2);
        assert_eq!(a.rows, b.rows);
    }

    #[test]
    fn constant_independence_differs_from_function_field_rank() {
        let rows = vec![
            row(&["-(xi2+1)/(3*th1)", "0"]),
            row(&["-xi1/(3*th1)", "0"]),
            row(&["2*(xi2+1)/(3*th1)", "0"]),
            row(&["0", "0"]),
        ];
        assert_eq!(generic_rank(&rows), 1);
        assert_eq!(constant_independent_rows(&rows), vec![0, 1]);
    }
}
