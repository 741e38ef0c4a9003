//! Normalized bases in adapted coordinates and the derivative matrix `M`.

use crate::dtsystem::AdaptedChart;
use crate::geometry::linalg::{constant_independent_rows, generic_rank, rref, rref_with_order};
use crate::geometry::{Distribution, VectorField};
use crate::symexpr::{Scalar, Var};

/// A distribution on `(θ, ξ)` in normalized form: the first `dbar` fields
/// have an identity block on the `θ`-pivots, the remaining ones only have
/// `∂ξ` components.
#[derive(Clone, Debug)]
pub struct NormalizedBasis {
    pub fields: Vec<VectorField>,
    pub dbar: usize,
    /// `θ` indices of the pivots of the first `dbar` fields.
    pub theta_pivots: Vec<usize>,
    /// `θ` indices that are not pivots.
    pub theta_free: Vec<usize>,
}

/// Gaussian elimination with column order `θ1..θn, ξm..ξ1`.
pub fn normalize_distribution_basis(d: &Distribution, n: usize) -> NormalizedBasis {
    let dim = d.chart().dim();
    let mut order: Vec<usize> = (0..n).collect();
    order.extend((n..dim).rev());
    let ech = rref_with_order(d.coefficient_rows(), dim, &order);
    let dbar = ech.pivots.iter().filter(|&&p| p < n).count();
    let theta_pivots: Vec<usize> = ech.pivots.iter().copied().filter(|&p| p < n).collect();
    let theta_free = (0..n).filter(|i| !theta_pivots.contains(i)).collect();
    let fields = ech
        .rows
        .into_iter()
        .map(|r| VectorField::new(d.chart(), r).expect("same chart"))
        .collect();
    NormalizedBasis {
        fields,
        dbar,
        theta_pivots,
        theta_free,
    }
}

/// The rows of all (repeated, mixed) `ξ`-derivatives of a matrix, grouped by
/// derivative order. Generation stops at the first order that adds no
/// rank over the function field; that order is kept but marked.
#[derive(Clone, Debug)]
pub struct DerivativeLevels {
    pub levels: Vec<Vec<Vec<Scalar>>>,
    /// Number of leading levels that raised the rank.
    pub contributing: usize,
    pub rank: usize,
}

impl DerivativeLevels {
    pub fn contributing_rows(&self) -> Vec<Vec<Scalar>> {
        self.levels[..self.contributing].iter().flatten().cloned().collect()
    }

    pub fn all_rows(&self) -> Vec<Vec<Scalar>> {
        self.levels.iter().flatten().cloned().collect()
    }
}

pub fn derivative_levels(base: &[Vec<Scalar>], xi: &[Var]) -> DerivativeLevels {
    // each row remembers the smallest ξ index it may still be differentiated
    // by, so mixed derivatives are generated once
    let mut current: Vec<(Vec<Scalar>, usize)> = base.iter().map(|r| (r.clone(), 0)).collect();
    let mut levels: Vec<Vec<Vec<Scalar>>> = Vec::new();
    let mut acc: Vec<Vec<Scalar>> = Vec::new();
    let mut rank = 0;
    let mut contributing = 0;
    loop {
        let mut next = Vec::new();
        for (j, v) in xi.iter().enumerate() {
            for (row, jmin) in &current {
                if j < *jmin {
                    continue;
                }
                let d: Vec<Scalar> = row.iter().map(|x| x.differentiate(v)).collect();
                if d.iter().any(|x| !x.is_zero()) {
                    next.push((d, j));
                }
            }
        }
        if next.is_empty() {
            break;
        }
        let rows: Vec<Vec<Scalar>> = next.iter().map(|(r, _)| r.clone()).collect();
        acc.extend(rows.iter().cloned());
        let r = generic_rank(&acc);
        levels.push(rows);
        if r == rank {
            break;
        }
        rank = r;
        contributing = levels.len();
        current = next;
    }
    DerivativeLevels {
        levels,
        contributing,
        rank,
    }
}

/// `L`, `M`, `M̂` and the kernel of `M` for one normalized distribution.
#[derive(Clone, Debug)]
pub struct MMatrixReport {
    pub dbar: usize,
    /// `L[ī][k] = a_k^ī`, rows indexed by the non-pivot `θ`.
    pub l: Vec<Vec<Scalar>>,
    /// Every derivative row that was generated, by order.
    pub m: Vec<Vec<Scalar>>,
    /// Rows of `M` independent over the rational constants, taken from the
    /// orders that raised the rank.
    pub mhat: Vec<Vec<Scalar>>,
    pub rank_m: usize,
    /// Basis of `ker M`, each of length `dbar`, free of `ξ`.
    pub kernel: Vec<Vec<Scalar>>,
    pub theta_pivots: Vec<usize>,
}

impl MMatrixReport {
    pub fn q(&self) -> usize {
        self.kernel.len()
    }

    /// Every kernel vector annihilates every row of `M̂`.
    pub fn kernel_annihilates(&self) -> bool {
        self.kernel.iter().all(|c| {
            self.mhat.iter().all(|row| {
                row.iter()
                    .zip(c)
                    .map(|(a, b)| a * b)
                    .sum::<Scalar>()
                    .is_zero()
            })
        })
    }

    pub fn kernel_is_xi_free(&self, xi: &[Var]) -> bool {
        self.kernel.iter().flatten().all(|c| !c.depends_on_any(xi))
    }
}

/// Builds `L` from a normalized basis and derives `M`, `M̂`, `rank M` and
/// the kernel. With `reverse_xi` the derivatives are generated in reversed
/// `ξ` order (the rank must not change).
pub fn m_matrix(norm: &NormalizedBasis, chart: &AdaptedChart, reverse_xi: bool) -> MMatrixReport {
    let dbar = norm.dbar;
    let l: Vec<Vec<Scalar>> = norm
        .theta_free
        .iter()
        .map(|&i| (0..dbar).map(|k| norm.fields[k].coeffs()[i].clone()).collect())
        .collect();
    let mut xi: Vec<Var> = chart.xi().to_vec();
    if reverse_xi {
        xi.reverse();
    }
    let levels = derivative_levels(&l, &xi);
    let contributing = levels.contributing_rows();
    let mhat: Vec<Vec<Scalar>> = constant_independent_rows(&contributing)
        .into_iter()
        .map(|i| contributing[i].clone())
        .collect();
    let kernel = if dbar == 0 {
        Vec::new()
    } else {
        rref(contributing, dbar).kernel()
    };
    MMatrixReport {
        dbar,
        l,
        m: levels.all_rows(),
        mhat,
        rank_m: levels.rank,
        kernel,
        theta_pivots: norm.theta_pivots.clone(),
    }
}
