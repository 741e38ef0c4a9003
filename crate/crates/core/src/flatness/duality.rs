use super::{CodistributionRun, DistributionRun};
use crate::dtsystem::DiscreteSystem;
use crate::geometry::{Codistribution, Distribution};

/// Checks for one `k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DualityRow {
    pub k: usize,
    pub dim_e: usize,
    pub dim_p: usize,
    /// `E_{k−1} ⌋ P_k = 0`.
    pub annihilates: bool,
    /// `dim E_{k−1} + dim P_k = n + m`.
    pub dims_ok: bool,
    pub dim_d: usize,
    pub dim_dperp: usize,
    /// `D_{k−1} ⌋ (P⁺_{k+1} + P_k) = 0`.
    pub d_annihilates: bool,
    pub d_dims_ok: bool,
    pub dbar: usize,
    pub rank_m: usize,
    /// `dim E_k = d̄ − rank M + m`.
    pub formula_e: bool,
    /// `dim P_{k+1} = n − d̄ + rank M`.
    pub formula_p: bool,
    /// `dim D̄ = dim D − rank M`.
    pub formula_d: bool,
}

impl DualityRow {
    pub fn ok(&self) -> bool {
        self.annihilates
            && self.dims_ok
            && self.d_annihilates
            && self.d_dims_ok
            && self.formula_e
            && self.formula_p
            && self.formula_d
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DualityReport {
    pub rows: Vec<DualityRow>,
    pub ok: bool,
    /// Human-readable description of each failed check.
    pub violations: Vec<String>,
}

fn annihilates(d: &Distribution, p: &Codistribution) -> bool {
    d.basis().iter().all(|v| {
        p.basis()
            .iter()
            .all(|w| v.interior(w).map(|s| s.is_zero()).unwrap_or(false))
    })
}

/// Runs every duality check for `k = 1..k̄`. When the two runs stopped at
/// different `k̄` only the common prefix is checked and the mismatch is
/// reported as a violation.
pub fn verify_duality(
    sys: &DiscreteSystem,
    dist: &DistributionRun,
    codist: &CodistributionRun,
) -> DualityReport {
    let total = sys.n() + sys.m();
    let mut violations = Vec::new();
    if dist.kbar != codist.kbar {
        violations.push(format!(
            "stop index differs: distribution test {:?}, codistribution test {:?}",
            dist.kbar, codist.kbar
        ));
    }
    let last = dist.steps.len().min(codist.steps.len());
    let mut rows = Vec::new();
    for i in 0..last {
        let k = i + 1;
        let ds = &dist.steps[i];
        let cs = &codist.steps[i];
        let e_prev = &dist.e[i];
        let p_k = &codist.p[i];
        let d_prev = &ds.projectable.original;
        let dperp = cs
            .pplus_original
            .sum(p_k)
            .expect("both on the original chart");
        let mm = &ds.projectable.mmatrix;
        let row = DualityRow {
            k,
            dim_e: e_prev.dim(),
            dim_p: p_k.dim(),
            annihilates: annihilates(e_prev, p_k),
            dims_ok: e_prev.dim() + p_k.dim() == total,
            dim_d: d_prev.dim(),
            dim_dperp: dperp.dim(),
            d_annihilates: annihilates(d_prev, &dperp),
            d_dims_ok: d_prev.dim() + dperp.dim() == total,
            dbar: mm.dbar,
            rank_m: mm.rank_m,
            formula_e: ds.e.dim() + mm.rank_m == mm.dbar + sys.m(),
            formula_p: cs.p_next.dim() + mm.dbar == sys.n() + mm.rank_m,
            formula_d: d_prev.dim() + mm.rank_m == e_prev.dim(),
        };
        let checks = [
            (row.annihilates, "E_{k-1} does not annihilate P_k"),
            (row.dims_ok, "dim E_{k-1} + dim P_k != n + m"),
            (row.d_annihilates, "D_{k-1} does not annihilate P+_{k+1} + P_k"),
            (row.d_dims_ok, "dim D_{k-1} + dim (P+_{k+1} + P_k) != n + m"),
            (row.formula_e, "dim E_k != dbar - rank M + m"),
            (row.formula_p, "dim P_{k+1} != n - dbar + rank M"),
            (row.formula_d, "dim D != dim E - rank M"),
        ];
        for (ok, msg) in checks {
            if !ok {
                violations.push(format!("k = {k}: {msg}"));
            }
        }
        rows.push(row);
    }
    DualityReport {
        ok: violations.is_empty(),
        rows,
        violations,
    }
}
