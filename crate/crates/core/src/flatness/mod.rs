//! The distribution-based and the codistribution-based test for
//! forward-flatness, and the duality checks relating their sequences.

use thiserror::Error;

use crate::dtsystem::{pullback_pi, AdaptedChart, DiscreteSystem, SystemError};
use crate::geometry::linalg::{constant_independent_rows, rref_with_order};
use crate::geometry::{Codistribution, Distribution, GeometryError, OneForm, VectorField};
use crate::symexpr::Scalar;

mod duality;
mod mmatrix;

pub use duality::{verify_duality, DualityReport, DualityRow};
pub use mmatrix::{
    derivative_levels, m_matrix, normalize_distribution_basis, DerivativeLevels, MMatrixReport,
    NormalizedBasis,
};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum FlatnessError {
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("step {k}: adapted-chart closure and {other} closure disagree")]
    ClosureMismatch { k: usize, other: &'static str },
    #[error("step {k}: dim of largest projectable subdistribution is {got}, expected dim D - rank M = {expected}")]
    ProjectableDimension { k: usize, got: usize, expected: usize },
}

/// Largest projectable subdistribution of `d` (given on `(x, u)`).
#[derive(Clone, Debug)]
pub struct ProjectableSub {
    /// `D` in adapted coordinates, normalized.
    pub normalized: NormalizedBasis,
    pub mmatrix: MMatrixReport,
    /// `D̄` on the adapted chart: kernel combinations and the `∂ξ` fields.
    pub adapted: Distribution,
    /// `D̄` on `(x, u)`.
    pub original: Distribution,
}

pub fn largest_projectable_subdistribution(
    d: &Distribution,
    chart: &AdaptedChart,
) -> Result<ProjectableSub, FlatnessError> {
    let n = chart.n();
    let da = chart.distribution_to_adapted(d)?;
    let normalized = normalize_distribution_basis(&da, n);
    let mmatrix = m_matrix(&normalized, chart, false);
    let a = chart.adapted();
    let dbar = normalized.dbar;
    let mut fields = Vec::new();
    for c in &mmatrix.kernel {
        let mut acc = VectorField::zero(a);
        for (ck, vk) in c.iter().zip(&normalized.fields[..dbar]) {
            if !ck.is_zero() {
                acc = acc.add(&vk.scale(ck))?;
            }
        }
        fields.push(acc);
    }
    fields.extend(normalized.fields[dbar..].iter().cloned());
    let adapted = Distribution::span(a, fields)?;
    let original = chart.distribution_from_adapted(&adapted)?;
    Ok(ProjectableSub {
        normalized,
        mmatrix,
        adapted,
        original,
    })
}

/// Which stop rule ended a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopRule {
    /// `dim E_k̄ = dim E_{k̄−1}`.
    DimensionStall,
    /// `P_{k̄+1} = P_k̄`.
    CodistributionStall,
    /// The iteration limit was reached first.
    IterationLimit,
}

/// One iteration `k` of the distribution-based test.
#[derive(Clone, Debug)]
pub struct DistributionStep {
    pub k: usize,
    /// `D_{k−1}` with its construction data.
    pub projectable: ProjectableSub,
    /// `Δ_k` on `𝒳⁺`.
    pub delta: Distribution,
    /// `E_k`.
    pub e: Distribution,
    pub e_involutive: bool,
    pub nested: bool,
    /// `D_{k−1} ⊆ E_{k−1}`.
    pub d_in_e: bool,
    pub kernel_ok: bool,
    pub rank_m_reversed: usize,
}

#[derive(Clone, Debug)]
pub struct DistributionRun {
    /// `E_0, E_1, …` as computed (including the stalled last one).
    pub e: Vec<Distribution>,
    pub steps: Vec<DistributionStep>,
    pub kbar: Option<usize>,
    pub flat: bool,
    pub stop: StopRule,
}

impl DistributionRun {
    pub fn converged(&self) -> bool {
        self.kbar.is_some()
    }

    /// Dimensions of `E_0 … E_{k̄−1}`.
    pub fn dims(&self) -> Vec<usize> {
        let end = self.kbar.unwrap_or(self.e.len());
        self.e[..end.min(self.e.len())].iter().map(|d| d.dim()).collect()
    }
}

pub fn run_distribution_test(
    sys: &DiscreteSystem,
    chart: &AdaptedChart,
    max_iterations: usize,
) -> Result<DistributionRun, FlatnessError> {
    let total = sys.n() + sys.m();
    let mut e = vec![sys.input_distribution()];
    let mut steps = Vec::new();
    for k in 1..=max_iterations {
        let prev = e.last().expect("nonempty").clone();
        let proj = largest_projectable_subdistribution(&prev, chart)?;
        let expected = prev.dim() - proj.mmatrix.rank_m;
        if proj.original.dim() != expected {
            return Err(FlatnessError::ProjectableDimension {
                k,
                got: proj.original.dim(),
                expected,
            });
        }
        let pushed: Vec<VectorField> = proj
            .adapted
            .basis()
            .iter()
            .map(|v| chart.pushforward_projectable(v))
            .collect::<Result<_, _>>()?;
        let delta = Distribution::span(chart.plus(), pushed)?;
        let ek = pullback_pi(&delta, sys, chart.plus())?;
        let rank_m_reversed = m_matrix(&proj.normalized, chart, true).rank_m;
        let step = DistributionStep {
            k,
            kernel_ok: proj.mmatrix.kernel_annihilates()
                && proj.mmatrix.kernel_is_xi_free(chart.xi()),
            d_in_e: prev.contains_all(&proj.original)?,
            nested: ek.contains_all(&prev)?,
            e_involutive: ek.is_involutive(),
            projectable: proj,
            delta,
            e: ek.clone(),
            rank_m_reversed,
        };
        steps.push(step);
        let stalled = ek.dim() == prev.dim();
        e.push(ek);
        if stalled {
            let flat = prev.dim() == total;
            return Ok(DistributionRun {
                e,
                steps,
                kbar: Some(k),
                flat,
                stop: StopRule::DimensionStall,
            });
        }
    }
    Ok(DistributionRun {
        e,
        steps,
        kbar: None,
        flat: false,
        stop: StopRule::IterationLimit,
    })
}

/// One iteration `k` of the codistribution-based test.
#[derive(Clone, Debug)]
pub struct CodistributionStep {
    pub k: usize,
    /// `P_k` in adapted coordinates.
    pub p_adapted: Codistribution,
    /// `P_k ∩ span{dθ}` in normalized form `ω^s = dθ^{p_s} + Σ α dθ`.
    pub omega: Vec<OneForm>,
    /// The added forms `ρ` (independent over the constants).
    pub rho: Vec<OneForm>,
    /// `span{ρ}` in reduced form.
    pub rho_span: Codistribution,
    pub rank_rho: usize,
    /// `P⁺_{k+1}` on the adapted chart.
    pub pplus: Codistribution,
    /// `P⁺_{k+1}` on `(x, u)`.
    pub pplus_original: Codistribution,
    /// `P_{k+1}`.
    pub p_next: Codistribution,
    pub integrable: bool,
    pub nested: bool,
}

#[derive(Clone, Debug)]
pub struct CodistributionRun {
    /// `P_1, P_2, …` as computed (including the repeated last one).
    pub p: Vec<Codistribution>,
    pub steps: Vec<CodistributionStep>,
    pub kbar: Option<usize>,
    pub flat: bool,
    pub stop: StopRule,
}

impl CodistributionRun {
    pub fn converged(&self) -> bool {
        self.kbar.is_some()
    }

    /// Dimensions of `P_1 … P_k̄`.
    pub fn dims(&self) -> Vec<usize> {
        let end = self.kbar.unwrap_or(self.p.len());
        self.p[..end.min(self.p.len())].iter().map(|d| d.dim()).collect()
    }
}

/// `P ∩ span{dθ}` for `P` on the adapted chart, in normalized form.
pub fn theta_part(p: &Codistribution, n: usize) -> Vec<OneForm> {
    let dim = p.chart().dim();
    let mut order: Vec<usize> = (n..dim).collect();
    order.extend(0..n);
    let ech = rref_with_order(p.coefficient_rows(), dim, &order);
    let rows: Vec<Vec<Scalar>> = ech
        .rows
        .into_iter()
        .zip(&ech.pivots)
        .filter(|(_, &piv)| piv < n)
        .map(|(r, _)| r)
        .collect();
    let rev: Vec<usize> = (0..n).rev().collect();
    rref_with_order(rows, dim, &rev)
        .rows
        .into_iter()
        .map(|r| OneForm::new(p.chart(), r).expect("same chart"))
        .collect()
}

pub fn run_codistribution_test(
    sys: &DiscreteSystem,
    chart: &AdaptedChart,
    max_iterations: usize,
) -> Result<CodistributionRun, FlatnessError> {
    let a = chart.adapted();
    let n = chart.n();
    let xi_fields = Distribution::coordinate(a, n..n + chart.m());
    let df = sys.df();
    let df_ann = df.annihilator();
    let mut p = vec![sys.state_codistribution()];
    let mut steps = Vec::new();
    for k in 1..=max_iterations {
        let pk = p.last().expect("nonempty").clone();
        let pa = chart.codistribution_to_adapted(&pk)?;
        let omega = theta_part(&pa, n);
        let base: Vec<Vec<Scalar>> = omega.iter().map(|w| w.coeffs().to_vec()).collect();
        let levels = derivative_levels(&base, chart.xi());
        let contributing = levels.contributing_rows();
        let rho: Vec<OneForm> = constant_independent_rows(&contributing)
            .into_iter()
            .map(|i| OneForm::new(a, contributing[i].clone()).expect("same chart"))
            .collect();
        let rho_span = Codistribution::span(a, rho.clone())?;
        let mut gens = omega.clone();
        gens.extend(rho.iter().cloned());
        let pplus = Codistribution::span(a, gens)?;

        let intersection = Codistribution::span(a, omega.clone())?;
        if !intersection.invariant_closure(&xi_fields)?.same_span(&pplus)? {
            return Err(FlatnessError::ClosureMismatch { k, other: "Lie-derivative" });
        }
        let pplus_original = chart.codistribution_from_adapted(&pplus)?;
        let free = pk.intersect(&df)?.invariant_closure(&df_ann)?;
        if !free.same_span(&pplus_original)? {
            return Err(FlatnessError::ClosureMismatch { k, other: "coordinate-free" });
        }
        let next = chart.backward_shift_codistribution(&pplus)?;
        let step = CodistributionStep {
            k,
            p_adapted: pa,
            omega,
            rank_rho: rho_span.dim(),
            rho,
            rho_span,
            pplus,
            pplus_original,
            integrable: next.is_integrable(),
            nested: pk.contains_all(&next)?,
            p_next: next.clone(),
        };
        steps.push(step);
        let stalled = next.same_span(&pk)?;
        p.push(next);
        if stalled {
            let flat = pk.dim() == 0;
            return Ok(CodistributionRun {
                p,
                steps,
                kbar: Some(k),
                flat,
                stop: StopRule::CodistributionStall,
            });
        }
    }
    Ok(CodistributionRun {
        p,
        steps,
        kbar: None,
        flat: false,
        stop: StopRule::IterationLimit,
    })
}

/// Combined outcome of both tests.
#[derive(Clone, Debug)]
pub struct FlatnessVerdict {
    pub flat: bool,
    pub kbar: Option<usize>,
    pub witness: StopRule,
    /// Both runs reached the same verdict and the same `k̄`.
    pub agree: bool,
    pub duality: Option<DualityReport>,
}

impl FlatnessVerdict {
    pub fn duality_ok(&self) -> Option<bool> {
        self.duality.as_ref().map(|d| d.ok)
    }
}

pub fn combine(
    dist: Option<&DistributionRun>,
    codist: Option<&CodistributionRun>,
    sys: &DiscreteSystem,
    verify: bool,
) -> FlatnessVerdict {
    match (dist, codist) {
        (Some(d), Some(c)) => {
            let agree = d.flat == c.flat && d.kbar == c.kbar;
            let duality = verify.then(|| verify_duality(sys, d, c));
            FlatnessVerdict {
                flat: d.flat && c.flat,
                kbar: if agree { d.kbar } else { None },
                witness: d.stop,
                agree,
                duality,
            }
        }
        (Some(d), None) => FlatnessVerdict {
            flat: d.flat,
            kbar: d.kbar,
            witness: d.stop,
            agree: true,
            duality: None,
        },
        (None, Some(c)) => FlatnessVerdict {
            flat: c.flat,
            kbar: c.kbar,
            witness: c.stop,
            agree: true,
            duality: None,
        },
        (None, None) => FlatnessVerdict {
            flat: false,
            kbar: None,
            witness: StopRule::IterationLimit,
            agree: true,
            duality: None,
        },
    }
}

#[cfg(test)]
mod tests;
