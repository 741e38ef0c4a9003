//! Heuristic search for first integrals of an integrable codistribution.

use std::fmt;

use super::DecomposeError;
use crate::dtsystem::jacobian_rank;
use crate::geometry::{Codistribution, OneForm};
use crate::symexpr::{Poly, Rational, Scalar, Var};

/// How a first integral was found. Ordered from cheapest to most involved.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum IntegralMethod {
    CoordinatePick,
    ConstantCombination,
    Exact,
    IntegratingFactor,
    UserHint,
}

impl IntegralMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            IntegralMethod::CoordinatePick => "coordinate-pick",
            IntegralMethod::ConstantCombination => "constant-combination",
            IntegralMethod::Exact => "exact",
            IntegralMethod::IntegratingFactor => "integrating-factor",
            IntegralMethod::UserHint => "user-hint",
        }
    }
}

impl fmt::Display for IntegralMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Functions whose differentials span a codistribution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FirstIntegralSet {
    pub functions: Vec<Scalar>,
    /// One entry per function.
    pub methods: Vec<IntegralMethod>,
    /// The most involved method that was needed.
    pub method: IntegralMethod,
}

impl FirstIntegralSet {
    fn new(functions: Vec<Scalar>, methods: Vec<IntegralMethod>) -> Self {
        let method = methods.iter().copied().max().unwrap_or(IntegralMethod::CoordinatePick);
        FirstIntegralSet {
            functions,
            methods,
            method,
        }
    }
}

/// `∫ c dv` when the denominator of `c` is free of `v`.
pub fn antiderivative(c: &Scalar, v: &Var) -> Option<Scalar> {
    if c.denom().contains_var(v) {
        return None;
    }
    let coeffs = c.numer().coeffs_in(v);
    let mut lifted = vec![Poly::zero()];
    for (k, ck) in coeffs.iter().enumerate() {
        lifted.push(ck.scale(&Rational::new(1.into(), (k as i64 + 1).into())));
    }
    let num = Poly::from_coeffs_in(v, &lifted);
    Scalar::from_parts(num, c.denom().clone()).ok()
}

/// A function `g` with `dg = ω`, found by integrating one coordinate at a
/// time.
pub fn integrate_exact(w: &OneForm) -> Option<Scalar> {
    let chart = w.chart();
    let mut g = Scalar::zero();
    for (i, v) in chart.vars().iter().enumerate() {
        let rest = &w.coeffs()[i] - &g.differentiate(v);
        if rest.is_zero() {
            continue;
        }
        g = &g + &antiderivative(&rest, v)?;
    }
    (OneForm::differential(chart, &g) == *w).then_some(g)
}

fn monomial(vars: &[Var], exps: &[i32]) -> Scalar {
    let mut acc = Scalar::one();
    for (v, &e) in vars.iter().zip(exps) {
        if e != 0 {
            acc = &acc * &Scalar::var(v).pow(e).expect("variable is nonzero");
        }
    }
    acc
}

/// Exponent vectors in `[-2, 2]^k` without the zero vector, by total
/// absolute degree.
fn exponent_vectors(k: usize) -> Vec<Vec<i32>> {
    let mut all: Vec<Vec<i32>> = vec![vec![]];
    for _ in 0..k {
        all = all
            .into_iter()
            .flat_map(|p| {
                (-2..=2).map(move |e| {
                    let mut q = p.clone();
                    q.push(e);
                    q
                })
            })
            .collect();
    }
    all.retain(|e| e.iter().any(|&x| x != 0));
    all.sort_by_key(|e| e.iter().map(|x| x.abs()).sum::<i32>());
    all
}

/// Tries `μ ω / c_j` for each nonzero coefficient `c_j` and every monomial
/// `μ` with exponents in `[-2, 2]`.
fn integrating_factor(w: &OneForm) -> Option<Scalar> {
    let chart = w.chart();
    let vars: Vec<Var> = chart
        .vars()
        .iter()
        .enumerate()
        .filter(|(i, v)| !w.coeffs()[*i].is_zero() || w.coeffs().iter().any(|c| c.depends_on(v)))
        .map(|(_, v)| v.clone())
        .collect();
    let exps = exponent_vectors(vars.len());
    for c in w.coeffs().iter().filter(|c| !c.is_zero()) {
        let base = w.scale(&c.inv().ok()?);
        for e in &exps {
            let scaled = base.scale(&monomial(&vars, e));
            if scaled.exterior_derivative().is_zero() {
                if let Some(g) = integrate_exact(&scaled) {
                    return Some(g);
                }
            }
        }
    }
    None
}

fn is_coordinate(w: &OneForm) -> bool {
    let nz: Vec<&Scalar> = w.coeffs().iter().filter(|c| !c.is_zero()).collect();
    nz.len() == 1 && nz[0].is_constant()
}

fn linear_function(w: &OneForm) -> Scalar {
    w.chart()
        .vars()
        .iter()
        .zip(w.coeffs())
        .filter(|(_, c)| !c.is_zero())
        .map(|(v, c)| c * &Scalar::var(v))
        .sum()
}

fn verify(p: &Codistribution, functions: &[Scalar]) -> Result<(), String> {
    let chart = p.chart();
    let diffs: Vec<OneForm> = functions.iter().map(|g| OneForm::differential(chart, g)).collect();
    let span = Codistribution::span(chart, diffs).map_err(|e| e.to_string())?;
    if !span.same_span(p).map_err(|e| e.to_string())? {
        return Err("differentials do not span the codistribution".into());
    }
    if jacobian_rank(functions, chart.vars()) != functions.len() {
        return Err("functions are not independent".into());
    }
    Ok(())
}

/// First integrals of `p`, which must be integrable and only involve the
/// differentials of `states` with coefficients depending on `states`.
pub fn find_first_integrals(
    p: &Codistribution,
    states: &[Var],
    hint: Option<&[Scalar]>,
) -> Result<FirstIntegralSet, DecomposeError> {
    let chart = p.chart();
    for w in p.basis() {
        for (v, c) in chart.vars().iter().zip(w.coeffs()) {
            if (!states.contains(v) && !c.is_zero()) || c.depends_on_any(chart.vars().iter().filter(|x| !states.contains(x))) {
                return Err(DecomposeError::NotStateOnly);
            }
        }
    }
    if !p.is_integrable() {
        return Err(DecomposeError::NotIntegrable);
    }
    if let Some(h) = hint {
        if h.len() != p.dim() {
            return Err(DecomposeError::HintInvalid(format!(
                "{} functions given, codistribution has dimension {}",
                h.len(),
                p.dim()
            )));
        }
        if let Some(g) = h.iter().find(|g| g.depends_on_any(chart.vars().iter().filter(|x| !states.contains(x)))) {
            return Err(DecomposeError::HintInvalid(format!("`{g}` depends on inputs")));
        }
        verify(p, h).map_err(DecomposeError::HintInvalid)?;
        return Ok(FirstIntegralSet::new(h.to_vec(), vec![IntegralMethod::UserHint; h.len()]));
    }
    let mut functions = Vec::new();
    let mut methods = Vec::new();
    let mut residual = Vec::new();
    for w in p.basis() {
        if w.coeffs().iter().all(|c| c.is_constant()) {
            functions.push(linear_function(w));
            methods.push(if is_coordinate(w) {
                IntegralMethod::CoordinatePick
            } else {
                IntegralMethod::ConstantCombination
            });
        } else if let Some(g) = integrate_exact(w) {
            functions.push(g);
            methods.push(IntegralMethod::Exact);
        } else if let Some(g) = integrating_factor(w) {
            functions.push(g);
            methods.push(IntegralMethod::IntegratingFactor);
        } else {
            residual.push(w.to_string());
        }
    }
    if !residual.is_empty() {
        return Err(DecomposeError::IntegralsNotFound {
            residual: residual.join("; "),
        });
    }
    verify(p, &functions).map_err(|e| DecomposeError::IntegralsNotFound { residual: e })?;
    Ok(FirstIntegralSet::new(functions, methods))
}
