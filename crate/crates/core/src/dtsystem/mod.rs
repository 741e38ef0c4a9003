//! Discrete-time systems `x⁺ = f(x, u)` and their adapted coordinates
//! `θ = f(x, u)`, `ξ = h(x, u)`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::geometry::{
    generic_rank, Chart, Codistribution, Distribution, GeometryError, OneForm, VectorField,
};
use crate::symexpr::{Rational, Scalar, SymError, Var};

mod chart;

pub use chart::{solve_triangular, AdaptedChart, InversionRule};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum SystemError {
    #[error("system has {states} states but {equations} equations")]
    EquationCount { states: usize, equations: usize },
    #[error("variable `{0}` is declared twice")]
    DuplicateVariable(String),
    #[error("dynamics use undeclared variable `{0}`")]
    UndeclaredVariable(String),
    #[error("system needs at least one state and one input")]
    Empty,
    #[error("submersivity fails: generic rank of the Jacobian of f is {rank}, expected {n}")]
    NotSubmersive { rank: usize, n: usize },
    #[error("equilibrium mismatch: f{index}(x0, u0) = {value}, expected {expected}")]
    EquilibriumMismatch {
        index: usize,
        value: String,
        expected: String,
    },
    #[error("dynamics are singular at the equilibrium (equation {0})")]
    EquilibriumSingular(usize),
    #[error("equilibrium names unknown variable `{0}`")]
    EquilibriumUnknown(String),
    #[error("no adapted chart found by triangular inversion; residual equations: {residual}")]
    InversionFailed { residual: String },
    #[error("chart hint rejected: {0}")]
    HintInvalid(String),
    #[error("vector field is not projectable: its ∂θ-coefficients depend on ξ")]
    NotProjectable,
    #[error("codistribution has no basis in dθ with ξ-free coefficients")]
    NotShiftable,
    #[error("forward shift is only modeled for functions of the state")]
    UnsupportedShift,
    #[error(transparent)]
    Sym(#[from] SymError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Optional user input for the adapted chart.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AdaptedChartHint {
    /// Variables among `(x, u)` to use as `ξ`, in order.
    pub xi: Option<Vec<Var>>,
    /// Expressions for the non-`ξ` variables in adapted coordinates.
    pub inverse: Option<Vec<(Var, Scalar)>>,
}

impl AdaptedChartHint {
    pub fn is_empty(&self) -> bool {
        self.xi.is_none() && self.inverse.is_none()
    }
}

/// Returns `count` variables `prefix1..prefixN`, extending the prefix with
/// `q` until none of them collides with `taken`.
pub fn fresh_vars(prefix: &str, count: usize, taken: &BTreeSet<String>) -> Vec<Var> {
    let mut p = prefix.to_string();
    loop {
        let names: Vec<String> = (1..=count).map(|i| format!("{p}{i}")).collect();
        if names.iter().all(|n| !taken.contains(n)) {
            return names.iter().map(|n| Var::new(n)).collect();
        }
        p.push('q');
    }
}

/// Names of the adapted chart `(θ, ξ)` and of the chart on `𝒳⁺` for given
/// system variables. Deterministic, so hint files can refer to them.
pub fn chart_names(states: &[Var], inputs: &[Var]) -> (Vec<Var>, Vec<Var>, Vec<Var>) {
    let taken: BTreeSet<String> = states
        .iter()
        .chain(inputs)
        .map(|v| v.name().to_string())
        .collect();
    let th = fresh_vars("th", states.len(), &taken);
    let xi = fresh_vars("xi", inputs.len(), &taken);
    let xp = fresh_vars("xp", states.len(), &taken);
    (th, xi, xp)
}

/// `x⁺ = f(x, u)` around an equilibrium.
#[derive(Clone, Debug)]
pub struct DiscreteSystem {
    name: String,
    states: Vec<Var>,
    inputs: Vec<Var>,
    f: Vec<Scalar>,
    equilibrium: BTreeMap<Var, Rational>,
    hint: AdaptedChartHint,
    chart: Chart,
    equilibrium_unverified: Vec<usize>,
}

/// Generic rank of `∂f/∂(vars)`.
pub fn jacobian_rank(f: &[Scalar], vars: &[Var]) -> usize {
    let rows: Vec<Vec<Scalar>> = f
        .iter()
        .map(|fi| vars.iter().map(|v| fi.differentiate(v)).collect())
        .collect();
    generic_rank(&rows)
}

/// Submersivity: `∂f/∂(x, u)` has generic rank `f.len()` on `chart`.
pub fn check_submersive(f: &[Scalar], chart: &Chart) -> bool {
    jacobian_rank(f, chart.vars()) == f.len()
}

impl DiscreteSystem {
    /// Builds and validates a system. Missing equilibrium entries are zero.
    pub fn new(
        name: impl Into<String>,
        states: Vec<Var>,
        inputs: Vec<Var>,
        f: Vec<Scalar>,
        equilibrium: BTreeMap<Var, Rational>,
        hint: AdaptedChartHint,
    ) -> Result<Self, SystemError> {
        Self::build(name.into(), states, inputs, f, equilibrium, hint, false)
    }

    /// Like [`DiscreteSystem::new`], but equations that are singular at the
    /// equilibrium or do not reproduce it are recorded instead of rejected.
    pub fn new_generic(
        name: impl Into<String>,
        states: Vec<Var>,
        inputs: Vec<Var>,
        f: Vec<Scalar>,
        equilibrium: BTreeMap<Var, Rational>,
        hint: AdaptedChartHint,
    ) -> Result<Self, SystemError> {
        Self::build(name.into(), states, inputs, f, equilibrium, hint, true)
    }

    fn build(
        name: String,
        states: Vec<Var>,
        inputs: Vec<Var>,
        f: Vec<Scalar>,
        equilibrium: BTreeMap<Var, Rational>,
        hint: AdaptedChartHint,
        tolerate_singular: bool,
    ) -> Result<Self, SystemError> {
        if states.is_empty() || inputs.is_empty() {
            return Err(SystemError::Empty);
        }
        if f.len() != states.len() {
            return Err(SystemError::EquationCount {
                states: states.len(),
                equations: f.len(),
            });
        }
        let all: Vec<Var> = states.iter().chain(&inputs).cloned().collect();
        let chart = Chart::new(all.clone())
            .map_err(|e| match e {
                GeometryError::DuplicateVariable(v) => SystemError::DuplicateVariable(v),
                other => SystemError::Geometry(other),
            })?;
        let declared: BTreeSet<&Var> = all.iter().collect();
        for fi in &f {
            if let Some(v) = fi.vars().into_iter().find(|v| !declared.contains(v)) {
                return Err(SystemError::UndeclaredVariable(v.to_string()));
            }
        }
        for v in equilibrium.keys() {
            if !declared.contains(v) {
                return Err(SystemError::EquilibriumUnknown(v.to_string()));
            }
        }
        let mut eq = BTreeMap::new();
        for v in &all {
            let q = equilibrium.get(v).cloned().unwrap_or_else(|| Rational::from_integer(0.into()));
            eq.insert(v.clone(), q);
        }
        let mut sys = DiscreteSystem {
            name,
            states,
            inputs,
            f,
            equilibrium: eq,
            hint,
            chart,
            equilibrium_unverified: Vec::new(),
        };
        sys.equilibrium_unverified = sys.check_equilibrium(tolerate_singular)?;
        let rank = jacobian_rank(&sys.f, sys.chart.vars());
        if rank != sys.n() {
            return Err(SystemError::NotSubmersive { rank, n: sys.n() });
        }
        Ok(sys)
    }

    fn check_equilibrium(&self, tolerate_singular: bool) -> Result<Vec<usize>, SystemError> {
        let mut singular = Vec::new();
        for (i, (fi, xi)) in self.f.iter().zip(&self.states).enumerate() {
            let value = match fi.eval_at(&self.equilibrium) {
                Ok(v) => v,
                Err(_) if tolerate_singular => {
                    singular.push(i + 1);
                    continue;
                }
                Err(_) => return Err(SystemError::EquilibriumSingular(i + 1)),
            };
            let expected = &self.equilibrium[xi];
            if &value != expected && tolerate_singular {
                singular.push(i + 1);
            } else if &value != expected {
                return Err(SystemError::EquilibriumMismatch {
                    index: i + 1,
                    value: value.to_string(),
                    expected: expected.to_string(),
                });
            }
        }
        Ok(singular)
    }

    /// Equations (1-based) where the equilibrium could not be confirmed.
    pub fn equilibrium_unverified(&self) -> &[usize] {
        &self.equilibrium_unverified
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.states.len()
    }

    pub fn m(&self) -> usize {
        self.inputs.len()
    }

    pub fn states(&self) -> &[Var] {
        &self.states
    }

    pub fn inputs(&self) -> &[Var] {
        &self.inputs
    }

    pub fn f(&self) -> &[Scalar] {
        &self.f
    }

    pub fn equilibrium(&self) -> &BTreeMap<Var, Rational> {
        &self.equilibrium
    }

    pub fn hint(&self) -> &AdaptedChartHint {
        &self.hint
    }

    /// The chart `(x1..xn, u1..um)`.
    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn check_submersive(&self) -> bool {
        check_submersive(&self.f, &self.chart)
    }

    /// Generic rank of `∂f/∂u`.
    pub fn input_rank(&self) -> usize {
        jacobian_rank(&self.f, &self.inputs)
    }

    /// `E₀ = span{∂u}`.
    pub fn input_distribution(&self) -> Distribution {
        Distribution::coordinate(&self.chart, self.n()..self.n() + self.m())
    }

    /// `P₁ = span{dx}`.
    pub fn state_codistribution(&self) -> Codistribution {
        Codistribution::coordinate(&self.chart, 0..self.n())
    }

    /// `span{df}` on `(x, u)`.
    pub fn df(&self) -> Codistribution {
        let forms = self
            .f
            .iter()
            .map(|fi| OneForm::differential(&self.chart, fi))
            .collect();
        Codistribution::span(&self.chart, forms).expect("same chart")
    }

    pub fn build_adapted_chart(&self) -> Result<AdaptedChart, SystemError> {
        AdaptedChart::build(self)
    }

    /// `δ(g) = g(f(x, u))` for a function `g` of the state.
    pub fn forward_shift(&self, g: &Scalar) -> Result<Scalar, SystemError> {
        if g.depends_on_any(&self.inputs) {
            return Err(SystemError::UnsupportedShift);
        }
        let map: BTreeMap<Var, Scalar> = self
            .states
            .iter()
            .cloned()
            .zip(self.f.iter().cloned())
            .collect();
        Ok(g.substitute(&map)?)
    }
}

impl fmt::Display for DiscreteSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (x, fi) in self.states.iter().zip(&self.f) {
            writeln!(f, "{x}+ = {fi}")?;
        }
        Ok(())
    }
}

/// `π*⁻¹(Δ)`: renames `xpᵢ → xᵢ` and appends `∂u`.
pub fn pullback_pi(delta: &Distribution, sys: &DiscreteSystem, plus: &Chart) -> Result<Distribution, SystemError> {
    let rename: BTreeMap<Var, Var> = plus
        .vars()
        .iter()
        .cloned()
        .zip(sys.states().iter().cloned())
        .collect();
    let n = sys.n();
    let mut fields = Vec::new();
    for v in delta.basis() {
        let mut coeffs: Vec<Scalar> = v.coeffs().iter().map(|c| c.rename(&rename)).collect();
        coeffs.extend(std::iter::repeat_n(Scalar::zero(), sys.m()));
        fields.push(VectorField::new(sys.chart(), coeffs)?);
    }
    for j in 0..sys.m() {
        fields.push(VectorField::coordinate(sys.chart(), n + j));
    }
    Ok(Distribution::span(sys.chart(), fields)?)
}

#[cfg(test)]
mod tests;
