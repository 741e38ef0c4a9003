//! Vector fields, 1-forms, distributions and codistributions on a single
//! global chart, with rational-function coefficients.
//!
//! All dimension statements are generic: ranks are taken over the field of
//! rational functions in the chart variables.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::symexpr::{Rational, Scalar, Var};

pub mod linalg;

pub use linalg::{generic_rank, kernel, rank_at, Echelon};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum GeometryError {
    #[error("objects live on different charts ({0} vs {1})")]
    ChartMismatch(String, String),
    #[error("expected {expected} coefficients, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("duplicate chart variable `{0}`")]
    DuplicateVariable(String),
}

/// An ordered list of coordinate names. The order fixes coefficient indexing.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Chart {
    vars: Arc<[Var]>,
}

impl Chart {
    pub fn new(vars: Vec<Var>) -> Result<Self, GeometryError> {
        for (i, v) in vars.iter().enumerate() {
            if vars[..i].contains(v) {
                return Err(GeometryError::DuplicateVariable(v.to_string()));
            }
        }
        Ok(Chart { vars: vars.into() })
    }

    pub fn from_names(names: &[&str]) -> Result<Self, GeometryError> {
        Chart::new(names.iter().map(|n| Var::new(n)).collect())
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn dim(&self) -> usize {
        self.vars.len()
    }

    pub fn index_of(&self, v: &Var) -> Option<usize> {
        self.vars.iter().position(|w| w == v)
    }

    fn check(&self, other: &Chart) -> Result<(), GeometryError> {
        if Arc::ptr_eq(&self.vars, &other.vars) || self.vars == other.vars {
            Ok(())
        } else {
            Err(GeometryError::ChartMismatch(self.to_string(), other.to_string()))
        }
    }
}

impl fmt::Display for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.vars.iter().map(|v| v.name()).collect();
        write!(f, "({})", names.join(", "))
    }
}

impl fmt::Debug for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Chart{self}")
    }
}

fn check_len(chart: &Chart, coeffs: &[Scalar]) -> Result<(), GeometryError> {
    if coeffs.len() != chart.dim() {
        Err(GeometryError::LengthMismatch {
            expected: chart.dim(),
            got: coeffs.len(),
        })
    } else {
        Ok(())
    }
}

/// `Σ coeffs[i] ∂_{vars[i]}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VectorField {
    chart: Chart,
    coeffs: Vec<Scalar>,
}

/// `Σ coeffs[i] d vars[i]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OneForm {
    chart: Chart,
    coeffs: Vec<Scalar>,
}

/// `Σ_{i<j} coeffs[i][j] d vars[i] ∧ d vars[j]`, stored as the full
/// antisymmetric matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TwoForm {
    chart: Chart,
    coeffs: Vec<Vec<Scalar>>,
}

impl VectorField {
    pub fn new(chart: &Chart, coeffs: Vec<Scalar>) -> Result<Self, GeometryError> {
        check_len(chart, &coeffs)?;
        Ok(VectorField {
            chart: chart.clone(),
            coeffs,
        })
    }

    pub fn zero(chart: &Chart) -> Self {
        VectorField {
            chart: chart.clone(),
            coeffs: vec![Scalar::zero(); chart.dim()],
        }
    }

    /// The coordinate field `∂_{vars[i]}`.
    pub fn coordinate(chart: &Chart, i: usize) -> Self {
        let mut v = VectorField::zero(chart);
        v.coeffs[i] = Scalar::one();
        v
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn coeffs(&self) -> &[Scalar] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Scalar> {
        self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Scalar::is_zero)
    }

    /// Directional derivative `v(g) = Σ vⁱ ∂_i g`.
    pub fn apply(&self, g: &Scalar) -> Scalar {
        self.coeffs
            .iter()
            .zip(self.chart.vars())
            .filter(|(c, _)| !c.is_zero())
            .map(|(c, v)| c * &g.differentiate(v))
            .sum()
    }

    pub fn scale(&self, k: &Scalar) -> VectorField {
        VectorField {
            chart: self.chart.clone(),
            coeffs: self.coeffs.iter().map(|c| c * k).collect(),
        }
    }

    pub fn add(&self, other: &VectorField) -> Result<VectorField, GeometryError> {
        self.chart.check(&other.chart)?;
        Ok(VectorField {
            chart: self.chart.clone(),
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
        })
    }

    /// `[v, w]ⁱ = Σ_j (vʲ ∂_j wⁱ − wʲ ∂_j vⁱ)`.
    pub fn lie_bracket(&self, other: &VectorField) -> Result<VectorField, GeometryError> {
        self.chart.check(&other.chart)?;
        let coeffs = (0..self.chart.dim())
            .map(|i| &self.apply(&other.coeffs[i]) - &other.apply(&self.coeffs[i]))
            .collect();
        Ok(VectorField {
            chart: self.chart.clone(),
            coeffs,
        })
    }

    /// `v ⌋ ω = Σ vⁱ ωᵢ`.
    pub fn interior(&self, form: &OneForm) -> Result<Scalar, GeometryError> {
        self.chart.check(&form.chart)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&form.coeffs)
            .filter(|(a, b)| !a.is_zero() && !b.is_zero())
            .map(|(a, b)| a * b)
            .sum())
    }

    /// `(v ⌋ Ω)_j = Σ_i vⁱ Ω_ij`.
    pub fn interior2(&self, form: &TwoForm) -> Result<OneForm, GeometryError> {
        self.chart.check(&form.chart)?;
        let n = self.chart.dim();
        let coeffs = (0..n)
            .map(|j| {
                (0..n)
                    .filter(|&i| !self.coeffs[i].is_zero() && !form.coeffs[i][j].is_zero())
                    .map(|i| &self.coeffs[i] * &form.coeffs[i][j])
                    .sum()
            })
            .collect();
        Ok(OneForm {
            chart: self.chart.clone(),
            coeffs,
        })
    }

    /// Substitutes into every coefficient.
    pub fn map_coeffs<F, E>(&self, f: F) -> Result<VectorField, E>
    where
        F: Fn(&Scalar) -> Result<Scalar, E>,
    {
        Ok(VectorField {
            chart: self.chart.clone(),
            coeffs: self.coeffs.iter().map(f).collect::<Result<_, E>>()?,
        })
    }
}

impl OneForm {
    pub fn new(chart: &Chart, coeffs: Vec<Scalar>) -> Result<Self, GeometryError> {
        check_len(chart, &coeffs)?;
        Ok(OneForm {
            chart: chart.clone(),
            coeffs,
        })
    }

    pub fn zero(chart: &Chart) -> Self {
        OneForm {
            chart: chart.clone(),
            coeffs: vec![Scalar::zero(); chart.dim()],
        }
    }

    /// The coordinate differential `d vars[i]`.
    pub fn coordinate(chart: &Chart, i: usize) -> Self {
        let mut w = OneForm::zero(chart);
        w.coeffs[i] = Scalar::one();
        w
    }

    /// `dg = Σ ∂_i g dxⁱ`.
    pub fn differential(chart: &Chart, g: &Scalar) -> Self {
        OneForm {
            chart: chart.clone(),
            coeffs: chart.vars().iter().map(|v| g.differentiate(v)).collect(),
        }
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn coeffs(&self) -> &[Scalar] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Scalar> {
        self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Scalar::is_zero)
    }

    pub fn scale(&self, k: &Scalar) -> OneForm {
        OneForm {
            chart: self.chart.clone(),
            coeffs: self.coeffs.iter().map(|c| c * k).collect(),
        }
    }

    pub fn add(&self, other: &OneForm) -> Result<OneForm, GeometryError> {
        self.chart.check(&other.chart)?;
        Ok(OneForm {
            chart: self.chart.clone(),
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
        })
    }

    /// `(dω)_ij = ∂_i ω_j − ∂_j ω_i`.
    pub fn exterior_derivative(&self) -> TwoForm {
        let n = self.chart.dim();
        let vars = self.chart.vars();
        let mut coeffs = vec![vec![Scalar::zero(); n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let c = &self.coeffs[j].differentiate(&vars[i]) - &self.coeffs[i].differentiate(&vars[j]);
                coeffs[j][i] = -&c;
                coeffs[i][j] = c;
            }
        }
        TwoForm {
            chart: self.chart.clone(),
            coeffs,
        }
    }

    /// Cartan formula `L_v ω = v ⌋ dω + d(v ⌋ ω)`.
    pub fn lie_derivative(&self, v: &VectorField) -> Result<OneForm, GeometryError> {
        self.chart.check(&v.chart)?;
        let a = v.interior2(&self.exterior_derivative())?;
        let b = OneForm::differential(&self.chart, &v.interior(self)?);
        a.add(&b)
    }

    pub fn map_coeffs<F, E>(&self, f: F) -> Result<OneForm, E>
    where
        F: Fn(&Scalar) -> Result<Scalar, E>,
    {
        Ok(OneForm {
            chart: self.chart.clone(),
            coeffs: self.coeffs.iter().map(f).collect::<Result<_, E>>()?,
        })
    }
}

impl TwoForm {
    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn coeff(&self, i: usize, j: usize) -> &Scalar {
        &self.coeffs[i][j]
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().flatten().all(Scalar::is_zero)
    }

    /// `Ω(v, w) = Σ vⁱ wʲ Ω_ij`.
    pub fn eval(&self, v: &VectorField, w: &VectorField) -> Result<Scalar, GeometryError> {
        v.interior2(self)?.interior_with(w)
    }
}

impl OneForm {
    fn interior_with(&self, v: &VectorField) -> Result<Scalar, GeometryError> {
        v.interior(self)
    }
}

/// Span of generically independent vector fields; the stored basis is the
/// reduced row echelon form of the spanning set.
#[derive(Clone, Debug)]
pub struct Distribution {
    chart: Chart,
    ech: Echelon,
    basis: Vec<VectorField>,
}

/// Span of generically independent 1-forms, stored like [`Distribution`].
#[derive(Clone, Debug)]
pub struct Codistribution {
    chart: Chart,
    ech: Echelon,
    basis: Vec<OneForm>,
}

fn echelon_of(chart: &Chart, rows: Vec<Vec<Scalar>>) -> Echelon {
    linalg::rref(rows, chart.dim())
}

impl Distribution {
    pub fn span(chart: &Chart, fields: Vec<VectorField>) -> Result<Self, GeometryError> {
        for f in &fields {
            chart.check(&f.chart)?;
        }
        let ech = echelon_of(chart, fields.into_iter().map(|f| f.coeffs).collect());
        Ok(Distribution::from_echelon(chart, ech))
    }

    fn from_echelon(chart: &Chart, ech: Echelon) -> Self {
        let basis = ech
            .rows
            .iter()
            .map(|r| VectorField {
                chart: chart.clone(),
                coeffs: r.clone(),
            })
            .collect();
        Distribution {
            chart: chart.clone(),
            ech,
            basis,
        }
    }

    pub fn zero(chart: &Chart) -> Self {
        Distribution::from_echelon(chart, echelon_of(chart, Vec::new()))
    }

    /// Span of the coordinate fields with the given indices.
    pub fn coordinate(chart: &Chart, indices: impl IntoIterator<Item = usize>) -> Self {
        let fields = indices
            .into_iter()
            .map(|i| VectorField::coordinate(chart, i))
            .collect();
        Distribution::span(chart, fields).expect("same chart")
    }

    pub fn full(chart: &Chart) -> Self {
        Distribution::coordinate(chart, 0..chart.dim())
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[VectorField] {
        &self.basis
    }

    pub fn contains(&self, v: &VectorField) -> Result<bool, GeometryError> {
        self.chart.check(&v.chart)?;
        Ok(self.ech.contains(&v.coeffs))
    }

    pub fn contains_all(&self, other: &Distribution) -> Result<bool, GeometryError> {
        self.chart.check(&other.chart)?;
        Ok(other.basis.iter().all(|v| self.ech.contains(&v.coeffs)))
    }

    /// Span equality by mutual membership.
    pub fn same_span(&self, other: &Distribution) -> Result<bool, GeometryError> {
        Ok(self.dim() == other.dim() && self.contains_all(other)?)
    }

    pub fn sum(&self, other: &Distribution) -> Result<Distribution, GeometryError> {
        let mut fields = self.basis.clone();
        fields.extend(other.basis.iter().cloned());
        Distribution::span(&self.chart, fields)
    }

    /// The codistribution of all 1-forms vanishing on `self`.
    pub fn annihilator(&self) -> Codistribution {
        let forms = self
            .ech
            .kernel()
            .into_iter()
            .map(|c| OneForm {
                chart: self.chart.clone(),
                coeffs: c,
            })
            .collect();
        Codistribution::span(&self.chart, forms).expect("same chart")
    }

    pub fn is_involutive(&self) -> bool {
        for (i, v) in self.basis.iter().enumerate() {
            for w in &self.basis[i + 1..] {
                let b = v.lie_bracket(w).expect("same chart");
                if !self.ech.contains(&b.coeffs) {
                    return false;
                }
            }
        }
        true
    }

    pub fn coefficient_rows(&self) -> Vec<Vec<Scalar>> {
        self.ech.rows.clone()
    }

    pub fn rank_at(&self, point: &BTreeMap<Var, Rational>) -> Option<usize> {
        linalg::rank_at(&self.ech.rows, point)
    }
}

impl Codistribution {
    pub fn span(chart: &Chart, forms: Vec<OneForm>) -> Result<Self, GeometryError> {
        for f in &forms {
            chart.check(&f.chart)?;
        }
        let ech = echelon_of(chart, forms.into_iter().map(|f| f.coeffs).collect());
        Ok(Codistribution::from_echelon(chart, ech))
    }

    fn from_echelon(chart: &Chart, ech: Echelon) -> Self {
        let basis = ech
            .rows
            .iter()
            .map(|r| OneForm {
                chart: chart.clone(),
                coeffs: r.clone(),
            })
            .collect();
        Codistribution {
            chart: chart.clone(),
            ech,
            basis,
        }
    }

    pub fn zero(chart: &Chart) -> Self {
        Codistribution::from_echelon(chart, echelon_of(chart, Vec::new()))
    }

    pub fn coordinate(chart: &Chart, indices: impl IntoIterator<Item = usize>) -> Self {
        let forms = indices
            .into_iter()
            .map(|i| OneForm::coordinate(chart, i))
            .collect();
        Codistribution::span(chart, forms).expect("same chart")
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[OneForm] {
        &self.basis
    }

    pub fn contains(&self, w: &OneForm) -> Result<bool, GeometryError> {
        self.chart.check(&w.chart)?;
        Ok(self.ech.contains(&w.coeffs))
    }

    pub fn contains_all(&self, other: &Codistribution) -> Result<bool, GeometryError> {
        self.chart.check(&other.chart)?;
        Ok(other.basis.iter().all(|w| self.ech.contains(&w.coeffs)))
    }

    pub fn same_span(&self, other: &Codistribution) -> Result<bool, GeometryError> {
        Ok(self.dim() == other.dim() && self.contains_all(other)?)
    }

    pub fn sum(&self, other: &Codistribution) -> Result<Codistribution, GeometryError> {
        let mut forms = self.basis.clone();
        forms.extend(other.basis.iter().cloned());
        Codistribution::span(&self.chart, forms)
    }

    /// The distribution of all vector fields annihilated by `self`.
    pub fn annihilator(&self) -> Distribution {
        let fields = self
            .ech
            .kernel()
            .into_iter()
            .map(|c| VectorField {
                chart: self.chart.clone(),
                coeffs: c,
            })
            .collect();
        Distribution::span(&self.chart, fields).expect("same chart")
    }

    /// Forms expressible in both bases, from the kernel of the stacked
    /// system `Σ aᵢ pᵢ − Σ bⱼ qⱼ = 0`.
    pub fn intersect(&self, other: &Codistribution) -> Result<Codistribution, GeometryError> {
        self.chart.check(&other.chart)?;
        let p = self.dim();
        let cols = p + other.dim();
        if p == 0 || other.dim() == 0 {
            return Ok(Codistribution::zero(&self.chart));
        }
        let n = self.chart.dim();
        let rows: Vec<Vec<Scalar>> = (0..n)
            .map(|k| {
                self.basis
                    .iter()
                    .map(|w| w.coeffs[k].clone())
                    .chain(other.basis.iter().map(|w| -&w.coeffs[k]))
                    .collect()
            })
            .collect();
        let forms = linalg::kernel(&rows, cols)
            .into_iter()
            .map(|sol| {
                let mut acc = vec![Scalar::zero(); n];
                for (a, w) in sol[..p].iter().zip(&self.basis) {
                    if a.is_zero() {
                        continue;
                    }
                    for (t, c) in acc.iter_mut().zip(&w.coeffs) {
                        if !c.is_zero() {
                            *t = &*t + &(a * c);
                        }
                    }
                }
                OneForm {
                    chart: self.chart.clone(),
                    coeffs: acc,
                }
            })
            .collect();
        Codistribution::span(&self.chart, forms)
    }

    /// Smallest codistribution containing `self` and invariant under Lie
    /// derivatives along every field of `d`.
    pub fn invariant_closure(&self, d: &Distribution) -> Result<Codistribution, GeometryError> {
        self.chart.check(&d.chart)?;
        let mut current = self.clone();
        let mut frontier: Vec<OneForm> = self.basis.clone();
        // each pass either stops or raises the dimension
        for _ in 0..=self.chart.dim() {
            let mut added = Vec::new();
            for w in &frontier {
                for v in d.basis() {
                    let l = w.lie_derivative(v)?;
                    if !current.ech.contains(&l.coeffs) {
                        let mut forms = current.basis.clone();
                        forms.push(l.clone());
                        current = Codistribution::span(&self.chart, forms)?;
                        added.push(l);
                    }
                }
            }
            if added.is_empty() {
                return Ok(current);
            }
            frontier = added;
        }
        Ok(current)
    }

    /// Frobenius condition: every `dω` vanishes on pairs of fields from the
    /// annihilator.
    pub fn is_integrable(&self) -> bool {
        self.frobenius_residuals().is_empty()
    }

    /// Nonzero values `dω(v_a, v_b)` for basis forms `ω` and annihilator
    /// fields `v_a, v_b`, with their indices.
    pub fn frobenius_residuals(&self) -> Vec<(usize, usize, usize, Scalar)> {
        if self.dim() <= 1 && self.chart.dim() <= 2 {
            return Vec::new();
        }
        let ann = self.annihilator();
        let mut out = Vec::new();
        for (k, w) in self.basis.iter().enumerate() {
            let dw = w.exterior_derivative();
            if dw.is_zero() {
                continue;
            }
            let contracted: Vec<OneForm> = ann
                .basis()
                .iter()
                .map(|v| v.interior2(&dw).expect("same chart"))
                .collect();
            for (a, ca) in contracted.iter().enumerate() {
                for (b, vb) in ann.basis().iter().enumerate().skip(a + 1) {
                    let r = vb.interior(ca).expect("same chart");
                    if !r.is_zero() {
                        out.push((k, a, b, r));
                    }
                }
            }
        }
        out
    }

    pub fn coefficient_rows(&self) -> Vec<Vec<Scalar>> {
        self.ech.rows.clone()
    }

    pub fn rank_at(&self, point: &BTreeMap<Var, Rational>) -> Option<usize> {
        linalg::rank_at(&self.ech.rows, point)
    }
}

fn fmt_terms(
    f: &mut fmt::Formatter<'_>,
    coeffs: &[Scalar],
    chart: &Chart,
    prefix: &str,
) -> fmt::Result {
    let mut first = true;
    for (c, v) in coeffs.iter().zip(chart.vars()) {
        if c.is_zero() {
            continue;
        }
        if !first {
            write!(f, " + ")?;
        }
        first = false;
        if c.is_one() {
            write!(f, "{prefix}{v}")?;
        } else {
            write!(f, "({c})*{prefix}{v}")?;
        }
    }
    if first {
        write!(f, "0")?;
    }
    Ok(())
}

impl fmt::Display for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_terms(f, &self.coeffs, &self.chart, "∂")
    }
}

impl fmt::Display for OneForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_terms(f, &self.coeffs, &self.chart, "d")
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.basis.iter().map(|v| v.to_string()).collect();
        write!(f, "span{{{}}}", parts.join(", "))
    }
}

impl fmt::Display for Codistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.basis.iter().map(|v| v.to_string()).collect();
        write!(f, "span{{{}}}", parts.join(", "))
    }
}
