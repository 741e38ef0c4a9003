use std::collections::BTreeMap;

use super::{chart_names, jacobian_rank, DiscreteSystem, SystemError};
use crate::geometry::{Chart, Codistribution, Distribution, OneForm, VectorField};
use crate::symexpr::{Scalar, Var};

/// How the inverse map of an adapted chart was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InversionRule {
    /// Every step solved an equation in exactly one unknown.
    Strict,
    /// Some step solved for one unknown in terms of others, followed by
    /// back-substitution.
    Relaxed,
    /// Taken from the user hint and verified.
    Hint,
}

/// Coordinates `θᵢ = fⁱ(x, u)`, `ξⱼ = h_j` where each `h_j` is one of the
/// original coordinates, together with the inverse map.
#[derive(Clone, Debug)]
pub struct AdaptedChart {
    xu: Chart,
    adapted: Chart,
    plus: Chart,
    n: usize,
    m: usize,
    h_vars: Vec<Var>,
    forward: Vec<Scalar>,
    forward_map: BTreeMap<Var, Scalar>,
    inverse: Vec<Scalar>,
    inverse_map: BTreeMap<Var, Scalar>,
    // jac_fwd[b][a] = ∂y_b/∂z_a as a function of z = (x, u)
    jac_fwd: Vec<Vec<Scalar>>,
    // jac_inv[a][b] = ∂z_a/∂y_b as a function of y = (θ, ξ)
    jac_inv: Vec<Vec<Scalar>>,
    rule: InversionRule,
}

/// All `k`-subsets of `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (0..k).rev().find(|&i| cur[i] < n - k + i) else {
            return out;
        };
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

struct Equation {
    lhs: Scalar,
    rhs: Scalar,
}

fn residual_text(eqs: &[Equation]) -> String {
    eqs.iter()
        .map(|e| format!("{} = {}", e.lhs, e.rhs))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Solves `θᵢ = fⁱ` for the non-ξ unknowns. In strict mode only equations
/// with a single unknown are used.
fn invert(
    eqs: Vec<Equation>,
    unknowns: &[Var],
    strict: bool,
) -> Result<BTreeMap<Var, Scalar>, String> {
    let mut eqs = eqs;
    let mut unsolved: Vec<Var> = unknowns.to_vec();
    let mut steps: Vec<(Var, Scalar)> = Vec::new();
    while !eqs.is_empty() {
        let mut found = None;
        'search: for (i, e) in eqs.iter().enumerate() {
            let present: Vec<&Var> = unsolved
                .iter()
                .filter(|v| e.lhs.depends_on(v) || e.rhs.depends_on(v))
                .collect();
            if strict && present.len() != 1 {
                continue;
            }
            for v in present {
                if let Ok(sol) = Scalar::solve_linear_in(&e.lhs, &e.rhs, v) {
                    found = Some((i, v.clone(), sol));
                    break 'search;
                }
            }
        }
        let Some((i, v, sol)) = found else {
            return Err(residual_text(&eqs));
        };
        eqs.remove(i);
        unsolved.retain(|w| w != &v);
        let b = BTreeMap::from([(v.clone(), sol.clone())]);
        for e in eqs.iter_mut() {
            if e.lhs.depends_on(&v) {
                e.lhs = e.lhs.substitute(&b).map_err(|_| format!("substituting {v} makes an equation singular"))?;
            }
        }
        steps.push((v, sol));
    }
    if !unsolved.is_empty() {
        return Err(format!(
            "unknowns left: {}",
            unsolved.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
        ));
    }
    let mut out: BTreeMap<Var, Scalar> = BTreeMap::new();
    for (v, sol) in steps.into_iter().rev() {
        let s = sol.substitute(&out).map_err(|e| e.to_string())?;
        out.insert(v, s);
    }
    Ok(out)
}

impl AdaptedChart {
    /// Builds the chart from the hint if present, else by trying every
    /// `m`-subset of `(x, u)` in lexicographic order of chart position:
    /// first with the strict triangular rule, then with the relaxed one.
    pub fn build(sys: &DiscreteSystem) -> Result<Self, SystemError> {
        let hint = sys.hint();
        let xu = sys.chart();
        if let Some(xi) = &hint.xi {
            if xi.len() != sys.m() {
                return Err(SystemError::HintInvalid(format!(
                    "expected {} xi variables, got {}",
                    sys.m(),
                    xi.len()
                )));
            }
            let mut idx = Vec::new();
            for v in xi {
                let i = xu.index_of(v).ok_or_else(|| {
                    SystemError::HintInvalid(format!("`{v}` is not a system variable"))
                })?;
                if idx.contains(&i) {
                    return Err(SystemError::HintInvalid(format!("`{v}` listed twice")));
                }
                idx.push(i);
            }
            if let Some(inv) = &hint.inverse {
                return Self::from_inverse(sys, &idx, inv);
            }
            if !Self::regular(sys, &idx) {
                return Err(SystemError::HintInvalid(
                    "the Jacobian of (f, h) is singular for this xi choice".into(),
                ));
            }
            let mut last = String::new();
            for strict in [true, false] {
                match Self::with_subset(sys, &idx, strict) {
                    Ok(c) => return Ok(c),
                    Err(r) => last = r,
                }
            }
            return Err(SystemError::InversionFailed { residual: last });
        }
        if hint.inverse.is_some() {
            return Err(SystemError::HintInvalid(
                "an inverse hint needs an explicit xi selection".into(),
            ));
        }
        let subsets: Vec<Vec<usize>> = combinations(sys.n() + sys.m(), sys.m())
            .into_iter()
            .filter(|s| Self::regular(sys, s))
            .collect();
        let mut first_residual = None;
        for strict in [true, false] {
            for s in &subsets {
                match Self::with_subset(sys, s, strict) {
                    Ok(c) => return Ok(c),
                    Err(r) => {
                        first_residual.get_or_insert(r);
                    }
                }
            }
        }
        Err(SystemError::InversionFailed {
            residual: first_residual.unwrap_or_else(|| "no regular xi selection".into()),
        })
    }

    /// `(f, h)` has a regular Jacobian iff `∂f` restricted to the non-ξ
    /// columns has rank `n`.
    fn regular(sys: &DiscreteSystem, xi_idx: &[usize]) -> bool {
        let rest: Vec<Var> = sys
            .chart()
            .vars()
            .iter()
            .enumerate()
            .filter(|(i, _)| !xi_idx.contains(i))
            .map(|(_, v)| v.clone())
            .collect();
        jacobian_rank(sys.f(), &rest) == sys.n()
    }

    fn with_subset(sys: &DiscreteSystem, xi_idx: &[usize], strict: bool) -> Result<Self, String> {
        let (th, xi, _) = chart_names(sys.states(), sys.inputs());
        let vars = sys.chart().vars();
        let to_xi: BTreeMap<Var, Var> = xi_idx
            .iter()
            .zip(&xi)
            .map(|(&i, x)| (vars[i].clone(), x.clone()))
            .collect();
        let eqs = sys
            .f()
            .iter()
            .zip(&th)
            .map(|(fi, t)| Equation {
                lhs: fi.rename(&to_xi),
                rhs: Scalar::var(t),
            })
            .collect();
        let unknowns: Vec<Var> = vars
            .iter()
            .enumerate()
            .filter(|(i, _)| !xi_idx.contains(i))
            .map(|(_, v)| v.clone())
            .collect();
        let solved = invert(eqs, &unknowns, strict)?;
        let inverse: Vec<Scalar> = vars
            .iter()
            .map(|v| match to_xi.get(v) {
                Some(x) => Scalar::var(x),
                None => solved[v].clone(),
            })
            .collect();
        let rule = if strict {
            InversionRule::Strict
        } else {
            InversionRule::Relaxed
        };
        Self::assemble(sys, xi_idx, inverse, rule).map_err(|e| e.to_string())
    }

    fn from_inverse(
        sys: &DiscreteSystem,
        xi_idx: &[usize],
        given: &[(Var, Scalar)],
    ) -> Result<Self, SystemError> {
        let (_, xi, _) = chart_names(sys.states(), sys.inputs());
        let vars = sys.chart().vars();
        let map: BTreeMap<&Var, &Scalar> = given.iter().map(|(v, s)| (v, s)).collect();
        let mut inverse = Vec::new();
        for (i, v) in vars.iter().enumerate() {
            if let Some(k) = xi_idx.iter().position(|&j| j == i) {
                inverse.push(Scalar::var(&xi[k]));
            } else {
                let e = map.get(v).ok_or_else(|| {
                    SystemError::HintInvalid(format!("inverse hint has no expression for `{v}`"))
                })?;
                inverse.push((*e).clone());
            }
        }
        Self::assemble(sys, xi_idx, inverse, InversionRule::Hint).map_err(|e| match e {
            SystemError::InversionFailed { residual } => SystemError::HintInvalid(residual),
            other => other,
        })
    }

    fn assemble(
        sys: &DiscreteSystem,
        xi_idx: &[usize],
        inverse: Vec<Scalar>,
        rule: InversionRule,
    ) -> Result<Self, SystemError> {
        let (th, xi, xp) = chart_names(sys.states(), sys.inputs());
        let xu = sys.chart().clone();
        let vars = xu.vars();
        let mut adapted_vars = th.clone();
        adapted_vars.extend(xi.iter().cloned());
        let adapted = Chart::new(adapted_vars)?;
        let plus = Chart::new(xp)?;
        let h_vars: Vec<Var> = xi_idx.iter().map(|&i| vars[i].clone()).collect();
        let mut forward: Vec<Scalar> = sys.f().to_vec();
        forward.extend(h_vars.iter().map(Scalar::var));
        let forward_map: BTreeMap<Var, Scalar> = adapted
            .vars()
            .iter()
            .cloned()
            .zip(forward.iter().cloned())
            .collect();
        for (z, g) in vars.iter().zip(&inverse) {
            if let Some(bad) = g.vars().into_iter().find(|v| adapted.index_of(v).is_none()) {
                return Err(SystemError::HintInvalid(format!(
                    "inverse expression for `{z}` uses `{bad}`, which is not an adapted coordinate"
                )));
            }
            let back = g.substitute(&forward_map).map_err(|_| SystemError::InversionFailed {
                residual: format!("{z} = {g} is singular on the chart"),
            })?;
            if back != Scalar::var(z) {
                return Err(SystemError::InversionFailed {
                    residual: format!("round trip of {z} = {g} gives {back}"),
                });
            }
        }
        let inverse_map: BTreeMap<Var, Scalar> =
            vars.iter().cloned().zip(inverse.iter().cloned()).collect();
        let jac_fwd = forward
            .iter()
            .map(|y| vars.iter().map(|z| y.differentiate(z)).collect())
            .collect();
        let jac_inv = inverse
            .iter()
            .map(|z| adapted.vars().iter().map(|y| z.differentiate(y)).collect())
            .collect();
        Ok(AdaptedChart {
            xu,
            adapted,
            plus,
            n: sys.n(),
            m: sys.m(),
            h_vars,
            forward,
            forward_map,
            inverse,
            inverse_map,
            jac_fwd,
            jac_inv,
            rule,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// The original chart `(x, u)`.
    pub fn original(&self) -> &Chart {
        &self.xu
    }

    /// The chart `(θ, ξ)`.
    pub fn adapted(&self) -> &Chart {
        &self.adapted
    }

    /// The chart on `𝒳⁺`.
    pub fn plus(&self) -> &Chart {
        &self.plus
    }

    pub fn theta(&self) -> &[Var] {
        &self.adapted.vars()[..self.n]
    }

    pub fn xi(&self) -> &[Var] {
        &self.adapted.vars()[self.n..]
    }

    /// The original variables selected as `ξ`.
    pub fn h_vars(&self) -> &[Var] {
        &self.h_vars
    }

    pub fn rule(&self) -> InversionRule {
        self.rule
    }

    /// `(θ, ξ)` as functions of `(x, u)`.
    pub fn forward(&self) -> &[Scalar] {
        &self.forward
    }

    /// `(x, u)` as functions of `(θ, ξ)`.
    pub fn inverse(&self) -> &[Scalar] {
        &self.inverse
    }

    pub fn inverse_of(&self, v: &Var) -> Option<&Scalar> {
        self.inverse_map.get(v)
    }

    pub fn scalar_to_adapted(&self, g: &Scalar) -> Result<Scalar, SystemError> {
        Ok(g.substitute(&self.inverse_map)?)
    }

    pub fn scalar_from_adapted(&self, g: &Scalar) -> Result<Scalar, SystemError> {
        Ok(g.substitute(&self.forward_map)?)
    }

    pub fn field_to_adapted(&self, v: &VectorField) -> Result<VectorField, SystemError> {
        let a = v.coeffs();
        let mut out = Vec::with_capacity(a.len());
        for row in &self.jac_fwd {
            let w: Scalar = a
                .iter()
                .zip(row)
                .filter(|(x, y)| !x.is_zero() && !y.is_zero())
                .map(|(x, y)| x * y)
                .sum();
            out.push(self.scalar_to_adapted(&w)?);
        }
        Ok(VectorField::new(&self.adapted, out)?)
    }

    pub fn field_from_adapted(&self, w: &VectorField) -> Result<VectorField, SystemError> {
        let b = w.coeffs();
        let mut out = Vec::with_capacity(b.len());
        for row in &self.jac_inv {
            let v: Scalar = b
                .iter()
                .zip(row)
                .filter(|(x, y)| !x.is_zero() && !y.is_zero())
                .map(|(x, y)| x * y)
                .sum();
            out.push(self.scalar_from_adapted(&v)?);
        }
        Ok(VectorField::new(&self.xu, out)?)
    }

    pub fn form_to_adapted(&self, w: &OneForm) -> Result<OneForm, SystemError> {
        let sub: Vec<Scalar> = w
            .coeffs()
            .iter()
            .map(|c| self.scalar_to_adapted(c))
            .collect::<Result<_, _>>()?;
        let dim = self.adapted.dim();
        let out = (0..dim)
            .map(|b| {
                sub.iter()
                    .zip(&self.jac_inv)
                    .filter(|(c, row)| !c.is_zero() && !row[b].is_zero())
                    .map(|(c, row)| c * &row[b])
                    .sum()
            })
            .collect();
        Ok(OneForm::new(&self.adapted, out)?)
    }

    pub fn form_from_adapted(&self, w: &OneForm) -> Result<OneForm, SystemError> {
        let sub: Vec<Scalar> = w
            .coeffs()
            .iter()
            .map(|c| self.scalar_from_adapted(c))
            .collect::<Result<_, _>>()?;
        let dim = self.xu.dim();
        let out = (0..dim)
            .map(|a| {
                sub.iter()
                    .zip(&self.jac_fwd)
                    .filter(|(c, row)| !c.is_zero() && !row[a].is_zero())
                    .map(|(c, row)| c * &row[a])
                    .sum()
            })
            .collect();
        Ok(OneForm::new(&self.xu, out)?)
    }

    pub fn distribution_to_adapted(&self, d: &Distribution) -> Result<Distribution, SystemError> {
        let fields = d
            .basis()
            .iter()
            .map(|v| self.field_to_adapted(v))
            .collect::<Result<_, _>>()?;
        Ok(Distribution::span(&self.adapted, fields)?)
    }

    pub fn distribution_from_adapted(&self, d: &Distribution) -> Result<Distribution, SystemError> {
        let fields = d
            .basis()
            .iter()
            .map(|v| self.field_from_adapted(v))
            .collect::<Result<_, _>>()?;
        Ok(Distribution::span(&self.xu, fields)?)
    }

    pub fn codistribution_to_adapted(&self, p: &Codistribution) -> Result<Codistribution, SystemError> {
        let forms = p
            .basis()
            .iter()
            .map(|w| self.form_to_adapted(w))
            .collect::<Result<_, _>>()?;
        Ok(Codistribution::span(&self.adapted, forms)?)
    }

    pub fn codistribution_from_adapted(
        &self,
        p: &Codistribution,
    ) -> Result<Codistribution, SystemError> {
        let forms = p
            .basis()
            .iter()
            .map(|w| self.form_from_adapted(w))
            .collect::<Result<_, _>>()?;
        Ok(Codistribution::span(&self.xu, forms)?)
    }

    /// True if the `∂θ`-coefficients of `v` (on the adapted chart) are free
    /// of `ξ`.
    pub fn is_projectable(&self, v: &VectorField) -> bool {
        v.coeffs()[..self.n]
            .iter()
            .all(|c| !c.depends_on_any(self.xi()))
    }

    /// `f_*(v)`: drops the `∂ξ` part and renames `θᵢ → xpᵢ`.
    pub fn pushforward_projectable(&self, v: &VectorField) -> Result<VectorField, SystemError> {
        if v.chart() != &self.adapted {
            return Err(crate::geometry::GeometryError::ChartMismatch(
                v.chart().to_string(),
                self.adapted.to_string(),
            )
            .into());
        }
        if !self.is_projectable(v) {
            return Err(SystemError::NotProjectable);
        }
        let rename: BTreeMap<Var, Var> = self
            .theta()
            .iter()
            .cloned()
            .zip(self.plus.vars().iter().cloned())
            .collect();
        let coeffs = v.coeffs()[..self.n]
            .iter()
            .map(|c| c.rename(&rename))
            .collect();
        Ok(VectorField::new(&self.plus, coeffs)?)
    }

    /// `δ⁻¹(P⁺)`: for a codistribution on the adapted chart inside
    /// `span{dθ}` with a `ξ`-free basis, renames `θᵢ → xᵢ`, `dθᵢ → dxᵢ`.
    pub fn backward_shift_codistribution(
        &self,
        p: &Codistribution,
    ) -> Result<Codistribution, SystemError> {
        let rename: BTreeMap<Var, Var> = self
            .theta()
            .iter()
            .cloned()
            .zip(self.xu.vars()[..self.n].iter().cloned())
            .collect();
        let mut forms = Vec::new();
        // the reduced echelon basis is ξ-free whenever any basis is
        for w in p.basis() {
            let c = w.coeffs();
            if c[self.n..].iter().any(|x| !x.is_zero())
                || c.iter().any(|x| x.depends_on_any(self.xi()))
            {
                return Err(SystemError::NotShiftable);
            }
            let mut coeffs: Vec<Scalar> = c[..self.n].iter().map(|x| x.rename(&rename)).collect();
            coeffs.extend(std::iter::repeat_n(Scalar::zero(), self.m));
            forms.push(OneForm::new(&self.xu, coeffs)?);
        }
        Ok(Codistribution::span(&self.xu, forms)?)
    }
}

/// Solves `lhs_i = rhs_i` for `unknowns`, first by the strict triangular
/// rule, then by the relaxed one.
pub fn solve_triangular(
    eqs: &[(Scalar, Scalar)],
    unknowns: &[Var],
) -> Result<BTreeMap<Var, Scalar>, String> {
    let build = || {
        eqs.iter()
            .map(|(l, r)| Equation { lhs: l.clone(), rhs: r.clone() })
            .collect::<Vec<_>>()
    };
    invert(build(), unknowns, true).or_else(|_| invert(build(), unknowns, false))
}
