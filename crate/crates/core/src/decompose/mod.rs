//! Triangular decompositions `x̄₂⁺ = f₂(x̄₂, x̄₁, ū₂)`,
//! `x̄₁⁺ = f₁(x̄₂, x̄₁, ū₂, ū₁)` of forward-flat systems, one step at a time
//! and as a cascade of subsystems.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::dtsystem::{
    fresh_vars, jacobian_rank, solve_triangular, AdaptedChartHint, DiscreteSystem, SystemError,
};
use crate::flatness::{largest_projectable_subdistribution, run_codistribution_test, FlatnessError};
use crate::geometry::{generic_rank, Distribution, GeometryError};
use crate::symexpr::{Rational, Scalar, SymError, Var};

mod integrals;

pub use integrals::{antiderivative, find_first_integrals, integrate_exact, FirstIntegralSet, IntegralMethod};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum DecomposeError {
    #[error("no rational first integrals found for {residual}; supply them with an integrals hint")]
    IntegralsNotFound { residual: String },
    #[error("integrals hint rejected: {0}")]
    HintInvalid(String),
    #[error("codistribution is not integrable")]
    NotIntegrable,
    #[error("codistribution involves input differentials or input-dependent coefficients")]
    NotStateOnly,
    #[error("normalization failed: {0}")]
    NormalizationFailed(String),
    #[error("decomposition needs rank ∂u f = m, got rank {rank} with m = {m}")]
    InputRankDeficient { rank: usize, m: usize },
    #[error("system is not flat at this step: P2 = P1")]
    NotFlat,
    #[error("triangular form check failed: {0}")]
    Invariant(String),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Flatness(#[from] FlatnessError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Sym(#[from] SymError),
}

/// Results of the checks run on every step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TriangularChecks {
    /// `f₂` does not depend on `ū₁`.
    pub f2_free_of_u1: bool,
    /// The chosen equations read `x̄₂^{i₂,+} = ū₂^{i₂}`.
    pub normalized: bool,
    /// Generic rank of `∂ū₁ f₁`.
    pub rank_f1_u1: usize,
    pub state_invertible: bool,
    pub input_invertible: bool,
    /// `D₀` of the transformed system equals `span{∂ū₁}`.
    pub d0_matches: bool,
}

/// Subsystem inputs replaced by fewer independent combinations.
#[derive(Clone, Debug)]
pub struct InputElimination {
    pub original_inputs: Vec<Var>,
    pub new_inputs: Vec<Var>,
    /// New inputs as functions of the subsystem states and original inputs.
    pub definitions: Vec<Scalar>,
}

#[derive(Clone, Debug)]
pub struct Subsystem {
    pub system: DiscreteSystem,
    pub eliminated: Option<InputElimination>,
}

#[derive(Clone, Debug)]
pub struct TriangularDecomposition {
    pub states: Vec<Var>,
    pub inputs: Vec<Var>,
    /// First integrals of `P₂`, giving `x̄₂`.
    pub integrals: FirstIntegralSet,
    /// `(x̄₂, x̄₁)`.
    pub new_states: Vec<Var>,
    /// `(ū₂, ū₁)`.
    pub new_inputs: Vec<Var>,
    /// New states as functions of `x`.
    pub state_transform: Vec<Scalar>,
    /// `x` as functions of the new states.
    pub state_inverse: Vec<Scalar>,
    /// New inputs as functions of `(x, u)`.
    pub input_transform: Vec<Scalar>,
    /// `u` as functions of the new states and inputs.
    pub input_inverse: Vec<Scalar>,
    /// Indices of the `x̄₂` equations that were normalized.
    pub normalized_rows: Vec<usize>,
    pub subsystem_f2: Vec<Scalar>,
    pub feedback_f1: Vec<Scalar>,
    /// `(dim x̄₂, dim x̄₁, dim ū₂, dim ū₁)`.
    pub dims: (usize, usize, usize, usize),
    pub transformed: DiscreteSystem,
    pub checks: TriangularChecks,
    pub subsystem: Option<Subsystem>,
}

fn jacobian(f: &[Scalar], vars: &[Var]) -> Vec<Vec<Scalar>> {
    f.iter()
        .map(|fi| vars.iter().map(|v| fi.differentiate(v)).collect())
        .collect()
}

/// Greedy lowest-index selection of rows raising the generic rank.
fn independent_rows(rows: &[Vec<Scalar>]) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::new();
    let mut acc: Vec<Vec<Scalar>> = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        acc.push(r.clone());
        if generic_rank(&acc) > chosen.len() {
            chosen.push(i);
        } else {
            acc.pop();
        }
    }
    chosen
}

fn substitute_all(f: &[Scalar], map: &BTreeMap<Var, Scalar>) -> Result<Vec<Scalar>, SymError> {
    f.iter().map(|g| g.substitute(map)).collect()
}

fn binding(vars: &[Var], values: &[Scalar]) -> BTreeMap<Var, Scalar> {
    vars.iter().cloned().zip(values.iter().cloned()).collect()
}

fn names_of(vars: &[&[Var]]) -> BTreeSet<String> {
    vars.iter().flat_map(|vs| vs.iter().map(|v| v.name().to_string())).collect()
}

fn solve(lhs: &[Scalar], rhs: &[Var], unknowns: &[Var], what: &str) -> Result<Vec<Scalar>, DecomposeError> {
    let eqs: Vec<(Scalar, Scalar)> = lhs.iter().cloned().zip(rhs.iter().map(Scalar::var)).collect();
    let sol = solve_triangular(&eqs, unknowns)
        .map_err(|r| DecomposeError::NormalizationFailed(format!("cannot invert the {what}: {r}")))?;
    Ok(unknowns.iter().map(|v| sol[v].clone()).collect())
}

/// Values at the equilibrium, skipping functions singular there.
fn eval_at_point(
    vars: &[Var],
    f: &[Scalar],
    point: &BTreeMap<Var, Rational>,
) -> BTreeMap<Var, Rational> {
    vars.iter()
        .zip(f)
        .filter_map(|(v, g)| g.eval_at(point).ok().map(|q| (v.clone(), q)))
        .collect()
}

/// Replaces the inputs `w` of `z⁺ = f(z, w)` by `rank ∂w f` independent
/// combinations when `∂w f` is rank deficient.
fn eliminate_inputs(
    name: &str,
    states: &[Var],
    inputs: &[Var],
    f: &[Scalar],
    eq: &BTreeMap<Var, Rational>,
    taken: &BTreeSet<String>,
) -> Result<Subsystem, DecomposeError> {
    let jac = jacobian(f, inputs);
    let rank = generic_rank(&jac);
    if rank == inputs.len() {
        let sub_eq: BTreeMap<Var, Rational> = states
            .iter()
            .chain(inputs)
            .filter_map(|v| eq.get(v).map(|q| (v.clone(), q.clone())))
            .collect();
        let system = DiscreteSystem::new_generic(name, states.to_vec(), inputs.to_vec(), f.to_vec(), sub_eq, AdaptedChartHint::default())?;
        return Ok(Subsystem { system, eliminated: None });
    }
    let rows = independent_rows(&jac);
    let cols_t: Vec<Vec<Scalar>> = (0..inputs.len())
        .map(|c| rows.iter().map(|&r| jac[r][c].clone()).collect())
        .collect();
    let cols = independent_rows(&cols_t);
    let solved_for: Vec<Var> = cols.iter().map(|&c| inputs[c].clone()).collect();
    let new_inputs = fresh_vars("w", rank, taken);
    let definitions: Vec<Scalar> = rows.iter().map(|&r| f[r].clone()).collect();
    let sol = solve(&definitions, &new_inputs, &solved_for, "redundant input combination")?;
    let reduced = substitute_all(f, &binding(&solved_for, &sol))?;
    if reduced.iter().any(|g| g.depends_on_any(inputs)) {
        return Err(DecomposeError::NormalizationFailed(
            "redundant subsystem inputs could not be eliminated".into(),
        ));
    }
    let mut sub_eq: BTreeMap<Var, Rational> = states
        .iter()
        .filter_map(|v| eq.get(v).map(|q| (v.clone(), q.clone())))
        .collect();
    sub_eq.extend(eval_at_point(&new_inputs, &definitions, eq));
    let system = DiscreteSystem::new_generic(name, states.to_vec(), new_inputs.clone(), reduced, sub_eq, AdaptedChartHint::default())?;
    Ok(Subsystem {
        system,
        eliminated: Some(InputElimination {
            original_inputs: inputs.to_vec(),
            new_inputs,
            definitions,
        }),
    })
}

/// One decomposition step: straightens `P₂` with its first integrals,
/// normalizes `rank ∂u f₂` equations of the `x̄₂` part and checks the
/// triangular form together with `D₀ = span{∂ū₁}`.
pub fn decompose_step(
    sys: &DiscreteSystem,
    integrals_hint: Option<&[Scalar]>,
) -> Result<TriangularDecomposition, DecomposeError> {
    step_avoiding(sys, integrals_hint, &BTreeSet::new())
}

/// [`decompose_step`] with new variable names also avoiding `reserved`.
fn step_avoiding(
    sys: &DiscreteSystem,
    integrals_hint: Option<&[Scalar]>,
    reserved: &BTreeSet<String>,
) -> Result<TriangularDecomposition, DecomposeError> {
    let (n, m) = (sys.n(), sys.m());
    let states = sys.states();
    let inputs = sys.inputs();
    let rank = sys.input_rank();
    if rank != m {
        return Err(DecomposeError::InputRankDeficient { rank, m });
    }
    let chart = sys.build_adapted_chart()?;
    let run = run_codistribution_test(sys, &chart, 1)?;
    let p2 = &run.p[1];
    if p2.dim() == n {
        return Err(DecomposeError::NotFlat);
    }
    let integrals = find_first_integrals(p2, states, integrals_hint)?;
    let p = integrals.functions.len();

    // state transformation, completed by the lowest-index coordinates
    let mut t = integrals.functions.clone();
    for x in states {
        if t.len() == n {
            break;
        }
        t.push(Scalar::var(x));
        if jacobian_rank(&t, states) < t.len() {
            t.pop();
        }
    }
    let mut taken = names_of(&[states, inputs]);
    taken.extend(reserved.iter().cloned());
    let z = fresh_vars("z", n, &taken);
    let x_of_z = solve(&t, &z, states, "state transformation")?;
    let to_z = binding(states, &x_of_z);
    let state_invertible = jacobian_rank(&t, states) == n
        && substitute_all(&t, &to_z)? == z.iter().map(Scalar::var).collect::<Vec<_>>();

    // dynamics in (z, u)
    let shifted = substitute_all(&t, &binding(states, sys.f()))?;
    let big_f = substitute_all(&shifted, &to_z)?;

    // input transformation
    let normalized_rows = independent_rows(&jacobian(&big_f[..p], inputs));
    let r = normalized_rows.len();
    let mut ubar: Vec<Scalar> = normalized_rows.iter().map(|&i| big_f[i].clone()).collect();
    for u in inputs {
        if ubar.len() == m {
            break;
        }
        ubar.push(Scalar::var(u));
        if jacobian_rank(&ubar, inputs) < ubar.len() {
            ubar.pop();
        }
    }
    if ubar.len() < m {
        return Err(DecomposeError::NormalizationFailed(
            "no invertible completion of the input transformation among the inputs".into(),
        ));
    }
    taken.extend(z.iter().map(|v| v.name().to_string()));
    let v = fresh_vars("v", m, &taken);
    let u_of_zv = solve(&ubar, &v, inputs, "input transformation")?;
    let to_v = binding(inputs, &u_of_zv);
    let input_invertible = jacobian_rank(&ubar, inputs) == m
        && substitute_all(&ubar, &to_v)? == v.iter().map(Scalar::var).collect::<Vec<_>>();
    let input_transform = substitute_all(&ubar, &binding(&z, &t))?;
    let g = substitute_all(&big_f, &to_v)?;

    let subsystem_f2 = g[..p].to_vec();
    let feedback_f1 = g[p..].to_vec();
    let normalized = normalized_rows
        .iter()
        .zip(&v)
        .all(|(&i, vi)| g[i] == Scalar::var(vi));
    let f2_free_of_u1 = !subsystem_f2.iter().any(|e| e.depends_on_any(&v[r..]));
    let rank_f1_u1 = jacobian_rank(&feedback_f1, &v[r..]);

    // transformed system and the recomputed D₀
    let eq = sys.equilibrium();
    let mut teq = eval_at_point(&z, &t, eq);
    teq.extend(eval_at_point(&v, &input_transform, eq));
    let transformed = DiscreteSystem::new_generic(
        format!("{} (triangular)", sys.name()),
        z.clone(),
        v.clone(),
        g.clone(),
        teq.clone(),
        AdaptedChartHint::default(),
    )?;
    let tchart = transformed.build_adapted_chart()?;
    let d0 = largest_projectable_subdistribution(&transformed.input_distribution(), &tchart)?;
    let expected = Distribution::coordinate(transformed.chart(), n + r..n + m);
    let d0_matches = d0.original.same_span(&expected)?;

    let checks = TriangularChecks {
        f2_free_of_u1,
        normalized,
        rank_f1_u1,
        state_invertible,
        input_invertible,
        d0_matches,
    };
    let failed: Vec<&str> = [
        (f2_free_of_u1, "f2 depends on the feedback inputs"),
        (normalized, "chosen equations are not normalized"),
        (rank_f1_u1 == n - p && n > p, "rank of the feedback part is not dim x1"),
        (state_invertible, "state transformation is not invertible"),
        (input_invertible, "input transformation is not invertible"),
        (d0_matches, "D0 of the transformed system differs from span of the feedback inputs"),
    ]
    .into_iter()
    .filter(|(ok, _)| !ok)
    .map(|(_, msg)| msg)
    .collect();
    if !failed.is_empty() {
        return Err(DecomposeError::Invariant(failed.join("; ")));
    }

    let subsystem = if p == 0 {
        None
    } else {
        let mut sub_inputs: Vec<Var> = z[p..].to_vec();
        sub_inputs.extend(v[..r].iter().cloned());
        Some(eliminate_inputs(
            &format!("{} (subsystem)", sys.name()),
            &z[..p],
            &sub_inputs,
            &subsystem_f2,
            &teq,
            &taken,
        )?)
    };

    Ok(TriangularDecomposition {
        states: states.to_vec(),
        inputs: inputs.to_vec(),
        integrals,
        new_states: z,
        new_inputs: v,
        state_transform: t,
        state_inverse: x_of_z,
        input_transform,
        input_inverse: u_of_zv,
        normalized_rows,
        subsystem_f2,
        feedback_f1,
        dims: (p, n - p, r, m - r),
        transformed,
        checks,
        subsystem,
    })
}

/// Steps applied to successive subsystems.
#[derive(Clone, Debug)]
pub struct Cascade {
    pub steps: Vec<TriangularDecomposition>,
    /// The last subsystem has no state left.
    pub complete: bool,
    /// Why the cascade stopped early.
    pub blocking: Option<String>,
}

/// Repeats [`decompose_step`] until the subsystem has no state left. The
/// integrals hint applies to the first step only.
pub fn decompose_cascade(sys: &DiscreteSystem, integrals_hint: Option<&[Scalar]>) -> Cascade {
    let mut steps = Vec::new();
    let mut current = sys.clone();
    let mut reserved: BTreeSet<String> = BTreeSet::new();
    for i in 0..=sys.n() {
        let hint = if i == 0 { integrals_hint } else { None };
        match step_avoiding(&current, hint, &reserved) {
            Ok(step) => {
                reserved.extend(names_of(&[&step.states, &step.inputs, &step.new_states, &step.new_inputs]));
                if let Some(el) = step.subsystem.as_ref().and_then(|s| s.eliminated.as_ref()) {
                    reserved.extend(names_of(&[&el.new_inputs]));
                }
                let next = step.subsystem.as_ref().map(|s| s.system.clone());
                steps.push(step);
                match next {
                    Some(s) => current = s,
                    None => {
                        return Cascade {
                            steps,
                            complete: true,
                            blocking: None,
                        }
                    }
                }
            }
            Err(e) => {
                return Cascade {
                    steps,
                    complete: false,
                    blocking: Some(format!("step {}: {e}", i + 1)),
                }
            }
        }
    }
    Cascade {
        steps,
        complete: false,
        blocking: Some("subsystem state did not shrink".into()),
    }
}

#[cfg(test)]
mod tests;
