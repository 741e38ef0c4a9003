//! Runs the selected tests on a system and collects warnings.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::decompose::{decompose_cascade, Cascade};
use crate::dtsystem::{AdaptedChart, DiscreteSystem, SystemError};
use crate::flatness::{
    combine, run_codistribution_test, run_distribution_test, CodistributionRun, DistributionRun,
    FlatnessError, FlatnessVerdict,
};
use crate::geometry::linalg::rank_at;
use crate::symexpr::{Rational, Scalar, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TestSelection {
    Distribution,
    Codistribution,
    Both,
}

#[derive(Clone, Debug)]
pub struct AnalysisOptions {
    pub test: TestSelection,
    /// Only used when both tests run.
    pub verify_duality: bool,
    pub decompose: bool,
    /// Defaults to `n + m + 1`.
    pub max_iterations: Option<usize>,
    pub point_check: bool,
    pub seed: u64,
    pub integrals_hint: Option<Vec<Scalar>>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            test: TestSelection::Both,
            verify_duality: true,
            decompose: false,
            max_iterations: None,
            point_check: false,
            seed: 0,
            integrals_hint: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Flatness(#[from] FlatnessError),
}

#[derive(Clone, Debug)]
pub struct Analysis {
    pub system: DiscreteSystem,
    pub chart: AdaptedChart,
    pub max_iterations: usize,
    pub distribution: Option<DistributionRun>,
    pub codistribution: Option<CodistributionRun>,
    pub verdict: FlatnessVerdict,
    pub cascade: Option<Cascade>,
    pub warnings: Vec<String>,
}

fn jacobian_rows(f: &[Scalar], vars: &[Var]) -> Vec<Vec<Scalar>> {
    f.iter()
        .map(|g| vars.iter().map(|v| g.differentiate(v)).collect())
        .collect()
}

fn singular_loci(sys: &DiscreteSystem) -> Vec<String> {
    sys.f()
        .iter()
        .zip(sys.states())
        .filter(|(g, _)| !g.denom().is_constant())
        .map(|(g, x)| format!("{x}+ is singular where {} = 0", Scalar::from_poly(g.denom().clone())))
        .collect()
}

fn sample_point(sys: &DiscreteSystem, rng: &mut ChaCha8Rng) -> BTreeMap<Var, Rational> {
    sys.chart()
        .vars()
        .iter()
        .map(|v| {
            let num: i64 = rng.gen_range(1..=9) * if rng.gen_bool(0.5) { 1 } else { -1 };
            let offset = Rational::new(num.into(), 17.into());
            (v.clone(), &sys.equilibrium()[v] + offset)
        })
        .collect()
}

fn fmt_point(p: &BTreeMap<Var, Rational>, order: &[Var]) -> String {
    order
        .iter()
        .map(|v| format!("{v} = {}", p[v]))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Compares generic dimensions with ranks at a sampled point near the
/// equilibrium. The point never influences the verdict.
fn point_check(a: &Analysis, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sys = &a.system;
    let vars = sys.chart().vars().to_vec();
    let mut rows: Vec<(String, Vec<Vec<Scalar>>, usize)> = vec![(
        "Jacobian of f".into(),
        jacobian_rows(sys.f(), &vars),
        sys.n(),
    )];
    if let Some(d) = &a.distribution {
        for (k, e) in d.e.iter().enumerate() {
            rows.push((format!("E_{k}"), e.coefficient_rows(), e.dim()));
        }
    }
    if let Some(c) = &a.codistribution {
        for (k, p) in c.p.iter().enumerate() {
            rows.push((format!("P_{}", k + 1), p.coefficient_rows(), p.dim()));
        }
    }
    for _ in 0..32 {
        let point = sample_point(sys, &mut rng);
        let ranks: Option<Vec<usize>> = rows.iter().map(|(_, r, _)| rank_at(r, &point)).collect();
        let Some(ranks) = ranks else { continue };
        return rows
            .iter()
            .zip(ranks)
            .filter(|((_, _, generic), at)| at != generic)
            .map(|((name, _, generic), at)| {
                format!(
                    "point check at ({}): rank of {name} is {at}, generic rank is {generic}",
                    fmt_point(&point, &vars)
                )
            })
            .collect();
    }
    vec!["point check: no regular sample point found near the equilibrium".into()]
}

pub fn analyze(sys: &DiscreteSystem, opts: &AnalysisOptions) -> Result<Analysis, AnalysisError> {
    let chart = sys.build_adapted_chart()?;
    let max_iterations = opts.max_iterations.unwrap_or(sys.n() + sys.m() + 1);
    let run_dist = opts.test != TestSelection::Codistribution;
    let run_codist = opts.test != TestSelection::Distribution;
    let (dist, codist) = std::thread::scope(|s| {
        let d = s.spawn(|| run_dist.then(|| run_distribution_test(sys, &chart, max_iterations)).transpose());
        let c = run_codist
            .then(|| run_codistribution_test(sys, &chart, max_iterations))
            .transpose();
        (d.join().expect("distribution test panicked"), c)
    });
    let (dist, codist) = (dist?, codist?);
    let verify = opts.verify_duality && run_dist && run_codist;
    let verdict = combine(dist.as_ref(), codist.as_ref(), sys, verify);

    let mut warnings = singular_loci(sys);
    let jac = jacobian_rows(sys.f(), sys.chart().vars());
    match rank_at(&jac, sys.equilibrium()) {
        Some(r) if r < sys.n() => warnings.push(format!(
            "submersivity fails at the equilibrium (rank {r} < {}); results hold generically",
            sys.n()
        )),
        None => warnings.push("the Jacobian of f is singular at the equilibrium; results hold generically".into()),
        _ => {}
    }
    if !verdict.agree {
        warnings.push("the distribution and codistribution tests disagree".into());
    }
    if verdict.kbar.is_none() && verdict.agree {
        warnings.push(format!("not converged within {max_iterations} iterations"));
    }

    let cascade = if opts.decompose {
        if verdict.flat {
            Some(decompose_cascade(sys, opts.integrals_hint.as_deref()))
        } else {
            warnings.push("decomposition skipped: the system is not forward-flat".into());
            None
        }
    } else {
        None
    };

    let mut analysis = Analysis {
        system: sys.clone(),
        chart,
        max_iterations,
        distribution: dist,
        codistribution: codist,
        verdict,
        cascade,
        warnings,
    };
    if opts.point_check {
        let extra = point_check(&analysis, opts.seed);
        analysis.warnings.extend(extra);
    }
    Ok(analysis)
}
