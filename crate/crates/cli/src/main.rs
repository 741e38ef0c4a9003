use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, ValueEnum};

use fflat::analysis::{analyze, AnalysisError, AnalysisOptions, TestSelection};
use fflat::dtsystem::SystemError;
use fflat::report::AnalysisReport;
use fflat::sysfile::{parse_integrals_hint, parse_system_file, parse_xi_hint, SysFileError};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TestArg {
    Distribution,
    Codistribution,
    Both,
}

/// Decide forward-flatness of a discrete-time system x+ = f(x, u) with exact
/// rational arithmetic.
#[derive(Debug, Parser)]
#[command(name = "fflat", version)]
struct Args {
    /// System file.
    file: PathBuf,
    /// Which test to run.
    #[arg(long, value_enum, default_value = "both")]
    test: TestArg,
    /// Check the duality between both sequences (default: on when both tests run).
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    verify_duality: Option<bool>,
    /// Decompose a flat system into a cascade of triangular forms.
    #[arg(long)]
    decompose: bool,
    /// Write the structured report to this file.
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
    /// Iteration limit (default: n + m + 1).
    #[arg(long, value_name = "K")]
    max_iterations: Option<usize>,
    /// Compare generic ranks with ranks at a sampled point near the equilibrium.
    #[arg(long)]
    point_check: bool,
    /// Seed for the point sampler.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Variables used as xi in the adapted chart, e.g. "x1, x3".
    #[arg(long, value_name = "VARS")]
    chart_hint: Option<String>,
    /// First integrals for the first decomposition step, e.g. "x1, x3, x2 + 3x4".
    #[arg(long, value_name = "EXPRS")]
    integrals_hint: Option<String>,
}

fn remedy(err: &anyhow::Error) -> Option<&'static str> {
    let system = err
        .downcast_ref::<SystemError>()
        .or_else(|| match err.downcast_ref::<SysFileError>() {
            Some(SysFileError::System(e)) => Some(e),
            _ => None,
        })
        .or_else(|| match err.downcast_ref::<AnalysisError>() {
            Some(AnalysisError::System(e)) => Some(e),
            _ => None,
        });
    if let Some(SysFileError::NonRational { .. }) = err.downcast_ref::<SysFileError>() {
        return Some("rewrite the dynamics as rational functions of the states and inputs");
    }
    match system? {
        SystemError::InversionFailed { .. } => {
            Some("provide a chart hint naming the xi variables, e.g. --chart-hint \"x1, x3\"")
        }
        SystemError::HintInvalid(_) => Some("check the xi variables and the inverse map in the hints"),
        SystemError::NotSubmersive { .. } => {
            Some("the tests need a submersive system: the Jacobian of f must have full rank n")
        }
        SystemError::EquilibriumMismatch { .. } | SystemError::EquilibriumSingular(_) => {
            Some("adjust the `equilibrium:` section so that f(x0, u0) = x0")
        }
        _ => None,
    }
}

fn run(args: &Args) -> Result<()> {
    let mut file = parse_system_file(&args.file)?;
    if let Some(h) = &args.chart_hint {
        file.hints.xi = Some(parse_xi_hint(h).context("in --chart-hint")?);
        file.hints.inverse = None;
    }
    if let Some(h) = &args.integrals_hint {
        file.hints.integrals = Some(parse_integrals_hint(h, &file.states).context("in --integrals-hint")?);
    }
    let sys = file.to_system()?;
    let opts = AnalysisOptions {
        test: match args.test {
            TestArg::Distribution => TestSelection::Distribution,
            TestArg::Codistribution => TestSelection::Codistribution,
            TestArg::Both => TestSelection::Both,
        },
        verify_duality: args.verify_duality.unwrap_or(true),
        decompose: args.decompose,
        max_iterations: args.max_iterations,
        point_check: args.point_check,
        seed: args.seed,
        integrals_hint: file.hints.integrals.clone(),
    };
    let analysis = analyze(&sys, &opts)?;
    let report = AnalysisReport::from_analysis(&analysis);
    print!("{}", report.to_text());
    if let Some(path) = &args.json {
        std::fs::write(path, report.to_json())
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if let Some(hint) = remedy(&e) {
                eprintln!("hint: {hint}");
            }
            ExitCode::FAILURE
        }
    }
}
