//! Structured and text reports of an [`Analysis`].

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::analysis::Analysis;
use crate::decompose::{Cascade, TriangularDecomposition};
use crate::flatness::{CodistributionRun, DistributionRun, DualityReport, MMatrixReport, StopRule};
use crate::geometry::{Codistribution, Distribution, OneForm};
use crate::symexpr::{Scalar, Var};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub var: String,
    pub expr: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanEntry {
    pub name: String,
    pub dim: usize,
    pub basis: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemSection {
    pub name: String,
    pub states: Vec<String>,
    pub inputs: Vec<String>,
    pub dynamics: Vec<Assignment>,
    pub equilibrium: Vec<Assignment>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChartSection {
    pub theta: Vec<String>,
    pub xi: Vec<Assignment>,
    pub rule: String,
    pub inverse: Vec<Assignment>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictSection {
    /// `flat`, `not flat` or `not converged`.
    pub status: String,
    pub flat: bool,
    pub kbar: Option<usize>,
    pub stop_rule: String,
    pub tests_agree: bool,
    pub max_iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MMatrixEntry {
    pub dbar: usize,
    pub rank_m: usize,
    pub theta_pivots: Vec<String>,
    pub l: Vec<Vec<String>>,
    pub m_rows: usize,
    pub m_hat: Vec<Vec<String>>,
    pub kernel: Vec<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistributionStepEntry {
    pub k: usize,
    pub projectable: SpanEntry,
    pub m_matrix: MMatrixEntry,
    pub delta_dim: usize,
    pub e_dim: usize,
    pub e_involutive: bool,
    pub nested: bool,
    pub d_in_e: bool,
    pub kernel_ok: bool,
    pub rank_m_reversed: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistributionSection {
    pub converged: bool,
    pub kbar: Option<usize>,
    pub flat: bool,
    pub dims: Vec<usize>,
    pub sequence: Vec<SpanEntry>,
    pub steps: Vec<DistributionStepEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodistributionStepEntry {
    pub k: usize,
    pub omega: Vec<String>,
    pub rho: Vec<String>,
    pub rank_rho: usize,
    pub p_plus: SpanEntry,
    pub p_next_dim: usize,
    pub integrable: bool,
    pub nested: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodistributionSection {
    pub converged: bool,
    pub kbar: Option<usize>,
    pub flat: bool,
    pub dims: Vec<usize>,
    pub sequence: Vec<SpanEntry>,
    pub steps: Vec<CodistributionStepEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DualityRowEntry {
    pub k: usize,
    pub dim_e: usize,
    pub dim_p: usize,
    pub annihilates: bool,
    pub dims_ok: bool,
    pub dim_d: usize,
    pub dim_d_perp: usize,
    pub d_annihilates: bool,
    pub d_dims_ok: bool,
    pub dbar: usize,
    pub rank_m: usize,
    pub formula_e: bool,
    pub formula_p: bool,
    pub formula_d: bool,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DualitySection {
    pub ok: bool,
    pub rows: Vec<DualityRowEntry>,
    pub violations: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChecksEntry {
    pub f2_free_of_u1: bool,
    pub normalized: bool,
    pub rank_f1_u1: usize,
    pub state_invertible: bool,
    pub input_invertible: bool,
    pub d0_matches: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EliminationEntry {
    pub original_inputs: Vec<String>,
    pub new_inputs: Vec<Assignment>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecompositionStepEntry {
    pub step: usize,
    pub states: Vec<String>,
    pub inputs: Vec<String>,
    pub integrals: Vec<String>,
    pub integral_method: String,
    /// `(dim x̄₂, dim x̄₁, dim ū₂, dim ū₁)`.
    pub dims: [usize; 4],
    pub state_transform: Vec<Assignment>,
    pub state_inverse: Vec<Assignment>,
    pub input_transform: Vec<Assignment>,
    pub input_inverse: Vec<Assignment>,
    /// 1-based indices of the normalized equations.
    pub normalized_equations: Vec<usize>,
    pub subsystem: Vec<Assignment>,
    pub feedback: Vec<Assignment>,
    pub checks: ChecksEntry,
    pub eliminated_inputs: Option<EliminationEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecompositionSection {
    pub complete: bool,
    pub blocking: Option<String>,
    pub steps: Vec<DecompositionStepEntry>,
}

/// Everything a run produces, in a stable field order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub system: SystemSection,
    pub chart: ChartSection,
    pub verdict: VerdictSection,
    pub distribution_test: Option<DistributionSection>,
    pub codistribution_test: Option<CodistributionSection>,
    pub duality: Option<DualitySection>,
    pub decomposition: Option<DecompositionSection>,
    pub warnings: Vec<String>,
}

fn names(vars: &[Var]) -> Vec<String> {
    vars.iter().map(|v| v.to_string()).collect()
}

fn assignments(vars: &[Var], exprs: &[Scalar]) -> Vec<Assignment> {
    vars.iter()
        .zip(exprs)
        .map(|(v, e)| Assignment {
            var: v.to_string(),
            expr: e.to_string(),
        })
        .collect()
}

fn matrix(rows: &[Vec<Scalar>]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| r.iter().map(|s| s.to_string()).collect())
        .collect()
}

fn dist_entry(name: String, d: &Distribution) -> SpanEntry {
    SpanEntry {
        name,
        dim: d.dim(),
        basis: d.basis().iter().map(|v| v.to_string()).collect(),
    }
}

fn codist_entry(name: String, p: &Codistribution) -> SpanEntry {
    SpanEntry {
        name,
        dim: p.dim(),
        basis: p.basis().iter().map(|w| w.to_string()).collect(),
    }
}

fn forms(ws: &[OneForm]) -> Vec<String> {
    ws.iter().map(|w| w.to_string()).collect()
}

fn stop_name(s: StopRule) -> &'static str {
    match s {
        StopRule::DimensionStall => "dimension stall",
        StopRule::CodistributionStall => "codistribution stall",
        StopRule::IterationLimit => "iteration limit",
    }
}

fn m_entry(m: &MMatrixReport, theta: &[Var]) -> MMatrixEntry {
    MMatrixEntry {
        dbar: m.dbar,
        rank_m: m.rank_m,
        theta_pivots: m.theta_pivots.iter().map(|&i| theta[i].to_string()).collect(),
        l: matrix(&m.l),
        m_rows: m.m.len(),
        m_hat: matrix(&m.mhat),
        kernel: matrix(&m.kernel),
    }
}

fn dist_section(run: &DistributionRun, theta: &[Var]) -> DistributionSection {
    DistributionSection {
        converged: run.converged(),
        kbar: run.kbar,
        flat: run.flat,
        dims: run.dims(),
        sequence: run
            .e
            .iter()
            .enumerate()
            .map(|(k, e)| dist_entry(format!("E_{k}"), e))
            .collect(),
        steps: run
            .steps
            .iter()
            .map(|st| DistributionStepEntry {
                k: st.k,
                projectable: dist_entry(format!("D_{}", st.k - 1), &st.projectable.original),
                m_matrix: m_entry(&st.projectable.mmatrix, theta),
                delta_dim: st.delta.dim(),
                e_dim: st.e.dim(),
                e_involutive: st.e_involutive,
                nested: st.nested,
                d_in_e: st.d_in_e,
                kernel_ok: st.kernel_ok,
                rank_m_reversed: st.rank_m_reversed,
            })
            .collect(),
    }
}

fn codist_section(run: &CodistributionRun) -> CodistributionSection {
    CodistributionSection {
        converged: run.converged(),
        kbar: run.kbar,
        flat: run.flat,
        dims: run.dims(),
        sequence: run
            .p
            .iter()
            .enumerate()
            .map(|(k, p)| codist_entry(format!("P_{}", k + 1), p))
            .collect(),
        steps: run
            .steps
            .iter()
            .map(|st| CodistributionStepEntry {
                k: st.k,
                omega: forms(&st.omega),
                rho: forms(&st.rho),
                rank_rho: st.rank_rho,
                p_plus: codist_entry(format!("P+_{}", st.k + 1), &st.pplus_original),
                p_next_dim: st.p_next.dim(),
                integrable: st.integrable,
                nested: st.nested,
            })
            .collect(),
    }
}

fn duality_section(d: &DualityReport) -> DualitySection {
    DualitySection {
        ok: d.ok,
        rows: d
            .rows
            .iter()
            .map(|r| DualityRowEntry {
                k: r.k,
                dim_e: r.dim_e,
                dim_p: r.dim_p,
                annihilates: r.annihilates,
                dims_ok: r.dims_ok,
                dim_d: r.dim_d,
                dim_d_perp: r.dim_dperp,
                d_annihilates: r.d_annihilates,
                d_dims_ok: r.d_dims_ok,
                dbar: r.dbar,
                rank_m: r.rank_m,
                formula_e: r.formula_e,
                formula_p: r.formula_p,
                formula_d: r.formula_d,
                ok: r.ok(),
            })
            .collect(),
        violations: d.violations.clone(),
    }
}

fn step_entry(i: usize, st: &TriangularDecomposition) -> DecompositionStepEntry {
    let p = st.dims.0;
    let x_plus: Vec<Var> = st.new_states.iter().map(|z| Var::new(&format!("{z}+"))).collect();
    DecompositionStepEntry {
        step: i + 1,
        states: names(&st.states),
        inputs: names(&st.inputs),
        integrals: st.integrals.functions.iter().map(|g| g.to_string()).collect(),
        integral_method: st.integrals.method.to_string(),
        dims: [st.dims.0, st.dims.1, st.dims.2, st.dims.3],
        state_transform: assignments(&st.new_states, &st.state_transform),
        state_inverse: assignments(&st.states, &st.state_inverse),
        input_transform: assignments(&st.new_inputs, &st.input_transform),
        input_inverse: assignments(&st.inputs, &st.input_inverse),
        normalized_equations: st.normalized_rows.iter().map(|i| i + 1).collect(),
        subsystem: assignments(&x_plus[..p], &st.subsystem_f2),
        feedback: assignments(&x_plus[p..], &st.feedback_f1),
        checks: ChecksEntry {
            f2_free_of_u1: st.checks.f2_free_of_u1,
            normalized: st.checks.normalized,
            rank_f1_u1: st.checks.rank_f1_u1,
            state_invertible: st.checks.state_invertible,
            input_invertible: st.checks.input_invertible,
            d0_matches: st.checks.d0_matches,
        },
        eliminated_inputs: st.subsystem.as_ref().and_then(|s| s.eliminated.as_ref()).map(|e| {
            EliminationEntry {
                original_inputs: names(&e.original_inputs),
                new_inputs: assignments(&e.new_inputs, &e.definitions),
            }
        }),
    }
}

fn cascade_section(c: &Cascade) -> DecompositionSection {
    DecompositionSection {
        complete: c.complete,
        blocking: c.blocking.clone(),
        steps: c.steps.iter().enumerate().map(|(i, s)| step_entry(i, s)).collect(),
    }
}

impl AnalysisReport {
    pub fn from_analysis(a: &Analysis) -> Self {
        let sys = &a.system;
        let all: Vec<Var> = sys.chart().vars().to_vec();
        let eq: Vec<Scalar> = all
            .iter()
            .map(|v| Scalar::from_rational(sys.equilibrium()[v].clone()))
            .collect();
        let ch = &a.chart;
        let status = if a.verdict.kbar.is_none() {
            "not converged"
        } else if a.verdict.flat {
            "flat"
        } else {
            "not flat"
        };
        AnalysisReport {
            system: SystemSection {
                name: sys.name().to_string(),
                states: names(sys.states()),
                inputs: names(sys.inputs()),
                dynamics: assignments(
                    &sys.states().iter().map(|x| Var::new(&format!("{x}+"))).collect::<Vec<_>>(),
                    sys.f(),
                ),
                equilibrium: assignments(&all, &eq),
            },
            chart: ChartSection {
                theta: names(ch.theta()),
                xi: ch
                    .xi()
                    .iter()
                    .zip(ch.h_vars())
                    .map(|(x, h)| Assignment {
                        var: x.to_string(),
                        expr: h.to_string(),
                    })
                    .collect(),
                rule: format!("{:?}", ch.rule()).to_lowercase(),
                inverse: assignments(&all, ch.inverse()),
            },
            verdict: VerdictSection {
                status: status.to_string(),
                flat: a.verdict.flat,
                kbar: a.verdict.kbar,
                stop_rule: stop_name(a.verdict.witness).to_string(),
                tests_agree: a.verdict.agree,
                max_iterations: a.max_iterations,
            },
            distribution_test: a.distribution.as_ref().map(|d| dist_section(d, ch.theta())),
            codistribution_test: a.codistribution.as_ref().map(codist_section),
            duality: a.verdict.duality.as_ref().map(duality_section),
            decomposition: a.cascade.as_ref().map(cascade_section),
            warnings: a.warnings.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        render_text(self)
    }
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn dims_text(d: &[usize]) -> String {
    let parts: Vec<String> = d.iter().map(|x| x.to_string()).collect();
    format!("({})", parts.join(", "))
}

fn write_assignments(out: &mut String, indent: &str, list: &[Assignment]) {
    for a in list {
        let _ = writeln!(out, "{indent}{} = {}", a.var, a.expr);
    }
}

fn write_span(out: &mut String, indent: &str, s: &SpanEntry) {
    let _ = writeln!(out, "{indent}{} (dim {}) = span{{{}}}", s.name, s.dim, s.basis.join(", "));
}

fn write_matrix(out: &mut String, indent: &str, name: &str, m: &[Vec<String>]) {
    if m.is_empty() {
        let _ = writeln!(out, "{indent}{name} = []");
        return;
    }
    let _ = writeln!(out, "{indent}{name} =");
    for row in m {
        let _ = writeln!(out, "{indent}  [{}]", row.join(", "));
    }
}

pub fn render_text(r: &AnalysisReport) -> String {
    let mut out = String::new();
    let s = &r.system;
    let _ = writeln!(out, "system {}: n = {}, m = {}", s.name, s.states.len(), s.inputs.len());
    let _ = writeln!(out, "  states: {}", s.states.join(", "));
    let _ = writeln!(out, "  inputs: {}", s.inputs.join(", "));
    write_assignments(&mut out, "  ", &s.dynamics);
    let eq: Vec<String> = s.equilibrium.iter().map(|a| format!("{} = {}", a.var, a.expr)).collect();
    let _ = writeln!(out, "  equilibrium: {}", eq.join(", "));

    let c = &r.chart;
    let xi: Vec<String> = c.xi.iter().map(|a| format!("{} = {}", a.var, a.expr)).collect();
    let _ = writeln!(out, "\nadapted chart: theta = f, {} ({} inversion)", xi.join(", "), c.rule);
    write_assignments(&mut out, "  ", &c.inverse);

    let v = &r.verdict;
    let _ = writeln!(out, "\nverdict: {}", v.status);
    let kbar = v.kbar.map(|k| k.to_string()).unwrap_or_else(|| "-".into());
    let _ = writeln!(
        out,
        "  kbar = {kbar}, stop rule: {}, tests agree: {}, max iterations: {}",
        v.stop_rule,
        yes(v.tests_agree),
        v.max_iterations
    );

    if let Some(d) = &r.distribution_test {
        let _ = writeln!(out, "\ndistribution test: dims E = {}, converged: {}", dims_text(&d.dims), yes(d.converged));
        for e in &d.sequence {
            write_span(&mut out, "  ", e);
        }
        for st in &d.steps {
            let m = &st.m_matrix;
            let _ = writeln!(
                out,
                "  step k = {}: dbar = {}, rank M = {} (reversed {}), dim Delta = {}, dim E_{} = {}",
                st.k, m.dbar, m.rank_m, st.rank_m_reversed, st.delta_dim, st.k, st.e_dim
            );
            let _ = writeln!(
                out,
                "    involutive: {}, nested: {}, D in E: {}, kernel ok: {}",
                yes(st.e_involutive),
                yes(st.nested),
                yes(st.d_in_e),
                yes(st.kernel_ok)
            );
            let _ = writeln!(out, "    theta pivots: {}, rows of M: {}", m.theta_pivots.join(", "), m.m_rows);
            write_matrix(&mut out, "    ", "L", &m.l);
            write_matrix(&mut out, "    ", "M^", &m.m_hat);
            write_matrix(&mut out, "    ", "ker M", &m.kernel);
            write_span(&mut out, "    ", &st.projectable);
        }
    }

    if let Some(cd) = &r.codistribution_test {
        let _ = writeln!(out, "\ncodistribution test: dims P = {}, converged: {}", dims_text(&cd.dims), yes(cd.converged));
        for p in &cd.sequence {
            write_span(&mut out, "  ", p);
        }
        for st in &cd.steps {
            let _ = writeln!(
                out,
                "  step k = {}: rank rho = {}, dim P_{} = {}, integrable: {}, nested: {}",
                st.k,
                st.rank_rho,
                st.k + 1,
                st.p_next_dim,
                yes(st.integrable),
                yes(st.nested)
            );
            let _ = writeln!(out, "    omega: [{}]", st.omega.join(", "));
            let _ = writeln!(out, "    rho: [{}]", st.rho.join(", "));
            write_span(&mut out, "    ", &st.p_plus);
        }
    }

    if let Some(du) = &r.duality {
        let _ = writeln!(out, "\nduality: {}", if du.ok { "all checks pass" } else { "violations found" });
        let _ = writeln!(out, "  k  dimE  dimP  E|P=0  sum  dimD  dimD+  D|D+=0  sum  dbar  rankM  formulas");
        for row in &du.rows {
            let _ = writeln!(
                out,
                "  {:<2} {:<5} {:<5} {:<6} {:<4} {:<5} {:<6} {:<7} {:<4} {:<5} {:<6} {}",
                row.k,
                row.dim_e,
                row.dim_p,
                yes(row.annihilates),
                yes(row.dims_ok),
                row.dim_d,
                row.dim_d_perp,
                yes(row.d_annihilates),
                yes(row.d_dims_ok),
                row.dbar,
                row.rank_m,
                yes(row.formula_e && row.formula_p && row.formula_d)
            );
        }
        for v in &du.violations {
            let _ = writeln!(out, "  violation: {v}");
        }
    }

    if let Some(dec) = &r.decomposition {
        let _ = writeln!(
            out,
            "\ndecomposition: {} step(s), complete: {}",
            dec.steps.len(),
            yes(dec.complete)
        );
        for st in &dec.steps {
            let _ = writeln!(
                out,
                "  step {}: dims (x2, x1, u2, u1) = {}, integrals by {}",
                st.step,
                dims_text(&st.dims),
                st.integral_method
            );
            let _ = writeln!(out, "    integrals: [{}]", st.integrals.join(", "));
            let _ = writeln!(out, "    state transformation:");
            write_assignments(&mut out, "      ", &st.state_transform);
            let _ = writeln!(out, "    input transformation:");
            write_assignments(&mut out, "      ", &st.input_transform);
            let _ = writeln!(out, "    subsystem:");
            write_assignments(&mut out, "      ", &st.subsystem);
            let _ = writeln!(out, "    feedback part:");
            write_assignments(&mut out, "      ", &st.feedback);
            let ck = &st.checks;
            let eqs: Vec<String> = st.normalized_equations.iter().map(|i| i.to_string()).collect();
            let _ = writeln!(
                out,
                "    normalized equations: [{}], f2 free of u1: {}, rank df1/du1 = {}, invertible: {}/{}, D0 = span(d/du1): {}",
                eqs.join(", "),
                yes(ck.f2_free_of_u1),
                ck.rank_f1_u1,
                yes(ck.state_invertible),
                yes(ck.input_invertible),
                yes(ck.d0_matches)
            );
            if let Some(el) = &st.eliminated_inputs {
                let _ = writeln!(out, "    redundant subsystem inputs {} replaced by:", el.original_inputs.join(", "));
                write_assignments(&mut out, "      ", &el.new_inputs);
            }
        }
        if let Some(b) = &dec.blocking {
            let _ = writeln!(out, "  stopped: {b}");
        }
    }

    if !r.warnings.is_empty() {
        let _ = writeln!(out, "\nwarnings:");
        for w in &r.warnings {
            let _ = writeln!(out, "  {w}");
        }
    }
    out
}
