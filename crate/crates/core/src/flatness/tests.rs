use std::collections::BTreeMap;

use super::*;
use crate::dtsystem::AdaptedChartHint;
use crate::geometry::Chart;
use crate::symexpr::{parse_scalar, Var};

fn s(src: &str) -> Scalar {
    parse_scalar(src).unwrap()
}

fn system(states: &[&str], inputs: &[&str], f: &[&str]) -> DiscreteSystem {
    DiscreteSystem::new(
        "test",
        states.iter().map(|n| Var::new(n)).collect(),
        inputs.iter().map(|n| Var::new(n)).collect(),
        f.iter().map(|e| s(e)).collect(),
        BTreeMap::new(),
        AdaptedChartHint::default(),
    )
    .unwrap()
}

fn example() -> DiscreteSystem {
    system(
        &["x1", "x2", "x3", "x4"],
        &["u1", "u2"],
        &[
            "(x2+x3+3x4)/(u1+2u2+1)",
            "x1(x3+1)(u1+2u2-3)+x4-3u2",
            "u1+2u2",
            "x1(x3+1)+u2",
        ],
    )
}

fn field(chart: &Chart, cs: &[&str]) -> VectorField {
    VectorField::new(chart, cs.iter().map(|c| s(c)).collect()).unwrap()
}

fn form(chart: &Chart, cs: &[&str]) -> OneForm {
    OneForm::new(chart, cs.iter().map(|c| s(c)).collect()).unwrap()
}

#[test]
fn normalization_examples() {
    let c = Chart::from_names(&["th1", "th2", "xi1"]).unwrap();
    let d = Distribution::coordinate(&c, [2]);
    let nb = normalize_distribution_basis(&d, 2);
    assert_eq!(nb.dbar, 0);
    let d = Distribution::span(&c, vec![field(&c, &["1", "1", "0"]), field(&c, &["0", "1", "0"])]).unwrap();
    let nb = normalize_distribution_basis(&d, 2);
    assert_eq!(nb.dbar, 2);
    assert_eq!(nb.fields[0], VectorField::coordinate(&c, 0));
    assert_eq!(nb.fields[1], VectorField::coordinate(&c, 1));
}

#[test]
fn example_m_matrix() {
    let sys = example();
    let ch = sys.build_adapted_chart().unwrap();
    let proj = largest_projectable_subdistribution(&sys.input_distribution(), &ch).unwrap();
    let mm = &proj.mmatrix;
    assert_eq!(mm.dbar, 2);
    assert_eq!(mm.rank_m, 1);
    assert_eq!(
        mm.mhat,
        vec![
            vec![s("-(xi2+1)(th3+1)/(3th1)"), s("0")],
            vec![s("-xi1(th3+1)/(3th1)"), s("0")],
        ]
    );
    assert!(mm.kernel_annihilates());
    assert!(mm.kernel_is_xi_free(ch.xi()));
    let c = sys.chart();
    let d0 = Distribution::span(c, vec![field(c, &["0", "0", "0", "0", "-2", "1"])]).unwrap();
    assert!(proj.original.same_span(&d0).unwrap());
    let a = ch.adapted();
    let d0a = Distribution::span(a, vec![field(a, &["0", "-3", "0", "1", "0", "0"])]).unwrap();
    assert!(proj.adapted.same_span(&d0a).unwrap());
}

#[test]
fn projectable_is_unchanged() {
    let sys = example();
    let ch = sys.build_adapted_chart().unwrap();
    let c = sys.chart();
    let e1 = Distribution::span(
        c,
        vec![
            field(c, &["0", "-3", "0", "1", "0", "0"]),
            VectorField::coordinate(c, 4),
            VectorField::coordinate(c, 5),
        ],
    )
    .unwrap();
    let proj = largest_projectable_subdistribution(&e1, &ch).unwrap();
    assert_eq!(proj.mmatrix.rank_m, 0);
    assert!(proj.original.same_span(&e1).unwrap());
}

#[test]
fn example_distribution_test() {
    let sys = example();
    let ch = sys.build_adapted_chart().unwrap();
    let run = run_distribution_test(&sys, &ch, 7).unwrap();
    assert_eq!(run.dims(), vec![2, 3, 5, 6]);
    assert_eq!(run.kbar, Some(4));
    assert!(run.flat);
    let c = sys.chart();
    let e2 = Distribution::span(
        c,
        vec![
            field(c, &["1", "0", "-(x3+1)/x1", "0", "0", "0"]),
            VectorField::coordinate(c, 1),
            VectorField::coordinate(c, 3),
            VectorField::coordinate(c, 4),
            VectorField::coordinate(c, 5),
        ],
    )
    .unwrap();
    assert!(run.e[2].same_span(&e2).unwrap());
    assert!(run.steps[1].projectable.original.same_span(&run.e[1]).unwrap());
    assert!(run.steps[2].projectable.original.same_span(&run.e[2]).unwrap());
    for st in &run.steps {
        assert!(st.e_involutive && st.nested && st.d_in_e && st.kernel_ok);
        assert_eq!(st.rank_m_reversed, st.projectable.mmatrix.rank_m);
    }
}

#[test]
fn example_codistribution_test() {
    let sys = example();
    let ch = sys.build_adapted_chart().unwrap();
    let run = run_codistribution_test(&sys, &ch, 7).unwrap();
    assert_eq!(run.dims(), vec![4, 3, 1, 0]);
    assert_eq!(run.kbar, Some(4));
    assert!(run.flat);
    let a = ch.adapted();
    let first = &run.steps[0];
    assert!(first
        .rho_span
        .same_span(&Codistribution::coordinate(a, [0]))
        .unwrap());
    assert_eq!(first.omega.len(), 2);
    let c = sys.chart();
    let p3 = Codistribution::span(c, vec![form(c, &["(x3+1)/x1", "0", "1", "0", "0", "0"])]).unwrap();
    assert!(run.p[2].same_span(&p3).unwrap());
    let sum = first.pplus_original.sum(&run.p[0]).unwrap();
    let mut gens: Vec<OneForm> = (0..4).map(|i| OneForm::coordinate(c, i)).collect();
    gens.push(form(c, &["0", "0", "0", "0", "1", "2"]));
    assert!(sum.same_span(&Codistribution::span(c, gens).unwrap()).unwrap());
    for st in &run.steps {
        assert!(st.integrable && st.nested);
    }
}

#[test]
fn example_duality() {
    let sys = example();
    let ch = sys.build_adapted_chart().unwrap();
    let d = run_distribution_test(&sys, &ch, 7).unwrap();
    let c = run_codistribution_test(&sys, &ch, 7).unwrap();
    let rep = verify_duality(&sys, &d, &c);
    assert!(rep.ok, "{:?}", rep.violations);
    assert_eq!(rep.rows.len(), 4);
    assert_eq!(rep.rows[0].dim_d + rep.rows[0].dim_dperp, 6);
}

#[test]
fn one_step_linear() {
    let sys = system(&["x"], &["u"], &["x+u"]);
    let ch = sys.build_adapted_chart().unwrap();
    let d = run_distribution_test(&sys, &ch, 3).unwrap();
    assert_eq!(d.e[1].dim(), 2);
    assert!(d.flat);
    let c = run_codistribution_test(&sys, &ch, 3).unwrap();
    assert_eq!(c.p[1].dim(), 0);
    assert!(c.flat);
    assert_eq!(d.kbar, c.kbar);
}

#[test]
fn non_flat_fixture() {
    let sys = system(&["x1", "x2"], &["u"], &["u", "x1+x2*u"]);
    let ch = sys.build_adapted_chart().unwrap();
    let d = run_distribution_test(&sys, &ch, 4).unwrap();
    assert_eq!(d.steps[0].projectable.original.dim(), 0);
    assert_eq!(d.steps[0].projectable.mmatrix.rank_m, 1);
    assert_eq!(d.e[1].dim(), 1);
    assert_eq!(d.kbar, Some(1));
    assert!(!d.flat);
    let c = run_codistribution_test(&sys, &ch, 4).unwrap();
    assert_eq!(c.p[1].dim(), 2);
    assert_eq!(c.kbar, Some(1));
    assert!(!c.flat);
    let rep = verify_duality(&sys, &d, &c);
    assert!(rep.ok, "{:?}", rep.violations);
}

#[test]
fn iteration_limit() {
    let sys = example();
    let ch = sys.build_adapted_chart().unwrap();
    let d = run_distribution_test(&sys, &ch, 1).unwrap();
    assert_eq!(d.kbar, None);
    assert_eq!(d.stop, StopRule::IterationLimit);
}
