use std::collections::BTreeMap;

use super::*;
use crate::flatness::{run_codistribution_test, run_distribution_test};
use crate::geometry::{Codistribution, OneForm};
use crate::symexpr::parse_scalar;

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

fn sorted(v: &[Scalar]) -> Vec<String> {
    let mut out: Vec<String> = v.iter().map(|g| g.to_string()).collect();
    out.sort();
    out
}

fn codist_dims(sys: &DiscreteSystem) -> (Vec<usize>, Option<usize>) {
    let ch = sys.build_adapted_chart().unwrap();
    let run = run_codistribution_test(sys, &ch, sys.n() + sys.m() + 1).unwrap();
    (run.dims(), run.kbar)
}

#[test]
fn antiderivatives() {
    let x = Var::new("x");
    assert_eq!(antiderivative(&s("3x^2 + y"), &x).unwrap(), s("x^3 + x*y"));
    assert_eq!(antiderivative(&s("x/(y+1)"), &x).unwrap(), s("x^2/(2y+2)"));
    assert!(antiderivative(&s("1/x"), &x).is_none());
}

#[test]
fn integrals_of_example_p2() {
    let sys = example();
    let c = sys.chart();
    let p2 = Codistribution::span(
        c,
        vec![
            OneForm::coordinate(c, 0),
            OneForm::coordinate(c, 2),
            OneForm::new(c, vec![s("0"), s("1"), s("0"), s("3"), s("0"), s("0")]).unwrap(),
        ],
    )
    .unwrap();
    let set = find_first_integrals(&p2, sys.states(), None).unwrap();
    assert_eq!(sorted(&set.functions), sorted(&[s("x1"), s("x3"), s("x2+3x4")]));
    assert_eq!(set.method, IntegralMethod::ConstantCombination);

    let p = Codistribution::coordinate(c, [0]);
    let set = find_first_integrals(&p, sys.states(), None).unwrap();
    assert_eq!(set.functions, vec![s("x1")]);
    assert_eq!(set.method, IntegralMethod::CoordinatePick);
}

#[test]
fn integrating_factor_for_p3() {
    let sys = example();
    let c = sys.chart();
    let w3 = OneForm::new(c, vec![s("(x3+1)/x1"), s("0"), s("1"), s("0"), s("0"), s("0")]).unwrap();
    let p3 = Codistribution::span(c, vec![w3.clone()]).unwrap();
    let set = find_first_integrals(&p3, sys.states(), None).unwrap();
    assert_eq!(set.functions, vec![s("x1(x3+1)")]);
    assert_eq!(set.method, IntegralMethod::IntegratingFactor);
    // d(x1(x3+1)) = x1·ω₃
    assert_eq!(OneForm::differential(c, &set.functions[0]), w3.scale(&s("x1")));
}

#[test]
fn exact_forms_and_failures() {
    let sys = example();
    let c = sys.chart();
    let w = OneForm::new(c, vec![s("x2"), s("x1"), s("0"), s("0"), s("0"), s("0")]).unwrap();
    let set = find_first_integrals(&Codistribution::span(c, vec![w]).unwrap(), sys.states(), None).unwrap();
    assert_eq!(sorted(&set.functions), vec![s("x1*x2").to_string()]);

    let contact = OneForm::new(c, vec![s("-x2"), s("0"), s("1"), s("0"), s("0"), s("0")]).unwrap();
    let p = Codistribution::span(c, vec![contact]).unwrap();
    assert_eq!(find_first_integrals(&p, sys.states(), None), Err(DecomposeError::NotIntegrable));

    let with_input = Codistribution::coordinate(c, [4]);
    assert_eq!(
        find_first_integrals(&with_input, sys.states(), None),
        Err(DecomposeError::NotStateOnly)
    );
}

#[test]
fn integrals_hint() {
    let sys = example();
    let c = sys.chart();
    let w3 = OneForm::new(c, vec![s("(x3+1)/x1"), s("0"), s("1"), s("0"), s("0"), s("0")]).unwrap();
    let p3 = Codistribution::span(c, vec![w3]).unwrap();
    let hint = [s("x1*x3 + x1")];
    let set = find_first_integrals(&p3, sys.states(), Some(&hint)).unwrap();
    assert_eq!(set.method, IntegralMethod::UserHint);
    let bad = [s("x1")];
    assert!(matches!(
        find_first_integrals(&p3, sys.states(), Some(&bad)),
        Err(DecomposeError::HintInvalid(_))
    ));
}

#[test]
fn example_step() {
    let sys = example();
    let step = decompose_step(&sys, None).unwrap();
    assert_eq!(step.dims, (3, 1, 1, 1));
    assert_eq!(
        sorted(&step.state_transform[..3]),
        sorted(&[s("x1"), s("x3"), s("x2+3x4")])
    );
    assert_eq!(step.state_transform[3], s("x2"));
    assert_eq!(step.input_transform, vec![s("(x2+x3+3x4)/(u1+2u2+1)"), s("u1")]);
    assert_eq!(step.normalized_rows, vec![0]);
    let c = &step.checks;
    assert!(c.normalized && c.f2_free_of_u1 && c.state_invertible && c.input_invertible && c.d0_matches);
    assert_eq!(c.rank_f1_u1, 1);
    assert_eq!(step.subsystem_f2[0], Scalar::var(&step.new_inputs[0]));

    let sub = step.subsystem.as_ref().unwrap();
    assert!(sub.eliminated.is_none());
    assert_eq!((sub.system.n(), sub.system.m()), (3, 2));
    let (dims, kbar) = codist_dims(&sub.system);
    assert_eq!(dims, vec![3, 1, 0]);
    assert_eq!(kbar, Some(3));
    let ch = sub.system.build_adapted_chart().unwrap();
    let d = run_distribution_test(&sub.system, &ch, 6).unwrap();
    assert_eq!(d.dims(), vec![2, 4, 5]);
}

#[test]
fn prop9_converse_after_reparameterization() {
    // D₀ = span{∂ū₁} survives an invertible change of ū₂; normalizing with
    // ũ₂ = f₂ then restores the form x̄₂^{i₂,+} = ũ₂
    let step = decompose_step(&example(), None).unwrap();
    let t = &step.transformed;
    let z = t.states().to_vec();
    let v = t.inputs().to_vec();
    for repar in ["2w1 + z1", "(1+z1^2)*w1 + z3", "-w1/3 + z2*z4"] {
        let map = BTreeMap::from([(v[0].clone(), s(repar))]);
        let f: Vec<Scalar> = t.f().iter().map(|g| g.substitute(&map).unwrap()).collect();
        let sys = DiscreteSystem::new_generic(
            "repar",
            z.clone(),
            vec![Var::new("w1"), v[1].clone()],
            f.clone(),
            BTreeMap::new(),
            AdaptedChartHint::default(),
        )
        .unwrap();
        let ch = sys.build_adapted_chart().unwrap();
        let d0 = largest_projectable_subdistribution(&sys.input_distribution(), &ch).unwrap();
        assert!(d0
            .original
            .same_span(&Distribution::coordinate(sys.chart(), [5]))
            .unwrap());
        assert!(!f[0].depends_on(&v[1]));
        let back = solve_triangular(&[(f[0].clone(), s("nu"))], &[Var::new("w1")]).unwrap();
        assert_eq!(f[0].substitute(&back).unwrap(), s("nu"));
    }
}

#[test]
fn example_cascade() {
    let sys = example();
    let cascade = decompose_cascade(&sys, None);
    assert!(cascade.complete, "{:?}", cascade.blocking);
    assert_eq!(cascade.steps.len(), 3);
    let dims: Vec<usize> = cascade.steps.iter().map(|s| s.dims.0).collect();
    assert_eq!(dims, vec![3, 1, 0]);
    // each subsystem sees the tail of the parent's P-sequence
    let (parent, _) = codist_dims(&sys);
    for (i, st) in cascade.steps.iter().enumerate() {
        if let Some(sub) = &st.subsystem {
            assert_eq!(codist_dims(&sub.system).0, parent[i + 1..].to_vec());
        }
        assert!(st.checks.d0_matches);
    }
}

#[test]
fn one_step_flat() {
    let sys = system(&["x"], &["u"], &["x+u"]);
    let cascade = decompose_cascade(&sys, None);
    assert!(cascade.complete);
    assert_eq!(cascade.steps.len(), 1);
    let st = &cascade.steps[0];
    assert_eq!(st.dims, (0, 1, 0, 1));
    assert_eq!(st.input_transform, vec![s("u")]);
    assert!(st.subsystem.is_none());
}

#[test]
fn linear_chain() {
    let sys = system(&["x1", "x2"], &["u"], &["x2", "u"]);
    let cascade = decompose_cascade(&sys, None);
    assert!(cascade.complete);
    assert_eq!(cascade.steps.len(), 2);
    let st = &cascade.steps[0];
    assert_eq!(st.integrals.functions, vec![s("x1")]);
    assert_eq!(st.state_transform, vec![s("x1"), s("x2")]);
    assert_eq!(st.dims, (1, 1, 0, 1));
    let sub = &st.subsystem.as_ref().unwrap().system;
    assert_eq!(sub.f(), &[s("z2")][..]);
    assert_eq!(sub.inputs(), &[Var::new("z2")][..]);
}

#[test]
fn redundant_inputs_are_eliminated() {
    // x̄₁ = (x2, x3) enter the subsystem only through x2 + x3
    let sys = system(&["x1", "x2", "x3"], &["u1", "u2"], &["x2+x3", "u1", "u2"]);
    let step = decompose_step(&sys, None).unwrap();
    assert_eq!(step.dims, (1, 2, 0, 2));
    let sub = step.subsystem.unwrap();
    let el = sub.eliminated.unwrap();
    assert_eq!(el.original_inputs.len(), 2);
    assert_eq!(el.new_inputs.len(), 1);
    assert_eq!(sub.system.m(), 1);
    assert_eq!(sub.system.f(), &[Scalar::var(&el.new_inputs[0])][..]);
}

#[test]
fn rejected_systems() {
    let sys = system(&["x1", "x2"], &["u"], &["u", "x1+x2*u"]);
    assert!(matches!(decompose_step(&sys, None), Err(DecomposeError::NotFlat)));
    let sys = system(&["x1", "x2"], &["u1", "u2"], &["u1+u2", "x1"]);
    assert_eq!(
        decompose_step(&sys, None).unwrap_err(),
        DecomposeError::InputRankDeficient { rank: 1, m: 2 }
    );
    let cascade = decompose_cascade(&sys, None);
    assert!(!cascade.complete && cascade.steps.is_empty());
    assert!(cascade.blocking.unwrap().contains("rank"));
}
