use super::*;
use crate::symexpr::parse_scalar;

fn s(src: &str) -> Scalar {
    parse_scalar(src).unwrap()
}

fn vars(names: &[&str]) -> Vec<Var> {
    names.iter().map(|n| Var::new(n)).collect()
}

fn system(states: &[&str], inputs: &[&str], f: &[&str], hint: AdaptedChartHint) -> Result<DiscreteSystem, SystemError> {
    DiscreteSystem::new(
        "test",
        vars(states),
        vars(inputs),
        f.iter().map(|e| s(e)).collect(),
        BTreeMap::new(),
        hint,
    )
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
        AdaptedChartHint::default(),
    )
    .unwrap()
}

fn field(chart: &Chart, cs: &[&str]) -> VectorField {
    VectorField::new(chart, cs.iter().map(|c| s(c)).collect()).unwrap()
}

fn form(chart: &Chart, cs: &[&str]) -> OneForm {
    OneForm::new(chart, cs.iter().map(|c| s(c)).collect()).unwrap()
}

#[test]
fn submersivity() {
    assert!(example().check_submersive());
    assert!(system(&["x"], &["u"], &["x"], Default::default()).unwrap().check_submersive());
    let c = Chart::from_names(&["x1", "x2", "x3", "u1", "u2"]).unwrap();
    assert!(!check_submersive(&[s("u1"), s("u2"), s("u1*u2")], &c));
    assert!(matches!(
        system(&["x1", "x2", "x3"], &["u1", "u2"], &["u1", "u2", "u1*u2"], Default::default()),
        Err(SystemError::NotSubmersive { rank: 2, n: 3 })
    ));
}

#[test]
fn submersivity_survives_input_transform() {
    let sys = example();
    let map = BTreeMap::from([(Var::new("u1"), s("u1+u2"))]);
    let f: Vec<Scalar> = sys.f().iter().map(|g| g.substitute(&map).unwrap()).collect();
    assert!(check_submersive(&f, sys.chart()));
}

#[test]
fn equilibrium_is_enforced() {
    assert!(matches!(
        system(&["x"], &["u"], &["x+u+1"], Default::default()),
        Err(SystemError::EquilibriumMismatch { .. })
    ));
}

#[test]
fn example_chart_matches_paper() {
    let sys = example();
    let ch = sys.build_adapted_chart().unwrap();
    assert_eq!(ch.h_vars(), &vars(&["x1", "x3"])[..]);
    assert_eq!(ch.rule(), InversionRule::Strict);
    assert_eq!(ch.inverse_of(&Var::new("u2")).unwrap(), &s("th4 - xi1*(xi2+1)"));
    assert_eq!(
        ch.inverse_of(&Var::new("u1")).unwrap(),
        &s("th3 - 2*(th4 - xi1*(xi2+1))")
    );
    // round trip through the forward definitions
    for (z, g) in sys.chart().vars().iter().zip(ch.inverse()) {
        assert_eq!(ch.scalar_from_adapted(g).unwrap(), Scalar::var(z));
    }
}

#[test]
fn scalar_charts() {
    let sys = system(&["x"], &["u"], &["u"], Default::default()).unwrap();
    let ch = sys.build_adapted_chart().unwrap();
    assert_eq!(ch.h_vars(), &vars(&["x"])[..]);
    assert_eq!(ch.inverse_of(&Var::new("u")).unwrap(), &s("th1"));

    let hint = AdaptedChartHint {
        xi: Some(vars(&["x2"])),
        inverse: None,
    };
    let sys = system(&["x1", "x2"], &["u"], &["u", "x1+x2*u"], hint).unwrap();
    let ch = sys.build_adapted_chart().unwrap();
    assert_eq!(ch.inverse_of(&Var::new("x1")).unwrap(), &s("th2 - xi1*th1"));
    assert_eq!(ch.inverse_of(&Var::new("u")).unwrap(), &s("th1"));
}

#[test]
fn inverse_hint_is_verified() {
    let good = AdaptedChartHint {
        xi: Some(vars(&["x2"])),
        inverse: Some(vec![(Var::new("x1"), s("th2 - xi1*th1")), (Var::new("u"), s("th1"))]),
    };
    let sys = system(&["x1", "x2"], &["u"], &["u", "x1+x2*u"], good).unwrap();
    assert_eq!(sys.build_adapted_chart().unwrap().rule(), InversionRule::Hint);
    let bad = AdaptedChartHint {
        xi: Some(vars(&["x2"])),
        inverse: Some(vec![(Var::new("x1"), s("th2")), (Var::new("u"), s("th1"))]),
    };
    let sys = system(&["x1", "x2"], &["u"], &["u", "x1+x2*u"], bad).unwrap();
    assert!(matches!(sys.build_adapted_chart(), Err(SystemError::HintInvalid(_))));
}

#[test]
fn example_objects_in_adapted_chart() {
    let sys = example();
    let ch = sys.build_adapted_chart().unwrap();
    let a = ch.adapted();
    let e0 = ch.distribution_to_adapted(&sys.input_distribution()).unwrap();
    let paper = Distribution::span(
        a,
        vec![
            field(a, &["1", "0", "-(th3+1)/th1", "-xi1*(xi2+1)*(th3+1)/(3*th1)", "0", "0"]),
            field(a, &["0", "1", "0", "-1/3", "0", "0"]),
        ],
    )
    .unwrap();
    assert!(e0.same_span(&paper).unwrap());
    // the reduced basis is exactly the normalized one
    assert_eq!(e0.basis(), paper.basis());

    let p1 = ch.codistribution_to_adapted(&sys.state_codistribution()).unwrap();
    let paper = Codistribution::span(
        a,
        vec![
            form(a, &["(th3+1)/th1", "0", "1", "0", "0", "0"]),
            form(a, &["xi1*(xi2+1)*(th3+1)/(3*th1)", "1/3", "0", "1", "0", "0"]),
            form(a, &["0", "0", "0", "0", "1", "0"]),
            form(a, &["0", "0", "0", "0", "0", "1"]),
        ],
    )
    .unwrap();
    assert!(p1.same_span(&paper).unwrap());

    let back = ch.distribution_from_adapted(&e0).unwrap();
    assert!(back.same_span(&sys.input_distribution()).unwrap());
    let back = ch.codistribution_from_adapted(&p1).unwrap();
    assert!(back.same_span(&sys.state_codistribution()).unwrap());
}

#[test]
fn pushforward_and_pullback() {
    let sys = example();
    let ch = sys.build_adapted_chart().unwrap();
    let a = ch.adapted();
    let d0 = field(a, &["0", "-3", "0", "1", "0", "0"]);
    let pushed = ch.pushforward_projectable(&d0).unwrap();
    assert_eq!(pushed.coeffs(), &[s("0"), s("-3"), s("0"), s("1")][..]);
    assert_eq!(pushed.chart().vars(), &vars(&["xp1", "xp2", "xp3", "xp4"])[..]);
    assert!(ch.pushforward_projectable(&VectorField::coordinate(a, 4)).unwrap().is_zero());
    let bad = field(a, &["1", "0", "-(th3+1)/th1", "-xi1*(xi2+1)*(th3+1)/(3*th1)", "0", "0"]);
    assert_eq!(ch.pushforward_projectable(&bad), Err(SystemError::NotProjectable));

    let delta = Distribution::span(ch.plus(), vec![pushed]).unwrap();
    let e1 = pullback_pi(&delta, &sys, ch.plus()).unwrap();
    let c = sys.chart();
    let paper = Distribution::span(
        c,
        vec![
            field(c, &["0", "-3", "0", "1", "0", "0"]),
            VectorField::coordinate(c, 4),
            VectorField::coordinate(c, 5),
        ],
    )
    .unwrap();
    assert!(e1.same_span(&paper).unwrap());
    let e0 = pullback_pi(&Distribution::zero(ch.plus()), &sys, ch.plus()).unwrap();
    assert!(e0.same_span(&sys.input_distribution()).unwrap());
    let e3 = pullback_pi(&Distribution::full(ch.plus()), &sys, ch.plus()).unwrap();
    assert_eq!(e3.dim(), 6);
}

#[test]
fn backward_shift() {
    let sys = example();
    let ch = sys.build_adapted_chart().unwrap();
    let a = ch.adapted();
    let p2p = Codistribution::span(
        a,
        vec![
            OneForm::coordinate(a, 0),
            OneForm::coordinate(a, 2),
            form(a, &["0", "1", "0", "3", "0", "0"]),
        ],
    )
    .unwrap();
    let p2 = ch.backward_shift_codistribution(&p2p).unwrap();
    let c = sys.chart();
    let paper = Codistribution::span(
        c,
        vec![
            OneForm::coordinate(c, 0),
            OneForm::coordinate(c, 2),
            form(c, &["0", "1", "0", "3", "0", "0"]),
        ],
    )
    .unwrap();
    assert!(p2.same_span(&paper).unwrap());
    assert_eq!(ch.backward_shift_codistribution(&Codistribution::zero(a)).unwrap().dim(), 0);
    let bad = Codistribution::span(a, vec![form(a, &["1", "xi1", "0", "0", "0", "0"])]).unwrap();
    assert!(matches!(ch.backward_shift_codistribution(&bad), Err(SystemError::NotShiftable)));

    // shifting forward lands back inside P⁺
    for w in p2.basis() {
        let mut acc = OneForm::zero(c);
        for (i, coeff) in w.coeffs()[..4].iter().enumerate() {
            if coeff.is_zero() {
                continue;
            }
            let shifted = sys.forward_shift(coeff).unwrap();
            acc = acc.add(&OneForm::differential(c, &sys.f()[i]).scale(&shifted)).unwrap();
        }
        let in_adapted = ch.form_to_adapted(&acc).unwrap();
        assert!(p2p.contains(&in_adapted).unwrap());
    }
}

#[test]
fn forward_shift_examples() {
    let sys = example();
    assert_eq!(sys.forward_shift(&s("x3")).unwrap(), s("u1+2u2"));
    assert_eq!(sys.forward_shift(&s("7/2")).unwrap(), s("7/2"));
    let f = sys.f();
    let expected = &f[0] * &(&f[2] + &Scalar::one());
    assert_eq!(sys.forward_shift(&s("x1(x3+1)")).unwrap(), expected);
    assert_eq!(sys.forward_shift(&s("u1")), Err(SystemError::UnsupportedShift));
}

#[test]
fn fresh_names_avoid_collisions() {
    let (th, xi, xp) = chart_names(&vars(&["th1", "x"]), &vars(&["u"]));
    assert_eq!(th, vars(&["thq1", "thq2"]));
    assert_eq!(xi, vars(&["xi1"]));
    assert_eq!(xp, vars(&["xp1", "xp2"]));
}
