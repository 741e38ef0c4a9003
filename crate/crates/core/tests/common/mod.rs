//! Systems shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use fflat::dtsystem::{AdaptedChartHint, DiscreteSystem};
use fflat::symexpr::{parse_scalar, Scalar, Var};
use fflat::sysfile::parse_system;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn s(src: &str) -> Scalar {
    parse_scalar(src).unwrap_or_else(|e| panic!("{src}: {e}"))
}

pub fn vars(names: &[&str]) -> Vec<Var> {
    names.iter().map(|n| Var::new(n)).collect()
}

pub fn system(name: &str, states: &[&str], inputs: &[&str], f: &[&str]) -> DiscreteSystem {
    DiscreteSystem::new(
        name,
        vars(states),
        vars(inputs),
        f.iter().map(|e| s(e)).collect(),
        BTreeMap::new(),
        AdaptedChartHint::default(),
    )
    .unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn fixture(file: &str) -> DiscreteSystem {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../systems").join(file);
    parse_system(&path).unwrap_or_else(|e| panic!("{file}: {e}"))
}

pub fn paper_example() -> DiscreteSystem {
    fixture("paper_example.sys")
}

/// A corpus entry together with what is known about it independently of
/// the tests: flatness and `k̄` are invariant under state transformations
/// and invertible static feedback.
pub struct Entry {
    pub system: DiscreteSystem,
    pub flat: bool,
    pub kbar: usize,
}

/// Triangular systems in `z`, `v` with known `k̄`.
fn bases() -> Vec<(&'static str, Vec<&'static str>, Vec<&'static str>, Vec<&'static str>, usize)> {
    vec![
        ("chain", vec!["z1", "z2"], vec!["v1"], vec!["z2", "v1"], 3),
        (
            "quadratic chain",
            vec!["z1", "z2", "z3"],
            vec!["v1"],
            vec!["z2 + z1^2", "z3", "v1"],
            4,
        ),
        (
            "two inputs",
            vec!["z1", "z2", "z3"],
            vec!["v1", "v2"],
            vec!["z1 + z2", "v1", "v2 + z1*z2"],
            3,
        ),
    ]
}

fn small(rng: &mut ChaCha8Rng) -> i64 {
    *[-2i64, -1, 1, 2, 3].choose(rng).unwrap()
}

/// A random invertible map in triangular form `z_i = a_i x_i + c_i x_j^e`
/// with `j < i`, quadratic in exactly one coordinate, returned as
/// `(z(x), x(z))`.
fn triangular_map(rng: &mut ChaCha8Rng, x: &[Var], z: &[Var]) -> (Vec<Scalar>, Vec<Scalar>) {
    let quadratic = rng.gen_range(1..x.len().max(2));
    let mut forward = Vec::new();
    let mut inverse: Vec<Scalar> = Vec::new();
    for i in 0..x.len() {
        let a = Scalar::from_int(small(rng));
        let mut zi = &a * &Scalar::var(&x[i]);
        let mut back = Scalar::var(&z[i]);
        if i > 0 {
            let j = rng.gen_range(0..i);
            let c = Scalar::from_int(small(rng));
            let e = if i == quadratic { 2 } else { 1 };
            let bump = &c * &Scalar::var(&x[j]).pow(e).unwrap();
            zi = &zi + &bump;
            // x_j in terms of z is already known
            let bump_z = bump.substitute(&BTreeMap::from([(x[j].clone(), inverse[j].clone())])).unwrap();
            back = &back - &bump_z;
        }
        forward.push(zi);
        inverse.push(back.checked_div(&a).unwrap());
    }
    (forward, inverse)
}

/// Composes a triangular base with a random state transformation and a
/// random invertible static feedback `v_j = (b_j u_j + q_j(x)) / (1 + x_k^2)`.
pub fn random_flat(rng: &mut ChaCha8Rng, which: usize) -> Entry {
    let (name, zs, vs, f, kbar) = bases().swap_remove(which % 3);
    let z = vars(&zs);
    let v = vars(&vs);
    let x: Vec<Var> = (1..=z.len()).map(|i| Var::new(&format!("x{i}"))).collect();
    let u: Vec<Var> = (1..=v.len()).map(|i| Var::new(&format!("u{i}"))).collect();
    let (z_of_x, x_of_z) = triangular_map(rng, &x, &z);
    let mut bind: BTreeMap<Var, Scalar> = z.iter().cloned().zip(z_of_x.iter().cloned()).collect();
    for (vj, uj) in v.iter().zip(&u) {
        let b = Scalar::from_int(small(rng));
        let q = &Scalar::from_int(small(rng)) * &Scalar::var(&x[rng.gen_range(0..x.len())]);
        let xk = Scalar::var(&x[rng.gen_range(0..x.len())]);
        let den = &Scalar::one() + &(&xk * &xk);
        let vx = (&(&b * &Scalar::var(uj)) + &q).checked_div(&den).unwrap();
        bind.insert(vj.clone(), vx);
    }
    // x⁺ = x(F(z(x), v(x, u)))
    let fz: Vec<Scalar> = f.iter().map(|e| s(e).substitute(&bind).unwrap()).collect();
    let zplus: BTreeMap<Var, Scalar> = z.iter().cloned().zip(fz).collect();
    let fx: Vec<Scalar> = x_of_z.iter().map(|g| g.substitute(&zplus).unwrap()).collect();
    let system = DiscreteSystem::new(
        format!("random {name} #{which}"),
        x,
        u,
        fx,
        BTreeMap::new(),
        AdaptedChartHint::default(),
    )
    .expect("transformed system is submersive");
    Entry { system, flat: true, kbar }
}

/// Fixtures plus `randomized` transformed triangular systems.
pub fn corpus(rng: &mut ChaCha8Rng, randomized: usize) -> Vec<Entry> {
    let mut out = vec![
        Entry { system: paper_example(), flat: true, kbar: 4 },
        Entry { system: fixture("one_step.sys"), flat: true, kbar: 2 },
        Entry { system: fixture("linear_chain2.sys"), flat: true, kbar: 3 },
        Entry { system: fixture("linear_chain3.sys"), flat: true, kbar: 4 },
        Entry { system: fixture("non_flat.sys"), flat: false, kbar: 1 },
    ];
    out.extend((0..randomized).map(|i| random_flat(rng, i)));
    out
}

/// Random polynomial of total degree at most 2 in `vars`.
pub fn random_poly(rng: &mut ChaCha8Rng, vars: &[Var]) -> Scalar {
    let mut acc = Scalar::zero();
    for _ in 0..rng.gen_range(1..=3) {
        let mut term = Scalar::from_int(rng.gen_range(-3..=3));
        for _ in 0..rng.gen_range(0..=2) {
            term = &term * &Scalar::var(vars.choose(rng).unwrap());
        }
        acc = &acc + &term;
    }
    acc
}

/// Random systems with `n ≤ 3`, `m ≤ 2` and degree ≤ 2 polynomial dynamics,
/// keeping only those that are submersive and admit an adapted chart.
pub fn random_small_systems(rng: &mut ChaCha8Rng, count: usize) -> (Vec<DiscreteSystem>, usize) {
    let mut out = Vec::new();
    let mut drawn = 0;
    while out.len() < count {
        drawn += 1;
        let n = rng.gen_range(1..=3);
        let m = rng.gen_range(1..=2);
        let x: Vec<Var> = (1..=n).map(|i| Var::new(&format!("x{i}"))).collect();
        let u: Vec<Var> = (1..=m).map(|i| Var::new(&format!("u{i}"))).collect();
        let all: Vec<Var> = x.iter().chain(&u).cloned().collect();
        let f: Vec<Scalar> = (0..n).map(|_| random_poly(rng, &all)).collect();
        let Ok(sys) = DiscreteSystem::new(
            format!("random #{drawn}"),
            x,
            u,
            f,
            BTreeMap::new(),
            AdaptedChartHint::default(),
        ) else {
            continue;
        };
        if sys.build_adapted_chart().is_ok() {
            out.push(sys);
        }
    }
    (out, drawn)
}
