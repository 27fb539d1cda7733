//! Brute-force oracles that enumerate outcomes directly instead of going
//! through the library's conditional-expectation code.
#![allow(dead_code)]

use forge_core::fixtures::Fixture;
use forge_core::scalar::Scalar;
use forge_core::space::build_initial_enlargement;
use forge_core::{Filtration, Partition, Process, Rational, SampleSpace};

pub fn q(n: i64, d: i64) -> Rational {
    Rational::from_frac(n, d)
}

pub fn scenarios_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

/// `E[g | atom of part containing o]` by summing over the atom.
pub fn mean_on_atom(space: &SampleSpace<Rational>, part: &Partition, o: usize, g: impl Fn(usize) -> Rational) -> Rational {
    let atom = part.atom(part.atom_of(o));
    let mass: Rational = atom.iter().map(|&w| space.weight(w).clone()).sum();
    let total: Rational = atom.iter().map(|&w| space.weight(w).clone() * g(w)).sum();
    total / mass
}

/// Component `c` of the increment at `t`.
pub fn inc(x: &Process<Rational>, o: usize, t: usize, c: usize) -> Rational {
    x.at(o, t)[c].clone() - x.at(o, t - 1)[c].clone()
}

/// Every component satisfies `E[ΔX_t | part_{t-1}] = 0`.
pub fn is_martingale_brute(x: &Process<Rational>, f: &Filtration, space: &SampleSpace<Rational>) -> bool {
    (1..=x.horizon()).all(|t| {
        (0..x.outcomes())
            .all(|o| (0..x.dim()).all(|c| mean_on_atom(space, f.at(t - 1), o, |w| inc(x, w, t, c)) == Rational::from_int(0)))
    })
}

/// `Σ_{s<=t} E[ΔA_s | part_{s-1}]`, scalar.
pub fn compensator_brute(a: &Process<Rational>, f: &Filtration, space: &SampleSpace<Rational>) -> Process<Rational> {
    let mut out: Process<Rational> = Process::zeros(a.outcomes(), a.horizon(), a.dim());
    for o in 0..a.outcomes() {
        for t in 1..=a.horizon() {
            let v: Vec<Rational> = (0..a.dim())
                .map(|c| out.at(o, t - 1)[c].clone() + mean_on_atom(space, f.at(t - 1), o, |w| inc(a, w, t, c)))
                .collect();
            out.set(o, t, v);
        }
    }
    out
}

/// `Σ ΔX ΔY` for scalar processes.
pub fn bracket_brute(x: &Process<Rational>, y: &Process<Rational>) -> Process<Rational> {
    Process::scalar_from_fn(x.outcomes(), x.horizon(), |o, t| (1..=t).map(|s| inc(x, o, s, 0) * inc(y, o, s, 0)).sum())
}

/// `Σ H_s ΔX_s` for scalar processes.
pub fn integral_brute(h: &Process<Rational>, x: &Process<Rational>) -> Process<Rational> {
    Process::scalar_from_fn(x.outcomes(), x.horizon(), |o, t| (1..=t).map(|s| h.value(o, s).clone() * inc(x, o, s, 0)).sum())
}

/// `Π (1 + ΔX_s)` for a scalar process.
pub fn stoch_exp_brute(x: &Process<Rational>) -> Process<Rational> {
    Process::scalar_from_fn(x.outcomes(), x.horizon(), |o, t| {
        (1..=t).fold(Rational::from_int(1), |acc, s| acc * (Rational::from_int(1) + inc(x, o, s, 0)))
    })
}

/// The fixture crossed with an independent noise bit (`P(bit = 1) = p1`);
/// `F` ignores the bit and `G` is the initial enlargement by it.
pub fn with_noise(fx: &Fixture<Rational>, p1: Rational) -> Fixture<Rational> {
    let n = fx.space.len();
    let mut labels = Vec::with_capacity(2 * n);
    let mut weights = Vec::with_capacity(2 * n);
    for o in 0..n {
        for (bit, p) in [('0', Rational::from_int(1) - p1.clone()), ('1', p1.clone())] {
            labels.push(format!("{}{bit}", fx.space.label(o)));
            weights.push(fx.space.weight(o).clone() * p);
        }
    }
    let lift = |p: &Partition| {
        Partition::new(2 * n, p.atoms().iter().map(|a| a.iter().flat_map(|&o| [2 * o, 2 * o + 1]).collect()).collect())
            .expect("lifted partition")
    };
    let f = Filtration::new(fx.filtration.partitions().iter().map(lift).collect()).expect("lifted filtration");
    let lift_proc = |p: &Process<Rational>| Process::from_fn(2 * n, p.horizon(), p.dim(), |o, t| p.at(o / 2, t).to_vec());
    let bits: Vec<usize> = (0..2 * n).map(|o| o % 2).collect();
    let g = build_initial_enlargement(&f, &bits);
    Fixture {
        name: "noisy",
        space: SampleSpace::new(labels, weights).expect("product weights"),
        filtration: f,
        expanded: g,
        driver: lift_proc(&fx.driver),
        price: lift_proc(&fx.price),
    }
}
