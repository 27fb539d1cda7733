//! Seeded generators for property tests, the self-test battery and benchmarks.
//!
//! All values are small rationals so exact-mode arithmetic stays cheap; the
//! float backend receives the same numbers converted.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fixtures::Fixture;
use crate::jumpkernel::{AccessibleSite, InaccessibleSite, SiteChild};
use crate::linalg::Matrix;
use crate::mrp::Driver;
use crate::scalar::{max_of, sum, Scalar};
use crate::space::{Filtration, Partition, Process, SampleSpace};
use crate::viability::{admissible, solve_structure_f, Market, Strategy};

pub type Gen = ChaCha8Rng;

pub fn rng(seed: u64) -> Gen {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `num/den` with `|num| <= span * den`, `den` in `1..=8`.
pub fn small<S: Scalar>(g: &mut Gen, span: i64) -> S {
    let den = g.gen_range(1..=8);
    S::from_frac(g.gen_range(-span * den..=span * den), den)
}

/// A strictly positive probability vector of length `n`.
pub fn probabilities<S: Scalar>(g: &mut Gen, n: usize) -> Vec<S> {
    let raw: Vec<i64> = (0..n).map(|_| g.gen_range(1..=9)).collect();
    let total: i64 = raw.iter().sum();
    raw.into_iter().map(|r| S::from_frac(r, total)).collect()
}

fn centre<S: Scalar>(xs: &[S], p: &[S]) -> Vec<S> {
    let mean = sum(xs.iter().zip(p).map(|(x, q)| x.clone() * q.clone()));
    xs.iter().map(|x| x.clone() - mean.clone()).collect()
}

/// Rescales centred values so that `max(x) <= cap` (values are left alone when already below).
fn cap_above<S: Scalar>(xs: Vec<S>, cap: S) -> Vec<S> {
    match max_of(xs.iter().cloned()) {
        Some(m) if m > cap => xs.into_iter().map(|x| x * cap.clone() / m.clone()).collect(),
        _ => xs,
    }
}

/// Rescales centred values so that `min(x) >= -cap`.
fn cap_below<S: Scalar>(xs: Vec<S>, cap: S) -> Vec<S> {
    let neg: Vec<S> = xs.iter().map(|x| -x.clone()).collect();
    cap_above(neg, cap).into_iter().map(|x| -x).collect()
}

/// A valid accessible site with `d <= max_d`, `d + 1 >= children` and
/// centred driver increments of full rank (so the representation property holds).
pub fn accessible_site<S: Scalar>(g: &mut Gen, max_d: usize) -> AccessibleSite<S> {
    loop {
        let d = g.gen_range(1..=max_d);
        let m = g.gen_range(1..=d + 1);
        let p: Vec<S> = probabilities(g, m);
        let raw: Vec<Vec<S>> = (0..m).map(|_| (0..d).map(|_| small(g, 2)).collect()).collect();
        let cols: Vec<Vec<S>> = (0..d).map(|j| centre(&raw.iter().map(|r| r[j].clone()).collect::<Vec<_>>(), &p)).collect();
        let w: Vec<Vec<S>> = (0..m).map(|k| cols.iter().map(|c| c[k].clone()).collect()).collect();
        if Matrix::from_rows(&w, d).rank() + 1 != m {
            continue;
        }
        let nu_raw: Vec<S> = (0..m).map(|_| small(g, 1)).collect();
        let nu = cap_below(centre(&nu_raw, &p), S::from_frac(9, 10));
        let delta_raw: Vec<S> = (0..m).map(|_| small(g, 1)).collect();
        let delta = cap_above(centre(&delta_raw, &p), S::from_frac(9, 10));
        let children = (0..m)
            .map(|k| SiteChild { prob: p[k].clone(), w: w[k].clone(), nu: nu[k].clone(), delta: delta[k].clone() })
            .collect();
        if let Ok(site) = AccessibleSite::new(d, children) {
            return site;
        }
    }
}

/// A valid inaccessible site with linearly independent `w_k` (at most `d` children).
pub fn inaccessible_site<S: Scalar>(g: &mut Gen, max_d: usize) -> InaccessibleSite<S> {
    loop {
        let d = g.gen_range(1..=max_d);
        let m = g.gen_range(1..=d);
        let q: Vec<S> = probabilities(g, m);
        let w: Vec<Vec<S>> = (0..m).map(|_| (0..d).map(|_| small(g, 2)).collect()).collect();
        if Matrix::from_rows(&w, d).rank() != m {
            continue;
        }
        let children = (0..m)
            .map(|k| {
                let nu = S::from_frac(g.gen_range(-9..=20), 10);
                let delta = S::from_frac(g.gen_range(-20..=9), 10);
                SiteChild { prob: q[k].clone(), w: w[k].clone(), nu, delta }
            })
            .collect();
        if let Ok(site) = InaccessibleSite::new(d, children) {
            return site;
        }
    }
}

/// A random adapted scalar process on the given filtration.
pub fn adapted_process<S: Scalar>(g: &mut Gen, f: &Filtration) -> Process<S> {
    let n = f.outcome_count();
    let mut p = Process::zeros(n, f.horizon(), 1);
    for t in 0..=f.horizon() {
        for atom in f.at(t).atoms() {
            let v: S = small(g, 3);
            for &o in atom {
                p.set(o, t, vec![v.clone()]);
            }
        }
    }
    p
}

/// A random predictable process of dimension `dim`.
pub fn predictable_process<S: Scalar>(g: &mut Gen, f: &Filtration, dim: usize, span: i64) -> Process<S> {
    let n = f.outcome_count();
    let mut p = Process::zeros(n, f.horizon(), dim);
    for t in 0..=f.horizon() {
        let part = if t == 0 { Partition::trivial(n) } else { f.at(t - 1).clone() };
        for atom in part.atoms() {
            let v: Vec<S> = (0..dim).map(|_| small(g, span)).collect();
            for &o in atom {
                p.set(o, t, v.clone());
            }
        }
    }
    p
}

/// `X_0 + k · W` with random predictable `k` and `F_0`-measurable `X_0`.
pub fn martingale<S: Scalar>(g: &mut Gen, f: &Filtration, driver: &Driver<S>) -> Process<S> {
    let k: Process<S> = predictable_process(g, f, driver.dim(), 2);
    let x0: Vec<S> = (0..f.at(0).len()).map(|_| small(g, 3)).collect();
    let w = driver.process();
    Process::from_increments(
        f.outcome_count(),
        f.horizon(),
        1,
        |o| vec![x0[f.at(0).atom_of(o)].clone()],
        |o, t| vec![sum(k.at(o, t).iter().zip(w.increment(o, t)).map(|(a, b)| a.clone() * b))],
    )
}

/// A binary tree with random node probabilities, a centred driver and a price
/// `S_t = S_{t-1} (1 + r)` with per-node returns; retried until the structure
/// condition holds in `F`.
pub fn viable_market<S: Scalar>(g: &mut Gen, max_horizon: usize) -> Fixture<S> {
    loop {
        let horizon = g.gen_range(1..=max_horizon);
        let n = 1usize << horizon;
        let labels: Vec<String> =
            (0..n).map(|i| (0..horizon).map(|t| if i >> (horizon - 1 - t) & 1 == 0 { 'u' } else { 'd' }).collect()).collect();
        // one up-probability and pair of returns per node (label prefix)
        let mut node = std::collections::BTreeMap::new();
        for l in &labels {
            for t in 0..horizon {
                node.entry(l[..t].to_string()).or_insert_with(|| {
                    let p = S::from_frac(g.gen_range(2..=8), 10);
                    let up = S::from_frac(g.gen_range(1..=15), 100);
                    let down = S::from_frac(-g.gen_range(1..=15), 100);
                    (p, up, down)
                });
            }
        }
        let step = |l: &str, t: usize| {
            let (p, up, down) = node[&l[..t - 1]].clone();
            let is_up = l.as_bytes()[t - 1] == b'u';
            (p, up, down, is_up)
        };
        let weights: Vec<S> = labels
            .iter()
            .map(|l| {
                (1..=horizon).fold(S::one(), |acc, t| {
                    let (p, _, _, is_up) = step(l, t);
                    acc * if is_up { p } else { S::one() - p }
                })
            })
            .collect();
        let keys: Vec<Vec<char>> = (0..horizon).map(|t| labels.iter().map(|l| l.as_bytes()[t] as char).collect()).collect();
        let f = Filtration::generated_by(Partition::trivial(n), &keys).expect("binary tree");
        let driver = Process::from_increments(n, horizon, 1, |_| vec![S::zero()], |o, t| {
            let (p, _, _, is_up) = step(&labels[o], t);
            vec![if is_up { S::one() - p } else { -p }]
        });
        let price = Process::from_fn(n, horizon, 1, |o, t| {
            vec![(1..=t).fold(S::one(), |acc, s| {
                let (_, up, down, is_up) = step(&labels[o], s);
                acc * (S::one() + if is_up { up } else { down })
            })]
        });
        let space = SampleSpace::new(labels, weights).expect("product weights");
        let fx = Fixture { name: "random", space, expanded: f.clone(), filtration: f, driver, price };
        let Ok(w) = Driver::new(fx.driver.clone(), &fx.filtration, &fx.space) else { continue };
        let Ok(market) = Market::new(fx.space.clone(), fx.filtration.clone(), fx.price.clone()) else { continue };
        if solve_structure_f(&market, &w).is_ok() {
            return fx;
        }
    }
}

/// An admissible strategy with holdings predictable in `f` (which may be an enlargement).
pub fn admissible_strategy<S: Scalar>(g: &mut Gen, market: &Market<S>, f: &Filtration) -> Strategy<S> {
    loop {
        let h = predictable_process(g, f, market.assets(), 2);
        let x = S::from_int(g.gen_range(0..=4));
        let s = Strategy { x, h };
        if admissible(&s, market).unwrap_or(false) {
            return s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::is_martingale;
    use crate::fixtures;
    use crate::mrp::check_mrp;
    use crate::scalar::Rational;

    #[test]
    fn generators_are_deterministic() {
        let a: AccessibleSite<Rational> = accessible_site(&mut rng(7), 4);
        let b: AccessibleSite<Rational> = accessible_site(&mut rng(7), 4);
        assert_eq!(a, b);
    }

    #[test]
    fn generated_objects_satisfy_their_contracts() {
        let mut g = rng(1);
        let b2 = fixtures::b2::<Rational>();
        let w = Driver::new(b2.driver.clone(), &b2.filtration, &b2.space).unwrap();
        for _ in 0..10 {
            assert!(is_martingale(&martingale(&mut g, &b2.filtration, &w), &b2.filtration, &b2.space));
            assert!(adapted_process::<Rational>(&mut g, &b2.filtration).is_adapted(&b2.filtration));
        }
        for _ in 0..5 {
            let fx = viable_market::<Rational>(&mut g, 3);
            let w = Driver::new(fx.driver.clone(), &fx.filtration, &fx.space).unwrap();
            assert!(check_mrp(&fx.filtration, &w, &fx.space).is_ok());
            let m = fx.market();
            let s = admissible_strategy(&mut g, &m, &fx.filtration);
            assert!(s.h.is_predictable(&fx.filtration));
        }
    }
}
