//! Canonical small markets and jump sites.
//!
//! * `B1`: one fair coin, `ΔW = ±1`, `ΔS = 0.1 ΔW + 0.02`, `S_0 = 1`.
//! * `B2`: two independent fair coins with the same dynamics per step.
//! * `B2I`: `B2` with `G` the initial enlargement by the first coin.
//! * `B2N`: `B2` crossed with an independent noise bit `ε` (`P(ε=1) = 0.2`);
//!   `G` is the initial enlargement by `Z` = first coin flipped when `ε = 1`.
//! * `K1`: a two-child totally inaccessible jump site.

use crate::jumpkernel::{AccessibleSite, InaccessibleSite, SiteChild};
use crate::space::{build_initial_enlargement, EnlargementPair, Filtration, Partition, Process, SampleSpace};
use crate::scalar::Scalar;
use crate::viability::Market;

/// A market on a finite tree with its driver and (possibly trivial) enlargement.
#[derive(Debug, Clone)]
pub struct Fixture<S> {
    pub name: &'static str,
    pub space: SampleSpace<S>,
    pub filtration: Filtration,
    pub expanded: Filtration,
    pub driver: Process<S>,
    pub price: Process<S>,
}

impl<S: Scalar> Fixture<S> {
    pub fn pair(&self) -> EnlargementPair<S> {
        EnlargementPair::new(self.space.clone(), self.filtration.clone(), self.expanded.clone())
            .expect("fixture enlargements refine the base filtration")
    }

    pub fn market(&self) -> Market<S> {
        Market::new(self.space.clone(), self.filtration.clone(), self.price.clone()).expect("fixture market is valid")
    }

    pub fn with_expanded(mut self, name: &'static str, expanded: Filtration) -> Self {
        self.name = name;
        self.expanded = expanded;
        self
    }

    pub fn with_price(mut self, price: Process<S>) -> Self {
        self.price = price;
        self
    }
}

fn coin_sign<S: Scalar>(c: char) -> S {
    if c == 'u' {
        S::one()
    } else {
        -S::one()
    }
}

/// Coin-driven market: `labels[w]` starts with the coin letters of each step.
fn coin_market<S: Scalar>(
    name: &'static str,
    labels: Vec<String>,
    weights: Vec<S>,
    steps: usize,
    drift: S,
) -> Fixture<S> {
    let n = labels.len();
    let coins: Vec<Vec<char>> = labels.iter().map(|l| l.chars().take(steps).collect()).collect();
    let keys: Vec<Vec<char>> = (0..steps).map(|t| coins.iter().map(|c| c[t]).collect()).collect();
    let filtration = Filtration::generated_by(Partition::trivial(n), &keys).expect("coin filtration");
    let driver = Process::from_increments(n, steps, 1, |_| vec![S::zero()], |w, t| vec![coin_sign::<S>(coins[w][t - 1])]);
    let vol = S::from_frac(1, 10);
    let price = Process::from_increments(
        n,
        steps,
        1,
        |_| vec![S::one()],
        |w, t| vec![vol.clone() * coin_sign::<S>(coins[w][t - 1]) + drift.clone()],
    );
    let space = SampleSpace::new(labels, weights).expect("fixture weights are valid");
    Fixture { name, space, expanded: filtration.clone(), filtration, driver, price }
}

pub fn b1<S: Scalar>() -> Fixture<S> {
    coin_market("b1", vec!["u".into(), "d".into()], vec![S::from_frac(1, 2); 2], 1, S::from_frac(1, 50))
}

pub fn b2<S: Scalar>() -> Fixture<S> {
    let labels = ["uu", "ud", "du", "dd"].map(String::from).to_vec();
    coin_market("b2", labels, vec![S::from_frac(1, 4); 4], 2, S::from_frac(1, 50))
}

/// Per-outcome first-coin letter (`'u'` / `'d'`).
pub fn first_coin_keys<S>(space: &SampleSpace<S>) -> Vec<char>
where
    S: Scalar,
{
    space.labels().iter().map(|l| l.chars().next().unwrap_or('?')).collect()
}

pub fn b2i<S: Scalar>() -> Fixture<S> {
    let base = b2::<S>();
    let g = build_initial_enlargement(&base.filtration, &first_coin_keys(&base.space));
    base.with_expanded("b2i", g)
}

/// Outcome labels of `B2N`: two coin letters followed by the noise bit.
pub fn b2n_labels() -> Vec<String> {
    let mut out = Vec::new();
    for c1 in ['u', 'd'] {
        for c2 in ['u', 'd'] {
            for e in ['0', '1'] {
                out.push(format!("{c1}{c2}{e}"));
            }
        }
    }
    out
}

/// Noisy signal `Z` of `B2N`: the first coin, flipped when the noise bit is set.
pub fn b2n_signal(labels: &[String]) -> Vec<char> {
    labels
        .iter()
        .map(|l| {
            let c: Vec<char> = l.chars().collect();
            match (c[0], c[2]) {
                ('u', '0') | ('d', '1') => 'u',
                _ => 'd',
            }
        })
        .collect()
}

fn b2n_base<S: Scalar>() -> Fixture<S> {
    let labels = b2n_labels();
    let weights = labels
        .iter()
        .map(|l| if l.ends_with('1') { S::from_frac(1, 20) } else { S::from_frac(1, 5) })
        .collect();
    coin_market("b2n", labels, weights, 2, S::from_frac(1, 50))
}

pub fn b2n<S: Scalar>() -> Fixture<S> {
    let base = b2n_base::<S>();
    let z = b2n_signal(base.space.labels());
    let g = build_initial_enlargement(&base.filtration, &z);
    base.with_expanded("b2n", g)
}

/// `B2N`'s coin market enlarged by the noise bit alone (independent information).
pub fn b2_noise_only<S: Scalar>() -> Fixture<S> {
    let base = b2n_base::<S>();
    let noise: Vec<char> = base.space.labels().iter().map(|l| l.chars().nth(2).unwrap_or('0')).collect();
    let g = build_initial_enlargement(&base.filtration, &noise);
    base.with_expanded("b2-noise", g)
}

/// One step with three equally likely children and the `±1/0` move.
pub fn trinomial<S: Scalar>() -> Fixture<S> {
    let labels: Vec<String> = ["u", "m", "d"].map(String::from).to_vec();
    let moves = [S::one(), S::zero(), -S::one()];
    let filtration = Filtration::new(vec![Partition::trivial(3), Partition::discrete(3)]).expect("trinomial");
    let driver = Process::from_increments(3, 1, 1, |_| vec![S::zero()], |w, _| vec![moves[w].clone()]);
    let price = Process::from_increments(3, 1, 1, |_| vec![S::one()], |w, _| {
        vec![S::from_frac(1, 10) * moves[w].clone() + S::from_frac(1, 50)]
    });
    let space = SampleSpace::uniform(labels).expect("uniform");
    Fixture { name: "trinomial", space, expanded: filtration.clone(), filtration, driver, price }
}

fn child<S: Scalar>(prob: S, w: &[S], nu: S, delta: S) -> SiteChild<S> {
    SiteChild { prob, w: w.to_vec(), nu, delta }
}

/// Inaccessible site `K1`: `q = (0.6, 0.4)`, `w = e_1, e_2`, `ν = (0.5, -0.5)`, `δ = (0.3, 0.1)`.
pub fn k1_site<S: Scalar>() -> InaccessibleSite<S> {
    let (o, z) = (S::one(), S::zero());
    InaccessibleSite::new(
        2,
        vec![
            child(S::from_frac(3, 5), &[o.clone(), z.clone()], S::from_frac(1, 2), S::from_frac(3, 10)),
            child(S::from_frac(2, 5), &[z, o], S::from_frac(-1, 2), S::from_frac(1, 10)),
        ],
    )
    .expect("K1 is a valid site")
}

/// Accessible site of `B2N` at `t = 1` on `{Z = u}`.
pub fn b2n_site<S: Scalar>() -> AccessibleSite<S> {
    let h = S::from_frac(1, 2);
    AccessibleSite::new(
        1,
        vec![
            child(h.clone(), &[S::one()], S::from_frac(3, 5), S::from_frac(1, 5)),
            child(h, &[-S::one()], S::from_frac(-3, 5), S::from_frac(-1, 5)),
        ],
    )
    .expect("B2N site is valid")
}

/// Accessible site of `B2I` at `t = 1` on `{Z = u}`: the insider knows the move.
pub fn b2i_site<S: Scalar>() -> AccessibleSite<S> {
    let h = S::from_frac(1, 2);
    AccessibleSite::new(
        1,
        vec![
            child(h.clone(), &[S::one()], S::one(), S::from_frac(1, 5)),
            child(h, &[-S::one()], -S::one(), S::from_frac(-1, 5)),
        ],
    )
    .expect("B2I site is valid")
}
