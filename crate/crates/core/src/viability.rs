//! Structure conditions, deflators and viability verdicts.
//!
//! In `F` the structure condition asks for a martingale `D = d̄^T · W` with
//! `[M, D]^{F-p} = S^v` and `ΔD < 1`; then `ℰ(-D)` is a deflator. In `G` the
//! driver-level equation is solved site by site (one site per
//! `(t, G_{t-1}-atom)`), giving `Y = K̄^T · (W - Γ(W))` and the deflator
//! `ℰ(-Y)`. The asset-level equation is only used afterwards as an oracle.

use std::fmt;

use rayon::prelude::*;

use crate::calculus::{bracket, check_martingale, compensator, doob_decompose, integrate, pred_bracket, stoch_exp, Decomposition};
use crate::enlarge::{check_positivity, check_support_condition, drift, gauge_drift, DriftGauge};
use crate::error::Error;
use crate::jumpkernel::{
    check_jump_bound, energy_bound, verify_density, xi_accessible, AccessibleSite, EnergyBound, JumpBoundReport,
    JumpSite, KernelError, PsdSolve, SiteChild,
};
use crate::linalg::{min_norm_solve, Matrix};
use crate::mrp::{check_mrp, child_probs, Driver};
use crate::scalar::{dot, Scalar};
use crate::space::{atom_mean_vec, EnlargementPair, Filtration, Process, SampleSpace};

/// A discounted price process on a filtered space, with its Doob decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct Market<S> {
    space: SampleSpace<S>,
    filtration: Filtration,
    price: Process<S>,
    decomposition: Decomposition<S>,
}

impl<S: Scalar> Market<S> {
    pub fn new(space: SampleSpace<S>, filtration: Filtration, price: Process<S>) -> Result<Self, Error> {
        if price.dim() == 0 {
            return Err(Error::invalid("price process needs at least one asset"));
        }
        if price.outcomes() != space.len() {
            return Err(Error::invalid("price process and sample space disagree on the outcome count"));
        }
        for o in 0..price.outcomes() {
            for t in 0..=price.horizon() {
                if let Some(v) = price.at(o, t).iter().find(|v| !v.definitely_pos()) {
                    return Err(Error::invalid(format!(
                        "price must be strictly positive; got {} at outcome {}, t={t}",
                        v.render(),
                        space.label(o)
                    )));
                }
            }
        }
        let decomposition = doob_decompose(&price, &filtration, &space)?;
        Ok(Market { space, filtration, price, decomposition })
    }

    pub fn space(&self) -> &SampleSpace<S> {
        &self.space
    }

    pub fn filtration(&self) -> &Filtration {
        &self.filtration
    }

    pub fn price(&self) -> &Process<S> {
        &self.price
    }

    /// `M = S^m`.
    pub fn martingale_part(&self) -> &Process<S> {
        &self.decomposition.martingale_part
    }

    /// `S^v`.
    pub fn drift_part(&self) -> &Process<S> {
        &self.decomposition.predictable_fv_part
    }

    pub fn decomposition(&self) -> &Decomposition<S> {
        &self.decomposition
    }

    pub fn assets(&self) -> usize {
        self.price.dim()
    }
}

/// Initial capital `x` and predictable holdings `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy<S> {
    pub x: S,
    pub h: Process<S>,
}

impl<S: Scalar> Strategy<S> {
    /// Holds one unit of asset `i` from time 0, starting from its initial price.
    pub fn buy_and_hold(market: &Market<S>, i: usize) -> Self {
        let p = market.price();
        let mut e = vec![S::zero(); p.dim()];
        e[i] = S::one();
        Strategy { x: p.at(0, 0)[i].clone(), h: Process::constant(p.outcomes(), p.horizon(), e) }
    }

    /// `x + H · S`.
    pub fn wealth(&self, market: &Market<S>) -> Result<Process<S>, Error> {
        let gains = integrate(&self.h, market.price())?;
        if gains.dim() != 1 {
            return Err(Error::invalid("holdings must have one entry per asset"));
        }
        Ok(gains.map(|g| g.clone() + self.x.clone()))
    }
}

/// `x + H · S >= 0` on every outcome and time.
pub fn admissible<S: Scalar>(strategy: &Strategy<S>, market: &Market<S>) -> Result<bool, Error> {
    Ok(strategy.wealth(market)?.values().iter().all(|v| !v.definitely_neg()))
}

/// Diagnostics of one `G`-site solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteRecord<S> {
    pub time: usize,
    /// Atom index in `G_{t-1}`.
    pub g_atom: usize,
    /// Atom index of the enclosing `F_{t-1}`-atom.
    pub f_atom: usize,
    pub site: AccessibleSite<S>,
    pub xi: PsdSolve<S>,
    pub jump: JumpBoundReport<S>,
    pub energy: EnergyBound<S>,
    pub density_ok: bool,
}

/// A solved structure condition.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureSolution<S> {
    /// `d̄` (in `F`) or `K̄` (in `G`), predictable, one entry per driver component.
    pub coefficients: Process<S>,
    /// `D` or `Y`.
    pub martingale: Process<S>,
    /// `ℰ(-D)` or `ℰ(-Y)`.
    pub deflator: Process<S>,
    pub jump_bound_ok: bool,
    /// Site diagnostics; empty for the `F` solve.
    pub sites: Vec<SiteRecord<S>>,
}

/// The assumptions the `G` construction depends on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assumption {
    /// The structure condition holds in `F`.
    StructureF,
    /// The driver has the representation property.
    Representation,
    /// A gauge `(N, φ)` reproduces the drift.
    DriftGauge,
    /// Children of `F`-atoms stay possible under `G`.
    Support,
    /// `1 + φ^T ΔN` is bounded below by a positive `u`.
    UPositive,
}

impl Assumption {
    pub fn name(self) -> &'static str {
        match self {
            Assumption::StructureF => "structure-F",
            Assumption::Representation => "representation",
            Assumption::DriftGauge => "drift-gauge",
            Assumption::Support => "support",
            Assumption::UPositive => "u-positive",
        }
    }
}

/// Why a construction stopped.
#[derive(Debug, Clone, PartialEq)]
pub enum Witness<S> {
    /// The `F` system has no solution on an atom.
    Inconsistent { time: usize, atom: usize, residual: Vec<S> },
    /// `ΔD >= 1` or `ΔY >= 1`.
    JumpBound { outcome: usize, time: usize, jump: S },
    AssumptionFailed { assumption: Assumption, detail: String },
    /// The site equation has no solution.
    SiteInfeasible { time: usize, atom: usize, residual: Vec<S> },
    /// The site solver rejected its input.
    SiteFailure { time: usize, atom: usize, detail: String },
    /// An independent check disagreed with the construction.
    Verification { check: &'static str, detail: String },
}

fn render_vec<S: Scalar>(v: &[S]) -> String {
    format!("[{}]", v.iter().map(Scalar::render).collect::<Vec<_>>().join(", "))
}

impl<S: Scalar> fmt::Display for Witness<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Witness::Inconsistent { time, atom, residual } => {
                write!(f, "structure equation inconsistent at t={time}, atom {atom}, residual {}", render_vec(residual))
            }
            Witness::JumpBound { outcome, time, jump } => {
                write!(f, "jump bound violated at t={time}, outcome {outcome}: jump {} >= 1", jump.render())
            }
            Witness::AssumptionFailed { assumption, detail } => write!(f, "assumption {} fails: {detail}", assumption.name()),
            Witness::SiteInfeasible { time, atom, residual } => {
                write!(f, "site infeasible at t={time}, G-atom {atom}, residual {}", render_vec(residual))
            }
            Witness::SiteFailure { time, atom, detail } => write!(f, "site solver failed at t={time}, G-atom {atom}: {detail}"),
            Witness::Verification { check, detail } => write!(f, "verification '{check}' failed: {detail}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Viable,
    NonViable,
    AssumptionViolated,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Viable => "viable",
            Status::NonViable => "non-viable",
            Status::AssumptionViolated => "assumption-violated",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict<S> {
    pub status: Status,
    pub witness: Option<Witness<S>>,
    pub solution: Option<StructureSolution<S>>,
}

impl<S: Scalar> Verdict<S> {
    fn fail(status: Status, witness: Witness<S>) -> Self {
        Verdict { status, witness: Some(witness), solution: None }
    }

    fn assumption(assumption: Assumption, detail: String) -> Self {
        Self::fail(Status::AssumptionViolated, Witness::AssumptionFailed { assumption, detail })
    }
}

fn first_jump_violation<S: Scalar>(x: &Process<S>) -> Option<(usize, usize, S)> {
    (1..=x.horizon()).find_map(|t| {
        (0..x.outcomes()).find_map(|o| {
            let j = x.increment(o, t).remove(0);
            (!j.strictly_less(&S::one())).then_some((o, t, j))
        })
    })
}

/// Solves `E[ΔM ΔW^T | F_{t-1}] d̄_t = ΔS^v_t` atom by atom and assembles `D = d̄^T · W`.
pub fn solve_structure_f<S: Scalar>(market: &Market<S>, driver: &Driver<S>) -> Result<StructureSolution<S>, Witness<S>> {
    let (f, space) = (market.filtration(), market.space());
    if let Err(w) = check_mrp(f, driver, space) {
        return Err(Witness::AssumptionFailed {
            assumption: Assumption::Representation,
            detail: format!("atom {} at t={} has {} children but driver rank {}", w.atom, w.time, w.multiplicity, w.rank),
        });
    }
    let w = driver.process();
    let m = market.martingale_part();
    let sv = market.drift_part();
    let (d, k) = (driver.dim(), market.assets());
    let mut coeff = Process::zeros(space.len(), f.horizon(), d);
    for t in 1..=f.horizon() {
        for (a, atom) in f.at(t - 1).atoms().iter().enumerate() {
            let cross = atom_mean_vec(atom, space, k * d, |o| {
                let (dm, dw) = (m.increment(o, t), w.increment(o, t));
                dm.iter().flat_map(|x| dw.iter().map(move |y| x.clone() * y.clone())).collect()
            });
            let mat = Matrix::from_fn(k, d, |i, j| cross[i * d + j].clone());
            let target = sv.increment(atom[0], t);
            let sol = min_norm_solve(&mat, &target)
                .map_err(|e| Witness::Inconsistent { time: t, atom: a, residual: e.residual })?;
            for &o in atom {
                coeff.set(o, t, sol.clone());
            }
        }
    }
    let dproc = integrate(&coeff, w).expect("coefficients share the driver grid");
    let check = pred_bracket(m, &dproc, f, space).expect("same grid");
    if !check.approx_eq(sv) {
        return Err(Witness::Verification {
            check: "predictable bracket of M and D reproduces the drift",
            detail: format!("max deviation {}", check.max_abs_diff(sv).render()),
        });
    }
    if let Some((o, t, j)) = first_jump_violation(&dproc) {
        return Err(Witness::JumpBound { outcome: o, time: t, jump: j });
    }
    let deflator = stoch_exp(&dproc.neg()).expect("scalar").process;
    Ok(StructureSolution { coefficients: coeff, martingale: dproc, deflator, jump_bound_ok: true, sites: Vec::new() })
}

/// Names what failed in [`verify_deflator`].
#[derive(Debug, Clone, PartialEq)]
pub struct DeflatorWitness<S> {
    pub subject: String,
    pub time: usize,
    pub atom: usize,
    pub residual: Vec<S>,
}

/// Checks that `Υ`, `Υ S_i` for every asset and `Υ (x + H·S)` for every strategy are martingales in `filtration`.
pub fn verify_deflator<S: Scalar>(
    deflator: &Process<S>,
    market: &Market<S>,
    filtration: &Filtration,
    strategies: &[Strategy<S>],
) -> Result<Result<(), DeflatorWitness<S>>, Error> {
    let space = market.space();
    let positive = deflator.values().iter().all(Scalar::definitely_pos);
    let starts_at_one = (0..deflator.outcomes()).all(|o| deflator.value(o, 0).approx_eq(&S::one()));
    if !positive || !starts_at_one {
        return Err(Error::precondition("deflator must be strictly positive and start at 1"));
    }
    let mut subjects: Vec<(String, Process<S>)> = vec![("deflator".into(), deflator.clone())];
    for i in 0..market.assets() {
        let wealth = market.price().component(i);
        subjects.push((format!("deflated asset {i}"), deflator.mul_scalar_process(&wealth)?));
    }
    for (n, s) in strategies.iter().enumerate() {
        subjects.push((format!("deflated strategy {n}"), deflator.mul_scalar_process(&s.wealth(market)?)?));
    }
    for (subject, p) in subjects {
        if let Err(w) = check_martingale(&p, filtration, space) {
            return Ok(Err(DeflatorWitness { subject, time: w.time, atom: w.atom, residual: w.residual }));
        }
    }
    Ok(Ok(()))
}

/// `[D, M]^{F-p} + φ^T · [N, M]^{F-p}`: the `G`-drift of `S`.
pub fn rhs_equation1<S: Scalar>(market: &Market<S>, d: &Process<S>, gauge: &DriftGauge<S>) -> Result<Process<S>, Error> {
    let (f, space) = (market.filtration(), market.space());
    let m = market.martingale_part();
    pred_bracket(d, m, f, space)?.add(&gauge_drift(gauge, m, f, space)?)
}

/// Knobs for [`solve_structure_g`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions<S> {
    /// Solve the sites even when the support or positivity assumption fails.
    pub bypass_gate: bool,
    /// Solve independent sites on the rayon pool.
    pub parallel: bool,
    /// Extra `G`-strategies for the deflator check.
    pub strategies: Vec<Strategy<S>>,
}

impl<S> Default for SolveOptions<S> {
    fn default() -> Self {
        SolveOptions { bypass_gate: false, parallel: false, strategies: Vec::new() }
    }
}

/// Local data at `(t, G_{t-1}-atom)` built from the children of the enclosing `F_{t-1}`-atom.
///
/// Child probabilities are the `F`-conditional ones; `G` enters through `nu` alone.
pub fn build_site<S: Scalar>(
    market: &Market<S>,
    pair: &EnlargementPair<S>,
    gauge: &DriftGauge<S>,
    driver: &Driver<S>,
    d_proc: &Process<S>,
    t: usize,
    g_atom: usize,
) -> Result<(usize, AccessibleSite<S>), KernelError<S>> {
    let f = &pair.base;
    let b0 = pair.expanded.at(t - 1).atom(g_atom)[0];
    let a = f.at(t - 1).atom_of(b0);
    let probs = child_probs(f, market.space(), t, a);
    let phi = gauge.phi.at(b0, t);
    let children = f
        .children(t, a)
        .into_iter()
        .zip(probs)
        .map(|(c, p)| {
            let o = f.at(t).atom(c)[0];
            SiteChild {
                prob: p,
                w: driver.process().increment(o, t),
                nu: dot(phi, &gauge.n.increment(o, t)),
                delta: d_proc.increment(o, t).remove(0),
            }
        })
        .collect();
    Ok((a, AccessibleSite::new(driver.dim(), children)?))
}
type SolvedSite<S> = (usize, AccessibleSite<S>, Result<PsdSolve<S>, KernelError<S>>);


/// Runs the full `G` pipeline and returns a verdict.
///
/// `Err` is reserved for malformed input (grids that do not match).
pub fn solve_structure_g<S: Scalar>(
    market: &Market<S>,
    pair: &EnlargementPair<S>,
    gauge: &DriftGauge<S>,
    driver: &Driver<S>,
    opts: &SolveOptions<S>,
) -> Result<Verdict<S>, Error> {
    if pair.base != *market.filtration() || pair.space != *market.space() {
        return Err(Error::invalid("enlargement pair does not extend the market's filtration"));
    }
    let (g, space) = (&pair.expanded, &pair.space);
    let f_sol = match solve_structure_f(market, driver) {
        Ok(s) => s,
        Err(Witness::AssumptionFailed { assumption, detail }) => return Ok(Verdict::assumption(assumption, detail)),
        Err(w) => return Ok(Verdict::assumption(Assumption::StructureF, w.to_string())),
    };
    if !opts.bypass_gate {
        if let Err(w) = check_support_condition(pair) {
            return Ok(Verdict::assumption(
                Assumption::Support,
                format!(
                    "t={}: child {} of F-atom {} has probability zero on G-atom {}",
                    w.time, w.child, w.f_atom, w.g_atom
                ),
            ));
        }
        if !gauge.u_positive {
            let detail = match check_positivity(pair, gauge) {
                Err(w) => format!("1 + φ^T ΔN = {} at t={}, G-atom {}, child {}", w.value.render(), w.time, w.g_atom, w.child),
                Ok(()) => "u is not strictly positive".into(),
            };
            return Ok(Verdict::assumption(Assumption::UPositive, detail));
        }
    }

    let d_proc = &f_sol.martingale;
    let mut keys = Vec::new();
    for t in 1..=g.horizon() {
        for b in 0..g.at(t - 1).len() {
            keys.push((t, b));
        }
    }
    let solve_one = |&(t, b): &(usize, usize)| -> Result<SolvedSite<S>, KernelError<S>> {
        let (a, site) = build_site(market, pair, gauge, driver, d_proc, t, b)?;
        let xi = xi_accessible(&site);
        Ok((a, site, xi))
    };
    let solved: Vec<_> =
        if opts.parallel { keys.par_iter().map(solve_one).collect() } else { keys.iter().map(solve_one).collect() };

    let d = driver.dim();
    let mut kbar = Process::zeros(space.len(), g.horizon(), d);
    let mut records = Vec::with_capacity(keys.len());
    for (&(t, b), res) in keys.iter().zip(solved) {
        let (a, site, xi) = match res {
            Ok(x) => x,
            Err(e) => return Ok(Verdict::fail(Status::NonViable, Witness::SiteFailure { time: t, atom: b, detail: e.to_string() })),
        };
        let xi = match xi {
            Ok(x) if x.feasible => x,
            Ok(x) => {
                return Ok(Verdict::fail(Status::NonViable, Witness::SiteInfeasible { time: t, atom: b, residual: x.residual }))
            }
            Err(e) => {
                return Ok(Verdict::fail(Status::NonViable, Witness::SiteFailure { time: t, atom: b, detail: e.to_string() }))
            }
        };
        for &o in g.at(t - 1).atom(b) {
            kbar.set(o, t, xi.solution.clone());
        }
        let js = JumpSite::Accessible(site.clone());
        let jump = check_jump_bound(&js, &xi.solution);
        let energy = energy_bound(&js, &xi.solution, &site.u());
        let density_ok = verify_density(&js).ok;
        records.push(SiteRecord { time: t, g_atom: b, f_atom: a, site, xi, jump, energy, density_ok });
    }

    let w = driver.process();
    let w_tilde = w.sub(&drift(w, pair)?)?;
    let y = integrate(&kbar, &w_tilde)?;
    if let Some((o, t, j)) = first_jump_violation(&y) {
        return Ok(Verdict::fail(Status::NonViable, Witness::JumpBound { outcome: o, time: t, jump: j }));
    }
    if let Some(r) = records.iter().find(|r| !r.jump.ok) {
        return Ok(Verdict::fail(
            Status::NonViable,
            Witness::Verification {
                check: "jump identity at site",
                detail: format!("t={}, G-atom {}", r.time, r.g_atom),
            },
        ));
    }
    if let Err(wit) = check_martingale(&y, g, space) {
        return Ok(verification("Y is a G-martingale", format!("t={}, atom {}", wit.time, wit.atom)));
    }
    let deflator = stoch_exp(&y.neg())?.process;

    // Asset-level equation, checked independently of the site solves.
    let m = market.martingale_part();
    let m_tilde = m.sub(&drift(m, pair)?)?;
    let lhs = compensator(&bracket(&y, &m_tilde)?, g, space)?;
    let rhs = rhs_equation1(market, d_proc, gauge)?;
    if !lhs.approx_eq(&rhs) {
        return Ok(verification(
            "[Y, M~]^{G-p} equals the G-drift of S",
            format!("max deviation {}", lhs.max_abs_diff(&rhs).render()),
        ));
    }
    let g_drift = compensator(&market.price().minus_initial(), g, space)?;
    if !g_drift.approx_eq(&rhs) {
        return Ok(verification(
            "G-compensator of S matches the drift formula",
            format!("max deviation {}", g_drift.max_abs_diff(&rhs).render()),
        ));
    }
    match verify_deflator(&deflator, market, g, &opts.strategies)? {
        Ok(()) => {}
        Err(w) => {
            return Ok(verification(
                "deflator in G",
                format!("{} fails at t={}, atom {}: {}", w.subject, w.time, w.atom, render_vec(&w.residual)),
            ))
        }
    }
    Ok(Verdict {
        status: Status::Viable,
        witness: None,
        solution: Some(StructureSolution { coefficients: kbar, martingale: y, deflator, jump_bound_ok: true, sites: records }),
    })
}

fn verification<S: Scalar>(check: &'static str, detail: String) -> Verdict<S> {
    Verdict::fail(Status::NonViable, Witness::Verification { check, detail })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enlarge::solve_phi;
    use crate::fixtures;
    use crate::scalar::Rational;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from_frac(n, d)
    }

    fn driver(fx: &fixtures::Fixture<Rational>) -> Driver<Rational> {
        Driver::new(fx.driver.clone(), &fx.filtration, &fx.space).unwrap()
    }

    fn run(fx: &fixtures::Fixture<Rational>, opts: &SolveOptions<Rational>) -> Verdict<Rational> {
        let w = driver(fx);
        let pair = fx.pair();
        let gauge = solve_phi(&pair, &fx.driver, &w).unwrap();
        solve_structure_g(&fx.market(), &pair, &gauge, &w, opts).unwrap()
    }

    #[test]
    fn b1_structure_in_f() {
        let b1 = fixtures::b1::<Rational>();
        let sol = solve_structure_f(&b1.market(), &driver(&b1)).unwrap();
        assert_eq!(sol.coefficients.at(0, 1), &[q(1, 5)]);
        assert_eq!(sol.deflator.value(0, 1), &q(4, 5));
        assert_eq!(sol.deflator.value(1, 1), &q(6, 5));
        assert_eq!(verify_deflator(&sol.deflator, &b1.market(), &b1.filtration, &[]).unwrap(), Ok(()));
    }

    #[test]
    fn driftless_and_overdrifted_markets() {
        let b1 = fixtures::b1::<Rational>();
        let flat = b1.price.map(|x| x.clone()).sub(&b1.market().drift_part().clone()).unwrap();
        let fx = b1.clone().with_price(flat);
        let sol = solve_structure_f(&fx.market(), &driver(&fx)).unwrap();
        assert!(sol.deflator.values().iter().all(|x| *x == q(1, 1)));

        let steep = Process::from_increments(2, 1, 1, |_| vec![q(1, 1)], |o, _| vec![if o == 0 { q(1, 4) } else { q(1, 20) }]);
        let fx = b1.with_price(steep);
        match solve_structure_f(&fx.market(), &driver(&fx)) {
            Err(Witness::JumpBound { outcome: 0, time: 1, jump }) => assert_eq!(jump, q(3, 2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn identity_deflator_fails_on_drifted_market() {
        let b1 = fixtures::b1::<Rational>();
        let one = Process::constant(2, 1, vec![q(1, 1)]);
        let w = verify_deflator(&one, &b1.market(), &b1.filtration, &[]).unwrap().unwrap_err();
        assert_eq!(w.residual, vec![q(1, 50)]);
        let martingale_market = b1.clone().with_price(Process::from_increments(2, 1, 1, |_| vec![q(1, 1)], |o, _| {
            vec![if o == 0 { q(1, 10) } else { q(-1, 10) }]
        }));
        assert_eq!(verify_deflator(&one, &martingale_market.market(), &b1.filtration, &[]).unwrap(), Ok(()));
    }

    #[test]
    fn admissibility_examples() {
        let b1 = fixtures::b1::<Rational>();
        let m = b1.market();
        let zero = Strategy { x: q(1, 1), h: Process::zeros(2, 1, 1) };
        assert!(admissible(&zero, &m).unwrap());
        let naked = Strategy { x: q(0, 1), h: Process::constant(2, 1, vec![q(1, 1)]) };
        assert!(!admissible(&naked, &m).unwrap());
        let covered = Strategy { x: q(1, 1), h: Process::constant(2, 1, vec![q(1, 1)]) };
        assert!(admissible(&covered, &m).unwrap());
    }

    #[test]
    fn rhs_equation1_on_b2n() {
        let b2n = fixtures::b2n::<Rational>();
        let w = driver(&b2n);
        let pair = b2n.pair();
        let gauge = solve_phi(&pair, &b2n.driver, &w).unwrap();
        let sol = solve_structure_f(&b2n.market(), &w).unwrap();
        let rhs = rhs_equation1(&b2n.market(), &sol.martingale, &gauge).unwrap();
        assert_eq!(rhs.increment(0, 1), vec![q(2, 25)]);
        assert_eq!(rhs.increment(0, 2), vec![q(1, 50)]);
    }

    #[test]
    fn b2n_is_viable() {
        let v = run(&fixtures::b2n(), &SolveOptions { parallel: true, ..Default::default() });
        assert_eq!(v.status, Status::Viable, "{:?}", v.witness);
        let sol = v.solution.unwrap();
        assert_eq!(sol.coefficients.at(0, 1), &[q(5, 4)]);
        // uu0 (Z=u, up) and du1 (Z=u, down)
        assert_eq!(sol.martingale.increment(0, 1), vec![q(1, 2)]);
        assert_eq!(sol.martingale.increment(5, 1), vec![q(-2, 1)]);
        assert_eq!(sol.deflator.value(0, 1), &q(1, 2));
        assert_eq!(sol.deflator.value(5, 1), &q(3, 1));
    }

    #[test]
    fn identity_enlargement_reproduces_d() {
        let b2 = fixtures::b2::<Rational>();
        let v = run(&b2, &SolveOptions::default());
        assert_eq!(v.status, Status::Viable);
        let f = solve_structure_f(&b2.market(), &driver(&b2)).unwrap();
        let g = v.solution.unwrap();
        assert_eq!(g.martingale, f.martingale);
        assert_eq!(g.deflator, f.deflator);
        assert_eq!(g.coefficients, f.coefficients);
    }

    #[test]
    fn b2i_is_gated_and_infeasible_when_forced() {
        let b2i = fixtures::b2i::<Rational>();
        let v = run(&b2i, &SolveOptions::default());
        assert_eq!(v.status, Status::AssumptionViolated);
        assert!(matches!(v.witness, Some(Witness::AssumptionFailed { assumption: Assumption::Support, .. })));
        let v = run(&b2i, &SolveOptions { bypass_gate: true, ..Default::default() });
        assert_eq!(v.status, Status::NonViable);
        assert_eq!(v.witness, Some(Witness::SiteInfeasible { time: 1, atom: 0, residual: vec![q(6, 5)] }));
    }

    #[test]
    fn market_rejects_nonpositive_prices() {
        let b1 = fixtures::b1::<Rational>();
        let bad = Process::constant(2, 1, vec![q(0, 1)]);
        assert!(Market::new(b1.space.clone(), b1.filtration.clone(), bad).is_err());
    }
}
