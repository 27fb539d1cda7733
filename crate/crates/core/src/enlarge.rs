//! The drift operator of an enlargement and its gauge `(N, φ, u)`.
//!
//! For an `F`-martingale `X`, `Γ(X)` is the `G`-predictable part of `X`: its
//! increments are `E[ΔX_t | G_{t-1}]`, and `X - Γ(X)` is a `G`-martingale. On a
//! finite grid this always exists. The gauge expresses it as
//! `Γ(X) = φ^T · [N, X]^{F-p}`; with a driver having the representation
//! property it suffices to match `Γ` on the driver components.

use crate::calculus::{check_martingale, compensator, integrate, pred_bracket};
use crate::error::Error;
use crate::linalg::{min_norm_solve, Matrix};
use crate::mrp::Driver;
use crate::scalar::{dot, min_of, Scalar};
use crate::space::{atom_mean_vec, EnlargementPair, Filtration, Process, SampleSpace};

/// `Γ(X)`: the `G`-compensator of an `F`-martingale.
pub fn drift<S: Scalar>(x: &Process<S>, pair: &EnlargementPair<S>) -> Result<Process<S>, Error> {
    if let Err(w) = check_martingale(x, &pair.base, &pair.space) {
        return Err(Error::precondition(format!("drift needs an F-martingale; mean increment at t={} is nonzero", w.time)));
    }
    let gamma = compensator(x, &pair.expanded, &pair.space)?;
    let centred = x.minus_initial().sub(&gamma)?;
    if let Err(w) = check_martingale(&centred, &pair.expanded, &pair.space) {
        return Err(Error::Internal(format!("X - Γ(X) is not a G-martingale at t={}", w.time)));
    }
    Ok(gamma)
}

/// `(N, φ, u)` with `Γ(X) = φ^T · [N, X]^{F-p}` and `1 + φ^T ΔN >= u`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftGauge<S> {
    pub n: Process<S>,
    /// `G`-predictable, same dimension as `N`.
    pub phi: Process<S>,
    /// `G`-predictable lower bound of `1 + φ^T ΔN`, stored even when not positive.
    pub u: Process<S>,
    pub support_ok: bool,
    pub u_positive: bool,
}

/// `φ` could not be matched on some `G`-atom.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiInfeasible<S> {
    pub time: usize,
    /// Atom index in `G_{t-1}`.
    pub atom: usize,
    pub residual: Vec<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GaugeError<S> {
    Infeasible(PhiInfeasible<S>),
    Structural(Error),
}

impl<S> From<Error> for GaugeError<S> {
    fn from(e: Error) -> Self {
        GaugeError::Structural(e)
    }
}

impl<S: Scalar> std::fmt::Display for GaugeError<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GaugeError::Infeasible(w) => write!(
                f,
                "drift of the driver is not reachable through N at t={}, G-atom {} (residual {:?})",
                w.time,
                w.atom,
                w.residual.iter().map(Scalar::render).collect::<Vec<_>>()
            ),
            GaugeError::Structural(e) => write!(f, "{e}"),
        }
    }
}

impl<S: Scalar> std::error::Error for GaugeError<S> {}

/// Solves `E[ΔW ΔN^T | F_{t-1}] φ_t = E[ΔW_t | G_{t-1}]` on every `G_{t-1}`-atom.
///
/// The minimum-norm `φ` is taken where the system is underdetermined. The
/// identity `Γ(W) = φ^T · [N, W]^{F-p}` is re-verified on the whole driver
/// before `u` and the support flag are filled in.
pub fn solve_phi<S: Scalar>(
    pair: &EnlargementPair<S>,
    n: &Process<S>,
    driver: &Driver<S>,
) -> Result<DriftGauge<S>, GaugeError<S>> {
    let (f, g, space) = (&pair.base, &pair.expanded, &pair.space);
    let w = driver.process();
    if !n.same_grid(w) {
        return Err(Error::invalid("N and the driver live on different grids").into());
    }
    if let Some((o, t)) = n.adaptedness_violation(f) {
        return Err(Error::precondition(format!("N is not F-adapted (outcome {o}, t={t})")).into());
    }
    if check_martingale(n, f, space).is_err() {
        return Err(Error::precondition("N is not an F-martingale").into());
    }
    let (d, k) = (w.dim(), n.dim());
    let mut phi = Process::zeros(n.outcomes(), n.horizon(), k);
    for t in 1..=f.horizon() {
        for (b, atom) in g.at(t - 1).atoms().iter().enumerate() {
            let parent = f.at(t - 1).atom(f.at(t - 1).atom_of(atom[0]));
            let cross = atom_mean_vec(parent, space, d * k, |o| {
                let (dw, dn) = (w.increment(o, t), n.increment(o, t));
                dw.iter().flat_map(|a| dn.iter().map(move |c| a.clone() * c.clone())).collect()
            });
            let mat = Matrix::from_fn(d, k, |i, j| cross[i * k + j].clone());
            let target = atom_mean_vec(atom, space, d, |o| w.increment(o, t));
            let sol = min_norm_solve(&mat, &target)
                .map_err(|e| GaugeError::Infeasible(PhiInfeasible { time: t, atom: b, residual: e.residual }))?;
            for &o in atom {
                phi.set(o, t, sol.clone());
            }
        }
    }
    let mut gauge = DriftGauge {
        n: n.clone(),
        phi,
        u: Process::zeros(n.outcomes(), n.horizon(), 1),
        support_ok: false,
        u_positive: false,
    };
    let gamma = drift(w, pair)?;
    let via_gauge = gauge_drift(&gauge, w, f, space)?;
    if !gamma.approx_eq(&via_gauge) {
        return Err(Error::Internal("gauge does not reproduce the drift of the driver".into()).into());
    }
    gauge.u = compute_u(pair, &gauge);
    gauge.u_positive = (1..=n.horizon()).all(|t| (0..n.outcomes()).all(|o| gauge.u.value(o, t).definitely_pos()));
    gauge.support_ok = check_support_condition(pair).is_ok();
    Ok(gauge)
}

/// `φ^T · [N, X]^{F-p}`.
pub fn gauge_drift<S: Scalar>(
    gauge: &DriftGauge<S>,
    x: &Process<S>,
    f: &Filtration,
    space: &SampleSpace<S>,
) -> Result<Process<S>, Error> {
    let pb = pred_bracket(&gauge.n, x, f, space)?;
    if gauge.n.dim() == 0 {
        return Ok(Process::zeros(x.outcomes(), x.horizon(), x.dim()));
    }
    integrate(&gauge.phi, &pb)
}

/// `1 + φ_t^T ΔN_t` on one outcome.
pub fn tilt_at<S: Scalar>(gauge: &DriftGauge<S>, o: usize, t: usize) -> S {
    S::one() + dot(gauge.phi.at(o, t), &gauge.n.increment(o, t))
}

/// `1 + φ_t^T ΔN_t` with `φ` frozen on `G_{t-1}`-atom `g_atom`, evaluated on every
/// `F_t`-child of the enclosing `F_{t-1}`-atom: `(child index, value)` pairs.
///
/// Children that the `G`-atom rules out are included, so an insider who
/// excludes a branch shows up as a non-positive tilt on that branch. Under
/// the support condition every child meets the `G`-atom and this is just the
/// tilt on the atom's own outcomes.
pub fn tilt_on_children<S: Scalar>(pair: &EnlargementPair<S>, gauge: &DriftGauge<S>, t: usize, g_atom: usize) -> Vec<(usize, S)> {
    let f = &pair.base;
    let b0 = pair.expanded.at(t - 1).atom(g_atom)[0];
    let phi = gauge.phi.at(b0, t);
    f.children(t, f.at(t - 1).atom_of(b0))
        .into_iter()
        .map(|c| {
            let o = f.at(t).atom(c)[0];
            (c, S::one() + dot(phi, &gauge.n.increment(o, t)))
        })
        .collect()
}

/// Minimum of [`tilt_on_children`] per `G_{t-1}`-atom; `u_0 = 1`.
pub fn compute_u<S: Scalar>(pair: &EnlargementPair<S>, gauge: &DriftGauge<S>) -> Process<S> {
    let n = pair.space.len();
    let horizon = pair.expanded.horizon();
    let mut u = Process::constant(n, horizon, vec![S::one()]);
    for t in 1..=horizon {
        for (b, atom) in pair.expanded.at(t - 1).atoms().iter().enumerate() {
            let m = min_of(tilt_on_children(pair, gauge, t, b).into_iter().map(|(_, v)| v)).expect("atoms have children");
            for &o in atom {
                u.set(o, t, vec![m.clone()]);
            }
        }
    }
    u
}

/// A child `C` of an `F_{t-1}`-atom that a `G_{t-1}`-atom `B ⊆ A` rules out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportWitness {
    pub time: usize,
    /// Atom index in `F_{t-1}`.
    pub f_atom: usize,
    /// Atom index in `F_t`.
    pub child: usize,
    /// Atom index in `G_{t-1}`.
    pub g_atom: usize,
}

/// `P(C ∩ B) > 0` for every `F_t`-child `C` of every `F_{t-1}`-atom `A` and every `G_{t-1}`-atom `B ⊆ A`.
///
/// This is the grid form of "`E[ξ|G_{R-}] = 0` exactly where `E[ξ|F_{R-}] = 0`"
/// for positive `F_R`-measurable `ξ`, tested on indicators of children. Only
/// deterministic grid times are checked; every predictable time on the grid
/// is a union of such atoms.
pub fn check_support_condition<S: Scalar>(pair: &EnlargementPair<S>) -> Result<(), SupportWitness> {
    let (f, g) = (&pair.base, &pair.expanded);
    for t in 1..=f.horizon() {
        for (b, batom) in g.at(t - 1).atoms().iter().enumerate() {
            let a = f.at(t - 1).atom_of(batom[0]);
            for c in f.children(t, a) {
                let hit = batom.iter().any(|&o| f.at(t).atom_of(o) == c);
                if !hit {
                    return Err(SupportWitness { time: t, f_atom: a, child: c, g_atom: b });
                }
            }
        }
    }
    Ok(())
}

/// First mismatch in the `G`-compensator identity.
#[derive(Debug, Clone, PartialEq)]
pub struct CompensatorMismatch<S> {
    pub outcome: usize,
    pub time: usize,
    pub g_side: Vec<S>,
    pub f_side: Vec<S>,
}

/// Checks `A^{G-p} = A^{F-p} + φ^T · [N, A - A^{F-p}]^{F-p}` increment by increment.
pub fn verify_g_compensator<S: Scalar>(
    a: &Process<S>,
    pair: &EnlargementPair<S>,
    gauge: &DriftGauge<S>,
) -> Result<Result<(), CompensatorMismatch<S>>, Error> {
    if let Some((o, t)) = a.adaptedness_violation(&pair.base) {
        return Err(Error::precondition(format!("A is not F-adapted (outcome {o}, t={t})")));
    }
    let g_side = compensator(a, &pair.expanded, &pair.space)?;
    let f_comp = compensator(a, &pair.base, &pair.space)?;
    let mart = a.minus_initial().sub(&f_comp)?;
    let f_side = f_comp.add(&gauge_drift(gauge, &mart, &pair.base, &pair.space)?)?;
    for o in 0..a.outcomes() {
        for t in 0..=a.horizon() {
            if g_side.at(o, t).iter().zip(f_side.at(o, t)).any(|(x, y)| !x.approx_eq(y)) {
                return Ok(Err(CompensatorMismatch {
                    outcome: o,
                    time: t,
                    g_side: g_side.at(o, t).to_vec(),
                    f_side: f_side.at(o, t).to_vec(),
                }));
            }
        }
    }
    Ok(Ok(()))
}

/// Where `1 + φ^T ΔN` fails to be positive.
#[derive(Debug, Clone, PartialEq)]
pub struct PositivityWitness<S> {
    pub time: usize,
    /// Atom index in `G_{t-1}`.
    pub g_atom: usize,
    /// Atom index in `F_t`.
    pub child: usize,
    pub value: S,
}

/// `1 + φ^T ΔN > 0` on every `(t, G-atom, F-child)`; `Err` names the first failure.
pub fn check_positivity<S: Scalar>(pair: &EnlargementPair<S>, gauge: &DriftGauge<S>) -> Result<(), PositivityWitness<S>> {
    for t in 1..=pair.expanded.horizon() {
        for b in 0..pair.expanded.at(t - 1).len() {
            if let Some((child, value)) = tilt_on_children(pair, gauge, t, b).into_iter().find(|(_, v)| !v.definitely_pos()) {
                return Err(PositivityWitness { time: t, g_atom: b, child, value });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{bracket, is_martingale};
    use crate::fixtures;
    use crate::scalar::Rational;
    use crate::space::RandomTime;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from_frac(n, d)
    }

    fn gauge_of(fx: &fixtures::Fixture<Rational>) -> DriftGauge<Rational> {
        let w = Driver::new(fx.driver.clone(), &fx.filtration, &fx.space).unwrap();
        solve_phi(&fx.pair(), &fx.driver, &w).unwrap()
    }

    #[test]
    fn drift_examples() {
        let b2 = fixtures::b2::<Rational>();
        let gamma = drift(&b2.driver, &b2.pair()).unwrap();
        assert!(gamma.values().iter().all(|x| *x == q(0, 1)));

        let b2i = fixtures::b2i::<Rational>();
        let gamma = drift(&b2i.driver, &b2i.pair()).unwrap();
        assert_eq!(gamma.increment(0, 1), vec![q(1, 1)]);
        assert_eq!(gamma.increment(3, 1), vec![q(-1, 1)]);

        let b2n = fixtures::b2n::<Rational>();
        let gamma = drift(&b2n.driver, &b2n.pair()).unwrap();
        // uu0 has Z = u, uu1 has Z = d
        assert_eq!(gamma.increment(0, 1), vec![q(3, 5)]);
        assert_eq!(gamma.increment(1, 1), vec![q(-3, 5)]);
        let centred = b2n.driver.sub(&gamma).unwrap();
        assert!(is_martingale(&centred, &b2n.expanded, &b2n.space));
    }

    #[test]
    fn drift_rejects_non_martingales() {
        let b1 = fixtures::b1::<Rational>();
        assert!(drift(&b1.price, &b1.pair()).is_err());
    }

    #[test]
    fn gauge_examples() {
        let b2 = gauge_of(&fixtures::b2());
        assert!(b2.phi.values().iter().all(|x| *x == q(0, 1)));
        assert!(b2.u.values().iter().all(|x| *x == q(1, 1)));
        assert!(b2.support_ok && b2.u_positive);

        let b2n = gauge_of(&fixtures::b2n());
        assert_eq!(b2n.phi.at(0, 1), &[q(3, 5)]);
        assert_eq!(b2n.phi.at(1, 1), &[q(-3, 5)]);
        assert_eq!(b2n.phi.at(0, 2), &[q(0, 1)]);
        assert!((0..8).all(|o| *b2n.u.value(o, 1) == q(2, 5) && *b2n.u.value(o, 2) == q(1, 1)));
        assert!(b2n.support_ok && b2n.u_positive);
        assert!(check_positivity(&fixtures::b2n().pair(), &b2n).is_ok());

        let b2i = gauge_of(&fixtures::b2i());
        assert_eq!(b2i.phi.at(0, 1), &[q(1, 1)]);
        assert_eq!(*b2i.u.value(0, 1), q(0, 1));
        assert!(!b2i.u_positive && !b2i.support_ok);
        let wit = check_positivity(&fixtures::b2i().pair(), &b2i).unwrap_err();
        assert_eq!((wit.time, wit.g_atom, wit.child, wit.value), (1, 0, 1, q(0, 1)));
    }

    #[test]
    fn infeasible_gauge() {
        // N = 0 cannot carry a nonzero drift
        let b2n = fixtures::b2n::<Rational>();
        let w = Driver::new(b2n.driver.clone(), &b2n.filtration, &b2n.space).unwrap();
        let zero = Process::zeros(8, 2, 1);
        match solve_phi(&b2n.pair(), &zero, &w) {
            Err(GaugeError::Infeasible(PhiInfeasible { time: 1, atom: 0, residual })) => assert_eq!(residual, vec![q(3, 5)]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn support_condition_examples() {
        assert!(check_support_condition(&fixtures::b2::<Rational>().pair()).is_ok());
        assert!(check_support_condition(&fixtures::b2n::<Rational>().pair()).is_ok());
        let w = check_support_condition(&fixtures::b2i::<Rational>().pair()).unwrap_err();
        assert_eq!(w, SupportWitness { time: 1, f_atom: 0, child: 1, g_atom: 0 });
    }

    #[test]
    fn g_compensator_identity() {
        let b2n = fixtures::b2n::<Rational>();
        let pair = b2n.pair();
        let gauge = gauge_of(&b2n);
        let ww = bracket(&b2n.driver, &b2n.driver).unwrap();
        assert_eq!(verify_g_compensator(&ww, &pair, &gauge).unwrap(), Ok(()));

        let up = RandomTime::new(
            b2n.space.labels().iter().map(|l| if l.starts_with('u') { Some(1) } else { None }).collect(),
        );
        let jump = crate::mrp::jump_process(&up, &vec![q(1, 1); 8], 2);
        assert_eq!(verify_g_compensator(&jump, &pair, &gauge).unwrap(), Ok(()));
        let gcomp = compensator(&jump, &pair.expanded, &pair.space).unwrap();
        assert_eq!(gcomp.increment(0, 1), vec![q(4, 5)]);
        assert_eq!(gcomp.increment(1, 1), vec![q(1, 5)]);

        let det = Process::scalar_from_fn(8, 2, |_, t| q(t as i64, 1));
        assert_eq!(verify_g_compensator(&det, &pair, &gauge).unwrap(), Ok(()));
    }
}
