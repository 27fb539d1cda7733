//! Exact discrete-time stochastic calculus.
//!
//! On a finite grid every stopping time is accessible and there is no
//! continuous martingale part, so the usual split `X^c + X^{da} + X^{di}` of a
//! martingale degenerates to `X^c = X^{di} = 0`, `X^{da} = X^m`. Statements
//! about the accessible part therefore act on [`Decomposition::martingale_part`].
//! Likewise "local" martingales are plain martingales and every predictable
//! integrand is integrable.

use crate::error::Error;
use crate::scalar::Scalar;
use crate::space::{atom_mean_vec, Filtration, Process, SampleSpace};

/// `X = X_0 + X^m + X^v` with `X^m` a martingale and `X^v` predictable, both null at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition<S> {
    /// Initial value, repeated at every time so it lives on the same grid.
    pub x0: Process<S>,
    pub martingale_part: Process<S>,
    pub predictable_fv_part: Process<S>,
}

impl<S: Scalar> Decomposition<S> {
    pub fn reconstruct(&self) -> Process<S> {
        self.x0
            .add(&self.martingale_part)
            .and_then(|p| p.add(&self.predictable_fv_part))
            .expect("decomposition parts share a shape")
    }
}

fn check_grid<S: Scalar>(x: &Process<S>, f: &Filtration, space: &SampleSpace<S>) -> Result<(), Error> {
    if x.outcomes() != space.len() || f.outcome_count() != space.len() {
        return Err(Error::invalid("process, filtration and space disagree on the outcome count"));
    }
    if x.horizon() != f.horizon() {
        return Err(Error::invalid(format!(
            "process horizon {} differs from filtration horizon {}",
            x.horizon(),
            f.horizon()
        )));
    }
    Ok(())
}

/// Predictable dual projection: increments `E[ΔA_t | F_{t-1}]`, null at 0.
///
/// Only increments of `A` are used, so a non-zero `A_0` is ignored.
pub fn compensator<S: Scalar>(a: &Process<S>, f: &Filtration, space: &SampleSpace<S>) -> Result<Process<S>, Error> {
    check_grid(a, f, space)?;
    let dim = a.dim();
    let mut out = Process::zeros(a.outcomes(), a.horizon(), dim);
    for t in 1..=a.horizon() {
        for atom in f.at(t - 1).atoms() {
            let mean = atom_mean_vec(atom, space, dim, |w| a.increment(w, t));
            for &w in atom {
                let prev = out.at(w, t - 1).to_vec();
                out.set(w, t, prev.into_iter().zip(&mean).map(|(p, m)| p + m.clone()).collect());
            }
        }
    }
    Ok(out)
}

/// Doob decomposition of an adapted process.
pub fn doob_decompose<S: Scalar>(
    x: &Process<S>,
    f: &Filtration,
    space: &SampleSpace<S>,
) -> Result<Decomposition<S>, Error> {
    check_grid(x, f, space)?;
    if let Some((w, t)) = x.adaptedness_violation(f) {
        return Err(Error::precondition(format!("process is not adapted (outcome {w}, t={t})")));
    }
    let centered = x.minus_initial();
    let fv = compensator(&centered, f, space)?;
    let mart = centered.sub(&fv)?;
    let x0 = Process::from_fn(x.outcomes(), x.horizon(), x.dim(), |w, _| x.at(w, 0).to_vec());
    Ok(Decomposition { x0, martingale_part: mart, predictable_fv_part: fv })
}

/// Quadratic covariation `[X, Y]_t = Σ_{s<=t} ΔX_s ΔY_s^T`, row-major `dim_x × dim_y`.
pub fn bracket<S: Scalar>(x: &Process<S>, y: &Process<S>) -> Result<Process<S>, Error> {
    if !x.same_grid(y) {
        return Err(Error::invalid("bracket of processes on different grids"));
    }
    let (dx, dy) = (x.dim(), y.dim());
    Ok(Process::from_increments(
        x.outcomes(),
        x.horizon(),
        dx * dy,
        |_| vec![S::zero(); dx * dy],
        |w, t| {
            let a = x.increment(w, t);
            let b = y.increment(w, t);
            a.iter().flat_map(|ai| b.iter().map(move |bj| ai.clone() * bj.clone())).collect()
        },
    ))
}

/// Predictable bracket `[X, Y]^{F-p}`.
pub fn pred_bracket<S: Scalar>(
    x: &Process<S>,
    y: &Process<S>,
    f: &Filtration,
    space: &SampleSpace<S>,
) -> Result<Process<S>, Error> {
    compensator(&bracket(x, y)?, f, space)
}

/// Stochastic integral `(H·X)_t = Σ_{1<=s<=t} H_s ΔX_s`.
///
/// `X` is read as an `h.dim() × m` matrix (row-major) and contracted against
/// `H`, giving an `m`-dimensional result: a dot product when the dimensions
/// agree, componentwise scaling when `H` is scalar.
pub fn integrate<S: Scalar>(h: &Process<S>, x: &Process<S>) -> Result<Process<S>, Error> {
    if !h.same_grid(x) {
        return Err(Error::invalid("integrand and integrator live on different grids"));
    }
    let n = h.dim();
    if n == 0 {
        return Ok(Process::zeros(x.outcomes(), x.horizon(), if x.dim() == 0 { 1 } else { x.dim() }));
    }
    if !x.dim().is_multiple_of(n) {
        return Err(Error::invalid(format!(
            "integrator of dimension {} is not a multiple of the integrand dimension {n}",
            x.dim()
        )));
    }
    let m = x.dim() / n;
    Ok(Process::from_increments(
        x.outcomes(),
        x.horizon(),
        m,
        |_| vec![S::zero(); m],
        |w, t| {
            let hv = h.at(w, t);
            let dx = x.increment(w, t);
            (0..m)
                .map(|j| (0..n).fold(S::zero(), |acc, a| acc + hv[a].clone() * dx[a * m + j].clone()))
                .collect()
        },
    ))
}

/// `ℰ(X)` together with its positivity diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticExponential<S> {
    pub process: Process<S>,
    /// `ΔX > -1` everywhere, equivalently `ℰ(X) > 0`.
    pub strictly_positive: bool,
    /// First `(outcome, time)` where the exponential is `<= 0`.
    pub first_nonpositive: Option<(usize, usize)>,
}

/// Doléans-Dade exponential `ℰ(X)_t = Π_{s<=t} (1 + ΔX_s)` of a scalar process.
pub fn stoch_exp<S: Scalar>(x: &Process<S>) -> Result<StochasticExponential<S>, Error> {
    if x.dim() != 1 {
        return Err(Error::invalid("stochastic exponential expects a scalar process"));
    }
    let mut p = Process::zeros(x.outcomes(), x.horizon(), 1);
    for w in 0..x.outcomes() {
        let mut acc = S::one();
        p.set(w, 0, vec![acc.clone()]);
        for t in 1..=x.horizon() {
            acc = acc * (S::one() + x.increment(w, t).remove(0));
            p.set(w, t, vec![acc.clone()]);
        }
    }
    // earliest time first, then the smallest outcome index
    let first_nonpositive =
        (1..=x.horizon()).find_map(|t| (0..x.outcomes()).find(|&w| !p.value(w, t).definitely_pos()).map(|w| (w, t)));
    Ok(StochasticExponential { process: p, strictly_positive: first_nonpositive.is_none(), first_nonpositive })
}

/// First failure of the martingale property.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleWitness<S> {
    pub time: usize,
    /// Atom index in the partition at `time - 1`.
    pub atom: usize,
    pub outcomes: Vec<usize>,
    /// `E[ΔX_time | atom]`.
    pub residual: Vec<S>,
}

/// Checks that every increment has zero conditional mean; `Err` carries the first failure.
///
/// # Panics
///
/// If `x`, `f` and `space` are not on the same grid.
pub fn check_martingale<S: Scalar>(
    x: &Process<S>,
    f: &Filtration,
    space: &SampleSpace<S>,
) -> Result<(), MartingaleWitness<S>> {
    check_grid(x, f, space).expect("martingale check on mismatched grid");
    for t in 1..=x.horizon() {
        for (k, atom) in f.at(t - 1).atoms().iter().enumerate() {
            let mean = atom_mean_vec(atom, space, x.dim(), |w| x.increment(w, t));
            if mean.iter().any(|m| !m.near_zero()) {
                return Err(MartingaleWitness { time: t, atom: k, outcomes: atom.clone(), residual: mean });
            }
        }
    }
    Ok(())
}

pub fn is_martingale<S: Scalar>(x: &Process<S>, f: &Filtration, space: &SampleSpace<S>) -> bool {
    check_martingale(x, f, space).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::scalar::Rational;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from_frac(n, d)
    }

    #[test]
    fn compensator_cases() {
        let b1 = fixtures::b1::<Rational>();
        let (f, sp) = (&b1.filtration, &b1.space);
        assert!(compensator(&b1.driver, f, sp).unwrap().values().iter().all(|v| v == &q(0, 1)));
        let det = Process::scalar_from_fn(2, 1, |_, t| q(t as i64, 1));
        assert_eq!(compensator(&det, f, sp).unwrap(), det);
        let ww = bracket(&b1.driver, &b1.driver).unwrap();
        let c = compensator(&ww, f, sp).unwrap();
        assert_eq!(c.value(0, 1), &q(1, 1));
        assert_eq!(c.value(1, 1), &q(1, 1));
    }

    #[test]
    fn doob_on_b1_price() {
        let b1 = fixtures::b1::<Rational>();
        let dec = doob_decompose(&b1.price, &b1.filtration, &b1.space).unwrap();
        assert_eq!(dec.predictable_fv_part.value(0, 1), &q(1, 50));
        assert_eq!(dec.martingale_part.value(0, 1), &q(1, 10));
        assert_eq!(dec.martingale_part.value(1, 1), &q(-1, 10));
        assert_eq!(dec.reconstruct(), b1.price);
    }

    #[test]
    fn doob_trivial_cases() {
        let b2 = fixtures::b2::<Rational>();
        let dec = doob_decompose(&b2.driver, &b2.filtration, &b2.space).unwrap();
        assert!(dec.predictable_fv_part.values().iter().all(|v| v == &q(0, 1)));
        let det = Process::scalar_from_fn(4, 2, |_, t| q(3 * t as i64, 2));
        let dec = doob_decompose(&det, &b2.filtration, &b2.space).unwrap();
        assert!(dec.martingale_part.values().iter().all(|v| v == &q(0, 1)));
    }

    #[test]
    fn doob_rejects_non_adapted() {
        let b2 = fixtures::b2::<Rational>();
        let peek = Process::scalar_from_fn(4, 2, |w, _| q(w as i64, 1));
        assert!(doob_decompose(&peek, &b2.filtration, &b2.space).is_err());
    }

    #[test]
    fn bracket_cases() {
        let b1 = fixtures::b1::<Rational>();
        let ww = bracket(&b1.driver, &b1.driver).unwrap();
        assert_eq!(ww.value(0, 1), &q(1, 1));
        assert_eq!(ww.value(1, 1), &q(1, 1));
        assert_eq!(ww.value(0, 0), &q(0, 1));
        let c = Process::constant(2, 1, vec![q(5, 1)]);
        assert!(bracket(&b1.driver, &c).unwrap().values().iter().all(|v| v == &q(0, 1)));
    }

    #[test]
    fn bracket_of_integral_on_b2() {
        // H_2 = ΔW_1 (predictable at t = 2), H_1 = 1
        let b2 = fixtures::b2::<Rational>();
        let w = &b2.driver;
        let h = Process::scalar_from_fn(4, 2, |o, t| if t == 2 { w.increment(o, 1).remove(0) } else { q(1, 1) });
        assert!(h.is_predictable(&b2.filtration));
        let y = b2.price.clone();
        let lhs = bracket(&integrate(&h, w).unwrap(), &y).unwrap();
        let rhs = integrate(&h, &bracket(w, &y).unwrap()).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn pred_bracket_cases() {
        let b1 = fixtures::b1::<Rational>();
        let pb = pred_bracket(&b1.driver, &b1.driver, &b1.filtration, &b1.space).unwrap();
        assert_eq!(pb.value(1, 1), &q(1, 1));
        let c = Process::constant(2, 1, vec![q(2, 1)]);
        let pb = pred_bracket(&b1.driver, &c, &b1.filtration, &b1.space).unwrap();
        assert!(pb.values().iter().all(|v| v == &q(0, 1)));
    }

    #[test]
    fn integrate_cases() {
        let b1 = fixtures::b1::<Rational>();
        let one = Process::constant(2, 1, vec![q(1, 1)]);
        assert_eq!(integrate(&one, &b1.price).unwrap(), b1.price.minus_initial());
        let zero = Process::constant(2, 1, vec![q(0, 1)]);
        assert!(integrate(&zero, &b1.price).unwrap().values().iter().all(|v| v == &q(0, 1)));
        let two = Process::constant(2, 1, vec![q(2, 1)]);
        let i = integrate(&two, &b1.driver).unwrap();
        assert_eq!((i.value(0, 1), i.value(1, 1)), (&q(2, 1), &q(-2, 1)));
    }

    #[test]
    fn stoch_exp_cases() {
        let b1 = fixtures::b1::<Rational>();
        let zero = Process::<Rational>::zeros(2, 1, 1);
        assert!(stoch_exp(&zero).unwrap().process.values().iter().all(|v| v == &q(1, 1)));
        let minus_d = b1.driver.scale(&q(-1, 5));
        let e = stoch_exp(&minus_d).unwrap();
        assert_eq!((e.process.value(0, 1), e.process.value(1, 1)), (&q(4, 5), &q(6, 5)));
        assert!(e.strictly_positive);
        let killer = Process::scalar_from_fn(2, 2, |w, t| if w == 0 && t >= 1 { q(-1, 1) } else { q(0, 1) });
        let e = stoch_exp(&killer).unwrap();
        assert!(!e.strictly_positive);
        assert_eq!(e.first_nonpositive, Some((0, 1)));
        assert_eq!(e.process.value(0, 2), &q(0, 1));
    }

    #[test]
    fn martingale_checks() {
        let b2 = fixtures::b2::<Rational>();
        assert!(is_martingale(&b2.driver, &b2.filtration, &b2.space));
        let b1 = fixtures::b1::<Rational>();
        let wit = check_martingale(&b1.price, &b1.filtration, &b1.space).unwrap_err();
        assert_eq!((wit.time, wit.residual.clone()), (1, vec![q(1, 50)]));
        let defl = stoch_exp(&b1.driver.scale(&q(-1, 5))).unwrap().process;
        let discounted = defl.mul_scalar_process(&b1.price).unwrap();
        assert!(is_martingale(&discounted, &b1.filtration, &b1.space));
    }
}
