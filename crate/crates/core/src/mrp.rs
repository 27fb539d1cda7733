//! Martingale representation with respect to a driver `W`.
//!
//! On a tree, representing a martingale reduces to one small linear system per
//! `(t, F_{t-1}-atom)`: the coefficient `k` must satisfy `k^T ΔW_t = ΔX_t` on
//! every child of the atom. Underdetermined systems are resolved by the
//! minimum-norm solution, which lies in the row space of the child-increment
//! matrix and does not depend on how the children are ordered.

use thiserror::Error as ThisError;

use crate::calculus::{check_martingale, compensator};
use crate::error::Error;
use crate::linalg::{min_norm_solve, Matrix};
use crate::scalar::{sum, Scalar};
use crate::space::{Filtration, Process, RandomTime, SampleSpace};

/// A martingale `W` with `W_0 = 0` used as the integrator for representations.
#[derive(Debug, Clone, PartialEq)]
pub struct Driver<S> {
    process: Process<S>,
}

impl<S: Scalar> Driver<S> {
    pub fn new(w: Process<S>, f: &Filtration, space: &SampleSpace<S>) -> Result<Self, Error> {
        if w.outcomes() != space.len() || w.horizon() != f.horizon() {
            return Err(Error::invalid("driver does not live on the filtration's grid"));
        }
        if let Some((o, t)) = w.adaptedness_violation(f) {
            return Err(Error::precondition(format!("driver is not adapted (outcome {o}, t={t})")));
        }
        if (0..w.outcomes()).any(|o| w.at(o, 0).iter().any(|x| !x.near_zero())) {
            return Err(Error::precondition("driver must start at zero"));
        }
        if let Err(wit) = check_martingale(&w, f, space) {
            return Err(Error::precondition(format!(
                "driver is not a martingale: t={} atom {} has mean increment {:?}",
                wit.time,
                wit.atom,
                wit.residual.iter().map(Scalar::render).collect::<Vec<_>>()
            )));
        }
        Ok(Driver { process: w })
    }

    pub fn dim(&self) -> usize {
        self.process.dim()
    }

    pub fn process(&self) -> &Process<S> {
        &self.process
    }
}

/// Predictable coefficients `k` with `X - X_0 = k^T · W`.
///
/// Stored row-major as a `driver_dim × target_dim` matrix per `(outcome, time)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationCoefficients<S> {
    pub driver_dim: usize,
    pub target_dim: usize,
    pub coefficients: Process<S>,
}

impl<S: Scalar> RepresentationCoefficients<S> {
    /// `Σ_{s<=t} k_s^T ΔW_s`.
    pub fn integrate(&self, driver: &Driver<S>) -> Process<S> {
        let (d, m) = (self.driver_dim, self.target_dim);
        let k = &self.coefficients;
        let w = driver.process();
        Process::from_increments(
            w.outcomes(),
            w.horizon(),
            m,
            |_| vec![S::zero(); m],
            |o, t| {
                let dw = w.increment(o, t);
                let kv = k.at(o, t);
                (0..m).map(|j| (0..d).fold(S::zero(), |acc, a| acc + kv[a * m + j].clone() * dw[a].clone())).collect()
            },
        )
    }

    /// Coefficient vector of target component `j` at `(outcome, time)`.
    pub fn column(&self, o: usize, t: usize, j: usize) -> Vec<S> {
        let kv = self.coefficients.at(o, t);
        (0..self.driver_dim).map(|a| kv[a * self.target_dim + j].clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, ThisError)]
pub enum MrpError<S: Scalar> {
    /// `ΔX_t` is outside the span of the driver increments on some atom.
    #[error("not representable at t={time}, atom {atom}: residual {residual:?}")]
    NotRepresentable { time: usize, atom: usize, component: usize, residual: Vec<S> },
    #[error(transparent)]
    Structural(#[from] Error),
}

/// Child increments of `x` on atom `atom` of `F_{t-1}`: one row per `F_t` child.
pub(crate) fn child_rows<S: Scalar>(x: &Process<S>, f: &Filtration, t: usize, atom: usize) -> Vec<Vec<S>> {
    f.children(t, atom).into_iter().map(|c| x.increment(f.at(t).atom(c)[0], t)).collect()
}

/// Conditional probabilities of the `F_t` children of `atom` given the atom.
pub(crate) fn child_probs<S: Scalar>(f: &Filtration, space: &SampleSpace<S>, t: usize, atom: usize) -> Vec<S> {
    let mass = space.prob(f.at(t - 1).atom(atom));
    f.children(t, atom).into_iter().map(|c| space.prob(f.at(t).atom(c)) / mass.clone()).collect()
}

/// Represents an `F`-martingale as a stochastic integral against `W`.
pub fn represent<S: Scalar>(
    x: &Process<S>,
    driver: &Driver<S>,
    f: &Filtration,
    space: &SampleSpace<S>,
) -> Result<RepresentationCoefficients<S>, MrpError<S>> {
    let w = driver.process();
    if !x.same_grid(w) {
        return Err(Error::invalid("target and driver live on different grids").into());
    }
    if let Some((o, t)) = x.adaptedness_violation(f) {
        return Err(Error::precondition(format!("target is not adapted (outcome {o}, t={t})")).into());
    }
    if check_martingale(x, f, space).is_err() {
        return Err(Error::precondition("target is not a martingale").into());
    }
    let (d, m) = (driver.dim(), x.dim());
    let mut k = Process::zeros(x.outcomes(), x.horizon(), d * m);
    for t in 1..=x.horizon() {
        for (a, atom) in f.at(t - 1).atoms().iter().enumerate() {
            let wc = Matrix::from_rows(&child_rows(w, f, t, a), d);
            let xc = child_rows(x, f, t, a);
            let mut coeff = vec![S::zero(); d * m];
            for j in 0..m {
                let target: Vec<S> = xc.iter().map(|r| r[j].clone()).collect();
                let sol = min_norm_solve(&wc, &target).map_err(|e| MrpError::NotRepresentable {
                    time: t,
                    atom: a,
                    component: j,
                    residual: e.residual,
                })?;
                for (i, v) in sol.into_iter().enumerate() {
                    coeff[i * m + j] = v;
                }
            }
            for &o in atom {
                k.set(o, t, coeff.clone());
            }
        }
    }
    Ok(RepresentationCoefficients { driver_dim: d, target_dim: m, coefficients: k })
}

/// Number of `F_t` children of atom `atom` of `F_{t-1}`.
pub fn conditional_multiplicity(f: &Filtration, t: usize, atom: usize) -> usize {
    f.children(t, atom).len()
}

/// An atom on which the driver does not span all centred child functions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MrpWitness {
    pub time: usize,
    pub atom: usize,
    pub multiplicity: usize,
    pub rank: usize,
}

/// Checks the representation property atom by atom: the centred driver
/// increments on the children must have rank `multiplicity - 1`.
pub fn check_mrp<S: Scalar>(f: &Filtration, driver: &Driver<S>, space: &SampleSpace<S>) -> Result<(), MrpWitness> {
    let w = driver.process();
    for t in 1..=f.horizon() {
        for a in 0..f.at(t - 1).len() {
            let rows = child_rows(w, f, t, a);
            let probs = child_probs(f, space, t, a);
            let mean: Vec<S> = (0..driver.dim())
                .map(|c| sum(rows.iter().zip(&probs).map(|(r, p)| r[c].clone() * p.clone())))
                .collect();
            let centred: Vec<Vec<S>> =
                rows.iter().map(|r| r.iter().zip(&mean).map(|(x, m)| x.clone() - m.clone()).collect()).collect();
            let rank = Matrix::from_rows(&centred, driver.dim()).rank();
            let multiplicity = rows.len();
            if rank + 1 < multiplicity {
                return Err(MrpWitness { time: t, atom: a, multiplicity, rank });
            }
        }
    }
    Ok(())
}

/// Coefficient of the martingale `ξ 1_{[R,∞)} - (ξ 1_{[R,∞)})^{F-p}`.
///
/// `ξ` must be `F_R`-measurable, i.e. `ξ 1_{R<=t}` is `F_t`-measurable for every `t`.
pub fn single_jump_coefficient<S: Scalar>(
    r: &RandomTime,
    xi: &[S],
    f: &Filtration,
    driver: &Driver<S>,
    space: &SampleSpace<S>,
) -> Result<RepresentationCoefficients<S>, MrpError<S>> {
    if !r.is_stopping_time(f) {
        return Err(Error::precondition("random time is not a stopping time of the filtration").into());
    }
    if xi.len() != space.len() {
        return Err(Error::invalid("jump size has the wrong number of outcomes").into());
    }
    let jump = jump_process(r, xi, f.horizon());
    if let Some((o, t)) = jump.adaptedness_violation(f) {
        return Err(Error::precondition(format!("jump size is not measurable at the stopping time (outcome {o}, t={t})")).into());
    }
    let comp = compensator(&jump, f, space)?;
    let mart = jump.sub(&comp)?;
    represent(&mart, driver, f, space)
}

/// `ξ 1_{R <= t}` as a scalar process.
pub fn jump_process<S: Scalar>(r: &RandomTime, xi: &[S], horizon: usize) -> Process<S> {
    Process::scalar_from_fn(xi.len(), horizon, |o, t| match r.at(o) {
        Some(s) if s <= t => xi[o].clone(),
        _ => S::zero(),
    })
}

/// Builds a driver with the representation property for `f`.
///
/// On an atom with children `C_0..C_{m-1}` the components are
/// `1_{C_j} - P(C_j | atom)` for `j < m - 1`, padded with zeros up to the
/// largest multiplicity minus one.
#[allow(clippy::needless_range_loop)]
pub fn synthesize_driver<S: Scalar>(f: &Filtration, space: &SampleSpace<S>) -> Result<Driver<S>, Error> {
    let n = space.len();
    let d = (1..=f.horizon())
        .flat_map(|t| (0..f.at(t - 1).len()).map(move |a| (t, a)))
        .map(|(t, a)| conditional_multiplicity(f, t, a).saturating_sub(1))
        .max()
        .unwrap_or(0);
    let mut incr = vec![vec![vec![S::zero(); d]; f.horizon() + 1]; n];
    for t in 1..=f.horizon() {
        for a in 0..f.at(t - 1).len() {
            let kids = f.children(t, a);
            let probs = child_probs(f, space, t, a);
            for &o in f.at(t - 1).atom(a) {
                let mine = f.at(t).atom_of(o);
                for j in 0..kids.len().saturating_sub(1) {
                    let ind = if kids[j] == mine { S::one() } else { S::zero() };
                    incr[o][t][j] = ind - probs[j].clone();
                }
            }
        }
    }
    let w = Process::from_increments(n, f.horizon(), d, |_| vec![S::zero(); d], |o, t| incr[o][t].clone());
    Driver::new(w, f, space)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::scalar::Rational;
    use crate::space::Partition;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from_frac(n, d)
    }

    fn driver_of(fx: &fixtures::Fixture<Rational>) -> Driver<Rational> {
        Driver::new(fx.driver.clone(), &fx.filtration, &fx.space).unwrap()
    }

    #[test]
    fn represent_driver_itself() {
        let b2 = fixtures::b2::<Rational>();
        let w = driver_of(&b2);
        let k = represent(&b2.driver, &w, &b2.filtration, &b2.space).unwrap();
        for o in 0..4 {
            for t in 1..=2 {
                assert_eq!(k.column(o, t, 0), vec![q(1, 1)]);
            }
        }
        assert_eq!(k.integrate(&w), b2.driver);
    }

    #[test]
    fn represent_scaled_driver_on_b1() {
        let b1 = fixtures::b1::<Rational>();
        let w = driver_of(&b1);
        let d = b1.driver.scale(&q(1, 5));
        let k = represent(&d, &w, &b1.filtration, &b1.space).unwrap();
        assert_eq!(k.column(0, 1, 0), vec![q(1, 5)]);
    }

    #[test]
    fn trinomial_is_not_representable_by_one_driver() {
        let tri = fixtures::trinomial::<Rational>();
        let w = driver_of(&tri);
        // indicator of the middle state, centred
        let x = Process::scalar_from_fn(3, 1, |o, t| {
            if t == 0 {
                q(0, 1)
            } else if o == 1 {
                q(2, 3)
            } else {
                q(-1, 3)
            }
        });
        match represent(&x, &w, &tri.filtration, &tri.space) {
            Err(MrpError::NotRepresentable { time: 1, atom: 0, .. }) => {}
            other => panic!("expected NotRepresentable, got {other:?}"),
        }
        let wit = check_mrp(&tri.filtration, &w, &tri.space).unwrap_err();
        assert_eq!((wit.time, wit.atom, wit.multiplicity, wit.rank), (1, 0, 3, 1));
    }

    #[test]
    fn mrp_on_b2_and_multiplicities() {
        let b2 = fixtures::b2::<Rational>();
        assert!(check_mrp(&b2.filtration, &driver_of(&b2), &b2.space).is_ok());
        assert_eq!(conditional_multiplicity(&b2.filtration, 1, 0), 2);
        assert_eq!(conditional_multiplicity(&b2.filtration, 2, 1), 2);
        let flat = Filtration::new(vec![Partition::trivial(4), Partition::trivial(4)]).unwrap();
        assert_eq!(conditional_multiplicity(&flat, 1, 0), 1);
    }

    #[test]
    fn noise_at_final_time_breaks_mrp() {
        let fx = fixtures::b2n::<Rational>();
        let f = &fx.filtration;
        let noise: Vec<char> = fx.space.labels().iter().map(|l| l.chars().nth(2).unwrap()).collect();
        let mut parts = f.partitions().to_vec();
        let last = parts.len() - 1;
        parts[last] = parts[last].refine_by(&noise);
        let extended = Filtration::new(parts).unwrap();
        assert_eq!(conditional_multiplicity(&extended, 2, 0), 4);
        let w = Driver::new(fx.driver.clone(), &extended, &fx.space).unwrap();
        let wit = check_mrp(&extended, &w, &fx.space).unwrap_err();
        assert_eq!((wit.time, wit.multiplicity, wit.rank), (2, 4, 1));
    }

    #[test]
    fn single_jump_cases() {
        let b1 = fixtures::b1::<Rational>();
        let w = driver_of(&b1);
        let r = RandomTime::constant(2, Some(1));
        // ξ = ΔW_R: identity coefficient at R
        let xi: Vec<Rational> = (0..2).map(|o| b1.driver.increment(o, 1).remove(0)).collect();
        let k = single_jump_coefficient(&r, &xi, &b1.filtration, &w, &b1.space).unwrap();
        assert_eq!(k.column(0, 1, 0), vec![q(1, 1)]);
        // ξ deterministic before R: martingale vanishes
        let k = single_jump_coefficient(&r, &[q(3, 1), q(3, 1)], &b1.filtration, &w, &b1.space).unwrap();
        assert_eq!(k.column(1, 1, 0), vec![q(0, 1)]);
        // ξ = 1_{u}: 1_u - 1/2 = (1/2) ΔW
        let k = single_jump_coefficient(&r, &[q(1, 1), q(0, 1)], &b1.filtration, &w, &b1.space).unwrap();
        assert_eq!(k.column(0, 1, 0), vec![q(1, 2)]);
    }

    #[test]
    fn single_jump_consistency_on_b2() {
        let b2 = fixtures::b2::<Rational>();
        let w = driver_of(&b2);
        // R = 1 on first-coin up, else 2
        let r = RandomTime::new(vec![Some(1), Some(1), Some(2), Some(2)]);
        let xi = vec![q(2, 1), q(2, 1), q(5, 1), q(-1, 1)];
        let k = single_jump_coefficient(&r, &xi, &b2.filtration, &w, &b2.space).unwrap();
        let jump = jump_process(&r, &xi, 2);
        let expected = jump.sub(&compensator(&jump, &b2.filtration, &b2.space).unwrap()).unwrap();
        assert_eq!(k.integrate(&w), expected);
        // coefficient vanishes off {R = t}
        assert_eq!(k.column(0, 2, 0), vec![q(0, 1)]);
    }

    #[test]
    fn synthesized_drivers() {
        let b2 = fixtures::b2::<Rational>();
        let w = synthesize_driver(&b2.filtration, &b2.space).unwrap();
        assert_eq!(w.dim(), 1);
        assert_eq!(w.process().increment(0, 1), vec![q(1, 2)]);
        assert_eq!(w.process().increment(2, 1), vec![q(-1, 2)]);
        assert!(check_mrp(&b2.filtration, &w, &b2.space).is_ok());

        let tri = fixtures::trinomial::<Rational>();
        let w = synthesize_driver(&tri.filtration, &tri.space).unwrap();
        assert_eq!(w.dim(), 2);
        assert!(check_mrp(&tri.filtration, &w, &tri.space).is_ok());

        let flat = Filtration::new(vec![Partition::trivial(3), Partition::trivial(3)]).unwrap();
        let w = synthesize_driver(&flat, &tri.space).unwrap();
        assert_eq!(w.dim(), 0);
        assert!(check_mrp(&flat, &w, &tri.space).is_ok());
    }
}
