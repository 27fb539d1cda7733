use crate::error::Error;
use crate::scalar::Scalar;
use crate::space::Filtration;

/// Real- or vector-valued process indexed by `(outcome, time)`.
///
/// Matrix-valued processes (brackets of vector processes) are stored
/// row-major with `dim = rows * cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct Process<S> {
    outcomes: usize,
    horizon: usize,
    dim: usize,
    data: Vec<S>,
}

impl<S: Scalar> Process<S> {
    pub fn zeros(outcomes: usize, horizon: usize, dim: usize) -> Self {
        Process { outcomes, horizon, dim, data: vec![S::zero(); outcomes * (horizon + 1) * dim] }
    }

    pub fn constant(outcomes: usize, horizon: usize, value: Vec<S>) -> Self {
        Self::from_fn(outcomes, horizon, value.len(), |_, _| value.clone())
    }

    pub fn from_fn(outcomes: usize, horizon: usize, dim: usize, mut f: impl FnMut(usize, usize) -> Vec<S>) -> Self {
        let mut data = Vec::with_capacity(outcomes * (horizon + 1) * dim);
        for w in 0..outcomes {
            for t in 0..=horizon {
                let v = f(w, t);
                assert_eq!(v.len(), dim, "process value at ({w}, {t}) has wrong dimension");
                data.extend(v);
            }
        }
        Process { outcomes, horizon, dim, data }
    }

    pub fn scalar_from_fn(outcomes: usize, horizon: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        Self::from_fn(outcomes, horizon, 1, |w, t| vec![f(w, t)])
    }

    /// Builds `X_t = X_0 + sum_{s<=t} dX_s` from initial values and increments.
    pub fn from_increments(
        outcomes: usize,
        horizon: usize,
        dim: usize,
        initial: impl Fn(usize) -> Vec<S>,
        increment: impl Fn(usize, usize) -> Vec<S>,
    ) -> Self {
        let mut p = Self::zeros(outcomes, horizon, dim);
        for w in 0..outcomes {
            let mut acc = initial(w);
            assert_eq!(acc.len(), dim);
            p.set(w, 0, acc.clone());
            for t in 1..=horizon {
                for (a, d) in acc.iter_mut().zip(increment(w, t)) {
                    *a = a.clone() + d;
                }
                p.set(w, t, acc.clone());
            }
        }
        p
    }

    pub fn outcomes(&self) -> usize {
        self.outcomes
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn offset(&self, w: usize, t: usize) -> usize {
        debug_assert!(w < self.outcomes && t <= self.horizon);
        (w * (self.horizon + 1) + t) * self.dim
    }

    pub fn at(&self, w: usize, t: usize) -> &[S] {
        let o = self.offset(w, t);
        &self.data[o..o + self.dim]
    }

    /// First component; convenient for scalar processes.
    pub fn value(&self, w: usize, t: usize) -> &S {
        &self.at(w, t)[0]
    }

    pub fn set(&mut self, w: usize, t: usize, v: Vec<S>) {
        assert_eq!(v.len(), self.dim);
        let o = self.offset(w, t);
        for (slot, x) in self.data[o..o + self.dim].iter_mut().zip(v) {
            *slot = x;
        }
    }

    /// `X_t - X_{t-1}`; zero at `t = 0`.
    pub fn increment(&self, w: usize, t: usize) -> Vec<S> {
        if t == 0 {
            return vec![S::zero(); self.dim];
        }
        self.at(w, t).iter().zip(self.at(w, t - 1)).map(|(a, b)| a.clone() - b.clone()).collect()
    }

    /// Component `c` of the time-`t` value as a random variable.
    pub fn slice(&self, t: usize, c: usize) -> Vec<S> {
        (0..self.outcomes).map(|w| self.at(w, t)[c].clone()).collect()
    }

    pub fn component(&self, c: usize) -> Process<S> {
        Self::from_fn(self.outcomes, self.horizon, 1, |w, t| vec![self.at(w, t)[c].clone()])
    }

    /// Concatenates components of processes on the same grid.
    pub fn stack(parts: &[&Process<S>]) -> Process<S> {
        let first = parts.first().expect("at least one process");
        let dim = parts.iter().map(|p| p.dim).sum();
        Self::from_fn(first.outcomes, first.horizon, dim, |w, t| {
            parts.iter().flat_map(|p| p.at(w, t).to_vec()).collect()
        })
    }

    pub fn same_grid(&self, other: &Process<S>) -> bool {
        self.outcomes == other.outcomes && self.horizon == other.horizon
    }

    fn zip_with(&self, other: &Process<S>, f: impl Fn(&S, &S) -> S) -> Result<Process<S>, Error> {
        if !self.same_grid(other) || self.dim != other.dim {
            return Err(Error::invalid(format!(
                "process shapes differ: ({}, {}, {}) vs ({}, {}, {})",
                self.outcomes, self.horizon, self.dim, other.outcomes, other.horizon, other.dim
            )));
        }
        Ok(Process {
            outcomes: self.outcomes,
            horizon: self.horizon,
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, other: &Process<S>) -> Result<Process<S>, Error> {
        self.zip_with(other, |a, b| a.clone() + b.clone())
    }

    pub fn sub(&self, other: &Process<S>) -> Result<Process<S>, Error> {
        self.zip_with(other, |a, b| a.clone() - b.clone())
    }

    pub fn map(&self, f: impl Fn(&S) -> S) -> Process<S> {
        Process { outcomes: self.outcomes, horizon: self.horizon, dim: self.dim, data: self.data.iter().map(f).collect() }
    }

    pub fn neg(&self) -> Process<S> {
        self.map(|x| -x.clone())
    }

    pub fn scale(&self, c: &S) -> Process<S> {
        self.map(|x| x.clone() * c.clone())
    }

    /// Pointwise product of two scalar processes.
    pub fn mul_scalar_process(&self, other: &Process<S>) -> Result<Process<S>, Error> {
        if self.dim != 1 {
            return Err(Error::invalid("pointwise product expects a scalar left factor"));
        }
        if !self.same_grid(other) {
            return Err(Error::invalid("processes live on different grids"));
        }
        Ok(Self::from_fn(self.outcomes, self.horizon, other.dim, |w, t| {
            let a = self.value(w, t).clone();
            other.at(w, t).iter().map(|b| a.clone() * b.clone()).collect()
        }))
    }

    /// `X - X_0`.
    pub fn minus_initial(&self) -> Process<S> {
        Self::from_fn(self.outcomes, self.horizon, self.dim, |w, t| {
            self.at(w, t).iter().zip(self.at(w, 0)).map(|(a, b)| a.clone() - b.clone()).collect()
        })
    }

    /// `X_{t-1}` at time `t` (with `X_{0-} = X_0`).
    pub fn lagged(&self) -> Process<S> {
        Self::from_fn(self.outcomes, self.horizon, self.dim, |w, t| self.at(w, t.saturating_sub(1)).to_vec())
    }

    pub fn approx_eq(&self, other: &Process<S>) -> bool {
        self.same_grid(other) && self.dim == other.dim && self.data.iter().zip(&other.data).all(|(a, b)| a.approx_eq(b))
    }

    /// Largest absolute entrywise difference (for diagnostics).
    pub fn max_abs_diff(&self, other: &Process<S>) -> S {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.clone() - b.clone()).abs())
            .fold(S::zero(), |m, x| if x > m { x } else { m })
    }

    pub fn values(&self) -> &[S] {
        &self.data
    }

    /// First `(w, t)` whose value is not constant on its `F_t` atom.
    pub fn adaptedness_violation(&self, f: &Filtration) -> Option<(usize, usize)> {
        self.measurability_violation(f, 0)
    }

    /// First `(w, t)` whose value is not constant on its `F_{t-1}` atom
    /// (at `t = 0` the value must be deterministic).
    pub fn predictability_violation(&self, f: &Filtration) -> Option<(usize, usize)> {
        self.measurability_violation(f, 1)
    }

    fn measurability_violation(&self, f: &Filtration, lag: usize) -> Option<(usize, usize)> {
        for t in 0..=self.horizon {
            let part = if t >= lag { f.at(t - lag).clone() } else { crate::space::Partition::trivial(self.outcomes) };
            for atom in part.atoms() {
                let w0 = atom[0];
                for &w in &atom[1..] {
                    if self.at(w, t).iter().zip(self.at(w0, t)).any(|(a, b)| !a.approx_eq(b)) {
                        return Some((w, t));
                    }
                }
            }
        }
        None
    }

    pub fn is_adapted(&self, f: &Filtration) -> bool {
        self.adaptedness_violation(f).is_none()
    }

    pub fn is_predictable(&self, f: &Filtration) -> bool {
        self.predictability_violation(f).is_none()
    }

    pub fn convert<T: Scalar>(&self, f: impl Fn(&S) -> T) -> Process<T> {
        Process { outcomes: self.outcomes, horizon: self.horizon, dim: self.dim, data: self.data.iter().map(f).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::scalar::Rational;

    #[test]
    fn increments_and_reconstruction() {
        let b2 = fixtures::b2::<Rational>();
        let w = &b2.driver;
        let rebuilt = Process::from_increments(4, 2, 1, |_| vec![Rational::from_int(0)], |o, t| w.increment(o, t));
        assert_eq!(&rebuilt, w);
        assert_eq!(w.increment(0, 0), vec![Rational::from_int(0)]);
    }

    #[test]
    fn measurability_checks() {
        let b2 = fixtures::b2::<Rational>();
        assert!(b2.driver.is_adapted(&b2.filtration));
        assert!(!b2.driver.is_predictable(&b2.filtration));
        assert!(b2.driver.lagged().is_predictable(&b2.filtration));
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let a = Process::<Rational>::zeros(2, 1, 1);
        let b = Process::<Rational>::zeros(2, 1, 2);
        assert!(a.add(&b).is_err());
    }
}
