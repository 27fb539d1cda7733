//! Finite filtered probability spaces.
//!
//! Outcomes are indexed `0..n`. A filtration is a refining sequence of
//! partitions, one per grid time `0..=horizon`. Null outcomes are rejected at
//! construction, so every atom carries strictly positive mass and conditional
//! expectations are always defined.

use std::collections::BTreeMap;

use crate::error::Error;
use crate::scalar::{sum, Scalar};

mod process;

pub use process::Process;

/// Finite outcome set with strictly positive weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSpace<S> {
    labels: Vec<String>,
    weights: Vec<S>,
}

impl<S: Scalar> SampleSpace<S> {
    pub fn new(labels: Vec<String>, weights: Vec<S>) -> Result<Self, Error> {
        if labels.is_empty() {
            return Err(Error::invalid("sample space has no outcomes"));
        }
        if labels.len() != weights.len() {
            return Err(Error::invalid(format!(
                "{} outcome labels but {} weights",
                labels.len(),
                weights.len()
            )));
        }
        let mut seen = BTreeMap::new();
        for (i, l) in labels.iter().enumerate() {
            if let Some(j) = seen.insert(l.as_str(), i) {
                return Err(Error::invalid(format!("duplicate outcome label `{l}` (positions {j} and {i})")));
            }
        }
        for (l, w) in labels.iter().zip(&weights) {
            if !w.definitely_pos() {
                return Err(Error::invalid(format!(
                    "outcome `{l}` has weight {}; null outcomes must be removed",
                    w.render()
                )));
            }
        }
        let total = sum(weights.iter().cloned());
        if !total.approx_eq(&S::one()) {
            return Err(Error::invalid(format!("weights sum to {}, not 1", total.render())));
        }
        Ok(SampleSpace { labels, weights })
    }

    /// Uniform weights over the given labels.
    pub fn uniform(labels: Vec<String>) -> Result<Self, Error> {
        let n = labels.len() as i64;
        let weights = vec![S::from_frac(1, n.max(1)); labels.len()];
        Self::new(labels, weights)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, w: usize) -> &str {
        &self.labels[w]
    }

    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    pub fn weight(&self, w: usize) -> &S {
        &self.weights[w]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Probability of a set of outcomes.
    pub fn prob(&self, outcomes: &[usize]) -> S {
        sum(outcomes.iter().map(|&w| self.weights[w].clone()))
    }

    /// Expectation of a scalar random variable.
    pub fn expect(&self, x: &[S]) -> S {
        sum(x.iter().zip(&self.weights).map(|(a, p)| a.clone() * p.clone()))
    }

    /// Converts weights into another backend (used for mode comparisons).
    pub fn convert<T: Scalar>(&self, f: impl Fn(&S) -> T) -> Result<SampleSpace<T>, Error> {
        SampleSpace::new(self.labels.clone(), self.weights.iter().map(f).collect())
    }
}

/// A partition of `0..n` into non-empty atoms.
///
/// Atoms are kept in canonical order (sorted members, atoms ordered by their
/// smallest member) so that two equal partitions compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    atoms: Vec<Vec<usize>>,
    atom_of: Vec<usize>,
}

impl Partition {
    pub fn new(n: usize, atoms: Vec<Vec<usize>>) -> Result<Self, Error> {
        let mut atom_of = vec![usize::MAX; n];
        let mut atoms: Vec<Vec<usize>> = atoms
            .into_iter()
            .map(|mut a| {
                a.sort_unstable();
                a
            })
            .collect();
        if atoms.iter().any(Vec::is_empty) {
            return Err(Error::invalid("partition contains an empty atom"));
        }
        atoms.sort_by_key(|a| a[0]);
        for (k, atom) in atoms.iter().enumerate() {
            for &w in atom {
                if w >= n {
                    return Err(Error::invalid(format!("outcome index {w} out of range (n = {n})")));
                }
                if atom_of[w] != usize::MAX {
                    return Err(Error::invalid(format!("outcome {w} appears in two atoms")));
                }
                atom_of[w] = k;
            }
        }
        if let Some(w) = atom_of.iter().position(|&a| a == usize::MAX) {
            return Err(Error::invalid(format!("outcome {w} is not covered by the partition")));
        }
        Ok(Partition { atoms, atom_of })
    }

    pub fn trivial(n: usize) -> Self {
        Partition { atoms: vec![(0..n).collect()], atom_of: vec![0; n] }
    }

    pub fn discrete(n: usize) -> Self {
        Partition { atoms: (0..n).map(|w| vec![w]).collect(), atom_of: (0..n).collect() }
    }

    /// Partition into level sets of `key`.
    pub fn from_keys<K: Ord>(keys: &[K]) -> Self {
        let mut groups: BTreeMap<&K, Vec<usize>> = BTreeMap::new();
        for (w, k) in keys.iter().enumerate() {
            groups.entry(k).or_default().push(w);
        }
        Partition::new(keys.len(), groups.into_values().collect()).expect("level sets form a partition")
    }

    pub fn outcome_count(&self) -> usize {
        self.atom_of.len()
    }

    pub fn atoms(&self) -> &[Vec<usize>] {
        &self.atoms
    }

    pub fn atom(&self, k: usize) -> &[usize] {
        &self.atoms[k]
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Index of the atom containing outcome `w`.
    pub fn atom_of(&self, w: usize) -> usize {
        self.atom_of[w]
    }

    /// `true` iff every atom of `self` lies inside an atom of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        self.outcome_count() == coarser.outcome_count()
            && self.atoms.iter().all(|a| {
                let k = coarser.atom_of(a[0]);
                a.iter().all(|&w| coarser.atom_of(w) == k)
            })
    }

    /// Coarsest common refinement of `self` and the level sets of `key`.
    pub fn refine_by<K: Ord + Clone>(&self, keys: &[K]) -> Partition {
        assert_eq!(keys.len(), self.outcome_count());
        let pairs: Vec<(usize, K)> = (0..keys.len()).map(|w| (self.atom_of(w), keys[w].clone())).collect();
        Partition::from_keys(&pairs)
    }

    pub fn join(&self, other: &Partition) -> Partition {
        self.refine_by(&other.atom_of)
    }

    /// `true` iff `outcomes` is a union of atoms.
    pub fn is_union_of_atoms(&self, outcomes: &[usize]) -> bool {
        let mut member = vec![false; self.outcome_count()];
        for &w in outcomes {
            member[w] = true;
        }
        self.atoms.iter().all(|a| a.iter().all(|&w| member[w] == member[a[0]]))
    }

    /// `true` iff `x` is constant on every atom.
    pub fn measures<S: Scalar>(&self, x: &[S]) -> bool {
        self.atoms.iter().all(|a| a.iter().all(|&w| x[w].approx_eq(&x[a[0]])))
    }
}

/// Per-time refining partitions on a finite sample space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Filtration {
    partitions: Vec<Partition>,
}

impl Filtration {
    pub fn new(partitions: Vec<Partition>) -> Result<Self, Error> {
        if partitions.len() < 2 {
            return Err(Error::invalid("a filtration needs at least one step (horizon >= 1)"));
        }
        let n = partitions[0].outcome_count();
        for (t, p) in partitions.iter().enumerate() {
            if p.outcome_count() != n {
                return Err(Error::invalid(format!("partition at t={t} is over a different outcome set")));
            }
        }
        for t in 1..partitions.len() {
            if !partitions[t].refines(&partitions[t - 1]) {
                return Err(Error::invalid(format!("partition at t={t} does not refine the one at t={}", t - 1)));
            }
        }
        Ok(Filtration { partitions })
    }

    /// Filtration generated by a sequence of per-time observation keys:
    /// `F_t` is generated by `keys[0..=t]`.
    pub fn generated_by<K: Ord + Clone>(initial: Partition, keys_per_step: &[Vec<K>]) -> Result<Self, Error> {
        let mut parts = vec![initial];
        for keys in keys_per_step {
            let next = parts.last().expect("non-empty").refine_by(keys);
            parts.push(next);
        }
        Filtration::new(parts)
    }

    pub fn horizon(&self) -> usize {
        self.partitions.len() - 1
    }

    pub fn outcome_count(&self) -> usize {
        self.partitions[0].outcome_count()
    }

    pub fn at(&self, t: usize) -> &Partition {
        &self.partitions[t]
    }

    pub fn partitions(&self) -> &[Partition] {
        &self.partitions
    }

    /// Atom indices at time `t` contained in atom `atom` of time `t - 1`.
    pub fn children(&self, t: usize, atom: usize) -> Vec<usize> {
        assert!(t >= 1 && t <= self.horizon());
        let parent = self.at(t - 1).atom(atom);
        let fine = self.at(t);
        let mut kids: Vec<usize> = parent.iter().map(|&w| fine.atom_of(w)).collect();
        kids.sort_unstable();
        kids.dedup();
        kids
    }
}

/// Base filtration `F` together with an expansion `G` (`G_t ⊇ F_t`).
#[derive(Debug, Clone, PartialEq)]
pub struct EnlargementPair<S> {
    pub space: SampleSpace<S>,
    pub base: Filtration,
    pub expanded: Filtration,
}

impl<S: Scalar> EnlargementPair<S> {
    pub fn new(space: SampleSpace<S>, base: Filtration, expanded: Filtration) -> Result<Self, Error> {
        if base.outcome_count() != space.len() || expanded.outcome_count() != space.len() {
            return Err(Error::invalid("filtration and sample space disagree on the outcome count"));
        }
        let pair = EnlargementPair { space, base, expanded };
        if !check_refinement(&pair)? {
            return Err(Error::invalid("expanded filtration does not contain the base filtration"));
        }
        Ok(pair)
    }

    /// The trivial enlargement `G = F`.
    pub fn identity(space: SampleSpace<S>, base: Filtration) -> Self {
        EnlargementPair { space, expanded: base.clone(), base }
    }
}

/// Grid time or the "never" sentinel.
pub type Time = Option<usize>;

/// A random time on the grid; `None` encodes the infinite sentinel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomTime {
    values: Vec<Time>,
}

impl RandomTime {
    pub fn new(values: Vec<Time>) -> Self {
        RandomTime { values }
    }

    pub fn constant(n: usize, t: Time) -> Self {
        RandomTime { values: vec![t; n] }
    }

    pub fn values(&self) -> &[Time] {
        &self.values
    }

    pub fn at(&self, w: usize) -> Time {
        self.values[w]
    }

    /// Outcomes with `value <= t`.
    pub fn at_or_before(&self, t: usize) -> Vec<usize> {
        (0..self.values.len()).filter(|&w| matches!(self.values[w], Some(s) if s <= t)).collect()
    }

    /// `{value <= t}` is `F_t`-measurable for every grid time `t`.
    pub fn is_stopping_time(&self, f: &Filtration) -> bool {
        self.values.len() == f.outcome_count()
            && self.values.iter().all(|v| v.is_none_or(|s| s <= f.horizon()))
            && (0..=f.horizon()).all(|t| f.at(t).is_union_of_atoms(&self.at_or_before(t)))
    }
}

/// Atom-wise weighted average of `x` over `part`.
pub fn cond_exp<S: Scalar>(x: &[S], part: &Partition, space: &SampleSpace<S>) -> Result<Vec<S>, Error> {
    if x.len() != space.len() || part.outcome_count() != space.len() {
        return Err(Error::invalid("random variable, partition and space sizes differ"));
    }
    let mut out = vec![S::zero(); x.len()];
    for atom in part.atoms() {
        let mass = space.prob(atom);
        if mass.is_zero() {
            return Err(Error::Internal("atom of zero probability".into()));
        }
        let avg = sum(atom.iter().map(|&w| x[w].clone() * space.weight(w).clone())) / mass;
        for &w in atom {
            out[w] = avg.clone();
        }
    }
    Ok(out)
}

/// Weighted mean of a vector-valued quantity over one atom.
pub(crate) fn atom_mean_vec<S: Scalar>(
    atom: &[usize],
    space: &SampleSpace<S>,
    dim: usize,
    mut value: impl FnMut(usize) -> Vec<S>,
) -> Vec<S> {
    let mass = space.prob(atom);
    let mut acc = vec![S::zero(); dim];
    for &w in atom {
        let v = value(w);
        let p = space.weight(w).clone();
        for (a, x) in acc.iter_mut().zip(v) {
            *a = a.clone() + x * p.clone();
        }
    }
    acc.into_iter().map(|a| a / mass.clone()).collect()
}

/// `G_t = F_t ∨ σ(Z)` for every `t`.
pub fn build_initial_enlargement<K: Ord + Clone>(f: &Filtration, z: &[K]) -> Filtration {
    let parts = f.partitions().iter().map(|p| p.refine_by(z)).collect();
    Filtration::new(parts).expect("refining every level preserves monotonicity")
}

/// `G_t = F_t ∨ σ(τ ∧ (t+1))`: `G` observes the events `{τ <= s}` for `s <= t`.
pub fn build_progressive_enlargement(f: &Filtration, tau: &RandomTime) -> Filtration {
    let parts = (0..=f.horizon())
        .map(|t| {
            let capped: Vec<usize> = tau.values().iter().map(|v| v.map_or(t + 1, |s| s.min(t + 1))).collect();
            f.at(t).refine_by(&capped)
        })
        .collect();
    Filtration::new(parts).expect("progressive enlargement is monotone")
}

/// `true` iff every `G`-atom at every time lies in an `F`-atom at the same time.
pub fn check_refinement<S: Scalar>(pair: &EnlargementPair<S>) -> Result<bool, Error> {
    if pair.base.horizon() != pair.expanded.horizon() {
        return Err(Error::invalid(format!(
            "horizon mismatch: base {} vs expanded {}",
            pair.base.horizon(),
            pair.expanded.horizon()
        )));
    }
    Ok((0..=pair.base.horizon()).all(|t| pair.expanded.at(t).refines(pair.base.at(t))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::scalar::Rational;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from_frac(n, d)
    }

    fn abc() -> SampleSpace<Rational> {
        SampleSpace::new(vec!["a".into(), "b".into(), "c".into()], vec![q(1, 4), q(1, 4), q(1, 2)]).unwrap()
    }

    #[test]
    fn cond_exp_weighted_average() {
        let part = Partition::new(3, vec![vec![0, 1], vec![2]]).unwrap();
        let x = vec![q(1, 1), q(3, 1), q(5, 1)];
        assert_eq!(cond_exp(&x, &part, &abc()).unwrap(), vec![q(2, 1), q(2, 1), q(5, 1)]);
    }

    #[test]
    fn cond_exp_identity_cases() {
        let sp = abc();
        let seven = vec![q(7, 1); 3];
        let part = Partition::new(3, vec![vec![0, 2], vec![1]]).unwrap();
        assert_eq!(cond_exp(&seven, &part, &sp).unwrap(), seven);
        let x = vec![q(1, 3), q(-2, 1), q(9, 7)];
        assert_eq!(cond_exp(&x, &Partition::discrete(3), &sp).unwrap(), x);
    }

    #[test]
    fn rejects_null_and_unnormalised_weights() {
        assert!(SampleSpace::new(vec!["a".into(), "b".into()], vec![q(1, 1), q(0, 1)]).is_err());
        assert!(SampleSpace::new(vec!["a".into(), "b".into()], vec![q(1, 2), q(1, 3)]).is_err());
        assert!(SampleSpace::new(vec!["a".into(), "a".into()], vec![q(1, 2), q(1, 2)]).is_err());
    }

    #[test]
    fn partition_validation() {
        assert!(Partition::new(3, vec![vec![0, 1]]).is_err());
        assert!(Partition::new(3, vec![vec![0, 1], vec![1, 2]]).is_err());
        assert!(Partition::new(2, vec![vec![0, 1], vec![]]).is_err());
        let p = Partition::new(3, vec![vec![2], vec![1, 0]]).unwrap();
        assert_eq!(p.atoms(), &[vec![0, 1], vec![2]]);
    }

    #[test]
    fn filtration_must_refine() {
        let coarse = Partition::trivial(2);
        let fine = Partition::discrete(2);
        assert!(Filtration::new(vec![fine.clone(), coarse.clone()]).is_err());
        assert!(Filtration::new(vec![coarse]).is_err());
    }

    #[test]
    fn initial_enlargement_by_first_coin() {
        let b2 = fixtures::b2::<Rational>();
        let z = fixtures::first_coin_keys(&b2.space);
        let g = build_initial_enlargement(&b2.filtration, &z);
        // outcomes are uu, ud, du, dd
        assert_eq!(g.at(0).atoms(), &[vec![0, 1], vec![2, 3]]);
        assert_eq!(g.at(1), b2.filtration.at(1));
        let pair = EnlargementPair::new(b2.space.clone(), b2.filtration.clone(), g).unwrap();
        assert!(check_refinement(&pair).unwrap());
    }

    #[test]
    fn initial_enlargement_trivial_cases() {
        let b2 = fixtures::b2::<Rational>();
        let g = build_initial_enlargement(&b2.filtration, &[0u8; 4]);
        assert_eq!(g, b2.filtration);
        let g = build_initial_enlargement(&b2.filtration, &[0u8, 0, 1, 1]);
        assert_eq!(g.at(0).len(), 2);
    }

    #[test]
    fn progressive_enlargement_cases() {
        let b2 = fixtures::b2::<Rational>();
        let f = &b2.filtration;
        assert_eq!(&build_progressive_enlargement(f, &RandomTime::constant(4, None)), f);
        assert_eq!(&build_progressive_enlargement(f, &RandomTime::constant(4, Some(0))), f);
        // first time W hits +1: tau = 1 on {uu, ud}, never otherwise
        let tau = RandomTime::new(vec![Some(1), Some(1), None, None]);
        let g = build_progressive_enlargement(f, &tau);
        assert_eq!(&g, f);
        // a time F cannot see: tau = 2 on uu only is F-stopping, tau = 1 on {uu} is not
        let hidden = RandomTime::new(vec![Some(1), None, None, None]);
        assert!(!hidden.is_stopping_time(f));
        let g = build_progressive_enlargement(f, &hidden);
        assert_eq!(g.at(1).len(), 3);
        assert!(g.at(1).refines(f.at(1)));
    }

    #[test]
    fn refinement_is_asymmetric() {
        let b2 = fixtures::b2::<Rational>();
        let g = build_initial_enlargement(&b2.filtration, &fixtures::first_coin_keys(&b2.space));
        let swapped = EnlargementPair {
            space: b2.space.clone(),
            base: g.clone(),
            expanded: b2.filtration.clone(),
        };
        assert!(!check_refinement(&swapped).unwrap());
        assert!(EnlargementPair::new(b2.space.clone(), g, b2.filtration.clone()).is_err());
        let same = EnlargementPair::identity(b2.space.clone(), b2.filtration.clone());
        assert!(check_refinement(&same).unwrap());
    }

    #[test]
    fn mismatched_horizons_rejected() {
        let b2 = fixtures::b2::<Rational>();
        let pair = EnlargementPair {
            space: b2.space.clone(),
            base: b2.filtration.clone(),
            expanded: Filtration::new(vec![Partition::trivial(4), Partition::discrete(4)]).unwrap(),
        };
        assert!(check_refinement(&pair).is_err());
    }

    #[test]
    fn stopping_time_flag() {
        let b2 = fixtures::b2::<Rational>();
        let tau = RandomTime::new(vec![Some(1), Some(1), Some(2), None]);
        assert!(tau.is_stopping_time(&b2.filtration));
        for t in 0..=2 {
            assert!(b2.filtration.at(t).is_union_of_atoms(&tau.at_or_before(t)));
        }
    }
}
