//! Window states: remaining-visibility times of the spikes in the memory window.

use alloc::{format, vec, vec::Vec};

use crate::{Error, Result};

/// A spiking unit: an external source or a network neuron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Unit {
    Source(usize),
    Neuron(usize),
}

impl Unit {
    pub fn is_source(&self) -> bool {
        matches!(self, Unit::Source(_))
    }
}

impl core::fmt::Display for Unit {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Unit::Source(k) => write!(f, "source {k}"),
            Unit::Neuron(i) => write!(f, "neuron {i}"),
        }
    }
}

/// Times until each visible spike leaves the window `(t - theta, t]`.
///
/// Every unit holds a strictly decreasing vector in `(0, theta]`, most recent
/// spike first. Units are laid out sources first, then neurons.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowState {
    theta: f64,
    sources: usize,
    ages: Vec<Vec<f64>>,
}

impl WindowState {
    /// The silent state.
    pub fn empty(theta: f64, sources: usize, neurons: usize) -> Self {
        Self { theta, sources, ages: vec![Vec::new(); sources + neurons] }
    }

    /// Builds a state from explicit age vectors, rejecting anything that is not
    /// strictly decreasing inside `(0, theta]`.
    pub fn from_ages(theta: f64, sources: Vec<Vec<f64>>, neurons: Vec<Vec<f64>>) -> Result<Self> {
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::InvalidState(format!("window length must be positive, got {theta}")));
        }
        let n_sources = sources.len();
        let ages: Vec<Vec<f64>> = sources.into_iter().chain(neurons).collect();
        for (u, v) in ages.iter().enumerate() {
            let mut prev = f64::INFINITY;
            for &x in v {
                if !(x > 0.0 && x <= theta) {
                    return Err(Error::InvalidState(format!("unit {u}: age {x} outside (0, {theta}]")));
                }
                if x >= prev {
                    return Err(Error::InvalidState(format!("unit {u}: ages not strictly decreasing at {x}")));
                }
                prev = x;
            }
        }
        Ok(Self { theta, sources: n_sources, ages })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn num_sources(&self) -> usize {
        self.sources
    }

    pub fn num_neurons(&self) -> usize {
        self.ages.len() - self.sources
    }

    pub fn num_units(&self) -> usize {
        self.ages.len()
    }

    /// Position of `unit` in the flat layout (sources first).
    pub fn slot(&self, unit: Unit) -> Result<usize> {
        match unit {
            Unit::Source(k) if k < self.sources => Ok(k),
            Unit::Neuron(i) if i < self.num_neurons() => Ok(self.sources + i),
            Unit::Source(k) => Err(Error::UnitOutOfRange { index: k, len: self.sources }),
            Unit::Neuron(i) => Err(Error::UnitOutOfRange { index: i, len: self.num_neurons() }),
        }
    }

    /// Inverse of [`WindowState::slot`].
    pub fn unit_at(&self, slot: usize) -> Unit {
        if slot < self.sources {
            Unit::Source(slot)
        } else {
            Unit::Neuron(slot - self.sources)
        }
    }

    pub fn ages(&self, unit: Unit) -> Result<&[f64]> {
        Ok(&self.ages[self.slot(unit)?])
    }

    #[inline]
    pub fn slot_ages(&self, slot: usize) -> &[f64] {
        &self.ages[slot]
    }

    #[inline]
    pub(crate) fn source_ages(&self, k: usize) -> &[f64] {
        &self.ages[k]
    }

    #[inline]
    pub(crate) fn neuron_ages(&self, i: usize) -> &[f64] {
        &self.ages[self.sources + i]
    }

    /// Spike counts per unit: the index of the state-space component.
    pub fn counts(&self) -> Vec<usize> {
        self.ages.iter().map(Vec::len).collect()
    }

    pub fn total_count(&self) -> usize {
        self.ages.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.ages.iter().all(Vec::is_empty)
    }

    /// All ages concatenated in slot order: the point inside its component.
    pub fn coordinates(&self) -> Vec<f64> {
        self.ages.iter().flatten().copied().collect()
    }

    /// Lets all ages decay by `dt`; spikes reaching zero leave the window.
    pub fn advance(&mut self, dt: f64) -> Result<()> {
        if !(dt >= 0.0 && dt.is_finite()) {
            return Err(Error::NegativeStep(dt));
        }
        self.drift(dt);
        Ok(())
    }

    /// Non-mutating form of [`WindowState::advance`].
    pub fn advanced(&self, dt: f64) -> Result<Self> {
        let mut next = self.clone();
        next.advance(dt)?;
        Ok(next)
    }

    #[inline]
    pub(crate) fn drift(&mut self, dt: f64) {
        if dt == 0.0 {
            return;
        }
        for v in &mut self.ages {
            for x in v.iter_mut() {
                *x -= dt;
            }
            while v.last().is_some_and(|&x| x <= 0.0) {
                v.pop();
            }
        }
    }

    /// Records a new spike of `unit`: its vector becomes `(theta, old ages...)`.
    pub fn spike(&mut self, unit: Unit) -> Result<()> {
        let slot = self.slot(unit)?;
        self.spike_slot(slot);
        Ok(())
    }

    /// Non-mutating form of [`WindowState::spike`].
    pub fn spiked(&self, unit: Unit) -> Result<Self> {
        let mut next = self.clone();
        next.spike(unit)?;
        Ok(next)
    }

    #[inline]
    pub(crate) fn spike_slot(&mut self, slot: usize) {
        let v = &mut self.ages[slot];
        debug_assert!(v.first().is_none_or(|&x| x < self.theta), "coincident spikes");
        v.insert(0, self.theta);
    }

    /// Age of the most recent spike of the unit at `slot`, if any.
    #[inline]
    pub fn head(&self, slot: usize) -> Option<f64> {
        self.ages[slot].first().copied()
    }

    /// Time until the two states coincide under pure drift, or `None` if they
    /// are already equal. Spikes shared by both (bitwise equal ages) are
    /// ignored; the answer is the largest age among the unmatched ones.
    pub fn divergence_horizon(&self, other: &Self) -> Option<f64> {
        debug_assert_eq!(self.ages.len(), other.ages.len());
        let mut horizon: Option<f64> = None;
        let mut note = |x: f64| horizon = Some(horizon.map_or(x, |h: f64| h.max(x)));
        for (a, b) in self.ages.iter().zip(&other.ages) {
            let (mut i, mut j) = (0, 0);
            while i < a.len() || j < b.len() {
                match (a.get(i), b.get(j)) {
                    (Some(&x), Some(&y)) if x == y => {
                        i += 1;
                        j += 1;
                    }
                    (Some(&x), Some(&y)) => {
                        if x > y {
                            note(x);
                            i += 1;
                        } else {
                            note(y);
                            j += 1;
                        }
                    }
                    (Some(&x), None) => {
                        note(x);
                        i += 1;
                    }
                    (None, Some(&y)) => {
                        note(y);
                        j += 1;
                    }
                    (None, None) => unreachable!(),
                }
            }
        }
        horizon
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one_unit(ages: &[f64]) -> WindowState {
        WindowState::from_ages(1.0, vec![ages.to_vec()], vec![]).unwrap()
    }

    #[test]
    fn advance_drops_expired_spikes() {
        let s = one_unit(&[0.7, 0.2]).advanced(0.3).unwrap();
        assert_eq!(s.slot_ages(0).len(), 1);
        assert!((s.slot_ages(0)[0] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn advance_to_exact_zero_removes() {
        let s = one_unit(&[0.5, 0.25]).advanced(0.25).unwrap();
        assert_eq!(s.slot_ages(0), &[0.25]);
    }

    #[test]
    fn zero_step_is_identity() {
        let s = one_unit(&[0.9, 0.3, 0.1]);
        assert_eq!(s.advanced(0.0).unwrap(), s);
    }

    #[test]
    fn negative_step_rejected() {
        assert_eq!(one_unit(&[]).advance(-0.1), Err(Error::NegativeStep(-0.1)));
    }

    #[test]
    fn spike_prepends_theta() {
        let s = one_unit(&[]).spiked(Unit::Source(0)).unwrap();
        assert_eq!(s.slot_ages(0), &[1.0]);
        let s = one_unit(&[0.4]).spiked(Unit::Source(0)).unwrap();
        assert_eq!(s.slot_ages(0), &[1.0, 0.4]);
    }

    #[test]
    fn construction_rejects_non_strict_vectors() {
        assert!(WindowState::from_ages(1.0, vec![vec![0.5, 0.5]], vec![]).is_err());
        assert!(WindowState::from_ages(1.0, vec![vec![0.2, 0.5]], vec![]).is_err());
        assert!(WindowState::from_ages(1.0, vec![vec![1.2]], vec![]).is_err());
        assert!(WindowState::from_ages(1.0, vec![vec![0.0]], vec![]).is_err());
    }

    #[test]
    fn horizon_ignores_shared_spikes() {
        let a = WindowState::from_ages(1.0, vec![vec![0.9, 0.5]], vec![vec![0.3]]).unwrap();
        let b = WindowState::from_ages(1.0, vec![vec![0.9, 0.5]], vec![vec![0.7, 0.3]]).unwrap();
        assert_eq!(a.divergence_horizon(&a), None);
        assert_eq!(a.divergence_horizon(&b), Some(0.7));
    }

    fn state_strategy() -> impl Strategy<Value = WindowState> {
        let unit = proptest::collection::btree_set(1u32..=1000, 0..6).prop_map(|set| {
            set.into_iter().rev().map(|k| k as f64 / 1000.0).collect::<Vec<f64>>()
        });
        (proptest::collection::vec(unit.clone(), 0..3), proptest::collection::vec(unit, 0..3))
            .prop_map(|(s, n)| WindowState::from_ages(1.0, s, n).unwrap())
    }

    fn check_valid(s: &WindowState) {
        for slot in 0..s.num_units() {
            let v = s.slot_ages(slot);
            assert!(v.iter().all(|&x| x > 0.0 && x <= s.theta()));
            assert!(v.windows(2).all(|w| w[0] > w[1]));
        }
    }

    proptest! {
        // Expiry times are deterministic: the surviving spikes after a then b
        // are exactly those older than a + b, each shifted by a + b.
        #[test]
        fn advance_is_a_semigroup(s in state_strategy(), a in 0.0f64..1.2, b in 0.0f64..1.2) {
            let two = s.advanced(a).unwrap().advanced(b).unwrap();
            let one = s.advanced(a + b).unwrap();
            for slot in 0..s.num_units() {
                let survivors: Vec<f64> = s.slot_ages(slot).iter()
                    .filter(|&&x| x - (a + b) > 1e-9).map(|&x| x - (a + b)).collect();
                let borderline = s.slot_ages(slot).iter().any(|&x| (x - (a + b)).abs() <= 1e-9);
                if !borderline {
                    prop_assert_eq!(two.slot_ages(slot).len(), survivors.len());
                    prop_assert_eq!(one.slot_ages(slot).len(), survivors.len());
                    for ((x, y), z) in two.slot_ages(slot).iter().zip(one.slot_ages(slot)).zip(&survivors) {
                        prop_assert!((x - z).abs() < 1e-12 && (y - z).abs() < 1e-12);
                    }
                }
            }
            check_valid(&two);
        }

        #[test]
        fn spike_increments_one_count(s in state_strategy(), pick in 0usize..6) {
            prop_assume!(s.num_units() > 0);
            let slot = pick % s.num_units();
            let s = s.advanced(1e-3).unwrap();
            let next = {
                let mut n = s.clone();
                n.spike_slot(slot);
                n
            };
            for u in 0..s.num_units() {
                let expect = s.slot_ages(u).len() + usize::from(u == slot);
                prop_assert_eq!(next.slot_ages(u).len(), expect);
            }
            check_valid(&next);
        }
    }
}
