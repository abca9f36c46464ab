//! Phonon-number distributions, one per motional mode.
//!
//! A [`FockDistribution`] is a truncated probability vector `p_0..p_nmax`
//! over phonon numbers. Thermal states are the workhorse constructor; the
//! truncation index is chosen so that the dropped geometric tail is below
//! 1e-9 and the vector is renormalized to sum to one exactly. Modes are
//! treated as independent throughout, so a crystal state is just a map from
//! mode label to distribution.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

use crate::crystal::ModeLabel;

/// Analytic thermal tail mass allowed past the truncation index.
pub const THERMAL_TAIL_BOUND: f64 = 1e-9;
/// Smallest truncation index used for thermal construction.
pub const MIN_TRUNCATION: usize = 32;
/// Normalization slack accepted on hand-built vectors before renormalizing.
const INPUT_NORM_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum PhononError {
    #[error("mean phonon number must be nonnegative, got {0}")]
    NegativeMean(f64),
    #[error("probability vector must be nonempty")]
    Empty,
    #[error("probability at index {index} is negative: {value}")]
    NegativeProbability { index: usize, value: f64 },
    #[error("probability vector sums to {sum}, expected 1")]
    NotNormalized { sum: f64 },
    #[error("requested truncation {requested} keeps a thermal tail above {bound:.0e}; need at least {needed}")]
    TruncationTooSmall { requested: usize, needed: usize, bound: f64 },
}

/// Truncated phonon-number distribution for a single mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FockDistribution {
    probs: Vec<f64>,
}

/// Smallest index n_max for which the thermal tail `(n̄/(n̄+1))^(n_max+1)`
/// drops below `bound`, at least [`MIN_TRUNCATION`].
pub fn thermal_truncation(n_bar: f64, bound: f64) -> usize {
    if n_bar <= 0.0 {
        return MIN_TRUNCATION;
    }
    let log_ratio = (n_bar / (n_bar + 1.0)).ln();
    let needed = (bound.ln() / log_ratio - 1.0).ceil().max(0.0) as usize;
    needed.max(MIN_TRUNCATION)
}

impl FockDistribution {
    /// The motional ground state.
    pub fn ground() -> Self {
        let mut probs = vec![0.0; MIN_TRUNCATION + 1];
        probs[0] = 1.0;
        Self { probs }
    }

    /// Thermal (geometric) state with mean phonon number `n_bar`,
    /// `p_n ∝ (n̄/(n̄+1))^n`. Pass `n_max = 0` to pick the truncation
    /// automatically from the tail bound.
    pub fn thermal(n_bar: f64, n_max: usize) -> Result<Self, PhononError> {
        if n_bar < 0.0 || !n_bar.is_finite() {
            return Err(PhononError::NegativeMean(n_bar));
        }
        let needed = thermal_truncation(n_bar, THERMAL_TAIL_BOUND);
        let n_max = if n_max == 0 {
            needed
        } else if n_max < needed {
            return Err(PhononError::TruncationTooSmall {
                requested: n_max,
                needed,
                bound: THERMAL_TAIL_BOUND,
            });
        } else {
            n_max
        };
        let ratio = n_bar / (n_bar + 1.0);
        let mut probs = Vec::with_capacity(n_max + 1);
        let mut p = 1.0 / (n_bar + 1.0);
        for _ in 0..=n_max {
            probs.push(p);
            p *= ratio;
        }
        let mut dist = Self { probs };
        dist.renormalize();
        Ok(dist)
    }

    /// Wrap an explicit probability vector. The vector must be nonnegative
    /// and already normalized to within 1e-9; it is then renormalized
    /// exactly.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self, PhononError> {
        if probs.is_empty() {
            return Err(PhononError::Empty);
        }
        for (index, &value) in probs.iter().enumerate() {
            if value < 0.0 || !value.is_finite() {
                return Err(PhononError::NegativeProbability { index, value });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > INPUT_NORM_TOL {
            return Err(PhononError::NotNormalized { sum });
        }
        let mut dist = Self { probs };
        dist.renormalize();
        Ok(dist)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Largest represented phonon number.
    pub fn n_max(&self) -> usize {
        self.probs.len() - 1
    }

    /// Mean phonon number `Σ n·p_n`.
    pub fn mean_phonon(&self) -> f64 {
        self.probs.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    /// Ground-state population `p_0`.
    pub fn ground_pop(&self) -> f64 {
        self.probs[0]
    }

    /// Serialization view as `(n, p_n)` pairs.
    pub fn occupation_pairs(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.probs.iter().copied().enumerate()
    }

    pub(crate) fn renormalize(&mut self) {
        let sum: f64 = self.probs.iter().sum();
        for p in &mut self.probs {
            *p /= sum;
        }
    }

    /// Grow the vector with zero-probability entries up to `n_max`.
    pub(crate) fn extended_to(&self, n_max: usize) -> Self {
        let mut probs = self.probs.clone();
        if probs.len() < n_max + 1 {
            probs.resize(n_max + 1, 0.0);
        }
        Self { probs }
    }

    pub(crate) fn from_raw_normalized(probs: Vec<f64>) -> Self {
        let mut dist = Self { probs };
        dist.renormalize();
        dist
    }
}

/// Per-mode phonon distributions for the whole crystal.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ModeStateSet {
    states: BTreeMap<ModeLabel, FockDistribution>,
}

impl ModeStateSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Thermal state per mode from `(label, n̄)` pairs with automatic
    /// truncation.
    pub fn thermal(pairs: &[(ModeLabel, f64)]) -> Result<Self, PhononError> {
        let mut set = Self::new();
        for &(label, n_bar) in pairs {
            set.insert(label, FockDistribution::thermal(n_bar, 0)?);
        }
        Ok(set)
    }

    pub fn insert(&mut self, label: ModeLabel, dist: FockDistribution) {
        self.states.insert(label, dist);
    }

    pub fn get(&self, label: ModeLabel) -> Option<&FockDistribution> {
        self.states.get(&label)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ModeLabel, &FockDistribution)> {
        self.states.iter().map(|(label, dist)| (*label, dist))
    }

    pub fn labels(&self) -> impl Iterator<Item = ModeLabel> + '_ {
        self.states.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// True when every listed label has exactly one distribution here.
    pub fn covers(&self, labels: &[ModeLabel]) -> bool {
        labels.iter().all(|label| self.states.contains_key(label))
    }
}

impl FromIterator<(ModeLabel, FockDistribution)> for ModeStateSet {
    fn from_iter<T: IntoIterator<Item = (ModeLabel, FockDistribution)>>(iter: T) -> Self {
        Self { states: iter.into_iter().collect() }
    }
}
