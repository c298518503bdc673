//! Value types: probability vectors, sorted vectors, finitely supported
//! measures on `[0, 1]`, and the interval geometry used to localize
//! empirical frequencies.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A probability vector over `S` symbols: entries nonnegative, summing to 1
/// within `1e-9`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Invalid(
                "distribution must have at least one symbol".into(),
            ));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::Invalid(format!(
                "probability {p} is negative or non-finite"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Invalid(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Number of symbols `S` (zeros included).
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// The nondecreasing rearrangement of the probabilities.
    pub fn sorted(&self) -> SortedVector {
        sort_ascending(self.probs.clone())
    }
}

/// A nondecreasing vector of nonnegative values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SortedVector {
    values: Vec<f64>,
}

impl SortedVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for pair in values.windows(2) {
            if !(pair[0] <= pair[1]) {
                return Err(Error::Invalid(format!(
                    "values not nondecreasing: {} followed by {}",
                    pair[0], pair[1]
                )));
            }
        }
        if let Some(v) = values.first() {
            if !(*v >= 0.0) {
                return Err(Error::Invalid(format!("negative value {v}")));
            }
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Sorts a vector of finite reals into nondecreasing order.
pub fn sort_ascending(mut probs: Vec<f64>) -> SortedVector {
    probs.sort_by(f64::total_cmp);
    SortedVector { values: probs }
}

/// A finitely supported nonnegative measure on `[0, 1]`: strictly increasing
/// atom positions with nonnegative masses.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure {
    points: Vec<f64>,
    masses: Vec<f64>,
}

impl GridMeasure {
    pub fn new(points: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if points.len() != masses.len() {
            return Err(Error::LengthMismatch {
                left: points.len(),
                right: masses.len(),
            });
        }
        for pair in points.windows(2) {
            if !(pair[0] < pair[1]) {
                return Err(Error::Invalid(format!(
                    "support points not strictly increasing: {} then {}",
                    pair[0], pair[1]
                )));
            }
        }
        if let (Some(first), Some(last)) = (points.first(), points.last()) {
            if !(*first >= 0.0 && *last <= 1.0) {
                return Err(Error::Invalid("support must lie in [0, 1]".into()));
            }
        }
        if let Some(m) = masses.iter().find(|m| !m.is_finite() || **m < 0.0) {
            return Err(Error::Invalid(format!(
                "mass {m} is negative or non-finite"
            )));
        }
        Ok(Self { points, masses })
    }

    /// Builds a measure from unordered `(point, mass)` atoms, merging
    /// duplicate positions.
    pub fn from_atoms(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut atoms: Vec<(f64, f64)> = atoms.into_iter().collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut points = Vec::with_capacity(atoms.len());
        let mut masses: Vec<f64> = Vec::with_capacity(atoms.len());
        for (p, m) in atoms {
            if points.last() == Some(&p) {
                *masses.last_mut().expect("mass for last point") += m;
            } else {
                points.push(p);
                masses.push(m);
            }
        }
        Self::new(points, masses)
    }

    /// The zero measure.
    pub fn empty() -> Self {
        Self {
            points: Vec::new(),
            masses: Vec::new(),
        }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// First moment `Σ mass·point` (not normalized).
    pub fn first_moment(&self) -> f64 {
        self.points
            .iter()
            .zip(&self.masses)
            .map(|(p, m)| p * m)
            .sum()
    }

    /// Measure sum, merging atoms at equal positions.
    pub fn add(&self, other: &GridMeasure) -> GridMeasure {
        let atoms = self
            .points
            .iter()
            .copied()
            .zip(self.masses.iter().copied())
            .chain(
                other
                    .points
                    .iter()
                    .copied()
                    .zip(other.masses.iter().copied()),
            );
        GridMeasure::from_atoms(atoms).expect("merging two valid measures preserves invariants")
    }
}

/// Quadratically widening partition of `[0, 1]` into `M` intervals
/// `I_j = [w(j−1)², wj²)` with unit width `w = c1·ln(n)/n`, centers
/// `x_j = w·j·(j−1)`, and enlarged intervals
/// `Ĩ_j = [w(j−3/2)²·1{j≥2}, min(w(j+1)², 1)]` that absorb the sampling
/// fluctuation of a frequency localized into `I_j`.
///
/// Intervals are half-open with the last one closed at 1, so every
/// `p ∈ [0, 1]` belongs to exactly one interval.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntervalPartition {
    n: f64,
    c1: f64,
    w: f64,
    m: usize,
}

/// Builds the partition for sample rate `n ≥ 2` and width constant `c1 > 0`,
/// with `M = ceil(sqrt(n/(c1·ln n)))` intervals.
pub fn build_partition(n: f64, c1: f64) -> Result<IntervalPartition> {
    if !(n >= 2.0) {
        return Err(Error::Config(format!("partition needs rate >= 2, got {n}")));
    }
    if !(c1 > 0.0) {
        return Err(Error::Config(format!("c1 must be positive, got {c1}")));
    }
    let w = c1 * n.ln() / n;
    let m = (n / (c1 * n.ln())).sqrt().ceil().max(1.0) as usize;
    Ok(IntervalPartition { n, c1, w, m })
}

impl IntervalPartition {
    pub fn rate(&self) -> f64 {
        self.n
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    /// Unit width `w = c1·ln(n)/n`.
    pub fn unit_width(&self) -> f64 {
        self.w
    }

    /// Number of intervals `M`.
    pub fn interval_count(&self) -> usize {
        self.m
    }

    /// Lower endpoint of `I_j` (1-based `j`).
    pub fn lo(&self, j: usize) -> f64 {
        debug_assert!((1..=self.m).contains(&j));
        self.w * ((j - 1) as f64).powi(2)
    }

    /// Upper endpoint of `I_j`; the last interval always ends at 1.
    pub fn hi(&self, j: usize) -> f64 {
        debug_assert!((1..=self.m).contains(&j));
        if j == self.m {
            1.0
        } else {
            self.w * (j as f64).powi(2)
        }
    }

    /// Interval center `x_j = w·j·(j−1)`, capped at the interval's upper
    /// endpoint (the cap only binds for the last interval at small `n`).
    pub fn center(&self, j: usize) -> f64 {
        (self.w * j as f64 * (j - 1) as f64).min(self.hi(j))
    }

    /// Lower endpoint of the enlarged interval `Ĩ_j`.
    pub fn enlarged_lo(&self, j: usize) -> f64 {
        if j >= 2 {
            self.w * (j as f64 - 1.5).powi(2)
        } else {
            0.0
        }
    }

    /// Upper endpoint of the enlarged interval `Ĩ_j`.
    pub fn enlarged_hi(&self, j: usize) -> f64 {
        (self.w * ((j + 1) as f64).powi(2)).min(1.0)
    }

    /// The unique `j` with `lo_j ≤ p < hi_j` (`p = 1` maps to `M`).
    pub fn interval_index(&self, p: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Invalid(format!("frequency {p} outside [0, 1]")));
        }
        // (j−1)² ≤ p/w < j² gives j = floor(sqrt(p/w)) + 1; then repair any
        // floating-point slip so the half-open membership holds exactly.
        let mut j = ((p / self.w).sqrt().floor() as usize + 1).clamp(1, self.m);
        while j > 1 && p < self.lo(j) {
            j -= 1;
        }
        while j < self.m && p >= self.hi(j) {
            j += 1;
        }
        Ok(j)
    }
}
