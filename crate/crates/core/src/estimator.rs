//! The full pipeline from a count vector to a sorted-distribution estimate:
//! sample splitting, interval localization, per-interval moment programs,
//! and randomized quantile discretization of the recovered measure.
//!
//! The estimator never panics on solver trouble: any interval that reports
//! failure (infeasible, stalled, or rejected by the independent moment
//! re-check) switches the whole run to the fallback measure, the sorted
//! empirical distribution of the second half.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::lpsolve::{
    discretize, solve_feasibility, solve_min_mass, verify_unscaled, FeasibilityProblem, LpStatus,
};
use crate::measures::{build_partition, sort_ascending, GridMeasure, SortedVector};
use crate::moments::{moment_count, moment_targets};
use crate::sampling::{empirical, empirical_raw, split_counts, CountVector};
use crate::{Error, Result};

/// Tuning constants for the moment-matching pipeline.
///
/// `c1` sets the localization width `w = c1·ln n/n`, `c2` the moment count
/// `K = max(1, floor(c2·ln n))`, `c3` the tolerance scale
/// `r_j = c3·j·ln n/n`. The defaults are practical desk-scale choices;
/// `theory_mode` additionally enforces the proof-regime inequalities
/// `c1 > 2·c2` and `c3 > 30·c1`, which make the tolerances loose enough
/// that the truth itself is feasible with high probability.
///
/// `support_size` caps the recovered mass when the alphabet size is known;
/// `support_lower` activates support-size mode, forbidding mass in
/// `(0, support_lower)`. `seed` is carried for provenance in reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmmConfig {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub theory_mode: bool,
    pub grid_factor: usize,
    pub support_size: Option<u64>,
    pub support_lower: Option<f64>,
    pub seed: u64,
}

impl Default for LmmConfig {
    fn default() -> Self {
        Self {
            c1: 2.0,
            c2: 0.3,
            c3: 0.04,
            theory_mode: false,
            grid_factor: 256,
            support_size: None,
            support_lower: None,
            seed: 0,
        }
    }
}

impl LmmConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("c1", self.c1), ("c2", self.c2), ("c3", self.c3)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.grid_factor == 0 {
            return Err(Error::Config("grid_factor must be at least 1".into()));
        }
        if let Some(l) = self.support_lower {
            if !(l > 0.0 && l < 1.0) {
                return Err(Error::Config(format!(
                    "support_lower must lie in (0,1), got {l}"
                )));
            }
        }
        if self.theory_mode {
            if !(self.c1 > 2.0 * self.c2) {
                return Err(Error::Config(format!(
                    "theory mode requires c1 > 2*c2, got c1 = {}, c2 = {}",
                    self.c1, self.c2
                )));
            }
            if !(self.c3 > 30.0 * self.c1) {
                return Err(Error::Config(format!(
                    "theory mode requires c3 > 30*c1, got c3 = {}, c1 = {}",
                    self.c3, self.c1
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IntervalStatus {
    /// The moment program returned a measure that passed the re-check.
    Feasible,
    /// Certified infeasible (or structurally impossible under the
    /// forbidden zone); triggers the fallback.
    Infeasible,
    /// The solver stalled or its output failed the independent unscaled
    /// re-check; triggers the fallback.
    SolverError,
    /// No symbol was localized to the interval; contributes zero measure.
    Empty,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntervalReport {
    pub j: usize,
    /// Number of symbols localized to the interval by first-half frequency.
    pub s_j: usize,
    pub status: IntervalStatus,
    /// Recovered mass (the accepted minimum for `j = 1`, `s_j` for the
    /// fixed-mass programs, 0 otherwise).
    pub mass: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LmmDiagnostics {
    pub intervals: Vec<IntervalReport>,
    /// Mass accepted by the minimum-mass program for the leftmost interval.
    pub min_mass_accepted: f64,
    /// True iff any interval reported failure and the sorted empirical
    /// measure of the second half was returned instead.
    pub fallback: bool,
    /// Total mass of the returned measure.
    pub total_mass: f64,
    /// Seconds spent in the pipeline; excluded from serialized reports so
    /// that repeated runs stay byte-identical.
    #[serde(skip)]
    pub wall_time: f64,
}

/// Unit atom at each symbol's clamped empirical frequency. Feeding this to
/// [`discretize_to_vector`] reproduces the sorted empirical distribution
/// exactly (integer atom masses make the quantiles deterministic).
pub fn sorted_empirical_measure(counts: &CountVector) -> GridMeasure {
    let freqs = empirical(counts);
    GridMeasure::from_atoms(freqs.into_iter().map(|f| (f, 1.0)))
        .expect("clamped frequencies are valid atoms")
}

/// Runs the moment-matching pipeline on a count vector: split, localize,
/// solve one moment program per occupied interval, and sum the recovered
/// per-interval measures. See [`LmmConfig`] for the constants involved.
pub fn lmm_measure<R: Rng>(
    counts: &CountVector,
    config: &LmmConfig,
    rng: &mut R,
) -> Result<(GridMeasure, LmmDiagnostics)> {
    config.validate()?;
    let start = Instant::now();
    let rate = counts.rate();
    if !(rate >= 4.0) {
        return Err(Error::Invalid(format!(
            "pipeline needs rate >= 4 so each half keeps rate >= 2, got {rate}"
        )));
    }

    let split = split_counts(counts, rng);
    let n = split.second.rate();
    let first = empirical(&split.first);
    let second = empirical_raw(&split.second);

    let partition = build_partition(n, config.c1)?;
    let m_intervals = partition.interval_count();
    let k_max = moment_count(config.c2, n);
    let g_count = (config.grid_factor * k_max).max(64);
    let zone = config.support_lower.map(|l| (0.0, l));

    let mut members: Vec<Vec<f64>> = vec![Vec::new(); m_intervals];
    let mut observed_in_first_interval = 0usize;
    for (i, &f) in first.iter().enumerate() {
        let j = partition.interval_index(f)?;
        members[j - 1].push(second[i]);
        if j == 1 && counts.counts()[i] > 0 {
            observed_in_first_interval += 1;
        }
    }

    let mut reports = Vec::with_capacity(m_intervals);
    let mut recovered = GridMeasure::empty();
    let mut failed = false;
    let mut min_mass_accepted = 0.0;

    for j in 1..=m_intervals {
        let mem = &members[j - 1];
        if j >= 2 && mem.is_empty() {
            reports.push(IntervalReport {
                j,
                s_j: 0,
                status: IntervalStatus::Empty,
                mass: 0.0,
            });
            continue;
        }
        let targets = moment_targets(&partition, j, mem, n, k_max, config.c3)?;
        let (lo, hi) = if j == 1 {
            (0.0, partition.enlarged_hi(1))
        } else {
            (partition.enlarged_lo(j), partition.enlarged_hi(j))
        };
        let mut grid = discretize(lo, hi, g_count, j == 1)?;
        if let Some(l) = config.support_lower {
            // The zone's right edge is the coarsest admissible mass; make
            // sure the grid can represent it exactly.
            if l > lo && l <= hi {
                grid.push(l);
            }
            grid.retain(|&g| !(g > 0.0 && g < l));
        }
        if grid.is_empty() {
            // The forbidden zone swallowed the interval while data demands
            // mass there: structurally infeasible.
            reports.push(IntervalReport {
                j,
                s_j: targets.s_j,
                status: IntervalStatus::Infeasible,
                mass: 0.0,
            });
            failed = true;
            continue;
        }

        let (status, mass) = if j == 1 {
            let problem = FeasibilityProblem::new(
                grid,
                partition.center(1),
                targets.scale,
                k_max,
                targets.targets.clone(),
                targets.tolerances_for_mass(1.0),
                None,
                zone,
            )?;
            let mass_upper = match config.support_size {
                Some(s) => s as f64,
                None => observed_in_first_interval as f64 + n,
            };
            match solve_min_mass(&problem, mass_upper, config.support_size.is_none()) {
                Ok((outcome, accepted)) if outcome.status == LpStatus::Feasible => {
                    let mu = outcome.measure.expect("feasible outcome carries a measure");
                    let tols = targets.tolerances_for_mass(accepted);
                    if verify_unscaled(&mu, partition.center(1), &targets.targets, &tols) {
                        recovered = recovered.add(&mu);
                        min_mass_accepted = accepted;
                        (IntervalStatus::Feasible, accepted)
                    } else {
                        (IntervalStatus::SolverError, 0.0)
                    }
                }
                Ok(_) => (IntervalStatus::Infeasible, 0.0),
                Err(Error::SolverStalled(_)) => (IntervalStatus::SolverError, 0.0),
                Err(e) => return Err(e),
            }
        } else {
            let s_j = targets.s_j as f64;
            let problem = FeasibilityProblem::new(
                grid,
                partition.center(j),
                targets.scale,
                k_max,
                targets.targets.clone(),
                targets.tolerances.clone(),
                Some(s_j),
                zone,
            )?;
            match solve_feasibility(&problem) {
                Ok(outcome) if outcome.status == LpStatus::Feasible => {
                    let mu = outcome.measure.expect("feasible outcome carries a measure");
                    if verify_unscaled(
                        &mu,
                        partition.center(j),
                        &targets.targets,
                        &targets.tolerances,
                    ) {
                        recovered = recovered.add(&mu);
                        (IntervalStatus::Feasible, s_j)
                    } else {
                        (IntervalStatus::SolverError, 0.0)
                    }
                }
                Ok(_) => (IntervalStatus::Infeasible, 0.0),
                Err(Error::SolverStalled(_)) => (IntervalStatus::SolverError, 0.0),
                Err(e) => return Err(e),
            }
        };
        if status != IntervalStatus::Feasible {
            failed = true;
        }
        reports.push(IntervalReport {
            j,
            s_j: targets.s_j,
            status,
            mass,
        });
    }

    let measure = if failed {
        sorted_empirical_measure(&split.second)
    } else {
        recovered
    };
    let diagnostics = LmmDiagnostics {
        intervals: reports,
        min_mass_accepted: if failed { 0.0 } else { min_mass_accepted },
        fallback: failed,
        total_mass: measure.total_mass(),
        wall_time: start.elapsed().as_secs_f64(),
    };
    Ok((measure, diagnostics))
}

/// Randomized quantile discretization of a finite measure into
/// `S0 = ceil(μ(ℝ))` sorted values: any mass deficit `S0 − μ(ℝ)` is added
/// at 0, and `q_i = F^{-1}((i − U_i)/S0)` with `U_i` i.i.d. uniform on
/// (0, 1], where `F^{-1}(t) = sup{x : F(x) ≤ t}` is the step-function
/// quantile evaluated by cumulative-mass search. When all atom masses are
/// integers the output is exact regardless of the randomization.
pub fn discretize_to_vector<R: Rng>(measure: &GridMeasure, rng: &mut R) -> Result<SortedVector> {
    let total = measure.total_mass();
    if !total.is_finite() || total < 0.0 {
        return Err(Error::Invalid(format!(
            "total mass must be nonnegative, got {total}"
        )));
    }
    // Snap near-integer totals so fixed-mass bookkeeping (e.g. the exact
    // fallback path) is not disturbed by accumulated round-off.
    let s0 = if (total - total.round()).abs() <= 1e-9 {
        total.round() as u64
    } else {
        total.ceil() as u64
    };
    if s0 == 0 {
        return SortedVector::new(Vec::new());
    }

    let fixup = (s0 as f64 - total).max(0.0);
    let mut points = Vec::with_capacity(measure.points().len() + 1);
    let mut cumulative = Vec::with_capacity(measure.points().len() + 1);
    let mut running = 0.0f64;
    if measure.points().first().is_none_or(|&p| p > 0.0) && fixup > 0.0 {
        running = fixup;
        points.push(0.0);
        cumulative.push(running);
    }
    for (idx, (&p, &w)) in measure.points().iter().zip(measure.masses()).enumerate() {
        let mut w = w;
        if idx == 0 && p == 0.0 {
            w += fixup;
        }
        running += w;
        points.push(p);
        cumulative.push(running);
    }

    let mut values = Vec::with_capacity(s0 as usize);
    for i in 1..=s0 {
        // U ∈ (0, 1], so the threshold stays strictly below i and integer
        // cumulative masses resolve exactly.
        let u = 1.0 - rng.random::<f64>();
        let t = i as f64 - u;
        let idx = cumulative
            .partition_point(|&c| c <= t)
            .min(points.len() - 1);
        values.push(points[idx]);
    }
    Ok(sort_ascending(values))
}

/// [`lmm_measure`] followed by [`discretize_to_vector`].
pub fn lmm_estimate<R: Rng>(
    counts: &CountVector,
    config: &LmmConfig,
    rng: &mut R,
) -> Result<(SortedVector, LmmDiagnostics)> {
    let (measure, diagnostics) = lmm_measure(counts, config, rng)?;
    let estimate = discretize_to_vector(&measure, rng)?;
    Ok((estimate, diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{draw_multinomial, draw_poissonized, make_distribution, Family};
    use crate::DiscreteDistribution;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn config_defaults_and_validation() {
        let config = LmmConfig::default();
        assert!(config.validate().is_ok());
        assert_eq!(config.c1, 2.0);
        assert!(!config.theory_mode);

        let bad = LmmConfig {
            c1: -1.0,
            ..LmmConfig::default()
        };
        assert!(bad.validate().is_err());

        let violated = LmmConfig {
            theory_mode: true,
            ..LmmConfig::default()
        };
        assert!(violated.validate().is_err());

        let theory = LmmConfig {
            c1: 2.0,
            c2: 0.9,
            c3: 61.0,
            theory_mode: true,
            ..LmmConfig::default()
        };
        assert!(theory.validate().is_ok());
    }

    #[test]
    fn rejects_tiny_rate() {
        let counts = CountVector::new(vec![3], 3.0).unwrap();
        assert!(lmm_measure(&counts, &LmmConfig::default(), &mut rng(0)).is_err());
    }

    #[test]
    fn degenerate_distribution_concentrates_mass() {
        let counts = CountVector::new(vec![4000], 4000.0).unwrap();
        let (mu, diag) = lmm_measure(&counts, &LmmConfig::default(), &mut rng(11)).unwrap();
        assert!(
            (0.9..=1.1).contains(&mu.total_mass()),
            "total {}",
            mu.total_mass()
        );
        let mean = mu.first_moment() / mu.total_mass();
        assert!(mean >= 0.9, "mean {mean}");
        assert!((diag.total_mass - mu.total_mass()).abs() < 1e-12);

        let (estimate, _) = lmm_estimate(&counts, &LmmConfig::default(), &mut rng(11)).unwrap();
        assert_eq!(estimate.len(), 1);
        assert!(estimate.values()[0] >= 0.9);
    }

    #[test]
    fn all_zero_counts_give_empty_estimate() {
        let counts = CountVector::new(vec![0; 10], 8.0).unwrap();
        let (estimate, diag) = lmm_estimate(&counts, &LmmConfig::default(), &mut rng(5)).unwrap();
        assert!(estimate.is_empty());
        assert!(!diag.fallback);
        assert_eq!(diag.min_mass_accepted, 0.0);
        assert_eq!(diag.total_mass, 0.0);
    }

    #[test]
    fn integer_atoms_discretize_exactly() {
        let mu = GridMeasure::from_atoms([(0.2, 1.0), (0.3, 1.0), (0.5, 1.0)]).unwrap();
        for seed in 0..20 {
            let q = discretize_to_vector(&mu, &mut rng(seed)).unwrap();
            assert_eq!(q.values(), &[0.2, 0.3, 0.5]);
        }
        let point = GridMeasure::from_atoms([(0.5, 2.0)]).unwrap();
        let q = discretize_to_vector(&point, &mut rng(1)).unwrap();
        assert_eq!(q.values(), &[0.5, 0.5]);
    }

    #[test]
    fn fixup_mass_is_sampled_at_zero() {
        // μ = 1.3 at 0.4: S0 = 2, deficit 0.7 at 0. The first quantile is 0
        // with probability 0.7, the second is always 0.4.
        let mu = GridMeasure::from_atoms([(0.4, 1.3)]).unwrap();
        let mut r = rng(17);
        let mut zeros = 0;
        for _ in 0..400 {
            let q = discretize_to_vector(&mu, &mut r).unwrap();
            assert_eq!(q.len(), 2);
            assert_eq!(*q.values().last().unwrap(), 0.4);
            let first = q.values()[0];
            assert!(first == 0.0 || first == 0.4);
            if first == 0.0 {
                zeros += 1;
            }
        }
        // Mean 280, sd ≈ 9.2; allow 4 sd.
        assert!((243..=317).contains(&zeros), "zeros {zeros}");
    }

    #[test]
    fn fallback_is_sorted_second_half_empirical() {
        let dist = DiscreteDistribution::new(vec![0.05; 20]).unwrap();
        let counts = draw_multinomial(&dist, 200, &mut rng(7)).unwrap();
        // A known support size of 1 makes the leftmost program infeasible
        // at its hard mass bound: every run falls back.
        let config = LmmConfig {
            support_size: Some(1),
            ..LmmConfig::default()
        };
        let (estimate, diag) = lmm_estimate(&counts, &config, &mut rng(42)).unwrap();
        assert!(diag.fallback);

        let mut replay = rng(42);
        let split = split_counts(&counts, &mut replay);
        let expected = sort_ascending(empirical(&split.second));
        assert_eq!(estimate.values(), expected.values());
    }

    #[test]
    fn estimates_are_deterministic() {
        let dist = DiscreteDistribution::new(vec![1.0 / 300.0; 300]).unwrap();
        let counts = draw_poissonized(&dist, 600.0, &mut rng(3)).unwrap();
        let config = LmmConfig::default();
        let (a, diag_a) = lmm_estimate(&counts, &config, &mut rng(9)).unwrap();
        let (b, diag_b) = lmm_estimate(&counts, &config, &mut rng(9)).unwrap();
        assert_eq!(a.values(), b.values());
        assert_eq!(diag_a.fallback, diag_b.fallback);
        assert_eq!(diag_a.total_mass, diag_b.total_mass);
    }

    #[test]
    fn support_size_caps_output_length() {
        let family = Family::Uniform;
        for seed in 0..5 {
            let mut r = rng(100 + seed);
            let dist = make_distribution(&family, 50, &mut r).unwrap();
            let counts = draw_poissonized(&dist, 400.0, &mut r).unwrap();
            let config = LmmConfig {
                support_size: Some(50),
                ..LmmConfig::default()
            };
            let (estimate, diag) = lmm_estimate(&counts, &config, &mut r).unwrap();
            if !diag.fallback {
                assert!(
                    estimate.len() <= 50,
                    "length {} at seed {seed}",
                    estimate.len()
                );
            }
        }
    }

    #[test]
    fn uniform_pipeline_diagnostics() {
        let dist = DiscreteDistribution::new(vec![1e-3; 1000]).unwrap();
        let counts = draw_poissonized(&dist, 2000.0, &mut rng(21)).unwrap();
        let (mu, diag) = lmm_measure(&counts, &LmmConfig::default(), &mut rng(22)).unwrap();
        assert!(!diag.fallback, "intervals: {:?}", diag.intervals);
        for report in &diag.intervals {
            if report.j >= 2 && report.s_j == 0 {
                assert_eq!(report.status, IntervalStatus::Empty);
            } else {
                assert_eq!(
                    report.status,
                    IntervalStatus::Feasible,
                    "interval {}",
                    report.j
                );
            }
        }
        assert!(diag.min_mass_accepted > 0.0);
        assert!(
            (700.0..=1300.0).contains(&diag.total_mass),
            "total mass {}",
            diag.total_mass
        );

        let q = discretize_to_vector(&mu, &mut rng(23)).unwrap();
        assert_eq!(q.len() as u64, diag.total_mass.ceil() as u64);
        let sum: f64 = q.values().iter().sum();
        assert!((sum - 1.0).abs() < 0.15, "estimate sums to {sum}");

        // Quantile discretization moves each unit of mass within the atom
        // range, so the estimate's sum stays within the largest support
        // point of the measure's first moment.
        let max_point = mu.points().last().copied().unwrap_or(0.0);
        assert!((sum - mu.first_moment()).abs() <= max_point + 1e-9);
    }
}
