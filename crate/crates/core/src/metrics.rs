//! Loss computation and Monte Carlo risk aggregation: the sorted ℓ1
//! distance, the one-dimensional Wasserstein distance between atomic
//! measures, a brute-force minimum-cost matching oracle for cross-checks,
//! and a paired-trial risk harness.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::estimator::{lmm_estimate, LmmConfig};
use crate::measures::{sort_ascending, GridMeasure, SortedVector};
use crate::sampling::{
    derive_rng, draw_multinomial, draw_poissonized, empirical, make_distribution, CountVector,
    Family, STREAM_ESTIMATOR, STREAM_FAMILY, STREAM_SAMPLING,
};
use crate::{Error, Result};

/// Σ|p_(i) − q_(i)| after padding the shorter vector with zeros; since all
/// entries are nonnegative, the pad occupies the lowest ranks.
pub fn sorted_l1(p: &SortedVector, q: &SortedVector) -> f64 {
    let len = p.len().max(q.len());
    let pad_p = len - p.len();
    let pad_q = len - q.len();
    let mut sum = 0.0;
    for i in 0..len {
        let a = if i < pad_p {
            0.0
        } else {
            p.values()[i - pad_p]
        };
        let b = if i < pad_q {
            0.0
        } else {
            q.values()[i - pad_q]
        };
        sum += (a - b).abs();
    }
    sum
}

/// `∫₀¹ |F_μ^{-1}(t) − F_ν^{-1}(t)| dt` between the measures normalized to
/// probability measures, computed exactly by merging the two cumulative-mass
/// breakpoint sequences (both quantile functions are piecewise constant).
/// Total masses must agree within 1e-9 before normalization.
pub fn wasserstein_1d(mu: &GridMeasure, nu: &GridMeasure) -> Result<f64> {
    let (tm, tn) = (mu.total_mass(), nu.total_mass());
    if (tm - tn).abs() > 1e-9 {
        return Err(Error::MassMismatch {
            left: tm,
            right: tn,
        });
    }
    if tm <= 1e-12 || tn <= 1e-12 {
        return Ok(0.0);
    }
    let cums = |m: &GridMeasure, total: f64| -> Vec<f64> {
        let mut running = 0.0;
        let mut out: Vec<f64> = m
            .masses()
            .iter()
            .map(|&w| {
                running += w;
                running / total
            })
            .collect();
        if let Some(last) = out.last_mut() {
            *last = 1.0;
        }
        out
    };
    let ca = cums(mu, tm);
    let cb = cums(nu, tn);
    let (pa, pb) = (mu.points(), nu.points());

    let mut distance = 0.0;
    let mut t_prev = 0.0;
    let (mut i, mut j) = (0usize, 0usize);
    while i < ca.len() && j < cb.len() {
        let t = ca[i].min(cb[j]);
        distance += (t - t_prev) * (pa[i] - pb[j]).abs();
        t_prev = t;
        if ca[i] <= t {
            i += 1;
        }
        if cb[j] <= t {
            j += 1;
        }
    }
    Ok(distance)
}

/// Minimum over all permutations σ of Σ|p_i − q_{σ(i)}|, by exhaustive
/// enumeration. Only lengths up to 8 are accepted (8! assignments).
pub fn matching_oracle(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    if p.len() > 8 {
        return Err(Error::OracleLength(p.len()));
    }
    if p.is_empty() {
        return Ok(0.0);
    }
    let mut order: Vec<usize> = (0..q.len()).collect();
    let mut best = f64::INFINITY;
    permute(&mut order, 0, &mut |perm| {
        let cost: f64 = p
            .iter()
            .zip(perm)
            .map(|(&a, &idx)| (a - q[idx]).abs())
            .sum();
        if cost < best {
            best = cost;
        }
    });
    Ok(best)
}

fn permute(order: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == order.len() {
        visit(order);
        return;
    }
    for i in k..order.len() {
        order.swap(k, i);
        permute(order, k + 1, visit);
        order.swap(k, i);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingModel {
    /// Exactly `n` draws.
    Multinomial,
    /// Independent `Poisson(n·p_i)` counts.
    Poissonized,
}

impl SamplingModel {
    pub fn label(&self) -> &'static str {
        match self {
            SamplingModel::Multinomial => "multinomial",
            SamplingModel::Poissonized => "poissonized",
        }
    }
}

#[derive(Debug, Clone)]
pub enum EstimatorKind {
    Lmm(LmmConfig),
    SortedEmpirical,
    /// Debug arm returning the sorted truth; its risk is exactly 0.
    TruthOracle,
}

impl EstimatorKind {
    pub fn label(&self) -> &'static str {
        match self {
            EstimatorKind::Lmm(_) => "lmm",
            EstimatorKind::SortedEmpirical => "empirical",
            EstimatorKind::TruthOracle => "oracle",
        }
    }
}

/// Aggregate of one estimator's Monte Carlo run; `std_error` is the sample
/// standard deviation divided by `sqrt(trials)` (0 for a single trial).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RiskReport {
    pub estimator: String,
    pub family: Family,
    pub s: usize,
    pub n: f64,
    pub model: SamplingModel,
    pub trials: usize,
    pub mean_loss: f64,
    pub std_error: f64,
    pub losses: Vec<f64>,
    pub seed: u64,
    pub config: Option<LmmConfig>,
}

fn draw_counts<R: Rng>(
    dist: &crate::measures::DiscreteDistribution,
    n: f64,
    model: SamplingModel,
    rng: &mut R,
) -> Result<CountVector> {
    match model {
        SamplingModel::Poissonized => draw_poissonized(dist, n, rng),
        SamplingModel::Multinomial => {
            if n < 1.0 || n.fract() != 0.0 {
                return Err(Error::Invalid(format!(
                    "multinomial sampling needs a positive integer n, got {n}"
                )));
            }
            draw_multinomial(dist, n as u64, rng)
        }
    }
}

/// Draws one distribution from the family, then runs `trials` paired
/// trials: trial `t` samples counts with the stream `(seed, t, sampling)`
/// and estimates with `(seed, t, estimator)`, so different estimators see
/// identical data at the same seed. Trials run concurrently.
pub fn monte_carlo_risk(
    family: &Family,
    s: usize,
    n: f64,
    trials: usize,
    seed: u64,
    model: SamplingModel,
    estimator: &EstimatorKind,
) -> Result<RiskReport> {
    if trials == 0 {
        return Err(Error::Invalid("at least one trial is required".into()));
    }
    let mut family_rng = derive_rng(seed, u64::MAX, STREAM_FAMILY);
    let dist = make_distribution(family, s, &mut family_rng)?;
    let truth = dist.sorted();

    let losses: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| -> Result<f64> {
            let mut sample_rng = derive_rng(seed, trial, STREAM_SAMPLING);
            let counts = draw_counts(&dist, n, model, &mut sample_rng)?;
            let estimate = match estimator {
                EstimatorKind::Lmm(config) => {
                    let mut est_rng = derive_rng(seed, trial, STREAM_ESTIMATOR);
                    lmm_estimate(&counts, config, &mut est_rng)?.0
                }
                EstimatorKind::SortedEmpirical => sort_ascending(empirical(&counts)),
                EstimatorKind::TruthOracle => truth.clone(),
            };
            Ok(sorted_l1(&estimate, &truth))
        })
        .collect::<Result<_>>()?;

    let mean = losses.iter().sum::<f64>() / trials as f64;
    let std_error = if trials < 2 {
        0.0
    } else {
        let var = losses.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (trials as f64 - 1.0);
        (var / trials as f64).sqrt()
    };
    let config = match estimator {
        EstimatorKind::Lmm(c) => Some(c.clone()),
        _ => None,
    };
    Ok(RiskReport {
        estimator: estimator.label().to_string(),
        family: family.clone(),
        s,
        n,
        model,
        trials,
        mean_loss: mean,
        std_error,
        losses,
        seed,
        config,
    })
}
