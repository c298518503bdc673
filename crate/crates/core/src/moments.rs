//! Unbiased local moment estimators and per-interval moment targets.
//!
//! The polynomial `g_{k,x}` maps an observed frequency `p̂ = m/n` to
//!
//! ```text
//! g_{k,x}(p̂) = Σ_{l=0}^{k} C(k,l)·(−x)^{k−l}·∏_{l'=0}^{l−1}(p̂ − l'/n)
//! ```
//!
//! Because the falling factorial `∏_{l'<l}(p̂ − l'/n)` has Poisson
//! expectation exactly `p^l` when `m ~ Poisson(n·p)`, the expectation of
//! `g_{k,x}(p̂)` is exactly `(p − x)^k`: an unbiased estimator of the k-th
//! moment of the symbol's probability around the interval center `x`.

use serde::{Deserialize, Serialize};

use crate::measures::IntervalPartition;
use crate::{Error, Result};

/// Evaluates `g_{k,x}(p_hat)` for a frequency observed at sample rate `n`.
/// `g(0, ·, ·, ·) = 1`. Uses the raw (unclamped) frequency: the unbiasedness
/// identity needs the actual count `m = p_hat·n`.
pub fn g(k: usize, x: f64, p_hat: f64, n: f64) -> Result<f64> {
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::Config(format!(
            "moment polynomial needs positive rate, got {n}"
        )));
    }
    let mut sum = 0.0f64;
    let mut falling = 1.0f64; // ∏_{l' < l}(p̂ − l'/n), starts at the empty product
    let mut binom = 1.0f64; // C(k, l)
    for l in 0..=k {
        if l > 0 {
            falling *= p_hat - (l - 1) as f64 / n;
            binom *= (k - l + 1) as f64 / l as f64;
        }
        sum += binom * (-x).powi((k - l) as i32) * falling;
    }
    Ok(sum)
}

/// Number of matched moments `K = max(1, floor(c2·ln n))`.
pub fn moment_count(c2: f64, n: f64) -> usize {
    ((c2 * n.ln()).floor() as isize).max(1) as usize
}

/// Moment targets and tolerance radii for one interval.
///
/// For interval `j` with center `x_j` and `S_j` member symbols, the k-th
/// target is `t_k = Σ_members g_{k,x_j}(p̂_{i,2})` and its tolerance radius is
/// `τ_k = sqrt(S_j·ln n)·r_j^k` with scale `r_j = c3·j·ln n/n`. The leftmost
/// interval's minimum-mass program replaces `S_j` by the candidate mass `m`;
/// [`MomentTargets::tolerances_for_mass`] provides that family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentTargets {
    pub j: usize,
    pub k_max: usize,
    pub s_j: usize,
    /// `t_k` for `k = 1..=k_max` (index `k − 1`).
    pub targets: Vec<f64>,
    /// `τ_k` evaluated at mass basis `S_j`.
    pub tolerances: Vec<f64>,
    /// Scale `r_j = c3·j·ln n/n`.
    pub scale: f64,
    pub ln_n: f64,
}

impl MomentTargets {
    /// Tolerance radii `τ_k(m) = sqrt(m·ln n)·r_j^k` for a candidate total
    /// mass `m` (used by the minimum-mass program).
    pub fn tolerances_for_mass(&self, m: f64) -> Vec<f64> {
        let base = (m.max(0.0) * self.ln_n).sqrt();
        (1..=self.k_max)
            .map(|k| base * self.scale.powi(k as i32))
            .collect()
    }
}

/// Builds the moment targets for interval `j` from the second-half
/// frequencies of the symbols localized there by their first-half frequency.
pub fn moment_targets(
    partition: &IntervalPartition,
    j: usize,
    members: &[f64],
    n: f64,
    k_max: usize,
    c3: f64,
) -> Result<MomentTargets> {
    if !(n >= 2.0) {
        return Err(Error::Config(format!(
            "moment targets need rate >= 2, got {n}"
        )));
    }
    if k_max == 0 {
        return Err(Error::Config("at least one moment is required".into()));
    }
    if !(c3 > 0.0) {
        return Err(Error::Config(format!("c3 must be positive, got {c3}")));
    }
    let x_j = partition.center(j);
    let ln_n = n.ln();
    let scale = c3 * j as f64 * ln_n / n;
    let mut targets = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let mut t = 0.0;
        for &p_hat in members {
            t += g(k, x_j, p_hat, n)?;
        }
        targets.push(t);
    }
    let s_j = members.len();
    let base = (s_j as f64 * ln_n).sqrt();
    let tolerances = (1..=k_max).map(|k| base * scale.powi(k as i32)).collect();
    Ok(MomentTargets {
        j,
        k_max,
        s_j,
        targets,
        tolerances,
        scale,
        ln_n,
    })
}
