//! Plug-in estimation of symmetric functionals (entropy, power sums,
//! support size) over a recovered measure, plus the empirical plug-in
//! baselines. Every scalar map satisfies `f(0) = 0`, so mass parked at the
//! origin (the discretization fix-up) never moves a functional value.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::estimator::{lmm_measure, LmmConfig, LmmDiagnostics};
use crate::measures::GridMeasure;
use crate::sampling::CountVector;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionalSpec {
    /// `H(P) = Σ −p·ln p`, with the continuous extension `f(0) = 0`.
    Entropy,
    /// `F_α(P) = Σ p^α` for `α ∈ (0, 1)`.
    PowerSum { alpha: f64 },
    /// Support size over the class `p_i ≥ 1/k̄`; on a floating grid the
    /// indicator is `1(x ≥ 1/(2k̄))`, which agrees with `1(x ≠ 0)` on any
    /// measure obeying the forbidden-zone constraint `μ((0, 1/k̄)) = 0`.
    SupportSize { k_bar: u64 },
}

impl FunctionalSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            FunctionalSpec::Entropy => Ok(()),
            FunctionalSpec::PowerSum { alpha } => {
                if alpha > 0.0 && alpha < 1.0 {
                    Ok(())
                } else {
                    Err(Error::Config(format!(
                        "power-sum exponent must lie in (0,1), got {alpha}"
                    )))
                }
            }
            FunctionalSpec::SupportSize { k_bar } => {
                if k_bar >= 2 {
                    Ok(())
                } else {
                    Err(Error::Config(format!(
                        "support-size bound must be at least 2, got {k_bar}"
                    )))
                }
            }
        }
    }

    /// The scalar map applied to each atom.
    fn f(&self, x: f64) -> f64 {
        match *self {
            FunctionalSpec::Entropy => {
                if x <= 0.0 {
                    0.0
                } else {
                    -x * x.ln()
                }
            }
            FunctionalSpec::PowerSum { alpha } => {
                if x <= 0.0 {
                    0.0
                } else {
                    x.powf(alpha)
                }
            }
            FunctionalSpec::SupportSize { k_bar } => {
                if x >= 1.0 / (2.0 * k_bar as f64) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// `F̂ = Σ_g mass(g)·f(point(g))`; linear in the measure, and atoms at 0
/// contribute nothing.
pub fn plug_in(measure: &GridMeasure, spec: &FunctionalSpec) -> f64 {
    measure
        .points()
        .iter()
        .zip(measure.masses())
        .map(|(&p, &w)| w * spec.f(p))
        .sum()
}

/// Runs the moment-matching pipeline and plugs the recovered measure into
/// the functional. For support size the forbidden zone `(0, 1/k̄)` is
/// activated so no ambiguous mass survives; a caller-supplied
/// `support_lower` must agree with `1/k̄`.
pub fn estimate_functional<R: Rng>(
    counts: &CountVector,
    config: &LmmConfig,
    spec: &FunctionalSpec,
    rng: &mut R,
) -> Result<(f64, LmmDiagnostics)> {
    spec.validate()?;
    let mut config = config.clone();
    if let FunctionalSpec::SupportSize { k_bar } = *spec {
        let lower = 1.0 / k_bar as f64;
        match config.support_lower {
            None => config.support_lower = Some(lower),
            Some(l) if (l - lower).abs() <= 1e-12 => {}
            Some(l) => {
                return Err(Error::Config(format!(
                    "support_lower {l} conflicts with the functional's threshold {lower}"
                )));
            }
        }
    }
    let (measure, diagnostics) = lmm_measure(counts, &config, rng)?;
    Ok((plug_in(&measure, spec), diagnostics))
}

/// Empirical plug-in baseline: entropy and power sums on the full-sample
/// empirical distribution, distinct observed symbols for support size.
pub fn baseline_functional(counts: &CountVector, spec: &FunctionalSpec) -> f64 {
    match spec {
        FunctionalSpec::SupportSize { .. } => {
            counts.counts().iter().filter(|&&c| c > 0).count() as f64
        }
        _ => {
            let total = counts.total();
            if total == 0 {
                return 0.0;
            }
            counts
                .counts()
                .iter()
                .map(|&c| spec.f(c as f64 / total as f64))
                .sum()
        }
    }
}
