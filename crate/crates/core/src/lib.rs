//! Estimation of a discrete distribution up to permutation.
//!
//! Given counts from `n` samples of an unknown distribution `P` over `S`
//! symbols, the estimators here target the *sorted* distribution `P^<`
//! (the multiset of probabilities), under the sorted ℓ1 loss
//! `‖P̂ − P^<‖₁ = Σ|p̂₍ᵢ₎ − p₍ᵢ₎|`. Sorted ℓ1 equals `S` times the
//! Wasserstein-1 distance between the uniform measures on the two
//! probability multisets, which reduces the problem to estimating a
//! one-dimensional measure.
//!
//! The main estimator is local moment matching ([`estimator::lmm_estimate`]):
//!
//! 1. split the sample into independent halves (binomial thinning);
//! 2. localize each symbol into an interval of `[0, 1]` using its
//!    first-half frequency ([`measures::IntervalPartition`]);
//! 3. estimate the first `K` centered moments of each interval's probability
//!    mass from second-half frequencies, using polynomials that are unbiased
//!    under Poisson sampling ([`moments::g`]);
//! 4. per interval, find a nonnegative measure on a grid matching those
//!    moments within tolerance radii — a linear-programming feasibility
//!    problem ([`lpsolve`]); the leftmost interval instead minimizes total
//!    mass, which also accounts for symbols never observed;
//! 5. convert the summed measure back into a sorted probability vector by
//!    randomized quantile discretization ([`estimator::discretize_to_vector`]).
//!
//! Plug-in estimates of symmetric functionals (entropy, power sums, support
//! size) evaluate the functional directly on the estimated measure
//! ([`functionals`]). A Monte Carlo harness ([`metrics::monte_carlo_risk`])
//! compares estimators against the sorted empirical baseline on synthetic
//! families.
//!
//! All randomness flows through seeded [`rand_chacha::ChaCha8Rng`] streams
//! derived from `(seed, trial, stream)` tuples, so experiments are
//! reproducible bit-for-bit regardless of thread count.

#![forbid(unsafe_code)]
// Range checks are written as `!(x > 0.0)` on purpose: a NaN fails every
// comparison, so the negated form rejects it along with the out-of-range
// values instead of letting it slip past a reversed comparison.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod estimator;
pub mod functionals;
pub mod lpsolve;
pub mod measures;
pub mod metrics;
pub mod moments;
pub mod sampling;

use thiserror::Error;

/// Errors produced by estimator construction, solving, and scoring.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or operation parameters.
    #[error("invalid configuration: {0}")]
    Config(String),
    /// A vector failed a distribution/measure invariant.
    #[error("invalid value: {0}")]
    Invalid(String),
    /// Wasserstein distance requested between measures of different mass.
    #[error("total mass mismatch: {left} vs {right}")]
    MassMismatch { left: f64, right: f64 },
    /// The exhaustive matching oracle is restricted to short vectors.
    #[error("matching oracle supports length <= 8, got {0}")]
    OracleLength(usize),
    /// Equal-length input required.
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    /// The simplex solver exceeded its pivot budget.
    #[error("linear program did not converge within {0} pivots")]
    SolverStalled(usize),
    /// Malformed counts file.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub use estimator::{discretize_to_vector, lmm_estimate, lmm_measure, LmmConfig, LmmDiagnostics};
pub use measures::{DiscreteDistribution, GridMeasure, IntervalPartition, SortedVector};
pub use metrics::{monte_carlo_risk, sorted_l1, wasserstein_1d, RiskReport};
pub use sampling::CountVector;
