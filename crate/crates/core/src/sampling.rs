//! Sampling models (multinomial and Poissonized), binomial sample splitting,
//! empirical frequencies, synthetic distribution families, and the seeded
//! stream derivation used to keep Monte Carlo trials reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};

use crate::measures::DiscreteDistribution;
use crate::{Error, Result};

/// Observed counts per symbol together with the nominal sample rate they
/// were drawn at. Under Poissonized sampling the count of symbol `i` is
/// `Poisson(rate·p_i)`, so counts may exceed the rate.
#[derive(Debug, Clone, PartialEq)]
pub struct CountVector {
    counts: Vec<u64>,
    rate: f64,
}

impl CountVector {
    pub fn new(counts: Vec<u64>, rate: f64) -> Result<Self> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::Config(format!(
                "sample rate must be positive, got {rate}"
            )));
        }
        Ok(Self { counts, rate })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// The two halves of a binomially thinned sample, each carrying rate `n/2`.
#[derive(Debug, Clone)]
pub struct SplitCounts {
    pub first: CountVector,
    pub second: CountVector,
}

/// Draws independent `counts[i] ~ Poisson(n·p_i)`.
pub fn draw_poissonized<R: Rng>(
    dist: &DiscreteDistribution,
    n: f64,
    rng: &mut R,
) -> Result<CountVector> {
    if !(n > 0.0) {
        return Err(Error::Config(format!(
            "Poissonized rate must be positive, got {n}"
        )));
    }
    let counts = dist
        .probs()
        .iter()
        .map(|&p| {
            let lambda = n * p;
            if lambda > 0.0 {
                let draw: f64 = Poisson::new(lambda)
                    .expect("positive finite lambda")
                    .sample(rng);
                draw as u64
            } else {
                0
            }
        })
        .collect();
    CountVector::new(counts, n)
}

/// Draws jointly multinomial counts with `Σ counts = n`, via the conditional
/// binomial decomposition.
pub fn draw_multinomial<R: Rng>(
    dist: &DiscreteDistribution,
    n: u64,
    rng: &mut R,
) -> Result<CountVector> {
    if n == 0 {
        return Err(Error::Config(
            "multinomial needs at least one sample".into(),
        ));
    }
    let mut counts = vec![0u64; dist.len()];
    let mut remaining_n = n;
    let mut remaining_p = 1.0f64;
    for (i, &p) in dist.probs().iter().enumerate() {
        if remaining_n == 0 {
            break;
        }
        if i + 1 == dist.len() {
            counts[i] = remaining_n;
            break;
        }
        let cond = if remaining_p > 0.0 {
            (p / remaining_p).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let c = Binomial::new(remaining_n, cond)
            .expect("conditional probability in [0, 1]")
            .sample(rng);
        counts[i] = c;
        remaining_n -= c;
        remaining_p = (remaining_p - p).max(0.0);
    }
    CountVector::new(counts, n as f64)
}

/// Splits counts into two halves by per-sample fair coin flips:
/// `first[i] ~ Binomial(counts[i], 1/2)`, `second = counts − first`. Both
/// halves carry rate `n/2`; under Poissonized sampling they are independent
/// Poisson samples at that rate.
pub fn split_counts<R: Rng>(counts: &CountVector, rng: &mut R) -> SplitCounts {
    let mut first = Vec::with_capacity(counts.len());
    let mut second = Vec::with_capacity(counts.len());
    for &c in counts.counts() {
        let f = if c > 0 {
            Binomial::new(c, 0.5).expect("p = 1/2 is valid").sample(rng)
        } else {
            0
        };
        first.push(f);
        second.push(c - f);
    }
    let half_rate = counts.rate() / 2.0;
    SplitCounts {
        first: CountVector::new(first, half_rate).expect("halved rate stays positive"),
        second: CountVector::new(second, half_rate).expect("halved rate stays positive"),
    }
}

/// Empirical frequencies `counts[i]/rate`, clamped to `[0, 1]` so that
/// interval localization never sees an out-of-range value (Poisson counts
/// can exceed the rate).
pub fn empirical(counts: &CountVector) -> Vec<f64> {
    counts
        .counts()
        .iter()
        .map(|&c| (c as f64 / counts.rate()).clamp(0.0, 1.0))
        .collect()
}

/// Raw empirical frequencies `counts[i]/rate` without clamping. The unbiased
/// moment polynomials require the raw count, so this feeds [`crate::moments::g`].
pub fn empirical_raw(counts: &CountVector) -> Vec<f64> {
    counts
        .counts()
        .iter()
        .map(|&c| c as f64 / counts.rate())
        .collect()
}

/// Synthetic distribution families for benchmarks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Family {
    Uniform,
    /// `p_i ∝ i^(−exponent)`.
    Zipf {
        exponent: f64,
    },
    /// A `fraction` of symbols share one mass level, the rest another;
    /// `ratio` is the high/low level ratio.
    TwoLevel {
        fraction: f64,
        ratio: f64,
    },
    /// A single draw from the symmetric Dirichlet with concentration `alpha`.
    Dirichlet {
        alpha: f64,
    },
}

impl Family {
    /// Short description used in reports, e.g. `zipf(exponent=1)`.
    pub fn label(&self) -> String {
        match self {
            Family::Uniform => "uniform".to_string(),
            Family::Zipf { exponent } => format!("zipf(exponent={exponent})"),
            Family::TwoLevel { fraction, ratio } => {
                format!("two_level(fraction={fraction},ratio={ratio})")
            }
            Family::Dirichlet { alpha } => format!("dirichlet(alpha={alpha})"),
        }
    }
}

/// Builds a distribution over `S` symbols from a named family. The
/// Dirichlet family is a random draw (via per-coordinate Gamma variables);
/// the other families ignore `rng`.
pub fn make_distribution<R: Rng>(
    family: &Family,
    s: usize,
    rng: &mut R,
) -> Result<DiscreteDistribution> {
    if s == 0 {
        return Err(Error::Config("family needs at least one symbol".into()));
    }
    let probs = match family {
        Family::Uniform => vec![1.0 / s as f64; s],
        Family::Zipf { exponent } => {
            if !exponent.is_finite() {
                return Err(Error::Config(format!(
                    "zipf exponent must be finite, got {exponent}"
                )));
            }
            let raw: Vec<f64> = (1..=s).map(|i| (i as f64).powf(-exponent)).collect();
            normalize(raw)?
        }
        Family::TwoLevel { fraction, ratio } => {
            if !(0.0..=1.0).contains(fraction) {
                return Err(Error::Config(format!(
                    "fraction must be in [0, 1], got {fraction}"
                )));
            }
            if !(*ratio > 0.0) || !ratio.is_finite() {
                return Err(Error::Config(format!(
                    "ratio must be positive, got {ratio}"
                )));
            }
            let k = ((fraction * s as f64).round() as usize).min(s);
            // k symbols at level ratio·b, the rest at level b.
            let b = 1.0 / (k as f64 * ratio + (s - k) as f64);
            let mut probs = vec![ratio * b; k];
            probs.extend(std::iter::repeat_n(b, s - k));
            probs
        }
        Family::Dirichlet { alpha } => {
            if !(*alpha > 0.0) || !alpha.is_finite() {
                return Err(Error::Config(format!(
                    "alpha must be positive, got {alpha}"
                )));
            }
            let gamma = Gamma::new(*alpha, 1.0).expect("positive shape");
            let raw: Vec<f64> = (0..s).map(|_| gamma.sample(rng)).collect();
            normalize(raw)?
        }
    };
    DiscreteDistribution::new(probs)
}

fn normalize(raw: Vec<f64>) -> Result<Vec<f64>> {
    let sum: f64 = raw.iter().sum();
    if !(sum > 0.0) || !sum.is_finite() {
        return Err(Error::Config(format!(
            "cannot normalize weights summing to {sum}"
        )));
    }
    Ok(raw.into_iter().map(|x| x / sum).collect())
}

/// Stream id for drawing the sample of a trial.
pub const STREAM_SAMPLING: u64 = 0;
/// Stream id for an estimator's internal randomness (splitting, jitter).
pub const STREAM_ESTIMATOR: u64 = 1;
/// Stream id for drawing a random family (Dirichlet) once per experiment.
pub const STREAM_FAMILY: u64 = 2;

/// Derives an independent ChaCha stream for `(seed, trial, stream)`.
/// Distinct tuples give distinct 32-byte seeds by construction, so trials
/// are order-independent and safe to run concurrently.
pub fn derive_rng(seed: u64, trial: u64, stream: u64) -> ChaCha8Rng {
    let mut bytes = [0u8; 32];
    bytes[0..8].copy_from_slice(&seed.to_le_bytes());
    bytes[8..16].copy_from_slice(&trial.to_le_bytes());
    bytes[16..24].copy_from_slice(&stream.to_le_bytes());
    bytes[24..32].copy_from_slice(&0x4d4d4cu64.to_le_bytes());
    ChaCha8Rng::from_seed(bytes)
}
