//! Probabilistic bounds for the gossip and double-echo broadcast layers.
//!
//! Everything here is a pure function of its arguments. Monte Carlo entry
//! points take an explicit seed and split work into a fixed number of rng
//! streams, so results do not depend on the thread count.

pub mod binomial;
pub mod bound;
pub mod contagion;
pub mod er;
pub mod export;
pub mod pde;

pub use bound::{BoundParams, EpsilonBound, Method, Property, SampleSizes};
pub use contagion::{threshold_contagion, threshold_contagion_mc, Contagion, ContagionParams};
pub use er::{er_connectivity, er_connectivity_mc, er_disconnection, gossip_totality_bound, gossip_totality_mc};
pub use pde::{delivery_prob_bounds, e_ready_prob_bounds, multi_bound, pde_bounds, pde_property_bounds, PdeBounds, PdeParams};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("{name}={value} is not a probability")]
    Probability { name: &'static str, value: f64 },
    #[error("{what}: {n} exceeds the exact-method cap of {cap}; use Monte Carlo")]
    AboveCap { what: &'static str, n: usize, cap: usize },
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("outside the modeled regime: {0}")]
    Regime(String),
    #[error("csv output: {0}")]
    Csv(String),
}

pub type Result<T> = std::result::Result<T, AnalysisError>;

pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(AnalysisError::Probability { name, value })
    }
}

/// A Monte Carlo frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub hits: u64,
    pub samples: u64,
}

impl Estimate {
    pub fn mean(&self) -> f64 {
        if self.samples == 0 {
            0.0
        } else {
            self.hits as f64 / self.samples as f64
        }
    }

    /// Standard error of the mean.
    pub fn sigma(&self) -> f64 {
        binomial_sigma(self.mean(), self.samples)
    }
}

/// `sqrt(p(1-p)/runs)`.
pub fn binomial_sigma(p: f64, runs: u64) -> f64 {
    if runs == 0 {
        return 0.0;
    }
    let p = p.clamp(0.0, 1.0);
    (p * (1.0 - p) / runs as f64).sqrt()
}

/// Number of correct processes for `n` processes with Byzantine fraction
/// `f`: `ceil((1-f) n)`, guarded against rounding in `f·n`.
pub fn correct_count(n: usize, f: f64) -> usize {
    n - byzantine_count(n, f)
}

/// `floor(f n)`.
pub fn byzantine_count(n: usize, f: f64) -> usize {
    ((f * n as f64 + 1e-9).floor() as usize).min(n)
}

/// Number of rng streams used by the Monte Carlo estimators.
pub(crate) const STREAMS: u64 = 64;

/// Splits `samples` over the fixed streams: `(stream, count)`.
pub(crate) fn stream_split(samples: u64) -> Vec<(u64, u64)> {
    (0..STREAMS)
        .map(|s| (s, samples / STREAMS + u64::from(s < samples % STREAMS)))
        .filter(|&(_, k)| k > 0)
        .collect()
}

pub(crate) fn stream_rng(seed: u64, stream: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_survive_rounding() {
        assert_eq!(correct_count(100, 0.1), 90);
        assert_eq!(correct_count(50, 0.1), 45);
        assert_eq!(correct_count(10, 0.3), 7);
        assert_eq!(correct_count(7, 0.0), 7);
    }

    #[test]
    fn streams_cover_all_samples() {
        for s in [0, 1, 63, 64, 65, 100_000] {
            assert_eq!(stream_split(s).iter().map(|x| x.1).sum::<u64>(), s);
        }
    }
}
