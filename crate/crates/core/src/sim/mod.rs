//! Random-coding simulation of the cascade.
//!
//! A trial draws identification messages uniformly, sends them over the
//! broadcast part, decodes at both units, and, only when both units decode
//! correctly, runs the multiple-access part with codebooks selected by the
//! decoded messages. Error counts are merged across trials in a fixed order
//! so that results depend only on the seed and configuration.

mod discrete;
mod gaussian;
mod packed;
mod stats;

pub use discrete::{
    estimate_discrete_error_rates, mac_decode, mac_encode, DiscreteBccCodebook, DiscreteCode,
    DiscreteSimConfig, EncodeOutcome, MacDecoder, NestedMacCodebook,
};
pub use gaussian::{
    estimate_gaussian_error_rates, gaussian_typicality, GaussianCode, GaussianEncode,
    GaussianMacDecoder, GaussianSimConfig, GaussianSuperpositionCodebook, NestedGaussianCodebook,
};
pub use stats::{wilson_interval, Estimate, EventCounts, SimResult, WILSON_Z};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ChannelError;
use crate::prob::ProbError;
use crate::region::RegionError;
use crate::rng::RngSeed;

/// Largest number of stored sequences in a broadcast list.
pub const MAX_LIST_SIZE: usize = 1 << 16;
/// Largest number of candidate pairs scanned by a multiple-access decoder.
pub const MAX_MAC_PAIRS: u64 = 1 << 20;
/// Largest number of letters held by one codebook table.
pub const MAX_CODEBOOK_LETTERS: u64 = 1 << 26;
/// Retry cap for rejection sampling of typical sequences.
pub const RETRY_CAP: usize = 1000;
/// Smallest accepted trial count.
pub const MIN_TRIALS: u64 = 100;
/// Default typicality slack for discrete schemes, in nats.
pub const DEFAULT_EPSILON_DISCRETE: f64 = 0.1;
/// Default typicality slack for Gaussian schemes.
pub const DEFAULT_EPSILON_GAUSSIAN: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(
        "rate {rate} for unit {unit} leaves no room in the cell layout: need rate + epsilon <= {info} (epsilon = {epsilon})"
    )]
    RateTooHigh {
        unit: u8,
        rate: f64,
        info: f64,
        epsilon: f64,
    },
    #[error("unit {unit} would need a list of e^{exponent:.3} sequences, above the cap of {cap}")]
    ListTooLarge { unit: u8, exponent: f64, cap: usize },
    #[error("multiple-access search space {pairs} pairs exceeds the cap of {cap}")]
    SearchSpaceTooLarge { pairs: f64, cap: u64 },
    #[error("codebook for {what} would hold {letters} letters, above the cap of {cap}")]
    CodebookTooLarge {
        what: &'static str,
        letters: f64,
        cap: u64,
    },
    #[error("codeword variance for {what} is not positive ({value})")]
    NonPositiveVariance { what: &'static str, value: f64 },
    #[error("trials must be at least {MIN_TRIALS}, got {0}")]
    TooFewTrials(u64),
    #[error("block length must be positive")]
    ZeroBlockLength,
    #[error("epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error("message index {index} out of range 1..={count}")]
    MessageOutOfRange { index: usize, count: usize },
    #[error("a unit that decoded no message cannot select a nested codebook")]
    MissTypedUnit,
    #[error("sequence has length {actual}, expected {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("branch must be 1 or 2, got {0}")]
    BadBranch(u8),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Prob(#[from] ProbError),
    #[error(transparent)]
    Region(#[from] RegionError),
}

impl SimError {
    /// Whether the error means the requested rates or sizes cannot be
    /// realised, as opposed to malformed input.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            SimError::RateTooHigh { .. }
                | SimError::ListTooLarge { .. }
                | SimError::SearchSpaceTooLarge { .. }
                | SimError::CodebookTooLarge { .. }
                | SimError::NonPositiveVariance { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, SimError>;

/// Decoding rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decoder {
    /// Unique joint-typicality decoding.
    #[default]
    Typicality,
    /// Exact maximum-likelihood decoding, used as a reference.
    MaximumLikelihood,
}

/// Number of messages `floor(e^{n r})`, or `None` when it exceeds `cap`.
pub(crate) fn message_count(n: usize, rate: f64, cap: f64) -> Option<usize> {
    let exponent = n as f64 * rate;
    if exponent > cap.ln() + 1e-9 {
        return None;
    }
    Some((exponent.exp().floor() as usize).max(1))
}

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(SimError::InvalidEpsilon(epsilon))
    }
}

/// Outcome of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum TrialOutcome {
    EncodeFailure,
    BccPowerViolation,
    MissType,
    WrongMessage,
    MacPowerViolation,
    MacMiss,
    MacWrong,
    Success,
}

/// Runs `trials` independent trials and merges their outcomes.
pub(crate) fn run_trials<F>(trials: u64, n: usize, seed: RngSeed, trial: F) -> Result<SimResult>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> Result<TrialOutcome> + Sync,
{
    if trials < MIN_TRIALS {
        return Err(SimError::TooFewTrials(trials));
    }
    let counts = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed.trial(t);
            trial(&mut rng).map(EventCounts::from_outcome)
        })
        .try_reduce(EventCounts::default, |a, b| Ok(a.merge(&b)))?;
    Ok(SimResult::from_counts(n, counts))
}
