//! Seeded random streams.
//!
//! Every random object in an experiment draws from a ChaCha stream derived
//! from the master seed, a domain tag and an index, so that reruns with the
//! same seed and configuration are bit-identical regardless of the order in
//! which work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Seed used when the caller does not supply one.
pub const DEFAULT_SEED: u64 = 0x5EED_2009;

/// Stream domains. Distinct domains never share a keystream.
pub mod domain {
    pub const TRIAL: u64 = 1;
    pub const BCC_U_LIST: u64 = 2;
    pub const BCC_V_LIST: u64 = 3;
    pub const BCC_CODEWORD: u64 = 4;
    pub const MAC_UNIT1: u64 = 5;
    pub const MAC_UNIT2: u64 = 6;
    pub const GAUSS_BCC1: u64 = 7;
    pub const GAUSS_BCC2: u64 = 8;
    pub const FRONTIER: u64 = 9;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

impl Default for RngSeed {
    fn default() -> Self {
        RngSeed(DEFAULT_SEED)
    }
}

impl RngSeed {
    /// Stream for `index` within `domain`: seeded with `seed + index` on the
    /// domain's ChaCha stream.
    pub fn stream(self, domain: u64, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0.wrapping_add(index));
        rng.set_stream(domain);
        rng
    }

    /// Per-trial stream.
    pub fn trial(self, trial: u64) -> ChaCha8Rng {
        self.stream(domain::TRIAL, trial)
    }
}

impl From<u64> for RngSeed {
    fn from(v: u64) -> Self {
        RngSeed(v)
    }
}
