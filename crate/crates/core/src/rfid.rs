//! RFID readings of the rate region.
//!
//! The transceiver is a reader and the mobile units are tags. The
//! identification rate bounds how many tags the reader can address in one
//! block, and the data rates bound the uplink throughput, either with tags
//! in reader-assigned time slots (TDMA) or with unrestricted joint decoding.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::region::{DiscreteBounds, GaussianBounds, GaussianFrontierRow};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RfidError {
    #[error("frontier is empty")]
    EmptyFrontier,
    #[error("rate must be finite and non-negative, got {0}")]
    InvalidRate(f64),
    #[error("block length must be positive")]
    ZeroBlockLength,
}

pub type Result<T> = std::result::Result<T, RfidError>;

/// `floor(2^{n r})` tags for an identification rate of `r_bits` bits per
/// symbol, saturating at `u64::MAX`.
pub fn max_tag_count(r_bits: f64, n: usize) -> Result<u64> {
    if !(r_bits >= 0.0) || !r_bits.is_finite() {
        return Err(RfidError::InvalidRate(r_bits));
    }
    if n == 0 {
        return Err(RfidError::ZeroBlockLength);
    }
    let exponent = n as f64 * r_bits;
    let nearest = exponent.round();
    // Products such as 8 * 0.125 should give exact powers of two.
    let exponent = if (exponent - nearest).abs() < 1e-9 {
        nearest
    } else {
        exponent
    };
    if exponent >= 64.0 {
        return Ok(u64::MAX);
    }
    Ok((exponent.exp2().floor() as u64).max(1))
}

/// The region bounds at one point of a frontier (a power split or an input
/// distribution), in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierSlice {
    pub id1: f64,
    pub id2: f64,
    pub id_sum: f64,
    pub data1: f64,
    pub data2: f64,
    pub data_sum: f64,
}

impl FrontierSlice {
    /// Largest common identification rate of the two units.
    pub fn equal_id_rate(&self) -> f64 {
        self.id1.min(self.id2).min(0.5 * self.id_sum).max(0.0)
    }

    /// Sum rate of time-sharing between the two single-user corners. The
    /// sum along the time-sharing line peaks at the better corner.
    pub fn tdma_rate(&self) -> f64 {
        let corner1 = self.data1.min(self.data_sum);
        let corner2 = self.data2.min(self.data_sum);
        corner1.max(corner2).max(0.0)
    }

    /// Largest data sum rate under joint decoding.
    pub fn universal_sum_rate(&self) -> f64 {
        (self.data1 + self.data2).min(self.data_sum).max(0.0)
    }
}

impl From<GaussianBounds> for FrontierSlice {
    fn from(b: GaussianBounds) -> Self {
        FrontierSlice {
            id1: b.id1,
            id2: b.id2,
            id_sum: b.id1 + b.id2,
            data1: b.data1,
            data2: b.data2,
            data_sum: b.data_sum,
        }
    }
}

impl From<&GaussianFrontierRow> for FrontierSlice {
    fn from(r: &GaussianFrontierRow) -> Self {
        r.bounds.into()
    }
}

impl From<DiscreteBounds> for FrontierSlice {
    fn from(b: DiscreteBounds) -> Self {
        FrontierSlice {
            id1: b.id1,
            id2: b.id2,
            id_sum: b.id_sum,
            data1: b.data1,
            data2: b.data2,
            data_sum: b.data_sum,
        }
    }
}

/// How the identification rate of a report was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdModel {
    /// The largest common identification rate of the reporting slice.
    EqualRate,
    /// One on-off bit per block, the smallest positive rate that still
    /// gives each tag a broadcast message.
    OnOff,
}

/// Tag count and uplink limits at one frontier slice. Rates in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RfidLimits {
    pub max_tags: u64,
    pub per_tag_id_rate: f64,
    pub tdma_uplink_rate: f64,
    pub universal_uplink_sum_rate: f64,
    pub n: usize,
    /// Index of the reporting slice in the frontier.
    pub slice: usize,
    pub id_model: IdModel,
}

/// First index maximising `score`.
fn argmax(frontier: &[FrontierSlice], score: impl Fn(&FrontierSlice) -> f64) -> Result<usize> {
    if frontier.is_empty() {
        return Err(RfidError::EmptyFrontier);
    }
    let mut best = 0;
    for (i, s) in frontier.iter().enumerate().skip(1) {
        if score(s) > score(&frontier[best]) {
            best = i;
        }
    }
    Ok(best)
}

fn nats_to_bits(r: f64) -> f64 {
    r / std::f64::consts::LN_2
}

/// Limits of TDMA-based protocols: the slice with the best time-shared
/// uplink, with tags addressed at its equal identification rate.
pub fn tdma_limit_report(frontier: &[FrontierSlice], n: usize) -> Result<RfidLimits> {
    let slice = argmax(frontier, FrontierSlice::tdma_rate)?;
    let s = &frontier[slice];
    let per_tag_id_rate = s.equal_id_rate();
    Ok(RfidLimits {
        max_tags: max_tag_count(nats_to_bits(per_tag_id_rate), n)?,
        per_tag_id_rate,
        tdma_uplink_rate: s.tdma_rate(),
        universal_uplink_sum_rate: s.universal_sum_rate(),
        n,
        slice,
        id_model: IdModel::EqualRate,
    })
}

/// Limits of any protocol when the reader knows the tag IDs: the slice with
/// the largest joint-decoding sum rate, with an on-off identification
/// message of one bit per block.
pub fn universal_limit_report(frontier: &[FrontierSlice], n: usize) -> Result<RfidLimits> {
    let slice = argmax(frontier, FrontierSlice::universal_sum_rate)?;
    let s = &frontier[slice];
    if n == 0 {
        return Err(RfidError::ZeroBlockLength);
    }
    let per_tag_id_rate = (std::f64::consts::LN_2 / n as f64).min(s.equal_id_rate());
    Ok(RfidLimits {
        max_tags: max_tag_count(nats_to_bits(per_tag_id_rate), n)?,
        per_tag_id_rate,
        tdma_uplink_rate: s.tdma_rate(),
        universal_uplink_sum_rate: s.universal_sum_rate(),
        n,
        slice,
        id_model: IdModel::OnOff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::GaussianSystem;
    use crate::region::gaussian_bounds;

    #[test]
    fn tag_counts() {
        assert_eq!(max_tag_count(0.0, 5).unwrap(), 1);
        assert_eq!(max_tag_count(1.0, 8).unwrap(), 256);
        assert_eq!(max_tag_count(0.5, 7).unwrap(), 11);
        assert_eq!(max_tag_count(0.125, 8).unwrap(), 2);
        assert_eq!(max_tag_count(2.0, 40).unwrap(), u64::MAX);
        assert!(max_tag_count(-0.1, 4).is_err());
        assert!(max_tag_count(0.5, 0).is_err());
    }

    #[test]
    fn symmetric_gaussian_tdma_is_single_user_bound() {
        let sys = GaussianSystem::new(10.0, 1.0, 2.0, 5.0, 0.9, 0.9).unwrap();
        let slice: FrontierSlice = gaussian_bounds(&sys, 0.5).unwrap().into();
        let t = tdma_limit_report(&[slice], 1).unwrap();
        assert!((t.tdma_uplink_rate - 0.5 * (1.0f64 + 0.5 * 0.9 * 10.0 / 5.0).ln()).abs() < 1e-12);
        let u = universal_limit_report(&[slice], 1).unwrap();
        assert!((u.universal_uplink_sum_rate - 0.5 * (1.0f64 + 9.0 / 5.0).ln()).abs() < 1e-12);
        assert!(u.universal_uplink_sum_rate >= t.tdma_uplink_rate);
        // n = 1 reads the tag count off the per-symbol rate.
        let bits = t.per_tag_id_rate / std::f64::consts::LN_2;
        assert_eq!(t.max_tags, bits.exp2().floor() as u64);
    }

    #[test]
    fn zero_frontier_gives_zero_rates() {
        let zero = FrontierSlice {
            id1: 0.0,
            id2: 0.0,
            id_sum: 0.0,
            data1: 0.0,
            data2: 0.0,
            data_sum: 0.0,
        };
        for r in [tdma_limit_report(&[zero], 16).unwrap(), universal_limit_report(&[zero], 16).unwrap()] {
            assert_eq!(r.max_tags, 1);
            assert_eq!(r.per_tag_id_rate, 0.0);
            assert_eq!(r.tdma_uplink_rate, 0.0);
            assert_eq!(r.universal_uplink_sum_rate, 0.0);
        }
        assert_eq!(tdma_limit_report(&[], 4), Err(RfidError::EmptyFrontier));
    }
}
