use serde::{Deserialize, Serialize};

use super::TrialOutcome;

/// Two-sided 95% normal quantile.
pub const WILSON_Z: f64 = 1.959_963_984_540_054;

/// A proportion with its Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
    pub events: u64,
    pub trials: u64,
}

impl Estimate {
    /// Whether the two intervals are disjoint.
    pub fn separated_from(&self, other: &Estimate) -> bool {
        self.hi < other.lo || other.hi < self.lo
    }

    /// Binomial standard error of the point estimate.
    pub fn std_error(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        (self.value * (1.0 - self.value) / self.trials as f64).sqrt()
    }
}

/// Wilson 95% interval for `events` successes in `trials` draws. With no
/// trials the estimate is 0 on `[0, 1]`.
pub fn wilson_interval(events: u64, trials: u64) -> Estimate {
    if trials == 0 {
        return Estimate {
            value: 0.0,
            lo: 0.0,
            hi: 1.0,
            events,
            trials,
        };
    }
    let n = trials as f64;
    let p = events as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    Estimate {
        value: p,
        lo: (center - half).max(0.0),
        hi: (center + half).min(1.0),
        events,
        trials,
    }
}

/// Per-event tallies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EventCounts {
    pub trials: u64,
    /// No typical pair or codeword for the drawn messages.
    pub encode_failures: u64,
    /// Broadcast codeword above the power budget.
    pub bcc_power_violations: u64,
    /// Some unit decoded no message.
    pub miss_type: u64,
    /// Some unit decoded a wrong message.
    pub wrong_message: u64,
    /// Trials that reached the multiple-access part.
    pub mac_trials: u64,
    pub mac_power_violations: u64,
    /// Multiple-access decoder found no unique pair.
    pub mac_miss: u64,
    /// Multiple-access decoder returned a wrong pair.
    pub mac_wrong: u64,
}

impl EventCounts {
    pub(crate) fn from_outcome(o: TrialOutcome) -> Self {
        let mut c = EventCounts {
            trials: 1,
            ..Default::default()
        };
        match o {
            TrialOutcome::EncodeFailure => c.encode_failures = 1,
            TrialOutcome::BccPowerViolation => c.bcc_power_violations = 1,
            TrialOutcome::MissType => c.miss_type = 1,
            TrialOutcome::WrongMessage => c.wrong_message = 1,
            TrialOutcome::MacPowerViolation => {
                c.mac_trials = 1;
                c.mac_power_violations = 1;
            }
            TrialOutcome::MacMiss => {
                c.mac_trials = 1;
                c.mac_miss = 1;
            }
            TrialOutcome::MacWrong => {
                c.mac_trials = 1;
                c.mac_wrong = 1;
            }
            TrialOutcome::Success => c.mac_trials = 1,
        }
        c
    }

    pub fn merge(&self, o: &EventCounts) -> EventCounts {
        EventCounts {
            trials: self.trials + o.trials,
            encode_failures: self.encode_failures + o.encode_failures,
            bcc_power_violations: self.bcc_power_violations + o.bcc_power_violations,
            miss_type: self.miss_type + o.miss_type,
            wrong_message: self.wrong_message + o.wrong_message,
            mac_trials: self.mac_trials + o.mac_trials,
            mac_power_violations: self.mac_power_violations + o.mac_power_violations,
            mac_miss: self.mac_miss + o.mac_miss,
            mac_wrong: self.mac_wrong + o.mac_wrong,
        }
    }

    pub fn bcc_errors(&self) -> u64 {
        self.encode_failures + self.bcc_power_violations + self.miss_type + self.wrong_message
    }

    pub fn mac_errors(&self) -> u64 {
        self.mac_power_violations + self.mac_miss + self.mac_wrong
    }

    pub fn overall_errors(&self) -> u64 {
        self.bcc_errors() + self.mac_errors()
    }
}

/// Estimated error probabilities of one simulated configuration.
///
/// The multiple-access rate is conditional on broadcast success, so the
/// overall rate equals `1 - (1 - bcc)(1 - mac)` in counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub n: usize,
    pub trials: u64,
    pub counts: EventCounts,
    pub lambda_bcc: Estimate,
    pub lambda_mac: Estimate,
    pub lambda_overall: Estimate,
    /// `1 - (1 - lambda_bcc)(1 - lambda_mac)` from the point estimates.
    pub lambda_composed: f64,
}

impl SimResult {
    pub fn from_counts(n: usize, counts: EventCounts) -> Self {
        let lambda_bcc = wilson_interval(counts.bcc_errors(), counts.trials);
        let lambda_mac = wilson_interval(counts.mac_errors(), counts.mac_trials);
        let lambda_overall = wilson_interval(counts.overall_errors(), counts.trials);
        let lambda_composed = 1.0 - (1.0 - lambda_bcc.value) * (1.0 - lambda_mac.value);
        SimResult {
            n,
            trials: counts.trials,
            counts,
            lambda_bcc,
            lambda_mac,
            lambda_overall,
            lambda_composed,
        }
    }

    /// Whether the tallied overall error agrees with the composed estimate
    /// within `k` binomial standard errors.
    pub fn composition_within(&self, k: f64) -> bool {
        let sigma = self.lambda_overall.std_error().max(0.5 / self.trials.max(1) as f64);
        (self.lambda_overall.value - self.lambda_composed).abs() <= k * sigma
    }
}
