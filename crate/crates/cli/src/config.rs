//! Experiment configuration: what to run, on which system, with which
//! parameters. A configuration is validated before any computation and is
//! echoed in full next to every persisted payload.

use bcmac_core::channel::GaussianParams;
use bcmac_core::prob::LogBase;
use bcmac_core::rng::DEFAULT_SEED;
use bcmac_core::sim::{Decoder, DEFAULT_EPSILON_DISCRETE, DEFAULT_EPSILON_GAUSSIAN, MIN_TRIALS};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Kind of experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    RegionDiscrete,
    RegionGaussian,
    SimulateDiscrete,
    SimulateGaussian,
    Sweep,
    RfidReport,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::RegionDiscrete => "region-discrete",
            Mode::RegionGaussian => "region-gaussian",
            Mode::SimulateDiscrete => "simulate-discrete",
            Mode::SimulateGaussian => "simulate-gaussian",
            Mode::Sweep => "sweep",
            Mode::RfidReport => "rfid-report",
        }
    }

    fn is_discrete(self) -> bool {
        matches!(self, Mode::RegionDiscrete | Mode::SimulateDiscrete)
    }
}

/// Payload encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Requested rates: four explicit values in the configured unit, or a
/// factor applied to the region corner of the configured witness or power
/// split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RatesSpec {
    Explicit([f64; 4]),
    Scale(f64),
}

impl std::str::FromStr for RatesSpec {
    type Err = String;

    /// `r1_id,r2_id,r1_data,r2_data` or `scale:<factor>`.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if let Some(f) = s.strip_prefix("scale:") {
            let f: f64 = f.trim().parse().map_err(|_| format!("bad scale factor '{f}'"))?;
            if !(f.is_finite() && f >= 0.0) {
                return Err(format!("scale factor must be finite and non-negative, got {f}"));
            }
            return Ok(RatesSpec::Scale(f));
        }
        let v = parse_f64_list(s)?;
        let arr: [f64; 4] = v
            .try_into()
            .map_err(|v: Vec<f64>| format!("expected 4 rates, got {}", v.len()))?;
        if let Some(x) = arr.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(format!("rates must be finite and non-negative, got {x}"));
        }
        Ok(RatesSpec::Explicit(arr))
    }
}

/// The single parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    /// Block length.
    N,
    #[value(alias = "r1_id")]
    R1Id,
    #[value(alias = "r2_id")]
    R2Id,
    #[value(alias = "r1_data")]
    R1Data,
    #[value(alias = "r2_data")]
    R2Data,
    /// Crossover of both branches of a binary symmetric broadcast part.
    Crossover,
    #[value(alias = "N1")]
    N1,
    #[value(alias = "N2")]
    N2,
    #[value(alias = "N3")]
    N3,
    /// Power split of the Gaussian broadcast code.
    Alpha,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::N => "n",
            Axis::R1Id => "r1_id",
            Axis::R2Id => "r2_id",
            Axis::R1Data => "r1_data",
            Axis::R2Data => "r2_data",
            Axis::Crossover => "crossover",
            Axis::N1 => "N1",
            Axis::N2 => "N2",
            Axis::N3 => "N3",
            Axis::Alpha => "alpha",
        }
    }

    /// Index into the rate quadruple for rate axes.
    pub fn rate_index(self) -> Option<usize> {
        match self {
            Axis::R1Id => Some(0),
            Axis::R2Id => Some(1),
            Axis::R1Data => Some(2),
            Axis::R2Data => Some(3),
            _ => None,
        }
    }

    fn allowed_for(self, target: Mode) -> bool {
        match target {
            Mode::SimulateDiscrete => matches!(self, Axis::N | Axis::Crossover) || self.rate_index().is_some(),
            Mode::SimulateGaussian => !matches!(self, Axis::Crossover),
            Mode::RegionGaussian => matches!(self, Axis::Alpha | Axis::N1 | Axis::N2 | Axis::N3),
            _ => false,
        }
    }
}

/// A sweep over one axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub target: Mode,
    pub axis: Axis,
    pub values: Vec<f64>,
}

/// Parses `a,b,c` or an inclusive linear range `start:stop:count`.
pub fn parse_axis_values(s: &str) -> std::result::Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [start, stop, count] => {
            let start: f64 = start.trim().parse().map_err(|_| format!("bad range start '{start}'"))?;
            let stop: f64 = stop.trim().parse().map_err(|_| format!("bad range stop '{stop}'"))?;
            let count: usize = count.trim().parse().map_err(|_| format!("bad range count '{count}'"))?;
            Ok(match count {
                0 => Vec::new(),
                1 => vec![start],
                _ => (0..count)
                    .map(|i| {
                        if i + 1 == count {
                            stop
                        } else {
                            start + (stop - start) * i as f64 / (count - 1) as f64
                        }
                    })
                    .collect(),
            })
        }
        [_] => {
            if s.trim().is_empty() {
                Ok(Vec::new())
            } else {
                parse_f64_list(s)
            }
        }
        _ => Err(format!("expected a list or start:stop:count, got '{s}'")),
    }
}

pub fn parse_f64_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("bad number '{}'", t.trim())))
        .collect()
}

/// Parses `P=10,N1=1,N2=2,N3=5,alpha1=0.9,alpha2=0.9`.
pub fn parse_inline_system(s: &str) -> std::result::Result<GaussianParams, String> {
    let mut vals: [Option<f64>; 6] = [None; 6];
    for part in s.split(',') {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got '{}'", part.trim()))?;
        let slot = match k.trim() {
            "P" | "p" => 0,
            "N1" | "n1" => 1,
            "N2" | "n2" => 2,
            "N3" | "n3" => 3,
            "alpha1" | "a1" => 4,
            "alpha2" | "a2" => 5,
            other => return Err(format!("unknown system parameter '{other}'")),
        };
        let v: f64 = v.trim().parse().map_err(|_| format!("bad value for {}: '{}'", k.trim(), v.trim()))?;
        if vals[slot].replace(v).is_some() {
            return Err(format!("system parameter {} given twice", k.trim()));
        }
    }
    let names = ["P", "N1", "N2", "N3", "alpha1", "alpha2"];
    let mut out = [0.0; 6];
    for i in 0..6 {
        out[i] = vals[i].ok_or_else(|| format!("system is missing {}", names[i]))?;
    }
    Ok(GaussianParams {
        p: out[0],
        n1: out[1],
        n2: out[2],
        n3: out[3],
        alpha1: out[4],
        alpha2: out[5],
    })
}

/// A complete, replayable experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    /// Channel file path as given on the command line.
    pub channel_file: Option<String>,
    /// Normalised contents of the channel file, used on replay.
    pub channel_spec: Option<String>,
    pub system: Option<GaussianParams>,
    /// Rates in `unit`.
    pub rates: Option<RatesSpec>,
    pub n: Vec<usize>,
    pub trials: u64,
    /// Typicality slack of the broadcast code (and of the Gaussian decoders).
    pub epsilon: Option<f64>,
    /// Typicality slack of the discrete multiple-access decoder.
    pub epsilon_mac: Option<f64>,
    pub seed: u64,
    pub unit: LogBase,
    pub format: Format,
    pub grid: usize,
    pub budget: usize,
    pub aux_cards: Option<[usize; 2]>,
    pub decoder: Decoder,
    pub allow_alpha_one: bool,
    /// Gaussian power split for simulations and scaled rates.
    pub alpha: Option<f64>,
    pub sweep: Option<SweepSpec>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: Mode::RegionGaussian,
            channel_file: None,
            channel_spec: None,
            system: None,
            rates: None,
            n: Vec::new(),
            trials: 1000,
            epsilon: None,
            epsilon_mac: None,
            seed: DEFAULT_SEED,
            unit: LogBase::Nats,
            format: Format::Csv,
            grid: 101,
            budget: 2000,
            aux_cards: None,
            decoder: Decoder::Typicality,
            allow_alpha_one: false,
            alpha: None,
            sweep: None,
        }
    }
}

impl ExperimentConfig {
    /// The mode that produces each payload row.
    pub fn target(&self) -> Mode {
        match (&self.mode, &self.sweep) {
            (Mode::Sweep, Some(s)) => s.target,
            (m, _) => *m,
        }
    }

    /// Broadcast (or Gaussian) typicality slack after defaults.
    pub fn epsilon_bcc(&self) -> f64 {
        self.epsilon.unwrap_or(match self.target() {
            Mode::SimulateGaussian | Mode::RegionGaussian => DEFAULT_EPSILON_GAUSSIAN,
            _ => DEFAULT_EPSILON_DISCRETE,
        })
    }

    pub fn epsilon_mac(&self) -> f64 {
        self.epsilon_mac.unwrap_or_else(|| self.epsilon_bcc())
    }

    /// Checks that every field the mode needs is present and sane.
    pub fn validate(&self) -> Result<()> {
        let usage = |m: String| Err(CliError::Usage(m));
        let target = self.target();
        match (self.mode, &self.sweep) {
            (Mode::Sweep, None) => return usage("sweep needs --target, --axis and --values".into()),
            (Mode::Sweep, Some(s)) => {
                if !matches!(
                    s.target,
                    Mode::SimulateDiscrete | Mode::SimulateGaussian | Mode::RegionGaussian
                ) {
                    return usage(format!(
                        "--target: sweeps run simulate-discrete, simulate-gaussian or region-gaussian, not {}",
                        s.target.as_str()
                    ));
                }
                if !s.axis.allowed_for(s.target) {
                    return usage(format!(
                        "--axis: {} cannot be swept for {}",
                        s.axis.as_str(),
                        s.target.as_str()
                    ));
                }
                if s.values.is_empty() {
                    return usage("--values: sweep axis has no values".into());
                }
                if let Some(v) = s.values.iter().find(|v| !v.is_finite()) {
                    return usage(format!("--values: {v} is not finite"));
                }
                match s.axis {
                    Axis::N => {
                        if !self.n.is_empty() {
                            return usage("--n: the swept axis is n, do not also pass --n".into());
                        }
                        if let Some(v) = s.values.iter().find(|v| !(**v >= 1.0 && v.fract() == 0.0)) {
                            return usage(format!("--values: block length {v} is not a positive integer"));
                        }
                    }
                    Axis::Alpha => {
                        if self.alpha.is_some() {
                            return usage("--alpha: the swept axis is alpha, do not also pass --alpha".into());
                        }
                        if let Some(v) = s.values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                            return usage(format!("--values: alpha {v} is outside [0, 1]"));
                        }
                    }
                    Axis::Crossover => {
                        if let Some(v) = s.values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                            return usage(format!("--values: crossover {v} is outside [0, 1]"));
                        }
                    }
                    _ => {
                        if let Some(v) = s.values.iter().find(|v| **v < 0.0) {
                            return usage(format!("--values: {} must be non-negative, got {v}", s.axis.as_str()));
                        }
                    }
                }
                if s.axis.rate_index().is_some() && self.rates.is_none() {
                    return usage("--rates: a rate sweep still needs the other three rates".into());
                }
            }
            (_, Some(_)) => return usage("sweep settings are only valid in sweep mode".into()),
            _ => {}
        }
        let sweeps_n = matches!(&self.sweep, Some(s) if s.axis == Axis::N);
        let sweeps_alpha = matches!(&self.sweep, Some(s) if s.axis == Axis::Alpha);

        if target.is_discrete() && self.channel_spec.is_none() {
            return usage(format!("--channel-file is required for {}", target.as_str()));
        }
        if matches!(target, Mode::RegionGaussian | Mode::SimulateGaussian) && self.system.is_none() {
            return usage(format!("--system is required for {}", target.as_str()));
        }
        if let Some(a) = self.alpha {
            if !(0.0..=1.0).contains(&a) {
                return usage(format!("--alpha must lie in [0, 1], got {a}"));
            }
        }
        for (name, e) in [("--epsilon", self.epsilon), ("--epsilon-mac", self.epsilon_mac)] {
            if let Some(e) = e {
                if !(e.is_finite() && e > 0.0) {
                    return usage(format!("{name} must be positive and finite, got {e}"));
                }
            }
        }
        match target {
            Mode::RegionDiscrete => {
                if self.budget == 0 {
                    return usage("--budget must be at least 1".into());
                }
                if let Some([a, b]) = self.aux_cards {
                    if a == 0 || b == 0 {
                        return usage(format!("--aux-cards must be positive, got {a},{b}"));
                    }
                }
            }
            Mode::RegionGaussian => {
                if self.rates.is_none() && self.sweep.is_none() && self.grid < 2 {
                    return usage(format!("--grid needs at least 2 points, got {}", self.grid));
                }
                if matches!(self.rates, Some(RatesSpec::Scale(_))) && self.alpha.is_none() {
                    return usage("--alpha is required with scaled rates".into());
                }
                if self.sweep.is_some() && !sweeps_alpha && self.alpha.is_none() {
                    return usage("--alpha is required when sweeping a noise variance of the region".into());
                }
            }
            Mode::SimulateDiscrete | Mode::SimulateGaussian => {
                if self.rates.is_none() {
                    return usage(format!("--rates is required for {}", target.as_str()));
                }
                if self.trials < MIN_TRIALS {
                    return usage(format!("--trials must be at least {MIN_TRIALS}, got {}", self.trials));
                }
                if !sweeps_n {
                    if self.n.is_empty() {
                        return usage(format!("--n is required for {}", target.as_str()));
                    }
                    if self.sweep.is_some() && self.n.len() != 1 {
                        return usage("--n takes a single block length when another axis is swept".into());
                    }
                }
                if self.n.contains(&0) {
                    return usage("--n: block lengths must be positive".into());
                }
                if target == Mode::SimulateGaussian
                    && matches!(self.rates, Some(RatesSpec::Scale(_)))
                    && self.alpha.is_none()
                    && !sweeps_alpha
                {
                    return usage("--alpha is required with scaled rates".into());
                }
            }
            Mode::RfidReport => {
                match (&self.channel_spec, &self.system) {
                    (None, None) => return usage("rfid-report needs --channel-file or --system".into()),
                    (Some(_), Some(_)) => {
                        return usage("rfid-report takes either --channel-file or --system, not both".into())
                    }
                    _ => {}
                }
                if self.n.len() != 1 || self.n[0] == 0 {
                    return usage("--n: rfid-report needs exactly one positive block length".into());
                }
                if self.system.is_some() && self.grid < 2 {
                    return usage(format!("--grid needs at least 2 points, got {}", self.grid));
                }
                if self.channel_spec.is_some() && self.budget == 0 {
                    return usage("--budget must be at least 1".into());
                }
            }
            Mode::Sweep => unreachable!("sweep target checked above"),
        }
        Ok(())
    }
}
