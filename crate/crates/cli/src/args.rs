//! Command-line parsing into an [`ExperimentConfig`].

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use bcmac_core::channel_file::{load_channel_file, write_channel_file, ChannelFileError, ChannelItem};
use bcmac_core::prob::LogBase;
use bcmac_core::rng::DEFAULT_SEED;
use bcmac_core::sim::Decoder;
use clap::{Args, Parser, Subcommand};

use crate::config::{
    parse_axis_values, parse_inline_system, Axis, ExperimentConfig, Format, Mode, RatesSpec, SweepSpec,
};
use crate::error::{CliError, Result};
use crate::persist::{emit, persist, replay};
use crate::run::run;

#[derive(Debug, Parser)]
#[command(name = "bcmac", version, about = "Rate regions and random-coding simulations of a broadcast/multiple-access cascade")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Discrete region bounds for the channel file's witness and a frontier search.
    RegionDiscrete(Opts),
    /// Gaussian region: frontier over the power split, or membership of --rates.
    RegionGaussian(Opts),
    /// Monte Carlo error rates of the discrete random code.
    SimulateDiscrete(Opts),
    /// Monte Carlo error rates of the Gaussian superposition code.
    SimulateGaussian(Opts),
    /// Repeat one experiment along a single parameter axis.
    Sweep(SweepOpts),
    /// Tag-count and uplink limits of TDMA and unrestricted protocols.
    RfidReport(Opts),
    /// Re-run a persisted configuration and compare payloads byte for byte.
    Replay(ReplayOpts),
}

#[derive(Debug, Args)]
pub struct Opts {
    /// Channel description file (JSON).
    #[arg(long)]
    pub channel_file: Option<PathBuf>,
    /// Gaussian system, inline `P=..,N1=..,N2=..,N3=..,alpha1=..,alpha2=..` or a channel file.
    #[arg(long)]
    pub system: Option<String>,
    /// `r1_id,r2_id,r1_data,r2_data` in --unit, or `scale:<factor>` of the region corner.
    #[arg(long)]
    pub rates: Option<String>,
    /// Block lengths, comma separated.
    #[arg(long)]
    pub n: Option<String>,
    /// Monte Carlo trials per block length
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    /// Typicality slack (nats for discrete codes, relative for Gaussian ones).
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Slack of the discrete multiple-access decoder; defaults to --epsilon.
    #[arg(long)]
    pub epsilon_mac: Option<f64>,
    /// Base seed of all random draws
    #[arg(long, conflicts_with = "entropy_seed")]
    pub seed: Option<u64>,
    /// Draw the seed from the operating system; the drawn value is recorded.
    #[arg(long)]
    pub entropy_seed: bool,
    /// Unit of rates on input and output: nats or bits
    #[arg(long, default_value = "nats")]
    pub unit: LogBase,
    /// Payload file; a `.meta.json` sidecar is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Payload format; defaults to the --out extension, else csv.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Points of the power-split grid.
    #[arg(long, default_value_t = 101)]
    pub grid: usize,
    /// Bound evaluations of the discrete frontier search.
    #[arg(long, default_value_t = 2000)]
    pub budget: usize,
    /// Auxiliary alphabet sizes `|U|,|V|` for the frontier search.
    #[arg(long)]
    pub aux_cards: Option<String>,
    /// Maximum-likelihood decoding instead of typicality decoding
    #[arg(long)]
    pub ml_decoder: bool,
    /// Accept power-conversion factors equal to one.
    #[arg(long)]
    pub allow_alpha_one: bool,
    /// Power split of the Gaussian code.
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepOpts {
    #[arg(long, value_enum)]
    pub target: Mode,
    #[arg(long, value_enum)]
    pub axis: Axis,
    /// `a,b,c` or an inclusive range `start:stop:count`.
    #[arg(long, allow_hyphen_values = true)]
    pub values: String,
    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Debug, Args)]
pub struct ReplayOpts {
    /// Sidecar `.meta.json` of the run to repeat.
    pub record: PathBuf,
    /// Also persist the replayed payload here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn read_channel_spec(path: &Path) -> Result<String> {
    let docs = load_channel_file(path).map_err(|e| match e {
        ChannelFileError::Io { message, .. } => CliError::io(path, message),
        source => CliError::ChannelFile {
            path: path.to_path_buf(),
            source,
        },
    })?;
    Ok(write_channel_file(&docs))
}

fn gaussian_from_file(path: &Path) -> Result<bcmac_core::channel::GaussianParams> {
    let docs = load_channel_file(path).map_err(|e| match e {
        ChannelFileError::Io { message, .. } => CliError::io(path, message),
        source => CliError::ChannelFile {
            path: path.to_path_buf(),
            source,
        },
    })?;
    let mut found = docs.iter().filter_map(|d| match &d.item {
        ChannelItem::Gaussian(p) => Some(*p),
        _ => None,
    });
    match (found.next(), found.next()) {
        (Some(p), None) => Ok(p),
        (None, _) => Err(CliError::usage(format!("{}: no `gaussian` object", path.display()))),
        (Some(_), Some(_)) => Err(CliError::usage(format!("{}: more than one `gaussian` object", path.display()))),
    }
}

impl Opts {
    /// Builds and validates the configuration, reading any input files.
    pub fn into_config(self, mode: Mode, sweep: Option<SweepSpec>) -> Result<ExperimentConfig> {
        let channel_spec = self.channel_file.as_deref().map(read_channel_spec).transpose()?;
        let system = match self.system.as_deref() {
            None => None,
            Some(s) if s.contains('=') => Some(parse_inline_system(s).map_err(|e| CliError::usage(format!("--system: {e}")))?),
            Some(path) => Some(gaussian_from_file(Path::new(path))?),
        };
        let rates = self
            .rates
            .as_deref()
            .map(str::parse::<RatesSpec>)
            .transpose()
            .map_err(|e| CliError::usage(format!("--rates: {e}")))?;
        let n = match self.n.as_deref() {
            None => Vec::new(),
            Some(s) => s
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<usize>()
                        .map_err(|_| CliError::usage(format!("--n: bad block length '{}'", t.trim())))
                })
                .collect::<Result<_>>()?,
        };
        let aux_cards = match self.aux_cards.as_deref() {
            None => None,
            Some(s) => {
                let v: Vec<usize> = s
                    .split(',')
                    .map(|t| t.trim().parse().map_err(|_| CliError::usage(format!("--aux-cards: bad size '{}'", t.trim()))))
                    .collect::<Result<_>>()?;
                match v.as_slice() {
                    [a, b] => Some([*a, *b]),
                    _ => return Err(CliError::usage("--aux-cards takes two sizes, e.g. 2,2")),
                }
            }
        };
        let seed = if self.entropy_seed {
            rand::random::<u64>()
        } else {
            self.seed.unwrap_or(DEFAULT_SEED)
        };
        let format = self.format.unwrap_or_else(|| match self.out.as_ref().and_then(|p| p.extension()) {
            Some(ext) if ext == "json" => Format::Json,
            _ => Format::Csv,
        });
        let cfg = ExperimentConfig {
            mode,
            channel_file: self.channel_file.map(|p| p.display().to_string()),
            channel_spec,
            system,
            rates,
            n,
            trials: self.trials,
            epsilon: self.epsilon,
            epsilon_mac: self.epsilon_mac,
            seed,
            unit: self.unit,
            format,
            grid: self.grid,
            budget: self.budget,
            aux_cards,
            decoder: if self.ml_decoder {
                Decoder::MaximumLikelihood
            } else {
                Decoder::Typicality
            },
            allow_alpha_one: self.allow_alpha_one,
            alpha: self.alpha,
            sweep,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn execute(command: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let (opts, mode, sweep) = match command {
        Command::Replay(r) => {
            let done = replay(&r.record, r.out.as_deref())?;
            let _ = writeln!(
                stderr,
                "replay of {} matches ({} rows)",
                done.payload_path.display(),
                done.table.rows.len()
            );
            return Ok(());
        }
        Command::RegionDiscrete(o) => (o, Mode::RegionDiscrete, None),
        Command::RegionGaussian(o) => (o, Mode::RegionGaussian, None),
        Command::SimulateDiscrete(o) => (o, Mode::SimulateDiscrete, None),
        Command::SimulateGaussian(o) => (o, Mode::SimulateGaussian, None),
        Command::RfidReport(o) => (o, Mode::RfidReport, None),
        Command::Sweep(s) => {
            let values = parse_axis_values(&s.values).map_err(|e| CliError::usage(format!("--values: {e}")))?;
            let spec = SweepSpec {
                target: s.target,
                axis: s.axis,
                values,
            };
            (s.opts, Mode::Sweep, Some(spec))
        }
    };
    let out = opts.out.clone();
    let cfg = opts.into_config(mode, sweep)?;
    let table = run(&cfg)?;
    match out {
        Some(path) => {
            persist(&cfg, &table, &path)?;
            let _ = writeln!(stderr, "wrote {} ({} rows)", path.display(), table.rows.len());
        }
        None => {
            let body = emit(&table, cfg.format)?;
            stdout
                .write_all(body.as_bytes())
                .map_err(|e| CliError::io("<stdout>", e))?;
        }
    }
    Ok(())
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { crate::error::EXIT_INVALID } else { 0 };
        }
    };
    match execute(cli.command, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
