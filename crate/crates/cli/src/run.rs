//! Dispatch from a validated configuration to the core library, producing a
//! payload table.

use std::path::PathBuf;

use bcmac_core::channel::{BccChannel, DiscreteSystem, GaussianParams, GaussianSystem};
use bcmac_core::channel_file::{assemble_discrete, parse_channel_file, DiscreteSetup};
use bcmac_core::prob::LogBase;
use bcmac_core::region::{
    discrete_frontier_search, gaussian_bounds, gaussian_frontier, gaussian_membership, DiscreteBounds,
    DiscreteWitness, GaussianBounds, RateQuadruple,
};
use bcmac_core::rfid::{tdma_limit_report, universal_limit_report, FrontierSlice, IdModel, RfidLimits};
use bcmac_core::rng::RngSeed;
use bcmac_core::sim::{
    estimate_discrete_error_rates, estimate_gaussian_error_rates, DiscreteSimConfig, GaussianSimConfig, SimResult,
};

use crate::config::{Axis, ExperimentConfig, Mode, RatesSpec};
use crate::error::{CliError, Result};
use crate::table::{Cell, Table};

pub const DISCRETE_REGION_COLUMNS: [&str; 12] = [
    "source", "index", "id1", "id2", "id_sum", "data1", "data2", "data_sum", "r1_id", "r2_id", "r1_data", "r2_data",
];
pub const GAUSSIAN_FRONTIER_COLUMNS: [&str; 6] = ["alpha", "id1", "id2", "data1", "data2", "data_sum"];
pub const GAUSSIAN_MEMBERSHIP_COLUMNS: [&str; 7] =
    ["r1_id", "r2_id", "r1_data", "r2_data", "member", "alpha_lo", "alpha_hi"];
pub const SIM_COLUMNS: [&str; 20] = [
    "n",
    "trials",
    "lambda_overall",
    "overall_lo",
    "overall_hi",
    "lambda_bcc",
    "bcc_lo",
    "bcc_hi",
    "lambda_mac",
    "mac_lo",
    "mac_hi",
    "lambda_composed",
    "mac_trials",
    "encode_failures",
    "bcc_power_violations",
    "miss_type",
    "wrong_message",
    "mac_power_violations",
    "mac_miss",
    "mac_wrong",
];
pub const RFID_COLUMNS: [&str; 9] = [
    "report",
    "max_tags",
    "per_tag_id_rate",
    "tdma_uplink_rate",
    "universal_uplink_sum_rate",
    "n",
    "slice",
    "id_model",
    "alpha",
];

/// Runs the experiment and returns its payload.
pub fn run(cfg: &ExperimentConfig) -> Result<Table> {
    cfg.validate()?;
    match cfg.mode {
        Mode::RegionDiscrete => region_discrete(cfg),
        Mode::RegionGaussian => region_gaussian(cfg),
        Mode::SimulateDiscrete => simulate(cfg),
        Mode::SimulateGaussian => simulate(cfg),
        Mode::RfidReport => rfid_report(cfg),
        Mode::Sweep => sweep(cfg),
    }
}

/// Per-row seed, so that rows do not share random streams.
pub fn row_seed(base: u64, tag: u64) -> RngSeed {
    let mut z = tag.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    RngSeed(base ^ z ^ (z >> 31))
}

fn discrete_setup(cfg: &ExperimentConfig) -> Result<DiscreteSetup> {
    let spec = cfg
        .channel_spec
        .as_deref()
        .ok_or_else(|| CliError::usage("--channel-file is required"))?;
    let path = PathBuf::from(cfg.channel_file.as_deref().unwrap_or("<channel spec>"));
    let docs = parse_channel_file(spec).map_err(|source| CliError::ChannelFile {
        path: path.clone(),
        source,
    })?;
    assemble_discrete(&docs).map_err(|source| CliError::ChannelFile { path, source })
}

fn require_witness(setup: &DiscreteSetup) -> Result<DiscreteWitness> {
    setup
        .witness
        .clone()
        .ok_or_else(|| CliError::usage("--channel-file: discrete simulations need a `witness` object"))
}

fn gaussian_system(cfg: &ExperimentConfig, params: GaussianParams) -> Result<GaussianSystem> {
    Ok(params.build(cfg.allow_alpha_one)?)
}

fn params(cfg: &ExperimentConfig) -> Result<GaussianParams> {
    cfg.system.ok_or_else(|| CliError::usage("--system is required"))
}

fn rate_cells(unit: LogBase, r: &RateQuadruple) -> Vec<Cell> {
    r.in_base(unit).into_iter().map(Cell::from).collect()
}

fn explicit_rates(unit: LogBase, v: [f64; 4]) -> Result<RateQuadruple> {
    Ok(RateQuadruple::from_array(v.map(|x| unit.to_nats(x)))?)
}

fn region_discrete(cfg: &ExperimentConfig) -> Result<Table> {
    let setup = discrete_setup(cfg)?;
    let sys = &setup.system;
    let u = cfg.unit;
    let mut t = Table::new("discrete-region", u, &DISCRETE_REGION_COLUMNS);
    let mut push = |source: &str, index: usize, b: &DiscreteBounds, r: &RateQuadruple| {
        let mut row = vec![Cell::from(source), Cell::from(index)];
        row.extend(b.to_array().map(|v| Cell::from(u.from_nats(v))));
        row.extend(rate_cells(u, r));
        t.push(row);
    };
    if let Some(w) = &setup.witness {
        let b = w.bounds(sys)?;
        push("witness", 0, &b, &b.scaled_point(1.0));
    }
    let x = sys.bcc.x_size();
    let [a, b] = cfg.aux_cards.unwrap_or([x, x]);
    let found = discrete_frontier_search(sys, (a, b), cfg.budget, RngSeed(cfg.seed))?;
    for (i, (r, w)) in found.iter().enumerate() {
        push("search", i, &w.bounds, r);
    }
    Ok(t)
}

fn frontier_row(u: LogBase, alpha: f64, b: &GaussianBounds) -> Vec<Cell> {
    let mut row = vec![Cell::from(alpha)];
    row.extend(b.to_array().map(|v| Cell::from(u.from_nats(v))));
    row
}

fn region_gaussian(cfg: &ExperimentConfig) -> Result<Table> {
    let sys = gaussian_system(cfg, params(cfg)?)?;
    let u = cfg.unit;
    match cfg.rates {
        None => {
            let mut t = Table::new("gaussian-frontier", u, &GAUSSIAN_FRONTIER_COLUMNS);
            for row in gaussian_frontier(&sys, cfg.grid)? {
                t.push(frontier_row(u, row.alpha, &row.bounds));
            }
            Ok(t)
        }
        Some(spec) => {
            let r = gaussian_rates(cfg, &sys, spec, cfg.alpha)?;
            let interval = gaussian_membership(&r, &sys);
            let mut t = Table::new("gaussian-membership", u, &GAUSSIAN_MEMBERSHIP_COLUMNS);
            let mut row = rate_cells(u, &r);
            row.push(Cell::from(!interval.is_empty()));
            if interval.is_empty() {
                row.extend([Cell::Empty, Cell::Empty]);
            } else {
                row.extend([Cell::from(interval.lo), Cell::from(interval.hi)]);
            }
            t.push(row);
            Ok(t)
        }
    }
}

fn gaussian_rates(
    cfg: &ExperimentConfig,
    sys: &GaussianSystem,
    spec: RatesSpec,
    alpha: Option<f64>,
) -> Result<RateQuadruple> {
    match spec {
        RatesSpec::Explicit(v) => explicit_rates(cfg.unit, v),
        RatesSpec::Scale(f) => {
            let a = alpha.ok_or_else(|| CliError::usage("--alpha is required with scaled rates"))?;
            Ok(gaussian_bounds(sys, a)?.scaled_point(f))
        }
    }
}

fn sim_cells(r: &SimResult) -> Vec<Cell> {
    let c = &r.counts;
    vec![
        r.n.into(),
        r.trials.into(),
        r.lambda_overall.value.into(),
        r.lambda_overall.lo.into(),
        r.lambda_overall.hi.into(),
        r.lambda_bcc.value.into(),
        r.lambda_bcc.lo.into(),
        r.lambda_bcc.hi.into(),
        r.lambda_mac.value.into(),
        r.lambda_mac.lo.into(),
        r.lambda_mac.hi.into(),
        r.lambda_composed.into(),
        c.mac_trials.into(),
        c.encode_failures.into(),
        c.bcc_power_violations.into(),
        c.miss_type.into(),
        c.wrong_message.into(),
        c.mac_power_violations.into(),
        c.mac_miss.into(),
        c.mac_wrong.into(),
    ]
}

/// A simulation with every parameter except the swept one fixed.
#[derive(Clone)]
enum SimPlan {
    Discrete {
        system: DiscreteSystem,
        witness: DiscreteWitness,
        rates: RateQuadruple,
    },
    Gaussian {
        params: GaussianParams,
        alpha: Option<f64>,
        rates: RateQuadruple,
    },
}

fn sim_plan(cfg: &ExperimentConfig) -> Result<SimPlan> {
    let spec = cfg.rates.ok_or_else(|| CliError::usage("--rates is required"))?;
    match cfg.target() {
        Mode::SimulateDiscrete => {
            let setup = discrete_setup(cfg)?;
            let witness = require_witness(&setup)?;
            let rates = match spec {
                RatesSpec::Explicit(v) => explicit_rates(cfg.unit, v)?,
                RatesSpec::Scale(f) => witness.bounds(&setup.system)?.scaled_point(f),
            };
            Ok(SimPlan::Discrete {
                system: setup.system,
                witness,
                rates,
            })
        }
        Mode::SimulateGaussian => {
            let params = params(cfg)?;
            let sys = gaussian_system(cfg, params)?;
            let rates = gaussian_rates(cfg, &sys, spec, cfg.alpha)?;
            Ok(SimPlan::Gaussian {
                params,
                alpha: cfg.alpha,
                rates,
            })
        }
        other => Err(CliError::usage(format!("{} is not a simulation", other.as_str()))),
    }
}

impl SimPlan {
    fn execute(&self, cfg: &ExperimentConfig, n: usize, seed: RngSeed) -> Result<SimResult> {
        match self {
            SimPlan::Discrete {
                system,
                witness,
                rates,
            } => {
                let sim = DiscreteSimConfig {
                    system: system.clone(),
                    witness: witness.clone(),
                    rates: *rates,
                    n,
                    epsilon_bcc: cfg.epsilon_bcc(),
                    epsilon_mac: cfg.epsilon_mac(),
                    decoder: cfg.decoder,
                };
                Ok(estimate_discrete_error_rates(&sim, cfg.trials, seed)?)
            }
            SimPlan::Gaussian { params, alpha, rates } => {
                let system = gaussian_system(cfg, *params)?;
                let alpha = match alpha {
                    Some(a) => *a,
                    None => gaussian_membership(rates, &system).midpoint().ok_or_else(|| {
                        CliError::usage("--alpha: rates lie outside the region, pick a power split explicitly")
                    })?,
                };
                let sim = GaussianSimConfig {
                    system,
                    alpha,
                    rates: *rates,
                    n,
                    epsilon: cfg.epsilon_bcc(),
                    decoder: cfg.decoder,
                };
                Ok(estimate_gaussian_error_rates(&sim, cfg.trials, seed)?)
            }
        }
    }

    /// The plan with one axis moved to `v` (in the configured unit).
    fn with_axis(&self, axis: Axis, v: f64, unit: LogBase) -> Result<SimPlan> {
        let mut p = self.clone();
        if let Some(i) = axis.rate_index() {
            let rates = match &mut p {
                SimPlan::Discrete { rates, .. } | SimPlan::Gaussian { rates, .. } => rates,
            };
            let mut a = rates.to_array();
            a[i] = unit.to_nats(v);
            *rates = RateQuadruple::from_array(a)?;
            return Ok(p);
        }
        match (&mut p, axis) {
            (_, Axis::N) => {}
            (SimPlan::Discrete { system, .. }, Axis::Crossover) => {
                let b = &system.bcc;
                if b.x_size() != 2 || b.y1_size() != 2 || b.y2_size() != 2 {
                    return Err(CliError::usage(
                        "--axis crossover needs a binary broadcast part with binary outputs",
                    ));
                }
                system.bcc = BccChannel::independent_bsc(v, v)?;
            }
            (SimPlan::Gaussian { params, .. }, Axis::N1) => params.n1 = v,
            (SimPlan::Gaussian { params, .. }, Axis::N2) => params.n2 = v,
            (SimPlan::Gaussian { params, .. }, Axis::N3) => params.n3 = v,
            (SimPlan::Gaussian { alpha, .. }, Axis::Alpha) => *alpha = Some(v),
            (_, a) => {
                return Err(CliError::usage(format!("--axis: {} does not apply here", a.as_str())));
            }
        }
        Ok(p)
    }
}

fn simulate(cfg: &ExperimentConfig) -> Result<Table> {
    let plan = sim_plan(cfg)?;
    let mut t = Table::new("simulation", cfg.unit, &SIM_COLUMNS);
    for &n in &cfg.n {
        let r = plan.execute(cfg, n, row_seed(cfg.seed, n as u64))?;
        t.push(sim_cells(&r));
    }
    Ok(t)
}

fn sweep(cfg: &ExperimentConfig) -> Result<Table> {
    let s = cfg.sweep.as_ref().ok_or_else(|| CliError::usage("sweep settings missing"))?;
    let axis = s.axis;
    match s.target {
        Mode::RegionGaussian => {
            let base = params(cfg)?;
            let u = cfg.unit;
            let mut columns = Vec::new();
            if axis != Axis::Alpha {
                columns.push(axis.as_str());
            }
            columns.extend(GAUSSIAN_FRONTIER_COLUMNS);
            let mut t = Table::new("gaussian-region-sweep", u, &columns);
            for &v in &s.values {
                let mut p = base;
                let alpha = match axis {
                    Axis::Alpha => v,
                    Axis::N1 => {
                        p.n1 = v;
                        cfg.alpha.unwrap_or_default()
                    }
                    Axis::N2 => {
                        p.n2 = v;
                        cfg.alpha.unwrap_or_default()
                    }
                    Axis::N3 => {
                        p.n3 = v;
                        cfg.alpha.unwrap_or_default()
                    }
                    other => return Err(CliError::usage(format!("--axis: {} not valid here", other.as_str()))),
                };
                let b = gaussian_bounds(&gaussian_system(cfg, p)?, alpha)?;
                let mut row = Vec::new();
                if axis != Axis::Alpha {
                    row.push(Cell::from(v));
                }
                row.extend(frontier_row(u, alpha, &b));
                t.push(row);
            }
            Ok(t)
        }
        _ => {
            let plan = sim_plan(cfg)?;
            let mut columns = vec![axis.as_str()];
            columns.extend(SIM_COLUMNS);
            columns.extend(["status", "detail"]);
            let mut t = Table::new("simulation-sweep", cfg.unit, &columns);
            for (i, &v) in s.values.iter().enumerate() {
                let n = if axis == Axis::N { v as usize } else { cfg.n[0] };
                let row_plan = plan.with_axis(axis, v, cfg.unit)?;
                let value = if axis == Axis::N { Cell::from(n) } else { Cell::from(v) };
                let mut row = vec![value];
                match row_plan.execute(cfg, n, row_seed(cfg.seed, i as u64)) {
                    Ok(r) => {
                        row.extend(sim_cells(&r));
                        row.extend([Cell::from("ok"), Cell::Empty]);
                    }
                    Err(CliError::Infeasible(msg)) => {
                        row.push(Cell::from(n));
                        row.extend(std::iter::repeat_n(Cell::Empty, SIM_COLUMNS.len() - 1));
                        row.extend([Cell::from("infeasible"), Cell::from(msg)]);
                    }
                    Err(e) => return Err(e),
                }
                t.push(row);
            }
            Ok(t)
        }
    }
}

fn rfid_rows(t: &mut Table, frontier: &[FrontierSlice], alphas: Option<&[f64]>, n: usize) -> Result<()> {
    let u = t.unit;
    let reports: [(&str, RfidLimits); 2] = [
        ("tdma", tdma_limit_report(frontier, n)?),
        ("universal", universal_limit_report(frontier, n)?),
    ];
    for (name, r) in reports {
        let model = match r.id_model {
            IdModel::EqualRate => "equal-rate",
            IdModel::OnOff => "on-off",
        };
        t.push(vec![
            name.into(),
            r.max_tags.into(),
            u.from_nats(r.per_tag_id_rate).into(),
            u.from_nats(r.tdma_uplink_rate).into(),
            u.from_nats(r.universal_uplink_sum_rate).into(),
            r.n.into(),
            r.slice.into(),
            model.into(),
            alphas.map_or(Cell::Empty, |a| Cell::from(a[r.slice])),
        ]);
    }
    Ok(())
}

fn rfid_report(cfg: &ExperimentConfig) -> Result<Table> {
    let n = cfg.n[0];
    let mut t = Table::new("rfid-report", cfg.unit, &RFID_COLUMNS);
    if let Some(p) = cfg.system {
        let sys = gaussian_system(cfg, p)?;
        let rows = gaussian_frontier(&sys, cfg.grid)?;
        let frontier: Vec<FrontierSlice> = rows.iter().map(FrontierSlice::from).collect();
        let alphas: Vec<f64> = rows.iter().map(|r| r.alpha).collect();
        rfid_rows(&mut t, &frontier, Some(&alphas), n)?;
    } else {
        let setup = discrete_setup(cfg)?;
        let sys = &setup.system;
        let mut frontier = Vec::new();
        if let Some(w) = &setup.witness {
            frontier.push(FrontierSlice::from(w.bounds(sys)?));
        }
        let x = sys.bcc.x_size();
        let [a, b] = cfg.aux_cards.unwrap_or([x, x]);
        for (_, w) in discrete_frontier_search(sys, (a, b), cfg.budget, RngSeed(cfg.seed))? {
            frontier.push(FrontierSlice::from(w.bounds));
        }
        rfid_rows(&mut t, &frontier, None, n)?;
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse_inline_system, SweepSpec};

    fn gaussian_cfg() -> ExperimentConfig {
        ExperimentConfig {
            mode: Mode::RegionGaussian,
            system: Some(parse_inline_system("P=10,N1=1,N2=2,N3=5,alpha1=0.9,alpha2=0.9").unwrap()),
            ..Default::default()
        }
    }

    #[test]
    fn frontier_shape() {
        let t = run(&gaussian_cfg()).unwrap();
        assert_eq!(t.rows.len(), 101);
        assert_eq!(t.columns.len(), 6);
    }

    #[test]
    fn alpha_sweep_matches_frontier() {
        let frontier = run(&ExperimentConfig {
            grid: 11,
            ..gaussian_cfg()
        })
        .unwrap();
        let sweep = run(&ExperimentConfig {
            mode: Mode::Sweep,
            sweep: Some(SweepSpec {
                target: Mode::RegionGaussian,
                axis: Axis::Alpha,
                values: crate::config::parse_axis_values("0:1:11").unwrap(),
            }),
            ..gaussian_cfg()
        })
        .unwrap();
        assert_eq!(sweep.columns, frontier.columns);
        assert_eq!(sweep.rows, frontier.rows);
    }

    #[test]
    fn membership_row() {
        let t = run(&ExperimentConfig {
            rates: Some(RatesSpec::Explicit([0.1, 0.1, 0.1, 0.1])),
            ..gaussian_cfg()
        })
        .unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0][4], Cell::Bool(true));
    }

    #[test]
    fn bits_are_nats_over_ln2() {
        let nats = run(&ExperimentConfig {
            grid: 3,
            ..gaussian_cfg()
        })
        .unwrap();
        let bits = run(&ExperimentConfig {
            grid: 3,
            unit: LogBase::Bits,
            ..gaussian_cfg()
        })
        .unwrap();
        for (a, b) in nats.rows.iter().zip(&bits.rows) {
            for (x, y) in a[1..].iter().zip(&b[1..]) {
                let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
                assert!((x / std::f64::consts::LN_2 - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn row_seeds_differ() {
        assert_ne!(row_seed(1, 0), row_seed(1, 1));
        assert_eq!(row_seed(7, 64), row_seed(7, 64));
    }
}
