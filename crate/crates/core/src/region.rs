//! Achievable-rate regions: the six-bound discrete region and the Gaussian
//! region parameterised by the broadcast power split `alpha`.
//!
//! All rates are in nats. Regions are open: a quadruple on a boundary is
//! outside.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{bcc_joint, induced_mac_joint, ChannelError, DiscreteSystem, GaussianSystem};
use crate::prob::{JointPmf, LogBase, Pmf, ProbError};
use crate::rng::{domain, RngSeed};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegionError {
    #[error("alpha must lie in [0, 1], got {0}")]
    AlphaOutOfRange(f64),
    #[error("alpha grid needs at least 2 points, got {0}")]
    GridTooSmall(usize),
    #[error("frontier search budget must be at least 1")]
    ZeroBudget,
    #[error("auxiliary alphabet sizes must be positive, got ({0}, {1})")]
    BadAuxCards(usize, usize),
    #[error("rate {name} must be finite and non-negative, got {value}")]
    InvalidRate { name: &'static str, value: f64 },
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Prob(#[from] ProbError),
}

pub type Result<T> = std::result::Result<T, RegionError>;

/// `(R1_ID, R2_ID, R1_Data, R2_Data)` in nats per channel use.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RateQuadruple {
    pub r1_id: f64,
    pub r2_id: f64,
    pub r1_data: f64,
    pub r2_data: f64,
}

impl RateQuadruple {
    pub const NAMES: [&'static str; 4] = ["r1_id", "r2_id", "r1_data", "r2_data"];

    pub fn new(r1_id: f64, r2_id: f64, r1_data: f64, r2_data: f64) -> Result<Self> {
        Self::from_array([r1_id, r2_id, r1_data, r2_data])
    }

    pub fn zero() -> Self {
        RateQuadruple::default()
    }

    pub fn from_array(v: [f64; 4]) -> Result<Self> {
        for (name, value) in Self::NAMES.into_iter().zip(v) {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(RegionError::InvalidRate { name, value });
            }
        }
        Ok(RateQuadruple {
            r1_id: v[0],
            r2_id: v[1],
            r1_data: v[2],
            r2_data: v[3],
        })
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.r1_id, self.r2_id, self.r1_data, self.r2_data]
    }

    /// Every component multiplied by `factor`.
    pub fn scaled(self, factor: f64) -> Self {
        let a = self.to_array();
        RateQuadruple {
            r1_id: a[0] * factor,
            r2_id: a[1] * factor,
            r1_data: a[2] * factor,
            r2_data: a[3] * factor,
        }
    }

    /// Converts every component from nats to `base`.
    pub fn in_base(self, base: LogBase) -> [f64; 4] {
        self.to_array().map(|v| base.from_nats(v))
    }

    /// Component-wise `self <= other`.
    pub fn dominated_by(&self, other: &RateQuadruple) -> bool {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .all(|(a, b)| *a <= b)
    }
}

/// The six upper bounds of the discrete region for one choice of
/// distributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscreteBounds {
    /// `I(U;Y1)`
    pub id1: f64,
    /// `I(V;Y2)`
    pub id2: f64,
    /// `I(U;Y1) + I(V;Y2) - I(U;V)`
    pub id_sum: f64,
    /// `I(Q1;S|Q2)`
    pub data1: f64,
    /// `I(Q2;S|Q1)`
    pub data2: f64,
    /// `I(Q1,Q2;S)`
    pub data_sum: f64,
}

impl DiscreteBounds {
    pub fn to_array(self) -> [f64; 6] {
        [
            self.id1,
            self.id2,
            self.id_sum,
            self.data1,
            self.data2,
            self.data_sum,
        ]
    }

    /// Strict membership in the open region cut out by these bounds.
    pub fn contains(&self, r: &RateQuadruple) -> bool {
        r.r1_id < self.id1
            && r.r2_id < self.id2
            && r.r1_id + r.r2_id < self.id_sum
            && r.r1_data < self.data1
            && r.r2_data < self.data2
            && r.r1_data + r.r2_data < self.data_sum
    }

    /// A point obtained by scaling the pentagon corners toward the origin.
    ///
    /// In each pair, `t = min(1, sum / (a + b))` shrinks the two individual
    /// bounds until they respect the sum bound; the result is then multiplied
    /// by `factor`.
    pub fn scaled_point(&self, factor: f64) -> RateQuadruple {
        let pair = |a: f64, b: f64, s: f64| -> (f64, f64) {
            let t = if a + b > 0.0 { (s / (a + b)).min(1.0) } else { 0.0 };
            (factor * t * a, factor * t * b)
        };
        let (i1, i2) = pair(self.id1, self.id2, self.id_sum);
        let (d1, d2) = pair(self.data1, self.data2, self.data_sum);
        RateQuadruple {
            r1_id: i1,
            r2_id: i2,
            r1_data: d1,
            r2_data: d2,
        }
    }
}

/// Distributions that evaluate the discrete bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteWitness {
    /// Joint over `(U, V, X)`.
    pub p_uvx: JointPmf,
    pub p_q1: Pmf,
    pub p_q2: Pmf,
}

impl DiscreteWitness {
    pub fn bounds(&self, sys: &DiscreteSystem) -> Result<DiscreteBounds> {
        discrete_bounds(&self.p_uvx, sys, &self.p_q1, &self.p_q2)
    }
}

/// A witness with its evaluated bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteRegionWitness {
    pub witness: DiscreteWitness,
    pub bounds: DiscreteBounds,
}

impl DiscreteRegionWitness {
    pub fn evaluate(witness: DiscreteWitness, sys: &DiscreteSystem) -> Result<Self> {
        let bounds = witness.bounds(sys)?;
        Ok(DiscreteRegionWitness { witness, bounds })
    }

    /// Re-evaluates the bounds and checks they agree within `tol`.
    pub fn reproduces(&self, sys: &DiscreteSystem, tol: f64) -> Result<bool> {
        let fresh = self.witness.bounds(sys)?;
        Ok(fresh
            .to_array()
            .iter()
            .zip(self.bounds.to_array())
            .all(|(a, b)| (a - b).abs() <= tol))
    }
}

/// Mutual-information bounds of the discrete region, in nats.
///
/// The identification bounds use the joint of `(U, V, X, Y1, Y2)`; the data
/// bounds use the end-to-end joint of `(Q1, Q2, S)` through the imperfection
/// channels.
pub fn discrete_bounds(
    p_uvx: &JointPmf,
    sys: &DiscreteSystem,
    p_q1: &Pmf,
    p_q2: &Pmf,
) -> Result<DiscreteBounds> {
    let nats = LogBase::Nats;
    let full = bcc_joint(p_uvx, &sys.bcc)?;
    let id1 = full.mutual_information_between(&[0], &[3], nats)?;
    let id2 = full.mutual_information_between(&[1], &[4], nats)?;
    let iuv = full.mutual_information_between(&[0], &[1], nats)?;
    let mac = induced_mac_joint(p_q1, p_q2, &sys.imp1, &sys.imp2, &sys.mac)?;
    let data1 = mac.conditional_mutual_information_between(&[0], &[2], &[1], nats)?;
    let data2 = mac.conditional_mutual_information_between(&[1], &[2], &[0], nats)?;
    let data_sum = mac.mutual_information_between(&[0, 1], &[2], nats)?;
    Ok(DiscreteBounds {
        id1,
        id2,
        id_sum: (id1 + id2 - iuv).max(0.0),
        data1,
        data2,
        data_sum,
    })
}

/// Whether `r` lies strictly inside the region of the given distributions.
pub fn discrete_membership(r: &RateQuadruple, witness: &DiscreteWitness, sys: &DiscreteSystem) -> Result<bool> {
    Ok(witness.bounds(sys)?.contains(r))
}

const EVALS_PER_RESTART: usize = 64;
const INTERIOR_SHRINK: f64 = 1.0 - 1e-6;

/// Membership intervals no wider than this are treated as empty.
pub const MEMBERSHIP_SLACK: f64 = 1e-12;

/// Randomised search for points of the discrete region.
///
/// Each restart draws a random weight vector over the four rates and a random
/// starting witness, then runs projected coordinate ascent on the three
/// probability simplices to maximise the best weighted rate achievable
/// under the current bounds. The corresponding corner, pulled slightly
/// inside, is recorded. Results are merged in a fixed order and filtered to
/// the non-dominated set. `budget` counts bound evaluations.
pub fn discrete_frontier_search(
    sys: &DiscreteSystem,
    aux_cards: (usize, usize),
    budget: usize,
    seed: RngSeed,
) -> Result<Vec<(RateQuadruple, DiscreteRegionWitness)>> {
    if budget == 0 {
        return Err(RegionError::ZeroBudget);
    }
    if aux_cards.0 == 0 || aux_cards.1 == 0 {
        return Err(RegionError::BadAuxCards(aux_cards.0, aux_cards.1));
    }
    let restarts = budget.div_ceil(EVALS_PER_RESTART);
    let found: Vec<Option<(RateQuadruple, DiscreteRegionWitness)>> = (0..restarts)
        .into_par_iter()
        .map(|k| {
            let evals = if k + 1 == restarts {
                budget - k * EVALS_PER_RESTART
            } else {
                EVALS_PER_RESTART
            };
            let mut rng = seed.stream(domain::FRONTIER, k as u64);
            ascend(sys, aux_cards, evals, &mut rng)
        })
        .collect::<Result<_>>()?;
    let mut points: Vec<_> = found.into_iter().flatten().collect();
    points.sort_by(|a, b| {
        b.0.to_array()
            .partial_cmp(&a.0.to_array())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(pareto_filter(points))
}

fn pareto_filter<T>(points: Vec<(RateQuadruple, T)>) -> Vec<(RateQuadruple, T)> {
    let mut kept: Vec<(RateQuadruple, T)> = Vec::new();
    for p in points {
        if kept.iter().any(|k| p.0.dominated_by(&k.0)) {
            continue;
        }
        kept.push(p);
    }
    kept
}

/// Best value of `w1 a + w2 b` over `{a <= x, b <= y, a + b <= s}` and the
/// maximising corner.
fn pentagon_max(x: f64, y: f64, s: f64, w1: f64, w2: f64) -> (f64, f64, f64) {
    let a = x.min(s);
    let b = y.min(s);
    let c1 = (a, b.min(s - a).max(0.0));
    let c2 = (a.min(s - b).max(0.0), b);
    let v1 = w1 * c1.0 + w2 * c1.1;
    let v2 = w1 * c2.0 + w2 * c2.1;
    if v1 >= v2 {
        (v1, c1.0, c1.1)
    } else {
        (v2, c2.0, c2.1)
    }
}

fn corner(bounds: &DiscreteBounds, w: &[f64; 4]) -> (f64, RateQuadruple) {
    let (vi, a, b) = pentagon_max(bounds.id1, bounds.id2, bounds.id_sum, w[0], w[1]);
    let (vd, c, d) = pentagon_max(bounds.data1, bounds.data2, bounds.data_sum, w[2], w[3]);
    (
        vi + vd,
        RateQuadruple {
            r1_id: a,
            r2_id: b,
            r1_data: c,
            r2_data: d,
        },
    )
}

fn random_simplex<R: Rng + ?Sized>(size: usize, rng: &mut R) -> Vec<f64> {
    let mut v: Vec<f64> = (0..size).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= total);
    v
}

fn witness_from(blocks: &[Vec<f64>; 3], dims: &[usize]) -> Result<DiscreteWitness> {
    let norm = |v: &[f64]| -> Vec<f64> {
        let t: f64 = v.iter().sum();
        v.iter().map(|x| x / t).collect()
    };
    Ok(DiscreteWitness {
        p_uvx: JointPmf::new(dims.to_vec(), norm(&blocks[0]))?,
        p_q1: Pmf::new(norm(&blocks[1]))?,
        p_q2: Pmf::new(norm(&blocks[2]))?,
    })
}

fn ascend<R: Rng + ?Sized>(
    sys: &DiscreteSystem,
    (nu, nv): (usize, usize),
    evals: usize,
    rng: &mut R,
) -> Result<Option<(RateQuadruple, DiscreteRegionWitness)>> {
    let dims = [nu, nv, sys.bcc.x_size()];
    let weights: [f64; 4] = random_simplex(4, rng).try_into().expect("four weights");
    let mut blocks = [
        random_simplex(nu * nv * dims[2], rng),
        random_simplex(sys.q1_size(), rng),
        random_simplex(sys.q2_size(), rng),
    ];
    let mut best = DiscreteRegionWitness::evaluate(witness_from(&blocks, &dims)?, sys)?;
    let mut best_score = corner(&best.bounds, &weights).0;
    let mut step = 0.5;
    let mut misses = 0;
    for _ in 1..evals {
        let b = rng.random_range(0..3);
        let len = blocks[b].len();
        if len < 2 {
            continue;
        }
        let i = rng.random_range(0..len);
        let mut j = rng.random_range(0..len - 1);
        if j >= i {
            j += 1;
        }
        let moved = step * blocks[b][j];
        if moved <= 0.0 {
            continue;
        }
        let mut trial = blocks.clone();
        trial[b][j] -= moved;
        trial[b][i] += moved;
        let cand = DiscreteRegionWitness::evaluate(witness_from(&trial, &dims)?, sys)?;
        let score = corner(&cand.bounds, &weights).0;
        if score > best_score {
            blocks = trial;
            best = cand;
            best_score = score;
            misses = 0;
        } else {
            misses += 1;
            if misses >= 8 {
                step = (step * 0.5).max(1e-3);
                misses = 0;
            }
        }
    }
    let point = corner(&best.bounds, &weights).1.scaled(INTERIOR_SHRINK);
    Ok(best.bounds.contains(&point).then_some((point, best)))
}

/// The five Gaussian bounds at a fixed power split, in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBounds {
    pub id1: f64,
    pub id2: f64,
    pub data1: f64,
    pub data2: f64,
    pub data_sum: f64,
}

impl GaussianBounds {
    pub fn to_array(self) -> [f64; 5] {
        [self.id1, self.id2, self.data1, self.data2, self.data_sum]
    }

    pub fn contains(&self, r: &RateQuadruple) -> bool {
        r.r1_id < self.id1
            && r.r2_id < self.id2
            && r.r1_data < self.data1
            && r.r2_data < self.data2
            && r.r1_data + r.r2_data < self.data_sum
    }

    /// Identification bounds times `factor`, and the data corner pulled
    /// onto the sum bound before scaling, as in
    /// [`DiscreteBounds::scaled_point`].
    pub fn scaled_point(&self, factor: f64) -> RateQuadruple {
        let (a, b) = (self.data1, self.data2);
        let t = if a + b > 0.0 {
            (self.data_sum / (a + b)).min(1.0)
        } else {
            0.0
        };
        RateQuadruple {
            r1_id: factor * self.id1,
            r2_id: factor * self.id2,
            r1_data: factor * t * a,
            r2_data: factor * t * b,
        }
    }
}

fn half_ln1p(x: f64) -> f64 {
    0.5 * x.ln_1p()
}

/// Closed-form bounds of the Gaussian region at power split `alpha`.
pub fn gaussian_bounds(sys: &GaussianSystem, alpha: f64) -> Result<GaussianBounds> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(RegionError::AlphaOutOfRange(alpha));
    }
    let (p, n1, n2, n3) = (sys.p(), sys.n1(), sys.n2(), sys.n3());
    let (a1, a2) = (sys.alpha1(), sys.alpha2());
    let beta = 1.0 - alpha;
    Ok(GaussianBounds {
        id1: half_ln1p(alpha * p / n1),
        id2: half_ln1p(beta * p / (n2 + alpha * p)),
        data1: half_ln1p(alpha * a1 * p / n3),
        data2: half_ln1p(beta * a2 * p / n3),
        data_sum: half_ln1p((alpha * a1 * p + beta * a2 * p) / n3),
    })
}

/// Open interval of power splits. Empty intervals are stored canonically as
/// `lo = 1, hi = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaInterval {
    pub lo: f64,
    pub hi: f64,
}

impl AlphaInterval {
    pub const EMPTY: AlphaInterval = AlphaInterval { lo: 1.0, hi: 0.0 };

    pub fn new(lo: f64, hi: f64) -> Self {
        if lo < hi {
            AlphaInterval { lo, hi }
        } else {
            Self::EMPTY
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.lo < self.hi)
    }

    pub fn width(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.hi - self.lo
        }
    }

    pub fn contains(&self, alpha: f64) -> bool {
        self.lo < alpha && alpha < self.hi
    }

    pub fn midpoint(&self) -> Option<f64> {
        (!self.is_empty()).then(|| 0.5 * (self.lo + self.hi))
    }
}

/// Power splits for which `r` lies strictly inside the Gaussian region.
///
/// Each of the five constraints is monotone in `alpha` and is inverted in
/// closed form; the answer is the intersection of the resulting half-lines
/// with `[0, 1]`. The quadruple is achievable iff the interval is non-empty.
pub fn gaussian_membership(r: &RateQuadruple, sys: &GaussianSystem) -> AlphaInterval {
    let (p, n1, n2, n3) = (sys.p(), sys.n1(), sys.n2(), sys.n3());
    let (a1, a2) = (sys.alpha1(), sys.alpha2());
    // Required SNR for rate `x`: 1/2 ln(1 + snr) > x  <=>  snr > e^{2x} - 1.
    let g = |x: f64| (2.0 * x).exp_m1();
    let mut lo: f64 = 0.0;
    let mut hi: f64 = 1.0;
    // Endpoints excluded: alpha = 0 gives a zero first bound, alpha = 1 a
    // zero second bound, so both constraints below are strict half-lines.
    lo = lo.max(g(r.r1_id) * n1 / p);
    let g2 = g(r.r2_id);
    hi = hi.min((p - g2 * n2) / (p * (1.0 + g2)));

    let g3 = g(r.r1_data);
    if a1 > 0.0 {
        lo = lo.max(g3 * n3 / (a1 * p));
    } else {
        return AlphaInterval::EMPTY;
    }
    let g4 = g(r.r2_data);
    if a2 > 0.0 {
        hi = hi.min(1.0 - g4 * n3 / (a2 * p));
    } else {
        return AlphaInterval::EMPTY;
    }

    let rhs = g(r.r1_data + r.r2_data) * n3 / p - a2;
    let slope = a1 - a2;
    if slope > 0.0 {
        lo = lo.max(rhs / slope);
    } else if slope < 0.0 {
        hi = hi.min(rhs / slope);
    } else if !(rhs < 0.0) {
        return AlphaInterval::EMPTY;
    }
    // Inverting the log bounds costs a few ulps, so a point on the boundary
    // can come back as a sliver around a single split.
    if hi - lo <= MEMBERSHIP_SLACK {
        return AlphaInterval::EMPTY;
    }
    AlphaInterval::new(lo, hi)
}

/// One row of a sampled Gaussian frontier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFrontierRow {
    pub alpha: f64,
    pub bounds: GaussianBounds,
}

/// Bounds at `grid` evenly spaced power splits from 0 to 1 inclusive.
pub fn gaussian_frontier(sys: &GaussianSystem, grid: usize) -> Result<Vec<GaussianFrontierRow>> {
    if grid < 2 {
        return Err(RegionError::GridTooSmall(grid));
    }
    (0..grid)
        .map(|i| {
            let alpha = if i + 1 == grid {
                1.0
            } else {
                i as f64 / (grid - 1) as f64
            };
            Ok(GaussianFrontierRow {
                alpha,
                bounds: gaussian_bounds(sys, alpha)?,
            })
        })
        .collect()
}
