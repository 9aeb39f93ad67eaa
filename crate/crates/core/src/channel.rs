//! Discrete memoryless channels of the cascade, the Gaussian system, and the
//! end-to-end joint distributions they induce.

use rand::Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prob::{JointPmf, Pmf, ProbError, Symbol, MASS_TOLERANCE, MAX_ALPHABET};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("{channel}: row {row} sums to {sum}, expected 1")]
    RowNotNormalized {
        channel: &'static str,
        row: usize,
        sum: f64,
    },
    #[error("{channel}: entry {index} is invalid ({value})")]
    InvalidEntry {
        channel: &'static str,
        index: usize,
        value: f64,
    },
    #[error("{channel}: expected {expected} entries, got {actual}")]
    ShapeMismatch {
        channel: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("{channel}: alphabet size {size} must be between 1 and {MAX_ALPHABET}")]
    BadAlphabet { channel: &'static str, size: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("symbol {symbol} at position {position} outside alphabet of size {size}")]
    SymbolOutOfRange {
        position: usize,
        symbol: usize,
        size: usize,
    },
    #[error("input sequences have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("invalid Gaussian system: {0}")]
    InvalidGaussian(String),
    #[error(transparent)]
    Prob(#[from] ProbError),
}

pub type Result<T> = std::result::Result<T, ChannelError>;

/// A row-stochastic table `p(out | in)` with per-row samplers.
#[derive(Debug, Clone)]
struct Kernel {
    in_size: usize,
    out_size: usize,
    cond: Vec<f64>,
    samplers: Vec<WeightedIndex<f64>>,
}

impl Kernel {
    fn new(channel: &'static str, in_size: usize, out_size: usize, cond: Vec<f64>) -> Result<Self> {
        for size in [in_size, out_size] {
            if size == 0 {
                return Err(ChannelError::BadAlphabet { channel, size });
            }
        }
        if cond.len() != in_size * out_size {
            return Err(ChannelError::ShapeMismatch {
                channel,
                expected: in_size * out_size,
                actual: cond.len(),
            });
        }
        for (index, &value) in cond.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(ChannelError::InvalidEntry {
                    channel,
                    index,
                    value,
                });
            }
        }
        let mut samplers = Vec::with_capacity(in_size);
        for (row, chunk) in cond.chunks(out_size).enumerate() {
            let sum: f64 = chunk.iter().sum();
            if (sum - 1.0).abs() > MASS_TOLERANCE {
                return Err(ChannelError::RowNotNormalized { channel, row, sum });
            }
            samplers.push(
                WeightedIndex::new(chunk.iter().copied())
                    .map_err(|_| ChannelError::RowNotNormalized { channel, row, sum })?,
            );
        }
        Ok(Kernel {
            in_size,
            out_size,
            cond,
            samplers,
        })
    }

    #[inline]
    fn prob(&self, input: usize, output: usize) -> f64 {
        self.cond[input * self.out_size + output]
    }

    fn row(&self, input: usize) -> &[f64] {
        &self.cond[input * self.out_size..(input + 1) * self.out_size]
    }

    #[inline]
    fn sample<R: Rng + ?Sized>(&self, input: usize, rng: &mut R) -> usize {
        self.samplers[input].sample(rng)
    }
}

fn check_alphabet(channel: &'static str, size: usize) -> Result<()> {
    if size == 0 || size > MAX_ALPHABET {
        return Err(ChannelError::BadAlphabet { channel, size });
    }
    Ok(())
}

fn check_symbols(seq: &[Symbol], size: usize) -> Result<()> {
    match seq.iter().position(|&s| s as usize >= size) {
        Some(position) => Err(ChannelError::SymbolOutOfRange {
            position,
            symbol: seq[position] as usize,
            size,
        }),
        None => Ok(()),
    }
}

fn bsc_rows(p: f64) -> Vec<f64> {
    vec![1.0 - p, p, p, 1.0 - p]
}

/// Broadcast part `p(y1, y2 | x)`, stored as `cond[x][y1][y2]`.
#[derive(Debug, Clone)]
pub struct BccChannel {
    x_size: usize,
    y1_size: usize,
    y2_size: usize,
    kernel: Kernel,
}

impl BccChannel {
    pub fn new(x_size: usize, y1_size: usize, y2_size: usize, cond: Vec<f64>) -> Result<Self> {
        for s in [x_size, y1_size, y2_size] {
            check_alphabet("bcc", s)?;
        }
        let kernel = Kernel::new("bcc", x_size, y1_size * y2_size, cond)?;
        Ok(BccChannel {
            x_size,
            y1_size,
            y2_size,
            kernel,
        })
    }

    /// Two conditionally independent branches `p(y1|x) p(y2|x)`, each given
    /// row-major as `[x][y]`.
    pub fn from_branches(
        x_size: usize,
        y1_size: usize,
        branch1: &[f64],
        y2_size: usize,
        branch2: &[f64],
    ) -> Result<Self> {
        if branch1.len() != x_size * y1_size || branch2.len() != x_size * y2_size {
            return Err(ChannelError::DimensionMismatch(
                "branch tables do not match the declared alphabets".into(),
            ));
        }
        let mut cond = Vec::with_capacity(x_size * y1_size * y2_size);
        for x in 0..x_size {
            for y1 in 0..y1_size {
                for y2 in 0..y2_size {
                    cond.push(branch1[x * y1_size + y1] * branch2[x * y2_size + y2]);
                }
            }
        }
        BccChannel::new(x_size, y1_size, y2_size, cond)
    }

    /// Binary input, two independent binary symmetric branches.
    pub fn independent_bsc(p1: f64, p2: f64) -> Result<Self> {
        BccChannel::from_branches(2, 2, &bsc_rows(p1), 2, &bsc_rows(p2))
    }

    pub fn x_size(&self) -> usize {
        self.x_size
    }

    pub fn y1_size(&self) -> usize {
        self.y1_size
    }

    pub fn y2_size(&self) -> usize {
        self.y2_size
    }

    pub fn prob(&self, x: usize, y1: usize, y2: usize) -> f64 {
        self.kernel.prob(x, y1 * self.y2_size + y2)
    }

    /// Dense `[x][y1][y2]` table.
    pub fn table(&self) -> &[f64] {
        &self.kernel.cond
    }

    /// Marginal branch `p(y_i | x)` as a row-major `[x][y]` table.
    pub fn branch(&self, unit: usize) -> Vec<f64> {
        let ysize = if unit == 1 { self.y1_size } else { self.y2_size };
        let mut out = vec![0.0; self.x_size * ysize];
        for x in 0..self.x_size {
            for y1 in 0..self.y1_size {
                for y2 in 0..self.y2_size {
                    let y = if unit == 1 { y1 } else { y2 };
                    out[x * ysize + y] += self.prob(x, y1, y2);
                }
            }
        }
        out
    }

    /// Draws `(y1^n, y2^n)` jointly, letter by letter.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        x_seq: &[Symbol],
        rng: &mut R,
    ) -> Result<(Vec<Symbol>, Vec<Symbol>)> {
        check_symbols(x_seq, self.x_size)?;
        let mut y1 = Vec::with_capacity(x_seq.len());
        let mut y2 = Vec::with_capacity(x_seq.len());
        for &x in x_seq {
            let pair = self.kernel.sample(x as usize, rng);
            y1.push((pair / self.y2_size) as Symbol);
            y2.push((pair % self.y2_size) as Symbol);
        }
        Ok((y1, y2))
    }
}

/// Per-unit imperfection channel `p(q_hat | q)`.
#[derive(Debug, Clone)]
pub struct ImperfectionChannel {
    kernel: Kernel,
}

impl ImperfectionChannel {
    pub fn new(q_size: usize, qhat_size: usize, cond: Vec<f64>) -> Result<Self> {
        check_alphabet("imperfection", q_size)?;
        check_alphabet("imperfection", qhat_size)?;
        Ok(ImperfectionChannel {
            kernel: Kernel::new("imperfection", q_size, qhat_size, cond)?,
        })
    }

    pub fn identity(size: usize) -> Result<Self> {
        let mut cond = vec![0.0; size * size];
        for i in 0..size {
            cond[i * size + i] = 1.0;
        }
        ImperfectionChannel::new(size, size, cond)
    }

    pub fn bsc(p: f64) -> Result<Self> {
        ImperfectionChannel::new(2, 2, bsc_rows(p))
    }

    pub fn q_size(&self) -> usize {
        self.kernel.in_size
    }

    pub fn qhat_size(&self) -> usize {
        self.kernel.out_size
    }

    pub fn prob(&self, q: usize, qhat: usize) -> f64 {
        self.kernel.prob(q, qhat)
    }

    pub fn table(&self) -> &[f64] {
        &self.kernel.cond
    }

    pub fn sample<R: Rng + ?Sized>(&self, q_seq: &[Symbol], rng: &mut R) -> Result<Vec<Symbol>> {
        check_symbols(q_seq, self.q_size())?;
        Ok(q_seq
            .iter()
            .map(|&q| self.kernel.sample(q as usize, rng) as Symbol)
            .collect())
    }
}

/// Multiple-access part `p(s | q_hat1, q_hat2)`, stored as `cond[q1][q2][s]`.
#[derive(Debug, Clone)]
pub struct MacChannel {
    qhat1_size: usize,
    qhat2_size: usize,
    kernel: Kernel,
}

impl MacChannel {
    pub fn new(qhat1_size: usize, qhat2_size: usize, s_size: usize, cond: Vec<f64>) -> Result<Self> {
        for s in [qhat1_size, qhat2_size, s_size] {
            check_alphabet("mac", s)?;
        }
        Ok(MacChannel {
            qhat1_size,
            qhat2_size,
            kernel: Kernel::new("mac", qhat1_size * qhat2_size, s_size, cond)?,
        })
    }

    /// Builds a MAC from a deterministic map `(q1, q2) -> s`.
    pub fn deterministic(
        qhat1_size: usize,
        qhat2_size: usize,
        s_size: usize,
        f: impl Fn(usize, usize) -> usize,
    ) -> Result<Self> {
        let mut cond = vec![0.0; qhat1_size * qhat2_size * s_size];
        for a in 0..qhat1_size {
            for b in 0..qhat2_size {
                let s = f(a, b);
                if s >= s_size {
                    return Err(ChannelError::DimensionMismatch(format!(
                        "deterministic map sends ({a},{b}) to {s}, outside output alphabet {s_size}"
                    )));
                }
                cond[(a * qhat2_size + b) * s_size + s] = 1.0;
            }
        }
        MacChannel::new(qhat1_size, qhat2_size, s_size, cond)
    }

    /// Noiseless binary adder, `s = q1 + q2` in `{0, 1, 2}`.
    pub fn binary_adder() -> Result<Self> {
        MacChannel::deterministic(2, 2, 3, |a, b| a + b)
    }

    /// Noiseless binary XOR.
    pub fn binary_xor() -> Result<Self> {
        MacChannel::deterministic(2, 2, 2, |a, b| a ^ b)
    }

    /// Binary XOR whose output is erased (symbol 2) with probability `erasure`.
    pub fn xor_with_erasure(erasure: f64) -> Result<Self> {
        let mut cond = vec![0.0; 2 * 2 * 3];
        for a in 0..2 {
            for b in 0..2 {
                let row = (a * 2 + b) * 3;
                cond[row + (a ^ b)] = 1.0 - erasure;
                cond[row + 2] = erasure;
            }
        }
        MacChannel::new(2, 2, 3, cond)
    }

    pub fn qhat1_size(&self) -> usize {
        self.qhat1_size
    }

    pub fn qhat2_size(&self) -> usize {
        self.qhat2_size
    }

    pub fn s_size(&self) -> usize {
        self.kernel.out_size
    }

    pub fn prob(&self, q1: usize, q2: usize, s: usize) -> f64 {
        self.kernel.prob(q1 * self.qhat2_size + q2, s)
    }

    pub fn table(&self) -> &[f64] {
        &self.kernel.cond
    }

    pub fn sample<R: Rng + ?Sized>(
        &self,
        qhat1: &[Symbol],
        qhat2: &[Symbol],
        rng: &mut R,
    ) -> Result<Vec<Symbol>> {
        if qhat1.len() != qhat2.len() {
            return Err(ChannelError::LengthMismatch(qhat1.len(), qhat2.len()));
        }
        check_symbols(qhat1, self.qhat1_size)?;
        check_symbols(qhat2, self.qhat2_size)?;
        Ok(qhat1
            .iter()
            .zip(qhat2)
            .map(|(&a, &b)| {
                self.kernel
                    .sample(a as usize * self.qhat2_size + b as usize, rng) as Symbol
            })
            .collect())
    }
}

/// The discrete cascade: broadcast part, two imperfection channels and the
/// multiple-access part.
#[derive(Debug, Clone)]
pub struct DiscreteSystem {
    pub bcc: BccChannel,
    pub imp1: ImperfectionChannel,
    pub imp2: ImperfectionChannel,
    pub mac: MacChannel,
}

impl DiscreteSystem {
    pub fn new(
        bcc: BccChannel,
        imp1: ImperfectionChannel,
        imp2: ImperfectionChannel,
        mac: MacChannel,
    ) -> Result<Self> {
        if imp1.qhat_size() != mac.qhat1_size() || imp2.qhat_size() != mac.qhat2_size() {
            return Err(ChannelError::DimensionMismatch(format!(
                "imperfection outputs ({}, {}) do not match MAC inputs ({}, {})",
                imp1.qhat_size(),
                imp2.qhat_size(),
                mac.qhat1_size(),
                mac.qhat2_size()
            )));
        }
        Ok(DiscreteSystem {
            bcc,
            imp1,
            imp2,
            mac,
        })
    }

    pub fn q1_size(&self) -> usize {
        self.imp1.q_size()
    }

    pub fn q2_size(&self) -> usize {
        self.imp2.q_size()
    }
}

/// End-to-end MAC joint over `(q1, q2, s)`:
/// `sum_{qh1, qh2} p(s|qh1,qh2) p(qh1|q1) p(qh2|q2) p(q1) p(q2)`.
pub fn induced_mac_joint(
    p_q1: &Pmf,
    p_q2: &Pmf,
    imp1: &ImperfectionChannel,
    imp2: &ImperfectionChannel,
    mac: &MacChannel,
) -> Result<JointPmf> {
    if p_q1.len() != imp1.q_size() || p_q2.len() != imp2.q_size() {
        return Err(ChannelError::DimensionMismatch(format!(
            "input pmfs have sizes ({}, {}) but imperfection channels expect ({}, {})",
            p_q1.len(),
            p_q2.len(),
            imp1.q_size(),
            imp2.q_size()
        )));
    }
    if imp1.qhat_size() != mac.qhat1_size() || imp2.qhat_size() != mac.qhat2_size() {
        return Err(ChannelError::DimensionMismatch(format!(
            "imperfection outputs ({}, {}) do not match MAC inputs ({}, {})",
            imp1.qhat_size(),
            imp2.qhat_size(),
            mac.qhat1_size(),
            mac.qhat2_size()
        )));
    }
    let (n1, n2, ns) = (p_q1.len(), p_q2.len(), mac.s_size());
    let mut probs = vec![0.0; n1 * n2 * ns];
    for q1 in 0..n1 {
        for q2 in 0..n2 {
            let w = p_q1.get(q1) * p_q2.get(q2);
            if w == 0.0 {
                continue;
            }
            let out = &mut probs[(q1 * n2 + q2) * ns..(q1 * n2 + q2 + 1) * ns];
            for (h1, &a) in imp1.kernel.row(q1).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (h2, &b) in imp2.kernel.row(q2).iter().enumerate() {
                    if b == 0.0 {
                        continue;
                    }
                    let scale = w * a * b;
                    for (s, slot) in out.iter_mut().enumerate() {
                        *slot += scale * mac.prob(h1, h2, s);
                    }
                }
            }
        }
    }
    Ok(JointPmf::new(vec![n1, n2, ns], probs)?)
}

/// Joint over `(u, v, x, y1, y2)` induced by `p(u,v,x) p(y1,y2|x)`.
pub fn bcc_joint(p_uvx: &JointPmf, bcc: &BccChannel) -> Result<JointPmf> {
    if p_uvx.rank() != 3 || p_uvx.dims()[2] != bcc.x_size() {
        return Err(ChannelError::DimensionMismatch(format!(
            "witness dims {:?} incompatible with broadcast input alphabet {}",
            p_uvx.dims(),
            bcc.x_size()
        )));
    }
    let (nu, nv, nx) = (p_uvx.dims()[0], p_uvx.dims()[1], p_uvx.dims()[2]);
    let (ny1, ny2) = (bcc.y1_size(), bcc.y2_size());
    let mut probs = Vec::with_capacity(nu * nv * nx * ny1 * ny2);
    for (flat, &p) in p_uvx.probs().iter().enumerate() {
        let x = flat % nx;
        for y1 in 0..ny1 {
            for y2 in 0..ny2 {
                probs.push(p * bcc.prob(x, y1, y2));
            }
        }
    }
    Ok(JointPmf::new(vec![nu, nv, nx, ny1, ny2], probs)?)
}

/// Raw Gaussian parameters, as read from files or the command line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    #[serde(rename = "P")]
    pub p: f64,
    #[serde(rename = "N1")]
    pub n1: f64,
    #[serde(rename = "N2")]
    pub n2: f64,
    #[serde(rename = "N3")]
    pub n3: f64,
    pub alpha1: f64,
    pub alpha2: f64,
}

impl GaussianParams {
    pub fn build(&self, allow_alpha_one: bool) -> Result<GaussianSystem> {
        GaussianSystem::from_params(*self, allow_alpha_one)
    }
}

/// Power and noise parameters of the Gaussian cascade.
///
/// `P` is the transceiver power, `N1 < N2` the broadcast noise variances,
/// `N3` the MAC noise variance and `alpha1`, `alpha2` the power-conversion
/// factors of the mobile units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSystem {
    params: GaussianParams,
}

impl GaussianSystem {
    /// Validated system with `alpha_i < 1`.
    pub fn new(p: f64, n1: f64, n2: f64, n3: f64, alpha1: f64, alpha2: f64) -> Result<Self> {
        Self::from_params(
            GaussianParams {
                p,
                n1,
                n2,
                n3,
                alpha1,
                alpha2,
            },
            false,
        )
    }

    /// As [`GaussianSystem::new`] but also accepting `alpha_i = 1`.
    pub fn idealized(p: f64, n1: f64, n2: f64, n3: f64, alpha1: f64, alpha2: f64) -> Result<Self> {
        Self::from_params(
            GaussianParams {
                p,
                n1,
                n2,
                n3,
                alpha1,
                alpha2,
            },
            true,
        )
    }

    pub fn from_params(params: GaussianParams, allow_alpha_one: bool) -> Result<Self> {
        let GaussianParams {
            p,
            n1,
            n2,
            n3,
            alpha1,
            alpha2,
        } = params;
        let positive = |name: &str, v: f64| -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ChannelError::InvalidGaussian(format!("{name} must be positive, got {v}")))
            }
        };
        positive("P", p)?;
        positive("N1", n1)?;
        positive("N2", n2)?;
        positive("N3", n3)?;
        if n1 >= n2 {
            return Err(ChannelError::InvalidGaussian(format!(
                "N1 < N2 required, got N1 = {n1}, N2 = {n2}"
            )));
        }
        for (name, a) in [("alpha1", alpha1), ("alpha2", alpha2)] {
            let upper_ok = if allow_alpha_one { a <= 1.0 } else { a < 1.0 };
            if !(a >= 0.0) || !upper_ok {
                let bound = if allow_alpha_one { "[0, 1]" } else { "[0, 1)" };
                return Err(ChannelError::InvalidGaussian(format!(
                    "{name} must lie in {bound}, got {a}"
                )));
            }
        }
        Ok(GaussianSystem { params })
    }

    pub fn params(&self) -> GaussianParams {
        self.params
    }

    pub fn p(&self) -> f64 {
        self.params.p
    }

    pub fn n1(&self) -> f64 {
        self.params.n1
    }

    pub fn n2(&self) -> f64 {
        self.params.n2
    }

    pub fn n3(&self) -> f64 {
        self.params.n3
    }

    pub fn alpha1(&self) -> f64 {
        self.params.alpha1
    }

    pub fn alpha2(&self) -> f64 {
        self.params.alpha2
    }

    /// `y_i = x + z_i` with independent `z_1 ~ N(0, N1)`, `z_2 ~ N(0, N2)`.
    pub fn broadcast<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let z1 = Normal::new(0.0, self.n1().sqrt()).expect("validated variance");
        let z2 = Normal::new(0.0, self.n2().sqrt()).expect("validated variance");
        let mut y1 = Vec::with_capacity(x.len());
        let mut y2 = Vec::with_capacity(x.len());
        for &v in x {
            y1.push(v + z1.sample(rng));
            y2.push(v + z2.sample(rng));
        }
        (y1, y2)
    }

    /// `s = g1 + g2 + z_3` with `z_3 ~ N(0, N3)`.
    pub fn multiple_access<R: Rng + ?Sized>(
        &self,
        g1: &[f64],
        g2: &[f64],
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        if g1.len() != g2.len() {
            return Err(ChannelError::LengthMismatch(g1.len(), g2.len()));
        }
        let z3 = Normal::new(0.0, self.n3().sqrt()).expect("validated variance");
        Ok(g1
            .iter()
            .zip(g2)
            .map(|(&a, &b)| a + b + z3.sample(rng))
            .collect())
    }
}
