//! Finite probability tables, information measures and weak typicality.
//!
//! Everything is computed in nats internally. [`LogBase`] only decides the
//! unit of values handed back to (or received from) the caller.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the total mass of a distribution.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Probabilities below this are treated as exact zeros inside logarithms.
pub const ZERO_PROB: f64 = 1e-15;

/// Largest alphabet a [`Symbol`] can index.
pub const MAX_ALPHABET: usize = 256;

/// A letter of a finite alphabet.
pub type Symbol = u8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbError {
    #[error("empty alphabet")]
    EmptyAlphabet,
    #[error("alphabet of size {0} exceeds the supported maximum of {MAX_ALPHABET}")]
    AlphabetTooLarge(usize),
    #[error("probability at index {index} is invalid ({value})")]
    InvalidProbability { index: usize, value: f64 },
    #[error("probabilities sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("tensor of {actual} entries does not match dimensions {dims:?}")]
    ShapeMismatch { dims: Vec<usize>, actual: usize },
    #[error("operation needs a rank-{expected} joint distribution, got rank {actual}")]
    RankMismatch { expected: usize, actual: usize },
    #[error("axis {axis} out of range for rank {rank}")]
    AxisOutOfRange { axis: usize, rank: usize },
    #[error("axis {0} listed more than once")]
    DuplicateAxis(usize),
    #[error("no axes to keep")]
    EmptyAxes,
    #[error("sequence {index} has length {actual}, expected {expected}")]
    LengthMismatch { index: usize, expected: usize, actual: usize },
    #[error("expected {expected} sequences, got {actual}")]
    ArityMismatch { expected: usize, actual: usize },
    #[error("typicality needs non-empty sequences")]
    EmptySequence,
    #[error("epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
}

pub type Result<T> = std::result::Result<T, ProbError>;

/// Unit of information.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    Bits,
    #[default]
    Nats,
}

impl LogBase {
    /// Converts a value expressed in nats into this unit.
    pub fn from_nats(self, nats: f64) -> f64 {
        match self {
            LogBase::Bits => nats / std::f64::consts::LN_2,
            LogBase::Nats => nats,
        }
    }

    /// Converts a value expressed in this unit into nats.
    pub fn to_nats(self, value: f64) -> f64 {
        match self {
            LogBase::Bits => value * std::f64::consts::LN_2,
            LogBase::Nats => value,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LogBase::Bits => "bits",
            LogBase::Nats => "nats",
        }
    }
}

impl std::str::FromStr for LogBase {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bits" | "bit" => Ok(LogBase::Bits),
            "nats" | "nat" => Ok(LogBase::Nats),
            other => Err(format!("unknown unit '{other}', expected bits or nats")),
        }
    }
}

impl std::fmt::Display for LogBase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `-p ln p` with the `0 ln 0 = 0` convention.
#[inline]
fn plogp(p: f64) -> f64 {
    if p < ZERO_PROB {
        0.0
    } else {
        -p * p.ln()
    }
}

/// Natural log with tiny probabilities mapped to `-inf`.
#[inline]
fn safe_ln(p: f64) -> f64 {
    if p < ZERO_PROB {
        f64::NEG_INFINITY
    } else {
        p.ln()
    }
}

fn check_entries(probs: &[f64]) -> Result<()> {
    for (index, &value) in probs.iter().enumerate() {
        if !value.is_finite() || value < 0.0 {
            return Err(ProbError::InvalidProbability { index, value });
        }
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > MASS_TOLERANCE {
        return Err(ProbError::NotNormalized(total));
    }
    Ok(())
}

/// A probability mass function over `{0, .., len-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Pmf {
    probs: Vec<f64>,
}

impl Pmf {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(ProbError::EmptyAlphabet);
        }
        if probs.len() > MAX_ALPHABET {
            return Err(ProbError::AlphabetTooLarge(probs.len()));
        }
        check_entries(&probs)?;
        Ok(Pmf { probs })
    }

    pub fn uniform(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(ProbError::EmptyAlphabet);
        }
        Pmf::new(vec![1.0 / size as f64; size])
    }

    pub fn point_mass(size: usize, at: usize) -> Result<Self> {
        if at >= size {
            return Err(ProbError::AxisOutOfRange { axis: at, rank: size });
        }
        let mut probs = vec![0.0; size];
        probs[at] = 1.0;
        Pmf::new(probs)
    }

    /// Bernoulli distribution `(1 - p, p)`.
    pub fn bernoulli(p: f64) -> Result<Self> {
        Pmf::new(vec![1.0 - p, p])
    }

    /// Builds a pmf from non-negative weights, normalizing them.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(ProbError::NotNormalized(total));
        }
        Pmf::new(weights.iter().map(|w| w / total).collect())
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, symbol: usize) -> f64 {
        self.probs[symbol]
    }

    pub fn entropy(&self, base: LogBase) -> f64 {
        entropy(self, base)
    }
}

impl TryFrom<Vec<f64>> for Pmf {
    type Error = ProbError;

    fn try_from(probs: Vec<f64>) -> Result<Self> {
        Pmf::new(probs)
    }
}

impl From<Pmf> for Vec<f64> {
    fn from(p: Pmf) -> Vec<f64> {
        p.probs
    }
}

/// A dense joint distribution over several finite alphabets, row-major
/// (last axis varies fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawJoint")]
pub struct JointPmf {
    dims: Vec<usize>,
    probs: Vec<f64>,
}

#[derive(Deserialize)]
struct RawJoint {
    dims: Vec<usize>,
    probs: Vec<f64>,
}

impl TryFrom<RawJoint> for JointPmf {
    type Error = ProbError;

    fn try_from(raw: RawJoint) -> Result<Self> {
        JointPmf::new(raw.dims, raw.probs)
    }
}

impl JointPmf {
    pub fn new(dims: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        if dims.is_empty() {
            return Err(ProbError::EmptyAxes);
        }
        for &d in &dims {
            if d == 0 {
                return Err(ProbError::EmptyAlphabet);
            }
            if d > MAX_ALPHABET {
                return Err(ProbError::AlphabetTooLarge(d));
            }
        }
        let expected: usize = dims.iter().product();
        if expected != probs.len() {
            return Err(ProbError::ShapeMismatch {
                dims,
                actual: probs.len(),
            });
        }
        check_entries(&probs)?;
        Ok(JointPmf { dims, probs })
    }

    /// Product distribution of independent marginals.
    pub fn product(marginals: &[&Pmf]) -> Result<Self> {
        if marginals.is_empty() {
            return Err(ProbError::EmptyAxes);
        }
        let dims: Vec<usize> = marginals.iter().map(|p| p.len()).collect();
        let mut probs = vec![1.0];
        for m in marginals {
            probs = probs
                .iter()
                .flat_map(|&a| m.probs().iter().map(move |&b| a * b))
                .collect();
        }
        JointPmf::new(dims, probs)
    }

    /// Wraps a single pmf as a rank-1 joint.
    pub fn from_pmf(p: &Pmf) -> Self {
        JointPmf {
            dims: vec![p.len()],
            probs: p.probs().to_vec(),
        }
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Row-major strides.
    pub fn strides(&self) -> Vec<usize> {
        strides_of(&self.dims)
    }

    /// Flat index of a multi-index.
    pub fn index_of(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(self.strides())
            .map(|(&i, s)| i * s)
            .sum()
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.probs[self.index_of(idx)]
    }

    /// Marginal over `keep_axes`, in the order given.
    pub fn marginalize(&self, keep_axes: &[usize]) -> Result<JointPmf> {
        if keep_axes.is_empty() {
            return Err(ProbError::EmptyAxes);
        }
        let rank = self.rank();
        for (i, &a) in keep_axes.iter().enumerate() {
            if a >= rank {
                return Err(ProbError::AxisOutOfRange { axis: a, rank });
            }
            if keep_axes[..i].contains(&a) {
                return Err(ProbError::DuplicateAxis(a));
            }
        }
        let out_dims: Vec<usize> = keep_axes.iter().map(|&a| self.dims[a]).collect();
        let out_strides = strides_of(&out_dims);
        // contribution of each source axis to the output flat index
        let mut axis_weight = vec![0usize; rank];
        for (pos, &a) in keep_axes.iter().enumerate() {
            axis_weight[a] = out_strides[pos];
        }
        let mut out = vec![0.0; out_dims.iter().product()];
        let mut idx = vec![0usize; rank];
        for &p in &self.probs {
            let flat: usize = idx.iter().zip(&axis_weight).map(|(i, w)| i * w).sum();
            out[flat] += p;
            increment(&mut idx, &self.dims);
        }
        Ok(JointPmf {
            dims: out_dims,
            probs: out,
        })
    }

    /// Marginal of a single axis.
    pub fn marginal_pmf(&self, axis: usize) -> Result<Pmf> {
        let m = self.marginalize(&[axis])?;
        Ok(Pmf { probs: m.probs })
    }

    /// Converts a rank-1 joint into a [`Pmf`].
    pub fn to_pmf(&self) -> Result<Pmf> {
        if self.rank() != 1 {
            return Err(ProbError::RankMismatch {
                expected: 1,
                actual: self.rank(),
            });
        }
        Ok(Pmf {
            probs: self.probs.clone(),
        })
    }

    /// Reorders the axes; `order[i]` is the source axis of output axis `i`.
    pub fn permute_axes(&self, order: &[usize]) -> Result<JointPmf> {
        if order.len() != self.rank() {
            return Err(ProbError::RankMismatch {
                expected: self.rank(),
                actual: order.len(),
            });
        }
        self.marginalize(order)
    }

    /// Joint entropy of all axes.
    pub fn entropy(&self, base: LogBase) -> f64 {
        base.from_nats(self.probs.iter().map(|&p| plogp(p)).sum())
    }

    /// Entropy of the marginal on `axes`.
    pub fn entropy_of(&self, axes: &[usize], base: LogBase) -> Result<f64> {
        Ok(self.marginalize(axes)?.entropy(base))
    }

    /// `I(A;B)` between two disjoint groups of axes.
    pub fn mutual_information_between(
        &self,
        a: &[usize],
        b: &[usize],
        base: LogBase,
    ) -> Result<f64> {
        let mut ab: Vec<usize> = a.to_vec();
        ab.extend_from_slice(b);
        let h_a = self.entropy_of(a, LogBase::Nats)?;
        let h_b = self.entropy_of(b, LogBase::Nats)?;
        let h_ab = self.entropy_of(&ab, LogBase::Nats)?;
        Ok(base.from_nats((h_a + h_b - h_ab).max(0.0)))
    }

    /// `I(A;B|C)` between disjoint groups of axes.
    pub fn conditional_mutual_information_between(
        &self,
        a: &[usize],
        b: &[usize],
        c: &[usize],
        base: LogBase,
    ) -> Result<f64> {
        if c.is_empty() {
            return self.mutual_information_between(a, b, base);
        }
        let cat = |x: &[usize], y: &[usize]| -> Vec<usize> {
            let mut v = x.to_vec();
            v.extend_from_slice(y);
            v
        };
        let h_ac = self.entropy_of(&cat(a, c), LogBase::Nats)?;
        let h_bc = self.entropy_of(&cat(b, c), LogBase::Nats)?;
        let h_c = self.entropy_of(c, LogBase::Nats)?;
        let h_abc = self.entropy_of(&cat(&cat(a, b), c), LogBase::Nats)?;
        Ok(base.from_nats((h_ac + h_bc - h_c - h_abc).max(0.0)))
    }
}

fn strides_of(dims: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    strides
}

/// Advances a row-major multi-index.
fn increment(idx: &mut [usize], dims: &[usize]) {
    for i in (0..idx.len()).rev() {
        idx[i] += 1;
        if idx[i] < dims[i] {
            return;
        }
        idx[i] = 0;
    }
}

/// Shannon entropy `H(p)`.
pub fn entropy(p: &Pmf, base: LogBase) -> f64 {
    base.from_nats(p.probs.iter().map(|&x| plogp(x)).sum())
}

/// `I(X;Y)` of a rank-2 joint.
pub fn mutual_information(j: &JointPmf, base: LogBase) -> Result<f64> {
    if j.rank() != 2 {
        return Err(ProbError::RankMismatch {
            expected: 2,
            actual: j.rank(),
        });
    }
    j.mutual_information_between(&[0], &[1], base)
}

/// `I(A;B|C)` of a rank-3 joint, where `C` is `conditioning_axis` and `A`,
/// `B` are the two remaining axes in increasing order.
pub fn conditional_mutual_information(
    j: &JointPmf,
    conditioning_axis: usize,
    base: LogBase,
) -> Result<f64> {
    if j.rank() != 3 {
        return Err(ProbError::RankMismatch {
            expected: 3,
            actual: j.rank(),
        });
    }
    if conditioning_axis >= 3 {
        return Err(ProbError::AxisOutOfRange {
            axis: conditioning_axis,
            rank: 3,
        });
    }
    let rest: Vec<usize> = (0..3).filter(|&a| a != conditioning_axis).collect();
    j.conditional_mutual_information_between(&[rest[0]], &[rest[1]], &[conditioning_axis], base)
}

/// Marginal of a joint on `keep_axes`.
pub fn marginalize(j: &JointPmf, keep_axes: &[usize]) -> Result<JointPmf> {
    j.marginalize(keep_axes)
}

/// Precomputed weak-typicality test for a reference joint distribution.
///
/// A tuple of sequences is jointly typical when, for every non-empty subset
/// of axes, the empirical per-letter log-probability of the corresponding
/// marginal is within `epsilon` (nats) of that marginal's entropy.
#[derive(Debug, Clone)]
pub struct TypicalSet {
    dims: Vec<usize>,
    epsilon: f64,
    subsets: Vec<SubsetTable>,
}

#[derive(Debug, Clone)]
struct SubsetTable {
    mask: usize,
    axes: Vec<usize>,
    strides: Vec<usize>,
    log_probs: Vec<f64>,
    entropy: f64,
}

impl TypicalSet {
    /// `epsilon` is in nats.
    pub fn new(reference: &JointPmf, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(ProbError::InvalidEpsilon(epsilon));
        }
        let rank = reference.rank();
        let mut subsets = Vec::with_capacity((1 << rank) - 1);
        for mask in 1usize..(1 << rank) {
            let axes: Vec<usize> = (0..rank).filter(|a| mask & (1 << a) != 0).collect();
            let marginal = reference.marginalize(&axes)?;
            subsets.push(SubsetTable {
                mask,
                strides: strides_of(marginal.dims()),
                log_probs: marginal.probs().iter().map(|&p| safe_ln(p)).collect(),
                entropy: marginal.entropy(LogBase::Nats),
                axes,
            });
        }
        Ok(TypicalSet {
            dims: reference.dims().to_vec(),
            epsilon,
            subsets,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    fn subset(&self, mask: usize) -> &SubsetTable {
        &self.subsets[mask - 1]
    }

    /// Entropy (nats) of the marginal selected by `mask` (bit `a` = axis `a`).
    pub fn subset_entropy(&self, mask: usize) -> f64 {
        self.subset(mask).entropy
    }

    /// Per-letter log-probability table of the marginal selected by `mask`,
    /// row-major over the selected axes in increasing order.
    pub fn subset_log_probs(&self, mask: usize) -> &[f64] {
        &self.subset(mask).log_probs
    }

    /// `sum_k ln p(seq_k)` for the marginal selected by `mask`. `seqs` holds
    /// one sequence per axis of the reference; unselected entries are
    /// ignored and may be empty. Returns `-inf` at the first zero-probability
    /// letter.
    pub fn log_prob_sum(&self, mask: usize, seqs: &[&[Symbol]], n: usize) -> f64 {
        let table = self.subset(mask);
        let mut total = 0.0;
        for k in 0..n {
            let mut flat = 0usize;
            for (pos, &axis) in table.axes.iter().enumerate() {
                flat += seqs[axis][k] as usize * table.strides[pos];
            }
            let lp = table.log_probs[flat];
            if lp == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            total += lp;
        }
        total
    }

    /// Whether a log-probability sum over `n` letters is within epsilon of
    /// the entropy of the marginal selected by `mask`.
    #[inline]
    pub fn within(&self, mask: usize, log_prob_sum: f64, n: usize) -> bool {
        if log_prob_sum == f64::NEG_INFINITY {
            return false;
        }
        (-log_prob_sum / n as f64 - self.subset(mask).entropy).abs() <= self.epsilon
    }

    /// Largest deviation over all subsets, or `None` if some letter has zero
    /// probability under the reference.
    pub fn max_deviation(&self, seqs: &[&[Symbol]]) -> Result<Option<f64>> {
        let Some(n) = self.check_shape(seqs)? else {
            return Ok(None);
        };
        let mut worst: f64 = 0.0;
        for t in &self.subsets {
            let lp = self.log_prob_sum(t.mask, seqs, n);
            if lp == f64::NEG_INFINITY {
                return Ok(None);
            }
            worst = worst.max((-lp / n as f64 - t.entropy).abs());
        }
        Ok(Some(worst))
    }

    /// Full joint-typicality test over every non-empty axis subset.
    pub fn contains(&self, seqs: &[&[Symbol]]) -> Result<bool> {
        Ok(match self.check_shape(seqs)? {
            Some(n) => self.contains_unchecked(seqs, n),
            None => false,
        })
    }

    /// As [`TypicalSet::contains`] without shape validation.
    pub fn contains_unchecked(&self, seqs: &[&[Symbol]], n: usize) -> bool {
        self.subsets
            .iter()
            .all(|t| self.within(t.mask, self.log_prob_sum(t.mask, seqs, n), n))
    }

    /// Validates arity and lengths; `None` when some letter lies outside its
    /// alphabet (and so has probability zero).
    fn check_shape(&self, seqs: &[&[Symbol]]) -> Result<Option<usize>> {
        if seqs.len() != self.dims.len() {
            return Err(ProbError::ArityMismatch {
                expected: self.dims.len(),
                actual: seqs.len(),
            });
        }
        let n = seqs[0].len();
        if n == 0 {
            return Err(ProbError::EmptySequence);
        }
        for (index, s) in seqs.iter().enumerate() {
            if s.len() != n {
                return Err(ProbError::LengthMismatch {
                    index,
                    expected: n,
                    actual: s.len(),
                });
            }
            if s.iter().any(|&x| x as usize >= self.dims[index]) {
                return Ok(None);
            }
        }
        Ok(Some(n))
    }
}

/// Weak joint typicality of `sequences` with respect to `reference`.
///
/// `epsilon` is expressed in `base`. Letters of zero reference probability
/// (including letters outside the alphabet) make the tuple atypical.
pub fn is_jointly_typical(
    sequences: &[&[Symbol]],
    reference: &JointPmf,
    epsilon: f64,
    base: LogBase,
) -> Result<bool> {
    TypicalSet::new(reference, base.to_nats(epsilon))?.contains(sequences)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h2(p: f64) -> f64 {
        -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
    }

    fn bsc_joint(p: f64) -> JointPmf {
        JointPmf::new(
            vec![2, 2],
            vec![(1.0 - p) / 2.0, p / 2.0, p / 2.0, (1.0 - p) / 2.0],
        )
        .unwrap()
    }

    fn xor_joint() -> JointPmf {
        // axes (q1, q2, s), s = q1 xor q2, uniform inputs
        let mut probs = vec![0.0; 8];
        for q1 in 0..2 {
            for q2 in 0..2 {
                probs[q1 * 4 + q2 * 2 + (q1 ^ q2)] = 0.25;
            }
        }
        JointPmf::new(vec![2, 2, 2], probs).unwrap()
    }

    #[test]
    fn pmf_validation() {
        assert!(Pmf::new(vec![0.5, 0.6]).is_err());
        assert!(Pmf::new(vec![-0.1, 1.1]).is_err());
        assert!(Pmf::new(vec![]).is_err());
        assert!(Pmf::new(vec![f64::NAN, 1.0]).is_err());
        assert!(Pmf::new(vec![0.5, 0.5 + 5e-10]).is_ok());
    }

    #[test]
    fn entropy_examples() {
        let u = Pmf::uniform(2).unwrap();
        assert!((entropy(&u, LogBase::Nats) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(entropy(&Pmf::point_mass(3, 1).unwrap(), LogBase::Bits), 0.0);
        let p = Pmf::bernoulli(0.11).unwrap();
        // -0.89 log2 0.89 - 0.11 log2 0.11
        assert!((entropy(&p, LogBase::Bits) - 0.499915958164528).abs() < 1e-9);
    }

    #[test]
    fn entropy_bounded_by_log_alphabet() {
        let p = Pmf::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let h = entropy(&p, LogBase::Nats);
        assert!(h > 0.0 && h <= (4f64).ln());
    }

    #[test]
    fn mutual_information_examples() {
        let a = Pmf::new(vec![0.3, 0.7]).unwrap();
        let b = Pmf::new(vec![0.2, 0.5, 0.3]).unwrap();
        let indep = JointPmf::product(&[&a, &b]).unwrap();
        assert!(mutual_information(&indep, LogBase::Nats).unwrap().abs() < 1e-12);

        let identity = bsc_joint(0.0);
        assert!((mutual_information(&identity, LogBase::Bits).unwrap() - 1.0).abs() < 1e-12);

        let bsc = bsc_joint(0.11);
        let expected = 1.0 - h2(0.11);
        assert!((mutual_information(&bsc, LogBase::Bits).unwrap() - expected).abs() < 1e-9);
        assert!((expected - 0.500084041835472).abs() < 1e-9);
    }

    #[test]
    fn mutual_information_rejects_rank_three() {
        let err = mutual_information(&xor_joint(), LogBase::Bits).unwrap_err();
        assert!(matches!(err, ProbError::RankMismatch { .. }));
    }

    #[test]
    fn xor_conditional_information() {
        let j = xor_joint();
        let cmi = conditional_mutual_information(&j, 1, LogBase::Bits).unwrap();
        assert!((cmi - 1.0).abs() < 1e-12);
        let mi = j.mutual_information_between(&[0], &[2], LogBase::Bits).unwrap();
        assert!(mi.abs() < 1e-12);
        assert!(conditional_mutual_information(&j, 3, LogBase::Bits).is_err());
    }

    #[test]
    fn marginalize_examples() {
        let u = JointPmf::new(vec![2, 3, 2], vec![1.0 / 12.0; 12]).unwrap();
        let m = marginalize(&u, &[0, 2]).unwrap();
        assert_eq!(m.dims(), &[2, 2]);
        assert!(m.probs().iter().all(|&p| (p - 0.25).abs() < 1e-15));
        assert!(marginalize(&u, &[]).is_err());
        assert!(marginalize(&u, &[0, 0]).is_err());

        let s = xor_joint().marginal_pmf(2).unwrap();
        assert_eq!(s.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn marginalize_respects_axis_order() {
        let j = JointPmf::new(vec![2, 2], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let t = j.marginalize(&[1, 0]).unwrap();
        assert_eq!(t.probs(), &[0.1, 0.3, 0.2, 0.4]);
    }

    #[test]
    fn typicality_point_mass_and_zero_probability() {
        let point = JointPmf::from_pmf(&Pmf::point_mass(2, 0).unwrap());
        assert!(is_jointly_typical(&[&[0]], &point, 0.01, LogBase::Nats).unwrap());
        assert!(!is_jointly_typical(&[&[0, 1, 0]], &point, 0.5, LogBase::Nats).unwrap());
        // letter outside the alphabet
        assert!(!is_jointly_typical(&[&[0, 7]], &point, 0.5, LogBase::Nats).unwrap());
    }

    #[test]
    fn typicality_errors() {
        let j = bsc_joint(0.1);
        assert!(matches!(
            is_jointly_typical(&[&[0, 1], &[0]], &j, 0.1, LogBase::Nats),
            Err(ProbError::LengthMismatch { .. })
        ));
        assert!(matches!(
            is_jointly_typical(&[&[0, 1]], &j, 0.1, LogBase::Nats),
            Err(ProbError::ArityMismatch { .. })
        ));
        assert!(matches!(
            is_jointly_typical(&[&[0], &[0]], &j, 0.0, LogBase::Nats),
            Err(ProbError::InvalidEpsilon(_))
        ));
    }

    #[test]
    fn typicality_checks_marginal_subsets() {
        // joint statistic is exact for (0,0)^n under a uniform joint, but a
        // skewed marginal can still fail on its own
        let j = JointPmf::new(vec![2, 2], vec![0.45, 0.05, 0.05, 0.45]).unwrap();
        let x = vec![0u8; 32];
        let y = vec![1u8; 32];
        // every pair is (0,1) which has probability 0.05: joint statistic far off
        assert!(!is_jointly_typical(&[&x, &y], &j, 0.1, LogBase::Nats).unwrap());
        // perfectly typical pattern: 90% agreement
        let mut y2 = x.clone();
        for k in 0..3 {
            y2[k] = 1;
        }
        let mut x2 = x.clone();
        for k in 16..32 {
            x2[k] = 1;
            y2[k] = 1;
        }
        assert!(is_jointly_typical(&[&x2, &y2], &j, 0.2, LogBase::Nats).unwrap());
    }
}
