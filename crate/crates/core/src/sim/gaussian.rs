//! Superposition broadcast code with successive decoding and nested Gaussian
//! multiple-access codebooks.

use std::sync::OnceLock;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{
    check_epsilon, message_count, run_trials, Decoder, Result, SimError, SimResult, TrialOutcome,
    MAX_CODEBOOK_LETTERS, MAX_LIST_SIZE, MAX_MAC_PAIRS, MIN_TRIALS,
};
use crate::channel::GaussianSystem;
use crate::region::{RateQuadruple, RegionError};
use crate::rng::{domain, RngSeed};

/// Everything needed to simulate the Gaussian cascade.
#[derive(Debug, Clone, Copy)]
pub struct GaussianSimConfig {
    pub system: GaussianSystem,
    /// Share of the transceiver power given to unit 1's message.
    pub alpha: f64,
    /// Rates in nats.
    pub rates: RateQuadruple,
    pub n: usize,
    pub epsilon: f64,
    pub decoder: Decoder,
}

/// Joint typicality for zero-mean Gaussian references.
///
/// `cov` is the row-major `k x k` covariance of the reference, one row per
/// sequence. The test passes when every empirical second moment
/// `(1/n) sum a_j b_j` is within `epsilon * sqrt(K_aa K_bb)` of `K_ab`.
pub fn gaussian_typicality(seqs: &[&[f64]], cov: &[f64], epsilon: f64) -> Result<bool> {
    check_epsilon(epsilon)?;
    let k = seqs.len();
    if k == 0 || cov.len() != k * k {
        return Err(SimError::LengthMismatch {
            expected: k * k,
            actual: cov.len(),
        });
    }
    let n = seqs[0].len();
    if n == 0 {
        return Err(SimError::ZeroBlockLength);
    }
    for s in seqs {
        if s.len() != n {
            return Err(SimError::LengthMismatch {
                expected: n,
                actual: s.len(),
            });
        }
    }
    for i in 0..k {
        for j in i..k {
            let m = dot(seqs[i], seqs[j]) / n as f64;
            if !moment_ok(m, cov[i * k + j], cov[i * k + i], cov[j * k + j], epsilon) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn moment_ok(empirical: f64, target: f64, var_a: f64, var_b: f64, epsilon: f64) -> bool {
    (empirical - target).abs() <= epsilon * (var_a * var_b).sqrt()
}

fn normal(variance: f64) -> Normal<f64> {
    Normal::new(0.0, variance.sqrt()).expect("positive variance")
}

fn positive(what: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(SimError::NonPositiveVariance { what, value })
    }
}

fn count_for(what: &'static str, n: usize, rate: f64) -> Result<usize> {
    let cap = (MAX_CODEBOOK_LETTERS as f64 / n as f64).min(MAX_LIST_SIZE as f64);
    message_count(n, rate, cap).ok_or(SimError::CodebookTooLarge {
        what,
        letters: (n as f64 * rate).exp() * n as f64,
        cap: MAX_CODEBOOK_LETTERS,
    })
}

/// Index (1-based) of the single codeword accepted by `ok`, else 0.
fn unique_match(count: usize, ok: impl Fn(usize) -> bool) -> usize {
    let mut found = 0;
    for i in 0..count {
        if ok(i) {
            if found != 0 {
                return 0;
            }
            found = i + 1;
        }
    }
    found
}

/// Index (1-based) of the single best score, else 0.
fn unique_best(count: usize, score: impl Fn(usize) -> f64) -> usize {
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0;
    let mut tied = false;
    for i in 0..count {
        let s = score(i);
        if s > best {
            best = s;
            arg = i + 1;
            tied = false;
        } else if s == best {
            tied = true;
        }
    }
    if tied {
        0
    } else {
        arg
    }
}

/// Two independent Gaussian codebooks whose codewords are added.
///
/// Unit 1's book has per-letter variance `alpha P - eps/2`, unit 2's has
/// `(1 - alpha) P - eps/2`.
#[derive(Debug, Clone)]
pub struct GaussianSuperpositionCodebook {
    n: usize,
    p: f64,
    n1: f64,
    n2: f64,
    counts: [usize; 2],
    variances: [f64; 2],
    books: [Vec<f64>; 2],
    powers: [Vec<f64>; 2],
}

impl GaussianSuperpositionCodebook {
    pub fn build(
        sys: &GaussianSystem,
        alpha: f64,
        r1_id: f64,
        r2_id: f64,
        n: usize,
        epsilon: f64,
        seed: RngSeed,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(RegionError::AlphaOutOfRange(alpha).into());
        }
        if n == 0 {
            return Err(SimError::ZeroBlockLength);
        }
        check_epsilon(epsilon)?;
        let p = sys.p();
        let v1 = positive("unit 1 broadcast codebook", alpha * p - epsilon / 2.0)?;
        let v2 = positive("unit 2 broadcast codebook", (1.0 - alpha) * p - epsilon / 2.0)?;
        let c1 = count_for("unit 1 broadcast codebook", n, r1_id)?;
        let c2 = count_for("unit 2 broadcast codebook", n, r2_id)?;
        let draw = |d: u64, count: usize, var: f64| -> Vec<f64> {
            let mut rng = seed.stream(d, 0);
            let dist = normal(var);
            (0..count * n).map(|_| dist.sample(&mut rng)).collect()
        };
        let b1 = draw(domain::GAUSS_BCC1, c1, v1);
        let b2 = draw(domain::GAUSS_BCC2, c2, v2);
        let powers = |b: &[f64]| -> Vec<f64> { b.chunks(n).map(|c| dot(c, c)).collect() };
        Ok(GaussianSuperpositionCodebook {
            n,
            p,
            n1: sys.n1(),
            n2: sys.n2(),
            counts: [c1, c2],
            variances: [v1, v2],
            powers: [powers(&b1), powers(&b2)],
            books: [b1, b2],
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn message_counts(&self) -> (usize, usize) {
        (self.counts[0], self.counts[1])
    }

    /// Nominal per-letter variances of the two books.
    pub fn variances(&self) -> (f64, f64) {
        (self.variances[0], self.variances[1])
    }

    /// Codeword `w` (1-based) of unit `unit`'s book.
    pub fn codeword(&self, unit: u8, w: usize) -> Result<&[f64]> {
        let u = match unit {
            1 | 2 => unit as usize - 1,
            b => return Err(SimError::BadBranch(b)),
        };
        if w == 0 || w > self.counts[u] {
            return Err(SimError::MessageOutOfRange {
                index: w,
                count: self.counts[u],
            });
        }
        Ok(&self.books[u][(w - 1) * self.n..w * self.n])
    }

    /// `x = x1(w1) + x2(w2)` with the power check against `P`.
    pub fn encode(&self, w1: usize, w2: usize) -> Result<GaussianEncode> {
        let a = self.codeword(1, w1)?;
        let b = self.codeword(2, w2)?;
        let x: Vec<f64> = a.iter().zip(b).map(|(p, q)| p + q).collect();
        let power_ok = dot(&x, &x) / self.n as f64 <= self.p;
        Ok(GaussianEncode { x, power_ok })
    }

    fn check_len(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.n {
            return Err(SimError::LengthMismatch {
                expected: self.n,
                actual: y.len(),
            });
        }
        Ok(())
    }

    /// Finds unit 2's message from an observation `y = x1 + x2 + z` with
    /// noise variance `noise`, treating `x1` as noise.
    fn find_w2(&self, y: &[f64], noise: f64, epsilon: f64, decoder: Decoder) -> usize {
        let n = self.n as f64;
        let [v1, v2] = self.variances;
        let vy = v1 + v2 + noise;
        let yy = dot(y, y) / n;
        let book = &self.books[1];
        let cw = |w: usize| &book[w * self.n..(w + 1) * self.n];
        match decoder {
            Decoder::Typicality => {
                if !moment_ok(yy, vy, vy, vy, epsilon) {
                    return 0;
                }
                unique_match(self.counts[1], |w| {
                    moment_ok(self.powers[1][w] / n, v2, v2, v2, epsilon)
                        && moment_ok(dot(cw(w), y) / n, v2, v2, vy, epsilon)
                })
            }
            Decoder::MaximumLikelihood => {
                unique_best(self.counts[1], |w| 2.0 * dot(cw(w), y) - self.powers[1][w])
            }
        }
    }

    /// Unit 2 decodes its own message directly.
    pub fn decode_unit2(&self, y2: &[f64], epsilon: f64, decoder: Decoder) -> Result<usize> {
        self.check_len(y2)?;
        check_epsilon(epsilon)?;
        Ok(self.find_w2(y2, self.n2, epsilon, decoder))
    }

    /// Unit 1 first decodes unit 2's message, subtracts its codeword and then
    /// decodes its own. Returns `(w1_hat, w2_hat)` as seen by unit 1.
    pub fn decode_unit1(&self, y1: &[f64], epsilon: f64, decoder: Decoder) -> Result<(usize, usize)> {
        self.check_len(y1)?;
        check_epsilon(epsilon)?;
        let w2 = self.find_w2(y1, self.n1, epsilon, decoder);
        if w2 == 0 {
            return Ok((0, 0));
        }
        let x2 = &self.books[1][(w2 - 1) * self.n..w2 * self.n];
        let y: Vec<f64> = y1.iter().zip(x2).map(|(a, b)| a - b).collect();
        let n = self.n as f64;
        let v1 = self.variances[0];
        let vy = v1 + self.n1;
        let book = &self.books[0];
        let cw = |w: usize| &book[w * self.n..(w + 1) * self.n];
        let w1 = match decoder {
            Decoder::Typicality => {
                if !moment_ok(dot(&y, &y) / n, vy, vy, vy, epsilon) {
                    0
                } else {
                    unique_match(self.counts[0], |w| {
                        moment_ok(self.powers[0][w] / n, v1, v1, v1, epsilon)
                            && moment_ok(dot(cw(w), &y) / n, v1, v1, vy, epsilon)
                    })
                }
            }
            Decoder::MaximumLikelihood => {
                unique_best(self.counts[0], |w| 2.0 * dot(cw(w), &y) - self.powers[0][w])
            }
        };
        Ok((w1, w2))
    }
}

/// Broadcast codeword and whether it met the power budget.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianEncode {
    pub x: Vec<f64>,
    pub power_ok: bool,
}

/// One Gaussian multiple-access codebook per identification message.
#[derive(Debug)]
pub struct NestedGaussianCodebook {
    unit: u8,
    n: usize,
    per_book: usize,
    variance: f64,
    seed: RngSeed,
    books: Vec<OnceLock<(Vec<f64>, Vec<f64>)>>,
}

impl NestedGaussianCodebook {
    pub fn build(unit: u8, variance: f64, rate: f64, id_count: usize, n: usize, seed: RngSeed) -> Result<Self> {
        let what = match unit {
            1 => "unit 1 data codebook",
            2 => "unit 2 data codebook",
            b => return Err(SimError::BadBranch(b)),
        };
        if n == 0 {
            return Err(SimError::ZeroBlockLength);
        }
        positive(what, variance)?;
        Ok(NestedGaussianCodebook {
            unit,
            n,
            per_book: count_for(what, n, rate)?,
            variance,
            seed,
            books: (0..id_count.max(1)).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn per_book(&self) -> usize {
        self.per_book
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    fn table(&self, w: usize) -> Result<&(Vec<f64>, Vec<f64>)> {
        if w == 0 || w > self.books.len() {
            return Err(SimError::MessageOutOfRange {
                index: w,
                count: self.books.len(),
            });
        }
        Ok(self.books[w - 1].get_or_init(|| {
            let d = if self.unit == 1 {
                domain::MAC_UNIT1
            } else {
                domain::MAC_UNIT2
            };
            let mut rng = self.seed.stream(d, w as u64);
            let dist = normal(self.variance);
            let book: Vec<f64> = (0..self.per_book * self.n)
                .map(|_| dist.sample(&mut rng))
                .collect();
            let powers = book.chunks(self.n).map(|c| dot(c, c)).collect();
            (book, powers)
        }))
    }

    /// Codeword `m` of book `w`, both 1-based.
    pub fn codeword(&self, w: usize, m: usize) -> Result<&[f64]> {
        let (book, _) = self.table(w)?;
        if m == 0 || m > self.per_book {
            return Err(SimError::MessageOutOfRange {
                index: m,
                count: self.per_book,
            });
        }
        Ok(&book[(m - 1) * self.n..m * self.n])
    }
}

/// Decoder for `s = q1 + q2 + z3`.
#[derive(Debug, Clone, Copy)]
pub struct GaussianMacDecoder {
    pub var1: f64,
    pub var2: f64,
    pub noise: f64,
    pub epsilon: f64,
    pub rule: Decoder,
}

impl GaussianMacDecoder {
    /// Decodes `(m1, m2)` from the books of the true identification
    /// messages; `(0, 0)` when no unique pair is found.
    pub fn decode(
        &self,
        cb1: &NestedGaussianCodebook,
        cb2: &NestedGaussianCodebook,
        w1: usize,
        w2: usize,
        s: &[f64],
    ) -> Result<(usize, usize)> {
        let n = cb1.n;
        if s.len() != n {
            return Err(SimError::LengthMismatch {
                expected: n,
                actual: s.len(),
            });
        }
        let (k1, k2) = (cb1.per_book, cb2.per_book);
        if (k1 as u64) * (k2 as u64) > MAX_MAC_PAIRS {
            return Err(SimError::SearchSpaceTooLarge {
                pairs: k1 as f64 * k2 as f64,
                cap: MAX_MAC_PAIRS,
            });
        }
        let (b1, p1) = cb1.table(w1)?;
        let (b2, p2) = cb2.table(w2)?;
        let cw1 = |m: usize| &b1[m * n..(m + 1) * n];
        let cw2 = |m: usize| &b2[m * n..(m + 1) * n];
        let nf = n as f64;
        let (c1, c2) = (self.var1, self.var2);
        let vs = c1 + c2 + self.noise;
        let eps = self.epsilon;
        let s1: Vec<f64> = (0..k1).map(|m| dot(cw1(m), s)).collect();
        let s2: Vec<f64> = (0..k2).map(|m| dot(cw2(m), s)).collect();
        let decoded = match self.rule {
            Decoder::Typicality => {
                if !moment_ok(dot(s, s) / nf, vs, vs, vs, eps) {
                    return Ok((0, 0));
                }
                let first: Vec<usize> = (0..k1)
                    .filter(|&m| moment_ok(p1[m] / nf, c1, c1, c1, eps) && moment_ok(s1[m] / nf, c1, c1, vs, eps))
                    .collect();
                let second: Vec<usize> = (0..k2)
                    .filter(|&m| moment_ok(p2[m] / nf, c2, c2, c2, eps) && moment_ok(s2[m] / nf, c2, c2, vs, eps))
                    .collect();
                let mut found = None;
                for &a in &first {
                    for &b in &second {
                        if moment_ok(dot(cw1(a), cw2(b)) / nf, 0.0, c1, c2, eps) {
                            if found.is_some() {
                                return Ok((0, 0));
                            }
                            found = Some((a + 1, b + 1));
                        }
                    }
                }
                found.unwrap_or((0, 0))
            }
            Decoder::MaximumLikelihood => {
                let mut best = f64::NEG_INFINITY;
                let mut arg = (0, 0);
                let mut tied = false;
                for a in 0..k1 {
                    for b in 0..k2 {
                        let score = 2.0 * (s1[a] + s2[b]) - p1[a] - p2[b] - 2.0 * dot(cw1(a), cw2(b));
                        if score > best {
                            best = score;
                            arg = (a + 1, b + 1);
                            tied = false;
                        } else if score == best {
                            tied = true;
                        }
                    }
                }
                if tied {
                    (0, 0)
                } else {
                    arg
                }
            }
        };
        Ok(decoded)
    }
}

/// A complete random code for the Gaussian cascade.
#[derive(Debug)]
pub struct GaussianCode {
    pub bcc: GaussianSuperpositionCodebook,
    pub mac1: NestedGaussianCodebook,
    pub mac2: NestedGaussianCodebook,
    pub mac_decoder: GaussianMacDecoder,
    cfg: GaussianSimConfig,
}

impl GaussianCode {
    pub fn build(cfg: &GaussianSimConfig, seed: RngSeed) -> Result<Self> {
        let r = &cfg.rates;
        let sys = &cfg.system;
        check_epsilon(cfg.epsilon)?;
        let pair_exponent = cfg.n as f64 * (r.r1_data + r.r2_data);
        if pair_exponent > (MAX_MAC_PAIRS as f64).ln() + 1e-9 {
            return Err(SimError::SearchSpaceTooLarge {
                pairs: pair_exponent.exp(),
                cap: MAX_MAC_PAIRS,
            });
        }
        let bcc = GaussianSuperpositionCodebook::build(sys, cfg.alpha, r.r1_id, r.r2_id, cfg.n, cfg.epsilon, seed)?;
        let (m1, m2) = bcc.message_counts();
        let var1 = sys.alpha1() * cfg.alpha * sys.p() - cfg.epsilon;
        let var2 = sys.alpha2() * (1.0 - cfg.alpha) * sys.p() - cfg.epsilon;
        let mac1 = NestedGaussianCodebook::build(1, var1, r.r1_data, m1, cfg.n, seed)?;
        let mac2 = NestedGaussianCodebook::build(2, var2, r.r2_data, m2, cfg.n, seed)?;
        Ok(GaussianCode {
            mac_decoder: GaussianMacDecoder {
                var1,
                var2,
                noise: sys.n3(),
                epsilon: cfg.epsilon,
                rule: cfg.decoder,
            },
            bcc,
            mac1,
            mac2,
            cfg: *cfg,
        })
    }

    pub(crate) fn run_trial(&self, rng: &mut ChaCha8Rng) -> Result<TrialOutcome> {
        let cfg = &self.cfg;
        let sys = &cfg.system;
        let (c1, c2) = self.bcc.message_counts();
        let w1 = rng.random_range(1..=c1);
        let w2 = rng.random_range(1..=c2);
        let enc = self.bcc.encode(w1, w2)?;
        if !enc.power_ok {
            return Ok(TrialOutcome::BccPowerViolation);
        }
        let (y1, y2) = sys.broadcast(&enc.x, rng);
        let (w1_hat, _) = self.bcc.decode_unit1(&y1, cfg.epsilon, cfg.decoder)?;
        let w2_hat = self.bcc.decode_unit2(&y2, cfg.epsilon, cfg.decoder)?;
        if w1_hat == 0 || w2_hat == 0 {
            return Ok(TrialOutcome::MissType);
        }
        if w1_hat != w1 || w2_hat != w2 {
            return Ok(TrialOutcome::WrongMessage);
        }
        let m1 = rng.random_range(1..=self.mac1.per_book());
        let m2 = rng.random_range(1..=self.mac2.per_book());
        let q1 = self.mac1.codeword(w1_hat, m1)?;
        let q2 = self.mac2.codeword(w2_hat, m2)?;
        let n = cfg.n as f64;
        let budget1 = sys.alpha1() * cfg.alpha * sys.p();
        let budget2 = sys.alpha2() * (1.0 - cfg.alpha) * sys.p();
        if dot(q1, q1) / n > budget1 || dot(q2, q2) / n > budget2 {
            return Ok(TrialOutcome::MacPowerViolation);
        }
        let s = sys.multiple_access(q1, q2, rng)?;
        Ok(match self.mac_decoder.decode(&self.mac1, &self.mac2, w1, w2, &s)? {
            (0, 0) => TrialOutcome::MacMiss,
            pair if pair == (m1, m2) => TrialOutcome::Success,
            _ => TrialOutcome::MacWrong,
        })
    }
}

/// Estimates error rates of one random Gaussian code over `trials`
/// transmissions.
pub fn estimate_gaussian_error_rates(cfg: &GaussianSimConfig, trials: u64, seed: RngSeed) -> Result<SimResult> {
    if trials < MIN_TRIALS {
        return Err(SimError::TooFewTrials(trials));
    }
    let code = GaussianCode::build(cfg, seed)?;
    run_trials(trials, cfg.n, seed, |rng| code.run_trial(rng))
}
