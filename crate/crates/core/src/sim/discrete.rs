//! Binned typical-list broadcast code and nested multiple-access codebooks
//! over finite alphabets.

use std::ops::Range;
use std::sync::OnceLock;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::Distribution;

use super::packed::{pack, pack_into, pair_log_sum, triple_log_sum, words_for};
use super::{
    check_epsilon, message_count, run_trials, Decoder, Result, SimError, SimResult, TrialOutcome,
    MAX_CODEBOOK_LETTERS, MAX_LIST_SIZE, MAX_MAC_PAIRS, MIN_TRIALS, RETRY_CAP,
};
use crate::channel::{bcc_joint, induced_mac_joint, BccChannel, DiscreteSystem};
use crate::prob::{JointPmf, LogBase, Pmf, Symbol, TypicalSet, ZERO_PROB};
use crate::region::{DiscreteWitness, RateQuadruple};
use crate::rng::{domain, RngSeed};

/// Everything needed to simulate the discrete cascade.
#[derive(Debug, Clone)]
pub struct DiscreteSimConfig {
    pub system: DiscreteSystem,
    pub witness: DiscreteWitness,
    /// Rates in nats.
    pub rates: RateQuadruple,
    pub n: usize,
    /// Typicality slack of the broadcast code, in nats.
    pub epsilon_bcc: f64,
    /// Typicality slack of the multiple-access decoder, in nats.
    pub epsilon_mac: f64,
    pub decoder: Decoder,
}

/// Stored list for one unit, split into contiguous cells.
#[derive(Debug, Clone)]
struct UnitList {
    seqs: Vec<Symbol>,
    packed: Vec<u64>,
    alphabet: usize,
    size: usize,
    width: usize,
    messages: usize,
    typical: Vec<bool>,
}

impl UnitList {
    fn new(
        seqs: Vec<Symbol>,
        n: usize,
        alphabet: usize,
        width: usize,
        messages: usize,
        typical: Vec<bool>,
    ) -> Self {
        let size = typical.len();
        let mut packed = Vec::with_capacity(size * alphabet * words_for(n));
        for k in 0..size {
            pack_into(&seqs[k * n..(k + 1) * n], alphabet, &mut packed);
        }
        UnitList {
            seqs,
            packed,
            alphabet,
            size,
            width,
            messages,
            typical,
        }
    }

    fn packed(&self, k: usize, words: usize) -> &[u64] {
        let stride = self.alphabet * words;
        &self.packed[k * stride..(k + 1) * stride]
    }

    fn seq(&self, k: usize, n: usize) -> &[Symbol] {
        &self.seqs[k * n..(k + 1) * n]
    }

    /// 1-based cell holding list index `k`. The last cell absorbs the
    /// remainder left by flooring the width.
    fn cell_of(&self, k: usize) -> usize {
        (k / self.width).min(self.messages - 1) + 1
    }

    fn cell_range(&self, w: usize) -> Range<usize> {
        let start = (w - 1) * self.width;
        let end = if w == self.messages {
            self.size
        } else {
            w * self.width
        };
        start..end
    }
}

/// Result of encoding a message pair on the broadcast part.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EncodeOutcome {
    Codeword(Vec<Symbol>),
    /// No jointly typical pair in the product of the two cells.
    NoTypicalPair,
    /// A pair was found but no typical input sequence within the retry cap.
    NoTypicalCodeword,
}

/// Broadcast code built from two lists of typical auxiliary sequences.
///
/// The `U` list holds `floor(e^{n(I(U;Y1) - eps)})` sequences grouped into
/// cells of `floor(e^{n(I(U;Y1) - R1 - eps)})` consecutive indices, one cell
/// per message; likewise for `V`. Input sequences for a message pair are
/// derived on demand from a stream keyed by the pair, so the code is fixed
/// by its seed without materialising every codeword.
#[derive(Debug, Clone)]
pub struct DiscreteBccCodebook {
    n: usize,
    epsilon: f64,
    units: [UnitList; 2],
    pair_typical: TypicalSet,
    triple_typical: TypicalSet,
    branch_typical: [TypicalSet; 2],
    branch_loglik: [Vec<f64>; 2],
    words: usize,
    y_sizes: [usize; 2],
    x_samplers: Vec<Option<WeightedIndex<f64>>>,
    v_size: usize,
    seed: RngSeed,
}

struct Layout {
    size: usize,
    width: usize,
    messages: usize,
}

fn layout(unit: u8, info: f64, rate: f64, n: usize, epsilon: f64) -> Result<Layout> {
    if info - rate - epsilon < 0.0 {
        return Err(SimError::RateTooHigh {
            unit,
            rate,
            info,
            epsilon,
        });
    }
    let exponent = n as f64 * (info - epsilon);
    if exponent > (MAX_LIST_SIZE as f64).ln() {
        return Err(SimError::ListTooLarge {
            unit,
            exponent,
            cap: MAX_LIST_SIZE,
        });
    }
    let messages = message_count(n, rate, MAX_LIST_SIZE as f64).ok_or(SimError::ListTooLarge {
        unit,
        exponent,
        cap: MAX_LIST_SIZE,
    })?;
    let width = ((n as f64 * (info - rate - epsilon)).exp().floor() as usize).max(1);
    let size = (exponent.exp().floor() as usize).max(messages * width);
    Ok(Layout {
        size,
        width,
        messages,
    })
}

/// Rejection-samples `size` sequences that are typical under `p`. After the
/// retry cap the least atypical draw is kept and flagged.
fn typical_list(p: &Pmf, size: usize, n: usize, epsilon: f64, rng: &mut ChaCha8Rng) -> Result<(Vec<Symbol>, Vec<bool>)> {
    let sampler = WeightedIndex::new(p.probs().iter().copied()).map_err(|_| {
        SimError::Prob(crate::prob::ProbError::NotNormalized(p.probs().iter().sum()))
    })?;
    let ts = TypicalSet::new(&JointPmf::from_pmf(p), epsilon)?;
    let mut seqs = Vec::with_capacity(size * n);
    let mut typical = Vec::with_capacity(size);
    let mut draw = vec![0 as Symbol; n];
    let mut best = vec![0 as Symbol; n];
    for _ in 0..size {
        let mut best_dev = f64::INFINITY;
        let mut found = false;
        for _ in 0..RETRY_CAP {
            draw.iter_mut()
                .for_each(|s| *s = sampler.sample(rng) as Symbol);
            let dev = ts.max_deviation(&[&draw])?.unwrap_or(f64::INFINITY);
            if dev <= epsilon {
                found = true;
                best.copy_from_slice(&draw);
                break;
            }
            if dev < best_dev {
                best_dev = dev;
                best.copy_from_slice(&draw);
            }
        }
        seqs.extend_from_slice(&best);
        typical.push(found);
    }
    Ok((seqs, typical))
}

/// `ln p(b | a)` for a rank-2 joint, indexed `[a][b]`.
fn conditional_log_table(joint: &JointPmf) -> Vec<f64> {
    let (na, nb) = (joint.dims()[0], joint.dims()[1]);
    let mut out = vec![f64::NEG_INFINITY; na * nb];
    for a in 0..na {
        let pa: f64 = (0..nb).map(|b| joint.get(&[a, b])).sum();
        for b in 0..nb {
            let p = joint.get(&[a, b]);
            if p > ZERO_PROB && pa > ZERO_PROB {
                out[a * nb + b] = (p / pa).ln();
            }
        }
    }
    out
}

impl DiscreteBccCodebook {
    /// Draws a random code for the given witness and identification rates.
    pub fn build(
        p_uvx: &JointPmf,
        bcc: &BccChannel,
        r1_id: f64,
        r2_id: f64,
        n: usize,
        epsilon: f64,
        seed: RngSeed,
    ) -> Result<Self> {
        let full = Self::validate(p_uvx, bcc, n, epsilon)?;
        let i1 = full.mutual_information_between(&[0], &[3], LogBase::Nats)?;
        let i2 = full.mutual_information_between(&[1], &[4], LogBase::Nats)?;
        let l1 = layout(1, i1, r1_id, n, epsilon)?;
        let l2 = layout(2, i2, r2_id, n, epsilon)?;
        let p_u = p_uvx.marginal_pmf(0)?;
        let p_v = p_uvx.marginal_pmf(1)?;
        let (u, ut) = typical_list(&p_u, l1.size, n, epsilon, &mut seed.stream(domain::BCC_U_LIST, 0))?;
        let (v, vt) = typical_list(&p_v, l2.size, n, epsilon, &mut seed.stream(domain::BCC_V_LIST, 0))?;
        let lists = [
            UnitList::new(u, n, p_u.len(), l1.width, l1.messages, ut),
            UnitList::new(v, n, p_v.len(), l2.width, l2.messages, vt),
        ];
        Self::assemble(p_uvx, bcc, &full, n, epsilon, lists, seed)
    }

    /// Builds a code from explicit lists, each split evenly into `messages`
    /// cells with the remainder in the last cell.
    pub fn from_lists(
        p_uvx: &JointPmf,
        bcc: &BccChannel,
        n: usize,
        epsilon: f64,
        u_list: &[Vec<Symbol>],
        v_list: &[Vec<Symbol>],
        messages: (usize, usize),
        seed: RngSeed,
    ) -> Result<Self> {
        let full = Self::validate(p_uvx, bcc, n, epsilon)?;
        let p_u = JointPmf::from_pmf(&p_uvx.marginal_pmf(0)?);
        let p_v = JointPmf::from_pmf(&p_uvx.marginal_pmf(1)?);
        let make = |list: &[Vec<Symbol>], count: usize, p: &JointPmf| -> Result<UnitList> {
            if count == 0 || count > list.len() {
                return Err(SimError::MessageOutOfRange {
                    index: count,
                    count: list.len(),
                });
            }
            let ts = TypicalSet::new(p, epsilon)?;
            let mut seqs = Vec::with_capacity(list.len() * n);
            let mut typical = Vec::with_capacity(list.len());
            for s in list {
                if s.len() != n {
                    return Err(SimError::LengthMismatch {
                        expected: n,
                        actual: s.len(),
                    });
                }
                typical.push(ts.contains(&[s])?);
                seqs.extend_from_slice(s);
            }
            Ok(UnitList::new(seqs, n, p.dims()[0], list.len() / count, count, typical))
        };
        let lists = [make(u_list, messages.0, &p_u)?, make(v_list, messages.1, &p_v)?];
        Self::assemble(p_uvx, bcc, &full, n, epsilon, lists, seed)
    }

    fn validate(p_uvx: &JointPmf, bcc: &BccChannel, n: usize, epsilon: f64) -> Result<JointPmf> {
        if n == 0 {
            return Err(SimError::ZeroBlockLength);
        }
        check_epsilon(epsilon)?;
        Ok(bcc_joint(p_uvx, bcc)?)
    }

    fn assemble(
        p_uvx: &JointPmf,
        bcc: &BccChannel,
        full: &JointPmf,
        n: usize,
        epsilon: f64,
        units: [UnitList; 2],
        seed: RngSeed,
    ) -> Result<Self> {
        let (nu, nv, nx) = (p_uvx.dims()[0], p_uvx.dims()[1], p_uvx.dims()[2]);
        let uy1 = full.marginalize(&[0, 3])?;
        let vy2 = full.marginalize(&[1, 4])?;
        let mut x_samplers = Vec::with_capacity(nu * nv);
        for u in 0..nu {
            for v in 0..nv {
                let row: Vec<f64> = (0..nx).map(|x| p_uvx.get(&[u, v, x])).collect();
                x_samplers.push(WeightedIndex::new(row).ok());
            }
        }
        Ok(DiscreteBccCodebook {
            n,
            epsilon,
            pair_typical: TypicalSet::new(&p_uvx.marginalize(&[0, 1])?, epsilon)?,
            triple_typical: TypicalSet::new(p_uvx, epsilon)?,
            branch_typical: [TypicalSet::new(&uy1, epsilon)?, TypicalSet::new(&vy2, epsilon)?],
            branch_loglik: [conditional_log_table(&uy1), conditional_log_table(&vy2)],
            words: words_for(n),
            y_sizes: [bcc.y1_size(), bcc.y2_size()],
            x_samplers,
            v_size: nv,
            units,
            seed,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Number of identification messages of each unit.
    pub fn message_counts(&self) -> (usize, usize) {
        (self.units[0].messages, self.units[1].messages)
    }

    pub fn list_sizes(&self) -> (usize, usize) {
        (self.units[0].size, self.units[1].size)
    }

    pub fn cell_widths(&self) -> (usize, usize) {
        (self.units[0].width, self.units[1].width)
    }

    /// Stored sequences that failed the typicality test within the retry cap.
    pub fn atypical_entries(&self) -> usize {
        self.units
            .iter()
            .map(|u| u.typical.iter().filter(|t| !**t).count())
            .sum()
    }

    /// 1-based cell of list index `k` on `branch`.
    pub fn cell_of(&self, branch: u8, k: usize) -> Result<usize> {
        let u = self.unit(branch)?;
        if k >= u.size {
            return Err(SimError::MessageOutOfRange {
                index: k,
                count: u.size,
            });
        }
        Ok(u.cell_of(k))
    }

    /// List indices belonging to message `w` on `branch`.
    pub fn cell_range(&self, branch: u8, w: usize) -> Result<Range<usize>> {
        let u = self.unit(branch)?;
        check_message(w, u.messages)?;
        Ok(u.cell_range(w))
    }

    pub fn list_entry(&self, branch: u8, k: usize) -> Result<&[Symbol]> {
        let u = self.unit(branch)?;
        if k >= u.size {
            return Err(SimError::MessageOutOfRange {
                index: k,
                count: u.size,
            });
        }
        Ok(u.seq(k, self.n))
    }

    fn unit(&self, branch: u8) -> Result<&UnitList> {
        match branch {
            1 => Ok(&self.units[0]),
            2 => Ok(&self.units[1]),
            b => Err(SimError::BadBranch(b)),
        }
    }

    /// Lexicographically first jointly typical pair `(k, l)` in the product
    /// of the two cells.
    pub fn chosen_pair(&self, w1: usize, w2: usize) -> Result<Option<(usize, usize)>> {
        let [a, b] = &self.units;
        check_message(w1, a.messages)?;
        check_message(w2, b.messages)?;
        let (n, words) = (self.n, self.words);
        let ts = &self.pair_typical;
        let lp = ts.subset_log_probs(0b11);
        for k in a.cell_range(w1).filter(|&k| a.typical[k]) {
            let u = a.packed(k, words);
            for l in b.cell_range(w2).filter(|&l| b.typical[l]) {
                let sum = pair_log_sum(u, a.alphabet, b.packed(l, words), b.alphabet, words, lp);
                if ts.within(0b11, sum, n) {
                    return Ok(Some((k, l)));
                }
            }
        }
        Ok(None)
    }

    /// Input sequence for the message pair `(w1, w2)`, both 1-based.
    pub fn encode(&self, w1: usize, w2: usize) -> Result<EncodeOutcome> {
        let Some((k, l)) = self.chosen_pair(w1, w2)? else {
            return Ok(EncodeOutcome::NoTypicalPair);
        };
        let n = self.n;
        let u = self.units[0].seq(k, n);
        let v = self.units[1].seq(l, n);
        let pair_index = (w1 - 1) * self.units[1].messages + (w2 - 1);
        let mut rng = self.seed.stream(domain::BCC_CODEWORD, pair_index as u64);
        let mut x = vec![0 as Symbol; n];
        for _ in 0..RETRY_CAP {
            for j in 0..n {
                let Some(s) = &self.x_samplers[u[j] as usize * self.v_size + v[j] as usize] else {
                    return Ok(EncodeOutcome::NoTypicalCodeword);
                };
                x[j] = s.sample(&mut rng) as Symbol;
            }
            if self.triple_typical.contains_unchecked(&[u, v, &x], n) {
                return Ok(EncodeOutcome::Codeword(x));
            }
        }
        Ok(EncodeOutcome::NoTypicalCodeword)
    }

    /// Decodes the identification message on `branch` (1 or 2) with the
    /// typicality rule. Returns 0 when no unique list entry matches.
    pub fn decode(&self, branch: u8, y: &[Symbol]) -> Result<usize> {
        self.decode_with(branch, y, Decoder::Typicality)
    }

    pub fn decode_with(&self, branch: u8, y: &[Symbol], decoder: Decoder) -> Result<usize> {
        let unit = self.unit(branch)?;
        let b = branch as usize - 1;
        let n = self.n;
        if y.len() != n {
            return Err(SimError::LengthMismatch {
                expected: n,
                actual: y.len(),
            });
        }
        if let Some(pos) = y.iter().position(|&s| s as usize >= self.y_sizes[b]) {
            return Err(crate::channel::ChannelError::SymbolOutOfRange {
                position: pos,
                symbol: y[pos] as usize,
                size: self.y_sizes[b],
            }
            .into());
        }
        match decoder {
            Decoder::Typicality => Ok(self.decode_typical(unit, b, y)),
            Decoder::MaximumLikelihood => Ok(self.decode_ml(unit, b, y)),
        }
    }

    fn decode_typical(&self, unit: &UnitList, b: usize, y: &[Symbol]) -> usize {
        let ts = &self.branch_typical[b];
        let n = self.n;
        let empty: &[Symbol] = &[];
        if !ts.within(0b10, ts.log_prob_sum(0b10, &[empty, y], n), n) {
            return 0;
        }
        let ys = self.y_sizes[b];
        let py = pack(y, ys);
        let lp = ts.subset_log_probs(0b11);
        let mut found = None;
        for k in 0..unit.size {
            if !unit.typical[k] {
                continue;
            }
            let sum = pair_log_sum(unit.packed(k, self.words), unit.alphabet, &py, ys, self.words, lp);
            if ts.within(0b11, sum, n) {
                if found.is_some() {
                    return 0;
                }
                found = Some(k);
            }
        }
        found.map_or(0, |k| unit.cell_of(k))
    }

    fn decode_ml(&self, unit: &UnitList, b: usize, y: &[Symbol]) -> usize {
        let table = &self.branch_loglik[b];
        let ys = self.y_sizes[b];
        let py = pack(y, ys);
        let mut best = f64::NEG_INFINITY;
        let mut arg = None;
        let mut tied = false;
        for k in 0..unit.size {
            let score = pair_log_sum(unit.packed(k, self.words), unit.alphabet, &py, ys, self.words, table);
            if score > best {
                best = score;
                arg = Some(k);
                tied = false;
            } else if score == best && score > f64::NEG_INFINITY {
                tied = true;
            }
        }
        match arg {
            Some(k) if !tied => unit.cell_of(k),
            _ => 0,
        }
    }
}

fn check_message(w: usize, count: usize) -> Result<()> {
    if w == 0 || w > count {
        return Err(SimError::MessageOutOfRange { index: w, count });
    }
    Ok(())
}

/// One multiple-access codebook per identification message of a unit.
///
/// Book `w` is drawn i.i.d. from `p(q)` on its own stream, so books are
/// mutually independent. Books are generated on first use and cached.
#[derive(Debug)]
pub struct NestedMacCodebook {
    unit: u8,
    n: usize,
    per_book: usize,
    alphabet: usize,
    sampler: WeightedIndex<f64>,
    seed: RngSeed,
    books: Vec<OnceLock<(Vec<Symbol>, Vec<u64>)>>,
}

impl NestedMacCodebook {
    /// `rate` is in nats; each book holds `floor(e^{n rate})` codewords.
    pub fn build(unit: u8, p_q: &Pmf, rate: f64, id_count: usize, n: usize, seed: RngSeed) -> Result<Self> {
        if unit != 1 && unit != 2 {
            return Err(SimError::BadBranch(unit));
        }
        if n == 0 {
            return Err(SimError::ZeroBlockLength);
        }
        let letters_cap = MAX_CODEBOOK_LETTERS as f64 / n as f64;
        let per_book = message_count(n, rate, letters_cap).ok_or(SimError::CodebookTooLarge {
            what: if unit == 1 { "unit 1 data" } else { "unit 2 data" },
            letters: (n as f64 * rate).exp() * n as f64,
            cap: MAX_CODEBOOK_LETTERS,
        })?;
        let sampler = WeightedIndex::new(p_q.probs().iter().copied()).map_err(|_| {
            SimError::Prob(crate::prob::ProbError::NotNormalized(p_q.probs().iter().sum()))
        })?;
        Ok(NestedMacCodebook {
            unit,
            n,
            per_book,
            alphabet: p_q.len(),
            sampler,
            seed,
            books: (0..id_count.max(1)).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn unit(&self) -> u8 {
        self.unit
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn book_count(&self) -> usize {
        self.books.len()
    }

    /// Codewords per book.
    pub fn per_book(&self) -> usize {
        self.per_book
    }

    fn table(&self, w: usize) -> Result<&(Vec<Symbol>, Vec<u64>)> {
        check_message(w, self.books.len())?;
        Ok(self.books[w - 1].get_or_init(|| {
            let d = if self.unit == 1 {
                domain::MAC_UNIT1
            } else {
                domain::MAC_UNIT2
            };
            let mut rng = self.seed.stream(d, w as u64);
            let book: Vec<Symbol> = (0..self.per_book * self.n)
                .map(|_| self.sampler.sample(&mut rng) as Symbol)
                .collect();
            let mut packed = Vec::with_capacity(self.per_book * self.alphabet * words_for(self.n));
            for c in book.chunks(self.n) {
                pack_into(c, self.alphabet, &mut packed);
            }
            (book, packed)
        }))
    }

    /// Flat table of book `w` (1-based), `per_book * n` letters.
    pub fn book(&self, w: usize) -> Result<&[Symbol]> {
        Ok(&self.table(w)?.0)
    }

    /// Codeword `m` (1-based) of book `w` (1-based).
    pub fn codeword(&self, w: usize, m: usize) -> Result<&[Symbol]> {
        let book = self.book(w)?;
        check_message(m, self.per_book)?;
        Ok(&book[(m - 1) * self.n..m * self.n])
    }
}

/// Codeword sent by a unit that decoded `w_hat` and wants to send `m`.
pub fn mac_encode(cb: &NestedMacCodebook, w_hat: usize, m: usize) -> Result<Vec<Symbol>> {
    if w_hat == 0 {
        return Err(SimError::MissTypedUnit);
    }
    Ok(cb.codeword(w_hat, m)?.to_vec())
}

/// Decoding tables for the multiple-access part, built from the end-to-end
/// joint of `(Q1, Q2, S)`.
#[derive(Debug, Clone)]
pub struct MacDecoder {
    typical: TypicalSet,
    loglik: Vec<f64>,
    dims: [usize; 3],
    rule: Decoder,
}

impl MacDecoder {
    pub fn new(reference: &JointPmf, epsilon: f64, rule: Decoder) -> Result<Self> {
        check_epsilon(epsilon)?;
        let d = reference.dims();
        let dims = [d[0], d[1], d[2]];
        let mut loglik = vec![f64::NEG_INFINITY; d[0] * d[1] * d[2]];
        for a in 0..d[0] {
            for b in 0..d[1] {
                let pab: f64 = (0..d[2]).map(|s| reference.get(&[a, b, s])).sum();
                for s in 0..d[2] {
                    let p = reference.get(&[a, b, s]);
                    if p > ZERO_PROB && pab > ZERO_PROB {
                        loglik[(a * d[1] + b) * d[2] + s] = (p / pab).ln();
                    }
                }
            }
        }
        Ok(MacDecoder {
            typical: TypicalSet::new(reference, epsilon)?,
            loglik,
            dims,
            rule,
        })
    }

    pub fn rule(&self) -> Decoder {
        self.rule
    }
}

/// Decodes `(m1, m2)` from `s` using the books of the true identification
/// messages. Returns `(0, 0)` when no unique candidate pair is found.
pub fn mac_decode(
    cb1: &NestedMacCodebook,
    cb2: &NestedMacCodebook,
    w1: usize,
    w2: usize,
    s: &[Symbol],
    decoder: &MacDecoder,
) -> Result<(usize, usize)> {
    let n = cb1.n;
    if s.len() != n || cb2.n != n {
        return Err(SimError::LengthMismatch {
            expected: n,
            actual: s.len(),
        });
    }
    if cb1.alphabet != decoder.dims[0] || cb2.alphabet != decoder.dims[1] {
        return Err(crate::channel::ChannelError::DimensionMismatch(format!(
            "codebook alphabets ({}, {}) do not match the decoder's ({}, {})",
            cb1.alphabet, cb2.alphabet, decoder.dims[0], decoder.dims[1]
        ))
        .into());
    }
    if let Some(pos) = s.iter().position(|&x| x as usize >= decoder.dims[2]) {
        return Err(crate::channel::ChannelError::SymbolOutOfRange {
            position: pos,
            symbol: s[pos] as usize,
            size: decoder.dims[2],
        }
        .into());
    }
    let (k1, k2) = (cb1.per_book, cb2.per_book);
    if (k1 as u64).saturating_mul(k2 as u64) > MAX_MAC_PAIRS {
        return Err(SimError::SearchSpaceTooLarge {
            pairs: k1 as f64 * k2 as f64,
            cap: MAX_MAC_PAIRS,
        });
    }
    let scan = MacScan {
        book1: &cb1.table(w1)?.1,
        book2: &cb2.table(w2)?.1,
        k1,
        k2,
        n,
        words: words_for(n),
        dims: decoder.dims,
        s: pack(s, decoder.dims[2]),
    };
    Ok(match decoder.rule {
        Decoder::Typicality => scan.typical(&decoder.typical),
        Decoder::MaximumLikelihood => scan.ml(&decoder.loglik),
    })
}

/// Packed books and output for one decoding pass.
struct MacScan<'a> {
    book1: &'a [u64],
    book2: &'a [u64],
    k1: usize,
    k2: usize,
    n: usize,
    words: usize,
    dims: [usize; 3],
    s: Vec<u64>,
}

impl MacScan<'_> {
    fn q1(&self, m: usize) -> &[u64] {
        let stride = self.dims[0] * self.words;
        &self.book1[m * stride..(m + 1) * stride]
    }

    fn q2(&self, m: usize) -> &[u64] {
        let stride = self.dims[1] * self.words;
        &self.book2[m * stride..(m + 1) * stride]
    }

    /// Log-probability sum of a single packed sequence.
    fn single(&self, x: &[u64], alphabet: usize, lp: &[f64]) -> f64 {
        let mut total = 0.0;
        for a in 0..alphabet {
            let c: u32 = x[a * self.words..(a + 1) * self.words]
                .iter()
                .map(|w| w.count_ones())
                .sum();
            if c > 0 {
                if lp[a] == f64::NEG_INFINITY {
                    return f64::NEG_INFINITY;
                }
                total += c as f64 * lp[a];
            }
        }
        total
    }

    fn typical(&self, ts: &TypicalSet) -> (usize, usize) {
        let [d1, d2, ds] = self.dims;
        let (n, words) = (self.n, self.words);
        if !ts.within(0b100, self.single(&self.s, ds, ts.subset_log_probs(0b100)), n) {
            return (0, 0);
        }
        let first: Vec<usize> = (0..self.k1)
            .filter(|&a| {
                let q = self.q1(a);
                ts.within(0b001, self.single(q, d1, ts.subset_log_probs(0b001)), n)
                    && ts.within(
                        0b101,
                        pair_log_sum(q, d1, &self.s, ds, words, ts.subset_log_probs(0b101)),
                        n,
                    )
            })
            .collect();
        if first.is_empty() {
            return (0, 0);
        }
        let second: Vec<usize> = (0..self.k2)
            .filter(|&b| {
                let q = self.q2(b);
                ts.within(0b010, self.single(q, d2, ts.subset_log_probs(0b010)), n)
                    && ts.within(
                        0b110,
                        pair_log_sum(q, d2, &self.s, ds, words, ts.subset_log_probs(0b110)),
                        n,
                    )
            })
            .collect();
        let lp12 = ts.subset_log_probs(0b011);
        let lp123 = ts.subset_log_probs(0b111);
        let mut found = None;
        for &a in &first {
            let q1 = self.q1(a);
            for &b in &second {
                let q2 = self.q2(b);
                if ts.within(0b011, pair_log_sum(q1, d1, q2, d2, words, lp12), n)
                    && ts.within(
                        0b111,
                        triple_log_sum(q1, d1, q2, d2, &self.s, ds, words, lp123),
                        n,
                    )
                {
                    if found.is_some() {
                        return (0, 0);
                    }
                    found = Some((a + 1, b + 1));
                }
            }
        }
        found.unwrap_or((0, 0))
    }

    fn ml(&self, loglik: &[f64]) -> (usize, usize) {
        let [d1, d2, ds] = self.dims;
        let mut best = f64::NEG_INFINITY;
        let mut arg = None;
        let mut tied = false;
        for a in 0..self.k1 {
            let q1 = self.q1(a);
            for b in 0..self.k2 {
                let score = triple_log_sum(q1, d1, self.q2(b), d2, &self.s, ds, self.words, loglik);
                if score > best {
                    best = score;
                    arg = Some((a + 1, b + 1));
                    tied = false;
                } else if score == best && score > f64::NEG_INFINITY {
                    tied = true;
                }
            }
        }
        match arg {
            Some(p) if !tied => p,
            _ => (0, 0),
        }
    }
}

/// A complete random code for the discrete cascade.
#[derive(Debug)]
pub struct DiscreteCode {
    pub bcc: DiscreteBccCodebook,
    pub mac1: NestedMacCodebook,
    pub mac2: NestedMacCodebook,
    pub mac_decoder: MacDecoder,
    system: DiscreteSystem,
    rule: Decoder,
}

impl DiscreteCode {
    pub fn build(cfg: &DiscreteSimConfig, seed: RngSeed) -> Result<Self> {
        let w = &cfg.witness;
        let r = &cfg.rates;
        check_epsilon(cfg.epsilon_mac)?;
        let pair_exponent = cfg.n as f64 * (r.r1_data + r.r2_data);
        if pair_exponent > (MAX_MAC_PAIRS as f64).ln() + 1e-9 {
            return Err(SimError::SearchSpaceTooLarge {
                pairs: pair_exponent.exp(),
                cap: MAX_MAC_PAIRS,
            });
        }
        let bcc = DiscreteBccCodebook::build(
            &w.p_uvx,
            &cfg.system.bcc,
            r.r1_id,
            r.r2_id,
            cfg.n,
            cfg.epsilon_bcc,
            seed,
        )?;
        let (m1, m2) = bcc.message_counts();
        let mac1 = NestedMacCodebook::build(1, &w.p_q1, r.r1_data, m1, cfg.n, seed)?;
        let mac2 = NestedMacCodebook::build(2, &w.p_q2, r.r2_data, m2, cfg.n, seed)?;
        if (mac1.per_book() as u64) * (mac2.per_book() as u64) > MAX_MAC_PAIRS {
            return Err(SimError::SearchSpaceTooLarge {
                pairs: mac1.per_book() as f64 * mac2.per_book() as f64,
                cap: MAX_MAC_PAIRS,
            });
        }
        let s = &cfg.system;
        let joint = induced_mac_joint(&w.p_q1, &w.p_q2, &s.imp1, &s.imp2, &s.mac)?;
        Ok(DiscreteCode {
            mac_decoder: MacDecoder::new(&joint, cfg.epsilon_mac, cfg.decoder)?,
            bcc,
            mac1,
            mac2,
            system: cfg.system.clone(),
            rule: cfg.decoder,
        })
    }

    /// One end-to-end transmission.
    pub(crate) fn run_trial(&self, rng: &mut ChaCha8Rng) -> Result<TrialOutcome> {
        let (c1, c2) = self.bcc.message_counts();
        let w1 = rng.random_range(1..=c1);
        let w2 = rng.random_range(1..=c2);
        let x = match self.bcc.encode(w1, w2)? {
            EncodeOutcome::Codeword(x) => x,
            _ => return Ok(TrialOutcome::EncodeFailure),
        };
        let (y1, y2) = self.system.bcc.sample(&x, rng)?;
        let w1_hat = self.bcc.decode_with(1, &y1, self.rule)?;
        let w2_hat = self.bcc.decode_with(2, &y2, self.rule)?;
        if w1_hat == 0 || w2_hat == 0 {
            return Ok(TrialOutcome::MissType);
        }
        if w1_hat != w1 || w2_hat != w2 {
            return Ok(TrialOutcome::WrongMessage);
        }
        let m1 = rng.random_range(1..=self.mac1.per_book());
        let m2 = rng.random_range(1..=self.mac2.per_book());
        let q1 = mac_encode(&self.mac1, w1_hat, m1)?;
        let q2 = mac_encode(&self.mac2, w2_hat, m2)?;
        let qh1 = self.system.imp1.sample(&q1, rng)?;
        let qh2 = self.system.imp2.sample(&q2, rng)?;
        let s = self.system.mac.sample(&qh1, &qh2, rng)?;
        Ok(match mac_decode(&self.mac1, &self.mac2, w1, w2, &s, &self.mac_decoder)? {
            (0, 0) => TrialOutcome::MacMiss,
            pair if pair == (m1, m2) => TrialOutcome::Success,
            _ => TrialOutcome::MacWrong,
        })
    }
}

/// Estimates broadcast, multiple-access and overall error rates over
/// `trials` transmissions of one random code.
pub fn estimate_discrete_error_rates(cfg: &DiscreteSimConfig, trials: u64, seed: RngSeed) -> Result<SimResult> {
    if trials < MIN_TRIALS {
        return Err(SimError::TooFewTrials(trials));
    }
    let code = DiscreteCode::build(cfg, seed)?;
    run_trials(trials, cfg.n, seed, |rng| code.run_trial(rng))
}
