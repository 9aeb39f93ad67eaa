//! Bit-packed one-hot sequences.
//!
//! A sequence over an alphabet of size `A` is stored as `A` bitsets, one per
//! letter. The joint type of two or three sequences is then a handful of
//! popcounts, and any per-letter log-probability sum is a dot product of
//! that type with a small table.

use crate::prob::Symbol;

pub(crate) fn words_for(n: usize) -> usize {
    n.div_ceil(64)
}

/// Appends the `alphabet * words` bitsets of `seq` to `out`.
pub(crate) fn pack_into(seq: &[Symbol], alphabet: usize, out: &mut Vec<u64>) {
    let words = words_for(seq.len());
    let start = out.len();
    out.resize(start + alphabet * words, 0);
    for (j, &s) in seq.iter().enumerate() {
        out[start + s as usize * words + j / 64] |= 1u64 << (j % 64);
    }
}

pub(crate) fn pack(seq: &[Symbol], alphabet: usize) -> Vec<u64> {
    let mut out = Vec::new();
    pack_into(seq, alphabet, &mut out);
    out
}

#[inline]
fn and_count(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x & y).count_ones()).sum()
}

#[inline]
fn and3_count(a: &[u64], b: &[u64], c: &[u64]) -> u32 {
    a.iter()
        .zip(b)
        .zip(c)
        .map(|((x, y), z)| (x & y & z).count_ones())
        .sum()
}

/// `sum_j lp[x_j * ay + y_j]`, or `-inf` if a letter pair of
/// probability zero occurs.
pub(crate) fn pair_log_sum(x: &[u64], ax: usize, y: &[u64], ay: usize, words: usize, lp: &[f64]) -> f64 {
    let mut total = 0.0;
    for a in 0..ax {
        let xa = &x[a * words..(a + 1) * words];
        for b in 0..ay {
            let c = and_count(xa, &y[b * words..(b + 1) * words]);
            if c > 0 {
                let l = lp[a * ay + b];
                if l == f64::NEG_INFINITY {
                    return l;
                }
                total += c as f64 * l;
            }
        }
    }
    total
}

/// Three-sequence analogue of [`pair_log_sum`], table indexed
/// `[(x * ay + y) * az + z]`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn triple_log_sum(
    x: &[u64],
    ax: usize,
    y: &[u64],
    ay: usize,
    z: &[u64],
    az: usize,
    words: usize,
    lp: &[f64],
) -> f64 {
    let mut total = 0.0;
    for a in 0..ax {
        let xa = &x[a * words..(a + 1) * words];
        for b in 0..ay {
            let yb = &y[b * words..(b + 1) * words];
            for c in 0..az {
                let k = and3_count(xa, yb, &z[c * words..(c + 1) * words]);
                if k > 0 {
                    let l = lp[(a * ay + b) * az + c];
                    if l == f64::NEG_INFINITY {
                        return l;
                    }
                    total += k as f64 * l;
                }
            }
        }
    }
    total
}
