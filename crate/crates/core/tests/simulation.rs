use bcmac_core::channel::{BccChannel, DiscreteSystem, GaussianSystem, ImperfectionChannel, MacChannel};
use bcmac_core::prob::{JointPmf, Pmf, Symbol};
use bcmac_core::region::{DiscreteWitness, RateQuadruple};
use bcmac_core::rng::RngSeed;
use bcmac_core::sim::{
    estimate_discrete_error_rates, estimate_gaussian_error_rates, gaussian_typicality, mac_decode, mac_encode,
    Decoder, DiscreteBccCodebook, DiscreteSimConfig, EncodeOutcome, GaussianSimConfig,
    GaussianSuperpositionCodebook, MacDecoder, NestedMacCodebook, SimError,
};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::LN_2;

/// Four-letter input carrying `(u, v)`, read noiselessly as `u` by unit 1
/// and `v` by unit 2.
fn split_bcc() -> BccChannel {
    BccChannel::from_branches(
        4,
        2,
        &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0],
        2,
        &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0],
    )
    .unwrap()
}

fn split_witness() -> JointPmf {
    let mut p = vec![0.0; 16];
    for u in 0..2 {
        for v in 0..2 {
            p[(u * 2 + v) * 4 + u * 2 + v] = 0.25;
        }
    }
    JointPmf::new(vec![2, 2, 4], p).unwrap()
}

/// The cascade used for the achievability runs: two BSC(0.05) branches,
/// identity imperfections and an XOR MAC whose output is erased with
/// probability `erasure`.
fn erasure_system(erasure: f64) -> DiscreteSystem {
    DiscreteSystem::new(
        BccChannel::independent_bsc(0.05, 0.05).unwrap(),
        ImperfectionChannel::identity(2).unwrap(),
        ImperfectionChannel::identity(2).unwrap(),
        MacChannel::xor_with_erasure(erasure).unwrap(),
    )
    .unwrap()
}

/// U, V independent uniform bits; X equals U or V with probability
/// `gamma` each, otherwise a fair coin.
fn mixing_witness(gamma: f64) -> DiscreteWitness {
    let mut p = vec![0.0; 8];
    for u in 0..2 {
        for v in 0..2 {
            let base = (u * 2 + v) * 2;
            p[base + u] += 0.25 * gamma;
            p[base + v] += 0.25 * gamma;
            p[base] += 0.125 * (1.0 - 2.0 * gamma);
            p[base + 1] += 0.125 * (1.0 - 2.0 * gamma);
        }
    }
    DiscreteWitness {
        p_uvx: JointPmf::new(vec![2, 2, 2], p).unwrap(),
        p_q1: Pmf::uniform(2).unwrap(),
        p_q2: Pmf::uniform(2).unwrap(),
    }
}

fn small_config(erasure: f64, n: usize) -> DiscreteSimConfig {
    let system = erasure_system(erasure);
    let witness = mixing_witness(0.38);
    let bounds = witness.bounds(&system).unwrap();
    DiscreteSimConfig {
        rates: bounds.scaled_point(0.7),
        epsilon_bcc: 0.299 * bounds.id1,
        epsilon_mac: 0.15,
        system,
        witness,
        n,
        decoder: Decoder::Typicality,
    }
}

#[test]
fn noiseless_branches_decode_their_messages() {
    let rate = 0.7 * LN_2;
    let cb = DiscreteBccCodebook::build(&split_witness(), &split_bcc(), rate, rate, 20, 0.2, RngSeed(2)).unwrap();
    let (m1, m2) = cb.message_counts();
    assert!(m1 > 1000 && m2 > 1000);
    let mut rng = RngSeed(2).trial(0);
    let trials = 1000;
    let (mut ok1, mut ok2, mut stray) = (0, 0, 0);
    for _ in 0..trials {
        let (w1, w2) = (rng.random_range(1..=m1), rng.random_range(1..=m2));
        let EncodeOutcome::Codeword(x) = cb.encode(w1, w2).unwrap() else {
            panic!("noiseless uniform code must encode");
        };
        let y1: Vec<Symbol> = x.iter().map(|&s| s / 2).collect();
        let y2: Vec<Symbol> = x.iter().map(|&s| s % 2).collect();
        ok1 += usize::from(cb.decode(1, &y1).unwrap() == w1);
        ok2 += usize::from(cb.decode(2, &y2).unwrap() == w2);
        let noise: Vec<Symbol> = (0..20).map(|_| rng.random_range(0..2)).collect();
        stray += usize::from(cb.decode(1, &noise).unwrap() == w1);
    }
    assert!(ok1 as f64 >= 0.95 * trials as f64, "{ok1}");
    assert!(ok2 as f64 >= 0.95 * trials as f64, "{ok2}");
    assert!(stray as f64 <= 0.01 * trials as f64, "{stray}");
}

#[test]
fn zero_identification_rates_use_single_cells() {
    let cfg = small_config(0.9, 64);
    let cb = DiscreteBccCodebook::build(&cfg.witness.p_uvx, &cfg.system.bcc, 0.0, 0.0, 64, 0.03, RngSeed(1)).unwrap();
    assert_eq!(cb.message_counts(), (1, 1));
    let (s1, _) = cb.list_sizes();
    assert_eq!(cb.cell_range(1, 1).unwrap(), 0..s1);
}

#[test]
fn nested_books_are_independent_and_match_the_input_law() {
    let p = Pmf::bernoulli(0.3).unwrap();
    let cb = NestedMacCodebook::build(1, &p, 0.1, 1000, 64, RngSeed(6)).unwrap();
    let first: Vec<&[Symbol]> = (1..=1000).map(|w| cb.codeword(w, 1).unwrap()).collect();
    let mut sorted = first.clone();
    sorted.sort();
    sorted.dedup();
    assert_eq!(sorted.len(), 1000);
    let ones: usize = (1..=200).flat_map(|w| cb.book(w).unwrap().iter()).filter(|&&s| s == 1).count();
    let total = 200 * cb.per_book() * 64;
    let freq = ones as f64 / total as f64;
    let sigma = (0.3 * 0.7 / total as f64).sqrt();
    assert!((freq - 0.3).abs() < 3.0 * sigma, "{freq}");
    assert_eq!(mac_encode(&cb, 3, 2).unwrap(), cb.codeword(3, 2).unwrap());
    assert_eq!(mac_encode(&cb, 0, 1), Err(SimError::MissTypedUnit));
    assert!(mac_encode(&cb, 1, cb.per_book() + 1).is_err());
}

#[test]
fn noiseless_mac_recovers_distinct_codewords() {
    let u = Pmf::uniform(2).unwrap();
    let rate = 0.7 * LN_2;
    let n = 12;
    let cb1 = NestedMacCodebook::build(1, &u, rate, 4, n, RngSeed(3)).unwrap();
    let cb2 = NestedMacCodebook::build(2, &u, rate, 4, n, RngSeed(3)).unwrap();
    let mac = MacChannel::deterministic(2, 2, 4, |a, b| a * 2 + b).unwrap();
    let identity = ImperfectionChannel::identity(2).unwrap();
    let joint = bcmac_core::channel::induced_mac_joint(&u, &u, &identity, &identity, &mac).unwrap();
    let dec = MacDecoder::new(&joint, 0.1, Decoder::Typicality).unwrap();
    let mut rng = RngSeed(3).trial(9);
    let (mut distinct, mut correct, mut unrelated_hits) = (0, 0, 0);
    for _ in 0..300 {
        let w = rng.random_range(1..=4);
        let m1 = rng.random_range(1..=cb1.per_book());
        let m2 = rng.random_range(1..=cb2.per_book());
        let q1 = cb1.codeword(w, m1).unwrap();
        let q2 = cb2.codeword(w, m2).unwrap();
        let unique = |cb: &NestedMacCodebook, m: usize, q: &[Symbol]| {
            (1..=cb.per_book()).all(|k| k == m || cb.codeword(w, k).unwrap() != q)
        };
        let s: Vec<Symbol> = q1.iter().zip(q2).map(|(a, b)| a * 2 + b).collect();
        let got = mac_decode(&cb1, &cb2, w, w, &s, &dec).unwrap();
        if unique(&cb1, m1, q1) && unique(&cb2, m2, q2) {
            distinct += 1;
            correct += usize::from(got == (m1, m2));
        }
        let noise: Vec<Symbol> = (0..n).map(|_| rng.random_range(0..4)).collect();
        unrelated_hits += usize::from(mac_decode(&cb1, &cb2, w, w, &noise, &dec).unwrap() == (m1, m2));
    }
    assert!(distinct > 200);
    assert!(correct as f64 >= 0.95 * distinct as f64, "{correct}/{distinct}");
    assert!(unrelated_hits <= 3);
}

#[test]
fn single_candidate_pair() {
    let u = Pmf::uniform(2).unwrap();
    let cb1 = NestedMacCodebook::build(1, &u, 0.0, 1, 32, RngSeed(5)).unwrap();
    let cb2 = NestedMacCodebook::build(2, &u, 0.0, 1, 32, RngSeed(5)).unwrap();
    let sys = erasure_system(0.0);
    let joint = bcmac_core::channel::induced_mac_joint(&u, &u, &sys.imp1, &sys.imp2, &sys.mac).unwrap();
    let dec = MacDecoder::new(&joint, 0.3, Decoder::Typicality).unwrap();
    let s: Vec<Symbol> = cb1
        .codeword(1, 1)
        .unwrap()
        .iter()
        .zip(cb2.codeword(1, 1).unwrap())
        .map(|(a, b)| a ^ b)
        .collect();
    assert_eq!(mac_decode(&cb1, &cb2, 1, 1, &s, &dec).unwrap(), (1, 1));
}

#[test]
fn discrete_runs_are_deterministic_and_compose() {
    let cfg = small_config(0.9, 64);
    let a = estimate_discrete_error_rates(&cfg, 300, RngSeed(77)).unwrap();
    let b = estimate_discrete_error_rates(&cfg, 300, RngSeed(77)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.counts.overall_errors(), a.counts.bcc_errors() + a.counts.mac_errors());
    assert!((a.lambda_overall.value - a.lambda_composed).abs() < 1e-12);
    assert!(a.composition_within(3.0));
    let c = estimate_discrete_error_rates(&cfg, 300, RngSeed(78)).unwrap();
    assert_ne!(a.counts, c.counts);
    assert!(estimate_discrete_error_rates(&cfg, 0, RngSeed(1)).is_err());
}

#[test]
fn more_erasures_do_not_help() {
    let trials = 400;
    let mut last: Option<bcmac_core::sim::Estimate> = None;
    for erasure in [0.8, 0.9, 0.97] {
        let mut cfg = small_config(0.9, 64);
        cfg.system = erasure_system(erasure);
        let r = estimate_discrete_error_rates(&cfg, trials, RngSeed(12)).unwrap();
        if let Some(prev) = last {
            assert!(r.lambda_overall.hi >= prev.lo, "erasure {erasure}: {:?} vs {:?}", r.lambda_overall, prev);
        }
        last = Some(r.lambda_overall);
    }
}

#[test]
fn gaussian_typicality_accepts_reference_draws() {
    let mut rng = RngSeed(21).trial(0);
    let (sx, nz): (f64, f64) = (2.0, 1.0);
    let cov = [sx, sx, sx, sx + nz];
    let x_law = Normal::new(0.0, sx.sqrt()).unwrap();
    let z_law = Normal::new(0.0, nz).unwrap();
    let samples = 2000;
    let mut accepted = 0;
    let mut unrelated = 0;
    for _ in 0..samples {
        let x: Vec<f64> = (0..256).map(|_| x_law.sample(&mut rng)).collect();
        let y: Vec<f64> = x.iter().map(|v| v + z_law.sample(&mut rng)).collect();
        accepted += usize::from(gaussian_typicality(&[&x, &y], &cov, 0.2).unwrap());
        let other: Vec<f64> = (0..256).map(|_| x_law.sample(&mut rng)).collect();
        unrelated += usize::from(gaussian_typicality(&[&other, &y], &cov, 0.2).unwrap());
    }
    assert!(accepted as f64 >= 0.9 * samples as f64, "{accepted}");
    assert!(unrelated as f64 <= 0.01 * samples as f64, "{unrelated}");
    let zeros = vec![0.0; 64];
    assert!(!gaussian_typicality(&[&zeros], &[1.0], 0.2).unwrap());
    assert!(gaussian_typicality(&[&zeros, &zeros[..10]], &cov, 0.2).is_err());
}

#[test]
fn gaussian_codebook_variances() {
    let sys = GaussianSystem::new(10.0, 1.0, 2.0, 5.0, 0.9, 0.9).unwrap();
    let cb = GaussianSuperpositionCodebook::build(&sys, 0.4, 0.03, 0.03, 256, 0.2, RngSeed(4)).unwrap();
    let (m1, m2) = cb.message_counts();
    let (v1, v2) = cb.variances();
    assert!((v1 - (4.0 - 0.1)).abs() < 1e-12);
    assert!((v2 - (6.0 - 0.1)).abs() < 1e-12);
    for (unit, m, v) in [(1u8, m1, v1), (2, m2, v2)] {
        assert!(m * 256 >= 10_000);
        let (sum, count) = (1..=m).fold((0.0, 0usize), |(s, c), w| {
            let cw = cb.codeword(unit, w).unwrap();
            (s + cw.iter().map(|x| x * x).sum::<f64>(), c + cw.len())
        });
        let emp = sum / count as f64;
        assert!((emp / v - 1.0).abs() < 0.05, "unit {unit}: {emp} vs {v}");
    }
}

#[test]
fn gaussian_runs_are_deterministic_and_compose() {
    let cfg = GaussianSimConfig {
        system: GaussianSystem::new(4.0, 0.5, 1.0, 1.0, 0.9, 0.9).unwrap(),
        alpha: 0.5,
        rates: RateQuadruple::new(0.02, 0.02, 0.02, 0.02).unwrap(),
        n: 128,
        epsilon: 0.2,
        decoder: Decoder::Typicality,
    };
    let a = estimate_gaussian_error_rates(&cfg, 200, RngSeed(5)).unwrap();
    let b = estimate_gaussian_error_rates(&cfg, 200, RngSeed(5)).unwrap();
    assert_eq!(a, b);
    assert!(a.composition_within(3.0));
}

#[test]
fn unit_one_recovers_unit_two_message_when_unit_two_does() {
    // Unit 1 sees less noise, so its first decoding stage should succeed at
    // least as often as unit 2's decoder.
    let sys = GaussianSystem::new(4.0, 0.3, 1.5, 1.0, 0.9, 0.9).unwrap();
    let cb = GaussianSuperpositionCodebook::build(&sys, 0.3, 0.05, 0.05, 128, 0.2, RngSeed(10)).unwrap();
    let (m1, m2) = cb.message_counts();
    let mut rng = RngSeed(10).trial(3);
    let trials = 300;
    let (mut at1, mut at2) = (0, 0);
    for _ in 0..trials {
        let (w1, w2) = (rng.random_range(1..=m1), rng.random_range(1..=m2));
        let enc = cb.encode(w1, w2).unwrap();
        let (y1, y2) = sys.broadcast(&enc.x, &mut rng);
        at2 += usize::from(cb.decode_unit2(&y2, 0.2, Decoder::Typicality).unwrap() == w2);
        at1 += usize::from(cb.decode_unit1(&y1, 0.2, Decoder::Typicality).unwrap().1 == w2);
    }
    let p1 = at1 as f64 / trials as f64;
    let p2 = at2 as f64 / trials as f64;
    let sigma = ((p1 * (1.0 - p1) + p2 * (1.0 - p2)) / trials as f64).sqrt().max(1.0 / trials as f64);
    assert!(p1 >= p2 - 3.0 * sigma, "{p1} vs {p2}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn cell_lookup_round_trips(seed in any::<u64>(), r in 0.0f64..0.04) {
        let cfg = small_config(0.9, 64);
        let eps = 0.01;
        let cb = DiscreteBccCodebook::build(&cfg.witness.p_uvx, &cfg.system.bcc, r, r, 64, eps, RngSeed(seed));
        let cb = match cb {
            Ok(cb) => cb,
            Err(e) => {
                prop_assert!(e.is_infeasible());
                return Ok(());
            }
        };
        let (m1, _) = cb.message_counts();
        let (s1, _) = cb.list_sizes();
        let mut next = 0;
        for w in 1..=m1 {
            let range = cb.cell_range(1, w).unwrap();
            prop_assert_eq!(range.start, next);
            for k in range.clone() {
                prop_assert_eq!(cb.cell_of(1, k).unwrap(), w);
            }
            next = range.end;
        }
        prop_assert_eq!(next, s1);
    }
}
