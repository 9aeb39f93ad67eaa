use bcmac_core::channel::{induced_mac_joint, BccChannel, ImperfectionChannel, MacChannel};
use bcmac_core::channel_file::{parse_channel_file, write_channel_file, ChannelDocument, ChannelItem};
use bcmac_core::prob::{Pmf, Symbol};
use bcmac_core::rng::RngSeed;
use proptest::prelude::*;
use rand::Rng;

fn random_rows(rng: &mut impl Rng, rows: usize, cols: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        let w: Vec<f64> = (0..cols).map(|_| rng.random::<f64>() + 1e-3).collect();
        let t: f64 = w.iter().sum();
        out.extend(w.iter().map(|x| x / t));
    }
    out
}

fn random_pmf(rng: &mut impl Rng, size: usize) -> Pmf {
    Pmf::new(random_rows(rng, 1, size)).unwrap()
}

/// Sums `p(q1) p(q2) p(qh1|q1) p(qh2|q2) p(s|qh1,qh2)` over every five-tuple.
fn enumerate(p1: &Pmf, p2: &Pmf, imp1: &[f64], imp2: &[f64], mac: &[f64], dims: [usize; 5]) -> Vec<f64> {
    let [a1, a2, h1, h2, s] = dims;
    let mut out = vec![0.0; a1 * a2 * s];
    for q1 in 0..a1 {
        for q2 in 0..a2 {
            for qh1 in 0..h1 {
                for qh2 in 0..h2 {
                    for y in 0..s {
                        out[(q1 * a2 + q2) * s + y] += p1.get(q1)
                            * p2.get(q2)
                            * imp1[q1 * h1 + qh1]
                            * imp2[q2 * h2 + qh2]
                            * mac[(qh1 * h2 + qh2) * s + y];
                    }
                }
            }
        }
    }
    out
}

#[test]
fn bsc_imperfection_into_adder() {
    let uniform = Pmf::uniform(2).unwrap();
    let j = induced_mac_joint(
        &uniform,
        &uniform,
        &ImperfectionChannel::bsc(0.1).unwrap(),
        &ImperfectionChannel::identity(2).unwrap(),
        &MacChannel::binary_adder().unwrap(),
    )
    .unwrap();
    // Hand table: q1 is flipped with probability 0.1 before the adder.
    #[rustfmt::skip]
    let expected = [
        0.225, 0.025, 0.0,
        0.0, 0.225, 0.025,
        0.025, 0.225, 0.0,
        0.0, 0.025, 0.225,
    ];
    assert_eq!(j.dims(), &[2, 2, 3]);
    let l1: f64 = j.probs().iter().zip(expected).map(|(a, b)| (a - b).abs()).sum();
    assert!(l1 < 1e-12, "{:?}", j.probs());
}

#[test]
fn identity_imperfections_collapse() {
    let mut rng = RngSeed(3).stream(0, 0);
    let p1 = random_pmf(&mut rng, 3);
    let p2 = random_pmf(&mut rng, 2);
    let mac = MacChannel::new(3, 2, 4, random_rows(&mut rng, 6, 4)).unwrap();
    let j = induced_mac_joint(
        &p1,
        &p2,
        &ImperfectionChannel::identity(3).unwrap(),
        &ImperfectionChannel::identity(2).unwrap(),
        &mac,
    )
    .unwrap();
    for a in 0..3 {
        for b in 0..2 {
            for s in 0..4 {
                let direct = p1.get(a) * p2.get(b) * mac.prob(a, b, s);
                assert!((j.get(&[a, b, s]) - direct).abs() < 1e-15);
            }
        }
    }
}

#[test]
fn induced_joint_matches_enumeration_on_all_small_alphabets() {
    let mut rng = RngSeed(11).stream(0, 0);
    let mut cases = 0;
    for a1 in 1..=4 {
        for a2 in 1..=4 {
            for h1 in 1..=4 {
                for h2 in 1..=4 {
                    for s in 1..=4 {
                        let p1 = random_pmf(&mut rng, a1);
                        let p2 = random_pmf(&mut rng, a2);
                        let imp1 = random_rows(&mut rng, a1, h1);
                        let imp2 = random_rows(&mut rng, a2, h2);
                        let mac = random_rows(&mut rng, h1 * h2, s);
                        let j = induced_mac_joint(
                            &p1,
                            &p2,
                            &ImperfectionChannel::new(a1, h1, imp1.clone()).unwrap(),
                            &ImperfectionChannel::new(a2, h2, imp2.clone()).unwrap(),
                            &MacChannel::new(h1, h2, s, mac.clone()).unwrap(),
                        )
                        .unwrap();
                        let oracle = enumerate(&p1, &p2, &imp1, &imp2, &mac, [a1, a2, h1, h2, s]);
                        let l1: f64 = j.probs().iter().zip(&oracle).map(|(x, y)| (x - y).abs()).sum();
                        assert!(l1 < 1e-12, "dims {:?}: {l1}", [a1, a2, h1, h2, s]);
                        assert!((j.total_mass() - 1.0).abs() < 1e-12);
                        let q = j.marginalize(&[0, 1]).unwrap();
                        for x in 0..a1 {
                            for y in 0..a2 {
                                assert!((q.get(&[x, y]) - p1.get(x) * p2.get(y)).abs() < 1e-12);
                            }
                        }
                        cases += 1;
                    }
                }
            }
        }
    }
    assert_eq!(cases, 4usize.pow(5));
}

#[test]
fn mismatched_dimensions_are_rejected() {
    let u = Pmf::uniform(2).unwrap();
    let r = induced_mac_joint(
        &u,
        &u,
        &ImperfectionChannel::identity(3).unwrap(),
        &ImperfectionChannel::identity(2).unwrap(),
        &MacChannel::binary_adder().unwrap(),
    );
    assert!(r.is_err());
}

#[test]
fn bsc_pair_crossover_frequencies() {
    let ch = BccChannel::independent_bsc(0.05, 0.2).unwrap();
    let mut rng = RngSeed(8).stream(0, 1);
    let x: Vec<Symbol> = (0..100_000).map(|i| (i % 2) as Symbol).collect();
    let (y1, y2) = ch.sample(&x, &mut rng).unwrap();
    let f1 = x.iter().zip(&y1).filter(|(a, b)| a != b).count() as f64 / 1e5;
    let f2 = x.iter().zip(&y2).filter(|(a, b)| a != b).count() as f64 / 1e5;
    assert!((f1 - 0.05).abs() < 0.01);
    assert!((f2 - 0.2).abs() < 0.01);
    let (z1, _) = ch.sample(&x, &mut RngSeed(8).stream(0, 1)).unwrap();
    assert_eq!(y1, z1);
}

fn channel_docs() -> impl Strategy<Value = Vec<ChannelDocument>> {
    (1usize..4, 1usize..4, 1usize..4, any::<u64>()).prop_map(|(a, b, c, seed)| {
        let mut rng = RngSeed(seed).stream(0, 0);
        vec![
            ChannelDocument::new(ChannelItem::Bcc(BccChannel::new(a, b, c, random_rows(&mut rng, a, b * c)).unwrap())),
            ChannelDocument::new(ChannelItem::Imperfection {
                unit: Some(1),
                channel: ImperfectionChannel::new(a, b, random_rows(&mut rng, a, b)).unwrap(),
            }),
            ChannelDocument::new(ChannelItem::Mac(MacChannel::new(b, c, a, random_rows(&mut rng, b * c, a)).unwrap())),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn channel_files_round_trip(docs in channel_docs()) {
        let text = write_channel_file(&docs);
        let back = parse_channel_file(&text).unwrap();
        prop_assert_eq!(back.len(), docs.len());
        for (a, b) in docs.iter().zip(&back) {
            prop_assert_eq!(&a.alphabets, &b.alphabets);
            let (ta, tb) = match (&a.item, &b.item) {
                (ChannelItem::Bcc(x), ChannelItem::Bcc(y)) => (x.table().to_vec(), y.table().to_vec()),
                (ChannelItem::Mac(x), ChannelItem::Mac(y)) => (x.table().to_vec(), y.table().to_vec()),
                (
                    ChannelItem::Imperfection { channel: x, unit: u },
                    ChannelItem::Imperfection { channel: y, unit: v },
                ) => {
                    prop_assert_eq!(u, v);
                    (x.table().to_vec(), y.table().to_vec())
                }
                _ => return Err(TestCaseError::fail("kind changed")),
            };
            prop_assert_eq!(ta, tb);
        }
        prop_assert_eq!(write_channel_file(&back), text);
    }
}
