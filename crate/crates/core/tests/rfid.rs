use bcmac_core::channel::{BccChannel, DiscreteSystem, GaussianSystem, ImperfectionChannel, MacChannel};
use bcmac_core::prob::{JointPmf, Pmf};
use bcmac_core::region::{gaussian_frontier, DiscreteWitness};
use bcmac_core::rfid::{max_tag_count, tdma_limit_report, universal_limit_report, FrontierSlice};
use proptest::prelude::*;

#[test]
fn xor_tdma_is_below_the_joint_sum_bound() {
    let sys = DiscreteSystem::new(
        BccChannel::independent_bsc(0.1, 0.1).unwrap(),
        ImperfectionChannel::identity(2).unwrap(),
        ImperfectionChannel::identity(2).unwrap(),
        MacChannel::binary_xor().unwrap(),
    )
    .unwrap();
    let witness = DiscreteWitness {
        p_uvx: JointPmf::new(vec![2, 2, 2], vec![0.2, 0.05, 0.05, 0.2, 0.2, 0.05, 0.05, 0.2]).unwrap(),
        p_q1: Pmf::uniform(2).unwrap(),
        p_q2: Pmf::bernoulli(0.3).unwrap(),
    };
    let bounds = witness.bounds(&sys).unwrap();
    let slice = FrontierSlice::from(bounds);
    let t = tdma_limit_report(&[slice], 32).unwrap();
    assert!(t.tdma_uplink_rate <= bounds.data_sum);
    let u = universal_limit_report(&[slice], 32).unwrap();
    assert!((u.universal_uplink_sum_rate - bounds.data_sum.min(bounds.data1 + bounds.data2)).abs() < 1e-15);
}

fn slices() -> impl Strategy<Value = Vec<FrontierSlice>> {
    prop::collection::vec(prop::array::uniform6(0.0f64..2.0), 1..8).prop_map(|rows| {
        rows.into_iter()
            .map(|r| FrontierSlice {
                id1: r[0],
                id2: r[1],
                id_sum: r[2],
                data1: r[3],
                data2: r[4],
                data_sum: r[5],
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn universal_dominates_tdma_on_gaussian_systems(
        p in 0.1f64..50.0, n1 in 0.1f64..5.0, gap in 0.01f64..5.0, n3 in 0.1f64..10.0,
        a1 in 0.0f64..0.999, a2 in 0.0f64..0.999, grid in 2usize..40,
    ) {
        let sys = GaussianSystem::new(p, n1, n1 + gap, n3, a1, a2).unwrap();
        let frontier: Vec<FrontierSlice> = gaussian_frontier(&sys, grid).unwrap().iter().map(FrontierSlice::from).collect();
        let t = tdma_limit_report(&frontier, 64).unwrap();
        let u = universal_limit_report(&frontier, 64).unwrap();
        prop_assert!(u.universal_uplink_sum_rate >= t.tdma_uplink_rate);
    }

    #[test]
    fn universal_dominates_tdma_on_any_frontier(frontier in slices(), n in 1usize..512) {
        let t = tdma_limit_report(&frontier, n).unwrap();
        let u = universal_limit_report(&frontier, n).unwrap();
        prop_assert!(u.universal_uplink_sum_rate >= t.tdma_uplink_rate);
        prop_assert!(t.max_tags >= 1 && u.max_tags >= 1);
    }

    #[test]
    fn tag_count_is_monotone(r in 0.0f64..3.0, dr in 0.0f64..1.0, n in 1usize..64, dn in 0usize..16) {
        let base = max_tag_count(r, n).unwrap();
        prop_assert!(max_tag_count(r + dr, n).unwrap() >= base);
        prop_assert!(max_tag_count(r, n + dn).unwrap() >= base);
    }
}
