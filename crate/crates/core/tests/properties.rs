use ofdma_core::allocators::{joint_allocate, linear_allocate, rootfinding_allocate};
use ofdma_core::bitloading::{
    bits_for_power, greedy_bitload, power_for_bits, waterlevel_bitload, WaterLevelOptions,
};
use ofdma_core::oracle::{min_bitload_power, waterfill_by_subsets};
use ofdma_core::waterfill::{user_rate, waterfill};
use ofdma_core::{generate_channel, SystemConfig};
use proptest::prelude::*;

fn cnr_list(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((-3.0f64..3.0).prop_map(|e| 10f64.powf(e)), 1..=max_len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn waterfill_satisfies_kkt(cnr in cnr_list(12), budget in 0.0f64..50.0) {
        let sol = waterfill(&cnr, budget).unwrap();
        let total: f64 = sol.powers.iter().sum();
        prop_assert!((total - budget).abs() <= 1e-9 * budget.max(1.0));
        for (&p, &h) in sol.powers.iter().zip(&cnr) {
            prop_assert!(p >= 0.0);
            if p > 0.0 {
                prop_assert!((p + 1.0 / h - sol.water_level).abs() <= 1e-9 * sol.water_level);
            } else {
                prop_assert!(1.0 / h >= sol.water_level * (1.0 - 1e-12));
            }
        }
        prop_assert_eq!(sol.active_count, sol.powers.iter().filter(|&&p| p > 0.0).count());
    }

    #[test]
    fn waterfill_matches_subset_enumeration(cnr in cnr_list(6), budget in 0.0f64..10.0) {
        let sol = waterfill(&cnr, budget).unwrap();
        let ours: f64 = sol.powers.iter().zip(&cnr).map(|(p, h)| (1.0 + p * h).log2()).sum();
        let (_, best) = waterfill_by_subsets(&cnr, budget);
        prop_assert!((ours - best).abs() <= 1e-6);
    }

    #[test]
    fn waterfill_rate_grows_with_budget(cnr in cnr_list(10), a in 0.0f64..10.0, extra in 0.0f64..10.0) {
        let n = cnr.len();
        let lo = user_rate(&cnr, &waterfill(&cnr, a).unwrap().powers, n, 1.0).unwrap();
        let hi = user_rate(&cnr, &waterfill(&cnr, a + extra).unwrap().powers, n, 1.0).unwrap();
        prop_assert!(hi >= lo - 1e-12);
    }

    #[test]
    fn greedy_matches_exhaustive(
        gains in prop::collection::vec(0.05f64..5.0, 1..=4),
        cap in 1u32..=4,
        target in 0u32..=8,
        gap in 1.0f64..4.0,
    ) {
        let target = target.min(gains.len() as u32 * cap);
        let got = greedy_bitload(&gains, target, 0.3, gap, cap).unwrap();
        let best = min_bitload_power(&gains, target, 0.3, gap, cap).unwrap();
        prop_assert_eq!(got.total_bits(), target);
        prop_assert!((got.total_power() - best).abs() <= 1e-12 * best.max(1e-300));
    }

    #[test]
    fn waterlevel_respects_budget(
        gains in prop::collection::vec(0.01f64..10.0, 1..=32),
        budget in 0.01f64..100.0,
        cap in 1u32..=10,
    ) {
        match waterlevel_bitload(&gains, budget, 0.1, 3.3, cap, &WaterLevelOptions::default()) {
            Ok(r) => {
                prop_assert!(r.total_power() <= budget);
                prop_assert!(r.bits.iter().all(|&b| b <= cap));
            }
            Err(e) => prop_assert!(matches!(e, ofdma_core::Error::ConvergenceFailure(_))),
        }
    }

    #[test]
    fn power_bits_round_trip(b in 0u32..=12, gain in 1e-3f64..1e3, noise in 1e-3f64..10.0, gap in 1.0f64..10.0) {
        let p = power_for_bits(b, gain, noise, gap);
        let back = bits_for_power(p, gain, noise, gap).unwrap();
        prop_assert!((back - b as f64).abs() <= 1e-9);
    }

    #[test]
    fn allocators_produce_valid_results(
        k in 1usize..=5,
        extra in 0usize..=12,
        seed in any::<u64>(),
        ratios in prop::collection::vec(0.5f64..4.0, 5),
        power in 0.1f64..10.0,
    ) {
        let n = k + extra;
        let mut config = SystemConfig::new(k, n);
        config.rate_ratios = ratios[..k].to_vec();
        config.total_power = power;
        config.snr_gap = 3.3;
        let channel = generate_channel(&config, seed, n.min(4)).unwrap();
        for (name, result) in [
            ("rootfinding", rootfinding_allocate(&config, &channel).unwrap()),
            ("linear", linear_allocate(&config, &channel).unwrap()),
            ("joint", joint_allocate(&config, &channel).unwrap()),
        ] {
            prop_assert!(result.check(Some(power)).is_ok(), "{name}: {:?}", result.check(Some(power)));
            if name != "joint" {
                for u in 0..k {
                    let again = user_rate(channel.user_cnr(u), &result.power[u], n, 3.3).unwrap();
                    prop_assert!((again - result.rates[u]).abs() <= 1e-9, "{name} user {u}");
                }
            }
        }
    }
}
