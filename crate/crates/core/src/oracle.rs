//! Brute-force references for small instances.
//!
//! Nothing here calls into the production allocators' search logic: the
//! water-filling reference enumerates active sets, bit loads are enumerated
//! exhaustively, assignments are enumerated over all count-respecting
//! owner vectors and proportional budgets are found by nested bisection on
//! directly evaluated rates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::allocators::rootfinding_allocate;
use crate::bitloading::greedy_bitload;
use crate::error::Result;
use crate::proposed::{average_gains, determine_counts, proposed_allocate};
use crate::system::{generate_channel, ChannelRealization, SystemConfig};
use crate::waterfill::waterfill;

/// Best objective `Σ log2(1 + p H)` over all active sets whose equal-level
/// solution is non-negative. Returns the powers and the objective.
pub fn waterfill_by_subsets(cnr: &[f64], budget: f64) -> (Vec<f64>, f64) {
    let m = cnr.len();
    let mut best = (vec![0.0; m], 0.0);
    for mask in 1u32..(1 << m) {
        let members: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let inv_sum: f64 = members.iter().map(|&i| 1.0 / cnr[i]).sum();
        let level = (budget + inv_sum) / members.len() as f64;
        let mut powers = vec![0.0; m];
        let mut feasible = true;
        for &i in &members {
            let p = level - 1.0 / cnr[i];
            if p < 0.0 {
                feasible = false;
                break;
            }
            powers[i] = p;
        }
        if !feasible {
            continue;
        }
        let objective: f64 = powers
            .iter()
            .zip(cnr)
            .map(|(p, h)| (1.0 + p * h).log2())
            .sum();
        if objective > best.1 {
            best = (powers, objective);
        }
    }
    best
}

fn bit_vectors(m: usize, total: u32, cap: u32, prefix: &mut Vec<u32>, out: &mut dyn FnMut(&[u32])) {
    if prefix.len() == m {
        if total == 0 {
            out(prefix);
        }
        return;
    }
    let slots_left = (m - prefix.len() - 1) as u32;
    for b in 0..=cap.min(total) {
        if total - b > slots_left * cap {
            continue;
        }
        prefix.push(b);
        bit_vectors(m, total - b, cap, prefix, out);
        prefix.pop();
    }
}

/// Minimum of `Σ (σ²Γ/g_m)(2^{b_m} − 1)` over all integer bit vectors with
/// `Σ b = target`, `b_m <= max_bits`. `None` when no vector exists.
pub fn min_bitload_power(
    gains: &[f64],
    target: u32,
    noise_power: f64,
    gap: f64,
    max_bits: u32,
) -> Option<f64> {
    let mut best: Option<f64> = None;
    bit_vectors(gains.len(), target, max_bits, &mut Vec::new(), &mut |bits| {
        let mut total = 0.0;
        for (&b, &g) in bits.iter().zip(gains) {
            if b > 0 {
                total += noise_power * gap / g * ((1u64 << b) as f64 - 1.0);
            }
        }
        if best.is_none_or(|v| total < v) {
            best = Some(total);
        }
    });
    best
}

/// Minimum total power over every assignment in which user `k` holds
/// exactly `totals[k]` subcarriers, each user loaded optimally.
pub fn min_assignment_power(
    config: &SystemConfig,
    channel: &ChannelRealization,
    totals: &[usize],
) -> Option<f64> {
    fn walk(
        n: usize,
        owners: &mut Vec<usize>,
        left: &mut [usize],
        visit: &mut dyn FnMut(&[usize]),
    ) {
        if owners.len() == n {
            visit(owners);
            return;
        }
        for k in 0..left.len() {
            if left[k] > 0 {
                left[k] -= 1;
                owners.push(k);
                walk(n, owners, left, visit);
                owners.pop();
                left[k] += 1;
            }
        }
    }

    let n = config.num_subcarriers;
    let mut left = totals.to_vec();
    let mut best: Option<f64> = None;
    walk(n, &mut Vec::new(), &mut left, &mut |owners| {
        let mut total = 0.0;
        for k in 0..config.num_users {
            let gains: Vec<f64> = (0..n)
                .filter(|&i| owners[i] == k)
                .map(|i| channel.power_gain(k, i))
                .collect();
            match min_bitload_power(
                &gains,
                config.rate_targets[k],
                channel.noise_power(),
                config.snr_gap,
                config.max_bits_per_subcarrier,
            ) {
                Some(p) => total += p,
                None => return,
            }
        }
        if best.is_none_or(|b| total < b) {
            best = Some(total);
        }
    });
    best
}

/// Rate `Σ log2(1 + p H)` of water-filling `budget` over `cnr`.
fn log_rate(cnr: &[f64], budget: f64) -> f64 {
    let powers = waterfill(cnr, budget).expect("positive CNR").powers;
    powers
        .iter()
        .zip(cnr)
        .map(|(p, h)| (1.0 + p * h).log2())
        .sum()
}

fn bisect(mut lo: f64, mut hi: f64, tol: f64, too_high: impl Fn(f64) -> bool) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if too_high(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Per-user budgets with water-filled rates in ratio `ratios`, summing to
/// `total_power`, by nested bisection. `cnr[k]` is user `k`'s own
/// (gap-adjusted) CNR list.
pub fn proportional_budgets_bisection(cnr: &[Vec<f64>], ratios: &[f64], total_power: f64) -> Vec<f64> {
    let tol = 1e-13 * total_power;
    let budgets_for = |p1: f64| -> Vec<f64> {
        let anchor = log_rate(&cnr[0], p1) / ratios[0];
        let mut out = vec![p1];
        for k in 1..cnr.len() {
            let target = anchor * ratios[k];
            let mut hi = total_power.max(1e-300);
            while log_rate(&cnr[k], hi) < target {
                hi *= 2.0;
            }
            out.push(bisect(0.0, hi, tol, |p| log_rate(&cnr[k], p) >= target));
        }
        out
    };
    let p1 = bisect(0.0, total_power, tol, |p| {
        budgets_for(p).iter().sum::<f64>() > total_power
    });
    budgets_for(p1)
}

/// Outcome of one family of brute-force comparisons.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub name: &'static str,
    pub instances: usize,
    pub failures: usize,
    pub worst: f64,
}

impl OracleCheck {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Runs every small-instance comparison with instances drawn from `seed`.
pub fn run_oracle_checks(seed: u64, instances: usize) -> Result<Vec<OracleCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();

    // water-filling against active-set enumeration
    let mut wf = OracleCheck {
        name: "waterfill_vs_subsets",
        instances,
        failures: 0,
        worst: 0.0,
    };
    for _ in 0..instances {
        let m = rng.random_range(1..=5);
        let cnr: Vec<f64> = (0..m).map(|_| 10f64.powf(rng.random_range(-2.0..2.0))).collect();
        let budget = rng.random_range(0.0..5.0);
        let got = waterfill(&cnr, budget)?;
        let objective: f64 = got
            .powers
            .iter()
            .zip(&cnr)
            .map(|(p, h)| (1.0 + p * h).log2())
            .sum();
        let err = (objective - waterfill_by_subsets(&cnr, budget).1).abs();
        wf.worst = wf.worst.max(err);
        if err > 1e-6 {
            wf.failures += 1;
        }
    }
    checks.push(wf);

    // greedy bit loading against exhaustive enumeration
    let mut greedy = OracleCheck {
        name: "greedy_bitload_vs_exhaustive",
        instances,
        failures: 0,
        worst: 0.0,
    };
    for _ in 0..instances {
        let m = rng.random_range(1..=4);
        let cap = rng.random_range(1..=4);
        let target = rng.random_range(0..=(m as u32 * cap).min(8));
        let gains: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..4.0)).collect();
        let got = greedy_bitload(&gains, target, 0.1, 2.0, cap)?.total_power();
        let best = min_bitload_power(&gains, target, 0.1, 2.0, cap).expect("feasible");
        let err = (got - best).abs() / best.max(1e-300);
        greedy.worst = greedy.worst.max(err);
        if err > 1e-12 {
            greedy.failures += 1;
        }
    }
    checks.push(greedy);

    // proposed allocator against exhaustive assignments (K=2, N<=4, b_max<=2)
    let mut prop = OracleCheck {
        name: "proposed_within_10pct_of_exhaustive",
        instances,
        failures: 0,
        worst: 0.0,
    };
    for i in 0..instances {
        let n = rng.random_range(2..=4);
        let cap = rng.random_range(1..=2);
        let mut config = SystemConfig::new(2, n);
        config.max_bits_per_subcarrier = cap;
        loop {
            let t = [rng.random_range(0..=(n as u32 * cap)), rng.random_range(0..=(n as u32 * cap))];
            if t.iter().map(|r| r.div_ceil(cap) as usize).sum::<usize>() <= n {
                config.rate_targets = t.to_vec();
                break;
            }
        }
        let channel = generate_channel(&config, seed.wrapping_add(i as u64), n.min(3))?;
        let got = proposed_allocate(&config, &channel)?.total_power_used;
        let totals = determine_counts(&config, &average_gains(&channel))?.total();
        let best = min_assignment_power(&config, &channel, &totals).expect("feasible");
        let excess = if best > 0.0 { got / best - 1.0 } else { got };
        prop.worst = prop.worst.max(excess);
        if excess > 0.10 {
            prop.failures += 1;
        }
    }
    checks.push(prop);

    // root-finding power split against nested bisection
    let mut root = OracleCheck {
        name: "rootfinding_vs_nested_bisection",
        instances,
        failures: 0,
        worst: 0.0,
    };
    for i in 0..instances {
        let k = rng.random_range(2..=4);
        let n = rng.random_range(k..=8);
        let mut config = SystemConfig::new(k, n);
        config.total_power = rng.random_range(0.5..20.0);
        config.rate_ratios = (0..k).map(|_| rng.random_range(0.5..4.0)).collect();
        let channel = generate_channel(&config, seed.wrapping_add(1_000 + i as u64), n.min(4))?;
        let got = rootfinding_allocate(&config, &channel)?;
        let cnr: Vec<Vec<f64>> = (0..k)
            .map(|u| {
                got.assignment
                    .subcarriers_of(u)
                    .iter()
                    .map(|&s| channel.cnr()[u][s])
                    .collect()
            })
            .collect();
        let reference = proportional_budgets_bisection(&cnr, &config.rate_ratios, config.total_power);
        let err = (0..k)
            .map(|u| (got.power[u].iter().sum::<f64>() - reference[u]).abs() / config.total_power)
            .fold(0.0, f64::max);
        root.worst = root.worst.max(err);
        if err > 1e-6 {
            root.failures += 1;
        }
    }
    checks.push(root);

    Ok(checks)
}
