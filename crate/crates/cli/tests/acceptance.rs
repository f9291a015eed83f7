//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use num_rational::Ratio;
use ofdma_core::bitloading::{
    bits_for_power, greedy_bitload, power_for_bits, waterlevel_bitload, WaterLevelOptions,
};
use ofdma_core::oracle::{min_assignment_power, min_bitload_power, waterfill_by_subsets};
use ofdma_core::params::{derive_params, PrimitiveParams};
use ofdma_core::proposed::{average_gains, determine_counts, initial_only_allocate, proposed_allocate};
use ofdma_core::sim::{run_capacity_sweep, run_fairness_experiment, ExperimentSpec, Method};
use ofdma_core::waterfill::waterfill;
use ofdma_core::{generate_channel, SystemConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut out = f();
    let elapsed = start.elapsed();
    if elapsed > limit {
        out.passed = false;
    }
    out.detail = format!("{}; {:.2?} (limit {:?})", out.detail, elapsed, limit);
    out
}

fn waterfill_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut worst_obj, mut kkt_failures) = (0.0f64, 0);
    for _ in 0..1000 {
        let m = rng.random_range(1..=5);
        let cnr: Vec<f64> = (0..m).map(|_| 10f64.powf(rng.random_range(-2.0..2.0))).collect();
        let budget = rng.random_range(0.0..10.0);
        let sol = waterfill(&cnr, budget).expect("valid instance");
        let objective: f64 = sol.powers.iter().zip(&cnr).map(|(p, h)| (1.0 + p * h).log2()).sum();
        worst_obj = worst_obj.max((objective - waterfill_by_subsets(&cnr, budget).1).abs());

        let total: f64 = sol.powers.iter().sum();
        let mu = sol.water_level;
        let kkt = (total - budget).abs() <= 1e-9 * budget.max(1.0)
            && sol.powers.iter().zip(&cnr).all(|(&p, &h)| {
                p >= 0.0
                    && if p > 0.0 {
                        (p + 1.0 / h - mu).abs() <= 1e-9 * mu
                    } else {
                        1.0 / h >= mu * (1.0 - 1e-12)
                    }
            });
        if !kkt {
            kkt_failures += 1;
        }
    }
    outcome(
        worst_obj <= 1e-6 && kkt_failures == 0,
        format!("1000 instances, worst objective gap {worst_obj:.1e}, KKT violations {kkt_failures}"),
    )
}

fn greedy_exactness() -> Outcome {
    // dyadic gains keep every per-bit cost exactly representable
    let grid = [0.25, 0.5, 1.0, 2.0];
    let (mut instances, mut mismatches) = (0usize, 0usize);
    for m in 1..=4usize {
        for code in 0..grid.len().pow(m as u32) {
            let gains: Vec<f64> = (0..m).map(|i| grid[(code / grid.len().pow(i as u32)) % grid.len()]).collect();
            for cap in 1..=4u32 {
                for target in 0..=(m as u32 * cap).min(8) {
                    let got = greedy_bitload(&gains, target, 1.0, 1.0, cap).expect("feasible");
                    let best = min_bitload_power(&gains, target, 1.0, 1.0, cap).expect("feasible");
                    instances += 1;
                    if got.total_power() != best || got.total_bits() != target {
                        mismatches += 1;
                    }
                }
            }
        }
    }
    outcome(
        instances >= 500 && mismatches == 0,
        format!("{instances} enumerated instances, {mismatches} differ from brute force"),
    )
}

fn capacity_trend() -> Outcome {
    let spec = ExperimentSpec::default();
    let rows = match run_capacity_sweep(&spec) {
        Ok(rows) => rows,
        Err(e) => return outcome(false, format!("sweep failed: {e}")),
    };
    let series = |m: Method| -> Vec<f64> {
        spec.user_counts
            .iter()
            .map(|&k| {
                rows.iter()
                    .find(|r| r.method == m.name() && r.users == k)
                    .map(|r| r.capacity_mean)
                    .expect("row present")
            })
            .collect()
    };
    let mut problems = Vec::new();
    let mut summary = Vec::new();
    for m in Method::ALL.into_iter().filter(|m| m.is_rate_adaptive()) {
        let c = series(m);
        summary.push(format!("{m} {c:.3?}"));
        for (i, w) in c.windows(2).enumerate() {
            if w[1] <= w[0] {
                problems.push(format!(
                    "{m} not increasing from K={} to K={}",
                    spec.user_counts[i],
                    spec.user_counts[i + 1]
                ));
            }
        }
    }
    let (lin, root) = (series(Method::Linear), series(Method::RootFinding));
    for ((k, l), r) in spec.user_counts.iter().zip(&lin).zip(&root) {
        if l < r {
            problems.push(format!("linear below rootfinding at K={k} ({l:.4} < {r:.4})"));
        }
    }
    let power: Vec<f64> = spec
        .user_counts
        .iter()
        .map(|&k| {
            rows.iter()
                .find(|r| r.method == Method::Proposed.name() && r.users == k)
                .map(|r| r.power_mean)
                .expect("row present")
        })
        .collect();
    let power: Vec<String> = power.iter().map(|p| format!("{p:.3e}")).collect();
    summary.push(format!("proposed power [{}] (capacity fixed by targets)", power.join(", ")));
    let mut detail = summary.join("; ");
    if !problems.is_empty() {
        detail = format!("{detail}; violations: {}", problems.join(", "));
    }
    outcome(problems.is_empty(), detail)
}

fn linear_proportionality() -> Outcome {
    let spec = ExperimentSpec {
        methods: vec![Method::Linear],
        user_counts: vec![16],
        ..ExperimentSpec::default()
    };
    match run_fairness_experiment(&spec) {
        Ok(rows) => {
            let row = rows.iter().find(|r| r.method == "linear").expect("linear row");
            outcome(
                row.deviation <= 0.05,
                format!("K=16, 100 realizations, max ratio deviation {:.4} (limit 0.05)", row.deviation),
            )
        }
        Err(e) => outcome(false, format!("experiment failed: {e}")),
    }
}

fn proposed_dominance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worse = 0;
    for i in 0..100u64 {
        let k = if i % 2 == 0 { 2 } else { 4 };
        let n = if i % 4 < 2 { 8 } else { 16 };
        let mut config = SystemConfig::new(k, n);
        config.snr_gap = 3.3;
        config.max_bits_per_subcarrier = rng.random_range(2..=8);
        let per_user = (n / k) as u32 * config.max_bits_per_subcarrier;
        config.rate_targets = (0..k).map(|_| rng.random_range(1..=per_user)).collect();
        let ch = generate_channel(&config, 7_000 + i, 4).expect("channel");
        let full = proposed_allocate(&config, &ch).expect("feasible");
        let base = initial_only_allocate(&config, &ch).expect("feasible");
        if full.total_power_used > base.total_power_used {
            worse += 1;
        }
    }

    let (mut small, mut over, mut worst) = (0, 0, 0.0f64);
    for n in 2..=4usize {
        for cap in 1..=2u32 {
            for r1 in 0..=n as u32 * cap {
                for r2 in 0..=n as u32 * cap {
                    if (r1.div_ceil(cap) + r2.div_ceil(cap)) as usize > n {
                        continue;
                    }
                    for seed in 0..5u64 {
                        let mut config = SystemConfig::new(2, n);
                        config.max_bits_per_subcarrier = cap;
                        config.rate_targets = vec![r1, r2];
                        let ch = generate_channel(&config, 9_000 + seed, n.min(3)).expect("channel");
                        let got = proposed_allocate(&config, &ch).expect("feasible").total_power_used;
                        let totals = determine_counts(&config, &average_gains(&ch)).expect("counts").total();
                        let best = min_assignment_power(&config, &ch, &totals).expect("feasible");
                        let excess = if best > 0.0 { got / best - 1.0 } else { got };
                        worst = worst.max(excess);
                        small += 1;
                        if excess > 0.10 {
                            over += 1;
                        }
                    }
                }
            }
        }
    }
    outcome(
        worse == 0 && over == 0,
        format!(
            "100 instances, {worse} above the initial assignment; {small} small instances, \
             worst excess over optimum {:.2}% ({over} above 10%)",
            100.0 * worst
        ),
    )
}

fn bitload_identities() -> Outcome {
    let mut round_trip_failures = 0;
    for &(gain, noise, gap) in &[(1.0, 1.0, 1.0), (0.37, 0.01, 3.3), (12.5, 2.0, 1.7), (1e-3, 1e-4, 9.0)] {
        for b in 0..=12u32 {
            let p = power_for_bits(b, gain, noise, gap);
            if bits_for_power(p, gain, noise, gap).expect("valid") != b as f64 {
                round_trip_failures += 1;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let (mut over_budget, mut errors) = (0, 0);
    for _ in 0..1000 {
        let m = rng.random_range(1..=64);
        let gains: Vec<f64> = (0..m).map(|_| 10f64.powf(rng.random_range(-2.0..1.5))).collect();
        let budget = 10f64.powf(rng.random_range(-2.0..2.0));
        let cap = rng.random_range(1..=10);
        match waterlevel_bitload(&gains, budget, 0.05, 3.3, cap, &WaterLevelOptions::default()) {
            Ok(r) if r.total_power() > budget => over_budget += 1,
            Ok(_) => {}
            Err(_) => errors += 1,
        }
    }
    outcome(
        round_trip_failures == 0 && over_budget == 0 && errors == 0,
        format!(
            "round trip b=0..12: {round_trip_failures} failures; 1000 water-level loads: \
             {over_budget} over budget, {errors} errors"
        ),
    )
}

fn parameter_table() -> Outcome {
    let p = PrimitiveParams {
        bandwidth_hz: 10_000_000,
        used_subcarriers: 840,
        sampling_factor: Ratio::new(8, 7),
        cp_ratio: Ratio::new(1, 8),
    };
    match derive_params(&p) {
        Ok(d) => {
            let ok = d.sampling_frequency_hz == 11_424_000
                && d.fft_size == 1024
                && (d.subcarrier_spacing_hz - 11_156.25).abs() < 1e-9
                && (d.symbol_time_s - 9.0 * d.useful_symbol_time_s / 8.0).abs() <= 1e-18;
            outcome(
                ok,
                format!(
                    "F_s={} N_FFT={} delta_f={} T_s/T_b={}",
                    d.sampling_frequency_hz,
                    d.fft_size,
                    d.subcarrier_spacing_hz,
                    d.symbol_time_s / d.useful_symbol_time_s
                ),
            )
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().expect("temp dir");
    let run = |threads: &str, sub: &str, file: &str| -> Result<(Vec<u8>, Vec<u8>), String> {
        let out = dir.path().join(file);
        let args = [
            "--threads", threads, sub, "--users", if sub == "sweep" { "2,4" } else { "4" },
            "--subcarriers", "16",
            "--realizations", "24", "--seed", "42",
        ];
        let status = Command::new(env!("CARGO_BIN_EXE_ofdma-sim"))
            .args(args)
            .arg("--out")
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(String::from_utf8_lossy(&status.stderr).into_owned());
        }
        let piped = Command::new(env!("CARGO_BIN_EXE_ofdma-sim"))
            .args(args)
            .output()
            .map_err(|e| e.to_string())?;
        Ok((std::fs::read(&out).map_err(|e| e.to_string())?, piped.stdout))
    };
    let mut mismatches = Vec::new();
    for sub in ["sweep", "fairness"] {
        let results: Result<Vec<_>, String> = [("1", "a.csv"), ("4", "b.csv"), ("1", "c.csv")]
            .iter()
            .map(|(t, f)| run(t, sub, f))
            .collect();
        match results {
            Ok(r) => {
                if r[0].0.is_empty() || r.iter().any(|x| x.0 != r[0].0 || x.1 != r[0].0) {
                    mismatches.push(sub);
                }
            }
            Err(e) => return outcome(false, format!("{sub} failed: {e}")),
        }
    }
    outcome(
        mismatches.is_empty(),
        format!("sweep and fairness at 1 and 4 threads, file and stdout; mismatched: {mismatches:?}"),
    )
}

type Check = Box<dyn FnOnce() -> Outcome>;

fn main() -> ExitCode {
    let criteria: [(&str, Check); 8] = [
        ("water-filling optimality", Box::new(|| timed(Duration::from_secs(5), waterfill_optimality))),
        ("greedy bit-loading exactness", Box::new(|| timed(Duration::from_secs(30), greedy_exactness))),
        ("capacity trend versus users", Box::new(|| timed(Duration::from_secs(600), capacity_trend))),
        ("linear proportionality", Box::new(linear_proportionality)),
        ("proposed power dominance", Box::new(proposed_dominance)),
        ("bit/power identities and budget", Box::new(bitload_identities)),
        ("symbol parameter table", Box::new(parameter_table)),
        ("CLI determinism", Box::new(cli_determinism)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let out = check();
        let verdict = if out.passed { "PASS" } else { "FAIL" };
        if !out.passed {
            failed += 1;
        }
        println!("{verdict} [{}] {name}: {}", i + 1, out.detail);
    }
    println!("acceptance: {} of 8 criteria passed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
