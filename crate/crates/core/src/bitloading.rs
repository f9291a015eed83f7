//! Discrete bit and power loading over a set of subchannels.
//!
//! Two loaders share the per-bit cost model `s = (σ²Γ/g)(2^b − 1)`:
//!
//! * [`waterlevel_bitload`] is rate-adaptive. It adapts a single water level
//!   `λ`, reads integer bit counts off `round(log2(λg))`, and nudges `λ` by
//!   the power surplus until the bit vector settles within the budget.
//! * [`greedy_bitload`] is margin-adaptive. It adds bits one at a time where
//!   the next bit is cheapest until a target is met. Incremental costs grow
//!   with the bit count, so the result is the exact minimum-power load.

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BitLoadResult {
    pub bits: Vec<u32>,
    pub powers: Vec<f64>,
    /// Final water level; zero for the greedy loader.
    pub water_level: f64,
    pub iterations: usize,
}

impl BitLoadResult {
    pub fn total_power(&self) -> f64 {
        self.powers.iter().sum()
    }

    pub fn total_bits(&self) -> u32 {
        self.bits.iter().sum()
    }
}

/// Power needed per unit of `2^b − 1`, i.e. `σ²Γ/g`.
#[inline]
fn unit_cost(gain: f64, noise_power: f64, gap: f64) -> f64 {
    noise_power * gap / gain
}

fn check_channel(gain: f64, noise_power: f64, gap: f64) -> Result<()> {
    if !(gain.is_finite() && gain > 0.0) {
        return invalid("power gain must be positive");
    }
    if !(noise_power.is_finite() && noise_power > 0.0) {
        return invalid("noise power must be positive");
    }
    if !(gap >= 1.0) {
        return invalid("SNR gap must be >= 1");
    }
    Ok(())
}

/// Real-valued bits supported by power `s`: `log2(1 + s·g/(σ²Γ))`.
pub fn bits_for_power(power: f64, gain: f64, noise_power: f64, gap: f64) -> Result<f64> {
    check_channel(gain, noise_power, gap)?;
    if !(power >= 0.0) {
        return invalid("power must be non-negative");
    }
    Ok((1.0 + power / unit_cost(gain, noise_power, gap)).log2())
}

/// Integer bits at water level `λ`: `round([log2(λg)]⁺)`, half rounded up,
/// capped at `max_bits`.
pub fn bits_for_level(level: f64, gain: f64, max_bits: u32) -> u32 {
    let raw = (level * gain).log2().max(0.0);
    let rounded = (raw + 0.5).floor();
    if rounded >= max_bits as f64 {
        max_bits
    } else {
        rounded as u32
    }
}

/// Power that carries `bits` bits: `(σ²Γ/g)(2^b − 1)`.
pub fn power_for_bits(bits: u32, gain: f64, noise_power: f64, gap: f64) -> f64 {
    if bits == 0 {
        return 0.0;
    }
    unit_cost(gain, noise_power, gap) * ((1u64 << bits) as f64 - 1.0)
}

/// Tuning of the water-level iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaterLevelOptions {
    pub step: f64,
    pub max_iters: usize,
}

impl Default for WaterLevelOptions {
    fn default() -> Self {
        Self {
            step: 1.0,
            max_iters: 500,
        }
    }
}

/// Maximizes loaded bits under `Σ s_m <= budget` by adapting a water level.
///
/// Starts at `λ₀ = (S/M + σ²Γ/ḡ)/(σ²Γ)` with `ḡ` the geometric mean gain and
/// updates `λ ← λ + μ/(M_on·σ²Γ)·(S − Σ s_m)` where `M_on` counts loaded
/// subchannels (`M` when none are). Stops once the bit vector repeats and
/// fits the budget. If the iteration cap is hit while over budget, bits
/// are stripped where that saves the most power until it fits.
pub fn waterlevel_bitload(
    gains: &[f64],
    budget: f64,
    noise_power: f64,
    gap: f64,
    max_bits: u32,
    options: &WaterLevelOptions,
) -> Result<BitLoadResult> {
    for &g in gains {
        check_channel(g, noise_power, gap)?;
    }
    if !(budget.is_finite() && budget > 0.0) {
        return invalid("power budget must be positive");
    }
    if !(options.step.is_finite() && options.step > 0.0) {
        return invalid("step size must be positive");
    }
    if max_bits == 0 {
        return invalid("max bits per subchannel must be >= 1");
    }
    let m = gains.len();
    if m == 0 {
        return Ok(BitLoadResult {
            bits: vec![],
            powers: vec![],
            water_level: 0.0,
            iterations: 0,
        });
    }

    let noise_gap = noise_power * gap;
    let geo_mean = (gains.iter().map(|g| g.ln()).sum::<f64>() / m as f64).exp();
    let mut level = (budget / m as f64 + noise_gap / geo_mean) / noise_gap;

    let load = |level: f64| -> (Vec<u32>, Vec<f64>) {
        let bits: Vec<u32> = gains
            .iter()
            .map(|&g| bits_for_level(level, g, max_bits))
            .collect();
        let powers = bits
            .iter()
            .zip(gains)
            .map(|(&b, &g)| power_for_bits(b, g, noise_power, gap))
            .collect();
        (bits, powers)
    };

    let mut previous: Option<Vec<u32>> = None;
    let mut seen_feasible = false;
    let mut iterations = 0;
    let (mut bits, mut powers) = load(level);
    while iterations < options.max_iters {
        iterations += 1;
        let used: f64 = powers.iter().sum();
        let feasible = used <= budget;
        seen_feasible |= feasible;
        if feasible && previous.as_ref() == Some(&bits) {
            return Ok(BitLoadResult {
                bits,
                powers,
                water_level: level,
                iterations,
            });
        }
        let on = bits.iter().filter(|&&b| b > 0).count();
        let on = if on == 0 { m } else { on };
        level += options.step / on as f64 / noise_gap * (budget - used);
        // λ ≤ 0 would load nothing; keep it positive so log2 stays finite
        if level <= 0.0 {
            level = f64::MIN_POSITIVE;
        }
        previous = Some(bits);
        (bits, powers) = load(level);
    }

    let used: f64 = powers.iter().sum();
    seen_feasible |= used <= budget;
    if !seen_feasible {
        return Err(Error::ConvergenceFailure(format!(
            "water level did not reach a feasible bit load in {} iterations",
            options.max_iters
        )));
    }
    strip_to_budget(&mut bits, &mut powers, gains, budget, noise_power, gap);
    Ok(BitLoadResult {
        bits,
        powers,
        water_level: level,
        iterations,
    })
}

/// Removes bits, largest power saving first, until the load fits `budget`.
fn strip_to_budget(
    bits: &mut [u32],
    powers: &mut [f64],
    gains: &[f64],
    budget: f64,
    noise_power: f64,
    gap: f64,
) {
    while powers.iter().sum::<f64>() > budget {
        let mut best: Option<(usize, f64)> = None;
        for (i, (&b, &p)) in bits.iter().zip(powers.iter()).enumerate() {
            if b == 0 {
                continue;
            }
            let saving = p - power_for_bits(b - 1, gains[i], noise_power, gap);
            if best.is_none_or(|(_, s)| saving > s) {
                best = Some((i, saving));
            }
        }
        let Some((i, _)) = best else { break };
        bits[i] -= 1;
        powers[i] = power_for_bits(bits[i], gains[i], noise_power, gap);
    }
}

/// Loads exactly `target_bits` bits at minimum total power.
///
/// Each step adds one bit to the subchannel whose next bit costs the least,
/// `Δ_m = (σ²Γ/g_m)·2^{b_m}`, skipping subchannels already at `max_bits`.
/// Ties go to the lowest index.
pub fn greedy_bitload(
    gains: &[f64],
    target_bits: u32,
    noise_power: f64,
    gap: f64,
    max_bits: u32,
) -> Result<BitLoadResult> {
    for &g in gains {
        check_channel(g, noise_power, gap)?;
    }
    let capacity = gains.len() as u64 * max_bits as u64;
    if target_bits as u64 > capacity {
        return Err(Error::InfeasibleRate {
            requested: target_bits,
            capacity: capacity.min(u32::MAX as u64) as u32,
        });
    }
    let costs: Vec<f64> = gains
        .iter()
        .map(|&g| unit_cost(g, noise_power, gap))
        .collect();
    let mut bits = vec![0u32; gains.len()];
    let mut increments = costs.clone();
    for _ in 0..target_bits {
        let mut best = usize::MAX;
        for (i, &delta) in increments.iter().enumerate() {
            if bits[i] < max_bits && (best == usize::MAX || delta < increments[best]) {
                best = i;
            }
        }
        bits[best] += 1;
        increments[best] *= 2.0;
    }
    let powers = bits
        .iter()
        .zip(gains)
        .map(|(&b, &g)| power_for_bits(b, g, noise_power, gap))
        .collect();
    Ok(BitLoadResult {
        bits,
        powers,
        water_level: 0.0,
        iterations: target_bits as usize,
    })
}
