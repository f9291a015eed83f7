//! Margin-adaptive allocation: minimum transmit power for per-user bit
//! targets.
//!
//! Three phases run in sequence:
//!
//! 1. [`determine_counts`] fixes how many subcarriers each user gets: the
//!    minimum that can carry its target at the modulation cap, plus extras
//!    handed to whichever user they save the most power for.
//! 2. [`initial_allocation`] builds an assignment round-robin from each
//!    user's gain-sorted subcarrier list, then [`improve_allocation`] swaps
//!    subcarrier pairs between users while that lowers total power.
//! 3. Each user loads its target with [`greedy_bitload`].

use crate::bitloading::{greedy_bitload, BitLoadResult};
use crate::error::{invalid, Error, Result};
use crate::system::{AllocationResult, Assignment, ChannelRealization, SystemConfig};
use crate::waterfill::user_rate;

/// Per-user subcarrier counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubcarrierCounts {
    pub minimum: Vec<usize>,
    pub extra: Vec<usize>,
}

impl SubcarrierCounts {
    pub fn total(&self) -> Vec<usize> {
        self.minimum
            .iter()
            .zip(&self.extra)
            .map(|(m, e)| m + e)
            .collect()
    }
}

/// `c·(2^{R/c} − 1)`: flat-channel power, in units of `Γ/H̄`, of `R` bits
/// spread over `c` subcarriers.
fn flat_power(bits: u32, count: usize) -> f64 {
    if bits == 0 {
        return 0.0;
    }
    let c = count as f64;
    c * ((bits as f64 / c).exp2() - 1.0)
}

/// Minimum plus extra subcarriers per user.
///
/// `minimum[k] = ceil(R_k / b_max)`. The remaining subcarriers go out one at
/// a time to the user whose flat-channel power estimate drops the most,
/// `(Γ/H̄_k)·(f(c) − f(c+1))` with `f(c) = c(2^{R_k/c} − 1)` at its current
/// count `c`. Ties go to the lowest user index.
pub fn determine_counts(config: &SystemConfig, avg_gain: &[f64]) -> Result<SubcarrierCounts> {
    config.validate()?;
    if avg_gain.len() != config.num_users {
        return invalid("average gain needs one entry per user");
    }
    if avg_gain.iter().any(|&g| !(g.is_finite() && g > 0.0)) {
        return invalid("average gains must be positive");
    }
    let b_max = config.max_bits_per_subcarrier;
    let minimum: Vec<usize> = config
        .rate_targets
        .iter()
        .map(|&r| r.div_ceil(b_max) as usize)
        .collect();
    let needed: usize = minimum.iter().sum();
    let n = config.num_subcarriers;
    if needed > n {
        return Err(Error::InfeasibleConfiguration(format!(
            "rate targets need {needed} subcarriers but only {n} exist"
        )));
    }
    let mut extra = vec![0; config.num_users];
    for _ in needed..n {
        let mut best: Option<(usize, f64)> = None;
        for k in 0..config.num_users {
            let c = minimum[k] + extra[k];
            let r = config.rate_targets[k];
            let saving = if r == 0 {
                0.0
            } else {
                config.snr_gap / avg_gain[k] * (flat_power(r, c) - flat_power(r, c + 1))
            };
            if best.is_none_or(|(_, s)| saving > s) {
                best = Some((k, saving));
            }
        }
        extra[best.expect("at least one user").0] += 1;
    }
    Ok(SubcarrierCounts { minimum, extra })
}

/// Round-robin construction from gain-sorted lists.
///
/// Users take turns in ascending index order. On its turn a user looks at
/// the next entry of its descending-CNR list and takes it unless it already
/// holds its quota or the subcarrier is taken; either way the turn passes.
pub fn initial_allocation(channel: &ChannelRealization, counts: &SubcarrierCounts) -> Assignment {
    let n = channel.num_subcarriers();
    let totals = counts.total();
    let lists: Vec<Vec<usize>> = channel
        .cnr()
        .iter()
        .map(|row| {
            let mut order: Vec<usize> = (0..n).collect();
            // stable sort keeps the lower index first among equal gains
            order.sort_by(|&a, &b| row[b].total_cmp(&row[a]));
            order
        })
        .collect();

    let mut assignment = Assignment::unassigned(n);
    let mut held = vec![0usize; totals.len()];
    let mut cursor = vec![0usize; totals.len()];
    let mut remaining = totals.iter().sum::<usize>().min(n);
    while remaining > 0 {
        let mut progressed = false;
        for k in 0..totals.len() {
            if held[k] >= totals[k] || cursor[k] >= n {
                continue;
            }
            let candidate = lists[k][cursor[k]];
            cursor[k] += 1;
            progressed = true;
            if !assignment.is_assigned(candidate) {
                assignment.assign(candidate, k);
                held[k] += 1;
                remaining -= 1;
            }
        }
        if !progressed {
            break;
        }
    }
    assignment
}

/// Greedy minimum power of one user on a subcarrier set.
fn user_load(
    config: &SystemConfig,
    channel: &ChannelRealization,
    user: usize,
    subcarriers: &[usize],
) -> Result<BitLoadResult> {
    let gains: Vec<f64> = subcarriers
        .iter()
        .map(|&n| channel.power_gain(user, n))
        .collect();
    greedy_bitload(
        &gains,
        config.rate_targets[user],
        channel.noise_power(),
        config.snr_gap,
        config.max_bits_per_subcarrier,
    )
}

fn user_power(
    config: &SystemConfig,
    channel: &ChannelRealization,
    user: usize,
    subcarriers: &[usize],
) -> Result<f64> {
    Ok(user_load(config, channel, user, subcarriers)?.total_power())
}

/// Pairwise-swap local search.
///
/// Each round evaluates every exchange of a subcarrier `n` of user `j` with
/// a subcarrier `m` of user `k > j`, pricing both users with the greedy
/// loader, and applies the one with the largest power reduction (first in
/// `(j, k, n, m)` order on ties). Stops when no exchange reduces power.
/// Per-user powers are cached; only the two touched users are re-priced.
/// Counts never change.
pub fn improve_allocation(
    assignment: &Assignment,
    channel: &ChannelRealization,
    config: &SystemConfig,
) -> Result<(Assignment, usize)> {
    let k_users = config.num_users;
    let mut sets: Vec<Vec<usize>> = (0..k_users).map(|k| assignment.subcarriers_of(k)).collect();
    let mut cost: Vec<f64> = sets
        .iter()
        .enumerate()
        .map(|(k, s)| user_power(config, channel, k, s))
        .collect::<Result<_>>()?;

    let mut swaps = 0;
    loop {
        // (reduction, j, k, index in sets[j], index in sets[k], new costs)
        let mut best: Option<(f64, usize, usize, usize, usize, f64, f64)> = None;
        for j in 0..k_users {
            for k in (j + 1)..k_users {
                let pair_cost = cost[j] + cost[k];
                if pair_cost == 0.0 {
                    continue;
                }
                let mut trial_j = sets[j].clone();
                let mut trial_k = sets[k].clone();
                for a in 0..sets[j].len() {
                    for b in 0..sets[k].len() {
                        trial_j[a] = sets[k][b];
                        trial_k[b] = sets[j][a];
                        let new_j = user_power(config, channel, j, &trial_j)?;
                        let new_k = user_power(config, channel, k, &trial_k)?;
                        trial_k[b] = sets[k][b];
                        let reduction = pair_cost - (new_j + new_k);
                        if reduction > 1e-12 * pair_cost
                            && best.is_none_or(|bst| reduction > bst.0)
                        {
                            best = Some((reduction, j, k, a, b, new_j, new_k));
                        }
                    }
                    trial_j[a] = sets[j][a];
                }
            }
        }
        let Some((_, j, k, a, b, new_j, new_k)) = best else {
            break;
        };
        let n = sets[j][a];
        sets[j][a] = sets[k][b];
        sets[k][b] = n;
        cost[j] = new_j;
        cost[k] = new_k;
        swaps += 1;
    }

    let mut improved = Assignment::unassigned(assignment.len());
    for (k, set) in sets.iter().enumerate() {
        for &n in set {
            improved.assign(n, k);
        }
    }
    Ok((improved, swaps))
}

/// Mean CNR of each user over all subcarriers.
pub fn average_gains(channel: &ChannelRealization) -> Vec<f64> {
    channel
        .cnr()
        .iter()
        .map(|row| row.iter().sum::<f64>() / row.len() as f64)
        .collect()
}

fn allocate(
    config: &SystemConfig,
    channel: &ChannelRealization,
    improve: bool,
) -> Result<AllocationResult> {
    config.validate()?;
    if channel.num_users() != config.num_users
        || channel.num_subcarriers() != config.num_subcarriers
    {
        return invalid("channel dimensions do not match the config");
    }
    let counts = determine_counts(config, &average_gains(channel))?;
    let mut assignment = initial_allocation(channel, &counts);
    if improve {
        assignment = improve_allocation(&assignment, channel, config)?.0;
    }

    let n_total = config.num_subcarriers;
    let mut power = vec![vec![0.0; n_total]; config.num_users];
    let mut bits = vec![0u32; n_total];
    let mut rates = Vec::with_capacity(config.num_users);
    for k in 0..config.num_users {
        let owned = assignment.subcarriers_of(k);
        let load = user_load(config, channel, k, &owned)?;
        for ((&n, &b), &s) in owned.iter().zip(&load.bits).zip(&load.powers) {
            bits[n] = b;
            power[k][n] = s;
        }
        rates.push(user_rate(
            channel.user_cnr(k),
            &power[k],
            n_total,
            config.snr_gap,
        )?);
    }
    let total_power_used = power.iter().flatten().sum();
    Ok(AllocationResult {
        assignment,
        power,
        rates,
        bits,
        total_power_used,
    })
}

/// Full three-phase allocation. Every user carries exactly its target.
pub fn proposed_allocate(
    config: &SystemConfig,
    channel: &ChannelRealization,
) -> Result<AllocationResult> {
    allocate(config, channel, true)
}

/// Counts and round-robin construction followed directly by bit loading,
/// without the swap search.
pub fn initial_only_allocate(
    config: &SystemConfig,
    channel: &ChannelRealization,
) -> Result<AllocationResult> {
    allocate(config, channel, false)
}
