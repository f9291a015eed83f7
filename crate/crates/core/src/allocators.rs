//! Rate-adaptive subcarrier and power allocation under proportional-rate
//! constraints `R_1/γ_1 = … = R_K/γ_K`.
//!
//! Every allocator works on the gap-adjusted CNR `H/Γ`, so the power it
//! water-fills is exactly the one that maximizes the rate reported by
//! [`user_rate`]. Ties are broken by lowest user index, then lowest
//! subcarrier index.

use crate::error::{invalid, Result};
use crate::system::{AllocationResult, Assignment, ChannelRealization, SystemConfig};
use crate::waterfill::{user_rate, WaterfillCurve};

fn check_inputs(config: &SystemConfig, channel: &ChannelRealization) -> Result<()> {
    config.validate()?;
    if channel.num_users() != config.num_users
        || channel.num_subcarriers() != config.num_subcarriers
    {
        return invalid(format!(
            "channel is {}x{} but config expects {}x{}",
            channel.num_users(),
            channel.num_subcarriers(),
            config.num_users,
            config.num_subcarriers
        ));
    }
    Ok(())
}

/// Gives every subcarrier to the user with the highest CNR on it.
pub fn assign_best_gain(channel: &ChannelRealization) -> Assignment {
    let cnr = channel.cnr();
    let mut assignment = Assignment::unassigned(channel.num_subcarriers());
    for n in 0..channel.num_subcarriers() {
        let mut best = 0;
        for k in 1..channel.num_users() {
            if cnr[k][n] > cnr[best][n] {
                best = k;
            }
        }
        assignment.assign(n, best);
    }
    assignment
}

/// Best-gain assignment with `P_tot/N` on every subcarrier.
pub fn equal_power_allocate(
    config: &SystemConfig,
    channel: &ChannelRealization,
) -> Result<AllocationResult> {
    check_inputs(config, channel)?;
    let assignment = assign_best_gain(channel);
    let share = config.total_power / config.num_subcarriers as f64;
    let mut power = vec![vec![0.0; config.num_subcarriers]; config.num_users];
    for (n, owner) in assignment.owners().iter().enumerate() {
        power[owner.expect("complete")][n] = share;
    }
    let rates = (0..config.num_users)
        .map(|k| {
            user_rate(
                channel.user_cnr(k),
                &power[k],
                config.num_subcarriers,
                config.snr_gap,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let total_power_used = power.iter().flatten().sum();
    Ok(AllocationResult {
        assignment,
        power,
        rates,
        bits: vec![0; config.num_subcarriers],
        total_power_used,
    })
}

/// Shared state of the greedy subcarrier phases: the partial assignment and
/// each user's rate under equal power.
struct EqualPowerPicker<'a> {
    config: &'a SystemConfig,
    cnr: &'a [Vec<f64>],
    assignment: Assignment,
    counts: Vec<usize>,
    rates: Vec<f64>,
    remaining: usize,
}

impl<'a> EqualPowerPicker<'a> {
    fn new(config: &'a SystemConfig, channel: &'a ChannelRealization) -> Self {
        Self {
            config,
            cnr: channel.cnr(),
            assignment: Assignment::unassigned(config.num_subcarriers),
            counts: vec![0; config.num_users],
            rates: vec![0.0; config.num_users],
            remaining: config.num_subcarriers,
        }
    }

    /// Unassigned subcarrier with the highest CNR for `user`.
    fn best_free(&self, user: usize) -> Option<usize> {
        let row = &self.cnr[user];
        let mut best: Option<usize> = None;
        for n in 0..row.len() {
            if !self.assignment.is_assigned(n) && best.is_none_or(|b| row[n] > row[b]) {
                best = Some(n);
            }
        }
        best
    }

    fn give(&mut self, user: usize, subcarrier: usize) {
        let c = self.config;
        let snr = c.total_power / c.num_subcarriers as f64 * self.cnr[user][subcarrier] / c.snr_gap;
        self.assignment.assign(subcarrier, user);
        self.counts[user] += 1;
        self.rates[user] += (1.0 + snr).log2() / c.num_subcarriers as f64;
        self.remaining -= 1;
    }

    /// Lets `user` take its best free subcarrier.
    fn pick(&mut self, user: usize) {
        if let Some(n) = self.best_free(user) {
            self.give(user, n);
        }
    }

    /// Among users accepted by `eligible`, the one with the lowest `R_k/γ_k`.
    fn neediest(&self, eligible: impl Fn(usize) -> bool) -> Option<usize> {
        let ratios = &self.config.rate_ratios;
        let mut best: Option<usize> = None;
        for k in 0..self.config.num_users {
            if eligible(k)
                && best.is_none_or(|b| self.rates[k] / ratios[k] < self.rates[b] / ratios[b])
            {
                best = Some(k);
            }
        }
        best
    }
}

/// Gap-adjusted CNR values of `user` on `subcarriers`.
fn effective_cnr(
    config: &SystemConfig,
    channel: &ChannelRealization,
    user: usize,
    subcarriers: &[usize],
) -> Vec<f64> {
    let row = channel.user_cnr(user);
    subcarriers.iter().map(|&n| row[n] / config.snr_gap).collect()
}

/// Water-fills each user's budget over its own subcarriers.
fn water_fill_users(
    config: &SystemConfig,
    channel: &ChannelRealization,
    assignment: Assignment,
    budgets: &[f64],
) -> Result<AllocationResult> {
    let n_total = config.num_subcarriers;
    let mut power = vec![vec![0.0; n_total]; config.num_users];
    let mut rates = Vec::with_capacity(config.num_users);
    for (k, &budget) in budgets.iter().enumerate() {
        let owned = assignment.subcarriers_of(k);
        let curve = WaterfillCurve::new(&effective_cnr(config, channel, k, &owned))?;
        let solution = curve.solve(budget.max(0.0));
        for (&n, &p) in owned.iter().zip(&solution.powers) {
            power[k][n] = p;
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
        bits: vec![0; n_total],
        total_power_used,
    })
}

/// Root-finding allocation.
///
/// Subcarriers: every user first takes its best subcarrier, then the user
/// with the lowest `R_k/γ_k` (equal power `P_tot/N`) repeatedly picks its
/// best remaining one. Power: per-user totals solve
/// `R_k(P_k) = (γ_k/γ_1)·R_1(P_1)`, `Σ P_k = P_tot`, where `R_k(P)` is the
/// water-filled rate. For a given `P_1` each `P_k` follows in closed form
/// from the inverse water-filling curve; `P_1` is found by bisection.
pub fn rootfinding_allocate(
    config: &SystemConfig,
    channel: &ChannelRealization,
) -> Result<AllocationResult> {
    check_inputs(config, channel)?;
    let k_users = config.num_users;
    let mut picker = EqualPowerPicker::new(config, channel);
    for k in 0..k_users {
        picker.pick(k);
    }
    while picker.remaining > 0 {
        let k = picker.neediest(|_| true).expect("at least one user");
        picker.pick(k);
    }
    let assignment = picker.assignment;

    let curves = (0..k_users)
        .map(|k| {
            WaterfillCurve::new(&effective_cnr(
                config,
                channel,
                k,
                &assignment.subcarriers_of(k),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let budgets = proportional_budgets(&curves, &config.rate_ratios, config.total_power);
    water_fill_users(config, channel, assignment, &budgets)
}

/// Per-user budgets that equalize `log_sum_k/γ_k` under a total budget.
/// `log_sum` is proportional to the rate, so the `1/N` factor drops out.
pub(crate) fn proportional_budgets(
    curves: &[WaterfillCurve],
    ratios: &[f64],
    total_power: f64,
) -> Vec<f64> {
    if curves.len() == 1 {
        return vec![total_power];
    }
    let budgets_for = |p1: f64| -> Vec<f64> {
        let anchor = curves[0].log_sum(p1) / ratios[0];
        std::iter::once(p1)
            .chain(
                curves
                    .iter()
                    .zip(ratios)
                    .skip(1)
                    .map(|(c, &g)| c.budget_for_log_sum(anchor * g)),
            )
            .collect()
    };
    let tolerance = 1e-10 * total_power;
    let (mut lo, mut hi) = (0.0, total_power);
    while hi - lo > tolerance {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if budgets_for(mid).iter().sum::<f64>() > total_power {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    budgets_for(lo)
}

/// Splits `total` over users in proportion to `ratios`: `max(1, round(N·γ_k/Σγ))`,
/// then trims the most over-rounded users until the sum fits.
pub(crate) fn subcarrier_quotas(ratios: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = ratios.iter().sum();
    let ideal: Vec<f64> = ratios.iter().map(|g| total as f64 * g / sum).collect();
    let mut quotas: Vec<usize> = ideal.iter().map(|x| (x.round() as usize).max(1)).collect();
    while quotas.iter().sum::<usize>() > total {
        let mut victim: Option<usize> = None;
        for k in 0..quotas.len() {
            if quotas[k] > 1 {
                let excess = quotas[k] as f64 - ideal[k];
                if victim.is_none_or(|v| excess > quotas[v] as f64 - ideal[v]) {
                    victim = Some(k);
                }
            }
        }
        quotas[victim.expect("N >= K keeps a reducible quota")] -= 1;
    }
    quotas
}

/// Linear allocation.
///
/// Subcarriers follow four steps: proportional quotas `N_k`; each user takes
/// its best subcarrier; the user with lowest `R_k/γ_k` below quota takes
/// its best remaining one until all quotas are met; every leftover
/// subcarrier goes to its best user, at most one leftover per user while
/// some user has none.
///
/// Power treats each user's channel as flat at its geometric-mean CNR
/// `Ĥ_k`. At high SNR, proportional rates with `N_k ∝ γ_k` reduce to equal
/// `P_k Ĥ_k / N_k`, which is linear in the anchor user's power:
/// `P_k = a_k·P_1` with `a_k = N_k Ĥ_1/(N_1 Ĥ_k)`. Forward substitution of
/// `Σ P_k = P_tot` gives `P_1`, back substitution the rest. Each `P_k` is
/// then water-filled over the user's subcarriers.
pub fn linear_allocate(
    config: &SystemConfig,
    channel: &ChannelRealization,
) -> Result<AllocationResult> {
    check_inputs(config, channel)?;
    let k_users = config.num_users;
    let quotas = subcarrier_quotas(&config.rate_ratios, config.num_subcarriers);

    let mut picker = EqualPowerPicker::new(config, channel);
    for k in 0..k_users {
        picker.pick(k);
    }
    while let Some(k) = picker.neediest(|k| picker.counts[k] < quotas[k]) {
        picker.pick(k);
    }
    let cnr = channel.cnr();
    let mut got_extra = vec![false; k_users];
    for n in 0..config.num_subcarriers {
        if picker.assignment.is_assigned(n) {
            continue;
        }
        let restrict = got_extra.iter().any(|&e| !e);
        let mut best: Option<usize> = None;
        for k in 0..k_users {
            if (!restrict || !got_extra[k]) && best.is_none_or(|b| cnr[k][n] > cnr[b][n]) {
                best = Some(k);
            }
        }
        let k = best.expect("at least one user");
        got_extra[k] = true;
        picker.give(k, n);
    }
    let assignment = picker.assignment;

    let flat: Vec<(f64, f64)> = (0..k_users)
        .map(|k| {
            let eff = effective_cnr(config, channel, k, &assignment.subcarriers_of(k));
            let count = eff.len() as f64;
            let geo = (eff.iter().map(|h| h.ln()).sum::<f64>() / count).exp();
            (count, geo)
        })
        .collect();
    let budgets = linear_budgets(&flat, config.total_power);
    water_fill_users(config, channel, assignment, &budgets)
}

/// Solves the anchored linear system for per-user totals. `flat[k]` is
/// `(N_k, Ĥ_k)`.
fn linear_budgets(flat: &[(f64, f64)], total_power: f64) -> Vec<f64> {
    let (n_1, h_1) = flat[0];
    let slopes: Vec<f64> = flat.iter().map(|&(n_k, h_k)| n_k * h_1 / (n_1 * h_k)).collect();
    let p_1 = total_power / slopes.iter().sum::<f64>();
    slopes.iter().map(|a| a * p_1).collect()
}

/// Joint allocation.
///
/// Subcarriers are handed out one at a time to the user with the lowest
/// `R_k/γ_k`; each grant raises that user's budget by `P_tot/N` and its
/// rate is re-evaluated by water-filling the budget over everything it
/// holds. Final powers water-fill `count_k·P_tot/N` per user.
pub fn joint_allocate(
    config: &SystemConfig,
    channel: &ChannelRealization,
) -> Result<AllocationResult> {
    check_inputs(config, channel)?;
    let k_users = config.num_users;
    let share = config.total_power / config.num_subcarriers as f64;
    let mut picker = EqualPowerPicker::new(config, channel);
    while picker.remaining > 0 {
        let k = picker.neediest(|_| true).expect("at least one user");
        let n = picker.best_free(k).expect("free subcarrier");
        picker.assignment.assign(n, k);
        picker.counts[k] += 1;
        picker.remaining -= 1;
        let owned = picker.assignment.subcarriers_of(k);
        let curve = WaterfillCurve::new(&effective_cnr(config, channel, k, &owned))?;
        picker.rates[k] =
            curve.log_sum(picker.counts[k] as f64 * share) / config.num_subcarriers as f64;
    }
    let budgets: Vec<f64> = (0..k_users)
        .map(|k| picker.counts[k] as f64 * share)
        .collect();
    water_fill_users(config, channel, picker.assignment, &budgets)
}
