//! Single-user water-filling and rate evaluation.

use crate::error::{invalid, Result};

/// Power split over one user's subcarriers.
#[derive(Debug, Clone, PartialEq)]
pub struct WaterfillSolution {
    pub powers: Vec<f64>,
    /// Common value of `p_n + 1/H_n` on the active subcarriers.
    pub water_level: f64,
    pub active_count: usize,
}

/// Inverse CNRs of one user, sorted ascending, with prefix sums. Lets the
/// same subcarrier set be water-filled at many budgets in `O(M)` each.
#[derive(Debug, Clone)]
pub struct WaterfillCurve {
    cnr: Vec<f64>,
    inv_sorted: Vec<f64>,
    prefix: Vec<f64>,
}

impl WaterfillCurve {
    pub fn new(cnr: &[f64]) -> Result<Self> {
        if cnr.iter().any(|&h| !(h.is_finite() && h > 0.0)) {
            return invalid("CNR values must be finite and positive");
        }
        let mut inv_sorted: Vec<f64> = cnr.iter().map(|h| 1.0 / h).collect();
        inv_sorted.sort_by(f64::total_cmp);
        let mut prefix = Vec::with_capacity(inv_sorted.len() + 1);
        prefix.push(0.0);
        for &v in &inv_sorted {
            prefix.push(prefix.last().unwrap() + v);
        }
        Ok(Self {
            cnr: cnr.to_vec(),
            inv_sorted,
            prefix,
        })
    }

    /// Water level and active count for `budget`. Subcarriers are
    /// deactivated from the weakest end while the candidate level does not
    /// exceed their `1/H`.
    pub fn level(&self, budget: f64) -> (f64, usize) {
        let m = self.inv_sorted.len();
        if m == 0 {
            return (0.0, 0);
        }
        if budget <= 0.0 {
            return (self.inv_sorted[0], 0);
        }
        for active in (1..=m).rev() {
            let level = (budget + self.prefix[active]) / active as f64;
            if level > self.inv_sorted[active - 1] {
                return (level, active);
            }
        }
        // unreachable for budget > 0: one active subcarrier always qualifies
        (budget + self.inv_sorted[0], 1)
    }

    pub fn solve(&self, budget: f64) -> WaterfillSolution {
        let (water_level, active_count) = self.level(budget);
        let powers = if active_count == 0 {
            vec![0.0; self.cnr.len()]
        } else {
            self.cnr
                .iter()
                .map(|&h| (water_level - 1.0 / h).max(0.0))
                .collect()
        };
        WaterfillSolution {
            powers,
            water_level,
            active_count,
        }
    }

    /// `Σ log2(1 + p_n H_n)` of the water-filled powers, computed from the
    /// level alone.
    pub fn log_sum(&self, budget: f64) -> f64 {
        let (level, active) = self.level(budget);
        self.inv_sorted[..active]
            .iter()
            .map(|inv| (level / inv).log2())
            .sum()
    }

    /// Inverse of [`log_sum`](Self::log_sum): the smallest budget whose
    /// water-filled log-sum reaches `target`.
    pub fn budget_for_log_sum(&self, target: f64) -> f64 {
        let m = self.inv_sorted.len();
        if target <= 0.0 || m == 0 {
            return 0.0;
        }
        // log_sum = active·log2(level) − Σ log2(1/H) over the active set
        let mut inv_log_sum = 0.0;
        for active in 1..=m {
            inv_log_sum += self.inv_sorted[active - 1].log2();
            let level = ((target + inv_log_sum) / active as f64).exp2();
            if active == m || level <= self.inv_sorted[active] {
                return (active as f64 * level - self.prefix[active]).max(0.0);
            }
        }
        unreachable!()
    }
}

/// Maximizes `Σ log2(1 + p_n H_n)` subject to `Σ p_n = budget`, `p_n >= 0`.
pub fn waterfill(cnr: &[f64], budget: f64) -> Result<WaterfillSolution> {
    if !(budget.is_finite() && budget >= 0.0) {
        return invalid("budget must be finite and non-negative");
    }
    Ok(WaterfillCurve::new(cnr)?.solve(budget))
}

/// Rate of one user in bits/s/Hz: `Σ (1/N)·log2(1 + p_n H_n / Γ)`.
pub fn user_rate(cnr: &[f64], powers: &[f64], num_subcarriers: usize, gap: f64) -> Result<f64> {
    if cnr.len() != powers.len() {
        return invalid(format!(
            "{} CNR values but {} powers",
            cnr.len(),
            powers.len()
        ));
    }
    if num_subcarriers == 0 {
        return invalid("subcarrier count must be positive");
    }
    if !(gap >= 1.0) {
        return invalid("SNR gap must be >= 1");
    }
    let n = num_subcarriers as f64;
    Ok(cnr
        .iter()
        .zip(powers)
        .map(|(&h, &p)| (1.0 + p * h / gap).log2() / n)
        .sum())
}
