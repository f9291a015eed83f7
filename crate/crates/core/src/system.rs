//! System configuration, channel realizations and allocation containers.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};

/// Static parameters of one downlink OFDMA cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub num_users: usize,
    pub num_subcarriers: usize,
    /// Total transmit power budget in watts.
    pub total_power: f64,
    /// Total bandwidth in hertz.
    pub bandwidth: f64,
    /// Noise power spectral density in W/Hz.
    pub noise_psd: f64,
    /// Linear SNR gap, `>= 1`.
    pub snr_gap: f64,
    /// Proportional-rate targets, one per user.
    pub rate_ratios: Vec<f64>,
    /// Bits per OFDM symbol required by each user (margin-adaptive allocator).
    pub rate_targets: Vec<u32>,
    /// Adaptive-modulation cap on bits per subcarrier.
    pub max_bits_per_subcarrier: u32,
}

impl SystemConfig {
    /// A config with unit power, unit noise per subcarrier, no gap and
    /// equal rate ratios. Rate targets default to zero.
    pub fn new(num_users: usize, num_subcarriers: usize) -> Self {
        let bandwidth = 1.0e6;
        Self {
            num_users,
            num_subcarriers,
            total_power: 1.0,
            bandwidth,
            noise_psd: num_subcarriers as f64 / bandwidth,
            snr_gap: 1.0,
            rate_ratios: vec![1.0; num_users],
            rate_targets: vec![0; num_users],
            max_bits_per_subcarrier: 8,
        }
    }

    /// Per-subcarrier noise power `σ² = N0·B/N`.
    pub fn noise_power(&self) -> f64 {
        self.noise_psd * self.bandwidth / self.num_subcarriers as f64
    }

    /// Sets `noise_psd` so that the per-subcarrier noise power equals `sigma2`.
    pub fn set_noise_power(&mut self, sigma2: f64) {
        self.noise_psd = sigma2 * self.num_subcarriers as f64 / self.bandwidth;
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.num_users;
        let n = self.num_subcarriers;
        if k == 0 {
            return invalid("at least one user is required");
        }
        if n < k {
            return invalid(format!("{n} subcarriers cannot serve {k} users"));
        }
        if !(self.total_power.is_finite() && self.total_power > 0.0) {
            return invalid("total power must be positive");
        }
        if !(self.bandwidth.is_finite() && self.bandwidth > 0.0) {
            return invalid("bandwidth must be positive");
        }
        if !(self.noise_psd.is_finite() && self.noise_psd > 0.0) {
            return invalid("noise PSD must be positive");
        }
        if !(self.snr_gap.is_finite() && self.snr_gap >= 1.0) {
            return invalid("SNR gap must be >= 1 (linear)");
        }
        if self.rate_ratios.len() != k || self.rate_targets.len() != k {
            return invalid("rate ratios and rate targets need one entry per user");
        }
        if self.rate_ratios.iter().any(|&g| !(g.is_finite() && g > 0.0)) {
            return invalid("rate ratios must be positive");
        }
        if self.max_bits_per_subcarrier == 0 {
            return invalid("max bits per subcarrier must be >= 1");
        }
        Ok(())
    }
}

/// Per-user amplitude gains together with the derived channel-to-noise ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    gains: Vec<Vec<f64>>,
    noise_power: f64,
    cnr: Vec<Vec<f64>>,
}

impl ChannelRealization {
    /// Builds a realization directly from a CNR matrix, choosing amplitude
    /// gains `h = sqrt(H·σ²)`.
    pub fn from_cnr(cnr: Vec<Vec<f64>>, noise_power: f64) -> Result<Self> {
        if !(noise_power.is_finite() && noise_power > 0.0) {
            return invalid("noise power must be positive");
        }
        let gains = cnr
            .iter()
            .map(|row| row.iter().map(|&c| (c * noise_power).sqrt()).collect())
            .collect();
        from_gains(gains, noise_power)
    }

    pub fn num_users(&self) -> usize {
        self.gains.len()
    }

    pub fn num_subcarriers(&self) -> usize {
        self.gains.first().map_or(0, Vec::len)
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    pub fn gains(&self) -> &[Vec<f64>] {
        &self.gains
    }

    /// CNR matrix, `H[k][n]`.
    pub fn cnr(&self) -> &[Vec<f64>] {
        &self.cnr
    }

    /// CNR row of one user.
    pub fn user_cnr(&self, user: usize) -> &[f64] {
        &self.cnr[user]
    }

    /// Power gain `h²` of one user on one subcarrier.
    pub fn power_gain(&self, user: usize, subcarrier: usize) -> f64 {
        let h = self.gains[user][subcarrier];
        h * h
    }
}

/// Computes `σ² = N0·B/N` and `H = h²/σ²` for a gain matrix.
pub fn channel_to_noise(config: &SystemConfig, gains: Vec<Vec<f64>>) -> Result<ChannelRealization> {
    if gains.len() != config.num_users
        || gains.iter().any(|row| row.len() != config.num_subcarriers)
    {
        return invalid(format!(
            "gain matrix must be {}x{}",
            config.num_users, config.num_subcarriers
        ));
    }
    let sigma2 = config.noise_power();
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return invalid("noise power must be positive");
    }
    from_gains(gains, sigma2)
}

fn from_gains(gains: Vec<Vec<f64>>, noise_power: f64) -> Result<ChannelRealization> {
    let width = gains.first().map_or(0, Vec::len);
    if gains.iter().any(|row| row.len() != width) {
        return invalid("gain matrix rows differ in length");
    }
    if gains.iter().flatten().any(|&h| !(h.is_finite() && h > 0.0)) {
        return invalid("channel gains must be finite and strictly positive");
    }
    let cnr = gains
        .iter()
        .map(|row| row.iter().map(|&h| h * h / noise_power).collect())
        .collect();
    Ok(ChannelRealization {
        gains,
        noise_power,
        cnr,
    })
}

/// SplitMix64 finalizer; used to derive independent per-user RNG streams.
pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Relative power of each tap of the exponential power-delay profile,
/// normalized to unit total power.
fn power_delay_profile(num_taps: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..num_taps).map(|l| (-(l as f64)).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|p| p / total).collect()
}

/// Draws one frequency-selective Rayleigh realization.
///
/// Each user gets an independent `num_taps`-tap complex Gaussian impulse
/// response with an exponential power-delay profile (tap `l` has power
/// proportional to `e^-l`, unit total power). The amplitude of its
/// `N`-point frequency response is the gain `h[k][n]`. User `k` draws from a
/// ChaCha8 stream seeded with `seed ^ splitmix64(k)`, so a user's channel
/// does not depend on how many other users are generated or in which order.
pub fn generate_channel(
    config: &SystemConfig,
    seed: u64,
    num_taps: usize,
) -> Result<ChannelRealization> {
    let n = config.num_subcarriers;
    if num_taps < 1 || num_taps > n {
        return invalid(format!("tap count {num_taps} must lie in [1, {n}]"));
    }
    let profile = power_delay_profile(num_taps);
    let gains = (0..config.num_users)
        .map(|user| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ splitmix64(user as u64));
            let taps: Vec<(f64, f64)> = profile
                .iter()
                .map(|&p| {
                    let scale = (p / 2.0).sqrt();
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    (scale * re, scale * im)
                })
                .collect();
            (0..n)
                .map(|bin| {
                    let (mut re, mut im) = (0.0, 0.0);
                    for (l, &(tr, ti)) in taps.iter().enumerate() {
                        let phase = -2.0 * PI * (l * bin % n) as f64 / n as f64;
                        let (s, c) = phase.sin_cos();
                        re += tr * c - ti * s;
                        im += tr * s + ti * c;
                    }
                    re.hypot(im)
                })
                .collect()
        })
        .collect();
    channel_to_noise(config, gains)
}

/// Exclusive subcarrier-to-user mapping.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    owner: Vec<Option<usize>>,
}

/// Marker for a subcarrier without an owner.
pub const UNASSIGNED: Option<usize> = None;

impl Assignment {
    pub fn unassigned(num_subcarriers: usize) -> Self {
        Self {
            owner: vec![UNASSIGNED; num_subcarriers],
        }
    }

    /// Builds a complete assignment from an owner list.
    pub fn from_owners(owners: &[usize]) -> Self {
        Self {
            owner: owners.iter().copied().map(Some).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.owner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.owner.is_empty()
    }

    pub fn owner(&self, subcarrier: usize) -> Option<usize> {
        self.owner[subcarrier]
    }

    pub fn owners(&self) -> &[Option<usize>] {
        &self.owner
    }

    pub fn is_assigned(&self, subcarrier: usize) -> bool {
        self.owner[subcarrier].is_some()
    }

    /// Gives `subcarrier` to `user`. Panics if it already has an owner.
    pub fn assign(&mut self, subcarrier: usize, user: usize) {
        assert!(
            self.owner[subcarrier].is_none(),
            "subcarrier {subcarrier} is already assigned"
        );
        self.owner[subcarrier] = Some(user);
    }

    /// Moves ownership regardless of the current owner.
    pub fn reassign(&mut self, subcarrier: usize, user: usize) {
        self.owner[subcarrier] = Some(user);
    }

    pub fn is_complete(&self) -> bool {
        self.owner.iter().all(Option::is_some)
    }

    pub fn subcarriers_of(&self, user: usize) -> Vec<usize> {
        self.owner
            .iter()
            .enumerate()
            .filter(|(_, o)| **o == Some(user))
            .map(|(n, _)| n)
            .collect()
    }

    /// Number of subcarriers held by each of `num_users` users.
    pub fn counts(&self, num_users: usize) -> Vec<usize> {
        let mut counts = vec![0; num_users];
        for k in self.owner.iter().flatten() {
            counts[*k] += 1;
        }
        counts
    }
}

/// Output of every allocator: who owns what, at which power, and the
/// resulting per-user rates (bits/s/Hz) and per-subcarrier bit loads.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationResult {
    pub assignment: Assignment,
    /// `power[k][n]`, zero wherever user `k` does not own `n`.
    pub power: Vec<Vec<f64>>,
    pub rates: Vec<f64>,
    /// Integer bits per subcarrier; all zero for capacity-only allocators.
    pub bits: Vec<u32>,
    pub total_power_used: f64,
}

impl AllocationResult {
    pub fn total_rate(&self) -> f64 {
        self.rates.iter().sum()
    }

    /// Checks ownership, non-negativity and, if given, the power budget.
    pub fn check(&self, budget: Option<f64>) -> Result<()> {
        if !self.assignment.is_complete() {
            return invalid("allocation leaves subcarriers unassigned");
        }
        let mut total = 0.0;
        for (k, row) in self.power.iter().enumerate() {
            for (n, &p) in row.iter().enumerate() {
                if !(p >= 0.0 && p.is_finite()) {
                    return invalid(format!("power[{k}][{n}] = {p}"));
                }
                if p > 0.0 && self.assignment.owner(n) != Some(k) {
                    return invalid(format!("user {k} has power on subcarrier {n} it does not own"));
                }
                total += p;
            }
        }
        if let Some(budget) = budget {
            if total > budget * (1.0 + 1e-9) {
                return invalid(format!("power {total} exceeds budget {budget}"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_power_from_psd() {
        let mut cfg = SystemConfig::new(1, 64);
        cfg.noise_psd = 1e-8;
        cfg.bandwidth = 1e6;
        assert!((cfg.noise_power() - 1.5625e-4).abs() < 1e-18);
    }

    #[test]
    fn cnr_identity_and_arithmetic() {
        let cfg = SystemConfig::new(1, 2);
        assert_eq!(cfg.noise_power(), 1.0);
        let ch = channel_to_noise(&cfg, vec![vec![1.0, 2.0]]).unwrap();
        assert_eq!(ch.cnr()[0], vec![1.0, 4.0]);

        let mut cfg = SystemConfig::new(1, 1);
        cfg.set_noise_power(0.5);
        let ch = channel_to_noise(&cfg, vec![vec![2.0]]).unwrap();
        assert!((ch.cnr()[0][0] - 8.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_positive_gain() {
        let cfg = SystemConfig::new(1, 2);
        assert!(channel_to_noise(&cfg, vec![vec![1.0, 0.0]]).is_err());
        assert!(channel_to_noise(&cfg, vec![vec![1.0, -1.0]]).is_err());
        assert!(channel_to_noise(&cfg, vec![vec![1.0]]).is_err());
    }

    #[test]
    fn tap_count_bounds() {
        let cfg = SystemConfig::new(2, 8);
        assert!(generate_channel(&cfg, 1, 0).is_err());
        assert!(generate_channel(&cfg, 1, 9).is_err());
        assert!(generate_channel(&cfg, 1, 8).is_ok());
    }

    #[test]
    fn deterministic_and_order_independent() {
        let cfg = SystemConfig::new(3, 16);
        let a = generate_channel(&cfg, 99, 4).unwrap();
        let b = generate_channel(&cfg, 99, 4).unwrap();
        assert_eq!(a, b);
        let c = generate_channel(&cfg, 100, 4).unwrap();
        assert_ne!(a, c);
        // user 0's stream does not depend on how many users are drawn
        let single = generate_channel(&SystemConfig::new(1, 16), 99, 4).unwrap();
        assert_eq!(single.gains()[0], a.gains()[0]);
    }

    #[test]
    fn single_tap_is_flat() {
        let cfg = SystemConfig::new(2, 32);
        let ch = generate_channel(&cfg, 5, 1).unwrap();
        for row in ch.gains() {
            for &h in row {
                assert!((h - row[0]).abs() <= 1e-12 * row[0]);
            }
        }
    }

    #[test]
    fn cnr_times_noise_equals_gain_squared() {
        let mut cfg = SystemConfig::new(4, 64);
        cfg.set_noise_power(3.7e-5);
        let ch = generate_channel(&cfg, 7, 6).unwrap();
        for k in 0..4 {
            for n in 0..64 {
                let h = ch.gains()[k][n];
                let lhs = ch.cnr()[k][n] * ch.noise_power();
                assert!((lhs - h * h).abs() <= 1e-12 * h * h);
            }
        }
    }

    #[test]
    fn unit_average_power() {
        // Monte-Carlo check of the profile normalization: E[h²] = 1.
        let cfg = SystemConfig::new(1, 64);
        let mut sum = 0.0;
        let seeds = 10_000u64;
        for seed in 0..seeds {
            let ch = generate_channel(&cfg, seed, 4).unwrap();
            sum += ch.gains()[0].iter().map(|h| h * h).sum::<f64>() / 64.0;
        }
        let mean = sum / seeds as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean h² = {mean}");
    }

    #[test]
    fn assignment_bookkeeping() {
        let mut a = Assignment::unassigned(3);
        a.assign(0, 1);
        a.assign(2, 1);
        assert!(!a.is_complete());
        a.assign(1, 0);
        assert!(a.is_complete());
        assert_eq!(a.subcarriers_of(1), vec![0, 2]);
        assert_eq!(a.counts(2), vec![1, 2]);
    }

    #[test]
    fn config_validation() {
        assert!(SystemConfig::new(2, 2).validate().is_ok());
        assert!(SystemConfig::new(3, 2).validate().is_err());
        assert!(SystemConfig::new(0, 2).validate().is_err());
        let mut c = SystemConfig::new(2, 4);
        c.snr_gap = 0.5;
        assert!(c.validate().is_err());
        let mut c = SystemConfig::new(2, 4);
        c.rate_ratios[1] = 0.0;
        assert!(c.validate().is_err());
        let mut c = SystemConfig::new(2, 4);
        c.max_bits_per_subcarrier = 0;
        assert!(c.validate().is_err());
    }
}
