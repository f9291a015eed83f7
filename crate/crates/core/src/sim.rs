//! Monte-Carlo experiments: total capacity versus user count, per-user
//! proportionality, and CSV serialization of the aggregated rows.
//!
//! Realization `r` uses channel seed `master_seed + r` for every method, so
//! methods are compared on identical channels. Realizations may run on any
//! number of threads; results are gathered by index and reduced serially,
//! which keeps the output bit-identical across thread counts.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::allocators::{equal_power_allocate, joint_allocate, linear_allocate, rootfinding_allocate};
use crate::error::{invalid, Error, Result};
use crate::proposed::proposed_allocate;
use crate::system::{generate_channel, AllocationResult, ChannelRealization, SystemConfig};
use crate::waterfill::user_rate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    RootFinding,
    Linear,
    Joint,
    Proposed,
    BestGainEqualPower,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::RootFinding,
        Method::Linear,
        Method::Joint,
        Method::Proposed,
        Method::BestGainEqualPower,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::RootFinding => "rootfinding",
            Method::Linear => "linear",
            Method::Joint => "joint",
            Method::Proposed => "proposed",
            Method::BestGainEqualPower => "bestgain-equal-power",
        }
    }

    /// Whether the method maximizes rate under the power budget (as opposed
    /// to minimizing power for fixed bit targets).
    pub fn is_rate_adaptive(self) -> bool {
        self != Method::Proposed
    }

    pub fn allocate(
        self,
        config: &SystemConfig,
        channel: &ChannelRealization,
    ) -> Result<AllocationResult> {
        match self {
            Method::RootFinding => rootfinding_allocate(config, channel),
            Method::Linear => linear_allocate(config, channel),
            Method::Joint => joint_allocate(config, channel),
            Method::Proposed => proposed_allocate(config, channel),
            Method::BestGainEqualPower => equal_power_allocate(config, channel),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method `{s}`")))
    }
}

/// Parameters of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub methods: Vec<Method>,
    pub user_counts: Vec<usize>,
    pub num_subcarriers: usize,
    pub num_realizations: usize,
    pub master_seed: u64,
    /// Mean subchannel SNR `P_tot·E[h²]/(N·σ²)` in dB.
    pub avg_snr_db: f64,
    /// Linear SNR gap.
    pub snr_gap: f64,
    /// Apply the gap inside the capacity formula of the rate-adaptive methods.
    pub gap_in_capacity: bool,
    /// Rate-ratio pattern, tiled over users: user `k` gets `pattern[k % len]`.
    pub rate_ratios: Vec<f64>,
    pub taps: usize,
    pub total_power: f64,
    pub max_bits_per_subcarrier: u32,
    /// Mean bits per subcarrier requested from the margin-adaptive method;
    /// split over users in proportion to the rate ratios.
    pub load_bits: f64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            user_counts: vec![4, 8, 12, 16],
            num_subcarriers: 64,
            num_realizations: 100,
            master_seed: 1,
            avg_snr_db: 38.0,
            snr_gap: 3.3,
            gap_in_capacity: true,
            rate_ratios: vec![1.0, 2.0, 4.0],
            taps: 6,
            total_power: 1.0,
            max_bits_per_subcarrier: 8,
            load_bits: 4.0,
        }
    }
}

fn parse_list<T: FromStr>(value: &str, key: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad value `{s}` for `{key}`")))
        })
        .collect()
}

fn parse_one<T: FromStr>(value: &str, key: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad value `{value}` for `{key}`")))
}

/// Converts decibels to a linear ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl ExperimentSpec {
    /// Sets one field from its textual form. Keys are the field names.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key.trim() {
            "method" | "methods" => self.methods = parse_list(value, key)?,
            "user_counts" => self.user_counts = parse_list(value, key)?,
            "num_subcarriers" => self.num_subcarriers = parse_one(value, key)?,
            "num_realizations" => self.num_realizations = parse_one(value, key)?,
            "master_seed" => self.master_seed = parse_one(value, key)?,
            "avg_snr_db" => self.avg_snr_db = parse_one(value, key)?,
            "snr_gap" => self.snr_gap = parse_one(value, key)?,
            "snr_gap_db" => self.snr_gap = db_to_linear(parse_one(value, key)?),
            "gap_in_capacity" => self.gap_in_capacity = parse_one(value, key)?,
            "rate_ratios" => self.rate_ratios = parse_list(value, key)?,
            "taps" => self.taps = parse_one(value, key)?,
            "total_power" => self.total_power = parse_one(value, key)?,
            "max_bits_per_subcarrier" => self.max_bits_per_subcarrier = parse_one(value, key)?,
            "load_bits" => self.load_bits = parse_one(value, key)?,
            other => return invalid(format!("unknown config key `{other}`")),
        }
        Ok(())
    }

    /// Applies a line-oriented `key = value` config. `#` starts a comment.
    pub fn apply_config(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidArgument(format!("config line {}: expected `key = value`", lineno + 1))
            })?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return invalid("no methods selected");
        }
        if self.user_counts.is_empty() {
            return invalid("no user counts given");
        }
        if self.num_realizations == 0 {
            return invalid("need at least one realization");
        }
        if let Some(&k) = self
            .user_counts
            .iter()
            .find(|&&k| k == 0 || k > self.num_subcarriers)
        {
            return invalid(format!(
                "{k} users cannot share {} subcarriers",
                self.num_subcarriers
            ));
        }
        if self.taps == 0 || self.taps > self.num_subcarriers {
            return invalid(format!("tap count {} out of range", self.taps));
        }
        if self.rate_ratios.is_empty() || self.rate_ratios.iter().any(|&g| !(g > 0.0)) {
            return invalid("rate ratios must be positive");
        }
        if !(self.avg_snr_db.is_finite()) {
            return invalid("SNR must be finite");
        }
        if !(self.load_bits >= 0.0) {
            return invalid("load bits must be non-negative");
        }
        Ok(())
    }

    /// Rate ratios for `users` users.
    pub fn ratios_for(&self, users: usize) -> Vec<f64> {
        (0..users)
            .map(|k| self.rate_ratios[k % self.rate_ratios.len()])
            .collect()
    }

    /// Cell configuration for `users` users. Noise is set so the mean
    /// subchannel SNR under equal power equals `avg_snr_db`, given unit
    /// average channel power.
    pub fn system_config(&self, users: usize) -> Result<SystemConfig> {
        let n = self.num_subcarriers;
        let mut config = SystemConfig::new(users, n);
        config.total_power = self.total_power;
        config.snr_gap = self.snr_gap;
        config.max_bits_per_subcarrier = self.max_bits_per_subcarrier;
        config.rate_ratios = self.ratios_for(users);
        let ratio_sum: f64 = config.rate_ratios.iter().sum();
        config.rate_targets = config
            .rate_ratios
            .iter()
            .map(|g| (self.load_bits * n as f64 * g / ratio_sum).floor() as u32)
            .collect();
        config.set_noise_power(self.total_power / (n as f64 * db_to_linear(self.avg_snr_db)));
        config.validate()?;
        Ok(config)
    }
}

/// Aggregate of one method at one user count.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityRow {
    pub method: String,
    pub users: usize,
    /// Mean of `Σ_k R_k` in bits/s/Hz.
    pub capacity_mean: f64,
    pub capacity_se: f64,
    /// `max_k |r_k − γ_k/Σγ|` of the mean normalized ratios.
    pub deviation: f64,
    /// Mean of `R_k / Σ R`.
    pub ratios: Vec<f64>,
    /// Mean transmit power actually used.
    pub power_mean: f64,
}

/// Label of the pseudo-row carrying target ratios in fairness output.
pub const TARGET_ROW: &str = "target";

struct Sample {
    capacity: f64,
    ratios: Vec<f64>,
    power: f64,
}

fn sample(
    method: Method,
    spec: &ExperimentSpec,
    base: &SystemConfig,
    channel: &ChannelRealization,
) -> Result<Sample> {
    let mut config = base.clone();
    if method.is_rate_adaptive() && !spec.gap_in_capacity {
        config.snr_gap = 1.0;
    }
    let result = method.allocate(&config, channel)?;
    let gap = if spec.gap_in_capacity { spec.snr_gap } else { 1.0 };
    // recompute from the returned powers rather than trusting `rates`
    let rates = (0..base.num_users)
        .map(|k| user_rate(channel.user_cnr(k), &result.power[k], base.num_subcarriers, gap))
        .collect::<Result<Vec<f64>>>()?;
    let capacity: f64 = rates.iter().sum();
    let ratios = if capacity > 0.0 {
        rates.iter().map(|r| r / capacity).collect()
    } else {
        vec![1.0 / base.num_users as f64; base.num_users]
    };
    Ok(Sample {
        capacity,
        ratios,
        power: result.total_power_used,
    })
}

fn aggregate(method: Method, users: usize, targets: &[f64], samples: &[Sample]) -> CapacityRow {
    let count = samples.len() as f64;
    let capacity_mean = samples.iter().map(|s| s.capacity).sum::<f64>() / count;
    let capacity_se = if samples.len() > 1 {
        let var = samples
            .iter()
            .map(|s| (s.capacity - capacity_mean).powi(2))
            .sum::<f64>()
            / (count - 1.0);
        (var / count).sqrt()
    } else {
        0.0
    };
    let mut ratios = vec![0.0; users];
    for s in samples {
        for (acc, r) in ratios.iter_mut().zip(&s.ratios) {
            *acc += r;
        }
    }
    for r in &mut ratios {
        *r /= count;
    }
    let deviation = ratios
        .iter()
        .zip(targets)
        .map(|(r, t)| (r - t).abs())
        .fold(0.0, f64::max);
    CapacityRow {
        method: method.name().to_string(),
        users,
        capacity_mean,
        capacity_se,
        deviation,
        ratios,
        power_mean: samples.iter().map(|s| s.power).sum::<f64>() / count,
    }
}

fn normalized_targets(ratios: &[f64]) -> Vec<f64> {
    let sum: f64 = ratios.iter().sum();
    ratios.iter().map(|g| g / sum).collect()
}

fn run_for_users(spec: &ExperimentSpec, users: usize) -> Result<Vec<CapacityRow>> {
    let config = spec.system_config(users)?;
    let per_realization: Vec<Vec<Sample>> = (0..spec.num_realizations)
        .into_par_iter()
        .map(|r| {
            let seed = spec.master_seed.wrapping_add(r as u64);
            let channel = generate_channel(&config, seed, spec.taps)?;
            spec.methods
                .iter()
                .map(|&m| sample(m, spec, &config, &channel))
                .collect()
        })
        .collect::<Result<_>>()?;
    let targets = normalized_targets(&config.rate_ratios);
    Ok(spec
        .methods
        .iter()
        .enumerate()
        .map(|(i, &method)| {
            let samples: Vec<Sample> = per_realization
                .iter()
                .map(|row| {
                    let s = &row[i];
                    Sample {
                        capacity: s.capacity,
                        ratios: s.ratios.clone(),
                        power: s.power,
                    }
                })
                .collect();
            aggregate(method, users, &targets, &samples)
        })
        .collect())
}

/// Mean total capacity per method for each user count.
pub fn run_capacity_sweep(spec: &ExperimentSpec) -> Result<Vec<CapacityRow>> {
    spec.validate()?;
    let mut rows = Vec::new();
    for &users in &spec.user_counts {
        rows.extend(run_for_users(spec, users)?);
    }
    Ok(rows)
}

/// Per-user normalized capacity ratios at a single user count. The first
/// row, labelled [`TARGET_ROW`], carries the target ratios `γ_k/Σγ`.
pub fn run_fairness_experiment(spec: &ExperimentSpec) -> Result<Vec<CapacityRow>> {
    spec.validate()?;
    let [users] = spec.user_counts[..] else {
        return invalid("the fairness experiment takes exactly one user count");
    };
    let targets = normalized_targets(&spec.ratios_for(users));
    let mut rows = vec![CapacityRow {
        method: TARGET_ROW.to_string(),
        users,
        capacity_mean: 0.0,
        capacity_se: 0.0,
        deviation: 0.0,
        ratios: targets,
        power_mean: 0.0,
    }];
    rows.extend(run_for_users(spec, users)?);
    Ok(rows)
}

/// Formats `x` with nine significant digits in plain decimal notation.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".to_string() } else { x.to_string() };
    }
    // exponent after rounding to 9 significant digits
    let sci = format!("{x:.8e}");
    let exp: i32 = sci[sci.find('e').expect("exponent") + 1..]
        .parse()
        .expect("integer exponent");
    let decimals = (8 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Column names for rows with up to `max_users` ratio columns.
pub fn csv_header(max_users: usize) -> Vec<String> {
    let mut header: Vec<String> = ["method", "K", "capacity_mean", "capacity_se", "deviation"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..max_users).map(|k| format!("ratio_{k}")));
    header
}

/// Writes rows as CSV: `method,K,capacity_mean,capacity_se,deviation,ratio_0,…`.
/// Rows with fewer users leave their trailing ratio cells empty.
pub fn write_csv(rows: &[CapacityRow], destination: &Path) -> Result<()> {
    if rows.is_empty() {
        return invalid("no rows to write");
    }
    if destination.as_os_str().is_empty() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            "empty output path",
        )));
    }
    let file = std::fs::File::create(destination)?;
    write_csv_to(rows, file)
}

/// Writes the CSV form of `rows` to any writer.
pub fn write_csv_to<W: std::io::Write>(rows: &[CapacityRow], sink: W) -> Result<()> {
    let width = rows.iter().map(|r| r.ratios.len()).max().unwrap_or(0);
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(sink);
    writer.write_record(csv_header(width))?;
    for row in rows {
        let mut record = vec![
            row.method.clone(),
            row.users.to_string(),
            format_sig9(row.capacity_mean),
            format_sig9(row.capacity_se),
            format_sig9(row.deviation),
        ];
        record.extend(row.ratios.iter().map(|&r| format_sig9(r)));
        record.resize(5 + width, String::new());
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Parses CSV produced by [`write_csv`]. `power_mean` is not serialized and
/// reads back as zero.
pub fn read_csv(source: &Path) -> Result<Vec<CapacityRow>> {
    let mut reader = csv::Reader::from_path(source)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let field = |i: usize| record.get(i).unwrap_or("");
        let number = |i: usize| -> Result<f64> { parse_one(field(i), "csv field") };
        rows.push(CapacityRow {
            method: field(0).to_string(),
            users: parse_one(field(1), "K")?,
            capacity_mean: number(2)?,
            capacity_se: number(3)?,
            deviation: number(4)?,
            ratios: (5..record.len())
                .filter(|&i| !field(i).is_empty())
                .map(number)
                .collect::<Result<_>>()?,
            power_mean: 0.0,
        });
    }
    Ok(rows)
}
