use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_rational::Ratio;
use ofdma_core::oracle::run_oracle_checks;
use ofdma_core::params::{derive_params, PrimitiveParams};
use ofdma_core::sim::{
    run_capacity_sweep, run_fairness_experiment, write_csv, write_csv_to, CapacityRow,
    ExperimentSpec, Method, TARGET_ROW,
};
use ofdma_core::Error;

#[derive(Parser, Debug)]
#[command(name = "ofdma-sim", version, about = "Downlink OFDMA allocation experiments")]
struct Cli {
    /// Worker threads for realizations (0 = one per core). Output does not
    /// depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Mean total capacity versus number of users.
    Sweep(ExperimentArgs),
    /// Per-user normalized capacity ratios at one user count (default 16).
    Fairness(ExperimentArgs),
    /// Derived OFDMA symbol parameters.
    Params(ParamsArgs),
    /// Brute-force comparisons on small random instances.
    Oracle(OracleArgs),
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// `key = value` file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated methods: rootfinding, linear, joint, proposed, bestgain-equal-power.
    #[arg(long)]
    method: Option<String>,
    /// Comma-separated user counts.
    #[arg(long)]
    users: Option<String>,
    #[arg(long)]
    subcarriers: Option<usize>,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Mean subchannel SNR in dB.
    #[arg(long = "snr-db")]
    snr_db: Option<f64>,
    /// Linear SNR gap.
    #[arg(long)]
    gap: Option<f64>,
    /// Leave the SNR gap out of the capacity formula.
    #[arg(long = "no-capacity-gap")]
    no_capacity_gap: bool,
    /// Comma-separated rate-ratio pattern, tiled over users.
    #[arg(long)]
    ratios: Option<String>,
    #[arg(long)]
    taps: Option<usize>,
    /// Total transmit power in watts.
    #[arg(long)]
    power: Option<f64>,
    /// Modulation cap in bits per subcarrier.
    #[arg(long = "max-bits")]
    max_bits: Option<u32>,
    /// Mean bits per subcarrier requested by the proposed method.
    #[arg(long = "load-bits")]
    load_bits: Option<f64>,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ParamsArgs {
    /// Nominal channel bandwidth in hertz.
    #[arg(long, default_value_t = 10_000_000)]
    bandwidth: u64,
    /// Used subcarriers including DC.
    #[arg(long, default_value_t = 840)]
    used: u64,
    /// Sampling factor as a fraction.
    #[arg(long, default_value = "8/7")]
    sampling: String,
    /// Cyclic-prefix ratio: 1/32, 1/16, 1/8 or 1/4.
    #[arg(long, default_value = "1/8")]
    cp: String,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Instances per check.
    #[arg(long, default_value_t = 200)]
    instances: usize,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidArgument(_) => 2,
        Error::InfeasibleConfiguration(_) | Error::InfeasibleRate { .. } => 3,
        Error::ConvergenceFailure(_) => 4,
        Error::Io(_) | Error::Csv(_) => 1,
    }
}

fn build_spec(args: &ExperimentArgs, mut spec: ExperimentSpec) -> Result<ExperimentSpec, Error> {
    if let Some(path) = &args.config {
        spec.apply_config(&std::fs::read_to_string(path)?)?;
    }
    let mut set = |key: &str, value: Option<String>| -> Result<(), Error> {
        match value {
            Some(v) => spec.set(key, &v),
            None => Ok(()),
        }
    };
    set("methods", args.method.clone())?;
    set("user_counts", args.users.clone())?;
    set("num_subcarriers", args.subcarriers.map(|v| v.to_string()))?;
    set("num_realizations", args.realizations.map(|v| v.to_string()))?;
    set("master_seed", args.seed.map(|v| v.to_string()))?;
    set("avg_snr_db", args.snr_db.map(|v| v.to_string()))?;
    set("snr_gap", args.gap.map(|v| v.to_string()))?;
    set("rate_ratios", args.ratios.clone())?;
    set("taps", args.taps.map(|v| v.to_string()))?;
    set("total_power", args.power.map(|v| v.to_string()))?;
    set("max_bits_per_subcarrier", args.max_bits.map(|v| v.to_string()))?;
    set("load_bits", args.load_bits.map(|v| v.to_string()))?;
    if args.no_capacity_gap {
        spec.gap_in_capacity = false;
    }
    spec.validate()?;
    Ok(spec)
}

fn emit(rows: &[CapacityRow], out: Option<&PathBuf>) -> Result<(), Error> {
    for row in rows.iter().filter(|r| r.method != TARGET_ROW) {
        let power = if row.method == Method::Proposed.name() {
            format!(" power={:.6e}", row.power_mean)
        } else {
            String::new()
        };
        eprintln!(
            "{:<22} K={:<3} capacity={:.4} se={:.4} deviation={:.4}{power}",
            row.method, row.users, row.capacity_mean, row.capacity_se, row.deviation
        );
    }
    match out {
        Some(path) => write_csv(rows, path),
        None => write_csv_to(rows, std::io::stdout().lock()),
    }
}

fn parse_ratio(text: &str) -> Result<Ratio<u64>, Error> {
    let bad = || Error::InvalidArgument(format!("`{text}` is not a fraction like 8/7"));
    let (num, den) = text.split_once('/').unwrap_or((text, "1"));
    let num: u64 = num.trim().parse().map_err(|_| bad())?;
    let den: u64 = den.trim().parse().map_err(|_| bad())?;
    if den == 0 {
        return Err(bad());
    }
    Ok(Ratio::new(num, den))
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Sweep(args) => {
            let spec = build_spec(&args, ExperimentSpec::default())?;
            emit(&run_capacity_sweep(&spec)?, args.out.as_ref())
        }
        Command::Fairness(args) => {
            let base = ExperimentSpec {
                user_counts: vec![16],
                ..ExperimentSpec::default()
            };
            let spec = build_spec(&args, base)?;
            emit(&run_fairness_experiment(&spec)?, args.out.as_ref())
        }
        Command::Params(args) => {
            let primitives = PrimitiveParams {
                bandwidth_hz: args.bandwidth,
                used_subcarriers: args.used,
                sampling_factor: parse_ratio(&args.sampling)?,
                cp_ratio: parse_ratio(&args.cp)?,
            };
            let derived = derive_params(&primitives)?;
            let mut stdout = std::io::stdout().lock();
            for (name, value, unit) in derived.table() {
                writeln!(stdout, "{name} {value} {unit}")?;
            }
            Ok(())
        }
        Command::Oracle(args) => {
            let checks = run_oracle_checks(args.seed, args.instances)?;
            let mut stdout = std::io::stdout().lock();
            for c in &checks {
                let verdict = if c.passed() { "PASS" } else { "FAIL" };
                writeln!(
                    stdout,
                    "{verdict} {} instances={} failures={} worst={:e}",
                    c.name, c.instances, c.failures, c.worst
                )?;
            }
            if checks.iter().all(|c| c.passed()) {
                Ok(())
            } else {
                Err(Error::ConvergenceFailure("oracle mismatch".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
