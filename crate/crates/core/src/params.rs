//! OFDMA symbol parameters: primitive inputs and the quantities derived
//! from them (FFT size, sampling rate, spacing and symbol timing).

use num_rational::Ratio;

use crate::error::{invalid, Result};

/// Cyclic-prefix ratios that must be supported.
pub const SUPPORTED_CP_RATIOS: [(u64, u64); 4] = [(1, 32), (1, 16), (1, 8), (1, 4)];

#[derive(Debug, Clone, PartialEq)]
pub struct PrimitiveParams {
    /// Nominal channel bandwidth in hertz.
    pub bandwidth_hz: u64,
    /// Used subcarriers, DC included.
    pub used_subcarriers: u64,
    pub sampling_factor: Ratio<u64>,
    /// Ratio of cyclic-prefix time to useful symbol time.
    pub cp_ratio: Ratio<u64>,
}

impl PrimitiveParams {
    /// Primitives with the default sampling factor `8/7`.
    pub fn new(bandwidth_hz: u64, used_subcarriers: u64, cp_ratio: Ratio<u64>) -> Self {
        Self {
            bandwidth_hz,
            used_subcarriers,
            sampling_factor: Ratio::new(8, 7),
            cp_ratio,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivedParams {
    pub fft_size: u64,
    /// Sampling frequency in hertz, a multiple of 8 kHz.
    pub sampling_frequency_hz: u64,
    pub subcarrier_spacing_hz: f64,
    pub useful_symbol_time_s: f64,
    pub cp_time_s: f64,
    pub symbol_time_s: f64,
    pub sample_time_s: f64,
}

impl DerivedParams {
    /// `(name, value, unit)` rows in a fixed order.
    pub fn table(&self) -> Vec<(&'static str, String, &'static str)> {
        vec![
            ("N_FFT", self.fft_size.to_string(), "-"),
            ("F_s", self.sampling_frequency_hz.to_string(), "Hz"),
            ("delta_f", format!("{}", self.subcarrier_spacing_hz), "Hz"),
            ("T_b", format!("{:e}", self.useful_symbol_time_s), "s"),
            ("T_g", format!("{:e}", self.cp_time_s), "s"),
            ("T_s", format!("{:e}", self.symbol_time_s), "s"),
            ("sample_time", format!("{:e}", self.sample_time_s), "s"),
        ]
    }
}

/// Computes derived parameters. `N_FFT` is the smallest power of two not
/// below `N_used`; `F_s = floor(n·BW/8000)·8000` in exact integer arithmetic.
pub fn derive_params(p: &PrimitiveParams) -> Result<DerivedParams> {
    if p.bandwidth_hz == 0 {
        return invalid("bandwidth must be positive");
    }
    if p.used_subcarriers == 0 {
        return invalid("at least one used subcarrier is required");
    }
    if *p.sampling_factor.numer() == 0 || *p.sampling_factor.denom() == 0 {
        return invalid("sampling factor must be positive");
    }
    if !SUPPORTED_CP_RATIOS
        .iter()
        .any(|&(n, d)| Ratio::new(n, d) == p.cp_ratio)
    {
        return invalid(format!(
            "cyclic-prefix ratio {} is not one of 1/32, 1/16, 1/8, 1/4",
            p.cp_ratio
        ));
    }
    let fft_size = p.used_subcarriers.next_power_of_two();
    let scaled = *p.sampling_factor.numer() as u128 * p.bandwidth_hz as u128;
    let blocks = scaled / (*p.sampling_factor.denom() as u128 * 8000);
    let sampling_frequency_hz = u64::try_from(blocks * 8000)
        .map_err(|_| crate::Error::InvalidArgument("sampling frequency overflows".into()))?;
    if sampling_frequency_hz == 0 {
        return invalid("sampling frequency rounds down to zero");
    }

    let subcarrier_spacing_hz = sampling_frequency_hz as f64 / fft_size as f64;
    let useful_symbol_time_s = 1.0 / subcarrier_spacing_hz;
    let g = *p.cp_ratio.numer() as f64 / *p.cp_ratio.denom() as f64;
    let cp_time_s = g * useful_symbol_time_s;
    Ok(DerivedParams {
        fft_size,
        sampling_frequency_hz,
        subcarrier_spacing_hz,
        useful_symbol_time_s,
        cp_time_s,
        symbol_time_s: useful_symbol_time_s + cp_time_s,
        sample_time_s: useful_symbol_time_s / fft_size as f64,
    })
}
