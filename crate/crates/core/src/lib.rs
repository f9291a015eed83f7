//! Resource allocation for downlink OFDMA.
//!
//! The crate covers the rate-adaptive baselines (root-finding, linear and
//! joint subcarrier/power allocation under proportional-rate constraints),
//! discrete bit loading, a three-phase margin-adaptive allocator that
//! minimizes transmit power for per-user bit targets, OFDMA symbol
//! parameter derivation, and a deterministic Monte-Carlo harness.
//!
//! Notation used throughout: `K` users share `N` subcarriers, `h[k][n]` is
//! the amplitude gain of user `k` on subcarrier `n`, `σ² = N0·B/N` is the
//! per-subcarrier noise power and `H[k][n] = h²/σ²` is the channel-to-noise
//! ratio (CNR).

pub mod allocators;
pub mod bitloading;
pub mod error;
pub mod oracle;
pub mod params;
pub mod proposed;
pub mod sim;
pub mod system;
pub mod waterfill;

pub use error::{Error, Result};
pub use system::{
    channel_to_noise, generate_channel, AllocationResult, Assignment, ChannelRealization,
    SystemConfig, UNASSIGNED,
};
