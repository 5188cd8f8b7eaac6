//! Config-driven experiment runner for the cell-free downlink power control
//! library: drop archives, single solves, study sweeps, and timing tables,
//! all emitted as CSV.

pub mod config;
pub mod experiments;
pub mod stats;
pub mod timing;

/// Nats to bits conversion for reported spectral efficiencies.
pub fn nats_to_bits(se_nats: f64) -> f64 {
    se_nats / std::f64::consts::LN_2
}
