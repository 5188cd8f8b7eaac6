//! Shared fixtures for the criterion benchmarks.

use cellfree_core::{
    build_coefficients, epa_allocation, generate_drop, Coefficients, DropConfig, PowerAllocation,
    RadioParams,
};

/// A built instance ready for objective/gradient/solver timing.
pub struct Fixture {
    pub coeffs: Coefficients,
    pub start: PowerAllocation,
}

/// Deterministic drop with the baseline radio parameters.
pub fn fixture(num_aps: usize, num_users: usize) -> Fixture {
    let cfg = DropConfig {
        num_aps,
        num_users,
        radio: RadioParams::default(),
        ..DropConfig::default()
    };
    let drop = generate_drop(&cfg, 42).expect("valid config");
    let coeffs = build_coefficients(&drop).expect("valid drop");
    let start = epa_allocation(&drop);
    Fixture { coeffs, start }
}
