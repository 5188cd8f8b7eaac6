//! Downlink power control for cell-free massive MIMO.
//!
//! The crate generates network drops from large-scale statistics, evaluates
//! per-user SINR and spectral efficiency in normalized power coordinates, and
//! maximizes four system utilities (average SE, proportional fairness,
//! harmonic rate, minimum rate) over per-AP power budgets with a monotone
//! accelerated projected gradient method. Every solver step is a closed-form
//! expression and only first-order information is used, so instances with
//! thousands of APs fit comfortably in memory.
//!
//! Typical flow:
//!
//! ```
//! use cellfree_core::{build_coefficients, epa_allocation, generate_drop,
//!                     solve, DropConfig, SolverOptions, UtilityKind};
//!
//! let cfg = DropConfig { num_aps: 30, num_users: 8, ..DropConfig::default() };
//! let drop = generate_drop(&cfg, 7).unwrap();
//! let coeffs = build_coefficients(&drop).unwrap();
//! let start = epa_allocation(&drop);
//! let trace = solve(&coeffs, &UtilityKind::se_max(), &SolverOptions::default(), &start).unwrap();
//! assert!(trace.objective() >= trace.objectives[0]);
//! ```

pub mod error;
pub mod feasible_set;
pub mod model;
pub mod objectives;
pub mod scenario;
pub mod solver;

pub use error::{Error, Result};
pub use feasible_set::{is_feasible, project, FEASIBILITY_TOL};
pub use model::{
    build_coefficients, sinr, spectral_efficiency, total_se, Coefficients, PowerAllocation,
};
pub use objectives::{evaluate, gradient, se_partials, UtilityKind, DEFAULT_EPSILON};
pub use scenario::{
    assign_pilots, channel_stats, generate_drop, normalized_snrs, path_loss_db, DropConfig,
    PathLossParams, PilotAssignment, RadioParams, Scenario,
};
pub use solver::{
    bb_step, epa_allocation, estimate_gradient_lipschitz, select_aps, solve, solve_masked,
    solve_multi_start, BbRule, SolverOptions, SolverTrace, Variant,
};
