//! Closed-form Euclidean projection onto the feasible set: the nonnegative
//! orthant intersected with a per-AP ball of radius sqrt(1/N).
//!
//! Each AP's coefficient vector projects independently: clip negatives, then
//! rescale onto the ball if the clipped vector is too long. Because the
//! orthant is a cone, composing the two elementary projections is exact.

use ndarray::Array2;

use crate::model::PowerAllocation;

/// Default feasibility tolerance; absorbs rounding accumulated over many
/// thousands of projected iterates.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Relative slack on the squared-radius comparison. Points within rounding
/// distance of the boundary count as interior, which makes the projection
/// exactly idempotent: rescaled rows re-enter the slack band and are left
/// untouched on a second pass.
const BOUNDARY_BAND: f64 = 1e-12;

/// Projects a user-major matrix onto the feasible set for `antennas_per_ap`
/// antennas. Rows and columns keep their meaning: entry `(k, m)` is user `k`
/// at AP `m`, and the constraint acts on each AP column.
pub fn project(x: &Array2<f64>, antennas_per_ap: usize) -> PowerAllocation {
    let mut data = x.clone();
    project_in_place(&mut data, antennas_per_ap);
    PowerAllocation::from_user_major(data)
}

pub(crate) fn project_in_place(x: &mut Array2<f64>, antennas_per_ap: usize) {
    let (k_users, m_aps) = x.dim();
    let radius_sq = 1.0 / antennas_per_ap as f64;
    for m in 0..m_aps {
        let mut norm_sq = 0.0;
        for k in 0..k_users {
            let v = x[[k, m]].max(0.0);
            x[[k, m]] = v;
            norm_sq += v * v;
        }
        if norm_sq > radius_sq * (1.0 + BOUNDARY_BAND) {
            let scale = (radius_sq / norm_sq).sqrt();
            for k in 0..k_users {
                x[[k, m]] *= scale;
            }
        }
    }
}

/// Whether every entry is nonnegative and every AP stays within its power
/// budget, both up to `tol`.
pub fn is_feasible(mu: &PowerAllocation, antennas_per_ap: usize, tol: f64) -> bool {
    let data = mu.user_major();
    if data.iter().any(|&v| v < -tol) {
        return false;
    }
    let radius_sq = 1.0 / antennas_per_ap as f64;
    (0..mu.num_aps()).all(|m| mu.ap_norm_sq(m) <= radius_sq + tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn row_matrix(values: &[f64]) -> Array2<f64> {
        // one AP, len(values) users
        Array2::from_shape_fn((values.len(), 1), |(k, _)| values[k])
    }

    #[test]
    fn interior_point_unchanged() {
        let x = row_matrix(&[0.3, 0.4]);
        let p = project(&x, 1);
        assert_eq!(p.user_major(), &x);
    }

    #[test]
    fn negative_entries_clip_then_pass() {
        let x = row_matrix(&[-0.2, 0.5]);
        let p = project(&x, 1);
        assert_eq!(p.get(0, 0), 0.0);
        assert_eq!(p.get(0, 1), 0.5);
    }

    #[test]
    fn oversized_row_rescales_onto_ball() {
        let x = row_matrix(&[3.0, 4.0]);
        let p = project(&x, 4); // radius 0.5, so the 3-4-5 triangle scales by 0.1
        assert!((p.get(0, 0) - 0.3).abs() < 1e-15);
        assert!((p.get(0, 1) - 0.4).abs() < 1e-15);
        assert!((p.ap_norm_sq(0) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn projection_is_exactly_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for n in [1usize, 2, 4] {
            for _ in 0..200 {
                let x = Array2::from_shape_fn((5, 3), |_| rng.random_range(-1.5..1.5));
                let once = project(&x, n);
                let twice = project(once.user_major(), n);
                assert_eq!(once, twice);
            }
        }
    }

    #[test]
    fn output_is_feasible_at_tight_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x = Array2::from_shape_fn((6, 4), |_| rng.random_range(-2.0..2.0));
            let p = project(&x, 2);
            assert!(is_feasible(&p, 2, 1e-12));
        }
        assert!(is_feasible(&PowerAllocation::zeros(4, 6), 2, 0.0));
    }

    #[test]
    fn single_hot_entry_is_infeasible() {
        for n in [1usize, 4] {
            let mut mu = PowerAllocation::zeros(2, 2);
            mu.set(0, 0, (1.0 / n as f64).sqrt() + 0.01);
            assert!(!is_feasible(&mu, n, 1e-6));
        }
    }

    #[test]
    fn rows_project_independently() {
        let x = arr2(&[[1.0, -0.3], [2.0, 0.1], [2.0, 0.2]]); // 2 APs, 3 users
        let whole = project(&x, 1);
        for m in 0..2 {
            let col = Array2::from_shape_fn((3, 1), |(k, _)| x[[k, m]]);
            let alone = project(&col, 1);
            for k in 0..3 {
                assert_eq!(whole.get(m, k), alone.get(0, k));
            }
        }
    }

    #[test]
    fn non_expansive_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let x = Array2::from_shape_fn((4, 3), |_| rng.random_range(-2.0..2.0));
            let y = Array2::from_shape_fn((4, 3), |_| rng.random_range(-2.0..2.0));
            let px = project(&x, 2);
            let py = project(&y, 2);
            let d_in: f64 = (&x - &y).iter().map(|v| v * v).sum::<f64>().sqrt();
            let d_out: f64 = (px.user_major() - py.user_major())
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt();
            assert!(d_out <= d_in * (1.0 + 1e-12) + 1e-12);
        }
    }
}
