//! Property tests for the projection and the coordinate change.

use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cellfree_core::{
    build_coefficients, generate_drop, is_feasible, project, spectral_efficiency, DropConfig,
    PowerAllocation, RadioParams, Scenario,
};

fn matrix(k: usize, m: usize, values: Vec<f64>) -> Array2<f64> {
    Array2::from_shape_vec((k, m), values).unwrap()
}

fn l2(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

proptest! {
    #[test]
    fn projection_idempotent_feasible_nonexpansive(
        values_x in proptest::collection::vec(-2.0f64..2.0, 12),
        values_y in proptest::collection::vec(-2.0f64..2.0, 12),
        n in prop_oneof![Just(1usize), Just(2), Just(4)],
    ) {
        let x = matrix(4, 3, values_x);
        let y = matrix(4, 3, values_y);
        let px = project(&x, n);
        let py = project(&y, n);

        prop_assert!(is_feasible(&px, n, 1e-12));
        prop_assert_eq!(&project(px.user_major(), n), &px);

        let d_in = l2(&x, &y);
        let d_out = l2(px.user_major(), py.user_major());
        prop_assert!(d_out <= d_in * (1.0 + 1e-12) + 1e-12);

        // no feasible point sits closer to the input than the projection
        let dist_p = l2(px.user_major(), &x);
        let dist_z = l2(py.user_major(), &x);
        prop_assert!(dist_p <= dist_z + 1e-12);
    }

    #[test]
    fn per_ap_columns_project_independently(
        values in proptest::collection::vec(-3.0f64..3.0, 15),
        n in prop_oneof![Just(1usize), Just(3)],
    ) {
        let x = matrix(3, 5, values);
        let whole = project(&x, n);
        for m in 0..5 {
            let column = Array2::from_shape_fn((3, 1), |(k, _)| x[[k, m]]);
            let alone = project(&column, n);
            for k in 0..3 {
                prop_assert_eq!(whole.get(m, k), alone.get(0, k));
            }
        }
    }
}

/// Per-user rates evaluated directly in the original power coordinates,
/// from the drop statistics alone. Kept independent of the library's
/// assembled-coefficient path on purpose.
fn eta_space_se(s: &Scenario, eta: &Array2<f64>) -> Vec<f64> {
    let n = s.antennas_per_ap as f64;
    let zd = s.zeta_d;
    let k_users = s.num_users;
    let m_aps = s.num_aps;
    let sqrt_eta = eta.mapv(f64::sqrt);
    let mut se = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let mut signal = 0.0;
        for m in 0..m_aps {
            signal += s.nu[[k, m]] * sqrt_eta[[k, m]];
        }
        let mut cross = 0.0;
        for i in 0..k_users {
            if i == k {
                continue;
            }
            let g = s.pilot_gram[[i, k]];
            if g == 0.0 {
                continue;
            }
            let mut dot = 0.0;
            for m in 0..m_aps {
                dot += s.nu[[i, m]] * (s.beta[[k, m]] / s.beta[[i, m]]) * sqrt_eta[[i, m]];
            }
            cross += (g * dot) * (g * dot);
        }
        let mut uncertainty = 0.0;
        for i in 0..k_users {
            for m in 0..m_aps {
                uncertainty += s.nu[[i, m]] * s.beta[[k, m]] * eta[[i, m]];
            }
        }
        let gamma =
            zd * n * n * signal * signal / (zd * n * n * cross + zd * n * uncertainty + 1.0);
        se.push(s.prelog * gamma.ln_1p());
    }
    se
}

#[test]
fn coordinate_change_matches_eta_space_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for (seed, pilot_len, n) in [(1u64, 2usize, 1usize), (2, 4, 2), (3, 8, 4)] {
        let cfg = DropConfig {
            num_aps: 12,
            num_users: 6,
            antennas_per_ap: n,
            radio: RadioParams { pilot_len, ..RadioParams::default() },
            ..DropConfig::default()
        };
        let drop = generate_drop(&cfg, seed).unwrap();
        let coeffs = build_coefficients(&drop).unwrap();
        for _ in 0..5 {
            let scale = (1.0 / (n * 6) as f64).sqrt();
            let x = Array2::from_shape_fn((6, 12), |_| rng.random_range(-0.3 * scale..scale));
            let mu = project(&x, n);
            let se_mu = spectral_efficiency(&coeffs, &mu);

            let eta = Array2::from_shape_fn((6, 12), |(k, m)| {
                let v = mu.get(m, k);
                v * v / drop.nu[[k, m]]
            });
            let se_eta = eta_space_se(&drop, &eta);
            for (a, b) in se_mu.iter().zip(se_eta.iter()) {
                assert!(
                    (a - b).abs() <= 1e-12 * (1.0 + a.abs()),
                    "coordinate mismatch: {a} vs {b}"
                );
            }
        }
    }
}

#[test]
fn generated_allocations_round_trip_via_power_allocation() {
    let drop = generate_drop(&DropConfig { num_aps: 5, num_users: 3, ..Default::default() }, 4)
        .unwrap();
    let mu = cellfree_core::epa_allocation(&drop);
    let back = PowerAllocation::from_user_major(mu.user_major().clone());
    assert_eq!(mu, back);
}
