//! SINR coefficients in normalized power coordinates and the per-user
//! spectral efficiency model.
//!
//! The optimization variable couples AP power budgets to estimate quality:
//! each entry is the square root of (power coefficient x estimate quality),
//! which makes the per-AP constraint a plain Euclidean ball and keeps the
//! objective gradients Lipschitz.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::scenario::Scenario;

/// The optimization variable: one nonnegative coefficient per (AP, user)
/// pair, stored user-major so each user's vector across APs is a contiguous
/// row. Feasibility means every AP row has squared norm at most 1/N.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    data: Array2<f64>, // (num_users, num_aps)
}

impl PowerAllocation {
    pub fn zeros(num_aps: usize, num_users: usize) -> Self {
        Self { data: Array2::zeros((num_users, num_aps)) }
    }

    /// Wraps a (num_users, num_aps) matrix.
    pub fn from_user_major(data: Array2<f64>) -> Self {
        Self { data }
    }

    pub fn num_aps(&self) -> usize {
        self.data.ncols()
    }

    pub fn num_users(&self) -> usize {
        self.data.nrows()
    }

    /// Entry for AP `ap` and user `user`.
    pub fn get(&self, ap: usize, user: usize) -> f64 {
        self.data[[user, ap]]
    }

    pub fn set(&mut self, ap: usize, user: usize, value: f64) {
        self.data[[user, ap]] = value;
    }

    pub fn user_major(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn user_major_mut(&mut self) -> &mut Array2<f64> {
        &mut self.data
    }

    pub fn into_user_major(self) -> Array2<f64> {
        self.data
    }

    /// Copies out the transposed (num_aps, num_users) view.
    pub fn to_ap_major(&self) -> Array2<f64> {
        self.data.t().to_owned()
    }

    /// Squared norm of one AP's coefficient vector across users.
    pub fn ap_norm_sq(&self, ap: usize) -> f64 {
        self.data.column(ap).iter().map(|v| v * v).sum()
    }
}

/// Immutable SINR ingredients assembled once per drop.
///
/// Cross-user estimate vectors are represented implicitly through gains,
/// estimate qualities, and the pilot correlation pattern, so memory stays
/// linear in (APs x users) regardless of how many users share pilots.
pub struct Coefficients {
    beta: Array2<f64>,     // (K, M)
    inv_beta: Array2<f64>, // (K, M); zero where beta is zero (never read there)
    sqrt_nu: Array2<f64>,  // (K, M)
    /// Interferers with nonzero pilot correlation, per receiving user.
    cross: Vec<Vec<(usize, f64)>>,
    zeta_d: f64,
    antennas_per_ap: usize,
    prelog: f64,
}

/// Assembles [`Coefficients`] from a scenario.
pub fn build_coefficients(s: &Scenario) -> Result<Coefficients> {
    Coefficients::from_parts(
        s.beta.clone(),
        &s.nu,
        &s.pilot_gram,
        s.zeta_d,
        s.antennas_per_ap,
        s.prelog,
    )
}

impl Coefficients {
    /// Builds coefficients from raw user-major matrices. Gains must be
    /// strictly positive for any user that shares a pilot, since they appear
    /// as ratio denominators in the cross-estimate vectors.
    pub fn from_parts(
        beta: Array2<f64>,
        nu: &Array2<f64>,
        pilot_gram: &Array2<f64>,
        zeta_d: f64,
        antennas_per_ap: usize,
        prelog: f64,
    ) -> Result<Coefficients> {
        let (k_users, m_aps) = beta.dim();
        if k_users == 0 || m_aps == 0 {
            return Err(Error::InvalidScenario("need at least one user and one AP".into()));
        }
        if nu.dim() != beta.dim() {
            return Err(Error::InvalidScenario("beta and nu shapes differ".into()));
        }
        if pilot_gram.dim() != (k_users, k_users) {
            return Err(Error::InvalidScenario("pilot gram shape mismatch".into()));
        }
        if antennas_per_ap == 0 || !(zeta_d > 0.0) {
            return Err(Error::InvalidScenario("need positive antennas and SNR".into()));
        }
        for v in beta.iter().chain(nu.iter()) {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::InvalidScenario("gains must be finite and nonnegative".into()));
            }
        }

        let mut cross: Vec<Vec<(usize, f64)>> = vec![Vec::new(); k_users];
        for k in 0..k_users {
            for i in 0..k_users {
                if i != k && pilot_gram[[i, k]] != 0.0 {
                    cross[k].push((i, pilot_gram[[i, k]]));
                }
            }
        }
        // Any user appearing as an interferer contributes gain ratios with
        // its own gains in the denominator.
        for k in 0..k_users {
            for &(i, _) in &cross[k] {
                if beta.row(i).iter().any(|&b| b == 0.0) {
                    return Err(Error::InvalidScenario(format!(
                        "user {i} shares a pilot but has a zero gain entry"
                    )));
                }
            }
        }

        let inv_beta = beta.mapv(|b| if b > 0.0 { 1.0 / b } else { 0.0 });
        let sqrt_nu = nu.mapv(f64::sqrt);
        Ok(Coefficients { beta, inv_beta, sqrt_nu, cross, zeta_d, antennas_per_ap, prelog })
    }

    pub fn num_users(&self) -> usize {
        self.beta.nrows()
    }

    pub fn num_aps(&self) -> usize {
        self.beta.ncols()
    }

    pub fn zeta_d(&self) -> f64 {
        self.zeta_d
    }

    pub fn antennas_per_ap(&self) -> usize {
        self.antennas_per_ap
    }

    pub fn prelog(&self) -> f64 {
        self.prelog
    }

    /// Materializes the signal/interference estimate vector between
    /// interferer `i` and receiver `k` (length num_aps). Diagonal vectors are
    /// exactly the square-root estimate qualities; off-diagonal vectors are
    /// zero unless the two users share a pilot.
    pub fn nu_bar(&self, i: usize, k: usize) -> Array1<f64> {
        let m_aps = self.num_aps();
        if i == k {
            return self.sqrt_nu.row(k).to_owned();
        }
        let g = self.pilot_correlation(i, k);
        let mut out = Array1::zeros(m_aps);
        if g != 0.0 {
            for m in 0..m_aps {
                out[m] = g * self.sqrt_nu[[i, m]] * self.beta[[k, m]] * self.inv_beta[[i, m]];
            }
        }
        out
    }

    pub fn pilot_correlation(&self, i: usize, k: usize) -> f64 {
        if i == k {
            return 1.0;
        }
        self.cross[k].iter().find(|(j, _)| *j == i).map_or(0.0, |(_, g)| *g)
    }

    /// Interference gain weights for receiver `k` (the squared diagonal of
    /// the beamforming-uncertainty weighting).
    pub fn beta_weights(&self, k: usize) -> ArrayView1<'_, f64> {
        self.beta.row(k)
    }

    pub(crate) fn cross_pairs(&self, k: usize) -> &[(usize, f64)] {
        &self.cross[k]
    }

    /// One pass over a point: inner products, per-user signal and
    /// interference terms, SINRs, and spectral efficiencies (nat/s/Hz).
    pub(crate) fn evaluation(&self, mu: &Array2<f64>) -> Evaluation {
        let (k_users, m_aps) = self.beta.dim();
        debug_assert_eq!(mu.dim(), (k_users, m_aps));
        let inv_n = 1.0 / self.antennas_per_ap as f64;
        let noise = inv_n * inv_n;

        let mut row_power = vec![0.0; m_aps];
        for k in 0..k_users {
            let row = self.row(mu, k);
            for (m, v) in row.iter().enumerate() {
                row_power[m] += v * v;
            }
        }

        let mut p_self = vec![0.0; k_users];
        for k in 0..k_users {
            let sn = self.row(&self.sqrt_nu, k);
            let row = self.row(mu, k);
            p_self[k] = dot(sn, row);
        }

        let mut p_cross: Vec<Vec<f64>> = Vec::with_capacity(k_users);
        let mut b = vec![0.0; k_users];
        let mut c = vec![0.0; k_users];
        let mut gamma = vec![0.0; k_users];
        let mut se = vec![0.0; k_users];
        for k in 0..k_users {
            let beta_k = self.row(&self.beta, k);
            let mut dots = Vec::with_capacity(self.cross[k].len());
            let mut cross_power = 0.0;
            for &(i, g) in &self.cross[k] {
                let sn_i = self.row(&self.sqrt_nu, i);
                let ib_i = self.row(&self.inv_beta, i);
                let mu_i = self.row(mu, i);
                let mut acc = 0.0;
                for m in 0..m_aps {
                    acc += sn_i[m] * beta_k[m] * ib_i[m] * mu_i[m];
                }
                let p = g * acc;
                cross_power += p * p;
                dots.push(p);
            }
            p_cross.push(dots);

            let uncertainty: f64 = beta_k
                .iter()
                .zip(row_power.iter())
                .map(|(bk, rp)| bk * rp)
                .sum();
            b[k] = self.zeta_d * p_self[k] * p_self[k];
            c[k] = self.zeta_d * (cross_power + inv_n * uncertainty);
            gamma[k] = b[k] / (c[k] + noise);
            se[k] = self.prelog * gamma[k].ln_1p();
        }

        Evaluation { p_self, p_cross, b, c, gamma, se }
    }

    fn row<'a>(&self, matrix: &'a Array2<f64>, k: usize) -> &'a [f64] {
        matrix.row(k).to_slice().expect("matrices are standard layout")
    }

    pub(crate) fn beta_row(&self, k: usize) -> &[f64] {
        self.row(&self.beta, k)
    }

    pub(crate) fn sqrt_nu_row(&self, k: usize) -> &[f64] {
        self.row(&self.sqrt_nu, k)
    }

    pub(crate) fn inv_beta_row(&self, k: usize) -> &[f64] {
        self.row(&self.inv_beta, k)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Shared intermediate terms for one point; interference terms exclude the
/// additive noise floor so callers combine them explicitly.
pub(crate) struct Evaluation {
    pub p_self: Vec<f64>,
    /// Aligned with `Coefficients::cross_pairs(k)`.
    pub p_cross: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub gamma: Vec<f64>,
    pub se: Vec<f64>,
}

/// Per-user SINR at a point. The denominator is bounded below by the noise
/// floor, so this is defined for every allocation.
pub fn sinr(c: &Coefficients, mu: &PowerAllocation) -> Vec<f64> {
    c.evaluation(mu.user_major()).gamma
}

/// Per-user spectral efficiency in nat/s/Hz.
pub fn spectral_efficiency(c: &Coefficients, mu: &PowerAllocation) -> Vec<f64> {
    c.evaluation(mu.user_major()).se
}

/// Sum of the per-user spectral efficiencies in nat/s/Hz.
pub fn total_se(c: &Coefficients, mu: &PowerAllocation) -> f64 {
    spectral_efficiency(c, mu).iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    fn single_user_coeffs() -> Coefficients {
        // one AP, one user: beta = 1, nu = 0.8, zeta_d = 10, N = 1, prelog 0.9
        Coefficients::from_parts(
            arr2(&[[1.0]]),
            &arr2(&[[0.8]]),
            &arr2(&[[1.0]]),
            10.0,
            1,
            0.9,
        )
        .unwrap()
    }

    #[test]
    fn degenerate_dimensions() {
        let c = single_user_coeffs();
        let nb = c.nu_bar(0, 0);
        assert!((nb[0] - 0.8f64.sqrt()).abs() < 1e-15);
        assert_eq!(c.beta_weights(0)[0], 1.0);
    }

    #[test]
    fn single_user_sinr_and_se() {
        let c = single_user_coeffs();
        let mut mu = PowerAllocation::zeros(1, 1);
        mu.set(0, 0, 1.0);
        let g = sinr(&c, &mu);
        assert!((g[0] - 8.0 / 11.0).abs() < 1e-15);
        let se = spectral_efficiency(&c, &mu);
        // 0.9 * ln(19/11), hand-evaluated
        assert!((se[0] - 0.4918893357312629).abs() < 1e-12);
        assert!((total_se(&c, &mu) - se[0]).abs() < 1e-15);
    }

    #[test]
    fn zero_power_means_zero_rate() {
        let c = single_user_coeffs();
        let mu = PowerAllocation::zeros(1, 1);
        assert_eq!(sinr(&c, &mu)[0], 0.0);
        assert_eq!(total_se(&c, &mu), 0.0);
    }

    #[test]
    fn orthogonal_pilots_zero_cross_vectors() {
        let beta = arr2(&[[1.0, 2.0], [0.5, 0.25]]);
        let nu = beta.mapv(|b| 0.5 * b);
        let gram = arr2(&[[1.0, 0.0], [0.0, 1.0]]);
        let c = Coefficients::from_parts(beta, &nu, &gram, 4.0, 2, 0.9).unwrap();
        assert!(c.nu_bar(0, 1).iter().all(|&v| v == 0.0));
        assert!(c.nu_bar(1, 0).iter().all(|&v| v == 0.0));
        assert_eq!(c.cross_pairs(0), &[]);
    }

    #[test]
    fn shared_pilot_cross_vector_value() {
        // uniform beta = 1, nu = 0.8, two users on one pilot
        let beta = Array2::from_elem((2, 3), 1.0);
        let nu = Array2::from_elem((2, 3), 0.8);
        let gram = Array2::from_elem((2, 2), 1.0);
        let c = Coefficients::from_parts(beta, &nu, &gram, 1.0, 1, 1.0).unwrap();
        let nb = c.nu_bar(0, 1);
        for m in 0..3 {
            assert!((nb[m] - 0.8f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_gain_in_ratio_is_rejected() {
        let beta = arr2(&[[1.0, 0.0], [1.0, 1.0]]);
        let nu = arr2(&[[0.1, 0.0], [0.1, 0.1]]);
        let gram = Array2::from_elem((2, 2), 1.0);
        let err = Coefficients::from_parts(beta, &nu, &gram, 1.0, 1, 1.0);
        assert!(matches!(err, Err(Error::InvalidScenario(_))));
    }

    #[test]
    fn denominator_never_below_noise_floor() {
        let beta = arr2(&[[1e-9, 2e-9], [3e-9, 1e-10]]);
        let nu = beta.mapv(|b| 0.9 * b);
        let gram = Array2::from_elem((2, 2), 1.0);
        for n in [1usize, 2, 4] {
            let c = Coefficients::from_parts(beta.clone(), &nu, &gram, 1e12, n, 0.9).unwrap();
            let mu = PowerAllocation::from_user_major(Array2::from_elem((2, 2), 0.1));
            let ev = c.evaluation(mu.user_major());
            let noise = 1.0 / (n * n) as f64;
            for k in 0..2 {
                assert!(ev.c[k] + noise >= noise);
                assert!(ev.gamma[k].is_finite());
            }
        }
    }

    #[test]
    fn single_user_rate_grows_with_scale() {
        let c = single_user_coeffs();
        let mut prev = -1.0;
        for i in 1..=10 {
            let t = i as f64 / 10.0;
            let mut mu = PowerAllocation::zeros(1, 1);
            mu.set(0, 0, t);
            let g = sinr(&c, &mu)[0];
            assert!(g > prev, "SINR must increase with uniform scaling");
            prev = g;
        }
    }

    #[test]
    fn ap_permutation_leaves_sinr_unchanged() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let (k_users, m_aps) = (3, 5);
        let beta = Array2::from_shape_fn((k_users, m_aps), |_| rng.random_range(0.1..2.0));
        let nu = beta.mapv(|b: f64| 0.7 * b);
        let gram = arr2(&[[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        let mu_raw = Array2::from_shape_fn((k_users, m_aps), |_| rng.random_range(0.0..0.4));

        let c = Coefficients::from_parts(beta.clone(), &nu, &gram, 5.0, 2, 0.9).unwrap();
        let base = sinr(&c, &PowerAllocation::from_user_major(mu_raw.clone()));

        let perm = [3usize, 0, 4, 2, 1];
        let permute = |m: &Array2<f64>| {
            Array2::from_shape_fn((k_users, m_aps), |(k, j)| m[[k, perm[j]]])
        };
        let cp = Coefficients::from_parts(permute(&beta), &permute(&nu), &gram, 5.0, 2, 0.9)
            .unwrap();
        let permuted = sinr(&cp, &PowerAllocation::from_user_major(permute(&mu_raw)));
        for k in 0..k_users {
            assert!((base[k] - permuted[k]).abs() < 1e-12 * (1.0 + base[k]));
        }
    }

    #[test]
    fn decoupled_subsystems_add_up() {
        // two users on disjoint APs with orthogonal pilots behave like two
        // independent single-user systems
        let beta = arr2(&[[1.0, 0.0], [0.0, 1.0]]);
        let nu = arr2(&[[0.8, 0.0], [0.0, 0.8]]);
        let gram = arr2(&[[1.0, 0.0], [0.0, 1.0]]);
        let c = Coefficients::from_parts(beta, &nu, &gram, 10.0, 1, 0.9).unwrap();
        let mut mu = PowerAllocation::zeros(2, 2);
        mu.set(0, 0, 1.0);
        mu.set(1, 1, 1.0);
        let total = total_se(&c, &mu);
        assert!((total - 2.0 * 0.4918893357312629).abs() < 1e-12);
    }

    #[test]
    fn allocation_accessors_round_trip() {
        let mut mu = PowerAllocation::zeros(3, 2);
        mu.set(2, 1, 0.25);
        assert_eq!(mu.get(2, 1), 0.25);
        assert_eq!(mu.num_aps(), 3);
        assert_eq!(mu.num_users(), 2);
        assert_eq!(mu.to_ap_major()[[2, 1]], 0.25);
        assert!((mu.ap_norm_sq(2) - 0.0625).abs() < 1e-15);
    }
}
