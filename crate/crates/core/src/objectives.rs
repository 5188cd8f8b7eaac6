//! The four system utilities, their smoothed/regularized forms, and
//! closed-form gradients assembled from per-user rate partials.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::model::{Coefficients, PowerAllocation};

/// Default regularizer added to per-user rates inside the log and harmonic
/// utilities so the gradients stay bounded at zero rate.
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Which system utility to maximize.
///
/// All four are evaluated on per-user spectral efficiencies in nat/s/Hz:
/// the arithmetic mean, the sum of (regularized) logs, the (regularized)
/// harmonic mean, and a log-sum-exp softened minimum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UtilityKind {
    SeMax,
    PfMax { epsilon: f64 },
    HrMax { epsilon: f64 },
    MrMax { tau: f64 },
}

impl UtilityKind {
    pub fn se_max() -> Self {
        UtilityKind::SeMax
    }

    pub fn pf_max() -> Self {
        UtilityKind::PfMax { epsilon: DEFAULT_EPSILON }
    }

    pub fn hr_max() -> Self {
        UtilityKind::HrMax { epsilon: DEFAULT_EPSILON }
    }

    pub fn mr_max(tau: f64) -> Self {
        UtilityKind::MrMax { tau }
    }

    /// Softened-minimum utility with the smoothing gap ln(K)/tau pinned to
    /// 0.01 nat for `num_users` users.
    pub fn mr_max_for_users(num_users: usize) -> Self {
        UtilityKind::MrMax { tau: default_tau(num_users) }
    }

    pub fn name(&self) -> &'static str {
        match self {
            UtilityKind::SeMax => "semax",
            UtilityKind::PfMax { .. } => "pfmax",
            UtilityKind::HrMax { .. } => "hrmax",
            UtilityKind::MrMax { .. } => "mrmax",
        }
    }

    /// Parses a utility name, using the default regularizer / smoothing for
    /// `num_users` users.
    pub fn parse(name: &str, num_users: usize) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "semax" => Ok(Self::se_max()),
            "pfmax" => Ok(Self::pf_max()),
            "hrmax" => Ok(Self::hr_max()),
            "mrmax" => Ok(Self::mr_max_for_users(num_users)),
            other => Err(Error::InvalidArgument(format!("unknown utility '{other}'"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            UtilityKind::MrMax { tau } if !(*tau > 0.0) => {
                Err(Error::InvalidArgument("smoothing parameter must be positive".into()))
            }
            UtilityKind::PfMax { epsilon } | UtilityKind::HrMax { epsilon } if *epsilon < 0.0 => {
                Err(Error::InvalidArgument("regularizer must be nonnegative".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Smoothing parameter giving a ln(K)/tau gap of 0.01 nat.
pub fn default_tau(num_users: usize) -> f64 {
    (num_users.max(2) as f64).ln() / 0.01
}

/// Utility value at a point.
pub fn evaluate(kind: &UtilityKind, c: &Coefficients, mu: &PowerAllocation) -> f64 {
    evaluate_array(kind, c, mu.user_major()).0
}

/// Utility value plus the per-user rates it was computed from.
pub(crate) fn evaluate_array(
    kind: &UtilityKind,
    c: &Coefficients,
    mu: &Array2<f64>,
) -> (f64, Vec<f64>) {
    let se = c.evaluation(mu).se;
    (utility_from_rates(kind, &se), se)
}

/// Combines per-user rates into the scalar utility.
pub fn utility_from_rates(kind: &UtilityKind, se: &[f64]) -> f64 {
    let k = se.len() as f64;
    match kind {
        UtilityKind::SeMax => se.iter().sum::<f64>() / k,
        UtilityKind::PfMax { epsilon } => se.iter().map(|s| (epsilon + s).ln()).sum(),
        UtilityKind::HrMax { epsilon } => {
            k / se.iter().map(|s| 1.0 / (epsilon + s)).sum::<f64>()
        }
        UtilityKind::MrMax { tau } => smoothed_min(se, *tau),
    }
}

/// Log-sum-exp softened minimum, computed with a max shift so large
/// smoothing parameters cannot overflow. Always sandwiched between the true
/// minimum and the minimum plus ln(K)/tau.
pub fn smoothed_min(se: &[f64], tau: f64) -> f64 {
    let min = se.iter().cloned().fold(f64::INFINITY, f64::min);
    let sum: f64 = se.iter().map(|s| (-tau * (s - min)).exp()).sum();
    min - (sum / se.len() as f64).ln() / tau
}

/// Softmin weights: nonnegative, summing to one, concentrating on the
/// minimum-rate users as tau grows.
pub fn softmin_weights(se: &[f64], tau: f64) -> Vec<f64> {
    let min = se.iter().cloned().fold(f64::INFINITY, f64::min);
    let exps: Vec<f64> = se.iter().map(|s| (-tau * (s - min)).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Chain-rule weights of each per-user rate partial inside the utility
/// gradient. Errors when a log or harmonic utility with zero regularizer is
/// differentiated at a vanishing rate.
fn utility_weights(kind: &UtilityKind, se: &[f64]) -> Result<Vec<f64>> {
    let k = se.len() as f64;
    match kind {
        UtilityKind::SeMax => Ok(vec![1.0 / k; se.len()]),
        UtilityKind::PfMax { epsilon } => se
            .iter()
            .map(|s| {
                let d = epsilon + s;
                if d > 0.0 {
                    Ok(1.0 / d)
                } else {
                    Err(Error::UnboundedGradient(
                        "log utility needs a positive regularizer at zero rate".into(),
                    ))
                }
            })
            .collect(),
        UtilityKind::HrMax { epsilon } => {
            let mut inv = Vec::with_capacity(se.len());
            for s in se {
                let d = epsilon + s;
                if !(d > 0.0) {
                    return Err(Error::UnboundedGradient(
                        "harmonic utility needs a positive regularizer at zero rate".into(),
                    ));
                }
                inv.push(1.0 / d);
            }
            let h: f64 = inv.iter().sum();
            Ok(inv.iter().map(|i| k / (h * h) * i * i).collect())
        }
        UtilityKind::MrMax { tau } => Ok(softmin_weights(se, *tau)),
    }
}

/// Utility gradient with respect to the allocation, shape (num_users,
/// num_aps). Assembled in one fused pass: per-user rate partials are never
/// materialized, so the cost is linear in (APs x pilot-sharing pairs).
pub fn gradient(kind: &UtilityKind, c: &Coefficients, mu: &PowerAllocation) -> Result<Array2<f64>> {
    gradient_array(kind, c, mu.user_major())
}

pub(crate) fn gradient_array(
    kind: &UtilityKind,
    c: &Coefficients,
    mu: &Array2<f64>,
) -> Result<Array2<f64>> {
    let (k_users, m_aps) = mu.dim();
    let ev = c.evaluation(mu);
    let w = utility_weights(kind, &ev.se)?;

    let inv_n = 1.0 / c.antennas_per_ap() as f64;
    let noise = inv_n * inv_n;
    let two_zeta = 2.0 * c.zeta_d();
    let prelog = c.prelog();

    // coef_b multiplies the signal-term partial, coef_c the interference-term
    // partial of the receiving user's rate.
    let mut coef_b = vec![0.0; k_users];
    let mut coef_c = vec![0.0; k_users];
    for k in 0..k_users {
        let d1 = ev.b[k] + ev.c[k] + noise;
        let d2 = ev.c[k] + noise;
        coef_b[k] = w[k] * prelog * two_zeta / d1;
        coef_c[k] = w[k] * prelog * two_zeta * (1.0 / d1 - 1.0 / d2);
    }

    let mut grad = Array2::zeros((k_users, m_aps));
    for k in 0..k_users {
        let scale = coef_b[k] * ev.p_self[k];
        let mut out = grad.row_mut(k);
        for (g, sn) in out.iter_mut().zip(c.sqrt_nu_row(k)) {
            *g += scale * sn;
        }
    }
    for k in 0..k_users {
        for (&(i, g), &p) in c.cross_pairs(k).iter().zip(&ev.p_cross[k]) {
            let scale = coef_c[k] * p * g;
            let beta_k = c.beta_row(k);
            let sn_i = c.sqrt_nu_row(i);
            let ib_i = c.inv_beta_row(i);
            let mut out = grad.row_mut(i);
            let out = out.as_slice_mut().expect("standard layout");
            for m in 0..m_aps {
                out[m] += scale * sn_i[m] * beta_k[m] * ib_i[m];
            }
        }
    }
    // Beamforming-uncertainty term: every user's power at AP m is weighted by
    // the receivers' gains at m, independent of pilots.
    let mut weighted_beta = vec![0.0; m_aps];
    for k in 0..k_users {
        let beta_k = c.beta_row(k);
        for m in 0..m_aps {
            weighted_beta[m] += coef_c[k] * beta_k[m];
        }
    }
    for i in 0..k_users {
        let mu_i = mu.row(i);
        let mu_i = mu_i.to_slice().expect("standard layout");
        let mut out = grad.row_mut(i);
        let out = out.as_slice_mut().expect("standard layout");
        for m in 0..m_aps {
            out[m] += inv_n * weighted_beta[m] * mu_i[m];
        }
    }
    Ok(grad)
}

/// Dense per-user rate partials: entry `[k][i]` is the gradient of user
/// `k`'s spectral efficiency with respect to user `i`'s coefficient vector.
/// Quadratic in users and intended for diagnostics and small instances; the
/// solver path goes through [`gradient`] instead.
pub fn se_partials(c: &Coefficients, mu: &PowerAllocation) -> Vec<Vec<Array1<f64>>> {
    let mu = mu.user_major();
    let (k_users, m_aps) = mu.dim();
    let ev = c.evaluation(mu);
    let inv_n = 1.0 / c.antennas_per_ap() as f64;
    let noise = inv_n * inv_n;
    let two_zeta = 2.0 * c.zeta_d();
    let prelog = c.prelog();

    let mut all = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let d1 = ev.b[k] + ev.c[k] + noise;
        let d2 = ev.c[k] + noise;
        let beta_k = c.beta_weights(k);
        let mut per_receiver = Vec::with_capacity(k_users);
        for i in 0..k_users {
            let mut part = Array1::zeros(m_aps);
            // interference partial, present for every pair
            let dc_scale = two_zeta * inv_n;
            for m in 0..m_aps {
                part[m] = dc_scale * beta_k[m] * mu[[i, m]];
            }
            if i == k {
                let nb = c.nu_bar(k, k);
                let db_scale = two_zeta * ev.p_self[k];
                // signal partial only exists for the user's own vector
                for m in 0..m_aps {
                    part[m] = prelog * (part[m] / d1 + db_scale * nb[m] / d1 - part[m] / d2);
                }
            } else {
                let g = c.pilot_correlation(i, k);
                if g != 0.0 {
                    let idx = c.cross_pairs(k).iter().position(|(j, _)| *j == i).unwrap();
                    let p = ev.p_cross[k][idx];
                    let nb = c.nu_bar(i, k);
                    for m in 0..m_aps {
                        let dc = part[m] + two_zeta * p * nb[m];
                        part[m] = prelog * (dc / d1 - dc / d2);
                    }
                } else {
                    for m in 0..m_aps {
                        part[m] = prelog * (part[m] / d1 - part[m] / d2);
                    }
                }
            }
            per_receiver.push(part);
        }
        all.push(per_receiver);
    }
    all
}
