//! Network drop generation and the large-scale statistics the optimizer consumes.
//!
//! A drop places APs and users uniformly on a square, derives large-scale
//! gains from a three-slope path loss model with log-normal shadowing, and
//! computes pilot-contaminated channel estimate qualities. No small-scale
//! fading is ever realized; everything downstream runs on statistics alone.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Radio-layer constants: bandwidth, noise, transmit powers, frame lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioParams {
    pub bandwidth_hz: f64,
    pub noise_density_dbm_per_hz: f64,
    pub noise_figure_db: f64,
    /// Downlink transmit power per AP in watts, before noise normalization.
    pub tx_power_dl_w: f64,
    /// Pilot symbol transmit power in watts, before noise normalization.
    pub tx_power_pilot_w: f64,
    /// Pilot sequence length in symbols.
    pub pilot_len: usize,
    /// Coherence interval length in symbols.
    pub coherence_len: usize,
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            bandwidth_hz: 20e6,
            noise_density_dbm_per_hz: -174.0,
            noise_figure_db: 9.0,
            tx_power_dl_w: 1.0,
            tx_power_pilot_w: 0.2,
            pilot_len: 20,
            coherence_len: 200,
        }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_hz > 0.0) {
            return Err(Error::InvalidArgument("bandwidth must be positive".into()));
        }
        if !(self.tx_power_dl_w > 0.0) || !(self.tx_power_pilot_w > 0.0) {
            return Err(Error::InvalidArgument(
                "transmit powers must be strictly positive".into(),
            ));
        }
        if self.pilot_len == 0 {
            return Err(Error::InvalidArgument("pilot length must be positive".into()));
        }
        if self.pilot_len >= self.coherence_len {
            return Err(Error::InvalidArgument(format!(
                "pilot length {} must be shorter than the coherence interval {}",
                self.pilot_len, self.coherence_len
            )));
        }
        Ok(())
    }

    /// Fraction of the coherence interval left for downlink payload.
    pub fn prelog(&self) -> f64 {
        1.0 - self.pilot_len as f64 / self.coherence_len as f64
    }
}

/// Three-slope path loss model parameters plus shadowing spread.
#[derive(Debug, Clone, PartialEq)]
pub struct PathLossParams {
    /// Fixed loss in dB, carrier dependent.
    pub l_db: f64,
    /// Inner reference distance in km; loss is constant below it.
    pub d0_km: f64,
    /// Outer reference distance in km.
    pub d1_km: f64,
    /// Log-normal shadowing standard deviation in dB.
    pub sigma_sh_db: f64,
}

impl Default for PathLossParams {
    fn default() -> Self {
        Self { l_db: 140.7, d0_km: 0.01, d1_km: 0.05, sigma_sh_db: 8.0 }
    }
}

impl PathLossParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.d0_km > 0.0 && self.d1_km > self.d0_km) {
            return Err(Error::InvalidArgument(
                "reference distances must satisfy 0 < d0 < d1".into(),
            ));
        }
        if !(self.sigma_sh_db >= 0.0) {
            return Err(Error::InvalidArgument("shadowing std-dev must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Three-slope path loss in dB at distance `d_km`: constant below `d0`,
/// 20 dB/decade between `d0` and `d1`, 35 dB/decade beyond `d1`. Continuous
/// at both breakpoints.
pub fn path_loss_db(d_km: f64, p: &PathLossParams) -> Result<f64> {
    if !(d_km > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "distance must be positive, got {d_km}"
        )));
    }
    Ok(if d_km > p.d1_km {
        -p.l_db - 35.0 * d_km.log10()
    } else if d_km > p.d0_km {
        -p.l_db - 15.0 * p.d1_km.log10() - 20.0 * d_km.log10()
    } else {
        -p.l_db - 15.0 * p.d1_km.log10() - 20.0 * p.d0_km.log10()
    })
}

/// Downlink and pilot SNRs normalized to the receiver noise power.
pub fn normalized_snrs(r: &RadioParams) -> Result<(f64, f64)> {
    r.validate()?;
    let noise_dbm =
        r.noise_density_dbm_per_hz + 10.0 * r.bandwidth_hz.log10() + r.noise_figure_db;
    let noise_w = 10f64.powf((noise_dbm - 30.0) / 10.0);
    Ok((r.tx_power_dl_w / noise_w, r.tx_power_pilot_w / noise_w))
}

/// Result of pilot assignment: the pilot index per user and the pairwise
/// pilot correlation magnitudes (unit diagonal).
#[derive(Debug, Clone)]
pub struct PilotAssignment {
    pub pilot_of_user: Vec<usize>,
    pub gram: Array2<f64>,
}

/// Assigns `pilot_len` mutually orthonormal pilots to users. With enough
/// pilots every user gets its own; otherwise pilots are reused round-robin
/// over a seeded random user permutation, so correlation entries are 0 or 1.
pub fn assign_pilots(num_users: usize, pilot_len: usize, seed: u64) -> Result<PilotAssignment> {
    if pilot_len == 0 {
        return Err(Error::InvalidArgument("at least one pilot is required".into()));
    }
    let pilot_of_user: Vec<usize> = if num_users <= pilot_len {
        (0..num_users).collect()
    } else {
        let mut order: Vec<usize> = (0..num_users).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
        let mut assign = vec![0usize; num_users];
        for (slot, &user) in order.iter().enumerate() {
            assign[user] = slot % pilot_len;
        }
        assign
    };
    Ok(PilotAssignment { gram: gram_from_pilots(&pilot_of_user), pilot_of_user })
}

fn gram_from_pilots(pilot_of_user: &[usize]) -> Array2<f64> {
    let k = pilot_of_user.len();
    let mut gram = Array2::zeros((k, k));
    for i in 0..k {
        for j in 0..k {
            if pilot_of_user[i] == pilot_of_user[j] {
                gram[[i, j]] = 1.0;
            }
        }
    }
    gram
}

/// Mean-square channel estimate quality per (user, AP) pair.
///
/// `beta[(k, m)]` is the large-scale gain between AP `m` and user `k`;
/// the result has the same layout. Pilot reuse enters through the squared
/// correlation entries in the denominator.
pub fn channel_stats(
    beta: &Array2<f64>,
    pilot_gram: &Array2<f64>,
    zeta_p: f64,
    pilot_len: usize,
) -> Array2<f64> {
    let (k_users, m_aps) = beta.dim();
    assert_eq!(pilot_gram.dim(), (k_users, k_users), "pilot gram shape mismatch");
    let zp_tp = zeta_p * pilot_len as f64;
    let mut nu = Array2::zeros((k_users, m_aps));
    for k in 0..k_users {
        for m in 0..m_aps {
            let mut contamination = 0.0;
            for i in 0..k_users {
                let g = pilot_gram[[i, k]];
                contamination += beta[[i, m]] * g * g;
            }
            let b = beta[[k, m]];
            nu[[k, m]] = zp_tp * b * b / (1.0 + zp_tp * contamination);
        }
    }
    nu
}

/// Everything needed to generate one drop.
#[derive(Debug, Clone)]
pub struct DropConfig {
    pub num_aps: usize,
    pub num_users: usize,
    pub antennas_per_ap: usize,
    pub area_side_km: f64,
    pub radio: RadioParams,
    pub path_loss: PathLossParams,
}

impl Default for DropConfig {
    fn default() -> Self {
        Self {
            num_aps: 100,
            num_users: 40,
            antennas_per_ap: 1,
            area_side_km: 1.0,
            radio: RadioParams::default(),
            path_loss: PathLossParams::default(),
        }
    }
}

/// One network drop: geometry, large-scale gains, pilot structure, and the
/// normalized radio constants. All matrices are stored user-major, i.e.
/// `beta[(k, m)]` refers to AP `m` and user `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub num_aps: usize,
    pub num_users: usize,
    pub antennas_per_ap: usize,
    pub area_side_km: f64,
    pub ap_positions: Vec<[f64; 2]>,
    pub user_positions: Vec<[f64; 2]>,
    /// Large-scale gains, linear scale, shape (num_users, num_aps).
    pub beta: Array2<f64>,
    /// Channel estimate qualities, same layout as `beta`.
    pub nu: Array2<f64>,
    /// Pairwise pilot correlation magnitudes, shape (num_users, num_users).
    pub pilot_gram: Array2<f64>,
    pub pilot_of_user: Vec<usize>,
    pub zeta_d: f64,
    pub zeta_p: f64,
    /// Payload fraction of the coherence interval.
    pub prelog: f64,
    pub pilot_len: usize,
    pub coherence_len: usize,
    pub seed: u64,
}

/// Generates a reproducible drop: positions i.i.d. uniform on the square,
/// gains from path loss times log-normal shadowing, estimate qualities from
/// the pilot structure. The same `(config, seed)` always yields a
/// bit-identical scenario.
pub fn generate_drop(cfg: &DropConfig, seed: u64) -> Result<Scenario> {
    if cfg.num_aps == 0 || cfg.num_users == 0 || cfg.antennas_per_ap == 0 {
        return Err(Error::InvalidArgument("dimensions must be positive".into()));
    }
    if !(cfg.area_side_km > 0.0) {
        return Err(Error::InvalidArgument("area side must be positive".into()));
    }
    cfg.radio.validate()?;
    cfg.path_loss.validate()?;
    let (zeta_d, zeta_p) = normalized_snrs(&cfg.radio)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = cfg.area_side_km;
    let point = |rng: &mut ChaCha8Rng| [rng.random_range(0.0..side), rng.random_range(0.0..side)];
    let ap_positions: Vec<[f64; 2]> = (0..cfg.num_aps).map(|_| point(&mut rng)).collect();
    let user_positions: Vec<[f64; 2]> = (0..cfg.num_users).map(|_| point(&mut rng)).collect();

    let mut beta = Array2::zeros((cfg.num_users, cfg.num_aps));
    for k in 0..cfg.num_users {
        for m in 0..cfg.num_aps {
            let dx = ap_positions[m][0] - user_positions[k][0];
            let dy = ap_positions[m][1] - user_positions[k][1];
            // The model is constant below d0, so clamping keeps co-located
            // pairs finite without changing any value.
            let d = (dx * dx + dy * dy).sqrt().max(cfg.path_loss.d0_km);
            let pl_db = path_loss_db(d, &cfg.path_loss)?;
            let shadow: f64 = rng.sample(StandardNormal);
            beta[[k, m]] = 10f64.powf((pl_db + cfg.path_loss.sigma_sh_db * shadow) / 10.0);
        }
    }

    let pilots = assign_pilots(cfg.num_users, cfg.radio.pilot_len, seed)?;
    let nu = channel_stats(&beta, &pilots.gram, zeta_p, cfg.radio.pilot_len);

    Ok(Scenario {
        num_aps: cfg.num_aps,
        num_users: cfg.num_users,
        antennas_per_ap: cfg.antennas_per_ap,
        area_side_km: cfg.area_side_km,
        ap_positions,
        user_positions,
        beta,
        nu,
        pilot_gram: pilots.gram,
        pilot_of_user: pilots.pilot_of_user,
        zeta_d,
        zeta_p,
        prelog: cfg.radio.prelog(),
        pilot_len: cfg.radio.pilot_len,
        coherence_len: cfg.radio.coherence_len,
        seed,
    })
}

impl Scenario {
    /// Archives the drop as a CSV bundle (`positions.csv`, `beta.csv`,
    /// `nu.csv`, `meta.txt`). Floats are written in shortest round-trip
    /// form, so `load_bundle` reproduces the scenario bit-exactly.
    pub fn save_bundle<P: AsRef<Path>>(&self, dir: P) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;

        let mut meta = String::new();
        meta.push_str(&format!("num_aps={}\n", self.num_aps));
        meta.push_str(&format!("num_users={}\n", self.num_users));
        meta.push_str(&format!("antennas_per_ap={}\n", self.antennas_per_ap));
        meta.push_str(&format!("area_side_km={}\n", self.area_side_km));
        meta.push_str(&format!("zeta_d={}\n", self.zeta_d));
        meta.push_str(&format!("zeta_p={}\n", self.zeta_p));
        meta.push_str(&format!("prelog={}\n", self.prelog));
        meta.push_str(&format!("pilot_len={}\n", self.pilot_len));
        meta.push_str(&format!("coherence_len={}\n", self.coherence_len));
        meta.push_str(&format!("seed={}\n", self.seed));
        let pilots: Vec<String> = self.pilot_of_user.iter().map(|p| p.to_string()).collect();
        meta.push_str(&format!("pilots={}\n", pilots.join(",")));
        fs::write(dir.join("meta.txt"), meta)?;

        let mut pos = String::from("kind,index,x_km,y_km\n");
        for (i, p) in self.ap_positions.iter().enumerate() {
            pos.push_str(&format!("ap,{},{},{}\n", i, p[0], p[1]));
        }
        for (i, p) in self.user_positions.iter().enumerate() {
            pos.push_str(&format!("user,{},{},{}\n", i, p[0], p[1]));
        }
        fs::write(dir.join("positions.csv"), pos)?;

        write_matrix_ap_major(&dir.join("beta.csv"), &self.beta)?;
        write_matrix_ap_major(&dir.join("nu.csv"), &self.nu)?;
        Ok(())
    }

    /// Loads a bundle written by [`Scenario::save_bundle`].
    pub fn load_bundle<P: AsRef<Path>>(dir: P) -> Result<Scenario> {
        let dir = dir.as_ref();
        let meta_text = fs::read_to_string(dir.join("meta.txt"))?;
        let mut meta = HashMap::new();
        for line in meta_text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("meta line without '=': {line}")))?;
            meta.insert(key.trim().to_string(), value.trim().to_string());
        }
        let get = |key: &str| -> Result<&String> {
            meta.get(key).ok_or_else(|| Error::Parse(format!("meta.txt missing key {key}")))
        };
        let parse_usize = |key: &str| -> Result<usize> {
            get(key)?.parse().map_err(|e| Error::Parse(format!("{key}: {e}")))
        };
        let parse_f64 = |key: &str| -> Result<f64> {
            get(key)?.parse().map_err(|e| Error::Parse(format!("{key}: {e}")))
        };

        let num_aps = parse_usize("num_aps")?;
        let num_users = parse_usize("num_users")?;
        let pilot_of_user: Vec<usize> = get("pilots")?
            .split(',')
            .map(|s| s.trim().parse().map_err(|e| Error::Parse(format!("pilots: {e}"))))
            .collect::<Result<_>>()?;
        if pilot_of_user.len() != num_users {
            return Err(Error::Parse("pilot list length does not match num_users".into()));
        }

        let (ap_positions, user_positions) =
            read_positions(&dir.join("positions.csv"), num_aps, num_users)?;
        let beta = read_matrix_ap_major(&dir.join("beta.csv"), num_aps, num_users)?;
        let nu = read_matrix_ap_major(&dir.join("nu.csv"), num_aps, num_users)?;

        Ok(Scenario {
            num_aps,
            num_users,
            antennas_per_ap: parse_usize("antennas_per_ap")?,
            area_side_km: parse_f64("area_side_km")?,
            ap_positions,
            user_positions,
            beta,
            nu,
            pilot_gram: gram_from_pilots(&pilot_of_user),
            pilot_of_user,
            zeta_d: parse_f64("zeta_d")?,
            zeta_p: parse_f64("zeta_p")?,
            prelog: parse_f64("prelog")?,
            pilot_len: parse_usize("pilot_len")?,
            coherence_len: parse_usize("coherence_len")?,
            seed: get("seed")?.parse().map_err(|e| Error::Parse(format!("seed: {e}")))?,
        })
    }
}

/// Writes a user-major matrix as one CSV row per AP.
fn write_matrix_ap_major(path: &Path, matrix: &Array2<f64>) -> Result<()> {
    let (num_users, num_aps) = matrix.dim();
    let file = fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    for m in 0..num_aps {
        let mut row = String::with_capacity(num_users * 24);
        for k in 0..num_users {
            if k > 0 {
                row.push(',');
            }
            row.push_str(&format!("{}", matrix[[k, m]]));
        }
        writeln!(w, "{row}")?;
    }
    Ok(())
}

fn read_matrix_ap_major(path: &Path, num_aps: usize, num_users: usize) -> Result<Array2<f64>> {
    let text = fs::read_to_string(path)?;
    let mut matrix = Array2::zeros((num_users, num_aps));
    let mut rows = 0;
    for (m, line) in text.lines().enumerate() {
        if m >= num_aps {
            return Err(Error::Parse(format!("{}: too many rows", path.display())));
        }
        let mut cols = 0;
        for (k, field) in line.split(',').enumerate() {
            if k >= num_users {
                return Err(Error::Parse(format!("{}: too many columns", path.display())));
            }
            matrix[[k, m]] = field
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("{} row {m}: {e}", path.display())))?;
            cols += 1;
        }
        if cols != num_users {
            return Err(Error::Parse(format!("{} row {m}: expected {num_users} columns", path.display())));
        }
        rows += 1;
    }
    if rows != num_aps {
        return Err(Error::Parse(format!("{}: expected {num_aps} rows", path.display())));
    }
    Ok(matrix)
}

fn read_positions(
    path: &Path,
    num_aps: usize,
    num_users: usize,
) -> Result<(Vec<[f64; 2]>, Vec<[f64; 2]>)> {
    let text = fs::read_to_string(path)?;
    let mut aps = vec![[0.0; 2]; num_aps];
    let mut users = vec![[0.0; 2]; num_users];
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse(format!("positions row with {} fields", fields.len())));
        }
        let index: usize =
            fields[1].parse().map_err(|e| Error::Parse(format!("position index: {e}")))?;
        let x: f64 = fields[2].parse().map_err(|e| Error::Parse(format!("position x: {e}")))?;
        let y: f64 = fields[3].parse().map_err(|e| Error::Parse(format!("position y: {e}")))?;
        match fields[0] {
            "ap" if index < num_aps => aps[index] = [x, y],
            "user" if index < num_users => users[index] = [x, y],
            other => return Err(Error::Parse(format!("bad positions row: {other},{index}"))),
        }
    }
    Ok((aps, users))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_loss_frozen_values() {
        let p = PathLossParams::default();
        // hand-evaluated -L - 35 log10(0.05)
        assert!((path_loss_db(0.05, &p).unwrap() - -95.16395015176066).abs() < 1e-9);
        // hand-evaluated -L - 15 log10(0.05) - 20 log10(0.01)
        assert!((path_loss_db(0.01, &p).unwrap() - -81.18455006504028).abs() < 1e-9);
        assert!((path_loss_db(1.0, &p).unwrap() - -140.7).abs() < 1e-12);
    }

    #[test]
    fn path_loss_continuous_at_breakpoints() {
        let p = PathLossParams::default();
        let outer = -p.l_db - 35.0 * p.d1_km.log10();
        let mid = -p.l_db - 15.0 * p.d1_km.log10() - 20.0 * p.d1_km.log10();
        assert!((outer - mid).abs() < 1e-12);
        let at_d1 = path_loss_db(p.d1_km, &p).unwrap();
        let above_d1 = path_loss_db(p.d1_km * (1.0 + 1e-12), &p).unwrap();
        assert!((at_d1 - above_d1).abs() < 1e-9);
        let at_d0 = path_loss_db(p.d0_km, &p).unwrap();
        let above_d0 = path_loss_db(p.d0_km * (1.0 + 1e-12), &p).unwrap();
        assert!((at_d0 - above_d0).abs() < 1e-9);
    }

    #[test]
    fn path_loss_nonincreasing_in_distance() {
        let p = PathLossParams::default();
        let mut prev = f64::INFINITY;
        for i in 1..2000 {
            let d = i as f64 * 1e-3;
            let pl = path_loss_db(d, &p).unwrap();
            assert!(pl <= prev + 1e-12, "increase at d={d}");
            prev = pl;
        }
    }

    #[test]
    fn path_loss_rejects_nonpositive_distance() {
        let p = PathLossParams::default();
        assert!(matches!(path_loss_db(0.0, &p), Err(Error::InvalidArgument(_))));
        assert!(matches!(path_loss_db(-1.0, &p), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn normalized_snr_frozen_values() {
        let r = RadioParams::default();
        let (zeta_d, zeta_p) = normalized_snrs(&r).unwrap();
        // hand-evaluated noise chain: -174 dBm/Hz over 20 MHz with NF 9 dB
        let noise_w = 6.324555320336759e-13;
        assert!((zeta_d - 1.0 / noise_w).abs() / zeta_d < 1e-9);
        assert!((zeta_p - 0.2 * zeta_d).abs() / zeta_p < 1e-12);

        let unit = RadioParams { tx_power_dl_w: noise_w, ..RadioParams::default() };
        let (zd, _) = normalized_snrs(&unit).unwrap();
        assert!((zd - 1.0).abs() < 1e-9);
    }

    #[test]
    fn radio_params_validation() {
        let bad = RadioParams { pilot_len: 200, coherence_len: 200, ..RadioParams::default() };
        assert!(bad.validate().is_err());
        let bad = RadioParams { tx_power_dl_w: 0.0, ..RadioParams::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn orthogonal_pilots_when_enough() {
        let a = assign_pilots(4, 4, 3).unwrap();
        for i in 0..4 {
            for k in 0..4 {
                let expected = if i == k { 1.0 } else { 0.0 };
                assert_eq!(a.gram[[i, k]], expected);
            }
        }
    }

    #[test]
    fn single_pilot_shared_by_all() {
        let a = assign_pilots(2, 1, 0).unwrap();
        assert!(a.gram.iter().all(|&g| g == 1.0));
    }

    #[test]
    fn round_robin_reuse_is_balanced() {
        let a = assign_pilots(40, 20, 11).unwrap();
        let mut counts = vec![0usize; 20];
        for &p in &a.pilot_of_user {
            counts[p] += 1;
        }
        assert!(counts.iter().all(|&c| c == 2));
        for i in 0..40 {
            let ones = (0..40).filter(|&k| a.gram[[i, k]] == 1.0).count();
            assert_eq!(ones, 2);
        }
    }

    #[test]
    fn pilot_gram_symmetric_unit_diagonal() {
        let a = assign_pilots(17, 5, 42).unwrap();
        for i in 0..17 {
            assert_eq!(a.gram[[i, i]], 1.0);
            for k in 0..17 {
                assert_eq!(a.gram[[i, k]], a.gram[[k, i]]);
            }
        }
        let b = assign_pilots(17, 5, 42).unwrap();
        assert_eq!(a.pilot_of_user, b.pilot_of_user);
    }

    #[test]
    fn channel_stats_scalar_cases() {
        // single user, orthogonal pilot, zeta_p * T_p = 4, beta = 1
        let beta = Array2::from_elem((1, 1), 1.0);
        let gram = Array2::from_elem((1, 1), 1.0);
        let nu = channel_stats(&beta, &gram, 2.0, 2);
        assert!((nu[[0, 0]] - 0.8).abs() < 1e-15);

        // two users sharing one pilot, both with beta = 1
        let beta = Array2::from_elem((2, 1), 1.0);
        let gram = Array2::from_elem((2, 2), 1.0);
        let nu = channel_stats(&beta, &gram, 2.0, 2);
        assert!((nu[[0, 0]] - 4.0 / 9.0).abs() < 1e-15);

        // zero gain means zero estimate quality
        let beta = ndarray::arr2(&[[0.0], [1.0]]);
        let nu = channel_stats(&beta, &gram, 2.0, 2);
        assert_eq!(nu[[0, 0]], 0.0);
    }

    #[test]
    fn estimate_quality_never_exceeds_gain() {
        let drop = generate_drop(&DropConfig::default(), 5).unwrap();
        for (n, b) in drop.nu.iter().zip(drop.beta.iter()) {
            assert!(*b > 0.0);
            assert!(*n >= 0.0);
            assert!(*n <= *b * (1.0 + 1e-12));
        }
    }

    #[test]
    fn orthogonal_case_denominator_reduces() {
        let cfg = DropConfig { num_users: 10, ..DropConfig::default() };
        let drop = generate_drop(&cfg, 9).unwrap();
        assert!(cfg.num_users <= cfg.radio.pilot_len);
        let zp_tp = drop.zeta_p * drop.pilot_len as f64;
        for k in 0..drop.num_users {
            for m in 0..drop.num_aps {
                let b = drop.beta[[k, m]];
                let expected = zp_tp * b * b / (1.0 + zp_tp * b);
                let rel = (drop.nu[[k, m]] - expected).abs() / expected;
                assert!(rel < 1e-12);
            }
        }
    }

    #[test]
    fn drops_are_deterministic() {
        let cfg = DropConfig { num_aps: 12, num_users: 30, ..DropConfig::default() };
        let a = generate_drop(&cfg, 77).unwrap();
        let b = generate_drop(&cfg, 77).unwrap();
        assert_eq!(a, b);
        let c = generate_drop(&cfg, 78).unwrap();
        assert_ne!(a.beta, c.beta);
    }

    #[test]
    fn colocated_pair_hits_distance_clamp() {
        let cfg = DropConfig {
            num_aps: 1,
            num_users: 1,
            area_side_km: 1e-9,
            path_loss: PathLossParams { sigma_sh_db: 0.0, ..PathLossParams::default() },
            ..DropConfig::default()
        };
        let drop = generate_drop(&cfg, 1).unwrap();
        // 10^(PL(d<=d0)/10) with the frozen PL value above
        let expected = 10f64.powf(-81.18455006504028 / 10.0);
        assert!((drop.beta[[0, 0]] - expected).abs() / expected < 1e-12);
    }

    #[test]
    fn default_config_matches_baseline_dimensions() {
        let cfg = DropConfig::default();
        assert_eq!((cfg.num_aps, cfg.num_users), (100, 40));
        assert_eq!(cfg.area_side_km, 1.0);
        let drop = generate_drop(&cfg, 0).unwrap();
        assert!((drop.prelog - 0.9).abs() < 1e-15);
    }

    #[test]
    fn bundle_round_trip_is_bit_exact() {
        let cfg = DropConfig { num_aps: 7, num_users: 13, ..DropConfig::default() };
        let drop = generate_drop(&cfg, 123).unwrap();
        let dir = tempfile::tempdir().unwrap();
        drop.save_bundle(dir.path()).unwrap();
        let loaded = Scenario::load_bundle(dir.path()).unwrap();
        assert_eq!(drop, loaded);
    }
}
