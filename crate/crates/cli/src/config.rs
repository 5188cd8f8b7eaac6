//! Plain-text experiment configuration: `key = value` lines grouped under
//! `[experiment]`, `[scenario]`, and `[solver]` sections. Unknown sections or
//! keys fail fast so typos cannot silently fall back to defaults.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use cellfree_core::{
    BbRule, DropConfig, SolverOptions, UtilityKind, Variant, DEFAULT_EPSILON,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Convergence,
    ApDensitySweep,
    Cdf,
    AvgSeVsM,
    ApSelectionSweep,
    AntennasSweep,
    Timing,
}

impl ExperimentKind {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "convergence" => Self::Convergence,
            "ap_density_sweep" => Self::ApDensitySweep,
            "cdf" => Self::Cdf,
            "avg_se_vs_m" => Self::AvgSeVsM,
            "ap_selection_sweep" => Self::ApSelectionSweep,
            "antennas_sweep" => Self::AntennasSweep,
            "timing" => Self::Timing,
            other => bail!("unknown experiment kind '{other}'"),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Convergence => "convergence",
            Self::ApDensitySweep => "ap_density_sweep",
            Self::Cdf => "cdf",
            Self::AvgSeVsM => "avg_se_vs_m",
            Self::ApSelectionSweep => "ap_selection_sweep",
            Self::AntennasSweep => "antennas_sweep",
            Self::Timing => "timing",
        }
    }
}

/// Solver settings beyond the core options: utility regularizer/smoothing
/// and the number of perturbed restarts.
#[derive(Debug, Clone)]
pub struct SolverSettings {
    pub options: SolverOptions,
    pub epsilon: f64,
    /// `None` resolves to the default smoothing for the instance's user count.
    pub tau: Option<f64>,
    pub n_starts: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { options: SolverOptions::default(), epsilon: DEFAULT_EPSILON, tau: None, n_starts: 1 }
    }
}

impl SolverSettings {
    /// Resolves a utility name against these settings.
    pub fn utility(&self, name: &str, num_users: usize) -> Result<UtilityKind> {
        let kind = match name {
            "semax" => UtilityKind::se_max(),
            "pfmax" => UtilityKind::PfMax { epsilon: self.epsilon },
            "hrmax" => UtilityKind::HrMax { epsilon: self.epsilon },
            "mrmax" => match self.tau {
                Some(tau) => UtilityKind::mr_max(tau),
                None => UtilityKind::mr_max_for_users(num_users),
            },
            other => bail!("unknown utility '{other}'"),
        };
        Ok(kind)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub n_drops: usize,
    pub seed: u64,
    pub utilities: Vec<String>,
    pub output_dir: PathBuf,
    /// CDF experiment: also emit one CDF per drop instead of pooling only.
    pub per_drop_cdf: bool,
    /// Sweeps: add an equal-power-allocation baseline row.
    pub include_epa: bool,
    pub densities: Vec<f64>,
    pub areas: Vec<f64>,
    pub m_values: Vec<usize>,
    pub n_values: Vec<usize>,
    pub ap_counts: Vec<usize>,
    /// Fixed iteration budget per timing run.
    pub timing_iters: usize,
    pub timing_repeats: usize,
    pub scenario: DropConfig,
    pub solver: SolverSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::Cdf,
            n_drops: 1,
            seed: 1,
            utilities: vec!["semax".into(), "pfmax".into(), "hrmax".into(), "mrmax".into()],
            output_dir: PathBuf::from("out"),
            per_drop_cdf: false,
            include_epa: false,
            densities: vec![100.0, 200.0, 500.0, 1000.0],
            areas: vec![1.0],
            m_values: vec![200, 400, 800, 1600],
            n_values: vec![1, 2, 4, 8],
            ap_counts: vec![25, 50, 100, 200],
            timing_iters: 30,
            timing_repeats: 2,
            scenario: DropConfig::default(),
            solver: SolverSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_file<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .with_context(|| format!("reading config {}", path.as_ref().display()))?;
        Self::parse_str(&text)
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                if !matches!(section.as_str(), "experiment" | "scenario" | "solver") {
                    bail!("line {}: unknown section [{section}]", lineno + 1);
                }
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value, got '{line}'", lineno + 1))?;
            let key = key.trim();
            let value = value.trim();
            cfg.apply(&section, key, value)
                .with_context(|| format!("line {}: key '{key}'", lineno + 1))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        match section {
            "experiment" => self.apply_experiment(key, value),
            "scenario" => self.apply_scenario(key, value),
            "solver" => self.apply_solver(key, value),
            "" => bail!("key outside any [section]"),
            other => bail!("unknown section [{other}]"),
        }
    }

    fn apply_experiment(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "kind" => self.experiment = ExperimentKind::parse(value)?,
            "n_drops" => self.n_drops = parse(value)?,
            "seed" => self.seed = parse(value)?,
            "utilities" => {
                self.utilities = value.split(',').map(|s| s.trim().to_string()).collect()
            }
            "output_dir" => self.output_dir = PathBuf::from(value),
            "per_drop_cdf" => self.per_drop_cdf = parse_bool(value)?,
            "include_epa" => self.include_epa = parse_bool(value)?,
            "densities" => self.densities = parse_list(value)?,
            "areas" => self.areas = parse_list(value)?,
            "m_values" => self.m_values = parse_list(value)?,
            "n_values" => self.n_values = parse_list(value)?,
            "ap_counts" => self.ap_counts = parse_list(value)?,
            "timing_iters" => self.timing_iters = parse(value)?,
            "timing_repeats" => self.timing_repeats = parse(value)?,
            other => bail!("unknown [experiment] key '{other}'"),
        }
        Ok(())
    }

    fn apply_scenario(&mut self, key: &str, value: &str) -> Result<()> {
        let s = &mut self.scenario;
        match key {
            "num_aps" => s.num_aps = parse(value)?,
            "num_users" => s.num_users = parse(value)?,
            "antennas_per_ap" => s.antennas_per_ap = parse(value)?,
            "area_side_km" => s.area_side_km = parse(value)?,
            "sigma_sh_db" => s.path_loss.sigma_sh_db = parse(value)?,
            "bandwidth_hz" => s.radio.bandwidth_hz = parse(value)?,
            "noise_density_dbm_per_hz" => s.radio.noise_density_dbm_per_hz = parse(value)?,
            "noise_figure_db" => s.radio.noise_figure_db = parse(value)?,
            "tx_power_dl_w" => s.radio.tx_power_dl_w = parse(value)?,
            "tx_power_pilot_w" => s.radio.tx_power_pilot_w = parse(value)?,
            "pilot_len" => s.radio.pilot_len = parse(value)?,
            "coherence_len" => s.radio.coherence_len = parse(value)?,
            "path_loss_l_db" => s.path_loss.l_db = parse(value)?,
            "path_loss_d0_km" => s.path_loss.d0_km = parse(value)?,
            "path_loss_d1_km" => s.path_loss.d1_km = parse(value)?,
            other => bail!("unknown [scenario] key '{other}'"),
        }
        Ok(())
    }

    fn apply_solver(&mut self, key: &str, value: &str) -> Result<()> {
        let o = &mut self.solver.options;
        match key {
            "variant" => {
                o.variant = match value {
                    "line_search" => Variant::LineSearch,
                    "fixed_step" => Variant::FixedStep,
                    other => bail!("unknown variant '{other}'"),
                }
            }
            "alpha0" => o.alpha0 = if value == "auto" { None } else { Some(parse(value)?) },
            "delta" => o.delta = parse(value)?,
            "rho" => o.rho = parse(value)?,
            "bb_rule" => {
                o.bb_rule = match value {
                    "1" => BbRule::SsOverSr,
                    "2" => BbRule::SrOverRr,
                    other => bail!("bb_rule must be 1 or 2, got '{other}'"),
                }
            }
            "max_iter" => o.max_iter = parse(value)?,
            "stop_window" => o.stop_window = parse(value)?,
            "stop_tol" => o.stop_tol = parse(value)?,
            "max_backtracks" => o.max_backtracks = parse(value)?,
            "alpha_min" => o.alpha_min = parse(value)?,
            "epsilon" => self.solver.epsilon = parse(value)?,
            "tau" => {
                self.solver.tau = if value == "auto" { None } else { Some(parse(value)?) }
            }
            "n_starts" => self.solver.n_starts = parse(value)?,
            other => bail!("unknown [solver] key '{other}'"),
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        if self.n_drops == 0 {
            bail!("n_drops must be at least 1");
        }
        if self.utilities.is_empty() {
            bail!("at least one utility is required");
        }
        for name in &self.utilities {
            self.solver.utility(name, 2)?;
        }
        self.solver.options.validate()?;
        Ok(())
    }

    /// The fully resolved configuration, echoed into `meta.txt` so every
    /// output directory records exactly what produced it.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        let o = &self.solver.options;
        let s = &self.scenario;
        let _ = writeln!(out, "[experiment]");
        let _ = writeln!(out, "kind = {}", self.experiment.name());
        let _ = writeln!(out, "n_drops = {}", self.n_drops);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "utilities = {}", self.utilities.join(","));
        let _ = writeln!(out, "output_dir = {}", self.output_dir.display());
        let _ = writeln!(out, "per_drop_cdf = {}", self.per_drop_cdf);
        let _ = writeln!(out, "include_epa = {}", self.include_epa);
        let _ = writeln!(out, "densities = {}", join(&self.densities));
        let _ = writeln!(out, "areas = {}", join(&self.areas));
        let _ = writeln!(out, "m_values = {}", join(&self.m_values));
        let _ = writeln!(out, "n_values = {}", join(&self.n_values));
        let _ = writeln!(out, "ap_counts = {}", join(&self.ap_counts));
        let _ = writeln!(out, "timing_iters = {}", self.timing_iters);
        let _ = writeln!(out, "timing_repeats = {}", self.timing_repeats);
        let _ = writeln!(out, "\n[scenario]");
        let _ = writeln!(out, "num_aps = {}", s.num_aps);
        let _ = writeln!(out, "num_users = {}", s.num_users);
        let _ = writeln!(out, "antennas_per_ap = {}", s.antennas_per_ap);
        let _ = writeln!(out, "area_side_km = {}", s.area_side_km);
        let _ = writeln!(out, "sigma_sh_db = {}", s.path_loss.sigma_sh_db);
        let _ = writeln!(out, "bandwidth_hz = {}", s.radio.bandwidth_hz);
        let _ = writeln!(out, "noise_density_dbm_per_hz = {}", s.radio.noise_density_dbm_per_hz);
        let _ = writeln!(out, "noise_figure_db = {}", s.radio.noise_figure_db);
        let _ = writeln!(out, "tx_power_dl_w = {}", s.radio.tx_power_dl_w);
        let _ = writeln!(out, "tx_power_pilot_w = {}", s.radio.tx_power_pilot_w);
        let _ = writeln!(out, "pilot_len = {}", s.radio.pilot_len);
        let _ = writeln!(out, "coherence_len = {}", s.radio.coherence_len);
        let _ = writeln!(out, "path_loss_l_db = {}", s.path_loss.l_db);
        let _ = writeln!(out, "path_loss_d0_km = {}", s.path_loss.d0_km);
        let _ = writeln!(out, "path_loss_d1_km = {}", s.path_loss.d1_km);
        let _ = writeln!(out, "\n[solver]");
        let variant = match o.variant {
            Variant::LineSearch => "line_search",
            Variant::FixedStep => "fixed_step",
        };
        let _ = writeln!(out, "variant = {variant}");
        let alpha0 = o.alpha0.map_or("auto".to_string(), |a| a.to_string());
        let _ = writeln!(out, "alpha0 = {alpha0}");
        let _ = writeln!(out, "delta = {}", o.delta);
        let _ = writeln!(out, "rho = {}", o.rho);
        let bb = match o.bb_rule {
            BbRule::SsOverSr => "1",
            BbRule::SrOverRr => "2",
        };
        let _ = writeln!(out, "bb_rule = {bb}");
        let _ = writeln!(out, "max_iter = {}", o.max_iter);
        let _ = writeln!(out, "stop_window = {}", o.stop_window);
        let _ = writeln!(out, "stop_tol = {}", o.stop_tol);
        let _ = writeln!(out, "max_backtracks = {}", o.max_backtracks);
        let _ = writeln!(out, "alpha_min = {}", o.alpha_min);
        let _ = writeln!(out, "epsilon = {}", self.solver.epsilon);
        let tau = self.solver.tau.map_or("auto".to_string(), |t| t.to_string());
        let _ = writeln!(out, "tau = {tau}");
        let _ = writeln!(out, "n_starts = {}", self.solver.n_starts);
        out
    }
}

fn parse<T: std::str::FromStr>(value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| anyhow!("cannot parse '{value}': {e}"))
}

fn parse_bool(value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => bail!("expected a boolean, got '{other}'"),
    }
}

fn parse_list<T: std::str::FromStr>(value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value.split(',').map(|s| parse(s.trim())).collect()
}

fn join<T: std::fmt::Display>(values: &[T]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_overrides() {
        let cfg = ExperimentConfig::parse_str(
            "[experiment]\nkind = convergence\nn_drops = 3\nutilities = semax, mrmax\n\
             [scenario]\nnum_aps = 200\nnum_users = 40\n\
             [solver]\nvariant = fixed_step\nalpha0 = 0.5\nbb_rule = 2\n",
        )
        .unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::Convergence);
        assert_eq!(cfg.n_drops, 3);
        assert_eq!(cfg.utilities, vec!["semax", "mrmax"]);
        assert_eq!(cfg.scenario.num_aps, 200);
        assert_eq!(cfg.solver.options.variant, Variant::FixedStep);
        assert_eq!(cfg.solver.options.alpha0, Some(0.5));
        assert_eq!(cfg.solver.options.bb_rule, BbRule::SrOverRr);
    }

    #[test]
    fn unknown_keys_fail_fast() {
        assert!(ExperimentConfig::parse_str("[experiment]\nknd = cdf\n").is_err());
        assert!(ExperimentConfig::parse_str("[weird]\nx = 1\n").is_err());
        assert!(ExperimentConfig::parse_str("[scenario]\nnum_aps = many\n").is_err());
        assert!(ExperimentConfig::parse_str("stray = 1\n").is_err());
        assert!(ExperimentConfig::parse_str("[experiment]\nutilities = maxmin\n").is_err());
        assert!(ExperimentConfig::parse_str("[experiment]\nn_drops = 0\n").is_err());
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let cfg = ExperimentConfig::parse_str(
            "# top comment\n\n[experiment]\nseed = 9 # trailing\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn echo_round_trips() {
        let mut cfg = ExperimentConfig::default();
        cfg.seed = 123;
        cfg.scenario.num_users = 17;
        cfg.solver.options.stop_tol = 1e-5;
        let echoed = cfg.echo();
        let reparsed = ExperimentConfig::parse_str(&echoed).unwrap();
        assert_eq!(reparsed.seed, 123);
        assert_eq!(reparsed.scenario.num_users, 17);
        assert_eq!(reparsed.solver.options.stop_tol, 1e-5);
    }
}
