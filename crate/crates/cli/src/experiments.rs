//! Experiment drivers: generate drops, solve the configured utilities, and
//! emit CSV reports with documented, fixed column orders.
//!
//! Drops run on a worker pool; every record is keyed by (drop index, utility
//! name) and written in that order, so outputs are deterministic for a given
//! config and seed (wall-clock columns aside).

use std::fs;
use std::io::Write as _;
use std::path::Path;

use anyhow::{ensure, Context, Result};
use cellfree_core::{
    build_coefficients, epa_allocation, generate_drop, select_aps, solve_masked,
    solve_multi_start, spectral_efficiency, DropConfig, Scenario, SolverTrace,
};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ExperimentKind, SolverSettings};
use crate::nats_to_bits;
use crate::stats::cdf_stats;
use crate::timing;

/// One solved (drop, utility) pair with rates in bit/s/Hz.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub drop_index: usize,
    pub seed: u64,
    pub kind: String,
    pub per_user_se_bits: Vec<f64>,
    pub min_se_bits: f64,
    pub total_se_bits: f64,
    pub iterations: usize,
    pub wall_s: f64,
}

impl RunRecord {
    fn new(
        drop_index: usize,
        seed: u64,
        kind: &str,
        per_user_nats: &[f64],
        iterations: usize,
        wall_s: f64,
    ) -> Self {
        let per_user_se_bits: Vec<f64> = per_user_nats.iter().map(|&s| nats_to_bits(s)).collect();
        let min_se_bits = per_user_se_bits.iter().cloned().fold(f64::INFINITY, f64::min);
        let total_se_bits = per_user_se_bits.iter().sum();
        Self { drop_index, seed, kind: kind.into(), per_user_se_bits, min_se_bits, total_se_bits, iterations, wall_s }
    }
}

/// Seed for drop `index` under a base seed.
pub fn drop_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add(index as u64)
}

/// Solves every configured utility on one drop from the equal-power start.
/// Returns `(record, trace)` pairs in utility order, plus an equal-power
/// baseline record when requested.
pub fn solve_drop(
    scenario: &Scenario,
    settings: &SolverSettings,
    utilities: &[String],
    drop_index: usize,
    include_epa: bool,
) -> Result<Vec<(RunRecord, SolverTrace)>> {
    let coeffs = build_coefficients(scenario)?;
    let start = epa_allocation(scenario);
    let mut out = Vec::with_capacity(utilities.len());
    for name in utilities {
        let kind = settings.utility(name, scenario.num_users)?;
        let trace = solve_multi_start(
            &coeffs,
            &kind,
            &settings.options,
            &start,
            settings.n_starts,
            scenario.seed,
        )?;
        let record = RunRecord::new(
            drop_index,
            scenario.seed,
            name,
            &trace.per_user_se,
            trace.iterations,
            trace.wall_time_s,
        );
        out.push((record, trace));
    }
    if include_epa {
        let se = spectral_efficiency(&coeffs, &start);
        let record = RunRecord::new(drop_index, scenario.seed, "epa", &se, 0, 0.0);
        let trace = SolverTrace {
            objectives: vec![0.0],
            step_sizes: vec![],
            min_se: vec![record.min_se_bits],
            elapsed_s: vec![0.0],
            iterations: 0,
            wall_time_s: 0.0,
            final_mu: start,
            per_user_se: se,
        };
        out.push((record, trace));
    }
    Ok(out)
}

/// Runs all drops of one scenario configuration in parallel, keeping records
/// ordered by (drop, utility).
fn run_drops(cfg: &ExperimentConfig, scenario_cfg: &DropConfig) -> Result<Vec<RunRecord>> {
    let per_drop: Vec<Vec<RunRecord>> = (0..cfg.n_drops)
        .into_par_iter()
        .map(|i| -> Result<Vec<RunRecord>> {
            let scenario = generate_drop(scenario_cfg, drop_seed(cfg.seed, i))?;
            let solved = solve_drop(&scenario, &cfg.solver, &cfg.utilities, i, cfg.include_epa)?;
            Ok(solved.into_iter().map(|(record, _)| record).collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_drop.into_iter().flatten().collect())
}

/// Writes `results.csv`: one row per (drop, utility, user) with the fixed
/// header `drop,seed,kind,user,se_bits_hz,min_se,total_se,iters,wall_s`.
pub fn write_results_csv(path: &Path, records: &[RunRecord]) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "drop,seed,kind,user,se_bits_hz,min_se,total_se,iters,wall_s")?;
    for r in records {
        for (user, se) in r.per_user_se_bits.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.drop_index, r.seed, r.kind, user, se, r.min_se_bits, r.total_se_bits,
                r.iterations, r.wall_s
            )?;
        }
    }
    Ok(())
}

fn write_meta(cfg: &ExperimentConfig) -> Result<()> {
    fs::create_dir_all(&cfg.output_dir)
        .with_context(|| format!("creating output dir {}", cfg.output_dir.display()))?;
    fs::write(cfg.output_dir.join("meta.txt"), cfg.echo())?;
    Ok(())
}

/// Dispatches the configured experiment and writes its report files under
/// the config's output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<()> {
    write_meta(cfg)?;
    match cfg.experiment {
        ExperimentKind::Cdf => run_cdf(cfg),
        ExperimentKind::Convergence => run_convergence(cfg),
        ExperimentKind::ApDensitySweep => run_density_sweep(cfg),
        ExperimentKind::AvgSeVsM => run_avg_se_vs_m(cfg),
        ExperimentKind::ApSelectionSweep => run_ap_selection_sweep(cfg),
        ExperimentKind::AntennasSweep => run_antennas_sweep(cfg),
        ExperimentKind::Timing => {
            let rows = timing::timing_benchmark(cfg)?;
            timing::write_timing_csv(&rows, &cfg.output_dir.join("timing.csv"))?;
            timing::check_scaling(&rows)
        }
    }
}

/// One drop, one utility: writes `trace.csv`, `results.csv`, `meta.txt`.
pub fn run_single_solve(cfg: &ExperimentConfig, utility: &str) -> Result<RunRecord> {
    write_meta(cfg)?;
    let scenario = generate_drop(&cfg.scenario, cfg.seed)?;
    let solved = solve_drop(&scenario, &cfg.solver, &[utility.to_string()], 0, false)?;
    let (record, trace) = solved.into_iter().next().expect("one utility requested");
    trace.write_csv(cfg.output_dir.join("trace.csv"))?;
    write_results_csv(&cfg.output_dir.join("results.csv"), std::slice::from_ref(&record))?;
    Ok(record)
}

fn run_cdf(cfg: &ExperimentConfig) -> Result<()> {
    let records = run_drops(cfg, &cfg.scenario)?;
    write_results_csv(&cfg.output_dir.join("results.csv"), &records)?;

    let mut kinds: Vec<String> = cfg.utilities.clone();
    if cfg.include_epa {
        kinds.push("epa".into());
    }
    let mut summary = String::from("kind,samples,median,p5,p95\n");
    for kind in &kinds {
        let pooled: Vec<f64> = records
            .iter()
            .filter(|r| &r.kind == kind)
            .flat_map(|r| r.per_user_se_bits.iter().copied())
            .collect();
        let s = cdf_stats(&pooled)?;
        summary.push_str(&format!(
            "{kind},{},{},{},{}\n",
            pooled.len(),
            s.median,
            s.p5,
            s.p95
        ));
        write_cdf_csv(&cfg.output_dir.join(format!("cdf_{kind}.csv")), &s.cdf)?;
        if cfg.per_drop_cdf {
            for drop in 0..cfg.n_drops {
                let samples: Vec<f64> = records
                    .iter()
                    .filter(|r| &r.kind == kind && r.drop_index == drop)
                    .flat_map(|r| r.per_user_se_bits.iter().copied())
                    .collect();
                let s = cdf_stats(&samples)?;
                write_cdf_csv(
                    &cfg.output_dir.join(format!("cdf_{kind}_drop{drop}.csv")),
                    &s.cdf,
                )?;
            }
        }
    }
    fs::write(cfg.output_dir.join("summary.csv"), summary)?;
    Ok(())
}

fn write_cdf_csv(path: &Path, cdf: &[(f64, f64)]) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "se_bits_hz,cum_prob")?;
    for (value, prob) in cdf {
        writeln!(w, "{value},{prob}")?;
    }
    Ok(())
}

fn run_convergence(cfg: &ExperimentConfig) -> Result<()> {
    let solved: Vec<(usize, Vec<(RunRecord, SolverTrace)>)> = (0..cfg.n_drops)
        .into_par_iter()
        .map(|i| -> Result<_> {
            let scenario = generate_drop(&cfg.scenario, drop_seed(cfg.seed, i))?;
            Ok((i, solve_drop(&scenario, &cfg.solver, &cfg.utilities, i, false)?))
        })
        .collect::<Result<_>>()?;
    let mut records = Vec::new();
    for (drop, runs) in solved {
        for (record, trace) in runs {
            trace.write_csv(
                cfg.output_dir.join(format!("trace_{}_drop{}.csv", record.kind, drop)),
            )?;
            records.push(record);
        }
    }
    write_results_csv(&cfg.output_dir.join("results.csv"), &records)?;
    Ok(())
}

/// Mean of a per-record statistic grouped by utility kind, in the order the
/// kinds were configured.
fn kind_means(
    records: &[RunRecord],
    kinds: &[String],
    stat: impl Fn(&RunRecord) -> f64,
) -> Vec<(String, f64)> {
    kinds
        .iter()
        .map(|kind| {
            let values: Vec<f64> =
                records.iter().filter(|r| &r.kind == kind).map(&stat).collect();
            let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
            (kind.clone(), mean)
        })
        .collect()
}

fn sweep_kinds(cfg: &ExperimentConfig) -> Vec<String> {
    let mut kinds = cfg.utilities.clone();
    if cfg.include_epa {
        kinds.push("epa".into());
    }
    kinds
}

fn run_density_sweep(cfg: &ExperimentConfig) -> Result<()> {
    let kinds = sweep_kinds(cfg);
    let mut out = String::from(
        "area_side_km,density_per_km2,num_aps,kind,drops,mean_total_se_bits_hz,mean_min_se_bits_hz\n",
    );
    for &area in &cfg.areas {
        for &density in &cfg.densities {
            let num_aps = (density * area * area).round() as usize;
            ensure!(num_aps >= 1, "density {density} over area {area} km gives no APs");
            let scenario_cfg =
                DropConfig { num_aps, area_side_km: area, ..cfg.scenario.clone() };
            let records = run_drops(cfg, &scenario_cfg)?;
            let totals = kind_means(&records, &kinds, |r| r.total_se_bits);
            let mins = kind_means(&records, &kinds, |r| r.min_se_bits);
            for ((kind, total), (_, min)) in totals.into_iter().zip(mins) {
                out.push_str(&format!(
                    "{area},{density},{num_aps},{kind},{},{total},{min}\n",
                    cfg.n_drops
                ));
            }
        }
    }
    fs::write(cfg.output_dir.join("sweep.csv"), out)?;
    Ok(())
}

fn run_avg_se_vs_m(cfg: &ExperimentConfig) -> Result<()> {
    let kinds = sweep_kinds(cfg);
    let mut out =
        String::from("num_aps,kind,drops,mean_avg_se_bits_hz,mean_min_se_bits_hz\n");
    for &num_aps in &cfg.m_values {
        let scenario_cfg = DropConfig { num_aps, ..cfg.scenario.clone() };
        let records = run_drops(cfg, &scenario_cfg)?;
        let users = cfg.scenario.num_users as f64;
        let avgs = kind_means(&records, &kinds, |r| r.total_se_bits / users);
        let mins = kind_means(&records, &kinds, |r| r.min_se_bits);
        for ((kind, avg), (_, min)) in avgs.into_iter().zip(mins) {
            out.push_str(&format!("{num_aps},{kind},{},{avg},{min}\n", cfg.n_drops));
        }
    }
    fs::write(cfg.output_dir.join("sweep.csv"), out)?;
    Ok(())
}

fn run_ap_selection_sweep(cfg: &ExperimentConfig) -> Result<()> {
    let mut out =
        String::from("ap_count,kind,drops,mean_avg_se_bits_hz,mean_min_se_bits_hz\n");
    for &count in &cfg.ap_counts {
        let records: Vec<Vec<RunRecord>> = (0..cfg.n_drops)
            .into_par_iter()
            .map(|i| -> Result<Vec<RunRecord>> {
                let scenario = generate_drop(&cfg.scenario, drop_seed(cfg.seed, i))?;
                let coeffs = build_coefficients(&scenario)?;
                let start = epa_allocation(&scenario);
                let mask = select_aps(&scenario.beta, count)?;
                let mut records = Vec::new();
                for name in &cfg.utilities {
                    let kind = cfg.solver.utility(name, scenario.num_users)?;
                    let trace =
                        solve_masked(&coeffs, &kind, &cfg.solver.options, &start, &mask)?;
                    records.push(RunRecord::new(
                        i,
                        scenario.seed,
                        name,
                        &trace.per_user_se,
                        trace.iterations,
                        trace.wall_time_s,
                    ));
                }
                Ok(records)
            })
            .collect::<Result<_>>()?;
        let records: Vec<RunRecord> = records.into_iter().flatten().collect();
        let users = cfg.scenario.num_users as f64;
        let avgs = kind_means(&records, &cfg.utilities, |r| r.total_se_bits / users);
        let mins = kind_means(&records, &cfg.utilities, |r| r.min_se_bits);
        for ((kind, avg), (_, min)) in avgs.into_iter().zip(mins) {
            out.push_str(&format!("{count},{kind},{},{avg},{min}\n", cfg.n_drops));
        }
    }
    fs::write(cfg.output_dir.join("sweep.csv"), out)?;
    Ok(())
}

fn run_antennas_sweep(cfg: &ExperimentConfig) -> Result<()> {
    let kinds = sweep_kinds(cfg);
    let mut out = String::from(
        "antennas_per_ap,kind,drops,mean_avg_se_bits_hz,mean_min_se_bits_hz\n",
    );
    for &antennas in &cfg.n_values {
        let scenario_cfg = DropConfig { antennas_per_ap: antennas, ..cfg.scenario.clone() };
        let records = run_drops(cfg, &scenario_cfg)?;
        let users = cfg.scenario.num_users as f64;
        let avgs = kind_means(&records, &kinds, |r| r.total_se_bits / users);
        let mins = kind_means(&records, &kinds, |r| r.min_se_bits);
        for ((kind, avg), (_, min)) in avgs.into_iter().zip(mins) {
            out.push_str(&format!("{antennas},{kind},{},{avg},{min}\n", cfg.n_drops));
        }
    }
    fs::write(cfg.output_dir.join("sweep.csv"), out)?;
    Ok(())
}
