//! Empirical distribution summaries for per-user spectral efficiencies.

use anyhow::{bail, Result};

/// Median, tail percentiles, and the full empirical CDF as sorted
/// `(value, cumulative fraction)` pairs. The 5th percentile is the
/// "95%-likely" rate: 95% of users do at least this well.
#[derive(Debug, Clone)]
pub struct CdfSummary {
    pub median: f64,
    pub p5: f64,
    pub p95: f64,
    pub cdf: Vec<(f64, f64)>,
}

/// Summarizes a sample set; percentiles use linear interpolation between
/// order statistics.
pub fn cdf_stats(samples: &[f64]) -> Result<CdfSummary> {
    if samples.is_empty() {
        bail!("cannot summarize an empty sample set");
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("samples must not contain NaN"));
    let n = sorted.len();
    let cdf = sorted
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, (i + 1) as f64 / n as f64))
        .collect();
    Ok(CdfSummary {
        median: quantile(&sorted, 0.5),
        p5: quantile(&sorted, 0.05),
        p95: quantile(&sorted, 0.95),
        cdf,
    })
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_samples_collapse() {
        let s = cdf_stats(&[0.7; 9]).unwrap();
        assert_eq!(s.median, 0.7);
        assert_eq!(s.p5, 0.7);
        assert_eq!(s.p95, 0.7);
    }

    #[test]
    fn one_to_hundred() {
        let samples: Vec<f64> = (1..=100).map(|v| v as f64).collect();
        let s = cdf_stats(&samples).unwrap();
        assert!((s.median - 50.5).abs() < 1e-12);
        assert!((s.p5 - 5.95).abs() < 1e-12);
        assert!((s.p95 - 95.05).abs() < 1e-12);
        assert_eq!(s.cdf.len(), 100);
        assert_eq!(s.cdf[0], (1.0, 0.01));
        assert_eq!(s.cdf[99], (100.0, 1.0));
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(cdf_stats(&[]).is_err());
    }

    #[test]
    fn cdf_is_sorted_and_normalized() {
        let s = cdf_stats(&[3.0, 1.0, 2.0, 2.0]).unwrap();
        let values: Vec<f64> = s.cdf.iter().map(|(v, _)| *v).collect();
        assert_eq!(values, vec![1.0, 2.0, 2.0, 3.0]);
        assert_eq!(s.cdf.last().unwrap().1, 1.0);
    }
}
