//! Plot-ready output helpers.

use std::fs;
use std::path::Path;

use crate::error::{CliError, Result};

/// Round-trip exact float formatting (17 significant digits).
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Empirical CDF as `value,cdf` CSV with a header, sorted ascending, where
/// the `i`-th smallest of `n` samples gets `i / n`.
pub fn emit_cdf(samples: &[f64]) -> Result<String> {
    if samples.is_empty() {
        return Err(CliError::Spec("empirical CDF of no samples".into()));
    }
    let mut out = String::from("value,cdf\n");
    for (x, f) in cdf_points(samples) {
        out.push_str(&format!("{},{}\n", fmt_f64(x), fmt_f64(f)));
    }
    Ok(out)
}

/// Sorted `(value, i / n)` pairs; NaNs sort last.
pub fn cdf_points(samples: &[f64]) -> Vec<(f64, f64)> {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.into_iter()
        .enumerate()
        .map(|(i, x)| (x, (i + 1) as f64 / n))
        .collect()
}

/// Nearest-rank quantile: the smallest sample whose empirical CDF reaches `q`.
pub fn quantile(samples: &[f64], q: f64) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    Some(v[rank - 1])
}

pub fn mean(samples: &[f64]) -> Option<f64> {
    if samples.is_empty() {
        None
    } else {
        Some(samples.iter().sum::<f64>() / samples.len() as f64)
    }
}

pub fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_sample() {
        assert_eq!(cdf_points(&[1.0]), vec![(1.0, 1.0)]);
    }

    #[test]
    fn two_samples_sorted() {
        assert_eq!(cdf_points(&[2.0, 1.0]), vec![(1.0, 0.5), (2.0, 1.0)]);
        let csv = emit_cdf(&[2.0, 1.0]).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "value,cdf");
        assert_eq!(lines[1], "1.0000000000000000e0,5.0000000000000000e-1");
    }

    #[test]
    fn empty_is_an_error() {
        assert!(emit_cdf(&[]).is_err());
    }

    #[test]
    fn uniform_samples_within_dkw_band() {
        // golden-ratio sequence, equidistributed on [0, 1)
        let n = 10_000;
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.618_033_988_749_894_9).fract()).collect();
        // DKW band at 99.9% confidence
        let eps = ((2.0f64 / 0.001).ln() / (2.0 * n as f64)).sqrt();
        for (x, f) in cdf_points(&xs) {
            assert!((f - x).abs() <= eps, "{x} {f}");
        }
    }

    #[test]
    fn quantiles() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(quantile(&v, 0.05), Some(5.0));
        assert_eq!(quantile(&v, 0.0), Some(1.0));
        assert_eq!(quantile(&v, 1.0), Some(100.0));
        assert_eq!(quantile(&[], 0.5), None);
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, 6.02e23, -2.5e-300] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
    }
}
