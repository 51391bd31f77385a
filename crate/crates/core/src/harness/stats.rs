//! Empirical CDFs with percentile-bootstrap confidence bands.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("no samples")]
    InsufficientData,
    #[error("sample is not a finite number")]
    NonFinite,
}

fn sorted(samples: &[f64]) -> Result<Vec<f64>, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::InsufficientData);
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

pub fn median(samples: &[f64]) -> Result<f64, StatsError> {
    Ok(quantile_sorted(&sorted(samples)?, 0.5))
}

/// Step points `(x, F(x))` at each distinct sample value.
pub fn empirical_cdf(samples: &[f64]) -> Result<Vec<(f64, f64)>, StatsError> {
    let v = sorted(samples)?;
    let n = v.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &x) in v.iter().enumerate() {
        let p = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 = p,
            _ => out.push((x, p)),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSpec {
    pub resamples: usize,
    pub low: f64,
    pub high: f64,
    pub seed: u64,
}

impl Default for BootstrapSpec {
    fn default() -> Self {
        Self {
            resamples: 200,
            low: 0.05,
            high: 0.95,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub value: f64,
    pub probability: f64,
    pub band_low: f64,
    pub band_high: f64,
}

/// Empirical CDF with pointwise bootstrap bands at every step point.
pub fn cdf_with_bands(samples: &[f64], spec: &BootstrapSpec) -> Result<Vec<CdfPoint>, StatsError> {
    let points = empirical_cdf(samples)?;
    let n = samples.len();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    // Resampled CDF values per step point.
    let mut draws = vec![Vec::with_capacity(spec.resamples); points.len()];
    let mut resample = vec![0.0; n];
    for _ in 0..spec.resamples {
        for r in resample.iter_mut() {
            *r = samples[rng.random_range(0..n)];
        }
        resample.sort_by(f64::total_cmp);
        for (k, &(x, _)) in points.iter().enumerate() {
            let below = resample.partition_point(|&s| s <= x);
            draws[k].push(below as f64 / n as f64);
        }
    }
    Ok(points
        .iter()
        .zip(draws.iter_mut())
        .map(|(&(value, probability), d)| {
            let (band_low, band_high) = if d.is_empty() {
                (probability, probability)
            } else {
                d.sort_by(f64::total_cmp);
                (quantile_sorted(d, spec.low), quantile_sorted(d, spec.high))
            };
            CdfPoint {
                value,
                probability,
                band_low,
                band_high,
            }
        })
        .collect())
}
