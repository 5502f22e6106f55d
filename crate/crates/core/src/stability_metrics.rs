//! Time deviation (TDEV) of clock-difference phase data.
//!
//! For phase samples `x_1..x_N` at spacing `τ0` and averaging factor `m`:
//!
//! ```text
//! TDEV²(mτ0) = 1 / (6 m² (N−3m+1)) · Σ_{i=1}^{N−3m+1} [ Σ_{j=i}^{i+m−1} (x_{j+2m} − 2x_{j+m} + x_j) ]²
//! ```
//!
//! The inner sums are evaluated from a prefix sum of second differences, so each
//! `m` costs `O(N)`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TdevPoint<T> {
    pub m: usize,
    pub tau_s: T,
    pub tdev_ps: T,
    pub n_terms: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TdevCurve<T> {
    pub tau0_s: T,
    pub points: Vec<TdevPoint<T>>,
}

impl<T: Scalar> TdevCurve<T> {
    pub fn at_m(&self, m: usize) -> Option<&TdevPoint<T>> {
        self.points.iter().find(|p| p.m == m)
    }

    /// Point whose averaging time is closest to `tau_s`.
    pub fn nearest(&self, tau_s: T) -> Option<&TdevPoint<T>> {
        self.points
            .iter()
            .min_by(|a, b| {
                let da = (a.tau_s - tau_s).abs();
                let db = (b.tau_s - tau_s).abs();
                da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal)
            })
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["tau_s", "tdev_ps", "m", "n_terms"])?;
        for p in &self.points {
            out.write_record([
                p.tau_s.to_string(),
                p.tdev_ps.to_string(),
                p.m.to_string(),
                p.n_terms.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Octave-spaced averaging factors `1, 2, 4, …` up to `⌊(N−1)/3⌋`.
pub fn default_m_grid(n: usize) -> Vec<usize> {
    let max_m = n.saturating_sub(1) / 3;
    std::iter::successors(Some(1usize), |m| m.checked_mul(2))
        .take_while(|&m| m <= max_m)
        .collect()
}

/// Grid entry whose `m·τ0` is nearest to `tau_s`.
pub fn nearest_m<T: Scalar>(grid: &[usize], tau0_s: T, tau_s: T) -> Option<usize> {
    grid.iter().copied().min_by(|&a, &b| {
        let da = (T::from_count(a) * tau0_s - tau_s).abs();
        let db = (T::from_count(b) * tau0_s - tau_s).abs();
        da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal)
    })
}

fn tdev_single<T: Scalar>(x: &[T], m: usize) -> (T, usize) {
    let n = x.len();
    let n_terms = n + 1 - 3 * m;
    let mut prefix = Vec::with_capacity(n - 2 * m + 1);
    let mut acc = T::zero();
    prefix.push(acc);
    for j in 0..n - 2 * m {
        acc += x[j + 2 * m] - (x[j + m] + x[j + m]) + x[j];
        prefix.push(acc);
    }
    let mut sum_sq = T::zero();
    for i in 0..n_terms {
        let s = prefix[i + m] - prefix[i];
        sum_sq += s * s;
    }
    let mf = T::from_count(m);
    let var = sum_sq / (T::lit(6.0) * mf * mf * T::from_count(n_terms));
    (var.sqrt(), n_terms)
}

/// TDEV of gap-free, evenly spaced phase data for each requested `m`.
pub fn tdev<T: Scalar>(x: &[T], tau0_s: T, m_values: &[usize]) -> Result<TdevCurve<T>> {
    let n = x.len();
    if n < 4 {
        return Err(Error::Domain(format!("TDEV needs at least 4 samples, got {n}")));
    }
    if !(tau0_s > T::zero()) {
        return Err(Error::Domain("tau0 must be > 0".into()));
    }
    let max_m = (n - 1) / 3;
    let mut ms = m_values.to_vec();
    ms.sort_unstable();
    ms.dedup();
    if ms.is_empty() {
        return Err(Error::Domain("no averaging factors requested".into()));
    }
    if let Some(&bad) = ms.iter().find(|&&m| m == 0 || m > max_m) {
        return Err(Error::Domain(format!(
            "averaging factor {bad} outside 1..={max_m} for {n} samples"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("phase data must be finite".into()));
    }
    let points = ms
        .par_iter()
        .map(|&m| {
            let (tdev_ps, n_terms) = tdev_single(x, m);
            TdevPoint {
                m,
                tau_s: T::from_count(m) * tau0_s,
                tdev_ps,
                n_terms,
            }
        })
        .collect();
    Ok(TdevCurve { tau0_s, points })
}

/// TDEV of a series that may contain gaps; any gap is an error.
pub fn tdev_gap_free<T: Scalar>(x: &[Option<T>], tau0_s: T, m_values: &[usize]) -> Result<TdevCurve<T>> {
    let gaps = x.iter().filter(|v| v.is_none()).count();
    if gaps > 0 {
        return Err(Error::Gaps { gaps, total: x.len() });
    }
    let dense: Vec<T> = x.iter().map(|v| v.expect("checked")).collect();
    tdev(&dense, tau0_s, m_values)
}

/// Minimum number of samples required on each side of a step split.
pub const MIN_SIDE_POINTS: usize = 10;

/// `mean(after) − mean(before)` for `(time, value)` samples split at `split_time_s`
/// (samples at the split time count as "after").
pub fn estimate_step_shift<T: Scalar>(samples: &[(T, T)], split_time_s: T) -> Result<T> {
    let (mut before, mut nb) = (T::zero(), 0usize);
    let (mut after, mut na) = (T::zero(), 0usize);
    for &(t, v) in samples {
        if t < split_time_s {
            before += v;
            nb += 1;
        } else {
            after += v;
            na += 1;
        }
    }
    if nb < MIN_SIDE_POINTS || na < MIN_SIDE_POINTS {
        return Err(Error::Domain(format!(
            "need {MIN_SIDE_POINTS} points each side of the split, have {nb} before and {na} after"
        )));
    }
    Ok(after / T::from_count(na) - before / T::from_count(nb))
}

/// Ordinary least-squares line through `(time, value)` samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit<T> {
    pub intercept: T,
    pub slope: T,
    /// Standard error of the slope from the residual scatter.
    pub slope_stderr: T,
}

pub fn linear_fit<T: Scalar>(samples: &[(T, T)]) -> Result<LinearFit<T>> {
    let n = samples.len();
    if n < 3 {
        return Err(Error::Domain("linear fit needs at least 3 samples".into()));
    }
    let nf = T::from_count(n);
    let mean_t = samples.iter().map(|s| s.0).sum::<T>() / nf;
    let mean_v = samples.iter().map(|s| s.1).sum::<T>() / nf;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    for &(t, v) in samples {
        sxx += (t - mean_t) * (t - mean_t);
        sxy += (t - mean_t) * (v - mean_v);
    }
    if sxx <= T::zero() {
        return Err(Error::Domain("linear fit needs distinct times".into()));
    }
    let slope = sxy / sxx;
    let intercept = mean_v - slope * mean_t;
    let rss: T = samples
        .iter()
        .map(|&(t, v)| {
            let r = v - intercept - slope * t;
            r * r
        })
        .sum();
    let slope_stderr = (rss / T::from_count(n - 2) / sxx).sqrt();
    Ok(LinearFit {
        intercept,
        slope,
        slope_stderr,
    })
}
