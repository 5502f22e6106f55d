use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binned coincidence counts of `t_b − t_a` around `window_center_ps`.
///
/// Bin `k` covers `[center − halfwidth + k·w, center − halfwidth + (k+1)·w)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationHistogram {
    pub bin_width_ps: f64,
    pub window_center_ps: i64,
    pub window_halfwidth_ps: i64,
    pub counts: Vec<u64>,
}

impl CorrelationHistogram {
    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Mean position of the integer time differences that fall into bin `k`.
    ///
    /// Timestamps are integer picoseconds, so a bin `[lo, hi)` holds the
    /// integers `ceil(lo) ..= ceil(hi) − 1`, whose mean is generally not the
    /// geometric bin center.
    pub fn bin_position(&self, k: usize) -> f64 {
        let lo = -(self.window_halfwidth_ps as f64) + k as f64 * self.bin_width_ps;
        let hi = lo + self.bin_width_ps;
        let first = lo.ceil();
        let last = hi.ceil() - 1.0;
        let rel = if last >= first { 0.5 * (first + last) } else { 0.5 * (lo + hi) };
        self.window_center_ps as f64 + rel
    }

    fn contains(&self, tau_ps: f64) -> bool {
        let lo = (self.window_center_ps - self.window_halfwidth_ps) as f64;
        let hi = lo + self.n_bins() as f64 * self.bin_width_ps;
        tau_ps >= lo && tau_ps < hi
    }
}

fn check_sorted(times: &[i64], name: &str) -> Result<()> {
    if times.windows(2).all(|w| w[0] <= w[1]) {
        Ok(())
    } else {
        Err(Error::Contract(format!("{name} timestamps are not sorted")))
    }
}

/// Histogram of all ordered pairs `(t_a, t_b)` with `t_b − t_a` inside the window.
///
/// Both inputs must be ascending. One sweep over `a` with a trailing pointer
/// into `b`, so the cost is linear in the number of events plus the pairs
/// inside the window.
pub fn build_histogram(
    a: &[i64],
    b: &[i64],
    bin_width_ps: f64,
    window_center_ps: i64,
    window_halfwidth_ps: i64,
) -> Result<CorrelationHistogram> {
    if !(bin_width_ps > 0.0) || !bin_width_ps.is_finite() {
        return Err(Error::Contract("bin width must be finite and > 0".into()));
    }
    if window_halfwidth_ps <= 0 {
        return Err(Error::Contract("window halfwidth must be > 0".into()));
    }
    check_sorted(a, "first")?;
    check_sorted(b, "second")?;

    let n_bins = ((2 * window_halfwidth_ps) as f64 / bin_width_ps).round().max(1.0) as usize;
    let span = n_bins as f64 * bin_width_ps;
    let mut counts = vec![0u64; n_bins];
    let mut start = 0usize;
    for &ta in a {
        let lo = ta + window_center_ps - window_halfwidth_ps;
        while start < b.len() && b[start] < lo {
            start += 1;
        }
        for &tb in &b[start..] {
            let offset = (tb - lo) as f64;
            if offset >= span {
                break;
            }
            let k = (offset / bin_width_ps) as usize;
            if k < n_bins {
                counts[k] += 1;
            }
        }
    }
    Ok(CorrelationHistogram {
        bin_width_ps,
        window_center_ps,
        window_halfwidth_ps,
        counts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakEstimate {
    pub tau_ps: f64,
    pub uncertainty_ps: f64,
    pub peak_counts: u64,
    pub background_per_bin: f64,
}

/// Fraction of bins, split over both window edges, used for the background level.
pub const BACKGROUND_EDGE_FRACTION: f64 = 0.10;

/// Background-subtracted centroid of the peak.
///
/// The background is the mean of the outer 10 % of bins. Starting at the
/// highest bin, the peak region grows while bins stay above
/// `background + 3·√max(background, 1)`, then widens by half its width on
/// each side to take in the tails; the centroid of the net counts in that region
/// is the estimate, and `rms/√net` its uncertainty (the rms includes the
/// `w²/12` binning variance).
pub fn estimate_peak(h: &CorrelationHistogram) -> Result<PeakEstimate> {
    let n = h.n_bins();
    if n == 0 || h.total() == 0 {
        return Err(Error::NoPeak("empty histogram".into()));
    }
    let edge = ((n as f64 * BACKGROUND_EDGE_FRACTION / 2.0).round() as usize).clamp(1, n.div_ceil(2));
    let edge_sum: u64 = h.counts[..edge].iter().sum::<u64>() + h.counts[n - edge..].iter().sum::<u64>();
    let background = edge_sum as f64 / (2 * edge) as f64;
    // the √ floor keeps a lone accidental count from passing as a peak on an empty background
    let threshold = background + 3.0 * background.max(1.0).sqrt();

    let (kmax, &peak) = h
        .counts
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.cmp(y.1).then(y.0.cmp(&x.0)))
        .expect("non-empty");
    if peak as f64 <= threshold {
        return Err(Error::NoPeak(format!(
            "max bin {peak} does not exceed threshold {threshold:.2}"
        )));
    }
    let above = |k: usize| h.counts[k] as f64 > threshold;
    let mut lo = kmax;
    while lo > 0 && above(lo - 1) {
        lo -= 1;
    }
    let mut hi = kmax;
    while hi + 1 < n && above(hi + 1) {
        hi += 1;
    }
    // the crossing points cut the tails off; widen by half the core width on each side
    let margin = (hi - lo + 1) / 2;
    let lo = lo.saturating_sub(margin);
    let hi = (hi + margin).min(n - 1);

    let mut net = 0.0;
    let mut first = 0.0;
    for k in lo..=hi {
        let w = h.counts[k] as f64 - background;
        net += w;
        first += w * h.bin_position(k);
    }
    if net <= 0.0 {
        return Err(Error::NoPeak("no net counts above background".into()));
    }
    let tau = first / net;
    let mut second = 0.0;
    for k in lo..=hi {
        let w = h.counts[k] as f64 - background;
        let d = h.bin_position(k) - tau;
        second += w * d * d;
    }
    let variance = second / net + h.bin_width_ps * h.bin_width_ps / 12.0;
    debug_assert!(h.contains(tau));
    Ok(PeakEstimate {
        tau_ps: tau,
        uncertainty_ps: (variance / net).sqrt(),
        peak_counts: peak,
        background_per_bin: background,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn single_pair_lands_in_center_bin() {
        let h = build_histogram(&[0], &[1000], 1.0, 1000, 500).unwrap();
        assert_eq!(h.n_bins(), 1000);
        assert_eq!(h.total(), 1);
        assert_eq!(h.counts[500], 1);
        assert_eq!(h.bin_position(500), 1000.0);
    }

    #[test]
    fn disjoint_streams_give_empty_histogram() {
        let h = build_histogram(&[0, 10, 20], &[5_000, 6_000], 4.0, 1000, 500).unwrap();
        assert_eq!(h.total(), 0);
        assert!(matches!(estimate_peak(&h), Err(Error::NoPeak(_))));
    }

    #[test]
    fn unsorted_input_is_a_contract_violation() {
        assert!(matches!(build_histogram(&[5, 1], &[1], 1.0, 0, 10), Err(Error::Contract(_))));
        assert!(matches!(build_histogram(&[1], &[5, 1], 1.0, 0, 10), Err(Error::Contract(_))));
        assert!(matches!(build_histogram(&[1], &[1], 0.0, 0, 10), Err(Error::Contract(_))));
    }

    /// Brute-force count over all pairs.
    fn naive(a: &[i64], b: &[i64], w: f64, c: i64, hw: i64) -> Vec<u64> {
        let n = ((2 * hw) as f64 / w).round() as usize;
        let mut out = vec![0; n];
        for &ta in a {
            for &tb in b {
                let off = (tb - ta - c + hw) as f64;
                if off >= 0.0 && off < n as f64 * w {
                    out[(off / w) as usize] += 1;
                }
            }
        }
        out
    }

    #[test]
    fn sweep_matches_all_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let mut a: Vec<i64> = (0..200).map(|_| rng.random_range(0..50_000)).collect();
            let mut b: Vec<i64> = (0..200).map(|_| rng.random_range(0..50_000)).collect();
            a.sort_unstable();
            b.sort_unstable();
            let c = rng.random_range(-2000..2000);
            let hw = rng.random_range(1..3000);
            let w = [1.0, 2.5, 4.0, 7.0][rng.random_range(0..4)];
            let h = build_histogram(&a, &b, w, c, hw).unwrap();
            assert_eq!(h.counts, naive(&a, &b, w, c, hw));
        }
    }

    #[test]
    fn lone_accidentals_are_not_a_peak() {
        let a: Vec<i64> = (0..100).map(|i| i * 1_000_000).collect();
        let b = vec![a[3] + 500, a[40] + 1200, a[77] - 900];
        let h = build_histogram(&a, &b, 4.0, 0, 2000).unwrap();
        assert_eq!(h.total(), 3);
        assert!(matches!(estimate_peak(&h), Err(Error::NoPeak(_))));
    }

    #[test]
    fn delta_peak() {
        let a: Vec<i64> = (0..400).map(|i| i * 1_000_000).collect();
        let b: Vec<i64> = a.iter().map(|t| t + 777).collect();
        let h = build_histogram(&a, &b, 4.0, 800, 2000).unwrap();
        let p = estimate_peak(&h).unwrap();
        // integers 776..=779 share a bin; the estimate is their mean
        assert!((p.tau_ps - 777.0).abs() <= 2.0, "{}", p.tau_ps);
        assert!(p.uncertainty_ps <= 4.0 / 400f64.sqrt());
        let h1 = build_histogram(&a, &b, 1.0, 800, 2000).unwrap();
        assert_eq!(estimate_peak(&h1).unwrap().tau_ps, 777.0);
        assert_eq!(estimate_peak(&h1).unwrap().peak_counts, 400);
    }

    #[test]
    fn gaussian_peak_within_three_standard_errors() {
        let sigma = 110.0;
        let truth = 49_000_123.4;
        let n = 10_000;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for trial in 0..5 {
            let a: Vec<i64> = (0..n).map(|i| i as i64 * 10_000_000).collect();
            let mut b: Vec<i64> = a
                .iter()
                .map(|&t| {
                    let z: f64 = rng.sample(StandardNormal);
                    (t as f64 + truth + sigma * z).round() as i64
                })
                .collect();
            b.sort_unstable();
            let h = build_histogram(&a, &b, 4.0, 49_000_000, 2000).unwrap();
            let p = estimate_peak(&h).unwrap();
            let tol = 3.0 * sigma / (n as f64).sqrt();
            assert!((p.tau_ps - truth).abs() <= tol, "trial {trial}: {} vs {truth}", p.tau_ps);
            assert!((p.uncertainty_ps - sigma / 100.0).abs() < 0.2, "{}", p.uncertainty_ps);
        }
    }

    #[test]
    fn translation_invariance() {
        let a = vec![3, 100, 250, 900];
        let b = vec![40, 160, 300, 980, 1200];
        let h = build_histogram(&a, &b, 2.0, 50, 120).unwrap();
        let shift = 987_654_321;
        let a2: Vec<i64> = a.iter().map(|t| t + shift).collect();
        let b2: Vec<i64> = b.iter().map(|t| t + shift).collect();
        assert_eq!(build_histogram(&a2, &b2, 2.0, 50, 120).unwrap(), h);
    }
}
