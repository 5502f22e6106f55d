use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::acquire::AcquiredCenters;
use super::histogram::{build_histogram, estimate_peak, PeakEstimate};
use crate::error::{Error, Result};
use crate::photon_sim::{DetectorId, TimestampStream, PS_PER_S};

/// `Δt = τ_AB − τ_ABA/2`.
#[inline]
pub fn clock_difference(tau_ab_ps: f64, tau_aba_ps: f64) -> f64 {
    tau_ab_ps - tau_aba_ps / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorParams {
    pub bin_width_ps: f64,
    pub window_halfwidth_ps: i64,
}

impl Default for EstimatorParams {
    fn default() -> Self {
        Self {
            bin_width_ps: 4.0,
            window_halfwidth_ps: 2000,
        }
    }
}

impl EstimatorParams {
    pub fn validate(&self) -> Result<(), crate::error::FieldError> {
        use crate::error::FieldError;
        if !(self.bin_width_ps > 0.0) || !self.bin_width_ps.is_finite() {
            return Err(FieldError::new("bin_width_ps", "must be finite and > 0"));
        }
        if self.window_halfwidth_ps <= 0 || (self.window_halfwidth_ps as f64) < self.bin_width_ps {
            return Err(FieldError::new("window_halfwidth_ps", "must be >= bin_width_ps"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockDifferencePoint {
    pub epoch_start_s: f64,
    pub tau_ab_ps: f64,
    pub tau_aba_ps: f64,
    /// Always `clock_difference(tau_ab_ps, tau_aba_ps)`.
    pub delta_ps: f64,
    /// Counting-statistics standard error of `delta_ps`.
    pub sigma_ps: f64,
}

impl ClockDifferencePoint {
    pub fn new(epoch_start_s: f64, tau_ab_ps: f64, tau_aba_ps: f64, sigma_ps: f64) -> Self {
        Self {
            epoch_start_s,
            tau_ab_ps,
            tau_aba_ps,
            delta_ps: clock_difference(tau_ab_ps, tau_aba_ps),
            sigma_ps,
        }
    }

    pub fn from_peaks(epoch_start_s: f64, forward: &PeakEstimate, loopback: &PeakEstimate) -> Self {
        let sigma = forward.uncertainty_ps.hypot(loopback.uncertainty_ps / 2.0);
        Self::new(epoch_start_s, forward.tau_ps, loopback.tau_ps, sigma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Epoch {
    Measured(ClockDifferencePoint),
    /// Peak estimation failed; no value is fabricated.
    Gap { epoch_start_s: f64 },
}

impl Epoch {
    pub fn start_s(&self) -> f64 {
        match self {
            Epoch::Measured(p) => p.epoch_start_s,
            Epoch::Gap { epoch_start_s } => *epoch_start_s,
        }
    }

    pub fn point(&self) -> Option<&ClockDifferencePoint> {
        match self {
            Epoch::Measured(p) => Some(p),
            Epoch::Gap { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClockDifferenceSeries {
    pub epoch_length_s: f64,
    pub epochs: Vec<Epoch>,
}

impl ClockDifferenceSeries {
    pub fn points(&self) -> impl Iterator<Item = &ClockDifferencePoint> + '_ {
        self.epochs.iter().filter_map(Epoch::point)
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn gap_count(&self) -> usize {
        self.epochs.iter().filter(|e| e.point().is_none()).count()
    }

    pub fn gap_fraction(&self) -> f64 {
        if self.epochs.is_empty() {
            0.0
        } else {
            self.gap_count() as f64 / self.epochs.len() as f64
        }
    }

    /// `(epoch_start_s, delta_ps)` of measured epochs.
    pub fn delta_samples(&self) -> Vec<(f64, f64)> {
        self.points().map(|p| (p.epoch_start_s, p.delta_ps)).collect()
    }

    /// δ per epoch with gaps as `None`, the form the stability estimator takes.
    pub fn deltas(&self) -> Vec<Option<f64>> {
        self.epochs.iter().map(|e| e.point().map(|p| p.delta_ps)).collect()
    }

    /// CSV with columns `epoch_start_s,tau_ab_ps,tau_aba_ps,delta_ps,sigma_ps`, plus
    /// `delta_rezeroed_ps` (δ minus `reference_ps`) when a reference is given.
    /// Gap epochs leave every value column empty.
    pub fn write_csv<W: Write>(&self, w: W, reference_ps: Option<f64>) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["epoch_start_s", "tau_ab_ps", "tau_aba_ps", "delta_ps", "sigma_ps"];
        if reference_ps.is_some() {
            header.push("delta_rezeroed_ps");
        }
        out.write_record(&header)?;
        for e in &self.epochs {
            let mut row = vec![e.start_s().to_string()];
            match e {
                Epoch::Measured(p) => {
                    row.extend([p.tau_ab_ps, p.tau_aba_ps, p.delta_ps, p.sigma_ps].map(|v| v.to_string()));
                    if let Some(r) = reference_ps {
                        row.push((p.delta_ps - r).to_string());
                    }
                }
                Epoch::Gap { .. } => row.resize(header.len(), String::new()),
            }
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Read the CSV form. Only the four base columns are required; the epoch
    /// length is inferred from the first two epoch starts.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let need = |name: &str| col(name).ok_or_else(|| Error::Format(format!("missing column {name}")));
        let (c_t, c_ab, c_aba, c_d) = (
            need("epoch_start_s")?,
            need("tau_ab_ps")?,
            need("tau_aba_ps")?,
            need("delta_ps")?,
        );
        let c_sigma = col("sigma_ps");
        let mut epochs = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let field = |c: usize| rec.get(c).unwrap_or("");
            let num = |c: usize| -> Result<f64> {
                field(c)
                    .parse::<f64>()
                    .map_err(|_| Error::Format(format!("row {}: bad number {:?}", i + 1, field(c))))
            };
            let start = num(c_t)?;
            if field(c_d).is_empty() {
                epochs.push(Epoch::Gap { epoch_start_s: start });
                continue;
            }
            let (ab, aba, d) = (num(c_ab)?, num(c_aba)?, num(c_d)?);
            let sigma = match c_sigma {
                Some(c) if !field(c).is_empty() => num(c)?,
                _ => 0.0,
            };
            let p = ClockDifferencePoint::new(start, ab, aba, sigma);
            if (p.delta_ps - d).abs() > 1e-6 * (1.0 + d.abs()) {
                return Err(Error::Format(format!(
                    "row {}: delta_ps {d} != tau_ab_ps - tau_aba_ps/2",
                    i + 1
                )));
            }
            epochs.push(Epoch::Measured(ClockDifferencePoint { delta_ps: d, ..p }));
        }
        for w in epochs.windows(2) {
            if w[1].start_s() <= w[0].start_s() {
                return Err(Error::Format("epoch starts must be strictly ascending".into()));
            }
        }
        let epoch_length_s = match epochs.as_slice() {
            [a, b, ..] => b.start_s() - a.start_s(),
            _ => 1.0,
        };
        Ok(Self {
            epoch_length_s,
            epochs,
        })
    }
}

fn range(times: &[i64], lo: i64, hi: i64) -> &[i64] {
    let start = times.partition_point(|&t| t < lo);
    let end = times.partition_point(|&t| t < hi);
    &times[start..end]
}

/// Estimate one epoch from idler timestamps and the candidate partner slices.
pub fn estimate_epoch(
    epoch_start_s: f64,
    idler: &[i64],
    signal: &[i64],
    returned: &[i64],
    params: &EstimatorParams,
    centers: &AcquiredCenters,
) -> Result<Epoch> {
    let hw = params.window_halfwidth_ps;
    let peak = |b: &[i64], center: i64| -> Result<Option<PeakEstimate>> {
        let h = build_histogram(idler, b, params.bin_width_ps, center, hw)?;
        match estimate_peak(&h) {
            Ok(p) => Ok(Some(p)),
            Err(Error::NoPeak(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let forward = peak(signal, centers.forward_ps)?;
    let loopback = peak(returned, centers.loopback_ps)?;
    Ok(match (forward, loopback) {
        (Some(f), Some(l)) => Epoch::Measured(ClockDifferencePoint::from_peaks(epoch_start_s, &f, &l)),
        _ => Epoch::Gap { epoch_start_s },
    })
}

/// Estimate a chunk holding all detections of one epoch (as produced by
/// [`crate::photon_sim::RoundTripSim::block`]).
pub fn estimate_chunk(
    epoch_start_s: f64,
    chunk: &TimestampStream,
    params: &EstimatorParams,
    centers: &AcquiredCenters,
) -> Result<Epoch> {
    estimate_epoch(
        epoch_start_s,
        chunk.times(DetectorId::IdlerA),
        chunk.times(DetectorId::SignalB),
        chunk.times(DetectorId::ReturnA),
        params,
        centers,
    )
}

/// Split a stream into epochs (by idler time) and estimate δ for each.
pub fn per_epoch_series(
    stream: &TimestampStream,
    epoch_length_s: f64,
    params: &EstimatorParams,
    centers: &AcquiredCenters,
) -> Result<ClockDifferenceSeries> {
    if !(epoch_length_s > 0.0) || !epoch_length_s.is_finite() {
        return Err(Error::Domain("epoch length must be finite and > 0".into()));
    }
    params.validate().map_err(Error::Config)?;
    if stream.duration_s < epoch_length_s {
        return Err(Error::Domain(format!(
            "stream lasts {} s, shorter than one {} s epoch",
            stream.duration_s, epoch_length_s
        )));
    }
    let n_epochs = (stream.duration_s / epoch_length_s - 1e-9).ceil() as usize;
    let idler = stream.times(DetectorId::IdlerA);
    let signal = stream.times(DetectorId::SignalB);
    let returned = stream.times(DetectorId::ReturnA);
    let hw = params.window_halfwidth_ps;
    let epochs = (0..n_epochs)
        .into_par_iter()
        .map(|k| {
            let start_s = k as f64 * epoch_length_s;
            let lo = (start_s * PS_PER_S).round() as i64;
            let hi = ((k + 1) as f64 * epoch_length_s * PS_PER_S).round() as i64;
            let a = range(idler, lo, hi);
            let fwd = range(signal, lo + centers.forward_ps - hw, hi + centers.forward_ps + hw);
            let back = range(returned, lo + centers.loopback_ps - hw, hi + centers.loopback_ps + hw);
            estimate_epoch(start_s, a, fwd, back, params, centers)
        })
        .collect::<Result<Vec<_>>>()?;
    let series = ClockDifferenceSeries {
        epoch_length_s,
        epochs,
    };
    if series.points().next().is_none() {
        return Err(Error::EmptySeries);
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clock_difference_examples() {
        assert_eq!(clock_difference(1000.0, 2000.0), 0.0);
        assert_eq!(clock_difference(1100.0, 2000.0), 100.0);
    }

    #[test]
    fn csv_gaps_and_reference() {
        let s = ClockDifferenceSeries {
            epoch_length_s: 1.0,
            epochs: vec![
                Epoch::Measured(ClockDifferencePoint::new(0.0, 49_000_000.5, 98_000_020.0, 0.8)),
                Epoch::Gap { epoch_start_s: 1.0 },
                Epoch::Measured(ClockDifferencePoint::new(2.0, 49_000_001.0, 98_000_020.0, 0.7)),
            ],
        };
        let mut buf = Vec::new();
        s.write_csv(&mut buf, Some(-9900.0)).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "epoch_start_s,tau_ab_ps,tau_aba_ps,delta_ps,sigma_ps,delta_rezeroed_ps"
        );
        assert_eq!(lines[1], "0,49000000.5,98000020,-9.5,0.8,9890.5");
        assert_eq!(lines[2], "1,,,,,");
        let back = ClockDifferenceSeries::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.gap_count(), 1);
    }

    #[test]
    fn csv_rejects_inconsistent_delta() {
        let text = "epoch_start_s,tau_ab_ps,tau_aba_ps,delta_ps\n0,100,100,3\n";
        assert!(ClockDifferenceSeries::read_csv(text.as_bytes()).is_err());
        let ok = "epoch_start_s,tau_ab_ps,tau_aba_ps,delta_ps\n0,100,100,50\n1,100,100,50\n";
        let s = ClockDifferenceSeries::read_csv(ok.as_bytes()).unwrap();
        assert_eq!(s.points().count(), 2);
        assert_eq!(s.epoch_length_s, 1.0);
    }
}
