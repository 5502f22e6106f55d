use serde::{Deserialize, Serialize};

use super::histogram::{build_histogram, estimate_peak};
use super::series::EstimatorParams;
use crate::error::{Error, Result};
use crate::photon_sim::{DetectorId, TimestampStream, PS_PER_S};

pub const COARSE_BIN_PS: f64 = 1000.0;
/// Leading stretch of idler data used for acquisition.
pub const ACQUISITION_SPAN_S: f64 = 1.0;

/// Window centers for the forward (`IdlerA × SignalB`) and loopback
/// (`IdlerA × ReturnA`) correlations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcquiredCenters {
    pub forward_ps: i64,
    pub loopback_ps: i64,
}

fn acquire_one(a: &[i64], b: &[i64], nominal_ps: f64, params: &EstimatorParams, what: &str) -> Result<i64> {
    let fail = |stage: &str, e: Error| Error::Acquisition(format!("{what} {stage} search: {e}"));
    let halfwidth = (2.0 * nominal_ps).ceil() as i64;
    let coarse = build_histogram(a, b, COARSE_BIN_PS, 0, halfwidth)?;
    let rough = estimate_peak(&coarse).map_err(|e| fail("coarse", e))?;
    let center = rough.tau_ps.round() as i64;
    let fine = build_histogram(a, b, params.bin_width_ps, center, params.window_halfwidth_ps)?;
    let refined = estimate_peak(&fine).map_err(|e| fail("fine", e))?;
    Ok(refined.tau_ps.round() as i64)
}

/// Two-stage search for the correlation peaks: 1 ns bins over ±2× the nominal
/// delay, then the fine histogram around the coarse peak.
pub fn coarse_acquire(
    stream: &TimestampStream,
    nominal_one_way_ps: f64,
    params: &EstimatorParams,
) -> Result<AcquiredCenters> {
    if !(nominal_one_way_ps > 0.0) {
        return Err(Error::Contract("nominal delay must be > 0".into()));
    }
    let idler = stream.times(DetectorId::IdlerA);
    if idler.is_empty() {
        return Err(Error::Acquisition("no idler detections".into()));
    }
    let cutoff = idler[0] + (ACQUISITION_SPAN_S * PS_PER_S) as i64;
    let a = &idler[..idler.partition_point(|&t| t < cutoff)];
    let forward_ps = acquire_one(a, stream.times(DetectorId::SignalB), nominal_one_way_ps, params, "forward")?;
    let loopback_ps = acquire_one(
        a,
        stream.times(DetectorId::ReturnA),
        2.0 * nominal_one_way_ps,
        params,
        "loopback",
    )?;
    Ok(AcquiredCenters {
        forward_ps,
        loopback_ps,
    })
}
