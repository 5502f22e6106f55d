//! Recovery of the one-way and round-trip delays, and from them the clock
//! difference, out of second-order correlation histograms.

mod acquire;
mod histogram;
mod series;

pub use acquire::{coarse_acquire, AcquiredCenters, ACQUISITION_SPAN_S, COARSE_BIN_PS};
pub use histogram::{build_histogram, estimate_peak, CorrelationHistogram, PeakEstimate, BACKGROUND_EDGE_FRACTION};
pub use series::{
    clock_difference, estimate_chunk, estimate_epoch, per_epoch_series, ClockDifferencePoint, ClockDifferenceSeries,
    Epoch, EstimatorParams,
};
