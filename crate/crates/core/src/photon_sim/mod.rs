//! Photon-pair timestamp generation for the round-trip link.
//!
//! Idlers are detected at Alice (`IdlerA`). Signals cross the fiber to Bob,
//! picking up the attack delay `M(t)`; Bob's splitter either sends them to his
//! detector (`SignalB`, Bob's clock) or back across the fiber with delay `N(t)`
//! to Alice's return detector (`ReturnA`).

mod config;
mod sim;
mod stream;

pub use config::{
    ChannelConfig, ClockConfig, Clocks, DetectorConfig, DetectorSet, PhotonSetup, SourceConfig, TdcConfig,
    BASELINE_OFFSET_PS, DETECTOR_EFFICIENCY, DETECTOR_JITTER_FWHM_PS, FWHM_TO_SIGMA, TDC_JITTER_FWHM_PS,
};
pub use sim::{
    generate_pairs, propagate_and_detect, run_round_trip_sim, EmissionPair, RoundTripSim, DEFAULT_BLOCK_S, PS_PER_S,
};
pub use stream::{Channel, DetectorId, TimestampRecord, TimestampStream, NO_PAIR};
