//! Simulation and analysis of asymmetric-delay attacks on round-trip quantum
//! clock synchronization.
//!
//! The analytic modules are generic over the floating-point type; the aliases
//! below fix them to `f64`, which is what the photon simulator and estimator use.

pub mod attack_model;
pub mod detection;
pub mod error;
pub mod harness;
pub mod hash;
pub mod photon_sim;
pub mod scalar;
pub mod stability_metrics;
pub mod timing_estimator;

pub use error::{Error, FieldError, Result};
pub use scalar::Scalar;

pub type AttackEvent = attack_model::AttackEvent<f64>;
pub type Behavior = attack_model::Behavior<f64>;
pub type DelayTrajectory = attack_model::DelayTrajectory<f64>;
pub type CoordinationRule = attack_model::CoordinationRule<f64>;
pub type TdevCurve = stability_metrics::TdevCurve<f64>;
pub type TdevPoint = stability_metrics::TdevPoint<f64>;
pub type LinearFit = stability_metrics::LinearFit<f64>;
pub type Alarm = detection::Alarm<f64>;
pub type ThresholdConfig = detection::ThresholdConfig<f64>;
pub type CusumConfig = detection::CusumConfig<f64>;
pub type DetectionScore = detection::DetectionScore<f64>;
