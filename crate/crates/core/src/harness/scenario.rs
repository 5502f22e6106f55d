use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attack_model::{AttackEvent, CoordinationRule, DelayTrajectory, SchemeKind};
use crate::detection::{CusumConfig, ThresholdConfig};
use crate::error::{Error, FieldError, Result};
use crate::photon_sim::{ChannelConfig, Clocks, DetectorSet, PhotonSetup, SourceConfig, TdcConfig};
use crate::timing_estimator::EstimatorParams;

pub const SCHEMA_VERSION: u32 = 1;
/// Zero point of the re-zeroed δ column.
pub const DEFAULT_REFERENCE_PS: f64 = -9900.0;
/// Largest fraction of gap epochs a run tolerates before failing.
pub const MAX_GAP_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Photon-level Monte-Carlo followed by correlation-peak estimation.
    FullSim,
    /// Closed-form δ per epoch plus Gaussian estimator noise.
    Analytic,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full_sim" => Ok(Mode::FullSim),
            "analytic" => Ok(Mode::Analytic),
            other => Err(Error::config("mode", format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub duration_s: f64,
    #[serde(default = "default_epoch_s")]
    pub epoch_s: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_epoch_s() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    /// Standard deviation of the per-epoch δ estimate.
    pub epoch_sigma_ps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionSettings {
    pub threshold: ThresholdConfig<f64>,
    pub cusum: CusumConfig<f64>,
    /// Known attack start, used only for scoring.
    pub attack_onset_s: Option<f64>,
}

fn default_coordination() -> CoordinationRule<f64> {
    CoordinationRule::constant_round_trip()
}

fn default_reference() -> f64 {
    DEFAULT_REFERENCE_PS
}

fn default_scheme() -> SchemeKind {
    SchemeKind::RoundTrip
}

/// One experiment: link physics, attack, analysis settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
    #[serde(default = "default_scheme")]
    pub scheme: SchemeKind,
    pub mode: Mode,
    pub run: RunConfig,
    #[serde(default = "default_coordination")]
    pub coordination: CoordinationRule<f64>,
    #[serde(default)]
    pub m_events: Vec<AttackEvent<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_events: Option<Vec<AttackEvent<f64>>>,
    #[serde(default)]
    pub source: SourceConfig,
    #[serde(default)]
    pub detectors: DetectorSet,
    #[serde(default)]
    pub tdc: TdcConfig,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default)]
    pub clocks: Clocks,
    #[serde(default)]
    pub estimator: EstimatorParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseModel>,
    #[serde(default)]
    pub detection: DetectionSettings,
    #[serde(default = "default_reference")]
    pub reference_ps: f64,
}

fn push(errors: &mut Vec<FieldError>, r: Result<(), FieldError>, parent: &str) {
    if let Err(e) = r {
        errors.push(e.nested(parent));
    }
}

fn positive(errors: &mut Vec<FieldError>, path: &str, v: f64) {
    if !(v > 0.0) || !v.is_finite() {
        errors.push(FieldError::new(path, "must be finite and > 0"));
    }
}

impl Scenario {
    /// Parse without semantic validation; type errors carry the field path.
    pub fn parse(json: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(json);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let path = if path == "." { String::new() } else { path };
            Error::Schema(vec![FieldError::new(path, e.into_inner().to_string())])
        })
    }

    /// Parse and validate.
    pub fn from_json(json: &str) -> Result<Self> {
        let s = Self::parse(json)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Every schema and invariant problem found, or `Ok`.
    pub fn problems(&self) -> Vec<FieldError> {
        let mut errors = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            errors.push(FieldError::new(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        if self.name.trim().is_empty() {
            errors.push(FieldError::new("name", "must not be empty"));
        }
        positive(&mut errors, "run.duration_s", self.run.duration_s);
        positive(&mut errors, "run.epoch_s", self.run.epoch_s);
        if self.run.epoch_s > self.run.duration_s {
            errors.push(FieldError::new("run.epoch_s", "must not exceed run.duration_s"));
        }
        push(&mut errors, self.coordination.validate(), "coordination");
        for (i, e) in self.m_events.iter().enumerate() {
            push(&mut errors, e.validate(), &format!("m_events[{i}]"));
        }
        if let Some(n) = &self.n_events {
            for (i, e) in n.iter().enumerate() {
                push(&mut errors, e.validate(), &format!("n_events[{i}]"));
            }
            if matches!(self.coordination, CoordinationRule::Proportional { .. }) {
                errors.push(FieldError::new(
                    "n_events",
                    "conflicts with proportional coordination, which derives N from M; use mode \"independent\"",
                ));
            }
        }
        if let Err(e) = self.photon_setup().validate() {
            errors.push(e);
        }
        push(&mut errors, self.estimator.validate(), "estimator");
        match self.mode {
            Mode::FullSim if self.scheme != SchemeKind::RoundTrip => errors.push(FieldError::new(
                "scheme",
                "full_sim supports only round_trip; use analytic mode for other schemes",
            )),
            Mode::Analytic => match self.noise {
                None => errors.push(FieldError::new("noise", "analytic mode requires a noise model")),
                Some(n) if !(n.epoch_sigma_ps >= 0.0) || !n.epoch_sigma_ps.is_finite() => {
                    errors.push(FieldError::new("noise.epoch_sigma_ps", "must be finite and >= 0"))
                }
                _ => {}
            },
            _ => {}
        }
        push(&mut errors, self.detection.threshold.validate(), "detection.threshold");
        push(&mut errors, self.detection.cusum.validate(), "detection.cusum");
        if let Some(t) = self.detection.attack_onset_s {
            if !t.is_finite() || t < 0.0 {
                errors.push(FieldError::new("detection.attack_onset_s", "must be finite and >= 0"));
            }
        }
        if !self.reference_ps.is_finite() {
            errors.push(FieldError::new("reference_ps", "must be finite"));
        }
        errors
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Schema(problems))
        }
    }

    pub fn photon_setup(&self) -> PhotonSetup {
        PhotonSetup {
            source: self.source,
            detectors: self.detectors,
            tdc: self.tdc,
            channel: self.channel,
            clocks: self.clocks,
        }
    }

    pub fn m_trajectory(&self) -> DelayTrajectory<f64> {
        DelayTrajectory::new(self.m_events.clone())
    }

    /// Return-leg trajectory after applying the coordination rule.
    pub fn n_trajectory(&self) -> DelayTrajectory<f64> {
        let explicit = self.n_events.clone().map(DelayTrajectory::new);
        crate::attack_model::derive_n_from_m(&self.m_trajectory(), &self.coordination, explicit.as_ref())
    }

    pub fn n_epochs(&self) -> usize {
        (self.run.duration_s / self.run.epoch_s - 1e-9).ceil().max(1.0) as usize
    }
}
