//! Built-in scenarios for the four reference experiments.

use super::scenario::{DetectionSettings, Mode, NoiseModel, RunConfig, Scenario, DEFAULT_REFERENCE_PS, SCHEMA_VERSION};
use crate::attack_model::{AttackEvent, Behavior, CoordinationRule, SchemeKind};
use crate::error::{Error, Result};

pub const DEFAULT_SEED: u64 = 1;
/// Per-epoch δ noise for analytic runs, matched to the default photon link at 1 s epochs.
pub const ANALYTIC_EPOCH_SIGMA_PS: f64 = 0.8;

pub const JUMP_AMPLITUDES_PS: [f64; 6] = [0.0, -10.0, -50.0, -100.0, -200.0, -500.0];
pub const JUMP_ONSET_S: f64 = 250.0;
pub const JUMP_DURATION_S: f64 = 500.0;

pub const SPIKE_AMPLITUDES_PS: [f64; 5] = [-500.0, -400.0, -300.0, -200.0, -100.0];
pub const SPIKE_ONSETS_S: [f64; 5] = [330.0, 662.0, 1022.0, 1376.0, 1709.0];
pub const SPIKE_DURATION_S: f64 = 2000.0;

pub const GRADUAL_DURATION_S: f64 = 3500.0;
pub const GRADUAL_STEP_S: f64 = 35.0;

pub fn jump_name(amplitude_ps: f64) -> String {
    format!("jump_{amplitude_ps}ps")
}

/// Names of every built-in scenario.
pub fn builtin_names() -> Vec<String> {
    let mut names = vec!["baseline".to_string()];
    names.extend(JUMP_AMPLITUDES_PS.iter().map(|&a| jump_name(a)));
    names.extend(
        ["spike_fig4", "gradual_baseline", "gradual_attack1", "gradual_attack2"]
            .iter()
            .map(|s| s.to_string()),
    );
    names
}

fn base(name: &str, duration_s: f64) -> Scenario {
    Scenario {
        schema_version: SCHEMA_VERSION,
        name: name.to_string(),
        comment: None,
        scheme: SchemeKind::RoundTrip,
        mode: Mode::FullSim,
        run: RunConfig {
            duration_s,
            epoch_s: 1.0,
            seed: DEFAULT_SEED,
        },
        coordination: CoordinationRule::constant_round_trip(),
        m_events: Vec::new(),
        n_events: None,
        source: Default::default(),
        detectors: Default::default(),
        tdc: Default::default(),
        channel: Default::default(),
        clocks: Default::default(),
        estimator: Default::default(),
        noise: Some(NoiseModel {
            epoch_sigma_ps: ANALYTIC_EPOCH_SIGMA_PS,
        }),
        detection: DetectionSettings::default(),
        reference_ps: DEFAULT_REFERENCE_PS,
    }
}

fn with_onset(mut s: Scenario, onset_s: f64) -> Scenario {
    s.detection.attack_onset_s = Some(onset_s);
    s
}

fn staircase(amplitude_ps: f64) -> AttackEvent<f64> {
    AttackEvent::gradual(
        amplitude_ps,
        0.0,
        Behavior::Linear {
            rate_per_s: 1.0 / GRADUAL_STEP_S,
        },
    )
    .stepped(GRADUAL_STEP_S)
}

/// Look up a built-in scenario by name.
pub fn builtin(name: &str) -> Result<Scenario> {
    if name == "baseline" {
        return Ok(base(name, JUMP_DURATION_S));
    }
    if let Some(&a) = JUMP_AMPLITUDES_PS.iter().find(|&&a| jump_name(a) == name) {
        let mut s = with_onset(base(name, JUMP_DURATION_S), JUMP_ONSET_S);
        s.m_events = vec![AttackEvent::jump(a, JUMP_ONSET_S)];
        return Ok(s);
    }
    let s = match name {
        "spike_fig4" => {
            let mut s = with_onset(base(name, SPIKE_DURATION_S), SPIKE_ONSETS_S[0]);
            s.m_events = SPIKE_AMPLITUDES_PS
                .iter()
                .zip(SPIKE_ONSETS_S)
                .map(|(&a, t)| AttackEvent::spike(a, t, crate::attack_model::DEFAULT_SPIKE_WIDTH_S))
                .collect();
            s
        }
        "gradual_baseline" => base(name, GRADUAL_DURATION_S),
        "gradual_attack1" => {
            let mut s = with_onset(base(name, GRADUAL_DURATION_S), 0.0);
            s.comment = Some(
                "Only the Alice-to-Bob delay is adjusted, so the clock difference drifts at half the injected rate."
                    .into(),
            );
            s.coordination = CoordinationRule::Independent;
            s.m_events = vec![staircase(-2.0).until(2100.0, false)];
            s
        }
        "gradual_attack2" => {
            let mut s = with_onset(base(name, GRADUAL_DURATION_S), 0.0);
            s.comment = Some(
                "After 1750 s the staircase runs back toward zero at the same rate. \
                 The alternative reading, a continued ramp of the opposite sign from the turning point, \
                 is not encoded."
                    .into(),
            );
            s.m_events = vec![staircase(-4.0).until(1750.0, true)];
            s
        }
        _ => return Err(Error::UnknownBuiltin(name.to_string())),
    };
    Ok(s)
}
