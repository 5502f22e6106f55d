//! Scenario files, end-to-end campaigns and the built-in reference experiments.

pub mod builtin;
pub mod reproduce;
pub mod run;
pub mod scenario;

pub use builtin::{builtin, builtin_names};
pub use reproduce::{figure_scenarios, reproduce, Overrides, FIGURES};
pub use run::{predicted_deltas, run_campaign, run_scenario, CampaignResult, RunMeta, ScoreReport};
pub use scenario::{DetectionSettings, Mode, NoiseModel, RunConfig, Scenario};

use std::path::Path;

use crate::error::{FieldError, Result};

/// Check a scenario file without running it. `Ok(problems)` is empty for a valid file.
pub fn validate_scenario(path: &Path) -> Result<Vec<FieldError>> {
    let text = std::fs::read_to_string(path)?;
    match Scenario::parse(&text) {
        Ok(s) => Ok(s.problems()),
        Err(crate::error::Error::Schema(p)) => Ok(p),
        Err(e) => Err(e),
    }
}
