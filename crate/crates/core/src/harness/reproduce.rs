use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use rayon::prelude::*;

use super::builtin::{builtin, jump_name, JUMP_AMPLITUDES_PS, JUMP_ONSET_S, SPIKE_AMPLITUDES_PS, SPIKE_ONSETS_S};
use super::run::{run_campaign, CampaignResult};
use super::scenario::{Mode, Scenario};
use crate::error::{Error, Result};
use crate::stability_metrics::{estimate_step_shift, linear_fit, LinearFit};

pub const FIGURES: [&str; 4] = ["fig2", "fig3", "fig4", "fig5"];
/// Averaging time at which the gradual-attack runs are compared.
pub const GRADUAL_COMPARISON_TAU_S: f64 = 1000.0;

/// Settings applied on top of built-in or file scenarios.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub mode: Option<Mode>,
    pub epoch_s: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, s: &mut Scenario) {
        if let Some(seed) = self.seed {
            s.run.seed = seed;
        }
        if let Some(mode) = self.mode {
            s.mode = mode;
        }
        if let Some(e) = self.epoch_s {
            s.run.epoch_s = e;
        }
    }
}

pub fn figure_scenarios(figure: &str) -> Result<Vec<Scenario>> {
    let names: Vec<String> = match figure {
        "fig2" => ["baseline", "jump_-100ps", "spike_fig4", "gradual_attack2"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        "fig3" => JUMP_AMPLITUDES_PS.iter().map(|&a| jump_name(a)).collect(),
        "fig4" => vec!["spike_fig4".into()],
        "fig5" => ["gradual_baseline", "gradual_attack1", "gradual_attack2"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        other => return Err(Error::UnknownFigure(other.to_string())),
    };
    names.iter().map(|n| builtin(n)).collect()
}

/// Slope of the per-epoch round-trip time.
pub fn round_trip_slope(r: &CampaignResult) -> Result<LinearFit<f64>> {
    let pts: Vec<(f64, f64)> = r.series.points().map(|p| (p.epoch_start_s, p.tau_aba_ps)).collect();
    linear_fit(&pts)
}

/// Median δ over all measured epochs.
pub fn median_delta(r: &CampaignResult) -> f64 {
    let mut d: Vec<f64> = r.series.points().map(|p| p.delta_ps).collect();
    d.sort_by(f64::total_cmp);
    match d.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => d[n / 2],
        n => 0.5 * (d[n / 2 - 1] + d[n / 2]),
    }
}

/// δ at the epoch starting at `t_s` relative to the run's median δ.
pub fn excursion_at(r: &CampaignResult, t_s: f64) -> Option<f64> {
    let level = median_delta(r);
    r.series
        .points()
        .find(|p| (p.epoch_start_s - t_s).abs() < 1e-9)
        .map(|p| p.delta_ps - level)
}

/// Median estimator σ over the run.
pub fn median_sigma(r: &CampaignResult) -> f64 {
    let mut s: Vec<f64> = r.series.points().map(|p| p.sigma_ps).collect();
    s.sort_by(f64::total_cmp);
    s.get(s.len() / 2).copied().unwrap_or(f64::NAN)
}

fn writer(dir: &Path, name: &str) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(dir.join(name))?)))
}

fn write_round_trip(dir: &Path, results: &[CampaignResult]) -> Result<()> {
    let mut w = writer(dir, "round_trip.csv")?;
    w.write_record(["scenario", "tau_aba_slope_ps_per_s", "slope_stderr_ps_per_s"])?;
    for r in results {
        let fit = round_trip_slope(r)?;
        w.write_record([r.meta.scenario_name.clone(), fit.slope.to_string(), fit.slope_stderr.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn write_tdev_overlay(dir: &Path, results: &[CampaignResult]) -> Result<()> {
    let mut w = writer(dir, "tdev_overlay.csv")?;
    w.write_record(["scenario", "tau_s", "tdev_ps", "m"])?;
    for r in results {
        for p in &r.tdev.points {
            w.write_record([
                r.meta.scenario_name.clone(),
                p.tau_s.to_string(),
                p.tdev_ps.to_string(),
                p.m.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_step_shifts(dir: &Path, results: &[CampaignResult]) -> Result<()> {
    let mut w = writer(dir, "step_shifts.csv")?;
    w.write_record(["scenario", "injected_ps", "step_shift_ps"])?;
    for (r, a) in results.iter().zip(JUMP_AMPLITUDES_PS) {
        let shift = estimate_step_shift(&r.series.delta_samples(), JUMP_ONSET_S)?;
        w.write_record([r.meta.scenario_name.clone(), a.to_string(), shift.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn write_excursions(dir: &Path, r: &CampaignResult) -> Result<()> {
    let mut w = writer(dir, "spike_excursions.csv")?;
    w.write_record(["onset_s", "injected_ps", "excursion_ps"])?;
    for (t, a) in SPIKE_ONSETS_S.iter().zip(SPIKE_AMPLITUDES_PS) {
        let e = excursion_at(r, *t).map(|v| v.to_string()).unwrap_or_default();
        w.write_record([t.to_string(), a.to_string(), e])?;
    }
    w.flush()?;
    Ok(())
}

fn write_gradual_comparison(dir: &Path, results: &[CampaignResult]) -> Result<()> {
    let mut w = writer(dir, "tdev_near_1000s.csv")?;
    w.write_record(["scenario", "m", "tau_s", "tdev_ps"])?;
    for r in results {
        if let Some(p) = r.tdev.nearest(GRADUAL_COMPARISON_TAU_S) {
            w.write_record([
                r.meta.scenario_name.clone(),
                p.m.to_string(),
                p.tau_s.to_string(),
                p.tdev_ps.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Run every scenario of a figure bundle and write per-run directories plus
/// the bundle's summary tables under `out_dir/<figure>/`.
pub fn reproduce(figure: &str, out_dir: &Path, overrides: &Overrides) -> Result<Vec<CampaignResult>> {
    let mut scenarios = figure_scenarios(figure)?;
    for s in &mut scenarios {
        overrides.apply(s);
    }
    let dir = out_dir.join(figure);
    fs::create_dir_all(&dir)?;
    let results = scenarios
        .par_iter()
        .map(|s| {
            let r = run_campaign(s)?;
            r.write_outputs(&dir.join(&s.name))?;
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    match figure {
        "fig2" => write_tdev_overlay(&dir, &results)?,
        "fig3" => {
            write_step_shifts(&dir, &results)?;
            write_round_trip(&dir, &results)?;
        }
        "fig4" => {
            write_excursions(&dir, &results[0])?;
            write_round_trip(&dir, &results)?;
        }
        _ => {
            write_tdev_overlay(&dir, &results)?;
            write_gradual_comparison(&dir, &results)?;
        }
    }
    Ok(results)
}
