use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scenario::{Mode, Scenario, MAX_GAP_FRACTION};
use crate::attack_model::{tampered_clock_difference, DelayTrajectory, QcsScheme};
use crate::detection::{cusum_drift, score, threshold_monitor, write_alarms_csv, Alarm, AlarmKind, DetectionScore};
use crate::error::{Error, Result};
use crate::hash::config_hash;
use crate::photon_sim::RoundTripSim;
use crate::stability_metrics::{default_m_grid, tdev, TdevCurve};
use crate::timing_estimator::{
    coarse_acquire, estimate_chunk, AcquiredCenters, ClockDifferencePoint, ClockDifferenceSeries, Epoch,
};

/// Sub-samples per epoch when averaging the attack trajectories analytically.
pub const ANALYTIC_SUBSAMPLES: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub tool_version: String,
    pub scenario_name: String,
    pub mode: Mode,
    pub seed: u64,
    /// Hex digest of the resolved scenario.
    pub config_hash: String,
    pub reference_ps: f64,
    pub epoch_s: f64,
    pub n_epochs: usize,
    pub gap_epochs: usize,
    pub centers: Option<AcquiredCenters>,
    pub wall_time_s: f64,
    pub scenario: Scenario,
}

/// Detection outcome per detector, relative to the known onset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub attack_onset_s: f64,
    pub threshold: DetectionScore<f64>,
    pub drift: DetectionScore<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    pub series: ClockDifferenceSeries,
    pub tdev: TdevCurve<f64>,
    pub alarms: Vec<Alarm<f64>>,
    pub score: Option<ScoreReport>,
    pub meta: RunMeta,
}

impl CampaignResult {
    pub fn scenario(&self) -> &Scenario {
        &self.meta.scenario
    }

    pub fn alarms_of(&self, kind: AlarmKind) -> impl Iterator<Item = &Alarm<f64>> + '_ {
        self.alarms.iter().filter(move |a| a.kind == kind)
    }

    /// Write `series.csv`, `tdev.csv`, `alarms.csv`, `meta.json` and, with a
    /// known onset, `score.json`.
    pub fn write_outputs(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let create = |name: &str| -> Result<BufWriter<File>> { Ok(BufWriter::new(File::create(dir.join(name))?)) };
        self.series
            .write_csv(create("series.csv")?, Some(self.meta.reference_ps))?;
        self.tdev.write_csv(create("tdev.csv")?)?;
        write_alarms_csv(&self.alarms, create("alarms.csv")?)?;
        serde_json::to_writer_pretty(create("meta.json")?, &self.meta)?;
        if let Some(s) = &self.score {
            serde_json::to_writer_pretty(create("score.json")?, s)?;
        }
        Ok(())
    }
}

fn epoch_bounds(s: &Scenario, k: usize) -> (f64, f64) {
    let e = s.run.epoch_s;
    (k as f64 * e, ((k + 1) as f64 * e).min(s.run.duration_s))
}

fn mean_over(traj: &DelayTrajectory<f64>, lo: f64, hi: f64) -> f64 {
    if traj.is_empty() {
        return 0.0;
    }
    let dt = (hi - lo) / ANALYTIC_SUBSAMPLES as f64;
    (0..ANALYTIC_SUBSAMPLES)
        .map(|i| traj.eval(lo + (i as f64 + 0.5) * dt))
        .sum::<f64>()
        / ANALYTIC_SUBSAMPLES as f64
}

/// Noise-free epoch estimate: `(τ_AB, τ_ABA)` with `M`, `N` and the true clock
/// difference averaged over the epoch.
pub fn predicted_taus(s: &Scenario, m: &DelayTrajectory<f64>, n: &DelayTrajectory<f64>, k: usize) -> (f64, f64) {
    let (lo, hi) = epoch_bounds(s, k);
    let m_avg = mean_over(m, lo, hi);
    let n_avg = mean_over(n, lo, hi);
    let base = s.clocks.true_difference_ps(0.5 * (lo + hi));
    let delta = tampered_clock_difference(base, m_avg, n_avg, QcsScheme::new(s.scheme));
    let tau_aba = 2.0 * s.channel.one_way_delay_ps + m_avg + n_avg;
    (delta + tau_aba / 2.0, tau_aba)
}

/// Noise-free δ for every epoch of the scenario.
pub fn predicted_deltas(s: &Scenario) -> Vec<f64> {
    let (m, n) = (s.m_trajectory(), s.n_trajectory());
    (0..s.n_epochs())
        .map(|k| {
            let (ab, aba) = predicted_taus(s, &m, &n, k);
            ab - aba / 2.0
        })
        .collect()
}

fn analytic_series(s: &Scenario) -> Result<ClockDifferenceSeries> {
    let sigma = s
        .noise
        .ok_or_else(|| Error::config("noise", "analytic mode requires a noise model"))?
        .epoch_sigma_ps;
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::config("noise.epoch_sigma_ps", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(s.run.seed);
    let (m, n) = (s.m_trajectory(), s.n_trajectory());
    let epochs = (0..s.n_epochs())
        .map(|k| {
            let (ab, aba) = predicted_taus(s, &m, &n, k);
            let noisy_ab = ab + normal.sample(&mut rng);
            Epoch::Measured(ClockDifferencePoint::new(epoch_bounds(s, k).0, noisy_ab, aba, sigma))
        })
        .collect();
    Ok(ClockDifferenceSeries {
        epoch_length_s: s.run.epoch_s,
        epochs,
    })
}

fn simulated_series(s: &Scenario) -> Result<(ClockDifferenceSeries, AcquiredCenters)> {
    let explicit_n = s.n_events.clone().map(DelayTrajectory::new);
    let sim = RoundTripSim::new(
        s.photon_setup(),
        s.m_trajectory(),
        &s.coordination,
        explicit_n.as_ref(),
        s.run.duration_s,
        s.run.epoch_s,
        s.run.seed,
    )?;
    let first = sim.block(0);
    let centers = coarse_acquire(&first, s.channel.one_way_delay_ps, &s.estimator)?;
    let head = estimate_chunk(0.0, &first, &s.estimator, &centers)?;
    drop(first);
    let rest = (1..sim.n_blocks())
        .into_par_iter()
        .map(|k| estimate_chunk(epoch_bounds(s, k).0, &sim.block(k), &s.estimator, &centers))
        .collect::<Result<Vec<_>>>()?;
    let mut epochs = Vec::with_capacity(sim.n_blocks());
    epochs.push(head);
    epochs.extend(rest);
    Ok((
        ClockDifferenceSeries {
            epoch_length_s: s.run.epoch_s,
            epochs,
        },
        centers,
    ))
}

fn detect(s: &Scenario, samples: &[(f64, f64)]) -> Result<Vec<Alarm<f64>>> {
    let mut alarms = Vec::new();
    if samples.len() > s.detection.threshold.baseline_window_epochs {
        alarms.extend(threshold_monitor(samples, &s.detection.threshold)?);
    }
    if samples.len() >= 2 {
        alarms.extend(cusum_drift(samples, &s.detection.cusum)?);
    }
    alarms.sort_by(|a, b| a.epoch_start_s.total_cmp(&b.epoch_start_s));
    Ok(alarms)
}

/// Execute a validated scenario end to end.
pub fn run_campaign(s: &Scenario) -> Result<CampaignResult> {
    s.validate()?;
    let started = Instant::now();
    let (series, centers) = match s.mode {
        Mode::FullSim => {
            let (series, centers) = simulated_series(s)?;
            (series, Some(centers))
        }
        Mode::Analytic => (analytic_series(s)?, None),
    };
    let gaps = series.gap_count();
    if series.points().next().is_none() {
        return Err(Error::EmptySeries);
    }
    if series.gap_fraction() > MAX_GAP_FRACTION {
        return Err(Error::Gaps {
            gaps,
            total: series.len(),
        });
    }
    // gaps (at most 1 %) are dropped rather than filled before the stability analysis
    let samples = series.delta_samples();
    let phase: Vec<f64> = samples.iter().map(|p| p.1).collect();
    let grid = default_m_grid(phase.len());
    let tdev = tdev(&phase, s.run.epoch_s, &grid)?;
    let alarms = detect(s, &samples)?;
    let score = s.detection.attack_onset_s.map(|onset| {
        let span = (0.0, s.run.duration_s);
        let of = |kind| alarms.iter().filter(|a| a.kind == kind).copied().collect::<Vec<_>>();
        ScoreReport {
            attack_onset_s: onset,
            threshold: score(&of(AlarmKind::Threshold), onset, span),
            drift: score(&of(AlarmKind::Drift), onset, span),
        }
    });
    let meta = RunMeta {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        scenario_name: s.name.clone(),
        mode: s.mode,
        seed: s.run.seed,
        config_hash: format!("{:016x}", config_hash(s)),
        reference_ps: s.reference_ps,
        epoch_s: s.run.epoch_s,
        n_epochs: series.len(),
        gap_epochs: gaps,
        centers,
        wall_time_s: started.elapsed().as_secs_f64(),
        scenario: s.clone(),
    };
    Ok(CampaignResult {
        series,
        tdev,
        alarms,
        score,
        meta,
    })
}

/// Load a scenario file, run it and write the outputs into `out_dir`.
pub fn run_scenario(path: &Path, out_dir: &Path) -> Result<CampaignResult> {
    let s = Scenario::load(path)?;
    let result = run_campaign(&s)?;
    result.write_outputs(out_dir)?;
    Ok(result)
}
