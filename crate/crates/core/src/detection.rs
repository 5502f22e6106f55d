//! Baseline countermeasures on the clock-difference series: an absolute
//! threshold around a learned baseline, and a two-sided CUSUM on the
//! per-epoch increments for slow drifts.
//!
//! Inputs are `(epoch_start_s, delta_ps)` samples of measured epochs.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, FieldError, Result};
use crate::scalar::Scalar;

pub const DEFAULT_BASELINE_WINDOW: usize = 60;
pub const DEFAULT_THRESHOLD_PS: f64 = 200.0;
/// Default threshold in multiples of the baseline-window standard deviation.
pub const DEFAULT_THRESHOLD_SIGMAS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct ThresholdConfig<T> {
    pub baseline_window_epochs: usize,
    /// Allowed absolute deviation from the baseline mean.
    pub threshold_ps: T,
}

impl<T: Scalar> Default for ThresholdConfig<T> {
    fn default() -> Self {
        Self::new(DEFAULT_BASELINE_WINDOW, T::lit(DEFAULT_THRESHOLD_PS))
    }
}

impl<T: Scalar> ThresholdConfig<T> {
    pub fn new(baseline_window_epochs: usize, threshold_ps: T) -> Self {
        Self {
            baseline_window_epochs,
            threshold_ps,
        }
    }

    /// Threshold at `sigmas` × the standard deviation of the first `window` samples.
    pub fn from_baseline(samples: &[(T, T)], window: usize, sigmas: T) -> Result<Self> {
        if samples.len() <= window || window < 2 {
            return Err(Error::Domain(format!(
                "need more than {window} samples to learn a baseline, have {}",
                samples.len()
            )));
        }
        let head = &samples[..window];
        let nf = T::from_count(window);
        let mean = head.iter().map(|s| s.1).sum::<T>() / nf;
        let var = head.iter().map(|s| (s.1 - mean) * (s.1 - mean)).sum::<T>() / T::from_count(window - 1);
        let cfg = Self::new(window, sigmas * var.sqrt());
        if cfg.threshold_ps > T::zero() {
            Ok(cfg)
        } else {
            Err(Error::Domain("baseline window has zero spread".into()))
        }
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        if self.baseline_window_epochs < 10 {
            return Err(FieldError::new("baseline_window_epochs", "must be >= 10"));
        }
        if !(self.threshold_ps > T::zero()) || !self.threshold_ps.is_finite() {
            return Err(FieldError::new("threshold_ps", "must be finite and > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct CusumConfig<T> {
    /// Per-epoch drift `k` absorbed without accumulating.
    pub reference_drift_ps: T,
    /// Decision limit `h`.
    pub decision_limit_ps: T,
}

impl<T: Scalar> Default for CusumConfig<T> {
    fn default() -> Self {
        Self {
            reference_drift_ps: T::lit(0.05),
            decision_limit_ps: T::lit(20.0),
        }
    }
}

impl<T: Scalar> CusumConfig<T> {
    pub fn validate(&self) -> Result<(), FieldError> {
        if !(self.reference_drift_ps >= T::zero()) || !self.reference_drift_ps.is_finite() {
            return Err(FieldError::new("reference_drift_ps", "must be finite and >= 0"));
        }
        if !(self.decision_limit_ps > T::zero()) || !self.decision_limit_ps.is_finite() {
            return Err(FieldError::new("decision_limit_ps", "must be finite and > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlarmKind {
    Threshold,
    Drift,
}

impl AlarmKind {
    pub fn name(self) -> &'static str {
        match self {
            AlarmKind::Threshold => "threshold",
            AlarmKind::Drift => "drift",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alarm<T> {
    pub epoch_start_s: T,
    pub kind: AlarmKind,
    /// Signed deviation (threshold) or signed CUSUM statistic (drift).
    pub magnitude_ps: T,
}

/// Alarm on every epoch whose δ departs from the baseline mean by more than the threshold.
pub fn threshold_monitor<T: Scalar>(samples: &[(T, T)], cfg: &ThresholdConfig<T>) -> Result<Vec<Alarm<T>>> {
    cfg.validate().map_err(Error::Config)?;
    let w = cfg.baseline_window_epochs;
    if samples.len() <= w {
        return Err(Error::Domain(format!(
            "series of {} epochs is not longer than the {w}-epoch baseline window",
            samples.len()
        )));
    }
    let baseline = samples[..w].iter().map(|s| s.1).sum::<T>() / T::from_count(w);
    Ok(samples
        .iter()
        .filter_map(|&(t, v)| {
            let dev = v - baseline;
            (dev.abs() > cfg.threshold_ps).then_some(Alarm {
                epoch_start_s: t,
                kind: AlarmKind::Threshold,
                magnitude_ps: dev,
            })
        })
        .collect())
}

/// Two-sided CUSUM on `Δδ`; both statistics reset after an alarm.
pub fn cusum_drift<T: Scalar>(samples: &[(T, T)], cfg: &CusumConfig<T>) -> Result<Vec<Alarm<T>>> {
    cfg.validate().map_err(Error::Config)?;
    if samples.len() < 2 {
        return Err(Error::Domain("CUSUM needs at least 2 samples".into()));
    }
    let k = cfg.reference_drift_ps;
    let h = cfg.decision_limit_ps;
    let (mut up, mut down) = (T::zero(), T::zero());
    let mut alarms = Vec::new();
    for w in samples.windows(2) {
        let inc = w[1].1 - w[0].1;
        up = (up + inc - k).max(T::zero());
        down = (down - inc - k).max(T::zero());
        let fired = if up > h {
            Some(up)
        } else if down > h {
            Some(-down)
        } else {
            None
        };
        if let Some(magnitude_ps) = fired {
            alarms.push(Alarm {
                epoch_start_s: w[1].0,
                kind: AlarmKind::Drift,
                magnitude_ps,
            });
            up = T::zero();
            down = T::zero();
        }
    }
    Ok(alarms)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionScore<T> {
    pub detected: bool,
    /// First alarm at or after onset, minus onset; `None` when undetected.
    pub latency_s: Option<T>,
    pub false_alarms: usize,
}

/// Score alarms against a known attack onset. Alarms outside `span` are ignored.
pub fn score<T: Scalar>(alarms: &[Alarm<T>], attack_onset_s: T, span: (T, T)) -> DetectionScore<T> {
    let inside = alarms
        .iter()
        .filter(|a| a.epoch_start_s >= span.0 && a.epoch_start_s <= span.1);
    let mut first: Option<T> = None;
    let mut false_alarms = 0;
    for a in inside {
        if a.epoch_start_s < attack_onset_s {
            false_alarms += 1;
        } else if first.is_none_or(|f| a.epoch_start_s < f) {
            first = Some(a.epoch_start_s);
        }
    }
    DetectionScore {
        detected: first.is_some(),
        latency_s: first.map(|f| f - attack_onset_s),
        false_alarms,
    }
}

pub fn write_alarms_csv<T: Scalar, W: Write>(alarms: &[Alarm<T>], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["epoch_start_s", "kind", "magnitude_ps"])?;
    for a in alarms {
        out.write_record([
            a.epoch_start_s.to_string(),
            a.kind.name().to_string(),
            a.magnitude_ps.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn series(values: impl IntoIterator<Item = f64>) -> Vec<(f64, f64)> {
        values.into_iter().enumerate().map(|(i, v)| (i as f64, v)).collect()
    }

    #[test]
    fn flat_series_stays_quiet() {
        let s = series((0..300).map(|i| -9912.8 + 50.0 * ((i as f64) * 0.7).sin()));
        let alarms = threshold_monitor(&s, &ThresholdConfig::new(60, 200.0)).unwrap();
        assert!(alarms.is_empty());
    }

    #[test]
    fn step_fires_at_onset() {
        let s = series((0..300).map(|i| if i < 150 { 0.0 } else { -500.0 }));
        let alarms = threshold_monitor(&s, &ThresholdConfig::new(60, 200.0)).unwrap();
        assert_eq!(alarms.first().unwrap().epoch_start_s, 150.0);
        assert_eq!(alarms.len(), 150);
        assert_eq!(alarms[0].magnitude_ps, -500.0);
    }

    #[test]
    fn short_series_is_a_domain_error() {
        let s = series([0.0; 30]);
        assert!(matches!(
            threshold_monitor(&s, &ThresholdConfig::new(60, 200.0)),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            threshold_monitor(&s, &ThresholdConfig::new(5, 200.0)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn threshold_ignores_constant_offsets() {
        let s = series((0..200).map(|i| if i == 120 { 300.0 } else { (i % 7) as f64 }));
        let shifted: Vec<_> = s.iter().map(|&(t, v)| (t, v + 12345.0)).collect();
        let cfg = ThresholdConfig::new(60, 100.0);
        let a = threshold_monitor(&s, &cfg).unwrap();
        let b = threshold_monitor(&shifted, &cfg).unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!(a.len(), b.len());
        assert_eq!(a[0].epoch_start_s, b[0].epoch_start_s);
        assert!((a[0].magnitude_ps - b[0].magnitude_ps).abs() < 1e-9);
    }

    #[test]
    fn cusum_quiet_on_constant() {
        let s = series([5.0; 100]);
        assert!(cusum_drift(&s, &CusumConfig::default()).unwrap().is_empty());
        assert!(cusum_drift(&series([1.0]), &CusumConfig::default()).is_err());
    }

    #[test]
    fn cusum_ramp_latency_matches_closed_form() {
        let rate = 2.0 / 35.0;
        let (k, h) = (0.01, 5.0);
        let onset = 100;
        let s = series((0..1000).map(|i| if i < onset { 0.0 } else { -rate * (i - onset) as f64 }));
        let alarms = cusum_drift(
            &s,
            &CusumConfig {
                reference_drift_ps: k,
                decision_limit_ps: h,
            },
        )
        .unwrap();
        let first = alarms[0];
        assert!(first.magnitude_ps < 0.0);
        let latency = first.epoch_start_s - onset as f64;
        let closed_form = (h / (rate - k)).ceil();
        assert_eq!(latency, closed_form);
        assert_eq!(closed_form, 107.0);
    }

    #[test]
    fn cusum_false_alarm_rate_on_white_noise() {
        let sigma = 5.0;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let noise = Normal::new(0.0, sigma).unwrap();
        let n = 100_000;
        let s = series((0..n).map(|_| noise.sample(&mut rng)));
        let cfg = CusumConfig {
            reference_drift_ps: 3.0 * sigma,
            decision_limit_ps: 10.0 * sigma,
        };
        let alarms = cusum_drift(&s, &cfg).unwrap();
        assert!((alarms.len() as f64) < n as f64 / 1e4, "{} alarms", alarms.len());
    }

    #[test]
    fn scoring() {
        let s = score::<f64>(&[], 100.0, (0.0, 500.0));
        assert_eq!(
            s,
            DetectionScore {
                detected: false,
                latency_s: None,
                false_alarms: 0
            }
        );
        let at = |t: f64| Alarm {
            epoch_start_s: t,
            kind: AlarmKind::Threshold,
            magnitude_ps: 1.0,
        };
        let s = score(&[at(100.0)], 100.0, (0.0, 500.0));
        assert_eq!(s.latency_s, Some(0.0));
        let s = score(&[at(90.0), at(120.0)], 100.0, (0.0, 500.0));
        assert!(s.detected);
        assert_eq!(s.latency_s, Some(20.0));
        assert_eq!(s.false_alarms, 1);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"{"detected":true,"latency_s":20.0,"false_alarms":1}"#);
    }

    #[test]
    fn learned_threshold() {
        let s = series((0..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }));
        let cfg = ThresholdConfig::from_baseline(&s, 60, 4.0).unwrap();
        assert!((cfg.threshold_ps - 4.0 * (60.0f64 / 59.0).sqrt()).abs() < 1e-12);
        assert!(ThresholdConfig::from_baseline(&series([1.0; 100]), 60, 4.0).is_err());
    }

    #[test]
    fn alarm_csv() {
        let a = [Alarm {
            epoch_start_s: 250.0,
            kind: AlarmKind::Drift,
            magnitude_ps: -21.5,
        }];
        let mut buf = Vec::new();
        write_alarms_csv(&a, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "epoch_start_s,kind,magnitude_ps\n250,drift,-21.5\n");
    }
}
