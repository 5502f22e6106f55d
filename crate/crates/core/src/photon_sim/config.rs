use serde::{Deserialize, Serialize};

use crate::error::FieldError;

/// Conversion from a full-width-at-half-maximum to a Gaussian σ.
pub const FWHM_TO_SIGMA: f64 = 1.0 / 2.354_820_045_030_949;

/// SNSPD timing jitter, quoted as FWHM.
pub const DETECTOR_JITTER_FWHM_PS: f64 = 110.0;
/// TDC timing jitter, quoted as FWHM.
pub const TDC_JITTER_FWHM_PS: f64 = 8.0;
pub const DETECTOR_EFFICIENCY: f64 = 0.8;

fn check(ok: bool, field: &str, message: &str) -> Result<(), FieldError> {
    if ok {
        Ok(())
    } else {
        Err(FieldError::new(field, message))
    }
}

fn prob(v: f64) -> bool {
    (0.0..=1.0).contains(&v)
}

fn non_negative(v: f64) -> bool {
    v.is_finite() && v >= 0.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceConfig {
    pub pair_rate_hz: f64,
    pub intrinsic_correlation_jitter_ps: f64,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            pair_rate_hz: 5.0e4,
            intrinsic_correlation_jitter_ps: 1.0,
        }
    }
}

impl SourceConfig {
    pub fn validate(&self) -> Result<(), FieldError> {
        check(
            self.pair_rate_hz.is_finite() && self.pair_rate_hz > 0.0,
            "pair_rate_hz",
            "must be finite and > 0",
        )?;
        check(
            non_negative(self.intrinsic_correlation_jitter_ps),
            "intrinsic_correlation_jitter_ps",
            "must be >= 0",
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub efficiency: f64,
    pub jitter_sigma_ps: f64,
    pub dead_time_ps: f64,
    /// Uniform background rate; off unless configured.
    pub dark_count_rate_hz: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            efficiency: DETECTOR_EFFICIENCY,
            jitter_sigma_ps: DETECTOR_JITTER_FWHM_PS * FWHM_TO_SIGMA,
            dead_time_ps: 20_000.0,
            dark_count_rate_hz: 0.0,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), FieldError> {
        check(prob(self.efficiency), "efficiency", "must be in [0, 1]")?;
        check(non_negative(self.jitter_sigma_ps), "jitter_sigma_ps", "must be >= 0")?;
        check(non_negative(self.dead_time_ps), "dead_time_ps", "must be >= 0")?;
        check(
            non_negative(self.dark_count_rate_hz),
            "dark_count_rate_hz",
            "must be >= 0",
        )
    }
}

/// The three detectors of the round-trip topology.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSet {
    pub idler_a: DetectorConfig,
    pub signal_b: DetectorConfig,
    pub return_a: DetectorConfig,
}

impl DetectorSet {
    pub fn uniform(cfg: DetectorConfig) -> Self {
        Self {
            idler_a: cfg,
            signal_b: cfg,
            return_a: cfg,
        }
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        self.idler_a.validate().map_err(|e| e.nested("idler_a"))?;
        self.signal_b.validate().map_err(|e| e.nested("signal_b"))?;
        self.return_a.validate().map_err(|e| e.nested("return_a"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TdcConfig {
    pub resolution_ps: f64,
    pub jitter_sigma_ps: f64,
}

impl Default for TdcConfig {
    fn default() -> Self {
        Self {
            resolution_ps: 1.0,
            jitter_sigma_ps: TDC_JITTER_FWHM_PS * FWHM_TO_SIGMA,
        }
    }
}

impl TdcConfig {
    pub fn validate(&self) -> Result<(), FieldError> {
        check(
            self.resolution_ps.is_finite() && self.resolution_ps > 0.0,
            "resolution_ps",
            "must be finite and > 0",
        )?;
        check(non_negative(self.jitter_sigma_ps), "jitter_sigma_ps", "must be >= 0")
    }

    #[inline]
    pub fn quantize(&self, t_ps: f64) -> i64 {
        if self.resolution_ps == 1.0 {
            t_ps.round() as i64
        } else {
            ((t_ps / self.resolution_ps).round() * self.resolution_ps).round() as i64
        }
    }

    /// Quantize `base_ps + offset_ps` without forming the sum in floating point,
    /// which at 10¹⁵ ps would already be rounded to a fraction of a picosecond.
    #[inline]
    pub fn quantize_split(&self, base_ps: i64, offset_ps: f64) -> i64 {
        let r = self.resolution_ps;
        if r == 1.0 {
            base_ps + offset_ps.round() as i64
        } else if r.fract() == 0.0 {
            let step = r as i64;
            let aligned = base_ps.div_euclid(step) * step;
            aligned + self.quantize((base_ps - aligned) as f64 + offset_ps)
        } else {
            self.quantize(base_ps as f64 + offset_ps)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    /// Base fiber delay `L` of one leg (10 km of fiber).
    pub one_way_delay_ps: f64,
    /// Survival probability of one traversal of the fiber.
    pub loss_survival_prob: f64,
    /// Probability that Bob's splitter routes a photon back to Alice.
    pub splitter_loopback_prob: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            one_way_delay_ps: 49.0e6,
            // 0.2 dB/km over 10 km
            loss_survival_prob: 0.63,
            splitter_loopback_prob: 0.5,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<(), FieldError> {
        check(
            self.one_way_delay_ps.is_finite() && self.one_way_delay_ps > 0.0,
            "one_way_delay_ps",
            "must be finite and > 0",
        )?;
        check(prob(self.loss_survival_prob), "loss_survival_prob", "must be in [0, 1]")?;
        check(
            prob(self.splitter_loopback_prob),
            "splitter_loopback_prob",
            "must be in [0, 1]",
        )
    }
}

/// Local clock model: `reading = t + offset + drift·t + white noise`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClockConfig {
    pub offset_ps: f64,
    pub drift_ps_per_s: f64,
    pub white_phase_noise_sigma_ps: f64,
}

impl ClockConfig {
    pub fn validate(&self) -> Result<(), FieldError> {
        check(self.offset_ps.is_finite(), "offset_ps", "must be finite")?;
        check(self.drift_ps_per_s.is_finite(), "drift_ps_per_s", "must be finite")?;
        check(
            non_negative(self.white_phase_noise_sigma_ps),
            "white_phase_noise_sigma_ps",
            "must be >= 0",
        )
    }

    /// Deterministic deviation of the reading from true time `t_ps`.
    #[inline]
    pub fn deviation_ps(&self, t_ps: f64) -> f64 {
        self.offset_ps + self.drift_ps_per_s * t_ps * 1e-12
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Clocks {
    pub alice: ClockConfig,
    pub bob: ClockConfig,
}

/// Bob's clock offset seen in the baseline experiment.
pub const BASELINE_OFFSET_PS: f64 = -9912.8;

impl Default for Clocks {
    fn default() -> Self {
        Self {
            alice: ClockConfig::default(),
            bob: ClockConfig {
                offset_ps: BASELINE_OFFSET_PS,
                ..ClockConfig::default()
            },
        }
    }
}

impl Clocks {
    pub fn validate(&self) -> Result<(), FieldError> {
        self.alice.validate().map_err(|e| e.nested("alice"))?;
        self.bob.validate().map_err(|e| e.nested("bob"))
    }

    /// True clock difference (Bob minus Alice) at `t_s` seconds.
    pub fn true_difference_ps(&self, t_s: f64) -> f64 {
        // difference of the parts, so large absolute times do not cancel precision away
        (self.bob.offset_ps - self.alice.offset_ps) + (self.bob.drift_ps_per_s - self.alice.drift_ps_per_s) * t_s
    }
}

/// All physical parameters of the round-trip photon link.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhotonSetup {
    pub source: SourceConfig,
    pub detectors: DetectorSet,
    pub tdc: TdcConfig,
    pub channel: ChannelConfig,
    pub clocks: Clocks,
}

impl PhotonSetup {
    pub fn validate(&self) -> Result<(), FieldError> {
        self.source.validate().map_err(|e| e.nested("source"))?;
        self.detectors.validate().map_err(|e| e.nested("detectors"))?;
        self.tdc.validate().map_err(|e| e.nested("tdc"))?;
        self.channel.validate().map_err(|e| e.nested("channel"))?;
        self.clocks.validate().map_err(|e| e.nested("clocks"))
    }

    /// Every source of randomness switched off: no jitter, no loss, perfect detectors.
    pub fn noiseless() -> Self {
        let det = DetectorConfig {
            efficiency: 1.0,
            jitter_sigma_ps: 0.0,
            dead_time_ps: 0.0,
            dark_count_rate_hz: 0.0,
        };
        Self {
            source: SourceConfig {
                intrinsic_correlation_jitter_ps: 0.0,
                ..SourceConfig::default()
            },
            detectors: DetectorSet::uniform(det),
            tdc: TdcConfig {
                resolution_ps: 1.0,
                jitter_sigma_ps: 0.0,
            },
            channel: ChannelConfig {
                loss_survival_prob: 1.0,
                ..ChannelConfig::default()
            },
            clocks: Clocks::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        PhotonSetup::default().validate().unwrap();
        PhotonSetup::noiseless().validate().unwrap();
        let sigma = DetectorConfig::default().jitter_sigma_ps;
        assert!((sigma - 46.71).abs() < 0.01, "{sigma}");
    }

    #[test]
    fn nested_error_paths() {
        let mut setup = PhotonSetup::default();
        setup.detectors.return_a.efficiency = 1.5;
        assert_eq!(setup.validate().unwrap_err().path, "detectors.return_a.efficiency");
        let mut setup = PhotonSetup::default();
        setup.channel.one_way_delay_ps = 0.0;
        assert_eq!(setup.validate().unwrap_err().path, "channel.one_way_delay_ps");
    }

    #[test]
    fn quantization() {
        let tdc = TdcConfig::default();
        assert_eq!(tdc.quantize(10.4), 10);
        assert_eq!(tdc.quantize(-10.6), -11);
        let coarse = TdcConfig { resolution_ps: 4.0, jitter_sigma_ps: 0.0 };
        assert_eq!(coarse.quantize(9.9), 8);
        assert_eq!(coarse.quantize(10.1), 12);
        let big = 3_500_000_000_000_000i64;
        assert_eq!(tdc.quantize_split(big, -9912.8), big - 9913);
        assert_eq!(tdc.quantize_split(big + 1, -9912.4), big - 9911);
        assert_eq!(coarse.quantize_split(big + 1, 1.2), big + 4);
        assert_eq!(coarse.quantize_split(-3, -2.5), -4);
        assert_eq!(coarse.quantize_split(-3, -3.5), -8);
    }

    #[test]
    fn clock_drift() {
        let clocks = Clocks {
            alice: ClockConfig::default(),
            bob: ClockConfig { offset_ps: 5.0, drift_ps_per_s: 2.0, white_phase_noise_sigma_ps: 0.0 },
        };
        assert_eq!(clocks.true_difference_ps(10.0), 25.0);
    }
}
