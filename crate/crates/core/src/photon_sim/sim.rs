//! Monte-Carlo photon-pair generation and round-trip propagation.
//!
//! Time is split into blocks; every block draws from its own ChaCha stream
//! derived from the master seed, so blocks can be simulated in any order or
//! in parallel and still produce the same records.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ClockConfig, DetectorConfig, PhotonSetup, SourceConfig, TdcConfig};
use super::stream::{Channel, DetectorId, TimestampStream, NO_PAIR};
use crate::attack_model::{derive_n_from_m, CoordinationRule, DelayTrajectory};
use crate::error::{Error, Result};
use crate::hash::config_hash;

pub const PS_PER_S: f64 = 1e12;
/// Block length used by [`generate_pairs`] when called on its own.
pub const DEFAULT_BLOCK_S: f64 = 1.0;

/// One SPDC pair in Alice's timebase. The signal photon leaves
/// `signal_lag_ps` after the idler (intrinsic correlation jitter).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmissionPair {
    pub pair_id: u64,
    pub idler_ps: i64,
    pub signal_lag_ps: f64,
}

fn block_rng(seed: u64, block: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block * 2 + purpose);
    rng
}

#[inline]
fn gauss<R: Rng>(rng: &mut R, sigma: f64) -> f64 {
    if sigma > 0.0 {
        let z: f64 = StandardNormal.sample(rng);
        sigma * z
    } else {
        0.0
    }
}

/// Poisson emission in `[start_ps, end_ps)`. Emission instants sit on the
/// 1 ps grid so that noiseless propagation is exact in integer picoseconds.
fn emit<R: Rng>(source: &SourceConfig, block: u64, start_ps: f64, end_ps: f64, rng: &mut R) -> Vec<EmissionPair> {
    let rate_per_ps = source.pair_rate_hz / PS_PER_S;
    let expected = ((end_ps - start_ps) * rate_per_ps).max(0.0);
    let mut pairs = Vec::with_capacity((expected * 1.05 + 16.0) as usize);
    let mut t = start_ps;
    let mut i = 0u64;
    loop {
        let gap: f64 = Exp1.sample(rng);
        t += gap / rate_per_ps;
        if t >= end_ps {
            break;
        }
        pairs.push(EmissionPair {
            pair_id: (block << 32) | i,
            idler_ps: t.round() as i64,
            signal_lag_ps: gauss(rng, source.intrinsic_correlation_jitter_ps),
        });
        i += 1;
    }
    pairs
}

/// Homogeneous Poisson pair emission over `[0, duration_s)`.
pub fn generate_pairs(source: &SourceConfig, duration_s: f64, seed: u64) -> Result<Vec<EmissionPair>> {
    if !(duration_s > 0.0) || !duration_s.is_finite() {
        return Err(Error::config("duration_s", "must be finite and > 0"));
    }
    source.validate().map_err(|e| Error::Config(e.nested("source")))?;
    let blocks = (duration_s / DEFAULT_BLOCK_S).ceil() as u64;
    let end_ps = duration_s * PS_PER_S;
    let mut out = Vec::new();
    for b in 0..blocks {
        let start = b as f64 * DEFAULT_BLOCK_S * PS_PER_S;
        let end = (start + DEFAULT_BLOCK_S * PS_PER_S).min(end_ps);
        out.extend(emit(source, b, start, end, &mut block_rng(seed, b, 0)));
    }
    Ok(out)
}

struct Detection {
    efficiency: f64,
    sigma_ps: f64,
}

impl Detection {
    fn new(det: &DetectorConfig, tdc: &TdcConfig) -> Self {
        Self {
            efficiency: det.efficiency,
            sigma_ps: det.jitter_sigma_ps.hypot(tdc.jitter_sigma_ps),
        }
    }
}

#[inline]
/// Timestamp of an arrival at true time `base_ps + offset_ps`.
fn read_clock<R: Rng>(
    clock: &ClockConfig,
    tdc: &TdcConfig,
    base_ps: i64,
    offset_ps: f64,
    sigma_ps: f64,
    rng: &mut R,
) -> i64 {
    let noise = gauss(rng, sigma_ps) + gauss(rng, clock.white_phase_noise_sigma_ps);
    let deviation = clock.deviation_ps(base_ps as f64 + offset_ps);
    tdc.quantize_split(base_ps, offset_ps + deviation + noise)
}

/// Propagate `pairs` through the round-trip link into raw (unsorted,
/// unfiltered) detector channels. Dark counts are spread over `span_ps`.
fn detect<R: Rng>(
    pairs: &[EmissionPair],
    setup: &PhotonSetup,
    m: &DelayTrajectory<f64>,
    n: &DelayTrajectory<f64>,
    span_ps: (f64, f64),
    rng: &mut R,
) -> [Channel; 3] {
    let ch = &setup.channel;
    let tdc = &setup.tdc;
    let alice = &setup.clocks.alice;
    let bob = &setup.clocks.bob;
    let idler = Detection::new(&setup.detectors.idler_a, tdc);
    let signal = Detection::new(&setup.detectors.signal_b, tdc);
    let ret = Detection::new(&setup.detectors.return_a, tdc);
    let static_m = m.is_empty();
    let static_n = n.is_empty();

    // whole picoseconds of the flight time go into the integer base
    let flight_whole = ch.one_way_delay_ps.floor();
    let flight_ps = flight_whole as i64;
    let flight_frac = ch.one_way_delay_ps - flight_whole;

    let mut out: [Channel; 3] = Default::default();
    for p in pairs {
        if rng.random::<f64>() < idler.efficiency {
            let t = read_clock(alice, tdc, p.idler_ps, 0.0, idler.sigma_ps, rng);
            out[DetectorId::IdlerA as usize].push(t, p.pair_id);
        }
        if rng.random::<f64>() >= ch.loss_survival_prob {
            continue;
        }
        // Attack delays are sampled at emission; flight time is ~50 µs.
        let t_emit_s = p.idler_ps as f64 / PS_PER_S;
        let m_t = if static_m { 0.0 } else { m.eval(t_emit_s) };
        let to_bob = p.signal_lag_ps + flight_frac + m_t;
        if rng.random::<f64>() >= ch.splitter_loopback_prob {
            if rng.random::<f64>() < signal.efficiency {
                let t = read_clock(bob, tdc, p.idler_ps + flight_ps, to_bob, signal.sigma_ps, rng);
                out[DetectorId::SignalB as usize].push(t, p.pair_id);
            }
        } else {
            if rng.random::<f64>() >= ch.loss_survival_prob {
                continue;
            }
            let n_t = if static_n { 0.0 } else { n.eval(t_emit_s) };
            let round_trip = to_bob + flight_frac + n_t;
            if rng.random::<f64>() < ret.efficiency {
                let t = read_clock(alice, tdc, p.idler_ps + 2 * flight_ps, round_trip, ret.sigma_ps, rng);
                out[DetectorId::ReturnA as usize].push(t, p.pair_id);
            }
        }
    }

    let (lo, hi) = span_ps;
    let dark = [
        (DetectorId::IdlerA, &setup.detectors.idler_a, alice),
        (DetectorId::SignalB, &setup.detectors.signal_b, bob),
        (DetectorId::ReturnA, &setup.detectors.return_a, alice),
    ];
    for (id, det, clock) in dark {
        let mean = det.dark_count_rate_hz * (hi - lo) / PS_PER_S;
        if mean <= 0.0 {
            continue;
        }
        let count = Poisson::new(mean).map(|d| d.sample(rng)).unwrap_or(0.0) as usize;
        for _ in 0..count {
            let t = lo + rng.random::<f64>() * (hi - lo);
            let base = t.floor();
            let stamp = tdc.quantize_split(base as i64, t - base + clock.deviation_ps(t));
            out[id as usize].push(stamp, NO_PAIR);
        }
    }
    out
}

fn finalize(mut raw: [Channel; 3], setup: &PhotonSetup) -> [Channel; 3] {
    raw[0].finalize(setup.detectors.idler_a.dead_time_ps);
    raw[1].finalize(setup.detectors.signal_b.dead_time_ps);
    raw[2].finalize(setup.detectors.return_a.dead_time_ps);
    raw
}

/// Push `pairs` through the attacked round-trip link and timestamp every detection.
pub fn propagate_and_detect(
    pairs: &[EmissionPair],
    setup: &PhotonSetup,
    m: &DelayTrajectory<f64>,
    n: &DelayTrajectory<f64>,
    duration_s: f64,
    seed: u64,
) -> Result<TimestampStream> {
    setup.validate().map_err(Error::Config)?;
    let mut rng = block_rng(seed, 0, 1);
    let raw = detect(pairs, setup, m, n, (0.0, duration_s * PS_PER_S), &mut rng);
    let hash = config_hash(&(setup, m, n, duration_s));
    TimestampStream::new(finalize(raw, setup), duration_s, seed, hash)
}

#[derive(Serialize)]
struct SimFingerprint<'a> {
    setup: &'a PhotonSetup,
    m: &'a DelayTrajectory<f64>,
    n: &'a DelayTrajectory<f64>,
    duration_s: f64,
    block_s: f64,
}

/// A fully specified round-trip experiment, simulated block by block.
#[derive(Debug, Clone)]
pub struct RoundTripSim {
    pub setup: PhotonSetup,
    pub m: DelayTrajectory<f64>,
    pub n: DelayTrajectory<f64>,
    pub duration_s: f64,
    pub block_s: f64,
    pub seed: u64,
}

impl RoundTripSim {
    pub fn new(
        setup: PhotonSetup,
        m: DelayTrajectory<f64>,
        coordination: &CoordinationRule<f64>,
        n_events: Option<&DelayTrajectory<f64>>,
        duration_s: f64,
        block_s: f64,
        seed: u64,
    ) -> Result<Self> {
        setup.validate().map_err(Error::Config)?;
        if !(duration_s > 0.0) || !duration_s.is_finite() {
            return Err(Error::config("duration_s", "must be finite and > 0"));
        }
        if !(block_s > 0.0) || !block_s.is_finite() {
            return Err(Error::config("epoch_s", "must be finite and > 0"));
        }
        let n = derive_n_from_m(&m, coordination, n_events);
        Ok(Self {
            setup,
            m,
            n,
            duration_s,
            block_s,
            seed,
        })
    }

    pub fn n_blocks(&self) -> usize {
        (self.duration_s / self.block_s - 1e-9).ceil().max(1.0) as usize
    }

    pub fn block_span_ps(&self, k: usize) -> (f64, f64) {
        let start = k as f64 * self.block_s * PS_PER_S;
        let end = ((k + 1) as f64 * self.block_s).min(self.duration_s) * PS_PER_S;
        (start, end)
    }

    pub fn config_hash(&self) -> u64 {
        config_hash(&SimFingerprint {
            setup: &self.setup,
            m: &self.m,
            n: &self.n,
            duration_s: self.duration_s,
            block_s: self.block_s,
        })
    }

    /// Pairs emitted during block `k`.
    pub fn block_pairs(&self, k: usize) -> Vec<EmissionPair> {
        let (start, end) = self.block_span_ps(k);
        emit(&self.setup.source, k as u64, start, end, &mut block_rng(self.seed, k as u64, 0))
    }

    fn block_raw(&self, k: usize) -> [Channel; 3] {
        let pairs = self.block_pairs(k);
        let mut rng = block_rng(self.seed, k as u64, 1);
        detect(&pairs, &self.setup, &self.m, &self.n, self.block_span_ps(k), &mut rng)
    }

    /// Every detection caused by pairs emitted in block `k` (plus the block's
    /// dark counts), sorted and dead-time filtered within the block.
    pub fn block(&self, k: usize) -> TimestampStream {
        let channels = finalize(self.block_raw(k), &self.setup);
        TimestampStream::new(channels, self.block_s, self.seed, self.config_hash())
            .expect("finalized channels are sorted")
    }

    /// The whole run as one stream, dead time applied across block boundaries.
    pub fn run(&self) -> TimestampStream {
        let blocks: Vec<[Channel; 3]> = (0..self.n_blocks()).into_par_iter().map(|k| self.block_raw(k)).collect();
        let mut merged: [Channel; 3] = Default::default();
        for b in blocks {
            for (dst, src) in merged.iter_mut().zip(b) {
                dst.append(src);
            }
        }
        TimestampStream::new(finalize(merged, &self.setup), self.duration_s, self.seed, self.config_hash())
            .expect("finalized channels are sorted")
    }
}

pub fn run_round_trip_sim(sim: &RoundTripSim) -> TimestampStream {
    sim.run()
}
