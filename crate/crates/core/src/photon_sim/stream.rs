//! Detector-tagged timestamp streams and their on-disk formats.
//!
//! Binary layout (all little-endian):
//!
//! ```text
//! magic      8 bytes  "ASYMTS01"
//! seed       u64
//! config     u64      hash of the generating configuration
//! duration   f64      seconds
//! count      u64      number of records
//! records    count × { detector u8, time_ps i64, pair_id u64 }
//! ```
//!
//! Records are written detector by detector, ascending in time within each.
//! The CSV form carries the same header as `# key=value` comment lines
//! followed by `detector,time_ps` rows.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"ASYMTS01";
const RECORD_BYTES: usize = 17;

/// Pair id of records not produced by a photon pair (dark counts, CSV imports).
pub const NO_PAIR: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorId {
    IdlerA = 0,
    SignalB = 1,
    ReturnA = 2,
}

impl DetectorId {
    pub const ALL: [DetectorId; 3] = [DetectorId::IdlerA, DetectorId::SignalB, DetectorId::ReturnA];

    pub fn name(self) -> &'static str {
        match self {
            DetectorId::IdlerA => "idler_a",
            DetectorId::SignalB => "signal_b",
            DetectorId::ReturnA => "return_a",
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        Self::ALL.get(usize::from(v)).copied()
    }

    fn parse(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .or_else(|| s.parse::<u8>().ok().and_then(Self::from_u8))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimestampRecord {
    pub detector_id: DetectorId,
    pub time_ps: i64,
    /// Simulation ground truth; never an estimator input.
    pub true_pair_id: u64,
}

/// Time-sorted detections of a single detector, stored column-wise.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Channel {
    pub times: Vec<i64>,
    pub pair_ids: Vec<u64>,
}

impl Channel {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, time_ps: i64, pair_id: u64) {
        self.times.push(time_ps);
        self.pair_ids.push(pair_id);
    }

    pub fn is_sorted(&self) -> bool {
        self.times.windows(2).all(|w| w[0] <= w[1])
    }

    /// Sort by time, then drop negative times and records inside the
    /// (non-paralyzable) dead time of the previously kept record.
    pub(crate) fn finalize(&mut self, dead_time_ps: f64) {
        if !self.is_sorted() {
            let mut order: Vec<(i64, u64)> = self
                .times
                .iter()
                .copied()
                .zip(self.pair_ids.iter().copied())
                .collect();
            order.sort_by_key(|&(t, _)| t);
            self.times = order.iter().map(|&(t, _)| t).collect();
            self.pair_ids = order.iter().map(|&(_, id)| id).collect();
        }
        let dead = dead_time_ps.ceil() as i64;
        let mut last: Option<i64> = None;
        let mut w = 0;
        for r in 0..self.times.len() {
            let t = self.times[r];
            if t < 0 {
                continue;
            }
            if let Some(prev) = last {
                if t - prev < dead {
                    continue;
                }
            }
            last = Some(t);
            self.times[w] = t;
            self.pair_ids[w] = self.pair_ids[r];
            w += 1;
        }
        self.times.truncate(w);
        self.pair_ids.truncate(w);
    }

    pub(crate) fn append(&mut self, other: Channel) {
        self.times.extend(other.times);
        self.pair_ids.extend(other.pair_ids);
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimestampStream {
    channels: [Channel; 3],
    pub duration_s: f64,
    pub seed: u64,
    pub config_hash: u64,
}

impl TimestampStream {
    pub fn new(channels: [Channel; 3], duration_s: f64, seed: u64, config_hash: u64) -> Result<Self> {
        for (d, c) in DetectorId::ALL.iter().zip(&channels) {
            if c.times.len() != c.pair_ids.len() {
                return Err(Error::Contract(format!("{} column lengths differ", d.name())));
            }
            if !c.is_sorted() {
                return Err(Error::Contract(format!("{} times are not sorted", d.name())));
            }
            if c.times.first().is_some_and(|&t| t < 0) {
                return Err(Error::Contract(format!("{} has negative times", d.name())));
            }
        }
        Ok(Self {
            channels,
            duration_s,
            seed,
            config_hash,
        })
    }

    pub fn channel(&self, id: DetectorId) -> &Channel {
        &self.channels[id as usize]
    }

    pub fn times(&self, id: DetectorId) -> &[i64] {
        &self.channels[id as usize].times
    }

    pub fn len(&self) -> usize {
        self.channels.iter().map(Channel::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All records, detector by detector, ascending in time within each.
    pub fn records(&self) -> impl Iterator<Item = TimestampRecord> + '_ {
        DetectorId::ALL.into_iter().flat_map(move |d| {
            let c = self.channel(d);
            c.times
                .iter()
                .zip(&c.pair_ids)
                .map(move |(&time_ps, &true_pair_id)| TimestampRecord {
                    detector_id: d,
                    time_ps,
                    true_pair_id,
                })
        })
    }

    pub fn write_binary<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        w.write_all(MAGIC)?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&self.config_hash.to_le_bytes())?;
        w.write_all(&self.duration_s.to_le_bytes())?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        for r in self.records() {
            w.write_all(&[r.detector_id as u8])?;
            w.write_all(&r.time_ps.to_le_bytes())?;
            w.write_all(&r.true_pair_id.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad stream magic".into()));
        }
        let mut word = [0u8; 8];
        let mut next = |r: &mut BufReader<R>| -> Result<[u8; 8]> {
            r.read_exact(&mut word)?;
            Ok(word)
        };
        let seed = u64::from_le_bytes(next(&mut r)?);
        let config_hash = u64::from_le_bytes(next(&mut r)?);
        let duration_s = f64::from_le_bytes(next(&mut r)?);
        let count = u64::from_le_bytes(next(&mut r)?);
        let mut channels: [Channel; 3] = Default::default();
        let mut rec = [0u8; RECORD_BYTES];
        for i in 0..count {
            r.read_exact(&mut rec)
                .map_err(|e| Error::Format(format!("truncated at record {i}: {e}")))?;
            let det = DetectorId::from_u8(rec[0])
                .ok_or_else(|| Error::Format(format!("record {i}: detector id {}", rec[0])))?;
            let time = i64::from_le_bytes(rec[1..9].try_into().expect("8 bytes"));
            let id = u64::from_le_bytes(rec[9..17].try_into().expect("8 bytes"));
            channels[det as usize].push(time, id);
        }
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(Error::Format("trailing bytes after last record".into()));
        }
        Self::new(channels, duration_s, seed, config_hash)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        writeln!(w, "# seed={}", self.seed)?;
        writeln!(w, "# config_hash={:016x}", self.config_hash)?;
        writeln!(w, "# duration_s={}", self.duration_s)?;
        writeln!(w, "detector,time_ps")?;
        for r in self.records() {
            writeln!(w, "{},{}", r.detector_id.name(), r.time_ps)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Parse the CSV form. Pair ids are not part of it and come back as [`NO_PAIR`].
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut seed = 0;
        let mut config_hash = 0;
        let mut duration_s = 0.0;
        let mut channels: [Channel; 3] = Default::default();
        let mut saw_header = false;
        for (n, line) in BufReader::new(r).lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                let bad = || Error::Format(format!("line {}: bad header {meta:?}", n + 1));
                let (key, value) = meta.trim().split_once('=').ok_or_else(bad)?;
                match key.trim() {
                    "seed" => seed = value.trim().parse().map_err(|_| bad())?,
                    "config_hash" => {
                        config_hash = u64::from_str_radix(value.trim(), 16).map_err(|_| bad())?
                    }
                    "duration_s" => duration_s = value.trim().parse().map_err(|_| bad())?,
                    _ => {}
                }
                continue;
            }
            if !saw_header {
                if line != "detector,time_ps" {
                    return Err(Error::Format(format!("line {}: expected column header", n + 1)));
                }
                saw_header = true;
                continue;
            }
            let bad = || Error::Format(format!("line {}: {line:?}", n + 1));
            let (det, time) = line.split_once(',').ok_or_else(bad)?;
            let det = DetectorId::parse(det.trim()).ok_or_else(bad)?;
            let time: i64 = time.trim().parse().map_err(|_| bad())?;
            channels[det as usize].push(time, NO_PAIR);
        }
        Self::new(channels, duration_s, seed, config_hash)
    }
}
