//! Sample types shared by every stream, plus running and block statistics.
//!
//! Standard deviations here are population deviations (divide by N), both
//! for the whole-session accumulator and for fixed-size blocks.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Default number of samples per statistics block.
pub const DEFAULT_BLOCK_SIZE: usize = 20;

/// The four sensor modules a session can stream from.
///
/// Variant order is the tie-break order used when merging streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SensorKind {
    #[serde(rename = "ECG")]
    Ecg,
    #[serde(rename = "EMG")]
    Emg,
    #[serde(rename = "GSR")]
    Gsr,
    /// Gyroscope + accelerometer + magnetometer carrier.
    #[serde(rename = "9DOF")]
    Dof9,
}

impl SensorKind {
    pub const ALL: [SensorKind; 4] = [SensorKind::Ecg, SensorKind::Emg, SensorKind::Gsr, SensorKind::Dof9];

    pub fn as_str(self) -> &'static str {
        match self {
            SensorKind::Ecg => "ECG",
            SensorKind::Emg => "EMG",
            SensorKind::Gsr => "GSR",
            SensorKind::Dof9 => "9DOF",
        }
    }

    /// Lowercase token used for file names and CLI flags.
    pub fn token(self) -> &'static str {
        match self {
            SensorKind::Ecg => "ecg",
            SensorKind::Emg => "emg",
            SensorKind::Gsr => "gsr",
            SensorKind::Dof9 => "9dof",
        }
    }

    pub fn channel_count(self) -> usize {
        match self {
            SensorKind::Dof9 => 9,
            _ => 1,
        }
    }

    pub fn channel_names(self) -> &'static [&'static str] {
        match self {
            SensorKind::Ecg => &["ecg_mv"],
            SensorKind::Emg => &["emg_mv"],
            SensorKind::Gsr => &["gsr_kohm"],
            SensorKind::Dof9 => &[
                "accel_x", "accel_y", "accel_z", "gyro_x", "gyro_y", "gyro_z", "mag_x", "mag_y", "mag_z",
            ],
        }
    }

    pub fn data_file_name(self) -> String {
        format!("{}.csv", self.token())
    }
}

impl fmt::Display for SensorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SensorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "ECG" => Ok(SensorKind::Ecg),
            "EMG" => Ok(SensorKind::Emg),
            "GSR" => Ok(SensorKind::Gsr),
            "9DOF" | "DOF9" => Ok(SensorKind::Dof9),
            other => Err(invalid(format!("unknown sensor kind `{other}`"))),
        }
    }
}

/// Index of the gyroscope z-axis (steering axis) inside a 9DOF sample.
pub const GYRO_Z_CHANNEL: usize = 5;

/// A positive sampling rate, stored in millihertz so timestamps can be
/// computed with exact integer arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SamplingRate(u64);

impl SamplingRate {
    pub const HZ_10_2: SamplingRate = SamplingRate(10_200);
    pub const HZ_50_2: SamplingRate = SamplingRate(50_200);
    pub const HZ_128: SamplingRate = SamplingRate(128_000);

    pub fn from_hz(hz: f64) -> Result<Self> {
        if !hz.is_finite() || hz <= 0.0 {
            return Err(invalid(format!("sampling rate must be positive, got {hz}")));
        }
        let mhz = (hz * 1000.0).round();
        if mhz < 1.0 {
            return Err(invalid(format!("sampling rate {hz} Hz below 1 mHz resolution")));
        }
        Ok(SamplingRate(mhz as u64))
    }

    pub fn from_millihertz(mhz: u64) -> Result<Self> {
        if mhz == 0 {
            return Err(invalid("sampling rate must be positive"));
        }
        Ok(SamplingRate(mhz))
    }

    pub fn hertz(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    pub fn millihertz(self) -> u64 {
        self.0
    }

    /// Timestamp of sample `index` in whole milliseconds: `round(index * 1000 / hz)`,
    /// computed from the exact rational so rounding never accumulates.
    pub fn timestamp_ms(self, index: u64) -> u64 {
        let num = index as u128 * 2_000_000;
        let den = 2 * self.0 as u128;
        ((num + self.0 as u128) / den) as u64
    }

    /// Sample count of a stream lasting `duration_s`: `round(duration_s * hz)`.
    pub fn samples_in(self, duration_s: f64) -> u64 {
        (duration_s * self.hertz()).round().max(0.0) as u64
    }
}

impl TryFrom<f64> for SamplingRate {
    type Error = Error;

    fn try_from(hz: f64) -> Result<Self> {
        SamplingRate::from_hz(hz)
    }
}

impl From<SamplingRate> for f64 {
    fn from(r: SamplingRate) -> f64 {
        r.hertz()
    }
}

impl fmt::Display for SamplingRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.hertz())
    }
}

/// One timestamped reading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// Milliseconds since session start.
    pub t_ms: u64,
    pub channels: Vec<f64>,
}

impl Sample {
    pub fn new(t_ms: u64, channels: Vec<f64>) -> Self {
        Sample { t_ms, channels }
    }

    pub fn scalar(t_ms: u64, value: f64) -> Self {
        Sample { t_ms, channels: vec![value] }
    }

    pub fn value(&self) -> f64 {
        self.channels[0]
    }
}

/// A run of samples from one sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub kind: SensorKind,
    pub samples: Vec<Sample>,
}

impl SampleBatch {
    pub fn new(kind: SensorKind, samples: Vec<Sample>) -> Result<Self> {
        for (i, s) in samples.iter().enumerate() {
            if s.channels.len() != kind.channel_count() {
                return Err(invalid(format!(
                    "sample {i} has {} channels, {kind} expects {}",
                    s.channels.len(),
                    kind.channel_count()
                )));
            }
        }
        if samples.windows(2).any(|w| w[1].t_ms < w[0].t_ms) {
            return Err(invalid("timestamps must be non-decreasing"));
        }
        Ok(SampleBatch { kind, samples })
    }
}

/// Single-pass mean / variance accumulator (Welford).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_values<I: IntoIterator<Item = f64>>(values: I) -> Self {
        let mut s = Self::new();
        for v in values {
            s.push(v);
        }
        s
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Functional form of [`RunningStats::push`].
    pub fn update(mut self, x: f64) -> Self {
        self.push(x);
        self
    }

    /// Count-weighted merge of two accumulators.
    pub fn merge(&self, other: &RunningStats) -> RunningStats {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.count as f64 / count as f64;
        let m2 = self.m2 + other.m2 + delta * delta * self.count as f64 * other.count as f64 / count as f64;
        RunningStats { count, mean, m2 }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sum(&self) -> f64 {
        self.mean * self.count as f64
    }

    pub fn m2(&self) -> f64 {
        self.m2
    }

    pub fn variance(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.m2 / self.count as f64).max(0.0)
        }
    }

    pub fn std(&self) -> f64 {
        self.variance().sqrt()
    }
}

/// Mean and population std of one block of consecutive samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockStats {
    pub block_index: usize,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
    /// Set only for a trailing short block emitted at stream close.
    pub partial: bool,
}

/// Streaming block grouper: emits one [`BlockStats`] per completed block.
#[derive(Debug, Clone)]
pub struct BlockAccumulator {
    block_size: usize,
    current: RunningStats,
    next_index: usize,
}

impl BlockAccumulator {
    pub fn new(block_size: usize) -> Result<Self> {
        if block_size == 0 {
            return Err(invalid("block_size must be at least 1"));
        }
        Ok(BlockAccumulator { block_size, current: RunningStats::new(), next_index: 0 })
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn push(&mut self, x: f64) -> Option<BlockStats> {
        self.current.push(x);
        if self.current.count() as usize == self.block_size {
            Some(self.emit(false))
        } else {
            None
        }
    }

    /// Flush the trailing partial block, if any.
    pub fn close(&mut self) -> Option<BlockStats> {
        if self.current.is_empty() {
            None
        } else {
            Some(self.emit(true))
        }
    }

    fn emit(&mut self, partial: bool) -> BlockStats {
        let stats = BlockStats {
            block_index: self.next_index,
            mean: self.current.mean(),
            std: self.current.std(),
            count: self.current.count() as usize,
            partial,
        };
        self.next_index += 1;
        self.current = RunningStats::new();
        stats
    }
}

/// Completed blocks only; a trailing partial block is withheld.
pub fn block_stats(stream: &[f64], block_size: usize) -> Result<Vec<BlockStats>> {
    let mut acc = BlockAccumulator::new(block_size)?;
    Ok(stream.iter().filter_map(|&x| acc.push(x)).collect())
}

/// Like [`block_stats`] but the stream is closed, so a trailing short block
/// is emitted with `partial = true`.
pub fn block_stats_closed(stream: &[f64], block_size: usize) -> Result<Vec<BlockStats>> {
    let mut acc = BlockAccumulator::new(block_size)?;
    let mut out: Vec<_> = stream.iter().filter_map(|&x| acc.push(x)).collect();
    out.extend(acc.close());
    Ok(out)
}
