//! Steering-wheel features from the gyroscope z-axis.
//!
//! Sign convention: positive angular speed is counter-clockwise (a left
//! turn). Interval bins, per-bin statistics and the maximum tracker work on
//! absolute speed; zero-crossing detection works on the signed value.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::signal::{BlockAccumulator, BlockStats, RunningStats, SamplingRate, DEFAULT_BLOCK_SIZE};

/// Number of angular-speed intervals.
pub const SPEED_BINS: usize = 5;

/// Lower bounds (deg/s, inclusive) of bins 0..=3; bin 4 is `[0, 2.5)`.
pub const SPEED_BIN_LOWER: [f64; 4] = [10.0, 7.5, 5.0, 2.5];

pub const SPEED_BIN_LABELS: [&str; SPEED_BINS] = ["ge10", "7.5to10", "5to7.5", "2.5to5", "lt2.5"];

/// Span of one attention window.
pub const ATTENTION_WINDOW_MS: u64 = 5_000;

/// `prev_deg + omega_dps / fs`, no wrapping.
pub fn integrate_position(prev_deg: f64, omega_dps: f64, fs: SamplingRate) -> Result<f64> {
    if !prev_deg.is_finite() || !omega_dps.is_finite() {
        return Err(invalid(format!("non-finite input ({prev_deg}, {omega_dps})")));
    }
    Ok(prev_deg + omega_dps / fs.hertz())
}

/// Interval index of `|omega_dps|`; bins are lower-inclusive, fastest first.
pub fn classify_speed_interval(omega_dps: f64) -> usize {
    let a = omega_dps.abs();
    SPEED_BIN_LOWER.iter().position(|&lo| a >= lo).unwrap_or(SPEED_BINS - 1)
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Per-sample outcome of [`SteeringState::push`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SampleEvents {
    pub crossing: bool,
    pub max_updated: bool,
    pub turn_completed: bool,
}

/// Streaming steering-wheel state for one gyroscope stream.
#[derive(Debug, Clone)]
pub struct SteeringState {
    pub position_deg: f64,
    /// Position without the ±360° normalization.
    pub unwrapped_deg: f64,
    pub turns: u64,
    pub fs: SamplingRate,
    pub zero_crossings: u64,
    pub prev_speed_sign: i8,
    pub max_abs_speed: f64,
    pub max_update_events: Vec<u64>,
    pub crossing_events: Vec<u64>,
    pub samples_seen: u64,
    turn_blocks: BlockAccumulator,
    turn_block_stats: Vec<BlockStats>,
    turn_observations: RunningStats,
    signed: RunningStats,
    bins: SpeedBinAccumulator,
}

impl SteeringState {
    pub fn new(fs: SamplingRate) -> Self {
        SteeringState {
            position_deg: 0.0,
            unwrapped_deg: 0.0,
            turns: 0,
            fs,
            zero_crossings: 0,
            prev_speed_sign: 0,
            max_abs_speed: 0.0,
            max_update_events: Vec::new(),
            crossing_events: Vec::new(),
            samples_seen: 0,
            turn_blocks: BlockAccumulator::new(DEFAULT_BLOCK_SIZE).expect("non-zero block size"),
            turn_block_stats: Vec::new(),
            turn_observations: RunningStats::new(),
            signed: RunningStats::new(),
            bins: SpeedBinAccumulator::default(),
        }
    }

    /// Feed one z-axis angular speed sample (deg/s).
    pub fn push(&mut self, omega_dps: f64) -> Result<SampleEvents> {
        let raw = integrate_position(self.position_deg, omega_dps, self.fs)?;
        self.unwrapped_deg = integrate_position(self.unwrapped_deg, omega_dps, self.fs)?;
        let turns_before = self.turns;
        self.normalize_and_count_turns(raw)?;

        let index = self.samples_seen;
        let crossing = self.update_zero_crossings(omega_dps);
        if crossing {
            self.crossing_events.push(index);
        }
        let max_updated = self.update_max_abs(omega_dps, index);

        if let Some(b) = self.turn_blocks.push(self.turns as f64) {
            self.turn_block_stats.push(b);
        }
        self.turn_observations.push(self.turns as f64);
        self.signed.push(omega_dps);
        self.bins.push(omega_dps);
        self.samples_seen += 1;

        Ok(SampleEvents { crossing, max_updated, turn_completed: self.turns != turns_before })
    }

    /// Fold a freshly integrated position back into (-360, 360], counting
    /// a completed turn whenever it wraps. Turns never decrement.
    pub fn normalize_and_count_turns(&mut self, raw_position: f64) -> Result<()> {
        if !raw_position.is_finite() || raw_position.abs() >= 720.0 {
            return Err(Error::OutOfRange(format!("raw position {raw_position} exceeds ±720°")));
        }
        if raw_position.abs() > 360.0 {
            self.position_deg = raw_position - 360.0 * raw_position.signum();
            self.turns += 1;
        } else {
            self.position_deg = raw_position;
        }
        Ok(())
    }

    /// Returns true when this sample completes a sign change. Zero samples
    /// neither count nor reset the remembered sign.
    pub fn update_zero_crossings(&mut self, omega_dps: f64) -> bool {
        let s = sign(omega_dps);
        if s == 0 {
            return false;
        }
        let crossed = self.prev_speed_sign != 0 && s != self.prev_speed_sign;
        if crossed {
            self.zero_crossings += 1;
        }
        self.prev_speed_sign = s;
        crossed
    }

    pub fn update_max_abs(&mut self, omega_dps: f64, sample_index: u64) -> bool {
        let a = omega_dps.abs();
        if a > self.max_abs_speed {
            self.max_abs_speed = a;
            self.max_update_events.push(sample_index);
            true
        } else {
            false
        }
    }

    /// Completed 20-observation blocks of the turn counter.
    pub fn turn_count_block_stats(&self) -> &[BlockStats] {
        &self.turn_block_stats
    }

    pub fn turn_count_stats(&self) -> RunningStats {
        self.turn_observations
    }

    pub fn signed_speed_stats(&self) -> RunningStats {
        self.signed
    }

    pub fn interval_report(&self) -> SpeedBinReport {
        self.bins.report()
    }
}

/// Per-interval breakdown of absolute angular speeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedBinReport {
    pub counts: [u64; SPEED_BINS],
    pub pct: [f64; SPEED_BINS],
    pub mean: [f64; SPEED_BINS],
    pub std: [f64; SPEED_BINS],
    /// No samples were classified; `pct` is undefined and left at zero.
    pub empty: bool,
}

impl SpeedBinReport {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SpeedBinAccumulator {
    bins: [RunningStats; SPEED_BINS],
    abs_all: RunningStats,
}

impl SpeedBinAccumulator {
    pub fn push(&mut self, omega_dps: f64) {
        let a = omega_dps.abs();
        self.bins[classify_speed_interval(omega_dps)].push(a);
        self.abs_all.push(a);
    }

    /// Statistics of `|omega|` over every classified sample.
    pub fn absolute_stats(&self) -> RunningStats {
        self.abs_all
    }

    pub fn report(&self) -> SpeedBinReport {
        let total: u64 = self.bins.iter().map(|b| b.count()).sum();
        let mut r = SpeedBinReport {
            counts: [0; SPEED_BINS],
            pct: [0.0; SPEED_BINS],
            mean: [0.0; SPEED_BINS],
            std: [0.0; SPEED_BINS],
            empty: total == 0,
        };
        for (i, b) in self.bins.iter().enumerate() {
            r.counts[i] = b.count();
            r.mean[i] = b.mean();
            r.std[i] = b.std();
            if total > 0 {
                r.pct[i] = 100.0 * b.count() as f64 / total as f64;
            }
        }
        r
    }
}

pub fn interval_summary(speeds: &[f64]) -> SpeedBinReport {
    let mut acc = SpeedBinAccumulator::default();
    for &s in speeds {
        acc.push(s);
    }
    acc.report()
}

/// Mean/std per set of 20 observations of a turn-counter trace.
pub fn turn_count_block_stats(turn_trace: &[u64]) -> Vec<BlockStats> {
    let mut acc = BlockAccumulator::new(DEFAULT_BLOCK_SIZE).expect("non-zero block size");
    turn_trace.iter().filter_map(|&t| acc.push(t as f64)).collect()
}

/// One fixed 5 s period of the gyroscope stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttentionWindow {
    pub index: usize,
    pub start_ms: u64,
    pub span_ms: u64,
    pub sample_count: usize,
    pub crossings_in_window: u64,
    pub max_updated_in_window: bool,
    pub low_attention: bool,
}

/// Partition a `(t_ms, omega)` stream into consecutive 5 s windows, tracking
/// crossings and max updates from the start of the stream. A trailing window
/// the stream has not yet finished is dropped.
pub fn attention_windows(stream: &[(u64, f64)], fs: SamplingRate) -> Vec<AttentionWindow> {
    let Some(&(last_t, _)) = stream.last() else {
        return Vec::new();
    };
    let mut state = SteeringState::new(fs);
    let n_windows = (last_t / ATTENTION_WINDOW_MS + 1) as usize;
    let mut windows: Vec<AttentionWindow> = (0..n_windows)
        .map(|i| AttentionWindow {
            index: i,
            start_ms: i as u64 * ATTENTION_WINDOW_MS,
            span_ms: ATTENTION_WINDOW_MS,
            sample_count: 0,
            crossings_in_window: 0,
            max_updated_in_window: false,
            low_attention: false,
        })
        .collect();
    for (i, &(t, omega)) in stream.iter().enumerate() {
        let w = &mut windows[(t / ATTENTION_WINDOW_MS) as usize];
        w.sample_count += 1;
        if state.update_zero_crossings(omega) {
            w.crossings_in_window += 1;
        }
        if state.update_max_abs(omega, i as u64) {
            w.max_updated_in_window = true;
        }
    }
    let end = n_windows as u64 * ATTENTION_WINDOW_MS;
    let next_t = last_t as f64 + 1000.0 / fs.hertz();
    if next_t < end as f64 - 0.5 {
        windows.pop();
    }
    classify_low_attention(&windows)
}

/// Flag window `i` when it and window `i-1` together saw no zero-crossing but
/// at least one max update. Window 0 is judged on itself alone.
pub fn classify_low_attention(windows: &[AttentionWindow]) -> Vec<AttentionWindow> {
    windows
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let prev = i.checked_sub(1).map(|p| &windows[p]);
            let crossings = w.crossings_in_window + prev.map_or(0, |p| p.crossings_in_window);
            let max_seen = w.max_updated_in_window || prev.is_some_and(|p| p.max_updated_in_window);
            AttentionWindow { low_attention: crossings == 0 && max_seen, ..w.clone() }
        })
        .collect()
}

/// Whole-stream steering summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringFeatures {
    pub samples: u64,
    pub duration_s: f64,
    pub final_position_deg: f64,
    pub unwrapped_position_deg: f64,
    pub turns: u64,
    pub turns_mean: f64,
    pub turns_std: f64,
    pub zero_crossings: u64,
    pub zero_crossings_per_s: f64,
    pub max_abs_speed: f64,
    pub max_updates: usize,
    pub mean_signed_speed: f64,
    pub std_signed_speed: f64,
    pub mean_abs_speed: f64,
    pub std_abs_speed: f64,
    pub bins: SpeedBinReport,
    pub turn_blocks: Vec<BlockStats>,
    pub windows: Vec<AttentionWindow>,
    pub low_attention_periods: usize,
}

/// Run every steering feature over a `(t_ms, omega)` stream.
pub fn steering_features(stream: &[(u64, f64)], fs: SamplingRate) -> Result<SteeringFeatures> {
    let mut state = SteeringState::new(fs);
    let mut abs = RunningStats::new();
    for &(_, omega) in stream {
        state.push(omega)?;
        abs.push(omega.abs());
    }
    let windows = attention_windows(stream, fs);
    let duration_s = stream.len() as f64 / fs.hertz();
    let turns = state.turn_count_stats();
    let signed = state.signed_speed_stats();
    Ok(SteeringFeatures {
        samples: state.samples_seen,
        duration_s,
        final_position_deg: state.position_deg,
        unwrapped_position_deg: state.unwrapped_deg,
        turns: state.turns,
        turns_mean: turns.mean(),
        turns_std: turns.std(),
        zero_crossings: state.zero_crossings,
        zero_crossings_per_s: if duration_s > 0.0 { state.zero_crossings as f64 / duration_s } else { 0.0 },
        max_abs_speed: state.max_abs_speed,
        max_updates: state.max_update_events.len(),
        mean_signed_speed: signed.mean(),
        std_signed_speed: signed.std(),
        mean_abs_speed: abs.mean(),
        std_abs_speed: abs.std(),
        bins: state.interval_report(),
        turn_blocks: state.turn_count_block_stats().to_vec(),
        low_attention_periods: windows.iter().filter(|w| w.low_attention).count(),
        windows,
    })
}
