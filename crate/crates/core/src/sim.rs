//! Deterministic synthetic sensor sources standing in for wearable hardware.
//!
//! Every source is a pure function of its configuration and seed. ECG is a
//! train of Gaussian R-wave bumps, EMG is zero-mean noise under a burst
//! envelope, GSR is a drifting baseline with step responses, and the 9DOF
//! gyroscope z-axis follows a scripted steering trajectory.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::signal::{Sample, SamplingRate, SensorKind, GYRO_Z_CHANNEL};
use crate::storage::{self, DataFileHeader};

/// Standard deviation of the R-wave bump (40 ms wide at ±2σ).
pub const R_WAVE_SIGMA_MS: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcgParams {
    pub heart_rate_bpm: f64,
    /// Beat-to-beat jitter, uniform in `±rr_jitter_ms`.
    pub rr_jitter_ms: f64,
    pub amplitude_mv: f64,
}

impl Default for EcgParams {
    fn default() -> Self {
        EcgParams { heart_rate_bpm: 75.0, rr_jitter_ms: 0.0, amplitude_mv: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmgParams {
    /// Envelope between bursts.
    pub rest_mv: f64,
    pub burst_mv: f64,
    pub burst_period_s: f64,
    pub burst_len_s: f64,
}

impl Default for EmgParams {
    fn default() -> Self {
        EmgParams { rest_mv: 0.02, burst_mv: 0.4, burst_period_s: 10.0, burst_len_s: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GsrParams {
    pub baseline_kohm: f64,
    pub drift_kohm_per_min: f64,
    /// `(onset_s, amplitude_kohm)` step responses.
    pub responses: Vec<(f64, f64)>,
    pub response_tau_s: f64,
}

impl Default for GsrParams {
    fn default() -> Self {
        GsrParams { baseline_kohm: 250.0, drift_kohm_per_min: -1.5, responses: Vec::new(), response_tau_s: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SourceParams {
    Ecg(EcgParams),
    Emg(EmgParams),
    Gsr(GsrParams),
    Dof9,
}

impl SourceParams {
    pub fn default_for(kind: SensorKind) -> Self {
        match kind {
            SensorKind::Ecg => SourceParams::Ecg(EcgParams::default()),
            SensorKind::Emg => SourceParams::Emg(EmgParams::default()),
            SensorKind::Gsr => SourceParams::Gsr(GsrParams::default()),
            SensorKind::Dof9 => SourceParams::Dof9,
        }
    }

    fn kind(&self) -> SensorKind {
        match self {
            SourceParams::Ecg(_) => SensorKind::Ecg,
            SourceParams::Emg(_) => SensorKind::Emg,
            SourceParams::Gsr(_) => SensorKind::Gsr,
            SourceParams::Dof9 => SensorKind::Dof9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    pub kind: SensorKind,
    pub fs: SamplingRate,
    pub duration_s: f64,
    pub seed: u64,
    pub noise_amplitude: f64,
    pub params: SourceParams,
}

impl SourceConfig {
    pub fn new(kind: SensorKind, fs: SamplingRate, duration_s: f64, seed: u64) -> Self {
        SourceConfig { kind, fs, duration_s, seed, noise_amplitude: 0.0, params: SourceParams::default_for(kind) }
    }

    pub fn with_noise(mut self, amplitude: f64) -> Self {
        self.noise_amplitude = amplitude;
        self
    }

    pub fn with_params(mut self, params: SourceParams) -> Self {
        self.params = params;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(invalid(format!("duration must be positive, got {}", self.duration_s)));
        }
        if !(self.noise_amplitude >= 0.0 && self.noise_amplitude.is_finite()) {
            return Err(invalid("noise amplitude must be non-negative"));
        }
        if self.params.kind() != self.kind {
            return Err(invalid(format!("{:?} parameters given for a {} source", self.params, self.kind)));
        }
        Ok(())
    }
}

/// One steering maneuver segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Segment {
    Turn { delta_deg: f64, duration_s: f64 },
    Hold { duration_s: f64 },
}

impl Segment {
    pub fn duration_s(&self) -> f64 {
        match *self {
            Segment::Turn { duration_s, .. } | Segment::Hold { duration_s } => duration_s,
        }
    }

    pub fn delta_deg(&self) -> f64 {
        match *self {
            Segment::Turn { delta_deg, .. } => delta_deg,
            Segment::Hold { .. } => 0.0,
        }
    }
}

/// A piecewise-linear steering-angle trajectory. Past its end the wheel holds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ManeuverScript {
    pub segments: Vec<Segment>,
}

impl ManeuverScript {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        for s in &segments {
            let d = s.duration_s();
            if !(d > 0.0 && d.is_finite()) || !s.delta_deg().is_finite() {
                return Err(invalid(format!("bad segment {s:?}")));
            }
        }
        Ok(ManeuverScript { segments })
    }

    pub fn turn(mut self, delta_deg: f64, duration_s: f64) -> Self {
        self.segments.push(Segment::Turn { delta_deg, duration_s });
        self
    }

    pub fn hold(mut self, duration_s: f64) -> Self {
        self.segments.push(Segment::Hold { duration_s });
        self
    }

    pub fn total_duration_s(&self) -> f64 {
        self.segments.iter().map(Segment::duration_s).sum()
    }

    pub fn total_angle_deg(&self) -> f64 {
        self.segments.iter().map(Segment::delta_deg).sum()
    }

    /// Scripted wheel angle at time `t_s`.
    pub fn angle_at(&self, t_s: f64) -> f64 {
        let mut start = 0.0;
        let mut angle = 0.0;
        for s in &self.segments {
            let d = s.duration_s();
            if t_s < start + d {
                return angle + s.delta_deg() * ((t_s - start).max(0.0) / d);
            }
            start += d;
            angle += s.delta_deg();
        }
        angle
    }

    /// Cumulative angle at each segment end.
    pub fn boundaries(&self) -> Vec<(f64, f64)> {
        let mut t = 0.0;
        let mut a = 0.0;
        self.segments
            .iter()
            .map(|s| {
                t += s.duration_s();
                a += s.delta_deg();
                (t, a)
            })
            .collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut segments = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |m: &str| Error::Parse { line: i + 1, message: format!("{m}: `{raw}`") };
            let fields: Vec<&str> = line.split_whitespace().collect();
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad("expected a number"));
            let seg = match fields.as_slice() {
                ["turn", delta, dur] => Segment::Turn { delta_deg: num(delta)?, duration_s: num(dur)? },
                ["hold", dur] => Segment::Hold { duration_s: num(dur)? },
                _ => return Err(bad("expected `turn <delta_deg> <duration_s>` or `hold <duration_s>`")),
            };
            if !(seg.duration_s() > 0.0) || !seg.duration_s().is_finite() || !seg.delta_deg().is_finite() {
                return Err(bad("durations must be positive and values finite"));
            }
            segments.push(seg);
        }
        Ok(ManeuverScript { segments })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Gentle lane-keeping weave used when no script is supplied.
    pub fn default_weave() -> Self {
        ManeuverScript::default()
            .turn(6.0, 1.5)
            .hold(0.5)
            .turn(-12.0, 2.0)
            .hold(0.5)
            .turn(6.0, 1.5)
            .hold(1.0)
    }
}

impl FromStr for ManeuverScript {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl fmt::Display for ManeuverScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.segments {
            match s {
                Segment::Turn { delta_deg, duration_s } => writeln!(f, "turn {delta_deg} {duration_s}")?,
                Segment::Hold { duration_s } => writeln!(f, "hold {duration_s}")?,
            }
        }
        Ok(())
    }
}

/// What the generator planted, for use as a test oracle.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub beats_ms: Vec<f64>,
    /// Scripted wheel angle at the end of each sample period.
    pub position_deg: Vec<f64>,
    pub turns: u64,
    /// `(start_ms, end_ms)` of EMG bursts.
    pub emg_bursts: Vec<(f64, f64)>,
}

/// Unbounded sample source; [`generate`] takes a finite prefix of it.
pub struct SourceStream {
    kind: SensorKind,
    fs: SamplingRate,
    params: SourceParams,
    noise: f64,
    noise_rng: ChaCha8Rng,
    beat_rng: ChaCha8Rng,
    index: u64,
    beats: Vec<f64>,
    next_beat: f64,
    script: Option<ManeuverScript>,
    loop_script: bool,
}

impl SourceStream {
    pub fn new(config: &SourceConfig, script: Option<ManeuverScript>) -> Result<Self> {
        config.validate()?;
        if config.kind == SensorKind::Dof9 && script.is_none() {
            return Err(invalid("a 9DOF source needs a maneuver script"));
        }
        let mut noise_rng = ChaCha8Rng::seed_from_u64(config.seed);
        noise_rng.set_stream(1);
        let mut beat_rng = ChaCha8Rng::seed_from_u64(config.seed);
        beat_rng.set_stream(2);
        let mut stream = SourceStream {
            kind: config.kind,
            fs: config.fs,
            params: config.params.clone(),
            noise: config.noise_amplitude,
            noise_rng,
            beat_rng,
            index: 0,
            beats: Vec::new(),
            next_beat: 0.0,
            script,
            loop_script: false,
        };
        if let SourceParams::Ecg(p) = &stream.params {
            if !(p.heart_rate_bpm > 0.0) {
                return Err(invalid("heart rate must be positive"));
            }
            let period = 60_000.0 / p.heart_rate_bpm;
            stream.next_beat = period / 2.0 + stream.jitter();
        }
        Ok(stream)
    }

    /// Repeat the maneuver script forever instead of holding at its end.
    pub fn looping(mut self) -> Self {
        self.loop_script = true;
        self
    }

    pub fn kind(&self) -> SensorKind {
        self.kind
    }

    pub fn fs(&self) -> SamplingRate {
        self.fs
    }

    /// Timestamp the next call to `next` will carry.
    pub fn peek_t_ms(&self) -> u64 {
        self.fs.timestamp_ms(self.index)
    }

    fn jitter(&mut self) -> f64 {
        match &self.params {
            SourceParams::Ecg(p) if p.rr_jitter_ms > 0.0 => self.beat_rng.random_range(-p.rr_jitter_ms..=p.rr_jitter_ms),
            _ => 0.0,
        }
    }

    fn gaussian_noise(&mut self) -> f64 {
        if self.noise > 0.0 {
            let z: f64 = StandardNormal.sample(&mut self.noise_rng);
            z * self.noise
        } else {
            0.0
        }
    }

    fn script_angle(&self, t_s: f64) -> f64 {
        let script = self.script.as_ref().expect("validated at construction");
        let total = script.total_duration_s();
        if self.loop_script && total > 0.0 {
            let laps = (t_s / total).floor();
            laps * script.total_angle_deg() + script.angle_at(t_s - laps * total)
        } else {
            script.angle_at(t_s)
        }
    }

    fn ecg_value(&mut self, exact_ms: f64) -> f64 {
        let SourceParams::Ecg(p) = self.params.clone() else { unreachable!() };
        let reach = 6.0 * R_WAVE_SIGMA_MS;
        let period = 60_000.0 / p.heart_rate_bpm;
        while self.next_beat <= exact_ms + reach {
            self.beats.push(self.next_beat);
            self.next_beat += period + self.jitter();
        }
        let v: f64 = self
            .beats
            .iter()
            .rev()
            .take_while(|&&b| b >= exact_ms - reach)
            .map(|&b| p.amplitude_mv * (-0.5 * ((exact_ms - b) / R_WAVE_SIGMA_MS).powi(2)).exp())
            .sum();
        v + self.gaussian_noise()
    }

    fn emg_value(&mut self, exact_s: f64) -> f64 {
        let SourceParams::Emg(p) = &self.params else { unreachable!() };
        let envelope = if in_burst(p, exact_s) { p.burst_mv } else { p.rest_mv };
        let carrier: f64 = StandardNormal.sample(&mut self.noise_rng);
        envelope * carrier + self.gaussian_noise()
    }

    fn gsr_value(&mut self, exact_s: f64) -> f64 {
        let SourceParams::Gsr(p) = &self.params else { unreachable!() };
        let mut v = p.baseline_kohm + p.drift_kohm_per_min * exact_s / 60.0;
        for &(onset, amp) in &p.responses {
            if exact_s >= onset {
                v += amp * (1.0 - (-(exact_s - onset) / p.response_tau_s).exp());
            }
        }
        v + self.gaussian_noise()
    }

    fn dof9_values(&mut self, exact_s: f64) -> Vec<f64> {
        let hz = self.fs.hertz();
        // average scripted speed over this sample period, so the integrated position is exact on the grid
        let omega = (self.script_angle(exact_s + 1.0 / hz) - self.script_angle(exact_s)) * hz;
        let mut ch = vec![0.0, 0.0, 9.81, 0.0, 0.0, 0.0, 0.3, 0.0, -0.5];
        ch[GYRO_Z_CHANNEL] = omega;
        if self.noise > 0.0 {
            for c in ch.iter_mut() {
                *c += self.gaussian_noise();
            }
        }
        ch
    }
}

fn in_burst(p: &EmgParams, t_s: f64) -> bool {
    p.burst_period_s > 0.0 && (t_s % p.burst_period_s) >= p.burst_period_s - p.burst_len_s
}

impl Iterator for SourceStream {
    type Item = Sample;

    fn next(&mut self) -> Option<Sample> {
        let i = self.index;
        let t_ms = self.fs.timestamp_ms(i);
        let exact_s = i as f64 / self.fs.hertz();
        let channels = match self.kind {
            SensorKind::Ecg => vec![self.ecg_value(exact_s * 1000.0)],
            SensorKind::Emg => vec![self.emg_value(exact_s)],
            SensorKind::Gsr => vec![self.gsr_value(exact_s)],
            SensorKind::Dof9 => self.dof9_values(exact_s),
        };
        self.index += 1;
        Some(Sample { t_ms, channels })
    }
}

/// Generate a finite stream and its ground truth.
pub fn generate(config: &SourceConfig, script: Option<&ManeuverScript>) -> Result<(Vec<Sample>, GroundTruth)> {
    let mut stream = SourceStream::new(config, script.cloned())?;
    let n = config.fs.samples_in(config.duration_s);
    let samples: Vec<Sample> = stream.by_ref().take(n as usize).collect();
    let duration_ms = config.duration_s * 1000.0;
    let hz = config.fs.hertz();

    let mut truth = GroundTruth::default();
    match &config.params {
        SourceParams::Ecg(_) => {
            truth.beats_ms = stream.beats.iter().copied().filter(|&b| b < duration_ms).collect();
        }
        SourceParams::Emg(p) => {
            if p.burst_period_s > 0.0 {
                let mut start = p.burst_period_s - p.burst_len_s;
                while start < config.duration_s {
                    truth.emg_bursts.push((start * 1000.0, ((start + p.burst_len_s).min(config.duration_s)) * 1000.0));
                    start += p.burst_period_s;
                }
            }
        }
        SourceParams::Gsr(_) => {}
        SourceParams::Dof9 => {
            let mut wrapped = 0.0f64;
            let mut prev = 0.0;
            for i in 0..n {
                let a = stream.script_angle((i + 1) as f64 / hz);
                truth.position_deg.push(a);
                let raw = wrapped + (a - prev);
                prev = a;
                if raw.abs() > 360.0 {
                    wrapped = raw - 360.0 * raw.signum();
                    truth.turns += 1;
                } else {
                    wrapped = raw;
                }
            }
        }
    }
    Ok((samples, truth))
}

/// Read back a data file written by the storage module.
pub fn replay(path: &Path) -> Result<Vec<Sample>> {
    Ok(replay_with_header(path)?.1)
}

pub fn replay_with_header(path: &Path) -> Result<(DataFileHeader, Vec<Sample>)> {
    storage::read_data_file(path)
}

/// Merge several generated sources into one stream on a shared clock.
/// Equal timestamps are ordered ECG < EMG < GSR < 9DOF; each source keeps
/// its own order.
pub fn schedule_delivery(sources: &[(SourceConfig, Option<ManeuverScript>)]) -> Result<Vec<(SensorKind, Sample)>> {
    let mut tagged = Vec::new();
    for (src_idx, (config, script)) in sources.iter().enumerate() {
        let (samples, _) = generate(config, script.as_ref())?;
        tagged.extend(samples.into_iter().enumerate().map(|(seq, s)| (s.t_ms, config.kind, src_idx, seq, s)));
    }
    tagged.sort_by_key(|&(t, kind, src, seq, _)| (t, kind, src, seq));
    Ok(tagged.into_iter().map(|(_, kind, _, _, s)| (kind, s)).collect())
}
