//! ECG R-peak detection, heart-rate variability, and EMG/GSR summaries.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::signal::{block_stats, BlockStats, RunningStats, Sample, SamplingRate, SensorKind, DEFAULT_BLOCK_SIZE};

/// Minimum ECG rate accepted by the detector.
pub const MIN_ECG_RATE_HZ: f64 = 100.0;
pub const REFRACTORY_MS: f64 = 250.0;
pub const BASELINE_WINDOW_S: f64 = 0.6;
pub const THRESHOLD_WINDOW_S: f64 = 2.0;
pub const THRESHOLD_FRACTION: f64 = 0.6;
/// Plausible RR band (20–240 bpm).
pub const RR_MIN_MS: f64 = 250.0;
pub const RR_MAX_MS: f64 = 3000.0;

/// Detect R peaks and return their times in milliseconds.
///
/// The trace is baseline-corrected with a trailing 0.6 s mean and rectified.
/// A local maximum is a beat when it reaches 0.6 of the largest rectified
/// value seen in the last 2 s. Within the 250 ms refractory period only the
/// stronger of two candidates survives. Peak times are refined to sub-sample
/// resolution with a parabola through the three samples around the maximum.
pub fn detect_r_peaks(ecg: &[Sample], fs: SamplingRate) -> Result<Vec<f64>> {
    let hz = fs.hertz();
    if hz < MIN_ECG_RATE_HZ {
        return Err(Error::UnsupportedRate(hz));
    }
    let n = ecg.len();
    if n < 3 {
        return Ok(Vec::new());
    }

    let base_len = ((BASELINE_WINDOW_S * hz).round() as usize).max(1);
    let mut rect = Vec::with_capacity(n);
    let mut sum = 0.0;
    for i in 0..n {
        sum += ecg[i].value();
        if i >= base_len {
            sum -= ecg[i - base_len].value();
        }
        let len = (i + 1).min(base_len) as f64;
        rect.push((ecg[i].value() - sum / len).abs());
    }

    let max_len = ((THRESHOLD_WINDOW_S * hz).round() as usize).max(1);
    let mut window: VecDeque<usize> = VecDeque::new();
    let mut peaks: Vec<(f64, f64)> = Vec::new(); // (time, height)

    for i in 0..n {
        while window.back().is_some_and(|&j| rect[j] <= rect[i]) {
            window.pop_back();
        }
        window.push_back(i);
        while window.front().is_some_and(|&j| j + max_len <= i) {
            window.pop_front();
        }
        if i == 0 || i + 1 == n {
            continue;
        }
        let r = rect[i];
        let threshold = THRESHOLD_FRACTION * rect[window[0]];
        let local_max = r >= rect[i - 1] && r > rect[i + 1];
        if !(r > 0.0 && local_max && r >= threshold) {
            continue;
        }
        let t = ecg[i].t_ms as f64 + parabolic_offset(rect[i - 1], r, rect[i + 1]) * 1000.0 / hz;
        match peaks.last_mut() {
            Some(last) if t - last.0 < REFRACTORY_MS => {
                if r > last.1 {
                    *last = (t, r);
                }
            }
            _ => peaks.push((t, r)),
        }
    }
    Ok(peaks.into_iter().map(|(t, _)| t).collect())
}

fn parabolic_offset(left: f64, mid: f64, right: f64) -> f64 {
    let denom = left - 2.0 * mid + right;
    if denom == 0.0 {
        0.0
    } else {
        (0.5 * (left - right) / denom).clamp(-0.5, 0.5)
    }
}

/// Beat-to-beat intervals after artifact rejection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RrSeries {
    pub rr_ms: Vec<f64>,
    /// Intervals dropped for falling outside the plausible band.
    pub artifacts: usize,
}

pub fn rr_intervals(peaks_ms: &[f64]) -> Result<RrSeries> {
    if peaks_ms.len() < 2 {
        return Err(Error::InsufficientData { required: 2, available: peaks_ms.len() });
    }
    if peaks_ms.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("peak times must be strictly increasing"));
    }
    let mut rr = Vec::with_capacity(peaks_ms.len() - 1);
    let mut artifacts = 0;
    for w in peaks_ms.windows(2) {
        let d = w[1] - w[0];
        if (RR_MIN_MS..=RR_MAX_MS).contains(&d) {
            rr.push(d);
        } else {
            artifacts += 1;
        }
    }
    if rr.is_empty() {
        return Err(Error::InsufficientData { required: 1, available: 0 });
    }
    Ok(RrSeries { rr_ms: rr, artifacts })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HrvReport {
    pub mean_rr_ms: f64,
    pub sdnn_ms: f64,
    pub rmssd_ms: f64,
    pub n_beats: usize,
}

impl HrvReport {
    /// The scalar reported as "mean HRV": the mean RR interval.
    pub fn headline(&self) -> f64 {
        self.mean_rr_ms
    }
}

pub fn hrv_metrics(rr: &RrSeries) -> Result<HrvReport> {
    let n = rr.rr_ms.len();
    if n < 2 {
        return Err(Error::InsufficientData { required: 2, available: n });
    }
    let stats = RunningStats::from_values(rr.rr_ms.iter().copied());
    let sq_diffs = RunningStats::from_values(rr.rr_ms.windows(2).map(|w| (w[1] - w[0]).powi(2)));
    Ok(HrvReport {
        mean_rr_ms: stats.mean(),
        sdnn_ms: stats.std(),
        rmssd_ms: sq_diffs.mean().sqrt(),
        n_beats: n + 1,
    })
}

/// Session-level summary of an EMG or GSR stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysioSummary {
    pub sensor: SensorKind,
    pub session_mean: f64,
    pub session_std: f64,
    /// Mean of the rectified signal.
    pub mean_abs: f64,
    pub samples: u64,
    pub block_series: Vec<BlockStats>,
    pub units: &'static str,
    pub empty: bool,
}

pub fn units_of(kind: SensorKind) -> &'static str {
    match kind {
        SensorKind::Ecg | SensorKind::Emg => "mV",
        SensorKind::Gsr => "kOhm",
        SensorKind::Dof9 => "mixed",
    }
}

pub fn physio_summary(kind: SensorKind, stream: &[Sample]) -> Result<PhysioSummary> {
    if !matches!(kind, SensorKind::Emg | SensorKind::Gsr) {
        return Err(invalid(format!("physio summary applies to EMG or GSR, not {kind}")));
    }
    let values: Vec<f64> = stream.iter().map(Sample::value).collect();
    let stats = RunningStats::from_values(values.iter().copied());
    let abs = RunningStats::from_values(values.iter().map(|v| v.abs()));
    Ok(PhysioSummary {
        sensor: kind,
        session_mean: stats.mean(),
        session_std: stats.std(),
        mean_abs: abs.mean(),
        samples: stats.count(),
        block_series: block_stats(&values, DEFAULT_BLOCK_SIZE)?,
        units: units_of(kind),
        empty: values.is_empty(),
    })
}
