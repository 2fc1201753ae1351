//! Per-session feature table and plot-ready time series.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::gyro::{steering_features, SteeringFeatures, SPEED_BIN_LABELS};
use crate::physio::{detect_r_peaks, hrv_metrics, physio_summary, rr_intervals, HrvReport, PhysioSummary, RrSeries};
use crate::signal::{BlockStats, SensorKind, GYRO_Z_CHANNEL};
use crate::storage::read_data_file;

/// Everything computable from the sensor files present in a session.
#[derive(Debug, Clone, Default)]
pub struct SessionFeatures {
    pub steering: Option<SteeringFeatures>,
    pub ecg_peaks_ms: Option<Vec<f64>>,
    pub rr: Option<RrSeries>,
    pub hrv: Option<HrvReport>,
    pub emg: Option<PhysioSummary>,
    pub gsr: Option<PhysioSummary>,
}

impl SessionFeatures {
    /// Ordered `(column, value)` pairs; absent sensors contribute no columns.
    pub fn columns(&self) -> Vec<(String, String)> {
        let mut cols: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| cols.push((k.to_string(), v));
        if let Some(h) = &self.hrv {
            put("hrv_mean_rr_ms", h.mean_rr_ms.to_string());
            put("hrv_sdnn_ms", h.sdnn_ms.to_string());
            put("hrv_rmssd_ms", h.rmssd_ms.to_string());
            put("hrv_n_beats", h.n_beats.to_string());
        }
        if let Some(rr) = &self.rr {
            put("rr_artifacts", rr.artifacts.to_string());
        }
        for (prefix, s) in [("emg", &self.emg), ("gsr", &self.gsr)] {
            if let Some(s) = s {
                let u = s.units.to_ascii_lowercase();
                put(&format!("{prefix}_mean_{u}"), s.session_mean.to_string());
                put(&format!("{prefix}_std_{u}"), s.session_std.to_string());
                put(&format!("{prefix}_mean_abs_{u}"), s.mean_abs.to_string());
                put(&format!("{prefix}_samples"), s.samples.to_string());
            }
        }
        if let Some(g) = &self.steering {
            put("gyro_samples", g.samples.to_string());
            put("gyro_position_deg", g.final_position_deg.to_string());
            put("gyro_turns", g.turns.to_string());
            put("gyro_turns_mean", g.turns_mean.to_string());
            put("gyro_turns_std", g.turns_std.to_string());
            put("gyro_zero_crossings", g.zero_crossings.to_string());
            put("gyro_zero_crossings_per_s", g.zero_crossings_per_s.to_string());
            put("gyro_max_abs_speed_dps", g.max_abs_speed.to_string());
            put("gyro_max_updates", g.max_updates.to_string());
            put("gyro_mean_speed_dps", g.mean_signed_speed.to_string());
            put("gyro_std_speed_dps", g.std_signed_speed.to_string());
            put("gyro_mean_abs_speed_dps", g.mean_abs_speed.to_string());
            put("gyro_std_abs_speed_dps", g.std_abs_speed.to_string());
            for (i, label) in SPEED_BIN_LABELS.iter().enumerate() {
                put(&format!("gyro_pct_{label}"), g.bins.pct[i].to_string());
                put(&format!("gyro_mean_{label}"), g.bins.mean[i].to_string());
                put(&format!("gyro_std_{label}"), g.bins.std[i].to_string());
            }
            put("gyro_low_attention_periods", g.low_attention_periods.to_string());
        }
        cols
    }

    /// Header line plus one value line.
    pub fn to_csv(&self) -> String {
        let cols = self.columns();
        let header: Vec<&str> = cols.iter().map(|(k, _)| k.as_str()).collect();
        let values: Vec<&str> = cols.iter().map(|(_, v)| v.as_str()).collect();
        format!("{}\n{}\n", header.join(","), values.join(","))
    }
}

/// Compute features from whichever sensor files exist in `dir`.
pub fn session_features(dir: &Path) -> Result<SessionFeatures> {
    let mut f = SessionFeatures::default();
    let load = |kind: SensorKind| {
        let path = dir.join(kind.data_file_name());
        path.is_file().then(|| read_data_file(&path)).transpose()
    };
    if let Some((header, samples)) = load(SensorKind::Dof9)? {
        let stream: Vec<(u64, f64)> = samples.iter().map(|s| (s.t_ms, s.channels[GYRO_Z_CHANNEL])).collect();
        f.steering = Some(steering_features(&stream, header.fs)?);
    }
    if let Some((header, samples)) = load(SensorKind::Ecg)? {
        let peaks = detect_r_peaks(&samples, header.fs)?;
        if let Ok(rr) = rr_intervals(&peaks) {
            f.hrv = hrv_metrics(&rr).ok();
            f.rr = Some(rr);
        }
        f.ecg_peaks_ms = Some(peaks);
    }
    if let Some((_, samples)) = load(SensorKind::Emg)? {
        f.emg = Some(physio_summary(SensorKind::Emg, &samples)?);
    }
    if let Some((_, samples)) = load(SensorKind::Gsr)? {
        f.gsr = Some(physio_summary(SensorKind::Gsr, &samples)?);
    }
    Ok(f)
}

fn blocks_csv(blocks: &[BlockStats]) -> String {
    let mut out = String::from("block_index,mean,std,count,partial\n");
    for b in blocks {
        let _ = writeln!(out, "{},{},{},{},{}", b.block_index, b.mean, b.std, b.count, b.partial);
    }
    out
}

/// Write per-window and per-block series as CSV files into `dir`; returns
/// the file names written.
pub fn write_plot_data(features: &SessionFeatures, dir: &Path) -> Result<Vec<String>> {
    fs::create_dir_all(dir)?;
    let mut files: Vec<(String, String)> = Vec::new();
    if let Some(g) = &features.steering {
        let mut w = String::from("window,start_ms,samples,crossings,max_updated,low_attention\n");
        for win in &g.windows {
            let _ = writeln!(
                w,
                "{},{},{},{},{},{}",
                win.index, win.start_ms, win.sample_count, win.crossings_in_window, win.max_updated_in_window, win.low_attention
            );
        }
        files.push(("gyro_windows.csv".into(), w));
        files.push(("gyro_turn_blocks.csv".into(), blocks_csv(&g.turn_blocks)));
    }
    if let Some(peaks) = &features.ecg_peaks_ms {
        let mut s = String::from("beat_ms,rr_ms\n");
        for (i, p) in peaks.iter().enumerate() {
            let rr = i.checked_sub(1).map_or(String::new(), |j| (p - peaks[j]).to_string());
            let _ = writeln!(s, "{p},{rr}");
        }
        files.push(("ecg_beats.csv".into(), s));
    }
    for (name, summary) in [("emg_blocks.csv", &features.emg), ("gsr_blocks.csv", &features.gsr)] {
        if let Some(s) = summary {
            files.push((name.into(), blocks_csv(&s.block_series)));
        }
    }
    for (name, body) in &files {
        fs::write(dir.join(name), body)?;
    }
    Ok(files.into_iter().map(|(n, _)| n).collect())
}
