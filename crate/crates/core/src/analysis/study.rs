//! Session-level variables, correlation studies, and state comparisons.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::analysis::correlation::{correlate, CorrelationResult};
use crate::analysis::shapiro::{shapiro_wilk_named, NormalityResult};
use crate::error::{invalid, Error, Result};
use crate::gyro::{steering_features, AttentionWindow, SteeringFeatures};
use crate::harness::{
    parse_offences_csv, parse_vehicle_csv, OffenceEvent, OffenceKind, PhysicalState, ScenarioClass, SessionMeta,
    VehicleRecord,
};
use crate::physio::{detect_r_peaks, hrv_metrics, physio_summary, rr_intervals};
use crate::signal::{SensorKind, GYRO_Z_CHANNEL};
use crate::storage::{read_data_file, SessionManifest, OFFENCES_FILE, VEHICLE_FILE};

pub const MEAN_SPEED: &str = "mean_speed";
pub const MEAN_RPM: &str = "mean_rpm";
pub const MEAN_FUEL: &str = "mean_fuel";
pub const MEAN_ANGULAR_SPEED: &str = "mean_angular_speed";
pub const STD_ANGULAR_SPEED: &str = "std_angular_speed";
pub const OFFENCE_RATE: &str = "offence_rate";
pub const LOW_ATTENTION: &str = "low_attention_periods";
pub const ZERO_CROSSINGS_PER_S: &str = "zero_crossings_per_s";
pub const HRV_MEAN_RR: &str = "hrv_mean_rr";
pub const HRV_SDNN: &str = "hrv_sdnn";
pub const HRV_RMSSD: &str = "hrv_rmssd";
pub const EMG_MEAN: &str = "emg_mean_abs";
pub const GSR_MEAN: &str = "gsr_mean";

/// `offence_rate.<kind>`.
pub fn offence_rate_var(kind: OffenceKind) -> String {
    format!("{OFFENCE_RATE}.{kind}")
}

/// Named scalar variables of one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionVariables {
    pub session_id: String,
    pub participant_id: String,
    pub scenario: ScenarioClass,
    pub physical_state: PhysicalState,
    pub values: BTreeMap<String, f64>,
}

impl SessionVariables {
    pub fn new(session_id: &str, meta: &SessionMeta) -> Self {
        let mut v = SessionVariables {
            session_id: session_id.to_string(),
            participant_id: meta.participant_id.clone(),
            scenario: meta.scenario_class,
            physical_state: meta.physical_state,
            values: BTreeMap::new(),
        };
        v.add_meta(meta);
        v
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.values.insert(name.to_string(), value);
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }

    fn add_meta(&mut self, meta: &SessionMeta) {
        let v = &mut self.values;
        v.insert("license_years".into(), meta.license_years);
        v.insert("game_experience".into(), meta.game_experience as f64);
        v.insert("racing_experience".into(), meta.racing_experience as f64);
        v.insert("age".into(), meta.age);
        for (name, score) in [("kss", meta.kss), ("sss", meta.sss), ("ess", meta.ess)] {
            if let Some(s) = score {
                v.insert(name.into(), s as f64);
            }
        }
    }

    /// Vehicle means and per-kind offence rates.
    pub fn add_drive(&mut self, records: &[VehicleRecord], events: &[OffenceEvent]) {
        if records.is_empty() {
            return;
        }
        let n = records.len() as f64;
        let mean = |f: fn(&VehicleRecord) -> f64| records.iter().map(f).sum::<f64>() / n;
        self.values.insert(MEAN_SPEED.into(), mean(|r| r.speed_kmh));
        self.values.insert(MEAN_RPM.into(), mean(|r| r.rpm));
        self.values.insert(MEAN_FUEL.into(), mean(|r| r.fuel_lph));
        self.values.insert(OFFENCE_RATE.into(), events.len() as f64 / n);
        for kind in OffenceKind::ALL {
            let count = events.iter().filter(|e| e.kind == kind).count();
            self.values.insert(offence_rate_var(kind), count as f64 / n);
        }
    }

    pub fn add_steering(&mut self, f: &SteeringFeatures) {
        self.values.insert(MEAN_ANGULAR_SPEED.into(), f.mean_abs_speed);
        self.values.insert(STD_ANGULAR_SPEED.into(), f.std_signed_speed);
        self.values.insert(ZERO_CROSSINGS_PER_S.into(), f.zero_crossings_per_s);
        self.values.insert(LOW_ATTENTION.into(), f.low_attention_periods as f64);
    }
}

fn read_optional(dir: &Path, name: &str) -> Result<Option<String>> {
    match fs::read_to_string(dir.join(name)) {
        Ok(s) => Ok(Some(s)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Derive every variable the files in a session folder support.
pub fn load_session(dir: &Path) -> Result<SessionVariables> {
    let manifest = SessionManifest::load(dir)?;
    let mut vars = SessionVariables::new(&manifest.session_id, &manifest.meta);
    if let Some(text) = read_optional(dir, VEHICLE_FILE)? {
        let records = parse_vehicle_csv(&text)?;
        let events = match read_optional(dir, OFFENCES_FILE)? {
            Some(t) => parse_offences_csv(&t)?,
            None => Vec::new(),
        };
        vars.add_drive(&records, &events);
    }
    let data = |kind: SensorKind| {
        let path = dir.join(kind.data_file_name());
        path.is_file().then(|| read_data_file(&path)).transpose()
    };
    if let Some((header, samples)) = data(SensorKind::Dof9)? {
        let stream: Vec<(u64, f64)> = samples.iter().map(|s| (s.t_ms, s.channels[GYRO_Z_CHANNEL])).collect();
        vars.add_steering(&steering_features(&stream, header.fs)?);
    }
    if let Some((header, samples)) = data(SensorKind::Ecg)? {
        match detect_r_peaks(&samples, header.fs).and_then(|p| rr_intervals(&p)).and_then(|rr| hrv_metrics(&rr)) {
            Ok(h) => {
                vars.values.insert(HRV_MEAN_RR.into(), h.mean_rr_ms);
                vars.values.insert(HRV_SDNN.into(), h.sdnn_ms);
                vars.values.insert(HRV_RMSSD.into(), h.rmssd_ms);
            }
            Err(e) => warn!("{}: no HRV: {e}", dir.display()),
        }
    }
    if let Some((_, samples)) = data(SensorKind::Emg)? {
        let s = physio_summary(SensorKind::Emg, &samples)?;
        if !s.empty {
            vars.values.insert(EMG_MEAN.into(), s.mean_abs);
        }
    }
    if let Some((_, samples)) = data(SensorKind::Gsr)? {
        let s = physio_summary(SensorKind::Gsr, &samples)?;
        if !s.empty {
            vars.values.insert(GSR_MEAN.into(), s.session_mean);
        }
    }
    Ok(vars)
}

/// Number of flagged 5 s windows.
pub fn low_attention_summary(windows: &[AttentionWindow]) -> usize {
    windows.iter().filter(|w| w.low_attention).count()
}

/// The five driving variables against every offence kind.
pub fn default_pairs() -> Vec<(String, String)> {
    let drivers = [MEAN_ANGULAR_SPEED, STD_ANGULAR_SPEED, MEAN_SPEED, MEAN_RPM, MEAN_FUEL];
    drivers
        .iter()
        .flat_map(|d| OffenceKind::ALL.iter().map(move |k| (d.to_string(), offence_rate_var(*k))))
        .collect()
}

/// Total offence rate against driver experience and sleepiness scores.
pub fn experience_pairs() -> Vec<(String, String)> {
    ["license_years", "game_experience", "racing_experience", "kss", "sss", "ess"]
        .iter()
        .map(|v| (OFFENCE_RATE.to_string(), v.to_string()))
        .collect()
}

/// `x:y`.
pub fn parse_pair(s: &str) -> Result<(String, String)> {
    match s.split_once(':') {
        Some((x, y)) if !x.is_empty() && !y.is_empty() && !y.contains(':') => Ok((x.to_string(), y.to_string())),
        _ => Err(invalid(format!("expected `x:y`, got `{s}`"))),
    }
}

/// One participant's mean physiology per cell; `None` where no session
/// falls in the cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateRow {
    pub participant_id: String,
    pub hrv_rested_urban: Option<f64>,
    pub hrv_rested_interurban: Option<f64>,
    pub hrv_tired_urban: Option<f64>,
    pub hrv_tired_interurban: Option<f64>,
    pub emg_rested: Option<f64>,
    pub emg_tired: Option<f64>,
    pub gsr_rested: Option<f64>,
    pub gsr_tired: Option<f64>,
}

pub const STATE_COLUMNS: [&str; 9] = [
    "participant_id",
    "hrv_rested_urban",
    "hrv_rested_interurban",
    "hrv_tired_urban",
    "hrv_tired_interurban",
    "emg_rested_mv",
    "emg_tired_mv",
    "gsr_rested_kohm",
    "gsr_tired_kohm",
];

fn cell_mean<'a>(sessions: impl Iterator<Item = &'a SessionVariables>, var: &str) -> Option<f64> {
    let vals: Vec<f64> = sessions.filter_map(|s| s.get(var)).collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Rested versus tired means per participant: HRV split by scenario, EMG
/// and GSR by state only.
pub fn state_comparison(sessions: &[SessionVariables]) -> Vec<StateRow> {
    let mut by_participant: BTreeMap<&str, Vec<&SessionVariables>> = BTreeMap::new();
    for s in sessions {
        by_participant.entry(&s.participant_id).or_default().push(s);
    }
    by_participant
        .into_iter()
        .map(|(pid, list)| {
            let cell = |state: PhysicalState, scenario: Option<ScenarioClass>, var: &str| {
                cell_mean(
                    list.iter().copied().filter(|s| s.physical_state == state && scenario.is_none_or(|c| s.scenario == c)),
                    var,
                )
            };
            use PhysicalState::{Rested, Tired};
            use ScenarioClass::{Interurban, Urban};
            StateRow {
                participant_id: pid.to_string(),
                hrv_rested_urban: cell(Rested, Some(Urban), HRV_MEAN_RR),
                hrv_rested_interurban: cell(Rested, Some(Interurban), HRV_MEAN_RR),
                hrv_tired_urban: cell(Tired, Some(Urban), HRV_MEAN_RR),
                hrv_tired_interurban: cell(Tired, Some(Interurban), HRV_MEAN_RR),
                emg_rested: cell(Rested, None, EMG_MEAN),
                emg_tired: cell(Tired, None, EMG_MEAN),
                gsr_rested: cell(Rested, None, GSR_MEAN),
                gsr_tired: cell(Tired, None, GSR_MEAN),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub alpha: f64,
    pub normality: Vec<NormalityResult>,
    pub correlations: Vec<CorrelationResult>,
    pub state_comparison: Vec<StateRow>,
    /// `(session_id, flagged windows)` for sessions with steering data.
    pub low_attention_counts: Vec<(String, usize)>,
    pub notes: Vec<String>,
}

impl StudyReport {
    /// Correlations that are significant and passed the normality gate.
    pub fn significant_only(&self) -> Vec<&CorrelationResult> {
        self.correlations.iter().filter(|c| c.reportable()).collect()
    }

    pub fn find(&self, scenario: ScenarioClass, x: &str, y: &str) -> Option<&CorrelationResult> {
        self.correlations.iter().find(|c| c.scenario == Some(scenario) && c.x_name == x && c.y_name == y)
    }
}

fn compare_sessions(a: &SessionVariables, b: &SessionVariables) -> Ordering {
    (&a.session_id, &a.participant_id, a.scenario, a.physical_state)
        .cmp(&(&b.session_id, &b.participant_id, b.scenario, b.physical_state))
        .then_with(|| {
            a.values
                .iter()
                .zip(&b.values)
                .map(|((ka, va), (kb, vb))| ka.cmp(kb).then(va.total_cmp(vb)))
                .find(|o| o.is_ne())
                .unwrap_or(a.values.len().cmp(&b.values.len()))
        })
}

/// Normality per variable and Pearson per pair, urban and interurban
/// sessions separately. Results do not depend on session order.
pub fn correlation_study(sessions: &[SessionVariables], pairs: &[(String, String)], alpha: f64) -> Result<StudyReport> {
    if sessions.is_empty() {
        return Err(Error::InsufficientData { required: 3, available: 0 });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha {alpha} outside (0, 1)")));
    }
    let mut sorted: Vec<&SessionVariables> = sessions.iter().collect();
    sorted.sort_by(|a, b| compare_sessions(a, b));

    let mut variables: Vec<&str> = Vec::new();
    for (x, y) in pairs {
        for v in [x, y] {
            if !variables.contains(&v.as_str()) {
                variables.push(v);
            }
        }
    }
    for s in &sorted {
        for v in &variables {
            if s.get(v).is_none() {
                return Err(Error::MissingVariable { session: s.session_id.clone(), variable: v.to_string() });
            }
        }
    }

    let mut report = StudyReport {
        alpha,
        normality: Vec::new(),
        correlations: Vec::new(),
        state_comparison: state_comparison(sessions),
        low_attention_counts: sorted
            .iter()
            .filter_map(|s| s.get(LOW_ATTENTION).map(|c| (s.session_id.clone(), c as usize)))
            .collect(),
        notes: Vec::new(),
    };

    for scenario in [ScenarioClass::Urban, ScenarioClass::Interurban] {
        let group: Vec<&SessionVariables> = sorted.iter().copied().filter(|s| s.scenario == scenario).collect();
        if group.is_empty() {
            continue;
        }
        if group.len() < 3 {
            report.notes.push(format!("{}: only {} sessions, skipped", scenario.as_str(), group.len()));
            continue;
        }
        let column = |v: &str| -> Vec<f64> { group.iter().map(|s| s.get(v).expect("checked above")).collect() };
        let mut normal: BTreeMap<&str, bool> = BTreeMap::new();
        for v in &variables {
            match shapiro_wilk_named(v, &column(v)) {
                Ok(mut r) => {
                    r.scenario = Some(scenario);
                    normal.insert(v, r.normal_at_alpha);
                    report.normality.push(r);
                }
                Err(Error::DegenerateInput(_)) => {
                    report.notes.push(format!("{}: {v} is constant, excluded", scenario.as_str()));
                }
                Err(e) => return Err(e),
            }
        }
        for (x, y) in pairs {
            let (Some(nx), Some(ny)) = (normal.get(x.as_str()), normal.get(y.as_str())) else {
                continue;
            };
            let mut r = correlate(x, &column(x), y, &column(y), alpha)?;
            r.scenario = Some(scenario);
            r.gate_passed = *nx || *ny;
            report.correlations.push(r);
        }
    }
    Ok(report)
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

fn scenario_name(s: Option<ScenarioClass>) -> &'static str {
    s.map_or("all", ScenarioClass::as_str)
}

pub const NORMALITY_HEADER: &str = "scenario,variable,n,w,p,normal_at_alpha";
pub const CORRELATIONS_HEADER: &str = "scenario,x,y,n,rho,p,significant,gate_passed";

pub fn normality_csv(report: &StudyReport) -> String {
    let mut out = format!("{NORMALITY_HEADER}\n");
    for r in &report.normality {
        let _ = writeln!(out, "{},{},{},{},{},{}", scenario_name(r.scenario), r.variable, r.n, r.w, r.p, r.normal_at_alpha);
    }
    out
}

pub fn correlations_csv(report: &StudyReport) -> String {
    let mut out = format!("{CORRELATIONS_HEADER}\n");
    for c in &report.correlations {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            scenario_name(c.scenario),
            c.x_name,
            c.y_name,
            c.n,
            c.rho,
            c.p,
            c.significant,
            c.gate_passed
        );
    }
    out
}

pub fn state_comparison_csv(rows: &[StateRow]) -> String {
    let mut out = STATE_COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        let cells = [
            r.hrv_rested_urban,
            r.hrv_rested_interurban,
            r.hrv_tired_urban,
            r.hrv_tired_interurban,
            r.emg_rested,
            r.emg_tired,
            r.gsr_rested,
            r.gsr_tired,
        ];
        let _ = writeln!(out, "{},{}", r.participant_id, cells.map(opt).join(","));
    }
    out
}

pub fn summary_text(report: &StudyReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "alpha = {}", report.alpha);
    let _ = writeln!(out, "variables tested for normality: {}", report.normality.len());
    let failing: Vec<String> = report
        .normality
        .iter()
        .filter(|r| !r.normal_at_alpha)
        .map(|r| format!("{} ({})", r.variable, scenario_name(r.scenario)))
        .collect();
    if !failing.is_empty() {
        let _ = writeln!(out, "not normal: {}", failing.join(", "));
    }
    let _ = writeln!(out, "pairs tested: {}", report.correlations.len());
    let sig = report.significant_only();
    let _ = writeln!(out, "significant correlations: {}", sig.len());
    for c in sig {
        let _ = writeln!(out, "  [{}] {} ~ {}: rho = {:.3}, p = {:.4}, n = {}", scenario_name(c.scenario), c.x_name, c.y_name, c.rho, c.p, c.n);
    }
    let gated = report.correlations.iter().filter(|c| c.significant && !c.gate_passed).count();
    if gated > 0 {
        let _ = writeln!(out, "significant but gate-failed (neither variable normal): {gated}");
    }
    if !report.low_attention_counts.is_empty() {
        let total: usize = report.low_attention_counts.iter().map(|(_, c)| c).sum();
        let _ = writeln!(out, "low-attention periods: {total} over {} sessions", report.low_attention_counts.len());
    }
    for n in &report.notes {
        let _ = writeln!(out, "note: {n}");
    }
    out
}

/// Write `normality.csv`, `correlations.csv`, `state_comparison.csv`,
/// `low_attention.csv` and `summary.txt` into `dir`.
pub fn write_report(report: &StudyReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("normality.csv"), normality_csv(report))?;
    fs::write(dir.join("correlations.csv"), correlations_csv(report))?;
    fs::write(dir.join("state_comparison.csv"), state_comparison_csv(&report.state_comparison))?;
    let mut la = String::from("session_id,low_attention_periods\n");
    for (id, c) in &report.low_attention_counts {
        let _ = writeln!(la, "{id},{c}");
    }
    fs::write(dir.join("low_attention.csv"), la)?;
    fs::write(dir.join("summary.txt"), summary_text(report))?;
    Ok(())
}
