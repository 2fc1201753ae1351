//! A correlation study over simulated sessions: normality gate, Pearson
//! correlations per scenario, and the rested/tired comparison.

use driver_telemetry::analysis::study::{offence_rate_var, summary_text, MEAN_SPEED, OFFENCE_RATE};
use driver_telemetry::analysis::{correlation_study, SessionVariables};
use driver_telemetry::harness::{run_drive_with, DriveProfile, OffenceKind, PhysicalState, ScenarioClass, SessionMeta};

fn main() -> driver_telemetry::Result<()> {
    let mut sessions = Vec::new();
    for i in 0..40u64 {
        let mut meta = SessionMeta::new(&format!("p{i:02}"));
        meta.scenario_class = if i % 2 == 0 { ScenarioClass::Urban } else { ScenarioClass::Interurban };
        meta.physical_state = if i % 4 < 2 { PhysicalState::Rested } else { PhysicalState::Tired };
        // faster drivers commit more offences
        let push = (i % 10) as f64;
        let profile = DriveProfile { cruise_speed_kmh: Some(meta.scenario_class.speed_limit_kmh() * (0.5 + 0.04 * push)), ..Default::default() };
        let (records, events) = run_drive_with(&meta, 1200, i, 0.01 + 0.004 * push, &profile)?;
        let mut v = SessionVariables::new(&format!("s{i:02}"), &meta);
        v.add_drive(&records, &events);
        sessions.push(v);
    }
    let mut pairs = vec![(MEAN_SPEED.to_string(), OFFENCE_RATE.to_string())];
    pairs.extend([OffenceKind::OverSpeed, OffenceKind::LeavingTheRoad].map(|k| (MEAN_SPEED.to_string(), offence_rate_var(k))));
    let report = correlation_study(&sessions, &pairs, 0.05)?;
    print!("{}", summary_text(&report));
    Ok(())
}
