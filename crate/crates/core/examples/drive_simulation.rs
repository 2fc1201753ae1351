//! The simulator's vehicle log and offence log for one drive.

use driver_telemetry::harness::{offence_rate, offence_rate_of, run_drive, vehicle_csv, OffenceKind, ScenarioClass, SessionMeta};

fn main() -> driver_telemetry::Result<()> {
    let mut meta = SessionMeta::new("p12");
    meta.scenario_class = ScenarioClass::Interurban;
    let duration = 600;
    let (records, events) = run_drive(&meta, duration, 5, 0.05)?;

    print!("{}", vehicle_csv(&records[..5]));
    let mean_speed = records.iter().map(|r| r.speed_kmh).sum::<f64>() / records.len() as f64;
    println!("... {} records, mean speed {mean_speed:.1} km/h (limit {})", records.len(), meta.scenario_class.speed_limit_kmh());
    println!("{} offences, {:.4}/s overall", events.len(), offence_rate(&events, duration)?);
    for kind in OffenceKind::ALL {
        let rate = offence_rate_of(kind, &events, duration)?;
        if rate > 0.0 {
            println!("  {kind:<34} {rate:.4}/s");
        }
    }
    Ok(())
}
