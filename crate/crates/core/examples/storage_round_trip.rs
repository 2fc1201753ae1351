//! Write a session folder, close it, and read everything back against the
//! manifest checksums.

use driver_telemetry::harness::SessionMeta;
use driver_telemetry::sim::{generate, replay, SourceConfig};
use driver_telemetry::storage::{open_session, Clock, SessionManifest};
use driver_telemetry::{SamplingRate, SensorKind};

fn main() -> driver_telemetry::Result<()> {
    let data = tempfile::tempdir()?;
    let mut session = open_session(data.path(), "u03", SessionMeta::new("u03"), &Clock::fixed_default())?;
    let cfg = SourceConfig::new(SensorKind::Gsr, SamplingRate::HZ_10_2, 30.0, 9);
    let (samples, _) = generate(&cfg, None)?;
    session.open_data_file(cfg.kind, cfg.fs)?;
    for s in &samples {
        session.append(cfg.kind, s)?;
    }
    let dir = session.dir().to_path_buf();
    session.close()?;

    println!("{}", std::fs::read_to_string(dir.join("manifest.json"))?);
    let back = replay(&dir.join(SensorKind::Gsr.data_file_name()))?;
    println!("replayed {} of {} samples, identical: {}", back.len(), samples.len(), back == samples);
    let stale = SessionManifest::load(&dir)?.verify(&dir)?;
    println!("checksum mismatches: {stale:?}");
    Ok(())
}
