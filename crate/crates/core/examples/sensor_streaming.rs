//! Generate the four wearable streams and merge them on one clock, the way
//! the monitor delivers them to storage.

use driver_telemetry::sim::{schedule_delivery, ManeuverScript, SourceConfig};
use driver_telemetry::storage::format_row;
use driver_telemetry::{SamplingRate, SensorKind};

fn main() -> driver_telemetry::Result<()> {
    let secs = 2.0;
    let sources = vec![
        (SourceConfig::new(SensorKind::Ecg, SamplingRate::HZ_128, secs, 1), None),
        (SourceConfig::new(SensorKind::Emg, SamplingRate::HZ_128, secs, 2).with_noise(0.02), None),
        (SourceConfig::new(SensorKind::Gsr, SamplingRate::HZ_10_2, secs, 3), None),
        (SourceConfig::new(SensorKind::Dof9, SamplingRate::HZ_10_2, secs, 4), Some(ManeuverScript::default_weave())),
    ];
    let merged = schedule_delivery(&sources)?;
    for kind in SensorKind::ALL {
        let n = merged.iter().filter(|(k, _)| *k == kind).count();
        println!("{kind:>4}: {n} samples, columns t_ms,{}", kind.channel_names().join(","));
    }
    println!("\nfirst rows on the shared clock:");
    for (kind, sample) in merged.iter().take(8) {
        println!("{kind:>4} {}", format_row(sample));
    }
    Ok(())
}
