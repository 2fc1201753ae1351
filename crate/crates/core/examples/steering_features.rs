//! Steering-wheel features from a scripted gyroscope stream: position,
//! turns, zero-crossings, speed intervals, and low-attention windows.

use driver_telemetry::gyro::{steering_features, SPEED_BIN_LABELS};
use driver_telemetry::signal::GYRO_Z_CHANNEL;
use driver_telemetry::sim::{generate, ManeuverScript, SourceConfig};
use driver_telemetry::{SamplingRate, SensorKind};

fn main() -> driver_telemetry::Result<()> {
    let fs = SamplingRate::HZ_10_2;
    // a weave, a long still stretch, then a sharp correction
    let script = ManeuverScript::default_weave().hold(12.0).turn(400.0, 1.5).hold(2.0);
    let cfg = SourceConfig::new(SensorKind::Dof9, fs, script.total_duration_s(), 11);
    let (samples, truth) = generate(&cfg, Some(&script))?;
    let stream: Vec<(u64, f64)> = samples.iter().map(|s| (s.t_ms, s.channels[GYRO_Z_CHANNEL])).collect();

    let f = steering_features(&stream, fs)?;
    println!("{} samples over {:.1} s", f.samples, f.duration_s);
    println!("position {:.2} deg, unwrapped {:.2} deg, turns {} (scripted {})", f.final_position_deg, f.unwrapped_position_deg, f.turns, truth.turns);
    println!("zero-crossings {} ({:.3}/s), max |omega| {:.1} deg/s", f.zero_crossings, f.zero_crossings_per_s, f.max_abs_speed);
    for (i, label) in SPEED_BIN_LABELS.iter().enumerate() {
        println!("  {label:>8}: {:5.1}%  mean {:6.2}  std {:6.2}", f.bins.pct[i], f.bins.mean[i], f.bins.std[i]);
    }
    for w in &f.windows {
        let mark = if w.low_attention { "  <- low attention" } else { "" };
        println!("window {:2} @{:6} ms: {} crossings, max updated {}{mark}", w.index, w.start_ms, w.crossings_in_window, w.max_updated_in_window);
    }
    Ok(())
}
