//! Acceptance gate: ten system-level criteria, one PASS/FAIL line each.
//!
//! Runs with a custom harness so the verdict lines always reach stdout.

use std::collections::BTreeSet;
use std::net::{Ipv4Addr, SocketAddr, TcpListener};
use std::path::Path;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use num::{BigInt, BigRational, Signed, ToPrimitive, Zero};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use driver_telemetry::analysis::study::{correlation_study, offence_rate_var, SessionVariables, MEAN_SPEED};
use driver_telemetry::analysis::{pearson, pearson_p, shapiro_wilk};
use driver_telemetry::gyro::{attention_windows, interval_summary, SteeringState};
use driver_telemetry::harness::{drive_client, run_drive_with, DriveProfile, DriveRequest, OffenceKind, SessionMeta};
use driver_telemetry::monitor::{default_sensors, run_monitor, Monitor, MonitorConfig, RunOptions};
use driver_telemetry::physio::{detect_r_peaks, hrv_metrics, rr_intervals};
use driver_telemetry::protocol::registry::{lookup_remote, spawn_server, Registry, GAME_NAME};
use driver_telemetry::protocol::session::{monitor_handle, Action, Command, Input, Phase, SessionState};
use driver_telemetry::protocol::transfer::{receive_files, send_files};
use driver_telemetry::signal::{Sample, SampleBatch, SamplingRate, SensorKind, GYRO_Z_CHANNEL};
use driver_telemetry::sim::{generate, EcgParams, ManeuverScript, Segment, SourceConfig, SourceParams};
use driver_telemetry::storage::{open_session_with_id, read_data_file, Clock, PauseInterval, SessionManifest};

type Verdict = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

// ---------------------------------------------------------------------------
// shared desk setup: registry + monitor on loopback, one session

struct Desk {
    registry: SocketAddr,
    monitor: thread::JoinHandle<driver_telemetry::Result<u64>>,
}

fn start_desk(monitor_dir: &Path) -> Desk {
    let registry = spawn_server("127.0.0.1:0", Arc::new(Registry::new())).expect("registry");
    let mut config = MonitorConfig::new("u01", monitor_dir);
    config.sensors = default_sensors();
    config.clock = Clock::fixed_default();
    config.seed = 7;
    let monitor = Monitor::new(config).expect("monitor config");
    let listener = TcpListener::bind("127.0.0.1:0").expect("monitor port");
    let options = RunOptions { registry: Some(registry), advertise: Some(Ipv4Addr::LOCALHOST), max_sessions: Some(1) };
    let handle = thread::spawn(move || run_monitor(monitor, listener, &options));
    let deadline = Instant::now() + Duration::from_secs(5);
    while lookup_remote(registry, GAME_NAME).is_err() && Instant::now() < deadline {
        thread::sleep(Duration::from_millis(5));
    }
    Desk { registry, monitor: handle }
}

fn samples_of(dir: &Path, kind: SensorKind) -> Result<Vec<Sample>, String> {
    read_data_file(&dir.join(kind.data_file_name())).map(|(_, s)| s).map_err(|e| format!("{kind}: {e}"))
}

// ---------------------------------------------------------------------------

fn c1_final_test_at_desk_scale() -> Verdict {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let started = Instant::now();
    let desk = start_desk(&tmp.path().join("monitor"));
    let mut req = DriveRequest::new("u01", &tmp.path().join("client"), 60, 7);
    req.clock = Clock::fixed_default();
    let outcome = drive_client(desk.registry, &req).map_err(|e| format!("drive: {e}"))?;
    let served = desk.monitor.join().map_err(|_| "monitor panicked".to_string())?.map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    ensure!(served == 1, "monitor served {served} sessions");
    ensure!(!outcome.incomplete, "client session incomplete");

    let mut counts = Vec::new();
    for spec in default_sensors() {
        let n = samples_of(&outcome.dir, spec.kind)?.len() as f64;
        let expect = spec.fs.hertz() * 60.0;
        ensure!((n - expect).abs() <= 1.0, "{}: {n} samples, expected {expect} ± 1", spec.kind);
        counts.push(format!("{}={n}", spec.kind));
    }

    let monitor_root = tmp.path().join("monitor").join("u01");
    let monitor_dir = std::fs::read_dir(&monitor_root)
        .map_err(|e| e.to_string())?
        .next()
        .ok_or("no monitor session")?
        .map_err(|e| e.to_string())?
        .path();
    let monitor_manifest = SessionManifest::load(&monitor_dir).map_err(|e| e.to_string())?;
    ensure!(monitor_manifest.verify(&monitor_dir).map_err(|e| e.to_string())?.is_empty(), "monitor checksums stale");
    ensure!(outcome.manifest.verify(&outcome.dir).map_err(|e| e.to_string())?.is_empty(), "client checksums stale");
    for f in &monitor_manifest.files {
        let theirs = outcome.manifest.file(&f.name).ok_or(format!("{} not transferred", f.name))?;
        ensure!(theirs.crc32 == f.crc32 && theirs.bytes == f.bytes, "{} differs after transfer", f.name);
    }
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(format!("{}; {} files CRC-identical; {:.2} s wall", counts.join(" "), monitor_manifest.files.len(), elapsed.as_secs_f64()))
}

// ---------------------------------------------------------------------------

fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

/// Script angle at `t` in exact arithmetic.
fn exact_angle(script: &ManeuverScript, t: &BigRational) -> BigRational {
    let mut start = BigRational::zero();
    let mut angle = BigRational::zero();
    for s in &script.segments {
        let d = rational(s.duration_s());
        let delta = rational(s.delta_deg());
        if *t < &start + &d {
            let into = if *t > start { t - &start } else { BigRational::zero() };
            return angle + delta * into / d;
        }
        start += d;
        angle += delta;
    }
    angle
}

fn random_script(rng: &mut ChaCha8Rng) -> ManeuverScript {
    let n = rng.random_range(1..=12);
    let segments = (0..n)
        .map(|_| {
            // dyadic values keep the exact arithmetic small
            let duration_s = rng.random_range(20..=320) as f64 / 64.0;
            if rng.random_bool(0.25) {
                Segment::Hold { duration_s }
            } else {
                Segment::Turn { delta_deg: rng.random_range(-3600..=3600) as f64 / 4.0, duration_s }
            }
        })
        .collect();
    ManeuverScript::new(segments).expect("valid")
}

fn c2_position_integration_fidelity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let rates = [SamplingRate::HZ_10_2, SamplingRate::HZ_50_2, SamplingRate::HZ_128];
    let full_turn = BigRational::from_integer(BigInt::from(360));
    let mut worst = 0.0f64;
    let mut total_turns = 0u64;
    for case in 0..100 {
        let script = random_script(&mut rng);
        let fs = rates[case % 3];
        let cfg = SourceConfig::new(SensorKind::Dof9, fs, script.total_duration_s() + 1.0, case as u64);
        let (samples, _) = generate(&cfg, Some(&script)).map_err(|e| e.to_string())?;

        let mut state = SteeringState::new(fs);
        let mut wrapped = BigRational::zero();
        let mut prev = BigRational::zero();
        let mut planted = 0u64;
        let period = BigRational::new(BigInt::from(1000), BigInt::from(fs.millihertz()));
        for (k, s) in samples.iter().enumerate() {
            state.push(s.channels[GYRO_Z_CHANNEL]).map_err(|e| format!("case {case}: {e}"))?;
            let t_end = &period * BigInt::from(k as u64 + 1);
            let analytic = exact_angle(&script, &t_end);
            let err = (state.unwrapped_deg - analytic.to_f64().unwrap()).abs();
            worst = worst.max(err);
            ensure!(err <= 1e-9, "case {case} sample {k}: |error| {err:e}");
            let raw = &wrapped + (&analytic - &prev);
            prev = analytic;
            if raw.abs() > full_turn {
                let sign = if raw.is_positive() { 1 } else { -1 };
                wrapped = raw - &full_turn * BigInt::from(sign);
                planted += 1;
            } else {
                wrapped = raw;
            }
        }
        ensure!(state.turns == planted, "case {case}: {} turns counted, {planted} planted", state.turns);
        total_turns += planted;
    }
    Ok(format!("100 scripts, max |error| {worst:.2e} deg, {total_turns} planted turns matched"))
}

// ---------------------------------------------------------------------------

fn random_speeds(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    const SPECIAL: [f64; 11] = [0.0, -0.0, 2.5, -2.5, 5.0, -5.0, 7.5, -7.5, 10.0, -10.0, 2.4999999999999996];
    (0..len)
        .map(|_| match rng.random_range(0..10) {
            0 | 1 => SPECIAL[rng.random_range(0..SPECIAL.len())],
            2 => rng.random_range(-1.0..1.0),
            _ => rng.random_range(-30.0..30.0),
        })
        .collect()
}

fn brute_crossings(x: &[f64]) -> u64 {
    let signs: Vec<bool> = x.iter().filter(|&&v| v != 0.0).map(|&v| v > 0.0).collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count() as u64
}

fn brute_max_updates(x: &[f64]) -> Vec<u64> {
    let mut best = 0.0;
    let mut out = Vec::new();
    for (i, v) in x.iter().enumerate() {
        if v.abs() > best {
            best = v.abs();
            out.push(i as u64);
        }
    }
    out
}

fn brute_bin(v: f64) -> usize {
    let a = v.abs();
    if a >= 10.0 {
        0
    } else if a >= 7.5 {
        1
    } else if a >= 5.0 {
        2
    } else if a >= 2.5 {
        3
    } else {
        4
    }
}

fn c3_feature_oracles() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut total = 0usize;
    for case in 0..1000 {
        let len = rng.random_range(0..=10_000);
        let x = random_speeds(&mut rng, len);
        total += len;
        let mut state = SteeringState::new(SamplingRate::HZ_10_2);
        for &v in &x {
            state.push(v).map_err(|e| format!("case {case}: {e}"))?;
        }
        ensure!(state.zero_crossings == brute_crossings(&x), "case {case}: crossings");
        ensure!(state.max_update_events == brute_max_updates(&x), "case {case}: max-abs updates");
        let max = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        ensure!(state.max_abs_speed == max, "case {case}: max-abs value");

        let report = interval_summary(&x);
        ensure!(report == state.interval_report(), "case {case}: streaming and batch bin reports differ");
        for b in 0..5 {
            let members: Vec<f64> = x.iter().filter(|v| brute_bin(**v) == b).map(|v| v.abs()).collect();
            ensure!(report.counts[b] == members.len() as u64, "case {case} bin {b}: count");
            if members.is_empty() {
                continue;
            }
            let mean = members.iter().sum::<f64>() / members.len() as f64;
            let var = members.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / members.len() as f64;
            ensure!((report.mean[b] - mean).abs() <= 1e-9, "case {case} bin {b}: mean");
            ensure!((report.std[b] - var.sqrt()).abs() <= 1e-9, "case {case} bin {b}: std");
            let pct = 100.0 * members.len() as f64 / len as f64;
            ensure!((report.pct[b] - pct).abs() <= 1e-9, "case {case} bin {b}: pct");
        }
    }
    Ok(format!("1000 sequences, {total} samples, all counts exact"))
}

// ---------------------------------------------------------------------------

fn gyro_stream(script: &ManeuverScript, seconds: f64) -> Result<Vec<(u64, f64)>, String> {
    let cfg = SourceConfig::new(SensorKind::Dof9, SamplingRate::HZ_10_2, seconds, 0);
    let (samples, _) = generate(&cfg, Some(script)).map_err(|e| e.to_string())?;
    Ok(samples.iter().map(|s| (s.t_ms, s.channels[GYRO_Z_CHANNEL])).collect())
}

fn c4_low_attention_classifier() -> Verdict {
    let fs = SamplingRate::HZ_10_2;
    // small corrections ending rightward, 15 s with the wheel still, then one
    // hard rightward correction; a hold keeps the last sign so no crossing
    let drowsy = ManeuverScript::default().turn(-2.0, 1.0).turn(2.0, 1.0).hold(15.0).turn(45.0, 1.0).hold(3.0);
    let windows = attention_windows(&gyro_stream(&drowsy, 20.0)?, fs);
    let flagged = windows.iter().filter(|w| w.low_attention).count();
    ensure!(flagged >= 1, "drowsy script: no window flagged");

    let mut alert = ManeuverScript::default();
    for _ in 0..30 {
        alert = alert.turn(4.0, 1.0).turn(-4.0, 1.0);
    }
    let stream = gyro_stream(&alert, 60.0)?;
    let alert_windows = attention_windows(&stream, fs);
    let alert_flagged = alert_windows.iter().filter(|w| w.low_attention).count();
    ensure!(alert_flagged == 0, "alert script: {alert_flagged} windows flagged");

    ensure!(stream.len() == 612, "60 s at 10.2 Hz gave {} samples", stream.len());
    ensure!(alert_windows.len() == 12, "{} windows over 60 s", alert_windows.len());
    for w in &alert_windows {
        ensure!(w.span_ms == 5_000 && w.sample_count == 51, "window {}: {} ms, {} samples", w.index, w.span_ms, w.sample_count);
    }
    Ok(format!("drowsy: {flagged} of {} flagged; alert: 0 of 12; every window 5 s / 51 samples", windows.len()))
}

// ---------------------------------------------------------------------------

fn match_beats(truth: &[f64], found: &[f64], tol_ms: f64) -> usize {
    let mut used = vec![false; found.len()];
    let mut matched = 0;
    for &t in truth {
        let best = found
            .iter()
            .enumerate()
            .filter(|(j, f)| !used[*j] && (**f - t).abs() <= tol_ms)
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()));
        if let Some((j, _)) = best {
            used[j] = true;
            matched += 1;
        }
    }
    matched
}

fn c5_hrv() -> Verdict {
    let cfg = SourceConfig::new(SensorKind::Ecg, SamplingRate::HZ_128, 60.0, 1);
    let (ecg, _) = generate(&cfg, None).map_err(|e| e.to_string())?;
    let peaks = detect_r_peaks(&ecg, cfg.fs).map_err(|e| e.to_string())?;
    let hrv = hrv_metrics(&rr_intervals(&peaks).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    ensure!(peaks.len() == 75, "{} beats detected", peaks.len());
    ensure!((hrv.mean_rr_ms - 800.0).abs() <= 2.0, "mean RR {}", hrv.mean_rr_ms);
    ensure!(hrv.rmssd_ms <= 5.0, "rmssd {}", hrv.rmssd_ms);

    let (mut truth_total, mut found_total, mut hit_total) = (0, 0, 0);
    let mut worst_recall = 1.0f64;
    for seed in 0..50 {
        let params = SourceParams::Ecg(EcgParams { rr_jitter_ms: 40.0, ..EcgParams::default() });
        let cfg = SourceConfig::new(SensorKind::Ecg, SamplingRate::HZ_128, 60.0, seed).with_params(params);
        let (ecg, truth) = generate(&cfg, None).map_err(|e| e.to_string())?;
        let found = detect_r_peaks(&ecg, cfg.fs).map_err(|e| e.to_string())?;
        let hits = match_beats(&truth.beats_ms, &found, 40.0);
        ensure!(hits == found.len(), "seed {seed}: {} of {} detections are not beats", found.len() - hits, found.len());
        worst_recall = worst_recall.min(hits as f64 / truth.beats_ms.len() as f64);
        truth_total += truth.beats_ms.len();
        found_total += found.len();
        hit_total += hits;
    }
    let recall = hit_total as f64 / truth_total as f64;
    ensure!(recall >= 0.99, "recall {recall}");
    ensure!(hit_total == found_total, "precision below 1");
    Ok(format!(
        "75 beats, mean RR {:.3} ms, rmssd {:.3} ms; 50 seeds recall {:.4} (worst {:.4}), precision 1",
        hrv.mean_rr_ms, hrv.rmssd_ms, recall, worst_recall
    ))
}

// ---------------------------------------------------------------------------

fn c6_statistics_calibration() -> Verdict {
    let w3 = shapiro_wilk(&[1.0, 2.0, 3.0]).map_err(|e| e.to_string())?.w;
    ensure!(w3 == 1.0, "W({{1,2,3}}) = {w3}");

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut rejected = 0;
    for _ in 0..1000 {
        let x: Vec<f64> = (0..25).map(|_| StandardNormal.sample(&mut rng)).collect();
        if shapiro_wilk(&x).map_err(|e| e.to_string())?.p <= 0.05 {
            rejected += 1;
        }
    }
    let rate = rejected as f64 / 1000.0;
    ensure!((0.03..=0.07).contains(&rate), "rejection rate {rate}");

    for _ in 0..200 {
        let n = rng.random_range(3..200);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-100.0..100.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-100.0..100.0)).collect();
        let (a, b) = (rng.random_range(0.001..1000.0), rng.random_range(-1e4..1e4));
        let up: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let down: Vec<f64> = x.iter().map(|v| -a * v + b).collect();
        let p = |u: &[f64], v: &[f64]| pearson(u, v).map_err(|e| e.to_string());
        ensure!((p(&x, &up)? - 1.0).abs() <= 1e-12, "pearson(x, ax+b) != 1");
        ensure!((p(&x, &down)? + 1.0).abs() <= 1e-12, "pearson(x, -ax+b) != -1");
        let r = p(&x, &y)?;
        ensure!((p(&up, &y)? - r).abs() <= 1e-9, "not affine invariant");
        ensure!((p(&down, &y)? + r).abs() <= 1e-9, "sign does not flip");
    }
    let p54 = pearson_p(0.54, 30).map_err(|e| e.to_string())?;
    ensure!(p54 < 0.05, "pearson_p(0.54, 30) = {p54}");
    Ok(format!("W(1,2,3) = 1; rejection rate {rate:.3}; linear/affine checks hold; pearson_p(0.54, 30) = {p54:.5}"))
}

// ---------------------------------------------------------------------------

fn c7_planted_correlation() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let kind = OffenceKind::NoTurnLightInTurn;
    let rate_var = offence_rate_var(kind);
    let planted = 0.6f64;
    let mut sessions = Vec::with_capacity(200);
    for i in 0..200u64 {
        let z1: f64 = StandardNormal.sample(&mut rng);
        let e: f64 = StandardNormal.sample(&mut rng);
        let z2 = planted * z1 + (1.0 - planted * planted).sqrt() * e;
        let meta = SessionMeta::new(&format!("p{i:03}"));
        let profile = DriveProfile { cruise_speed_kmh: Some(40.0 + 5.0 * z1), ..DriveProfile::single_kind(kind) };
        let intensity = (0.1 + 0.03 * z2).max(0.0);
        let (records, events) = run_drive_with(&meta, 3600, 1000 + i, intensity, &profile).map_err(|e| e.to_string())?;
        let mut v = SessionVariables::new(&format!("s{i:03}"), &meta);
        v.add_drive(&records, &events);
        sessions.push(v);
    }
    let pairs = vec![(MEAN_SPEED.to_string(), rate_var.clone())];
    let report = correlation_study(&sessions, &pairs, 0.05).map_err(|e| e.to_string())?;
    let c = report.correlations.first().ok_or("no correlation computed")?;
    ensure!(c.n == 200, "n = {}", c.n);
    ensure!(c.reportable(), "not reported significant (p = {}, gate {})", c.p, c.gate_passed);
    ensure!((c.rho - planted).abs() <= 0.1, "rho_hat = {}", c.rho);

    // null studies: 20 independent noise pairs at n = 30, repeated 100 times
    let names: Vec<(String, String)> = (0..20).map(|j| (format!("x{j}"), format!("y{j}"))).collect();
    let mut hits = vec![0u32; 20];
    for study in 0..100 {
        let null: Vec<SessionVariables> = (0..30)
            .map(|i| {
                let mut v = SessionVariables::new(&format!("n{study}-{i:02}"), &SessionMeta::new("p"));
                for (x, y) in &names {
                    v = v.with(x, StandardNormal.sample(&mut rng)).with(y, StandardNormal.sample(&mut rng));
                }
                v
            })
            .collect();
        let r = correlation_study(&null, &names, 0.05).map_err(|e| e.to_string())?;
        for (j, c) in r.correlations.iter().enumerate() {
            if c.significant {
                hits[j] += 1;
            }
        }
    }
    let mean_fp = hits.iter().sum::<u32>() as f64 / (20.0 * 100.0);
    ensure!(mean_fp <= 0.08, "mean false-positive rate {mean_fp}");
    Ok(format!("rho_hat {:.3} (p {:.1e}); null false-positive rate {mean_fp:.3} per pair", c.rho, c.p))
}

// ---------------------------------------------------------------------------

fn random_input(rng: &mut ChaCha8Rng, allowed: std::net::IpAddr, other: std::net::IpAddr) -> Input {
    match rng.random_range(0..10) {
        0..=4 => Input::Command(Command::ALL[rng.random_range(0..4)]),
        5 => Input::Connection(allowed),
        6 => Input::Connection(other),
        7 | 8 => Input::TransferComplete,
        _ => Input::TransportClose,
    }
}

fn random_manifest(rng: &mut ChaCha8Rng, max_log2: f64) -> Vec<(String, Vec<u8>)> {
    let files = rng.random_range(0..=3);
    (0..files)
        .map(|i| {
            let size = (2f64.powf(rng.random_range(0.0..=max_log2)) as usize).min(1 << 20);
            let mut bytes = vec![0u8; size];
            rng.fill_bytes(&mut bytes);
            (format!("f{i}.bin"), bytes)
        })
        .collect()
}

fn round_trip(manifest: &[(String, Vec<u8>)]) -> Result<usize, String> {
    let mut wire = Vec::new();
    send_files(&mut wire, manifest).map_err(|e| e.to_string())?;
    let back = receive_files(&mut &wire[..]).map_err(|e| e.to_string())?;
    ensure!(back == manifest, "transfer not byte-exact");
    Ok(wire.len())
}

fn c8_protocol_fuzz() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let allowed = std::net::IpAddr::V4(Ipv4Addr::new(192, 168, 1, 10));
    let other = std::net::IpAddr::V4(Ipv4Addr::new(192, 168, 1, 66));
    let (mut transfers, mut bytes_moved, mut streaming_hits) = (0, 0usize, 0);
    for trace in 0..10_000 {
        let mut state = SessionState::new(allowed);
        let mut accepted = false;
        let mut stopped = false;
        for _ in 0..rng.random_range(1..60) {
            let input = random_input(&mut rng, allowed, other);
            let before = state.phase;
            let (next, actions) = monitor_handle(state, input.clone());
            if matches!(before, Phase::Listening | Phase::Closed) && next.phase == Phase::Streaming {
                ensure!(input == Input::Connection(allowed), "trace {trace}: reached STREAMING via {input:?}");
                accepted = true;
                stopped = false;
                streaming_hits += 1;
            }
            if matches!(next.phase, Phase::Streaming | Phase::Paused) {
                ensure!(accepted, "trace {trace}: streaming without an accepted connection");
            }
            for a in &actions {
                match a {
                    Action::StopAllSensors => stopped = true,
                    Action::BeginFileSend => {
                        ensure!(stopped, "trace {trace}: file send before StopAllSensors");
                        ensure!(next.phase == Phase::Transferring, "trace {trace}: file send outside TRANSFERRING");
                        bytes_moved += round_trip(&random_manifest(&mut rng, 12.0)).map_err(|e| format!("trace {trace}: {e}"))?;
                        transfers += 1;
                    }
                    _ => {}
                }
            }
            if next.phase == Phase::Closed {
                accepted = false;
            }
            state = next;
        }
    }
    ensure!(transfers > 0 && streaming_hits > 0, "fuzz never exercised transfers");
    // large files, up to and including 1 MiB
    for i in 0..40 {
        let mut manifest = random_manifest(&mut rng, 20.0);
        if i % 4 == 0 {
            let mut full = vec![0u8; 1 << 20];
            rng.fill_bytes(&mut full);
            manifest.push(("full.bin".into(), full));
        }
        bytes_moved += round_trip(&manifest).map_err(|e| format!("large transfer {i}: {e}"))?;
        transfers += 1;
    }
    Ok(format!("10000 traces, {streaming_hits} sessions, {transfers} transfers ({:.1} MiB) byte-exact", bytes_moved as f64 / 1048576.0))
}

// ---------------------------------------------------------------------------

fn c9_pause_soundness() -> Verdict {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let desk = start_desk(&tmp.path().join("monitor"));
    let mut req = DriveRequest::new("u01", &tmp.path().join("client"), 40, 9);
    req.pause = Some((15, 10));
    let outcome = drive_client(desk.registry, &req).map_err(|e| format!("drive: {e}"))?;
    desk.monitor.join().map_err(|_| "monitor panicked".to_string())?.map_err(|e| e.to_string())?;
    let interval = PauseInterval { start_ms: 15_000, end_ms: 25_000 };
    ensure!(outcome.manifest.pause_intervals == vec![interval], "manifest pauses {:?}", outcome.manifest.pause_intervals);
    let mut kept = Vec::new();
    for spec in default_sensors() {
        let samples = samples_of(&outcome.dir, spec.kind)?;
        let inside = samples.iter().filter(|s| interval.contains(s.t_ms)).count();
        ensure!(inside == 0, "{}: {inside} samples inside the pause", spec.kind);
        ensure!(samples.iter().any(|s| s.t_ms >= interval.end_ms), "{}: nothing recorded after resume", spec.kind);
        let expect = spec.fs.hertz() * 30.0;
        ensure!((samples.len() as f64 - expect).abs() <= 2.0, "{}: {} samples for 30 s of recording", spec.kind, samples.len());
        kept.push(format!("{}={}", spec.kind, samples.len()));
    }
    Ok(format!("pause 15000..25000 ms recorded; 0 samples inside; {}", kept.join(" ")))
}

// ---------------------------------------------------------------------------

fn random_finite(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let v = match rng.random_range(0..4) {
            0 => f64::from_bits(rng.next_u64()),
            1 => rng.random_range(-1e3..1e3),
            2 => [0.0, -0.0, f64::MIN_POSITIVE, f64::MAX, f64::MIN, 5e-324][rng.random_range(0..6)],
            _ => StandardNormal.sample(rng),
        };
        if v.is_finite() {
            return v;
        }
    }
}

fn c10_storage_round_trip() -> Verdict {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let clock = Clock::fixed_default();
    let mut session = open_session_with_id(tmp.path(), "u01", "roundtrip", SessionMeta::new("u01"), &clock)
        .map_err(|e| e.to_string())?;
    let mut written = Vec::new();
    for (i, kind) in SensorKind::ALL.into_iter().enumerate() {
        let fs = [SamplingRate::HZ_128, SamplingRate::HZ_128, SamplingRate::HZ_10_2, SamplingRate::HZ_50_2][i];
        session.open_data_file(kind, fs).map_err(|e| e.to_string())?;
        let mut t = 0u64;
        let samples: Vec<Sample> = (0..10_000)
            .map(|_| {
                t += rng.random_range(1..200);
                Sample::new(t, (0..kind.channel_count()).map(|_| random_finite(&mut rng)).collect())
            })
            .collect();
        let batch = SampleBatch::new(kind, samples.clone()).map_err(|e| e.to_string())?;
        session.append_samples(&batch).map_err(|e| e.to_string())?;
        written.push((kind, samples));
    }
    let closed = session.close().map_err(|e| e.to_string())?.clone();
    let dir = tmp.path().join("u01").join("roundtrip");
    for (kind, samples) in &written {
        let back = samples_of(&dir, *kind)?;
        ensure!(back.len() == samples.len(), "{kind}: {} rows back", back.len());
        for (a, b) in samples.iter().zip(&back) {
            let same = a.t_ms == b.t_ms
                && a.channels.len() == b.channels.len()
                && a.channels.iter().zip(&b.channels).all(|(x, y)| x.to_bits() == y.to_bits());
            ensure!(same, "{kind}: row at {} ms differs", a.t_ms);
        }
    }
    let loaded = SessionManifest::load(&dir).map_err(|e| e.to_string())?;
    ensure!(loaded == closed, "manifest on disk differs from close()");
    let bad = loaded.verify(&dir).map_err(|e| e.to_string())?;
    ensure!(bad.is_empty(), "checksum mismatch: {bad:?}");
    let names: BTreeSet<&str> = loaded.files.iter().map(|f| f.name.as_str()).collect();
    ensure!(names.len() == 4, "manifest lists {names:?}");
    Ok("4 sensor kinds x 10000 samples bit-identical; manifest checksums valid".to_string())
}

// ---------------------------------------------------------------------------

fn main() {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("desk-scale four-sensor session over the full protocol", c1_final_test_at_desk_scale),
        ("integrated wheel position and turn counts", c2_position_integration_fidelity),
        ("crossing, max-abs and interval oracles", c3_feature_oracles),
        ("low-attention classifier", c4_low_attention_classifier),
        ("HRV on synthetic ECG", c5_hrv),
        ("statistics calibration", c6_statistics_calibration),
        ("planted-correlation recovery", c7_planted_correlation),
        ("protocol safety fuzzing", c8_protocol_fuzz),
        ("pause soundness", c9_pause_soundness),
        ("storage round trip", c10_storage_round_trip),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = format!("{}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| *f == id || name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let started = Instant::now();
        let verdict = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = started.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("PASS [{id:>2}] {name}: {detail} ({secs:.1}s)"),
            Err(why) => {
                failed += 1;
                println!("FAIL [{id:>2}] {name}: {why} ({secs:.1}s)");
            }
        }
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
