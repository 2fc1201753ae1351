//! The real binary over loopback: registry, monitor, and several drives,
//! then features, analysis, and replay on what they stored.

use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output};
use std::thread;
use std::time::{Duration, Instant};

const BIN: &str = env!("CARGO_BIN_EXE_driver-telemetry");

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

fn cli(data: &Path) -> Command {
    let mut c = Command::new(BIN);
    c.arg("--data-dir").arg(data).arg("--fixed-clock").arg("--log-level").arg("warn");
    c
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("spawn")
}

struct Desk {
    registry: Child,
    monitor: Child,
    registry_addr: String,
}

impl Drop for Desk {
    fn drop(&mut self) {
        let _ = self.monitor.kill();
        let _ = self.registry.kill();
    }
}

fn start_desk(data: &Path, sessions: u32) -> Desk {
    let (rp, mp) = (free_port(), free_port());
    let registry = cli(data).args(["registry", "--bind", "127.0.0.1", "--port"]).arg(rp.to_string()).spawn().unwrap();
    let registry_addr = format!("127.0.0.1:{rp}");
    let deadline = Instant::now() + Duration::from_secs(10);
    while std::net::TcpStream::connect(&registry_addr).is_err() {
        assert!(Instant::now() < deadline, "registry never came up");
        thread::sleep(Duration::from_millis(20));
    }
    let monitor = cli(data)
        .args(["monitor", "--user", "u01", "--bind", "127.0.0.1", "--advertise", "127.0.0.1", "--seed", "4"])
        .args(["--port", &mp.to_string(), "--registry", &registry_addr, "--max-sessions", &sessions.to_string()])
        .spawn()
        .unwrap();
    Desk { registry, monitor, registry_addr }
}

/// Retry while the monitor is still registering.
fn drive(data: &Path, desk: &Desk, extra: &[&str]) -> Output {
    let deadline = Instant::now() + Duration::from_secs(10);
    loop {
        let out = run(cli(data).args(["drive", "--registry", &desk.registry_addr]).args(extra));
        if out.status.code() != Some(3) || Instant::now() > deadline {
            return out;
        }
        thread::sleep(Duration::from_millis(50));
    }
}

fn wait_exit(child: &mut Child) -> i32 {
    let deadline = Instant::now() + Duration::from_secs(20);
    loop {
        if let Some(status) = child.try_wait().unwrap() {
            return status.code().unwrap_or(-1);
        }
        assert!(Instant::now() < deadline, "process did not exit");
        thread::sleep(Duration::from_millis(20));
    }
}

fn session_dirs(root: &Path) -> Vec<PathBuf> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(root).unwrap().map(|e| e.unwrap().path()).filter(|p| p.is_dir()).collect();
    dirs.sort();
    dirs
}

fn drive_three(data: &Path) -> Vec<PathBuf> {
    let mut desk = start_desk(data, 3);
    for (i, state) in ["rested", "tired", "rested"].iter().enumerate() {
        let id = format!("s{i}");
        let seed = (10 + i).to_string();
        let out = drive(
            data,
            &desk,
            &["--user", "u01", "--duration", "20", "--seed", &seed, "--session-id", &id, "--state", state, "--intensity", "0.2"],
        );
        assert_eq!(out.status.code(), Some(0), "drive {i}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(wait_exit(&mut desk.monitor), 0);
    session_dirs(&data.join("u01"))
}

#[test]
fn desk_sessions_then_offline_tools() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path();
    let sessions = drive_three(data);
    assert_eq!(sessions.len(), 3);
    for dir in &sessions {
        for name in ["manifest.json", "ecg.csv", "emg.csv", "gsr.csv", "9dof.csv", "vehicle.csv", "offences.csv"] {
            assert!(dir.join(name).is_file(), "{} missing {name}", dir.display());
        }
    }
    // the monitor keeps its own copy of each session
    assert_eq!(session_dirs(&data.join("monitor").join("u01")).len(), 3);

    let plots = sessions[0].join("plot");
    let out = run(cli(data).arg("features").arg(&sessions[0]).arg("--emit-plot-data"));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(sessions[0].join("features.csv")).unwrap();
    assert!(table.lines().next().unwrap().contains("hrv_mean_rr_ms"));
    for name in ["gyro_windows.csv", "ecg_beats.csv", "emg_blocks.csv", "gsr_blocks.csv"] {
        assert!(plots.join(name).is_file(), "{name} missing");
    }

    let report = data.join("report");
    let pattern = format!("{}/u01/*", data.display());
    let out = run(cli(data).args(["analyze", &pattern, "--pairs", "mean_speed:offence_rate"]).arg("--out").arg(&report));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(cli(data).args(["analyze", &pattern, "--state-comparison"]).arg("--out").arg(&report));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let corr = fs::read_to_string(report.join("correlations.csv")).unwrap();
    assert!(corr.lines().nth(1).unwrap().contains("mean_speed,offence_rate"), "{corr}");
    let states = fs::read_to_string(report.join("state_comparison.csv")).unwrap();
    assert!(states.contains("rested") && states.contains("tired"), "{states}");
    assert!(report.join("normality.csv").is_file() && report.join("summary.txt").is_file());

    let out = run(cli(data).arg("replay").arg(&sessions[1]));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let out = run(cli(data).arg("replay").arg(sessions[1].join("gsr.csv")).args(["--head", "3"]));
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("t_ms,gsr_kohm"));

    // tampering is caught
    fs::write(sessions[2].join("gsr.csv"), "tampered\n").unwrap();
    let out = run(cli(data).arg("replay").arg(&sessions[2]));
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn fixed_clock_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (da, db) = (drive_three(a.path()), drive_three(b.path()));
    for (x, y) in da.iter().zip(&db) {
        assert_eq!(x.file_name(), y.file_name());
        for entry in fs::read_dir(x).unwrap() {
            let name = entry.unwrap().file_name();
            assert_eq!(fs::read(x.join(&name)).unwrap(), fs::read(y.join(&name)).unwrap(), "{name:?} differs");
        }
    }
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path();
    assert_eq!(run(cli(data).arg("frobnicate")).status.code(), Some(64));
    assert_eq!(run(cli(data).args(["monitor", "--user", "u", "--port", "80"])).status.code(), Some(64));
    assert_eq!(run(cli(data).args(["monitor", "--user", "u", "--sensors", "ekg@128"])).status.code(), Some(64));
    let nowhere = format!("127.0.0.1:{}", free_port());
    assert_eq!(run(cli(data).args(["drive", "--registry", &nowhere])).status.code(), Some(3));
    let empty = format!("{}/nothing/*", data.display());
    assert_eq!(run(cli(data).args(["analyze", &empty])).status.code(), Some(65));
    let held = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = held.local_addr().unwrap().port().to_string();
    assert_eq!(run(cli(data).args(["registry", "--bind", "127.0.0.1", "--port", &port])).status.code(), Some(2));
}
