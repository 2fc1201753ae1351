//! Full desk session on loopback: registry, monitor advertising itself,
//! and a simulator that discovers it, drives, and pulls the sensor files.

use std::net::{Ipv4Addr, TcpListener};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use driver_telemetry::harness::{drive_client, DriveRequest};
use driver_telemetry::monitor::{run_monitor, Monitor, MonitorConfig, RunOptions};
use driver_telemetry::protocol::registry::{lookup_remote, spawn_server, Registry, GAME_NAME};

fn main() -> driver_telemetry::Result<()> {
    let data = tempfile::tempdir()?;
    let registry = spawn_server("127.0.0.1:0", Arc::new(Registry::new()))?;
    println!("registry on {registry}");

    let monitor = Monitor::new(MonitorConfig::new("u07", data.path().join("monitor")))?;
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let options = RunOptions { registry: Some(registry), advertise: Some(Ipv4Addr::LOCALHOST), max_sessions: Some(1) };
    let handle = thread::spawn(move || run_monitor(monitor, listener, &options));
    while lookup_remote(registry, GAME_NAME).is_err() {
        thread::sleep(Duration::from_millis(10));
    }
    println!("{GAME_NAME} -> {}", lookup_remote(registry, GAME_NAME)?);

    let mut req = DriveRequest::new("u07", &data.path().join("client"), 30, 3);
    req.pause = Some((10, 5));
    let outcome = drive_client(registry, &req)?;
    handle.join().expect("monitor thread")?;

    println!("session {} stored in {}", outcome.manifest.session_id, outcome.dir.display());
    for f in &outcome.manifest.files {
        println!("  {:<14} {:>8} bytes  crc32 {:08x}", f.name, f.bytes, f.crc32);
    }
    println!("pauses {:?}, incomplete {}", outcome.manifest.pause_intervals, outcome.incomplete);
    Ok(())
}
