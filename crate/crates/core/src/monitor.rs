//! The monitor endpoint: owns the simulated sensors, records them into a
//! session folder while the simulator drives, and ships the files back on
//! `stopall`.

use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::net::{IpAddr, Ipv4Addr, SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use log::{debug, info, warn};

use crate::error::{invalid, Error, Result};
use crate::harness::SessionMeta;
use crate::protocol::registry::{register_remote, HostData, ENTRY_TTL_MS, GAME_NAME};
use crate::protocol::session::{Action, CommandLine, Input, SessionState};
use crate::protocol::transfer::send_file_paths;
use crate::signal::{SamplingRate, SensorKind};
use crate::sim::{ManeuverScript, SourceConfig, SourceStream};
use crate::storage::{self, Clock, PauseInterval, Session, SessionManifest};

/// One `kind@rate` entry of the monitor's sensor list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorSpec {
    pub kind: SensorKind,
    pub fs: SamplingRate,
}

impl FromStr for SensorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rate) = s.split_once('@').ok_or_else(|| invalid(format!("expected kind@hz, got `{s}`")))?;
        let hz: f64 = rate.parse().map_err(|_| invalid(format!("bad rate in `{s}`")))?;
        Ok(SensorSpec { kind: kind.parse()?, fs: SamplingRate::from_hz(hz)? })
    }
}

impl fmt::Display for SensorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.kind.token(), self.fs.hertz())
    }
}

/// Parse `ecg@128,emg@128,...`; each kind may appear once.
pub fn parse_sensor_list(s: &str) -> Result<Vec<SensorSpec>> {
    let specs: Vec<SensorSpec> = s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(str::parse).collect::<Result<_>>()?;
    if specs.is_empty() {
        return Err(invalid("no sensors given"));
    }
    for (i, a) in specs.iter().enumerate() {
        if specs[..i].iter().any(|b| b.kind == a.kind) {
            return Err(invalid(format!("sensor {} listed twice", a.kind)));
        }
    }
    Ok(specs)
}

/// The four-sensor desk setup: ECG and EMG at 128 Hz, GSR and 9DOF at 10.2 Hz.
pub fn default_sensors() -> Vec<SensorSpec> {
    vec![
        SensorSpec { kind: SensorKind::Ecg, fs: SamplingRate::HZ_128 },
        SensorSpec { kind: SensorKind::Emg, fs: SamplingRate::HZ_128 },
        SensorSpec { kind: SensorKind::Gsr, fs: SamplingRate::HZ_10_2 },
        SensorSpec { kind: SensorKind::Dof9, fs: SamplingRate::HZ_10_2 },
    ]
}

#[derive(Debug, Clone)]
pub struct MonitorConfig {
    pub user: String,
    pub sensors: Vec<SensorSpec>,
    /// Only this simulator address may open a session.
    pub allowed_address: IpAddr,
    /// Monitor-side session folders go under `<data_dir>/<user>/`.
    pub data_dir: PathBuf,
    pub clock: Clock,
    pub seed: u64,
    pub noise_amplitude: f64,
    pub script: ManeuverScript,
    pub meta: SessionMeta,
}

impl MonitorConfig {
    pub fn new(user: &str, data_dir: impl Into<PathBuf>) -> Self {
        MonitorConfig {
            user: user.to_string(),
            sensors: default_sensors(),
            allowed_address: IpAddr::V4(Ipv4Addr::LOCALHOST),
            data_dir: data_dir.into(),
            clock: Clock::System,
            seed: 0,
            noise_amplitude: 0.0,
            script: ManeuverScript::default_weave(),
            meta: SessionMeta::new(user),
        }
    }
}

#[derive(Debug, Clone)]
pub enum ServeOutcome {
    Rejected,
    Completed { dir: PathBuf, manifest: SessionManifest },
    /// The transport closed before the transfer finished.
    Aborted { dir: PathBuf },
}

/// Sensors plus the folder they record into.
struct Recorder {
    session: Session,
    streams: Vec<SourceStream>,
    clock_ms: u64,
    paused_since: Option<u64>,
    started: Instant,
}

impl Recorder {
    /// Run every source up to (not including) `target_ms`. Samples produced
    /// while paused are generated and discarded.
    fn advance_to(&mut self, target_ms: u64) -> Result<()> {
        let target = target_ms.max(self.clock_ms);
        for stream in &mut self.streams {
            while stream.peek_t_ms() < target {
                let sample = stream.next().expect("sources are unbounded");
                if self.paused_since.is_none() {
                    self.session.append(stream.kind(), &sample)?;
                }
            }
        }
        self.clock_ms = target;
        Ok(())
    }

    fn end_pause(&mut self) {
        if let Some(start_ms) = self.paused_since.take() {
            self.session.record_pause(PauseInterval { start_ms, end_ms: self.clock_ms });
        }
    }
}

pub struct Monitor {
    config: MonitorConfig,
    sessions_opened: u64,
}

impl Monitor {
    pub fn new(config: MonitorConfig) -> Result<Self> {
        storage::validate_id(&config.user)?;
        if config.sensors.is_empty() {
            return Err(invalid("monitor needs at least one sensor"));
        }
        config.meta.validate()?;
        Ok(Monitor { config, sessions_opened: 0 })
    }

    pub fn config(&self) -> &MonitorConfig {
        &self.config
    }

    fn start_recording(&mut self) -> Result<Recorder> {
        let c = &self.config;
        let mut id = c.clock.session_id();
        if self.sessions_opened > 0 {
            id = format!("{id}-{}", self.sessions_opened);
        }
        self.sessions_opened += 1;
        let mut session = storage::open_session_with_id(&c.data_dir, &c.user, &id, c.meta.clone(), &c.clock)?;
        session.set_allowed_address(&c.allowed_address.to_string())?;
        let mut streams = Vec::with_capacity(c.sensors.len());
        for (i, spec) in c.sensors.iter().enumerate() {
            session.open_data_file(spec.kind, spec.fs)?;
            let config = SourceConfig::new(spec.kind, spec.fs, f64::MAX, c.seed.wrapping_add(i as u64))
                .with_noise(c.noise_amplitude);
            let script = (spec.kind == SensorKind::Dof9).then(|| c.script.clone());
            streams.push(SourceStream::new(&config, script)?.looping());
        }
        info!("session {id} recording {} sensors", streams.len());
        Ok(Recorder { session, streams, clock_ms: 0, paused_since: None, started: Instant::now() })
    }

    /// Run one session over an established transport from `peer`.
    pub fn serve_connection<R: BufRead, W: Write>(&mut self, peer: IpAddr, mut reader: R, mut writer: W) -> Result<ServeOutcome> {
        let mut state = SessionState::new(self.config.allowed_address);
        let actions = state.handle(Input::Connection(peer));
        if actions.contains(&Action::RejectConnection) {
            warn!("rejecting connection from {peer}");
            let _ = writeln!(writer, "ERR connection from {peer} not allowed").and_then(|_| writer.flush());
            return Ok(ServeOutcome::Rejected);
        }
        let mut rec = self.start_recording()?;

        let mut line = String::new();
        loop {
            line.clear();
            let n = reader.read_line(&mut line)?;
            if n == 0 {
                let dir = rec.session.dir().to_path_buf();
                for action in state.handle(Input::TransportClose) {
                    if action == Action::CloseFiles {
                        rec.end_pause();
                        rec.session.mark_incomplete();
                        rec.session.add_note("transport closed before the transfer finished");
                        rec.session.close()?;
                    }
                }
                warn!("{peer} closed the transport early");
                return Ok(ServeOutcome::Aborted { dir });
            }
            let text = line.trim_end_matches(['\n', '\r']);
            let cmd: CommandLine = match text.parse() {
                Ok(c) => c,
                Err(e) => {
                    warn!("{peer}: {e}");
                    continue;
                }
            };
            let at = cmd.at_ms.unwrap_or_else(|| rec.started.elapsed().as_millis() as u64);
            rec.advance_to(at)?;
            debug!("{peer}: {cmd} at {} ms", rec.clock_ms);
            for action in state.handle(Input::Command(cmd.command)) {
                match action {
                    Action::SuspendSampling => rec.paused_since = Some(rec.clock_ms),
                    Action::ResumeSampling => rec.end_pause(),
                    Action::StopAllSensors => rec.end_pause(),
                    Action::CloseFiles => {
                        rec.session.close()?;
                    }
                    Action::BeginFileSend => {
                        let files = rec.session.file_paths();
                        let bytes = send_file_paths(&mut writer, &files)?;
                        info!("sent {} files ({bytes} bytes) to {peer}", files.len());
                        if state.handle(Input::TransferComplete).contains(&Action::CloseTransport) {
                            let manifest = rec.session.manifest().clone();
                            return Ok(ServeOutcome::Completed { dir: rec.session.dir().to_path_buf(), manifest });
                        }
                    }
                    Action::ProtocolError(msg) => warn!("{peer}: {msg}"),
                    other => debug!("ignoring {other:?}"),
                }
            }
        }
    }
}

/// Where the monitor advertises itself and how long it runs.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub registry: Option<SocketAddr>,
    /// Address published in the registry; defaults to the listener's.
    pub advertise: Option<Ipv4Addr>,
    /// Stop after this many completed or aborted sessions.
    pub max_sessions: Option<u64>,
}

fn advertise_address(listener: &TcpListener, options: &RunOptions) -> Result<HostData> {
    let local = listener.local_addr()?;
    let ip = match (options.advertise, local.ip()) {
        (Some(ip), _) => ip,
        (None, IpAddr::V4(ip)) if !ip.is_unspecified() => ip,
        _ => Ipv4Addr::LOCALHOST,
    };
    HostData::new(ip, local.port())
}

/// Register under the shared game name, then refresh the entry well inside
/// its TTL until `stop` is set.
pub fn advertise(registry: SocketAddr, host: HostData, stop: Arc<AtomicBool>) -> Result<()> {
    register_remote(registry, GAME_NAME, host).map_err(|e| Error::DiscoveryFailure(format!("registry {registry}: {e}")))?;
    info!("registered {GAME_NAME} -> {host} at {registry}");
    thread::spawn(move || {
        let period = Duration::from_millis(ENTRY_TTL_MS / 3);
        let mut last = Instant::now();
        while !stop.load(Ordering::Relaxed) {
            thread::sleep(Duration::from_millis(200));
            if last.elapsed() >= period {
                if let Err(e) = register_remote(registry, GAME_NAME, host) {
                    warn!("re-registration failed: {e}");
                }
                last = Instant::now();
            }
        }
    });
    Ok(())
}

/// Accept simulators on `listener`, one session at a time. Connections that
/// arrive while a session is active are turned away.
pub fn run_monitor(monitor: Monitor, listener: TcpListener, options: &RunOptions) -> Result<u64> {
    let stop = Arc::new(AtomicBool::new(false));
    if let Some(registry) = options.registry {
        advertise(registry, advertise_address(&listener, options)?, Arc::clone(&stop))?;
    }
    info!("monitor listening on {}", listener.local_addr()?);
    listener.set_nonblocking(true)?;
    let monitor = Arc::new(Mutex::new(monitor));
    let busy = Arc::new(AtomicBool::new(false));
    let (done_tx, done_rx) = mpsc::channel::<()>();
    let mut finished = 0u64;

    let result = loop {
        while done_rx.try_recv().is_ok() {
            finished += 1;
        }
        if options.max_sessions.is_some_and(|m| finished >= m) {
            break Ok(finished);
        }
        let (stream, peer) = match listener.accept() {
            Ok(conn) => conn,
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                thread::sleep(Duration::from_millis(5));
                continue;
            }
            Err(e) => break Err(e.into()),
        };
        if let Err(e) = stream.set_nonblocking(false) {
            warn!("{peer}: {e}");
            continue;
        }
        if busy.swap(true, Ordering::AcqRel) {
            warn!("rejecting {peer}: a session is already active");
            let mut s = stream;
            let _ = writeln!(s, "ERR monitor busy");
            continue;
        }
        let (monitor, busy, done_tx) = (Arc::clone(&monitor), Arc::clone(&busy), done_tx.clone());
        thread::spawn(move || {
            let outcome = serve_tcp(&monitor, stream, peer);
            match outcome {
                Ok(ServeOutcome::Rejected) => {}
                Ok(o) => {
                    debug!("{peer}: {o:?}");
                    let _ = done_tx.send(());
                }
                Err(e) => {
                    warn!("{peer}: session failed: {e}");
                    let _ = done_tx.send(());
                }
            }
            busy.store(false, Ordering::Release);
        });
    };
    stop.store(true, Ordering::Relaxed);
    result
}

fn serve_tcp(monitor: &Mutex<Monitor>, stream: TcpStream, peer: SocketAddr) -> Result<ServeOutcome> {
    let reader = BufReader::new(stream.try_clone()?);
    let mut m = monitor.lock().map_err(|_| Error::Protocol("monitor state poisoned".into()))?;
    let ip = match peer.ip() {
        IpAddr::V6(v6) => v6.to_ipv4_mapped().map_or(IpAddr::V6(v6), IpAddr::V4),
        v4 => v4,
    };
    m.serve_connection(ip, reader, std::io::BufWriter::new(stream))
}
