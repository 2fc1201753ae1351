//! Command-line front end: `registry`, `monitor`, `drive`, `analyze`,
//! `features`, `replay`.

use std::ffi::OsString;
use std::io::Write;
use std::net::{IpAddr, Ipv4Addr, SocketAddr, TcpListener};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use log::{error, info};

use crate::analysis::study::{self, correlation_study, load_session, parse_pair, state_comparison, write_report};
use crate::error::{Error, Result};
use crate::features::{session_features, write_plot_data};
use crate::harness::{drive_client, DriveProfile, DriveRequest, GearShift, PhysicalState, ScenarioClass, SessionMeta};
use crate::monitor::{parse_sensor_list, run_monitor, Monitor, MonitorConfig, RunOptions};
use crate::protocol::registry::{check_port, serve, Registry, DEFAULT_MONITOR_PORT, DEFAULT_REGISTRY_PORT};
use crate::sim::{replay_with_header, ManeuverScript};
use crate::storage::{Clock, SessionManifest, FEATURES_FILE, MANIFEST_FILE};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_PORT: i32 = 2;
pub const EXIT_CONNECTIVITY: i32 = 3;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_EMPTY_INPUT: i32 = 65;

pub const DATA_DIR_ENV: &str = "DRIVER_TELEMETRY_DATA";

#[derive(Debug, Parser)]
#[command(name = "driver-telemetry", version, about = "Wearable-sensor and driving-simulator telemetry toolkit")]
pub struct Cli {
    /// Root folder for session data.
    #[arg(long, global = true, env = DATA_DIR_ENV, default_value = "./data")]
    pub data_dir: PathBuf,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "info")]
    pub log_level: log::LevelFilter,
    /// Freeze wall-clock-derived ids and timestamps for reproducible output.
    #[arg(long, global = true)]
    pub fixed_clock: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the discovery registry.
    Registry(RegistryArgs),
    /// Run the sensor monitor endpoint.
    Monitor(MonitorArgs),
    /// Run one simulated drive against a registered monitor.
    Drive(DriveArgs),
    /// Normality and correlation study over session folders.
    Analyze(AnalyzeArgs),
    /// Compute the feature table of one session.
    Features(FeaturesArgs),
    /// Print a data file, or verify a session folder.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct RegistryArgs {
    #[arg(long, default_value_t = DEFAULT_REGISTRY_PORT)]
    pub port: u16,
    #[arg(long, default_value = "0.0.0.0")]
    pub bind: IpAddr,
}

#[derive(Debug, Args)]
pub struct MonitorArgs {
    #[arg(long)]
    pub user: String,
    /// Comma-separated `kind@hz` list.
    #[arg(long, default_value = "ecg@128,emg@128,gsr@10.2,9dof@10.2")]
    pub sensors: String,
    #[arg(long, default_value_t = DEFAULT_MONITOR_PORT)]
    pub port: u16,
    #[arg(long, default_value = "0.0.0.0")]
    pub bind: IpAddr,
    /// Registry to advertise on.
    #[arg(long, default_value_t = SocketAddr::from((Ipv4Addr::LOCALHOST, DEFAULT_REGISTRY_PORT)))]
    pub registry: SocketAddr,
    /// Address published in the registry.
    #[arg(long)]
    pub advertise: Option<Ipv4Addr>,
    /// The simulator address allowed to open a session.
    #[arg(long, default_value = "127.0.0.1")]
    pub allowed_address: IpAddr,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Additive Gaussian noise amplitude on every channel.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Steering maneuver script for the 9DOF source.
    #[arg(long)]
    pub script: Option<PathBuf>,
    #[command(flatten)]
    pub meta: MetaArgs,
    /// Exit after this many sessions.
    #[arg(long)]
    pub max_sessions: Option<u64>,
    /// Shorthand for `--max-sessions 1`.
    #[arg(long)]
    pub once: bool,
}

#[derive(Debug, Args)]
pub struct MetaArgs {
    #[arg(long, default_value = "urban")]
    pub scenario: ScenarioClass,
    #[arg(long, default_value = "automatic")]
    pub gear: GearShift,
    #[arg(long, default_value = "unspecified")]
    pub state: PhysicalState,
    #[arg(long)]
    pub kss: Option<u8>,
    #[arg(long)]
    pub sss: Option<u8>,
    #[arg(long)]
    pub ess: Option<u8>,
    #[arg(long, default_value_t = 0.0)]
    pub license_years: f64,
    #[arg(long, default_value_t = 1)]
    pub game_experience: u8,
    #[arg(long, default_value_t = 1)]
    pub racing_experience: u8,
    #[arg(long, default_value_t = 30.0)]
    pub age: f64,
}

impl MetaArgs {
    fn to_meta(&self, participant: &str) -> SessionMeta {
        SessionMeta {
            participant_id: participant.to_string(),
            scenario_class: self.scenario,
            gear_shift: self.gear,
            physical_state: self.state,
            kss: self.kss,
            sss: self.sss,
            ess: self.ess,
            license_years: self.license_years,
            game_experience: self.game_experience,
            racing_experience: self.racing_experience,
            age: self.age,
        }
    }
}

#[derive(Debug, Args)]
pub struct DriveArgs {
    #[arg(long, default_value = "u01")]
    pub user: String,
    /// Drive length in seconds.
    #[arg(long, default_value_t = 60)]
    pub duration: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Offences per second.
    #[arg(long, default_value_t = 0.02)]
    pub intensity: f64,
    /// JSON drive profile (cruise speed, per-kind offence weights).
    #[arg(long)]
    pub profile: Option<PathBuf>,
    #[arg(long)]
    pub cruise_speed: Option<f64>,
    #[arg(long, requires = "pause_len")]
    pub pause_at: Option<u64>,
    #[arg(long, requires = "pause_at")]
    pub pause_len: Option<u64>,
    #[arg(long, default_value_t = SocketAddr::from((Ipv4Addr::LOCALHOST, DEFAULT_REGISTRY_PORT)))]
    pub registry: SocketAddr,
    #[arg(long)]
    pub session_id: Option<String>,
    #[command(flatten)]
    pub meta: MetaArgs,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Session folders or glob patterns.
    pub sessions: Vec<String>,
    /// Comma-separated `x:y` pairs; defaults to the driving variables against every offence rate.
    #[arg(long, value_delimiter = ',')]
    pub pairs: Vec<String>,
    /// Add offence rate against experience and sleepiness scores.
    #[arg(long)]
    pub experience: bool,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Only compute the rested/tired comparison.
    #[arg(long)]
    pub state_comparison: bool,
    /// Report folder.
    #[arg(long, default_value = "./report")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    pub session: PathBuf,
    /// Defaults to `<session>/features.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write per-window series under `<session>/plot/`.
    #[arg(long)]
    pub emit_plot_data: bool,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// A sensor data file or a session folder.
    pub path: PathBuf,
    /// Rows to print from a data file.
    #[arg(long, default_value_t = 10)]
    pub head: usize,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::DiscoveryFailure(_) => EXIT_CONNECTIVITY,
        Error::Io(io) if matches!(
            io.kind(),
            std::io::ErrorKind::ConnectionRefused | std::io::ErrorKind::ConnectionReset | std::io::ErrorKind::TimedOut
        ) =>
        {
            EXIT_CONNECTIVITY
        }
        Error::InvalidArgument(_) | Error::OutOfRange(_) | Error::UnsupportedRate(_) => EXIT_USAGE,
        Error::InsufficientData { available: 0, .. } => EXIT_EMPTY_INPUT,
        _ => EXIT_FAILURE,
    }
}

/// Parse `args` and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let _ = env_logger::Builder::new().filter_level(cli.log_level).format_timestamp_millis().try_init();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            error!("{e}");
            exit_code(&e)
        }
    }
}

fn clock(cli: &Cli) -> Clock {
    if cli.fixed_clock {
        Clock::fixed_default()
    } else {
        Clock::System
    }
}

fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Registry(a) => cmd_registry(a),
        Command::Monitor(a) => cmd_monitor(cli, a),
        Command::Drive(a) => cmd_drive(cli, a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Features(a) => cmd_features(a),
        Command::Replay(a) => cmd_replay(a),
    }
}

fn bind(ip: IpAddr, port: u16) -> std::result::Result<TcpListener, i32> {
    if let Err(e) = check_port(port) {
        error!("{e}");
        return Err(EXIT_USAGE);
    }
    TcpListener::bind((ip, port)).map_err(|e| {
        error!("cannot listen on {ip}:{port}: {e}");
        EXIT_PORT
    })
}

fn cmd_registry(a: &RegistryArgs) -> Result<i32> {
    let listener = match bind(a.bind, a.port) {
        Ok(l) => l,
        Err(code) => return Ok(code),
    };
    info!("registry listening on {}", listener.local_addr()?);
    serve(listener, Arc::new(Registry::new()))?;
    Ok(EXIT_OK)
}

fn cmd_monitor(cli: &Cli, a: &MonitorArgs) -> Result<i32> {
    let sensors = parse_sensor_list(&a.sensors)?;
    let mut config = MonitorConfig::new(&a.user, cli.data_dir.join("monitor"));
    config.sensors = sensors;
    config.allowed_address = a.allowed_address;
    config.clock = clock(cli);
    config.seed = a.seed;
    config.noise_amplitude = a.noise;
    config.meta = a.meta.to_meta(&a.user);
    if let Some(path) = &a.script {
        config.script = ManeuverScript::load(path)?;
    }
    let monitor = Monitor::new(config)?;
    let listener = match bind(a.bind, a.port) {
        Ok(l) => l,
        Err(code) => return Ok(code),
    };
    let options = RunOptions {
        registry: Some(a.registry),
        advertise: a.advertise,
        max_sessions: if a.once { Some(1) } else { a.max_sessions },
    };
    let served = run_monitor(monitor, listener, &options)?;
    info!("monitor finished after {served} sessions");
    Ok(EXIT_OK)
}

fn cmd_drive(cli: &Cli, a: &DriveArgs) -> Result<i32> {
    let mut request = DriveRequest::new(&a.user, &cli.data_dir, a.duration, a.seed);
    request.meta = a.meta.to_meta(&a.user);
    request.offence_intensity = a.intensity;
    request.clock = clock(cli);
    request.session_id = a.session_id.clone();
    if let Some(path) = &a.profile {
        let text = std::fs::read_to_string(path)?;
        request.profile = serde_json::from_str::<DriveProfile>(&text)?;
    }
    if a.cruise_speed.is_some() {
        request.profile.cruise_speed_kmh = a.cruise_speed;
    }
    request.pause = a.pause_at.zip(a.pause_len);
    let outcome = drive_client(a.registry, &request)?;
    println!("{}", outcome.dir.display());
    if outcome.incomplete {
        error!("session {} is incomplete", outcome.manifest.session_id);
        return Ok(EXIT_CONNECTIVITY);
    }
    Ok(EXIT_OK)
}

/// Expand patterns into session folders (those holding a manifest).
pub fn resolve_sessions(patterns: &[String]) -> Result<Vec<PathBuf>> {
    let mut dirs = Vec::new();
    for p in patterns {
        let matches = glob::glob(p).map_err(|e| Error::InvalidArgument(format!("bad pattern `{p}`: {e}")))?;
        for entry in matches {
            let path = entry.map_err(|e| Error::Io(e.into()))?;
            if path.join(MANIFEST_FILE).is_file() {
                dirs.push(path);
            }
        }
    }
    dirs.sort();
    dirs.dedup();
    Ok(dirs)
}

fn cmd_analyze(a: &AnalyzeArgs) -> Result<i32> {
    let dirs = resolve_sessions(&a.sessions)?;
    if dirs.is_empty() {
        eprintln!("no session folders matched {:?}", a.sessions);
        return Ok(EXIT_EMPTY_INPUT);
    }
    let sessions = dirs.iter().map(|d| load_session(d)).collect::<Result<Vec<_>>>()?;
    std::fs::create_dir_all(&a.out)?;
    if a.state_comparison {
        let rows = state_comparison(&sessions);
        std::fs::write(a.out.join("state_comparison.csv"), study::state_comparison_csv(&rows))?;
        println!("{} participants -> {}", rows.len(), a.out.join("state_comparison.csv").display());
        return Ok(EXIT_OK);
    }
    let mut pairs = if a.pairs.is_empty() {
        study::default_pairs()
    } else {
        a.pairs.iter().map(|p| parse_pair(p)).collect::<Result<Vec<_>>>()?
    };
    if a.experience {
        pairs.extend(study::experience_pairs());
    }
    let report = correlation_study(&sessions, &pairs, a.alpha)?;
    write_report(&report, &a.out)?;
    print!("{}", study::summary_text(&report));
    Ok(EXIT_OK)
}

fn cmd_features(a: &FeaturesArgs) -> Result<i32> {
    let features = session_features(&a.session)?;
    let out = a.out.clone().unwrap_or_else(|| a.session.join(FEATURES_FILE));
    std::fs::write(&out, features.to_csv())?;
    println!("{}", out.display());
    if a.emit_plot_data {
        let dir = a.session.join("plot");
        for name in write_plot_data(&features, &dir)? {
            println!("{}", dir.join(name).display());
        }
    }
    Ok(EXIT_OK)
}

fn replay_session(dir: &Path) -> Result<i32> {
    let manifest = SessionManifest::load(dir)?;
    let bad = manifest.verify(dir)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "session {} user {} started {}", manifest.session_id, manifest.user_id, manifest.started_at)?;
    for f in &manifest.files {
        let status = if bad.contains(&f.name) { "MISMATCH" } else { "ok" };
        writeln!(out, "  {:<14} {:>10} bytes  crc32 {:08x}  {status}", f.name, f.bytes, f.crc32)?;
    }
    for p in &manifest.pause_intervals {
        writeln!(out, "  pause {}..{} ms", p.start_ms, p.end_ms)?;
    }
    if manifest.incomplete {
        writeln!(out, "  INCOMPLETE")?;
    }
    Ok(if bad.is_empty() { EXIT_OK } else { EXIT_FAILURE })
}

fn cmd_replay(a: &ReplayArgs) -> Result<i32> {
    if a.path.is_dir() {
        return replay_session(&a.path);
    }
    let (header, samples) = replay_with_header(&a.path)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{}", header.header_line())?;
    writeln!(out, "{}", header.column_line())?;
    for s in samples.iter().take(a.head) {
        writeln!(out, "{}", crate::storage::format_row(s))?;
    }
    writeln!(out, "# {} samples", samples.len())?;
    Ok(EXIT_OK)
}
