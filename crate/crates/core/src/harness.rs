//! Headless driving-session simulator.
//!
//! Produces one vehicle record per second and a log of traffic offences,
//! and plays the simulator's part of the session protocol: discover the
//! monitor, connect, drive, optionally pause, stop, and collect the sensor
//! files.

use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpStream};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use log::{info, warn};
use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::protocol::registry::{lookup_remote, GAME_NAME};
use crate::protocol::session::{Command, CommandLine};
use crate::protocol::transfer::receive_files_to_dir;
use crate::storage::{self, Clock, PauseInterval, SessionManifest, OFFENCES_FILE, VEHICLE_FILE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ScenarioClass {
    Urban,
    Interurban,
}

impl ScenarioClass {
    pub fn speed_limit_kmh(self) -> f64 {
        match self {
            ScenarioClass::Urban => 60.0,
            ScenarioClass::Interurban => 120.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioClass::Urban => "urban",
            ScenarioClass::Interurban => "interurban",
        }
    }
}

impl FromStr for ScenarioClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "urban" => Ok(ScenarioClass::Urban),
            "interurban" => Ok(ScenarioClass::Interurban),
            _ => Err(invalid(format!("unknown scenario `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GearShift {
    Automatic,
    Manual,
}

impl FromStr for GearShift {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "automatic" | "auto" => Ok(GearShift::Automatic),
            "manual" => Ok(GearShift::Manual),
            _ => Err(invalid(format!("unknown gear shift `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PhysicalState {
    Rested,
    Tired,
    Unspecified,
}

impl PhysicalState {
    pub fn as_str(self) -> &'static str {
        match self {
            PhysicalState::Rested => "rested",
            PhysicalState::Tired => "tired",
            PhysicalState::Unspecified => "unspecified",
        }
    }
}

impl FromStr for PhysicalState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rested" => Ok(PhysicalState::Rested),
            "tired" => Ok(PhysicalState::Tired),
            "unspecified" => Ok(PhysicalState::Unspecified),
            _ => Err(invalid(format!("unknown physical state `{s}`"))),
        }
    }
}

/// Participant and scenario metadata attached to a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub participant_id: String,
    pub scenario_class: ScenarioClass,
    pub gear_shift: GearShift,
    pub physical_state: PhysicalState,
    /// Karolinska sleepiness, 1–9.
    pub kss: Option<u8>,
    /// Stanford sleepiness, 1–7.
    pub sss: Option<u8>,
    /// Epworth sleepiness, 0–24.
    pub ess: Option<u8>,
    pub license_years: f64,
    pub game_experience: u8,
    pub racing_experience: u8,
    pub age: f64,
}

impl SessionMeta {
    pub fn new(participant_id: &str) -> Self {
        SessionMeta {
            participant_id: participant_id.to_string(),
            scenario_class: ScenarioClass::Urban,
            gear_shift: GearShift::Automatic,
            physical_state: PhysicalState::Unspecified,
            kss: None,
            sss: None,
            ess: None,
            license_years: 0.0,
            game_experience: 1,
            racing_experience: 1,
            age: 30.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let scale = |name: &str, v: Option<u8>, lo: u8, hi: u8| match v {
            Some(x) if !(lo..=hi).contains(&x) => Err(Error::OutOfRange(format!("{name}={x} outside {lo}..={hi}"))),
            _ => Ok(()),
        };
        scale("kss", self.kss, 1, 9)?;
        scale("sss", self.sss, 1, 7)?;
        scale("ess", self.ess, 0, 24)?;
        scale("game_experience", Some(self.game_experience), 1, 10)?;
        scale("racing_experience", Some(self.racing_experience), 1, 10)?;
        if self.participant_id.is_empty() {
            return Err(invalid("participant id must not be empty"));
        }
        if !(self.license_years >= 0.0 && self.age >= 0.0) {
            return Err(invalid("license years and age must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleRecord {
    pub t_s: u64,
    pub fuel_lph: f64,
    pub speed_kmh: f64,
    pub rpm: f64,
    pub pos_x: f64,
    pub pos_y: f64,
}

macro_rules! offence_kinds {
    ($($variant:ident => $name:literal),+ $(,)?) => {
        /// The eighteen traffic offence categories the simulator logs.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum OffenceKind {
            $(#[serde(rename = $name)] $variant,)+
        }

        impl OffenceKind {
            pub const ALL: [OffenceKind; 18] = [$(OffenceKind::$variant,)+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(OffenceKind::$variant => $name,)+
                }
            }
        }

        impl FromStr for OffenceKind {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok(OffenceKind::$variant),)+
                    _ => Err(invalid(format!("unknown offence kind `{s}`"))),
                }
            }
        }
    };
}

offence_kinds! {
    CollisionWithPedestrian => "collision-with-pedestrian",
    CollisionWithVehicle => "collision-with-vehicle",
    CollisionWithMotorcycle => "collision-with-motorcycle",
    CollisionWithCyclist => "collision-with-cyclist",
    CollisionWithStillObject => "collision-with-still-object",
    LeavingTheRoad => "leaving-the-road",
    OverSpeed => "over-speed",
    UnderSpeed => "under-speed",
    LeavingRoundaboutIncorrectly => "leaving-roundabout-incorrectly",
    DrivingInRoundaboutIncorrectly => "driving-in-roundabout-incorrectly",
    LeavingJunctionIncorrectly => "leaving-junction-incorrectly",
    FailingStopSign => "failing-stop-sign",
    FailingYieldSign => "failing-yield-sign",
    FailingTrafficLight => "failing-traffic-light",
    NotRespectingSafetyDistance => "not-respecting-safety-distance",
    CrossingSolidLine => "crossing-solid-line",
    NoTurnLightInTurn => "no-turn-light-in-turn",
    NoTurnLightOvertaking => "no-turn-light-overtaking",
}

impl OffenceKind {
    pub fn index(self) -> usize {
        OffenceKind::ALL.iter().position(|&k| k == self).expect("listed")
    }
}

impl fmt::Display for OffenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffenceEvent {
    pub kind: OffenceKind,
    pub t_ms: u64,
    pub pos_x: f64,
    pub pos_y: f64,
}

/// Knobs of the toy vehicle model beyond the session metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveProfile {
    /// Speed the driver settles around; defaults to 70% of the scenario limit.
    pub cruise_speed_kmh: Option<f64>,
    /// Relative frequency of each offence kind, indexed like `OffenceKind::ALL`.
    pub kind_weights: [f64; 18],
}

impl Default for DriveProfile {
    fn default() -> Self {
        DriveProfile { cruise_speed_kmh: None, kind_weights: [1.0; 18] }
    }
}

impl DriveProfile {
    /// Only `kind` is ever committed.
    pub fn single_kind(kind: OffenceKind) -> Self {
        let mut w = [0.0; 18];
        w[kind.index()] = 1.0;
        DriveProfile { kind_weights: w, ..Default::default() }
    }
}

const GEAR_RATIO: [f64; 6] = [0.0, 110.0, 65.0, 45.0, 35.0, 28.0];
const IDLE_RPM: f64 = 800.0;

fn gear_for(speed_kmh: f64, gear: GearShift) -> usize {
    let band = match gear {
        GearShift::Automatic => 25.0,
        GearShift::Manual => 30.0,
    };
    (1 + (speed_kmh / band) as usize).min(5)
}

pub fn run_drive(
    meta: &SessionMeta,
    duration_s: u64,
    seed: u64,
    offence_intensity: f64,
) -> Result<(Vec<VehicleRecord>, Vec<OffenceEvent>)> {
    run_drive_with(meta, duration_s, seed, offence_intensity, &DriveProfile::default())
}

/// Simulate `duration_s` seconds: a mean-reverting speed walk bounded by the
/// scenario limit, gear-stepped rpm, rpm-affine fuel use, and offences from
/// a Poisson process with `offence_intensity` events per second split over
/// kinds by `profile.kind_weights`.
pub fn run_drive_with(
    meta: &SessionMeta,
    duration_s: u64,
    seed: u64,
    offence_intensity: f64,
    profile: &DriveProfile,
) -> Result<(Vec<VehicleRecord>, Vec<OffenceEvent>)> {
    if duration_s == 0 {
        return Err(invalid("duration must be at least one second"));
    }
    if !(offence_intensity >= 0.0 && offence_intensity.is_finite()) {
        return Err(invalid("offence intensity must be non-negative"));
    }
    let limit = meta.scenario_class.speed_limit_kmh();
    let cruise = profile.cruise_speed_kmh.unwrap_or(0.7 * limit).clamp(0.0, limit);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut offence_rng = ChaCha8Rng::seed_from_u64(seed);
    offence_rng.set_stream(1);
    let speed_noise = Normal::new(0.0, 3.0).expect("valid sd");
    let heading_noise = Normal::new(0.0, 0.05).expect("valid sd");
    let fuel_noise = Normal::new(0.0, 0.1).expect("valid sd");
    let arrivals = if offence_intensity > 0.0 {
        Some(Poisson::new(offence_intensity).map_err(|e| invalid(e.to_string()))?)
    } else {
        None
    };
    let kinds = if arrivals.is_some() {
        Some(WeightedIndex::new(profile.kind_weights).map_err(|e| invalid(format!("offence weights: {e}")))?)
    } else {
        None
    };

    let (mut speed, mut heading, mut x, mut y) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut records = Vec::with_capacity(duration_s as usize);
    let mut events = Vec::new();
    for t_s in 0..duration_s {
        speed = (speed + 0.3 * (cruise - speed) + speed_noise.sample(&mut rng)).clamp(0.0, limit);
        heading += heading_noise.sample(&mut rng);
        x += speed / 3.6 * heading.cos();
        y += speed / 3.6 * heading.sin();
        let rpm = IDLE_RPM + speed * GEAR_RATIO[gear_for(speed, meta.gear_shift)];
        let fuel = (0.6 + 0.0025 * rpm + fuel_noise.sample(&mut rng)).max(0.0);
        records.push(VehicleRecord { t_s, fuel_lph: fuel, speed_kmh: speed, rpm, pos_x: x, pos_y: y });

        if let (Some(arrivals), Some(kinds)) = (&arrivals, &kinds) {
            let n = arrivals.sample(&mut offence_rng) as usize;
            let mut second: Vec<OffenceEvent> = (0..n)
                .map(|_| OffenceEvent {
                    kind: OffenceKind::ALL[kinds.sample(&mut offence_rng)],
                    t_ms: t_s * 1000 + offence_rng.random_range(0..1000),
                    pos_x: x,
                    pos_y: y,
                })
                .collect();
            second.sort_by_key(|e| e.t_ms);
            events.extend(second);
        }
    }
    Ok((records, events))
}

pub fn offence_rate(events: &[OffenceEvent], duration_s: u64) -> Result<f64> {
    if duration_s == 0 {
        return Err(invalid("duration must be at least one second"));
    }
    Ok(events.len() as f64 / duration_s as f64)
}

pub fn offence_rate_of(kind: OffenceKind, events: &[OffenceEvent], duration_s: u64) -> Result<f64> {
    if duration_s == 0 {
        return Err(invalid("duration must be at least one second"));
    }
    Ok(events.iter().filter(|e| e.kind == kind).count() as f64 / duration_s as f64)
}

pub const VEHICLE_HEADER: &str = "t_s,fuel_lph,speed_kmh,rpm,pos_x,pos_y";
pub const OFFENCE_HEADER: &str = "t_ms,kind,pos_x,pos_y";

pub fn vehicle_csv(records: &[VehicleRecord]) -> String {
    let mut out = String::from(VEHICLE_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!("{},{},{},{},{},{}\n", r.t_s, r.fuel_lph, r.speed_kmh, r.rpm, r.pos_x, r.pos_y));
    }
    out
}

pub fn offences_csv(events: &[OffenceEvent]) -> String {
    let mut out = String::from(OFFENCE_HEADER);
    out.push('\n');
    for e in events {
        out.push_str(&format!("{},{},{},{}\n", e.t_ms, e.kind, e.pos_x, e.pos_y));
    }
    out
}

fn csv_rows<'a>(text: &'a str, header: &str, width: usize) -> Result<Vec<(usize, Vec<&'a str>)>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == header => {}
        _ => return Err(Error::Parse { line: 1, message: format!("expected header `{header}`") }),
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let fields: Vec<&str> = l.split(',').collect();
            if fields.len() != width {
                return Err(Error::Parse { line: i + 2, message: format!("expected {width} fields") });
            }
            Ok((i + 2, fields))
        })
        .collect()
}

fn field<T: FromStr>(line: usize, s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse { line, message: format!("bad value `{s}`") })
}

pub fn parse_vehicle_csv(text: &str) -> Result<Vec<VehicleRecord>> {
    csv_rows(text, VEHICLE_HEADER, 6)?
        .into_iter()
        .map(|(line, f)| {
            Ok(VehicleRecord {
                t_s: field(line, f[0])?,
                fuel_lph: field(line, f[1])?,
                speed_kmh: field(line, f[2])?,
                rpm: field(line, f[3])?,
                pos_x: field(line, f[4])?,
                pos_y: field(line, f[5])?,
            })
        })
        .collect()
}

pub fn parse_offences_csv(text: &str) -> Result<Vec<OffenceEvent>> {
    csv_rows(text, OFFENCE_HEADER, 4)?
        .into_iter()
        .map(|(line, f)| {
            Ok(OffenceEvent {
                t_ms: field(line, f[0])?,
                kind: f[1].parse().map_err(|_| Error::Parse { line, message: format!("unknown kind `{}`", f[1]) })?,
                pos_x: field(line, f[2])?,
                pos_y: field(line, f[3])?,
            })
        })
        .collect()
}

/// Everything the simulator side needs for one protocol run.
#[derive(Debug, Clone)]
pub struct DriveRequest {
    pub user: String,
    pub meta: SessionMeta,
    pub duration_s: u64,
    pub seed: u64,
    pub offence_intensity: f64,
    pub profile: DriveProfile,
    /// `(pause_at_s, pause_len_s)`.
    pub pause: Option<(u64, u64)>,
    pub data_dir: PathBuf,
    pub clock: Clock,
    pub session_id: Option<String>,
}

impl DriveRequest {
    pub fn new(user: &str, data_dir: &Path, duration_s: u64, seed: u64) -> Self {
        DriveRequest {
            user: user.to_string(),
            meta: SessionMeta::new(user),
            duration_s,
            seed,
            offence_intensity: 0.02,
            profile: DriveProfile::default(),
            pause: None,
            data_dir: data_dir.to_path_buf(),
            clock: Clock::System,
            session_id: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DriveOutcome {
    pub dir: PathBuf,
    pub manifest: SessionManifest,
    pub incomplete: bool,
}

const CONNECT_TIMEOUT: Duration = Duration::from_secs(5);

/// Discover the monitor through the registry and run a full session with it.
pub fn drive_client(registry: SocketAddr, request: &DriveRequest) -> Result<DriveOutcome> {
    let host = lookup_remote(registry, GAME_NAME).map_err(|e| Error::DiscoveryFailure(format!("lookup {GAME_NAME}: {e}")))?;
    info!("monitor found at {host}");
    let stream = TcpStream::connect_timeout(&host.socket_addr(), CONNECT_TIMEOUT)
        .map_err(|e| Error::DiscoveryFailure(format!("connect {host}: {e}")))?;
    let reader = BufReader::new(stream.try_clone()?);
    drive_session(reader, stream, request)
}

/// Protocol client over any reliable ordered byte stream.
pub fn drive_session<R: BufRead, W: Write>(mut reader: R, mut writer: W, request: &DriveRequest) -> Result<DriveOutcome> {
    request.meta.validate()?;
    if let Some((at, len)) = request.pause {
        if len == 0 || at + len > request.duration_s {
            return Err(invalid(format!("pause {at}+{len}s does not fit in {}s", request.duration_s)));
        }
    }
    let mut session = match &request.session_id {
        Some(id) => storage::open_session_with_id(&request.data_dir, &request.user, id, request.meta.clone(), &request.clock)?,
        None => storage::open_session(&request.data_dir, &request.user, request.meta.clone(), &request.clock)?,
    };
    let (records, events) =
        run_drive_with(&request.meta, request.duration_s, request.seed, request.offence_intensity, &request.profile)?;

    let mut send = |line: CommandLine| -> Result<()> {
        writeln!(writer, "{line}")?;
        writer.flush()?;
        Ok(())
    };
    send(CommandLine::at(Command::Connect, 0))?;
    if let Some((at, len)) = request.pause {
        let (start_ms, end_ms) = (at * 1000, (at + len) * 1000);
        send(CommandLine::at(Command::Pause, start_ms))?;
        send(CommandLine::at(Command::Resume, end_ms))?;
        session.record_pause(PauseInterval { start_ms, end_ms });
    }
    send(CommandLine::at(Command::StopAll, request.duration_s * 1000))?;

    let mut incomplete = false;
    match receive_files_to_dir(&mut reader, session.dir()) {
        Ok(entries) => {
            for e in &entries {
                session.adopt_file(&e.name)?;
            }
            info!("received {} sensor files", entries.len());
        }
        Err(e) => {
            warn!("sensor file transfer failed: {e}");
            incomplete = true;
            session.mark_incomplete();
            session.add_note(format!("transfer failed: {e}"));
            adopt_partial_files(&mut session)?;
        }
    }
    session.write_file(VEHICLE_FILE, vehicle_csv(&records).as_bytes())?;
    session.write_file(OFFENCES_FILE, offences_csv(&events).as_bytes())?;
    let manifest = session.close()?.clone();
    Ok(DriveOutcome { dir: session.dir().to_path_buf(), manifest, incomplete })
}

fn adopt_partial_files(session: &mut storage::Session) -> Result<()> {
    let mut names: Vec<String> = std::fs::read_dir(session.dir())?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|n| n != storage::MANIFEST_FILE && !n.ends_with(".tmp"))
        .collect();
    names.sort();
    for n in names {
        session.adopt_file(&n)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_record_per_second() {
        let (r, _) = run_drive(&SessionMeta::new("p"), 10, 1, 0.1).unwrap();
        assert_eq!(r.len(), 10);
        assert!(r.iter().enumerate().all(|(i, rec)| rec.t_s == i as u64));
        assert!(run_drive(&SessionMeta::new("p"), 0, 1, 0.1).is_err());
    }

    #[test]
    fn zero_intensity_no_offences() {
        let (_, e) = run_drive(&SessionMeta::new("p"), 600, 1, 0.0).unwrap();
        assert!(e.is_empty());
    }

    #[test]
    fn records_are_plausible() {
        let mut meta = SessionMeta::new("p");
        for scenario in [ScenarioClass::Urban, ScenarioClass::Interurban] {
            meta.scenario_class = scenario;
            let (r, e) = run_drive(&meta, 900, 5, 0.05).unwrap();
            for rec in &r {
                assert!(rec.speed_kmh >= 0.0 && rec.speed_kmh <= scenario.speed_limit_kmh());
                assert!(rec.rpm > 0.0 && rec.fuel_lph >= 0.0);
            }
            assert!(e.iter().all(|ev| ev.t_ms < 900_000));
            assert!(e.windows(2).all(|w| w[0].t_ms <= w[1].t_ms));
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let meta = SessionMeta::new("p");
        assert_eq!(run_drive(&meta, 120, 9, 0.1).unwrap(), run_drive(&meta, 120, 9, 0.1).unwrap());
        assert_ne!(run_drive(&meta, 120, 9, 0.1).unwrap().0, run_drive(&meta, 120, 10, 0.1).unwrap().0);
    }

    #[test]
    fn rates() {
        let ev = |n: usize| {
            vec![OffenceEvent { kind: OffenceKind::OverSpeed, t_ms: 0, pos_x: 0.0, pos_y: 0.0 }; n]
        };
        assert_eq!(offence_rate(&ev(10), 100).unwrap(), 0.1);
        assert_eq!(offence_rate(&ev(0), 100).unwrap(), 0.0);
        assert!((offence_rate(&ev(85), 600).unwrap() - 85.0 / 600.0).abs() < 1e-15);
        assert!((offence_rate(&ev(85), 600).unwrap() - 0.1417).abs() < 5e-5);
        assert!(offence_rate(&ev(1), 0).is_err());
    }

    #[test]
    fn eighteen_kinds() {
        assert_eq!(OffenceKind::ALL.len(), 18);
        let names: std::collections::HashSet<_> = OffenceKind::ALL.iter().map(|k| k.as_str()).collect();
        assert_eq!(names.len(), 18);
        assert_eq!(serde_json::to_string(&OffenceKind::NoTurnLightInTurn).unwrap(), "\"no-turn-light-in-turn\"");
    }

    #[test]
    fn questionnaire_ranges() {
        let mut m = SessionMeta::new("p");
        m.kss = Some(9);
        m.sss = Some(7);
        m.ess = Some(24);
        assert!(m.validate().is_ok());
        m.kss = Some(10);
        assert!(matches!(m.validate(), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn vehicle_csv_round_trip() {
        let (r, _) = run_drive(&SessionMeta::new("p"), 50, 3, 0.0).unwrap();
        let text = vehicle_csv(&r);
        assert!(text.starts_with("t_s,fuel_lph,speed_kmh,rpm,pos_x,pos_y\n"));
        assert_eq!(parse_vehicle_csv(&text).unwrap(), r);
    }

    proptest! {
        #[test]
        fn offence_csv_round_trip(
            rows in prop::collection::vec((0usize..18, 0u64..10_000_000, -1e6f64..1e6, -1e6f64..1e6), 0..60)
        ) {
            let events: Vec<OffenceEvent> = rows
                .into_iter()
                .map(|(k, t, x, y)| OffenceEvent { kind: OffenceKind::ALL[k], t_ms: t, pos_x: x, pos_y: y })
                .collect();
            prop_assert_eq!(parse_offences_csv(&offences_csv(&events)).unwrap(), events);
        }

        #[test]
        fn record_count_is_duration(duration in 1u64..400, seed in any::<u64>()) {
            let (r, _) = run_drive(&SessionMeta::new("p"), duration, seed, 0.05).unwrap();
            prop_assert_eq!(r.len() as u64, duration);
        }
    }
}
