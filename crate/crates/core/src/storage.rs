//! Session persistence.
//!
//! Layout: `<data_dir>/<user>/<session>/` holding one CSV per sensor
//! (`ecg.csv`, `emg.csv`, `gsr.csv`, `9dof.csv`), optional `vehicle.csv`,
//! `offences.csv`, `features.csv`, and a `manifest.json`.
//!
//! A data file starts with a `#` header line of `key=value` fields, then a
//! column-name line, then one row per sample: `t_ms,<ch0>[,<ch1>...]`.
//! Values use the shortest decimal form that parses back to the same f64.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::harness::SessionMeta;
use crate::signal::{Sample, SampleBatch, SamplingRate, SensorKind};

pub const FORMAT_VERSION: &str = "v1";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const VEHICLE_FILE: &str = "vehicle.csv";
pub const OFFENCES_FILE: &str = "offences.csv";
pub const FEATURES_FILE: &str = "features.csv";

/// Wall clock used for session ids and header timestamps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clock {
    System,
    Fixed(DateTime<Utc>),
}

impl Clock {
    /// The frozen instant used by `--fixed-clock`.
    pub fn fixed_default() -> Clock {
        Clock::Fixed(DateTime::from_timestamp(1_600_000_000, 0).expect("valid timestamp"))
    }

    pub fn now(&self) -> DateTime<Utc> {
        match self {
            Clock::System => Utc::now(),
            Clock::Fixed(t) => *t,
        }
    }

    pub fn session_id(&self) -> String {
        format!("s-{}", self.now().format("%Y%m%dT%H%M%S%3fZ"))
    }
}

pub fn iso8601(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// `[A-Za-z0-9_-]{1,64}`; also used for session ids.
pub fn validate_id(id: &str) -> Result<()> {
    let ok = (1..=64).contains(&id.len()) && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-');
    if ok {
        Ok(())
    } else {
        Err(invalid(format!("`{id}` is not a valid id ([A-Za-z0-9_-]{{1,64}})")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataFileHeader {
    pub format_version: String,
    pub sensor: SensorKind,
    pub fs: SamplingRate,
    pub user: String,
    pub session: String,
    pub started_at: String,
}

impl DataFileHeader {
    pub fn new(sensor: SensorKind, fs: SamplingRate, user: &str, session: &str, started_at: &str) -> Self {
        DataFileHeader {
            format_version: FORMAT_VERSION.to_string(),
            sensor,
            fs,
            user: user.to_string(),
            session: session.to_string(),
            started_at: started_at.to_string(),
        }
    }

    pub fn header_line(&self) -> String {
        format!(
            "# format={} sensor={} fs_hz={} user={} session={} started_at={}",
            self.format_version, self.sensor, self.fs, self.user, self.session, self.started_at
        )
    }

    pub fn column_line(&self) -> String {
        let mut cols = vec!["t_ms"];
        cols.extend_from_slice(self.sensor.channel_names());
        cols.join(",")
    }

    pub fn parse(line: &str) -> Result<Self> {
        let err = |m: String| Error::Parse { line: 1, message: m };
        let body = line.strip_prefix('#').ok_or_else(|| err("header must start with `#`".into()))?;
        let mut fields = BTreeMap::new();
        for tok in body.split_whitespace() {
            let (k, v) = tok.split_once('=').ok_or_else(|| err(format!("bad header field `{tok}`")))?;
            fields.insert(k, v);
        }
        let get = |k: &str| fields.get(k).copied().ok_or_else(|| err(format!("header field `{k}` missing")));
        let version = get("format")?;
        if version != FORMAT_VERSION {
            return Err(err(format!("unsupported format `{version}`")));
        }
        let sensor: SensorKind = get("sensor")?.parse().map_err(|e: Error| err(e.to_string()))?;
        let hz: f64 = get("fs_hz")?.parse().map_err(|_| err("fs_hz is not a number".into()))?;
        let fs = SamplingRate::from_hz(hz).map_err(|e| err(e.to_string()))?;
        Ok(DataFileHeader::new(sensor, fs, get("user")?, get("session")?, get("started_at")?))
    }
}

pub fn format_row(sample: &Sample) -> String {
    let mut row = sample.t_ms.to_string();
    for v in &sample.channels {
        row.push(',');
        row.push_str(&v.to_string());
    }
    row
}

/// Append-only writer for one sensor's data file.
#[derive(Debug)]
pub struct DataFileWriter {
    header: DataFileHeader,
    path: PathBuf,
    out: Option<BufWriter<File>>,
    rows: u64,
    last_t: Option<u64>,
}

impl DataFileWriter {
    pub fn create(path: &Path, header: DataFileHeader) -> Result<Self> {
        let file = OpenOptions::new().write(true).create_new(true).open(path)?;
        let mut out = BufWriter::new(file);
        writeln!(out, "{}", header.header_line())?;
        writeln!(out, "{}", header.column_line())?;
        Ok(DataFileWriter { header, path: path.to_path_buf(), out: Some(out), rows: 0, last_t: None })
    }

    pub fn header(&self) -> &DataFileHeader {
        &self.header
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn rows(&self) -> u64 {
        self.rows
    }

    pub fn append(&mut self, sample: &Sample) -> Result<()> {
        let kind = self.header.sensor;
        if sample.channels.len() != kind.channel_count() {
            return Err(invalid(format!("{kind} sample with {} channels", sample.channels.len())));
        }
        if self.last_t.is_some_and(|t| sample.t_ms < t) {
            return Err(invalid(format!("timestamp {} goes backwards", sample.t_ms)));
        }
        let out = self.out.as_mut().ok_or_else(|| invalid("data file already closed"))?;
        writeln!(out, "{}", format_row(sample))?;
        self.rows += 1;
        self.last_t = Some(sample.t_ms);
        Ok(())
    }

    pub fn append_samples(&mut self, batch: &SampleBatch) -> Result<()> {
        if batch.kind != self.header.sensor {
            return Err(invalid(format!("{} batch for a {} file", batch.kind, self.header.sensor)));
        }
        batch.samples.iter().try_for_each(|s| self.append(s))
    }

    /// Flush and close; safe to call more than once.
    pub fn finish(&mut self) -> Result<()> {
        if let Some(mut out) = self.out.take() {
            out.flush()?;
            out.get_ref().sync_all()?;
        }
        Ok(())
    }
}

/// Parse a data file back into its header and samples.
pub fn read_data_file(path: &Path) -> Result<(DataFileHeader, Vec<Sample>)> {
    parse_data_file(BufReader::new(File::open(path)?))
}

pub fn parse_data_file<R: BufRead>(reader: R) -> Result<(DataFileHeader, Vec<Sample>)> {
    let mut lines = reader.lines();
    let first = lines.next().ok_or(Error::Parse { line: 1, message: "empty file".into() })??;
    let header = DataFileHeader::parse(&first)?;
    let cols = lines.next().ok_or(Error::Parse { line: 2, message: "missing column line".into() })??;
    if cols != header.column_line() {
        return Err(Error::Parse { line: 2, message: format!("expected columns `{}`", header.column_line()) });
    }
    let width = header.sensor.channel_count();
    let mut samples = Vec::new();
    let mut last_t = 0;
    for (i, line) in lines.enumerate() {
        let lineno = i + 3;
        let line = line?;
        let bad = |m: String| Error::Parse { line: lineno, message: m };
        let mut parts = line.split(',');
        let t_ms: u64 = parts
            .next()
            .unwrap_or("")
            .parse()
            .map_err(|_| bad(format!("bad timestamp in `{line}`")))?;
        let channels = parts
            .map(|p| p.parse::<f64>().map_err(|_| bad(format!("bad value `{p}`"))))
            .collect::<Result<Vec<_>>>()?;
        if channels.len() != width {
            return Err(bad(format!("expected {width} values, found {}", channels.len())));
        }
        if t_ms < last_t {
            return Err(bad(format!("timestamp {t_ms} goes backwards")));
        }
        last_t = t_ms;
        samples.push(Sample { t_ms, channels });
    }
    Ok((header, samples))
}

pub fn crc32_bytes(bytes: &[u8]) -> u32 {
    crc32fast::hash(bytes)
}

pub fn crc32_file(path: &Path) -> Result<(u64, u32)> {
    let mut f = File::open(path)?;
    let mut hasher = crc32fast::Hasher::new();
    let mut buf = vec![0u8; 64 * 1024];
    let mut total = 0u64;
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        total += n as u64;
    }
    Ok((total, hasher.finalize()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub crc32: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PauseInterval {
    pub start_ms: u64,
    pub end_ms: u64,
}

impl PauseInterval {
    pub fn contains(&self, t_ms: u64) -> bool {
        (self.start_ms..self.end_ms).contains(&t_ms)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionManifest {
    pub format_version: String,
    pub session_id: String,
    pub user_id: String,
    pub started_at: String,
    /// Address the monitor accepts the simulator from.
    pub allowed_address: Option<String>,
    pub meta: SessionMeta,
    pub files: Vec<FileEntry>,
    pub pause_intervals: Vec<PauseInterval>,
    #[serde(rename = "final")]
    pub finalized: bool,
    pub incomplete: bool,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl SessionManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let tmp = dir.join(format!("{MANIFEST_FILE}.tmp"));
        fs::write(&tmp, serde_json::to_string_pretty(self)? + "\n")?;
        fs::rename(tmp, dir.join(MANIFEST_FILE))?;
        Ok(())
    }

    pub fn file(&self, name: &str) -> Option<&FileEntry> {
        self.files.iter().find(|f| f.name == name)
    }

    /// Recompute sizes and checksums; returns the names that disagree.
    pub fn verify(&self, dir: &Path) -> Result<Vec<String>> {
        let mut bad = Vec::new();
        for f in &self.files {
            match crc32_file(&dir.join(&f.name)) {
                Ok((bytes, crc)) if bytes == f.bytes && crc == f.crc32 => {}
                _ => bad.push(f.name.clone()),
            }
        }
        Ok(bad)
    }
}

/// An open session folder.
#[derive(Debug)]
pub struct Session {
    dir: PathBuf,
    manifest: SessionManifest,
    writers: BTreeMap<SensorKind, DataFileWriter>,
    extra_files: Vec<String>,
    closed: bool,
}

/// Create `<data_dir>/<user>/<session>/` with a fresh manifest.
pub fn open_session(data_dir: &Path, user: &str, meta: SessionMeta, clock: &Clock) -> Result<Session> {
    open_session_with_id(data_dir, user, &clock.session_id(), meta, clock)
}

pub fn open_session_with_id(
    data_dir: &Path,
    user: &str,
    session_id: &str,
    meta: SessionMeta,
    clock: &Clock,
) -> Result<Session> {
    validate_id(user)?;
    validate_id(session_id)?;
    let user_dir = data_dir.join(user);
    fs::create_dir_all(&user_dir)?;
    let dir = user_dir.join(session_id);
    match fs::create_dir(&dir) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
            return Err(Error::AlreadyExists(dir.display().to_string()));
        }
        Err(e) => return Err(e.into()),
    }
    let manifest = SessionManifest {
        format_version: FORMAT_VERSION.to_string(),
        session_id: session_id.to_string(),
        user_id: user.to_string(),
        started_at: iso8601(clock.now()),
        allowed_address: None,
        meta,
        files: Vec::new(),
        pause_intervals: Vec::new(),
        finalized: false,
        incomplete: false,
        notes: Vec::new(),
    };
    manifest.save(&dir)?;
    Ok(Session { dir, manifest, writers: BTreeMap::new(), extra_files: Vec::new(), closed: false })
}

impl Session {
    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &SessionManifest {
        &self.manifest
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn set_allowed_address(&mut self, addr: &str) -> Result<()> {
        self.manifest.allowed_address = Some(addr.to_string());
        self.manifest.save(&self.dir)
    }

    pub fn add_note(&mut self, note: impl Into<String>) {
        self.manifest.notes.push(note.into());
    }

    pub fn mark_incomplete(&mut self) {
        self.manifest.incomplete = true;
    }

    pub fn open_data_file(&mut self, kind: SensorKind, fs: SamplingRate) -> Result<()> {
        if self.closed {
            return Err(invalid("session is closed"));
        }
        if self.writers.contains_key(&kind) {
            return Err(Error::AlreadyExists(kind.data_file_name()));
        }
        let header = DataFileHeader::new(kind, fs, &self.manifest.user_id, &self.manifest.session_id, &self.manifest.started_at);
        let w = DataFileWriter::create(&self.dir.join(kind.data_file_name()), header)?;
        self.writers.insert(kind, w);
        Ok(())
    }

    pub fn append(&mut self, kind: SensorKind, sample: &Sample) -> Result<()> {
        let w = self.writers.get_mut(&kind).ok_or_else(|| invalid(format!("no open {kind} file")))?;
        w.append(sample)
    }

    pub fn append_samples(&mut self, batch: &SampleBatch) -> Result<()> {
        let w = self.writers.get_mut(&batch.kind).ok_or_else(|| invalid(format!("no open {} file", batch.kind)))?;
        w.append_samples(batch)
    }

    pub fn rows(&self, kind: SensorKind) -> u64 {
        self.writers.get(&kind).map_or(0, DataFileWriter::rows)
    }

    /// Write a whole non-sensor file (vehicle log, offences, received data).
    pub fn write_file(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        if self.closed {
            return Err(invalid("session is closed"));
        }
        validate_file_name(name)?;
        if name == MANIFEST_FILE || self.extra_files.iter().any(|f| f == name) {
            return Err(Error::AlreadyExists(name.to_string()));
        }
        fs::write(self.dir.join(name), bytes)?;
        self.extra_files.push(name.to_string());
        Ok(())
    }

    /// Take ownership of a file something else already wrote into the folder.
    pub fn adopt_file(&mut self, name: &str) -> Result<()> {
        if self.closed {
            return Err(invalid("session is closed"));
        }
        validate_file_name(name)?;
        if name == MANIFEST_FILE || self.extra_files.iter().any(|f| f == name) {
            return Err(Error::AlreadyExists(name.to_string()));
        }
        if !self.dir.join(name).is_file() {
            return Err(Error::NotFound(name.to_string()));
        }
        self.extra_files.push(name.to_string());
        Ok(())
    }

    pub fn record_pause(&mut self, interval: PauseInterval) {
        self.manifest.pause_intervals.push(interval);
    }

    /// Flush every file, record sizes and checksums, and mark the manifest
    /// final. A second call is a no-op.
    pub fn close(&mut self) -> Result<&SessionManifest> {
        if self.closed {
            return Ok(&self.manifest);
        }
        let mut names = Vec::new();
        for w in self.writers.values_mut() {
            w.finish()?;
            names.push(w.header().sensor.data_file_name());
        }
        names.extend(self.extra_files.iter().cloned());
        self.manifest.files = names
            .into_iter()
            .map(|name| {
                let (bytes, crc32) = crc32_file(&self.dir.join(&name))?;
                Ok(FileEntry { name, bytes, crc32 })
            })
            .collect::<Result<_>>()?;
        self.manifest.finalized = true;
        self.manifest.save(&self.dir)?;
        self.closed = true;
        Ok(&self.manifest)
    }

    /// `(name, path)` of every finalized file, in manifest order.
    pub fn file_paths(&self) -> Vec<(String, PathBuf)> {
        self.manifest.files.iter().map(|f| (f.name.clone(), self.dir.join(&f.name))).collect()
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        for w in self.writers.values_mut() {
            let _ = w.finish();
        }
    }
}

/// File names travel on the wire and land in session folders: no
/// whitespace, no path separators, no dot-only names.
pub fn validate_file_name(name: &str) -> Result<()> {
    let ok = !name.is_empty()
        && name.len() <= 255
        && !name.chars().any(|c| c.is_whitespace() || c == '/' || c == '\\' || c.is_control())
        && name != "."
        && name != "..";
    if ok {
        Ok(())
    } else {
        Err(invalid(format!("unsafe file name `{name}`")))
    }
}
