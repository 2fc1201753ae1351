//! Discovery registry: maps a game name to the host/port of its server.
//!
//! Wire protocol (UTF-8, LF-terminated, one request per line):
//!
//! ```text
//! REGISTER <name> <ip> <port>   ->  OK | ERR <reason>
//! LOOKUP <name>                 ->  HOST <ip> <port> | NOTFOUND
//! ```
//!
//! Entries expire 300 s after their last registration.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::net::{Ipv4Addr, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::str::FromStr;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Name the monitor endpoint registers under.
pub const GAME_NAME: &str = "com.ak.shimmer";
pub const DEFAULT_REGISTRY_PORT: u16 = 8070;
pub const DEFAULT_MONITOR_PORT: u16 = 8080;
pub const ENTRY_TTL_MS: u64 = 300_000;
/// Ports below this are refused, as on the mobile platform.
pub const MIN_PORT: u16 = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HostData {
    pub address: Ipv4Addr,
    pub port: u16,
}

impl HostData {
    pub fn new(address: Ipv4Addr, port: u16) -> Result<Self> {
        check_port(port)?;
        Ok(HostData { address, port })
    }

    pub fn socket_addr(&self) -> SocketAddr {
        SocketAddr::from((self.address, self.port))
    }
}

impl fmt::Display for HostData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.address, self.port)
    }
}

pub fn check_port(port: u16) -> Result<()> {
    if port < MIN_PORT {
        Err(Error::OutOfRange(format!("port {port} below {MIN_PORT}")))
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub game_name: String,
    pub host: HostData,
    pub registered_at_ms: u64,
}

fn validate_name(name: &str) -> Result<()> {
    if name.is_empty() {
        return Err(invalid("game name must not be empty"));
    }
    if name.chars().any(char::is_whitespace) {
        return Err(invalid(format!("game name `{name}` contains whitespace")));
    }
    Ok(())
}

/// In-memory registry store. Methods taking `now_ms` are the pure core;
/// the plain variants read the registry's own monotonic clock.
#[derive(Debug)]
pub struct Registry {
    entries: Mutex<HashMap<String, RegistryEntry>>,
    ttl_ms: u64,
    origin: Instant,
}

impl Default for Registry {
    fn default() -> Self {
        Self::new()
    }
}

impl Registry {
    pub fn new() -> Self {
        Self::with_ttl(ENTRY_TTL_MS)
    }

    pub fn with_ttl(ttl_ms: u64) -> Self {
        Registry { entries: Mutex::new(HashMap::new()), ttl_ms, origin: Instant::now() }
    }

    fn now_ms(&self) -> u64 {
        self.origin.elapsed().as_millis() as u64
    }

    pub fn register(&self, name: &str, host: HostData) -> Result<RegistryEntry> {
        self.register_at(name, host, self.now_ms())
    }

    pub fn lookup(&self, name: &str) -> Result<HostData> {
        self.lookup_at(name, self.now_ms())
    }

    pub fn register_at(&self, name: &str, host: HostData, now_ms: u64) -> Result<RegistryEntry> {
        validate_name(name)?;
        check_port(host.port)?;
        let entry = RegistryEntry { game_name: name.to_string(), host, registered_at_ms: now_ms };
        self.entries.lock().expect("registry lock").insert(name.to_string(), entry.clone());
        Ok(entry)
    }

    pub fn lookup_at(&self, name: &str, now_ms: u64) -> Result<HostData> {
        let mut entries = self.entries.lock().expect("registry lock");
        match entries.get(name) {
            Some(e) if now_ms.saturating_sub(e.registered_at_ms) < self.ttl_ms => Ok(e.host),
            Some(_) => {
                entries.remove(name);
                Err(Error::NotFound(name.to_string()))
            }
            None => Err(Error::NotFound(name.to_string())),
        }
    }

    /// Answer one wire request.
    pub fn handle_request(&self, req: &RegistryRequest) -> RegistryResponse {
        match req {
            RegistryRequest::Register { name, host } => match self.register(name, *host) {
                Ok(_) => {
                    info!("registered {name} at {host}");
                    RegistryResponse::Ok
                }
                Err(e) => RegistryResponse::Err(e.to_string()),
            },
            RegistryRequest::Lookup { name } => match self.lookup(name) {
                Ok(host) => RegistryResponse::Host(host),
                Err(_) => RegistryResponse::NotFound,
            },
        }
    }

    pub fn handle_line(&self, line: &str) -> RegistryResponse {
        match line.parse::<RegistryRequest>() {
            Ok(req) => self.handle_request(&req),
            Err(e) => RegistryResponse::Err(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RegistryRequest {
    Register { name: String, host: HostData },
    Lookup { name: String },
}

impl FromStr for RegistryRequest {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        let line = line.strip_suffix('\n').unwrap_or(line);
        let parts: Vec<&str> = line.split(' ').collect();
        match parts.as_slice() {
            ["REGISTER", name, ip, port] => {
                let address = ip.parse().map_err(|_| invalid(format!("bad IPv4 address `{ip}`")))?;
                let port = port.parse().map_err(|_| invalid(format!("bad port `{port}`")))?;
                validate_name(name)?;
                Ok(RegistryRequest::Register { name: name.to_string(), host: HostData::new(address, port)? })
            }
            ["LOOKUP", name] => {
                validate_name(name)?;
                Ok(RegistryRequest::Lookup { name: name.to_string() })
            }
            _ => Err(Error::Protocol(format!("unrecognised registry request `{line}`"))),
        }
    }
}

impl fmt::Display for RegistryRequest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegistryRequest::Register { name, host } => write!(f, "REGISTER {name} {} {}", host.address, host.port),
            RegistryRequest::Lookup { name } => write!(f, "LOOKUP {name}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RegistryResponse {
    Ok,
    Host(HostData),
    NotFound,
    Err(String),
}

impl FromStr for RegistryResponse {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        let line = line.strip_suffix('\n').unwrap_or(line);
        if line == "OK" {
            return Ok(RegistryResponse::Ok);
        }
        if line == "NOTFOUND" {
            return Ok(RegistryResponse::NotFound);
        }
        if let Some(reason) = line.strip_prefix("ERR ") {
            return Ok(RegistryResponse::Err(reason.to_string()));
        }
        if let Some(rest) = line.strip_prefix("HOST ") {
            if let Some((ip, port)) = rest.split_once(' ') {
                let address = ip.parse().map_err(|_| Error::Protocol(format!("bad address in `{line}`")))?;
                let port = port.parse().map_err(|_| Error::Protocol(format!("bad port in `{line}`")))?;
                return Ok(RegistryResponse::Host(HostData::new(address, port)?));
            }
        }
        Err(Error::Protocol(format!("unrecognised registry response `{line}`")))
    }
}

impl fmt::Display for RegistryResponse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegistryResponse::Ok => f.write_str("OK"),
            RegistryResponse::Host(h) => write!(f, "HOST {} {}", h.address, h.port),
            RegistryResponse::NotFound => f.write_str("NOTFOUND"),
            RegistryResponse::Err(reason) => write!(f, "ERR {reason}"),
        }
    }
}

fn serve_client(registry: &Registry, stream: TcpStream) -> Result<()> {
    let peer = stream.peer_addr()?;
    let mut out = stream.try_clone()?;
    for line in BufReader::new(stream).lines() {
        let line = line?;
        let resp = registry.handle_line(&line);
        debug!("{peer}: {line} -> {resp}");
        writeln!(out, "{resp}")?;
    }
    Ok(())
}

/// Accept registry clients until the listener fails. Each client gets its
/// own thread; the store is shared behind a mutex.
pub fn serve(listener: TcpListener, registry: Arc<Registry>) -> Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        let registry = Arc::clone(&registry);
        thread::spawn(move || {
            if let Err(e) = serve_client(&registry, stream) {
                warn!("registry client error: {e}");
            }
        });
    }
    Ok(())
}

/// Bind and serve on a background thread; returns the bound address.
pub fn spawn_server(addr: impl ToSocketAddrs, registry: Arc<Registry>) -> Result<SocketAddr> {
    let listener = TcpListener::bind(addr)?;
    let local = listener.local_addr()?;
    thread::spawn(move || serve(listener, registry));
    Ok(local)
}

const CLIENT_TIMEOUT: Duration = Duration::from_secs(5);

fn round_trip(registry: SocketAddr, req: &RegistryRequest) -> Result<RegistryResponse> {
    let stream = TcpStream::connect_timeout(&registry, CLIENT_TIMEOUT)?;
    stream.set_read_timeout(Some(CLIENT_TIMEOUT))?;
    let mut out = stream.try_clone()?;
    writeln!(out, "{req}")?;
    let mut line = String::new();
    BufReader::new(stream).read_line(&mut line)?;
    if line.is_empty() {
        return Err(Error::Protocol("registry closed the connection".into()));
    }
    line.parse()
}

/// Client side of `REGISTER`.
pub fn register_remote(registry: SocketAddr, name: &str, host: HostData) -> Result<()> {
    match round_trip(registry, &RegistryRequest::Register { name: name.to_string(), host })? {
        RegistryResponse::Ok => Ok(()),
        RegistryResponse::Err(reason) => Err(Error::Protocol(reason)),
        other => Err(Error::Protocol(format!("unexpected reply `{other}`"))),
    }
}

/// Client side of `LOOKUP`.
pub fn lookup_remote(registry: SocketAddr, name: &str) -> Result<HostData> {
    match round_trip(registry, &RegistryRequest::Lookup { name: name.to_string() })? {
        RegistryResponse::Host(h) => Ok(h),
        RegistryResponse::NotFound => Err(Error::NotFound(name.to_string())),
        RegistryResponse::Err(reason) => Err(Error::Protocol(reason)),
        RegistryResponse::Ok => Err(Error::Protocol("unexpected OK to LOOKUP".into())),
    }
}
