//! Monitor-side session state machine and the command wire format.
//!
//! Commands travel one per LF-terminated line as lowercase tokens:
//! `connect`, `pause`, `resume`, `stopall`. A token may carry one optional
//! argument, the simulator's session clock in milliseconds (`pause 20000`).
//! Without it the monitor uses its own elapsed wall time.

use std::fmt;
use std::net::IpAddr;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    Connect,
    Pause,
    Resume,
    StopAll,
}

impl Command {
    pub const ALL: [Command; 4] = [Command::Connect, Command::Pause, Command::Resume, Command::StopAll];

    pub fn token(self) -> &'static str {
        match self {
            Command::Connect => "connect",
            Command::Pause => "pause",
            Command::Resume => "resume",
            Command::StopAll => "stopall",
        }
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.token() == s)
            .ok_or_else(|| Error::Protocol(format!("unknown command `{s}`")))
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// One command line as sent over the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CommandLine {
    pub command: Command,
    pub at_ms: Option<u64>,
}

impl CommandLine {
    pub fn new(command: Command) -> Self {
        CommandLine { command, at_ms: None }
    }

    pub fn at(command: Command, at_ms: u64) -> Self {
        CommandLine { command, at_ms: Some(at_ms) }
    }
}

impl FromStr for CommandLine {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        let line = line.strip_suffix('\n').unwrap_or(line);
        let mut parts = line.split(' ');
        let command: Command = parts.next().unwrap_or("").parse()?;
        let at_ms = match parts.next() {
            None => None,
            Some(t) => Some(t.parse().map_err(|_| Error::Protocol(format!("bad timestamp in `{line}`")))?),
        };
        if parts.next().is_some() {
            return Err(Error::Protocol(format!("trailing fields in `{line}`")));
        }
        Ok(CommandLine { command, at_ms })
    }
}

impl fmt::Display for CommandLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.at_ms {
            Some(t) => write!(f, "{} {t}", self.command),
            None => write!(f, "{}", self.command),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Listening,
    Streaming,
    Paused,
    Transferring,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Input {
    Command(Command),
    Connection(IpAddr),
    TransferComplete,
    TransportClose,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    StartAllSensors,
    RejectConnection,
    SuspendSampling,
    ResumeSampling,
    StopAllSensors,
    CloseFiles,
    BeginFileSend,
    CloseTransport,
    ProtocolError(String),
}

/// Protocol state of the monitor endpoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionState {
    pub phase: Phase,
    /// The simulator address learned at discovery; nobody else may connect.
    pub allowed_address: IpAddr,
}

impl SessionState {
    pub fn new(allowed_address: IpAddr) -> Self {
        SessionState { phase: Phase::Listening, allowed_address }
    }

    /// Apply `input` in place and return the actions to perform.
    pub fn handle(&mut self, input: Input) -> Vec<Action> {
        let (next, actions) = monitor_handle(self.clone(), input);
        *self = next;
        actions
    }
}

fn invalid_in(phase: Phase, input: &Input) -> Action {
    Action::ProtocolError(format!("{input:?} not valid while {phase:?}"))
}

/// Pure transition function. Invalid inputs leave the state unchanged and
/// yield a single `ProtocolError` action.
pub fn monitor_handle(state: SessionState, input: Input) -> (SessionState, Vec<Action>) {
    use Action::*;
    use Phase::*;

    let phase = state.phase;
    let to = |p: Phase| SessionState { phase: p, ..state.clone() };
    match (phase, &input) {
        (_, Input::TransportClose) => {
            let actions = if matches!(phase, Streaming | Paused) { vec![StopAllSensors, CloseFiles] } else { vec![] };
            (to(Closed), actions)
        }
        (Listening | Closed, Input::Connection(addr)) => {
            if *addr == state.allowed_address {
                (to(Streaming), vec![StartAllSensors])
            } else {
                (state, vec![RejectConnection])
            }
        }
        (Streaming | Paused | Transferring, Input::Connection(_)) => (state, vec![RejectConnection]),
        // `connect` after the socket is up just acknowledges the stream start
        (Streaming, Input::Command(Command::Connect)) => (state, vec![]),
        (Streaming, Input::Command(Command::Pause)) => (to(Paused), vec![SuspendSampling]),
        (Paused, Input::Command(Command::Resume)) => (to(Streaming), vec![ResumeSampling]),
        (Streaming | Paused, Input::Command(Command::StopAll)) => {
            (to(Transferring), vec![StopAllSensors, CloseFiles, BeginFileSend])
        }
        (Transferring, Input::TransferComplete) => (to(Closed), vec![CloseTransport]),
        _ => {
            let err = invalid_in(phase, &input);
            (state, vec![err])
        }
    }
}
