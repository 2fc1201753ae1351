//! Discovery registry, monitor session state machine, and file transfer.

pub mod registry;
pub mod session;
pub mod transfer;

pub use registry::{HostData, Registry, RegistryEntry, GAME_NAME};
pub use session::{monitor_handle, Action, Command, CommandLine, Input, Phase, SessionState};
pub use transfer::{receive_files, send_files};
