//! Telemetry toolkit for driver-monitoring studies that pair wearable
//! physiological sensors with a driving simulator.
//!
//! - [`signal`]: samples, sampling rates, streaming statistics
//! - [`gyro`]: steering-wheel features from gyroscope angular speed
//! - [`physio`]: R-peak detection, HRV, EMG/GSR summaries
//! - [`sim`]: deterministic synthetic sensor sources
//! - [`protocol`]: discovery registry, session state machine, file framing
//! - [`monitor`] and [`harness`]: the two ends of a recording session
//! - [`storage`]: session folders, data files, manifests
//! - [`analysis`]: Shapiro-Wilk, Pearson significance, correlation studies
//! - [`features`]: per-session feature tables
//! - [`cli`]: the `driver-telemetry` command

pub mod analysis;
pub mod cli;
pub mod error;
pub mod features;
pub mod gyro;
pub mod harness;
pub mod monitor;
pub mod physio;
pub mod protocol;
pub mod signal;
pub mod sim;
pub mod storage;

pub use error::{Error, Result};
pub use signal::{Sample, SamplingRate, SensorKind};
