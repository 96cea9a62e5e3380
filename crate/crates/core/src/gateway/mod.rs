//! Wire gateway: protocol types, frame snapshots, the owner-context app,
//! the WebSocket server and headless batch runs.

mod app;
mod frame;
mod headless;
mod server;
mod wire;

pub use app::{App, AppOptions, DEFAULT_LIVE_STEPS, POINTS_LAYER};
#[cfg(feature = "view3d")]
pub use frame::project_batch;
pub use frame::{snapshot_frame, FrameScheduler};
pub use headless::{run_headless, HeadlessReport};
pub use server::{serve, spawn, ServerHandle};
pub use wire::{
    decode, encode, ErrorInfo, Feedback, Frame, FrameEntry, FrameLayer, Input, InputKind, PlotPoint, PointBatch,
    SimStateInfo, ViewInfo, WireMessage, PROTOCOL_VERSION,
};

use crate::engine::EngineError;
use crate::kinetics::KineticsError;
use crate::messaging::BusError;
use crate::plot::{FitError, PlotError};
use crate::scene::SceneError;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

pub const DEFAULT_PORT: u16 = 7350;

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    /// `line` and `column` are 1-based. Input that is valid JSON but not a
    /// valid message can lose its position; `line` is then 0.
    #[error("malformed message at line {line}, column {column} (byte {offset}): {message}")]
    Malformed {
        line: usize,
        column: usize,
        offset: usize,
        message: String,
    },
    #[error("protocol version {got} does not match {expected}")]
    VersionMismatch { expected: u32, got: u32 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{0}")]
    Unsupported(String),
    #[error("export failed: {0}")]
    Export(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Kinetics(#[from] KineticsError),
    #[error(transparent)]
    Plot(#[from] PlotError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Bus(#[from] BusError),
    #[cfg(feature = "view3d")]
    #[error(transparent)]
    View3d(#[from] crate::view3d::View3dError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl GatewayError {
    /// Short code carried in wire `error` messages.
    pub fn code(&self) -> &'static str {
        match self {
            GatewayError::Malformed { .. } => "Malformed",
            GatewayError::VersionMismatch { .. } => "VersionMismatch",
            GatewayError::InvalidInput(_) => "InvalidInput",
            GatewayError::InvalidConfig(_) => "InvalidConfig",
            GatewayError::Unsupported(_) => "Unsupported",
            GatewayError::Export(_) => "Export",
            GatewayError::Scene(e) => e.code(),
            GatewayError::Engine(e) => match e {
                EngineError::IllegalState { .. } => "IllegalState",
                EngineError::NoSimulation => "NoSimulation",
                EngineError::InvalidStepCount => "InvalidStepCount",
                EngineError::InvalidTiming(_) => "InvalidTiming",
            },
            GatewayError::Kinetics(_) => "InvalidParams",
            GatewayError::Plot(e) => e.code(),
            GatewayError::Fit(_) => "FitFailed",
            GatewayError::Bus(_) => "Bus",
            #[cfg(feature = "view3d")]
            GatewayError::View3d(_) => "DegenerateCamera",
            GatewayError::Io(_) => "Io",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Demo {
    Kinetics,
    Network,
    Plots,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServerConfig {
    pub host: String,
    pub port: u16,
    pub demo: Demo,
    pub headless: bool,
    pub steps: Option<u64>,
    pub seed: Option<u64>,
    pub export_path: Option<PathBuf>,
    pub refresh_ms: u64,
    pub grid_m: usize,
    pub particles: usize,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: DEFAULT_PORT,
            demo: Demo::Kinetics,
            headless: false,
            steps: None,
            seed: None,
            export_path: None,
            refresh_ms: 33,
            grid_m: 10,
            particles: 50_000,
        }
    }
}

impl ServerConfig {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.headless && self.steps.is_none() {
            return Err(GatewayError::InvalidConfig("--headless requires --steps".into()));
        }
        if self.steps == Some(0) {
            return Err(GatewayError::InvalidConfig("--steps must be at least 1".into()));
        }
        if self.refresh_ms == 0 {
            return Err(GatewayError::InvalidConfig("--refresh-ms must be at least 1".into()));
        }
        if self.grid_m < 2 {
            return Err(GatewayError::InvalidConfig("--grid-m must be at least 2".into()));
        }
        if self.particles == 0 {
            return Err(GatewayError::InvalidConfig("--particles must be at least 1".into()));
        }
        Ok(())
    }

    pub fn seed_or_default(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

#[cfg(test)]
mod tests;
