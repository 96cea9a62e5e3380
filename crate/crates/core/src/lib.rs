//! Headless core of a multi-view scientific visualization framework.

pub mod scene;
pub mod messaging;
pub mod engine;
pub mod plot;
#[cfg(feature = "view3d")]
pub mod view3d;
pub mod kinetics;
pub mod gateway;
