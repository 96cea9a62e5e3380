//! Topic names shared by the engine, plots and the gateway.

use crate::scene::ViewId;

pub const SIM_REFRESH: &str = "sim.refresh";
pub const SIM_PROGRESS: &str = "sim.progress";
pub const SIM_STATE: &str = "sim.state";
pub const PLOT_DATA: &str = "plot.data";
pub const VIEW_DIRTY: &str = "view.dirty";

/// Coalesce key used for refresh envelopes.
pub const REFRESH_KEY: &str = "refresh";

/// `input.<view_id>`
pub fn input(view: ViewId) -> String {
    format!("input.{}", view.0)
}
