//! Wire messages exchanged with shells.
//!
//! Each message is one JSON object tagged by `"type"`, carried in one
//! WebSocket text frame (the frame header supplies the length prefix).
//! Unknown fields are ignored on decode.

use super::GatewayError;
use crate::plot::PlotDocument;
use crate::scene::{Affine2, Item, ItemId, LayerId, Point, Reserved, ViewId, ViewKind};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WireMessage {
    Hello { protocol_version: u32 },
    ViewList { views: Vec<ViewInfo> },
    Frame(Frame),
    PlotData(PlotPoint),
    SimState(SimStateInfo),
    Input(Input),
    Error(ErrorInfo),
    /// Reply to a hover input.
    Feedback(Feedback),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewInfo {
    pub view_id: ViewId,
    pub title: String,
    pub kind: ViewKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub view_id: ViewId,
    pub seq: u64,
    pub view_kind: ViewKind,
    pub title: String,
    pub viewport: Affine2,
    pub screen_size: (f64, f64),
    pub layers: Vec<FrameLayer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plot: Option<PlotDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameLayer {
    pub layer_id: LayerId,
    pub name: String,
    pub visible: bool,
    pub reserved: Reserved,
    pub items: Vec<FrameEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "entry", rename_all = "snake_case")]
pub enum FrameEntry {
    Item {
        item: Item,
        /// Resolved endpoints, present for connectors.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        anchors: Option<(Point, Point)>,
    },
    Points { batch: PointBatch },
}

/// Projected points as a flat `[x, y, depth, x, y, depth, ...]` array in
/// NDC, plus an optional per-point scalar for coloring.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PointBatch {
    pub count: usize,
    pub coords: Vec<f32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scalar: Option<Vec<f32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotPoint {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub view_id: Option<ViewId>,
    pub series: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStateInfo {
    pub state: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub previous: Option<String>,
    pub step_count: u64,
    pub sim_time_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    Tool,
    Drag,
    Click,
    Hover,
    LayerToggle,
    SimControl,
    ItemEdit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Input {
    pub kind: InputKind,
    pub view_id: ViewId,
    #[serde(default)]
    pub payload: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorInfo {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feedback {
    pub view_id: ViewId,
    pub world: Point,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item: Option<ItemId>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl WireMessage {
    pub fn error(code: impl Into<String>, message: impl Into<String>) -> Self {
        WireMessage::Error(ErrorInfo {
            code: code.into(),
            message: message.into(),
        })
    }

    pub fn hello() -> Self {
        WireMessage::Hello {
            protocol_version: PROTOCOL_VERSION,
        }
    }
}

pub fn encode(msg: &WireMessage) -> String {
    serde_json::to_string(msg).expect("wire messages serialize")
}

pub fn decode(bytes: &[u8]) -> Result<WireMessage, GatewayError> {
    serde_json::from_slice(bytes).map_err(|e| GatewayError::Malformed {
        line: e.line(),
        column: e.column(),
        offset: crate::plot::byte_offset(bytes, e.line(), e.column()),
        message: e.to_string(),
    })
}
