//! Frame snapshots and per-view send scheduling.

use super::wire::{Frame, FrameEntry, FrameLayer, PointBatch};
use crate::scene::{Geometry, View, ViewId};
use std::collections::BTreeMap;

/// Full snapshot of a view's visible layers in render order.
pub fn snapshot_frame(view: &View, seq: u64) -> Frame {
    let layers = view
        .layers()
        .iter()
        .filter(|l| l.visible)
        .map(|l| FrameLayer {
            layer_id: l.id,
            name: l.name.clone(),
            visible: l.visible,
            reserved: l.reserved,
            items: l
                .items
                .iter()
                .map(|item| FrameEntry::Item {
                    item: item.clone(),
                    anchors: match item.geometry {
                        Geometry::Connector { from, to } => view.connector_endpoints(from, to),
                        _ => None,
                    },
                })
                .collect(),
        })
        .collect();
    Frame {
        view_id: view.id,
        seq,
        view_kind: view.kind,
        title: view.title.clone(),
        viewport: view.viewport(),
        screen_size: view.screen_size,
        layers,
        plot: None,
    }
}

impl Frame {
    /// Replaces the entries of the named layer with a point batch. Does
    /// nothing if that layer is hidden (and so absent from the frame).
    pub fn set_point_batch(&mut self, layer_name: &str, batch: PointBatch) {
        if let Some(layer) = self.layers.iter_mut().find(|l| l.name == layer_name) {
            layer.items = vec![FrameEntry::Points { batch }];
        }
    }

    pub fn point_count(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| &l.items)
            .map(|e| match e {
                FrameEntry::Points { batch } => batch.count,
                FrameEntry::Item { .. } => 0,
            })
            .sum()
    }
}

/// Projects positions for a content3d view.
#[cfg(feature = "view3d")]
pub fn project_batch(
    camera: &crate::view3d::Camera,
    aspect: f64,
    positions: &[[f64; 3]],
    scalar: Option<&[f64]>,
) -> Result<PointBatch, crate::view3d::View3dError> {
    let cloud = crate::view3d::PointCloud {
        positions: positions.to_vec(),
        color_scalar: None,
    };
    let projected = crate::view3d::project_cloud(camera, aspect, &cloud)?;
    let mut coords = Vec::with_capacity(projected.len() * 3);
    for p in &projected {
        coords.extend([p.x as f32, p.y as f32, p.depth as f32]);
    }
    let scalar = scalar.map(|s| projected.iter().map(|p| s[p.index] as f32).collect());
    Ok(PointBatch {
        count: projected.len(),
        coords,
        scalar,
    })
}

#[derive(Debug, Clone, Default)]
struct Slot {
    dirty: bool,
    last_sent: Option<f64>,
    seq: u64,
}

/// Latest-wins frame pacing: any number of dirty marks collapse into one
/// pending frame, and a view is sent at most once per interval.
#[derive(Debug, Clone)]
pub struct FrameScheduler {
    interval_ms: f64,
    slots: BTreeMap<ViewId, Slot>,
    frames_sent: u64,
}

impl FrameScheduler {
    pub fn new(interval_ms: f64) -> Self {
        Self {
            interval_ms: interval_ms.max(0.0),
            slots: BTreeMap::new(),
            frames_sent: 0,
        }
    }

    pub fn interval_ms(&self) -> f64 {
        self.interval_ms
    }

    pub fn mark_dirty(&mut self, view: ViewId) {
        self.slots.entry(view).or_default().dirty = true;
    }

    pub fn forget(&mut self, view: ViewId) {
        self.slots.remove(&view);
    }

    pub fn is_dirty(&self, view: ViewId) -> bool {
        self.slots.get(&view).is_some_and(|s| s.dirty)
    }

    /// Views whose frame should go out at `now_ms`, each with its next
    /// sequence number. Marks them clean.
    pub fn take_due(&mut self, now_ms: f64) -> Vec<(ViewId, u64)> {
        let mut due = Vec::new();
        for (id, slot) in &mut self.slots {
            let ready = slot.last_sent.is_none_or(|t| now_ms - t >= self.interval_ms);
            if slot.dirty && ready {
                slot.dirty = false;
                slot.last_sent = Some(now_ms);
                slot.seq += 1;
                due.push((*id, slot.seq));
            }
        }
        self.frames_sent += due.len() as u64;
        due
    }

    pub fn frames_sent(&self) -> u64 {
        self.frames_sent
    }
}
