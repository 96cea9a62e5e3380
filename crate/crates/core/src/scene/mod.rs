//! Desktop → view → layer → item containment hierarchy.
//!
//! Every view carries two reserved layers that pin the drawing order: the
//! connection layer is always first (connectors render underneath
//! everything) and the annotation layer is always last. User layers live
//! between them and can be added, reordered, hidden and removed; the
//! reserved pair can only be hidden.
//!
//! Items are stored in world coordinates. The view's affine viewport maps
//! world to screen, so panning and zooming never touch item geometry.
//!
//! All of this state is owned by a single context. Other threads talk to
//! it through [`crate::messaging`]; cloned [`View`]s serve as immutable
//! snapshots.

pub mod geometry;
pub mod item;

pub use geometry::{Affine2, Point, Rect};
pub use item::{Capabilities, Color, Geometry, Item, ItemEdit, ItemId, ItemKind, ItemSpec, Style};

use geometry::{polygon_contains, segment_distance, wedge_contains};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Minimum pick radius for stroked primitives, in pixels.
pub const MIN_PICK_PX: f64 = 4.0;

/// Screen size assigned to new views.
pub const DEFAULT_SCREEN: (f64, f64) = (800.0, 600.0);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SceneError {
    #[error("world bounds must be finite with positive area")]
    DegenerateBounds,
    #[error("unknown view {0}")]
    UnknownView(ViewId),
    #[error("unknown layer {0}")]
    UnknownLayer(LayerId),
    #[error("unknown item {0}")]
    UnknownItem(ItemId),
    #[error("layer {0} is reserved and cannot be moved or removed")]
    ReservedLayer(LayerId),
    #[error("position {position} would displace a reserved layer (valid range 1..={max})")]
    InvalidPosition { position: usize, max: usize },
    #[error("connector items may only be placed on the connection layer")]
    ConnectorPlacement,
    #[error("connector references missing or invalid item {0}")]
    DanglingReference(ItemId),
    #[error("{0}")]
    InvalidGeometry(String),
    #[error("item {0} is locked")]
    Locked(ItemId),
    #[error("item {item} is not {capability}")]
    CapabilityDenied {
        item: ItemId,
        capability: &'static str,
    },
    #[error("viewport transform is singular")]
    SingularViewport,
    #[error("non-finite input")]
    NonFinite,
}

impl SceneError {
    /// Stable short code used on the wire and across the C ABI.
    pub fn code(&self) -> &'static str {
        match self {
            SceneError::DegenerateBounds => "DegenerateBounds",
            SceneError::UnknownView(_) => "UnknownView",
            SceneError::UnknownLayer(_) => "UnknownLayer",
            SceneError::UnknownItem(_) => "UnknownItem",
            SceneError::ReservedLayer(_) => "ReservedLayer",
            SceneError::InvalidPosition { .. } => "InvalidPosition",
            SceneError::ConnectorPlacement => "ConnectorPlacement",
            SceneError::DanglingReference(_) => "DanglingReference",
            SceneError::InvalidGeometry(_) => "InvalidGeometry",
            SceneError::Locked(_) => "Locked",
            SceneError::CapabilityDenied { .. } => "CapabilityDenied",
            SceneError::SingularViewport => "SingularViewport",
            SceneError::NonFinite => "NonFinite",
        }
    }
}

pub type Result<T> = std::result::Result<T, SceneError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ViewId(pub u64);

impl fmt::Display for ViewId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "view-{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LayerId(pub u64);

impl fmt::Display for LayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "layer-{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewKind {
    Content2d,
    Content3d,
    Plot,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reserved {
    None,
    Connection,
    Annotation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub id: LayerId,
    pub name: String,
    pub visible: bool,
    pub reserved: Reserved,
    pub items: Vec<Item>,
}

impl Layer {
    fn new(id: LayerId, name: impl Into<String>, reserved: Reserved) -> Self {
        Self {
            id,
            name: name.into(),
            visible: true,
            reserved,
            items: Vec::new(),
        }
    }

    pub fn is_reserved(&self) -> bool {
        self.reserved != Reserved::None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct View {
    pub id: ViewId,
    pub title: String,
    pub kind: ViewKind,
    pub world_bounds: Rect,
    /// Screen size in pixels used by fit-style tools.
    pub screen_size: (f64, f64),
    viewport: Affine2,
    layers: Vec<Layer>,
    next_layer: u64,
    next_item: u64,
}

impl View {
    pub fn new(id: ViewId, title: impl Into<String>, kind: ViewKind, world_bounds: Rect) -> Result<Self> {
        if !world_bounds.has_positive_area() {
            return Err(SceneError::DegenerateBounds);
        }
        let mut view = Self {
            id,
            title: title.into(),
            kind,
            world_bounds,
            screen_size: DEFAULT_SCREEN,
            viewport: Affine2::IDENTITY,
            layers: Vec::new(),
            next_layer: 0,
            next_item: 0,
        };
        let connection = view.fresh_layer_id();
        let annotation = view.fresh_layer_id();
        view.layers.push(Layer::new(connection, "connection", Reserved::Connection));
        view.layers.push(Layer::new(annotation, "annotation", Reserved::Annotation));
        view.viewport = fit_viewport(world_bounds, view.screen_size);
        Ok(view)
    }

    fn fresh_layer_id(&mut self) -> LayerId {
        self.next_layer += 1;
        LayerId(self.next_layer)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer(&self, id: LayerId) -> Result<&Layer> {
        self.layers
            .iter()
            .find(|l| l.id == id)
            .ok_or(SceneError::UnknownLayer(id))
    }

    pub fn layer_by_name(&self, name: &str) -> Option<&Layer> {
        self.layers.iter().find(|l| l.name == name)
    }

    pub fn connection_layer(&self) -> LayerId {
        self.layers[0].id
    }

    pub fn annotation_layer(&self) -> LayerId {
        self.layers[self.layers.len() - 1].id
    }

    fn layer_index(&self, id: LayerId) -> Result<usize> {
        self.layers
            .iter()
            .position(|l| l.id == id)
            .ok_or(SceneError::UnknownLayer(id))
    }

    /// Inserts a user layer directly beneath the annotation layer.
    pub fn add_layer(&mut self, name: impl Into<String>) -> LayerId {
        let id = self.fresh_layer_id();
        let at = self.layers.len() - 1;
        self.layers.insert(at, Layer::new(id, name, Reserved::None));
        id
    }

    /// Moves a user layer to `new_position` in the full layer list.
    pub fn reorder_layer(&mut self, id: LayerId, new_position: usize) -> Result<()> {
        let from = self.layer_index(id)?;
        if self.layers[from].is_reserved() {
            return Err(SceneError::ReservedLayer(id));
        }
        let max = self.layers.len() - 2;
        if new_position < 1 || new_position > max {
            return Err(SceneError::InvalidPosition {
                position: new_position,
                max,
            });
        }
        let layer = self.layers.remove(from);
        self.layers.insert(new_position, layer);
        Ok(())
    }

    /// Removes a user layer with its items and any connector attached to
    /// them. Refused when a locked item would be removed.
    pub fn remove_layer(&mut self, id: LayerId) -> Result<()> {
        let index = self.layer_index(id)?;
        let layer = &self.layers[index];
        if layer.is_reserved() {
            return Err(SceneError::ReservedLayer(id));
        }
        let doomed: Vec<ItemId> = layer.items.iter().map(|i| i.id).collect();
        if let Some(locked) = layer.items.iter().find(|i| i.locked) {
            return Err(SceneError::Locked(locked.id));
        }
        if let Some(c) = self.attached_connectors(&doomed).find(|c| c.locked) {
            return Err(SceneError::Locked(c.id));
        }
        self.layers.remove(index);
        self.sweep_connectors(&doomed);
        Ok(())
    }

    pub fn set_layer_visibility(&mut self, id: LayerId, visible: bool) -> Result<()> {
        let index = self.layer_index(id)?;
        self.layers[index].visible = visible;
        Ok(())
    }

    pub fn item(&self, id: ItemId) -> Result<&Item> {
        self.locate(id)
            .map(|(l, i)| &self.layers[l].items[i])
            .ok_or(SceneError::UnknownItem(id))
    }

    /// Layer holding `id`.
    pub fn item_layer(&self, id: ItemId) -> Result<LayerId> {
        self.locate(id)
            .map(|(l, _)| self.layers[l].id)
            .ok_or(SceneError::UnknownItem(id))
    }

    fn locate(&self, id: ItemId) -> Option<(usize, usize)> {
        self.layers.iter().enumerate().find_map(|(li, layer)| {
            layer
                .items
                .iter()
                .position(|item| item.id == id)
                .map(|ii| (li, ii))
        })
    }

    pub fn items(&self) -> impl Iterator<Item = &Item> {
        self.layers.iter().flat_map(|l| l.items.iter())
    }

    fn attached_connectors<'a>(&'a self, targets: &'a [ItemId]) -> impl Iterator<Item = &'a Item> + 'a {
        self.layers[0].items.iter().filter(move |c| match c.geometry {
            Geometry::Connector { from, to } => targets.contains(&from) || targets.contains(&to),
            _ => false,
        })
    }

    fn sweep_connectors(&mut self, removed: &[ItemId]) {
        self.layers[0].items.retain(|c| match c.geometry {
            Geometry::Connector { from, to } => !removed.contains(&from) && !removed.contains(&to),
            _ => true,
        });
    }

    /// Appends an item to the top of `layer`.
    pub fn add_item(&mut self, layer: LayerId, spec: ItemSpec) -> Result<ItemId> {
        let index = self.layer_index(layer)?;
        spec.geometry.validate().map_err(SceneError::InvalidGeometry)?;
        if !spec.rotation.is_finite() || !spec.style.line_width.is_finite() {
            return Err(SceneError::NonFinite);
        }
        let caps = match spec.geometry {
            Geometry::Connector { from, to } => {
                if self.layers[index].reserved != Reserved::Connection {
                    return Err(SceneError::ConnectorPlacement);
                }
                for end in [from, to] {
                    match self.item(end) {
                        Ok(target) if target.kind() != ItemKind::Connector => {}
                        _ => return Err(SceneError::DanglingReference(end)),
                    }
                }
                spec.caps.unwrap_or(Capabilities::connector())
            }
            _ => spec.caps.unwrap_or_default(),
        };
        self.next_item += 1;
        let id = ItemId(self.next_item);
        let mut item = Item {
            id,
            geometry: spec.geometry,
            rotation: 0.0,
            style: spec.style,
            caps,
            locked: false,
            selected: false,
            metadata: spec.metadata,
        };
        item.rotate(spec.rotation);
        self.layers[index].items.push(item);
        Ok(id)
    }

    /// Applies one user edit, enforcing lock state and capabilities.
    pub fn apply_item_edit(&mut self, id: ItemId, edit: &ItemEdit) -> Result<()> {
        let (li, ii) = self.locate(id).ok_or(SceneError::UnknownItem(id))?;
        let item = &self.layers[li].items[ii];
        let unlocking = matches!(edit, ItemEdit::SetLocked { locked: false });
        if item.locked && !unlocking {
            return Err(SceneError::Locked(id));
        }
        let (allowed, capability) = match edit {
            ItemEdit::Drag { .. } => (item.caps.draggable, "draggable"),
            ItemEdit::Rotate { .. } => (item.caps.rotatable, "rotatable"),
            ItemEdit::Resize { .. } => (item.caps.resizable, "resizable"),
            ItemEdit::SetStyle { .. } => (item.caps.editable, "editable"),
            ItemEdit::SetLocked { .. } => (item.caps.lockable, "lockable"),
            ItemEdit::Select { .. } => (item.caps.selectable, "selectable"),
            ItemEdit::Delete => (item.caps.deletable, "deletable"),
        };
        if !allowed {
            return Err(SceneError::CapabilityDenied { item: id, capability });
        }
        match edit {
            ItemEdit::Drag { dx, dy } => {
                if !dx.is_finite() || !dy.is_finite() {
                    return Err(SceneError::NonFinite);
                }
                self.layers[li].items[ii].geometry.translate(*dx, *dy);
            }
            ItemEdit::Rotate { dtheta } => {
                if !dtheta.is_finite() {
                    return Err(SceneError::NonFinite);
                }
                self.layers[li].items[ii].rotate(*dtheta);
            }
            ItemEdit::Resize { bounds } => {
                if !bounds.is_finite() {
                    return Err(SceneError::NonFinite);
                }
                let mut geometry = item.geometry.clone();
                geometry.fit_to(*bounds);
                geometry.validate().map_err(SceneError::InvalidGeometry)?;
                self.layers[li].items[ii].geometry = geometry;
            }
            ItemEdit::SetStyle { style } => {
                if !style.line_width.is_finite() || style.line_width < 0.0 {
                    return Err(SceneError::NonFinite);
                }
                self.layers[li].items[ii].style = style.clone();
            }
            ItemEdit::SetLocked { locked } => self.layers[li].items[ii].locked = *locked,
            ItemEdit::Select { selected } => self.layers[li].items[ii].selected = *selected,
            ItemEdit::Delete => {
                if let Some(c) = self.attached_connectors(&[id]).find(|c| c.locked) {
                    return Err(SceneError::Locked(c.id));
                }
                self.layers[li].items.remove(ii);
                self.sweep_connectors(&[id]);
            }
        }
        Ok(())
    }

    /// Visible `(layer, item)` pairs, bottom to top.
    pub fn render_order(&self) -> Vec<(LayerId, ItemId)> {
        self.layers
            .iter()
            .filter(|l| l.visible)
            .flat_map(|l| l.items.iter().map(move |i| (l.id, i.id)))
            .collect()
    }

    /// Items under `screen`, topmost first.
    pub fn hit_test(&self, screen: Point) -> Vec<ItemId> {
        let Ok(world) = self.screen_to_world(screen) else {
            return Vec::new();
        };
        let px = self.viewport.pixel_size();
        let mut hits = Vec::new();
        for layer in self.layers.iter().rev().filter(|l| l.visible) {
            for item in layer.items.iter().rev() {
                let pick = item.style.line_width.max(MIN_PICK_PX) * px;
                if self.item_contains(item, world, pick) {
                    hits.push(item.id);
                }
            }
        }
        hits
    }

    /// Bounding-box centroid of an item; rotation-invariant because
    /// rotation pivots on this point.
    pub fn item_centroid(&self, item: &Item) -> Option<Point> {
        match &item.geometry {
            Geometry::Connector { from, to } => {
                let (a, b) = self.connector_endpoints(*from, *to)?;
                Some(Point::new(0.5 * (a.x + b.x), 0.5 * (a.y + b.y)))
            }
            g => g.bounds().map(|b| b.center()),
        }
    }

    /// Current endpoints of a connector, derived from the referenced items.
    pub fn connector_endpoints(&self, from: ItemId, to: ItemId) -> Option<(Point, Point)> {
        let a = self.item(from).ok()?.geometry.bounds()?.center();
        let b = self.item(to).ok()?.geometry.bounds()?.center();
        Some((a, b))
    }

    /// World-space containment for one item with the given pick radius.
    pub fn item_contains(&self, item: &Item, world: Point, pick: f64) -> bool {
        if let Geometry::Connector { from, to } = item.geometry {
            return self
                .connector_endpoints(from, to)
                .is_some_and(|(a, b)| segment_distance(world, a, b) <= pick);
        }
        let Some(bounds) = item.geometry.bounds() else {
            return false;
        };
        let p = if item.rotation != 0.0 {
            world.rotate_about(bounds.center(), -item.rotation)
        } else {
            world
        };
        match &item.geometry {
            Geometry::Connector { .. } => false,
            Geometry::Ellipse { center, rx, ry } => {
                let u = (p.x - center.x) / rx;
                let v = (p.y - center.y) / ry;
                u * u + v * v <= 1.0
            }
            Geometry::Image { bounds, .. } => bounds.contains(p),
            Geometry::Rectangle { rect } => rect.contains(p),
            Geometry::Text { .. } => bounds.contains(p),
            Geometry::Line { a, b } => segment_distance(p, *a, *b) <= pick,
            Geometry::Point { at } => p.distance(*at) <= pick,
            Geometry::Polygon { vertices } => polygon_contains(vertices, p),
            Geometry::Polyline { vertices } => vertices
                .windows(2)
                .any(|w| segment_distance(p, w[0], w[1]) <= pick),
            Geometry::Radarc {
                center,
                radius,
                start,
                end,
            } => wedge_contains(*center, *radius, *start, *end, p),
        }
    }

    pub fn viewport(&self) -> Affine2 {
        self.viewport
    }

    pub fn set_viewport(&mut self, viewport: Affine2) -> Result<()> {
        if !viewport.is_invertible() {
            return Err(SceneError::SingularViewport);
        }
        self.viewport = viewport;
        Ok(())
    }

    pub fn world_to_screen(&self, world: Point) -> Result<Point> {
        if !self.viewport.is_invertible() {
            return Err(SceneError::SingularViewport);
        }
        Ok(self.viewport.apply(world))
    }

    pub fn screen_to_world(&self, screen: Point) -> Result<Point> {
        let inv = self.viewport.inverse().ok_or(SceneError::SingularViewport)?;
        Ok(inv.apply(screen))
    }

    /// Shifts the view by a screen-space offset.
    pub fn pan(&mut self, dx: f64, dy: f64) -> Result<()> {
        self.set_viewport(self.viewport.then(&Affine2::translation(dx, dy)))
    }

    /// Scales about a fixed screen point; `factor > 1` zooms in.
    pub fn zoom(&mut self, factor: f64, about: Point) -> Result<()> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(SceneError::NonFinite);
        }
        let z = Affine2::translation(-about.x, -about.y)
            .then(&Affine2::scale(factor, factor))
            .then(&Affine2::translation(about.x, about.y));
        self.set_viewport(self.viewport.then(&z))
    }

    /// Zooms so the screen rectangle `rect` fills the view.
    pub fn box_zoom(&mut self, rect: Rect) -> Result<()> {
        let a = self.screen_to_world(rect.min)?;
        let b = self.screen_to_world(rect.max)?;
        let world = Rect::from_corners(a, b);
        if !world.has_positive_area() {
            return Err(SceneError::DegenerateBounds);
        }
        self.set_viewport(fit_viewport(world, self.screen_size))
    }

    /// Restores the initial world-bounds fit.
    pub fn reset_viewport(&mut self) {
        self.viewport = fit_viewport(self.world_bounds, self.screen_size);
    }
}

/// Uniform-scale map of `world` into a `screen` rectangle, centered, with
/// world +y pointing up the screen.
pub fn fit_viewport(world: Rect, screen: (f64, f64)) -> Affine2 {
    let scale = (screen.0 / world.width()).min(screen.1 / world.height());
    let c = world.center();
    Affine2 {
        a: scale,
        b: 0.0,
        c: 0.5 * screen.0 - scale * c.x,
        d: 0.0,
        e: -scale,
        f: 0.5 * screen.1 + scale * c.y,
    }
}

/// Root of the hierarchy: an ordered set of views.
#[derive(Debug, Clone, Default)]
pub struct Desktop {
    views: Vec<View>,
    active: Option<ViewId>,
    next_view: u64,
}

impl Desktop {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn create_view(&mut self, title: impl Into<String>, kind: ViewKind, world_bounds: Rect) -> Result<ViewId> {
        let id = ViewId(self.next_view + 1);
        let view = View::new(id, title, kind, world_bounds)?;
        self.next_view += 1;
        self.views.push(view);
        if self.active.is_none() {
            self.active = Some(id);
        }
        Ok(id)
    }

    pub fn close_view(&mut self, id: ViewId) -> Result<View> {
        let index = self
            .views
            .iter()
            .position(|v| v.id == id)
            .ok_or(SceneError::UnknownView(id))?;
        let view = self.views.remove(index);
        if self.active == Some(id) {
            self.active = self.views.first().map(|v| v.id);
        }
        Ok(view)
    }

    pub fn views(&self) -> &[View] {
        &self.views
    }

    pub fn view(&self, id: ViewId) -> Result<&View> {
        self.views
            .iter()
            .find(|v| v.id == id)
            .ok_or(SceneError::UnknownView(id))
    }

    pub fn view_mut(&mut self, id: ViewId) -> Result<&mut View> {
        self.views
            .iter_mut()
            .find(|v| v.id == id)
            .ok_or(SceneError::UnknownView(id))
    }

    pub fn active_view(&self) -> Option<ViewId> {
        self.active
    }

    pub fn set_active_view(&mut self, id: ViewId) -> Result<()> {
        self.view(id)?;
        self.active = Some(id);
        Ok(())
    }
}
