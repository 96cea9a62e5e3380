use super::geometry::{normalize_angle, Point, Rect};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// Item identifier, unique within one view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemId(pub u64);

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "item-{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ItemKind {
    Connector,
    Ellipse,
    Image,
    Line,
    Point,
    Polygon,
    Polyline,
    Radarc,
    Rectangle,
    Text,
}

/// Approximate glyph advance as a fraction of the font size. Text extents
/// are estimated server-side so hit testing does not depend on a font
/// rasterizer.
pub const TEXT_ADVANCE: f64 = 0.6;
pub const TEXT_LINE_HEIGHT: f64 = 1.2;

/// Kind-specific geometry in world coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Geometry {
    Connector {
        from: ItemId,
        to: ItemId,
    },
    Ellipse {
        center: Point,
        rx: f64,
        ry: f64,
    },
    Image {
        bounds: Rect,
        source: String,
    },
    Line {
        a: Point,
        b: Point,
    },
    Point {
        at: Point,
    },
    Polygon {
        vertices: Vec<Point>,
    },
    Polyline {
        vertices: Vec<Point>,
    },
    /// Pie slice; angles in radians, counter-clockwise from +x.
    Radarc {
        center: Point,
        radius: f64,
        start: f64,
        end: f64,
    },
    Rectangle {
        rect: Rect,
    },
    /// `anchor` is the top-left corner of the first line.
    Text {
        anchor: Point,
        lines: Vec<String>,
        font_size: f64,
    },
}

impl Geometry {
    pub fn kind(&self) -> ItemKind {
        match self {
            Geometry::Connector { .. } => ItemKind::Connector,
            Geometry::Ellipse { .. } => ItemKind::Ellipse,
            Geometry::Image { .. } => ItemKind::Image,
            Geometry::Line { .. } => ItemKind::Line,
            Geometry::Point { .. } => ItemKind::Point,
            Geometry::Polygon { .. } => ItemKind::Polygon,
            Geometry::Polyline { .. } => ItemKind::Polyline,
            Geometry::Radarc { .. } => ItemKind::Radarc,
            Geometry::Rectangle { .. } => ItemKind::Rectangle,
            Geometry::Text { .. } => ItemKind::Text,
        }
    }

    /// Checks finiteness and the per-kind shape constraints.
    pub fn validate(&self) -> Result<(), String> {
        let finite = |ps: &[Point]| ps.iter().all(Point::is_finite);
        let ok = match self {
            Geometry::Connector { from, to } => from != to,
            Geometry::Ellipse { center, rx, ry } => {
                center.is_finite() && rx.is_finite() && ry.is_finite() && *rx > 0.0 && *ry > 0.0
            }
            Geometry::Image { bounds, .. } => bounds.has_positive_area(),
            Geometry::Line { a, b } => a.is_finite() && b.is_finite(),
            Geometry::Point { at } => at.is_finite(),
            Geometry::Polygon { vertices } => vertices.len() >= 3 && finite(vertices),
            Geometry::Polyline { vertices } => vertices.len() >= 2 && finite(vertices),
            Geometry::Radarc {
                center,
                radius,
                start,
                end,
            } => center.is_finite() && radius.is_finite() && *radius > 0.0 && start.is_finite() && end.is_finite(),
            Geometry::Rectangle { rect } => rect.is_finite() && rect.width() >= 0.0 && rect.height() >= 0.0,
            Geometry::Text {
                anchor,
                lines,
                font_size,
            } => anchor.is_finite() && !lines.is_empty() && font_size.is_finite() && *font_size > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(format!("invalid {:?} geometry", self.kind()))
        }
    }

    /// Unrotated bounding box. `None` for connectors, whose extent depends
    /// on the items they reference.
    pub fn bounds(&self) -> Option<Rect> {
        Some(match self {
            Geometry::Connector { .. } => return None,
            Geometry::Ellipse { center, rx, ry } => {
                Rect::new(center.x - rx, center.y - ry, center.x + rx, center.y + ry)
            }
            Geometry::Image { bounds, .. } => *bounds,
            Geometry::Line { a, b } => Rect::from_corners(*a, *b),
            Geometry::Point { at } => Rect { min: *at, max: *at },
            Geometry::Polygon { vertices } | Geometry::Polyline { vertices } => Rect::bounding(vertices)?,
            Geometry::Radarc { center, radius, .. } => Rect::new(
                center.x - radius,
                center.y - radius,
                center.x + radius,
                center.y + radius,
            ),
            Geometry::Rectangle { rect } => *rect,
            Geometry::Text {
                anchor,
                lines,
                font_size,
            } => {
                let (w, h) = text_extent(lines, *font_size);
                Rect::new(anchor.x, anchor.y - h, anchor.x + w, anchor.y)
            }
        })
    }

    pub(crate) fn translate(&mut self, dx: f64, dy: f64) {
        match self {
            Geometry::Connector { .. } => {}
            Geometry::Ellipse { center, .. } | Geometry::Radarc { center, .. } => {
                *center = center.translate(dx, dy)
            }
            Geometry::Image { bounds, .. } => *bounds = bounds.translate(dx, dy),
            Geometry::Line { a, b } => {
                *a = a.translate(dx, dy);
                *b = b.translate(dx, dy);
            }
            Geometry::Point { at } => *at = at.translate(dx, dy),
            Geometry::Polygon { vertices } | Geometry::Polyline { vertices } => {
                for v in vertices.iter_mut() {
                    *v = v.translate(dx, dy);
                }
            }
            Geometry::Rectangle { rect } => *rect = rect.translate(dx, dy),
            Geometry::Text { anchor, .. } => *anchor = anchor.translate(dx, dy),
        }
    }

    /// Maps the geometry from its current bounding box onto `target`.
    pub(crate) fn fit_to(&mut self, target: Rect) {
        let Some(old) = self.bounds() else { return };
        let map = |p: Point| -> Point {
            let x = if old.width() > 0.0 {
                target.min.x + (p.x - old.min.x) * target.width() / old.width()
            } else {
                target.center().x
            };
            let y = if old.height() > 0.0 {
                target.min.y + (p.y - old.min.y) * target.height() / old.height()
            } else {
                target.center().y
            };
            Point::new(x, y)
        };
        match self {
            Geometry::Connector { .. } => {}
            Geometry::Ellipse { center, rx, ry } => {
                *center = target.center();
                *rx = 0.5 * target.width();
                *ry = 0.5 * target.height();
            }
            Geometry::Image { bounds, .. } => *bounds = target,
            Geometry::Line { a, b } => {
                *a = map(*a);
                *b = map(*b);
            }
            Geometry::Point { at } => *at = target.center(),
            Geometry::Polygon { vertices } | Geometry::Polyline { vertices } => {
                for v in vertices.iter_mut() {
                    *v = map(*v);
                }
            }
            Geometry::Radarc { center, radius, .. } => {
                *center = target.center();
                *radius = 0.5 * target.width().min(target.height());
            }
            Geometry::Rectangle { rect } => *rect = target,
            Geometry::Text {
                anchor,
                lines,
                font_size,
            } => {
                let rows = lines.len() as f64;
                *font_size = target.height() / (rows * TEXT_LINE_HEIGHT);
                *anchor = Point::new(target.min.x, target.max.y);
            }
        }
    }
}

pub fn text_extent(lines: &[String], font_size: f64) -> (f64, f64) {
    let widest = lines.iter().map(|l| l.chars().count()).max().unwrap_or(0) as f64;
    (
        widest * TEXT_ADVANCE * font_size,
        lines.len() as f64 * TEXT_LINE_HEIGHT * font_size,
    )
}

/// RGBA color.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Color(pub [u8; 4]);

impl Color {
    pub const BLACK: Color = Color([0, 0, 0, 255]);
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Style {
    pub stroke: Color,
    #[serde(default)]
    pub fill: Option<Color>,
    /// Pixels.
    pub line_width: f64,
}

impl Default for Style {
    fn default() -> Self {
        Self {
            stroke: Color::BLACK,
            fill: None,
            line_width: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Capabilities {
    pub draggable: bool,
    pub rotatable: bool,
    pub selectable: bool,
    pub resizable: bool,
    pub lockable: bool,
    pub deletable: bool,
    pub editable: bool,
}

impl Default for Capabilities {
    fn default() -> Self {
        Self::all()
    }
}

impl Capabilities {
    pub const fn all() -> Self {
        Self {
            draggable: true,
            rotatable: true,
            selectable: true,
            resizable: true,
            lockable: true,
            deletable: true,
            editable: true,
        }
    }

    pub const fn none() -> Self {
        Self {
            draggable: false,
            rotatable: false,
            selectable: false,
            resizable: false,
            lockable: false,
            deletable: false,
            editable: false,
        }
    }

    /// Connectors follow their endpoints, so they cannot be moved directly.
    pub const fn connector() -> Self {
        Self {
            draggable: false,
            rotatable: false,
            resizable: false,
            ..Self::all()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub id: ItemId,
    pub geometry: Geometry,
    /// Radians about the bounding-box centroid, normalized to `[0, 2π)`.
    pub rotation: f64,
    pub style: Style,
    pub caps: Capabilities,
    pub locked: bool,
    pub selected: bool,
    pub metadata: BTreeMap<String, String>,
}

impl Item {
    pub fn kind(&self) -> ItemKind {
        self.geometry.kind()
    }

    pub(crate) fn rotate(&mut self, delta: f64) {
        self.rotation = normalize_angle(self.rotation + delta);
    }
}

/// Everything needed to create an item; the view assigns the id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemSpec {
    pub geometry: Geometry,
    #[serde(default)]
    pub rotation: f64,
    #[serde(default)]
    pub style: Style,
    #[serde(default)]
    pub caps: Option<Capabilities>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl ItemSpec {
    pub fn new(geometry: Geometry) -> Self {
        Self {
            geometry,
            rotation: 0.0,
            style: Style::default(),
            caps: None,
            metadata: BTreeMap::new(),
        }
    }

    pub fn rectangle(rect: Rect) -> Self {
        Self::new(Geometry::Rectangle { rect })
    }

    pub fn connector(from: ItemId, to: ItemId) -> Self {
        Self::new(Geometry::Connector { from, to })
    }

    pub fn with_caps(mut self, caps: Capabilities) -> Self {
        self.caps = Some(caps);
        self
    }

    pub fn with_style(mut self, style: Style) -> Self {
        self.style = style;
        self
    }

    pub fn with_rotation(mut self, rotation: f64) -> Self {
        self.rotation = rotation;
        self
    }

    pub fn with_metadata(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.metadata.insert(key.into(), value.into());
        self
    }
}

/// A user edit applied through [`super::View::apply_item_edit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum ItemEdit {
    Drag { dx: f64, dy: f64 },
    Rotate { dtheta: f64 },
    Resize { bounds: Rect },
    SetStyle { style: Style },
    SetLocked { locked: bool },
    Select { selected: bool },
    Delete,
}
