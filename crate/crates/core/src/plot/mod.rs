//! Plot documents: data series, histograms, fits and their persistence.

mod fit;
mod histogram;

pub use fit::{
    fit_histogram, fit_points, fit_series, gaussian_sum_eval, gaussian_sum_gradient, FitError, FitFunction,
    FitKind, FitModel, FitOptions, ModelSpec, DEFAULT_MAX_ITER, DEFAULT_REL_TOL,
};
pub use histogram::{Histogram1D, Histogram2D};

use crate::messaging::{Bus, BusError, Envelope, ScopeFilter, SubscriptionId};
use crate::scene::Color;
use serde::{Deserialize, Serialize};
use std::cell::RefCell;
use std::rc::Rc;

pub const FORMAT_NAME: &str = "mdi-plot";
pub const FORMAT_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlotError {
    #[error("invalid histogram: {0}")]
    InvalidHistogram(String),
    #[error("non-finite value")]
    NonFinite,
    #[error("unknown series {0:?}")]
    UnknownSeries(String),
    #[error("duplicate series {0:?}")]
    DuplicateSeries(String),
    #[error("malformed plot document at line {line}, column {column} (byte {offset}): {message}")]
    Malformed {
        line: usize,
        column: usize,
        offset: usize,
        message: String,
    },
    #[error("unsupported format {format:?} version {version:?}")]
    UnsupportedVersion { format: String, version: String },
    #[error(transparent)]
    Bus(#[from] BusError),
}

impl PlotError {
    pub fn code(&self) -> &'static str {
        match self {
            PlotError::InvalidHistogram(_) => "invalid_histogram",
            PlotError::NonFinite => "non_finite",
            PlotError::UnknownSeries(_) => "unknown_series",
            PlotError::DuplicateSeries(_) => "duplicate_series",
            PlotError::Malformed { .. } => "malformed",
            PlotError::UnsupportedVersion { .. } => "unsupported_version",
            PlotError::Bus(_) => "bus",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Marker {
    #[default]
    None,
    Circle,
    Square,
    Cross,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesStyle {
    pub color: Color,
    pub line_width: f64,
    pub marker: Marker,
}

impl Default for SeriesStyle {
    fn default() -> Self {
        Self {
            color: Color([31, 119, 180, 255]),
            line_width: 1.5,
            marker: Marker::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSeries {
    pub name: String,
    pub points: Vec<[f64; 2]>,
    #[serde(default)]
    pub style: SeriesStyle,
}

impl DataSeries {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            points: Vec::new(),
            style: SeriesStyle::default(),
        }
    }

    /// Appends a point; `x` must be finite, `y` may be anything a
    /// simulation reports except NaN/inf.
    pub fn push(&mut self, x: f64, y: f64) -> Result<(), PlotError> {
        if !(x.is_finite() && y.is_finite()) {
            return Err(PlotError::NonFinite);
        }
        self.points.push([x, y]);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// A fit attached to the document, remembering what it was fitted to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub target: String,
    pub model: FitModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct PlotDocument {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    #[serde(default)]
    pub series: Vec<DataSeries>,
    #[serde(default)]
    pub histograms1d: Vec<Histogram1D>,
    #[serde(default)]
    pub histograms2d: Vec<Histogram2D>,
    #[serde(default)]
    pub fits: Vec<FitRecord>,
}

#[derive(Serialize)]
struct EnvelopeOut<'a> {
    format: &'a str,
    version: &'a str,
    #[serde(flatten)]
    document: &'a PlotDocument,
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: String,
}

#[derive(Deserialize)]
struct EnvelopeIn {
    #[serde(flatten)]
    document: PlotDocument,
}

impl PlotDocument {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            ..Self::default()
        }
    }

    pub fn add_series(&mut self, series: DataSeries) -> Result<(), PlotError> {
        if self.series_by_name(&series.name).is_some() {
            return Err(PlotError::DuplicateSeries(series.name));
        }
        self.series.push(series);
        Ok(())
    }

    pub fn series_by_name(&self, name: &str) -> Option<&DataSeries> {
        self.series.iter().find(|s| s.name == name)
    }

    pub fn series_by_name_mut(&mut self, name: &str) -> Option<&mut DataSeries> {
        self.series.iter_mut().find(|s| s.name == name)
    }

    /// Serializes to pretty-printed, versioned JSON.
    pub fn save(&self) -> Vec<u8> {
        let out = EnvelopeOut {
            format: FORMAT_NAME,
            version: FORMAT_VERSION,
            document: self,
        };
        let mut bytes = serde_json::to_vec_pretty(&out).expect("plot document serializes");
        bytes.push(b'\n');
        bytes
    }

    pub fn load(bytes: &[u8]) -> Result<Self, PlotError> {
        let header: Header = serde_json::from_slice(bytes).map_err(|e| malformed(bytes, &e))?;
        if header.format != FORMAT_NAME || header.version != FORMAT_VERSION {
            return Err(PlotError::UnsupportedVersion {
                format: header.format,
                version: header.version,
            });
        }
        let parsed: EnvelopeIn = serde_json::from_slice(bytes).map_err(|e| malformed(bytes, &e))?;
        Ok(parsed.document)
    }
}

fn malformed(bytes: &[u8], err: &serde_json::Error) -> PlotError {
    PlotError::Malformed {
        line: err.line(),
        column: err.column(),
        offset: byte_offset(bytes, err.line(), err.column()),
        message: err.to_string(),
    }
}

/// Converts serde_json's 1-based line / column into a byte offset.
pub(crate) fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    if line <= 1 {
        return column.saturating_sub(1).min(bytes.len());
    }
    let mut seen = 1;
    for (i, b) in bytes.iter().enumerate() {
        if *b == b'\n' {
            seen += 1;
            if seen == line {
                return (i + column).min(bytes.len());
            }
        }
    }
    bytes.len()
}

/// Appends `{series, x, y}` payloads on `topic` to the named series of
/// `document`. Envelopes naming other series are ignored.
pub fn bind_series_to_topic(
    document: &Rc<RefCell<PlotDocument>>,
    bus: &Bus,
    series_name: &str,
    topic: &str,
) -> Result<SubscriptionId, PlotError> {
    if document.borrow().series_by_name(series_name).is_none() {
        return Err(PlotError::UnknownSeries(series_name.to_string()));
    }
    let doc = Rc::clone(document);
    let name = series_name.to_string();
    let id = bus.subscribe(topic, ScopeFilter::Any, move |env: &Envelope| {
        let Some((series, x, y)) = point_from_payload(env) else {
            log::debug!("ignoring malformed {} payload", env.topic);
            return;
        };
        if series != name {
            return;
        }
        if let Some(s) = doc.borrow_mut().series_by_name_mut(&name) {
            if s.push(x, y).is_err() {
                log::debug!("dropping non-finite point for series {name}");
            }
        }
    })?;
    Ok(id)
}

fn point_from_payload(env: &Envelope) -> Option<(&str, f64, f64)> {
    let series = env.payload.get("series")?.as_str()?;
    let x = env.payload.get("x")?.as_f64()?;
    let y = env.payload.get("y")?.as_f64()?;
    Some((series, x, y))
}
