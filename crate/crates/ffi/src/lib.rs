//! C ABI over `mdi-core`.
//!
//! Every fallible function returns an [`MdiStatus`]. On failure the
//! message is kept per thread and read with [`mdi_last_error_message`].
//! Handles are opaque; release each with its `_free` function. Strings
//! returned through `char **` out-parameters are owned by the caller and
//! released with [`mdi_string_free`]. Panics never cross the boundary.

use mdi_core::gateway::{encode, run_headless, snapshot_frame, GatewayError, ServerConfig, WireMessage};
use mdi_core::kinetics::{compute_entropy, GasParams, GasState, KineticsError};
use mdi_core::plot::{fit_histogram, fit_points, FitError, FitModel, FitOptions, Histogram1D, ModelSpec, PlotError};
use mdi_core::scene::{ItemEdit, ItemId, ItemSpec, LayerId, Point, Rect, SceneError, View, ViewId, ViewKind};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MdiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Malformed = 4,
    NotFound = 5,
    Locked = 6,
    Denied = 7,
    FitFailed = 8,
    Io = 9,
    Unsupported = 10,
    BufferTooSmall = 11,
    Panic = 12,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MdiViewKind {
    Content2d = 0,
    Content3d = 1,
    Plot = 2,
    Text = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MdiModel {
    /// `order` is the degree; parameters are coefficients from x⁰ up.
    Polynomial = 0,
    /// `order` is the component count; parameters are (A, μ, σ) triples.
    GaussianSum = 1,
}

/// Settings for [`mdi_run_headless`]; start from
/// [`mdi_headless_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MdiHeadlessConfig {
    pub steps: u64,
    pub seed: u64,
    pub particles: usize,
    pub grid_m: usize,
    pub refresh_ms: u64,
}

/// A scene view with its layers and items.
pub struct MdiView(View);

/// A fixed-bin 1D histogram.
pub struct MdiHistogram(Histogram1D);

/// Free-expansion gas state stepped synchronously.
pub struct MdiGas(GasState);

#[derive(Debug, thiserror::Error)]
enum FfiError {
    #[error("{0} is null")]
    Null(&'static str),
    #[error("{0} is not valid UTF-8")]
    Utf8(&'static str),
    #[error("{0}")]
    Invalid(String),
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("buffer holds {capacity} values but {needed} are needed")]
    BufferTooSmall { needed: usize, capacity: usize },
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Plot(#[from] PlotError),
    #[error(transparent)]
    Kinetics(#[from] KineticsError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

fn scene_status(e: &SceneError) -> MdiStatus {
    match e {
        SceneError::UnknownView(_) | SceneError::UnknownLayer(_) | SceneError::UnknownItem(_) => MdiStatus::NotFound,
        SceneError::Locked(_) => MdiStatus::Locked,
        SceneError::ReservedLayer(_) | SceneError::CapabilityDenied { .. } | SceneError::ConnectorPlacement => {
            MdiStatus::Denied
        }
        _ => MdiStatus::InvalidArgument,
    }
}

impl FfiError {
    fn status(&self) -> MdiStatus {
        match self {
            FfiError::Null(_) => MdiStatus::NullPointer,
            FfiError::Utf8(_) => MdiStatus::InvalidUtf8,
            FfiError::Invalid(_) | FfiError::Kinetics(_) => MdiStatus::InvalidArgument,
            FfiError::Json(_) => MdiStatus::Malformed,
            FfiError::BufferTooSmall { .. } => MdiStatus::BufferTooSmall,
            FfiError::Scene(e) => scene_status(e),
            FfiError::Fit(_) => MdiStatus::FitFailed,
            FfiError::Plot(PlotError::Malformed { .. }) => MdiStatus::Malformed,
            FfiError::Plot(_) => MdiStatus::InvalidArgument,
            FfiError::Gateway(e) => match e {
                GatewayError::Export(_) | GatewayError::Io(_) => MdiStatus::Io,
                GatewayError::Unsupported(_) => MdiStatus::Unsupported,
                GatewayError::Scene(s) => scene_status(s),
                GatewayError::Malformed { .. } => MdiStatus::Malformed,
                _ => MdiStatus::InvalidArgument,
            },
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let text = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(text));
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), FfiError>) -> MdiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MdiStatus::Ok,
        Ok(Err(e)) => {
            set_last_error(e.to_string());
            e.status()
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            MdiStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, FfiError> {
    if p.is_null() {
        return Err(FfiError::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| FfiError::Utf8(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, FfiError> {
    p.as_mut().ok_or(FfiError::Null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, FfiError> {
    p.as_ref().ok_or(FfiError::Null(what))
}

unsafe fn handle_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, FfiError> {
    p.as_mut().ok_or(FfiError::Null(what))
}

/// A null pointer is accepted only for an empty slice.
unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], FfiError> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(FfiError::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Copies `values` into a caller buffer, always reporting the full length.
unsafe fn fill<T: Copy>(values: &[T], buf: *mut T, capacity: usize, out_len: *mut usize) -> Result<(), FfiError> {
    *out(out_len, "out_len")? = values.len();
    if values.len() > capacity {
        return Err(FfiError::BufferTooSmall {
            needed: values.len(),
            capacity,
        });
    }
    if !values.is_empty() {
        if buf.is_null() {
            return Err(FfiError::Null("buffer"));
        }
        std::ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    }
    Ok(())
}

fn owned_string(s: String) -> Result<*mut c_char, FfiError> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| FfiError::Invalid("string contains NUL".into()))
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mdi_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failure on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mdi_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn mdi_status_name(status: MdiStatus) -> *const c_char {
    let name: &'static str = match status {
        MdiStatus::Ok => "Ok\0",
        MdiStatus::NullPointer => "NullPointer\0",
        MdiStatus::InvalidUtf8 => "InvalidUtf8\0",
        MdiStatus::InvalidArgument => "InvalidArgument\0",
        MdiStatus::Malformed => "Malformed\0",
        MdiStatus::NotFound => "NotFound\0",
        MdiStatus::Locked => "Locked\0",
        MdiStatus::Denied => "Denied\0",
        MdiStatus::FitFailed => "FitFailed\0",
        MdiStatus::Io => "Io\0",
        MdiStatus::Unsupported => "Unsupported\0",
        MdiStatus::BufferTooSmall => "BufferTooSmall\0",
        MdiStatus::Panic => "Panic\0",
    };
    name.as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mdi_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Creates a view over the world rectangle `(x0, y0)–(x1, y1)`.
///
/// # Safety
/// `title` must be a NUL-terminated string; `out_view` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mdi_view_new(
    title: *const c_char,
    kind: MdiViewKind,
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
    out_view: *mut *mut MdiView,
) -> MdiStatus {
    guard(|| {
        let slot = out(out_view, "out_view")?;
        let kind = match kind {
            MdiViewKind::Content2d => ViewKind::Content2d,
            MdiViewKind::Content3d => ViewKind::Content3d,
            MdiViewKind::Plot => ViewKind::Plot,
            MdiViewKind::Text => ViewKind::Text,
        };
        let view = View::new(ViewId(1), text(title, "title")?, kind, Rect::new(x0, y0, x1, y1))?;
        *slot = boxed(MdiView(view));
        Ok(())
    })
}

/// # Safety
/// `view` must come from [`mdi_view_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mdi_view_free(view: *mut MdiView) {
    if !view.is_null() {
        drop(Box::from_raw(view));
    }
}

/// Ids of the reserved bottom (connection) and top (annotation) layers.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mdi_view_reserved_layers(
    view: *const MdiView,
    out_connection: *mut u64,
    out_annotation: *mut u64,
) -> MdiStatus {
    guard(|| {
        let v = &handle(view, "view")?.0;
        *out(out_connection, "out_connection")? = v.connection_layer().0;
        *out(out_annotation, "out_annotation")? = v.annotation_layer().0;
        Ok(())
    })
}

/// Adds a user layer directly beneath the annotation layer.
///
/// # Safety
/// Pointers must be valid; `name` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn mdi_view_add_layer(view: *mut MdiView, name: *const c_char, out_layer: *mut u64) -> MdiStatus {
    guard(|| {
        let v = &mut handle_mut(view, "view")?.0;
        let name = text(name, "name")?;
        *out(out_layer, "out_layer")? = v.add_layer(name).0;
        Ok(())
    })
}

/// # Safety
/// `view` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mdi_view_set_layer_visibility(view: *mut MdiView, layer: u64, visible: bool) -> MdiStatus {
    guard(|| {
        handle_mut(view, "view")?.0.set_layer_visibility(LayerId(layer), visible)?;
        Ok(())
    })
}

/// Adds an item described by an item-spec JSON object, for example
/// `{"geometry":{"kind":"rectangle","rect":{"min":{"x":0,"y":0},"max":{"x":1,"y":1}}}}`.
///
/// # Safety
/// Pointers must be valid; `spec_json` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn mdi_view_add_item_json(
    view: *mut MdiView,
    layer: u64,
    spec_json: *const c_char,
    out_item: *mut u64,
) -> MdiStatus {
    guard(|| {
        let v = &mut handle_mut(view, "view")?.0;
        let spec: ItemSpec = serde_json::from_str(text(spec_json, "spec_json")?)?;
        let slot = out(out_item, "out_item")?;
        *slot = v.add_item(LayerId(layer), spec)?.0;
        Ok(())
    })
}

/// Applies an edit JSON object such as `{"op":"drag","dx":1,"dy":0}`.
///
/// # Safety
/// Pointers must be valid; `edit_json` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn mdi_view_apply_edit_json(view: *mut MdiView, item: u64, edit_json: *const c_char) -> MdiStatus {
    guard(|| {
        let v = &mut handle_mut(view, "view")?.0;
        let edit: ItemEdit = serde_json::from_str(text(edit_json, "edit_json")?)?;
        v.apply_item_edit(ItemId(item), &edit)?;
        Ok(())
    })
}

/// Translates the viewport by a screen-space offset.
///
/// # Safety
/// `view` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mdi_view_pan(view: *mut MdiView, dx: f64, dy: f64) -> MdiStatus {
    guard(|| {
        handle_mut(view, "view")?.0.pan(dx, dy)?;
        Ok(())
    })
}

/// Scales the viewport about a screen point; `factor > 1` zooms in.
///
/// # Safety
/// `view` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mdi_view_zoom(view: *mut MdiView, factor: f64, x: f64, y: f64) -> MdiStatus {
    guard(|| {
        handle_mut(view, "view")?.0.zoom(factor, Point::new(x, y))?;
        Ok(())
    })
}

/// Item ids under a screen point, topmost first. `out_len` always gets
/// the hit count; pass `capacity = 0` to size the buffer.
///
/// # Safety
/// `out_ids` must hold `capacity` values; other pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mdi_view_hit_test(
    view: *const MdiView,
    x: f64,
    y: f64,
    out_ids: *mut u64,
    capacity: usize,
    out_len: *mut usize,
) -> MdiStatus {
    guard(|| {
        let hits: Vec<u64> = handle(view, "view")?.0.hit_test(Point::new(x, y)).into_iter().map(|i| i.0).collect();
        fill(&hits, out_ids, capacity, out_len)
    })
}

/// Serializes the view as a wire `frame` message.
///
/// # Safety
/// Pointers must be valid. Free the result with [`mdi_string_free`].
#[no_mangle]
pub unsafe extern "C" fn mdi_view_frame_json(view: *const MdiView, seq: u64, out_json: *mut *mut c_char) -> MdiStatus {
    guard(|| {
        let v = &handle(view, "view")?.0;
        let slot = out(out_json, "out_json")?;
        *slot = owned_string(encode(&WireMessage::Frame(snapshot_frame(v, seq))))?;
        Ok(())
    })
}

/// # Safety
/// `name` NUL-terminated; `out_hist` writable.
#[no_mangle]
pub unsafe extern "C" fn mdi_histogram_new(
    name: *const c_char,
    n_bins: usize,
    lo: f64,
    hi: f64,
    out_hist: *mut *mut MdiHistogram,
) -> MdiStatus {
    guard(|| {
        let slot = out(out_hist, "out_hist")?;
        *slot = boxed(MdiHistogram(Histogram1D::new(text(name, "name")?, n_bins, lo, hi)?));
        Ok(())
    })
}

/// # Safety
/// `hist` must come from [`mdi_histogram_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mdi_histogram_free(hist: *mut MdiHistogram) {
    if !hist.is_null() {
        drop(Box::from_raw(hist));
    }
}

/// # Safety
/// `hist` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mdi_histogram_fill(hist: *mut MdiHistogram, x: f64) -> MdiStatus {
    guard(|| {
        handle_mut(hist, "hist")?.0.fill(x)?;
        Ok(())
    })
}

/// In-range bin counts.
///
/// # Safety
/// `out_counts` must hold `capacity` values; other pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mdi_histogram_counts(
    hist: *const MdiHistogram,
    out_counts: *mut u64,
    capacity: usize,
    out_len: *mut usize,
) -> MdiStatus {
    guard(|| fill(handle(hist, "hist")?.0.counts(), out_counts, capacity, out_len))
}

unsafe fn write_fit(
    fit: &FitModel,
    out_params: *mut f64,
    capacity: usize,
    out_chi2: *mut f64,
    out_converged: *mut bool,
) -> Result<(), FfiError> {
    let mut len = 0;
    fill(&fit.params, out_params, capacity, &mut len)?;
    *out(out_chi2, "out_chi2")? = fit.chi2;
    *out(out_converged, "out_converged")? = fit.converged;
    Ok(())
}

/// Fits `k` Gaussians to the histogram with Poisson weights.
///
/// # Safety
/// `guess` holds `3k` values; `out_params` holds `capacity` values.
#[no_mangle]
pub unsafe extern "C" fn mdi_histogram_fit_gaussians(
    hist: *const MdiHistogram,
    k: usize,
    guess: *const f64,
    guess_len: usize,
    out_params: *mut f64,
    capacity: usize,
    out_chi2: *mut f64,
    out_converged: *mut bool,
) -> MdiStatus {
    guard(|| {
        let h = &handle(hist, "hist")?.0;
        let guess = slice(guess, guess_len, "guess")?;
        let fit = fit_histogram(h, &ModelSpec::GaussianSum { k }, guess, FitOptions::default())?;
        write_fit(&fit, out_params, capacity, out_chi2, out_converged)
    })
}

/// Weighted least-squares fit of `n` points. `weights` may be null for
/// unit weights.
///
/// # Safety
/// Arrays must hold the stated number of values.
#[no_mangle]
pub unsafe extern "C" fn mdi_fit_points(
    model: MdiModel,
    order: usize,
    xs: *const f64,
    ys: *const f64,
    weights: *const f64,
    n: usize,
    guess: *const f64,
    guess_len: usize,
    out_params: *mut f64,
    capacity: usize,
    out_chi2: *mut f64,
    out_converged: *mut bool,
) -> MdiStatus {
    guard(|| {
        let xs = slice(xs, n, "xs")?;
        let ys = slice(ys, n, "ys")?;
        let weights = if weights.is_null() { vec![1.0; n] } else { slice(weights, n, "weights")?.to_vec() };
        let guess = slice(guess, guess_len, "guess")?;
        let spec = match model {
            MdiModel::Polynomial => ModelSpec::Polynomial { degree: order },
            MdiModel::GaussianSum => ModelSpec::GaussianSum { k: order },
        };
        let fit = fit_points(xs, ys, &weights, &spec, guess, FitOptions::default())?;
        write_fit(&fit, out_params, capacity, out_chi2, out_converged)
    })
}

/// Gas of `n_particles` in the corner octant with default dt and speed.
///
/// # Safety
/// `out_gas` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mdi_gas_new(n_particles: usize, seed: u64, out_gas: *mut *mut MdiGas) -> MdiStatus {
    guard(|| {
        let slot = out(out_gas, "out_gas")?;
        let params = GasParams {
            n_particles,
            seed,
            ..GasParams::default()
        };
        *slot = boxed(MdiGas(GasState::init(&params)?));
        Ok(())
    })
}

/// # Safety
/// `gas` must come from [`mdi_gas_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mdi_gas_free(gas: *mut MdiGas) {
    if !gas.is_null() {
        drop(Box::from_raw(gas));
    }
}

/// # Safety
/// `gas` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mdi_gas_step(gas: *mut MdiGas, n: u64) -> MdiStatus {
    guard(|| {
        let g = &mut handle_mut(gas, "gas")?.0;
        for _ in 0..n {
            g.step();
        }
        Ok(())
    })
}

/// Simulated time `step_index · dt`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mdi_gas_sim_time(gas: *const MdiGas, out_t: *mut f64) -> MdiStatus {
    guard(|| {
        *out(out_t, "out_t")? = handle(gas, "gas")?.0.sim_time();
        Ok(())
    })
}

/// Coarse-grained entropy over an `m³` grid; `m ≥ 2`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mdi_gas_entropy(gas: *const MdiGas, m: usize, out_s: *mut f64) -> MdiStatus {
    guard(|| {
        if m < 2 {
            return Err(FfiError::Invalid("entropy grid needs m >= 2".into()));
        }
        *out(out_s, "out_s")? = compute_entropy(&handle(gas, "gas")?.0.positions, m);
        Ok(())
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mdi_gas_kinetic_energy(gas: *const MdiGas, out_e: *mut f64) -> MdiStatus {
    guard(|| {
        *out(out_e, "out_e")? = handle(gas, "gas")?.0.kinetic_energy();
        Ok(())
    })
}

/// Positions as `x, y, z` triples; `out_len` gets `3 · n`.
///
/// # Safety
/// `out_xyz` must hold `capacity` values; other pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mdi_gas_positions(
    gas: *const MdiGas,
    out_xyz: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> MdiStatus {
    guard(|| {
        let flat: Vec<f64> = handle(gas, "gas")?.0.positions.iter().flatten().copied().collect();
        fill(&flat, out_xyz, capacity, out_len)
    })
}

#[no_mangle]
pub extern "C" fn mdi_headless_config_default() -> MdiHeadlessConfig {
    let d = ServerConfig::default();
    MdiHeadlessConfig {
        steps: 1000,
        seed: 0,
        particles: d.particles,
        grid_m: d.grid_m,
        refresh_ms: d.refresh_ms,
    }
}

/// Runs the kinetics demo headless. Writes the entropy CSV atomically to
/// `export_path` when it is non-null and returns it through `out_csv`
/// when that is non-null.
///
/// # Safety
/// `config` must be valid; string arguments NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn mdi_run_headless(
    config: *const MdiHeadlessConfig,
    export_path: *const c_char,
    out_csv: *mut *mut c_char,
) -> MdiStatus {
    guard(|| {
        let c = handle(config, "config")?;
        let export_path = if export_path.is_null() {
            None
        } else {
            Some(PathBuf::from(text(export_path, "export_path")?))
        };
        let report = run_headless(&ServerConfig {
            headless: true,
            steps: Some(c.steps),
            seed: Some(c.seed),
            particles: c.particles,
            grid_m: c.grid_m,
            refresh_ms: c.refresh_ms,
            export_path,
            ..ServerConfig::default()
        })?;
        if let Some(slot) = out_csv.as_mut() {
            let csv = String::from_utf8(report.csv).map_err(|_| FfiError::Invalid("CSV is not UTF-8".into()))?;
            *slot = owned_string(csv)?;
        }
        Ok(())
    })
}
