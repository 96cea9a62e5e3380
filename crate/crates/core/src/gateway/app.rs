//! Owner-context application state: desktop, bus, engine and demo content.
//!
//! Everything here lives on one thread. The server feeds it decoded
//! inputs and calls [`App::pump`] on a timer; both return wire messages
//! to send.

use super::frame::{snapshot_frame, FrameScheduler};
use super::wire::{Feedback, Input, InputKind, PlotPoint, SimStateInfo, ViewInfo, WireMessage};
use super::{Demo, GatewayError};
use crate::engine::{Clock, Engine, Simulation, StepOutcome, TimingParams};
use crate::messaging::{topics, Bus, Envelope, Message, Publisher, Scope, ScopeFilter};
use crate::plot::{fit_histogram, FitOptions, FitRecord, Histogram1D, Histogram2D, ModelSpec, PlotDocument};
use crate::scene::{
    Capabilities, Color, Desktop, Geometry, ItemEdit, ItemId, ItemSpec, LayerId, Point, Rect, Style, ViewId, ViewKind,
};
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use serde::Deserialize;
use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::rc::Rc;
use std::sync::Arc;
use std::time::{Duration, Instant};

/// Layer of a content3d view that carries the projected point batch.
pub const POINTS_LAYER: &str = "points";
/// Steps the live kinetics demo runs before completing.
pub const DEFAULT_LIVE_STEPS: u64 = 2000;

pub struct AppOptions {
    pub demo: Demo,
    pub seed: u64,
    pub grid_m: usize,
    pub particles: usize,
    pub refresh_ms: f64,
    pub max_steps: Option<u64>,
    /// Minimum wall-clock milliseconds per simulation step, for live runs.
    pub pace_ms: Option<f64>,
    pub clock: Arc<dyn Clock>,
}

/// Sleeps after each step so stepping never runs ahead of wall time by
/// more than one step. After a long stall (a pause) the schedule is
/// re-based instead of catching up.
#[cfg_attr(not(feature = "view3d"), allow(dead_code))]
struct Paced<S> {
    inner: S,
    step_ms: f64,
    origin: Option<Instant>,
    steps: u64,
}

impl<S: Simulation> Simulation for Paced<S> {
    fn step(&mut self, bus: &Publisher) -> StepOutcome {
        let outcome = self.inner.step(bus);
        let now = Instant::now();
        let origin = *self.origin.get_or_insert(now);
        self.steps += 1;
        let target = origin + Duration::from_secs_f64(self.steps as f64 * self.step_ms / 1000.0);
        if target > now {
            std::thread::sleep(target - now);
        } else if now - target > Duration::from_millis(100) {
            self.origin = Some(now - Duration::from_secs_f64(self.steps as f64 * self.step_ms / 1000.0));
        }
        outcome
    }

    fn reset(&mut self) {
        self.inner.reset();
        self.origin = None;
        self.steps = 0;
    }

    fn sim_time_ms(&self) -> f64 {
        self.inner.sim_time_ms()
    }
}

#[derive(Default)]
struct Inbox {
    outgoing: Vec<WireMessage>,
    dirty: BTreeSet<ViewId>,
    all_dirty: bool,
}

#[cfg(feature = "view3d")]
struct CloudView {
    camera: crate::view3d::Camera,
    snapshot: crate::kinetics::SnapshotSlot,
}

pub struct App {
    desktop: Desktop,
    bus: Bus,
    engine: Engine,
    scheduler: FrameScheduler,
    inbox: Rc<RefCell<Inbox>>,
    plots: BTreeMap<ViewId, Rc<RefCell<PlotDocument>>>,
    #[cfg(feature = "view3d")]
    clouds: BTreeMap<ViewId, CloudView>,
    latest: BTreeMap<ViewId, WireMessage>,
}

fn parse<T: for<'de> Deserialize<'de>>(kind: InputKind, payload: &serde_json::Value) -> Result<T, GatewayError> {
    T::deserialize(payload).map_err(|e| GatewayError::InvalidInput(format!("{kind:?} payload: {e}")))
}

#[derive(Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
enum ToolOp {
    Pan {
        dx: f64,
        dy: f64,
    },
    Zoom {
        factor: f64,
        x: f64,
        y: f64,
    },
    BoxZoom {
        rect: [f64; 4],
    },
    Reset,
    /// Degrees; content3d views only.
    #[cfg_attr(not(feature = "view3d"), allow(dead_code))]
    Orbit {
        d_yaw: f64,
        d_pitch: f64,
    },
}

#[derive(Deserialize)]
struct ScreenPos {
    x: f64,
    y: f64,
}

#[derive(Deserialize)]
struct DragInput {
    x: f64,
    y: f64,
    dx: f64,
    dy: f64,
}

#[derive(Deserialize)]
struct ClickInput {
    x: f64,
    y: f64,
    #[serde(default)]
    additive: bool,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum LayerRef {
    Id(u64),
    Name(String),
}

#[derive(Deserialize)]
struct LayerToggle {
    layer: LayerRef,
    visible: Option<bool>,
}

fn one() -> u64 {
    1
}

#[derive(Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
enum SimControl {
    Start,
    Pause,
    Resume,
    Step {
        #[serde(default = "one")]
        n: u64,
    },
    Reset,
    Cancel,
}

#[derive(Deserialize)]
struct ItemEditInput {
    item: ItemId,
    edit: ItemEdit,
}

impl App {
    pub fn new(options: AppOptions) -> Result<Self, GatewayError> {
        let bus = Bus::new();
        let timing = TimingParams::new(options.refresh_ms, 250.0, 10.0)?;
        let engine = Engine::new(bus.publisher(), Arc::clone(&options.clock), timing);
        let mut app = Self {
            desktop: Desktop::new(),
            bus,
            engine,
            scheduler: FrameScheduler::new(options.refresh_ms),
            inbox: Rc::new(RefCell::new(Inbox::default())),
            plots: BTreeMap::new(),
            #[cfg(feature = "view3d")]
            clouds: BTreeMap::new(),
            latest: BTreeMap::new(),
        };
        let mut series_views = BTreeMap::new();
        match options.demo {
            Demo::Kinetics => app.build_kinetics(&options, &mut series_views)?,
            Demo::Network => app.build_network()?,
            Demo::Plots => app.build_plots(options.seed)?,
        }
        app.subscribe(series_views)?;
        for v in app.desktop.views() {
            app.scheduler.mark_dirty(v.id);
        }
        Ok(app)
    }

    fn subscribe(&mut self, series_views: BTreeMap<String, ViewId>) -> Result<(), GatewayError> {
        let inbox = Rc::clone(&self.inbox);
        self.bus.subscribe(topics::SIM_REFRESH, ScopeFilter::Any, move |_| {
            inbox.borrow_mut().all_dirty = true;
        })?;

        let inbox = Rc::clone(&self.inbox);
        self.bus.subscribe(topics::SIM_STATE, ScopeFilter::Any, move |env| {
            let mut inbox = inbox.borrow_mut();
            inbox.all_dirty = true;
            match sim_state_from(env) {
                Some(info) => inbox.outgoing.push(WireMessage::SimState(info)),
                None => log::debug!("malformed sim.state payload"),
            }
        })?;

        let inbox = Rc::clone(&self.inbox);
        self.bus.subscribe(topics::PLOT_DATA, ScopeFilter::Any, move |env| {
            let p = &env.payload;
            let (Some(series), Some(x), Some(y)) = (
                p.get("series").and_then(|v| v.as_str()),
                p.get("x").and_then(|v| v.as_f64()),
                p.get("y").and_then(|v| v.as_f64()),
            ) else {
                return;
            };
            let view_id = series_views.get(series).copied();
            let mut inbox = inbox.borrow_mut();
            if let Some(v) = view_id {
                inbox.dirty.insert(v);
            }
            inbox.outgoing.push(WireMessage::PlotData(PlotPoint {
                view_id,
                series: series.to_string(),
                x,
                y,
            }));
        })?;

        let inbox = Rc::clone(&self.inbox);
        self.bus.subscribe(topics::VIEW_DIRTY, ScopeFilter::Any, move |env| {
            let mut inbox = inbox.borrow_mut();
            match env.scope {
                Scope::View(v) => {
                    inbox.dirty.insert(v);
                }
                Scope::Broadcast => inbox.all_dirty = true,
            }
        })?;
        Ok(())
    }

    fn build_kinetics(
        &mut self,
        options: &AppOptions,
        series_views: &mut BTreeMap<String, ViewId>,
    ) -> Result<(), GatewayError> {
        #[cfg(not(feature = "view3d"))]
        {
            let _ = (options, series_views);
            Err(GatewayError::Unsupported(
                "the live kinetics demo needs the view3d feature; use --headless".into(),
            ))
        }
        #[cfg(feature = "view3d")]
        {
            use crate::kinetics::{GasParams, GasSimulation, ENTROPY_SERIES};
            use crate::plot::{bind_series_to_topic, DataSeries};

            let params = GasParams {
                n_particles: options.particles,
                seed: options.seed,
                entropy_grid_m: options.grid_m,
                ..GasParams::default()
            };
            let mut sim = GasSimulation::new(params)?;
            if let Some(max) = options.max_steps {
                sim = sim.with_max_steps(max);
            }
            sim.refresh_snapshot();
            let snapshot = sim.snapshot_slot();
            match options.pace_ms {
                Some(step_ms) => self.engine.attach(Box::new(Paced {
                    inner: sim,
                    step_ms,
                    origin: None,
                    steps: 0,
                }))?,
                None => self.engine.attach(Box::new(sim))?,
            }

            let cube = Rect::new(0.0, 0.0, 1.0, 1.0);
            let particles = self.desktop.create_view("Free expansion", ViewKind::Content3d, cube)?;
            let view = self.desktop.view_mut(particles)?;
            view.add_layer(POINTS_LAYER);
            let note = ItemSpec::new(Geometry::Text {
                anchor: Point::new(0.02, 0.98),
                lines: vec![format!("N = {}", options.particles)],
                font_size: 0.04,
            })
            .with_caps(Capabilities::none());
            view.add_item(view.annotation_layer(), note)?;
            let camera = crate::view3d::Camera::new(
                [2.2, 1.6, 2.6],
                [0.5, 0.5, 0.5],
                [0.0, 1.0, 0.0],
                45.0,
                0.1,
                20.0,
            )?;
            self.clouds.insert(particles, CloudView { camera, snapshot });

            let max_s = ((options.grid_m as f64).powi(3)).ln();
            let entropy = self
                .desktop
                .create_view("Entropy", ViewKind::Plot, Rect::new(0.0, 0.0, 10.0, max_s + 0.2))?;
            let mut doc = PlotDocument::new("Coarse-grained entropy", "t", "S");
            doc.add_series(DataSeries::new(ENTROPY_SERIES))?;
            let doc = Rc::new(RefCell::new(doc));
            bind_series_to_topic(&doc, &self.bus, ENTROPY_SERIES, topics::PLOT_DATA)?;
            self.plots.insert(entropy, doc);
            series_views.insert(ENTROPY_SERIES.to_string(), entropy);
            Ok(())
        }
    }

    fn build_network(&mut self) -> Result<(), GatewayError> {
        let id = self
            .desktop
            .create_view("Network", ViewKind::Content2d, Rect::new(0.0, 0.0, 100.0, 80.0))?;
        let view = self.desktop.view_mut(id)?;
        let background = view.add_layer("background");
        let nodes = view.add_layer("nodes");
        let legend = ItemSpec::rectangle(Rect::new(2.0, 2.0, 30.0, 12.0))
            .with_style(Style {
                stroke: Color([120, 120, 120, 255]),
                fill: Some(Color([240, 240, 240, 255])),
                line_width: 1.0,
            })
            .with_metadata("name", "legend");
        let legend = view.add_item(background, legend)?;
        view.apply_item_edit(legend, &ItemEdit::SetLocked { locked: true })?;

        let positions = [(20.0, 60.0), (45.0, 70.0), (75.0, 62.0), (30.0, 35.0), (60.0, 38.0), (85.0, 25.0)];
        let mut ids = Vec::new();
        for (i, (x, y)) in positions.iter().enumerate() {
            let spec = ItemSpec::new(Geometry::Ellipse {
                center: Point::new(*x, *y),
                rx: 5.0,
                ry: 5.0,
            })
            .with_style(Style {
                stroke: Color::BLACK,
                fill: Some(Color([90, 160, 220, 255])),
                line_width: 1.5,
            })
            .with_metadata("name", format!("node-{i}"));
            ids.push(view.add_item(nodes, spec)?);
        }
        let edges = [(0, 1), (1, 2), (0, 3), (3, 4), (1, 4), (4, 5), (2, 5)];
        let conn = view.connection_layer();
        for (a, b) in edges {
            let spec = ItemSpec::connector(ids[a], ids[b]).with_metadata("name", format!("edge-{a}-{b}"));
            view.add_item(conn, spec)?;
        }
        let label = ItemSpec::new(Geometry::Text {
            anchor: Point::new(4.0, 10.0),
            lines: vec!["drag nodes; hover for names".into()],
            font_size: 2.0,
        })
        .with_caps(Capabilities::none());
        view.add_item(view.annotation_layer(), label)?;
        Ok(())
    }

    fn build_plots(&mut self, seed: u64) -> Result<(), GatewayError> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut h1 = Histogram1D::new("peaks", 120, -6.0, 6.0)?;
        for (mu, n) in [(-3.0, 8000), (0.0, 16000), (3.0, 12000)] {
            let d = Normal::new(mu, 0.5).expect("valid normal");
            for _ in 0..n {
                h1.fill(d.sample(&mut rng))?;
            }
        }
        let guess = [500.0, -2.8, 0.6, 1000.0, 0.2, 0.6, 700.0, 2.8, 0.6];
        let fit = fit_histogram(&h1, &ModelSpec::GaussianSum { k: 3 }, &guess, FitOptions::default())?;
        let mut doc = PlotDocument::new("Triple Gaussian fit", "x", "counts");
        doc.histograms1d.push(h1);
        doc.fits.push(FitRecord {
            target: "peaks".into(),
            model: fit,
        });
        let v = self.desktop.create_view("Histogram", ViewKind::Plot, Rect::new(-6.0, 0.0, 6.0, 1.0))?;
        self.plots.insert(v, Rc::new(RefCell::new(doc)));

        let mut h2 = Histogram2D::new("blob", 50, (-3.0, 3.0), 50, (-3.0, 3.0))?;
        let nx = Normal::new(0.0, 1.0).expect("valid normal");
        let ny = Normal::new(0.5, 0.7).expect("valid normal");
        for _ in 0..50_000 {
            h2.fill(nx.sample(&mut rng), ny.sample(&mut rng))?;
        }
        let mut doc = PlotDocument::new("2D histogram", "x", "y");
        doc.histograms2d.push(h2);
        let v = self.desktop.create_view("2D Histogram", ViewKind::Plot, Rect::new(-3.0, -3.0, 3.0, 3.0))?;
        self.plots.insert(v, Rc::new(RefCell::new(doc)));
        Ok(())
    }

    pub fn desktop(&self) -> &Desktop {
        &self.desktop
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn bus(&self) -> &Bus {
        &self.bus
    }

    pub fn scheduler(&self) -> &FrameScheduler {
        &self.scheduler
    }

    pub fn plot_document(&self, view: ViewId) -> Option<PlotDocument> {
        self.plots.get(&view).map(|d| d.borrow().clone())
    }

    pub fn view_list(&self) -> WireMessage {
        WireMessage::ViewList {
            views: self
                .desktop
                .views()
                .iter()
                .map(|v| ViewInfo {
                    view_id: v.id,
                    title: v.title.clone(),
                    kind: v.kind,
                })
                .collect(),
        }
    }

    /// Most recent frame of every view that has been sent at least once.
    pub fn latest_frames(&self) -> Vec<WireMessage> {
        self.latest.values().cloned().collect()
    }

    /// Dispatches pending bus traffic and emits frames that are due.
    pub fn pump(&mut self, now_ms: f64) -> Result<Vec<WireMessage>, GatewayError> {
        self.bus.dispatch_pending()?;
        let inbox = std::mem::take(&mut *self.inbox.borrow_mut());
        if inbox.all_dirty {
            for v in self.desktop.views() {
                self.scheduler.mark_dirty(v.id);
            }
        }
        for v in inbox.dirty {
            self.scheduler.mark_dirty(v);
        }
        let mut out = inbox.outgoing;
        for (view, seq) in self.scheduler.take_due(now_ms) {
            match self.build_frame(view, seq) {
                Ok(frame) => {
                    let msg = WireMessage::Frame(frame);
                    self.latest.insert(view, msg.clone());
                    out.push(msg);
                }
                Err(e) => {
                    log::debug!("no frame for {view}: {e}");
                    self.scheduler.forget(view);
                }
            }
        }
        Ok(out)
    }

    fn build_frame(&self, id: ViewId, seq: u64) -> Result<super::wire::Frame, GatewayError> {
        let view = self.desktop.view(id)?;
        let mut frame = snapshot_frame(view, seq);
        if let Some(doc) = self.plots.get(&id) {
            frame.plot = Some(doc.borrow().clone());
        }
        #[cfg(feature = "view3d")]
        if let Some(cloud) = self.clouds.get(&id) {
            let snap = cloud.snapshot.lock().unwrap_or_else(|e| e.into_inner()).clone();
            if let Some(snap) = snap {
                let (w, h) = view.screen_size;
                let batch = super::frame::project_batch(&cloud.camera, w / h, &snap.positions, Some(&snap.speeds))?;
                frame.set_point_batch(POINTS_LAYER, batch);
            }
        }
        Ok(frame)
    }

    /// Applies one input. Replies (errors, hover feedback) are returned
    /// for the sender only; resulting state changes go out via `pump`.
    pub fn handle_input(&mut self, input: &Input) -> Vec<WireMessage> {
        match self.apply_input(input) {
            Ok(reply) => reply.into_iter().collect(),
            Err(e) => vec![WireMessage::error(e.code(), e.to_string())],
        }
    }

    /// Handles any message a client may send after the handshake.
    pub fn handle_message(&mut self, msg: &WireMessage) -> Vec<WireMessage> {
        match msg {
            WireMessage::Input(input) => self.handle_input(input),
            WireMessage::Hello { .. } => Vec::new(),
            other => vec![WireMessage::error(
                "UnexpectedMessage",
                format!("clients may not send {}", message_type(other)),
            )],
        }
    }

    fn mark_dirty(&self, view: ViewId) -> Result<(), GatewayError> {
        let msg = Message::new(topics::VIEW_DIRTY)
            .scope(Scope::View(view))
            .coalesce("dirty")
            .source("gateway");
        self.bus.publish(msg)?;
        Ok(())
    }

    fn apply_input(&mut self, input: &Input) -> Result<Option<WireMessage>, GatewayError> {
        let id = input.view_id;
        self.desktop.view(id)?;
        let kind = input.kind;
        match kind {
            InputKind::SimControl => {
                match parse::<SimControl>(kind, &input.payload)? {
                    SimControl::Start => self.engine.start()?,
                    SimControl::Pause => self.engine.pause()?,
                    SimControl::Resume => self.engine.resume()?,
                    SimControl::Step { n } => {
                        self.engine.step_n(n)?;
                    }
                    SimControl::Reset => {
                        self.engine.reset()?;
                        for doc in self.plots.values() {
                            for s in &mut doc.borrow_mut().series {
                                s.points.clear();
                            }
                        }
                    }
                    SimControl::Cancel => self.engine.cancel()?,
                }
                Ok(None)
            }
            InputKind::LayerToggle => {
                let toggle: LayerToggle = parse(kind, &input.payload)?;
                let view = self.desktop.view_mut(id)?;
                let layer = match toggle.layer {
                    LayerRef::Id(n) => view.layer(LayerId(n))?,
                    LayerRef::Name(name) => view
                        .layer_by_name(&name)
                        .ok_or_else(|| GatewayError::InvalidInput(format!("no layer named {name:?}")))?,
                };
                let (layer_id, visible) = (layer.id, toggle.visible.unwrap_or(!layer.visible));
                view.set_layer_visibility(layer_id, visible)?;
                self.mark_dirty(id)?;
                Ok(None)
            }
            InputKind::Drag => {
                let drag: DragInput = parse(kind, &input.payload)?;
                let view = self.desktop.view_mut(id)?;
                let Some(&target) = view.hit_test(Point::new(drag.x, drag.y)).first() else {
                    return Ok(None);
                };
                let from = view.screen_to_world(Point::new(drag.x, drag.y))?;
                let to = view.screen_to_world(Point::new(drag.x + drag.dx, drag.y + drag.dy))?;
                view.apply_item_edit(
                    target,
                    &ItemEdit::Drag {
                        dx: to.x - from.x,
                        dy: to.y - from.y,
                    },
                )?;
                self.mark_dirty(id)?;
                Ok(None)
            }
            InputKind::ItemEdit => {
                let edit: ItemEditInput = parse(kind, &input.payload)?;
                self.desktop.view_mut(id)?.apply_item_edit(edit.item, &edit.edit)?;
                self.mark_dirty(id)?;
                Ok(None)
            }
            InputKind::Click => {
                let click: ClickInput = parse(kind, &input.payload)?;
                let view = self.desktop.view_mut(id)?;
                let hit = view.hit_test(Point::new(click.x, click.y)).first().copied();
                if !click.additive {
                    let others: Vec<ItemId> = view.items().filter(|i| i.selected && Some(i.id) != hit).map(|i| i.id).collect();
                    for other in others {
                        if let Err(e) = view.apply_item_edit(other, &ItemEdit::Select { selected: false }) {
                            log::debug!("kept selection on {other}: {e}");
                        }
                    }
                }
                if let Some(target) = hit {
                    view.apply_item_edit(target, &ItemEdit::Select { selected: true })?;
                }
                self.mark_dirty(id)?;
                Ok(None)
            }
            InputKind::Hover => {
                let pos: ScreenPos = parse(kind, &input.payload)?;
                let view = self.desktop.view(id)?;
                let screen = Point::new(pos.x, pos.y);
                let world = view.screen_to_world(screen)?;
                let item = view.hit_test(screen).first().copied();
                let metadata = match item {
                    Some(i) => view.item(i)?.metadata.clone(),
                    None => BTreeMap::new(),
                };
                Ok(Some(WireMessage::Feedback(Feedback {
                    view_id: id,
                    world,
                    item,
                    metadata,
                })))
            }
            InputKind::Tool => {
                let op: ToolOp = parse(kind, &input.payload)?;
                self.apply_tool(id, op)?;
                self.mark_dirty(id)?;
                Ok(None)
            }
        }
    }

    fn apply_tool(&mut self, id: ViewId, op: ToolOp) -> Result<(), GatewayError> {
        #[cfg(feature = "view3d")]
        if let ToolOp::Orbit { d_yaw, d_pitch } = op {
            let cloud = self
                .clouds
                .get_mut(&id)
                .ok_or_else(|| GatewayError::InvalidInput("orbit applies to 3D views only".into()))?;
            cloud.camera = crate::view3d::orbit(&cloud.camera, d_yaw, d_pitch)?.camera;
            return Ok(());
        }
        let view = self.desktop.view_mut(id)?;
        match op {
            ToolOp::Pan { dx, dy } => view.pan(dx, dy)?,
            ToolOp::Zoom { factor, x, y } => view.zoom(factor, Point::new(x, y))?,
            ToolOp::BoxZoom { rect } => view.box_zoom(Rect::new(rect[0], rect[1], rect[2], rect[3]))?,
            ToolOp::Reset => view.reset_viewport(),
            ToolOp::Orbit { .. } => {
                return Err(GatewayError::Unsupported("orbit needs the view3d feature".into()));
            }
        }
        Ok(())
    }
}

fn sim_state_from(env: &Envelope) -> Option<SimStateInfo> {
    let p = &env.payload;
    Some(SimStateInfo {
        state: p.get("state")?.as_str()?.to_string(),
        previous: p.get("previous").and_then(|v| v.as_str()).map(str::to_string),
        step_count: p.get("step_count")?.as_u64()?,
        sim_time_ms: p.get("sim_time_ms")?.as_f64()?,
    })
}

pub(crate) fn message_type(msg: &WireMessage) -> &'static str {
    match msg {
        WireMessage::Hello { .. } => "hello",
        WireMessage::ViewList { .. } => "view_list",
        WireMessage::Frame(_) => "frame",
        WireMessage::PlotData(_) => "plot_data",
        WireMessage::SimState(_) => "sim_state",
        WireMessage::Input(_) => "input",
        WireMessage::Error(_) => "error",
        WireMessage::Feedback(_) => "feedback",
    }
}
