//! Shared helpers for integration tests: a random wire message generator
//! and a blocking WebSocket client.
#![allow(dead_code)]

use mdi_core::gateway::{
    decode, encode, ErrorInfo, Feedback, Frame, FrameEntry, FrameLayer, Input, InputKind, PlotPoint, PointBatch,
    SimStateInfo, ViewInfo, WireMessage,
};
use mdi_core::plot::{DataSeries, PlotDocument};
use mdi_core::scene::{
    Affine2, Capabilities, Color, Geometry, Item, ItemId, LayerId, Point, Rect, Reserved, Style, ViewId, ViewKind,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::net::{SocketAddr, TcpStream};
use std::time::{Duration, Instant};
use tungstenite::{Message, WebSocket};

const WORDS: &[&str] = &["alpha", "ß-β", "line\nbreak", "quote\"d", "tab\there", "", "日本", "\\slash", "emoji 🚀"];

fn word(rng: &mut ChaCha8Rng) -> String {
    WORDS[rng.random_range(0..WORDS.len())].to_string()
}

/// Finite doubles spanning many magnitudes, including awkward ones.
fn real(rng: &mut ChaCha8Rng) -> f64 {
    match rng.random_range(0..6) {
        0 => 0.0,
        1 => -0.0,
        2 => rng.random_range(-1.0..1.0),
        3 => rng.random_range(-1e6..1e6),
        4 => rng.random::<f64>() * 10f64.powi(rng.random_range(-300..300)),
        _ => f64::from_bits(rng.random::<u64>() & 0x7fef_ffff_ffff_ffff).copysign(rng.random_range(-1.0..1.0)),
    }
}

fn point(rng: &mut ChaCha8Rng) -> Point {
    Point::new(real(rng), real(rng))
}

fn points(rng: &mut ChaCha8Rng) -> Vec<Point> {
    (0..rng.random_range(0..6)).map(|_| point(rng)).collect()
}

fn geometry(rng: &mut ChaCha8Rng) -> Geometry {
    match rng.random_range(0..10) {
        0 => Geometry::Connector {
            from: ItemId(rng.random()),
            to: ItemId(rng.random()),
        },
        1 => Geometry::Ellipse {
            center: point(rng),
            rx: real(rng).abs(),
            ry: real(rng).abs(),
        },
        2 => Geometry::Image {
            bounds: Rect::new(real(rng), real(rng), real(rng), real(rng)),
            source: word(rng),
        },
        3 => Geometry::Line { a: point(rng), b: point(rng) },
        4 => Geometry::Point { at: point(rng) },
        5 => Geometry::Polygon { vertices: points(rng) },
        6 => Geometry::Polyline { vertices: points(rng) },
        7 => Geometry::Radarc {
            center: point(rng),
            radius: real(rng).abs(),
            start: real(rng),
            end: real(rng),
        },
        8 => Geometry::Rectangle {
            rect: Rect::new(real(rng), real(rng), real(rng), real(rng)),
        },
        _ => Geometry::Text {
            anchor: point(rng),
            lines: (0..rng.random_range(0..4)).map(|_| word(rng)).collect(),
            font_size: real(rng).abs(),
        },
    }
}

fn item(rng: &mut ChaCha8Rng) -> Item {
    let color = |rng: &mut ChaCha8Rng| Color(rng.random());
    Item {
        id: ItemId(rng.random()),
        geometry: geometry(rng),
        rotation: real(rng),
        style: Style {
            stroke: color(rng),
            fill: rng.random_bool(0.5).then(|| color(rng)),
            line_width: real(rng),
        },
        caps: if rng.random_bool(0.5) { Capabilities::all() } else { Capabilities::connector() },
        locked: rng.random(),
        selected: rng.random(),
        metadata: (0..rng.random_range(0..3)).map(|_| (word(rng), word(rng))).collect(),
    }
}

fn batch(rng: &mut ChaCha8Rng) -> PointBatch {
    let count = rng.random_range(0..200);
    PointBatch {
        count,
        coords: (0..count * 3).map(|_| real(rng) as f32).map(|v| if v.is_finite() { v } else { 0.5 }).collect(),
        scalar: rng.random_bool(0.5).then(|| (0..count).map(|_| rng.random::<f32>()).collect()),
    }
}

fn view_kind(rng: &mut ChaCha8Rng) -> ViewKind {
    [ViewKind::Content2d, ViewKind::Content3d, ViewKind::Plot, ViewKind::Text][rng.random_range(0..4)]
}

fn plot(rng: &mut ChaCha8Rng) -> PlotDocument {
    let mut doc = PlotDocument::new(word(rng), word(rng), word(rng));
    for i in 0..rng.random_range(0..3) {
        let mut s = DataSeries::new(format!("s{i}"));
        for _ in 0..rng.random_range(0..20) {
            s.push(real(rng), real(rng)).unwrap();
        }
        doc.add_series(s).unwrap();
    }
    doc
}

fn frame(rng: &mut ChaCha8Rng) -> Frame {
    let layers = (0..rng.random_range(0..5))
        .map(|i| FrameLayer {
            layer_id: LayerId(i),
            name: word(rng),
            visible: rng.random(),
            reserved: [Reserved::None, Reserved::Connection, Reserved::Annotation][rng.random_range(0..3)],
            items: (0..rng.random_range(0..8))
                .map(|_| {
                    if rng.random_bool(0.15) {
                        FrameEntry::Points { batch: batch(rng) }
                    } else {
                        FrameEntry::Item {
                            item: item(rng),
                            anchors: rng.random_bool(0.3).then(|| (point(rng), point(rng))),
                        }
                    }
                })
                .collect(),
        })
        .collect();
    Frame {
        view_id: ViewId(rng.random()),
        seq: rng.random(),
        view_kind: view_kind(rng),
        title: word(rng),
        viewport: Affine2 {
            a: real(rng),
            b: real(rng),
            c: real(rng),
            d: real(rng),
            e: real(rng),
            f: real(rng),
        },
        screen_size: (real(rng).abs(), real(rng).abs()),
        layers,
        plot: rng.random_bool(0.3).then(|| plot(rng)),
    }
}

fn json_value(rng: &mut ChaCha8Rng, depth: u32) -> Value {
    match rng.random_range(0..if depth > 2 { 5 } else { 7 }) {
        0 => Value::Null,
        1 => Value::Bool(rng.random()),
        2 => json!(rng.random::<i64>()),
        3 => json!(real(rng)),
        4 => Value::String(word(rng)),
        5 => Value::Array((0..rng.random_range(0..4)).map(|_| json_value(rng, depth + 1)).collect()),
        _ => Value::Object((0..rng.random_range(0..4)).map(|_| (word(rng), json_value(rng, depth + 1))).collect()),
    }
}

/// One message of a uniformly chosen type with random contents.
pub fn random_message(rng: &mut ChaCha8Rng) -> WireMessage {
    match rng.random_range(0..8) {
        0 => WireMessage::Hello {
            protocol_version: rng.random(),
        },
        1 => WireMessage::ViewList {
            views: (0..rng.random_range(0..5))
                .map(|_| ViewInfo {
                    view_id: ViewId(rng.random()),
                    title: word(rng),
                    kind: view_kind(rng),
                })
                .collect(),
        },
        2 => WireMessage::Frame(frame(rng)),
        3 => WireMessage::PlotData(PlotPoint {
            view_id: rng.random_bool(0.5).then(|| ViewId(rng.random())),
            series: word(rng),
            x: real(rng),
            y: real(rng),
        }),
        4 => WireMessage::SimState(SimStateInfo {
            state: word(rng),
            previous: rng.random_bool(0.5).then(|| word(rng)),
            step_count: rng.random(),
            sim_time_ms: real(rng),
        }),
        5 => {
            let kinds = [
                InputKind::Tool,
                InputKind::Drag,
                InputKind::Click,
                InputKind::Hover,
                InputKind::LayerToggle,
                InputKind::SimControl,
                InputKind::ItemEdit,
            ];
            WireMessage::Input(Input {
                kind: kinds[rng.random_range(0..kinds.len())],
                view_id: ViewId(rng.random()),
                payload: json_value(rng, 0),
            })
        }
        6 => WireMessage::Error(ErrorInfo {
            code: word(rng),
            message: word(rng),
        }),
        _ => WireMessage::Feedback(Feedback {
            view_id: ViewId(rng.random()),
            world: point(rng),
            item: rng.random_bool(0.5).then(|| ItemId(rng.random())),
            metadata: (0..rng.random_range(0..3)).map(|_| (word(rng), word(rng))).collect::<BTreeMap<_, _>>(),
        }),
    }
}

/// Blocking test client with a short read timeout.
pub struct Client {
    ws: WebSocket<TcpStream>,
}

impl Client {
    /// Connects without sending hello.
    pub fn raw(addr: SocketAddr) -> Client {
        let stream = TcpStream::connect(addr).expect("connect");
        let (ws, _) = tungstenite::client(format!("ws://{addr}/"), stream).expect("upgrade");
        ws.get_ref().set_read_timeout(Some(Duration::from_millis(20))).unwrap();
        Client { ws }
    }

    /// Connects and completes the hello handshake.
    pub fn connect(addr: SocketAddr) -> Client {
        let mut c = Client::raw(addr);
        c.send(&WireMessage::hello());
        c
    }

    pub fn send(&mut self, msg: &WireMessage) {
        self.send_text(&encode(msg));
    }

    pub fn send_text(&mut self, text: &str) {
        self.ws.send(Message::text(text)).expect("send");
    }

    /// Next decoded message, or `None` on timeout or close.
    pub fn recv(&mut self, timeout: Duration) -> Option<WireMessage> {
        let deadline = Instant::now() + timeout;
        while Instant::now() < deadline {
            match self.ws.read() {
                Ok(Message::Text(t)) => return Some(decode(t.as_bytes()).expect("server sent valid message")),
                Ok(Message::Close(_)) => return None,
                Ok(_) => {}
                Err(tungstenite::Error::Io(e))
                    if matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut) => {}
                Err(_) => return None,
            }
        }
        None
    }

    /// Collects messages until `done` returns true or the timeout passes.
    pub fn collect_until(&mut self, timeout: Duration, mut done: impl FnMut(&[WireMessage]) -> bool) -> Vec<WireMessage> {
        let deadline = Instant::now() + timeout;
        let mut out = Vec::new();
        while Instant::now() < deadline && !done(&out) {
            if let Some(m) = self.recv(Duration::from_millis(20)) {
                out.push(m);
            }
        }
        out
    }

    /// Collects everything received during `window`.
    pub fn collect_for(&mut self, window: Duration) -> Vec<WireMessage> {
        self.collect_until(window, |_| false)
    }

    pub fn close(mut self) {
        let _ = self.ws.close(None);
        let _ = self.ws.flush();
    }
}

pub fn frames(msgs: &[WireMessage]) -> Vec<&Frame> {
    msgs.iter()
        .filter_map(|m| match m {
            WireMessage::Frame(f) => Some(f),
            _ => None,
        })
        .collect()
}
