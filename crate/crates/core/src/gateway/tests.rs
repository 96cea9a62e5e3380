use super::*;
use crate::engine::{Clock, State, VirtualClock};
use crate::scene::{Affine2, Geometry, ItemEdit, ItemSpec, LayerId, Point, Rect, Reserved, ViewId, ViewKind};
use serde_json::json;
use std::sync::Arc;

fn options(demo: Demo) -> AppOptions {
    AppOptions {
        demo,
        seed: 1,
        grid_m: 10,
        particles: 300,
        refresh_ms: 33.0,
        max_steps: None,
        pace_ms: None,
        clock: Arc::new(VirtualClock::new()) as Arc<dyn Clock>,
    }
}

fn input(kind: InputKind, view: ViewId, payload: serde_json::Value) -> Input {
    Input {
        kind,
        view_id: view,
        payload,
    }
}

fn error_code(replies: &[WireMessage]) -> Option<&str> {
    replies.iter().find_map(|m| match m {
        WireMessage::Error(e) => Some(e.code.as_str()),
        _ => None,
    })
}

#[test]
fn hello_round_trip() {
    let m = WireMessage::hello();
    assert_eq!(encode(&m), r#"{"type":"hello","protocol_version":1}"#);
    assert_eq!(decode(encode(&m).as_bytes()).unwrap(), m);
}

#[test]
fn frame_with_three_layers_and_ten_items_round_trips() {
    let mut d = crate::scene::Desktop::new();
    let v = d.create_view("v", ViewKind::Content2d, Rect::new(0.0, 0.0, 100.0, 100.0)).unwrap();
    let view = d.view_mut(v).unwrap();
    let a = view.add_layer("A");
    let mut ids = Vec::new();
    for i in 0..9 {
        let x = i as f64 * 7.3;
        let spec = ItemSpec::rectangle(Rect::new(x, x / 3.0, x + 4.1, x / 3.0 + 2.2))
            .with_rotation(0.1 * i as f64)
            .with_metadata("name", format!("r{i}"));
        ids.push(view.add_item(a, spec).unwrap());
    }
    view.add_item(view.connection_layer(), ItemSpec::connector(ids[0], ids[5])).unwrap();
    let frame = snapshot_frame(view, 3);
    assert_eq!(frame.layers.len(), 3);
    let msg = WireMessage::Frame(frame);
    assert_eq!(decode(encode(&msg).as_bytes()).unwrap(), msg);
}

#[test]
fn decode_ignores_unknown_fields() {
    let text = r#"{"type":"input","kind":"hover","view_id":4,"payload":{"x":1,"y":2},"extra":[1,2,3]}"#;
    match decode(text.as_bytes()).unwrap() {
        WireMessage::Input(i) => {
            assert_eq!(i.kind, InputKind::Hover);
            assert_eq!(i.view_id, ViewId(4));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn malformed_reports_byte_offset() {
    let text = b"{\"type\":\"hello\",\n \"protocol_version\": x}";
    match decode(text) {
        Err(GatewayError::Malformed { line, offset, .. }) => {
            assert_eq!(line, 2);
            assert_eq!(text[offset], b'x');
        }
        other => panic!("{other:?}"),
    }
    assert!(matches!(decode(br#"{"type":"nope"}"#), Err(GatewayError::Malformed { .. })));
    assert!(matches!(decode(b""), Err(GatewayError::Malformed { offset: 0, .. })));
}

#[test]
fn point_batch_floats_round_trip_exactly() {
    let coords: Vec<f32> = (0..3000).map(|i| ((i as f32) * 0.618_034).sin() / 3.0).collect();
    let msg = WireMessage::Frame(Frame {
        view_id: ViewId(1),
        seq: 9,
        view_kind: ViewKind::Content3d,
        title: "t".into(),
        viewport: Affine2::IDENTITY,
        screen_size: (800.0, 600.0),
        layers: vec![FrameLayer {
            layer_id: LayerId(2),
            name: "points".into(),
            visible: true,
            reserved: Reserved::None,
            items: vec![FrameEntry::Points {
                batch: PointBatch {
                    count: 1000,
                    coords,
                    scalar: Some(vec![0.1; 1000]),
                },
            }],
        }],
        plot: None,
    });
    assert_eq!(decode(encode(&msg).as_bytes()).unwrap(), msg);
}

fn network() -> (App, ViewId) {
    let app = App::new(options(Demo::Network)).unwrap();
    let v = app.desktop().views()[0].id;
    (app, v)
}

fn screen_of(app: &App, view: ViewId, world: Point) -> Point {
    app.desktop().view(view).unwrap().world_to_screen(world).unwrap()
}

#[test]
fn network_demo_has_connectors_and_metadata() {
    let (mut app, v) = network();
    let view = app.desktop().view(v).unwrap();
    assert!(view.layer(view.connection_layer()).unwrap().items.len() >= 5);
    let frames = app.pump(0.0).unwrap();
    assert!(matches!(frames.as_slice(), [WireMessage::Frame(f)] if f.view_id == v && f.seq == 1));
}

#[test]
fn hover_replies_with_metadata_and_world_position() {
    let (mut app, v) = network();
    let on_node = screen_of(&app, v, Point::new(45.0, 70.0));
    let replies = app.handle_input(&input(InputKind::Hover, v, json!({"x": on_node.x, "y": on_node.y})));
    match replies.as_slice() {
        [WireMessage::Feedback(f)] => {
            assert_eq!(f.metadata.get("name").map(String::as_str), Some("node-1"));
            assert!((f.world.x - 45.0).abs() < 1e-9 && (f.world.y - 70.0).abs() < 1e-9);
        }
        other => panic!("{other:?}"),
    }
    let empty = screen_of(&app, v, Point::new(95.0, 5.0));
    match app.handle_input(&input(InputKind::Hover, v, json!({"x": empty.x, "y": empty.y}))).as_slice() {
        [WireMessage::Feedback(f)] => {
            assert!(f.item.is_none());
            assert!(f.metadata.is_empty());
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn drag_moves_item_by_world_delta() {
    let (mut app, v) = network();
    let start = screen_of(&app, v, Point::new(20.0, 60.0));
    let end = screen_of(&app, v, Point::new(25.0, 58.0));
    let replies = app.handle_input(&input(
        InputKind::Drag,
        v,
        json!({"x": start.x, "y": start.y, "dx": end.x - start.x, "dy": end.y - start.y}),
    ));
    assert!(replies.is_empty(), "{replies:?}");
    let view = app.desktop().view(v).unwrap();
    let node = view.items().find(|i| i.metadata.get("name").map(String::as_str) == Some("node-0")).unwrap();
    match node.geometry {
        Geometry::Ellipse { center, .. } => {
            assert!((center.x - 25.0).abs() < 1e-9 && (center.y - 58.0).abs() < 1e-9);
        }
        _ => panic!(),
    }
}

#[test]
fn drag_on_locked_item_reports_locked_without_change() {
    let (mut app, v) = network();
    let before = app.desktop().view(v).unwrap().clone();
    let p = screen_of(&app, v, Point::new(10.0, 5.0));
    let replies = app.handle_input(&input(InputKind::Drag, v, json!({"x": p.x, "y": p.y, "dx": 10.0, "dy": 0.0})));
    assert_eq!(error_code(&replies), Some("Locked"));
    assert_eq!(app.desktop().view(v).unwrap(), &before);
}

#[test]
fn layer_toggle_on_connection_layer_is_allowed() {
    let (mut app, v) = network();
    app.pump(0.0).unwrap();
    let conn = app.desktop().view(v).unwrap().connection_layer();
    let replies = app.handle_input(&input(InputKind::LayerToggle, v, json!({"layer": conn.0})));
    assert!(replies.is_empty(), "{replies:?}");
    assert!(!app.desktop().view(v).unwrap().layer(conn).unwrap().visible);
    let out = app.pump(100.0).unwrap();
    match out.as_slice() {
        [WireMessage::Frame(f)] => {
            assert_eq!(f.seq, 2);
            assert!(f.layers.iter().all(|l| l.reserved != Reserved::Connection));
        }
        other => panic!("{other:?}"),
    }
    app.handle_input(&input(InputKind::LayerToggle, v, json!({"layer": "nodes", "visible": false})));
    let view = app.desktop().view(v).unwrap();
    assert!(!view.layer_by_name("nodes").unwrap().visible);
}

#[test]
fn unknown_view_and_item_are_errors() {
    let (mut app, v) = network();
    let r = app.handle_input(&input(InputKind::Hover, ViewId(99), json!({"x": 0, "y": 0})));
    assert_eq!(error_code(&r), Some("UnknownView"));
    let r = app.handle_input(&input(InputKind::ItemEdit, v, json!({"item": 999, "edit": {"op": "delete"}})));
    assert_eq!(error_code(&r), Some("UnknownItem"));
    let r = app.handle_input(&input(InputKind::Tool, v, json!({"op": "spin"})));
    assert_eq!(error_code(&r), Some("InvalidInput"));
    let r = app.handle_input(&input(InputKind::SimControl, v, json!({"op": "start"})));
    assert_eq!(error_code(&r), Some("NoSimulation"));
    let r = app.handle_message(&WireMessage::hello());
    assert!(r.is_empty());
    let r = app.handle_message(&WireMessage::ViewList { views: vec![] });
    assert_eq!(error_code(&r), Some("UnexpectedMessage"));
}

#[test]
fn item_edit_and_click_selection() {
    let (mut app, v) = network();
    let id = app.desktop().view(v).unwrap().items().find(|i| i.metadata.get("name").map(String::as_str) == Some("node-2")).unwrap().id;
    let edit = serde_json::to_value(ItemEdit::Rotate { dtheta: 0.5 }).unwrap();
    assert!(app.handle_input(&input(InputKind::ItemEdit, v, json!({"item": id, "edit": edit}))).is_empty());
    assert!((app.desktop().view(v).unwrap().item(id).unwrap().rotation - 0.5).abs() < 1e-12);

    let p = screen_of(&app, v, Point::new(75.0, 62.0));
    app.handle_input(&input(InputKind::Click, v, json!({"x": p.x, "y": p.y})));
    assert!(app.desktop().view(v).unwrap().item(id).unwrap().selected);
    let q = screen_of(&app, v, Point::new(85.0, 25.0));
    app.handle_input(&input(InputKind::Click, v, json!({"x": q.x, "y": q.y, "additive": true})));
    assert_eq!(app.desktop().view(v).unwrap().items().filter(|i| i.selected).count(), 2);
    let e = screen_of(&app, v, Point::new(95.0, 75.0));
    app.handle_input(&input(InputKind::Click, v, json!({"x": e.x, "y": e.y})));
    assert_eq!(app.desktop().view(v).unwrap().items().filter(|i| i.selected).count(), 0);
}

#[test]
fn viewport_tools() {
    let (mut app, v) = network();
    let before = app.desktop().view(v).unwrap().viewport();
    assert!(app.handle_input(&input(InputKind::Tool, v, json!({"op": "pan", "dx": 10, "dy": -5}))).is_empty());
    let panned = app.desktop().view(v).unwrap().viewport();
    assert_eq!((panned.c - before.c, panned.f - before.f), (10.0, -5.0));
    app.handle_input(&input(InputKind::Tool, v, json!({"op": "zoom", "factor": 2.0, "x": 400, "y": 300})));
    let zoomed = app.desktop().view(v).unwrap().viewport();
    assert!((zoomed.determinant() / panned.determinant() - 4.0).abs() < 1e-9);
    app.handle_input(&input(InputKind::Tool, v, json!({"op": "box_zoom", "rect": [100, 100, 300, 250]})));
    app.handle_input(&input(InputKind::Tool, v, json!({"op": "reset"})));
    assert_eq!(app.desktop().view(v).unwrap().viewport(), before);
    let r = app.handle_input(&input(InputKind::Tool, v, json!({"op": "zoom", "factor": 0.0, "x": 0, "y": 0})));
    assert!(error_code(&r).is_some());
    let r = app.handle_input(&input(InputKind::Tool, v, json!({"op": "orbit", "d_yaw": 10, "d_pitch": 0})));
    assert!(error_code(&r).is_some());
}

#[test]
fn dirt_storm_sends_at_most_two_frames_per_interval() {
    let (mut app, v) = network();
    let mut frames = 0;
    for m in app.pump(0.0).unwrap() {
        frames += matches!(m, WireMessage::Frame(_)) as usize;
    }
    assert_eq!(frames, 1);
    let mut sent = 0;
    for i in 0..10_000 {
        app.handle_input(&input(InputKind::Tool, v, json!({"op": "pan", "dx": 0.001, "dy": 0})));
        let now = 1.0 + i as f64 * 0.003;
        sent += app.pump(now).unwrap().iter().filter(|m| matches!(m, WireMessage::Frame(_))).count();
    }
    assert!(sent <= 2, "{sent}");
}

#[test]
fn plots_demo_frames_carry_documents() {
    let mut app = App::new(options(Demo::Plots)).unwrap();
    let out = app.pump(0.0).unwrap();
    let docs: Vec<_> = out
        .iter()
        .filter_map(|m| match m {
            WireMessage::Frame(f) => f.plot.as_ref(),
            _ => None,
        })
        .collect();
    assert_eq!(docs.len(), 2);
    assert_eq!(docs[0].fits.len(), 1);
    let fit = &docs[0].fits[0].model;
    assert!(fit.converged);
    for (c, mu) in fit.params.chunks(3).zip([-3.0, 0.0, 3.0]) {
        assert!((c[1] - mu).abs() < 0.05, "{:?}", fit.params);
    }
    assert_eq!(docs[1].histograms2d[0].total(), 50_000);
}

#[cfg(feature = "view3d")]
mod live {
    use super::*;

    fn kinetics() -> (App, ViewId, ViewId) {
        let app = App::new(options(Demo::Kinetics)).unwrap();
        let (a, b) = (app.desktop().views()[0].id, app.desktop().views()[1].id);
        (app, a, b)
    }

    #[test]
    fn pause_while_running_emits_sim_state() {
        let (mut app, cloud, _) = kinetics();
        app.handle_input(&input(InputKind::SimControl, cloud, json!({"op": "start"})));
        assert_eq!(app.engine().state(), State::Running);
        app.pump(0.0).unwrap();
        let r = app.handle_input(&input(InputKind::SimControl, cloud, json!({"op": "pause"})));
        assert!(r.is_empty(), "{r:?}");
        assert_eq!(app.engine().state(), State::Paused);
        let out = app.pump(1.0).unwrap();
        assert!(out.iter().any(|m| matches!(m, WireMessage::SimState(s) if s.state == "Paused" && s.previous.as_deref() == Some("Running"))));
        let r = app.handle_input(&input(InputKind::SimControl, cloud, json!({"op": "pause"})));
        assert_eq!(error_code(&r), Some("IllegalState"));
        app.handle_input(&input(InputKind::SimControl, cloud, json!({"op": "cancel"})));
        assert_eq!(app.engine().state(), State::Cancelled);
    }

    #[test]
    fn stepping_feeds_entropy_plot_and_point_batch() {
        let (mut app, cloud, plot) = kinetics();
        app.pump(0.0).unwrap();
        app.handle_input(&input(InputKind::SimControl, cloud, json!({"op": "step", "n": 25})));
        let out = app.pump(40.0).unwrap();
        let points: Vec<_> = out.iter().filter(|m| matches!(m, WireMessage::PlotData(_))).collect();
        assert_eq!(points.len(), 3);
        assert!(matches!(points[0], WireMessage::PlotData(p) if p.view_id == Some(plot) && p.x == 0.0));
        assert_eq!(app.plot_document(plot).unwrap().series[0].len(), 3);
        let frame = out
            .iter()
            .find_map(|m| match m {
                WireMessage::Frame(f) if f.view_id == cloud => Some(f),
                _ => None,
            })
            .unwrap();
        assert!(frame.point_count() > 0 && frame.point_count() <= 300);

        app.handle_input(&input(InputKind::SimControl, cloud, json!({"op": "reset"})));
        assert!(app.plot_document(plot).unwrap().series[0].is_empty());
    }

    #[test]
    fn orbit_changes_projection() {
        let (mut app, cloud, _) = kinetics();
        let first = match &app.pump(0.0).unwrap()[0] {
            WireMessage::Frame(f) => f.clone(),
            other => panic!("{other:?}"),
        };
        let r = app.handle_input(&input(InputKind::Tool, cloud, json!({"op": "orbit", "d_yaw": 30, "d_pitch": 10})));
        assert!(r.is_empty(), "{r:?}");
        let second = app
            .pump(100.0)
            .unwrap()
            .into_iter()
            .find_map(|m| match m {
                WireMessage::Frame(f) if f.view_id == cloud => Some(f),
                _ => None,
            })
            .unwrap();
        assert!(second.seq > first.seq);
        assert_ne!(first.layers, second.layers);
    }
}

mod headless {
    use super::*;

    fn config(dir: &std::path::Path, name: &str) -> ServerConfig {
        ServerConfig {
            headless: true,
            steps: Some(200),
            seed: Some(5),
            particles: 2000,
            export_path: Some(dir.join(name)),
            ..ServerConfig::default()
        }
    }

    #[test]
    fn writes_one_row_per_sample() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path(), "s.csv");
        let report = run_headless(&cfg).unwrap();
        assert_eq!(report.steps, 200);
        assert_eq!(report.final_state, State::Completed);
        let text = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,s");
        assert_eq!(lines.len(), 21);
        assert_eq!(text.as_bytes(), report.csv.as_slice());
        let ts: Vec<f64> = lines[1..].iter().map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn missing_directory_fails_without_partial_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ServerConfig {
            export_path: Some(dir.path().join("nope").join("s.csv")),
            ..config(dir.path(), "unused")
        };
        assert!(matches!(run_headless(&cfg), Err(GatewayError::Export(_))));
        assert!(!dir.path().join("nope").exists());
    }

    #[test]
    fn config_rules() {
        let bad = ServerConfig {
            headless: true,
            ..ServerConfig::default()
        };
        assert!(matches!(run_headless(&bad), Err(GatewayError::InvalidConfig(_))));
        let other_demo = ServerConfig {
            headless: true,
            steps: Some(10),
            demo: Demo::Network,
            ..ServerConfig::default()
        };
        assert!(matches!(run_headless(&other_demo), Err(GatewayError::Unsupported(_))));
    }
}

#[test]
fn rectangle_geometry_serializes_with_kind_tag() {
    let item = ItemSpec::rectangle(Rect::new(0.0, 0.0, 1.0, 1.0));
    let v = serde_json::to_value(&item.geometry).unwrap();
    assert_eq!(v["kind"], "rectangle");
}

#[cfg(not(feature = "view3d"))]
#[test]
fn kinetics_is_headless_only_without_view3d() {
    assert!(matches!(App::new(options(Demo::Kinetics)), Err(GatewayError::Unsupported(_))));
    let cfg = ServerConfig {
        headless: true,
        steps: Some(30),
        particles: 500,
        ..ServerConfig::default()
    };
    assert_eq!(run_headless(&cfg).unwrap().samples.len(), 3);
    assert!(spawn(&ServerConfig { port: 0, ..ServerConfig::default() }).is_err());
}
