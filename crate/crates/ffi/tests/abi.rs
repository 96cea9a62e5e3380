use mdi_ffi::*;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

fn cs(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = mdi_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

unsafe fn take(p: *mut c_char) -> String {
    let s = CStr::from_ptr(p).to_str().unwrap().to_string();
    mdi_string_free(p);
    s
}

struct ViewGuard(*mut MdiView);

impl Drop for ViewGuard {
    fn drop(&mut self) {
        unsafe { mdi_view_free(self.0) }
    }
}

fn new_view() -> ViewGuard {
    let mut v = ptr::null_mut();
    let s = unsafe { mdi_view_new(cs("abi").as_ptr(), MdiViewKind::Content2d, 0.0, 0.0, 100.0, 100.0, &mut v) };
    assert_eq!(s, MdiStatus::Ok);
    ViewGuard(v)
}

/// World to screen through the frame's viewport, as a client would.
unsafe fn to_screen(view: *const MdiView, x: f64, y: f64) -> (f64, f64) {
    let mut json = ptr::null_mut();
    assert_eq!(mdi_view_frame_json(view, 1, &mut json), MdiStatus::Ok);
    let frame: serde_json::Value = serde_json::from_str(&take(json)).unwrap();
    let m = &frame["viewport"];
    let f = |k: &str| m[k].as_f64().unwrap();
    (f("a") * x + f("b") * y + f("c"), f("d") * x + f("e") * y + f("f"))
}

const RECT: &str = r#"{"geometry":{"kind":"rectangle","rect":{"min":{"x":10,"y":10},"max":{"x":30,"y":20}}},"metadata":{"name":"box"}}"#;

#[test]
fn view_items_hit_test_and_frame() {
    let view = new_view();
    unsafe {
        let (mut conn, mut ann) = (0, 0);
        assert_eq!(mdi_view_reserved_layers(view.0, &mut conn, &mut ann), MdiStatus::Ok);
        let mut layer = 0;
        assert_eq!(mdi_view_add_layer(view.0, cs("shapes").as_ptr(), &mut layer), MdiStatus::Ok);
        assert!(layer != conn && layer != ann);
        let (mut a, mut b) = (0, 0);
        assert_eq!(mdi_view_add_item_json(view.0, layer, cs(RECT).as_ptr(), &mut a), MdiStatus::Ok);
        assert_eq!(mdi_view_add_item_json(view.0, layer, cs(RECT).as_ptr(), &mut b), MdiStatus::Ok);

        let (x, y) = to_screen(view.0, 20.0, 15.0);
        let mut len = 0;
        assert_eq!(mdi_view_hit_test(view.0, x, y, ptr::null_mut(), 0, &mut len), MdiStatus::BufferTooSmall);
        assert_eq!(len, 2);
        let mut ids = vec![0u64; len];
        assert_eq!(mdi_view_hit_test(view.0, x, y, ids.as_mut_ptr(), ids.len(), &mut len), MdiStatus::Ok);
        assert_eq!(ids, vec![b, a]);

        let (x, y) = to_screen(view.0, 90.0, 90.0);
        assert_eq!(mdi_view_hit_test(view.0, x, y, ptr::null_mut(), 0, &mut len), MdiStatus::Ok);
        assert_eq!(len, 0);

        let mut json = ptr::null_mut();
        assert_eq!(mdi_view_frame_json(view.0, 7, &mut json), MdiStatus::Ok);
        let frame: serde_json::Value = serde_json::from_str(&take(json)).unwrap();
        assert_eq!(frame["type"], "frame");
        assert_eq!(frame["seq"], 7);
        let names: Vec<&str> = frame["layers"].as_array().unwrap().iter().map(|l| l["name"].as_str().unwrap()).collect();
        assert_eq!(names, ["connection", "shapes", "annotation"]);

        assert_eq!(mdi_view_set_layer_visibility(view.0, layer, false), MdiStatus::Ok);
        let (x, y) = to_screen(view.0, 20.0, 15.0);
        assert_eq!(mdi_view_hit_test(view.0, x, y, ptr::null_mut(), 0, &mut len), MdiStatus::Ok);
        assert_eq!(len, 0);
    }
}

#[test]
fn scene_errors_map_to_statuses() {
    let view = new_view();
    unsafe {
        let (mut conn, mut ann) = (0, 0);
        mdi_view_reserved_layers(view.0, &mut conn, &mut ann);
        let mut layer = 0;
        mdi_view_add_layer(view.0, cs("L").as_ptr(), &mut layer);
        let mut item = 0;
        mdi_view_add_item_json(view.0, layer, cs(RECT).as_ptr(), &mut item);

        let lock = cs(r#"{"op":"set_locked","locked":true}"#);
        assert_eq!(mdi_view_apply_edit_json(view.0, item, lock.as_ptr()), MdiStatus::Ok);
        let drag = cs(r#"{"op":"drag","dx":1,"dy":0}"#);
        assert_eq!(mdi_view_apply_edit_json(view.0, item, drag.as_ptr()), MdiStatus::Locked);
        assert!(last_error().contains("locked"), "{}", last_error());

        let connector = cs(&format!(r#"{{"geometry":{{"kind":"connector","from":{item},"to":{item}}}}}"#));
        let mut c = 0;
        assert_eq!(mdi_view_add_item_json(view.0, layer, connector.as_ptr(), &mut c), MdiStatus::InvalidArgument);
        assert_eq!(mdi_view_apply_edit_json(view.0, 999, drag.as_ptr()), MdiStatus::NotFound);
        assert_eq!(mdi_view_set_layer_visibility(view.0, 999, true), MdiStatus::NotFound);
        assert_eq!(mdi_view_apply_edit_json(view.0, item, cs("{\"op\":").as_ptr()), MdiStatus::Malformed);
        assert_eq!(mdi_view_zoom(view.0, 0.0, 1.0, 1.0), MdiStatus::InvalidArgument);

        let mut other = 0;
        mdi_view_add_item_json(view.0, layer, cs(RECT).as_ptr(), &mut other);
        let link = cs(&format!(r#"{{"geometry":{{"kind":"connector","from":{item},"to":{other}}}}}"#));
        assert_eq!(mdi_view_add_item_json(view.0, layer, link.as_ptr(), &mut c), MdiStatus::Denied);
        assert_eq!(mdi_view_add_item_json(view.0, conn, link.as_ptr(), &mut c), MdiStatus::Ok);
    }
}

#[test]
fn null_and_bad_strings_are_rejected() {
    unsafe {
        let mut v = ptr::null_mut();
        assert_eq!(
            mdi_view_new(ptr::null(), MdiViewKind::Plot, 0.0, 0.0, 1.0, 1.0, &mut v),
            MdiStatus::NullPointer
        );
        assert!(v.is_null());
        assert_eq!(last_error(), "title is null");
        let bad = [0xffu8, 0xfe, 0];
        assert_eq!(
            mdi_view_new(bad.as_ptr().cast(), MdiViewKind::Plot, 0.0, 0.0, 1.0, 1.0, &mut v),
            MdiStatus::InvalidUtf8
        );
        assert_eq!(
            mdi_view_new(cs("t").as_ptr(), MdiViewKind::Plot, 0.0, 0.0, 0.0, 1.0, &mut v),
            MdiStatus::InvalidArgument
        );
        assert_eq!(mdi_view_pan(ptr::null_mut(), 1.0, 1.0), MdiStatus::NullPointer);
        mdi_view_free(ptr::null_mut());
        mdi_string_free(ptr::null_mut());
        let version = CStr::from_ptr(mdi_version()).to_str().unwrap();
        assert_eq!(version, env!("CARGO_PKG_VERSION"));
    }
}

#[test]
fn histogram_fit_recovers_gaussian() {
    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(mdi_histogram_new(cs("h").as_ptr(), 60, -3.0, 3.0, &mut h), MdiStatus::Ok);
        // deterministic fill: each bin centre repeated round(expected count) times
        let (amp, mu, sigma) = (400.0, 0.3, 0.7);
        for i in 0..60 {
            let x = -3.0 + 0.1 * (i as f64 + 0.5);
            let n = (amp * (-0.5 * ((x - mu) / sigma) * ((x - mu) / sigma)).exp()).round() as usize;
            for _ in 0..n {
                assert_eq!(mdi_histogram_fill(h, x), MdiStatus::Ok);
            }
        }
        let mut counts = vec![0u64; 60];
        let mut len = 0;
        assert_eq!(mdi_histogram_counts(h, counts.as_mut_ptr(), 60, &mut len), MdiStatus::Ok);
        assert_eq!(len, 60);
        assert!(counts.iter().sum::<u64>() > 1000);

        let guess = [300.0, 0.0, 1.0];
        let mut params = [0.0; 3];
        let (mut chi2, mut converged) = (0.0, false);
        let s = mdi_histogram_fit_gaussians(h, 1, guess.as_ptr(), 3, params.as_mut_ptr(), 3, &mut chi2, &mut converged);
        assert_eq!(s, MdiStatus::Ok, "{}", last_error());
        assert!(converged);
        assert!((params[0] / amp - 1.0).abs() < 0.01, "{params:?}");
        assert!((params[1] - mu).abs() < 0.01, "{params:?}");
        assert!((params[2] / sigma - 1.0).abs() < 0.01, "{params:?}");

        let bad_guess = [300.0, 0.0, -1.0];
        let s = mdi_histogram_fit_gaussians(h, 1, bad_guess.as_ptr(), 3, params.as_mut_ptr(), 3, &mut chi2, &mut converged);
        assert_eq!(s, MdiStatus::FitFailed);
        assert_eq!(mdi_histogram_fill(h, f64::NAN), MdiStatus::InvalidArgument);
        mdi_histogram_free(h);
    }
}

#[test]
fn polynomial_fit_through_points() {
    let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 1.0 - 2.0 * x + 0.25 * x * x).collect();
    let guess = [0.0; 3];
    let mut params = [0.0; 3];
    let (mut chi2, mut converged) = (1.0, false);
    let s = unsafe {
        mdi_fit_points(
            MdiModel::Polynomial,
            2,
            xs.as_ptr(),
            ys.as_ptr(),
            ptr::null(),
            xs.len(),
            guess.as_ptr(),
            3,
            params.as_mut_ptr(),
            3,
            &mut chi2,
            &mut converged,
        )
    };
    assert_eq!(s, MdiStatus::Ok);
    for (got, want) in params.iter().zip([1.0, -2.0, 0.25]) {
        assert!((got - want).abs() < 1e-9, "{params:?}");
    }
    assert!(chi2 < 1e-18);
    let s = unsafe {
        mdi_fit_points(
            MdiModel::GaussianSum,
            1,
            xs.as_ptr(),
            ys.as_ptr(),
            ptr::null(),
            2,
            guess.as_ptr(),
            3,
            params.as_mut_ptr(),
            3,
            &mut chi2,
            &mut converged,
        )
    };
    assert_eq!(s, MdiStatus::FitFailed);
}

#[test]
fn gas_state_through_the_abi() {
    unsafe {
        let mut g = ptr::null_mut();
        assert_eq!(mdi_gas_new(20_000, 3, &mut g), MdiStatus::Ok);
        let mut s0 = 0.0;
        assert_eq!(mdi_gas_entropy(g, 10, &mut s0), MdiStatus::Ok);
        assert!((s0 - 125f64.ln()).abs() < 0.05, "{s0}");
        let mut e0 = 0.0;
        mdi_gas_kinetic_energy(g, &mut e0);
        assert_eq!(mdi_gas_step(g, 400), MdiStatus::Ok);
        let (mut e1, mut s1, mut t) = (0.0, 0.0, 0.0);
        mdi_gas_kinetic_energy(g, &mut e1);
        mdi_gas_entropy(g, 10, &mut s1);
        mdi_gas_sim_time(g, &mut t);
        assert!(((e1 - e0) / e0).abs() < 1e-12);
        assert!(s1 > s0 + 1.5, "{s0} -> {s1}");
        assert!((t - 2.0).abs() < 1e-12);

        let mut len = 0;
        assert_eq!(mdi_gas_positions(g, ptr::null_mut(), 0, &mut len), MdiStatus::BufferTooSmall);
        assert_eq!(len, 60_000);
        let mut xyz = vec![0.0; len];
        assert_eq!(mdi_gas_positions(g, xyz.as_mut_ptr(), len, &mut len), MdiStatus::Ok);
        assert!(xyz.iter().all(|v| (0.0..=1.0).contains(v)));

        assert_eq!(mdi_gas_entropy(g, 1, &mut s1), MdiStatus::InvalidArgument);
        mdi_gas_free(g);
        assert_eq!(mdi_gas_new(0, 3, &mut g), MdiStatus::InvalidArgument);
    }
}

#[test]
fn headless_run_exports_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("entropy.csv");
    let config = MdiHeadlessConfig {
        steps: 100,
        particles: 2000,
        seed: 4,
        ..mdi_headless_config_default()
    };
    unsafe {
        let mut csv = ptr::null_mut();
        let p = cs(path.to_str().unwrap());
        assert_eq!(mdi_run_headless(&config, p.as_ptr(), &mut csv), MdiStatus::Ok, "{}", last_error());
        let text = take(csv);
        assert_eq!(text.lines().count(), 11);
        assert_eq!(std::fs::read_to_string(&path).unwrap(), text);

        let missing = dir.path().join("no").join("x.csv");
        let p = cs(missing.to_str().unwrap());
        assert_eq!(mdi_run_headless(&config, p.as_ptr(), ptr::null_mut()), MdiStatus::Io);
        assert!(!missing.exists());

        let zero = MdiHeadlessConfig { steps: 0, ..config };
        assert_eq!(mdi_run_headless(&zero, ptr::null(), ptr::null_mut()), MdiStatus::InvalidArgument);
    }
}

/// Every declaration in the generated header compiles as C99 and C++.
#[test]
fn header_compiles_as_c_and_cpp() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    assert!(include.join("mdi.h").is_file());
    let dir = tempfile::tempdir().unwrap();
    let src = r#"
#include "mdi.h"
int main(void) {
    MdiView *view = 0;
    MdiStatus s = mdi_view_new("t", MDI_VIEW_KIND_CONTENT2D, 0, 0, 1, 1, &view);
    struct MdiHeadlessConfig cfg = mdi_headless_config_default();
    size_t len = 0;
    uint64_t ids[4];
    s = mdi_view_hit_test(view, 0.5, 0.5, ids, 4, &len);
    mdi_view_free(view);
    (void)cfg;
    return s == MDI_STATUS_OK ? 0 : 1;
}
"#;
    for (compiler, file, std) in [("cc", "t.c", "-std=c99"), ("c++", "t.cpp", "-std=c++11")] {
        let path = dir.path().join(file);
        std::fs::write(&path, src).unwrap();
        let out = Command::new(compiler)
            .args([std, "-Wall", "-Wextra", "-Werror", "-fsyntax-only", "-I"])
            .arg(&include)
            .arg(&path)
            .output()
            .unwrap_or_else(|e| panic!("{compiler} not runnable: {e}"));
        assert!(out.status.success(), "{compiler}: {}", String::from_utf8_lossy(&out.stderr));
    }
}
