mod common;

use std::path::Path;
use std::process::{Command, Output};

use nalgebra::Vector3;
use splatfill::backends::{lift_rgbd, LifterConfig};
use splatfill::io::{self, ply::encode_ply};
use splatfill::raster::render;
use splatfill::synthetic::BoxRoom;
use splatfill::{Camera, Gaussian3D, GaussianScene, Intrinsics, Pose};

fn splatfill(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_splatfill"))
        .args(args)
        .output()
        .expect("spawn splatfill")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn cam() -> Camera {
    Camera::new(Intrinsics::from_fov(20, 14, 60.0).unwrap(), Pose::identity())
}

fn write_room_inputs(dir: &Path) -> (splatfill::ImageBuffer, splatfill::backends::DepthMap) {
    let (img, depth) = BoxRoom::procedural(1).render(&cam()).unwrap();
    io::save_png(&img, &dir.join("in.png")).unwrap();
    io::save_depth(&depth, &dir.join("d.png")).unwrap();
    io::save_camera(&cam(), &dir.join("cam.json")).unwrap();
    (img, depth)
}

#[test]
fn render_empty_scene_is_background() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    io::save_ply(&GaussianScene::new(), &d.join("empty.ply")).unwrap();
    io::save_camera(&cam(), &d.join("cam.json")).unwrap();
    let o = splatfill(&[
        "render", "--ply", p(&d.join("empty.ply")), "--camera", p(&d.join("cam.json")),
        "--out", p(&d.join("out.png")), "--background", "0.2,0.4,1",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let img = io::load_png(&d.join("out.png")).unwrap();
    assert_eq!(img.dims(), (20, 14));
    assert!(img.pixels().all(|px| px == [51.0 / 255.0, 102.0 / 255.0, 1.0]));
}

#[test]
fn reconstruct_without_steps_writes_lifted_scene() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (img, depth) = write_room_inputs(d);
    std::fs::write(
        d.join("run.json"),
        r#"{"image": "in.png", "depth": "d.png", "camera": "cam.json", "output_dir": "out",
            "angles_deg": [], "inpainter": {"kind": "flat-fill"},
            "prompter": {"kind": "fixed", "prompt": "boxes"}}"#,
    )
    .unwrap();
    let o = splatfill(&["reconstruct", "--config", p(&d.join("run.json"))]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    // PNG/depth quantization is the same on both sides, so the bytes match
    let img = io::load_png(&d.join("in.png")).unwrap_or(img);
    let depth = io::load_depth(&d.join("d.png")).unwrap_or(depth);
    let lifted = lift_rgbd(&img, &depth, &cam(), &LifterConfig::default()).unwrap();
    assert_eq!(std::fs::read(d.join("out/scene.ply")).unwrap(), encode_ply(&lifted));
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.join("out/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["steps"].as_array().unwrap().len(), 1);
    assert_eq!(summary["prompt"], "boxes");
}

#[test]
fn eval_of_own_renders_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let scene = GaussianScene::from_gaussians(
        vec![Gaussian3D::isotropic(Vector3::new(0.0, 0.0, 2.0), 0.3, 0.8, [0.2, 0.6, 0.4])],
        0,
    );
    io::save_ply(&scene, &d.join("s.ply")).unwrap();
    let loaded = io::load_ply(&d.join("s.ply")).unwrap();
    std::fs::create_dir(d.join("views")).unwrap();
    for (name, x) in [("a", 0.0), ("b", 0.3)] {
        let c = Camera::new(cam().intrinsics, Pose::new(Default::default(), Vector3::new(x, 0.0, 0.0)));
        // targets written as PNG must already be 8-bit exact
        let r = render(&loaded, &c, [0.0; 3]).unwrap().color;
        let q = splatfill::ImageBuffer::from_fn(20, 14, |x, y| r.pixel(x, y).map(|v| (v * 255.0).round() / 255.0));
        io::save_png(&q, &d.join(format!("views/{name}.png"))).unwrap();
        io::save_camera(&c, &d.join(format!("views/{name}.json"))).unwrap();
    }
    let o = splatfill(&["eval", "--ply", p(&d.join("s.ply")), "--targets", p(&d.join("views")), "--out", p(&d.join("r.json"))]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("r.json")).unwrap()).unwrap();
    assert_eq!(report["views"].as_array().unwrap().len(), 2);
    // within 8-bit quantization of the stored targets
    assert!(report["mean_l1"].as_f64().unwrap() < 0.5 / 255.0, "{report}");
}

#[test]
fn exit_codes_partition_failures() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_room_inputs(d);

    assert_eq!(code(&splatfill(&["--help"])), 0);
    assert_eq!(code(&splatfill(&[])), 1);
    assert_eq!(code(&splatfill(&["render", "--ply"])), 1);
    assert_eq!(code(&splatfill(&["frobnicate"])), 1);

    // missing and malformed files
    let missing = splatfill(&["validate", "--ply", p(&d.join("nope.ply"))]);
    assert_eq!(code(&missing), 3);
    assert!(!missing.stderr.is_empty());
    std::fs::write(d.join("junk.ply"), b"ply\nformat ascii 1.0\nend_header\n").unwrap();
    assert_eq!(code(&splatfill(&["validate", "--ply", p(&d.join("junk.ply"))])), 3);

    // invariant violations
    let mut bad = Gaussian3D::isotropic(Vector3::new(0.0, 0.0, 1.0), 0.1, 0.5, [0.5; 3]);
    bad.mean.x = f64::NAN;
    std::fs::write(d.join("bad.ply"), encode_ply(&GaussianScene::from_gaussians(vec![bad], 0))).unwrap();
    assert_eq!(code(&splatfill(&["validate", "--ply", p(&d.join("bad.ply"))])), 3);

    // bad argument values
    io::save_ply(&GaussianScene::new(), &d.join("empty.ply")).unwrap();
    let render_with = |bg: &str| {
        code(&splatfill(&[
            "render", "--ply", p(&d.join("empty.ply")), "--camera", p(&d.join("cam.json")),
            "--out", p(&d.join("o.png")), "--background", bg,
        ]))
    };
    assert_eq!(render_with("2,0,0"), 1);
    assert_eq!(code(&splatfill(&[
        "mask", "--ply", p(&d.join("empty.ply")), "--camera", p(&d.join("cam.json")),
        "--tau", "1.5", "--out", p(&d.join("m.png")),
    ])), 1);

    // unknown config key
    std::fs::write(d.join("typo.json"), r#"{"imagee": "in.png"}"#).unwrap();
    assert_eq!(code(&splatfill(&["reconstruct", "--config", p(&d.join("typo.json"))])), 3);

    // backend failure keeps the completed steps
    let cfg = format!(
        r#"{{"image": "in.png", "depth": "d.png", "camera": "cam.json", "output_dir": "out",
            "angles_deg": [10], "inpainter": {{"kind": "remote", "url": "{}", "timeout_secs": 5}},
            "prompter": {{"kind": "fixed", "prompt": "boxes"}}}}"#,
        common::dead_url()
    );
    std::fs::write(d.join("remote.json"), cfg).unwrap();
    let o = splatfill(&["reconstruct", "--config", p(&d.join("remote.json"))]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(io::load_ply(&d.join("out/partial.ply")).unwrap().len(), 20 * 14);
    assert!(!d.join("out/scene.ply").exists());
}
