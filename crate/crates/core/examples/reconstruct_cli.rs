//! Drives the `splatfill` command line end to end: writes a run config for a
//! two-step completion of the box room, reconstructs, renders the result
//! from a new camera, scores it, and validates the PLY.
//!
//! `cargo run --example reconstruct_cli [work_dir]`

use std::error::Error;
use std::path::Path;

use splatfill::geometry::yaw_pose;
use splatfill::synthetic::BoxRoom;
use splatfill::{cli, io, Camera, Intrinsics, Pose};

fn sh(args: &[&str]) -> Result<(), Box<dyn Error>> {
    let argv = std::iter::once("splatfill").chain(args.iter().copied());
    match cli::run(argv) {
        0 => Ok(()),
        code => Err(format!("splatfill {} exited with {code}", args.join(" ")).into()),
    }
}

/// Returns the paths of the files the CLI wrote, relative to `dir`.
pub fn run_in(dir: &Path) -> Result<Vec<String>, Box<dyn Error>> {
    let room = BoxRoom::procedural(3);
    let cam = Camera::new(Intrinsics::from_fov(40, 30, 60.0)?, Pose::identity());
    let angles = [-15.0, 15.0];

    let (img, depth) = room.render(&cam)?;
    io::save_png(&img, &dir.join("input.png"))?;
    io::save_depth(&depth, &dir.join("depth_0.png"))?;
    io::save_camera(&cam, &dir.join("camera.json"))?;
    std::fs::create_dir_all(dir.join("gt"))?;
    std::fs::create_dir_all(dir.join("views"))?;
    for (i, a) in angles.iter().enumerate() {
        let c = Camera::new(cam.intrinsics, yaw_pose(&cam.pose, *a)?);
        let (img, depth) = room.render(&c)?;
        io::save_png(&img, &dir.join(format!("gt/gt_{}.png", i + 1)))?;
        io::save_depth(&depth, &dir.join(format!("gt/depth_{}.png", i + 1)))?;
        io::save_png(&img, &dir.join(format!("views/yaw{}.png", i + 1)))?;
        io::save_camera(&c, &dir.join(format!("views/yaw{}.json", i + 1)))?;
    }
    let config = serde_json::json!({
        "image": "input.png",
        "depth": "depth_0.png",
        "camera": "camera.json",
        "output_dir": "run",
        "angles_deg": angles,
        "optim": {"max_iters": 10},
        "reconstructor": {"kind": "rgbd-lifter", "depth_dir": "gt"},
        "inpainter": {"kind": "oracle-directory", "dir": "gt"},
        "prompter": {"kind": "fixed", "prompt": "An indoor scene with colored boxes."}
    });
    std::fs::write(dir.join("run.json"), serde_json::to_string_pretty(&config)?)?;

    let p = |s: &str| dir.join(s).to_string_lossy().into_owned();
    sh(&["reconstruct", "--config", &p("run.json")])?;
    sh(&["validate", "--ply", &p("run/scene.ply")])?;
    sh(&["render", "--ply", &p("run/scene.ply"), "--camera", &p("views/yaw2.json"), "--out", &p("yaw2_render.png")])?;
    sh(&["mask", "--ply", &p("run/scene.ply"), "--camera", &p("views/yaw2.json"), "--out", &p("yaw2_mask.png")])?;
    sh(&["eval", "--ply", &p("run/scene.ply"), "--targets", &p("views"), "--out", &p("eval.json")])?;

    let mut written: Vec<String> = std::fs::read_dir(dir.join("run"))?
        .map(|e| format!("run/{}", e.unwrap().file_name().to_string_lossy()))
        .chain(["yaw2_render.png", "yaw2_mask.png", "eval.json"].map(String::from))
        .collect();
    written.sort();
    Ok(written)
}

pub fn run_example() -> Result<Vec<String>, Box<dyn Error>> {
    let dir = tempfile::tempdir()?;
    run_in(dir.path())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    let written = match std::env::args().nth(1) {
        Some(d) => {
            std::fs::create_dir_all(&d)?;
            run_in(Path::new(&d))?
        }
        None => run_example()?,
    };
    for f in written {
        println!("{f}");
    }
    Ok(())
}
