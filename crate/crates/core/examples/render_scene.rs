//! Renders a handful of overlapping Gaussians with the tiled rasterizer and
//! the per-pixel reference, and reports how far apart they are.
//!
//! `cargo run --example render_scene [out.png]`

use std::error::Error;

use nalgebra::{Quaternion, Vector3};
use splatfill::raster::{render, render_brute};
use splatfill::{io, Camera, Gaussian3D, GaussianScene, Intrinsics, Pose, RenderOutput};

pub fn demo_scene() -> GaussianScene {
    let q = |w, x, y, z| Quaternion::new(w, x, y, z);
    GaussianScene::from_gaussians(
        vec![
            Gaussian3D::new(Vector3::new(-0.4, 0.0, 3.0), q(1.0, 0.0, 0.0, 0.3), Vector3::new(0.5, 0.15, 0.1), 0.9, [0.9, 0.2, 0.1]),
            Gaussian3D::new(Vector3::new(0.3, -0.2, 2.5), q(0.8, 0.2, 0.0, -0.4), Vector3::new(0.2, 0.4, 0.1), 0.7, [0.1, 0.7, 0.3]),
            Gaussian3D::isotropic(Vector3::new(0.1, 0.3, 4.0), 0.6, 0.5, [0.2, 0.3, 0.9]),
            // behind the camera: never drawn
            Gaussian3D::isotropic(Vector3::new(0.0, 0.0, -1.0), 0.5, 0.9, [1.0, 1.0, 1.0]),
        ],
        0,
    )
}

pub fn demo_camera() -> Camera {
    Camera::new(Intrinsics::from_fov(80, 60, 60.0).unwrap(), Pose::identity())
}

/// Tiled render plus the largest per-channel gap to the reference.
pub fn run_example() -> Result<(RenderOutput, f64), Box<dyn Error>> {
    let (scene, cam) = (demo_scene(), demo_camera());
    let bg = [0.05, 0.05, 0.05];
    let fast = render(&scene, &cam, bg)?;
    let slow = render_brute(&scene, &cam, bg)?;
    let gap = fast
        .color
        .as_raw()
        .iter()
        .zip(slow.color.as_raw())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok((fast, gap))
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    let (out, gap) = run_example()?;
    println!("max |tiled - reference| = {gap:.3e}");
    let covered = (0..out.height())
        .flat_map(|y| (0..out.width()).map(move |x| (x, y)))
        .filter(|&(x, y)| out.alpha(x, y) > 0.5)
        .count();
    println!("{covered} of {} pixels above alpha 0.5", out.width() * out.height());
    if let Some(path) = std::env::args().nth(1) {
        io::save_png(&out.color, path.as_ref())?;
        println!("wrote {path}");
    }
    Ok(())
}
