//! Lifts an RGB-D frame of the box room to Gaussians and renders it back
//! from the same camera.

use std::error::Error;

use splatfill::backends::{lift_rgbd, LifterConfig};
use splatfill::optim::rgb_loss;
use splatfill::raster::render;
use splatfill::synthetic::BoxRoom;
use splatfill::{Camera, Intrinsics, Pose};

/// (Gaussian count, L1 between render-back and input).
pub fn run_example() -> Result<(usize, f64), Box<dyn Error>> {
    let room = BoxRoom::procedural(11);
    let cam = Camera::new(Intrinsics::from_fov(64, 48, 60.0)?, Pose::identity());
    let (img, depth) = room.render(&cam)?;
    let scene = lift_rgbd(&img, &depth, &cam, &LifterConfig::default())?;
    let back = render(&scene, &cam, [0.0; 3])?.color;
    Ok((scene.len(), rgb_loss(&back, &img)?))
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    let (n, l1) = run_example()?;
    println!("{n} gaussians, render-back L1 {l1:.4}");
    Ok(())
}
