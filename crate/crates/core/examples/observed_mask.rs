//! Lifts one view of the box room and asks which pixels of a rotated view
//! it already explains, at several coverage thresholds.

use std::error::Error;

use splatfill::backends::{lift_rgbd, LifterConfig};
use splatfill::geometry::yaw_pose;
use splatfill::raster::render;
use splatfill::synthetic::BoxRoom;
use splatfill::{Camera, Intrinsics, MaskBuffer, Pose};

pub const TAUS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Masks of the yaw-`angle_deg` view, one per entry of [`TAUS`].
pub fn masks_at(angle_deg: f64) -> Result<Vec<MaskBuffer>, Box<dyn Error>> {
    let room = BoxRoom::procedural(7);
    let base = Camera::new(Intrinsics::from_fov(48, 36, 60.0)?, Pose::identity());
    let (img, depth) = room.render(&base)?;
    let scene = lift_rgbd(&img, &depth, &base, &LifterConfig::default())?;
    let turned = Camera::new(base.intrinsics, yaw_pose(&base.pose, angle_deg)?);
    let out = render(&scene, &turned, [0.0; 3])?;
    Ok(TAUS.iter().map(|&t| out.mask(t)).collect::<Result<_, _>>()?)
}

pub fn run_example() -> Result<Vec<MaskBuffer>, Box<dyn Error>> {
    masks_at(20.0)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    let masks = run_example()?;
    for (tau, m) in TAUS.iter().zip(&masks) {
        println!("tau {tau:.2}: {:>5} observed pixels", m.count_observed());
    }
    // the right edge of the turned view was never seen
    let m = &masks[2];
    for y in (0..m.height()).step_by(4) {
        let row: String = (0..m.width()).map(|x| if m.get(x, y) { '#' } else { '.' }).collect();
        println!("{row}");
    }
    Ok(())
}
