//! Writes a scene to a 3DGS-style binary PLY, reads it back, and reports the
//! worst parameter drift. The file is single precision, so drift is at the
//! f32 rounding level.

use std::error::Error;

use splatfill::io;
use splatfill::synthetic::BoxRoom;
use splatfill::backends::{lift_rgbd, LifterConfig};
use splatfill::{Camera, GaussianScene, Intrinsics, Pose};

pub struct Drift {
    pub count: usize,
    pub bytes: usize,
    pub mean: f64,
    pub scale_rel: f64,
    pub opacity: f64,
    pub color: f64,
}

pub fn compare(a: &GaussianScene, b: &GaussianScene) -> Drift {
    let mut d = Drift {
        count: b.len(),
        bytes: 0,
        mean: 0.0,
        scale_rel: 0.0,
        opacity: 0.0,
        color: 0.0,
    };
    for (x, y) in a.iter().zip(b.iter()) {
        d.mean = d.mean.max((x.mean - y.mean).amax());
        d.scale_rel = d.scale_rel.max(((x.scale - y.scale).component_div(&x.scale)).amax());
        d.opacity = d.opacity.max((x.opacity - y.opacity).abs());
        for c in 0..3 {
            d.color = d.color.max((x.color[c] - y.color[c]).abs());
        }
    }
    d
}

pub fn run_example() -> Result<Drift, Box<dyn Error>> {
    let cam = Camera::new(Intrinsics::from_fov(40, 30, 60.0)?, Pose::identity());
    let (img, depth) = BoxRoom::procedural(5).render(&cam)?;
    let scene = lift_rgbd(&img, &depth, &cam, &LifterConfig::default())?;
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("scene.ply");
    io::save_ply(&scene, &path)?;
    let back = io::load_ply(&path)?;
    let mut d = compare(&scene, &back);
    d.bytes = std::fs::metadata(&path)?.len() as usize;
    Ok(d)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    let d = run_example()?;
    println!("{} gaussians, {} bytes", d.count, d.bytes);
    println!(
        "max drift: mean {:.1e}, scale (rel) {:.1e}, opacity {:.1e}, color {:.1e}",
        d.mean, d.scale_rel, d.opacity, d.color
    );
    Ok(())
}
