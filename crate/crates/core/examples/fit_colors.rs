//! Fits the color and opacity of Gaussians to a target image by gradient
//! descent and prints the loss trace.

use std::error::Error;

use nalgebra::Vector3;
use splatfill::optim::{optimize, FrameTarget, Optimized};
use splatfill::raster::render;
use splatfill::{Camera, Gaussian3D, GaussianScene, Intrinsics, OptimConfig, Pose};

pub const TRUE_COLORS: [[f64; 3]; 3] = [[0.8, 0.3, 0.1], [0.1, 0.6, 0.9], [0.95, 0.9, 0.2]];

pub fn run_example() -> Result<Optimized, Box<dyn Error>> {
    let cam = Camera::new(Intrinsics::from_fov(32, 32, 50.0)?, Pose::identity());
    let at = [(-0.5, 0.0, 3.0), (0.4, -0.3, 3.5), (0.2, 0.45, 2.5)];
    let scene_with = |colors: &[[f64; 3]], opacity: f64| {
        GaussianScene::from_gaussians(
            at.iter()
                .zip(colors)
                .map(|(&(x, y, z), c)| Gaussian3D::isotropic(Vector3::new(x, y, z), 0.3, opacity, *c))
                .collect(),
            0,
        )
    };
    let truth = scene_with(&TRUE_COLORS, 0.9);
    let target = render(&truth, &cam, [0.0; 3])?.color;
    let start = scene_with(&[[0.5; 3]; 3], 0.5);
    let cfg = OptimConfig {
        max_iters: 150,
        ..Default::default()
    };
    Ok(optimize(&start, &[FrameTarget::new(cam, target)?], [0.0; 3], &cfg)?)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    let out = run_example()?;
    for (i, l) in out.trace.iter().enumerate().step_by(15) {
        println!("iter {i:>3}  loss {l:.5}");
    }
    println!("final loss {:.5}", out.trace.last().unwrap());
    for (g, want) in out.scene.iter().zip(TRUE_COLORS) {
        println!(
            "color {:.3?} (true {want:?})  opacity {:.3}",
            g.color, g.opacity
        );
    }
    Ok(())
}
