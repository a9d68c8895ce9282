//! Compares the analytic gradient with central finite differences on a small
//! random scene, for colors/opacities and for positions.

use std::error::Error;

use nalgebra::{Quaternion, Vector3};
use splatfill::optim::{fd_gradient, gradient, FrameTarget, OptimizeFlags, SceneGradient};
use splatfill::raster::render;
use splatfill::{Camera, Gaussian3D, GaussianScene, ImageBuffer, Intrinsics, Pose};

pub fn relative_error(a: &SceneGradient, b: &SceneGradient) -> f64 {
    let (a, b) = (a.flatten(), b.flatten());
    let diff: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum();
    let norm: f64 = b.iter().map(|y| y * y).sum();
    (diff / norm).sqrt()
}

/// Small deterministic scene with a target that sits ±0.1 away from the
/// render, so no residual is near the L1 kink.
pub fn problem(seed: u64) -> (GaussianScene, Vec<FrameTarget>) {
    let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let cam = Camera::new(Intrinsics::from_fov(24, 20, 60.0).unwrap(), Pose::identity());
    let gs = (0..6)
        .map(|_| {
            Gaussian3D::new(
                Vector3::new(next() - 0.5, next() - 0.5, 2.0 + 2.0 * next()),
                Quaternion::new(1.0, next() - 0.5, next() - 0.5, next() - 0.5),
                Vector3::new(0.05 + 0.3 * next(), 0.05 + 0.3 * next(), 0.05 + 0.3 * next()),
                0.2 + 0.6 * next(),
                [next(), next(), next()],
            )
        })
        .collect();
    let scene = GaussianScene::from_gaussians(gs, 0);
    let own = render(&scene, &cam, [0.0; 3]).unwrap().color;
    let target = ImageBuffer::from_fn(24, 20, |x, y| {
        let d = if (x * 7 + y * 3) % 2 == 0 { 0.1 } else { -0.1 };
        own.pixel(x, y).map(|v| v + d)
    });
    (scene, vec![FrameTarget::new(cam, target).unwrap()])
}

/// Relative errors for the default parameter set and for positions.
pub fn run_example() -> Result<(f64, f64), Box<dyn Error>> {
    let (scene, frames) = problem(3);
    let appearance = OptimizeFlags::default();
    let position = OptimizeFlags {
        color: false,
        opacity: false,
        position: true,
    };
    let mut errs = [0.0; 2];
    for (e, flags) in errs.iter_mut().zip([appearance, position]) {
        let a = gradient(&scene, &frames, [0.0; 3], flags)?;
        let n = fd_gradient(&scene, &frames, [0.0; 3], flags, 1e-6)?;
        *e = relative_error(&a, &n);
    }
    Ok((errs[0], errs[1]))
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    let (app, pos) = run_example()?;
    println!("color+opacity relative error: {app:.2e}");
    println!("position relative error:      {pos:.2e}");
    Ok(())
}
