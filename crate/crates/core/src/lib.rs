//! Single-image scene completion on a CPU 3D Gaussian splatting engine.
//!
//! A scene is lifted from one RGB-D frame, then grown view by view: each
//! rotated view is rendered, its uncovered pixels are inpainted, the
//! inpainted frame is lifted again, and only Gaussians landing in uncovered
//! pixels are appended. Colors and opacities are then fitted against every
//! frame with an L1 photometric loss.
//!
//! See the crate's `examples/` directory for one runnable program per
//! capability.

pub mod backends;
pub mod cli;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod optim;
pub mod pipeline;
pub mod raster;
pub mod scene;
pub mod synthetic;

pub use error::{Error, Result};
pub use geometry::{Camera, Intrinsics, Pose, PoseSchedule};
pub use optim::{FrameTarget, OptimConfig, OptimizeFlags};
pub use pipeline::{run_pipeline, PipelineConfig, PipelineTrace};
pub use raster::{render, render_brute, RenderOutput};
pub use scene::{Gaussian3D, GaussianScene, ImageBuffer, MaskBuffer, Rgb};
