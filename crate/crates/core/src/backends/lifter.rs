use nalgebra::{Quaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Camera;
use crate::scene::{check_dims, Gaussian3D, GaussianScene, ImageBuffer};

/// Per-pixel depth in world units; `None` marks an invalid pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<Option<f64>>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, values: Vec<Option<f64>>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::invalid(format!(
                "depth map has {} values, expected {}",
                values.len(),
                width * height
            )));
        }
        if let Some(d) = values.iter().flatten().find(|d| !(d.is_finite() && **d > 0.0)) {
            return Err(Error::invalid(format!("invalid depth value {d}")));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> Option<f64>) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::new(width, height, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        self.values[y * self.width + x]
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }
}

pub const DEFAULT_OPACITY_INIT: f64 = 0.95;
pub const DEFAULT_PIXEL_SCALE_FACTOR: f64 = 0.7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LifterConfig {
    pub opacity_init: f64,
    /// Gaussian standard deviation in pixels when re-projected.
    pub pixel_scale_factor: f64,
    /// Directory holding `depth_{i}.png` for pipeline steps `i >= 1`.
    pub depth_dir: Option<std::path::PathBuf>,
}

impl Default for LifterConfig {
    fn default() -> Self {
        Self {
            opacity_init: DEFAULT_OPACITY_INIT,
            pixel_scale_factor: DEFAULT_PIXEL_SCALE_FACTOR,
            depth_dir: None,
        }
    }
}

/// One isotropic Gaussian per valid-depth pixel, placed at the unprojected
/// pixel center and sized to cover roughly one pixel.
pub fn lift_rgbd(
    image: &ImageBuffer,
    depth: &DepthMap,
    cam: &Camera,
    cfg: &LifterConfig,
) -> Result<GaussianScene> {
    check_dims(image.dims(), depth.dims(), "lift_rgbd image/depth")?;
    check_dims(image.dims(), cam.dims(), "lift_rgbd image/camera")?;
    cam.intrinsics.validate()?;
    if !(0.0..=1.0).contains(&cfg.opacity_init) || !(cfg.pixel_scale_factor > 0.0) {
        return Err(Error::invalid(format!("invalid lifter settings {cfg:?}")));
    }
    let fx = cam.intrinsics.fx;
    let mut out = Vec::with_capacity(image.width() * image.height());
    for y in 0..image.height() {
        for x in 0..image.width() {
            let Some(d) = depth.get(x, y) else { continue };
            let p_cam = cam.unproject(x as f64, y as f64, d);
            out.push(Gaussian3D::new(
                cam.pose.camera_to_world(&p_cam),
                Quaternion::identity(),
                Vector3::repeat(cfg.pixel_scale_factor * d / fx),
                cfg.opacity_init,
                image.pixel(x, y),
            ));
        }
    }
    Ok(GaussianScene::from_gaussians(out, 0))
}
