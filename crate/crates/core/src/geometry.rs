//! Pinhole cameras, rigid poses, the yaw schedule, and projection of points
//! and covariances into pixel space.
//!
//! Camera frame convention: +x right, +y down, +z forward. Pixel coordinates
//! put the center of pixel `(col, row)` at `(u, v) = (col, row)`.

use nalgebra::{Matrix2, Matrix2x3, Matrix3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{Gaussian3D, GaussianScene};

/// Points at or closer than this camera-frame depth are treated as behind.
pub const EPS_DEPTH: f64 = 1e-6;

/// Isotropic term added to every projected covariance, in px².
pub const DEFAULT_LOWPASS: f64 = 0.3;

/// Near-to-far yaw schedule, degrees.
pub const DEFAULT_ANGLES_DEG: [f64; 6] = [-10.0, 10.0, -20.0, 20.0, -30.0, 30.0];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    /// Square pixels, principal point at the image center, given horizontal
    /// field of view in degrees.
    pub fn from_fov(width: usize, height: usize, hfov_deg: f64) -> Result<Self> {
        let f = (width as f64 / 2.0) / (hfov_deg.to_radians() / 2.0).tan();
        Self::new(
            f,
            f,
            (width as f64 - 1.0) / 2.0,
            (height as f64 - 1.0) / 2.0,
            width,
            height,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.fx.is_finite()
            && self.fy.is_finite()
            && self.fx > 0.0
            && self.fy > 0.0
            && self.width > 0
            && self.height > 0
            && (0.0..self.width as f64).contains(&self.cx)
            && (0.0..self.height as f64).contains(&self.cy);
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid intrinsics {self:?}")))
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

/// World-from-camera rigid transform. `translation` is the camera center in
/// world coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    /// Viewing direction in world coordinates.
    pub fn forward(&self) -> Vector3<f64> {
        self.rotation * Vector3::z()
    }

    pub fn world_to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.inverse_transform_vector(&(p - self.translation))
    }

    pub fn camera_to_world(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn inverse(&self) -> Pose {
        let inv = self.rotation.inverse();
        Pose {
            rotation: inv,
            translation: -(inv * self.translation),
        }
    }

    /// World-to-camera rotation matrix.
    pub fn view_rotation(&self) -> Matrix3<f64> {
        self.rotation.inverse().to_rotation_matrix().into_inner()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Camera {
    pub intrinsics: Intrinsics,
    pub pose: Pose,
}

impl Camera {
    pub fn new(intrinsics: Intrinsics, pose: Pose) -> Self {
        Self { intrinsics, pose }
    }

    pub fn width(&self) -> usize {
        self.intrinsics.width
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height
    }

    pub fn dims(&self) -> (usize, usize) {
        self.intrinsics.dims()
    }

    /// Pixel position and depth of a camera-frame point.
    pub fn project_camera_point(&self, p: &Vector3<f64>) -> Result<(f64, f64, f64)> {
        if p.z <= EPS_DEPTH || !p.z.is_finite() {
            return Err(Error::BehindCamera { depth: p.z });
        }
        let k = &self.intrinsics;
        Ok((k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy, p.z))
    }

    /// Camera-frame point at `depth` along the ray through pixel `(u, v)`.
    pub fn unproject(&self, u: f64, v: f64, depth: f64) -> Vector3<f64> {
        let k = &self.intrinsics;
        Vector3::new((u - k.cx) * depth / k.fx, (v - k.cy) * depth / k.fy, depth)
    }
}

/// Rotates the base camera by `angle_deg` about its own up axis, pivoting at
/// the camera center. Positive angles turn the view toward camera +x.
pub fn yaw_pose(base: &Pose, angle_deg: f64) -> Result<Pose> {
    if !angle_deg.is_finite() {
        return Err(Error::invalid(format!("non-finite yaw angle {angle_deg}")));
    }
    let yaw = UnitQuaternion::from_axis_angle(&Vector3::y_axis(), angle_deg.to_radians());
    Ok(Pose {
        rotation: base.rotation * yaw,
        translation: base.translation,
    })
}

/// Ordered yaw angles applied to a base pose; one pipeline step per angle.
#[derive(Clone, Debug, PartialEq)]
pub struct PoseSchedule {
    pub base: Pose,
    pub angles_deg: Vec<f64>,
}

impl PoseSchedule {
    pub fn len(&self) -> usize {
        self.angles_deg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles_deg.is_empty()
    }

    /// Pose for step `i` (1-based); step 0 is the base pose.
    pub fn pose(&self, step: usize) -> Result<Pose> {
        if step == 0 {
            return Ok(self.base);
        }
        let angle = self
            .angles_deg
            .get(step - 1)
            .ok_or_else(|| Error::invalid(format!("step {step} beyond schedule")))?;
        yaw_pose(&self.base, *angle)
    }

    pub fn poses(&self) -> Result<Vec<Pose>> {
        self.angles_deg
            .iter()
            .map(|a| yaw_pose(&self.base, *a))
            .collect()
    }
}

/// `None` selects the default near-to-far schedule.
pub fn schedule_from_config(base: Pose, angles: Option<&[f64]>) -> PoseSchedule {
    PoseSchedule {
        base,
        angles_deg: angles.map_or_else(|| DEFAULT_ANGLES_DEG.to_vec(), <[f64]>::to_vec),
    }
}

pub fn world_to_camera(pose: &Pose, p: &Vector3<f64>) -> Vector3<f64> {
    pose.world_to_camera(p)
}

pub fn camera_to_world(pose: &Pose, p: &Vector3<f64>) -> Vector3<f64> {
    pose.camera_to_world(p)
}

/// Projects a world point to `(u, v, depth)`.
pub fn project_point(cam: &Camera, p_world: &Vector3<f64>) -> Result<(f64, f64, f64)> {
    cam.project_camera_point(&cam.pose.world_to_camera(p_world))
}

/// First-order perspective Jacobian `d(u, v)/d(p_cam)`.
/// Guard band for the Jacobian: off-screen centers are treated as if they
/// sat at most this many half-extents from the principal point.
pub const JACOBIAN_GUARD: f64 = 1.3;

/// Normalized image-plane limits `(x/z, y/z)` used by [`perspective_jacobian`].
pub fn jacobian_limits(k: &Intrinsics) -> (f64, f64) {
    let half_x = (k.cx + 0.5).max(k.width as f64 - 0.5 - k.cx);
    let half_y = (k.cy + 0.5).max(k.height as f64 - 0.5 - k.cy);
    (JACOBIAN_GUARD * half_x / k.fx, JACOBIAN_GUARD * half_y / k.fy)
}

/// `x/z` and `y/z` clamped to the guard band, with flags telling which were
/// clamped.
pub(crate) fn guarded_slopes(k: &Intrinsics, p: &Vector3<f64>) -> ([f64; 2], [bool; 2]) {
    let (lx, ly) = jacobian_limits(k);
    let (sx, sy) = (p.x / p.z, p.y / p.z);
    (
        [sx.clamp(-lx, lx), sy.clamp(-ly, ly)],
        [sx.abs() > lx, sy.abs() > ly],
    )
}

/// Jacobian of the pinhole projection at a camera-frame point.
///
/// Like the usual splatting renderers, the point's slope is clamped to a
/// guard band around the frustum first; without it a Gaussian nearly
/// level with the camera (z → 0⁺) gets a footprint that grows like 1/z²
/// and smears across the whole image.
pub fn perspective_jacobian(k: &Intrinsics, p: &Vector3<f64>) -> Matrix2x3<f64> {
    let iz = 1.0 / p.z;
    let ([sx, sy], _) = guarded_slopes(k, p);
    Matrix2x3::new(k.fx * iz, 0.0, -k.fx * sx * iz, 0.0, k.fy * iz, -k.fy * sy * iz)
}

/// Screen-space covariance `J W Σ Wᵀ Jᵀ + lowpass·I` of a Gaussian.
pub fn project_covariance(cam: &Camera, g: &Gaussian3D, lowpass: f64) -> Result<Matrix2<f64>> {
    let p = cam.pose.world_to_camera(&g.mean);
    if p.z <= EPS_DEPTH || !p.z.is_finite() {
        return Err(Error::BehindCamera { depth: p.z });
    }
    let w = cam.pose.view_rotation();
    let cov_cam = w * g.covariance() * w.transpose();
    Ok(screen_covariance(&cam.intrinsics, &p, &cov_cam, lowpass))
}

pub(crate) fn screen_covariance(
    k: &Intrinsics,
    p_cam: &Vector3<f64>,
    cov_cam: &Matrix3<f64>,
    lowpass: f64,
) -> Matrix2<f64> {
    let j = perspective_jacobian(k, p_cam);
    let mut s = j * cov_cam * j.transpose();
    let off = 0.5 * (s[(0, 1)] + s[(1, 0)]);
    s[(0, 1)] = off;
    s[(1, 0)] = off;
    s[(0, 0)] += lowpass;
    s[(1, 1)] += lowpass;
    s
}

/// Multiplies every mean and scale by `factor`.
pub fn rescale_scene(scene: &GaussianScene, factor: f64) -> Result<GaussianScene> {
    if !(factor.is_finite() && factor > 0.0) {
        return Err(Error::invalid(format!("rescale factor {factor} must be positive")));
    }
    Ok(scene.map(|g| Gaussian3D {
        mean: g.mean * factor,
        scale: g.scale * factor,
        ..g.clone()
    }))
}

/// Maps a scene expressed in the camera frame of `pose` into world
/// coordinates.
pub fn transform_scene_to_world(scene: &GaussianScene, pose: &Pose) -> GaussianScene {
    scene.map(|g| Gaussian3D {
        mean: pose.camera_to_world(&g.mean),
        rotation: (pose.rotation.into_inner() * g.rotation).normalize(),
        ..g.clone()
    })
}
