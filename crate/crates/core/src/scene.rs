//! Gaussian primitives, the scene container, and image/mask buffers.
//!
//! Everything here is a plain value type. Scenes only grow: the only way to
//! combine two scenes is [`merge_scenes`], which appends and never mutates.

use std::fmt;

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};

use crate::error::{Error, Result};

pub type Rgb = [f64; 3];

/// Tolerance on the quaternion norm accepted by validation.
pub const QUAT_NORM_TOL: f64 = 1e-6;

/// One anisotropic 3D Gaussian.
///
/// The covariance is never stored directly: it is `R diag(scale²) Rᵀ`, which
/// is positive semidefinite by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Gaussian3D {
    pub mean: Vector3<f64>,
    /// Stored as a raw quaternion (w, x, y, z) so that invalid input can be
    /// represented and reported by [`validate_scene`].
    pub rotation: Quaternion<f64>,
    /// Per-axis standard deviations, world units.
    pub scale: Vector3<f64>,
    pub opacity: f64,
    pub color: Rgb,
}

impl Gaussian3D {
    /// Builds a Gaussian with a normalized rotation.
    pub fn new(
        mean: Vector3<f64>,
        rotation: Quaternion<f64>,
        scale: Vector3<f64>,
        opacity: f64,
        color: Rgb,
    ) -> Self {
        let rotation = if rotation.norm() > 0.0 {
            rotation.normalize()
        } else {
            rotation
        };
        Self {
            mean,
            rotation,
            scale,
            opacity,
            color,
        }
    }

    pub fn isotropic(mean: Vector3<f64>, sigma: f64, opacity: f64, color: Rgb) -> Self {
        Self::new(
            mean,
            Quaternion::identity(),
            Vector3::repeat(sigma),
            opacity,
            color,
        )
    }

    pub fn unit_rotation(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_quaternion(self.rotation)
    }

    /// World-space covariance `R diag(s²) Rᵀ`.
    pub fn covariance(&self) -> Matrix3<f64> {
        let r = self.unit_rotation().to_rotation_matrix().into_inner();
        let s2 = Matrix3::from_diagonal(&self.scale.component_mul(&self.scale));
        r * s2 * r.transpose()
    }

    fn violations(&self, index: usize, out: &mut Vec<Violation>) {
        let mut push = |field: &'static str, detail: String| {
            out.push(Violation {
                index,
                field,
                detail,
            })
        };
        if !self.mean.iter().all(|v| v.is_finite()) {
            push("mean", format!("non-finite mean {:?}", self.mean.as_slice()));
        }
        let norm = self.rotation.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > QUAT_NORM_TOL {
            push("rotation", format!("quaternion norm {norm}"));
        }
        if !self.scale.iter().all(|s| s.is_finite() && *s > 0.0) {
            push("scale", format!("non-positive or non-finite scale {:?}", self.scale.as_slice()));
        }
        if !(0.0..=1.0).contains(&self.opacity) {
            push("opacity", format!("opacity {} outside [0, 1]", self.opacity));
        }
        if !self.color.iter().all(|c| (0.0..=1.0).contains(c)) {
            push("color", format!("color {:?} outside [0, 1]", self.color));
        }
    }
}

/// An invariant violation found by [`validate_scene`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    /// Index of the offending Gaussian.
    pub index: usize,
    pub field: &'static str,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "gaussian {}: {}: {}", self.index, self.field, self.detail)
    }
}

/// Ordered collection of Gaussians, each tagged with the pipeline step that
/// created it. Older Gaussians come first.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GaussianScene {
    gaussians: Vec<Gaussian3D>,
    provenance: Vec<usize>,
}

impl GaussianScene {
    pub fn new() -> Self {
        Self::default()
    }

    /// All Gaussians tagged with the same creation step.
    pub fn from_gaussians(gaussians: Vec<Gaussian3D>, step: usize) -> Self {
        let provenance = vec![step; gaussians.len()];
        Self {
            gaussians,
            provenance,
        }
    }

    /// Builds a scene from explicit provenance tags.
    pub fn from_parts(gaussians: Vec<Gaussian3D>, provenance: Vec<usize>) -> Result<Self> {
        if gaussians.len() != provenance.len() {
            return Err(Error::invalid(format!(
                "{} gaussians but {} provenance tags",
                gaussians.len(),
                provenance.len()
            )));
        }
        Ok(Self {
            gaussians,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.gaussians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaussians.is_empty()
    }

    pub fn gaussians(&self) -> &[Gaussian3D] {
        &self.gaussians
    }

    pub fn provenance(&self) -> &[usize] {
        &self.provenance
    }

    pub fn iter(&self) -> impl Iterator<Item = &Gaussian3D> {
        self.gaussians.iter()
    }

    /// Applies `f` to every Gaussian, keeping provenance.
    pub fn map(&self, f: impl FnMut(&Gaussian3D) -> Gaussian3D) -> Self {
        Self {
            gaussians: self.gaussians.iter().map(f).collect(),
            provenance: self.provenance.clone(),
        }
    }

    /// Keeps the Gaussians for which `keep` is true, preserving order.
    pub fn filter(&self, mut keep: impl FnMut(&Gaussian3D) -> bool) -> Self {
        let (gaussians, provenance) = self
            .gaussians
            .iter()
            .zip(&self.provenance)
            .filter(|(g, _)| keep(g))
            .map(|(g, p)| (g.clone(), *p))
            .unzip();
        Self {
            gaussians,
            provenance,
        }
    }

    pub(crate) fn gaussians_mut(&mut self) -> &mut [Gaussian3D] {
        &mut self.gaussians
    }
}

/// Appends `retained` after `prev`, tagging the retained Gaussians with
/// `step`. Neither input is modified.
pub fn merge_scenes(prev: &GaussianScene, retained: &GaussianScene, step: usize) -> GaussianScene {
    let mut gaussians = Vec::with_capacity(prev.len() + retained.len());
    gaussians.extend_from_slice(&prev.gaussians);
    gaussians.extend_from_slice(&retained.gaussians);
    let mut provenance = Vec::with_capacity(gaussians.len());
    provenance.extend_from_slice(&prev.provenance);
    provenance.extend(std::iter::repeat_n(step, retained.len()));
    GaussianScene {
        gaussians,
        provenance,
    }
}

/// Lists every invariant violation in the scene. Never fails.
pub fn validate_scene(scene: &GaussianScene) -> Vec<Violation> {
    let mut out = Vec::new();
    for (i, g) in scene.gaussians.iter().enumerate() {
        g.violations(i, &mut out);
    }
    if scene.provenance.len() != scene.gaussians.len() {
        out.push(Violation {
            index: scene.provenance.len().min(scene.gaussians.len()),
            field: "provenance",
            detail: "provenance length differs from scene length".into(),
        });
    }
    for (i, w) in scene.provenance.windows(2).enumerate() {
        if w[1] < w[0] {
            out.push(Violation {
                index: i + 1,
                field: "provenance",
                detail: format!("step {} follows step {}", w[1], w[0]),
            });
        }
    }
    out
}

/// H×W×3 float image, row-major, origin at the top-left pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ImageBuffer {
    pub fn filled(width: usize, height: usize, color: Rgb) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&color);
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> Rgb) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    /// Wraps raw interleaved RGB data, checking length and range.
    pub fn from_raw(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::invalid(format!(
                "image data has {} values, expected {}",
                data.len(),
                width * height * 3
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            data,
        })
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

    pub fn as_raw(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> Rgb {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, c: Rgb) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&c);
    }

    pub fn pixels(&self) -> impl Iterator<Item = Rgb> + '_ {
        self.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]])
    }
}

/// Binary H×W mask; `true` marks an observed pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskBuffer {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl MaskBuffer {
    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Self {
            width,
            height,
            bits: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            bits,
        }
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

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_observed(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }
}

pub(crate) fn check_dims(a: (usize, usize), b: (usize, usize), what: &str) -> Result<()> {
    if a != b {
        return Err(Error::invalid(format!(
            "{what}: dimensions {}x{} and {}x{} differ",
            a.0, a.1, b.0, b.1
        )));
    }
    Ok(())
}
