//! RGB L1 objective over a set of posed frames, its analytic gradient, a
//! central-difference reference gradient, and a backtracking descent loop.
//!
//! The per-frame loss is the mean over pixels of the mean absolute channel
//! difference, so a black image against a white one scores exactly 1. The
//! total loss is the arithmetic mean of the per-frame losses.

use nalgebra::{Matrix2, Matrix2x3, Vector2, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{self, Camera};
use crate::raster::{self, prepare_splats, RenderSettings, Splat, TileBins};
use crate::scene::{check_dims, validate_scene, GaussianScene, ImageBuffer, Rgb};

/// A camera paired with the image the scene should reproduce from it.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameTarget {
    pub camera: Camera,
    pub target: ImageBuffer,
}

impl FrameTarget {
    pub fn new(camera: Camera, target: ImageBuffer) -> Result<Self> {
        check_dims(camera.dims(), target.dims(), "frame target")?;
        Ok(Self { camera, target })
    }
}

/// Which parameter groups receive gradients.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeFlags {
    pub color: bool,
    pub opacity: bool,
    pub position: bool,
}

impl Default for OptimizeFlags {
    fn default() -> Self {
        Self {
            color: true,
            opacity: true,
            position: false,
        }
    }
}

impl OptimizeFlags {
    pub const COLOR: Self = Self {
        color: true,
        opacity: false,
        position: false,
    };

    pub fn any(&self) -> bool {
        self.color || self.opacity || self.position
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimConfig {
    pub max_iters: usize,
    /// Largest change of any single parameter in one step.
    pub step_size: f64,
    pub flags: OptimizeFlags,
    /// Stop once a step taken at the current full step size changes the
    /// loss by less than this, relatively.
    pub convergence_tol: f64,
    pub backtrack: bool,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            step_size: 0.05,
            flags: OptimizeFlags::default(),
            convergence_tol: 1e-5,
            backtrack: true,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::invalid(format!("step size {} must be positive", self.step_size)));
        }
        if !(self.convergence_tol >= 0.0) {
            return Err(Error::invalid(format!(
                "convergence tolerance {} must be non-negative",
                self.convergence_tol
            )));
        }
        if !self.flags.any() {
            return Err(Error::invalid("no parameter group selected for optimization"));
        }
        Ok(())
    }
}

/// Per-Gaussian gradients. Groups that were not requested stay zero.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneGradient {
    pub color: Vec<[f64; 3]>,
    pub opacity: Vec<f64>,
    pub position: Vec<[f64; 3]>,
}

impl SceneGradient {
    pub fn zeros(n: usize) -> Self {
        Self {
            color: vec![[0.0; 3]; n],
            opacity: vec![0.0; n],
            position: vec![[0.0; 3]; n],
        }
    }

    pub fn len(&self) -> usize {
        self.opacity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.opacity.is_empty()
    }

    /// All entries flattened as `[color(3), opacity, position(3)]` per
    /// Gaussian.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len() * 7);
        for i in 0..self.len() {
            out.extend_from_slice(&self.color[i]);
            out.push(self.opacity[i]);
            out.extend_from_slice(&self.position[i]);
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.flatten().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Descent direction `-g / max|g|`; `None` when the gradient vanishes.
    pub fn descent_direction(&self) -> Option<SceneGradient> {
        let m = self.max_abs();
        if !(m > 0.0 && m.is_finite()) {
            return None;
        }
        let k = -1.0 / m;
        Some(SceneGradient {
            color: self.color.iter().map(|c| c.map(|v| v * k)).collect(),
            opacity: self.opacity.iter().map(|v| v * k).collect(),
            position: self.position.iter().map(|p| p.map(|v| v * k)).collect(),
        })
    }
}

pub fn rgb_loss(rendered: &ImageBuffer, target: &ImageBuffer) -> Result<f64> {
    check_dims(rendered.dims(), target.dims(), "rgb_loss")?;
    let n = (rendered.width() * rendered.height()) as f64;
    if n == 0.0 {
        return Ok(0.0);
    }
    let sum: f64 = rendered
        .as_raw()
        .iter()
        .zip(target.as_raw())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(sum / (3.0 * n))
}

pub fn total_loss(scene: &GaussianScene, frames: &[FrameTarget], background: Rgb) -> Result<f64> {
    if frames.is_empty() {
        return Err(Error::invalid("total_loss needs at least one frame"));
    }
    let mut sum = 0.0;
    for f in frames {
        sum += rgb_loss(&raster::render(scene, &f.camera, background)?.color, &f.target)?;
    }
    Ok(sum / frames.len() as f64)
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Screen-space gradient accumulated for one splat.
#[derive(Clone, Copy, Default)]
struct SplatGrad {
    color: [f64; 3],
    opacity: f64,
    mean2d: Vector2<f64>,
    conic: Matrix2<f64>,
}

impl SplatGrad {
    fn add(&mut self, o: &SplatGrad) {
        for c in 0..3 {
            self.color[c] += o.color[c];
        }
        self.opacity += o.opacity;
        self.mean2d += o.mean2d;
        self.conic += o.conic;
    }
}

struct Contribution {
    k: usize,
    alpha: f64,
    weight: f64,
    clamped: bool,
    trans: f64,
    offset: Vector2<f64>,
}

/// Gradient of one frame's loss, scaled by `scale`, per sorted splat.
fn frame_splat_grads(
    splats: &[Splat],
    frame: &FrameTarget,
    background: Rgb,
    scale: f64,
    want_geometry: bool,
) -> Vec<SplatGrad> {
    let (w, h) = frame.camera.dims();
    let bins = TileBins::build(splats, w, h);
    let per_tile: Vec<Vec<SplatGrad>> = (0..bins.lists.len())
        .into_par_iter()
        .map(|t| {
            let list = &bins.lists[t];
            let mut acc = vec![SplatGrad::default(); list.len()];
            let (xr, yr) = bins.pixel_range(t, w, h);
            let mut contribs: Vec<Contribution> = Vec::new();
            for y in yr {
                for x in xr.clone() {
                    contribs.clear();
                    let mut c = [0.0; 3];
                    let mut trans = 1.0;
                    for (local, &k) in list.iter().enumerate() {
                        let s = &splats[k as usize];
                        if !s.covers(x, y) {
                            continue;
                        }
                        let (alpha, weight, clamped) = s.alpha_at(x, y);
                        for ch in 0..3 {
                            c[ch] += s.color[ch] * alpha * trans;
                        }
                        contribs.push(Contribution {
                            k: local,
                            alpha,
                            weight,
                            clamped,
                            trans,
                            offset: s.offset(x, y),
                        });
                        trans *= 1.0 - alpha;
                    }
                    let target = frame.target.pixel(x, y);
                    let mut dl_dc = [0.0; 3];
                    let mut any = false;
                    for ch in 0..3 {
                        let rendered = (c[ch] + trans * background[ch]).clamp(0.0, 1.0);
                        dl_dc[ch] = sign(rendered - target[ch]) * scale;
                        any |= dl_dc[ch] != 0.0;
                    }
                    if !any {
                        continue;
                    }
                    // color accumulated behind the current splat, including
                    // the background
                    let mut behind = background.map(|b| b * trans);
                    for con in contribs.iter().rev() {
                        let s = &splats[list[con.k] as usize];
                        let g = &mut acc[con.k];
                        let wgt = con.alpha * con.trans;
                        let mut dl_dalpha = 0.0;
                        for ch in 0..3 {
                            g.color[ch] += dl_dc[ch] * wgt;
                            let dc_dalpha = con.trans * s.color[ch] - behind[ch] / (1.0 - con.alpha);
                            dl_dalpha += dl_dc[ch] * dc_dalpha;
                            behind[ch] += s.color[ch] * wgt;
                        }
                        if con.clamped {
                            continue;
                        }
                        g.opacity += dl_dalpha * con.weight;
                        if want_geometry {
                            // alpha = o exp(-0.5 dᵀ Q d), d = pixel - mean
                            let da = dl_dalpha * con.alpha;
                            g.mean2d += da * (s.conic * con.offset);
                            g.conic += (-0.5 * da) * (con.offset * con.offset.transpose());
                        }
                    }
                }
            }
            acc
        })
        .collect();

    let mut out = vec![SplatGrad::default(); splats.len()];
    for (t, acc) in per_tile.iter().enumerate() {
        for (local, g) in acc.iter().enumerate() {
            out[bins.lists[t][local] as usize].add(g);
        }
    }
    out
}

/// Chains a screen-space gradient back to the world-space mean.
fn position_gradient(s: &Splat, g: &SplatGrad, cam: &Camera) -> Vector3<f64> {
    let k = &cam.intrinsics;
    let p = &s.p_cam;
    let j: &Matrix2x3<f64> = &s.jacobian;

    // Q = Σ⁻¹, so dL/dΣ = -Q (dL/dQ) Q
    let gq = 0.5 * (g.conic + g.conic.transpose());
    let g_sigma = -(s.conic * gq * s.conic);
    // Σ = J M Jᵀ + λI, so dL/dJ = 2 (dL/dΣ) J M for symmetric dL/dΣ and M
    let g_j = 2.0 * g_sigma * j * s.cov_cam;

    // J = [fx/z, 0, -fx sx/z; 0, fy/z, -fy sy/z] with s = p.xy/z unless
    // clamped to the guard band, where it is constant
    let iz = 1.0 / p.z;
    let iz2 = iz * iz;
    let ([sx, sy], clamped) = geometry::guarded_slopes(k, p);
    // the projected center itself is never clamped
    let mut dp = Vector3::new(
        k.fx * iz * g.mean2d.x,
        k.fy * iz * g.mean2d.y,
        -(k.fx * p.x * g.mean2d.x + k.fy * p.y * g.mean2d.y) * iz2,
    );
    dp.z += g_j[(0, 0)] * (-k.fx * iz2) + g_j[(1, 1)] * (-k.fy * iz2);
    if clamped[0] {
        dp.z += g_j[(0, 2)] * (k.fx * sx * iz2);
    } else {
        dp.x += g_j[(0, 2)] * (-k.fx * iz2);
        dp.z += g_j[(0, 2)] * (2.0 * k.fx * sx * iz2);
    }
    if clamped[1] {
        dp.z += g_j[(1, 2)] * (k.fy * sy * iz2);
    } else {
        dp.y += g_j[(1, 2)] * (-k.fy * iz2);
        dp.z += g_j[(1, 2)] * (2.0 * k.fy * sy * iz2);
    }
    // p_cam = W (p - t)
    cam.pose.rotation * dp
}

/// Analytic gradient of [`total_loss`] with respect to the selected
/// parameter groups.
///
/// The L1 subgradient at a zero residual is taken as zero. Position
/// gradients include the dependence of the projected covariance on the
/// mean; the footprint culling box is treated as fixed.
pub fn gradient(
    scene: &GaussianScene,
    frames: &[FrameTarget],
    background: Rgb,
    flags: OptimizeFlags,
) -> Result<SceneGradient> {
    if frames.is_empty() {
        return Err(Error::invalid("gradient needs at least one frame"));
    }
    let mut grad = SceneGradient::zeros(scene.len());
    let settings = RenderSettings::default();
    for f in frames {
        check_dims(f.camera.dims(), f.target.dims(), "frame target")?;
        let (w, h) = f.camera.dims();
        let scale = 1.0 / (3.0 * (w * h) as f64 * frames.len() as f64);
        let splats = prepare_splats(scene, &f.camera, &settings);
        let grads = frame_splat_grads(&splats, f, background, scale, flags.position);
        for (s, g) in splats.iter().zip(&grads) {
            let i = s.index;
            if flags.color {
                for ch in 0..3 {
                    grad.color[i][ch] += g.color[ch];
                }
            }
            if flags.opacity {
                grad.opacity[i] += g.opacity;
            }
            if flags.position {
                let dp = position_gradient(s, g, &f.camera);
                for a in 0..3 {
                    grad.position[i][a] += dp[a];
                }
            }
        }
    }
    Ok(grad)
}

/// Central finite differences of [`total_loss`], one scalar parameter at a
/// time. Parameters are perturbed without clamping, so it is only meaningful
/// at interior points.
pub fn fd_gradient(
    scene: &GaussianScene,
    frames: &[FrameTarget],
    background: Rgb,
    flags: OptimizeFlags,
    h: f64,
) -> Result<SceneGradient> {
    if !(h > 0.0) {
        return Err(Error::invalid(format!("finite-difference step {h} must be positive")));
    }
    let mut grad = SceneGradient::zeros(scene.len());
    let central = |edit: &dyn Fn(&mut crate::scene::Gaussian3D, f64), i: usize| -> Result<f64> {
        let mut plus = scene.clone();
        edit(&mut plus.gaussians_mut()[i], h);
        let mut minus = scene.clone();
        edit(&mut minus.gaussians_mut()[i], -h);
        Ok((total_loss(&plus, frames, background)? - total_loss(&minus, frames, background)?)
            / (2.0 * h))
    };
    for i in 0..scene.len() {
        for a in 0..3 {
            if flags.color {
                grad.color[i][a] = central(&|g, d| g.color[a] += d, i)?;
            }
            if flags.position {
                grad.position[i][a] = central(&|g, d| g.mean[a] += d, i)?;
            }
        }
        if flags.opacity {
            grad.opacity[i] = central(&|g, d| g.opacity += d, i)?;
        }
    }
    Ok(grad)
}

pub const OPACITY_MIN: f64 = 1e-4;
pub const OPACITY_MAX: f64 = 1.0 - 1e-4;
pub const SCALE_MIN: f64 = 1e-6;

/// Largest number of step halvings tried before declaring a stationary point.
const MAX_HALVINGS: usize = 30;

/// Moves the scene along `dir` by `step` and projects every parameter back
/// into its valid range.
pub fn apply_step(
    scene: &GaussianScene,
    dir: &SceneGradient,
    step: f64,
    flags: OptimizeFlags,
) -> GaussianScene {
    let mut out = scene.clone();
    for (i, g) in out.gaussians_mut().iter_mut().enumerate() {
        if flags.color {
            for ch in 0..3 {
                g.color[ch] = (g.color[ch] + step * dir.color[i][ch]).clamp(0.0, 1.0);
            }
        }
        if flags.opacity {
            g.opacity = (g.opacity + step * dir.opacity[i]).clamp(OPACITY_MIN, OPACITY_MAX);
        }
        if flags.position {
            for a in 0..3 {
                g.mean[a] += step * dir.position[i][a];
            }
        }
        g.scale = g.scale.map(|s| s.max(SCALE_MIN));
    }
    out
}

#[derive(Clone, Debug)]
pub struct Optimized {
    pub scene: GaussianScene,
    /// Loss before the first step, then after every accepted step.
    pub trace: Vec<f64>,
}

/// Normalized gradient descent: each step moves the largest-gradient
/// parameter by `step_size` (or a halving of it under backtracking).
pub fn optimize(
    scene: &GaussianScene,
    frames: &[FrameTarget],
    background: Rgb,
    cfg: &OptimConfig,
) -> Result<Optimized> {
    cfg.validate()?;
    let mut current = scene.clone();
    let mut loss = total_loss(&current, frames, background)?;
    let mut trace = vec![loss];
    let mut step = cfg.step_size;

    for _ in 0..cfg.max_iters {
        let grad = gradient(&current, frames, background, cfg.flags)?;
        let Some(dir) = grad.descent_direction() else {
            break;
        };
        // a step that needed halving says nothing about convergence: with L1
        // the line search can land on a near-tie between parameters
        let mut full_step = true;
        let next = if cfg.backtrack {
            let mut found = None;
            let mut s = step;
            for _ in 0..MAX_HALVINGS {
                let cand = apply_step(&current, &dir, s, cfg.flags);
                let l = total_loss(&cand, frames, background)?;
                if l < loss {
                    found = Some((cand, l, s));
                    break;
                }
                s *= 0.5;
            }
            match found {
                Some((cand, l, s)) => {
                    full_step = s == step;
                    step = (2.0 * s).min(cfg.step_size);
                    (cand, l)
                }
                None => break,
            }
        } else {
            let cand = apply_step(&current, &dir, step, cfg.flags);
            let l = total_loss(&cand, frames, background)?;
            (cand, l)
        };
        debug_assert!(validate_scene(&next.0).is_empty());
        let rel = (loss - next.1).abs() / loss.max(f64::MIN_POSITIVE);
        current = next.0;
        loss = next.1;
        trace.push(loss);
        if full_step && rel < cfg.convergence_tol {
            break;
        }
    }
    Ok(Optimized {
        scene: current,
        trace,
    })
}
