//! Forward splatting renderer, its brute-force oracle, and the
//! observed-region mask.
//!
//! Compositing is front-to-back over Gaussians sorted by camera-frame center
//! depth (ties broken by scene index):
//!
//! ```text
//! alpha_i = min(opacity_i * exp(-0.5 dᵀ Σ2D⁻¹ d), 0.999)
//! C       = Σ color_i alpha_i T_i + T_final * background
//! T_i     = Π_{j<i} (1 - alpha_j)
//! ```
//!
//! The tiled renderer only evaluates a Gaussian inside a box of
//! [`CULL_SIGMAS`] standard deviations of its larger screen-space axis. Past
//! that radius the Gaussian weight is below [`CULL_WEIGHT`], which keeps the
//! tiled output within 1e-5 of the uncut brute-force sum for scenes of up to
//! a few hundred overlapping Gaussians.

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Vector2, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{self, Camera, DEFAULT_LOWPASS, EPS_DEPTH};
use crate::scene::{check_dims, GaussianScene, ImageBuffer, MaskBuffer, Rgb};

pub const ALPHA_MAX: f64 = 0.999;

/// Gaussian weight at the culling radius.
pub const CULL_WEIGHT: f64 = 1e-8;

/// Culling radius in standard deviations; `exp(-r²/2) = CULL_WEIGHT`.
pub const CULL_SIGMAS: f64 = 6.069_708_517_540_586;

pub const TILE_SIZE: usize = 16;

/// Observed-pixel threshold on accumulated opacity.
pub const DEFAULT_MASK_TAU: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenderSettings {
    /// Isotropic screen-space covariance term, px².
    pub lowpass: f64,
}

impl Default for RenderSettings {
    fn default() -> Self {
        Self {
            lowpass: DEFAULT_LOWPASS,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderOutput {
    pub color: ImageBuffer,
    /// `1 - T_final` per pixel, row-major.
    pub accum_alpha: Vec<f64>,
}

impl RenderOutput {
    pub fn width(&self) -> usize {
        self.color.width()
    }

    pub fn height(&self) -> usize {
        self.color.height()
    }

    pub fn alpha(&self, x: usize, y: usize) -> f64 {
        self.accum_alpha[y * self.color.width() + x]
    }

    /// `M(u, v) = accum_alpha(u, v) >= tau`.
    pub fn mask(&self, tau: f64) -> Result<MaskBuffer> {
        check_tau(tau)?;
        let w = self.width();
        Ok(MaskBuffer::from_fn(w, self.height(), |x, y| {
            self.accum_alpha[y * w + x] >= tau
        }))
    }
}

/// A Gaussian after projection into one camera.
#[derive(Clone, Debug)]
pub(crate) struct Splat {
    /// Index into the scene.
    pub index: usize,
    pub depth: f64,
    pub mean2d: Vector2<f64>,
    /// Inverse of the screen-space covariance.
    pub conic: Matrix2<f64>,
    pub opacity: f64,
    pub color: Rgb,
    /// Inclusive pixel bounds `[x0, x1] x [y0, y1]`.
    pub bbox: [usize; 4],
    pub p_cam: Vector3<f64>,
    pub jacobian: Matrix2x3<f64>,
    pub cov_cam: Matrix3<f64>,
}

impl Splat {
    #[inline]
    pub fn covers(&self, x: usize, y: usize) -> bool {
        x >= self.bbox[0] && x <= self.bbox[1] && y >= self.bbox[2] && y <= self.bbox[3]
    }

    /// Offset from the projected mean to pixel `(x, y)`.
    #[inline]
    pub fn offset(&self, x: usize, y: usize) -> Vector2<f64> {
        Vector2::new(x as f64 - self.mean2d.x, y as f64 - self.mean2d.y)
    }

    /// Returns `(alpha, weight, clamped)` at pixel `(x, y)`.
    #[inline]
    pub fn alpha_at(&self, x: usize, y: usize) -> (f64, f64, bool) {
        let d = self.offset(x, y);
        let power = -0.5 * (d.dot(&(self.conic * d)));
        let weight = power.exp();
        let a = self.opacity * weight;
        if a > ALPHA_MAX {
            (ALPHA_MAX, weight, true)
        } else {
            (a, weight, false)
        }
    }
}

/// Projects, culls, and depth-sorts the scene for one camera.
pub(crate) fn prepare_splats(
    scene: &GaussianScene,
    cam: &Camera,
    settings: &RenderSettings,
) -> Vec<Splat> {
    let (w, h) = cam.dims();
    let view = cam.pose.view_rotation();
    let mut splats: Vec<Splat> = scene
        .gaussians()
        .par_iter()
        .enumerate()
        .filter_map(|(index, g)| {
            let p_cam = cam.pose.world_to_camera(&g.mean);
            if !(p_cam.z > EPS_DEPTH) {
                return None;
            }
            let cov_cam = view * g.covariance() * view.transpose();
            let cov2d =
                geometry::screen_covariance(&cam.intrinsics, &p_cam, &cov_cam, settings.lowpass);
            let conic = cov2d.try_inverse()?;
            let (u, v, _) = cam.project_camera_point(&p_cam).ok()?;
            let lambda_max = cov2d.symmetric_eigenvalues().max();
            let r = CULL_SIGMAS * lambda_max.sqrt();
            let x0 = (u - r).ceil().max(0.0);
            let x1 = (u + r).floor().min(w as f64 - 1.0);
            let y0 = (v - r).ceil().max(0.0);
            let y1 = (v + r).floor().min(h as f64 - 1.0);
            if !(x0 <= x1 && y0 <= y1) {
                return None;
            }
            Some(Splat {
                index,
                depth: p_cam.z,
                mean2d: Vector2::new(u, v),
                conic,
                opacity: g.opacity,
                color: g.color,
                bbox: [x0 as usize, x1 as usize, y0 as usize, y1 as usize],
                p_cam,
                jacobian: geometry::perspective_jacobian(&cam.intrinsics, &p_cam),
                cov_cam,
            })
        })
        .collect();
    splats.sort_by(|a, b| a.depth.total_cmp(&b.depth).then(a.index.cmp(&b.index)));
    splats
}

/// Tile grid with per-tile splat lists in global depth order.
pub(crate) struct TileBins {
    pub tiles_x: usize,
    pub lists: Vec<Vec<u32>>,
}

impl TileBins {
    pub fn build(splats: &[Splat], width: usize, height: usize) -> Self {
        let tiles_x = width.div_ceil(TILE_SIZE);
        let tiles_y = height.div_ceil(TILE_SIZE);
        let mut lists = vec![Vec::new(); tiles_x * tiles_y];
        for (k, s) in splats.iter().enumerate() {
            for ty in s.bbox[2] / TILE_SIZE..=s.bbox[3] / TILE_SIZE {
                for tx in s.bbox[0] / TILE_SIZE..=s.bbox[1] / TILE_SIZE {
                    lists[ty * tiles_x + tx].push(k as u32);
                }
            }
        }
        Self { tiles_x, lists }
    }

    /// Pixel range `(x0..x1, y0..y1)` of tile `t`.
    pub fn pixel_range(&self, t: usize, width: usize, height: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let (tx, ty) = (t % self.tiles_x, t / self.tiles_x);
        let x0 = tx * TILE_SIZE;
        let y0 = ty * TILE_SIZE;
        (x0..(x0 + TILE_SIZE).min(width), y0..(y0 + TILE_SIZE).min(height))
    }
}

fn check_camera(cam: &Camera) -> Result<()> {
    cam.intrinsics.validate()
}

fn check_tau(tau: f64) -> Result<()> {
    if (0.0..=1.0).contains(&tau) {
        Ok(())
    } else {
        Err(Error::invalid(format!("mask threshold {tau} outside [0, 1]")))
    }
}

pub fn render(scene: &GaussianScene, cam: &Camera, background: Rgb) -> Result<RenderOutput> {
    render_with(scene, cam, background, &RenderSettings::default())
}

/// Tiled renderer; tiles are composited in parallel.
pub fn render_with(
    scene: &GaussianScene,
    cam: &Camera,
    background: Rgb,
    settings: &RenderSettings,
) -> Result<RenderOutput> {
    check_camera(cam)?;
    let (w, h) = cam.dims();
    let splats = prepare_splats(scene, cam, settings);
    let bins = TileBins::build(&splats, w, h);

    let tiles: Vec<Vec<(usize, usize, Rgb, f64)>> = (0..bins.lists.len())
        .into_par_iter()
        .map(|t| {
            let (xr, yr) = bins.pixel_range(t, w, h);
            let list = &bins.lists[t];
            let mut out = Vec::with_capacity(xr.len() * yr.len());
            for y in yr {
                for x in xr.clone() {
                    let mut c = [0.0; 3];
                    let mut trans = 1.0;
                    for &k in list {
                        let s = &splats[k as usize];
                        if !s.covers(x, y) {
                            continue;
                        }
                        let (a, _, _) = s.alpha_at(x, y);
                        let wgt = a * trans;
                        for ch in 0..3 {
                            c[ch] += s.color[ch] * wgt;
                        }
                        trans *= 1.0 - a;
                    }
                    for ch in 0..3 {
                        c[ch] = (c[ch] + trans * background[ch]).clamp(0.0, 1.0);
                    }
                    out.push((x, y, c, 1.0 - trans));
                }
            }
            out
        })
        .collect();

    let mut data = vec![0.0; w * h * 3];
    let mut accum = vec![0.0; w * h];
    for (x, y, c, a) in tiles.into_iter().flatten() {
        let i = y * w + x;
        data[i * 3..i * 3 + 3].copy_from_slice(&c);
        accum[i] = a;
    }
    Ok(RenderOutput {
        color: ImageBuffer::from_raw(w, h, data)?,
        accum_alpha: accum,
    })
}

/// Reference renderer: every pixel composites every Gaussian in front of
/// the near plane, with no tiling and no footprint culling.
pub fn render_brute(scene: &GaussianScene, cam: &Camera, background: Rgb) -> Result<RenderOutput> {
    check_camera(cam)?;
    let (w, h) = cam.dims();
    struct Projected {
        depth: f64,
        index: usize,
        u: f64,
        v: f64,
        inv: [f64; 3],
        opacity: f64,
        color: Rgb,
    }
    let mut items = Vec::new();
    for (index, g) in scene.gaussians().iter().enumerate() {
        let Ok((u, v, depth)) = geometry::project_point(cam, &g.mean) else {
            continue;
        };
        let cov = geometry::project_covariance(cam, g, DEFAULT_LOWPASS)?;
        let (a, b, c) = (cov[(0, 0)], cov[(0, 1)], cov[(1, 1)]);
        let det = a * c - b * b;
        items.push(Projected {
            depth,
            index,
            u,
            v,
            inv: [c / det, -b / det, a / det],
            opacity: g.opacity,
            color: g.color,
        });
    }
    items.sort_by(|p, q| p.depth.total_cmp(&q.depth).then(p.index.cmp(&q.index)));

    let mut data = Vec::with_capacity(w * h * 3);
    let mut accum = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let mut c = [0.0; 3];
            let mut trans = 1.0;
            for p in &items {
                let dx = x as f64 - p.u;
                let dy = y as f64 - p.v;
                let q = p.inv[0] * dx * dx + 2.0 * p.inv[1] * dx * dy + p.inv[2] * dy * dy;
                let a = (p.opacity * (-0.5 * q).exp()).clamp(0.0, ALPHA_MAX);
                for ch in 0..3 {
                    c[ch] += p.color[ch] * a * trans;
                }
                trans *= 1.0 - a;
            }
            for ch in 0..3 {
                data.push((c[ch] + trans * background[ch]).clamp(0.0, 1.0));
            }
            accum.push(1.0 - trans);
        }
    }
    Ok(RenderOutput {
        color: ImageBuffer::from_raw(w, h, data)?,
        accum_alpha: accum,
    })
}

/// Marks pixels whose accumulated opacity reaches `tau` as observed.
pub fn coverage_mask(scene: &GaussianScene, cam: &Camera, tau: f64) -> Result<MaskBuffer> {
    check_tau(tau)?;
    render(scene, cam, [0.0; 3])?.mask(tau)
}

/// Replaces unobserved pixels with `fill`.
pub fn mask_to_image(img: &ImageBuffer, mask: &MaskBuffer, fill: Rgb) -> Result<ImageBuffer> {
    check_dims(img.dims(), mask.dims(), "mask_to_image")?;
    Ok(ImageBuffer::from_fn(img.width(), img.height(), |x, y| {
        if mask.get(x, y) {
            img.pixel(x, y)
        } else {
            fill
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Intrinsics, Pose};
    use crate::scene::Gaussian3D;

    fn cam(w: usize, h: usize) -> Camera {
        Camera::new(Intrinsics::from_fov(w, h, 60.0).unwrap(), Pose::identity())
    }

    fn on_axis(depth: f64, sigma: f64, opacity: f64, color: Rgb) -> Gaussian3D {
        Gaussian3D::isotropic(Vector3::new(0.0, 0.0, depth), sigma, opacity, color)
    }

    #[test]
    fn empty_scene_is_background() {
        let c = cam(20, 10);
        let bg = [0.1, 0.2, 0.3];
        for out in [
            render(&GaussianScene::new(), &c, bg).unwrap(),
            render_brute(&GaussianScene::new(), &c, bg).unwrap(),
        ] {
            assert!(out.color.pixels().all(|p| p == bg));
            assert!(out.accum_alpha.iter().all(|a| *a == 0.0));
        }
    }

    #[test]
    fn single_gaussian_center_pixel() {
        // odd size so that a pixel center sits on the optical axis, where
        // d = 0 and alpha = opacity
        let c = cam(33, 33);
        let bg = [0.0, 0.0, 1.0];
        let s = GaussianScene::from_gaussians(vec![on_axis(2.0, 5.0, 0.9, [1.0, 0.0, 0.0])], 0);
        let out = render(&s, &c, bg).unwrap();
        let p = out.color.pixel(16, 16);
        let expect = [0.9, 0.0, 0.1];
        for ch in 0..3 {
            assert!((p[ch] - expect[ch]).abs() < 1e-3, "{p:?}");
        }
        let brute = render_brute(&s, &c, bg).unwrap();
        for (a, b) in out.color.as_raw().iter().zip(brute.color.as_raw()) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn behind_camera_is_skipped() {
        let c = cam(8, 8);
        let s = GaussianScene::from_gaussians(vec![on_axis(-1.0, 1.0, 0.9, [1.0; 3])], 0);
        let out = render(&s, &c, [0.0; 3]).unwrap();
        assert!(out.accum_alpha.iter().all(|a| *a == 0.0));
    }

    #[test]
    fn alpha_clamp_applies() {
        let c = cam(9, 9);
        let s = GaussianScene::from_gaussians(vec![on_axis(1.0, 10.0, 1.0, [1.0; 3])], 0);
        let out = render(&s, &c, [0.0; 3]).unwrap();
        assert!((out.alpha(4, 4) - ALPHA_MAX).abs() < 1e-12);
    }

    #[test]
    fn brute_is_order_independent() {
        let c = cam(16, 16);
        let a = on_axis(1.0, 0.1, 0.7, [1.0, 0.0, 0.0]);
        let b = Gaussian3D::isotropic(Vector3::new(0.05, 0.0, 2.0), 0.2, 0.6, [0.0, 1.0, 0.0]);
        let s1 = GaussianScene::from_gaussians(vec![a.clone(), b.clone()], 0);
        let s2 = GaussianScene::from_gaussians(vec![b, a], 0);
        assert_eq!(
            render_brute(&s1, &c, [0.0; 3]).unwrap(),
            render_brute(&s2, &c, [0.0; 3]).unwrap()
        );
    }

    #[test]
    fn mask_cases() {
        let c = cam(12, 12);
        let empty = coverage_mask(&GaussianScene::new(), &c, 0.5).unwrap();
        assert_eq!(empty.count_observed(), 0);
        let all = coverage_mask(&GaussianScene::new(), &c, 0.0).unwrap();
        assert_eq!(all.count_observed(), 144);
        assert!(coverage_mask(&GaussianScene::new(), &c, 1.5).is_err());
        assert!(coverage_mask(&GaussianScene::new(), &c, -0.1).is_err());
    }

    #[test]
    fn opaque_wall_is_fully_observed() {
        let c = cam(16, 16);
        let mut gs = Vec::new();
        for i in -6..=6 {
            for j in -6..=6 {
                gs.push(Gaussian3D::isotropic(
                    Vector3::new(i as f64 * 0.2, j as f64 * 0.2, 1.0),
                    0.2,
                    0.95,
                    [0.5; 3],
                ));
            }
        }
        let s = GaussianScene::from_gaussians(gs, 0);
        assert_eq!(coverage_mask(&s, &c, 0.5).unwrap().count_observed(), 256);
        let brute = render_brute(&s, &c, [0.0; 3]).unwrap();
        assert!(brute.accum_alpha.iter().all(|a| *a >= 0.5));
    }

    #[test]
    fn mask_to_image_select() {
        let img = ImageBuffer::from_fn(4, 4, |x, y| [x as f64 / 4.0, y as f64 / 4.0, 0.5]);
        let ones = MaskBuffer::filled(4, 4, true);
        assert_eq!(mask_to_image(&img, &ones, [0.0; 3]).unwrap(), img);
        let zeros = MaskBuffer::filled(4, 4, false);
        let f = mask_to_image(&img, &zeros, [0.2; 3]).unwrap();
        assert!(f.pixels().all(|p| p == [0.2; 3]));
        let checker = MaskBuffer::from_fn(4, 4, |x, y| (x + y) % 2 == 0);
        let m = mask_to_image(&img, &checker, [0.0; 3]).unwrap();
        for y in 0..4 {
            for x in 0..4 {
                let want = if (x + y) % 2 == 0 { img.pixel(x, y) } else { [0.0; 3] };
                assert_eq!(m.pixel(x, y), want);
            }
        }
        assert!(mask_to_image(&img, &MaskBuffer::filled(3, 4, true), [0.0; 3]).is_err());
    }

    #[test]
    fn rendering_is_deterministic() {
        let c = cam(40, 30);
        let s = GaussianScene::from_gaussians(
            (0..30)
                .map(|i| {
                    let t = i as f64 / 30.0;
                    Gaussian3D::isotropic(
                        Vector3::new(t - 0.5, 0.3 - t * 0.5, 1.0 + t),
                        0.05 + 0.1 * t,
                        0.3 + 0.5 * t,
                        [t, 1.0 - t, 0.5],
                    )
                })
                .collect(),
            0,
        );
        let a = render(&s, &c, [0.0; 3]).unwrap();
        let b = render(&s, &c, [0.0; 3]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cull_constant_matches_weight() {
        assert!(((-0.5 * CULL_SIGMAS * CULL_SIGMAS).exp() - CULL_WEIGHT).abs() < 1e-20);
    }
}
