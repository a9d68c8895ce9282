//! Per-view L1 and PSNR against posed target images.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{rgb_loss, FrameTarget};
use crate::raster::render;
use crate::scene::{check_dims, GaussianScene, ImageBuffer, MaskBuffer, Rgb};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewEval {
    pub name: String,
    pub l1: f64,
    pub mse: f64,
    /// `None` when the render matches exactly (infinite PSNR).
    pub psnr_db: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub views: Vec<ViewEval>,
    pub mean_l1: f64,
    /// `None` if any view is an exact match.
    pub mean_psnr_db: Option<f64>,
}

/// Mean squared error over all pixels and channels.
pub fn mse(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    check_dims(a.dims(), b.dims(), "mse")?;
    let n = a.as_raw().len();
    if n == 0 {
        return Ok(0.0);
    }
    let s: f64 = a.as_raw().iter().zip(b.as_raw()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(s / n as f64)
}

/// `10 log10(1 / mse)`; `None` for a zero error.
pub fn psnr_from_mse(mse: f64) -> Option<f64> {
    (mse > 0.0).then(|| 10.0 * (1.0 / mse).log10())
}

pub fn psnr(a: &ImageBuffer, b: &ImageBuffer) -> Result<Option<f64>> {
    Ok(psnr_from_mse(mse(a, b)?))
}

/// PSNR restricted to pixels where `mask` is set. `Ok(None)` for an exact
/// match; an empty mask is an error.
pub fn psnr_masked(a: &ImageBuffer, b: &ImageBuffer, mask: &MaskBuffer) -> Result<Option<f64>> {
    check_dims(a.dims(), b.dims(), "psnr_masked")?;
    check_dims(a.dims(), mask.dims(), "psnr_masked mask")?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for y in 0..a.height() {
        for x in 0..a.width() {
            if mask.get(x, y) {
                let (p, q) = (a.pixel(x, y), b.pixel(x, y));
                for c in 0..3 {
                    sum += (p[c] - q[c]) * (p[c] - q[c]);
                }
                n += 3;
            }
        }
    }
    if n == 0 {
        return Err(Error::invalid("psnr over an empty mask"));
    }
    Ok(psnr_from_mse(sum / n as f64))
}

pub fn eval_views(scene: &GaussianScene, targets: &[FrameTarget], background: Rgb) -> Result<EvalReport> {
    let names: Vec<String> = (0..targets.len()).map(|i| format!("view_{i}")).collect();
    eval_named_views(scene, targets, &names, background)
}

pub fn eval_named_views(
    scene: &GaussianScene,
    targets: &[FrameTarget],
    names: &[String],
    background: Rgb,
) -> Result<EvalReport> {
    if targets.is_empty() {
        return Err(Error::invalid("evaluation needs at least one target view"));
    }
    if names.len() != targets.len() {
        return Err(Error::invalid("one name per target view required"));
    }
    let mut views = Vec::with_capacity(targets.len());
    for (t, name) in targets.iter().zip(names) {
        let img = render(scene, &t.camera, background)?.color;
        let m = mse(&img, &t.target)?;
        views.push(ViewEval {
            name: name.clone(),
            l1: rgb_loss(&img, &t.target)?,
            mse: m,
            psnr_db: psnr_from_mse(m),
        });
    }
    let n = views.len() as f64;
    let mean_l1 = views.iter().map(|v| v.l1).sum::<f64>() / n;
    let mean_psnr_db = views
        .iter()
        .map(|v| v.psnr_db)
        .sum::<Option<f64>>()
        .map(|s| s / n);
    Ok(EvalReport {
        views,
        mean_l1,
        mean_psnr_db,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Camera, Intrinsics, Pose};

    fn cam() -> Camera {
        Camera::new(Intrinsics::from_fov(8, 6, 60.0).unwrap(), Pose::identity())
    }

    #[test]
    fn exact_match_is_infinite() {
        let s = GaussianScene::new();
        let t = [FrameTarget::new(cam(), ImageBuffer::filled(8, 6, [0.0; 3])).unwrap()];
        let r = eval_views(&s, &t, [0.0; 3]).unwrap();
        assert_eq!(r.views[0].l1, 0.0);
        assert_eq!(r.views[0].psnr_db, None);
        assert_eq!(r.mean_psnr_db, None);
        assert!(eval_views(&s, &[], [0.0; 3]).is_err());
    }

    #[test]
    fn uniform_error_closed_form() {
        let s = GaussianScene::new();
        let t = [FrameTarget::new(cam(), ImageBuffer::filled(8, 6, [0.1; 3])).unwrap()];
        let r = eval_views(&s, &t, [0.0; 3]).unwrap();
        assert!((r.views[0].l1 - 0.1).abs() < 1e-12);
        assert!((r.views[0].psnr_db.unwrap() - 20.0).abs() < 1e-9);
        assert!((r.mean_psnr_db.unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn masked_psnr_ignores_unmasked() {
        let a = ImageBuffer::from_fn(4, 4, |x, _| if x < 2 { [0.0; 3] } else { [1.0; 3] });
        let b = ImageBuffer::filled(4, 4, [0.1; 3]);
        let left = MaskBuffer::from_fn(4, 4, |x, _| x < 2);
        assert!((psnr_masked(&a, &b, &left).unwrap().unwrap() - 20.0).abs() < 1e-9);
        assert!(psnr_masked(&a, &b, &MaskBuffer::filled(4, 4, false)).is_err());
    }
}
