//! Stand-ins and remote clients for the three pretrained models the
//! pipeline depends on: a monocular reconstructor, an inpainter, and a
//! scene describer.
//!
//! Wire protocol of the remote kinds (all `POST`, JSON bodies, base64 PNG
//! images):
//!
//! | route            | request                                 | response          |
//! |------------------|-----------------------------------------|-------------------|
//! | `/v1/inpaint`    | `{"image", "mask", "prompt"}`           | `{"image"}`       |
//! | `/v1/describe`   | `{"image", "instruction"}`              | `{"text"}`        |
//! | `/v1/reconstruct`| `{"image"}`                             | binary PLY body   |
//!
//! Masks are 8-bit grayscale PNGs with 255 marking observed pixels.

mod lifter;
pub mod remote;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use lifter::{lift_rgbd, DepthMap, LifterConfig, DEFAULT_OPACITY_INIT, DEFAULT_PIXEL_SCALE_FACTOR};
pub use remote::RemoteEndpoint;

use crate::error::{Error, Result};
use crate::geometry::{rescale_scene, transform_scene_to_world, Camera};
use crate::io::{png, ply};
use crate::scene::{check_dims, GaussianScene, ImageBuffer, MaskBuffer, Rgb};

/// Instruction sent to the remote describer.
pub const DESCRIBE_INSTRUCTION: &str = "Please briefly describe the scene";

pub const INPAINT_ROUTE: &str = "/v1/inpaint";
pub const DESCRIBE_ROUTE: &str = "/v1/describe";
pub const RECONSTRUCT_ROUTE: &str = "/v1/reconstruct";

/// Fill color of the flat-fill inpainter when nothing is observed.
pub const MID_GRAY: Rgb = [0.5, 0.5, 0.5];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ReconstructorBackend {
    RgbdLifter(LifterConfig),
    Remote(RemoteEndpoint),
}

impl Default for ReconstructorBackend {
    fn default() -> Self {
        Self::RgbdLifter(LifterConfig::default())
    }
}

impl ReconstructorBackend {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::RgbdLifter(cfg) => {
                if let Some(dir) = &cfg.depth_dir {
                    if !dir.is_dir() {
                        return Err(Error::invalid(format!(
                            "depth directory {} does not exist",
                            dir.display()
                        )));
                    }
                }
                Ok(())
            }
            Self::Remote(ep) => ep.validate(),
        }
    }

    /// Reconstructs a world-space scene from one image seen by `camera`.
    ///
    /// The lifter needs a depth map. Remote output is read as camera-frame
    /// Gaussians, multiplied by `rescale_factor`, then moved to world space.
    pub fn reconstruct(
        &self,
        image: &ImageBuffer,
        camera: &Camera,
        depth: Option<&DepthMap>,
        rescale_factor: f64,
    ) -> Result<GaussianScene> {
        match self {
            Self::RgbdLifter(cfg) => {
                let depth = depth.ok_or_else(|| {
                    Error::invalid("the rgbd-lifter reconstructor needs a depth map")
                })?;
                lift_rgbd(image, depth, camera, cfg)
            }
            Self::Remote(ep) => {
                let body = serde_json::json!({ "image": remote::encode_b64(&png::encode_rgb(image)?) });
                let bytes = ep.post_json(RECONSTRUCT_ROUTE, &body)?;
                let local = ply::parse_ply(&bytes).map_err(|e| {
                    Error::backend(format!("reconstruct service returned an unreadable PLY: {e}"))
                })?;
                let scaled = rescale_scene(&local, rescale_factor)?;
                Ok(transform_scene_to_world(&scaled, &camera.pose))
            }
        }
    }

    /// Depth for pipeline step `step >= 1`, when the lifter has a depth
    /// directory. The remote kind needs none.
    pub fn depth_for_step(&self, step: usize) -> Result<Option<DepthMap>> {
        match self {
            Self::RgbdLifter(LifterConfig {
                depth_dir: Some(dir),
                ..
            }) => {
                let path = dir.join(format!("depth_{step}.png"));
                if !path.is_file() {
                    return Err(Error::OracleMiss { path });
                }
                png::load_depth(&path).map(Some)
            }
            _ => Ok(None),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InpainterBackend {
    /// Fills from ground-truth frames `gt_{step}.png` in a directory.
    OracleDirectory { dir: PathBuf },
    /// Fills with the mean color of the observed pixels.
    FlatFill,
    Remote(RemoteEndpoint),
}

impl InpainterBackend {
    pub fn oracle_directory(dir: impl Into<PathBuf>) -> Result<Self> {
        let backend = Self::OracleDirectory { dir: dir.into() };
        backend.validate()?;
        Ok(backend)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::OracleDirectory { dir } if !dir.is_dir() => Err(Error::invalid(format!(
                "oracle directory {} does not exist",
                dir.display()
            ))),
            Self::Remote(ep) => ep.validate(),
            _ => Ok(()),
        }
    }

    pub fn oracle_path(dir: &Path, step: usize) -> PathBuf {
        dir.join(format!("gt_{step}.png"))
    }

    /// Fills the unobserved pixels of `image`. Observed pixels are always
    /// returned bit-exactly.
    pub fn inpaint(
        &self,
        image: &ImageBuffer,
        mask: &MaskBuffer,
        prompt: &str,
        step: usize,
    ) -> Result<ImageBuffer> {
        check_dims(image.dims(), mask.dims(), "inpaint image/mask")?;
        let fill = match self {
            Self::OracleDirectory { dir } => {
                let path = Self::oracle_path(dir, step);
                if !path.is_file() {
                    return Err(Error::OracleMiss { path });
                }
                let gt = png::load_png(&path)?;
                check_dims(image.dims(), gt.dims(), "oracle frame")?;
                gt
            }
            Self::FlatFill => {
                let mut sum = [0.0; 3];
                let mut n = 0usize;
                for y in 0..image.height() {
                    for x in 0..image.width() {
                        if mask.get(x, y) {
                            let p = image.pixel(x, y);
                            for c in 0..3 {
                                sum[c] += p[c];
                            }
                            n += 1;
                        }
                    }
                }
                let color = if n == 0 {
                    MID_GRAY
                } else {
                    sum.map(|s| (s / n as f64).clamp(0.0, 1.0))
                };
                ImageBuffer::filled(image.width(), image.height(), color)
            }
            Self::Remote(ep) => {
                #[derive(Deserialize)]
                struct Reply {
                    image: String,
                }
                let body = serde_json::json!({
                    "image": remote::encode_b64(&png::encode_rgb(image)?),
                    "mask": remote::encode_b64(&png::encode_mask(mask)?),
                    "prompt": prompt,
                });
                let reply: Reply = ep.post_json_for(INPAINT_ROUTE, &body)?;
                let out = png::decode_rgb(&remote::decode_b64(&reply.image)?)
                    .map_err(|e| Error::backend(format!("inpaint service returned a bad image: {e}")))?;
                if out.dims() != image.dims() {
                    return Err(Error::backend(format!(
                        "inpaint service returned {}x{}, expected {}x{}",
                        out.width(),
                        out.height(),
                        image.width(),
                        image.height()
                    )));
                }
                out
            }
        };
        Ok(ImageBuffer::from_fn(image.width(), image.height(), |x, y| {
            if mask.get(x, y) {
                image.pixel(x, y)
            } else {
                fill.pixel(x, y)
            }
        }))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PrompterBackend {
    Fixed { prompt: String },
    Remote(RemoteEndpoint),
}

impl PrompterBackend {
    pub fn fixed(prompt: impl Into<String>) -> Result<Self> {
        let backend = Self::Fixed {
            prompt: prompt.into(),
        };
        backend.validate()?;
        Ok(backend)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Fixed { prompt } if prompt.is_empty() => {
                Err(Error::invalid("fixed prompt must not be empty"))
            }
            Self::Remote(ep) => ep.validate(),
            _ => Ok(()),
        }
    }

    pub fn describe(&self, image: &ImageBuffer) -> Result<String> {
        match self {
            Self::Fixed { prompt } => Ok(prompt.clone()),
            Self::Remote(ep) => {
                #[derive(Deserialize)]
                struct Reply {
                    text: String,
                }
                let body = serde_json::json!({
                    "image": remote::encode_b64(&png::encode_rgb(image)?),
                    "instruction": DESCRIBE_INSTRUCTION,
                });
                let reply: Reply = ep.post_json_for(DESCRIBE_ROUTE, &body)?;
                Ok(reply.text)
            }
        }
    }
}
