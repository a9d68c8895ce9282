//! JSON run configuration for `splatfill reconstruct`.
//!
//! ```json
//! {
//!   "image": "input.png",
//!   "depth": "depth_0.png",
//!   "camera": "camera.json",
//!   "output_dir": "run",
//!   "angles_deg": [-10, 10, -20, 20, -30, 30],
//!   "inpainter": {"kind": "oracle-directory", "dir": "gt"},
//!   "prompter": {"kind": "fixed", "prompt": "An indoor scene"}
//! }
//! ```
//!
//! Relative paths resolve against the directory holding the config file.
//! Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backends::{DepthMap, InpainterBackend, PrompterBackend, ReconstructorBackend};
use crate::error::{Error, Result};
use crate::geometry::{schedule_from_config, Camera};
use crate::optim::OptimConfig;
use crate::pipeline::PipelineConfig;
use crate::raster::DEFAULT_MASK_TAU;
use crate::scene::{ImageBuffer, Rgb};

fn default_tau() -> f64 {
    DEFAULT_MASK_TAU
}

fn default_true() -> bool {
    true
}

fn default_rescale() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub image: PathBuf,
    /// Required by the RGB-D lifter.
    #[serde(default)]
    pub depth: Option<PathBuf>,
    pub camera: PathBuf,
    pub output_dir: PathBuf,
    /// Omitted means the default near-to-far schedule.
    #[serde(default)]
    pub angles_deg: Option<Vec<f64>>,
    #[serde(default = "default_tau")]
    pub mask_tau: f64,
    #[serde(default)]
    pub optim: OptimConfig,
    #[serde(default)]
    pub background: Rgb,
    #[serde(default)]
    pub reconstructor: ReconstructorBackend,
    pub inpainter: InpainterBackend,
    pub prompter: PrompterBackend,
    #[serde(default = "default_true")]
    pub optimize_every_step: bool,
    #[serde(default = "default_rescale")]
    pub rescale_factor: f64,
}

/// Everything `run_pipeline` needs, loaded from disk.
pub struct RunInputs {
    pub image: ImageBuffer,
    pub depth: Option<DepthMap>,
    pub camera: Camera,
    pub config: PipelineConfig,
    pub output_dir: PathBuf,
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn require(path: &Path, what: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, format!("{what} not found")),
        ))
    }
}

impl RunConfigFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse(format!("run config: {e}")))
    }

    /// Parses the file, resolves relative paths, and checks that every
    /// input path exists.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.check_paths()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.image);
        if let Some(d) = &mut self.depth {
            resolve(base, d);
        }
        resolve(base, &mut self.camera);
        resolve(base, &mut self.output_dir);
        if let ReconstructorBackend::RgbdLifter(l) = &mut self.reconstructor {
            if let Some(d) = &mut l.depth_dir {
                resolve(base, d);
            }
        }
        if let InpainterBackend::OracleDirectory { dir } = &mut self.inpainter {
            resolve(base, dir);
        }
    }

    fn check_paths(&self) -> Result<()> {
        require(&self.image, "input image")?;
        if let Some(d) = &self.depth {
            require(d, "input depth")?;
        }
        require(&self.camera, "camera file")?;
        if let ReconstructorBackend::RgbdLifter(l) = &self.reconstructor {
            if let Some(d) = &l.depth_dir {
                require(d, "depth directory")?;
            }
        }
        if let InpainterBackend::OracleDirectory { dir } = &self.inpainter {
            require(dir, "oracle directory")?;
        }
        Ok(())
    }

    pub fn into_inputs(self) -> Result<RunInputs> {
        let image = super::load_png(&self.image)?;
        let depth = self.depth.as_deref().map(super::load_depth).transpose()?;
        let camera = super::load_camera(&self.camera)?;
        let mut config = PipelineConfig::new(
            schedule_from_config(camera.pose, self.angles_deg.as_deref()),
            self.reconstructor,
            self.inpainter,
            self.prompter,
        );
        config.mask_tau = self.mask_tau;
        config.optim = self.optim;
        config.background = self.background;
        config.optimize_every_step = self.optimize_every_step;
        config.rescale_factor = self.rescale_factor;
        config.validate()?;
        Ok(RunInputs {
            image,
            depth,
            camera,
            config,
            output_dir: self.output_dir,
        })
    }
}
