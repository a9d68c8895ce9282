//! The iterative completion loop.
//!
//! Starting from a scene reconstructed from the input image, each scheduled
//! yaw angle runs one [`step`]: render the current scene from the new pose,
//! mask what it already covers, inpaint the rest, reconstruct the inpainted
//! frame, keep only the new Gaussians that land in unobserved pixels, append
//! them, and optionally optimize colors/opacities against every frame seen
//! so far.

use std::fmt;
use std::path::Path;

use serde::Serialize;

use crate::backends::{DepthMap, InpainterBackend, PrompterBackend, ReconstructorBackend};
use crate::error::{Error, Result};
use crate::geometry::{yaw_pose, Camera, Pose, PoseSchedule};
use crate::io;
use crate::optim::{optimize, FrameTarget, OptimConfig};
use crate::raster::{render, DEFAULT_MASK_TAU};
use crate::scene::{merge_scenes, GaussianScene, ImageBuffer, MaskBuffer, Rgb};

#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub schedule: PoseSchedule,
    pub mask_tau: f64,
    pub optim: OptimConfig,
    pub background: Rgb,
    pub reconstructor: ReconstructorBackend,
    pub inpainter: InpainterBackend,
    pub prompter: PrompterBackend,
    /// Optimize after every merge; otherwise once after the last step.
    pub optimize_every_step: bool,
    /// Applied to remote reconstructions before the camera-to-world move.
    pub rescale_factor: f64,
}

impl PipelineConfig {
    /// Default schedule and settings around the given backends.
    pub fn new(
        schedule: PoseSchedule,
        reconstructor: ReconstructorBackend,
        inpainter: InpainterBackend,
        prompter: PrompterBackend,
    ) -> Self {
        Self {
            schedule,
            mask_tau: DEFAULT_MASK_TAU,
            optim: OptimConfig::default(),
            background: [0.0; 3],
            reconstructor,
            inpainter,
            prompter,
            optimize_every_step: true,
            rescale_factor: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.mask_tau) {
            return Err(Error::invalid(format!("mask_tau {} outside [0, 1]", self.mask_tau)));
        }
        if !(self.rescale_factor.is_finite() && self.rescale_factor > 0.0) {
            return Err(Error::invalid(format!(
                "rescale_factor {} must be positive",
                self.rescale_factor
            )));
        }
        if let Some(a) = self.schedule.angles_deg.iter().find(|a| !a.is_finite()) {
            return Err(Error::invalid(format!("non-finite schedule angle {a}")));
        }
        if !self.background.iter().all(|c| (0.0..=1.0).contains(c)) {
            return Err(Error::invalid("background color outside [0, 1]"));
        }
        self.optim.validate()?;
        self.reconstructor.validate()?;
        self.inpainter.validate()?;
        self.prompter.validate()
    }
}

/// What happened in one pipeline step. Step 0 is the initial reconstruction
/// and has no render or mask.
#[derive(Clone, Debug)]
pub struct StepRecord {
    pub step: usize,
    pub angle_deg: f64,
    pub pose: Pose,
    /// Render of the previous scene from this step's pose.
    pub render: Option<ImageBuffer>,
    pub mask: Option<MaskBuffer>,
    /// Inpainted frame (the input image at step 0).
    pub image: ImageBuffer,
    /// Gaussians produced by the reconstructor.
    pub reconstructed: usize,
    /// Reconstructed Gaussians kept after the unobserved-pixel filter.
    pub retained: usize,
    /// Scene size after the merge.
    pub total: usize,
    pub loss_trace: Vec<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct PipelineTrace {
    pub prompt: String,
    pub steps: Vec<StepRecord>,
}

#[derive(Serialize)]
struct StepSummary {
    step: usize,
    angle_deg: f64,
    reconstructed: usize,
    retained: usize,
    total: usize,
    observed_pixels: Option<usize>,
    initial_loss: Option<f64>,
    final_loss: Option<f64>,
    iterations: usize,
}

#[derive(Serialize)]
struct TraceSummary<'a> {
    prompt: &'a str,
    steps: Vec<StepSummary>,
}

impl PipelineTrace {
    /// Writes per-step PNGs (`step_{i}_render.png`, `step_{i}_mask.png`,
    /// `step_{i}_image.png`), loss CSVs, and `summary.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut steps = Vec::new();
        for r in &self.steps {
            let i = r.step;
            if let Some(img) = &r.render {
                io::save_png(img, &dir.join(format!("step_{i}_render.png")))?;
            }
            if let Some(m) = &r.mask {
                io::save_mask(m, &dir.join(format!("step_{i}_mask.png")))?;
            }
            io::save_png(&r.image, &dir.join(format!("step_{i}_image.png")))?;
            if !r.loss_trace.is_empty() {
                io::save_loss_trace(&r.loss_trace, &dir.join(format!("step_{i}_loss.csv")))?;
            }
            steps.push(StepSummary {
                step: i,
                angle_deg: r.angle_deg,
                reconstructed: r.reconstructed,
                retained: r.retained,
                total: r.total,
                observed_pixels: r.mask.as_ref().map(MaskBuffer::count_observed),
                initial_loss: r.loss_trace.first().copied(),
                final_loss: r.loss_trace.last().copied(),
                iterations: r.loss_trace.len().saturating_sub(1),
            });
        }
        io::save_json(
            &TraceSummary {
                prompt: &self.prompt,
                steps,
            },
            &dir.join("summary.json"),
        )
    }
}

/// A run that stopped early. `scene` and `trace` hold the last completed
/// step.
#[derive(Debug)]
pub struct PipelineError {
    pub step: usize,
    pub scene: GaussianScene,
    pub trace: PipelineTrace,
    pub source: Error,
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "pipeline failed at step {} ({} gaussians kept): {}",
            self.step,
            self.scene.len(),
            self.source
        )
    }
}

impl std::error::Error for PipelineError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

/// Keeps the Gaussians whose centers project (rounded to the nearest pixel)
/// inside the image onto an unobserved mask pixel.
pub fn retain_unobserved(new_scene: &GaussianScene, mask: &MaskBuffer, cam: &Camera) -> GaussianScene {
    let (w, h) = mask.dims();
    new_scene.filter(|g| {
        let Ok((u, v, _)) = crate::geometry::project_point(cam, &g.mean) else {
            return false;
        };
        let (x, y) = (u.round(), v.round());
        if !(x >= 0.0 && y >= 0.0 && x < w as f64 && y < h as f64) {
            return false;
        }
        !mask.get(x as usize, y as usize)
    })
}

/// One completion step from `prev` toward `cam_next`.
///
/// `frames` holds the frames seen so far; the new frame is appended on
/// success. On error neither `prev` nor `frames` is modified.
pub fn step(
    prev: &GaussianScene,
    cam_next: &Camera,
    prompt: &str,
    frames: &mut Vec<FrameTarget>,
    cfg: &PipelineConfig,
    index: usize,
    optimize_now: bool,
) -> Result<(GaussianScene, StepRecord)> {
    let rendered = render(prev, cam_next, cfg.background)?;
    let mask = rendered.mask(cfg.mask_tau)?;
    let image = cfg.inpainter.inpaint(&rendered.color, &mask, prompt, index)?;
    let depth: Option<DepthMap> = cfg.reconstructor.depth_for_step(index)?;
    let lifted = cfg
        .reconstructor
        .reconstruct(&image, cam_next, depth.as_ref(), cfg.rescale_factor)?;
    let kept = retain_unobserved(&lifted, &mask, cam_next);
    let mut merged = merge_scenes(prev, &kept, index);

    let frame = FrameTarget::new(*cam_next, image.clone())?;
    let mut loss_trace = Vec::new();
    if optimize_now {
        let mut all = frames.clone();
        all.push(frame.clone());
        let out = optimize(&merged, &all, cfg.background, &cfg.optim)?;
        merged = out.scene;
        loss_trace = out.trace;
    }
    frames.push(frame);

    let record = StepRecord {
        step: index,
        angle_deg: f64::NAN,
        pose: cam_next.pose,
        render: Some(rendered.color),
        mask: Some(mask),
        image,
        reconstructed: lifted.len(),
        retained: kept.len(),
        total: merged.len(),
        loss_trace,
    };
    Ok((merged, record))
}

/// Runs the whole loop from the input image `image0` seen by `base_cam`.
pub fn run_pipeline(
    image0: &ImageBuffer,
    depth0: Option<&DepthMap>,
    base_cam: &Camera,
    cfg: &PipelineConfig,
) -> std::result::Result<(GaussianScene, PipelineTrace), PipelineError> {
    let fail = |step, scene: &GaussianScene, trace: &PipelineTrace, source| PipelineError {
        step,
        scene: scene.clone(),
        trace: trace.clone(),
        source,
    };
    let empty = GaussianScene::new();
    let mut trace = PipelineTrace::default();
    cfg.validate().map_err(|e| fail(0, &empty, &trace, e))?;

    let scene0 = cfg
        .reconstructor
        .reconstruct(image0, base_cam, depth0, cfg.rescale_factor)
        .map_err(|e| fail(0, &empty, &trace, e))?;
    trace.prompt = cfg
        .prompter
        .describe(image0)
        .map_err(|e| fail(0, &empty, &trace, e))?;
    trace.steps.push(StepRecord {
        step: 0,
        angle_deg: 0.0,
        pose: base_cam.pose,
        render: None,
        mask: None,
        image: image0.clone(),
        reconstructed: scene0.len(),
        retained: scene0.len(),
        total: scene0.len(),
        loss_trace: Vec::new(),
    });

    let mut scene = scene0;
    let mut frames = vec![FrameTarget::new(*base_cam, image0.clone()).map_err(|e| fail(0, &empty, &trace, e))?];
    let n = cfg.schedule.len();
    for (i, angle) in cfg.schedule.angles_deg.iter().enumerate() {
        let index = i + 1;
        let result = yaw_pose(&cfg.schedule.base, *angle).and_then(|pose| {
            let cam = Camera::new(base_cam.intrinsics, pose);
            let optimize_now = cfg.optimize_every_step || index == n;
            step(&scene, &cam, &trace.prompt, &mut frames, cfg, index, optimize_now)
        });
        let (next, mut record) = result.map_err(|e| fail(index, &scene, &trace, e))?;
        record.angle_deg = *angle;
        trace.steps.push(record);
        scene = next;
    }
    Ok((scene, trace))
}
