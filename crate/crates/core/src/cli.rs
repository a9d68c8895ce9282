//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 backend failure, 3 I/O or parse
//! error. Diagnostics go to standard error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::Error;
use crate::eval::eval_named_views;
use crate::io;
use crate::optim::FrameTarget;
use crate::pipeline::run_pipeline;
use crate::raster::{coverage_mask, render, DEFAULT_MASK_TAU};
use crate::scene::{validate_scene, Rgb};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_BACKEND: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "splatfill", version, about = "Single-image scene completion with 3D Gaussians")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the completion pipeline described by a JSON run config.
    Reconstruct {
        #[arg(long)]
        config: PathBuf,
    },
    /// Render a PLY scene from a camera.
    Render {
        #[arg(long)]
        ply: PathBuf,
        #[arg(long)]
        camera: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.0, 0.0])]
        background: Vec<f64>,
    },
    /// Write the observed-region mask of a PLY scene seen from a camera.
    Mask {
        #[arg(long)]
        ply: PathBuf,
        #[arg(long)]
        camera: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MASK_TAU)]
        tau: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a PLY scene against `<name>.png` + `<name>.json` target views.
    Eval {
        #[arg(long)]
        ply: PathBuf,
        #[arg(long)]
        targets: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.0, 0.0])]
        background: Vec<f64>,
    },
    /// Check every Gaussian in a PLY file against the scene invariants.
    Validate {
        #[arg(long)]
        ply: PathBuf,
    },
}

/// Failure carrying its exit code.
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) | Error::BehindCamera { .. } => EXIT_USAGE,
        Error::BackendUnavailable { .. } | Error::OracleMiss { .. } => EXIT_BACKEND,
        Error::Parse(_) | Error::Io { .. } => EXIT_IO,
    }
}

fn background(v: &[f64]) -> Result<Rgb, Failure> {
    match v {
        [r, g, b] if v.iter().all(|c| (0.0..=1.0).contains(c)) => Ok([*r, *g, *b]),
        _ => Err(Failure {
            code: EXIT_USAGE,
            message: format!("background must be three values in [0, 1], got {v:?}"),
        }),
    }
}

/// Collects `<name>.png` files that have a sibling `<name>.json` camera.
fn load_targets(dir: &Path) -> Result<(Vec<FrameTarget>, Vec<String>), Error> {
    let mut pngs: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "png") && p.with_extension("json").is_file())
        .collect();
    pngs.sort();
    let mut frames = Vec::new();
    let mut names = Vec::new();
    for p in pngs {
        let cam = io::load_camera(&p.with_extension("json"))?;
        let img = io::load_png(&p)?;
        frames.push(FrameTarget::new(cam, img)?);
        names.push(p.file_stem().unwrap_or_default().to_string_lossy().into_owned());
    }
    if frames.is_empty() {
        return Err(Error::invalid(format!(
            "no <name>.png + <name>.json target pairs in {}",
            dir.display()
        )));
    }
    Ok((frames, names))
}

fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Reconstruct { config } => {
            let inputs = io::RunConfigFile::load(&config)?.into_inputs()?;
            let out = &inputs.output_dir;
            std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
            match run_pipeline(&inputs.image, inputs.depth.as_ref(), &inputs.camera, &inputs.config) {
                Ok((scene, trace)) => {
                    io::save_ply(&scene, &out.join("scene.ply"))?;
                    trace.write_to(out)?;
                    eprintln!(
                        "wrote {} gaussians after {} steps to {}",
                        scene.len(),
                        trace.steps.len() - 1,
                        out.display()
                    );
                    Ok(())
                }
                Err(e) => {
                    // keep what was completed before the failure
                    let _ = io::save_ply(&e.scene, &out.join("partial.ply"));
                    let _ = e.trace.write_to(out);
                    Err(Failure {
                        code: exit_code(&e.source),
                        message: e.to_string(),
                    })
                }
            }
        }
        Command::Render {
            ply,
            camera,
            out,
            background: bg,
        } => {
            let bg = background(&bg)?;
            let scene = io::load_ply(&ply)?;
            let cam = io::load_camera(&camera)?;
            io::save_png(&render(&scene, &cam, bg)?.color, &out)?;
            Ok(())
        }
        Command::Mask {
            ply,
            camera,
            tau,
            out,
        } => {
            let scene = io::load_ply(&ply)?;
            let cam = io::load_camera(&camera)?;
            io::save_mask(&coverage_mask(&scene, &cam, tau)?, &out)?;
            Ok(())
        }
        Command::Eval {
            ply,
            targets,
            out,
            background: bg,
        } => {
            let bg = background(&bg)?;
            let scene = io::load_ply(&ply)?;
            let (frames, names) = load_targets(&targets)?;
            let report = eval_named_views(&scene, &frames, &names, bg)?;
            io::save_json(&report, &out)?;
            Ok(())
        }
        Command::Validate { ply } => {
            let scene = io::load_ply(&ply)?;
            let violations = validate_scene(&scene);
            if violations.is_empty() {
                println!("{}: {} gaussians, no violations", ply.display(), scene.len());
                Ok(())
            } else {
                for v in &violations {
                    eprintln!("{v}");
                }
                Err(Failure {
                    code: EXIT_IO,
                    message: format!("{} invariant violations", violations.len()),
                })
            }
        }
    }
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
