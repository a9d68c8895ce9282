//! File formats: PLY scenes, PNG images/masks/depth, camera and run-config
//! JSON, and loss-trace CSV. All writes go through a temp file and rename.

pub mod config;
pub mod ply;
pub mod png;

use std::io::Write;
use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Camera, Intrinsics, Pose};

pub use config::RunConfigFile;
pub use ply::{load_ply, save_ply};
pub use png::{load_depth, load_mask, load_png, save_depth, save_mask, save_png};

/// Writes `bytes` to a temp file next to `path`, then renames it over
/// `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// On-disk camera: intrinsics plus world-from-camera pose.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraFile {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    /// `[w, x, y, z]`
    pub rotation: [f64; 4],
    pub translation: [f64; 3],
}

impl From<&Camera> for CameraFile {
    fn from(c: &Camera) -> Self {
        let k = &c.intrinsics;
        let q = c.pose.rotation.quaternion();
        Self {
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
            width: k.width,
            height: k.height,
            rotation: [q.w, q.i, q.j, q.k],
            translation: c.pose.translation.into(),
        }
    }
}

impl CameraFile {
    pub fn to_camera(&self) -> Result<Camera> {
        let intrinsics = Intrinsics::new(self.fx, self.fy, self.cx, self.cy, self.width, self.height)?;
        let [w, x, y, z] = self.rotation;
        let q = Quaternion::new(w, x, y, z);
        let norm = q.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::invalid("camera rotation quaternion is degenerate"));
        }
        // keep stored unit quaternions bit-exact
        let rotation = if (norm - 1.0).abs() < 1e-12 {
            UnitQuaternion::new_unchecked(q)
        } else {
            UnitQuaternion::from_quaternion(q)
        };
        Ok(Camera::new(intrinsics, Pose::new(rotation, Vector3::from(self.translation))))
    }
}

/// Every float is written with 17 significant digits, enough for any `f64`
/// to parse back bit-exactly.
pub fn camera_to_json(cam: &Camera) -> String {
    let f = CameraFile::from(cam);
    let num = |v: f64| format!("{v:.16e}");
    let list = |v: &[f64]| v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(", ");
    format!(
        "{{\n  \"fx\": {},\n  \"fy\": {},\n  \"cx\": {},\n  \"cy\": {},\n  \"width\": {},\n  \"height\": {},\n  \"rotation\": [{}],\n  \"translation\": [{}]\n}}\n",
        num(f.fx),
        num(f.fy),
        num(f.cx),
        num(f.cy),
        f.width,
        f.height,
        list(&f.rotation),
        list(&f.translation)
    )
}

pub fn camera_from_json(text: &str) -> Result<Camera> {
    let file: CameraFile =
        serde_json::from_str(text).map_err(|e| Error::parse(format!("camera JSON: {e}")))?;
    file.to_camera()
}

pub fn save_camera(cam: &Camera, path: &Path) -> Result<()> {
    write_atomic(path, camera_to_json(cam).as_bytes())
}

pub fn load_camera(path: &Path) -> Result<Camera> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    camera_from_json(&text).map_err(|e| match e {
        Error::Parse(m) => Error::parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// `iteration,loss` rows with a header line.
pub fn loss_trace_csv(trace: &[f64]) -> String {
    let mut out = String::from("iteration,loss\n");
    for (i, l) in trace.iter().enumerate() {
        out.push_str(&format!("{i},{l:e}\n"));
    }
    out
}

pub fn save_loss_trace(trace: &[f64], path: &Path) -> Result<()> {
    write_atomic(path, loss_trace_csv(trace).as_bytes())
}

pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::parse(e.to_string()))?;
    write_atomic(path, &bytes)
}
