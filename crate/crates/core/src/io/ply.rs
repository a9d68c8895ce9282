//! Binary little-endian PLY in the common 3DGS layout, degree-0 SH only.
//!
//! Vertex properties, all `float`, in this order:
//! `x y z f_dc_0 f_dc_1 f_dc_2 opacity scale_0 scale_1 scale_2 rot_0 rot_1 rot_2 rot_3`.
//! Color is stored as the DC spherical-harmonic coefficient, opacity as a
//! logit, scale as a natural log, and rotation as `(w, x, y, z)`.

use std::path::Path;

use nalgebra::{Quaternion, Vector3};

use crate::error::{Error, Result};
use crate::scene::{Gaussian3D, GaussianScene};

/// Degree-0 real spherical harmonic `1 / (2 sqrt(pi))`.
pub const SH_C0: f64 = 0.282_094_791_773_878_14;

pub const PROPERTIES: [&str; 14] = [
    "x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0", "scale_1", "scale_2",
    "rot_0", "rot_1", "rot_2", "rot_3",
];

/// Opacities are pulled this far inside (0, 1) before taking the logit.
const OPACITY_EPS: f64 = 1e-7;

pub fn color_to_dc(c: f64) -> f64 {
    (c - 0.5) / SH_C0
}

pub fn dc_to_color(dc: f64) -> f64 {
    (0.5 + SH_C0 * dc).clamp(0.0, 1.0)
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(OPACITY_EPS, 1.0 - OPACITY_EPS);
    (p / (1.0 - p)).ln()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn encode_ply(scene: &GaussianScene) -> Vec<u8> {
    let mut out = Vec::with_capacity(256 + scene.len() * PROPERTIES.len() * 4);
    out.extend_from_slice(b"ply\nformat binary_little_endian 1.0\n");
    out.extend_from_slice(format!("element vertex {}\n", scene.len()).as_bytes());
    for p in PROPERTIES {
        out.extend_from_slice(format!("property float {p}\n").as_bytes());
    }
    out.extend_from_slice(b"end_header\n");
    for g in scene.iter() {
        let q = g.rotation;
        let values = [
            g.mean.x,
            g.mean.y,
            g.mean.z,
            color_to_dc(g.color[0]),
            color_to_dc(g.color[1]),
            color_to_dc(g.color[2]),
            logit(g.opacity),
            g.scale.x.ln(),
            g.scale.y.ln(),
            g.scale.z.ln(),
            q.w,
            q.i,
            q.j,
            q.k,
        ];
        for v in values {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

struct Header {
    count: usize,
    /// Number of float properties per vertex.
    stride: usize,
    /// Position of each required property within a vertex record.
    slots: [usize; 14],
    body_offset: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    const END: &[u8] = b"end_header\n";
    let end = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| Error::parse("PLY header has no end_header line"))?;
    let text = std::str::from_utf8(&bytes[..end])
        .map_err(|_| Error::parse("PLY header is not valid text"))?;
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    if lines.next() != Some("ply") {
        return Err(Error::parse("missing 'ply' magic"));
    }

    let mut count = None;
    let mut names: Vec<String> = Vec::new();
    let mut in_vertex = false;
    for line in lines {
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts.as_slice() {
            ["format", fmt, _] => {
                if *fmt != "binary_little_endian" {
                    return Err(Error::parse(format!("unsupported PLY format '{fmt}'")));
                }
            }
            ["comment", ..] | ["obj_info", ..] => {}
            ["element", "vertex", n] => {
                count = Some(
                    n.parse::<usize>()
                        .map_err(|_| Error::parse(format!("bad vertex count '{n}'")))?,
                );
                in_vertex = true;
            }
            ["element", name, _] => {
                return Err(Error::parse(format!("unsupported PLY element '{name}'")));
            }
            ["property", ty, name] if in_vertex => {
                if *ty != "float" && *ty != "float32" {
                    return Err(Error::parse(format!(
                        "property '{name}' has type '{ty}', expected float"
                    )));
                }
                if names.iter().any(|n| n == name) {
                    return Err(Error::parse(format!("duplicate property '{name}'")));
                }
                names.push((*name).to_string());
            }
            ["property", "list", .., name] => {
                return Err(Error::parse(format!("unsupported list property '{name}'")));
            }
            _ => return Err(Error::parse(format!("unrecognized PLY header line '{line}'"))),
        }
    }
    let count = count.ok_or_else(|| Error::parse("PLY header declares no vertex element"))?;
    let mut slots = [0usize; 14];
    for (slot, want) in slots.iter_mut().zip(PROPERTIES) {
        *slot = names
            .iter()
            .position(|n| n == want)
            .ok_or_else(|| Error::parse(format!("missing property '{want}'")))?;
    }
    Ok(Header {
        count,
        stride: names.len(),
        slots,
        body_offset: end + END.len(),
    })
}

/// Decodes a PLY buffer. Extra float vertex properties (normals,
/// higher-order SH) are skipped.
pub fn parse_ply(bytes: &[u8]) -> Result<GaussianScene> {
    let h = parse_header(bytes)?;
    let record = h.stride * 4;
    let body = &bytes[h.body_offset..];
    let need = h
        .count
        .checked_mul(record)
        .ok_or_else(|| Error::parse("vertex count overflows"))?;
    if body.len() < need {
        return Err(Error::parse(format!(
            "truncated PLY body: {} bytes for {} vertices, expected {need}",
            body.len(),
            h.count
        )));
    }
    let mut gaussians = Vec::with_capacity(h.count);
    for rec in body[..need].chunks_exact(record) {
        let f = |slot: usize| {
            let i = h.slots[slot] * 4;
            f32::from_le_bytes([rec[i], rec[i + 1], rec[i + 2], rec[i + 3]]) as f64
        };
        let q = Quaternion::new(f(10), f(11), f(12), f(13));
        if !(q.norm() > 0.0) {
            return Err(Error::parse("property 'rot_0'..'rot_3' encodes a zero quaternion"));
        }
        gaussians.push(Gaussian3D::new(
            Vector3::new(f(0), f(1), f(2)),
            q,
            Vector3::new(f(7).exp(), f(8).exp(), f(9).exp()),
            sigmoid(f(6)),
            [dc_to_color(f(3)), dc_to_color(f(4)), dc_to_color(f(5))],
        ));
    }
    Ok(GaussianScene::from_gaussians(gaussians, 0))
}

pub fn save_ply(scene: &GaussianScene, path: &Path) -> Result<()> {
    super::write_atomic(path, &encode_ply(scene))
}

pub fn load_ply(path: &Path) -> Result<GaussianScene> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_ply(&bytes)
}
