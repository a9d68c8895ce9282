//! PNG codecs for RGB images, binary masks, and 16-bit depth maps.

use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage, ImageBuffer as RawImage, ImageFormat, Luma, RgbImage};
use serde::{Deserialize, Serialize};

use crate::backends::DepthMap;
use crate::error::{Error, Result};
use crate::scene::{ImageBuffer, MaskBuffer};

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn encode(img: DynamicImage) -> Result<Vec<u8>> {
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)
        .map_err(|e| Error::parse(format!("PNG encoding failed: {e}")))?;
    Ok(out.into_inner())
}

fn decode(bytes: &[u8]) -> Result<DynamicImage> {
    image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| Error::parse(format!("cannot decode PNG: {e}")))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn encode_rgb(img: &ImageBuffer) -> Result<Vec<u8>> {
    let raw: Vec<u8> = img.as_raw().iter().map(|v| to_u8(*v)).collect();
    let rgb = RgbImage::from_raw(img.width() as u32, img.height() as u32, raw)
        .ok_or_else(|| Error::invalid("image buffer size mismatch"))?;
    encode(DynamicImage::ImageRgb8(rgb))
}

/// Decodes an 8-bit PNG (RGB, RGBA with alpha dropped, or grayscale) into
/// `[0, 1]` floats.
pub fn decode_rgb(bytes: &[u8]) -> Result<ImageBuffer> {
    let img = decode(bytes)?;
    let rgb = match img {
        DynamicImage::ImageRgb8(i) => i,
        DynamicImage::ImageRgba8(_) | DynamicImage::ImageLuma8(_) | DynamicImage::ImageLumaA8(_) => {
            img.to_rgb8()
        }
        other => {
            return Err(Error::parse(format!(
                "unsupported PNG color type {:?}, expected 8-bit",
                other.color()
            )))
        }
    };
    let (w, h) = rgb.dimensions();
    let data = rgb.into_raw().into_iter().map(|v| v as f64 / 255.0).collect();
    ImageBuffer::from_raw(w as usize, h as usize, data)
}

/// 8-bit grayscale, 255 for observed pixels.
pub fn encode_mask(mask: &MaskBuffer) -> Result<Vec<u8>> {
    let raw = mask.bits().iter().map(|b| if *b { 255 } else { 0 }).collect();
    let gray = GrayImage::from_raw(mask.width() as u32, mask.height() as u32, raw)
        .ok_or_else(|| Error::invalid("mask size mismatch"))?;
    encode(DynamicImage::ImageLuma8(gray))
}

pub fn decode_mask(bytes: &[u8]) -> Result<MaskBuffer> {
    let gray = match decode(bytes)? {
        DynamicImage::ImageLuma8(g) => g,
        other => {
            return Err(Error::parse(format!(
                "mask PNG must be 8-bit grayscale, got {:?}",
                other.color()
            )))
        }
    };
    let (w, h) = gray.dimensions();
    Ok(MaskBuffer::from_fn(w as usize, h as usize, |x, y| {
        gray.get_pixel(x as u32, y as u32)[0] >= 128
    }))
}

pub fn save_png(img: &ImageBuffer, path: &Path) -> Result<()> {
    super::write_atomic(path, &encode_rgb(img)?)
}

pub fn load_png(path: &Path) -> Result<ImageBuffer> {
    decode_rgb(&read(path)?)
}

pub fn save_mask(mask: &MaskBuffer, path: &Path) -> Result<()> {
    super::write_atomic(path, &encode_mask(mask)?)
}

pub fn load_mask(path: &Path) -> Result<MaskBuffer> {
    decode_mask(&read(path)?)
}

/// Sidecar metadata for a 16-bit depth PNG: stored value `k` decodes to
/// `k / 65535 * scale`, and `k = 0` marks an invalid pixel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DepthMeta {
    pub scale: f64,
    pub units: String,
}

/// `depth_3.png` keeps its metadata in `depth_3.json`.
pub fn depth_meta_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn save_depth(depth: &DepthMap, path: &Path) -> Result<()> {
    let scale = depth
        .values()
        .iter()
        .flatten()
        .fold(0.0f64, |m, d| m.max(*d));
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let raw: Vec<u16> = depth
        .values()
        .iter()
        .map(|d| match d {
            Some(d) => ((d / scale * 65535.0).round() as u16).max(1),
            None => 0,
        })
        .collect();
    let img: RawImage<Luma<u16>, Vec<u16>> =
        RawImage::from_raw(depth.width() as u32, depth.height() as u32, raw)
            .ok_or_else(|| Error::invalid("depth size mismatch"))?;
    let meta = DepthMeta {
        scale,
        units: "meters".into(),
    };
    let json = serde_json::to_vec_pretty(&meta).map_err(|e| Error::parse(e.to_string()))?;
    super::write_atomic(&depth_meta_path(path), &json)?;
    super::write_atomic(path, &encode(DynamicImage::ImageLuma16(img))?)
}

pub fn load_depth(path: &Path) -> Result<DepthMap> {
    let meta_path = depth_meta_path(path);
    let meta: DepthMeta = serde_json::from_slice(&read(&meta_path)?)
        .map_err(|e| Error::parse(format!("{}: {e}", meta_path.display())))?;
    if !(meta.scale.is_finite() && meta.scale > 0.0) {
        return Err(Error::parse(format!("depth scale {} must be positive", meta.scale)));
    }
    let gray = match decode(&read(path)?)? {
        DynamicImage::ImageLuma16(g) => g,
        other => {
            return Err(Error::parse(format!(
                "depth PNG must be 16-bit grayscale, got {:?}",
                other.color()
            )))
        }
    };
    let (w, h) = gray.dimensions();
    let values = gray
        .into_raw()
        .into_iter()
        .map(|k| (k > 0).then(|| k as f64 / 65535.0 * meta.scale))
        .collect();
    DepthMap::new(w as usize, h as usize, values)
}
