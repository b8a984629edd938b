//! PNG readers and writers.
//!
//! Exact formats: depth is 16-bit grayscale millimeters with 0 marking
//! invalid pixels, superpixel labels are 16-bit grayscale, HHA is 8-bit RGB,
//! masks are 8-bit grayscale restricted to {0, 255}. Normal and gradient
//! writers quantize to 16 bits for inspection; the quantization is lossy but
//! deterministic, and the alpha channel carries validity.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma, LumaA, Rgb, Rgba};
use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geocentric::HhaImage;
use crate::geom::DepthImage;
use crate::grid::Grid;
use crate::normals::{GradientChannelSet, NormalMap};
use crate::regionfeat::SuperpixelMap;

/// Counts per degree in gradient PNGs (`ng_convex` / `ng_concave` channels).
pub const GRADIENT_ANGLE_SCALE: f64 = 300.0;
/// Counts per meter in gradient PNGs (`dg` channel).
pub const GRADIENT_DEPTH_SCALE: f64 = 10_000.0;

fn open(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|e| Error::image(path, e))
}

fn dims(width: usize, height: usize, len: usize, per_pixel: usize) -> Result<(u32, u32)> {
    if len != width * height * per_pixel {
        return Err(Error::Dimension(format!(
            "expected {} samples for {width}x{height}, got {len}",
            width * height * per_pixel
        )));
    }
    Ok((width as u32, height as u32))
}

pub fn write_gray16(path: &Path, width: usize, height: usize, data: &[u16]) -> Result<()> {
    let (w, h) = dims(width, height, data.len(), 1)?;
    let buf: ImageBuffer<Luma<u16>, _> =
        ImageBuffer::from_raw(w, h, data.to_vec()).expect("sized above");
    buf.save_with_format(path, ImageFormat::Png)
        .map_err(|e| Error::image(path, e))
}

pub fn read_gray16(path: &Path) -> Result<(usize, usize, Vec<u16>)> {
    match open(path)? {
        DynamicImage::ImageLuma16(buf) => {
            let (w, h) = buf.dimensions();
            Ok((w as usize, h as usize, buf.into_raw()))
        }
        other => Err(Error::format(
            path,
            0,
            format!("expected 16-bit grayscale PNG, got {:?}", other.color()),
        )),
    }
}

pub fn write_gray8(path: &Path, width: usize, height: usize, data: &[u8]) -> Result<()> {
    let (w, h) = dims(width, height, data.len(), 1)?;
    let buf: ImageBuffer<Luma<u8>, _> =
        ImageBuffer::from_raw(w, h, data.to_vec()).expect("sized above");
    buf.save_with_format(path, ImageFormat::Png)
        .map_err(|e| Error::image(path, e))
}

pub fn read_gray8(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    match open(path)? {
        DynamicImage::ImageLuma8(buf) => {
            let (w, h) = buf.dimensions();
            Ok((w as usize, h as usize, buf.into_raw()))
        }
        other => Err(Error::format(
            path,
            0,
            format!("expected 8-bit grayscale PNG, got {:?}", other.color()),
        )),
    }
}

pub fn write_rgb8(path: &Path, width: usize, height: usize, data: &[u8]) -> Result<()> {
    let (w, h) = dims(width, height, data.len(), 3)?;
    let buf: ImageBuffer<Rgb<u8>, _> =
        ImageBuffer::from_raw(w, h, data.to_vec()).expect("sized above");
    buf.save_with_format(path, ImageFormat::Png)
        .map_err(|e| Error::image(path, e))
}

pub fn read_rgb8(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    match open(path)? {
        DynamicImage::ImageRgb8(buf) => {
            let (w, h) = buf.dimensions();
            Ok((w as usize, h as usize, buf.into_raw()))
        }
        other => Err(Error::format(
            path,
            0,
            format!("expected 8-bit RGB PNG, got {:?}", other.color()),
        )),
    }
}

pub fn write_rgba16(path: &Path, width: usize, height: usize, data: &[u16]) -> Result<()> {
    let (w, h) = dims(width, height, data.len(), 4)?;
    let buf: ImageBuffer<Rgba<u16>, _> =
        ImageBuffer::from_raw(w, h, data.to_vec()).expect("sized above");
    buf.save_with_format(path, ImageFormat::Png)
        .map_err(|e| Error::image(path, e))
}

pub fn read_rgba16(path: &Path) -> Result<(usize, usize, Vec<u16>)> {
    match open(path)? {
        DynamicImage::ImageRgba16(buf) => {
            let (w, h) = buf.dimensions();
            Ok((w as usize, h as usize, buf.into_raw()))
        }
        other => Err(Error::format(
            path,
            0,
            format!("expected 16-bit RGBA PNG, got {:?}", other.color()),
        )),
    }
}

pub fn write_gray_alpha16(path: &Path, width: usize, height: usize, data: &[u16]) -> Result<()> {
    let (w, h) = dims(width, height, data.len(), 2)?;
    let buf: ImageBuffer<LumaA<u16>, _> =
        ImageBuffer::from_raw(w, h, data.to_vec()).expect("sized above");
    buf.save_with_format(path, ImageFormat::Png)
        .map_err(|e| Error::image(path, e))
}

pub fn read_gray_alpha16(path: &Path) -> Result<(usize, usize, Vec<u16>)> {
    match open(path)? {
        DynamicImage::ImageLumaA16(buf) => {
            let (w, h) = buf.dimensions();
            Ok((w as usize, h as usize, buf.into_raw()))
        }
        other => Err(Error::format(
            path,
            0,
            format!("expected 16-bit gray+alpha PNG, got {:?}", other.color()),
        )),
    }
}

pub fn write_depth_png(path: &Path, depth: &DepthImage) -> Result<()> {
    write_gray16(path, depth.width(), depth.height(), &depth.to_millimeters())
}

pub fn read_depth_png(path: &Path) -> Result<DepthImage> {
    let (w, h, mm) = read_gray16(path)?;
    DepthImage::from_millimeters(w, h, &mm)
}

pub fn write_superpixel_png(path: &Path, spmap: &SuperpixelMap) -> Result<()> {
    if spmap.count() > u16::MAX as usize + 1 {
        return Err(Error::InvalidParam(format!(
            "{} superpixels exceed 16-bit label capacity",
            spmap.count()
        )));
    }
    let data: Vec<u16> = spmap.labels().as_slice().iter().map(|&l| l as u16).collect();
    write_gray16(path, spmap.width(), spmap.height(), &data)
}

pub fn read_superpixel_png(path: &Path) -> Result<SuperpixelMap> {
    let (w, h, labels) = read_gray16(path)?;
    let labels = Grid::from_vec(w, h, labels.into_iter().map(u32::from).collect())?;
    SuperpixelMap::new(labels)
}

/// Class label map, e.g. semantic segmentation ground truth or predictions.
pub fn write_label_png(path: &Path, labels: &Grid<u16>) -> Result<()> {
    write_gray16(path, labels.width(), labels.height(), labels.as_slice())
}

pub fn read_label_png(path: &Path) -> Result<Grid<u16>> {
    let (w, h, labels) = read_gray16(path)?;
    Grid::from_vec(w, h, labels)
}

pub fn write_hha_png(path: &Path, hha: &HhaImage) -> Result<()> {
    write_rgb8(path, hha.width(), hha.height(), hha.data())
}

pub fn read_hha_png(path: &Path) -> Result<HhaImage> {
    let (w, h, data) = read_rgb8(path)?;
    HhaImage::from_raw(w, h, data)
}

pub fn write_mask_png(path: &Path, mask: &Grid<bool>) -> Result<()> {
    let data: Vec<u8> = mask.as_slice().iter().map(|&m| if m { 255 } else { 0 }).collect();
    write_gray8(path, mask.width(), mask.height(), &data)
}

pub fn read_mask_png(path: &Path) -> Result<Grid<bool>> {
    let (w, h, data) = read_gray8(path)?;
    let mut mask = Vec::with_capacity(data.len());
    for &v in &data {
        match v {
            0 => mask.push(false),
            255 => mask.push(true),
            other => {
                return Err(Error::format(
                    path,
                    0,
                    format!("mask pixels must be 0 or 255, got {other}"),
                ))
            }
        }
    }
    Grid::from_vec(w, h, mask)
}

/// Quantizes unit normals into 16-bit RGBA: each component maps linearly
/// from [-1, 1] onto 0..=65535, alpha is 65535 where valid and 0 elsewhere.
pub fn write_normals_png(path: &Path, normals: &NormalMap) -> Result<()> {
    let quantize = |c: f64| ((c + 1.0) / 2.0 * 65535.0).round().clamp(0.0, 65535.0) as u16;
    let mut data = Vec::with_capacity(4 * normals.width() * normals.height());
    for y in 0..normals.height() {
        for x in 0..normals.width() {
            match normals.normal(x, y) {
                Some(n) => {
                    data.extend([quantize(n.x), quantize(n.y), quantize(n.z), u16::MAX]);
                }
                None => data.extend([0u16; 4]),
            }
        }
    }
    write_rgba16(path, normals.width(), normals.height(), &data)
}

/// Decodes a normals PNG back to unit vectors. The 16-bit quantization loses
/// precision, so the result is renormalized rather than bit-equal.
pub fn read_normals_png(path: &Path) -> Result<NormalMap> {
    let (w, h, data) = read_rgba16(path)?;
    let decode = |q: u16| q as f64 / 65535.0 * 2.0 - 1.0;
    let mut vectors = Vec::with_capacity(w * h);
    for px in data.chunks_exact(4) {
        if px[3] == 0 {
            vectors.push(None);
            continue;
        }
        let v = Vector3::new(decode(px[0]), decode(px[1]), decode(px[2]));
        let norm = v.norm();
        if norm == 0.0 {
            return Err(Error::format(path, 0, "valid pixel encodes a zero normal"));
        }
        vectors.push(Some(v / norm));
    }
    NormalMap::from_vectors(w, h, 0, vectors)
}

/// Writes one gradient channel as 16-bit gray+alpha: the value is multiplied
/// by `scale` (see [`GRADIENT_ANGLE_SCALE`] and [`GRADIENT_DEPTH_SCALE`]),
/// rounded, and clamped to 16 bits; alpha is 65535 where valid.
pub fn write_gradient_channel_png(
    path: &Path,
    channel: &Grid<f64>,
    valid: &Grid<bool>,
    scale: f64,
) -> Result<()> {
    if !channel.same_shape(valid) {
        return Err(Error::Dimension(
            "gradient channel and validity shapes differ".into(),
        ));
    }
    let mut data = Vec::with_capacity(2 * channel.as_slice().len());
    for (&v, &ok) in channel.as_slice().iter().zip(valid.as_slice()) {
        if ok {
            data.extend([(v * scale).round().clamp(0.0, 65535.0) as u16, u16::MAX]);
        } else {
            data.extend([0u16; 2]);
        }
    }
    write_gray_alpha16(path, channel.width(), channel.height(), &data)
}

/// Writes the three channels of one gradient set next to each other, suffixed
/// `-convex.png`, `-concave.png`, and `-dg.png` after `stem`.
pub fn write_gradient_set_pngs(dir: &Path, stem: &str, set: &GradientChannelSet) -> Result<()> {
    write_gradient_channel_png(
        &dir.join(format!("{stem}-convex.png")),
        &set.ng_convex,
        &set.valid,
        GRADIENT_ANGLE_SCALE,
    )?;
    write_gradient_channel_png(
        &dir.join(format!("{stem}-concave.png")),
        &set.ng_concave,
        &set.valid,
        GRADIENT_ANGLE_SCALE,
    )?;
    write_gradient_channel_png(
        &dir.join(format!("{stem}-dg.png")),
        &set.dg,
        &set.valid,
        GRADIENT_DEPTH_SCALE,
    )
}
