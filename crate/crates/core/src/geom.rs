//! Pinhole camera model, depth images, point clouds, and stereo disparity.
//!
//! Camera frame: X right, Y down, Z forward (along the optical axis). Depth
//! is the per-pixel Z coordinate in meters; missing measurements are carried
//! as invalid pixels and never interpolated.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};

/// Stereo baseline (meters) used when a dataset does not specify one.
pub const DEFAULT_BASELINE: f64 = 0.075;

/// Pinhole intrinsics with the stereo baseline used for disparity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    /// Focal length in pixels along x.
    pub fx: f64,
    /// Focal length in pixels along y.
    pub fy: f64,
    /// Principal point x in pixels.
    pub cx: f64,
    /// Principal point y in pixels.
    pub cy: f64,
    /// Stereo baseline in meters.
    pub baseline: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, baseline: f64) -> Result<Self> {
        let k = CameraIntrinsics {
            fx,
            fy,
            cx,
            cy,
            baseline,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx.is_finite() && self.fx > 0.0) || !(self.fy.is_finite() && self.fy > 0.0) {
            return Err(Error::InvalidParam(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if !self.cx.is_finite() || !self.cy.is_finite() {
            return Err(Error::InvalidParam(format!(
                "principal point must be finite, got cx={} cy={}",
                self.cx, self.cy
            )));
        }
        if !(self.baseline.is_finite() && self.baseline > 0.0) {
            return Err(Error::InvalidParam(format!(
                "baseline must be positive, got {}",
                self.baseline
            )));
        }
        Ok(())
    }

    /// Projects a camera-frame point to pixel coordinates. Requires `z > 0`.
    pub fn project(&self, p: &Vector3<f64>) -> (f64, f64) {
        (
            self.cx + self.fx * p.x / p.z,
            self.cy + self.fy * p.y / p.z,
        )
    }
}

/// Metric depth image. Valid pixels hold positive, finite meters.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    field: ScalarField,
}

impl DepthImage {
    pub fn new(field: ScalarField) -> Result<Self> {
        for (x, y, z) in field.iter_valid() {
            if !(z.is_finite() && z > 0.0) {
                return Err(Error::InvalidParam(format!(
                    "depth at ({x}, {y}) must be positive and finite, got {z}"
                )));
            }
        }
        Ok(DepthImage { field })
    }

    /// All pixels invalid.
    pub fn empty(width: usize, height: usize) -> Result<Self> {
        Ok(DepthImage {
            field: ScalarField::invalid(width, height)?,
        })
    }

    /// Builds from per-pixel optional depths in row-major order.
    pub fn from_options(width: usize, height: usize, depths: Vec<Option<f64>>) -> Result<Self> {
        if depths.len() != width * height {
            return Err(Error::Dimension(format!(
                "expected {} samples for {width}x{height}, got {}",
                width * height,
                depths.len()
            )));
        }
        let mut field = ScalarField::invalid(width, height)?;
        for (i, d) in depths.into_iter().enumerate() {
            if let Some(z) = d {
                field.set(i % width, i / width, z);
            }
        }
        DepthImage::new(field)
    }

    /// Builds from 16-bit millimeter samples where 0 marks a missing value.
    pub fn from_millimeters(width: usize, height: usize, mm: &[u16]) -> Result<Self> {
        if mm.len() != width * height {
            return Err(Error::Dimension(format!(
                "expected {} samples for {width}x{height}, got {}",
                width * height,
                mm.len()
            )));
        }
        let mut field = ScalarField::invalid(width, height)?;
        for y in 0..height {
            for x in 0..width {
                let v = mm[y * width + x];
                if v != 0 {
                    field.set(x, y, v as f64 / 1000.0);
                }
            }
        }
        Ok(DepthImage { field })
    }

    /// Converts to 16-bit millimeters; invalid pixels become 0. Valid depths
    /// round to the nearest millimeter and clamp to `[1, 65535]`.
    pub fn to_millimeters(&self) -> Vec<u16> {
        let (w, h) = (self.width(), self.height());
        let mut out = vec![0u16; w * h];
        for y in 0..h {
            for x in 0..w {
                if let Some(z) = self.field.at(x, y) {
                    let mm = (z * 1000.0).round().clamp(1.0, 65535.0);
                    out[y * w + x] = mm as u16;
                }
            }
        }
        out
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.field.width()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.field.height()
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> Option<f64> {
        self.field.at(x, y)
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.field.is_valid(x, y)
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn valid_count(&self) -> usize {
        self.field.valid_count()
    }
}

/// Per-pixel 3D points in the camera frame; Z equals the source depth.
#[derive(Debug, Clone)]
pub struct PointCloud {
    width: usize,
    height: usize,
    points: Vec<Vector3<f64>>,
    valid: Grid<bool>,
}

impl PointCloud {
    /// Builds from per-pixel optional points in row-major order.
    pub fn from_options(
        width: usize,
        height: usize,
        points: Vec<Option<Vector3<f64>>>,
    ) -> Result<Self> {
        if points.len() != width * height {
            return Err(Error::Dimension(format!(
                "expected {} points for {width}x{height}, got {}",
                width * height,
                points.len()
            )));
        }
        let mut data = vec![Vector3::zeros(); points.len()];
        let mut valid = Grid::filled(width, height, false)?;
        for (i, p) in points.into_iter().enumerate() {
            if let Some(p) = p {
                data[i] = p;
                valid.as_mut_slice()[i] = true;
            }
        }
        Ok(PointCloud {
            width,
            height,
            points: data,
            valid,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        *self.valid.get(x, y)
    }

    #[inline]
    pub fn point(&self, x: usize, y: usize) -> Option<Vector3<f64>> {
        if self.is_valid(x, y) {
            Some(self.points[y * self.width + x])
        } else {
            None
        }
    }

    /// Point without the validity check; zero vector at invalid pixels.
    #[inline]
    pub fn raw_point(&self, x: usize, y: usize) -> Vector3<f64> {
        self.points[y * self.width + x]
    }

    pub fn validity(&self) -> &Grid<bool> {
        &self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.valid.as_slice().iter().filter(|v| **v).count()
    }

    pub fn iter_valid(&self) -> impl Iterator<Item = (usize, usize, Vector3<f64>)> + '_ {
        let w = self.width;
        self.valid
            .as_slice()
            .iter()
            .enumerate()
            .filter(|(_, v)| **v)
            .map(move |(i, _)| (i % w, i / w, self.points[i]))
    }

    /// Applies `f` to every point, preserving validity. The result is a plain
    /// point container; Z need not match any depth image afterwards.
    pub fn map_points(&self, f: impl Fn(&Vector3<f64>) -> Vector3<f64>) -> PointCloud {
        PointCloud {
            width: self.width,
            height: self.height,
            points: self.points.iter().map(&f).collect(),
            valid: self.valid.clone(),
        }
    }
}

/// Back-projects a depth image through the pinhole model.
pub fn backproject(depth: &DepthImage, k: &CameraIntrinsics) -> Result<PointCloud> {
    k.validate()?;
    let (w, h) = (depth.width(), depth.height());
    let mut points = vec![Vector3::zeros(); w * h];
    let mut valid = Grid::filled(w, h, false)?;
    for y in 0..h {
        for x in 0..w {
            if let Some(z) = depth.at(x, y) {
                points[y * w + x] = Vector3::new(
                    (x as f64 - k.cx) * z / k.fx,
                    (y as f64 - k.cy) * z / k.fy,
                    z,
                );
                *valid.get_mut(x, y) = true;
            }
        }
    }
    Ok(PointCloud {
        width: w,
        height: h,
        points,
        valid,
    })
}

/// Per-pixel stereo disparity in pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap {
    pub field: ScalarField,
}

/// Disparity from depth: `d = baseline * fx / Z`.
pub fn depth_to_disparity(depth: &DepthImage, k: &CameraIntrinsics) -> Result<DisparityMap> {
    k.validate()?;
    let mut field = ScalarField::invalid(depth.width(), depth.height())?;
    for y in 0..depth.height() {
        for x in 0..depth.width() {
            if let Some(z) = depth.at(x, y) {
                field.set(x, y, k.baseline * k.fx / z);
            }
        }
    }
    Ok(DisparityMap { field })
}

/// Depth from disparity: `Z = baseline * fx / d`. Non-positive disparities
/// become invalid pixels.
pub fn disparity_to_depth(disp: &DisparityMap, k: &CameraIntrinsics) -> Result<DepthImage> {
    k.validate()?;
    let mut field = ScalarField::invalid(disp.field.width(), disp.field.height())?;
    for y in 0..disp.field.height() {
        for x in 0..disp.field.width() {
            if let Some(d) = disp.field.at(x, y) {
                if d > 0.0 {
                    field.set(x, y, k.baseline * k.fx / d);
                }
            }
        }
    }
    DepthImage::new(field)
}
