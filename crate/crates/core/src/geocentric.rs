//! Gravity estimation from surface normals and the geocentric channels built
//! on top of it: disparity, height above ground, and angle with gravity,
//! plus their calibrated 8-bit encoding.

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};

use crate::error::{Error, Result};
use crate::geom::{
    backproject, depth_to_disparity, CameraIntrinsics, DepthImage, DisparityMap, PointCloud,
};
use crate::grid::ScalarField;
use crate::math::{percentile_sorted, round_half_up, sym_eigen3};
use crate::normals::{estimate_normals, NormalMap};

/// Percentile of up-coordinates used as the ground reference.
pub const FLOOR_PERCENTILE: f64 = 1.0;

/// Percentiles (low, high) used to calibrate channel ranges.
pub const DEFAULT_CALIBRATION_PERCENTILES: (f64, f64) = (0.5, 99.5);

/// Iterative gravity refinement settings.
#[derive(Debug, Clone)]
pub struct GravityParams {
    /// Stages of (threshold in degrees, iteration count), run in order.
    pub schedule: Vec<(f64, usize)>,
    /// Minimum number of valid normals required to attempt estimation.
    pub min_valid_normals: usize,
}

impl Default for GravityParams {
    fn default() -> Self {
        GravityParams {
            schedule: vec![(45.0, 3), (15.0, 3)],
            min_valid_normals: 100,
        }
    }
}

/// Estimated gravity direction in camera coordinates.
#[derive(Debug, Clone)]
pub struct GravityEstimate {
    /// Unit vector pointing down (along gravity), with non-negative camera-Y
    /// component.
    pub down: Vector3<f64>,
    /// Fraction of valid normals within the final stage's threshold of being
    /// aligned with or orthogonal to `down`.
    pub aligned_fraction: f64,
}

/// Estimates gravity with default settings. See [`estimate_gravity_with`].
pub fn estimate_gravity(normals: &NormalMap) -> Result<GravityEstimate> {
    estimate_gravity_with(normals, &GravityParams::default())
}

/// Iteratively refines a gravity direction, starting from the camera vertical
/// `(0, 1, 0)`.
///
/// Each iteration classifies normals against the current estimate `g` with the
/// stage threshold `t`: nearly parallel (`|n . g| > cos t`) or nearly
/// orthogonal (`|n . g| < sin t`). The update is the eigenvector for the
/// smallest eigenvalue of `sum_perp n n^T - sum_par n n^T`, sign-fixed to keep
/// a non-negative camera-Y component.
pub fn estimate_gravity_with(
    normals: &NormalMap,
    params: &GravityParams,
) -> Result<GravityEstimate> {
    if params.schedule.is_empty() {
        return Err(Error::InvalidParam("empty refinement schedule".into()));
    }
    for &(deg, _) in &params.schedule {
        if !(deg > 0.0 && deg < 90.0) {
            return Err(Error::InvalidParam(format!(
                "stage threshold must be in (0, 90) degrees, got {deg}"
            )));
        }
    }
    let ns: Vec<Vector3<f64>> = normals.iter_valid().map(|(_, _, n)| n).collect();
    if ns.len() < params.min_valid_normals {
        return Err(Error::InsufficientData(format!(
            "gravity estimation needs at least {} valid normals, got {}",
            params.min_valid_normals,
            ns.len()
        )));
    }

    let mut g = Vector3::y();
    for &(deg, iters) in &params.schedule {
        let (cos_t, sin_t) = {
            let t = deg.to_radians();
            (t.cos(), t.sin())
        };
        for _ in 0..iters {
            let mut m = Matrix3::zeros();
            let mut members = 0usize;
            for n in &ns {
                let a = n.dot(&g).abs();
                if a > cos_t {
                    m -= n * n.transpose();
                    members += 1;
                } else if a < sin_t {
                    m += n * n.transpose();
                    members += 1;
                }
            }
            if members == 0 {
                return Err(Error::Degenerate(format!(
                    "no normals within {deg} degrees of parallel or orthogonal"
                )));
            }
            let eig = sym_eigen3(&m);
            g = eig.vectors[0];
            if g.y < 0.0 {
                g = -g;
            }
        }
    }

    let (cos_t, sin_t) = {
        let t = params.schedule.last().unwrap().0.to_radians();
        (t.cos(), t.sin())
    };
    let aligned = ns
        .iter()
        .filter(|n| {
            let a = n.dot(&g).abs();
            a > cos_t || a < sin_t
        })
        .count();
    Ok(GravityEstimate {
        down: g,
        aligned_fraction: aligned as f64 / ns.len() as f64,
    })
}

/// Per-pixel angle between the surface normal and the up direction, degrees.
#[derive(Debug, Clone)]
pub struct AngleMap {
    pub field: ScalarField,
}

/// Per-pixel height above the ground reference, meters (may be negative).
#[derive(Debug, Clone)]
pub struct HeightMap {
    pub field: ScalarField,
}

/// Angle in degrees between each valid normal and up (`-down`): 0 for floors,
/// 90 for walls, 180 for ceilings.
pub fn angle_with_gravity(normals: &NormalMap, down: &Vector3<f64>) -> Result<AngleMap> {
    let up = -down;
    let mut field = ScalarField::invalid(normals.width(), normals.height())?;
    for (x, y, n) in normals.iter_valid() {
        let dot = n.dot(&up).clamp(-1.0, 1.0);
        field.set(x, y, dot.acos().to_degrees());
    }
    Ok(AngleMap { field })
}

/// Height of each valid point above the ground reference.
///
/// Up-coordinates are `(-down) . p`; the reference is their
/// [`FLOOR_PERCENTILE`]th percentile, so points below it get negative heights.
/// A cloud with no valid points yields an all-invalid map.
pub fn height_above_ground(cloud: &PointCloud, down: &Vector3<f64>) -> Result<HeightMap> {
    height_above_ground_with(cloud, down, FLOOR_PERCENTILE)
}

pub fn height_above_ground_with(
    cloud: &PointCloud,
    down: &Vector3<f64>,
    floor_percentile: f64,
) -> Result<HeightMap> {
    if !(0.0..=100.0).contains(&floor_percentile) {
        return Err(Error::InvalidParam(format!(
            "floor percentile must be in [0, 100], got {floor_percentile}"
        )));
    }
    let up = -down;
    let mut field = ScalarField::invalid(cloud.width(), cloud.height())?;
    let mut ups: Vec<f64> = cloud.iter_valid().map(|(_, _, p)| up.dot(&p)).collect();
    if ups.is_empty() {
        return Ok(HeightMap { field });
    }
    ups.sort_by(f64::total_cmp);
    let floor = percentile_sorted(&ups, floor_percentile);
    for (x, y, p) in cloud.iter_valid() {
        field.set(x, y, up.dot(&p) - floor);
    }
    Ok(HeightMap { field })
}

/// Proper rotation taking camera coordinates to a gravity-aligned frame with
/// `+Y` up (along `-down`).
pub fn world_rotation(down: &Vector3<f64>) -> Rotation3<f64> {
    let align = Rotation3::rotation_between(down, &Vector3::y()).unwrap_or_else(|| {
        // down is antiparallel to +Y: any half-turn through an orthogonal axis.
        Rotation3::from_axis_angle(&Unit::new_unchecked(Vector3::x()), std::f64::consts::PI)
    });
    let flip = Rotation3::from_axis_angle(&Unit::new_unchecked(Vector3::x()), std::f64::consts::PI);
    flip * align
}

/// Re-expresses a camera-frame cloud in the gravity-aligned frame of
/// [`world_rotation`]; the Y coordinate of the result increases upward.
pub fn to_gravity_frame(cloud: &PointCloud, down: &Vector3<f64>) -> PointCloud {
    let rot = world_rotation(down);
    cloud.map_points(|p| rot * p)
}

/// Calibrated value range for one channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelRange {
    pub low: f64,
    pub high: f64,
}

impl ChannelRange {
    pub fn new(low: f64, high: f64) -> Result<Self> {
        if !(low.is_finite() && high.is_finite() && low < high) {
            return Err(Error::InvalidParam(format!(
                "channel range must satisfy low < high, got [{low}, {high}]"
            )));
        }
        Ok(ChannelRange { low, high })
    }

    /// Clamps into the range and maps linearly onto 0..=255, rounding half up.
    pub fn encode(&self, v: f64) -> u8 {
        let t = (v.clamp(self.low, self.high) - self.low) / (self.high - self.low);
        round_half_up(255.0 * t) as u8
    }
}

/// Per-channel ranges for the 8-bit encoding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub disparity: ChannelRange,
    pub height: ChannelRange,
    pub angle: ChannelRange,
}

/// Pools valid channel values over a set of images, then takes percentiles.
#[derive(Debug, Clone)]
pub struct CalibrationAccumulator {
    lo_pct: f64,
    hi_pct: f64,
    disparity: Vec<f64>,
    height: Vec<f64>,
    angle: Vec<f64>,
    images: usize,
}

impl CalibrationAccumulator {
    pub fn new(percentiles: (f64, f64)) -> Result<Self> {
        let (lo, hi) = percentiles;
        if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo < hi && hi <= 100.0) {
            return Err(Error::InvalidParam(format!(
                "percentiles must satisfy 0 <= low < high <= 100, got ({lo}, {hi})"
            )));
        }
        Ok(CalibrationAccumulator {
            lo_pct: lo,
            hi_pct: hi,
            disparity: Vec::new(),
            height: Vec::new(),
            angle: Vec::new(),
            images: 0,
        })
    }

    pub fn add_image(&mut self, disparity: &DisparityMap, height: &HeightMap, angle: &AngleMap) {
        self.disparity
            .extend(disparity.field.iter_valid().map(|(_, _, v)| v));
        self.height
            .extend(height.field.iter_valid().map(|(_, _, v)| v));
        self.angle
            .extend(angle.field.iter_valid().map(|(_, _, v)| v));
        self.images += 1;
    }

    pub fn finish(self) -> Result<Calibration> {
        if self.images == 0 {
            return Err(Error::EmptyInput("no images added to calibration".into()));
        }
        let range = |name: &str, mut vals: Vec<f64>| -> Result<ChannelRange> {
            if vals.is_empty() {
                return Err(Error::EmptyInput(format!(
                    "no valid {name} values to calibrate"
                )));
            }
            vals.sort_by(f64::total_cmp);
            let low = percentile_sorted(&vals, self.lo_pct);
            let high = percentile_sorted(&vals, self.hi_pct);
            if low >= high {
                return Err(Error::Degenerate(format!(
                    "{name} channel is constant over the calibration set \
                     (percentiles [{low}, {high}])"
                )));
            }
            ChannelRange::new(low, high)
        };
        Ok(Calibration {
            disparity: range("disparity", self.disparity)?,
            height: range("height", self.height)?,
            angle: range("angle", self.angle)?,
        })
    }
}

/// One-shot calibration over a set of per-image channel triples.
pub fn fit_calibration(
    images: &[(&DisparityMap, &HeightMap, &AngleMap)],
    percentiles: (f64, f64),
) -> Result<Calibration> {
    let mut acc = CalibrationAccumulator::new(percentiles)?;
    for (d, h, a) in images {
        acc.add_image(d, h, a);
    }
    acc.finish()
}

/// 8-bit image with interleaved (disparity, height, angle) channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HhaImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl HhaImage {
    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != 3 * width * height {
            return Err(Error::Dimension(format!(
                "expected {} interleaved bytes for {width}x{height}, got {}",
                3 * width * height,
                data.len()
            )));
        }
        Ok(HhaImage {
            width,
            height,
            data,
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
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Interleaved channel bytes, row-major.
    pub fn data(&self) -> &[u8] {
        &self.data
    }
}

/// Encodes the three channels into 8 bits each with the calibrated ranges.
/// A pixel is encoded only where all three inputs are valid; anything else
/// becomes `(0, 0, 0)`.
pub fn encode_hha(
    disparity: &DisparityMap,
    height: &HeightMap,
    angle: &AngleMap,
    cal: &Calibration,
) -> Result<HhaImage> {
    let (w, h) = (disparity.field.width(), disparity.field.height());
    if !disparity.field.same_shape(&height.field) || !disparity.field.same_shape(&angle.field) {
        return Err(Error::Dimension(format!(
            "channel shapes differ: disparity {w}x{h}, height {}x{}, angle {}x{}",
            height.field.width(),
            height.field.height(),
            angle.field.width(),
            angle.field.height()
        )));
    }
    let mut data = vec![0u8; 3 * w * h];
    for y in 0..h {
        for x in 0..w {
            let (Some(d), Some(ht), Some(a)) = (
                disparity.field.at(x, y),
                height.field.at(x, y),
                angle.field.at(x, y),
            ) else {
                continue;
            };
            let i = 3 * (y * w + x);
            data[i] = cal.disparity.encode(d);
            data[i + 1] = cal.height.encode(ht);
            data[i + 2] = cal.angle.encode(a);
        }
    }
    HhaImage::from_raw(w, h, data)
}

/// Everything derived from one depth image on the way to the encoded channels.
#[derive(Debug, Clone)]
pub struct DepthDerived {
    pub cloud: PointCloud,
    pub normals: NormalMap,
    /// Gravity direction actually used (the camera vertical if estimation
    /// failed; see `gravity`).
    pub down: Vector3<f64>,
    /// The estimate, or the error message that forced the vertical fallback.
    pub gravity: std::result::Result<GravityEstimate, String>,
    pub disparity: DisparityMap,
    pub height: HeightMap,
    pub angle: AngleMap,
}

/// Runs the full per-image chain: backprojection, normals, gravity (with a
/// camera-vertical fallback on estimation failure), and the three channels.
pub fn derive_channels(
    depth: &DepthImage,
    k: &CameraIntrinsics,
    normal_radius: usize,
) -> Result<DepthDerived> {
    let cloud = backproject(depth, k)?;
    let normals = estimate_normals(&cloud, normal_radius)?;
    let gravity = estimate_gravity(&normals).map_err(|e| e.to_string());
    let down = gravity
        .as_ref()
        .map(|g| g.down)
        .unwrap_or_else(|_| Vector3::y());
    let disparity = depth_to_disparity(depth, k)?;
    let height = height_above_ground(&cloud, &down)?;
    let angle = angle_with_gravity(&normals, &down)?;
    Ok(DepthDerived {
        cloud,
        normals,
        down,
        gravity,
        disparity,
        height,
        angle,
    })
}
