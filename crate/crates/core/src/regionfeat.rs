//! Superpixel moment accumulation and geometric region features.
//!
//! Features for a region (a set of superpixels) are assembled purely from
//! per-superpixel first/second moments, so any region over the same image
//! reuses one accumulation pass. The central contract: moment-combined
//! features match a direct per-pixel computation.

use crate::error::{Error, Result};
use crate::geocentric::{AngleMap, HeightMap};
use crate::geom::{DisparityMap, PointCloud};
use crate::grid::Grid;
use crate::math::sym_eigen2_values;

/// Facing-up threshold: angle with up below this, degrees.
pub const UP_MAX_ANGLE: f64 = 30.0;
/// Facing-down threshold: angle with up above this, degrees.
pub const DOWN_MIN_ANGLE: f64 = 150.0;
/// Vertical band: within this of 90 degrees.
pub const VERTICAL_BAND: f64 = 30.0;

/// Dense per-pixel superpixel labels; ids cover `[0, count)`.
#[derive(Debug, Clone)]
pub struct SuperpixelMap {
    labels: Grid<u32>,
    count: usize,
}

impl SuperpixelMap {
    pub fn new(labels: Grid<u32>) -> Result<Self> {
        let max = *labels.as_slice().iter().max().expect("grid is non-empty");
        let count = max as usize + 1;
        let mut seen = vec![false; count];
        for &l in labels.as_slice() {
            seen[l as usize] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidParam(format!(
                "superpixel ids are not dense: id {missing} is unused but {max} is present"
            )));
        }
        Ok(SuperpixelMap { labels, count })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.labels.width()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.labels.height()
    }

    /// Number of superpixels `S`; ids are `0..S`.
    #[inline]
    pub fn count(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn id(&self, x: usize, y: usize) -> u32 {
        *self.labels.get(x, y)
    }

    pub fn labels(&self) -> &Grid<u32> {
        &self.labels
    }

    /// Pixels per superpixel.
    pub fn sizes(&self) -> Vec<u64> {
        let mut sizes = vec![0u64; self.count];
        for &l in self.labels.as_slice() {
            sizes[l as usize] += 1;
        }
        sizes
    }
}

/// Moment accumulator for one scalar channel.
#[derive(Debug, Clone, Copy)]
pub struct ChannelMoments {
    pub count: u64,
    pub sum: f64,
    pub sumsq: f64,
    pub min: f64,
    pub max: f64,
}

impl Default for ChannelMoments {
    fn default() -> Self {
        ChannelMoments {
            count: 0,
            sum: 0.0,
            sumsq: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }
}

impl ChannelMoments {
    #[inline]
    fn add(&mut self, v: f64) {
        self.count += 1;
        self.sum += v;
        self.sumsq += v * v;
        self.min = self.min.min(v);
        self.max = self.max.max(v);
    }

    #[inline]
    fn merge(&mut self, other: &ChannelMoments) {
        self.count += other.count;
        self.sum += other.sum;
        self.sumsq += other.sumsq;
        self.min = self.min.min(other.min);
        self.max = self.max.max(other.max);
    }

    fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }

    /// Population standard deviation from raw moments.
    fn std(&self) -> f64 {
        let m = self.mean();
        (self.sumsq / self.count as f64 - m * m).max(0.0).sqrt()
    }
}

pub const CH_DISPARITY: usize = 0;
pub const CH_HEIGHT: usize = 1;
pub const CH_ANGLE: usize = 2;
pub const CH_X: usize = 3;
pub const CH_Y: usize = 4;
pub const CH_Z: usize = 5;
const CHANNELS: usize = 6;

/// Per-superpixel moments for the six scalar channels, the top-view cross
/// moment, and facing-classification counts.
#[derive(Debug, Clone)]
pub struct SuperpixelAggregates {
    channels: Vec<[ChannelMoments; CHANNELS]>,
    /// Sum of X*Z over valid world points, per superpixel.
    cross_xz: Vec<f64>,
    facing_up: Vec<u64>,
    facing_down: Vec<u64>,
    facing_vertical: Vec<u64>,
}

impl SuperpixelAggregates {
    pub fn superpixel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn moments(&self, superpixel: u32, channel: usize) -> &ChannelMoments {
        &self.channels[superpixel as usize][channel]
    }
}

/// Accumulates per-superpixel channel moments over one image.
///
/// `world` must be the gravity-aligned cloud (X, Z horizontal; Y up). Each
/// channel contributes only where it is valid; facing counts use the angle
/// channel's validity.
pub fn accumulate(
    disparity: &DisparityMap,
    height: &HeightMap,
    angle: &AngleMap,
    world: &PointCloud,
    spmap: &SuperpixelMap,
) -> Result<SuperpixelAggregates> {
    let (w, h) = (spmap.width(), spmap.height());
    let dims_ok = disparity.field.width() == w
        && disparity.field.height() == h
        && height.field.width() == w
        && height.field.height() == h
        && angle.field.width() == w
        && angle.field.height() == h
        && world.width() == w
        && world.height() == h;
    if !dims_ok {
        return Err(Error::Dimension(format!(
            "channel dimensions do not all match the {w}x{h} superpixel map"
        )));
    }
    let s = spmap.count();
    let mut agg = SuperpixelAggregates {
        channels: vec![[ChannelMoments::default(); CHANNELS]; s],
        cross_xz: vec![0.0; s],
        facing_up: vec![0u64; s],
        facing_down: vec![0u64; s],
        facing_vertical: vec![0u64; s],
    };
    for y in 0..h {
        for x in 0..w {
            let sp = spmap.id(x, y) as usize;
            let ch = &mut agg.channels[sp];
            if let Some(v) = disparity.field.at(x, y) {
                ch[CH_DISPARITY].add(v);
            }
            if let Some(v) = height.field.at(x, y) {
                ch[CH_HEIGHT].add(v);
            }
            if let Some(a) = angle.field.at(x, y) {
                ch[CH_ANGLE].add(a);
                if a < UP_MAX_ANGLE {
                    agg.facing_up[sp] += 1;
                }
                if a > DOWN_MIN_ANGLE {
                    agg.facing_down[sp] += 1;
                }
                if (a - 90.0).abs() <= VERTICAL_BAND {
                    agg.facing_vertical[sp] += 1;
                }
            }
            if let Some(p) = world.point(x, y) {
                ch[CH_X].add(p.x);
                ch[CH_Y].add(p.y);
                ch[CH_Z].add(p.z);
                agg.cross_xz[sp] += p.x * p.z;
            }
        }
    }
    Ok(agg)
}

/// A set of superpixel ids (deduplicated, sorted).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    ids: Vec<u32>,
}

impl Region {
    pub fn new(mut ids: Vec<u32>, superpixel_count: usize) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::EmptyInput("region has no superpixels".into()));
        }
        ids.sort_unstable();
        ids.dedup();
        if let Some(&bad) = ids.iter().find(|&&id| id as usize >= superpixel_count) {
            return Err(Error::InvalidParam(format!(
                "superpixel id {bad} out of range (count {superpixel_count})"
            )));
        }
        Ok(Region { ids })
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }
}

/// Names of the features, in vector order.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "disparity_mean",
    "disparity_std",
    "height_mean",
    "height_std",
    "angle_mean",
    "angle_std",
    "x_mean",
    "x_std",
    "y_mean",
    "y_std",
    "z_mean",
    "z_std",
    "x_extent",
    "y_extent",
    "z_extent",
    "height_min",
    "height_max",
    "frac_vertical",
    "frac_up",
    "frac_down",
    "topview_std_min",
    "topview_std_max",
];

pub const FEATURE_COUNT: usize = 22;

/// Geometric features of one region, plus validity diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricFeatureVector {
    pub values: [f64; FEATURE_COUNT],
    /// Pixels contributing to the geometric channels (valid depth).
    pub depth_valid: u64,
    /// Pixels contributing to the angle channel and facing fractions.
    pub angle_valid: u64,
}

impl GeometricFeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        FEATURE_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| self.values[i])
    }
}

/// Combines superpixel aggregates into the region's feature vector.
///
/// Errors if the region has no valid-depth pixels or no valid-angle pixels
/// (means and fractions would be undefined).
pub fn region_features(
    region: &Region,
    agg: &SuperpixelAggregates,
) -> Result<GeometricFeatureVector> {
    if let Some(&bad) = region
        .ids()
        .iter()
        .find(|&&id| id as usize >= agg.superpixel_count())
    {
        return Err(Error::InvalidParam(format!(
            "superpixel id {bad} out of range (count {})",
            agg.superpixel_count()
        )));
    }
    let mut total = [ChannelMoments::default(); CHANNELS];
    let mut cross_xz = 0.0;
    let mut up = 0u64;
    let mut down = 0u64;
    let mut vertical = 0u64;
    for &id in region.ids() {
        let sp = id as usize;
        for c in 0..CHANNELS {
            total[c].merge(&agg.channels[sp][c]);
        }
        cross_xz += agg.cross_xz[sp];
        up += agg.facing_up[sp];
        down += agg.facing_down[sp];
        vertical += agg.facing_vertical[sp];
    }
    let depth_valid = total[CH_X].count;
    let angle_valid = total[CH_ANGLE].count;
    if depth_valid == 0 {
        return Err(Error::InsufficientData(
            "region has no valid-depth pixels".into(),
        ));
    }
    if angle_valid == 0 {
        return Err(Error::InsufficientData(
            "region has no valid-angle pixels".into(),
        ));
    }

    let n = depth_valid as f64;
    let mean_x = total[CH_X].mean();
    let mean_z = total[CH_Z].mean();
    let cov_xx = (total[CH_X].sumsq / n - mean_x * mean_x).max(0.0);
    let cov_zz = (total[CH_Z].sumsq / n - mean_z * mean_z).max(0.0);
    let cov_xz = cross_xz / n - mean_x * mean_z;
    let [tv_lo, tv_hi] = sym_eigen2_values(cov_xx, cov_xz, cov_zz);

    let na = angle_valid as f64;
    let values = [
        total[CH_DISPARITY].mean(),
        total[CH_DISPARITY].std(),
        total[CH_HEIGHT].mean(),
        total[CH_HEIGHT].std(),
        total[CH_ANGLE].mean(),
        total[CH_ANGLE].std(),
        mean_x,
        total[CH_X].std(),
        total[CH_Y].mean(),
        total[CH_Y].std(),
        mean_z,
        total[CH_Z].std(),
        total[CH_X].max - total[CH_X].min,
        total[CH_Y].max - total[CH_Y].min,
        total[CH_Z].max - total[CH_Z].min,
        total[CH_HEIGHT].min,
        total[CH_HEIGHT].max,
        vertical as f64 / na,
        up as f64 / na,
        down as f64 / na,
        tv_lo.max(0.0).sqrt(),
        tv_hi.max(0.0).sqrt(),
    ];
    Ok(GeometricFeatureVector {
        values,
        depth_valid,
        angle_valid,
    })
}
