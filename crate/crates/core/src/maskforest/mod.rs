//! Decision forests that label foreground inside detection windows.
//!
//! A detection window is resampled onto a fixed 50x50 grid; every grid cell
//! is a classification point whose features are read, at question-dependent
//! offsets, from a per-image channel stack. Predicted cell confidences are
//! unwarped to window pixels, averaged over superpixels, and thresholded
//! into an instance mask.

mod predict;
mod train;

pub use predict::{
    cap_detections, predict_confidence, predict_mask, predict_superpixel_confidence,
    threshold_mask, InstanceMask,
};
pub use train::{train_forest, select_threshold, EvalImage, TrainParams};

use crate::error::{Error, Result};
use crate::eval::{box_iou, BoundingBox, Detection};
use crate::geocentric::{AngleMap, HeightMap, HhaImage};
use crate::grid::{Grid, ScalarField};
use crate::normals::NormalMap;
use crate::regionfeat::SuperpixelMap;

/// Side length of the warped detection grid.
pub const GRID: usize = 50;
/// Cells per warped window.
pub const CELLS: usize = GRID * GRID;

/// Image-derived channels, in stack order.
pub const IMAGE_CHANNELS: [&str; 10] = [
    "disparity",
    "height",
    "angle",
    "normal_x",
    "normal_y",
    "normal_z",
    "intensity",
    "hha_0",
    "hha_1",
    "hha_2",
];
/// Grid-coordinate channels appended after the image channels when warping.
pub const LOCATION_CHANNELS: [&str; 2] = ["grid_x", "grid_y"];
/// Channels seen by split questions.
pub const CHANNEL_COUNT: usize = IMAGE_CHANNELS.len() + LOCATION_CHANNELS.len();

/// Names of all question channels in stack order.
pub fn channel_names() -> Vec<String> {
    IMAGE_CHANNELS
        .iter()
        .chain(LOCATION_CHANNELS.iter())
        .map(|s| s.to_string())
        .collect()
}

/// Dense per-image feature stack. Invalid pixels are filled with the image's
/// per-channel mean so resampling never mixes in sentinels.
#[derive(Debug, Clone)]
pub struct FeatureImage {
    width: usize,
    height: usize,
    channels: Vec<Grid<f64>>,
}

fn filled_channel(values: impl Iterator<Item = Option<f64>>, w: usize, h: usize) -> Grid<f64> {
    let raw: Vec<Option<f64>> = values.collect();
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in raw.iter().flatten() {
        sum += v;
        n += 1;
    }
    let fill = if n == 0 { 0.0 } else { sum / n as f64 };
    let data: Vec<f64> = raw.into_iter().map(|v| v.unwrap_or(fill)).collect();
    Grid::from_vec(w, h, data).expect("channel shape")
}

impl FeatureImage {
    /// Assembles the 10-channel stack. All inputs must share one shape;
    /// `intensity` defaults to a constant 0.5 channel when absent.
    pub fn new(
        disparity: &ScalarField,
        height: &HeightMap,
        angle: &AngleMap,
        normals: &NormalMap,
        intensity: Option<&Grid<f64>>,
        hha: &HhaImage,
    ) -> Result<Self> {
        let (w, h) = (disparity.width(), disparity.height());
        let same = height.field.width() == w
            && height.field.height() == h
            && angle.field.width() == w
            && angle.field.height() == h
            && normals.width() == w
            && normals.height() == h
            && hha.width() == w
            && hha.height() == h
            && intensity.map_or(true, |i| i.width() == w && i.height() == h);
        if !same {
            return Err(Error::Dimension(
                "feature channels disagree on image shape".into(),
            ));
        }
        let coords = || (0..h).flat_map(move |y| (0..w).map(move |x| (x, y)));
        let mut channels = Vec::with_capacity(IMAGE_CHANNELS.len());
        channels.push(filled_channel(
            coords().map(|(x, y)| disparity.at(x, y)),
            w,
            h,
        ));
        channels.push(filled_channel(
            coords().map(|(x, y)| height.field.at(x, y)),
            w,
            h,
        ));
        channels.push(filled_channel(
            coords().map(|(x, y)| angle.field.at(x, y)),
            w,
            h,
        ));
        for axis in 0..3 {
            channels.push(filled_channel(
                coords().map(|(x, y)| normals.normal(x, y).map(|n| n[axis])),
                w,
                h,
            ));
        }
        channels.push(match intensity {
            Some(i) => i.clone(),
            None => Grid::filled(w, h, 0.5)?,
        });
        for c in 0..3 {
            channels.push(filled_channel(
                coords().map(|(x, y)| Some(hha.pixel(x, y)[c] as f64)),
                w,
                h,
            ));
        }
        Ok(FeatureImage {
            width: w,
            height: h,
            channels,
        })
    }

    /// Stack from raw dense channels; mainly for tests and tools.
    pub fn from_channels(width: usize, height: usize, channels: Vec<Grid<f64>>) -> Result<Self> {
        if channels.len() != IMAGE_CHANNELS.len() {
            return Err(Error::Dimension(format!(
                "expected {} channels, got {}",
                IMAGE_CHANNELS.len(),
                channels.len()
            )));
        }
        if channels
            .iter()
            .any(|c| c.width() != width || c.height() != height)
        {
            return Err(Error::Dimension(
                "feature channels disagree on image shape".into(),
            ));
        }
        Ok(FeatureImage {
            width,
            height,
            channels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> &[Grid<f64>] {
        &self.channels
    }

    /// Bilinear sample of one channel at continuous image coordinates, where
    /// pixel (x, y) covers `[x, x+1) x [y, y+1)` and holds its value at the
    /// cell center. Samples outside the image clamp to the border.
    pub fn sample(&self, channel: usize, u: f64, v: f64) -> f64 {
        bilinear(&self.channels[channel], u, v)
    }
}

pub(crate) fn bilinear(grid: &Grid<f64>, u: f64, v: f64) -> f64 {
    let a = u - 0.5;
    let b = v - 0.5;
    let x0 = a.floor();
    let y0 = b.floor();
    let fx = a - x0;
    let fy = b - y0;
    let w = grid.width() as i64;
    let h = grid.height() as i64;
    let cx = |x: i64| x.clamp(0, w - 1) as usize;
    let cy = |y: i64| y.clamp(0, h - 1) as usize;
    let (x0, y0) = (x0 as i64, y0 as i64);
    let g = |x: i64, y: i64| *grid.get(cx(x), cy(y));
    (1.0 - fy) * ((1.0 - fx) * g(x0, y0) + fx * g(x0 + 1, y0))
        + fy * ((1.0 - fx) * g(x0, y0 + 1) + fx * g(x0 + 1, y0 + 1))
}

/// Feature channels of one detection window resampled onto the grid:
/// the image channels followed by the two location channels.
#[derive(Debug, Clone)]
pub struct WarpedFeatures {
    pub channels: Vec<Grid<f64>>,
}

impl WarpedFeatures {
    /// Value of `channel` at grid cell `(gx, gy)` offset by `(dx, dy)`;
    /// probes that leave the grid read `padding[channel]`.
    #[inline]
    pub fn probe(
        &self,
        channel: usize,
        gx: usize,
        gy: usize,
        dx: i32,
        dy: i32,
        padding: &[f64],
    ) -> f64 {
        let x = gx as i64 + dx as i64;
        let y = gy as i64 + dy as i64;
        if x < 0 || y < 0 || x >= GRID as i64 || y >= GRID as i64 {
            padding[channel]
        } else {
            *self.channels[channel].get(x as usize, y as usize)
        }
    }
}

/// A training example: warped features plus the warped target mask.
#[derive(Debug, Clone)]
pub struct WarpedExample {
    pub features: WarpedFeatures,
    pub mask: Grid<bool>,
}

fn check_box(b: &BoundingBox, width: usize, height: usize) -> Result<()> {
    if !(b.x1 > b.x0 && b.y1 > b.y0) {
        return Err(Error::InvalidParam(format!(
            "degenerate detection box [{}, {}, {}, {}]",
            b.x0, b.y0, b.x1, b.y1
        )));
    }
    if b.x1 <= 0.0 || b.y1 <= 0.0 || b.x0 >= width as f64 || b.y0 >= height as f64 {
        return Err(Error::InvalidParam(format!(
            "detection box [{}, {}, {}, {}] misses the {}x{} image",
            b.x0, b.y0, b.x1, b.y1, width, height
        )));
    }
    Ok(())
}

/// Image coordinates of the center of grid cell `(gx, gy)` under `window`.
fn cell_center(window: &BoundingBox, gx: usize, gy: usize) -> (f64, f64) {
    let u = window.x0 + (gx as f64 + 0.5) * (window.x1 - window.x0) / GRID as f64;
    let v = window.y0 + (gy as f64 + 0.5) * (window.y1 - window.y0) / GRID as f64;
    (u, v)
}

/// Resamples the window interior of every image channel onto the grid
/// (bilinear) and appends the location channels.
pub fn warp_window(image: &FeatureImage, window: &BoundingBox) -> Result<WarpedFeatures> {
    check_box(window, image.width, image.height)?;
    let mut channels = Vec::with_capacity(CHANNEL_COUNT);
    for c in 0..image.channels.len() {
        let mut g = Grid::filled(GRID, GRID, 0.0)?;
        for gy in 0..GRID {
            for gx in 0..GRID {
                let (u, v) = cell_center(window, gx, gy);
                *g.get_mut(gx, gy) = image.sample(c, u, v);
            }
        }
        channels.push(g);
    }
    let mut loc_x = Grid::filled(GRID, GRID, 0.0)?;
    let mut loc_y = Grid::filled(GRID, GRID, 0.0)?;
    for gy in 0..GRID {
        for gx in 0..GRID {
            *loc_x.get_mut(gx, gy) = (gx as f64 + 0.5) / GRID as f64;
            *loc_y.get_mut(gx, gy) = (gy as f64 + 0.5) / GRID as f64;
        }
    }
    channels.push(loc_x);
    channels.push(loc_y);
    Ok(WarpedFeatures { channels })
}

/// Warps a binary pixel mask onto the grid by nearest-neighbor lookup.
pub fn warp_mask(mask: &Grid<bool>, window: &BoundingBox) -> Result<Grid<bool>> {
    check_box(window, mask.width(), mask.height())?;
    let mut out = Grid::filled(GRID, GRID, false)?;
    for gy in 0..GRID {
        for gx in 0..GRID {
            let (u, v) = cell_center(window, gx, gy);
            let x = (u.floor() as i64).clamp(0, mask.width() as i64 - 1) as usize;
            let y = (v.floor() as i64).clamp(0, mask.height() as i64 - 1) as usize;
            let value = if *mask.get(x, y) { 1.0 } else { 0.0 };
            *out.get_mut(gx, gy) = value >= 0.5;
        }
    }
    Ok(out)
}

/// Pixel mask of a superpixel-id region.
pub fn region_pixel_mask(spmap: &SuperpixelMap, region: &[u32]) -> Grid<bool> {
    let mut mask = Grid::filled(spmap.width(), spmap.height(), false).expect("mask shape");
    for y in 0..spmap.height() {
        for x in 0..spmap.width() {
            if region.binary_search(&spmap.id(x, y)).is_ok() {
                *mask.get_mut(x, y) = true;
            }
        }
    }
    mask
}

/// A split test evaluated at a grid cell; offsets are in grid cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitQuestion {
    /// value(channel, cell + offset) < threshold
    Unary {
        channel: usize,
        offset: (i32, i32),
        threshold: f64,
    },
    /// value(channel, cell + offset1) - value(channel, cell + offset2) < threshold
    Binary {
        channel: usize,
        offset1: (i32, i32),
        offset2: (i32, i32),
        threshold: f64,
    },
}

impl SplitQuestion {
    pub fn response(
        &self,
        features: &WarpedFeatures,
        gx: usize,
        gy: usize,
        padding: &[f64],
    ) -> f64 {
        match *self {
            SplitQuestion::Unary {
                channel,
                offset: (dx, dy),
                ..
            } => features.probe(channel, gx, gy, dx, dy, padding),
            SplitQuestion::Binary {
                channel,
                offset1: (dx1, dy1),
                offset2: (dx2, dy2),
                ..
            } => {
                features.probe(channel, gx, gy, dx1, dy1, padding)
                    - features.probe(channel, gx, gy, dx2, dy2, padding)
            }
        }
    }

    pub fn threshold(&self) -> f64 {
        match *self {
            SplitQuestion::Unary { threshold, .. } | SplitQuestion::Binary { threshold, .. } => {
                threshold
            }
        }
    }

    /// True sends the cell to the left child.
    pub fn goes_left(&self, features: &WarpedFeatures, gx: usize, gy: usize, padding: &[f64]) -> bool {
        self.response(features, gx, gy, padding) < self.threshold()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Split {
        question: SplitQuestion,
        left: usize,
        right: usize,
    },
    Leaf {
        probability: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Tree {
    /// Index 0 is the root.
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn leaf_probability(
        &self,
        features: &WarpedFeatures,
        gx: usize,
        gy: usize,
        padding: &[f64],
    ) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { probability } => return *probability,
                TreeNode::Split {
                    question,
                    left,
                    right,
                } => {
                    at = if question.goes_left(features, gx, gy, padding) {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }
}

/// A trained forest plus the channel list and out-of-grid padding values it
/// was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub channels: Vec<String>,
    /// Per-channel value returned by probes that leave the grid.
    pub padding: Vec<f64>,
}

impl Forest {
    pub fn validate(&self) -> Result<()> {
        if self.trees.is_empty() || self.trees.iter().any(|t| t.nodes.is_empty()) {
            return Err(Error::InvalidParam("forest has no trained trees".into()));
        }
        if self.channels.len() != self.padding.len() {
            return Err(Error::InvalidParam(
                "channel list and padding lengths differ".into(),
            ));
        }
        for tree in &self.trees {
            for node in &tree.nodes {
                match node {
                    TreeNode::Leaf { probability } => {
                        if !(0.0..=1.0).contains(probability) {
                            return Err(Error::InvalidParam(format!(
                                "leaf probability {probability} outside [0, 1]"
                            )));
                        }
                    }
                    TreeNode::Split { left, right, .. } => {
                        if *left >= tree.nodes.len() || *right >= tree.nodes.len() {
                            return Err(Error::InvalidParam(
                                "split child index out of range".into(),
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// A ground-truth instance: its class, box, and superpixel region.
#[derive(Debug, Clone)]
pub struct GtInstance {
    pub image_id: String,
    pub class_id: u32,
    pub bbox: BoundingBox,
    /// Sorted superpixel ids.
    pub region: Vec<u32>,
}

/// Pairs each ground-truth instance with the best-scoring detection of the
/// same image and class whose box IoU with it exceeds 0.7 (strictly).
/// Returns (instance index, detection index) pairs; unmatched instances are
/// absent. Score ties pick the earlier detection.
pub fn assign_detections(instances: &[GtInstance], detections: &[Detection]) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for (gi, gt) in instances.iter().enumerate() {
        let mut best: Option<usize> = None;
        for (di, det) in detections.iter().enumerate() {
            if det.image_id != gt.image_id || det.class_id != gt.class_id {
                continue;
            }
            if box_iou(&det.bbox, &gt.bbox) <= 0.7 {
                continue;
            }
            if best.map_or(true, |b| det.score > detections[b].score) {
                best = Some(di);
            }
        }
        if let Some(di) = best {
            pairs.push((gi, di));
        }
    }
    pairs
}
