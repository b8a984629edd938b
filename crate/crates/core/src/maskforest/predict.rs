//! Mask prediction: cell confidences, unwarping to window pixels, and
//! superpixel-level thresholding.

use super::{bilinear, warp_window, FeatureImage, Forest, WarpedFeatures, GRID};
use crate::error::{Error, Result};
use crate::eval::{detection_order, Detection};
use crate::grid::Grid;
use crate::regionfeat::SuperpixelMap;

/// Mean over trees of the leaf probability at every grid cell.
pub fn predict_confidence(forest: &Forest, features: &WarpedFeatures) -> Result<Grid<f64>> {
    forest.validate()?;
    let mut conf = Grid::filled(GRID, GRID, 0.0)?;
    for gy in 0..GRID {
        for gx in 0..GRID {
            let sum: f64 = forest
                .trees
                .iter()
                .map(|t| t.leaf_probability(features, gx, gy, &forest.padding))
                .sum();
            *conf.get_mut(gx, gy) = sum / forest.trees.len() as f64;
        }
    }
    Ok(conf)
}

/// Warps the detection window, predicts cell confidences, unwarps them to
/// the window's pixels (bilinear), and averages per superpixel. Superpixels
/// with no pixel inside the window get confidence 0.
pub fn predict_superpixel_confidence(
    forest: &Forest,
    detection: &Detection,
    image: &FeatureImage,
    spmap: &SuperpixelMap,
) -> Result<Vec<f64>> {
    if spmap.width() != image.width() || spmap.height() != image.height() {
        return Err(Error::Dimension(format!(
            "superpixel map {}x{} vs feature image {}x{}",
            spmap.width(),
            spmap.height(),
            image.width(),
            image.height()
        )));
    }
    let features = warp_window(image, &detection.bbox)?;
    let conf = predict_confidence(forest, &features)?;

    let b = &detection.bbox;
    let mut sums = vec![0.0f64; spmap.count()];
    let mut counts = vec![0u64; spmap.count()];
    let px0 = (b.x0 - 0.5).ceil().max(0.0) as usize;
    let py0 = (b.y0 - 0.5).ceil().max(0.0) as usize;
    for py in py0..spmap.height() {
        let cy = py as f64 + 0.5;
        if cy >= b.y1 {
            break;
        }
        for px in px0..spmap.width() {
            let cx = px as f64 + 0.5;
            if cx >= b.x1 {
                break;
            }
            let gi = (cx - b.x0) * GRID as f64 / (b.x1 - b.x0) - 0.5;
            let gj = (cy - b.y0) * GRID as f64 / (b.y1 - b.y0) - 0.5;
            let c = bilinear(&conf, gi + 0.5, gj + 0.5);
            let id = spmap.id(px, py) as usize;
            sums[id] += c;
            counts[id] += 1;
        }
    }
    Ok(sums
        .iter()
        .zip(counts.iter())
        .map(|(s, &n)| if n == 0 { 0.0 } else { s / n as f64 })
        .collect())
}

/// Superpixel ids whose confidence reaches `threshold`, ascending.
pub fn threshold_mask(confidence: &[f64], threshold: f64) -> Vec<u32> {
    confidence
        .iter()
        .enumerate()
        .filter(|(_, &c)| c >= threshold)
        .map(|(id, _)| id as u32)
        .collect()
}

/// A predicted instance mask: soft superpixel confidences and the ids kept
/// by the threshold.
#[derive(Debug, Clone)]
pub struct InstanceMask {
    pub confidence: Vec<f64>,
    pub superpixels: Vec<u32>,
    pub threshold: f64,
}

/// Full prediction for one detection window.
pub fn predict_mask(
    forest: &Forest,
    detection: &Detection,
    image: &FeatureImage,
    spmap: &SuperpixelMap,
    threshold: f64,
) -> Result<InstanceMask> {
    let confidence = predict_superpixel_confidence(forest, detection, image, spmap)?;
    let superpixels = threshold_mask(&confidence, threshold);
    Ok(InstanceMask {
        confidence,
        superpixels,
        threshold,
    })
}

/// Keeps at most `limit` best-scoring detections per class (ties broken by
/// the deterministic detection order); output is grouped by ascending class.
pub fn cap_detections(detections: &[Detection], limit: usize) -> Vec<Detection> {
    let mut classes: Vec<u32> = detections.iter().map(|d| d.class_id).collect();
    classes.sort_unstable();
    classes.dedup();
    let mut out = Vec::new();
    for class in classes {
        let mut group: Vec<&Detection> = detections
            .iter()
            .filter(|d| d.class_id == class)
            .collect();
        group.sort_by(|a, b| detection_order(a, b));
        out.extend(group.into_iter().take(limit).cloned());
    }
    out
}
