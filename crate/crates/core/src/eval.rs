//! Metrics: box and superpixel-region IoU, ranked-candidate coverage,
//! non-maximum suppression, detection average precision, and semantic
//! segmentation scores.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Axis-aligned box over the half-open ranges `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BoundingBox {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        let b = BoundingBox { x0, y0, x1, y1 };
        if !(x0.is_finite() && y0.is_finite() && x1.is_finite() && y1.is_finite())
            || x1 < x0
            || y1 < y0
        {
            return Err(Error::InvalidParam(format!(
                "malformed box [{x0}, {y0}, {x1}, {y1}]"
            )));
        }
        Ok(b)
    }

    #[inline]
    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let w = (self.x1.min(other.x1) - self.x0.max(other.x0)).max(0.0);
        let h = (self.y1.min(other.y1) - self.y0.max(other.y0)).max(0.0);
        w * h
    }

    /// Deterministic comparison key: coordinates in order.
    #[inline]
    pub fn sort_key(&self) -> [f64; 4] {
        [self.x0, self.y0, self.x1, self.y1]
    }
}

/// Intersection over union of boxes; 0 when the union is empty.
pub fn box_iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Size-weighted IoU of two sorted, deduplicated superpixel-id sets;
/// `sizes[id]` is the pixel count of each superpixel. 0 when both are empty.
pub fn region_iou(a: &[u32], b: &[u32], sizes: &[u64]) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut inter = 0u64;
    let mut union = 0u64;
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Equal => {
                inter += sizes[a[i] as usize];
                union += sizes[a[i] as usize];
                i += 1;
                j += 1;
            }
            std::cmp::Ordering::Less => {
                union += sizes[a[i] as usize];
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                union += sizes[b[j] as usize];
                j += 1;
            }
        }
    }
    union += a[i..].iter().map(|&id| sizes[id as usize]).sum::<u64>();
    union += b[j..].iter().map(|&id| sizes[id as usize]).sum::<u64>();
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// One image's superpixel sizes and its rank-ordered candidate regions.
#[derive(Debug, Clone, Default)]
pub struct ImageRegions {
    /// Pixel count per superpixel id.
    pub sizes: Vec<u64>,
    /// Candidate regions, best rank first; each a sorted id set.
    pub ranked: Vec<Vec<u32>>,
}

/// A ground-truth instance region for coverage evaluation.
#[derive(Debug, Clone)]
pub struct CoverageInstance {
    pub class_id: u32,
    /// Index into the image list.
    pub image: usize,
    /// Sorted superpixel-id set.
    pub region: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct CoverageResult {
    pub coverage: f64,
    /// Per class (ascending id): mean best-overlap over its instances.
    pub per_class: Vec<(u32, f64)>,
    /// Classes from the requested universe with no instances (excluded).
    pub excluded_classes: Vec<u32>,
}

/// Mean over classes of the mean over instances of the best top-K overlap.
///
/// Summation order is fixed: classes ascending by id; within a class,
/// instances in input order; each instance contributes
/// `max(iou(candidate, instance) for the first K candidates of its image)`.
/// Per-class sums divide by the class instance count, then class means are
/// summed in ascending-id order and divided by the class count.
///
/// `class_universe`, when given, lists the classes that should count; members
/// with no instances are excluded from the mean and reported. Classes with
/// instances outside the universe are an error.
pub fn coverage(
    instances: &[CoverageInstance],
    images: &[ImageRegions],
    k: usize,
    class_universe: Option<&[u32]>,
) -> Result<CoverageResult> {
    if k == 0 {
        return Err(Error::InvalidParam("K must be at least 1".into()));
    }
    if instances.is_empty() {
        return Err(Error::EmptyInput("no ground-truth instances".into()));
    }
    for inst in instances {
        if inst.image >= images.len() {
            return Err(Error::InvalidParam(format!(
                "instance references image {} of {}",
                inst.image,
                images.len()
            )));
        }
        if let Some(universe) = class_universe {
            if !universe.contains(&inst.class_id) {
                return Err(Error::InvalidParam(format!(
                    "instance class {} is not in the class universe",
                    inst.class_id
                )));
            }
        }
    }

    let mut by_class: HashMap<u32, Vec<&CoverageInstance>> = HashMap::new();
    for inst in instances {
        by_class.entry(inst.class_id).or_default().push(inst);
    }
    let mut class_ids: Vec<u32> = by_class.keys().copied().collect();
    class_ids.sort_unstable();

    let mut per_class = Vec::with_capacity(class_ids.len());
    let mut total = 0.0;
    for &cid in &class_ids {
        let members = &by_class[&cid];
        let mut sum = 0.0;
        for inst in members {
            let img = &images[inst.image];
            let mut best = 0.0f64;
            for cand in img.ranked.iter().take(k) {
                best = best.max(region_iou(cand, &inst.region, &img.sizes));
            }
            sum += best;
        }
        let mean = sum / members.len() as f64;
        per_class.push((cid, mean));
        total += mean;
    }
    let excluded_classes = match class_universe {
        Some(universe) => {
            let mut ex: Vec<u32> = universe
                .iter()
                .copied()
                .filter(|c| !by_class.contains_key(c))
                .collect();
            ex.sort_unstable();
            ex.dedup();
            ex
        }
        None => Vec::new(),
    };
    Ok(CoverageResult {
        coverage: total / class_ids.len() as f64,
        per_class,
        excluded_classes,
    })
}

/// Coverage at each K, sharing one pass over the candidates.
pub fn coverage_curve(
    instances: &[CoverageInstance],
    images: &[ImageRegions],
    ks: &[usize],
    class_universe: Option<&[u32]>,
) -> Result<Vec<(usize, CoverageResult)>> {
    ks.iter()
        .map(|&k| Ok((k, coverage(instances, images, k, class_universe)?)))
        .collect()
}

/// A scored box detection.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub image_id: String,
    pub class_id: u32,
    pub score: f64,
    pub bbox: BoundingBox,
}

/// Detection-list ordering: score descending, then image id, then box
/// coordinates (total order, NaN-safe).
pub(crate) fn detection_order(a: &Detection, b: &Detection) -> std::cmp::Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.image_id.cmp(&b.image_id))
        .then_with(|| {
            let (ka, kb) = (a.bbox.sort_key(), b.bbox.sort_key());
            ka.iter()
                .zip(kb.iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
}

/// Greedy per-image, per-class non-maximum suppression.
///
/// Detections are visited in [`detection_order`]; a detection is dropped when
/// its IoU with an already-accepted detection of the same image and class
/// exceeds `threshold` (strictly). Output order: image id, then class id,
/// then acceptance (score) order — independent of input order up to the
/// documented tie-break.
pub fn nms(detections: &[Detection], threshold: f64) -> Result<Vec<Detection>> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidParam(format!(
            "NMS threshold must be in [0, 1], got {threshold}"
        )));
    }
    let mut groups: HashMap<(&str, u32), Vec<&Detection>> = HashMap::new();
    for d in detections {
        groups.entry((d.image_id.as_str(), d.class_id)).or_default().push(d);
    }
    let mut keys: Vec<(&str, u32)> = groups.keys().copied().collect();
    keys.sort_unstable();
    let mut out = Vec::new();
    for key in keys {
        let mut group = groups.remove(&key).unwrap();
        group.sort_by(|a, b| detection_order(a, b));
        let mut kept: Vec<&Detection> = Vec::new();
        for d in group {
            if kept.iter().all(|a| box_iou(&a.bbox, &d.bbox) <= threshold) {
                kept.push(d);
            }
        }
        out.extend(kept.into_iter().cloned());
    }
    Ok(out)
}

/// A detection for AP evaluation: an opaque shape plus ordering information.
#[derive(Debug, Clone)]
pub struct ApDetection<T> {
    pub image_id: String,
    pub score: f64,
    /// Deterministic tie-break key among equal scores in one image.
    pub sort_key: [f64; 4],
    pub shape: T,
}

/// A ground-truth instance for AP evaluation.
#[derive(Debug, Clone)]
pub struct ApGroundTruth<G> {
    pub image_id: String,
    pub shape: G,
}

/// One point of the precision/recall sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
}

#[derive(Debug, Clone)]
pub struct ApResult {
    pub ap: f64,
    /// Sweep points in detection order (one per detection).
    pub points: Vec<PrPoint>,
    pub threshold: f64,
    pub true_positives: usize,
    pub ground_truths: usize,
}

/// Average precision with greedy matching, for a single class.
///
/// Detections are swept best score first (ties broken by image id, then
/// `sort_key`). Each detection matches the unmatched ground truth of its
/// image with the highest overlap (ties: earliest ground truth in input
/// order); it is a true positive if that overlap reaches `threshold`. AP is
/// the area under the precision envelope over recall (continuous
/// interpolation over all points). `None` when there are no ground truths.
pub fn average_precision<T, G>(
    detections: &[ApDetection<T>],
    ground_truths: &[ApGroundTruth<G>],
    threshold: f64,
    overlap: impl Fn(&str, &T, &G) -> f64,
) -> Option<ApResult> {
    if ground_truths.is_empty() {
        return None;
    }
    let mut gt_by_image: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, gt) in ground_truths.iter().enumerate() {
        gt_by_image.entry(gt.image_id.as_str()).or_default().push(i);
    }
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| {
        let (da, db) = (&detections[a], &detections[b]);
        db.score
            .total_cmp(&da.score)
            .then_with(|| da.image_id.cmp(&db.image_id))
            .then_with(|| {
                da.sort_key
                    .iter()
                    .zip(db.sort_key.iter())
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
    });

    let n_gt = ground_truths.len();
    let mut matched = vec![false; n_gt];
    let mut tp = 0usize;
    let mut points = Vec::with_capacity(detections.len());
    for (rank, &di) in order.iter().enumerate() {
        let det = &detections[di];
        let mut best: Option<(usize, f64)> = None;
        if let Some(cands) = gt_by_image.get(det.image_id.as_str()) {
            for &gi in cands {
                if matched[gi] {
                    continue;
                }
                let o = overlap(&det.image_id, &det.shape, &ground_truths[gi].shape);
                if best.map_or(true, |(_, bo)| o > bo) {
                    best = Some((gi, o));
                }
            }
        }
        if let Some((gi, o)) = best {
            if o >= threshold {
                matched[gi] = true;
                tp += 1;
            }
        }
        points.push(PrPoint {
            recall: tp as f64 / n_gt as f64,
            precision: tp as f64 / (rank + 1) as f64,
        });
    }

    Some(ApResult {
        ap: envelope_area(&points),
        points,
        threshold,
        true_positives: tp,
        ground_truths: n_gt,
    })
}

/// Area under the precision envelope over recall (all-points interpolation).
pub fn envelope_area(points: &[PrPoint]) -> f64 {
    let n = points.len();
    let mut mrec = Vec::with_capacity(n + 2);
    let mut mpre = Vec::with_capacity(n + 2);
    mrec.push(0.0);
    mpre.push(0.0);
    for p in points {
        mrec.push(p.recall);
        mpre.push(p.precision);
    }
    mrec.push(1.0);
    mpre.push(0.0);
    for i in (0..mpre.len() - 1).rev() {
        mpre[i] = mpre[i].max(mpre[i + 1]);
    }
    let mut ap = 0.0;
    for i in 1..mrec.len() {
        if mrec[i] != mrec[i - 1] {
            ap += (mrec[i] - mrec[i - 1]) * mpre[i];
        }
    }
    ap
}

/// Per-class IoU and aggregate scores for a semantic labeling.
#[derive(Debug, Clone)]
pub struct SegmentationMetrics {
    /// Indexed by class id; `None` where the class appears in neither map.
    pub per_class_iou: Vec<Option<f64>>,
    /// Fraction of non-ignored pixels labeled correctly.
    pub pixel_accuracy: f64,
    /// Unweighted mean IoU over the classes with ground-truth pixels.
    pub mean_iou: f64,
    /// Mean IoU over the same classes, weighted by ground-truth pixel
    /// frequency.
    pub frequency_weighted_iou: f64,
}

/// Pools label comparisons over any number of images before computing
/// metrics. Pixels whose ground-truth label equals `ignore` are skipped
/// everywhere. Labels outside `0..num_classes` (other than `ignore`) are an
/// error, as is finishing with every pixel ignored.
#[derive(Debug, Clone)]
pub struct SegmentationAccumulator {
    num_classes: usize,
    ignore: Option<u16>,
    tp: Vec<u64>,
    fp: Vec<u64>,
    fn_: Vec<u64>,
    gt_count: Vec<u64>,
    correct: u64,
    total: u64,
}

impl SegmentationAccumulator {
    pub fn new(num_classes: usize, ignore: Option<u16>) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::InvalidParam("num_classes must be positive".into()));
        }
        Ok(SegmentationAccumulator {
            num_classes,
            ignore,
            tp: vec![0; num_classes],
            fp: vec![0; num_classes],
            fn_: vec![0; num_classes],
            gt_count: vec![0; num_classes],
            correct: 0,
            total: 0,
        })
    }

    pub fn add(
        &mut self,
        predicted: &crate::grid::Grid<u16>,
        ground_truth: &crate::grid::Grid<u16>,
    ) -> Result<()> {
        if !predicted.same_shape(ground_truth) {
            return Err(Error::Dimension(format!(
                "prediction {}x{} vs ground truth {}x{}",
                predicted.width(),
                predicted.height(),
                ground_truth.width(),
                ground_truth.height()
            )));
        }
        let in_range = |l: u16| (l as usize) < self.num_classes || Some(l) == self.ignore;
        for (p, g) in predicted
            .as_slice()
            .iter()
            .zip(ground_truth.as_slice().iter())
        {
            if !in_range(*g) {
                return Err(Error::InvalidParam(format!(
                    "ground-truth label {g} outside 0..{}",
                    self.num_classes
                )));
            }
            if Some(*g) == self.ignore {
                continue;
            }
            if !in_range(*p) || Some(*p) == self.ignore {
                return Err(Error::InvalidParam(format!(
                    "predicted label {p} outside 0..{}",
                    self.num_classes
                )));
            }
            self.total += 1;
            self.gt_count[*g as usize] += 1;
            if p == g {
                self.correct += 1;
                self.tp[*p as usize] += 1;
            } else {
                self.fp[*p as usize] += 1;
                self.fn_[*g as usize] += 1;
            }
        }
        Ok(())
    }

    pub fn finish(self) -> Result<SegmentationMetrics> {
        if self.total == 0 {
            return Err(Error::EmptyInput(
                "every ground-truth pixel is ignored".into(),
            ));
        }
        let mut per_class_iou = vec![None; self.num_classes];
        let mut mean_sum = 0.0;
        let mut mean_n = 0usize;
        let mut fw_sum = 0.0;
        for c in 0..self.num_classes {
            let union = self.tp[c] + self.fp[c] + self.fn_[c];
            if union == 0 {
                continue;
            }
            let iou = self.tp[c] as f64 / union as f64;
            per_class_iou[c] = Some(iou);
            if self.gt_count[c] > 0 {
                mean_sum += iou;
                mean_n += 1;
                fw_sum += self.gt_count[c] as f64 / self.total as f64 * iou;
            }
        }
        Ok(SegmentationMetrics {
            per_class_iou,
            pixel_accuracy: self.correct as f64 / self.total as f64,
            mean_iou: mean_sum / mean_n as f64,
            frequency_weighted_iou: fw_sum,
        })
    }
}

/// Single-image shorthand for [`SegmentationAccumulator`].
pub fn segmentation_metrics(
    predicted: &crate::grid::Grid<u16>,
    ground_truth: &crate::grid::Grid<u16>,
    num_classes: usize,
    ignore: Option<u16>,
) -> Result<SegmentationMetrics> {
    let mut acc = SegmentationAccumulator::new(num_classes, ignore)?;
    acc.add(predicted, ground_truth)?;
    acc.finish()
}
