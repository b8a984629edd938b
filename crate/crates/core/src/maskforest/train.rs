//! Forest training: per-tree cell subsampling, greedy entropy splits, and
//! validation-driven mask-threshold selection.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use super::{
    Forest, SplitQuestion, Tree, TreeNode, WarpedExample, CELLS, CHANNEL_COUNT, GRID,
};
use crate::error::{Error, Result};
use crate::eval::{
    average_precision, region_iou, ApDetection, ApGroundTruth, Detection,
};
use crate::math::mix_seed;
use crate::regionfeat::SuperpixelMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub trees: usize,
    /// Candidate questions sampled per node.
    pub questions: usize,
    pub max_depth: usize,
    /// Nodes with fewer points become leaves.
    pub min_samples: usize,
    /// Majority fraction at which a node stops splitting.
    pub purity: f64,
    /// Fraction of the grid's cells each tree trains on.
    pub cell_fraction: f64,
    /// Disables binary (two-probe difference) questions.
    pub unary_only: bool,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            trees: 10,
            questions: 1000,
            max_depth: 20,
            min_samples: 20,
            purity: 0.999,
            cell_fraction: 0.25,
            unary_only: false,
            seed: 0,
        }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<()> {
        if self.trees == 0 || self.questions == 0 || self.max_depth == 0 {
            return Err(Error::InvalidParam(
                "trees, questions, and max_depth must be positive".into(),
            ));
        }
        if self.min_samples < 2 {
            return Err(Error::InvalidParam(
                "min_samples must be at least 2".into(),
            ));
        }
        if !(0.0 < self.purity && self.purity <= 1.0) {
            return Err(Error::InvalidParam(format!(
                "purity must be in (0, 1], got {}",
                self.purity
            )));
        }
        if !(0.0 < self.cell_fraction && self.cell_fraction <= 1.0) {
            return Err(Error::InvalidParam(format!(
                "cell_fraction must be in (0, 1], got {}",
                self.cell_fraction
            )));
        }
        Ok(())
    }
}

/// One classification point: an example and a grid cell.
#[derive(Clone, Copy)]
struct Point {
    example: u32,
    gx: u16,
    gy: u16,
    foreground: bool,
}

fn entropy(fg: usize, n: usize) -> f64 {
    if n == 0 || fg == 0 || fg == n {
        return 0.0;
    }
    let p = fg as f64 / n as f64;
    -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
}

struct TreeBuilder<'a> {
    examples: &'a [WarpedExample],
    padding: &'a [f64],
    params: &'a TrainParams,
    rng: ChaCha12Rng,
    nodes: Vec<TreeNode>,
}

impl TreeBuilder<'_> {
    fn response(&self, q: &SplitQuestion, p: &Point) -> f64 {
        q.response(
            &self.examples[p.example as usize].features,
            p.gx as usize,
            p.gy as usize,
            self.padding,
        )
    }

    /// Offsets stay within one grid side length. Each component is zero
    /// (a local probe) with probability 1/4, otherwise uniform.
    fn sample_offset(&mut self) -> (i32, i32) {
        let component = |rng: &mut ChaCha12Rng| -> i32 {
            if rng.random_bool(0.25) {
                0
            } else {
                rng.random_range(-(GRID as i32)..=GRID as i32)
            }
        };
        (component(&mut self.rng), component(&mut self.rng))
    }

    /// Grows the subtree over `points`; returns its root node index.
    fn grow(&mut self, points: Vec<Point>, depth: usize) -> usize {
        let n = points.len();
        let fg = points.iter().filter(|p| p.foreground).count();
        let majority = fg.max(n - fg) as f64 / n as f64;
        let make_leaf = depth >= self.params.max_depth
            || n < self.params.min_samples
            || majority >= self.params.purity;

        let mut best: Option<(SplitQuestion, f64)> = None;
        if !make_leaf {
            let mut responses = vec![0.0f64; n];
            for qi in 0..self.params.questions {
                let unary = self.params.unary_only || qi % 2 == 0;
                let channel = self.rng.random_range(0..CHANNEL_COUNT);
                let question = if unary {
                    SplitQuestion::Unary {
                        channel,
                        offset: self.sample_offset(),
                        threshold: 0.0,
                    }
                } else {
                    SplitQuestion::Binary {
                        channel,
                        offset1: self.sample_offset(),
                        offset2: self.sample_offset(),
                        threshold: 0.0,
                    }
                };
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for (r, p) in responses.iter_mut().zip(points.iter()) {
                    *r = self.response(&question, p);
                    lo = lo.min(*r);
                    hi = hi.max(*r);
                }
                if !(hi > lo) {
                    continue;
                }
                let tau = self.rng.random_range(lo..hi);
                let question = match question {
                    SplitQuestion::Unary { channel, offset, .. } => SplitQuestion::Unary {
                        channel,
                        offset,
                        threshold: tau,
                    },
                    SplitQuestion::Binary {
                        channel,
                        offset1,
                        offset2,
                        ..
                    } => SplitQuestion::Binary {
                        channel,
                        offset1,
                        offset2,
                        threshold: tau,
                    },
                };
                let mut nl = 0usize;
                let mut nl_fg = 0usize;
                for (r, p) in responses.iter().zip(points.iter()) {
                    if *r < tau {
                        nl += 1;
                        if p.foreground {
                            nl_fg += 1;
                        }
                    }
                }
                if nl == 0 || nl == n {
                    continue;
                }
                let nr = n - nl;
                let nr_fg = fg - nl_fg;
                let gain = entropy(fg, n)
                    - (nl as f64 / n as f64) * entropy(nl_fg, nl)
                    - (nr as f64 / n as f64) * entropy(nr_fg, nr);
                if gain > 0.0 && best.as_ref().map_or(true, |(_, g)| gain > *g) {
                    best = Some((question, gain));
                }
            }
        }

        match best {
            None => {
                self.nodes.push(TreeNode::Leaf {
                    probability: fg as f64 / n as f64,
                });
                self.nodes.len() - 1
            }
            Some((question, _)) => {
                let (left_pts, right_pts): (Vec<Point>, Vec<Point>) = points
                    .into_iter()
                    .partition(|p| self.response(&question, p) < question.threshold());
                let id = self.nodes.len();
                self.nodes.push(TreeNode::Leaf { probability: 0.0 });
                let left = self.grow(left_pts, depth + 1);
                let right = self.grow(right_pts, depth + 1);
                self.nodes[id] = TreeNode::Split {
                    question,
                    left,
                    right,
                };
                id
            }
        }
    }
}

fn train_tree(
    examples: &[WarpedExample],
    padding: &[f64],
    params: &TrainParams,
    tree_index: usize,
) -> Tree {
    let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(params.seed, tree_index as u64));
    // Subsample grid cells, not points, so the tree is invariant to the
    // order of the training examples.
    let mut cells = Vec::with_capacity(CELLS);
    for cell in 0..CELLS {
        if rng.random_bool(params.cell_fraction) {
            cells.push(cell);
        }
    }
    if cells.is_empty() {
        cells.push(rng.random_range(0..CELLS));
    }
    let mut points = Vec::with_capacity(cells.len() * examples.len());
    for (ei, ex) in examples.iter().enumerate() {
        for &cell in &cells {
            let (gx, gy) = (cell % GRID, cell / GRID);
            points.push(Point {
                example: ei as u32,
                gx: gx as u16,
                gy: gy as u16,
                foreground: *ex.mask.get(gx, gy),
            });
        }
    }
    let mut builder = TreeBuilder {
        examples,
        padding,
        params,
        rng,
        nodes: Vec::new(),
    };
    let root = builder.grow(points, 0);
    debug_assert_eq!(root, 0);
    Tree {
        nodes: builder.nodes,
    }
}

/// Mean of every channel over all examples' grid cells; the out-of-grid
/// padding stored in the model.
fn channel_means(examples: &[WarpedExample]) -> Vec<f64> {
    let mut means = vec![0.0f64; CHANNEL_COUNT];
    for (c, mean) in means.iter_mut().enumerate() {
        let mut sum = 0.0;
        for ex in examples {
            sum += ex.features.channels[c].as_slice().iter().sum::<f64>();
        }
        *mean = sum / (examples.len() * CELLS) as f64;
    }
    means
}

/// Trains the forest on warped examples. Trees train independently (in
/// parallel) from per-tree seeds derived from the tree index, so results are
/// identical across thread counts and example orderings.
pub fn train_forest(examples: &[WarpedExample], params: &TrainParams) -> Result<Forest> {
    params.validate()?;
    if examples.is_empty() {
        return Err(Error::EmptyInput("no training examples".into()));
    }
    let mut fg = 0usize;
    let mut total = 0usize;
    for ex in examples {
        fg += ex.mask.as_slice().iter().filter(|&&b| b).count();
        total += CELLS;
    }
    if fg == 0 || fg == total {
        return Err(Error::Degenerate(
            "training cells are single-class".into(),
        ));
    }
    let padding = channel_means(examples);
    let trees: Vec<Tree> = (0..params.trees)
        .into_par_iter()
        .map(|t| train_tree(examples, &padding, params, t))
        .collect();
    let forest = Forest {
        trees,
        channels: super::channel_names(),
        padding,
    };
    forest.validate()?;
    Ok(forest)
}

/// Everything needed to predict masks on one validation image.
pub struct EvalImage {
    pub features: super::FeatureImage,
    pub spmap: SuperpixelMap,
}

/// Thresholds tried by `select_threshold`, lowest first.
pub fn threshold_grid() -> Vec<f64> {
    (1..=20).map(|i| i as f64 * 0.05).collect()
}

/// Region-overlap average precision of thresholded masks, macro-averaged
/// over the classes present in the ground truth; detections keep their
/// scores, masks come from thresholding `confidences` per detection.
fn masked_ap(
    detections: &[Detection],
    confidences: &[Vec<f64>],
    instances: &[super::GtInstance],
    sizes: &HashMap<String, Vec<u64>>,
    threshold: f64,
    overlap: f64,
) -> f64 {
    let mut classes: Vec<u32> = instances.iter().map(|g| g.class_id).collect();
    classes.sort_unstable();
    classes.dedup();
    let mut sum = 0.0;
    for &class in &classes {
        let dets: Vec<ApDetection<Vec<u32>>> = detections
            .iter()
            .zip(confidences.iter())
            .filter(|(d, _)| d.class_id == class)
            .map(|(d, conf)| ApDetection {
                image_id: d.image_id.clone(),
                score: d.score,
                sort_key: d.bbox.sort_key(),
                shape: super::predict::threshold_mask(conf, threshold),
            })
            .collect();
        let gts: Vec<ApGroundTruth<Vec<u32>>> = instances
            .iter()
            .filter(|g| g.class_id == class)
            .map(|g| ApGroundTruth {
                image_id: g.image_id.clone(),
                shape: g.region.clone(),
            })
            .collect();
        let ap = average_precision(&dets, &gts, overlap, |image, a, b| {
            region_iou(a, b, &sizes[image])
        })
        .map(|r| r.ap)
        .unwrap_or(0.0);
        sum += ap;
    }
    sum / classes.len() as f64
}

/// Picks the mask threshold from a fixed grid by maximizing region-overlap
/// average precision (overlap 0.5) on the validation set; ties take the
/// lowest threshold. Returns the winner and the whole (threshold, AP) sweep.
pub fn select_threshold(
    forest: &Forest,
    detections: &[Detection],
    instances: &[super::GtInstance],
    images: &HashMap<String, EvalImage>,
) -> Result<(f64, Vec<(f64, f64)>)> {
    forest.validate()?;
    if detections.is_empty() || instances.is_empty() {
        return Err(Error::EmptyInput(
            "threshold selection needs validation detections and instances".into(),
        ));
    }
    let mut confidences = Vec::with_capacity(detections.len());
    for det in detections {
        let img = images.get(&det.image_id).ok_or_else(|| {
            Error::InvalidParam(format!("no validation image {}", det.image_id))
        })?;
        confidences.push(super::predict::predict_superpixel_confidence(
            forest,
            det,
            &img.features,
            &img.spmap,
        )?);
    }
    let sizes: HashMap<String, Vec<u64>> = images
        .iter()
        .map(|(id, img)| (id.clone(), img.spmap.sizes()))
        .collect();
    let mut sweep = Vec::new();
    let mut best: Option<(f64, f64)> = None;
    for tau in threshold_grid() {
        let ap = masked_ap(detections, &confidences, instances, &sizes, tau, 0.5);
        sweep.push((tau, ap));
        if best.map_or(true, |(_, b)| ap > b) {
            best = Some((tau, ap));
        }
    }
    Ok((best.unwrap().0, sweep))
}
