//! Evaluation commands: eval-coverage, eval-ap, eval-segm, nms.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};

use geodepth_core::eval::{
    average_precision, box_iou, coverage_curve, nms, region_iou, ApDetection, ApGroundTruth,
    ApResult, BoundingBox, CoverageInstance, Detection, ImageRegions, SegmentationAccumulator,
};
use geodepth_core::grid::Grid;
use geodepth_core::io::png::{read_label_png, read_mask_png, read_superpixel_png};
use geodepth_core::io::text::{
    read_detections, read_instances, read_regions, write_coverage_curve, write_detections,
    write_pr_curve,
};
use geodepth_core::io::text::Manifest;
use geodepth_core::maskforest::GtInstance;
use geodepth_core::regionfeat::SuperpixelMap;

use crate::support::{
    for_entries, id_filename, require_column, select_entries, write_text_file, Ctx,
};

#[derive(Args)]
pub struct EvalCoverageArgs {
    /// Dataset manifest; entries need superpixels and instance files
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,
    /// Only evaluate this split
    #[arg(long, value_name = "TAG")]
    split: Option<String>,
    /// Candidate-list depths to report
    #[arg(long, value_delimiter = ',', value_name = "K", default_values_t = [1usize, 10, 100])]
    k: Vec<usize>,
    /// Directory of ranked-region files (<id>.txt), overriding the manifest
    /// regions column
    #[arg(long, value_name = "DIR")]
    ranks: Option<PathBuf>,
    /// Class universe; listed classes without instances are excluded with a
    /// warning, instances outside it are an error
    #[arg(long, value_delimiter = ',', value_name = "ID")]
    classes: Option<Vec<u32>>,
    /// Output coverage curve
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

pub fn eval_coverage(_ctx: &Ctx, a: &EvalCoverageArgs) -> anyhow::Result<()> {
    let manifest = Manifest::load(&a.manifest)?;
    let entries = select_entries(&manifest, a.split.as_deref())?;

    let per_entry = for_entries(&entries, |e| {
        let sp_path = require_column(e, &e.superpixels, "superpixels")?;
        let spmap = read_superpixel_png(&manifest.path(sp_path))?;
        let ranked = match &a.ranks {
            Some(dir) => read_regions(&dir.join(id_filename(&e.id, ".txt")?))?,
            None => {
                let path = require_column(e, &e.regions, "regions")?;
                read_regions(&manifest.path(path))?
            }
        };
        let inst_path = require_column(e, &e.instances, "instances")?;
        let instances = read_instances(&manifest.path(inst_path), &e.id)?;
        Ok((
            ImageRegions {
                sizes: spmap.sizes(),
                ranked,
            },
            instances,
        ))
    })?;

    let mut images = Vec::with_capacity(per_entry.len());
    let mut instances = Vec::new();
    for (idx, (image, inst)) in per_entry.into_iter().enumerate() {
        images.push(image);
        instances.extend(inst.into_iter().map(|g| CoverageInstance {
            class_id: g.class_id,
            image: idx,
            region: g.region,
        }));
    }

    let curve = coverage_curve(&instances, &images, &a.k, a.classes.as_deref())?;
    if let Some((_, first)) = curve.first() {
        if !first.excluded_classes.is_empty() {
            eprintln!(
                "warning: {} classes have no instances and were excluded",
                first.excluded_classes.len()
            );
        }
    }
    let points: Vec<(usize, f64)> = curve.iter().map(|(k, r)| (*k, r.coverage)).collect();
    write_coverage_curve(&a.out, &points)?;
    for (k, c) in &points {
        println!("coverage {k} {c:?}");
    }
    Ok(())
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
pub enum ApMode {
    /// Box-overlap matching of detection files
    Box,
    /// Region-overlap matching of predicted-mask indexes
    Region,
}

#[derive(Args)]
pub struct EvalApArgs {
    /// Dataset manifest; entries need instance files (and superpixels for
    /// region mode)
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,
    /// Only evaluate this split
    #[arg(long, value_name = "TAG")]
    split: Option<String>,
    /// Overlap kind to match with
    #[arg(long, value_enum, default_value = "box")]
    mode: ApMode,
    /// Detection file (box mode)
    #[arg(long, value_name = "FILE", required_if_eq("mode", "box"))]
    detections: Option<PathBuf>,
    /// Mask index from mask-predict (region mode)
    #[arg(long, value_name = "FILE", required_if_eq("mode", "region"))]
    masks: Option<PathBuf>,
    /// Matching threshold [config eval.overlap, default 0.5]
    #[arg(long, value_name = "F")]
    overlap: Option<f64>,
    /// Per-class precision/recall curve directory
    #[arg(long, value_name = "DIR")]
    pr_dir: Option<PathBuf>,
    /// Output file; stdout when absent
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

/// Sorted ids of the superpixels a pixel mask touches.
fn mask_region(spmap: &SuperpixelMap, mask: &Grid<bool>) -> anyhow::Result<Vec<u32>> {
    if !mask.same_shape(spmap.labels()) {
        bail!(
            "mask is {}x{} but the superpixel map is {}x{}",
            mask.width(),
            mask.height(),
            spmap.width(),
            spmap.height()
        );
    }
    let mut touched = vec![false; spmap.count()];
    for (label, &on) in spmap.labels().as_slice().iter().zip(mask.as_slice()) {
        if on {
            touched[*label as usize] = true;
        }
    }
    Ok(touched
        .iter()
        .enumerate()
        .filter_map(|(id, &t)| t.then_some(id as u32))
        .collect())
}

fn class_rows(results: &[(u32, Option<ApResult>)]) -> String {
    let mut text = String::new();
    let mut sum = 0.0;
    for (class, result) in results {
        let r = result.as_ref().expect("classes come from ground truth");
        sum += r.ap;
        let _ = writeln!(
            text,
            "class {class} {:?} {} {}",
            r.ap, r.true_positives, r.ground_truths
        );
    }
    let _ = writeln!(text, "mean {:?}", sum / results.len() as f64);
    text
}

pub fn eval_ap(ctx: &Ctx, a: &EvalApArgs) -> anyhow::Result<()> {
    let overlap = ctx.f64_param(a.overlap, "eval.overlap", 0.5)?;
    let manifest = Manifest::load(&a.manifest)?;
    let entries = select_entries(&manifest, a.split.as_deref())?;
    let region_mode = a.mode == ApMode::Region;

    let per_entry = for_entries(&entries, |e| {
        let inst_path = require_column(e, &e.instances, "instances")?;
        let instances = read_instances(&manifest.path(inst_path), &e.id)?;
        let sizes = if region_mode {
            let sp_path = require_column(e, &e.superpixels, "superpixels")?;
            Some(read_superpixel_png(&manifest.path(sp_path))?)
        } else {
            None
        };
        Ok((instances, sizes))
    })?;

    let mut instances: Vec<GtInstance> = Vec::new();
    let mut spmaps: HashMap<&str, SuperpixelMap> = HashMap::new();
    for (e, (inst, spmap)) in entries.iter().zip(per_entry) {
        instances.extend(inst);
        if let Some(m) = spmap {
            spmaps.insert(e.id.as_str(), m);
        }
    }
    let mut classes: Vec<u32> = instances.iter().map(|g| g.class_id).collect();
    classes.sort_unstable();
    classes.dedup();
    if classes.is_empty() {
        bail!("the selected images have no ground-truth instances");
    }

    let selected: std::collections::HashSet<&str> =
        entries.iter().map(|e| e.id.as_str()).collect();
    let results: Vec<(u32, Option<ApResult>)> = match a.mode {
        ApMode::Box => {
            let path = a.detections.as_ref().expect("required_if_eq");
            let all = read_detections(path)?;
            let total = all.len();
            let dets: Vec<Detection> = all
                .into_iter()
                .filter(|d| selected.contains(d.image_id.as_str()))
                .collect();
            if dets.len() < total {
                eprintln!(
                    "warning: skipped {} detections for images outside the selection",
                    total - dets.len()
                );
            }
            classes
                .iter()
                .map(|&class| {
                    let d: Vec<ApDetection<BoundingBox>> = dets
                        .iter()
                        .filter(|d| d.class_id == class)
                        .map(|d| ApDetection {
                            image_id: d.image_id.clone(),
                            score: d.score,
                            sort_key: d.bbox.sort_key(),
                            shape: d.bbox.clone(),
                        })
                        .collect();
                    let g: Vec<ApGroundTruth<BoundingBox>> = instances
                        .iter()
                        .filter(|g| g.class_id == class)
                        .map(|g| ApGroundTruth {
                            image_id: g.image_id.clone(),
                            shape: g.bbox.clone(),
                        })
                        .collect();
                    (class, average_precision(&d, &g, overlap, |_, a, b| box_iou(a, b)))
                })
                .collect()
        }
        ApMode::Region => {
            let path = a.masks.as_ref().expect("required_if_eq");
            let rows = crate::forest::read_mask_index(path)?;
            let skipped = rows
                .iter()
                .filter(|(d, _)| !selected.contains(d.image_id.as_str()))
                .count();
            if skipped > 0 {
                eprintln!(
                    "warning: skipped {skipped} detections for images outside the selection"
                );
            }
            let mut dets: Vec<(Detection, Vec<u32>)> = Vec::new();
            for (d, mask_path) in rows {
                let Some(spmap) = spmaps.get(d.image_id.as_str()) else {
                    continue;
                };
                let mask = read_mask_png(&mask_path)?;
                let region = mask_region(spmap, &mask)
                    .with_context(|| format!("mask {}", mask_path.display()))?;
                dets.push((d, region));
            }
            let sizes: HashMap<String, Vec<u64>> = spmaps
                .iter()
                .map(|(id, m)| (id.to_string(), m.sizes()))
                .collect();
            classes
                .iter()
                .map(|&class| {
                    let d: Vec<ApDetection<Vec<u32>>> = dets
                        .iter()
                        .filter(|(d, _)| d.class_id == class)
                        .map(|(d, region)| ApDetection {
                            image_id: d.image_id.clone(),
                            score: d.score,
                            sort_key: d.bbox.sort_key(),
                            shape: region.clone(),
                        })
                        .collect();
                    let g: Vec<ApGroundTruth<Vec<u32>>> = instances
                        .iter()
                        .filter(|g| g.class_id == class)
                        .map(|g| ApGroundTruth {
                            image_id: g.image_id.clone(),
                            shape: g.region.clone(),
                        })
                        .collect();
                    let result = average_precision(&d, &g, overlap, |image, a, b| {
                        region_iou(a, b, &sizes[image])
                    });
                    (class, result)
                })
                .collect()
        }
    };

    if let Some(dir) = &a.pr_dir {
        crate::support::ensure_dir(dir)?;
        for (class, result) in &results {
            let r = result.as_ref().expect("classes come from ground truth");
            write_pr_curve(&dir.join(format!("class-{class}.txt")), r)?;
        }
    }
    let text = class_rows(&results);
    match &a.out {
        Some(path) => write_text_file(path, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

#[derive(Args)]
pub struct EvalSegmArgs {
    /// Dataset manifest; entries need label files
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,
    /// Only evaluate this split
    #[arg(long, value_name = "TAG")]
    split: Option<String>,
    /// Directory of predicted label maps (<id>.png)
    #[arg(long, value_name = "DIR")]
    pred: PathBuf,
    /// Number of classes; labels must be below this
    #[arg(long, value_name = "N")]
    classes: usize,
    /// Ground-truth label to skip everywhere
    #[arg(long, value_name = "L")]
    ignore: Option<u16>,
    /// Output file; stdout when absent
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

pub fn eval_segm(_ctx: &Ctx, a: &EvalSegmArgs) -> anyhow::Result<()> {
    let manifest = Manifest::load(&a.manifest)?;
    let entries = select_entries(&manifest, a.split.as_deref())?;

    let pairs = for_entries(&entries, |e| {
        let gt_path = require_column(e, &e.labels, "labels")?;
        let gt = read_label_png(&manifest.path(gt_path))?;
        let pred = read_label_png(&a.pred.join(id_filename(&e.id, ".png")?))?;
        Ok((pred, gt))
    })?;

    let mut acc = SegmentationAccumulator::new(a.classes, a.ignore)?;
    for ((pred, gt), e) in pairs.iter().zip(&entries) {
        acc.add(pred, gt).with_context(|| format!("image {}", e.id))?;
    }
    let metrics = acc.finish()?;

    let mut text = format!("pixel_accuracy {:?}\n", metrics.pixel_accuracy);
    let _ = writeln!(text, "mean_iou {:?}", metrics.mean_iou);
    let _ = writeln!(
        text,
        "frequency_weighted_iou {:?}",
        metrics.frequency_weighted_iou
    );
    for (class, iou) in metrics.per_class_iou.iter().enumerate() {
        match iou {
            Some(v) => {
                let _ = writeln!(text, "class {class} {v:?}");
            }
            None => {
                let _ = writeln!(text, "class {class} -");
            }
        }
    }
    match &a.out {
        Some(path) => write_text_file(path, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

#[derive(Args)]
pub struct NmsArgs {
    /// Input detection file
    #[arg(long, value_name = "FILE")]
    detections: PathBuf,
    /// Boxes overlapping a kept box more than this are dropped
    /// [config nms.overlap, default 0.3]
    #[arg(long, value_name = "F")]
    overlap: Option<f64>,
    /// Output detection file
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

pub fn nms_cmd(ctx: &Ctx, a: &NmsArgs) -> anyhow::Result<()> {
    let overlap = ctx.f64_param(a.overlap, "nms.overlap", 0.3)?;
    let detections = read_detections(&a.detections)?;
    let kept = nms(&detections, overlap)?;
    write_detections(&a.out, &kept)?;
    println!("kept {} of {} detections", kept.len(), detections.len());
    Ok(())
}
