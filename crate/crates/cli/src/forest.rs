//! Forest commands: mask-train, mask-predict, mask-threshold.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;

use geodepth_core::error::Error;
use geodepth_core::eval::{BoundingBox, Detection};
use geodepth_core::io::png::{read_superpixel_png, write_mask_png};
use geodepth_core::io::text::{
    read_calibration, read_detections, read_instances, read_intrinsics, Manifest, ManifestEntry,
};
use geodepth_core::io::model::{read_forest, write_forest};
use geodepth_core::maskforest::{
    cap_detections, predict_mask, region_pixel_mask, select_threshold, train_forest, warp_mask,
    warp_window, EvalImage, TrainParams, WarpedExample,
};
use geodepth_core::geocentric::Calibration;
use geodepth_core::geom::CameraIntrinsics;
use geodepth_core::regionfeat::SuperpixelMap;

use crate::support::{
    derive, ensure_dir, feature_image, for_entries, gravity_warning, id_filename, print_warnings,
    read_intensity, require_column, select_entries, write_text_file, Ctx,
};

/// Feature stack and superpixels for one manifest entry.
fn entry_inputs(
    manifest: &Manifest,
    entry: &ManifestEntry,
    k: &CameraIntrinsics,
    cal: &Calibration,
    radius: usize,
) -> anyhow::Result<(geodepth_core::maskforest::FeatureImage, SuperpixelMap, Option<String>)> {
    let derived = derive(&manifest.path(&entry.depth), k, radius)?;
    let intensity = entry
        .color
        .as_ref()
        .map(|c| read_intensity(&manifest.path(c)))
        .transpose()?;
    let features = feature_image(&derived, cal, intensity.as_ref())?;
    let sp_path = require_column(entry, &entry.superpixels, "superpixels")?;
    let spmap = read_superpixel_png(&manifest.path(sp_path))?;
    Ok((features, spmap, gravity_warning(&entry.id, &derived)))
}

#[derive(Args)]
pub struct MaskTrainArgs {
    /// Dataset manifest; entries need superpixels and instance files
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,
    /// Split to train on [default: train]
    #[arg(long, value_name = "TAG", default_value = "train")]
    split: String,
    /// Camera intrinsics file
    #[arg(long, value_name = "FILE")]
    intrinsics: PathBuf,
    /// Channel calibration file
    #[arg(long, value_name = "FILE")]
    calibration: PathBuf,
    /// Output forest model file
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Trees in the forest [config forest.trees, default 10]
    #[arg(long, value_name = "N")]
    trees: Option<usize>,
    /// Candidate questions per node [config forest.questions, default 1000]
    #[arg(long, value_name = "N")]
    questions: Option<usize>,
    /// Maximum tree depth [config forest.max_depth, default 20]
    #[arg(long, value_name = "N")]
    max_depth: Option<usize>,
    /// Minimum samples to split a node [config forest.min_samples, default 20]
    #[arg(long, value_name = "N")]
    min_samples: Option<usize>,
    /// Majority fraction at which a node becomes a leaf
    /// [config forest.purity, default 0.999]
    #[arg(long, value_name = "F")]
    purity: Option<f64>,
    /// Fraction of grid cells sampled per tree
    /// [config forest.cell_fraction, default 0.25]
    #[arg(long, value_name = "F")]
    cell_fraction: Option<f64>,
    /// Sample only single-probe questions [config forest.unary_only]
    #[arg(long)]
    unary_only: bool,
    /// Training seed [config forest.seed, default 0]
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,
    /// Normal-fit radius in pixels [config forest.radius, default 5]
    #[arg(long, value_name = "PX")]
    radius: Option<usize>,
}

pub fn mask_train(ctx: &Ctx, a: &MaskTrainArgs) -> anyhow::Result<()> {
    let k = read_intrinsics(&a.intrinsics)?;
    let cal = read_calibration(&a.calibration)?;
    let radius = ctx.usize_param(a.radius, "forest.radius", 5)?;
    let params = TrainParams {
        trees: ctx.usize_param(a.trees, "forest.trees", 10)?,
        questions: ctx.usize_param(a.questions, "forest.questions", 1000)?,
        max_depth: ctx.usize_param(a.max_depth, "forest.max_depth", 20)?,
        min_samples: ctx.usize_param(a.min_samples, "forest.min_samples", 20)?,
        purity: ctx.f64_param(a.purity, "forest.purity", 0.999)?,
        cell_fraction: ctx.f64_param(a.cell_fraction, "forest.cell_fraction", 0.25)?,
        unary_only: ctx.bool_param(a.unary_only, "forest.unary_only")?,
        seed: ctx.u64_param(a.seed, "forest.seed", 0)?,
    };
    let manifest = Manifest::load(&a.manifest)?;
    let entries = select_entries(&manifest, Some(&a.split))?;

    let per_entry = for_entries(&entries, |e| {
        let (features, spmap, warning) = entry_inputs(&manifest, e, &k, &cal, radius)?;
        let inst_path = require_column(e, &e.instances, "instances")?;
        let instances = read_instances(&manifest.path(inst_path), &e.id)?;
        let mut examples = Vec::with_capacity(instances.len());
        for (i, inst) in instances.iter().enumerate() {
            let build = || -> geodepth_core::Result<WarpedExample> {
                Ok(WarpedExample {
                    features: warp_window(&features, &inst.bbox)?,
                    mask: warp_mask(&region_pixel_mask(&spmap, &inst.region), &inst.bbox)?,
                })
            };
            examples.push(build().with_context(|| format!("instance {}", i + 1))?);
        }
        Ok((examples, warning))
    })?;

    let mut examples = Vec::new();
    let mut warnings = Vec::new();
    for (batch, warning) in per_entry {
        examples.extend(batch);
        warnings.push(warning);
    }
    print_warnings(warnings);

    let forest = train_forest(&examples, &params)?;
    write_forest(&a.out, &forest)?;
    Ok(())
}

#[derive(Args)]
pub struct MaskPredictArgs {
    /// Dataset manifest; entries need superpixel files
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,
    /// Only predict for this split
    #[arg(long, value_name = "TAG")]
    split: Option<String>,
    /// Camera intrinsics file
    #[arg(long, value_name = "FILE")]
    intrinsics: PathBuf,
    /// Channel calibration file
    #[arg(long, value_name = "FILE")]
    calibration: PathBuf,
    /// Trained forest model file
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Detection file; detections for images outside the selection are skipped
    #[arg(long, value_name = "FILE")]
    detections: PathBuf,
    /// Output directory: one <id>-<ordinal>.png mask per detection plus a
    /// masks.txt index
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
    /// Superpixel-confidence cutoff in [0, 1] [config forest.threshold]
    #[arg(long, value_name = "F")]
    threshold: Option<f64>,
    /// Keep only the top-N detections per class, 0 = all
    /// [config forest.limit, default 0]
    #[arg(long, value_name = "N")]
    limit: Option<usize>,
    /// Normal-fit radius in pixels [config forest.radius, default 5]
    #[arg(long, value_name = "PX")]
    radius: Option<usize>,
}

pub fn mask_predict(ctx: &Ctx, a: &MaskPredictArgs) -> anyhow::Result<()> {
    let k = read_intrinsics(&a.intrinsics)?;
    let cal = read_calibration(&a.calibration)?;
    let radius = ctx.usize_param(a.radius, "forest.radius", 5)?;
    let threshold = match a.threshold {
        Some(t) => t,
        None => match ctx.config.get("forest.threshold") {
            Some(raw) => raw.parse::<f64>().map_err(|_| {
                Error::InvalidParam(format!("config key forest.threshold: bad value {raw:?}"))
            })?,
            None => bail!("no mask threshold given (--threshold or config forest.threshold)"),
        },
    };
    let limit = ctx.usize_param(a.limit, "forest.limit", 0)?;
    let forest = read_forest(&a.model)?;
    let manifest = Manifest::load(&a.manifest)?;
    let entries = select_entries(&manifest, a.split.as_deref())?;

    let mut detections = read_detections(&a.detections)?;
    if limit > 0 {
        detections = cap_detections(&detections, limit);
    }
    let mut by_image: HashMap<&str, Vec<&Detection>> = HashMap::new();
    for d in &detections {
        by_image.entry(d.image_id.as_str()).or_default().push(d);
    }
    let selected: std::collections::HashSet<&str> =
        entries.iter().map(|e| e.id.as_str()).collect();
    let skipped = detections
        .iter()
        .filter(|d| !selected.contains(d.image_id.as_str()))
        .count();
    if skipped > 0 {
        eprintln!("warning: skipped {skipped} detections for images outside the selection");
    }

    ensure_dir(&a.out_dir)?;
    let per_entry = for_entries(&entries, |e| {
        let dets = by_image.get(e.id.as_str()).map_or(&[][..], |v| &v[..]);
        if dets.is_empty() {
            return Ok((Vec::new(), None));
        }
        let (features, spmap, warning) = entry_inputs(&manifest, e, &k, &cal, radius)?;
        let mut rows = Vec::with_capacity(dets.len());
        for (ordinal, det) in dets.iter().enumerate() {
            let mask = predict_mask(&forest, det, &features, &spmap, threshold)
                .with_context(|| format!("detection {ordinal}"))?;
            let name = id_filename(&e.id, &format!("-{ordinal:04}.png"))?;
            write_mask_png(
                &a.out_dir.join(&name),
                &region_pixel_mask(&spmap, &mask.superpixels),
            )?;
            rows.push(((*det).clone(), name));
        }
        Ok((rows, warning))
    })?;

    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for (batch, warning) in per_entry {
        rows.extend(batch);
        warnings.push(warning);
    }
    print_warnings(warnings);
    write_mask_index(&a.out_dir.join("masks.txt"), &rows)?;
    Ok(())
}

/// Detection rows plus the mask file each one produced, relative to the
/// index file's directory.
pub fn write_mask_index(path: &Path, rows: &[(Detection, String)]) -> anyhow::Result<()> {
    let mut s = String::from("# image_id class_id score x0 y0 x1 y1 mask\n");
    for (d, name) in rows {
        let b = &d.bbox;
        let _ = writeln!(
            s,
            "{} {} {:?} {:?} {:?} {:?} {:?} {}",
            d.image_id, d.class_id, d.score, b.x0, b.y0, b.x1, b.y1, name
        );
    }
    write_text_file(path, &s)
}

pub fn read_mask_index(path: &Path) -> anyhow::Result<Vec<(Detection, PathBuf)>> {
    let dir = path.parent().unwrap_or(Path::new("")).to_path_buf();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != 8 {
            return Err(Error::format(
                path,
                i + 1,
                "expected `image_id class_id score x0 y0 x1 y1 mask`",
            )
            .into());
        }
        let f = |j: usize| -> anyhow::Result<f64> {
            t[j].parse::<f64>()
                .map_err(|_| Error::format(path, i + 1, format!("bad float {:?}", t[j])).into())
        };
        rows.push((
            Detection {
                image_id: t[0].to_string(),
                class_id: t[1]
                    .parse()
                    .map_err(|_| Error::format(path, i + 1, format!("bad id {:?}", t[1])))?,
                score: f(2)?,
                bbox: BoundingBox::new(f(3)?, f(4)?, f(5)?, f(6)?)?,
            },
            dir.join(t[7]),
        ));
    }
    Ok(rows)
}

#[derive(Args)]
pub struct MaskThresholdArgs {
    /// Dataset manifest; entries need superpixels and instance files
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,
    /// Validation split [default: val]
    #[arg(long, value_name = "TAG", default_value = "val")]
    split: String,
    /// Camera intrinsics file
    #[arg(long, value_name = "FILE")]
    intrinsics: PathBuf,
    /// Channel calibration file
    #[arg(long, value_name = "FILE")]
    calibration: PathBuf,
    /// Trained forest model file
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Validation detections; detections for images outside the split are skipped
    #[arg(long, value_name = "FILE")]
    detections: PathBuf,
    /// Output file: the chosen threshold and the full sweep
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Normal-fit radius in pixels [config forest.radius, default 5]
    #[arg(long, value_name = "PX")]
    radius: Option<usize>,
}

pub fn mask_threshold(ctx: &Ctx, a: &MaskThresholdArgs) -> anyhow::Result<()> {
    let k = read_intrinsics(&a.intrinsics)?;
    let cal = read_calibration(&a.calibration)?;
    let radius = ctx.usize_param(a.radius, "forest.radius", 5)?;
    let forest = read_forest(&a.model)?;
    let manifest = Manifest::load(&a.manifest)?;
    let entries = select_entries(&manifest, Some(&a.split))?;

    let per_entry = for_entries(&entries, |e| {
        let (features, spmap, warning) = entry_inputs(&manifest, e, &k, &cal, radius)?;
        let inst_path = require_column(e, &e.instances, "instances")?;
        let instances = read_instances(&manifest.path(inst_path), &e.id)?;
        Ok((e.id.clone(), EvalImage { features, spmap }, instances, warning))
    })?;

    let mut images = HashMap::new();
    let mut instances = Vec::new();
    let mut warnings = Vec::new();
    for (id, image, inst, warning) in per_entry {
        images.insert(id, image);
        instances.extend(inst);
        warnings.push(warning);
    }
    print_warnings(warnings);

    let all = read_detections(&a.detections)?;
    let total = all.len();
    let detections: Vec<Detection> = all
        .into_iter()
        .filter(|d| images.contains_key(&d.image_id))
        .collect();
    if detections.len() < total {
        eprintln!(
            "warning: skipped {} detections for images outside the selection",
            total - detections.len()
        );
    }

    let (threshold, sweep) = select_threshold(&forest, &detections, &instances, &images)?;
    let mut text = format!("threshold {threshold:?}\n");
    for (tau, ap) in sweep {
        let _ = writeln!(text, "sweep {tau:?} {ap:?}");
    }
    write_text_file(&a.out, &text)?;
    println!("threshold {threshold:?}");
    Ok(())
}
