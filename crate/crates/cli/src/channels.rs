//! Per-image channel commands: hha, normals, gravity, gradients,
//! regionfeat, simulate-kinect, and calibrate.

use std::path::PathBuf;

use anyhow::Context;
use clap::{ArgGroup, Args};
use rayon::prelude::*;

use geodepth_core::geocentric::{encode_hha, to_gravity_frame, CalibrationAccumulator};
use geodepth_core::geom::backproject;
use geodepth_core::io::png::{
    read_depth_png, read_superpixel_png, write_depth_png, write_gradient_set_pngs,
    write_hha_png, write_normals_png,
};
use geodepth_core::io::text::{
    read_calibration, read_intrinsics, read_regions, write_calibration, Manifest,
};
use geodepth_core::kinect::{simulate_kinect as kinect_sim, KinectModel};
use geodepth_core::math::mix_seed;
use geodepth_core::normals::{estimate_normals, normal_gradients};
use geodepth_core::regionfeat::{accumulate, region_features, Region, FEATURE_NAMES};

use crate::support::{
    derive, ensure_dir, for_entries, gravity_warning, id_filename, path_id, print_warnings,
    require_column, select_entries, write_text_file, Ctx,
};

#[derive(Args)]
#[command(group = ArgGroup::new("input").required(true).args(["depth", "manifest"]))]
pub struct HhaArgs {
    /// Camera intrinsics file
    #[arg(long, value_name = "FILE")]
    intrinsics: PathBuf,
    /// Channel calibration file
    #[arg(long, value_name = "FILE")]
    calibration: PathBuf,
    /// Depth PNG (single-image mode)
    #[arg(long, value_name = "FILE", requires = "out", conflicts_with_all = ["split", "out_dir"])]
    depth: Option<PathBuf>,
    /// Output PNG (single-image mode)
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Dataset manifest (batch mode; writes <id>.png per image)
    #[arg(long, value_name = "FILE", requires = "out_dir", conflicts_with = "out")]
    manifest: Option<PathBuf>,
    /// Only process this split
    #[arg(long, value_name = "TAG")]
    split: Option<String>,
    /// Output directory (batch mode)
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Normal-fit radius in pixels [config hha.radius, default 5]
    #[arg(long, value_name = "PX")]
    radius: Option<usize>,
}

pub fn hha(ctx: &Ctx, a: &HhaArgs) -> anyhow::Result<()> {
    let k = read_intrinsics(&a.intrinsics)?;
    let cal = read_calibration(&a.calibration)?;
    let radius = ctx.usize_param(a.radius, "hha.radius", 5)?;
    if let Some(depth) = &a.depth {
        let d = derive(depth, &k, radius)?;
        print_warnings([gravity_warning(&path_id(depth), &d)]);
        let hha = encode_hha(&d.disparity, &d.height, &d.angle, &cal)?;
        return write_hha_png(a.out.as_ref().unwrap(), &hha).map_err(Into::into);
    }
    let manifest = Manifest::load(a.manifest.as_ref().unwrap())?;
    let entries = select_entries(&manifest, a.split.as_deref())?;
    let out_dir = a.out_dir.as_ref().unwrap();
    ensure_dir(out_dir)?;
    let warnings = for_entries(&entries, |e| {
        let d = derive(&manifest.path(&e.depth), &k, radius)?;
        let hha = encode_hha(&d.disparity, &d.height, &d.angle, &cal)?;
        write_hha_png(&out_dir.join(id_filename(&e.id, ".png")?), &hha)?;
        Ok(gravity_warning(&e.id, &d))
    })?;
    print_warnings(warnings);
    Ok(())
}

#[derive(Args)]
#[command(group = ArgGroup::new("input").required(true).args(["depth", "manifest"]))]
pub struct NormalsArgs {
    /// Camera intrinsics file
    #[arg(long, value_name = "FILE")]
    intrinsics: PathBuf,
    /// Depth PNG (single-image mode)
    #[arg(long, value_name = "FILE", requires = "out", conflicts_with_all = ["split", "out_dir"])]
    depth: Option<PathBuf>,
    /// Output PNG (single-image mode); 16-bit RGBA, quantized (lossy)
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Dataset manifest (batch mode; writes <id>.png per image)
    #[arg(long, value_name = "FILE", requires = "out_dir", conflicts_with = "out")]
    manifest: Option<PathBuf>,
    /// Only process this split
    #[arg(long, value_name = "TAG")]
    split: Option<String>,
    /// Output directory (batch mode)
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Plane-fit radius in pixels [config normals.radius, default 3]
    #[arg(long, value_name = "PX")]
    radius: Option<usize>,
}

pub fn normals(ctx: &Ctx, a: &NormalsArgs) -> anyhow::Result<()> {
    let k = read_intrinsics(&a.intrinsics)?;
    let radius = ctx.usize_param(a.radius, "normals.radius", 3)?;
    let compute = |depth_path: &std::path::Path, out: &std::path::Path| -> anyhow::Result<()> {
        let depth = read_depth_png(depth_path)?;
        let cloud = backproject(&depth, &k)?;
        let map = estimate_normals(&cloud, radius)?;
        Ok(write_normals_png(out, &map)?)
    };
    if let Some(depth) = &a.depth {
        return compute(depth, a.out.as_ref().unwrap());
    }
    let manifest = Manifest::load(a.manifest.as_ref().unwrap())?;
    let entries = select_entries(&manifest, a.split.as_deref())?;
    let out_dir = a.out_dir.as_ref().unwrap();
    ensure_dir(out_dir)?;
    for_entries(&entries, |e| {
        compute(
            &manifest.path(&e.depth),
            &out_dir.join(id_filename(&e.id, ".png")?),
        )
    })?;
    Ok(())
}

#[derive(Args)]
#[command(group = ArgGroup::new("input").required(true).args(["depth", "manifest"]))]
pub struct GravityArgs {
    /// Camera intrinsics file
    #[arg(long, value_name = "FILE")]
    intrinsics: PathBuf,
    /// Depth PNG (single-image mode)
    #[arg(long, value_name = "FILE", conflicts_with = "split")]
    depth: Option<PathBuf>,
    /// Dataset manifest (batch mode)
    #[arg(long, value_name = "FILE", requires = "out")]
    manifest: Option<PathBuf>,
    /// Only process this split
    #[arg(long, value_name = "TAG")]
    split: Option<String>,
    /// Output file of `id down_x down_y down_z aligned status` lines
    /// (single-image mode prints to stdout when omitted)
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Normal-fit radius in pixels [config gravity.radius, default 5]
    #[arg(long, value_name = "PX")]
    radius: Option<usize>,
}

pub fn gravity(ctx: &Ctx, a: &GravityArgs) -> anyhow::Result<()> {
    let k = read_intrinsics(&a.intrinsics)?;
    let radius = ctx.usize_param(a.radius, "gravity.radius", 5)?;
    let line_of = |id: &str, depth_path: &std::path::Path| -> anyhow::Result<(String, Option<String>)> {
        let d = derive(depth_path, &k, radius)?;
        let aligned = d.gravity.as_ref().map(|g| g.aligned_fraction).unwrap_or(0.0);
        let status = if d.gravity.is_ok() { "ok" } else { "fallback" };
        let g = &d.down;
        Ok((
            format!("{id} {:?} {:?} {:?} {aligned:?} {status}", g.x, g.y, g.z),
            gravity_warning(id, &d),
        ))
    };

    let mut rows = Vec::new();
    if let Some(depth) = &a.depth {
        let (row, warning) = line_of(&path_id(depth), depth)?;
        print_warnings([warning]);
        rows.push(row);
    } else {
        let manifest = Manifest::load(a.manifest.as_ref().unwrap())?;
        let entries = select_entries(&manifest, a.split.as_deref())?;
        let results = for_entries(&entries, |e| line_of(&e.id, &manifest.path(&e.depth)))?;
        let mut warnings = Vec::new();
        for (row, warning) in results {
            rows.push(row);
            warnings.push(warning);
        }
        print_warnings(warnings);
    }

    let mut text = String::from("# id down_x down_y down_z aligned status\n");
    for row in rows {
        text.push_str(&row);
        text.push('\n');
    }
    match &a.out {
        Some(path) => write_text_file(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[derive(Args)]
pub struct GradientsArgs {
    /// Camera intrinsics file
    #[arg(long, value_name = "FILE")]
    intrinsics: PathBuf,
    /// Depth PNG
    #[arg(long, value_name = "FILE")]
    depth: PathBuf,
    /// Output directory for <stem>-r<radius>-o<orientation>-{convex,concave,dg}.png
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
    /// Output file stem (default: depth file stem)
    #[arg(long, value_name = "NAME")]
    stem: Option<String>,
    /// Half-disk radii in pixels [default 3,5]
    #[arg(long, value_delimiter = ',', value_name = "PX")]
    radii: Option<Vec<usize>>,
    /// Orientation count [config gradients.orientations, default 8]
    #[arg(long, value_name = "N")]
    orientations: Option<usize>,
}

pub fn gradients(ctx: &Ctx, a: &GradientsArgs) -> anyhow::Result<()> {
    let k = read_intrinsics(&a.intrinsics)?;
    let radii = match &a.radii {
        Some(r) => r.clone(),
        None => match ctx.config.get("gradients.radii") {
            Some(raw) => raw
                .split(',')
                .map(|t| t.trim().parse::<usize>())
                .collect::<Result<Vec<usize>, _>>()
                .map_err(|_| anyhow::anyhow!("config key gradients.radii: bad value {raw:?}"))?,
            None => vec![3, 5],
        },
    };
    let orientations = ctx.usize_param(a.orientations, "gradients.orientations", 8)?;
    let stem = a.stem.clone().unwrap_or_else(|| path_id(&a.depth));

    let depth = read_depth_png(&a.depth)?;
    let cloud = backproject(&depth, &k)?;
    let maps = normal_gradients(&cloud, &radii, orientations)?;
    ensure_dir(&a.out_dir)?;
    for (ri, &radius) in maps.radii().iter().enumerate() {
        for o in 0..maps.orientations() {
            write_gradient_set_pngs(
                &a.out_dir,
                &format!("{stem}-r{radius}-o{o}"),
                maps.channel_set(ri, o),
            )?;
        }
    }
    Ok(())
}

#[derive(Args)]
#[command(group = ArgGroup::new("input").required(true).args(["depth", "manifest"]))]
pub struct RegionfeatArgs {
    /// Camera intrinsics file
    #[arg(long, value_name = "FILE")]
    intrinsics: PathBuf,
    /// Depth PNG (single-image mode)
    #[arg(long, value_name = "FILE", requires_all = ["superpixels", "regions", "out"],
          conflicts_with_all = ["split", "out_dir"])]
    depth: Option<PathBuf>,
    /// Superpixel label PNG (single-image mode)
    #[arg(long, value_name = "FILE")]
    superpixels: Option<PathBuf>,
    /// Region file, one line of superpixel ids per region (single-image mode)
    #[arg(long, value_name = "FILE")]
    regions: Option<PathBuf>,
    /// Output feature table (single-image mode)
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Dataset manifest (batch mode; writes <id>.txt per image)
    #[arg(long, value_name = "FILE", requires = "out_dir", conflicts_with = "out")]
    manifest: Option<PathBuf>,
    /// Only process this split
    #[arg(long, value_name = "TAG")]
    split: Option<String>,
    /// Output directory (batch mode)
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Normal-fit radius in pixels [config regionfeat.radius, default 5]
    #[arg(long, value_name = "PX")]
    radius: Option<usize>,
}

pub fn regionfeat(ctx: &Ctx, a: &RegionfeatArgs) -> anyhow::Result<()> {
    let k = read_intrinsics(&a.intrinsics)?;
    let radius = ctx.usize_param(a.radius, "regionfeat.radius", 5)?;
    let compute = |depth_path: &std::path::Path,
                   sp_path: &std::path::Path,
                   regions_path: &std::path::Path,
                   out: &std::path::Path|
     -> anyhow::Result<Option<String>> {
        let d = derive(depth_path, &k, radius)?;
        let spmap = read_superpixel_png(sp_path)?;
        let regions = read_regions(regions_path)?;
        let world = to_gravity_frame(&d.cloud, &d.down);
        let agg = accumulate(&d.disparity, &d.height, &d.angle, &world, &spmap)?;
        let mut text = format!("# {}\n", FEATURE_NAMES.join(" "));
        for (i, ids) in regions.iter().enumerate() {
            let region = Region::new(ids.clone(), spmap.count())
                .with_context(|| format!("region on line {}", i + 1))?;
            let features = region_features(&region, &agg)
                .with_context(|| format!("region on line {}", i + 1))?;
            text.push_str(&geodepth_core::io::float_row(&features.values));
            text.push('\n');
        }
        write_text_file(out, &text)?;
        Ok(gravity_warning(&path_id(depth_path), &d))
    };

    if let Some(depth) = &a.depth {
        let warning = compute(
            depth,
            a.superpixels.as_ref().unwrap(),
            a.regions.as_ref().unwrap(),
            a.out.as_ref().unwrap(),
        )?;
        print_warnings([warning]);
        return Ok(());
    }
    let manifest = Manifest::load(a.manifest.as_ref().unwrap())?;
    let entries = select_entries(&manifest, a.split.as_deref())?;
    let out_dir = a.out_dir.as_ref().unwrap();
    ensure_dir(out_dir)?;
    let warnings = for_entries(&entries, |e| {
        let sp = require_column(e, &e.superpixels, "superpixels")?;
        let regions = require_column(e, &e.regions, "regions")?;
        compute(
            &manifest.path(&e.depth),
            &manifest.path(sp),
            &manifest.path(regions),
            &out_dir.join(id_filename(&e.id, ".txt")?),
        )
    })?;
    print_warnings(warnings);
    Ok(())
}

#[derive(Args)]
#[command(group = ArgGroup::new("input").required(true).args(["depth", "manifest"]))]
pub struct SimulateKinectArgs {
    /// Camera intrinsics file (for the disparity conversion)
    #[arg(long, value_name = "FILE")]
    intrinsics: PathBuf,
    /// Clean depth PNG (single-image mode)
    #[arg(long, value_name = "FILE", requires = "out", conflicts_with_all = ["split", "out_dir"])]
    depth: Option<PathBuf>,
    /// Output PNG (single-image mode)
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Dataset manifest (batch mode; writes <id>.png per image)
    #[arg(long, value_name = "FILE", requires = "out_dir", conflicts_with = "out")]
    manifest: Option<PathBuf>,
    /// Only process this split
    #[arg(long, value_name = "TAG")]
    split: Option<String>,
    /// Output directory (batch mode)
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Disparity quantization step in pixels [config kinect.step, default 0.125]
    #[arg(long, value_name = "PX")]
    step: Option<f64>,
    /// Disparity noise std in pixels [config kinect.sigma, default 0.5]
    #[arg(long, value_name = "PX")]
    sigma: Option<f64>,
    /// Noise-grid downscale factor [config kinect.downscale, default 4]
    #[arg(long, value_name = "N")]
    downscale: Option<usize>,
    /// Master seed; image i uses a stream derived from (seed, i)
    /// [config kinect.seed, default 0]
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,
}

pub fn simulate_kinect(ctx: &Ctx, a: &SimulateKinectArgs) -> anyhow::Result<()> {
    let k = read_intrinsics(&a.intrinsics)?;
    let model = KinectModel {
        step: ctx.f64_param(a.step, "kinect.step", 0.125)?,
        sigma: ctx.f64_param(a.sigma, "kinect.sigma", 0.5)?,
        downscale: ctx.usize_param(a.downscale, "kinect.downscale", 4)?,
    };
    model.validate()?;
    let seed = ctx.u64_param(a.seed, "kinect.seed", 0)?;

    if let Some(depth_path) = &a.depth {
        let depth = read_depth_png(depth_path)?;
        let noisy = kinect_sim(&depth, &k, &model, seed)?;
        return write_depth_png(a.out.as_ref().unwrap(), &noisy).map_err(Into::into);
    }
    let manifest = Manifest::load(a.manifest.as_ref().unwrap())?;
    let entries = select_entries(&manifest, a.split.as_deref())?;
    let out_dir = a.out_dir.as_ref().unwrap();
    ensure_dir(out_dir)?;
    let indexed: Vec<(usize, &geodepth_core::io::text::ManifestEntry)> =
        entries.iter().copied().enumerate().collect();
    indexed
        .par_iter()
        .map(|(i, e)| -> anyhow::Result<()> {
            let depth = read_depth_png(&manifest.path(&e.depth))?;
            let noisy = kinect_sim(&depth, &k, &model, mix_seed(seed, *i as u64))?;
            write_depth_png(&out_dir.join(id_filename(&e.id, ".png")?), &noisy)?;
            Ok(())
        })
        .collect::<anyhow::Result<Vec<()>>>()
        .with_context(|| format!("simulating {}", a.manifest.as_ref().unwrap().display()))?;
    Ok(())
}

#[derive(Args)]
pub struct CalibrateArgs {
    /// Dataset manifest
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,
    /// Split to pool channel values over [default: train]
    #[arg(long, value_name = "TAG", default_value = "train")]
    split: String,
    /// Camera intrinsics file
    #[arg(long, value_name = "FILE")]
    intrinsics: PathBuf,
    /// Output calibration file
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Low percentile [config calibrate.low, default 0.5]
    #[arg(long, value_name = "PCT")]
    low: Option<f64>,
    /// High percentile [config calibrate.high, default 99.5]
    #[arg(long, value_name = "PCT")]
    high: Option<f64>,
    /// Normal-fit radius in pixels [config calibrate.radius, default 5]
    #[arg(long, value_name = "PX")]
    radius: Option<usize>,
}

pub fn calibrate(ctx: &Ctx, a: &CalibrateArgs) -> anyhow::Result<()> {
    let k = read_intrinsics(&a.intrinsics)?;
    let low = ctx.f64_param(a.low, "calibrate.low", 0.5)?;
    let high = ctx.f64_param(a.high, "calibrate.high", 99.5)?;
    let radius = ctx.usize_param(a.radius, "calibrate.radius", 5)?;
    let manifest = Manifest::load(&a.manifest)?;
    let entries = select_entries(&manifest, Some(&a.split))?;

    let derived = for_entries(&entries, |e| derive(&manifest.path(&e.depth), &k, radius))?;
    let mut warnings = Vec::new();
    let mut acc = CalibrationAccumulator::new((low, high))?;
    for (e, d) in entries.iter().zip(&derived) {
        warnings.push(gravity_warning(&e.id, d));
        acc.add_image(&d.disparity, &d.height, &d.angle);
    }
    print_warnings(warnings);
    let cal = acc.finish()?;
    write_calibration(&a.out, &cal)?;
    Ok(())
}

