//! Shared fixtures: synthetic datasets on disk and invocations of the
//! `geodepth` binary.
#![allow(dead_code)] // not every test target uses every fixture

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use geodepth_core::eval::BoundingBox;
use geodepth_core::geom::CameraIntrinsics;
use geodepth_core::grid::Grid;
use geodepth_core::io::png::{write_depth_png, write_label_png, write_superpixel_png};
use geodepth_core::io::text::{
    write_instances, write_intrinsics, write_manifest, write_regions, ManifestEntry,
};
use geodepth_core::maskforest::GtInstance;
use geodepth_core::regionfeat::SuperpixelMap;
use geodepth_core::synth::{render, CameraPose, Primitive, Rendering, Scene};
use nalgebra::Vector3;

pub const W: usize = 120;
pub const H: usize = 90;
pub const BLOCK: usize = 6;

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_geodepth")
}

/// Runs the binary with a scrubbed environment.
pub fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .current_dir(dir)
        .env_remove("GEODEPTH_CONFIG")
        .output()
        .expect("launching geodepth")
}

#[track_caller]
pub fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "geodepth failed ({:?}):\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

pub fn camera() -> CameraIntrinsics {
    CameraIntrinsics::new(
        140.0,
        140.0,
        (W as f64 - 1.0) / 2.0,
        (H as f64 - 1.0) / 2.0,
        0.075,
    )
    .unwrap()
}

pub fn block_superpixels() -> SuperpixelMap {
    let per_row = W / BLOCK;
    let labels: Vec<u32> = (0..W * H)
        .map(|i| {
            let (x, y) = (i % W, i / W);
            ((y / BLOCK) * per_row + x / BLOCK) as u32
        })
        .collect();
    SuperpixelMap::new(Grid::from_vec(W, H, labels).unwrap()).unwrap()
}

/// Room-with-a-box scene number `i`; the box moves with `i` so images differ.
pub fn scene(i: usize) -> (Scene, usize) {
    let (mut scene, _, _, _) = Scene::room();
    let cx = 1.6 + 0.15 * (i % 3) as f64;
    let cz = 2.9 + 0.25 * (i % 2) as f64;
    let b = scene.add(Primitive::Aabb {
        min: Vector3::new(cx, 0.0, cz),
        max: Vector3::new(cx + 1.0, 0.5, cz + 1.0),
    });
    (scene, b)
}

pub fn pose(i: usize) -> CameraPose {
    CameraPose::oriented(
        Vector3::new(2.0 + 0.1 * (i % 2) as f64, 1.3 + 0.05 * (i % 3) as f64, 0.8),
        0.03 * (i % 3) as f64 - 0.03,
        (16.0 + 2.0 * (i % 4) as f64).to_radians(),
        (2.0 * (i % 3) as f64 - 2.0).to_radians(),
    )
}

pub fn render_scene(i: usize) -> (Rendering, usize) {
    let (scene, box_id) = scene(i);
    let r = render(&scene, &camera(), &pose(i), W, H, 20.0).unwrap();
    (r, box_id)
}

/// Superpixels mostly covered by the box, ascending.
pub fn box_region(rendering: &Rendering, box_id: usize, spmap: &SuperpixelMap) -> Vec<u32> {
    let mut votes = vec![0usize; spmap.count()];
    let mut totals = vec![0usize; spmap.count()];
    for y in 0..H {
        for x in 0..W {
            let sp = spmap.id(x, y) as usize;
            totals[sp] += 1;
            if *rendering.hit.get(x, y) == Some(box_id) {
                votes[sp] += 1;
            }
        }
    }
    (0..spmap.count())
        .filter(|&s| votes[s] * 2 > totals[s])
        .map(|s| s as u32)
        .collect()
}

pub fn tight_box(mask: &Grid<bool>) -> BoundingBox {
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0usize, 0usize);
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if *mask.get(x, y) {
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x + 1);
                y1 = y1.max(y + 1);
            }
        }
    }
    assert!(x0 < x1, "empty mask");
    BoundingBox::new(x0 as f64, y0 as f64, x1 as f64, y1 as f64).unwrap()
}

pub struct Dataset {
    pub dir: PathBuf,
    pub manifest: PathBuf,
    pub intrinsics: PathBuf,
    pub ids: Vec<String>,
    /// One box instance per image, aligned with `ids`.
    pub gt: Vec<GtInstance>,
}

/// Writes a dataset of rendered scenes under `dir`: depth, superpixels,
/// ranked regions, instances, semantic labels (0 background, 1 box), and the
/// manifest. `splits` gives consecutive image counts per split tag.
pub fn build_dataset(dir: &Path, splits: &[(&str, usize)]) -> Dataset {
    std::fs::create_dir_all(dir).unwrap();
    let spmap = block_superpixels();
    let mut entries = Vec::new();
    let mut ids = Vec::new();
    let mut gt = Vec::new();
    let mut i = 0usize;
    for &(split, count) in splits {
        for _ in 0..count {
            let id = format!("img{i}");
            let (rendering, box_id) = render_scene(i);
            let region = box_region(&rendering, box_id, &spmap);
            assert!(!region.is_empty(), "image {id}: box not visible");
            let mask = geodepth_core::maskforest::region_pixel_mask(&spmap, &region);
            let bbox = tight_box(&mask);

            write_depth_png(&dir.join(format!("{id}-depth.png")), &rendering.depth).unwrap();
            write_superpixel_png(&dir.join(format!("{id}-sp.png")), &spmap).unwrap();

            let instance = GtInstance {
                image_id: id.clone(),
                class_id: 1,
                bbox,
                region: region.clone(),
            };
            write_instances(&dir.join(format!("{id}-instances.txt")), &[instance.clone()])
                .unwrap();

            // Ranked candidates: the truth first, then weaker ones.
            let mut ranked = vec![region.clone()];
            if region.len() > 1 {
                ranked.push(region[..region.len() - 1].to_vec());
            }
            ranked.push(vec![0, 1, 2]);
            write_regions(&dir.join(format!("{id}-regions.txt")), &ranked).unwrap();

            let labels: Vec<u16> = mask.as_slice().iter().map(|&m| m as u16).collect();
            write_label_png(
                &dir.join(format!("{id}-labels.png")),
                &Grid::from_vec(W, H, labels).unwrap(),
            )
            .unwrap();

            entries.push(ManifestEntry {
                id: id.clone(),
                split: split.to_string(),
                depth: PathBuf::from(format!("{id}-depth.png")),
                color: None,
                superpixels: Some(PathBuf::from(format!("{id}-sp.png"))),
                regions: Some(PathBuf::from(format!("{id}-regions.txt"))),
                detections: None,
                instances: Some(PathBuf::from(format!("{id}-instances.txt"))),
                labels: Some(PathBuf::from(format!("{id}-labels.png"))),
            });
            ids.push(id);
            gt.push(instance);
            i += 1;
        }
    }
    let manifest = dir.join("manifest.txt");
    write_manifest(&manifest, &entries).unwrap();
    let intrinsics = dir.join("intrinsics.txt");
    write_intrinsics(&intrinsics, &camera()).unwrap();
    Dataset {
        dir: dir.to_path_buf(),
        manifest,
        intrinsics,
        ids,
        gt,
    }
}
