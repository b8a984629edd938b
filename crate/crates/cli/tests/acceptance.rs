//! Acceptance gate: nine checks covering oracle equivalence of the scoring
//! code, geometric accuracy on synthetic scenes, encoder and forest
//! structure, learnability, CLI determinism, and segmentation scoring.
//! Each test prints `[acceptance] criterion N: PASS|FAIL`.

mod common;

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use geodepth_core::eval::{
    average_precision, box_iou, coverage, region_iou, ApDetection, ApGroundTruth, BoundingBox,
    CoverageInstance, Detection, ImageRegions, SegmentationAccumulator,
};
use geodepth_core::geocentric::{
    derive_channels, encode_hha, fit_calibration, to_gravity_frame, AngleMap, Calibration,
    ChannelRange, DepthDerived, HeightMap, DEFAULT_CALIBRATION_PERCENTILES,
};
use geodepth_core::geom::{CameraIntrinsics, DepthImage, DisparityMap};
use geodepth_core::grid::{Grid, ScalarField};
use geodepth_core::io::model::{read_forest, write_forest};
use geodepth_core::io::text::{write_detections, write_manifest, ManifestEntry};
use geodepth_core::maskforest::{
    assign_detections, predict_confidence, predict_mask, region_pixel_mask, train_forest,
    warp_mask, warp_window, FeatureImage, GtInstance, TrainParams, WarpedExample, GRID,
};
use geodepth_core::regionfeat::{
    accumulate, region_features, Region, SuperpixelMap, DOWN_MIN_ANGLE, FEATURE_NAMES,
    UP_MAX_ANGLE, VERTICAL_BAND,
};
use geodepth_core::synth::{render, CameraPose, Primitive, Rendering, Scene};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

type Verdict = Result<(), String>;

fn criterion(n: usize, body: impl FnOnce() -> Verdict) {
    match body() {
        Ok(()) => println!("[acceptance] criterion {n}: PASS"),
        Err(msg) => {
            println!("[acceptance] criterion {n}: FAIL");
            panic!("criterion {n}: {msg}");
        }
    }
}

macro_rules! check {
    ($cond:expr, $($why:tt)+) => {
        if !($cond) {
            return Err(format!($($why)+));
        }
    };
}

fn within(t0: Instant, budget: Duration, what: &str) -> Verdict {
    let took = t0.elapsed();
    check!(took <= budget, "{what} took {took:?}, budget {budget:?}");
    Ok(())
}

fn fail(e: impl std::fmt::Display) -> String {
    e.to_string()
}

// --- criterion 1: coverage vs. brute force ---------------------------------

/// Set-based IoU over superpixel sizes; same integers, one division.
fn oracle_region_iou(a: &[u32], b: &[u32], sizes: &[u64]) -> f64 {
    let sa: HashSet<u32> = a.iter().copied().collect();
    let weight = |ids: &[u32]| ids.iter().map(|&i| sizes[i as usize]).sum::<u64>();
    let inter: u64 = b
        .iter()
        .filter(|id| sa.contains(id))
        .map(|&i| sizes[i as usize])
        .sum();
    let union = weight(a) + weight(b) - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Direct evaluation: per class, mean over its instances of the best overlap
/// among the first K candidates; then the unweighted mean over classes.
fn oracle_coverage(instances: &[CoverageInstance], images: &[ImageRegions], k: usize) -> f64 {
    let mut by_class: BTreeMap<u32, Vec<&CoverageInstance>> = BTreeMap::new();
    for inst in instances {
        by_class.entry(inst.class_id).or_default().push(inst);
    }
    let mut total = 0.0;
    for members in by_class.values() {
        let mut sum = 0.0;
        for inst in members {
            let img = &images[inst.image];
            let mut best = 0.0f64;
            for cand in img.ranked.iter().take(k) {
                best = best.max(oracle_region_iou(cand, &inst.region, &img.sizes));
            }
            sum += best;
        }
        total += sum / members.len() as f64;
    }
    total / by_class.len() as f64
}

fn random_subset(rng: &mut ChaCha12Rng, n: usize, p: f64) -> Vec<u32> {
    (0..n as u32).filter(|_| rng.random_bool(p)).collect()
}

#[test]
fn criterion_1_coverage_matches_brute_force() {
    criterion(1, || {
        let t0 = Instant::now();
        let mut rng = ChaCha12Rng::seed_from_u64(101);
        for trial in 0..100 {
            let n_images = rng.random_range(1..=3);
            let images: Vec<ImageRegions> = (0..n_images)
                .map(|_| {
                    let n_sp = rng.random_range(12..=40);
                    let sizes: Vec<u64> = (0..n_sp).map(|_| rng.random_range(1..=40)).collect();
                    let ranked: Vec<Vec<u32>> = (0..rng.random_range(1..=50))
                        .map(|_| random_subset(&mut rng, n_sp, 0.25))
                        .collect();
                    ImageRegions { sizes, ranked }
                })
                .collect();
            let n_classes = rng.random_range(1..=5u32);
            let instances: Vec<CoverageInstance> = (0..rng.random_range(1..=10))
                .map(|_| {
                    let image = rng.random_range(0..n_images);
                    let n_sp = images[image].sizes.len();
                    CoverageInstance {
                        class_id: rng.random_range(0..n_classes),
                        image,
                        region: random_subset(&mut rng, n_sp, 0.3),
                    }
                })
                .collect();
            let mut prev = f64::NEG_INFINITY;
            for k in [1usize, 2, 3, 7, 25, 50] {
                let got = coverage(&instances, &images, k, None)
                    .map_err(fail)?
                    .coverage;
                let want = oracle_coverage(&instances, &images, k);
                check!(
                    got.to_bits() == want.to_bits(),
                    "trial {trial}, K={k}: coverage {got:?} != brute force {want:?}"
                );
                check!(
                    got >= prev,
                    "trial {trial}: coverage fell from {prev:?} to {got:?} at K={k}"
                );
                prev = got;
            }
        }
        within(t0, Duration::from_secs(5), "coverage comparison")
    });
}

// --- criterion 2: AP vs. cutoff enumeration --------------------------------

fn random_box(rng: &mut ChaCha12Rng) -> BoundingBox {
    let x0 = rng.random_range(0.0..60.0);
    let y0 = rng.random_range(0.0..60.0);
    BoundingBox::new(
        x0,
        y0,
        x0 + rng.random_range(8.0..40.0),
        y0 + rng.random_range(8.0..40.0),
    )
    .unwrap()
}

fn jitter_box(rng: &mut ChaCha12Rng, b: &BoundingBox) -> BoundingBox {
    let dx = rng.random_range(-6.0..6.0);
    let dy = rng.random_range(-6.0..6.0);
    BoundingBox::new(b.x0 + dx, b.y0 + dy, b.x1 + dx, b.y1 + dy).unwrap()
}

/// AP recomputed from scratch at every score cutoff: greedy matching of the
/// cutoff's detections, one precision/recall point per cutoff, then the area
/// under the precision envelope. Scores must be distinct.
fn oracle_ap(dets: &[ApDetection<BoundingBox>], gts: &[ApGroundTruth<BoundingBox>], thr: f64) -> f64 {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score));
    let n_gt = gts.len();
    let mut recalls = Vec::with_capacity(order.len());
    let mut precisions = Vec::with_capacity(order.len());
    for cut in 1..=order.len() {
        let mut matched = vec![false; n_gt];
        let mut tp = 0usize;
        for &di in &order[..cut] {
            let det = &dets[di];
            let mut best: Option<(usize, f64)> = None;
            for (gi, gt) in gts.iter().enumerate() {
                if gt.image_id != det.image_id || matched[gi] {
                    continue;
                }
                let o = box_iou(&det.shape, &gt.shape);
                if best.map_or(true, |(_, bo)| o > bo) {
                    best = Some((gi, o));
                }
            }
            if let Some((gi, o)) = best {
                if o >= thr {
                    matched[gi] = true;
                    tp += 1;
                }
            }
        }
        recalls.push(tp as f64 / n_gt as f64);
        precisions.push(tp as f64 / cut as f64);
    }
    let mut mrec = vec![0.0];
    mrec.extend(&recalls);
    mrec.push(1.0);
    let mut mpre = vec![0.0];
    mpre.extend(&precisions);
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

#[test]
fn criterion_2_average_precision_matches_cutoff_enumeration() {
    criterion(2, || {
        let t0 = Instant::now();
        let mut rng = ChaCha12Rng::seed_from_u64(202);
        for trial in 0..200 {
            let n_images = rng.random_range(1..=4);
            let image_ids: Vec<String> = (0..n_images).map(|i| format!("im{i}")).collect();
            let n_gt = rng.random_range(1..=6);
            let gts: Vec<ApGroundTruth<BoundingBox>> = (0..n_gt)
                .map(|_| ApGroundTruth {
                    image_id: image_ids[rng.random_range(0..n_images)].clone(),
                    shape: random_box(&mut rng),
                })
                .collect();
            let n_det = rng.random_range(0..=20);
            // Distinct scores make every rank prefix a score cutoff.
            let mut scores: Vec<f64> = (0..n_det).map(|i| 0.05 + 0.04 * i as f64).collect();
            for i in (1..scores.len()).rev() {
                let j = rng.random_range(0..=i);
                scores.swap(i, j);
            }
            let dets: Vec<ApDetection<BoundingBox>> = scores
                .iter()
                .map(|&score| {
                    let gt = &gts[rng.random_range(0..n_gt)];
                    let shape = if rng.random_bool(0.6) {
                        jitter_box(&mut rng, &gt.shape)
                    } else {
                        random_box(&mut rng)
                    };
                    let image_id = if rng.random_bool(0.8) {
                        gt.image_id.clone()
                    } else {
                        image_ids[rng.random_range(0..n_images)].clone()
                    };
                    ApDetection {
                        image_id,
                        score,
                        sort_key: shape.sort_key(),
                        shape,
                    }
                })
                .collect();
            let thr = [0.3, 0.5, 0.7][rng.random_range(0..3)];
            let got = average_precision(&dets, &gts, thr, |_, a, b| box_iou(a, b))
                .ok_or("no ground truths")?
                .ap;
            let want = oracle_ap(&dets, &gts, thr);
            check!(
                got.to_bits() == want.to_bits(),
                "trial {trial}: AP {got:?} != cutoff enumeration {want:?}"
            );
            // A strictly increasing score transform must not change AP.
            let warped: Vec<ApDetection<BoundingBox>> = dets
                .iter()
                .map(|d| ApDetection {
                    image_id: d.image_id.clone(),
                    score: 3.0 + (2.0 * d.score).atan(),
                    sort_key: d.sort_key,
                    shape: d.shape,
                })
                .collect();
            let transformed = average_precision(&warped, &gts, thr, |_, a, b| box_iou(a, b))
                .ok_or("no ground truths")?
                .ap;
            check!(
                transformed.to_bits() == got.to_bits(),
                "trial {trial}: AP moved under a monotone score transform: {got:?} -> {transformed:?}"
            );
        }
        within(t0, Duration::from_secs(5), "AP comparison")
    });
}

// --- criterion 3: region features vs. per-pixel oracle ---------------------

#[derive(Clone, Copy)]
struct RawMoments {
    count: u64,
    sum: f64,
    sumsq: f64,
    min: f64,
    max: f64,
}

impl RawMoments {
    fn new() -> Self {
        RawMoments {
            count: 0,
            sum: 0.0,
            sumsq: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }

    fn add(&mut self, v: f64) {
        self.count += 1;
        self.sum += v;
        self.sumsq += v * v;
        self.min = self.min.min(v);
        self.max = self.max.max(v);
    }

    fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }

    fn std(&self) -> f64 {
        let m = self.mean();
        (self.sumsq / self.count as f64 - m * m).max(0.0).sqrt()
    }
}

/// Region features recomputed from raw per-pixel values in raster order,
/// bypassing the per-superpixel aggregation entirely.
fn oracle_features(
    d: &DepthDerived,
    world: &geodepth_core::geom::PointCloud,
    spmap: &SuperpixelMap,
    region: &[u32],
) -> [f64; 22] {
    let sel: HashSet<u32> = region.iter().copied().collect();
    let mut m = [RawMoments::new(); 6]; // disparity, height, angle, x, y, z
    let mut cross_xz = 0.0;
    let (mut up, mut down, mut vertical) = (0u64, 0u64, 0u64);
    for y in 0..spmap.height() {
        for x in 0..spmap.width() {
            if !sel.contains(&spmap.id(x, y)) {
                continue;
            }
            if let Some(v) = d.disparity.field.at(x, y) {
                m[0].add(v);
            }
            if let Some(v) = d.height.field.at(x, y) {
                m[1].add(v);
            }
            if let Some(a) = d.angle.field.at(x, y) {
                m[2].add(a);
                if a < UP_MAX_ANGLE {
                    up += 1;
                }
                if a > DOWN_MIN_ANGLE {
                    down += 1;
                }
                if (a - 90.0).abs() <= VERTICAL_BAND {
                    vertical += 1;
                }
            }
            if let Some(p) = world.point(x, y) {
                m[3].add(p.x);
                m[4].add(p.y);
                m[5].add(p.z);
                cross_xz += p.x * p.z;
            }
        }
    }
    let n = m[3].count as f64;
    let (mean_x, mean_z) = (m[3].mean(), m[5].mean());
    let cov_xx = (m[3].sumsq / n - mean_x * mean_x).max(0.0);
    let cov_zz = (m[5].sumsq / n - mean_z * mean_z).max(0.0);
    let cov_xz = cross_xz / n - mean_x * mean_z;
    // Closed-form eigenvalues of [[cov_xx, cov_xz], [cov_xz, cov_zz]].
    let mid = (cov_xx + cov_zz) / 2.0;
    let r = (((cov_xx - cov_zz) / 2.0).powi(2) + cov_xz * cov_xz).sqrt();
    let na = m[2].count as f64;
    [
        m[0].mean(),
        m[0].std(),
        m[1].mean(),
        m[1].std(),
        m[2].mean(),
        m[2].std(),
        mean_x,
        m[3].std(),
        m[4].mean(),
        m[4].std(),
        mean_z,
        m[5].std(),
        m[3].max - m[3].min,
        m[4].max - m[4].min,
        m[5].max - m[5].min,
        m[1].min,
        m[1].max,
        vertical as f64 / na,
        up as f64 / na,
        down as f64 / na,
        (mid - r).max(0.0).sqrt(),
        (mid + r).max(0.0).sqrt(),
    ]
}

fn close_rel(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-6 * a.abs().max(b.abs()) || (a - b).abs() <= 1e-9
}

#[test]
fn criterion_3_region_features_match_per_pixel_oracle() {
    criterion(3, || {
        let t0 = Instant::now();
        let (rendering, _) = common::render_scene(0);
        // Mild deterministic depth ripple so surface statistics are not
        // degenerate on perfect planes.
        let (w, h) = (rendering.depth.width(), rendering.depth.height());
        let depths: Vec<Option<f64>> = (0..w * h)
            .map(|i| {
                let (x, y) = (i % w, i / w);
                rendering.depth.at(x, y).map(|z| {
                    z * (1.0 + 0.002 * (0.37 * x as f64).sin() * (0.23 * y as f64).cos())
                })
            })
            .collect();
        let depth = DepthImage::from_options(w, h, depths).map_err(fail)?;
        let d = derive_channels(&depth, &common::camera(), 3).map_err(fail)?;
        let world = to_gravity_frame(&d.cloud, &d.down);
        let spmap = common::block_superpixels();
        let agg = accumulate(&d.disparity, &d.height, &d.angle, &world, &spmap).map_err(fail)?;

        let mut rng = ChaCha12Rng::seed_from_u64(303);
        let cols = w / common::BLOCK;
        for trial in 0..50 {
            // Blocks away from the top rows, which may have no depth.
            let mut ids: Vec<u32> = (0..rng.random_range(2..=8))
                .map(|_| {
                    let bx = rng.random_range(0..cols);
                    let by = rng.random_range(4..h / common::BLOCK);
                    (by * cols + bx) as u32
                })
                .collect();
            ids.sort_unstable();
            ids.dedup();
            let region = Region::new(ids.clone(), spmap.count()).map_err(fail)?;
            let got = region_features(&region, &agg).map_err(fail)?;
            let want = oracle_features(&d, &world, &spmap, &ids);
            for (i, name) in FEATURE_NAMES.iter().enumerate() {
                check!(
                    close_rel(got.values[i], want[i]),
                    "trial {trial}, {name}: aggregate {:?} vs per-pixel {:?}",
                    got.values[i],
                    want[i]
                );
            }
        }
        within(t0, Duration::from_secs(10), "feature comparison")
    });
}

// --- criterion 4: geocentric accuracy on a synthetic room ------------------

fn degrees_between(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    (a.dot(b) / (a.norm() * b.norm()))
        .clamp(-1.0, 1.0)
        .acos()
        .to_degrees()
}

#[test]
fn criterion_4_geocentric_quantities_recovered_in_synthetic_room() {
    criterion(4, || {
        let t0 = Instant::now();
        const W: usize = 120;
        const H: usize = 90;
        const BOX_TOP: f64 = 0.45;
        let cam = CameraIntrinsics::new(140.0, 140.0, 59.5, 44.5, 0.075).map_err(fail)?;
        let (mut scene, floor_id, wall_x_id, wall_z_id) = Scene::room();
        let box_id = scene.add(Primitive::Aabb {
            min: Vector3::new(0.35, 0.0, 0.35),
            max: Vector3::new(1.15, BOX_TOP, 1.15),
        });
        let box_center = Vector3::new(0.75, BOX_TOP, 0.75);

        let mut rng = ChaCha12Rng::seed_from_u64(404);
        for pose_i in 0..20 {
            let center = Vector3::new(
                2.0 + rng.random_range(-0.3..0.3),
                1.2 + rng.random_range(-0.15..0.25),
                2.0 + rng.random_range(-0.3..0.3),
            );
            let look = box_center - center;
            let yaw = look.x.atan2(look.z) + rng.random_range(-0.15..0.15);
            let depression = (center.y - BOX_TOP).atan2(look.xz().norm()).to_degrees();
            let pitch = (depression + rng.random_range(-6.0..6.0))
                .clamp(6.0, 30.0)
                .to_radians();
            let roll = rng.random_range(-30f64..30.0).to_radians();
            let pose = CameraPose::oriented(center, yaw, pitch, roll);

            let r = render(&scene, &cam, &pose, W, H, 30.0).map_err(fail)?;
            let d = derive_channels(&r.depth, &cam, 3).map_err(fail)?;

            let truth = pose.gravity_in_camera();
            let gravity_err = degrees_between(&d.down, &truth);
            check!(
                gravity_err < 0.5,
                "pose {pose_i}: gravity off by {gravity_err:.3} degrees"
            );

            let mut floor = RawMoments::new();
            let mut walls = RawMoments::new();
            let mut box_top = RawMoments::new();
            for y in 0..H {
                for x in 0..W {
                    let Some(hit) = *r.hit.get(x, y) else { continue };
                    if hit == floor_id {
                        if let Some(a) = d.angle.field.at(x, y) {
                            floor.add(a);
                        }
                    } else if hit == wall_x_id || hit == wall_z_id {
                        if let Some(a) = d.angle.field.at(x, y) {
                            walls.add(a);
                        }
                    } else if hit == box_id {
                        let top = r
                            .world_point(x, y)
                            .is_some_and(|p| (p.y - BOX_TOP).abs() < 1e-9);
                        if top {
                            if let Some(ht) = d.height.field.at(x, y) {
                                box_top.add(ht);
                            }
                        }
                    }
                }
            }
            check!(
                floor.count > 200 && walls.count > 200 && box_top.count > 50,
                "pose {pose_i}: fixture too sparse (floor {}, walls {}, box top {})",
                floor.count,
                walls.count,
                box_top.count
            );
            let floor_mean = floor.mean();
            check!(
                floor_mean < 2.0,
                "pose {pose_i}: floor normals average {floor_mean:.3} degrees from vertical"
            );
            let wall_mean = walls.mean();
            check!(
                (wall_mean - 90.0).abs() < 2.0,
                "pose {pose_i}: wall normals average {wall_mean:.3} degrees"
            );
            let height_err = (box_top.mean() - BOX_TOP).abs();
            check!(
                height_err < 0.01,
                "pose {pose_i}: box-top height off by {:.1} mm",
                height_err * 1000.0
            );
        }
        within(t0, Duration::from_secs(30), "room accuracy check")
    });
}

// --- criterion 5: 8-bit encoding structure ---------------------------------

fn scalar_row(values: &[Option<f64>]) -> ScalarField {
    let mut f = ScalarField::invalid(values.len(), 1).unwrap();
    for (x, v) in values.iter().enumerate() {
        if let Some(v) = v {
            f.set(x, 0, *v);
        }
    }
    f
}

#[test]
fn criterion_5_encoding_endpoints_and_monotonicity() {
    criterion(5, || {
        let mut rng = ChaCha12Rng::seed_from_u64(505);
        for trial in 0..50 {
            let mut rows: Vec<Vec<Option<f64>>> = Vec::new();
            let mut ranges = Vec::new();
            for _ in 0..3 {
                let lo = rng.random_range(-5.0..5.0);
                let hi = lo + rng.random_range(0.01..10.0);
                let span = hi - lo;
                let mut vals = vec![lo - 0.4 * span, lo];
                for _ in 0..9 {
                    vals.push(rng.random_range(lo..hi));
                }
                vals.push(hi);
                vals.push(hi + 0.6 * span);
                vals.sort_by(f64::total_cmp);
                let mut row: Vec<Option<f64>> = vals.into_iter().map(Some).collect();
                row.push(Some(lo + span / 2.0)); // pixel 13: invalidated below
                rows.push(row);
                ranges.push(ChannelRange::new(lo, hi).map_err(fail)?);
            }
            rows[1][13] = None; // height missing at the last pixel
            let cal = Calibration {
                disparity: ranges[0],
                height: ranges[1],
                angle: ranges[2],
            };
            let hha = encode_hha(
                &DisparityMap {
                    field: scalar_row(&rows[0]),
                },
                &HeightMap {
                    field: scalar_row(&rows[1]),
                },
                &AngleMap {
                    field: scalar_row(&rows[2]),
                },
                &cal,
            )
            .map_err(fail)?;

            check!(
                hha.data().len() == 3 * 14,
                "trial {trial}: expected 3 byte channels for 14 pixels, got {} bytes",
                hha.data().len()
            );
            for c in 0..3 {
                let byte = |x: usize| hha.pixel(x, 0)[c];
                check!(
                    byte(1) == 0 && byte(0) == 0,
                    "trial {trial}, channel {c}: low endpoint encoded as {} / {}",
                    byte(1),
                    byte(0)
                );
                check!(
                    byte(11) == 255 && byte(12) == 255,
                    "trial {trial}, channel {c}: high endpoint encoded as {} / {}",
                    byte(11),
                    byte(12)
                );
                for x in 1..=12 {
                    check!(
                        byte(x) >= byte(x - 1),
                        "trial {trial}, channel {c}: encoding not monotone at pixel {x}"
                    );
                }
            }
            check!(
                hha.pixel(13, 0) == [0, 0, 0],
                "trial {trial}: pixel with a missing input encoded as {:?}",
                hha.pixel(13, 0)
            );
        }
        Ok(())
    });
}

// --- criterion 6: forest and assignment structure --------------------------

/// 10-channel stack whose first channel is an indicator of `rect`
/// (x0, y0, x1, y1 in pixels); remaining channels are constant.
fn indicator_image(w: usize, h: usize, rect: (usize, usize, usize, usize)) -> (FeatureImage, Grid<bool>) {
    let (x0, y0, x1, y1) = rect;
    let mut indicator = Grid::filled(w, h, 0.0).unwrap();
    let mut mask = Grid::filled(w, h, false).unwrap();
    for y in y0..y1 {
        for x in x0..x1 {
            *indicator.get_mut(x, y) = 1.0;
            *mask.get_mut(x, y) = true;
        }
    }
    let mut channels = vec![indicator];
    for c in 1..10 {
        channels.push(Grid::filled(w, h, 0.1 * c as f64).unwrap());
    }
    (FeatureImage::from_channels(w, h, channels).unwrap(), mask)
}

fn full_window() -> BoundingBox {
    BoundingBox::new(0.0, 0.0, 50.0, 50.0).unwrap()
}

fn example_of(img: &FeatureImage, mask: &Grid<bool>) -> Result<WarpedExample, String> {
    Ok(WarpedExample {
        features: warp_window(img, &full_window()).map_err(fail)?,
        mask: warp_mask(mask, &full_window()).map_err(fail)?,
    })
}

#[test]
fn criterion_6_forest_and_assignment_structure() {
    criterion(6, || {
        let examples: Vec<WarpedExample> = [(8, 6, 30, 26), (20, 18, 44, 40), (4, 24, 28, 46)]
            .iter()
            .map(|&r| {
                let (img, mask) = indicator_image(50, 50, r);
                example_of(&img, &mask)
            })
            .collect::<Result<_, _>>()?;
        let params = TrainParams {
            questions: 80,
            max_depth: 8,
            min_samples: 4,
            cell_fraction: 0.5,
            seed: 6,
            ..TrainParams::default()
        };
        check!(
            params.trees == 10,
            "default forest size is {}, expected 10",
            params.trees
        );
        let forest = train_forest(&examples, &params).map_err(fail)?;
        check!(
            forest.trees.len() == 10,
            "trained forest has {} trees",
            forest.trees.len()
        );

        let dir = tempfile::tempdir().map_err(fail)?;
        let model_path = dir.path().join("model.txt");
        write_forest(&model_path, &forest).map_err(fail)?;
        let text = std::fs::read_to_string(&model_path).map_err(fail)?;
        check!(
            text.lines().any(|l| l == "trees 10"),
            "serialized model lacks a `trees 10` line"
        );
        let tree_lines = text.lines().filter(|l| l.starts_with("tree ")).count();
        check!(
            tree_lines == 10,
            "serialized model contains {tree_lines} trees"
        );
        let reread = read_forest(&model_path).map_err(fail)?;
        check!(
            reread == forest,
            "model did not round-trip through serialization"
        );

        let conf = predict_confidence(&forest, &examples[0].features).map_err(fail)?;
        check!(
            conf.width() == 50 && conf.height() == 50,
            "confidence map is {}x{}, expected 50x50",
            conf.width(),
            conf.height()
        );
        check!(GRID == 50, "prediction grid is {GRID}, expected 50");

        // Box overlap exactly at the 0.70 boundary must stay unassigned.
        let gt = GtInstance {
            image_id: "a".into(),
            class_id: 1,
            bbox: BoundingBox::new(0.0, 0.0, 100.0, 70.0).unwrap(),
            region: vec![0],
        };
        let at_boundary = Detection {
            image_id: "a".into(),
            class_id: 1,
            score: 0.9,
            bbox: BoundingBox::new(0.0, 0.0, 100.0, 100.0).unwrap(),
        };
        let overlap = box_iou(&gt.bbox, &at_boundary.bbox);
        check!(
            overlap == 0.7,
            "boundary fixture has IoU {overlap:?}, expected exactly 0.7"
        );
        let pairs = assign_detections(std::slice::from_ref(&gt), &[at_boundary.clone()]);
        check!(
            pairs.is_empty(),
            "detection with IoU exactly 0.7 was assigned: {pairs:?}"
        );
        let above = Detection {
            bbox: BoundingBox::new(0.0, 0.0, 100.0, 71.0).unwrap(),
            ..at_boundary
        };
        let pairs = assign_detections(std::slice::from_ref(&gt), &[above]);
        check!(
            pairs == vec![(0, 0)],
            "detection with IoU above 0.7 was not assigned: {pairs:?}"
        );
        Ok(())
    });
}

// --- criterion 7: learnability -----------------------------------------------

/// Fraction of grid cells whose thresholded forest confidence matches the mask.
fn forest_accuracy(
    forest: &geodepth_core::maskforest::Forest,
    examples: &[WarpedExample],
) -> Result<f64, String> {
    let mut correct = 0usize;
    let mut total = 0usize;
    for ex in examples {
        let conf = predict_confidence(forest, &ex.features).map_err(fail)?;
        for (c, m) in conf.as_slice().iter().zip(ex.mask.as_slice()) {
            correct += ((*c > 0.5) == *m) as usize;
            total += 1;
        }
    }
    Ok(correct as f64 / total as f64)
}

/// First channel is an intercept-plus-horizontal-ramp `a + s*x`; the label of
/// every cell is the slope's sign. Intercepts swamp the values, so unary
/// questions carry almost no signal while any horizontal probe pair reads the
/// slope directly.
fn ramp_example(rng: &mut ChaCha12Rng, positive: bool) -> Result<WarpedExample, String> {
    let a = rng.random_range(0.0..8.0);
    let s = rng.random_range(0.04..0.08) * if positive { 1.0 } else { -1.0 };
    let mut ramp = Grid::filled(50, 50, 0.0).unwrap();
    for y in 0..50 {
        for x in 0..50 {
            *ramp.get_mut(x, y) = a + s * x as f64;
        }
    }
    let mut channels = vec![ramp];
    for _ in 1..10 {
        channels.push(Grid::filled(50, 50, 0.5).unwrap());
    }
    let img = FeatureImage::from_channels(50, 50, channels).unwrap();
    let mask = Grid::filled(50, 50, positive).unwrap();
    example_of(&img, &mask)
}

#[test]
fn criterion_7_learnability_and_end_to_end_mask() {
    criterion(7, || {
        let t0 = Instant::now();
        let mut rng = ChaCha12Rng::seed_from_u64(707);

        // Value-separable data: indicator rectangles at random positions.
        let rects: Vec<(usize, usize, usize, usize)> = (0..30)
            .map(|_| {
                let x0 = rng.random_range(2..24);
                let y0 = rng.random_range(2..24);
                (
                    x0,
                    y0,
                    x0 + rng.random_range(10..24),
                    y0 + rng.random_range(10..24),
                )
            })
            .collect();
        let all: Vec<WarpedExample> = rects
            .iter()
            .map(|&r| {
                let (img, mask) = indicator_image(50, 50, r);
                example_of(&img, &mask)
            })
            .collect::<Result<_, _>>()?;
        let (train, held_out) = all.split_at(20);
        let params = TrainParams {
            trees: 8,
            questions: 160,
            max_depth: 10,
            min_samples: 2,
            purity: 1.0,
            cell_fraction: 0.5,
            unary_only: false,
            seed: 7,
        };
        let forest = train_forest(train, &params).map_err(fail)?;
        let train_acc = forest_accuracy(&forest, train)?;
        check!(
            train_acc == 1.0,
            "separable data: training accuracy {train_acc:.5}, expected 1.0"
        );
        let held_acc = forest_accuracy(&forest, held_out)?;
        check!(
            held_acc >= 0.99,
            "separable data: held-out accuracy {held_acc:.5}, expected >= 0.99"
        );

        // Slope-sign data: binary questions solve it, unary-only cannot.
        let ramps: Vec<WarpedExample> = (0..24)
            .map(|e| ramp_example(&mut rng, e % 2 == 0))
            .collect::<Result<_, _>>()?;
        let binary_params = TrainParams {
            trees: 6,
            questions: 240,
            max_depth: 14,
            min_samples: 2,
            purity: 1.0,
            cell_fraction: 0.3,
            unary_only: false,
            seed: 11,
        };
        let binary = train_forest(&ramps, &binary_params).map_err(fail)?;
        let binary_acc = forest_accuracy(&binary, &ramps)?;
        check!(
            binary_acc == 1.0,
            "slope-sign data: binary-question training accuracy {binary_acc:.5}, expected 1.0"
        );
        let unary_params = TrainParams {
            unary_only: true,
            ..binary_params
        };
        let unary = train_forest(&ramps, &unary_params).map_err(fail)?;
        let unary_acc = forest_accuracy(&unary, &ramps)?;
        check!(
            unary_acc < 1.0,
            "slope-sign data: unary-only ablation also reached {unary_acc:.5}"
        );

        // End to end: depth in, scored instance mask out.
        let spmap = common::block_superpixels();
        let cam = common::camera();
        let scenes: Vec<(Rendering, usize)> = (0..3).map(common::render_scene).collect();
        let derived: Vec<DepthDerived> = scenes
            .iter()
            .map(|(r, _)| derive_channels(&r.depth, &cam, 3).map_err(fail))
            .collect::<Result<_, _>>()?;
        let triples: Vec<_> = derived
            .iter()
            .map(|d| (&d.disparity, &d.height, &d.angle))
            .collect();
        let cal = fit_calibration(&triples, DEFAULT_CALIBRATION_PERCENTILES).map_err(fail)?;
        let mut examples = Vec::new();
        let mut first = None;
        for ((r, box_id), d) in scenes.iter().zip(&derived) {
            let hha = encode_hha(&d.disparity, &d.height, &d.angle, &cal).map_err(fail)?;
            let features = FeatureImage::new(
                &d.disparity.field,
                &d.height,
                &d.angle,
                &d.normals,
                None,
                &hha,
            )
            .map_err(fail)?;
            let region = common::box_region(r, *box_id, &spmap);
            check!(!region.is_empty(), "box not visible in training scene");
            let mask = region_pixel_mask(&spmap, &region);
            let bbox = common::tight_box(&mask);
            examples.push(WarpedExample {
                features: warp_window(&features, &bbox).map_err(fail)?,
                mask: warp_mask(&mask, &bbox).map_err(fail)?,
            });
            if first.is_none() {
                first = Some((features, region, bbox));
            }
        }
        let (features, region, bbox) = first.unwrap();
        let e2e_params = TrainParams {
            trees: 6,
            questions: 300,
            max_depth: 12,
            min_samples: 8,
            cell_fraction: 0.5,
            seed: 9,
            ..TrainParams::default()
        };
        let e2e = train_forest(&examples, &e2e_params).map_err(fail)?;
        let det = Detection {
            image_id: "scene0".into(),
            class_id: 1,
            score: 1.0,
            bbox,
        };
        let mask = predict_mask(&e2e, &det, &features, &spmap, 0.5).map_err(fail)?;
        let iou = region_iou(&mask.superpixels, &region, &spmap.sizes());
        check!(
            iou >= 0.95,
            "end-to-end instance mask IoU {iou:.4}, expected >= 0.95"
        );
        within(t0, Duration::from_secs(60), "learnability checks")
    });
}

// --- criterion 8: pipeline determinism --------------------------------------

fn run_step(base: &Path, args: &[&str]) -> Verdict {
    let out = common::run_in(base, args);
    check!(
        out.status.success(),
        "`geodepth {}` failed: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    Ok(())
}

fn run_pipeline(base: &Path, name: &str, jobs: &str, data: &common::Dataset) -> Verdict {
    std::fs::create_dir_all(base.join(name)).map_err(fail)?;
    let path = |suffix: &str| format!("{name}/{suffix}");
    run_step(
        base,
        &[
            "simulate-kinect",
            "--manifest",
            "data/manifest.txt",
            "--intrinsics",
            "data/intrinsics.txt",
            "--out-dir",
            &path("kinect"),
            "--sigma",
            "0.05",
            "--seed",
            "77",
            "--jobs",
            jobs,
        ],
    )?;

    // Same dataset, with depth swapped for the simulated sensor output.
    let entries: Vec<ManifestEntry> = data
        .ids
        .iter()
        .enumerate()
        .map(|(i, id)| ManifestEntry {
            id: id.clone(),
            split: if i < 3 { "train" } else { "val" }.into(),
            depth: PathBuf::from(format!("kinect/{id}.png")),
            color: None,
            superpixels: Some(PathBuf::from(format!("../data/{id}-sp.png"))),
            regions: Some(PathBuf::from(format!("../data/{id}-regions.txt"))),
            detections: None,
            instances: Some(PathBuf::from(format!("../data/{id}-instances.txt"))),
            labels: Some(PathBuf::from(format!("../data/{id}-labels.png"))),
        })
        .collect();
    write_manifest(&base.join(name).join("manifest.txt"), &entries).map_err(fail)?;

    let manifest = path("manifest.txt");
    let cal = path("cal.txt");
    run_step(
        base,
        &[
            "calibrate",
            "--manifest",
            &manifest,
            "--split",
            "train",
            "--intrinsics",
            "data/intrinsics.txt",
            "--out",
            &cal,
            "--radius",
            "3",
            "--jobs",
            jobs,
        ],
    )?;
    run_step(
        base,
        &[
            "hha",
            "--manifest",
            &manifest,
            "--intrinsics",
            "data/intrinsics.txt",
            "--calibration",
            &cal,
            "--out-dir",
            &path("hha"),
            "--radius",
            "3",
            "--jobs",
            jobs,
        ],
    )?;
    let model = path("forest.txt");
    run_step(
        base,
        &[
            "mask-train",
            "--manifest",
            &manifest,
            "--split",
            "train",
            "--intrinsics",
            "data/intrinsics.txt",
            "--calibration",
            &cal,
            "--out",
            &model,
            "--trees",
            "6",
            "--questions",
            "150",
            "--max-depth",
            "9",
            "--min-samples",
            "8",
            "--cell-fraction",
            "0.5",
            "--seed",
            "5",
            "--radius",
            "3",
            "--jobs",
            jobs,
        ],
    )?;
    run_step(
        base,
        &[
            "mask-predict",
            "--manifest",
            &manifest,
            "--split",
            "val",
            "--intrinsics",
            "data/intrinsics.txt",
            "--calibration",
            &cal,
            "--model",
            &model,
            "--detections",
            "data/dets.txt",
            "--out-dir",
            &path("masks"),
            "--threshold",
            "0.5",
            "--radius",
            "3",
            "--jobs",
            jobs,
        ],
    )?;
    run_step(
        base,
        &[
            "eval-ap",
            "--mode",
            "region",
            "--manifest",
            &manifest,
            "--split",
            "val",
            "--masks",
            &path("masks/masks.txt"),
            "--out",
            &path("ap.txt"),
            "--jobs",
            jobs,
        ],
    )?;
    run_step(
        base,
        &[
            "eval-coverage",
            "--manifest",
            &manifest,
            "--split",
            "val",
            "--k",
            "1,5",
            "--out",
            &path("coverage.txt"),
            "--jobs",
            jobs,
        ],
    )?;
    Ok(())
}

fn collect_files(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) -> Verdict {
    for entry in std::fs::read_dir(dir).map_err(fail)? {
        let path = entry.map_err(fail)?.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else {
            let rel = path.strip_prefix(root).map_err(fail)?.to_path_buf();
            out.insert(rel, std::fs::read(&path).map_err(fail)?);
        }
    }
    Ok(())
}

#[test]
fn criterion_8_pipeline_runs_are_bit_identical() {
    criterion(8, || {
        let tmp = tempfile::tempdir().map_err(fail)?;
        let base = tmp.path();
        let data = common::build_dataset(&base.join("data"), &[("train", 3), ("val", 2)]);
        let dets: Vec<Detection> = data
            .gt
            .iter()
            .enumerate()
            .map(|(i, g)| Detection {
                image_id: g.image_id.clone(),
                class_id: g.class_id,
                score: 0.95 - 0.03 * i as f64,
                bbox: g.bbox,
            })
            .collect();
        write_detections(&base.join("data/dets.txt"), &dets).map_err(fail)?;

        run_pipeline(base, "run1", "1", &data)?;
        run_pipeline(base, "run2", "4", &data)?;

        let mut a = BTreeMap::new();
        collect_files(&base.join("run1"), &base.join("run1"), &mut a)?;
        let mut b = BTreeMap::new();
        collect_files(&base.join("run2"), &base.join("run2"), &mut b)?;
        let names = |m: &BTreeMap<PathBuf, Vec<u8>>| {
            m.keys().map(|p| p.display().to_string()).collect::<Vec<_>>()
        };
        check!(
            names(&a) == names(&b),
            "runs produced different artifact sets:\n  run1: {:?}\n  run2: {:?}",
            names(&a),
            names(&b)
        );
        check!(!a.is_empty(), "pipeline produced no artifacts");
        for (path, bytes) in &a {
            check!(
                bytes == &b[path],
                "artifact {} differs between identically seeded runs",
                path.display()
            );
        }
        Ok(())
    });
}

// --- criterion 9: segmentation metrics on a hand construction ---------------

#[test]
fn criterion_9_segmentation_metrics_exact() {
    criterion(9, || {
        // Ground truth: 90 pixels of class 0, 10 of class 1. The prediction
        // nails class 0 and labels the class-1 pixels as a class that never
        // occurs in the ground truth, so the per-class IoUs are 1.0 and 0.0.
        let gt_labels: Vec<u16> = (0..100).map(|i| u16::from(i >= 90)).collect();
        let pred_labels: Vec<u16> = (0..100).map(|i| if i >= 90 { 2 } else { 0 }).collect();
        let gt = Grid::from_vec(10, 10, gt_labels).map_err(fail)?;
        let pred = Grid::from_vec(10, 10, pred_labels).map_err(fail)?;

        let mut acc = SegmentationAccumulator::new(3, None).map_err(fail)?;
        acc.add(&pred, &gt).map_err(fail)?;
        let m = acc.finish().map_err(fail)?;
        check!(
            m.per_class_iou[0] == Some(1.0) && m.per_class_iou[1] == Some(0.0),
            "per-class IoUs are {:?}, expected [1.0, 0.0, ..]",
            m.per_class_iou
        );
        check!(
            m.frequency_weighted_iou.to_bits() == 0.9f64.to_bits(),
            "frequency-weighted IoU {:?}, expected exactly 0.9",
            m.frequency_weighted_iou
        );
        check!(
            m.mean_iou.to_bits() == 0.5f64.to_bits(),
            "class-averaged IoU {:?}, expected exactly 0.5",
            m.mean_iou
        );

        let mut perfect = SegmentationAccumulator::new(2, None).map_err(fail)?;
        perfect.add(&gt, &gt).map_err(fail)?;
        let p = perfect.finish().map_err(fail)?;
        check!(
            p.pixel_accuracy == 1.0 && p.mean_iou == 1.0 && p.frequency_weighted_iou == 1.0,
            "perfect prediction scored {:?} / {:?} / {:?}",
            p.pixel_accuracy,
            p.mean_iou,
            p.frequency_weighted_iou
        );
        Ok(())
    });
}
