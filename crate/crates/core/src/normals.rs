//! Surface normals from local plane fits, and oriented half-disk gradient
//! channels (normal gradients split by crease sign, plus depth gradients).
//!
//! Every fit runs over a pixel-grid disk (Euclidean radius in pixels). A fit
//! needs at least 3 non-collinear valid points; otherwise the pixel is marked
//! invalid rather than erroring. Normals are unit vectors oriented toward the
//! camera (`n · p <= 0`).

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geom::PointCloud;
use crate::grid::Grid;
use crate::math::sym_eigen3;

/// Default gradient scales, in pixels.
pub const DEFAULT_GRADIENT_RADII: [usize; 2] = [3, 5];
/// Default number of half-disk orientations, spaced pi/8.
pub const DEFAULT_ORIENTATIONS: usize = 8;

/// Relative eigenvalue gap below which a fit counts as degenerate.
const TIE_EPS: f64 = 1e-9;

/// Neighbors whose depth differs from the window center's by more than this
/// fraction (with a floor of [`DEPTH_BAND_MIN`] meters) sit across an
/// occlusion boundary and are left out of the fit.
const DEPTH_BAND_REL: f64 = 0.04;
const DEPTH_BAND_MIN: f64 = 0.02;

/// Windows straddling a crease refit without their worst-fitting points:
/// points beyond `RESIDUAL_TRIM_FACTOR` times the RMS residual are dropped,
/// up to `TRIM_PASSES` times. Fits with RMS below `RESIDUAL_TRIM_MIN` meters
/// are already planar and skip the refit.
const RESIDUAL_TRIM_MIN: f64 = 1e-4;
const RESIDUAL_TRIM_FACTOR: f64 = 2.0;
const TRIM_PASSES: usize = 2;

/// Per-pixel unit surface normals with validity.
#[derive(Debug, Clone)]
pub struct NormalMap {
    width: usize,
    height: usize,
    radius: usize,
    normals: Vec<Vector3<f64>>,
    valid: Grid<bool>,
}

impl NormalMap {
    /// Builds a map from per-pixel unit vectors (`None` marks invalid pixels).
    pub fn from_vectors(
        width: usize,
        height: usize,
        radius: usize,
        vectors: Vec<Option<Vector3<f64>>>,
    ) -> Result<Self> {
        if vectors.len() != width * height {
            return Err(Error::Dimension(format!(
                "normal map of {}x{} needs {} entries, got {}",
                width,
                height,
                width * height,
                vectors.len()
            )));
        }
        let mut normals = vec![Vector3::zeros(); vectors.len()];
        let mut valid = Grid::filled(width, height, false)?;
        for (i, v) in vectors.into_iter().enumerate() {
            if let Some(n) = v {
                if (n.norm() - 1.0).abs() > 1e-6 {
                    return Err(Error::InvalidParam(format!(
                        "normal at index {i} is not unit length (|n| = {})",
                        n.norm()
                    )));
                }
                normals[i] = n;
                valid.as_mut_slice()[i] = true;
            }
        }
        Ok(Self {
            width,
            height,
            radius,
            normals,
            valid,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    /// Disk radius the normals were fit with.
    pub fn radius(&self) -> usize {
        self.radius
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        *self.valid.get(x, y)
    }

    #[inline]
    pub fn normal(&self, x: usize, y: usize) -> Option<Vector3<f64>> {
        if self.is_valid(x, y) {
            Some(self.normals[y * self.width + x])
        } else {
            None
        }
    }

    pub fn valid_count(&self) -> usize {
        self.valid.as_slice().iter().filter(|v| **v).count()
    }

    pub fn iter_valid(&self) -> impl Iterator<Item = (usize, usize, Vector3<f64>)> + '_ {
        let w = self.width;
        self.valid
            .as_slice()
            .iter()
            .enumerate()
            .filter(|(_, v)| **v)
            .map(move |(i, _)| (i % w, i / w, self.normals[i]))
    }
}

/// Offsets of a pixel-grid disk: `dx^2 + dy^2 <= r^2`.
fn disk_offsets(radius: usize) -> Vec<(i32, i32)> {
    let r = radius as i32;
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                out.push((dx, dy));
            }
        }
    }
    out
}

/// Running sums for a least-squares plane fit.
#[derive(Debug, Clone, Copy, Default)]
struct PlaneAcc {
    n: u32,
    sx: f64,
    sy: f64,
    sz: f64,
    xx: f64,
    xy: f64,
    xz: f64,
    yy: f64,
    yz: f64,
    zz: f64,
}

#[derive(Debug, Clone, Copy)]
struct PlaneFit {
    normal: Vector3<f64>,
    centroid: Vector3<f64>,
    /// Distance from the camera origin to the fitted plane.
    camera_distance: f64,
}

impl PlaneAcc {
    #[inline]
    fn add(&mut self, p: &Vector3<f64>) {
        self.n += 1;
        self.sx += p.x;
        self.sy += p.y;
        self.sz += p.z;
        self.xx += p.x * p.x;
        self.xy += p.x * p.y;
        self.xz += p.x * p.z;
        self.yy += p.y * p.y;
        self.yz += p.y * p.z;
        self.zz += p.z * p.z;
    }

    /// Plane through the centroid whose normal is the smallest-eigenvalue
    /// direction of the centered covariance, oriented toward the camera.
    /// `None` when underdetermined or the scatter is degenerate.
    fn fit(&self) -> Option<PlaneFit> {
        if self.n < 3 {
            return None;
        }
        let n = self.n as f64;
        let c = Vector3::new(self.sx / n, self.sy / n, self.sz / n);
        let cov = nalgebra::Matrix3::new(
            self.xx / n - c.x * c.x,
            self.xy / n - c.x * c.y,
            self.xz / n - c.x * c.z,
            self.xy / n - c.x * c.y,
            self.yy / n - c.y * c.y,
            self.yz / n - c.y * c.z,
            self.xz / n - c.x * c.z,
            self.yz / n - c.y * c.z,
            self.zz / n - c.z * c.z,
        );
        let eig = sym_eigen3(&cov);
        let scale = eig.values[2].abs().max(eig.values[0].abs());
        // Collinear points leave two vanishing eigenvalues; a tie in the
        // smallest eigenvalue means the normal direction is ambiguous.
        if scale <= 0.0 || eig.values[1] - eig.values[0] <= TIE_EPS * scale {
            return None;
        }
        let mut normal = eig.vectors[0];
        if normal.dot(&c) > 0.0 {
            normal = -normal;
        }
        Some(PlaneFit {
            normal,
            centroid: c,
            camera_distance: normal.dot(&c).abs(),
        })
    }
}

/// Per-pixel surface normals from disk-window plane fits. When the window's
/// center pixel has depth, neighbors outside its depth band are excluded so
/// the fit does not bleed across occlusion boundaries.
pub fn estimate_normals(cloud: &PointCloud, radius: usize) -> Result<NormalMap> {
    if radius < 1 {
        return Err(Error::InvalidParam(format!(
            "normal estimation radius must be >= 1, got {radius}"
        )));
    }
    let (w, h) = (cloud.width(), cloud.height());
    let offsets = disk_offsets(radius);
    let mut normals = vec![Vector3::zeros(); w * h];
    let mut valid = Grid::filled(w, h, false)?;
    let mut pts: Vec<Vector3<f64>> = Vec::with_capacity(offsets.len());
    let mut kept: Vec<Vector3<f64>> = Vec::with_capacity(offsets.len());
    for y in 0..h {
        for x in 0..w {
            let band = cloud
                .point(x, y)
                .map(|c| (c.z, (DEPTH_BAND_REL * c.z).max(DEPTH_BAND_MIN)));
            pts.clear();
            for &(dx, dy) in &offsets {
                let (nx, ny) = (x as i64 + dx as i64, y as i64 + dy as i64);
                if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                    continue;
                }
                if let Some(p) = cloud.point(nx as usize, ny as usize) {
                    if band.is_none_or(|(zc, b)| (p.z - zc).abs() <= b) {
                        pts.push(p);
                    }
                }
            }
            let Some(mut fit) = fit_points(&pts) else {
                continue;
            };
            for _ in 0..TRIM_PASSES {
                let sq_sum: f64 = pts
                    .iter()
                    .map(|p| fit.normal.dot(&(p - fit.centroid)).powi(2))
                    .sum();
                let rms = (sq_sum / pts.len() as f64).sqrt();
                if rms <= RESIDUAL_TRIM_MIN {
                    break;
                }
                let cutoff = RESIDUAL_TRIM_FACTOR * rms;
                kept.clear();
                kept.extend(
                    pts.iter()
                        .filter(|p| fit.normal.dot(&(*p - fit.centroid)).abs() <= cutoff),
                );
                if kept.len() == pts.len() {
                    break;
                }
                let Some(refit) = fit_points(&kept) else {
                    break;
                };
                fit = refit;
                std::mem::swap(&mut pts, &mut kept);
            }
            normals[y * w + x] = fit.normal;
            *valid.get_mut(x, y) = true;
        }
    }
    Ok(NormalMap {
        width: w,
        height: h,
        radius,
        normals,
        valid,
    })
}

fn fit_points(pts: &[Vector3<f64>]) -> Option<PlaneFit> {
    let mut acc = PlaneAcc::default();
    for p in pts {
        acc.add(p);
    }
    acc.fit()
}

/// Gradient channels for one scale and orientation.
#[derive(Debug, Clone)]
pub struct GradientChannelSet {
    /// Crease angle in degrees where the crease tests convex, else 0.
    pub ng_convex: Grid<f64>,
    /// Crease angle in degrees where the crease tests concave, else 0.
    pub ng_concave: Grid<f64>,
    /// Absolute difference of the half-disk planes' camera distances, meters;
    /// zero on single-plane interiors, the step size across a depth step.
    pub dg: Grid<f64>,
    /// True where both half-disk fits succeeded.
    pub valid: Grid<bool>,
}

/// Half-disk gradient channels over several scales and orientations.
#[derive(Debug, Clone)]
pub struct GradientMaps {
    width: usize,
    height: usize,
    radii: Vec<usize>,
    orientations: usize,
    sets: Vec<GradientChannelSet>,
}

impl GradientMaps {
    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn radii(&self) -> &[usize] {
        &self.radii
    }

    pub fn orientations(&self) -> usize {
        self.orientations
    }

    /// Orientation `o` measures change along this direction (radians).
    pub fn orientation_angle(&self, o: usize) -> f64 {
        o as f64 * std::f64::consts::PI / self.orientations as f64
    }

    pub fn channel_set(&self, radius_idx: usize, orientation: usize) -> &GradientChannelSet {
        &self.sets[radius_idx * self.orientations + orientation]
    }
}

/// Classification of an offset relative to the dividing line.
#[derive(Clone, Copy, PartialEq)]
enum Side {
    Positive,
    Negative,
    OnLine,
}

/// Fits planes on opposing half-disks at every pixel, for each scale and
/// orientation. The half-disks split along the line through the center pixel
/// perpendicular to the orientation direction; offsets on the line (center
/// included) belong to neither half.
pub fn normal_gradients(
    cloud: &PointCloud,
    radii: &[usize],
    orientations: usize,
) -> Result<GradientMaps> {
    if orientations < 2 {
        return Err(Error::InvalidParam(format!(
            "need at least 2 orientations, got {orientations}"
        )));
    }
    if radii.is_empty() {
        return Err(Error::InvalidParam("no gradient radii given".into()));
    }
    for &r in radii {
        if r < 1 {
            return Err(Error::InvalidParam(format!(
                "gradient radius must be >= 1, got {r}"
            )));
        }
    }

    let (w, h) = (cloud.width(), cloud.height());
    let mut sets = Vec::with_capacity(radii.len() * orientations);
    for &radius in radii {
        let offsets = disk_offsets(radius);
        // side[k][o]: which half offset k belongs to at orientation o.
        let sides: Vec<Vec<Side>> = offsets
            .iter()
            .map(|&(dx, dy)| {
                (0..orientations)
                    .map(|o| {
                        let theta = o as f64 * std::f64::consts::PI / orientations as f64;
                        let proj = dx as f64 * theta.cos() + dy as f64 * theta.sin();
                        if proj.abs() < 1e-9 * radius as f64 {
                            Side::OnLine
                        } else if proj > 0.0 {
                            Side::Positive
                        } else {
                            Side::Negative
                        }
                    })
                    .collect()
            })
            .collect();

        let mut planes: Vec<GradientChannelSet> = (0..orientations)
            .map(|_| GradientChannelSet {
                ng_convex: Grid::filled(w, h, 0.0).unwrap(),
                ng_concave: Grid::filled(w, h, 0.0).unwrap(),
                dg: Grid::filled(w, h, 0.0).unwrap(),
                valid: Grid::filled(w, h, false).unwrap(),
            })
            .collect();

        let mut accs = vec![PlaneAcc::default(); orientations * 2];
        for y in 0..h {
            for x in 0..w {
                accs.fill(PlaneAcc::default());
                for (k, &(dx, dy)) in offsets.iter().enumerate() {
                    let (nx, ny) = (x as i64 + dx as i64, y as i64 + dy as i64);
                    if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                        continue;
                    }
                    let Some(p) = cloud.point(nx as usize, ny as usize) else {
                        continue;
                    };
                    for (o, side) in sides[k].iter().enumerate() {
                        match side {
                            Side::Positive => accs[o * 2].add(&p),
                            Side::Negative => accs[o * 2 + 1].add(&p),
                            Side::OnLine => {}
                        }
                    }
                }
                for o in 0..orientations {
                    let (Some(pos), Some(neg)) = (accs[o * 2].fit(), accs[o * 2 + 1].fit())
                    else {
                        continue;
                    };
                    let angle = pos
                        .normal
                        .dot(&neg.normal)
                        .clamp(-1.0, 1.0)
                        .acos()
                        .to_degrees();
                    // Convex when each centroid lies on the camera side of the
                    // other half-disk's plane; normals point camera-ward, so
                    // the camera side is the positive-normal side.
                    let convex = pos.normal.dot(&(neg.centroid - pos.centroid)) > 0.0
                        && neg.normal.dot(&(pos.centroid - neg.centroid)) > 0.0;
                    let set = &mut planes[o];
                    if convex {
                        *set.ng_convex.get_mut(x, y) = angle;
                    } else {
                        *set.ng_concave.get_mut(x, y) = angle;
                    }
                    *set.dg.get_mut(x, y) = (pos.camera_distance - neg.camera_distance).abs();
                    *set.valid.get_mut(x, y) = true;
                }
            }
        }
        sets.extend(planes);
    }

    Ok(GradientMaps {
        width: w,
        height: h,
        radii: radii.to_vec(),
        orientations,
        sets,
    })
}
