//! Synthetic scene rendering: ray casting against planes and axis-aligned
//! boxes, for generating depth images with known geometry in tests and tools.
//!
//! World frame: `+Y` up. Camera frame: `+X` right, `+Y` down, `+Z` forward.
//! Rendered depth is the camera-frame Z coordinate of the hit point.

use nalgebra::{Rotation3, Unit, Vector3};

use crate::error::{Error, Result};
use crate::geom::{CameraIntrinsics, DepthImage};
use crate::grid::Grid;

/// A renderable primitive in world coordinates.
#[derive(Debug, Clone)]
pub enum Primitive {
    /// Infinite plane through `point` with unit `normal`; visible from both sides.
    Plane {
        point: Vector3<f64>,
        normal: Vector3<f64>,
    },
    /// Axis-aligned box spanning `min..max` per component.
    Aabb {
        min: Vector3<f64>,
        max: Vector3<f64>,
    },
}

/// A list of primitives; hit indices refer to insertion order.
#[derive(Debug, Clone, Default)]
pub struct Scene {
    pub primitives: Vec<Primitive>,
}

impl Scene {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, p: Primitive) -> usize {
        self.primitives.push(p);
        self.primitives.len() - 1
    }

    /// Floor at `y = 0` plus two walls (`x = 0`, `z = 0`) enclosing the
    /// positive octant. Returns the primitive indices (floor, wall_x, wall_z).
    pub fn room() -> (Self, usize, usize, usize) {
        let mut s = Self::new();
        let floor = s.add(Primitive::Plane {
            point: Vector3::zeros(),
            normal: Vector3::y(),
        });
        let wall_x = s.add(Primitive::Plane {
            point: Vector3::zeros(),
            normal: Vector3::x(),
        });
        let wall_z = s.add(Primitive::Plane {
            point: Vector3::zeros(),
            normal: Vector3::z(),
        });
        (s, floor, wall_x, wall_z)
    }
}

/// Camera placement: rotation maps camera coordinates to world coordinates.
#[derive(Debug, Clone)]
pub struct CameraPose {
    pub rotation: Rotation3<f64>,
    pub center: Vector3<f64>,
}

impl CameraPose {
    /// A camera at `center` looking along the horizontal heading `yaw`
    /// (radians; yaw 0 faces world `+Z`), then pitched down by `pitch` and
    /// rolled by `roll` about its own axes.
    pub fn oriented(center: Vector3<f64>, yaw: f64, pitch: f64, roll: f64) -> Self {
        let z_c = Vector3::new(yaw.sin(), 0.0, yaw.cos());
        let y_c = -Vector3::y();
        let x_c = y_c.cross(&z_c);
        let base = Rotation3::from_basis_unchecked(&[x_c, y_c, z_c]);
        let pitch_rot = Rotation3::from_axis_angle(&Unit::new_unchecked(Vector3::x()), -pitch);
        let roll_rot = Rotation3::from_axis_angle(&Unit::new_unchecked(Vector3::z()), roll);
        Self {
            rotation: base * pitch_rot * roll_rot,
            center,
        }
    }

    /// The world down direction expressed in camera coordinates.
    pub fn gravity_in_camera(&self) -> Vector3<f64> {
        self.rotation.inverse() * -Vector3::y()
    }
}

/// Per-pixel output of [`render`].
#[derive(Debug, Clone)]
pub struct Rendering {
    pub depth: DepthImage,
    /// Index into `scene.primitives` of the nearest hit, or `None` (no hit /
    /// hit beyond `max_depth`).
    pub hit: Grid<Option<usize>>,
    /// World-frame hit points; meaningful only where `hit` is `Some`.
    pub world_points: Vec<Vector3<f64>>,
}

impl Rendering {
    pub fn world_point(&self, x: usize, y: usize) -> Option<Vector3<f64>> {
        self.hit
            .get(x, y)
            .is_some()
            .then(|| self.world_points[y * self.depth.width() + x])
    }
}

fn intersect(p: &Primitive, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
    const T_MIN: f64 = 1e-9;
    match p {
        Primitive::Plane { point, normal } => {
            let denom = normal.dot(dir);
            if denom.abs() < 1e-12 {
                return None;
            }
            let t = normal.dot(&(point - origin)) / denom;
            (t > T_MIN).then_some(t)
        }
        Primitive::Aabb { min, max } => {
            let mut t_near = f64::NEG_INFINITY;
            let mut t_far = f64::INFINITY;
            for axis in 0..3 {
                if dir[axis].abs() < 1e-15 {
                    if origin[axis] < min[axis] || origin[axis] > max[axis] {
                        return None;
                    }
                    continue;
                }
                let inv = 1.0 / dir[axis];
                let (t0, t1) = {
                    let a = (min[axis] - origin[axis]) * inv;
                    let b = (max[axis] - origin[axis]) * inv;
                    if a <= b {
                        (a, b)
                    } else {
                        (b, a)
                    }
                };
                t_near = t_near.max(t0);
                t_far = t_far.min(t1);
                if t_near > t_far {
                    return None;
                }
            }
            (t_near > T_MIN).then_some(t_near)
        }
    }
}

/// Renders a depth image of `scene` from `pose`. Pixels whose ray misses every
/// primitive, or whose nearest hit is farther than `max_depth` meters, are
/// invalid.
pub fn render(
    scene: &Scene,
    k: &CameraIntrinsics,
    pose: &CameraPose,
    width: usize,
    height: usize,
    max_depth: f64,
) -> Result<Rendering> {
    if width == 0 || height == 0 {
        return Err(Error::Dimension("render target must be non-empty".into()));
    }
    if !(max_depth > 0.0) {
        return Err(Error::InvalidParam(format!(
            "max_depth must be positive, got {max_depth}"
        )));
    }
    let mut depth = vec![None; width * height];
    let mut hit = Grid::filled(width, height, None)?;
    let mut world_points = vec![Vector3::zeros(); width * height];
    for y in 0..height {
        for x in 0..width {
            // Ray through the pixel with unit camera-frame Z, so the ray
            // parameter at the hit equals the camera-frame depth.
            let dir_cam = Vector3::new(
                (x as f64 - k.cx) / k.fx,
                (y as f64 - k.cy) / k.fy,
                1.0,
            );
            let dir = pose.rotation * dir_cam;
            let mut best: Option<(f64, usize)> = None;
            for (i, prim) in scene.primitives.iter().enumerate() {
                if let Some(t) = intersect(prim, &pose.center, &dir) {
                    if best.map_or(true, |(bt, _)| t < bt) {
                        best = Some((t, i));
                    }
                }
            }
            if let Some((t, i)) = best {
                if t <= max_depth {
                    let idx = y * width + x;
                    depth[idx] = Some(t);
                    *hit.get_mut(x, y) = Some(i);
                    world_points[idx] = pose.center + t * dir;
                }
            }
        }
    }
    Ok(Rendering {
        depth: DepthImage::from_options(width, height, depth)?,
        hit,
        world_points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::backproject;

    fn test_k() -> CameraIntrinsics {
        CameraIntrinsics::new(200.0, 200.0, 79.5, 59.5, 0.075).unwrap()
    }

    #[test]
    fn level_camera_sees_floor_at_known_depth() {
        let (scene, floor, _, _) = Scene::room();
        // Straight down from 2m above the floor.
        let pose = CameraPose::oriented(
            Vector3::new(2.0, 2.0, 2.0),
            0.0,
            std::f64::consts::FRAC_PI_2,
            0.0,
        );
        let r = render(&scene, &test_k(), &pose, 160, 120, 50.0).unwrap();
        let (cx, cy) = (80, 60);
        assert_eq!(*r.hit.get(cx, cy), Some(floor));
        let d = r.depth.at(cx, cy).unwrap();
        assert!((d - 2.0).abs() < 0.01, "center depth {d}");
        let p = r.world_point(cx, cy).unwrap();
        assert!(p.y.abs() < 1e-9, "floor hit at y = {}", p.y);
    }

    #[test]
    fn world_points_match_backprojection() {
        let (scene, _, _, _) = Scene::room();
        let pose = CameraPose::oriented(Vector3::new(3.0, 1.5, 3.0), 4.0, 0.35, 0.1);
        let k = test_k();
        let r = render(&scene, &k, &pose, 64, 48, 50.0).unwrap();
        let cloud = backproject(&r.depth, &k).unwrap();
        let mut checked = 0;
        for y in 0..48 {
            for x in 0..64 {
                let (Some(p_cam), Some(p_world)) = (cloud.point(x, y), r.world_point(x, y))
                else {
                    continue;
                };
                let rebuilt = pose.rotation * p_cam + pose.center;
                assert!(
                    (rebuilt - p_world).norm() < 1e-9,
                    "mismatch at ({x},{y}): {rebuilt:?} vs {p_world:?}"
                );
                checked += 1;
            }
        }
        assert!(checked > 1000, "only {checked} valid pixels");
    }

    #[test]
    fn box_on_floor_shadows_it() {
        let (mut scene, _, _, _) = Scene::room();
        let box_id = scene.add(Primitive::Aabb {
            min: Vector3::new(1.0, 0.0, 1.0),
            max: Vector3::new(2.0, 0.5, 2.0),
        });
        let pose = CameraPose::oriented(
            Vector3::new(1.5, 3.0, 1.5),
            0.0,
            std::f64::consts::FRAC_PI_2,
            0.0,
        );
        let r = render(&scene, &test_k(), &pose, 160, 120, 50.0).unwrap();
        // The box top is 2.5m below the camera, straight down.
        assert_eq!(*r.hit.get(80, 60), Some(box_id));
        let d = r.depth.at(80, 60).unwrap();
        assert!((d - 2.5).abs() < 0.01, "box-top depth {d}");
        let p = r.world_point(80, 60).unwrap();
        assert!((p.y - 0.5).abs() < 1e-9, "box-top height {}", p.y);
    }

    #[test]
    fn rays_missing_everything_are_invalid() {
        let mut scene = Scene::new();
        scene.add(Primitive::Plane {
            point: Vector3::zeros(),
            normal: Vector3::y(),
        });
        // Camera below the plane looking straight down: every ray diverges.
        let pose = CameraPose::oriented(
            Vector3::new(0.0, -1.0, 0.0),
            0.0,
            std::f64::consts::FRAC_PI_2,
            0.0,
        );
        let r = render(&scene, &test_k(), &pose, 32, 32, 50.0).unwrap();
        assert_eq!(r.depth.valid_count(), 0);
    }

    #[test]
    fn gravity_in_camera_tracks_pitch() {
        let pose = CameraPose::oriented(Vector3::zeros(), 0.0, 0.0, 0.0);
        let g = pose.gravity_in_camera();
        assert!((g - Vector3::y()).norm() < 1e-12, "level camera: {g:?}");

        let pitch = 0.3;
        let pose = CameraPose::oriented(Vector3::zeros(), 1.2, pitch, 0.0);
        let g = pose.gravity_in_camera();
        // Pitching down moves gravity toward the camera forward axis.
        assert!((g.y - pitch.cos()).abs() < 1e-12);
        assert!((g.z - pitch.sin()).abs() < 1e-12);
        assert!(g.x.abs() < 1e-12);
    }
}
