//! Small numeric kernels: closed-form symmetric eigensolvers, percentiles,
//! deterministic seed mixing.

use nalgebra::{Matrix3, Vector3};

/// Eigen decomposition of a symmetric 3x3 matrix.
///
/// `values` are sorted ascending and `vectors[i]` is the unit eigenvector for
/// `values[i]`. The basis is orthonormal even for repeated eigenvalues.
#[derive(Debug, Clone)]
pub struct SymEigen3 {
    pub values: [f64; 3],
    pub vectors: [Vector3<f64>; 3],
}

/// Closed-form eigensolver for symmetric 3x3 matrices.
///
/// Eigenvalues come from the trigonometric solution of the characteristic
/// polynomial; eigenvectors from row cross products with an orthogonal-
/// complement fallback for close eigenvalues.
pub fn sym_eigen3(a: &Matrix3<f64>) -> SymEigen3 {
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return SymEigen3 {
            values: [0.0; 3],
            vectors: [Vector3::x(), Vector3::y(), Vector3::z()],
        };
    }
    let a = a / scale;

    let mean = a.trace() / 3.0;
    let b = a - Matrix3::from_diagonal_element(mean);
    // p = sqrt(tr(B^2) / 6), the spread of the shifted spectrum.
    let p2 = (b[(0, 0)] * b[(0, 0)]
        + b[(1, 1)] * b[(1, 1)]
        + b[(2, 2)] * b[(2, 2)]
        + 2.0 * (b[(0, 1)] * b[(0, 1)] + b[(0, 2)] * b[(0, 2)] + b[(1, 2)] * b[(1, 2)]))
        / 6.0;
    if p2 <= f64::EPSILON * f64::EPSILON {
        return SymEigen3 {
            values: [mean * scale; 3],
            vectors: [Vector3::x(), Vector3::y(), Vector3::z()],
        };
    }
    let p = p2.sqrt();
    let r = (b.determinant() / (2.0 * p2 * p)).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;

    let hi = mean + 2.0 * p * phi.cos();
    let lo = mean + 2.0 * p * (phi + 2.0 * std::f64::consts::FRAC_PI_3).cos();
    let mid = 3.0 * mean - hi - lo;
    let values = [lo, mid, hi];

    // Solve the better-separated end of the spectrum first.
    let first = if hi - mid >= mid - lo { 2 } else { 0 };
    let v_first = eigenvector_cross(&a, values[first]);
    let second = 1;
    let v_second = eigenvector_complement(&a, values[second], &v_first);
    let third = 2 - first;
    let mut v_third = v_first.cross(&v_second);
    v_third.normalize_mut();

    let mut vectors = [Vector3::zeros(); 3];
    vectors[first] = v_first;
    vectors[second] = v_second;
    vectors[third] = v_third;

    SymEigen3 {
        values: [lo * scale, mid * scale, hi * scale],
        vectors,
    }
}

/// Eigenvector from the largest cross product of rows of `A - lambda I`.
fn eigenvector_cross(a: &Matrix3<f64>, lambda: f64) -> Vector3<f64> {
    let m = a - Matrix3::from_diagonal_element(lambda);
    let r0 = Vector3::new(m[(0, 0)], m[(0, 1)], m[(0, 2)]);
    let r1 = Vector3::new(m[(1, 0)], m[(1, 1)], m[(1, 2)]);
    let r2 = Vector3::new(m[(2, 0)], m[(2, 1)], m[(2, 2)]);
    let c01 = r0.cross(&r1);
    let c02 = r0.cross(&r2);
    let c12 = r1.cross(&r2);
    let (n01, n02, n12) = (c01.norm_squared(), c02.norm_squared(), c12.norm_squared());
    let best = if n01 >= n02 && n01 >= n12 {
        c01
    } else if n02 >= n12 {
        c02
    } else {
        c12
    };
    let n = best.norm();
    if n == 0.0 {
        // Rank-deficient shifted matrix: any direction is an eigenvector.
        Vector3::x()
    } else {
        best / n
    }
}

/// Eigenvector for `lambda` constrained to the plane orthogonal to `w`.
fn eigenvector_complement(a: &Matrix3<f64>, lambda: f64, w: &Vector3<f64>) -> Vector3<f64> {
    // Orthonormal basis {u, v} of the complement of w.
    let u = if w.x.abs() > w.y.abs() {
        Vector3::new(-w.z, 0.0, w.x) / (w.x * w.x + w.z * w.z).sqrt()
    } else {
        Vector3::new(0.0, w.z, -w.y) / (w.y * w.y + w.z * w.z).sqrt()
    };
    let v = w.cross(&u);
    let au = a * u;
    let av = a * v;
    let m00 = u.dot(&au) - lambda;
    let m01 = u.dot(&av);
    let m11 = v.dot(&av) - lambda;
    // Null direction of the 2x2 [[m00, m01], [m01, m11]].
    let (c0, c1) = if m00.abs() >= m11.abs() {
        if m00.abs() > 0.0 {
            let inv = 1.0 / (m00 * m00 + m01 * m01).sqrt();
            (m01 * inv, -m00 * inv)
        } else {
            (1.0, 0.0)
        }
    } else if m11.abs() > 0.0 {
        let inv = 1.0 / (m11 * m11 + m01 * m01).sqrt();
        (m11 * inv, -m01 * inv)
    } else {
        (1.0, 0.0)
    };
    u * c0 + v * c1
}

/// Eigenvalues of a symmetric 2x2 matrix `[[a, b], [b, c]]`, ascending.
pub fn sym_eigen2_values(a: f64, b: f64, c: f64) -> [f64; 2] {
    let mean = 0.5 * (a + c);
    let d = 0.5 * (a - c);
    let radius = (d * d + b * b).sqrt();
    [mean - radius, mean + radius]
}

/// Nearest-rank percentile (inverse empirical CDF) of pre-sorted values,
/// `q` in `[0, 100]`. Invariant under duplicating the sample.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty slice");
    assert!((0.0..=100.0).contains(&q), "percentile out of range: {q}");
    let rank = (sorted.len() as f64 * q / 100.0).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

///// Round-half-up for non-negative values: 127.5 -> 128.
#[inline]
pub fn round_half_up(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    (x + 0.5).floor()
}

/// SplitMix64 step; used to derive independent per-stream seeds.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E3779B97F4A7C15);
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}
