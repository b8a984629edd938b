//! Sensor-style corruption of clean depth: disparity-domain noise sampled on
//! a coarse grid, bilinear upsampling, and quantization to a fixed step.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geom::{CameraIntrinsics, DepthImage};
use crate::grid::Grid;

/// Disparity-domain corruption parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinectModel {
    /// Quantization step, disparity pixels.
    pub step: f64,
    /// White-noise standard deviation, disparity pixels.
    pub sigma: f64,
    /// Noise is sampled on a grid this many times coarser than the image.
    pub downscale: usize,
}

impl KinectModel {
    pub fn new(step: f64, sigma: f64, downscale: usize) -> Result<Self> {
        let m = KinectModel {
            step,
            sigma,
            downscale,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::InvalidParam(format!(
                "quantization step must be positive, got {}",
                self.step
            )));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::InvalidParam(format!(
                "noise sigma must be non-negative, got {}",
                self.sigma
            )));
        }
        if self.downscale == 0 {
            return Err(Error::InvalidParam(
                "noise downscale factor must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

impl Default for KinectModel {
    fn default() -> Self {
        KinectModel {
            step: 0.125,
            sigma: 0.5,
            downscale: 4,
        }
    }
}

/// Gaussian noise on a node grid `downscale` times coarser than the image,
/// bilinearly interpolated back to full resolution. Nodes are sampled
/// row-major from a stream seeded by `seed`, so the field is a pure function
/// of (shape, model, seed).
fn noise_field(
    width: usize,
    height: usize,
    sigma: f64,
    downscale: usize,
    seed: u64,
) -> Result<Grid<f64>> {
    if sigma == 0.0 {
        return Grid::filled(width, height, 0.0);
    }
    let ds = downscale;
    let gw = (width - 1) / ds + 2;
    let gh = (height - 1) / ds + 2;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma)
        .map_err(|e| Error::InvalidParam(format!("noise distribution: {e}")))?;
    let nodes: Vec<f64> = (0..gw * gh).map(|_| normal.sample(&mut rng)).collect();
    let nodes = Grid::from_vec(gw, gh, nodes)?;

    let mut out = Grid::filled(width, height, 0.0)?;
    for y in 0..height {
        let gy = y as f64 / ds as f64;
        let j0 = gy.floor() as usize;
        let fy = gy - j0 as f64;
        for x in 0..width {
            let gx = x as f64 / ds as f64;
            let i0 = gx.floor() as usize;
            let fx = gx - i0 as f64;
            let n00 = nodes.get(i0, j0);
            let n10 = nodes.get(i0 + 1, j0);
            let n01 = nodes.get(i0, j0 + 1);
            let n11 = nodes.get(i0 + 1, j0 + 1);
            *out.get_mut(x, y) = (1.0 - fy) * ((1.0 - fx) * n00 + fx * n10)
                + fy * ((1.0 - fx) * n01 + fx * n11);
        }
    }
    Ok(out)
}

/// Corrupts clean depth the way a structured-light sensor would: converts to
/// disparity, adds the model's upsampled grid noise, snaps to the nearest
/// multiple of the quantization step, and converts back. Invalid pixels stay
/// invalid; so do pixels whose corrupted disparity is non-positive. The
/// output is a pure function of the inputs and `seed`.
pub fn simulate_kinect(
    depth: &DepthImage,
    k: &CameraIntrinsics,
    model: &KinectModel,
    seed: u64,
) -> Result<DepthImage> {
    model.validate()?;
    k.validate()?;
    let (w, h) = (depth.width(), depth.height());
    let noise = noise_field(w, h, model.sigma, model.downscale, seed)?;
    let scale = k.baseline * k.fx;
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let d = depth.at(x, y).map(|z| scale / z + noise.get(x, y));
            let q = d.map(|d| (d / model.step).round() * model.step);
            out.push(q.filter(|&q| q > 0.0).map(|q| scale / q));
        }
    }
    DepthImage::from_options(w, h, out)
}
