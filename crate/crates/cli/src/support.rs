//! Shared plumbing: config resolution, the worker pool, and the per-image
//! derivation chain.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use rayon::prelude::*;

use geodepth_core::config::Config;
use geodepth_core::geocentric::{encode_hha, derive_channels, Calibration, DepthDerived};
use geodepth_core::geom::CameraIntrinsics;
use geodepth_core::grid::Grid;
use geodepth_core::io::png::{read_depth_png, read_rgb8};
use geodepth_core::io::text::{Manifest, ManifestEntry};
use geodepth_core::maskforest::FeatureImage;

pub struct Ctx {
    pub config: Config,
    pool: Option<rayon::ThreadPool>,
}

impl Ctx {
    pub fn new(extra_config: Option<&Path>, jobs: Option<usize>) -> anyhow::Result<Self> {
        let mut config = Config::from_env().context("loading default config")?;
        if let Some(path) = extra_config {
            config
                .merge_file(path)
                .with_context(|| format!("loading config {}", path.display()))?;
        }
        let jobs = match jobs {
            Some(n) => n,
            None => config.get_usize("jobs", 0)?,
        };
        let pool = if jobs > 0 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(jobs)
                    .build()
                    .context("building worker pool")?,
            )
        } else {
            None
        };
        Ok(Ctx { config, pool })
    }

    /// Runs `f` inside the sized worker pool (or the default pool).
    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        match &self.pool {
            Some(pool) => pool.install(f),
            None => f(),
        }
    }

    pub fn f64_param(&self, flag: Option<f64>, key: &str, default: f64) -> anyhow::Result<f64> {
        Ok(match flag {
            Some(v) => v,
            None => self.config.get_f64(key, default)?,
        })
    }

    pub fn usize_param(
        &self,
        flag: Option<usize>,
        key: &str,
        default: usize,
    ) -> anyhow::Result<usize> {
        Ok(match flag {
            Some(v) => v,
            None => self.config.get_usize(key, default)?,
        })
    }

    pub fn u64_param(&self, flag: Option<u64>, key: &str, default: u64) -> anyhow::Result<u64> {
        Ok(match flag {
            Some(v) => v,
            None => self.config.get_u64(key, default)?,
        })
    }

    pub fn bool_param(&self, flag: bool, key: &str) -> anyhow::Result<bool> {
        Ok(flag || self.config.get_bool(key, false)?)
    }
}

/// Selected manifest entries, in manifest order.
pub fn select_entries<'m>(
    manifest: &'m Manifest,
    split: Option<&str>,
) -> anyhow::Result<Vec<&'m ManifestEntry>> {
    let entries: Vec<&ManifestEntry> = match split {
        Some(tag) => manifest.split(tag),
        None => manifest.entries.iter().collect(),
    };
    if entries.is_empty() {
        match split {
            Some(tag) => bail!("manifest has no images in split {tag:?}"),
            None => bail!("manifest lists no images"),
        }
    }
    Ok(entries)
}

/// Maps entries in parallel, keeping manifest order and tagging errors with
/// the image id.
pub fn for_entries<T: Send>(
    entries: &[&ManifestEntry],
    f: impl Fn(&ManifestEntry) -> anyhow::Result<T> + Sync,
) -> anyhow::Result<Vec<T>> {
    entries
        .par_iter()
        .map(|e| f(e).with_context(|| format!("image {}", e.id)))
        .collect()
}

/// An optional manifest column, as a hard requirement.
pub fn require_column<'e>(
    entry: &'e ManifestEntry,
    column: &'e Option<PathBuf>,
    name: &str,
) -> anyhow::Result<&'e Path> {
    match column {
        Some(p) => Ok(p.as_path()),
        None => bail!("image {}: manifest has no {name} file", entry.id),
    }
}

/// Output file name for an image id; rejects ids that would escape the
/// output directory.
pub fn id_filename(id: &str, suffix: &str) -> anyhow::Result<String> {
    if id.contains(['/', '\\']) || id.contains("..") {
        bail!("image id {id:?} is not a safe file name");
    }
    Ok(format!("{id}{suffix}"))
}

/// Stem of an input path, as the image id in single-file mode.
pub fn path_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".to_string())
}

pub fn derive(
    depth_path: &Path,
    k: &CameraIntrinsics,
    radius: usize,
) -> anyhow::Result<DepthDerived> {
    let depth = read_depth_png(depth_path)?;
    Ok(derive_channels(&depth, k, radius)?)
}

/// The warning printed when an image fell back to the camera vertical.
pub fn gravity_warning(id: &str, derived: &DepthDerived) -> Option<String> {
    derived.gravity.as_ref().err().map(|msg| {
        format!("warning: {id}: gravity estimation failed ({msg}); using camera vertical")
    })
}

pub fn print_warnings(warnings: impl IntoIterator<Item = Option<String>>) {
    for w in warnings.into_iter().flatten() {
        eprintln!("{w}");
    }
}

/// Grayscale intensity in [0, 1] from an 8-bit RGB image.
pub fn read_intensity(path: &Path) -> anyhow::Result<Grid<f64>> {
    let (w, h, rgb) = read_rgb8(path)?;
    let luma = rgb
        .chunks_exact(3)
        .map(|p| (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64) / 255.0)
        .collect();
    Ok(Grid::from_vec(w, h, luma)?)
}

/// Builds the forest's feature stack for one image.
pub fn feature_image(
    derived: &DepthDerived,
    cal: &Calibration,
    intensity: Option<&Grid<f64>>,
) -> anyhow::Result<FeatureImage> {
    let hha = encode_hha(&derived.disparity, &derived.height, &derived.angle, cal)?;
    Ok(FeatureImage::new(
        &derived.disparity.field,
        &derived.height,
        &derived.angle,
        &derived.normals,
        intensity,
        &hha,
    )?)
}

pub fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating directory {}", dir.display()))
}

pub fn write_text_file(path: &Path, content: &str) -> anyhow::Result<()> {
    std::fs::write(path, content).with_context(|| format!("writing {}", path.display()))
}
