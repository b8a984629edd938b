//! Geometric processing for RGB-D images.
//!
//! The crate turns metric depth images into geocentric quantities (horizontal
//! disparity, height above ground, angle with gravity), estimates surface
//! normals and the gravity direction, aggregates per-pixel geometry into
//! region features over superpixels, trains decision forests that predict
//! instance masks inside detection windows, and scores the results with
//! detection/segmentation metrics. A small I/O layer reads and writes the
//! on-disk formats used by the command-line tools.

pub mod config;
pub mod error;
pub mod eval;
pub mod geocentric;
pub mod geom;
pub mod grid;
pub mod io;
pub mod kinect;
pub mod maskforest;
pub mod math;
pub mod normals;
pub mod regionfeat;
pub mod synth;

pub use error::{Error, Result};
