//! `geodepth`: batch pipeline over depth datasets.
//!
//! Every subcommand exits 0 on success, 1 on a runtime error (printed as a
//! single `error: ...` line on stderr), and 2 on a usage error.

mod channels;
mod evalcmd;
mod forest;
mod support;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "geodepth",
    version,
    about = "Geometric processing of depth datasets: geocentric channels, \
             region features, instance-mask forests, and evaluation metrics"
)]
struct Cli {
    /// Config file merged over the GEODEPTH_CONFIG default; flags override both
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads for batch commands (0 or unset: all cores)
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode depth as the 3-channel disparity/height/angle PNG
    Hha(channels::HhaArgs),
    /// Estimate per-pixel surface normals
    Normals(channels::NormalsArgs),
    /// Estimate the gravity direction
    Gravity(channels::GravityArgs),
    /// Compute normal- and depth-gradient channels
    Gradients(channels::GradientsArgs),
    /// Aggregate geometric features over superpixel regions
    Regionfeat(channels::RegionfeatArgs),
    /// Requantize clean depth with simulated sensor noise
    SimulateKinect(channels::SimulateKinectArgs),
    /// Fit channel calibration percentiles over a split
    Calibrate(channels::CalibrateArgs),
    /// Train the instance-mask forest
    MaskTrain(forest::MaskTrainArgs),
    /// Predict instance masks for detections
    MaskPredict(forest::MaskPredictArgs),
    /// Select the mask threshold on validation data
    MaskThreshold(forest::MaskThresholdArgs),
    /// Coverage of ranked region proposals against ground truth
    EvalCoverage(evalcmd::EvalCoverageArgs),
    /// Detection average precision (box or region overlap)
    EvalAp(evalcmd::EvalApArgs),
    /// Semantic segmentation metrics over a split
    EvalSegm(evalcmd::EvalSegmArgs),
    /// Non-maximum suppression on a detection file
    Nms(evalcmd::NmsArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let ctx = support::Ctx::new(cli.config.as_deref(), cli.jobs)?;
    ctx.install(|| match cli.command {
        Command::Hha(a) => channels::hha(&ctx, &a),
        Command::Normals(a) => channels::normals(&ctx, &a),
        Command::Gravity(a) => channels::gravity(&ctx, &a),
        Command::Gradients(a) => channels::gradients(&ctx, &a),
        Command::Regionfeat(a) => channels::regionfeat(&ctx, &a),
        Command::SimulateKinect(a) => channels::simulate_kinect(&ctx, &a),
        Command::Calibrate(a) => channels::calibrate(&ctx, &a),
        Command::MaskTrain(a) => forest::mask_train(&ctx, &a),
        Command::MaskPredict(a) => forest::mask_predict(&ctx, &a),
        Command::MaskThreshold(a) => forest::mask_threshold(&ctx, &a),
        Command::EvalCoverage(a) => evalcmd::eval_coverage(&ctx, &a),
        Command::EvalAp(a) => evalcmd::eval_ap(&ctx, &a),
        Command::EvalSegm(a) => evalcmd::eval_segm(&ctx, &a),
        Command::Nms(a) => evalcmd::nms_cmd(&ctx, &a),
    })
}
