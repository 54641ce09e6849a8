//! File-level entry points behind the `parttrack` subcommands.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_pyramid::Frame;
use crate::model::{load_model, save_model};
use crate::tracker::TrackerConfig;

use super::detect::{detect, Detection};
use super::eval::{emit_report, evaluate, EvalReport, ReportPaths};
use super::io::{load_frames, read_ground_truth, read_trajectory_csv, save_frames, trajectory_rows, write_ground_truth};
use super::run::run_sequence;
use super::synth::{generate_synthetic_sequence, model_from_texture, target_texture, SyntheticSpec, TextureModelSpec};

/// Reads a JSON tracker config; absent keys take their defaults.
pub fn load_config(path: Option<&Path>) -> Result<TrackerConfig> {
    let config: TrackerConfig = match path {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?).map_err(|e| Error::Parse {
            path: p.to_path_buf(),
            message: e.to_string(),
        })?,
        None => TrackerConfig::default(),
    };
    config.validate()?;
    Ok(config)
}

#[derive(Debug, Clone)]
pub struct TrackOptions {
    pub model: PathBuf,
    pub frames: PathBuf,
    pub gt: PathBuf,
    pub config: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub redetect: bool,
}

#[derive(Debug, Clone)]
pub struct TrackSummary {
    pub report: EvalReport,
    pub loss_events: Vec<usize>,
    pub paths: ReportPaths,
}

pub fn track_command(opts: &TrackOptions) -> Result<TrackSummary> {
    let model = load_model(&opts.model)?;
    let mut config = load_config(opts.config.as_deref())?;
    config.redetect |= opts.redetect;
    let frames = load_frames(&opts.frames)?;
    let gt = read_ground_truth(&opts.gt)?;
    if gt.len() != frames.len() {
        return Err(Error::LengthMismatch(frames.len(), gt.len()));
    }
    log::info!("tracking {} frames from {}", frames.len(), opts.frames.display());
    let traj = run_sequence(&frames, &gt[0], &model, &config)?;
    let report = evaluate(&traj.boxes(), &gt)?;
    let rows = trajectory_rows(&traj);
    let paths = emit_report(&report, Some(&rows), &traj.loss_events, &opts.out_dir)?;
    Ok(TrackSummary {
        report,
        loss_events: traj.loss_events,
        paths,
    })
}

pub fn detect_command(model: &Path, image: &Path, threshold: f64, occlusion: bool, config: Option<&Path>) -> Result<Vec<Detection>> {
    let model = load_model(model)?;
    let config = load_config(config)?;
    let frame = Frame::load(image)?;
    detect(&frame, &model, threshold, occlusion, &config)
}

/// Synthetic spec file: the sequence fields plus an optional `model` block
/// shaping the model fitted to the target texture.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthFile {
    #[serde(flatten)]
    pub sequence: SyntheticSpec,
    #[serde(default)]
    pub model: TextureModelSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub frames_dir: PathBuf,
    pub ground_truth: PathBuf,
    pub model: PathBuf,
}

/// Writes `frames/`, `groundtruth.txt` and `model.json` (fitted to the
/// target texture) into `out_dir`.
pub fn synth_to_dir(file: &SynthFile, out_dir: &Path) -> Result<SynthOutput> {
    let spec = &file.sequence;
    let (frames, gt) = generate_synthetic_sequence(spec)?;
    let model = model_from_texture(&target_texture(spec), spec.background, 8, &file.model)?;
    let out = SynthOutput {
        frames_dir: out_dir.join("frames"),
        ground_truth: out_dir.join("groundtruth.txt"),
        model: out_dir.join("model.json"),
    };
    save_frames(&out.frames_dir, &frames)?;
    write_ground_truth(&out.ground_truth, &gt)?;
    save_model(&model, &out.model)?;
    Ok(out)
}

pub fn synth_command(spec: &Path, out_dir: &Path) -> Result<SynthOutput> {
    let text = std::fs::read_to_string(spec)?;
    let file: SynthFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: spec.to_path_buf(),
        message: e.to_string(),
    })?;
    synth_to_dir(&file, out_dir)
}

pub fn eval_command(trajectory: &Path, gt: &Path, out_dir: &Path) -> Result<EvalReport> {
    let rows = read_trajectory_csv(trajectory)?;
    let truth = read_ground_truth(gt)?;
    let boxes: Vec<_> = rows.iter().map(|r| r.root_box()).collect();
    let report = evaluate(&boxes, &truth)?;
    let losses: Vec<usize> = rows
        .windows(2)
        .filter(|w| w[1].lost && !w[0].lost)
        .map(|w| w[1].frame)
        .collect();
    emit_report(&report, None, &losses, out_dir)?;
    Ok(report)
}
