use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use parttrack_core::harness::commands::{detect_command, eval_command, synth_command, track_command, TrackOptions};

#[derive(Parser)]
#[command(name = "parttrack", version, about = "Part-based tracking with occlusion handling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track a target through a frame directory and write reports.
    Track {
        #[arg(long)]
        model: PathBuf,
        /// Directory of PNG/PNM frames (ordered by manifest.txt or by name).
        #[arg(long)]
        frames: PathBuf,
        /// Ground truth, one `x y w h` line per frame; line 1 initializes.
        #[arg(long)]
        gt: PathBuf,
        /// Tracker config JSON; missing keys use defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        /// Re-initialize around the last box after a loss.
        #[arg(long)]
        redetect: bool,
    },
    /// Detect objects in one image and print scored boxes as JSON.
    Detect {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        image: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        threshold: f64,
        /// Score by best visible subset instead of the full model.
        #[arg(long)]
        occlusion: bool,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Render a synthetic sequence with ground truth and a fitted model.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Score a trajectory CSV against ground truth.
    Eval {
        #[arg(long)]
        traj: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn run(cli: Cli) -> parttrack_core::Result<()> {
    match cli.command {
        Command::Track { model, frames, gt, config, out_dir, redetect } => {
            let s = track_command(&TrackOptions { model, frames, gt, config, out_dir, redetect })?;
            println!(
                "frames {} mean_iou {:.4} precision@20 {:.4} losses {:?}",
                s.report.frames, s.report.mean_iou, s.report.precision_at_20, s.loss_events
            );
        }
        Command::Detect { model, image, threshold, occlusion, config } => {
            let dets = detect_command(&model, &image, threshold, occlusion, config.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&dets)?);
        }
        Command::Synth { spec, out_dir } => {
            let out = synth_command(&spec, &out_dir)?;
            println!("frames {}", out.frames_dir.display());
            println!("ground truth {}", out.ground_truth.display());
            println!("model {}", out.model.display());
        }
        Command::Eval { traj, gt, out_dir } => {
            let r = eval_command(&traj, &gt, &out_dir)?;
            println!(
                "frames {} mean_iou {:.4} mean_center_error {:.2} precision@20 {:.4}",
                r.frames, r.mean_iou, r.mean_center_error, r.precision_at_20
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
