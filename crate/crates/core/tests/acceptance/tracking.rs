use std::time::Instant;

use parttrack_core::feature_pyramid::PyramidPlan;
use parttrack_core::harness::commands::{synth_to_dir, track_command, SynthFile, TrackOptions};
use parttrack_core::harness::synth::{generate_synthetic_sequence, model_from_texture, target_texture, SyntheticSpec, TextureModelSpec};
use parttrack_core::harness::{detect, evaluate, fixtures, run_sequence};
use parttrack_core::tracker::{choose_candidate, evaluate_step, initialize, track_step, SubsetMode, TrackerConfig};
use parttrack_core::{BBox, Frame, MixtureModel};

use crate::{ensure, Outcome};

fn scenario(spec: &SyntheticSpec, mirrored: bool) -> Result<(Vec<Frame>, Vec<BBox>, MixtureModel), String> {
    let (frames, gt) = generate_synthetic_sequence(spec).map_err(|e| e.to_string())?;
    let model_spec = TextureModelSpec {
        mirrored,
        ..fixtures::model_spec()
    };
    let model = model_from_texture(&target_texture(spec), spec.background, 8, &model_spec).map_err(|e| e.to_string())?;
    Ok((frames, gt, model))
}

pub fn posterior_invariants() -> Outcome {
    let spec = fixtures::random_motion_sequence(7, 100);
    let (frames, gt, model) = scenario(&spec, false)?;
    let cfg = fixtures::tracking_config();
    let mut state = initialize(&frames[0], &model, &gt[0], &cfg).map_err(|e| e.to_string())?;
    let mut sampled = 0;
    for (t, frame) in frames.iter().enumerate().skip(1) {
        if t % 10 == 5 {
            let eval = evaluate_step(&state, frame, &model, &cfg).map_err(|e| e.to_string())?;
            for c in &eval.candidates {
                let inside = eval
                    .windows
                    .iter()
                    .any(|w| w.component == c.placement.component && w.level == c.placement.level && w.contains(c.placement.root_cell));
                ensure!(inside, "frame {t}: candidate outside the declared windows");
            }
            let (base, base_sel, _) = choose_candidate(&eval.candidates, &model, &cfg, 1.0).map_err(|e| e.to_string())?;
            for scale in [0.25, 0.5, 2.0, 3.0, 1e3] {
                let (i, sel, _) = choose_candidate(&eval.candidates, &model, &cfg, scale).map_err(|e| e.to_string())?;
                ensure!(i == base && sel.subset == base_sel.subset, "frame {t}: scale {scale} changed the argmax");
            }
            let (next, _) = track_step(&state, frame, &model, &cfg).map_err(|e| e.to_string())?;
            ensure!(next.placement == eval.candidates[base].placement, "frame {t}: step disagrees with candidate argmax");
            sampled += 1;
        }
        let (next, _) = track_step(&state, frame, &model, &cfg).map_err(|e| format!("frame {t}: {e}"))?;
        for (j, p) in next.posteriors.iter().enumerate() {
            ensure!((0.0..=1.0).contains(&p.p_visible), "frame {t} vertex {j}: p_visible {}", p.p_visible);
        }
        state = next;
    }
    Ok(format!("99 steps, {sampled} frames checked under 5 rescalings"))
}

pub fn occlusion_claim() -> Outcome {
    let spec = fixtures::occlusion_sequence();
    let (frames, gt, model) = scenario(&spec, false)?;
    let occ_end = spec.occluders[0].end;
    let with_oh = fixtures::tracking_config();
    let full_only = TrackerConfig {
        subsets: SubsetMode::FullOnly,
        ..fixtures::tracking_config()
    };
    let oh = run_sequence(&frames, &gt[0], &model, &with_oh).map_err(|e| e.to_string())?;
    let full = run_sequence(&frames, &gt[0], &model, &full_only).map_err(|e| e.to_string())?;
    let oh_eval = evaluate(&oh.boxes(), &gt).map_err(|e| e.to_string())?;
    let full_eval = evaluate(&full.boxes(), &gt).map_err(|e| e.to_string())?;

    let within = oh_eval.center_errors.iter().filter(|&&e| e < 20.0).count() as f64 / gt.len() as f64;
    let (mut run, mut longest) = (0, 0);
    for (t, &e) in full_eval.center_errors.iter().enumerate() {
        if t > occ_end && e > 50.0 {
            run += 1;
            longest = longest.max(run);
        } else {
            run = 0;
        }
    }
    ensure!(within >= 0.9, "with occlusion handling only {:.1}% of frames within 20 px", 100.0 * within);
    ensure!(longest >= 20, "full-set tracker off by > 50 px for only {longest} consecutive frames after the occluder");
    Ok(format!(
        "OH within 20 px on {:.1}% of frames; full set lost at {:?}, {longest} consecutive frames > 50 px",
        100.0 * within,
        full.loss_events
    ))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn speedup() -> Outcome {
    let spec = fixtures::random_motion_sequence(9, 51);
    let (frames, gt, model) = scenario(&spec, true)?;
    ensure!(model.components.len() == 2 && model.components.iter().all(|c| c.parts.len() == 4), "model shape");
    let cfg = fixtures::tracking_config();
    let plan = PyramidPlan::new(320, 240, &cfg.pyramid).map_err(|e| e.to_string())?;
    let full_cells = plan.total_cells() as f64;
    let mut state = initialize(&frames[0], &model, &gt[0], &cfg).map_err(|e| e.to_string())?;
    let (mut track_t, mut detect_t, mut ratios) = (Vec::new(), Vec::new(), Vec::new());
    for (t, frame) in frames.iter().enumerate().skip(1) {
        let start = Instant::now();
        let (next, out) = track_step(&state, frame, &model, &cfg).map_err(|e| format!("frame {t}: {e}"))?;
        track_t.push(start.elapsed().as_secs_f64());
        let start = Instant::now();
        let dets = detect(frame, &model, 0.0, false, &cfg).map_err(|e| e.to_string())?;
        detect_t.push(start.elapsed().as_secs_f64());
        ensure!(!dets.is_empty(), "frame {t}: detection found nothing");
        ratios.push(out.feature_cells as f64 / full_cells);
        state = next;
    }
    let (mt, md, mr) = (median(track_t), median(detect_t), median(ratios.clone()));
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    ensure!(mr < 0.3, "median cell fraction {mr:.3}");
    ensure!(md >= 3.0 * mt, "median track {:.1} ms vs detect {:.1} ms", mt * 1e3, md * 1e3);
    Ok(format!(
        "cells {:.1}% median ({:.1}% max), track {:.1} ms vs detect {:.1} ms = {:.1}x",
        100.0 * mr,
        100.0 * max_ratio,
        mt * 1e3,
        md * 1e3,
        md / mt
    ))
}

pub fn scale_illumination() -> Outcome {
    let spec = fixtures::scale_gain_sequence();
    let (frames, gt, model) = scenario(&spec, false)?;
    let traj = run_sequence(&frames, &gt[0], &model, &fixtures::tracking_config()).map_err(|e| e.to_string())?;
    let report = evaluate(&traj.boxes(), &gt).map_err(|e| e.to_string())?;
    ensure!(traj.loss_events.is_empty() && traj.outputs.iter().all(|o| !o.lost), "loss at {:?}", traj.loss_events);
    ensure!(report.mean_iou >= 0.5, "mean IoU {:.3}", report.mean_iou);
    let last = gt.last().expect("frames");
    Ok(format!(
        "mean IoU {:.3}, target {}x{} -> {}x{}, final level {}",
        report.mean_iou,
        gt[0].w,
        gt[0].h,
        last.w,
        last.h,
        traj.outputs.last().expect("frames").level
    ))
}

pub fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let file = SynthFile {
        sequence: fixtures::random_motion_sequence(13, 40),
        model: fixtures::model_spec(),
    };
    let data = synth_to_dir(&file, &dir.path().join("data")).map_err(|e| e.to_string())?;
    let config = dir.path().join("config.json");
    std::fs::write(&config, serde_json::to_string(&fixtures::tracking_config()).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let run = |name: &str| {
        track_command(&TrackOptions {
            model: data.model.clone(),
            frames: data.frames_dir.clone(),
            gt: data.ground_truth.clone(),
            config: Some(config.clone()),
            out_dir: dir.path().join(name),
            redetect: false,
        })
        .map_err(|e| e.to_string())
    };
    run("a")?;
    run("b")?;
    for f in ["trajectory.csv", "metrics.csv", "precision.svg"] {
        let a = std::fs::read(dir.path().join("a").join(f)).map_err(|e| e.to_string())?;
        let b = std::fs::read(dir.path().join("b").join(f)).map_err(|e| e.to_string())?;
        ensure!(!a.is_empty() && a == b, "{f} differs between runs");
    }
    Ok("trajectory.csv, metrics.csv and precision.svg identical across two 40-frame runs".into())
}
