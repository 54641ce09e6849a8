//! Sequence-level tracking loop.

use crate::error::{Error, Result};
use crate::feature_pyramid::Frame;
use crate::geometry::BBox;
use crate::model::MixtureModel;
use crate::tracker::{initial_output, initialize, is_lost, track_step, FrameOutput, TrackState, TrackerConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub outputs: Vec<FrameOutput>,
    /// Frames at which the track was declared lost.
    pub loss_events: Vec<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn boxes(&self) -> Vec<BBox> {
        self.outputs.iter().map(|o| o.root_box).collect()
    }
}

fn lost_copy(last: &FrameOutput, frame: usize) -> FrameOutput {
    FrameOutput {
        frame,
        lost: true,
        feature_cells: 0,
        ..last.clone()
    }
}

/// Initializes on the first frame from `initial_box`, then steps through the
/// rest. After a loss the last box is repeated with the lost flag set, unless
/// `config.redetect` re-initializes around it.
pub fn run_sequence<'a, I>(frames: I, initial_box: &BBox, model: &MixtureModel, config: &TrackerConfig) -> Result<Trajectory>
where
    I: IntoIterator<Item = &'a Frame>,
{
    let mut frames = frames.into_iter();
    let first = frames.next().ok_or(Error::NoValidInitialization)?;
    let mut state: TrackState = initialize(first, model, initial_box, config)?;
    let mut outputs = vec![initial_output(&state, first, model, config)?];
    let mut loss_events = Vec::new();
    for (i, frame) in frames.enumerate() {
        let index = i + 1;
        if is_lost(&state, config) {
            let last = outputs.last().expect("initial output").clone();
            if config.redetect {
                if let Ok(mut fresh) = initialize(frame, model, &last.root_box, config) {
                    fresh.frame_index = index;
                    log::info!("frame {index}: re-initialized after loss");
                    outputs.push(initial_output(&fresh, frame, model, config)?);
                    outputs.last_mut().expect("just pushed").frame = index;
                    state = fresh;
                    continue;
                }
            }
            outputs.push(lost_copy(&last, index));
            continue;
        }
        let (next, mut out) = track_step(&state, frame, model, config)?;
        out.frame = index;
        if out.lost {
            log::info!("frame {index}: track lost (energy {:.4})", out.energy);
            loss_events.push(index);
        }
        log::debug!(
            "frame {index}: box {:?} energy {:.4} visible {:?}",
            out.root_box,
            out.energy,
            out.visible
        );
        outputs.push(out);
        state = TrackState {
            frame_index: index,
            ..next
        };
    }
    Ok(Trajectory { outputs, loss_events })
}
