//! Ready-made synthetic scenarios and the tracker settings tuned for them.

use crate::feature_pyramid::PyramidConfig;
use crate::tracker::{EnergyMode, SubsetMode, TrackerConfig};

use super::synth::{ramp_rate, OccluderEvent, Side, SyntheticSpec, TextureModelSpec, Waypoint};

/// Tracker settings for the 320x240 scenarios below: a tighter motion prior
/// than the defaults, one level of scale search, and a loss threshold placed
/// between occluded full-set energies and occluded best-subset energies.
pub fn tracking_config() -> TrackerConfig {
    TrackerConfig {
        motion_covariance: [[2.25, 0.0, 0.0], [0.0, 2.25, 0.0], [0.0, 0.0, 4.0]],
        level_half_width: 1,
        radius_multiplier: 3.0,
        tau_lost: 0.65,
        patience: 5,
        energy_mode: EnergyMode::Probability,
        subsets: SubsetMode::Model,
        temperature: 1.0,
        init_overlap: 0.7,
        pyramid: PyramidConfig::default(),
        redetect: false,
    }
}

pub fn model_spec() -> TextureModelSpec {
    TextureModelSpec::default()
}

/// 200 frames, left to right, with a bar hiding the lower 60 % of the target
/// on frames 80..=119.
pub fn occlusion_sequence() -> SyntheticSpec {
    SyntheticSpec {
        seed: 11,
        frames: 200,
        path: vec![
            Waypoint { frame: 0, x: 60.0, y: 110.0 },
            Waypoint { frame: 199, x: 260.0, y: 130.0 },
        ],
        occluders: vec![OccluderEvent {
            start: 80,
            end: 119,
            fraction: 0.6,
            side: Side::Bottom,
            intensity: 0.55,
            overhang: 8,
        }],
        ..SyntheticSpec::default()
    }
}

/// Target grows 1.8x while the scene brightens 2x; no occlusion.
pub fn scale_gain_sequence() -> SyntheticSpec {
    SyntheticSpec {
        seed: 12,
        frames: 200,
        path: vec![
            Waypoint { frame: 0, x: 100.0, y: 110.0 },
            Waypoint { frame: 199, x: 200.0, y: 125.0 },
        ],
        scale_rate: ramp_rate(1.8, 200),
        gain_rate: ramp_rate(2.0, 200),
        ..SyntheticSpec::default()
    }
}

/// Random piecewise-linear motion with jitter.
pub fn random_motion_sequence(seed: u64, frames: usize) -> SyntheticSpec {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut path = Vec::new();
    let mut frame = 0;
    while frame < frames {
        path.push(Waypoint {
            frame,
            x: rng.gen_range(70.0..250.0),
            y: rng.gen_range(70.0..170.0),
        });
        frame += rng.gen_range(60..120);
    }
    SyntheticSpec {
        seed,
        frames,
        path,
        jitter: 0.5,
        ..SyntheticSpec::default()
    }
}
