//! Sequence I/O, synthetic fixtures, detection, evaluation and reports.

pub mod commands;
pub mod detect;
pub mod eval;
pub mod fixtures;
pub mod io;
pub mod run;
pub mod synth;

pub use detect::{detect, nms, Detection};
pub use eval::{emit_report, evaluate, EvalReport};
pub use run::{run_sequence, Trajectory};
pub use synth::{generate_synthetic_sequence, model_from_texture, SyntheticSpec};
