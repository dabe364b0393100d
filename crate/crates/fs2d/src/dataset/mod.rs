//! Scan and ground-truth persistence plus the synthetic scene generator.

mod format;
mod ground_truth;
mod synth;

pub use format::{load_polar_scan, save_polar_scan, FORMAT_MAGIC, FORMAT_VERSION};
pub use ground_truth::{load_ground_truth, save_ground_truth, GroundTruthRecord};
pub use synth::{
    synth_scene, MovingObject, NoiseSpec, SceneSpec, SensorSpec, Shape, StaticTarget, SynthOutput,
};
