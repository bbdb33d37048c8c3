//! Synthetic stand-in for the physical actuator: interior camera renderer,
//! pressure/elongation dynamics and a time-of-flight baseline sensor.

mod generate;
pub mod noise;
mod plant;
mod render;
mod tof;

pub use generate::{
    frame_seed, generate_dataset, render_sample, sample_poses, GeneratorConfig, Trajectory,
    Workspace,
};
pub use plant::{step_plant, Disturbance, PlantConfig, PlantState};
pub use render::{project_rings, render_frame, Camera, PatternSpec, ProjectedRing};
pub use tof::{calibrate_linear, simulate_tof};
