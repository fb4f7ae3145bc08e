//! Grid-based FastSLAM.
//!
//! Localization ignores the learned map prior: particle weights come from
//! each particle's own observed grid only, and completion is applied
//! downstream to the best particle's map.

pub mod filter;
pub mod mapping;
pub mod motion;
pub mod sensor;

pub use filter::{
    resample, slam_step, EpisodeRecord, GridSpec, Particle, ParticleSet, SlamConfig, StepInfo,
};
pub use mapping::integrate_scan;
pub use motion::{sample_motion, MotionNoise, Odometry};
pub use sensor::{measurement_likelihood, DistanceField, SensorModel};
