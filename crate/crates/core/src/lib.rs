//! Grid-based FastSLAM whose partial occupancy maps are completed by a
//! learned U-net prior.
//!
//! Modules, bottom up:
//!
//! - [`gridmap`]: log-odds grids, ternary/mask encodings, PGM I/O.
//! - [`simworld`]: procedural floorplans, lidar ray casting, odometry, datasets.
//! - [`slam`]: Rao-Blackwellized particle filter with per-particle grids.
//! - [`neuralnet`]: small f64 tensor engine with manual backprop.
//! - [`completion`]: U-net generator, patch discriminator, training, inference.
//! - [`eval`]: occupancy metrics, best-match baseline, experiment harnesses.

pub mod completion;
pub mod error;
pub mod eval;
pub mod gridmap;
pub mod neuralnet;
pub mod pose;
pub mod rng;
pub mod simworld;
pub mod slam;

pub use error::{Error, Result};
pub use gridmap::{MaskImage, OccupancyGrid, Ternary, TernaryMap};
pub use pose::Pose2;
