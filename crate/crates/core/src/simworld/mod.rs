//! Simulated environments: procedural floorplans, lidar, robot motion and
//! the paired partial/full map datasets built from them.

pub mod dataset;
pub mod degrade;
pub mod episode;
pub mod floorplan;
pub mod lidar;
pub mod robot;

pub use dataset::{make_dataset, Dataset, DatasetConfig, DatasetEntry, PartialMode, Split};
pub use degrade::degrade_map;
pub use episode::{run_episode, start_pose, Controller, Episode, EpisodeConfig, Explorer, RandomWalk};
pub use floorplan::{generate_floorplan, FloorPlan, PlanParams, PlanStyle, Rect};
pub use lidar::{raycast, Scan, ScanConfig};
pub use robot::{step, Control, RobotState};
