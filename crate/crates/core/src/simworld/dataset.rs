//! Paired (partial, full) map datasets and their on-disk layout:
//! `<root>/{train,val,test}/<env_id>/{full,partial}.{pgm,meta}`.

use std::fs;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::degrade::degrade_map;
use super::episode::start_pose;
use super::floorplan::{generate_floorplan, FloorPlan, PlanParams};
use super::lidar::{raycast, ScanConfig};
use crate::error::{Error, Result};
use crate::gridmap::{load_map, save_map, MapMeta, OccupancyGrid, TernaryMap};
use crate::pose::Pose2;
use crate::rng;
use crate::slam::{integrate_scan, SensorModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartialMode {
    /// Random rectangular patches of the full map are blanked.
    Degrade,
    /// The map after one stationary 360-degree scan integration.
    SimPartial,
}

impl std::str::FromStr for PartialMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "degrade" => Ok(PartialMode::Degrade),
            "sim" | "sim_partial" | "sim-partial" => Ok(PartialMode::SimPartial),
            _ => Err(Error::InvalidParam(format!("unknown partial mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub n_envs: usize,
    /// Train / val / test fractions; must sum to 1.
    pub splits: [f64; 3],
    pub mode: PartialMode,
    pub seed: u64,
    pub plan: PlanParams,
    /// Side of the square network image.
    pub image_size: usize,
    /// Range of blanked fractions drawn per environment in degrade mode.
    pub missing_fraction: (f64, f64),
    pub scan: ScanConfig,
    pub sensor: SensorModel,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            n_envs: 480,
            splits: [400.0 / 480.0, 40.0 / 480.0, 40.0 / 480.0],
            mode: PartialMode::Degrade,
            seed: 0,
            plan: PlanParams::default(),
            image_size: 64,
            missing_fraction: (0.1, 0.5),
            scan: ScanConfig::default(),
            sensor: SensorModel::default(),
        }
    }
}

impl DatasetConfig {
    /// Environment counts per split; the test split takes the rounding remainder.
    pub fn split_counts(&self) -> Result<[usize; 3]> {
        let sum: f64 = self.splits.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.splits.iter().any(|f| *f < 0.0) {
            return Err(Error::InvalidParam(format!(
                "split fractions {:?} must be nonnegative and sum to 1",
                self.splits
            )));
        }
        let n = self.n_envs as f64;
        let train = (self.splits[0] * n).round() as usize;
        let val = ((self.splits[1] * n).round() as usize).min(self.n_envs - train.min(self.n_envs));
        let train = train.min(self.n_envs);
        Ok([train, val, self.n_envs - train - val])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub id: String,
    pub partial: TernaryMap,
    pub full: TernaryMap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn dir_name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub train: Vec<DatasetEntry>,
    pub val: Vec<DatasetEntry>,
    pub test: Vec<DatasetEntry>,
}

impl Dataset {
    pub fn split(&self, s: Split) -> &[DatasetEntry] {
        match s {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    fn split_mut(&mut self, s: Split) -> &mut Vec<DatasetEntry> {
        match s {
            Split::Train => &mut self.train,
            Split::Val => &mut self.val,
            Split::Test => &mut self.test,
        }
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn save(&self, root: &Path, resolution: f64) -> Result<()> {
        for s in Split::ALL {
            for e in self.split(s) {
                let dir = root.join(s.dir_name()).join(&e.id);
                let mut meta = MapMeta::with_resolution(resolution);
                meta.extra.insert("env_id".into(), e.id.clone());
                save_map(&e.full, &meta, &dir.join("full.pgm"))?;
                save_map(&e.partial, &meta, &dir.join("partial.pgm"))?;
            }
        }
        Ok(())
    }

    /// Loads every split present under `root`, environments sorted by id.
    pub fn load(root: &Path) -> Result<Self> {
        let mut ds = Dataset::default();
        if !root.is_dir() {
            return Err(Error::io(
                root,
                std::io::Error::new(std::io::ErrorKind::NotFound, "dataset directory not found"),
            ));
        }
        for s in Split::ALL {
            let dir = root.join(s.dir_name());
            if !dir.is_dir() {
                continue;
            }
            let mut ids: Vec<String> = fs::read_dir(&dir)
                .map_err(|e| Error::io(&dir, e))?
                .filter_map(|d| d.ok())
                .filter(|d| d.path().is_dir())
                .map(|d| d.file_name().to_string_lossy().into_owned())
                .collect();
            ids.sort();
            for id in ids {
                let env = dir.join(&id);
                let (full, _) = load_map(&env.join("full.pgm"))?;
                let (partial, _) = load_map(&env.join("partial.pgm"))?;
                if full.width() != partial.width() || full.height() != partial.height() {
                    return Err(Error::Shape(format!("{id}: partial and full maps differ in size")));
                }
                ds.split_mut(s).push(DatasetEntry { id, partial, full });
            }
        }
        Ok(ds)
    }
}

pub fn env_id(index: usize) -> String {
    format!("env{index:05}")
}

/// Partial map from a single stationary scan, as the filter's first iteration sees it.
pub fn one_scan_map(plan: &FloorPlan, pose: &Pose2, cfg: &DatasetConfig, seed: u64) -> Result<TernaryMap> {
    let scan = raycast(plan, pose, &cfg.scan, &mut rng::seeded(seed))?;
    let mut grid = OccupancyGrid::new(plan.width, plan.height, plan.resolution, Pose2::default());
    integrate_scan(&mut grid, pose, &scan, &cfg.sensor);
    Ok(grid.to_ternary())
}

/// Generates one environment's `(partial, full)` pair at network resolution.
pub fn make_entry(cfg: &DatasetConfig, index: usize) -> Result<(FloorPlan, DatasetEntry)> {
    let env_seed = rng::derive_seed(cfg.seed, &[index as u64]);
    let plan = generate_floorplan(env_seed, &cfg.plan)?;
    let full = plan.render();
    let mut r = rng::stream(env_seed, &[1]);
    let partial = match cfg.mode {
        PartialMode::Degrade => {
            let (lo, hi) = cfg.missing_fraction;
            let frac = if hi > lo { r.random_range(lo..=hi) } else { lo };
            degrade_map(&full, frac, r.random())
        }
        PartialMode::SimPartial => {
            let pose = start_pose(&plan, &mut r)?;
            one_scan_map(&plan, &pose, cfg, r.random())?
        }
    };
    let n = cfg.image_size;
    Ok((
        plan,
        DatasetEntry {
            id: env_id(index),
            partial: partial.resize_nearest(n, n),
            full: full.resize_nearest(n, n),
        },
    ))
}

/// Builds all splits; environments are assigned to splits in index order.
pub fn make_dataset(cfg: &DatasetConfig) -> Result<Dataset> {
    let [n_train, n_val, _] = cfg.split_counts()?;
    let mut ds = Dataset::default();
    for i in 0..cfg.n_envs {
        let (_, entry) = make_entry(cfg, i)?;
        let split = if i < n_train {
            Split::Train
        } else if i < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
        ds.split_mut(split).push(entry);
    }
    Ok(ds)
}
