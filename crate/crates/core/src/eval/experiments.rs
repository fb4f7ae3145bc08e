//! The two evaluation harnesses: completion of dataset partial maps, and
//! completion of maps produced by simulated SLAM runs.

use std::collections::VecDeque;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::metrics::{baseline_best_match, confusion};
use super::panel::save_panel;
use super::report::{ExperimentReport, Skipped};
use crate::completion::{complete_map, generate, load_generator, Generator};
use crate::error::{Error, Result};
use crate::gridmap::{Ternary, TernaryMap};
use crate::rng;
use crate::simworld::{
    generate_floorplan, run_episode, start_pose, Dataset, EpisodeConfig, Explorer, PlanParams,
    PlanStyle,
};

pub const MCN_GAN: &str = "mcn_gan";
pub const MCN_L2: &str = "mcn_l2";
pub const RAW: &str = "raw";
pub const BASELINE: &str = "baseline";
pub const MCN_GAN_CROSS: &str = "mcn_gan_cross";
pub const MCN_L2_CROSS: &str = "mcn_l2_cross";

pub const TEST_STAGE: &str = "test";
pub const ONE_SCAN: &str = "1-scan";
pub const LATE: &str = "T-5";

const PANEL_DIR: &str = "panels";

/// Generator checkpoints compared in the dataset experiment. The cross
/// models were trained on the other plan style.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelPaths {
    pub gan: Option<PathBuf>,
    pub l2: Option<PathBuf>,
    pub cross_gan: Option<PathBuf>,
    pub cross_l2: Option<PathBuf>,
}

impl ModelPaths {
    fn named(&self) -> Vec<(&'static str, &Path)> {
        [
            (MCN_GAN, &self.gan),
            (MCN_L2, &self.l2),
            (MCN_GAN_CROSS, &self.cross_gan),
            (MCN_L2_CROSS, &self.cross_l2),
        ]
        .into_iter()
        .filter_map(|(n, p)| p.as_deref().map(|p| (n, p)))
        .collect()
    }

    /// Loads every configured generator, failing with the full list of
    /// checkpoints that do not exist.
    fn load(&self) -> Result<Vec<(&'static str, Generator)>> {
        let missing: Vec<String> = self
            .named()
            .iter()
            .filter(|(_, p)| !p.is_file())
            .map(|(n, p)| format!("{n} ({})", p.display()))
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingCheckpoints(missing));
        }
        self.named()
            .into_iter()
            .map(|(n, p)| Ok((n, load_generator(p, None)?)))
            .collect()
    }
}

fn label(method: &str) -> &'static str {
    match method {
        MCN_GAN => "(A) MCN, U-net + discriminator",
        MCN_L2 => "(B) MCN, U-net",
        RAW => "(C) raw partial map",
        BASELINE => "(D) best training match",
        MCN_GAN_CROSS => "(A) MCN, U-net + discriminator, other style",
        MCN_L2_CROSS => "(B) MCN, U-net, other style",
        _ => "?",
    }
}

const METHOD_ORDER: [&str; 6] = [MCN_GAN, MCN_L2, RAW, BASELINE, MCN_GAN_CROSS, MCN_L2_CROSS];

fn method_labels() -> Vec<(&'static str, &'static str)> {
    METHOD_ORDER.iter().map(|&m| (m, label(m))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Exp1Config {
    /// Panels are written for this many leading test environments.
    pub panels: usize,
}

impl Default for Exp1Config {
    fn default() -> Self {
        Self { panels: 8 }
    }
}

/// Scores every model, the raw partial map and the retrieval baseline on
/// the test split, against the full maps. The baseline searches the
/// training split's full maps.
pub fn run_experiment1(
    dataset: &Dataset,
    models: &ModelPaths,
    cfg: &Exp1Config,
    out_dir: Option<&Path>,
) -> Result<ExperimentReport> {
    let gens = models.load()?;
    if dataset.test.is_empty() {
        return Err(Error::InvalidParam("dataset has no test split".into()));
    }
    let training: Vec<TernaryMap> = dataset.train.iter().map(|e| e.full.clone()).collect();
    let config = serde_json::json!({ "models": models, "experiment": cfg });
    let mut report = ExperimentReport::new("completion of dataset partial maps", config, vec![]);
    for (k, e) in dataset.test.iter().enumerate() {
        let mut outputs: Vec<(&str, TernaryMap)> = Vec::new();
        for (name, g) in &gens {
            outputs.push((name, generate(g, &e.partial, &mut rng::seeded(0), false)?));
        }
        outputs.push((RAW, e.partial.clone()));
        if !training.is_empty() {
            outputs.push((BASELINE, baseline_best_match(&e.partial, &training)?));
        }
        for (name, pred) in &outputs {
            report.push(&e.id, TEST_STAGE, name, confusion(pred, &e.full)?);
        }
        if let Some(dir) = out_dir.filter(|_| k < cfg.panels) {
            for (name, pred) in outputs.iter().filter(|(n, _)| *n != RAW) {
                save_panel(&[&e.partial, pred, &e.full], &dir.join(PANEL_DIR), &format!("{}_{name}", e.id), 1.0)?;
            }
        }
    }
    report.summarize(&[TEST_STAGE], &method_labels());
    if let Some(dir) = out_dir {
        report.write(dir)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Exp2Config {
    pub n_envs: usize,
    pub seed: u64,
    pub plan: PlanParams,
    pub episode: EpisodeConfig,
    /// Upper bound on filter iterations per exploration run.
    pub max_steps: usize,
    /// Fraction of reachable cells that must be searched to call the map complete.
    pub coverage: f64,
    /// How many scan integrations before full coverage the late snapshot is taken.
    pub lookback: usize,
    pub panels: usize,
}

impl Default for Exp2Config {
    fn default() -> Self {
        Self {
            n_envs: 10,
            seed: 0,
            plan: PlanStyle::A.params(),
            episode: EpisodeConfig::default(),
            max_steps: 600,
            coverage: 0.98,
            lookback: 5,
            panels: 4,
        }
    }
}

impl Exp2Config {
    pub fn validate(&self) -> Result<()> {
        if self.n_envs == 0 || self.max_steps == 0 {
            return Err(Error::InvalidParam("n_envs and max_steps must be positive".into()));
        }
        if !(self.coverage > 0.0 && self.coverage <= 1.0) {
            return Err(Error::InvalidParam(format!("coverage {} outside (0, 1]", self.coverage)));
        }
        let g = &self.episode.slam.grid;
        if (g.width, g.height) != (self.plan.width, self.plan.height) {
            return Err(Error::InvalidParam(
                "SLAM grid and floorplan must have the same size".into(),
            ));
        }
        Ok(())
    }
}

/// Snapshots of one exploration run.
#[derive(Debug, Clone)]
pub struct ExplorationRun {
    pub env: String,
    /// Best-particle map after the first, stationary scan.
    pub first: TernaryMap,
    /// Best-particle map `lookback` integrations before coverage was reached.
    pub late: TernaryMap,
    /// Best-particle map at the end of exploration, the scoring reference.
    pub last: TernaryMap,
    /// Iteration at which coverage was first reached.
    pub full_at: usize,
    /// Best-particle grids behind `first` and `late`, for completion.
    pub first_grid: crate::gridmap::OccupancyGrid,
    pub late_grid: crate::gridmap::OccupancyGrid,
}

/// Runs one exploration episode in environment `index`.
pub fn explore(cfg: &Exp2Config, index: usize) -> Result<ExplorationRun> {
    let env_seed = rng::derive_seed(cfg.seed, &[index as u64]);
    let plan = generate_floorplan(env_seed, &cfg.plan)?;
    let start = start_pose(&plan, &mut rng::stream(env_seed, &[1]))?;
    let (sx, sy) = plan
        .cell_of(start.x, start.y)
        .ok_or_else(|| Error::InvalidParam("start pose off the map".into()))?;
    let reachable = plan.reachable_from(sx, sy);
    let n_reachable = reachable.iter().filter(|&&r| r).count().max(1);

    let mut episode = cfg.episode.clone();
    episode.seed = rng::derive_seed(env_seed, &[2]);
    episode.slam.seed = rng::derive_seed(env_seed, &[3]);
    let mut controller = Explorer::new(&plan, &start);

    let mut history: VecDeque<crate::gridmap::OccupancyGrid> = VecDeque::with_capacity(cfg.lookback + 1);
    let mut first = None;
    let mut late = None;
    let mut full_at = None;
    let mut t = 0;
    let ep = run_episode(&plan, start, &mut controller, cfg.max_steps, &episode, |ps, _| {
        let (grid, _) = ps.best_map();
        if first.is_none() {
            first = Some(grid.clone());
        }
        if full_at.is_none() {
            if history.len() == cfg.lookback + 1 {
                history.pop_front();
            }
            history.push_back(grid.clone());
            let map = grid.to_ternary();
            let seen = map
                .cells()
                .iter()
                .zip(&reachable)
                .filter(|(c, &r)| r && **c != Ternary::Unsearched)
                .count();
            if seen as f64 / n_reachable as f64 > cfg.coverage {
                full_at = Some(t);
                late = history.front().cloned();
            }
        }
        t += 1;
    })?;
    let env = crate::simworld::dataset::env_id(index);
    let (Some(first_grid), Some(late_grid), Some(full_at)) = (first, late, full_at) else {
        return Err(Error::CoverageNotReached {
            steps: cfg.max_steps,
            percent: cfg.coverage * 100.0,
        });
    };
    let (last, _) = ep.particles.best_map();
    Ok(ExplorationRun {
        env,
        first: first_grid.to_ternary(),
        late: late_grid.to_ternary(),
        last: last.to_ternary(),
        full_at,
        first_grid,
        late_grid,
    })
}

/// Scores completion of early and late SLAM maps against the map at the
/// end of exploration. Environments whose filter diverges (or that never
/// reach coverage) are skipped and listed in the report.
pub fn run_experiment2(
    cfg: &Exp2Config,
    models: &ModelPaths,
    training: &[TernaryMap],
    out_dir: Option<&Path>,
) -> Result<ExperimentReport> {
    cfg.validate()?;
    let gens = models.load()?;
    let config = serde_json::json!({ "models": models, "experiment": cfg, "training_maps": training.len() });
    let mut report = ExperimentReport::new(
        "completion of SLAM maps after one scan and shortly before full coverage",
        config,
        vec![cfg.seed],
    );
    let res = cfg.plan.resolution;
    for index in 0..cfg.n_envs {
        let run = match explore(cfg, index) {
            Ok(r) => r,
            Err(e @ (Error::FilterDivergence { .. } | Error::CoverageNotReached { .. })) => {
                report.skipped.push(Skipped {
                    env: crate::simworld::dataset::env_id(index),
                    reason: e.to_string(),
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        for (stage, partial, grid) in [(ONE_SCAN, &run.first, &run.first_grid), (LATE, &run.late, &run.late_grid)] {
            let mut outputs: Vec<(&str, TernaryMap)> = Vec::new();
            for (name, g) in &gens {
                outputs.push((name, complete_map(g, grid, &mut rng::seeded(0), false)?));
            }
            outputs.push((RAW, partial.clone()));
            if !training.is_empty() {
                outputs.push((BASELINE, baseline_best_match(partial, training)?));
            }
            for (name, pred) in &outputs {
                report.push(&run.env, stage, name, confusion(pred, &run.last)?);
            }
            if let Some(dir) = out_dir.filter(|_| index < cfg.panels) {
                for (name, pred) in &outputs {
                    let stem = format!("{}_{}_{name}", run.env, if stage == ONE_SCAN { "first" } else { "late" });
                    save_panel(&[partial, pred, &run.last], &dir.join(PANEL_DIR), &stem, res)?;
                }
            }
        }
    }
    report.summarize(&[ONE_SCAN, LATE], &method_labels());
    if let Some(dir) = out_dir {
        report.write(dir)?;
    }
    Ok(report)
}
