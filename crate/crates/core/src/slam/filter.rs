//! Rao-Blackwellized particle filter over trajectories, one occupancy grid per particle.

use serde::{Deserialize, Serialize};

use super::mapping::integrate_scan;
use super::motion::{sample_motion, MotionNoise, Odometry};
use super::sensor::{log_likelihood_with_field, DistanceField, SensorModel};
use crate::error::{Error, Result};
use crate::gridmap::OccupancyGrid;
use crate::pose::Pose2;
use crate::rng;
use crate::simworld::lidar::Scan;

/// Geometry of every particle's map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub origin: Pose2,
}

impl GridSpec {
    pub fn empty_grid(&self) -> OccupancyGrid {
        OccupancyGrid::new(self.width, self.height, self.resolution, self.origin)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlamConfig {
    pub particles: usize,
    pub noise: MotionNoise,
    pub sensor: SensorModel,
    pub grid: GridSpec,
    /// Resample when `N_eff < resample_ratio * N`.
    pub resample_ratio: f64,
    pub seed: u64,
}

impl Default for SlamConfig {
    fn default() -> Self {
        Self {
            particles: 30,
            noise: MotionNoise::default(),
            sensor: SensorModel::default(),
            grid: GridSpec {
                width: 64,
                height: 64,
                resolution: 0.2,
                origin: Pose2::default(),
            },
            resample_ratio: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub trajectory: Vec<Pose2>,
    pub weight: f64,
    pub map: OccupancyGrid,
}

impl Particle {
    pub fn pose(&self) -> Pose2 {
        *self.trajectory.last().expect("trajectory is never empty")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    pub particles: Vec<Particle>,
    /// Number of completed filter steps.
    pub t: usize,
}

/// Per-step diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub n_eff: f64,
    pub resampled: bool,
}

impl ParticleSet {
    /// `n` identical particles at `start` with empty maps and uniform weights.
    pub fn new(n: usize, start: Pose2, grid: &GridSpec) -> Self {
        assert!(n > 0, "particle count must be positive");
        let p = Particle {
            trajectory: vec![start],
            weight: 1.0 / n as f64,
            map: grid.empty_grid(),
        };
        Self {
            particles: vec![p; n],
            t: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.weight).collect()
    }

    pub fn n_eff(&self) -> f64 {
        1.0 / self.particles.iter().map(|p| p.weight * p.weight).sum::<f64>()
    }

    /// Index of the heaviest particle; ties resolve to the lowest index.
    pub fn best_index(&self) -> usize {
        argmax_first(self.particles.iter().map(|p| p.weight))
    }

    /// Map and trajectory of the heaviest particle.
    pub fn best_map(&self) -> (&OccupancyGrid, &[Pose2]) {
        let p = &self.particles[self.best_index()];
        (&p.map, &p.trajectory)
    }
}

pub(crate) fn argmax_first(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Systematic (low-variance) resampling. Weights must be normalized.
pub fn resample<R: rand::Rng + ?Sized>(ps: &ParticleSet, rng: &mut R) -> ParticleSet {
    let idx = systematic_indices(&ps.weights(), rng);
    let n = ps.len();
    let particles = idx
        .into_iter()
        .map(|i| Particle {
            weight: 1.0 / n as f64,
            ..ps.particles[i].clone()
        })
        .collect();
    ParticleSet {
        particles,
        t: ps.t,
    }
}

/// Indices drawn by one uniform offset and `n` evenly spaced pointers.
pub fn systematic_indices<R: rand::Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Vec<usize> {
    let n = weights.len();
    let step = 1.0 / n as f64;
    let start = rng.random::<f64>() * step;
    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    let mut cum = weights[0];
    for m in 0..n {
        let u = start + m as f64 * step;
        while u > cum && i + 1 < n {
            i += 1;
            cum += weights[i];
        }
        out.push(i);
    }
    out
}

/// One filter update: propose from odometry, weight against each
/// particle's own map, integrate the scan, normalize, and resample when
/// the effective sample size drops below the configured ratio.
pub fn slam_step(
    ps: &mut ParticleSet,
    odometry: &Odometry,
    scan: &Scan,
    cfg: &SlamConfig,
) -> Result<StepInfo> {
    let t = ps.t as u64;
    let mut log_w: Vec<f64> = Vec::with_capacity(ps.len());
    for (i, p) in ps.particles.iter_mut().enumerate() {
        let mut r = rng::stream(cfg.seed, &[i as u64, t]);
        let pose = sample_motion(&p.pose(), odometry, &cfg.noise, &mut r);
        let field = DistanceField::from_grid(&p.map);
        let ll = log_likelihood_with_field(scan, &pose, &p.map, &field, &cfg.sensor);
        log_w.push(p.weight.ln() + ll);
        integrate_scan(&mut p.map, &pose, scan, &cfg.sensor);
        p.trajectory.push(pose);
    }
    ps.t += 1;

    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::FilterDivergence { step: ps.t });
    }
    let unnorm: Vec<f64> = log_w.iter().map(|lw| (lw - max).exp()).collect();
    let total: f64 = unnorm.iter().sum();
    for (p, u) in ps.particles.iter_mut().zip(&unnorm) {
        p.weight = u / total;
    }

    let n_eff = ps.n_eff();
    let resampled = n_eff < cfg.resample_ratio * ps.len() as f64;
    if resampled {
        let mut r = rng::stream(cfg.seed, &[u64::MAX, t]);
        *ps = resample(ps, &mut r);
    }
    Ok(StepInfo { n_eff, resampled })
}

/// One line of the JSON-lines episode log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub t: usize,
    pub odometry: Odometry,
    pub scan: Scan,
    pub best_pose: Pose2,
    pub n_eff: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub true_pose: Option<Pose2>,
}
