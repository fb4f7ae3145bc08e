//! Likelihood-field measurement model.
//!
//! Each beam endpoint is scored by its distance to the nearest occupied
//! cell of the particle's own map, using a Gaussian hit term mixed with a
//! uniform term. Endpoints in unsearched cells or off the map, and beams
//! without a return, get the uniform term only.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridmap::OccupancyGrid;
use crate::pose::Pose2;
use crate::simworld::lidar::Scan;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    /// Std-dev of the hit Gaussian, meters.
    pub hit_sigma: f64,
    pub z_hit: f64,
    pub z_rand: f64,
    pub max_range: f64,
    /// Log-odds added to a beam's endpoint cell.
    pub l_occ: f64,
    /// Log-odds added to cells a beam passes through.
    pub l_free: f64,
    /// Endpoints are placed this far behind the measured surface so they
    /// land inside the wall cell rather than on its boundary.
    pub hit_depth: f64,
    /// Only every `beam_stride`-th beam is scored in the likelihood.
    pub beam_stride: usize,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            hit_sigma: 0.1,
            z_hit: 0.9,
            z_rand: 0.1,
            max_range: 8.0,
            l_occ: 0.85,
            l_free: -0.4055,
            hit_depth: 0.1,
            beam_stride: 4,
        }
    }
}

impl SensorModel {
    pub fn validate(&self) -> Result<()> {
        let ok = self.z_hit >= 0.0
            && self.z_rand >= 0.0
            && self.z_hit + self.z_rand <= 1.0 + 1e-12
            && self.l_occ > 0.0
            && self.l_free < 0.0
            && self.hit_sigma > 0.0
            && self.max_range > 0.0
            && self.hit_depth >= 0.0
            && self.beam_stride >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParam(format!("invalid sensor model {self:?}")))
        }
    }

    /// Log-density of the uniform component alone.
    pub fn uniform_log_term(&self) -> f64 {
        (self.z_rand / self.max_range).ln()
    }

    /// World coordinates of beam `i`'s endpoint, or `None` for a no-return beam.
    pub fn endpoint(&self, scan: &Scan, pose: &Pose2, i: usize) -> Option<(f64, f64)> {
        if !scan.is_hit(i) {
            return None;
        }
        let a = pose.theta + scan.beam_angle(i);
        let r = scan.ranges[i] + self.hit_depth;
        Some((pose.x + r * a.cos(), pose.y + r * a.sin()))
    }
}

/// Euclidean distance (meters) from every cell to the nearest occupied cell.
#[derive(Debug, Clone)]
pub struct DistanceField {
    width: usize,
    dist: Vec<f64>,
}

impl DistanceField {
    pub fn from_grid(grid: &OccupancyGrid) -> Self {
        let (w, h) = (grid.width(), grid.height());
        let mut f: Vec<f64> = grid
            .log_odds()
            .iter()
            .map(|&l| if l > 0.0 { 0.0 } else { f64::INFINITY })
            .collect();
        let mut buf = Vec::new();
        for x in 0..w {
            buf.clear();
            buf.extend((0..h).map(|y| f[y * w + x]));
            let d = edt_1d(&buf);
            for y in 0..h {
                f[y * w + x] = d[y];
            }
        }
        for y in 0..h {
            let d = edt_1d(&f[y * w..(y + 1) * w]);
            f[y * w..(y + 1) * w].copy_from_slice(&d);
        }
        let res = grid.resolution();
        Self {
            width: w,
            dist: f.into_iter().map(|d2| d2.sqrt() * res).collect(),
        }
    }

    pub fn at(&self, cx: usize, cy: usize) -> f64 {
        self.dist[cy * self.width + cx]
    }
}

/// Squared-distance transform of a sampled function (Felzenszwalb-Huttenlocher).
fn edt_1d(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut d = vec![f64::INFINITY; n];
    let sites: Vec<usize> = (0..n).filter(|&q| f[q].is_finite()).collect();
    if sites.is_empty() {
        return d;
    }
    let mut v = Vec::with_capacity(sites.len());
    let mut z: Vec<f64> = Vec::with_capacity(sites.len() + 1);
    let inter = |q: usize, p: usize| -> f64 {
        let (q, p) = (q as f64, p as f64);
        ((f[q as usize] + q * q) - (f[p as usize] + p * p)) / (2.0 * q - 2.0 * p)
    };
    v.push(sites[0]);
    z.push(f64::NEG_INFINITY);
    z.push(f64::INFINITY);
    for &q in &sites[1..] {
        let mut s = inter(q, *v.last().unwrap());
        while s <= z[v.len() - 1] {
            v.pop();
            z.pop();
            s = inter(q, *v.last().unwrap());
        }
        *z.last_mut().unwrap() = s;
        v.push(q);
        z.push(f64::INFINITY);
    }
    let mut k = 0;
    for (q, dq) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let diff = q as f64 - p as f64;
        *dq = diff * diff + f[p];
    }
    d
}

/// Log-likelihood of a scan taken at `pose` against `field`, a distance
/// field precomputed from `grid`.
pub fn log_likelihood_with_field(
    scan: &Scan,
    pose: &Pose2,
    grid: &OccupancyGrid,
    field: &DistanceField,
    sensor: &SensorModel,
) -> f64 {
    let uniform = sensor.z_rand / sensor.max_range;
    let norm = 1.0 / (sensor.hit_sigma * (2.0 * PI).sqrt());
    let two_var = 2.0 * sensor.hit_sigma * sensor.hit_sigma;
    let mut total = 0.0;
    for i in (0..scan.len()).step_by(sensor.beam_stride) {
        let hit_term = sensor
            .endpoint(scan, pose, i)
            .and_then(|(x, y)| grid.world_to_cell(x, y))
            .filter(|&(cx, cy)| grid.log_odds()[grid.index(cx, cy)] != 0.0)
            .map_or(0.0, |(cx, cy)| {
                let d = field.at(cx, cy);
                sensor.z_hit * norm * (-d * d / two_var).exp()
            });
        total += (hit_term + uniform).ln();
    }
    total
}

/// Log-likelihood of a scan at `pose` given `grid`.
pub fn measurement_likelihood(
    scan: &Scan,
    pose: &Pose2,
    grid: &OccupancyGrid,
    sensor: &SensorModel,
) -> f64 {
    let field = DistanceField::from_grid(grid);
    log_likelihood_with_field(scan, pose, grid, &field, sensor)
}
