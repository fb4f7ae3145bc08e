//! Simulated planar lidar.

use std::f64::consts::{PI, TAU};

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::floorplan::FloorPlan;
use crate::error::{Error, Result};
use crate::gridmap::raytrace::traverse;
use crate::pose::Pose2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub beam_count: usize,
    /// Field of view in radians, `0 < fov <= 2 pi`.
    pub fov: f64,
    pub max_range: f64,
    pub range_noise_sigma: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            beam_count: 360,
            fov: TAU,
            max_range: 4.0,
            range_noise_sigma: 0.01,
        }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beam_count == 0 {
            return Err(Error::InvalidParam("beam_count must be at least 1".into()));
        }
        if !(self.fov > 0.0 && self.fov <= TAU) {
            return Err(Error::InvalidParam(format!("fov {} outside (0, 2pi]", self.fov)));
        }
        if !(self.max_range > 0.0) || !(self.range_noise_sigma >= 0.0) {
            return Err(Error::InvalidParam(
                "max_range must be positive and range noise nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// First beam angle and spacing, relative to the robot heading.
    pub fn angles(&self) -> (f64, f64) {
        if self.beam_count == 1 {
            (0.0, 0.0)
        } else if (self.fov - TAU).abs() < 1e-12 {
            (-PI, TAU / self.beam_count as f64)
        } else {
            (-self.fov / 2.0, self.fov / (self.beam_count - 1) as f64)
        }
    }
}

/// One sweep of range readings. A reading equal to `max_range` means no return.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scan {
    pub angle_min: f64,
    pub angle_increment: f64,
    pub max_range: f64,
    pub ranges: Vec<f64>,
}

impl Scan {
    pub fn beam_angle(&self, i: usize) -> f64 {
        self.angle_min + i as f64 * self.angle_increment
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn is_hit(&self, i: usize) -> bool {
        self.ranges[i] < self.max_range
    }
}

/// Distance from `pose` to the first wall cell along `angle`, or `None`
/// if nothing is hit within `max_range`.
pub fn cast_ray(plan: &FloorPlan, pose: &Pose2, angle: f64, max_range: f64) -> Option<f64> {
    let mut hit = None;
    traverse(&plan.lattice(), pose.x, pose.y, angle, max_range, |x, y, t| {
        if plan.is_occupied(x, y) {
            hit = Some(t);
            false
        } else {
            true
        }
    });
    hit.filter(|&t| t <= max_range)
}

/// Simulates one sweep from `pose`. Returns are perturbed with Gaussian
/// range noise and clamped to `[0, max_range]`; beams without a return
/// read exactly `max_range`.
pub fn raycast<R: rand::Rng + ?Sized>(
    plan: &FloorPlan,
    pose: &Pose2,
    cfg: &ScanConfig,
    rng: &mut R,
) -> Result<Scan> {
    cfg.validate()?;
    if !plan.is_free_point(pose.x, pose.y) {
        return Err(Error::PoseInWall {
            x: pose.x,
            y: pose.y,
        });
    }
    let (angle_min, angle_increment) = cfg.angles();
    let noise = (cfg.range_noise_sigma > 0.0)
        .then(|| Normal::new(0.0, cfg.range_noise_sigma).expect("validated sigma"));
    let ranges = (0..cfg.beam_count)
        .map(|i| {
            let a = pose.theta + angle_min + i as f64 * angle_increment;
            match cast_ray(plan, pose, a, cfg.max_range) {
                Some(r) => {
                    let r = r + noise.as_ref().map_or(0.0, |n| n.sample(rng));
                    r.clamp(0.0, cfg.max_range)
                }
                None => cfg.max_range,
            }
        })
        .collect();
    Ok(Scan {
        angle_min,
        angle_increment,
        max_range: cfg.max_range,
        ranges,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::rng;
    use crate::simworld::floorplan::Rect;

    /// An open 40x40 box with one-cell walls at resolution 0.1.
    pub(crate) fn box_plan() -> FloorPlan {
        let n = 40;
        let mut occupied = vec![false; n * n];
        for y in 0..n {
            for x in 0..n {
                if x == 0 || y == 0 || x == n - 1 || y == n - 1 {
                    occupied[y * n + x] = true;
                }
            }
        }
        let full = Rect {
            x0: 0,
            y0: 0,
            x1: n - 1,
            y1: n - 1,
        };
        FloorPlan {
            width: n,
            height: n,
            resolution: 0.1,
            occupied,
            footprint: full,
            outside: vec![false; n * n],
            rooms: vec![Rect {
                x0: 1,
                y0: 1,
                x1: n - 2,
                y1: n - 2,
            }],
            doorways: vec![],
        }
    }

    #[test]
    fn normal_beam_hits_flat_wall() {
        // east wall surface at x = 3.9
        let plan = box_plan();
        let pose = Pose2::new(1.9, 2.0, 0.0);
        let cfg = ScanConfig {
            beam_count: 1,
            fov: 0.1,
            max_range: 5.0,
            range_noise_sigma: 0.0,
        };
        let scan = raycast(&plan, &pose, &cfg, &mut rng::seeded(0)).unwrap();
        assert!((scan.ranges[0] - 2.0).abs() <= 0.05 + 1e-12);
    }

    #[test]
    fn open_space_reads_max_range() {
        let plan = box_plan();
        let cfg = ScanConfig {
            beam_count: 4,
            fov: TAU,
            max_range: 0.3,
            range_noise_sigma: 0.05,
        };
        let scan = raycast(&plan, &Pose2::new(1.0, 1.0, 0.0), &cfg, &mut rng::seeded(1)).unwrap();
        assert!(scan.ranges.iter().all(|&r| r == 0.3));
    }

    #[test]
    fn noiseless_scans_repeat() {
        let plan = box_plan();
        let cfg = ScanConfig {
            range_noise_sigma: 0.0,
            ..ScanConfig::default()
        };
        let p = Pose2::new(0.7, 1.2, 0.4);
        let a = raycast(&plan, &p, &cfg, &mut rng::seeded(1)).unwrap();
        let b = raycast(&plan, &p, &cfg, &mut rng::seeded(2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pose_in_wall_is_rejected() {
        let plan = box_plan();
        let err = raycast(&plan, &Pose2::new(0.05, 1.0, 0.0), &ScanConfig::default(), &mut rng::seeded(0));
        assert!(matches!(err, Err(Error::PoseInWall { .. })));
    }
}
