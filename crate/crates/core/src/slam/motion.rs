//! Odometry motion model: (rot1, trans, rot2) decomposition with
//! alpha-mixed Gaussian noise on each component.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::pose::{normalize_angle, Pose2};

/// Relative motion between two poses, expressed as rotate-translate-rotate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Odometry {
    pub rot1: f64,
    pub trans: f64,
    pub rot2: f64,
}

impl Odometry {
    const MIN_TRANS: f64 = 1e-9;

    pub fn between(from: &Pose2, to: &Pose2) -> Self {
        let (dx, dy) = (to.x - from.x, to.y - from.y);
        let trans = dx.hypot(dy);
        let dtheta = normalize_angle(to.theta - from.theta);
        if trans < Self::MIN_TRANS {
            return Self {
                rot1: 0.0,
                trans: 0.0,
                rot2: dtheta,
            };
        }
        let rot1 = normalize_angle(dy.atan2(dx) - from.theta);
        Self {
            rot1,
            trans,
            rot2: normalize_angle(dtheta - rot1),
        }
    }

    pub fn apply(&self, pose: &Pose2) -> Pose2 {
        let heading = pose.theta + self.rot1;
        Pose2 {
            x: pose.x + self.trans * heading.cos(),
            y: pose.y + self.trans * heading.sin(),
            theta: normalize_angle(heading + self.rot2),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.rot1 == 0.0 && self.trans == 0.0 && self.rot2 == 0.0
    }
}

/// Noise coefficients `[a1, a2, a3, a4]`:
/// rotation variance `a1 rot^2 + a2 trans^2`,
/// translation variance `a3 trans^2 + a4 (rot1^2 + rot2^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionNoise {
    pub alphas: [f64; 4],
}

impl MotionNoise {
    pub const ZERO: MotionNoise = MotionNoise { alphas: [0.0; 4] };

    pub fn new(alphas: [f64; 4]) -> crate::Result<Self> {
        if alphas.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(crate::Error::InvalidParam(format!(
                "motion noise alphas must be finite and nonnegative, got {alphas:?}"
            )));
        }
        Ok(Self { alphas })
    }

    /// Standard deviations of (rot1, trans, rot2) for a given motion.
    pub fn sigmas(&self, odo: &Odometry) -> (f64, f64, f64) {
        let [a1, a2, a3, a4] = self.alphas;
        let (r1, t, r2) = (odo.rot1 * odo.rot1, odo.trans * odo.trans, odo.rot2 * odo.rot2);
        (
            (a1 * r1 + a2 * t).sqrt(),
            (a3 * t + a4 * (r1 + r2)).sqrt(),
            (a1 * r2 + a2 * t).sqrt(),
        )
    }

    /// Perturbs each odometry component with zero-mean Gaussian noise.
    pub fn perturb<R: rand::Rng + ?Sized>(&self, odo: &Odometry, rng: &mut R) -> Odometry {
        let (s1, st, s2) = self.sigmas(odo);
        Odometry {
            rot1: odo.rot1 + gaussian(s1, rng),
            trans: odo.trans + gaussian(st, rng),
            rot2: odo.rot2 + gaussian(s2, rng),
        }
    }
}

impl Default for MotionNoise {
    fn default() -> Self {
        Self {
            alphas: [0.02, 0.01, 0.01, 0.002],
        }
    }
}

fn gaussian<R: rand::Rng + ?Sized>(sigma: f64, rng: &mut R) -> f64 {
    if sigma > 0.0 {
        Normal::new(0.0, sigma).expect("finite sigma").sample(rng)
    } else {
        // keep the stream position independent of sigma
        let _: f64 = rng.random();
        0.0
    }
}

/// Draws a successor pose from the odometry motion model.
pub fn sample_motion<R: rand::Rng + ?Sized>(
    pose: &Pose2,
    odo: &Odometry,
    noise: &MotionNoise,
    rng: &mut R,
) -> Pose2 {
    noise.perturb(odo, rng).apply(pose)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn zero_motion_is_identity() {
        let p = Pose2::new(1.0, 2.0, 0.3);
        let mut r = rng::seeded(0);
        assert_eq!(
            sample_motion(&p, &Odometry::default(), &MotionNoise::ZERO, &mut r),
            p
        );
    }

    #[test]
    fn noiseless_translation() {
        let odo = Odometry {
            rot1: 0.0,
            trans: 1.0,
            rot2: 0.0,
        };
        let mut r = rng::seeded(0);
        let p = sample_motion(&Pose2::new(2.0, 3.0, 0.0), &odo, &MotionNoise::ZERO, &mut r);
        assert!((p.x - 3.0).abs() < 1e-15 && p.y == 3.0 && p.theta == 0.0);
    }

    #[test]
    fn between_and_apply_round_trip() {
        let a = Pose2::new(0.3, -1.0, 2.9);
        let b = Pose2::new(-0.4, 0.2, -2.8);
        let c = Odometry::between(&a, &b).apply(&a);
        assert!(c.distance(&b) < 1e-12 && c.heading_error(&b) < 1e-12);
        let turn = Odometry::between(&a, &Pose2::new(0.3, -1.0, 0.1));
        assert_eq!(turn.trans, 0.0);
        assert_eq!(turn.rot1, 0.0);
    }

    #[test]
    fn translation_moments() {
        // a3 = 0.01 gives sigma_trans = 0.1 for a 1 m move
        let noise = MotionNoise::new([0.0, 0.0, 0.01, 0.0]).unwrap();
        let odo = Odometry {
            rot1: 0.0,
            trans: 1.0,
            rot2: 0.0,
        };
        let mut r = rng::seeded(42);
        let n = 100_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| noise.perturb(&odo, &mut r).trans)
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * 0.1 / (n as f64).sqrt(), "mean {mean}");
        assert!((sd - 0.1).abs() < 0.005, "sd {sd}");
    }

    #[test]
    fn rejects_negative_alphas() {
        assert!(MotionNoise::new([0.1, -0.1, 0.0, 0.0]).is_err());
    }
}
