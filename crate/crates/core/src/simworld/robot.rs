//! Unicycle robot with wall contact and noisy odometry.

use serde::{Deserialize, Serialize};

use super::floorplan::FloorPlan;
use crate::gridmap::raytrace::traverse;
use crate::pose::{normalize_angle, Pose2};
use crate::slam::motion::{MotionNoise, Odometry};

/// Standoff kept from a wall surface on contact, in meters.
const CONTACT_GAP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub pose: Pose2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Control {
    /// Forward speed, m/s.
    pub v: f64,
    /// Turn rate, rad/s.
    pub omega: f64,
    /// Duration, s.
    pub dt: f64,
}

/// Advances the true state by noiseless unicycle kinematics and returns
/// the odometry the robot would report.
///
/// Motion is cut short where the straight path between start and end
/// position first enters a wall cell. The reported odometry is the true
/// (rot1, trans, rot2) displacement perturbed by `noise`.
pub fn step<R: rand::Rng + ?Sized>(
    plan: &FloorPlan,
    state: &RobotState,
    control: &Control,
    noise: &MotionNoise,
    rng: &mut R,
) -> (RobotState, Odometry) {
    assert!(control.dt > 0.0, "dt must be positive");
    let p = state.pose;
    let dtheta = control.omega * control.dt;
    let (dx, dy) = if dtheta.abs() < 1e-12 {
        let d = control.v * control.dt;
        (d * p.theta.cos(), d * p.theta.sin())
    } else {
        let r = control.v / control.omega;
        (
            r * ((p.theta + dtheta).sin() - p.theta.sin()),
            r * (p.theta.cos() - (p.theta + dtheta).cos()),
        )
    };
    let length = dx.hypot(dy);
    let mut travel = length;
    if length > 0.0 {
        let heading = dy.atan2(dx);
        traverse(&plan.lattice(), p.x, p.y, heading, length, |x, y, t| {
            // the start cell never blocks: a robot resting on a cell corner may round into a wall
            if t > 0.0 && (plan.is_occupied(x, y) || !plan.is_inside(x, y)) {
                travel = (t - CONTACT_GAP).max(0.0);
                false
            } else {
                true
            }
        });
        // rounding at the contact point must not leave the robot inside a wall
        let lands_free = |d: f64| plan.is_free_point(p.x + dx * d / length, p.y + dy * d / length);
        while travel > 0.0 && !lands_free(travel) {
            travel = (travel - 1e3 * CONTACT_GAP).max(0.0);
        }
    }
    let scale = if length > 0.0 { travel / length } else { 0.0 };
    let next = Pose2::new(
        p.x + dx * scale,
        p.y + dy * scale,
        normalize_angle(p.theta + dtheta),
    );
    let truth = Odometry::between(&p, &next);
    let reading = noise.perturb(&truth, rng);
    (RobotState { pose: next }, reading)
}
