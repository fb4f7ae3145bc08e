//! Closed-loop simulation episodes: the simulator drives a robot through a
//! plan while the filter estimates its trajectory and map from odometry
//! and scans alone.

use std::collections::VecDeque;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::floorplan::FloorPlan;
use super::lidar::{raycast, Scan, ScanConfig};
use super::robot::{step, Control, RobotState};
use crate::error::{Error, Result};
use crate::pose::{normalize_angle, Pose2};
use crate::rng;
use crate::slam::{slam_step, EpisodeRecord, MotionNoise, Odometry, ParticleSet, SlamConfig, StepInfo};

/// Picks a start pose at the centre of a cell at least `clearance` cells
/// from any wall, inside a randomly chosen room.
pub fn start_pose<R: rand::Rng + ?Sized>(plan: &FloorPlan, rng: &mut R) -> Result<Pose2> {
    let res = plan.resolution;
    for clearance in [3usize, 2, 1, 0] {
        let mut rooms: Vec<usize> = (0..plan.rooms.len()).collect();
        while !rooms.is_empty() {
            let k = rooms.swap_remove(rng.random_range(0..rooms.len()));
            let r = plan.rooms[k];
            let cells: Vec<(usize, usize)> = (r.y0..=r.y1)
                .flat_map(|y| (r.x0..=r.x1).map(move |x| (x, y)))
                .filter(|&(x, y)| {
                    x >= r.x0 + clearance
                        && x + clearance <= r.x1
                        && y >= r.y0 + clearance
                        && y + clearance <= r.y1
                        && plan.is_free(x, y)
                })
                .collect();
            if cells.is_empty() {
                continue;
            }
            let (x, y) = cells[rng.random_range(0..cells.len())];
            let theta = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            return Ok(Pose2::new((x as f64 + 0.5) * res, (y as f64 + 0.5) * res, theta));
        }
    }
    Err(Error::InvalidParam("plan has no free cell for a start pose".into()))
}

/// Supplies the next control from the true pose and the latest scan.
/// Returning `None` ends the episode.
pub trait Controller {
    fn next(&mut self, truth: &Pose2, scan: &Scan) -> Option<Control>;
}

/// Wanders forward and turns in place whenever the way ahead is blocked.
#[derive(Debug, Clone)]
pub struct RandomWalk {
    pub speed: f64,
    pub turn_rate: f64,
    pub clearance: f64,
    turning: Option<f64>,
    rng: rng::Rng,
}

impl RandomWalk {
    pub fn new(seed: u64) -> Self {
        Self {
            speed: 0.2,
            turn_rate: 0.6,
            clearance: 0.6,
            turning: None,
            rng: rng::seeded(seed),
        }
    }
}

impl Controller for RandomWalk {
    fn next(&mut self, _truth: &Pose2, scan: &Scan) -> Option<Control> {
        let front = (0..scan.len())
            .filter(|&i| normalize_angle(scan.beam_angle(i)).abs() < 0.45)
            .map(|i| scan.ranges[i])
            .fold(f64::INFINITY, f64::min);
        if front > self.clearance {
            self.turning = None;
            let omega = self.rng.random_range(-0.25..0.25);
            Some(Control {
                v: self.speed,
                omega,
                dt: 1.0,
            })
        } else {
            let dir = *self.turning.get_or_insert_with(|| {
                if self.rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            });
            Some(Control {
                v: 0.0,
                omega: dir * self.turn_rate,
                dt: 1.0,
            })
        }
    }
}

/// Spacing of the extra tour stops laid over the plan, in cells.
const TOUR_SPACING: usize = 12;
/// How many path cells ahead the explorer looks for a straight shot.
const LOOKAHEAD: usize = 8;

/// Tours the plan along shortest grid paths on the true map: every room
/// centre plus a lattice of well-clear cells, nearest stop first. The
/// robot turns in place and then drives straight at the farthest path
/// cell it can see.
#[derive(Debug, Clone)]
pub struct Explorer {
    path: VecDeque<(f64, f64)>,
    free: Vec<bool>,
    width: usize,
    resolution: f64,
    /// Pose at the previous command and whether that command drove forward.
    last: Option<(Pose2, bool)>,
    stalls: usize,
    pub speed: f64,
    pub turn_rate: f64,
}

impl Explorer {
    pub fn new(plan: &FloorPlan, start: &Pose2) -> Self {
        let res = plan.resolution;
        let (w, h) = (plan.width, plan.height);
        let clearance = wall_clearance(plan);
        let passable = |i: usize, need: u32| plan.is_free(i % w, i / w) && clearance[i] >= need;

        let mut cur = plan.cell_of(start.x, start.y).map(|(x, y)| y * w + x);
        let mut pending: Vec<usize> = plan
            .rooms
            .iter()
            .map(|r| {
                let (cx, cy) = r.center();
                (cy as usize).min(h - 1) * w + (cx as usize).min(w - 1)
            })
            .collect();
        for y in (TOUR_SPACING / 2..h).step_by(TOUR_SPACING) {
            for x in (TOUR_SPACING / 2..w).step_by(TOUR_SPACING) {
                if clearance[y * w + x] >= 3 {
                    pending.push(y * w + x);
                }
            }
        }
        let mut cells = Vec::new();
        while let (Some(from), false) = (cur, pending.is_empty()) {
            // the tightest doorways still admit a one-cell clearance
            let found = [2u32, 1]
                .iter()
                .find_map(|&need| bfs(w, h, from, |i| passable(i, need) || i == from));
            let Some((dist, prev)) = found else { break };
            pending.retain(|&g| dist[g] != u32::MAX && g != from);
            let Some((k, &goal)) = pending.iter().enumerate().min_by_key(|(_, g)| dist[**g]) else {
                break;
            };
            pending.swap_remove(k);
            let mut leg = vec![goal];
            let mut c = goal;
            while c != from {
                c = prev[c];
                leg.push(c);
            }
            leg.reverse();
            cells.extend(leg.into_iter().skip(1));
            cur = Some(goal);
        }
        let centre = |i: usize| (((i % w) as f64 + 0.5) * res, ((i / w) as f64 + 0.5) * res);
        Self {
            path: cells.into_iter().map(centre).collect(),
            free: (0..w * h).map(|i| plan.is_free(i % w, i / w)).collect(),
            width: w,
            resolution: res,
            last: None,
            stalls: 0,
            speed: 0.3,
            turn_rate: 0.8,
        }
    }

    pub fn remaining(&self) -> usize {
        self.path.len()
    }

    fn is_free_at(&self, x: f64, y: f64) -> bool {
        if x < 0.0 || y < 0.0 {
            return false;
        }
        let (cx, cy) = ((x / self.resolution) as usize, (y / self.resolution) as usize);
        cx < self.width && self.free.get(cy * self.width + cx).copied().unwrap_or(false)
    }

    /// Samples the segment finely; good enough since stalls are recovered from.
    fn clear_line(&self, from: &Pose2, to: (f64, f64)) -> bool {
        let d = (to.0 - from.x).hypot(to.1 - from.y);
        let n = (d / (self.resolution * 0.1)).ceil() as usize;
        (0..=n).all(|k| {
            let f = k as f64 / n.max(1) as f64;
            self.is_free_at(from.x + f * (to.0 - from.x), from.y + f * (to.1 - from.y))
        })
    }
}

impl Controller for Explorer {
    fn next(&mut self, truth: &Pose2, _scan: &Scan) -> Option<Control> {
        // shortcuts skip path cells, so drop everything up to the last one reached
        let reached = (0..self.path.len().min(LOOKAHEAD))
            .rev()
            .find(|&i| (self.path[i].0 - truth.x).hypot(self.path[i].1 - truth.y) < 0.05);
        if let Some(i) = reached {
            self.path.drain(..=i);
        }
        // only a forward command that went nowhere counts as a stall
        if let Some((last, forward)) = self.last {
            if forward {
                self.stalls = if last.distance(truth) > 1e-9 { 0 } else { self.stalls + 1 };
            }
        }
        if self.stalls >= 2 {
            // retreat to the nearest free cell centre, which is reachable in a straight line
            let r = self.resolution;
            let (fx, fy) = ((truth.x / r).floor(), (truth.y / r).floor());
            let home = [(0.0, 0.0), (-1.0, 0.0), (0.0, -1.0), (-1.0, -1.0), (1.0, 0.0), (0.0, 1.0)]
                .iter()
                .map(|(ox, oy)| ((fx + ox + 0.5) * r, (fy + oy + 0.5) * r))
                .filter(|&(x, y)| self.is_free_at(x, y))
                .min_by(|a, b| {
                    let da = (a.0 - truth.x).hypot(a.1 - truth.y);
                    let db = (b.0 - truth.x).hypot(b.1 - truth.y);
                    da.total_cmp(&db)
                });
            if let Some(home) = home.filter(|h| (h.0 - truth.x).hypot(h.1 - truth.y) > 1e-6) {
                self.path.push_front(home);
            }
            self.stalls = 0;
        }
        let ahead = self.path.len().min(LOOKAHEAD);
        let pick = if self.stalls > 0 {
            0
        } else {
            (1..ahead)
                .rev()
                .find(|&i| self.clear_line(truth, self.path[i]))
                .unwrap_or(0)
        };
        let &(tx, ty) = self.path.get(pick)?;
        let bearing = normalize_angle((ty - truth.y).atan2(tx - truth.x) - truth.theta);
        let dist = (tx - truth.x).hypot(ty - truth.y);
        let turn = bearing.abs() > 1e-3;
        self.last = Some((*truth, !turn));
        Some(if turn {
            Control {
                v: 0.0,
                omega: bearing.clamp(-self.turn_rate, self.turn_rate),
                dt: 1.0,
            }
        } else {
            Control {
                v: self.speed.min(dist),
                omega: 0.0,
                dt: 1.0,
            }
        })
    }
}

/// Chebyshev distance (in cells) from each cell to the nearest wall or outside cell.
fn wall_clearance(plan: &FloorPlan) -> Vec<u32> {
    let (w, h) = (plan.width, plan.height);
    let mut d = vec![u32::MAX; w * h];
    let mut q = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            if !plan.is_free(x, y) {
                d[y * w + x] = 0;
                q.push_back(y * w + x);
            }
        }
    }
    while let Some(i) = q.pop_front() {
        let (x, y) = ((i % w) as i64, (i / w) as i64);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if d[j] == u32::MAX {
                    d[j] = d[i] + 1;
                    q.push_back(j);
                }
            }
        }
    }
    d
}

fn bfs(
    w: usize,
    h: usize,
    from: usize,
    passable: impl Fn(usize) -> bool,
) -> Option<(Vec<u32>, Vec<usize>)> {
    let mut dist = vec![u32::MAX; w * h];
    let mut prev = vec![usize::MAX; w * h];
    dist[from] = 0;
    let mut q = VecDeque::from([from]);
    let mut reached = 0;
    while let Some(i) = q.pop_front() {
        reached += 1;
        let (x, y) = (i % w, i / w);
        let mut push = |j: usize| {
            if dist[j] == u32::MAX && passable(j) {
                dist[j] = dist[i] + 1;
                prev[j] = i;
                q.push_back(j);
            }
        };
        if x > 0 {
            push(i - 1);
        }
        if x + 1 < w {
            push(i + 1);
        }
        if y > 0 {
            push(i - w);
        }
        if y + 1 < h {
            push(i + w);
        }
    }
    (reached > 1).then_some((dist, prev))
}

/// Simulation-side settings of an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub scan: ScanConfig,
    /// Noise applied to the odometry the robot reports.
    pub odometry_noise: MotionNoise,
    pub slam: SlamConfig,
    pub seed: u64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            scan: ScanConfig::default(),
            odometry_noise: MotionNoise::default(),
            slam: SlamConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub particles: ParticleSet,
    pub truth: Vec<Pose2>,
    pub records: Vec<EpisodeRecord>,
}

/// Runs up to `steps` filter iterations. Iteration 0 integrates a scan
/// taken at the start pose without moving; later iterations move first.
/// `observe` sees the filter after every iteration.
pub fn run_episode<C, F>(
    plan: &FloorPlan,
    start: Pose2,
    controller: &mut C,
    steps: usize,
    cfg: &EpisodeConfig,
    mut observe: F,
) -> Result<Episode>
where
    C: Controller + ?Sized,
    F: FnMut(&ParticleSet, &StepInfo),
{
    let mut ps = ParticleSet::new(cfg.slam.particles, start, &cfg.slam.grid);
    let mut state = RobotState { pose: start };
    let mut truth = vec![start];
    let mut records = Vec::with_capacity(steps);
    let mut odometry = Odometry::default();
    let mut last_scan: Option<Scan> = None;
    for t in 0..steps {
        if let Some(prev) = &last_scan {
            let Some(control) = controller.next(&state.pose, prev) else {
                break;
            };
            let (next, reading) = step(
                plan,
                &state,
                &control,
                &cfg.odometry_noise,
                &mut rng::stream(cfg.seed, &[1, t as u64]),
            );
            state = next;
            odometry = reading;
            truth.push(state.pose);
        }
        let scan = raycast(plan, &state.pose, &cfg.scan, &mut rng::stream(cfg.seed, &[2, t as u64]))?;
        let info = slam_step(&mut ps, &odometry, &scan, &cfg.slam)?;
        observe(&ps, &info);
        let (_, traj) = ps.best_map();
        last_scan = Some(scan.clone());
        records.push(EpisodeRecord {
            t,
            odometry,
            scan,
            best_pose: *traj.last().expect("non-empty trajectory"),
            n_eff: info.n_eff,
            true_pose: Some(state.pose),
        });
    }
    Ok(Episode {
        particles: ps,
        truth,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simworld::floorplan::{generate_floorplan, PlanStyle};

    #[test]
    fn start_pose_is_free() {
        for seed in 0..20 {
            let plan = generate_floorplan(seed, &PlanStyle::A.params()).unwrap();
            let p = start_pose(&plan, &mut rng::seeded(seed)).unwrap();
            assert!(plan.is_free_point(p.x, p.y));
        }
    }

    #[test]
    fn explorer_tour_reaches_every_room() {
        let plan = generate_floorplan(2, &PlanStyle::A.params()).unwrap();
        let start = start_pose(&plan, &mut rng::seeded(2)).unwrap();
        let ex = Explorer::new(&plan, &start);
        let visited: Vec<(f64, f64)> = ex.path.iter().copied().collect();
        for r in &plan.rooms {
            let hit = visited.iter().any(|&(x, y)| {
                plan.cell_of(x, y).is_some_and(|(cx, cy)| r.contains(cx, cy))
            });
            let (sx, sy) = plan.cell_of(start.x, start.y).unwrap();
            assert!(hit || r.contains(sx, sy));
        }
    }
}
