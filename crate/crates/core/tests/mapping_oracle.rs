//! `integrate_scan` against a brute-force oracle that tests every cell of
//! the grid for membership in every beam segment.

use mcn_core::rng;
use mcn_core::simworld::{generate_floorplan, raycast, run_episode, start_pose, EpisodeConfig, PlanStyle, RandomWalk, Scan};
use mcn_core::slam::{integrate_scan, SensorModel};
use mcn_core::{OccupancyGrid, Pose2};

/// Entry and exit parameters of the segment `p + t * d, t in [0, len]` through
/// the closed box `[x0, x1] x [y0, y1]`, if it meets the box at all.
fn segment_box(p: (f64, f64), d: (f64, f64), len: f64, lo: (f64, f64), hi: (f64, f64)) -> Option<(f64, f64)> {
    let mut t0 = 0.0f64;
    let mut t1 = len;
    for (o, v, a, b) in [(p.0, d.0, lo.0, hi.0), (p.1, d.1, lo.1, hi.1)] {
        if v == 0.0 {
            if o < a || o > b {
                return None;
            }
            continue;
        }
        let (ta, tb) = ((a - o) / v, (b - o) / v);
        t0 = t0.max(ta.min(tb));
        t1 = t1.min(ta.max(tb));
    }
    (t0 <= t1).then_some((t0, t1))
}

fn oracle(grid: &mut Vec<f64>, spec: &OccupancyGrid, pose: &Pose2, scan: &Scan, sensor: &SensorModel) {
    let res = spec.resolution();
    let (w, h) = (spec.width(), spec.height());
    let o = spec.origin();
    for i in 0..scan.len() {
        let a = pose.theta + scan.beam_angle(i);
        let d = (a.cos(), a.sin());
        let hit = scan.is_hit(i);
        let len = if hit { scan.ranges[i] + sensor.hit_depth } else { scan.ranges[i] };
        let end = (pose.x + len * d.0, pose.y + len * d.1);
        let end_cell = {
            let (fx, fy) = (((end.0 - o.x) / res).floor(), ((end.1 - o.y) / res).floor());
            (hit && fx >= 0.0 && fy >= 0.0 && fx < w as f64 && fy < h as f64).then(|| (fx as usize, fy as usize))
        };
        for cy in 0..h {
            for cx in 0..w {
                let lo = (o.x + cx as f64 * res, o.y + cy as f64 * res);
                let hi = (lo.0 + res, lo.1 + res);
                let delta = if end_cell == Some((cx, cy)) {
                    sensor.l_occ
                } else if segment_box((pose.x, pose.y), d, len, lo, hi).is_some() {
                    sensor.l_free
                } else {
                    continue;
                };
                let l = &mut grid[cy * w + cx];
                *l = (*l + delta).clamp(-spec.l_max(), spec.l_max());
            }
        }
    }
}

#[test]
fn integrate_scan_matches_ray_membership_oracle() {
    let mut cfg = EpisodeConfig::default();
    cfg.scan.range_noise_sigma = 0.0;
    let sensor = cfg.slam.sensor.clone();
    let spec = &cfg.slam.grid;
    for world in 0..20u64 {
        let style = if world % 2 == 0 { PlanStyle::A } else { PlanStyle::B };
        let plan = generate_floorplan(500 + world, &style.params()).unwrap();
        let start = start_pose(&plan, &mut rng::seeded(world)).unwrap();
        let ep = run_episode(&plan, start, &mut RandomWalk::new(world), 12, &cfg, |_, _| {}).unwrap();

        let mut grid = spec.empty_grid();
        let mut expect = vec![0.0; grid.len()];
        // skip the start pose: it sits on a cell centre where diagonal beams graze corners
        for (t, pose) in ep.truth.iter().enumerate().skip(1) {
            let scan = raycast(&plan, pose, &cfg.scan, &mut rng::seeded(t as u64)).unwrap();
            integrate_scan(&mut grid, pose, &scan, &sensor);
            oracle(&mut expect, &grid, pose, &scan, &sensor);
        }
        let mismatches = grid.log_odds().iter().zip(&expect).filter(|(a, b)| a != b).count();
        assert_eq!(mismatches, 0, "world {world}: {mismatches} cells differ");
        assert!(grid.log_odds().iter().any(|&l| l > 0.0), "world {world} saw no wall");
    }
}
