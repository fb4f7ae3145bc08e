//! Lidar ray casting against an oracle that intersects the ray with every
//! wall cell's square.

use mcn_core::rng;
use mcn_core::simworld::lidar::cast_ray;
use mcn_core::simworld::{generate_floorplan, FloorPlan, PlanStyle};
use mcn_core::Pose2;
use rand::Rng;

fn nearest_wall(plan: &FloorPlan, pose: &Pose2, angle: f64, max_range: f64) -> Option<f64> {
    let (dx, dy) = (angle.cos(), angle.sin());
    let r = plan.resolution;
    let mut best: Option<f64> = None;
    for cy in 0..plan.height {
        for cx in 0..plan.width {
            if !plan.is_occupied(cx, cy) {
                continue;
            }
            let mut t0 = 0.0f64;
            let mut t1 = f64::INFINITY;
            for (o, v, a) in [(pose.x, dx, cx as f64 * r), (pose.y, dy, cy as f64 * r)] {
                if v == 0.0 {
                    if o < a || o > a + r {
                        t0 = f64::INFINITY;
                    }
                    continue;
                }
                let (ta, tb) = ((a - o) / v, (a + r - o) / v);
                t0 = t0.max(ta.min(tb));
                t1 = t1.min(ta.max(tb));
            }
            if t0 <= t1 && t0 <= max_range {
                best = Some(best.map_or(t0, |b| b.min(t0)));
            }
        }
    }
    best
}

#[test]
fn cast_ray_matches_segment_oracle_on_100_pairs() {
    let mut rng = rng::seeded(42);
    let mut hits = 0;
    for pair in 0..100u64 {
        let style = if pair % 2 == 0 { PlanStyle::A } else { PlanStyle::B };
        let plan = generate_floorplan(900 + pair / 10, &style.params()).unwrap();
        let pose = loop {
            let x = rng.random_range(0.0..plan.width as f64 * plan.resolution);
            let y = rng.random_range(0.0..plan.height as f64 * plan.resolution);
            if plan.is_free_point(x, y) {
                break Pose2::new(x, y, 0.0);
            }
        };
        let angle = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let max_range = rng.random_range(1.0..12.0);
        let got = cast_ray(&plan, &pose, angle, max_range);
        let want = nearest_wall(&plan, &pose, angle, max_range);
        match (got, want) {
            (Some(g), Some(w)) => {
                assert!((g - w).abs() < 1e-9, "pair {pair}: {g} vs {w}");
                hits += 1;
            }
            (None, None) => {}
            _ => panic!("pair {pair}: {got:?} vs {want:?}"),
        }
    }
    assert!(hits > 50, "only {hits} rays hit a wall");
}
