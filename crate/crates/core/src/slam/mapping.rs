//! Inverse-sensor log-odds mapping along integer ray traversals.

use crate::gridmap::raytrace::traverse;
use crate::gridmap::OccupancyGrid;
use crate::pose::Pose2;
use crate::simworld::lidar::Scan;

use super::sensor::SensorModel;

/// Adds one scan to `grid` in place.
///
/// For every beam, each cell the ray crosses before its endpoint cell gets
/// `l_free`. A beam with a return adds `l_occ` to the cell containing its
/// endpoint; a no-return beam frees its final cell as well. Log-odds are
/// clamped after every increment.
pub fn integrate_scan(grid: &mut OccupancyGrid, pose: &Pose2, scan: &Scan, sensor: &SensorModel) {
    let lat = grid.lattice();
    let mut cells: Vec<(usize, usize)> = Vec::with_capacity(64);
    for i in 0..scan.len() {
        let angle = pose.theta + scan.beam_angle(i);
        let hit = scan.is_hit(i);
        let length = if hit {
            scan.ranges[i] + sensor.hit_depth
        } else {
            scan.ranges[i]
        };
        cells.clear();
        traverse(&lat, pose.x, pose.y, angle, length, |x, y, _| {
            cells.push((x, y));
            true
        });
        let endpoint = if hit {
            let (ex, ey) = (pose.x + length * angle.cos(), pose.y + length * angle.sin());
            lat.cell_of(ex, ey).filter(|c| cells.last() == Some(c))
        } else {
            None
        };
        let free_cells = if endpoint.is_some() {
            &cells[..cells.len() - 1]
        } else {
            &cells[..]
        };
        for &(x, y) in free_cells {
            let idx = grid.index(x, y);
            grid.update(idx, sensor.l_free);
        }
        if let Some((x, y)) = endpoint {
            let idx = grid.index(x, y);
            grid.update(idx, sensor.l_occ);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_beam(range: f64, max_range: f64) -> Scan {
        Scan {
            angle_min: 0.0,
            angle_increment: 0.0,
            max_range,
            ranges: vec![range],
        }
    }

    fn sensor() -> SensorModel {
        SensorModel {
            hit_depth: 0.0,
            ..SensorModel::default()
        }
    }

    #[test]
    fn single_hit_beam() {
        let mut g = OccupancyGrid::new(10, 3, 1.0, Pose2::default());
        let s = sensor();
        integrate_scan(&mut g, &Pose2::new(0.5, 1.5, 0.0), &one_beam(4.2, 8.0), &s);
        let row: Vec<f64> = (0..10).map(|x| g.log_odds()[g.index(x, 1)]).collect();
        assert_eq!(&row[..4], &[s.l_free; 4]);
        assert_eq!(row[4], s.l_occ);
        assert!(row[5..].iter().all(|&l| l == 0.0));
        assert!(g.log_odds()[..10].iter().all(|&l| l == 0.0));
    }

    #[test]
    fn max_range_beam_only_frees() {
        let mut g = OccupancyGrid::new(10, 3, 1.0, Pose2::default());
        let s = sensor();
        integrate_scan(&mut g, &Pose2::new(0.5, 1.5, 0.0), &one_beam(4.2, 4.2), &s);
        let row: Vec<f64> = (0..10).map(|x| g.log_odds()[g.index(x, 1)]).collect();
        assert_eq!(&row[..5], &[s.l_free; 5]);
        assert!(row[5..].iter().all(|&l| l == 0.0));
    }

    #[test]
    fn repeated_hits_are_monotone_until_clamp() {
        let mut g = OccupancyGrid::new(10, 3, 1.0, Pose2::default());
        let s = sensor();
        let idx = g.index(4, 1);
        let mut prev = g.log_odds()[idx];
        for _ in 0..30 {
            integrate_scan(&mut g, &Pose2::new(0.5, 1.5, 0.0), &one_beam(4.2, 8.0), &s);
            let l = g.log_odds()[idx];
            assert!(l >= prev);
            prev = l;
        }
        assert_eq!(prev, g.l_max());
    }
}
