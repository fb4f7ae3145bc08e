//! Procedural rectilinear floorplans by binary space partitioning.
//!
//! The house footprint is walled on its boundary. Its interior is split
//! recursively by one-cell walls until the target room count is reached,
//! then every split wall gets exactly one doorway. Because each split
//! separates two sub-trees and its doorway joins them, the room graph is
//! a spanning tree and therefore connected.
//!
//! Optionally some rooms on the boundary are then dropped from the house,
//! giving L-, T- and U-shaped outlines. A drop is kept only when the rest
//! stays connected and still spans the whole footprint rectangle.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridmap::raytrace::Lattice;
use crate::gridmap::{Ternary, TernaryMap};
use crate::rng;

/// Inclusive cell rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Rect {
    pub fn width(&self) -> usize {
        self.x1 + 1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 + 1 - self.y0
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        (self.x0..=self.x1).contains(&x) && (self.y0..=self.y1).contains(&y)
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (self.x0 + self.x1 + 1) as f64 / 2.0,
            (self.y0 + self.y1 + 1) as f64 / 2.0,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    /// Wall runs along x (constant y).
    Horizontal,
    /// Wall runs along y (constant x).
    Vertical,
}

/// An opening carved into a wall: `width` cells starting at `(x, y)` along the wall.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Doorway {
    pub x: usize,
    pub y: usize,
    pub axis: Axis,
    pub width: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct WallSegment {
    axis: Axis,
    /// Fixed coordinate (y for horizontal, x for vertical).
    at: usize,
    from: usize,
    to: usize,
}

/// Generator parameters. Ranges are inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanParams {
    pub width: usize,
    pub height: usize,
    /// Meters per cell.
    pub resolution: f64,
    pub min_rooms: usize,
    pub max_rooms: usize,
    /// Minimum interior side length of a room, in cells.
    pub min_room_size: usize,
    pub door_width: usize,
    /// Split walls are placed only on coordinates divisible by `snap`.
    pub snap: usize,
    /// Range of the empty margin between canvas edge and house footprint.
    pub margin: (usize, usize),
    /// Up to this many boundary rooms are cut away from the outline.
    #[serde(default)]
    pub max_cutouts: usize,
}

impl Default for PlanParams {
    fn default() -> Self {
        PlanStyle::A.params()
    }
}

/// Named generator presets used as two distinct map domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanStyle {
    /// Apartments: bounding box fills the canvas, walls on a 2-cell module,
    /// many rooms, some boundary rooms cut away.
    A,
    /// Free-form houses: inset footprint, unsnapped walls, few large rooms, wide openings.
    B,
}

impl PlanStyle {
    pub fn params(self) -> PlanParams {
        match self {
            PlanStyle::A => PlanParams {
                width: 64,
                height: 64,
                resolution: 0.2,
                min_rooms: 6,
                max_rooms: 11,
                min_room_size: 7,
                door_width: 3,
                snap: 2,
                margin: (0, 0),
                max_cutouts: 4,
            },
            PlanStyle::B => PlanParams {
                width: 64,
                height: 64,
                resolution: 0.2,
                min_rooms: 2,
                max_rooms: 4,
                min_room_size: 9,
                door_width: 5,
                snap: 1,
                margin: (2, 10),
                max_cutouts: 0,
            },
        }
    }
}

impl std::str::FromStr for PlanStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(PlanStyle::A),
            "b" => Ok(PlanStyle::B),
            _ => Err(Error::InvalidParam(format!("unknown plan style {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloorPlan {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    /// Row-major, `true` for wall cells.
    pub occupied: Vec<bool>,
    /// Bounding rectangle of the house.
    pub footprint: Rect,
    /// Row-major, `true` for cells that are not part of the house (never
    /// observable, rendered unsearched).
    pub outside: Vec<bool>,
    pub rooms: Vec<Rect>,
    pub doorways: Vec<Doorway>,
}

impl FloorPlan {
    pub fn is_occupied(&self, x: usize, y: usize) -> bool {
        self.occupied[y * self.width + x]
    }

    pub fn is_inside(&self, x: usize, y: usize) -> bool {
        !self.outside[y * self.width + x]
    }

    /// Open floor: inside the house and not a wall.
    pub fn is_free(&self, x: usize, y: usize) -> bool {
        self.is_inside(x, y) && !self.is_occupied(x, y)
    }

    pub fn lattice(&self) -> Lattice {
        Lattice {
            width: self.width,
            height: self.height,
            resolution: self.resolution,
            origin_x: 0.0,
            origin_y: 0.0,
        }
    }

    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        self.lattice().cell_of(x, y)
    }

    pub fn is_free_point(&self, x: f64, y: f64) -> bool {
        self.cell_of(x, y).is_some_and(|(cx, cy)| self.is_free(cx, cy))
    }

    /// Ground-truth ternary image: walls occupied, floor free, outside unsearched.
    pub fn render(&self) -> TernaryMap {
        let mut cells = Vec::with_capacity(self.width * self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                cells.push(if self.is_occupied(x, y) {
                    Ternary::Occupied
                } else if self.is_inside(x, y) {
                    Ternary::Free
                } else {
                    Ternary::Unsearched
                });
            }
        }
        TernaryMap::from_cells(self.width, self.height, cells).expect("sized by construction")
    }

    /// Free cells 4-connected to `(x, y)`, as a row-major mask.
    pub fn reachable_from(&self, x: usize, y: usize) -> Vec<bool> {
        let mut seen = vec![false; self.width * self.height];
        if !self.is_free(x, y) {
            return seen;
        }
        let mut queue = VecDeque::from([(x, y)]);
        seen[y * self.width + x] = true;
        while let Some((cx, cy)) = queue.pop_front() {
            let neighbours = [
                (cx.wrapping_sub(1), cy),
                (cx + 1, cy),
                (cx, cy.wrapping_sub(1)),
                (cx, cy + 1),
            ];
            for (nx, ny) in neighbours {
                if nx < self.width && ny < self.height && self.is_free(nx, ny) {
                    let i = ny * self.width + nx;
                    if !seen[i] {
                        seen[i] = true;
                        queue.push_back((nx, ny));
                    }
                }
            }
        }
        seen
    }

    /// True when every free cell is reachable from every other.
    pub fn is_connected(&self) -> bool {
        let start = (0..self.height)
            .flat_map(|y| (0..self.width).map(move |x| (x, y)))
            .find(|&(x, y)| self.is_free(x, y));
        let Some((sx, sy)) = start else {
            return false;
        };
        let reach = self.reachable_from(sx, sy);
        (0..self.height).all(|y| (0..self.width).all(|x| !self.is_free(x, y) || reach[y * self.width + x]))
    }
}

fn validate(p: &PlanParams) -> Result<()> {
    let bad = |m: &str| Err(Error::InvalidParam(m.to_string()));
    if p.min_rooms == 0 || p.min_rooms > p.max_rooms {
        return bad("room-count range must satisfy 1 <= min_rooms <= max_rooms");
    }
    if p.margin.0 > p.margin.1 {
        return bad("margin range is empty");
    }
    if p.snap == 0 || p.door_width == 0 || p.min_room_size == 0 {
        return bad("snap, door_width and min_room_size must be positive");
    }
    if p.min_room_size < p.door_width + 2 {
        return bad("min_room_size must leave room for a doorway");
    }
    if !(p.resolution > 0.0) {
        return bad("resolution must be positive");
    }
    Ok(())
}

/// Generates a plan; a pure function of `(seed, params)`.
pub fn generate_floorplan(seed: u64, params: &PlanParams) -> Result<FloorPlan> {
    validate(params)?;
    let mut rng = rng::seeded(seed);
    let (w, h) = (params.width, params.height);

    let mut margin = || rng.random_range(params.margin.0..=params.margin.1);
    let (ml, mr, mb, mt) = (margin(), margin(), margin(), margin());
    let min_side = params.min_room_size + 2;
    if ml + mr + min_side > w || mb + mt + min_side > h {
        return Err(Error::InvalidParam(format!(
            "a {w}x{h} canvas cannot hold a room of side {} with margins",
            params.min_room_size
        )));
    }
    let footprint = Rect {
        x0: ml,
        y0: mb,
        x1: w - 1 - mr,
        y1: h - 1 - mt,
    };

    let interior = Rect {
        x0: footprint.x0 + 1,
        y0: footprint.y0 + 1,
        x1: footprint.x1 - 1,
        y1: footprint.y1 - 1,
    };
    let target = rng.random_range(params.min_rooms..=params.max_rooms);
    let mut leaves = vec![interior];
    let mut walls: Vec<WallSegment> = Vec::new();

    while leaves.len() < target {
        let options: Vec<(usize, Vec<(Axis, usize)>)> = leaves
            .iter()
            .enumerate()
            .map(|(i, r)| (i, split_options(r, params)))
            .filter(|(_, o)| !o.is_empty())
            .collect();
        if options.is_empty() {
            break;
        }
        // favour large leaves so rooms stay balanced
        let total: usize = options.iter().map(|(i, _)| leaves[*i].area()).sum();
        let mut pick = rng.random_range(0..total);
        let (idx, cuts) = options
            .iter()
            .find(|(i, _)| {
                let a = leaves[*i].area();
                if pick < a {
                    true
                } else {
                    pick -= a;
                    false
                }
            })
            .expect("weighted pick within total");
        let leaf = leaves[*idx];
        let (w_leaf, h_leaf) = (leaf.width() as f64, leaf.height() as f64);
        let preferred = if w_leaf > 1.25 * h_leaf {
            Some(Axis::Vertical)
        } else if h_leaf > 1.25 * w_leaf {
            Some(Axis::Horizontal)
        } else {
            None
        };
        let pool: Vec<&(Axis, usize)> = match preferred {
            Some(a) if cuts.iter().any(|c| c.0 == a) => cuts.iter().filter(|c| c.0 == a).collect(),
            _ => cuts.iter().collect(),
        };
        let &(axis, at) = pool[rng.random_range(0..pool.len())];
        let (a, b, seg) = match axis {
            Axis::Vertical => (
                Rect { x1: at - 1, ..leaf },
                Rect { x0: at + 1, ..leaf },
                WallSegment {
                    axis,
                    at,
                    from: leaf.y0,
                    to: leaf.y1,
                },
            ),
            Axis::Horizontal => (
                Rect { y1: at - 1, ..leaf },
                Rect { y0: at + 1, ..leaf },
                WallSegment {
                    axis,
                    at,
                    from: leaf.x0,
                    to: leaf.x1,
                },
            ),
        };
        leaves[*idx] = a;
        leaves.insert(*idx + 1, b);
        walls.push(seg);
    }
    if leaves.len() < params.min_rooms {
        return Err(Error::InvalidParam(format!(
            "only {} rooms fit, {} requested",
            leaves.len(),
            params.min_rooms
        )));
    }

    let mut occupied = vec![false; w * h];
    for y in footprint.y0..=footprint.y1 {
        for x in footprint.x0..=footprint.x1 {
            if x == footprint.x0 || x == footprint.x1 || y == footprint.y0 || y == footprint.y1 {
                occupied[y * w + x] = true;
            }
        }
    }
    for s in &walls {
        for t in s.from..=s.to {
            let (x, y) = s.cell(t);
            occupied[y * w + x] = true;
        }
    }

    let mut doorways = Vec::with_capacity(walls.len());
    for s in &walls {
        let door = carve_doorway(s, params.door_width, &occupied, w, &mut rng).ok_or_else(|| {
            Error::InvalidParam("no room for a doorway on a split wall".into())
        })?;
        for k in 0..door.width {
            let (x, y) = s.cell(s.along(&door) + k);
            occupied[y * w + x] = false;
        }
        doorways.push(door);
    }

    let outside = (0..w * h)
        .map(|i| !footprint.contains(i % w, i / w))
        .collect();
    let mut plan = FloorPlan {
        width: w,
        height: h,
        resolution: params.resolution,
        occupied,
        footprint,
        outside,
        rooms: leaves,
        doorways,
    };
    let cutouts = rng.random_range(0..=params.max_cutouts);
    let mut order: Vec<usize> = (0..plan.rooms.len()).collect();
    order.shuffle(&mut rng);
    let mut removed = Vec::new();
    for idx in order {
        if removed.len() == cutouts || plan.rooms.len() - removed.len() <= params.min_rooms.max(2) {
            break;
        }
        let room = plan.rooms[idx];
        let touches = room.x0 == footprint.x0 + 1
            || room.x1 + 1 == footprint.x1
            || room.y0 == footprint.y0 + 1
            || room.y1 + 1 == footprint.y1;
        if !touches {
            continue;
        }
        if let Some(next) = plan.without_room(&room) {
            plan = next;
            removed.push(idx);
        }
    }
    removed.sort_unstable();
    for idx in removed.into_iter().rev() {
        plan.rooms.remove(idx);
    }
    Ok(plan)
}

impl FloorPlan {
    /// The plan with `room` cut out of the house, or `None` when that would
    /// disconnect it or shrink its bounding rectangle.
    fn without_room(&self, room: &Rect) -> Option<FloorPlan> {
        let (w, h) = (self.width, self.height);
        let mut next = self.clone();
        let in_room = |x: usize, y: usize| room.contains(x, y);
        let touches_room = |x: usize, y: usize| {
            in_room(x.wrapping_sub(1), y)
                || in_room(x + 1, y)
                || in_room(x, y.wrapping_sub(1))
                || in_room(x, y + 1)
        };
        // close every doorway into the room
        next.doorways.retain(|d| {
            let cells: Vec<(usize, usize)> = (0..d.width)
                .map(|k| match d.axis {
                    Axis::Vertical => (d.x, d.y + k),
                    Axis::Horizontal => (d.x + k, d.y),
                })
                .collect();
            if cells.iter().any(|&(x, y)| touches_room(x, y)) {
                for (x, y) in cells {
                    next.occupied[y * w + x] = true;
                }
                false
            } else {
                true
            }
        });
        for y in room.y0..=room.y1 {
            for x in room.x0..=room.x1 {
                next.outside[y * w + x] = true;
            }
        }
        // walls survive only next to remaining floor
        let free = |p: &FloorPlan, x: usize, y: usize| !p.outside[y * w + x] && !p.occupied[y * w + x];
        let mut drop = Vec::new();
        for y in 0..h {
            for x in 0..w {
                if next.outside[y * w + x] || !next.occupied[y * w + x] {
                    continue;
                }
                let near_floor = (y.saturating_sub(1)..=(y + 1).min(h - 1)).any(|ny| {
                    (x.saturating_sub(1)..=(x + 1).min(w - 1)).any(|nx| free(&next, nx, ny))
                });
                if !near_floor {
                    drop.push(y * w + x);
                }
            }
        }
        for i in drop {
            next.occupied[i] = false;
            next.outside[i] = true;
        }
        let f = self.footprint;
        let spans = |horizontal: bool, at: usize| {
            let len = if horizontal { f.x1 - f.x0 + 1 } else { f.y1 - f.y0 + 1 };
            (0..len).any(|k| {
                let (x, y) = if horizontal { (f.x0 + k, at) } else { (at, f.y0 + k) };
                !next.outside[y * w + x]
            })
        };
        let keeps_extent = spans(true, f.y0) && spans(true, f.y1) && spans(false, f.x0) && spans(false, f.x1);
        (keeps_extent && next.is_connected()).then_some(next)
    }
}

impl WallSegment {
    fn cell(&self, t: usize) -> (usize, usize) {
        match self.axis {
            Axis::Vertical => (self.at, t),
            Axis::Horizontal => (t, self.at),
        }
    }

    fn along(&self, d: &Doorway) -> usize {
        match self.axis {
            Axis::Vertical => d.y,
            Axis::Horizontal => d.x,
        }
    }
}

fn split_options(r: &Rect, p: &PlanParams) -> Vec<(Axis, usize)> {
    let mut out = Vec::new();
    let m = p.min_room_size;
    // a wall at `at` leaves [lo, at-1] and [at+1, hi], each at least m wide
    for (axis, lo, hi) in [(Axis::Vertical, r.x0, r.x1), (Axis::Horizontal, r.y0, r.y1)] {
        if hi < lo + 2 * m {
            continue;
        }
        for at in (lo + m)..=(hi - m) {
            if at % p.snap == 0 {
                out.push((axis, at));
            }
        }
    }
    out
}

fn carve_doorway(
    s: &WallSegment,
    width: usize,
    occupied: &[bool],
    w: usize,
    rng: &mut rng::Rng,
) -> Option<Doorway> {
    let open = |t: usize| -> bool {
        let (x, y) = s.cell(t);
        let (a, b) = match s.axis {
            Axis::Vertical => ((x - 1, y), (x + 1, y)),
            Axis::Horizontal => ((x, y - 1), (x, y + 1)),
        };
        !occupied[a.1 * w + a.0] && !occupied[b.1 * w + b.0]
    };
    for width in (1..=width).rev() {
        let starts: Vec<usize> = (s.from..=s.to)
            .filter(|&t| t + width - 1 <= s.to && (t..t + width).all(open))
            .collect();
        if starts.is_empty() {
            continue;
        }
        let t = starts[rng.random_range(0..starts.len())];
        let (x, y) = s.cell(t);
        return Some(Doorway {
            x,
            y,
            axis: s.axis,
            width,
        });
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_in_seed() {
        let p = PlanParams::default();
        assert_eq!(generate_floorplan(1, &p).unwrap(), generate_floorplan(1, &p).unwrap());
        assert_ne!(
            generate_floorplan(1, &p).unwrap().occupied,
            generate_floorplan(2, &p).unwrap().occupied
        );
    }

    #[test]
    fn single_room_has_no_interior_walls() {
        let p = PlanParams {
            min_rooms: 1,
            max_rooms: 1,
            ..PlanParams::default()
        };
        let plan = generate_floorplan(5, &p).unwrap();
        assert_eq!(plan.rooms.len(), 1);
        assert!(plan.doorways.is_empty());
        let f = plan.footprint;
        for y in f.y0..=f.y1 {
            for x in f.x0..=f.x1 {
                let boundary = x == f.x0 || x == f.x1 || y == f.y0 || y == f.y1;
                assert_eq!(plan.is_occupied(x, y), boundary, "cell ({x},{y})");
            }
        }
    }

    #[test]
    fn unsatisfiable_room_count_is_an_error() {
        let p = PlanParams {
            width: 20,
            height: 20,
            min_rooms: 8,
            max_rooms: 8,
            ..PlanParams::default()
        };
        assert!(matches!(generate_floorplan(0, &p), Err(Error::InvalidParam(_))));
        let p = PlanParams {
            min_rooms: 3,
            max_rooms: 2,
            ..PlanParams::default()
        };
        assert!(generate_floorplan(0, &p).is_err());
    }

    #[test]
    fn split_walls_respect_snap() {
        let p = PlanStyle::A.params();
        let plan = generate_floorplan(11, &p).unwrap();
        for d in &plan.doorways {
            let at = match d.axis {
                Axis::Vertical => d.x,
                Axis::Horizontal => d.y,
            };
            assert_eq!(at % p.snap, 0);
        }
    }

    #[test]
    fn both_styles_render_consistently() {
        for style in [PlanStyle::A, PlanStyle::B] {
            let plan = generate_floorplan(3, &style.params()).unwrap();
            let t = plan.render();
            let walls = plan.occupied.iter().filter(|&&o| o).count();
            assert_eq!(t.count(Ternary::Occupied), walls);
            assert!(plan.is_connected());
        }
    }

    #[test]
    fn cutouts_keep_house_closed_and_spanning() {
        let p = PlanStyle::A.params();
        let mut cut = 0;
        for seed in 0..200 {
            let plan = generate_floorplan(seed, &p).unwrap();
            let (w, h) = (plan.width, plan.height);
            let outside = plan.outside.iter().filter(|&&o| o).count();
            if outside > 0 {
                cut += 1;
            }
            assert!(plan.is_connected(), "seed {seed}");
            for y in 0..h {
                for x in 0..w {
                    if plan.is_inside(x, y) {
                        continue;
                    }
                    assert!(!plan.is_occupied(x, y));
                    // no floor cell may see the outside directly
                    for (dx, dy) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1), (-1, -1), (1, 1), (-1, 1), (1, -1)] {
                        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                        if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h {
                            assert!(!plan.is_free(nx as usize, ny as usize), "seed {seed} ({x},{y})");
                        }
                    }
                }
            }
            let f = plan.footprint;
            assert!((f.x0..=f.x1).any(|x| plan.is_inside(x, f.y0)));
            assert!((f.x0..=f.x1).any(|x| plan.is_inside(x, f.y1)));
            assert!((f.y0..=f.y1).any(|y| plan.is_inside(f.x0, y)));
            assert!((f.y0..=f.y1).any(|y| plan.is_inside(f.x1, y)));
        }
        assert!(cut > 50, "only {cut} plans had cutouts");
    }
}
