//! Occupancy grids and their ternary/mask image encodings.
//!
//! A grid stores clamped log-odds per cell. The network never sees
//! probabilities directly: a grid is exported as a three-valued image
//! (free 0.0, unsearched 0.5, occupied 1.0) plus a binary mask of the
//! unsearched cells, and network outputs are folded back into the same
//! three values by [`discretize_output`].

mod pgm;
pub mod raytrace;

pub use pgm::{decode_pgm, encode_pgm, load_map, save_map, MapMeta};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::Pose2;

pub const DEFAULT_L_MAX: f64 = 10.0;

/// Standard logistic of a log-odds value.
#[inline]
pub fn logistic(l: f64) -> f64 {
    1.0 / (1.0 + (-l).exp())
}

/// Per-cell log-odds occupancy map, row-major with `(0, 0)` at `origin`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    origin: Pose2,
    l_max: f64,
    cells: Vec<f64>,
}

impl OccupancyGrid {
    /// A fresh grid with every cell unsearched (log-odds exactly zero).
    pub fn new(width: usize, height: usize, resolution: f64, origin: Pose2) -> Self {
        Self::with_clamp(width, height, resolution, origin, DEFAULT_L_MAX)
    }

    pub fn with_clamp(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Pose2,
        l_max: f64,
    ) -> Self {
        assert!(resolution > 0.0, "resolution must be positive");
        assert!(l_max > 0.0, "log-odds clamp must be positive");
        Self {
            width,
            height,
            resolution,
            origin,
            l_max,
            cells: vec![0.0; width * height],
        }
    }

    /// Builds a grid from raw log-odds, clamping each value into `[-l_max, l_max]`.
    pub fn from_log_odds(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Pose2,
        l_max: f64,
        cells: Vec<f64>,
    ) -> Result<Self> {
        if cells.len() != width * height {
            return Err(Error::Shape(format!(
                "{} log-odds values for a {width}x{height} grid",
                cells.len()
            )));
        }
        if cells.iter().any(|l| !l.is_finite()) {
            return Err(Error::NonFinite("log-odds cell".into()));
        }
        let mut g = Self::with_clamp(width, height, resolution, origin, l_max);
        for (dst, src) in g.cells.iter_mut().zip(cells) {
            *dst = src.clamp(-l_max, l_max);
        }
        Ok(g)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> Pose2 {
        self.origin
    }

    pub fn l_max(&self) -> f64 {
        self.l_max
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn log_odds(&self) -> &[f64] {
        &self.cells
    }

    pub fn index(&self, cx: usize, cy: usize) -> usize {
        cy * self.width + cx
    }

    /// Occupancy probability of a cell.
    pub fn prob(&self, index: usize) -> Result<f64> {
        self.cells
            .get(index)
            .map(|&l| logistic(l))
            .ok_or(Error::OutOfBounds {
                index,
                width: self.width,
                height: self.height,
            })
    }

    /// Adds a log-odds increment to a cell and clamps the result.
    pub fn update(&mut self, index: usize, delta: f64) {
        let l = &mut self.cells[index];
        *l = (*l + delta).clamp(-self.l_max, self.l_max);
    }

    /// Cell containing a world point, or `None` outside the grid.
    ///
    /// The origin heading is ignored; grids are axis-aligned with the world frame.
    pub fn world_to_cell(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fx = ((x - self.origin.x) / self.resolution).floor();
        let fy = ((y - self.origin.y) / self.resolution).floor();
        if fx < 0.0 || fy < 0.0 || fx >= self.width as f64 || fy >= self.height as f64 {
            return None;
        }
        Some((fx as usize, fy as usize))
    }

    pub fn lattice(&self) -> raytrace::Lattice {
        raytrace::Lattice {
            width: self.width,
            height: self.height,
            resolution: self.resolution,
            origin_x: self.origin.x,
            origin_y: self.origin.y,
        }
    }

    pub fn cell_center(&self, cx: usize, cy: usize) -> (f64, f64) {
        (
            self.origin.x + (cx as f64 + 0.5) * self.resolution,
            self.origin.y + (cy as f64 + 0.5) * self.resolution,
        )
    }

    pub fn to_ternary(&self) -> TernaryMap {
        TernaryMap {
            width: self.width,
            height: self.height,
            cells: self.cells.iter().map(|&l| Ternary::from_log_odds(l)).collect(),
        }
    }

    pub fn to_mask(&self) -> MaskImage {
        MaskImage {
            width: self.width,
            height: self.height,
            unsearched: self.cells.iter().map(|&l| l == 0.0).collect(),
        }
    }
}

/// One cell of the three-valued map image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ternary {
    Free,
    Unsearched,
    Occupied,
}

impl Ternary {
    pub const ALL: [Ternary; 3] = [Ternary::Free, Ternary::Unsearched, Ternary::Occupied];

    pub fn value(self) -> f64 {
        match self {
            Ternary::Free => 0.0,
            Ternary::Unsearched => 0.5,
            Ternary::Occupied => 1.0,
        }
    }

    /// Exact inverse of [`Ternary::value`]; any other real is rejected.
    pub fn from_value(v: f64) -> Option<Self> {
        if v == 0.0 {
            Some(Ternary::Free)
        } else if v == 0.5 {
            Some(Ternary::Unsearched)
        } else if v == 1.0 {
            Some(Ternary::Occupied)
        } else {
            None
        }
    }

    /// Threshold a log-odds value at p = 0.5; only an untouched cell (l == 0) is unsearched.
    pub fn from_log_odds(l: f64) -> Self {
        if l > 0.0 {
            Ternary::Occupied
        } else if l < 0.0 {
            Ternary::Free
        } else {
            Ternary::Unsearched
        }
    }

    pub fn pixel(self) -> u8 {
        match self {
            Ternary::Free => 0,
            Ternary::Unsearched => 128,
            Ternary::Occupied => 255,
        }
    }

    pub fn from_pixel(p: u8) -> Option<Self> {
        match p {
            0 => Some(Ternary::Free),
            128 => Some(Ternary::Unsearched),
            255 => Some(Ternary::Occupied),
            _ => None,
        }
    }
}

/// Three-valued map image exchanged with the completion network.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TernaryMap {
    width: usize,
    height: usize,
    cells: Vec<Ternary>,
}

impl TernaryMap {
    pub fn filled(width: usize, height: usize, value: Ternary) -> Self {
        Self {
            width,
            height,
            cells: vec![value; width * height],
        }
    }

    pub fn from_cells(width: usize, height: usize, cells: Vec<Ternary>) -> Result<Self> {
        if cells.len() != width * height {
            return Err(Error::Shape(format!(
                "{} cells for a {width}x{height} map",
                cells.len()
            )));
        }
        Ok(Self {
            width,
            height,
            cells,
        })
    }

    /// Builds a map from real values, each of which must be exactly 0.0, 0.5 or 1.0.
    pub fn from_values(width: usize, height: usize, values: &[f64]) -> Result<Self> {
        let cells = values
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                Ternary::from_value(v).ok_or_else(|| {
                    Error::InvalidParam(format!("value {v} at cell {i} is not a ternary level"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_cells(width, height, cells)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[Ternary] {
        &self.cells
    }

    pub fn cells_mut(&mut self) -> &mut [Ternary] {
        &mut self.cells
    }

    pub fn get(&self, x: usize, y: usize) -> Ternary {
        self.cells[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: Ternary) {
        self.cells[y * self.width + x] = v;
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.cells.iter().map(|c| c.value())
    }

    pub fn mask(&self) -> MaskImage {
        MaskImage {
            width: self.width,
            height: self.height,
            unsearched: self.cells.iter().map(|&c| c == Ternary::Unsearched).collect(),
        }
    }

    pub fn count(&self, v: Ternary) -> usize {
        self.cells.iter().filter(|&&c| c == v).count()
    }

    pub fn unsearched_fraction(&self) -> f64 {
        if self.cells.is_empty() {
            return 0.0;
        }
        self.count(Ternary::Unsearched) as f64 / self.cells.len() as f64
    }

    /// Nearest-neighbour resampling to a new size.
    pub fn resize_nearest(&self, width: usize, height: usize) -> TernaryMap {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let mut cells = Vec::with_capacity(width * height);
        for y in 0..height {
            let sy = (y * self.height) / height.max(1);
            for x in 0..width {
                let sx = (x * self.width) / width.max(1);
                cells.push(self.get(sx, sy));
            }
        }
        TernaryMap {
            width,
            height,
            cells,
        }
    }
}

/// Binary image marking unsearched cells.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskImage {
    width: usize,
    height: usize,
    unsearched: Vec<bool>,
}

impl MaskImage {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn is_unsearched(&self, index: usize) -> bool {
        self.unsearched[index]
    }

    /// Mask levels as reals: 1.0 for unsearched, 0.0 otherwise.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.unsearched.iter().map(|&u| if u { 1.0 } else { 0.0 })
    }
}

/// Folds continuous network outputs back into a ternary map.
///
/// A cell whose mask output is at least 0.5 is unsearched; otherwise the
/// image output decides occupied (>= 0.5) or free.
pub fn discretize_output(
    width: usize,
    height: usize,
    image: &[f64],
    mask: &[f64],
) -> Result<TernaryMap> {
    let n = width * height;
    if image.len() != n || mask.len() != n {
        return Err(Error::Shape(format!(
            "image {} / mask {} values for a {width}x{height} map",
            image.len(),
            mask.len()
        )));
    }
    let cells = image
        .iter()
        .zip(mask)
        .map(|(&img, &msk)| {
            if msk >= 0.5 {
                Ternary::Unsearched
            } else if img >= 0.5 {
                Ternary::Occupied
            } else {
                Ternary::Free
            }
        })
        .collect();
    Ok(TernaryMap {
        width,
        height,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid_from(l: &[f64]) -> OccupancyGrid {
        OccupancyGrid::from_log_odds(l.len(), 1, 0.1, Pose2::default(), 10.0, l.to_vec()).unwrap()
    }

    fn log_odds_of(p: f64) -> f64 {
        (p / (1.0 - p)).ln()
    }

    #[test]
    fn prob_matches_logistic() {
        let g = grid_from(&[0.0, 10.0, -10.0]);
        assert_eq!(g.prob(0).unwrap(), 0.5);
        assert!((g.prob(1).unwrap() - 0.999_954_602_131_297_6).abs() < 1e-15);
        assert!((g.prob(2).unwrap() - 4.539_786_870_243_439e-5).abs() < 1e-18);
        assert!(matches!(g.prob(3), Err(Error::OutOfBounds { index: 3, .. })));
    }

    #[test]
    fn ternary_branches() {
        let g = grid_from(&[log_odds_of(0.9), 0.0, log_odds_of(0.2)]);
        let t = g.to_ternary();
        assert_eq!(t.values().collect::<Vec<_>>(), vec![1.0, 0.5, 0.0]);
        let m = g.to_mask();
        assert_eq!(m.values().collect::<Vec<_>>(), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn fresh_grid_mask_is_all_ones() {
        let g = OccupancyGrid::new(5, 4, 0.1, Pose2::default());
        assert!(g.to_mask().values().all(|v| v == 1.0));
        assert_eq!(g.to_ternary().count(Ternary::Unsearched), 20);
    }

    #[test]
    fn updates_are_clamped() {
        let mut g = OccupancyGrid::new(1, 1, 0.1, Pose2::default());
        for _ in 0..100 {
            g.update(0, 0.9);
        }
        assert_eq!(g.log_odds()[0], 10.0);
        for _ in 0..100 {
            g.update(0, -0.4);
        }
        assert_eq!(g.log_odds()[0], -10.0);
    }

    #[test]
    fn discretize_branches() {
        let t = discretize_output(3, 1, &[0.8, 0.1, 0.2], &[0.3, 0.7, 0.3]).unwrap();
        assert_eq!(t.values().collect::<Vec<_>>(), vec![1.0, 0.5, 0.0]);
        // threshold is inclusive on both channels
        let t = discretize_output(2, 1, &[0.5, 0.9], &[0.0, 0.5]).unwrap();
        assert_eq!(t.cells(), &[Ternary::Occupied, Ternary::Unsearched]);
        assert!(discretize_output(2, 2, &[0.0; 4], &[0.0; 3]).is_err());
    }

    #[test]
    fn from_values_rejects_illegal_levels() {
        assert!(TernaryMap::from_values(2, 1, &[0.0, 0.25]).is_err());
        assert!(TernaryMap::from_values(2, 1, &[0.0, 1.0]).is_ok());
    }

    #[test]
    fn resize_nearest_upsamples_blocks() {
        let t = TernaryMap::from_values(2, 1, &[1.0, 0.0]).unwrap();
        let r = t.resize_nearest(4, 2);
        assert_eq!(
            r.values().collect::<Vec<_>>(),
            vec![1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]
        );
    }

    proptest! {
        #[test]
        fn mask_agrees_with_ternary(cells in proptest::collection::vec(
            prop_oneof![Just(0.0), -10.0f64..10.0], 1..200)) {
            let g = grid_from(&cells);
            let t = g.to_ternary();
            let m = g.to_mask();
            for i in 0..cells.len() {
                prop_assert_eq!(m.is_unsearched(i), t.cells()[i] == Ternary::Unsearched);
            }
        }

        #[test]
        fn prob_is_monotone(a in -10.0f64..10.0, b in -10.0f64..10.0) {
            prop_assume!(a < b);
            let g = grid_from(&[a, b]);
            prop_assert!(g.prob(0).unwrap() <= g.prob(1).unwrap());
        }
    }
}
