//! Synthetic partial maps: random rectangular patches reset to unsearched.

use rand::Rng as _;

use crate::gridmap::{Ternary, TernaryMap};
use crate::rng;

/// Side-length range of the rectangular patches, in cells.
pub const PATCH_SIDE: (usize, usize) = (4, 20);

/// Replaces a seeded union of rectangles covering `missing_fraction` of the
/// searched cells with unsearched. Occupied and free cells are never
/// swapped; the count of newly unsearched cells is exactly
/// `round(missing_fraction * searched)`, so the last patch may be partial.
pub fn degrade_map(full: &TernaryMap, missing_fraction: f64, seed: u64) -> TernaryMap {
    assert!(
        (0.0..=1.0).contains(&missing_fraction),
        "missing_fraction must lie in [0, 1]"
    );
    let mut out = full.clone();
    let searched: Vec<usize> = (0..full.len())
        .filter(|&i| full.cells()[i] != Ternary::Unsearched)
        .collect();
    let target = (missing_fraction * searched.len() as f64).round() as usize;
    if target == searched.len() {
        for &i in &searched {
            out.cells_mut()[i] = Ternary::Unsearched;
        }
        return out;
    }

    let (w, h) = (full.width(), full.height());
    let mut rng = rng::seeded(seed);
    let mut masked = 0;
    while masked < target {
        // anchor each patch on a still-searched cell so every patch makes progress
        let remaining: Vec<usize> = searched
            .iter()
            .copied()
            .filter(|&i| out.cells()[i] != Ternary::Unsearched)
            .collect();
        let anchor = remaining[rng.random_range(0..remaining.len())];
        let (ax, ay) = (anchor % w, anchor / w);
        let pw = rng.random_range(PATCH_SIDE.0..=PATCH_SIDE.1);
        let ph = rng.random_range(PATCH_SIDE.0..=PATCH_SIDE.1);
        let x0 = ax.saturating_sub(rng.random_range(0..pw));
        let y0 = ay.saturating_sub(rng.random_range(0..ph));
        'patch: for y in y0..(y0 + ph).min(h) {
            for x in x0..(x0 + pw).min(w) {
                let c = &mut out.cells_mut()[y * w + x];
                if *c != Ternary::Unsearched {
                    *c = Ternary::Unsearched;
                    masked += 1;
                    if masked == target {
                        break 'patch;
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simworld::floorplan::{generate_floorplan, PlanStyle};
    use proptest::prelude::*;

    fn sample() -> TernaryMap {
        generate_floorplan(4, &PlanStyle::B.params()).unwrap().render()
    }

    #[test]
    fn zero_fraction_is_identity() {
        let m = sample();
        assert_eq!(degrade_map(&m, 0.0, 9), m);
    }

    #[test]
    fn full_fraction_blanks_everything() {
        let m = sample();
        let d = degrade_map(&m, 1.0, 9);
        assert_eq!(d.count(Ternary::Unsearched), d.len());
    }

    #[test]
    fn masked_count_tracks_fraction() {
        let m = sample();
        let searched = m.len() - m.count(Ternary::Unsearched);
        let d = degrade_map(&m, 0.3, 1);
        let newly = d.count(Ternary::Unsearched) - m.count(Ternary::Unsearched);
        let expected = 0.3 * searched as f64;
        assert!((newly as f64 - expected).abs() <= 0.05 * expected);
        assert_eq!(d, degrade_map(&m, 0.3, 1));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn never_flips_searched_labels(frac in 0.0f64..=1.0, seed in 0u64..1000) {
            let m = sample();
            let d = degrade_map(&m, frac, seed);
            for (a, b) in m.cells().iter().zip(d.cells()) {
                prop_assert!(a == b || *b == Ternary::Unsearched);
            }
        }
    }
}
