use crate::error::{Error, Result};
use crate::gridmap::{discretize_output, OccupancyGrid, Ternary, TernaryMap};
use crate::neuralnet::Tensor;
use crate::rng::Rng;

use super::network::Generator;

/// `(1, 2, H, W)` tensor: channel 0 the ternary values, channel 1 the mask.
pub fn pack_input(map: &TernaryMap, size: usize) -> Result<Tensor> {
    if map.width() != size || map.height() != size {
        return Err(Error::Shape(format!(
            "network input must be {size}x{size}, map is {}x{}",
            map.width(),
            map.height()
        )));
    }
    let mut data: Vec<f64> = map.values().collect();
    data.extend(map.mask().values());
    Tensor::from_vec([1, 2, size, size], data)
}

/// Folds a `(1, 2, H, W)` network output back to a ternary map.
pub fn unpack_output(t: &Tensor) -> Result<TernaryMap> {
    let [n, c, h, w] = t.shape();
    if n != 1 || c != 2 {
        return Err(Error::Shape(format!("expected (1, 2, H, W), got {:?}", t.shape())));
    }
    discretize_output(w, h, t.plane(0, 0), t.plane(0, 1))
}

/// Samples a completion. With `stochastic` the decoder dropout is live and
/// draws from `rng`; otherwise the result is a pure function of the weights
/// and the input.
pub fn generate(g: &Generator, partial: &TernaryMap, rng: &mut Rng, stochastic: bool) -> Result<TernaryMap> {
    let x = pack_input(partial, g.config.size)?;
    let (y, _) = g.forward(&x, stochastic.then_some(rng))?;
    unpack_output(&y)
}

/// Where a `field x field` window sits on a map: top-left corner, possibly
/// negative when the map is smaller than the field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropWindow {
    pub x0: isize,
    pub y0: isize,
    pub field: usize,
}

/// Window centred on the bounding box of searched cells, clamped to the map.
pub fn crop_window(map: &TernaryMap, field: usize) -> Result<CropWindow> {
    let (w, h) = (map.width(), map.height());
    let mut bbox: Option<(usize, usize, usize, usize)> = None;
    for y in 0..h {
        for x in 0..w {
            if map.get(x, y) != Ternary::Unsearched {
                bbox = Some(match bbox {
                    None => (x, y, x, y),
                    Some((a, b, c, d)) => (a.min(x), b.min(y), c.max(x), d.max(y)),
                });
            }
        }
    }
    let (xmin, ymin, xmax, ymax) = bbox.unwrap_or((0, 0, w.saturating_sub(1), h.saturating_sub(1)));
    let (bw, bh) = (xmax - xmin + 1, ymax - ymin + 1);
    if bbox.is_some() && (bw > field || bh > field) {
        return Err(Error::RegionTooLarge {
            width: bw,
            height: bh,
            field,
        });
    }
    let place = |lo: usize, hi: usize, extent: usize| -> isize {
        let f = field as isize;
        let centre = (lo + hi + 1) as isize / 2;
        if extent as isize <= f {
            // map narrower than the field: centre the map inside the window
            -((f - extent as isize) / 2)
        } else {
            (centre - f / 2).clamp(0, extent as isize - f)
        }
    };
    Ok(CropWindow {
        x0: place(xmin, xmax, w),
        y0: place(ymin, ymax, h),
        field,
    })
}

/// Cuts the window out of `map`; cells beyond the map are unsearched.
pub fn extract_window(map: &TernaryMap, win: CropWindow) -> TernaryMap {
    let mut out = TernaryMap::filled(win.field, win.field, Ternary::Unsearched);
    for wy in 0..win.field {
        for wx in 0..win.field {
            let (x, y) = (win.x0 + wx as isize, win.y0 + wy as isize);
            if x >= 0 && y >= 0 && (x as usize) < map.width() && (y as usize) < map.height() {
                out.set(wx, wy, map.get(x as usize, y as usize));
            }
        }
    }
    out
}

/// Writes a window back into a copy of `map`; cells outside the window keep
/// their input value.
pub fn paste_window(map: &TernaryMap, patch: &TernaryMap, win: CropWindow) -> TernaryMap {
    let mut out = map.clone();
    for wy in 0..win.field {
        for wx in 0..win.field {
            let (x, y) = (win.x0 + wx as isize, win.y0 + wy as isize);
            if x >= 0 && y >= 0 && (x as usize) < map.width() && (y as usize) < map.height() {
                out.set(x as usize, y as usize, patch.get(wx, wy));
            }
        }
    }
    out
}

/// Crops around the searched region, runs `complete` on the window and pastes
/// the result back.
pub fn complete_with(
    map: &TernaryMap,
    field: usize,
    complete: impl FnOnce(&TernaryMap) -> Result<TernaryMap>,
) -> Result<TernaryMap> {
    let win = crop_window(map, field)?;
    let patch = complete(&extract_window(map, win))?;
    Ok(paste_window(map, &patch, win))
}

/// Completes a ternary map of any size through the network's fixed field.
pub fn complete_ternary(g: &Generator, map: &TernaryMap, rng: &mut Rng, stochastic: bool) -> Result<TernaryMap> {
    complete_with(map, g.config.size, |w| generate(g, w, rng, stochastic))
}

/// Completes a filter map: ternary encoding, crop, generate, paste.
pub fn complete_map(g: &Generator, grid: &OccupancyGrid, rng: &mut Rng, stochastic: bool) -> Result<TernaryMap> {
    complete_ternary(g, &grid.to_ternary(), rng, stochastic)
}
