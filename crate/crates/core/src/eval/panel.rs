//! Side-by-side map panels (condition | generated | ground truth).

use std::fs;
use std::io::BufWriter;
use std::path::Path;

use crate::error::{Error, Result};
use crate::gridmap::{save_map, MapMeta, Ternary, TernaryMap};

/// Gap between panel tiles, drawn as unsearched grey.
const GAP: usize = 2;

/// Lays maps out left to right, top-aligned.
pub fn panel(maps: &[&TernaryMap]) -> TernaryMap {
    let height = maps.iter().map(|m| m.height()).max().unwrap_or(0);
    let width = maps.iter().map(|m| m.width()).sum::<usize>() + GAP * maps.len().saturating_sub(1);
    let mut out = TernaryMap::filled(width, height, Ternary::Unsearched);
    let mut x0 = 0;
    for m in maps {
        for y in 0..m.height() {
            for x in 0..m.width() {
                out.set(x0 + x, y, m.get(x, y));
            }
        }
        x0 += m.width() + GAP;
    }
    out
}

/// Writes an 8-bit grayscale PNG with the PGM codebook.
pub fn write_png(map: &TernaryMap, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), map.width() as u32, map.height() as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    let pixels: Vec<u8> = map.cells().iter().map(|c| c.pixel()).collect();
    let to_io = |e: png::EncodingError| Error::io(path, std::io::Error::other(e));
    let mut w = enc.write_header().map_err(to_io)?;
    w.write_image_data(&pixels).map_err(to_io)?;
    w.finish().map_err(to_io)
}

/// `stem.pgm` (+ sidecar) and `stem.png` for a panel of `maps`.
pub fn save_panel(maps: &[&TernaryMap], dir: &Path, stem: &str, resolution: f64) -> Result<()> {
    let p = panel(maps);
    save_map(&p, &MapMeta::with_resolution(resolution), &dir.join(format!("{stem}.pgm")))?;
    write_png(&p, &dir.join(format!("{stem}.png")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiles_are_copied_with_grey_gaps() {
        let a = TernaryMap::filled(3, 2, Ternary::Occupied);
        let b = TernaryMap::filled(2, 3, Ternary::Free);
        let p = panel(&[&a, &b]);
        assert_eq!((p.width(), p.height()), (3 + GAP + 2, 3));
        assert_eq!(p.get(0, 0), Ternary::Occupied);
        assert_eq!(p.get(0, 2), Ternary::Unsearched);
        assert_eq!(p.get(3, 0), Ternary::Unsearched);
        assert_eq!(p.get(3 + GAP, 2), Ternary::Free);
    }

    #[test]
    fn png_decodes_to_codebook() {
        let dir = tempfile::tempdir().unwrap();
        let m = TernaryMap::from_cells(3, 1, vec![Ternary::Free, Ternary::Unsearched, Ternary::Occupied]).unwrap();
        let path = dir.path().join("m.png");
        write_png(&m, &path).unwrap();
        let dec = png::Decoder::new(std::io::BufReader::new(fs::File::open(&path).unwrap()));
        let mut r = dec.read_info().unwrap();
        let mut buf = vec![0; r.output_buffer_size().unwrap()];
        let info = r.next_frame(&mut buf).unwrap();
        assert_eq!((info.width, info.height), (3, 1));
        assert_eq!(&buf[..3], &[0, 128, 255]);
    }
}
