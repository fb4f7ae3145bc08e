//! Binary PGM (P5, maxval 255) map files with a `key: value` sidecar.
//!
//! Pixel codebook: 0 = free, 128 = unsearched, 255 = occupied. Any other
//! byte is rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Ternary, TernaryMap};
use crate::error::{Error, Result};
use crate::pose::Pose2;

/// Sidecar metadata stored next to every map image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapMeta {
    pub resolution: f64,
    pub origin: Pose2,
    pub occupied_thresh: f64,
    pub free_thresh: f64,
    /// Free-form extra keys, written in sorted order.
    pub extra: BTreeMap<String, String>,
}

impl Default for MapMeta {
    fn default() -> Self {
        Self {
            resolution: 1.0,
            origin: Pose2::default(),
            occupied_thresh: 0.5,
            free_thresh: 0.5,
            extra: BTreeMap::new(),
        }
    }
}

impl MapMeta {
    pub fn with_resolution(resolution: f64) -> Self {
        Self {
            resolution,
            ..Default::default()
        }
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "resolution: {}", self.resolution);
        let _ = writeln!(s, "origin_x: {}", self.origin.x);
        let _ = writeln!(s, "origin_y: {}", self.origin.y);
        let _ = writeln!(s, "origin_theta: {}", self.origin.theta);
        let _ = writeln!(s, "occupied_thresh: {}", self.occupied_thresh);
        let _ = writeln!(s, "free_thresh: {}", self.free_thresh);
        for (k, v) in &self.extra {
            let _ = writeln!(s, "{k}: {v}");
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut meta = MapMeta::default();
        let mut offset = 0;
        for line in text.split_inclusive('\n') {
            let start = offset;
            offset += line.len();
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once(':').ok_or_else(|| Error::Format {
                offset: start,
                reason: format!("expected `key: value`, got {line:?}"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let num = || {
                value.parse::<f64>().map_err(|_| Error::Format {
                    offset: start,
                    reason: format!("`{key}` is not a number: {value:?}"),
                })
            };
            match key {
                "resolution" => meta.resolution = num()?,
                "origin_x" => meta.origin.x = num()?,
                "origin_y" => meta.origin.y = num()?,
                "origin_theta" => meta.origin.theta = num()?,
                "occupied_thresh" => meta.occupied_thresh = num()?,
                "free_thresh" => meta.free_thresh = num()?,
                _ => {
                    meta.extra.insert(key.to_string(), value.to_string());
                }
            }
        }
        Ok(meta)
    }
}

pub fn encode_pgm(map: &TernaryMap) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", map.width(), map.height());
    let mut out = Vec::with_capacity(header.len() + map.len());
    out.extend_from_slice(header.as_bytes());
    out.extend(map.cells().iter().map(|c| c.pixel()));
    out
}

pub fn decode_pgm(bytes: &[u8]) -> Result<TernaryMap> {
    let mut pos = 0usize;
    let magic = next_token(bytes, &mut pos)?;
    if magic.1 != b"P5" {
        return Err(Error::Format {
            offset: magic.0,
            reason: "not a binary PGM (expected P5)".into(),
        });
    }
    let width = header_number(bytes, &mut pos)?;
    let height = header_number(bytes, &mut pos)?;
    let maxval = header_number(bytes, &mut pos)?;
    if maxval != 255 {
        return Err(Error::Format {
            offset: pos,
            reason: format!("maxval {maxval} unsupported (expected 255)"),
        });
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => {
            return Err(Error::Format {
                offset: pos,
                reason: "missing whitespace after header".into(),
            })
        }
    }
    let n = width * height;
    let raster = &bytes[pos..];
    if raster.len() != n {
        return Err(Error::Format {
            offset: pos + raster.len().min(n),
            reason: format!("expected {n} pixel bytes, found {}", raster.len()),
        });
    }
    let cells = raster
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            Ternary::from_pixel(p).ok_or_else(|| Error::Format {
                offset: pos + i,
                reason: format!("illegal ternary pixel {p}"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    TernaryMap::from_cells(width, height, cells)
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<(usize, &'a [u8])> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::Format {
            offset: start,
            reason: "truncated header".into(),
        });
    }
    Ok((start, &bytes[start..*pos]))
}

fn header_number(bytes: &[u8], pos: &mut usize) -> Result<usize> {
    let (start, tok) = next_token(bytes, pos)?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Format {
            offset: start,
            reason: format!("bad header number {:?}", String::from_utf8_lossy(tok)),
        })
}

fn meta_path(path: &Path) -> PathBuf {
    path.with_extension("meta")
}

/// Writes `path` (PGM) and its `.meta` sidecar.
pub fn save_map(map: &TernaryMap, meta: &MapMeta, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, encode_pgm(map)).map_err(|e| Error::io(path, e))?;
    let mp = meta_path(path);
    fs::write(&mp, meta.render()).map_err(|e| Error::io(&mp, e))
}

/// Reads a PGM map; a missing sidecar yields default metadata.
pub fn load_map(path: &Path) -> Result<(TernaryMap, MapMeta)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let map = decode_pgm(&bytes)?;
    let mp = meta_path(path);
    let meta = match fs::read_to_string(&mp) {
        Ok(text) => MapMeta::parse(&text)?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => MapMeta::default(),
        Err(e) => return Err(Error::io(&mp, e)),
    };
    Ok((map, meta))
}
