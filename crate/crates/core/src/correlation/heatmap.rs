//! Heat-map export of correlation maps.
//!
//! Each map is color-scaled to its own min/max, so a map with a strong peak
//! and a map of pure background are both readable; the scale is written to a
//! JSON sidecar next to the exported file.

use std::fs;
use std::io::Write;
use std::path::Path;

use image::{Rgb, RgbImage};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{CorrelationMap, ShiftRange};
use crate::error::{OseError, Result};
use crate::io::{sidecar_path, write_json};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeatmapFormat {
    Csv,
    Png,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapSidecar {
    pub shift_range: ShiftRange,
    /// Radians.
    pub rotation: f64,
    pub scale_min: f64,
    pub scale_max: f64,
}

/// Writes `map` as CSV (`dx,dy,value` rows) or as a color-mapped PNG, plus
/// the JSON sidecar.
pub fn export_heatmap(map: &CorrelationMap, path: &Path, format: HeatmapFormat) -> Result<HeatmapSidecar> {
    let (lo, hi) = map.min_max();
    match format {
        HeatmapFormat::Csv => write_csv(map, path)?,
        HeatmapFormat::Png => {
            render(map, lo, hi)
                .save(path)
                .map_err(|e| OseError::io(path, std::io::Error::other(e)))?;
        }
    }
    let sidecar = HeatmapSidecar {
        shift_range: map.shift_range(),
        rotation: map.rotation(),
        scale_min: lo,
        scale_max: hi,
    };
    write_json(&sidecar_path(path), &sidecar)?;
    Ok(sidecar)
}

fn write_csv(map: &CorrelationMap, path: &Path) -> Result<()> {
    let mut out = String::with_capacity(24 * map.values().len() + 16);
    out.push_str("dx,dy,value\n");
    for (dx, dy, v) in map.iter() {
        // `{}` on f64 prints the shortest string that parses back exactly.
        out.push_str(&format!("{dx},{dy},{v}\n"));
    }
    let mut f = fs::File::create(path).map_err(|e| OseError::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| OseError::io(path, e))
}

/// Reads a heat-map CSV written by [`export_heatmap`]. The rotation is taken
/// from the sidecar when present, otherwise 0.
pub fn read_heatmap_csv(path: &Path) -> Result<CorrelationMap> {
    let text = fs::read_to_string(path).map_err(|e| OseError::io(path, e))?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("dx,dy,value") {
        return Err(OseError::format(path, "missing `dx,dy,value` header"));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = || OseError::format(path, format!("bad row {}: {line:?}", i + 2));
        let mut parts = line.split(',');
        let dx: i64 = parts.next().and_then(|s| s.trim().parse().ok()).ok_or_else(bad)?;
        let dy: i64 = parts.next().and_then(|s| s.trim().parse().ok()).ok_or_else(bad)?;
        let v: f64 = parts.next().and_then(|s| s.trim().parse().ok()).ok_or_else(bad)?;
        rows.push((dx, dy, v));
    }
    let mx = rows.iter().map(|r| r.0.unsigned_abs()).max().unwrap_or(0) as usize;
    let my = rows.iter().map(|r| r.1.unsigned_abs()).max().unwrap_or(0) as usize;
    let range = ShiftRange::new(mx, my);
    if rows.len() != range.width() * range.height() {
        return Err(OseError::format(path, "rows do not cover a full shift grid"));
    }
    let mut values = Array2::from_elem((range.height(), range.width()), f64::NAN);
    for (dx, dy, v) in rows {
        values[[(dy + my as i64) as usize, (dx + mx as i64) as usize]] = v;
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(OseError::format(path, "duplicate or missing shifts"));
    }
    let rotation = fs::read_to_string(sidecar_path(path))
        .ok()
        .and_then(|s| serde_json::from_str::<HeatmapSidecar>(&s).ok())
        .map_or(0.0, |s| s.rotation);
    CorrelationMap::new(range, values, rotation)
}

/// Row `dy = -max_dy` at the top, column `dx = -max_dx` at the left.
fn render(map: &CorrelationMap, lo: f64, hi: f64) -> RgbImage {
    let (h, w) = map.values().dim();
    let span = if hi > lo { hi - lo } else { 1.0 };
    RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let t = (map.values()[[y as usize, x as usize]] - lo) / span;
        colormap(t)
    })
}

/// Perceptually ordered dark-to-bright ramp (black, purple, red, orange, pale yellow).
fn colormap(t: f64) -> Rgb<u8> {
    const STOPS: [[f64; 3]; 5] = [
        [0.0, 0.0, 4.0],
        [87.0, 16.0, 110.0],
        [188.0, 55.0, 84.0],
        [249.0, 142.0, 9.0],
        [252.0, 255.0, 164.0],
    ];
    let t = t.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let i = (t.floor() as usize).min(STOPS.len() - 2);
    let f = t - i as f64;
    let c = |k: usize| (STOPS[i][k] * (1.0 - f) + STOPS[i + 1][k] * f).round() as u8;
    Rgb([c(0), c(1), c(2)])
}
