//! Zero-normalized cross-correlation (ZNCC) of speckle images over integer
//! shifts and a rotation sweep.
//!
//! Shift convention: the coefficient at `(dx, dy)` pairs `a[y][x]` with
//! `b[y + dy][x + dx]`, so if `b` is `a` translated by `(+3, -2)` the peak
//! sits at `(+3, -2)`. Each coefficient is normalized over the overlap of
//! the two frames at that shift (minus any pixels masked out of `b`).

mod brute;
mod engine;
pub mod heatmap;
mod rotation;

use std::cmp::Ordering;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{OseError, Result};

pub use brute::brute_force_correlate;
pub use engine::{correlate_shifts, correlate_shifts_masked, Correlator};
pub use heatmap::{export_heatmap, read_heatmap_csv, HeatmapFormat, HeatmapSidecar};
pub use rotation::{match_with_rotation, match_with_rotation_map, rotate_image, rotation_candidates, RotationSearch};

/// Largest absolute shift searched along each axis, in pixels.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftRange {
    pub max_dx: usize,
    pub max_dy: usize,
}

impl ShiftRange {
    pub fn new(max_dx: usize, max_dy: usize) -> Self {
        Self { max_dx, max_dy }
    }

    pub fn square(max_shift: usize) -> Self {
        Self::new(max_shift, max_shift)
    }

    pub fn width(&self) -> usize {
        2 * self.max_dx + 1
    }

    pub fn height(&self) -> usize {
        2 * self.max_dy + 1
    }

    pub(crate) fn check(&self, width: usize, height: usize) -> Result<()> {
        if width < 4 * self.max_dx || height < 4 * self.max_dy {
            return Err(OseError::invalid(format!(
                "shift range ({}, {}) too large for a {width}x{height} frame; \
                 overlap normalization needs at least 4x the shift in each dimension",
                self.max_dx, self.max_dy
            )));
        }
        Ok(())
    }
}

/// Coefficients indexed by shift; `values[[dy + max_dy, dx + max_dx]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMap {
    shift_range: ShiftRange,
    values: Array2<f64>,
    /// Rotation (rad) applied to undo `b`'s orientation before shifting.
    rotation: f64,
}

impl CorrelationMap {
    pub fn new(shift_range: ShiftRange, values: Array2<f64>, rotation: f64) -> Result<Self> {
        if values.dim() != (shift_range.height(), shift_range.width()) {
            return Err(OseError::invalid(format!(
                "values shape {:?} does not match shift range {:?}",
                values.dim(),
                shift_range
            )));
        }
        Ok(Self {
            shift_range,
            values,
            rotation,
        })
    }

    pub fn shift_range(&self) -> ShiftRange {
        self.shift_range
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn rotation(&self) -> f64 {
        self.rotation
    }

    pub fn get(&self, dx: i64, dy: i64) -> Option<f64> {
        let x = dx + self.shift_range.max_dx as i64;
        let y = dy + self.shift_range.max_dy as i64;
        if x < 0 || y < 0 {
            return None;
        }
        self.values.get((y as usize, x as usize)).copied()
    }

    /// `(dx, dy, value)` in row-major order (dy outer, dx inner).
    pub fn iter(&self) -> impl Iterator<Item = (i64, i64, f64)> + '_ {
        let (mx, my) = (self.shift_range.max_dx as i64, self.shift_range.max_dy as i64);
        self.values
            .indexed_iter()
            .map(move |((y, x), &v)| (x as i64 - mx, y as i64 - my, v))
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub value: f64,
    pub dx: i64,
    pub dy: i64,
}

/// Best match over shifts and rotations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub peak: f64,
    pub dx: i64,
    pub dy: i64,
    /// Rotation of `b` relative to `a` (rad).
    pub rotation: f64,
    /// Mean of the map at the winning rotation, excluding a 5x5 window
    /// around the peak.
    pub off_peak_mean: f64,
    pub off_peak_std: f64,
}

impl CorrelationResult {
    /// Peak height above the background in units of background spread.
    pub fn peak_snr(&self) -> f64 {
        if self.off_peak_std > 0.0 {
            (self.peak - self.off_peak_mean) / self.off_peak_std
        } else {
            f64::INFINITY
        }
    }
}

/// Orders candidate peaks: higher value first, then smaller `|dx|+|dy|`,
/// then smaller `dy`, then smaller `dx`.
pub(crate) fn peak_order(a: &Peak, b: &Peak) -> Ordering {
    b.value
        .total_cmp(&a.value)
        .then((a.dx.abs() + a.dy.abs()).cmp(&(b.dx.abs() + b.dy.abs())))
        .then(a.dy.cmp(&b.dy))
        .then(a.dx.cmp(&b.dx))
}

/// Global maximum of the map with a deterministic tie-break.
pub fn find_peak(map: &CorrelationMap) -> Peak {
    map.iter()
        .map(|(dx, dy, value)| Peak { value, dx, dy })
        .min_by(peak_order)
        .expect("correlation maps are never empty")
}

pub(crate) fn off_peak_stats(map: &CorrelationMap, peak: &Peak) -> (f64, f64) {
    let rest: Vec<f64> = map
        .iter()
        .filter(|(dx, dy, _)| (dx - peak.dx).abs() > 2 || (dy - peak.dy).abs() > 2)
        .map(|(_, _, v)| v)
        .collect();
    if rest.is_empty() {
        return (0.0, 0.0);
    }
    let n = rest.len() as f64;
    let mean = rest.iter().sum::<f64>() / n;
    let var = rest.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Full-frame ZNCC of two equally sized images.
pub fn zncc(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(OseError::invalid(format!(
            "shape mismatch: {:?} vs {:?}",
            a.dim(),
            b.dim()
        )));
    }
    let n = a.len() as f64;
    let ma = a.sum() / n;
    let mb = b.sum() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b.iter()) {
        let (u, v) = (x - ma, y - mb);
        sab += u * v;
        saa += u * u;
        sbb += v * v;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(OseError::Degenerate("ZNCC of a constant image is undefined".into()));
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

pub(crate) fn check_pair(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(OseError::invalid(format!(
            "shape mismatch: {:?} vs {:?}",
            a.dim(),
            b.dim()
        )));
    }
    if a.is_empty() {
        return Err(OseError::invalid("empty image"));
    }
    for (name, img) in [("a", a), ("b", b)] {
        let first = img[[0, 0]];
        if img.iter().all(|&v| v == first) {
            return Err(OseError::Degenerate(format!("image {name} is constant")));
        }
    }
    Ok(())
}
