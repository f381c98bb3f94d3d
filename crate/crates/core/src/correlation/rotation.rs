use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::{check_pair, find_peak, off_peak_stats, CorrelationMap, CorrelationResult, Correlator, Peak, ShiftRange};
use crate::error::{OseError, Result};

/// Rotation and shift search parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationSearch {
    /// Half-width of the symmetric angle sweep (rad).
    pub theta_range: f64,
    /// Sweep spacing (rad).
    pub theta_step: f64,
    pub shift: ShiftRange,
    /// Number of step-halving passes around the best coarse angle. Zero keeps
    /// results on the coarse grid.
    pub refine_levels: u32,
}

impl Default for RotationSearch {
    fn default() -> Self {
        Self {
            theta_range: 0.5f64.to_radians(),
            theta_step: 0.25f64.to_radians(),
            shift: ShiftRange::square(16),
            refine_levels: 0,
        }
    }
}

impl RotationSearch {
    pub fn new(theta_range: f64, theta_step: f64, shift: ShiftRange) -> Self {
        Self {
            theta_range,
            theta_step,
            shift,
            refine_levels: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.theta_step.is_finite() && self.theta_step > 0.0) {
            return Err(OseError::invalid(format!("theta_step must be > 0, got {}", self.theta_step)));
        }
        if !(self.theta_range.is_finite() && self.theta_range >= 0.0) {
            return Err(OseError::invalid(format!("theta_range must be >= 0, got {}", self.theta_range)));
        }
        Ok(())
    }
}

/// Symmetric sweep `k * step` for `|k * step| <= range`; always contains 0.
pub fn rotation_candidates(theta_range: f64, theta_step: f64) -> Vec<f64> {
    let k = (theta_range / theta_step + 1e-9).floor() as i64;
    (-k..=k).map(|i| i as f64 * theta_step).collect()
}

/// Rotates `img` by `theta` (rad) about its center with bilinear
/// interpolation. Returns the image and a validity mask; pixels whose source
/// falls outside the input are zero and masked out.
pub fn rotate_image(img: ArrayView2<f64>, theta: f64) -> (Array2<f64>, Array2<bool>) {
    let (h, w) = img.dim();
    if theta == 0.0 {
        return (img.to_owned(), Array2::from_elem((h, w), true));
    }
    let (sin, cos) = theta.sin_cos();
    let cx = (w - 1) as f64 / 2.0;
    let cy = (h - 1) as f64 / 2.0;
    let (wmax, hmax) = ((w - 1) as f64, (h - 1) as f64);
    let src = img.as_standard_layout();
    let src = src.as_slice().expect("standard layout");
    let mut out = Array2::zeros((h, w));
    let mut mask = Array2::from_elem((h, w), false);
    for y in 0..h {
        let ry = y as f64 - cy;
        for x in 0..w {
            let rx = x as f64 - cx;
            let sx = cx + cos * rx + sin * ry;
            let sy = cy - sin * rx + cos * ry;
            // Small slack so that exact border hits survive rounding.
            if sx < -1e-9 || sy < -1e-9 || sx > wmax + 1e-9 || sy > hmax + 1e-9 {
                continue;
            }
            out[[y, x]] = bilinear_slice(src, w, h, sx, sy);
            mask[[y, x]] = true;
        }
    }
    (out, mask)
}

#[inline]
fn bilinear_slice(data: &[f64], w: usize, h: usize, u: f64, v: f64) -> f64 {
    let u = u.clamp(0.0, (w - 1) as f64);
    let v = v.clamp(0.0, (h - 1) as f64);
    let x0 = (u as usize).min(w.saturating_sub(2));
    let y0 = (v as usize).min(h.saturating_sub(2));
    let (fx, fy) = (u - x0 as f64, v - y0 as f64);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let top = data[y0 * w + x0] * (1.0 - fx) + data[y0 * w + x1] * fx;
    let bot = data[y1 * w + x0] * (1.0 - fx) + data[y1 * w + x1] * fx;
    top * (1.0 - fy) + bot * fy
}

/// Best ZNCC over rotations of `b` and integer shifts. The reported
/// rotation is the angle by which `b` is rotated relative to `a`.
pub fn match_with_rotation(a: ArrayView2<f64>, b: ArrayView2<f64>, search: &RotationSearch) -> Result<CorrelationResult> {
    Ok(match_with_rotation_map(a, b, search)?.0)
}

/// As [`match_with_rotation`], also returning the map at the winning angle.
pub fn match_with_rotation_map(
    a: ArrayView2<f64>,
    b: ArrayView2<f64>,
    search: &RotationSearch,
) -> Result<(CorrelationResult, CorrelationMap)> {
    search.validate()?;
    check_pair(a, b)?;
    let correlator = Correlator::new(a, search.shift)?;
    let b_owned = b.to_owned();

    let eval = |theta: f64| -> Result<(Peak, CorrelationMap)> {
        let map = if theta == 0.0 {
            correlator.correlate(b, None, 0.0)?
        } else {
            let (rotated, mask) = rotate_image(b_owned.view(), -theta);
            correlator.correlate(rotated.view(), Some(mask.view()), theta)?
        };
        Ok((find_peak(&map), map))
    };

    let mut best: Option<(Peak, CorrelationMap)> = None;
    let consider = |best: &mut Option<(Peak, CorrelationMap)>, cand: (Peak, CorrelationMap)| {
        let better = match best {
            None => true,
            Some((p, m)) => better_than(&cand.0, cand.1.rotation(), p, m.rotation()),
        };
        if better {
            *best = Some(cand);
        }
    };
    for theta in rotation_candidates(search.theta_range, search.theta_step) {
        consider(&mut best, eval(theta)?);
    }
    let mut step = search.theta_step;
    for _ in 0..search.refine_levels {
        step /= 2.0;
        let centre = best.as_ref().map(|(_, m)| m.rotation()).unwrap_or(0.0);
        for theta in [centre - step, centre + step] {
            consider(&mut best, eval(theta)?);
        }
    }

    let (peak, map) = best.expect("sweep always contains theta = 0");
    let (off_peak_mean, off_peak_std) = off_peak_stats(&map, &peak);
    Ok((
        CorrelationResult {
            peak: peak.value,
            dx: peak.dx,
            dy: peak.dy,
            rotation: map.rotation(),
            off_peak_mean,
            off_peak_std,
        },
        map,
    ))
}

/// Tie-break across rotations: the usual peak order first, then the
/// smaller `|theta|`, then the smaller `theta`.
fn better_than(p: &Peak, theta: f64, q: &Peak, theta_q: f64) -> bool {
    use std::cmp::Ordering::*;
    match super::peak_order(p, q) {
        Less => true,
        Greater => false,
        Equal => match theta.abs().total_cmp(&theta_q.abs()) {
            Less => true,
            Greater => false,
            Equal => theta < theta_q,
        },
    }
}
