use ndarray::{Array2, ArrayView2};

use super::{check_pair, CorrelationMap, ShiftRange};
use crate::error::Result;

/// Direct evaluation of the overlap ZNCC at every shift. Quadratic in the
/// image size per shift; intended for small images and as a test oracle.
pub fn brute_force_correlate(a: ArrayView2<f64>, b: ArrayView2<f64>, range: ShiftRange) -> Result<CorrelationMap> {
    check_pair(a, b)?;
    let (h, w) = a.dim();
    range.check(w, h)?;
    let (w, h) = (w as i64, h as i64);
    let (mx, my) = (range.max_dx as i64, range.max_dy as i64);
    let mut values = Array2::zeros((range.height(), range.width()));
    for dy in -my..=my {
        for dx in -mx..=mx {
            let xs = 0.max(-dx)..w.min(w - dx);
            let ys = 0.max(-dy)..h.min(h - dy);
            let pairs: Vec<(f64, f64)> = ys
                .flat_map(|y| xs.clone().map(move |x| (x, y)))
                .map(|(x, y)| (a[[y as usize, x as usize]], b[[(y + dy) as usize, (x + dx) as usize]]))
                .collect();
            values[[(dy + my) as usize, (dx + mx) as usize]] = overlap_zncc(&pairs);
        }
    }
    CorrelationMap::new(range, values, 0.0)
}

fn overlap_zncc(pairs: &[(f64, f64)]) -> f64 {
    if pairs.len() < 2 {
        return 0.0;
    }
    let n = pairs.len() as f64;
    let ma = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mb = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
}
