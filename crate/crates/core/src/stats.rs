//! Intensity statistics of speckle images.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{OseError, Result};
use crate::fft2::{next_fast_len, Fft2};

/// `std / mean` of the samples (population standard deviation).
pub fn contrast(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean
}

/// Kolmogorov-Smirnov distance between the empirical distribution of
/// `samples` and a negative-exponential law with the same mean.
pub fn ks_negative_exponential(samples: &[f64]) -> f64 {
    let mut sorted: Vec<f64> = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = 1.0 - (-x / mean).exp();
            let lo = i as f64 / n;
            let hi = (i + 1) as f64 / n;
            (cdf - lo).abs().max((hi - cdf).abs())
        })
        .fold(0.0, f64::max)
}

/// Lag (in samples) at which the normalized autocovariance of `image` first
/// drops below `level`, linearly interpolated and averaged over the four
/// axis directions.
pub fn autocovariance_crossing(image: &Array2<f64>, level: f64) -> Result<f64> {
    let (h, w) = image.dim();
    if image.is_empty() || image.iter().all(|&v| v == image[[0, 0]]) {
        return Err(OseError::Degenerate("constant image has no autocovariance lobe".into()));
    }
    let mean = image.mean().unwrap_or(0.0);
    let (gx, gy) = (next_fast_len(2 * w), next_fast_len(2 * h));
    let mut buf = vec![Complex64::default(); gx * gy];
    for ((y, x), v) in image.indexed_iter() {
        buf[y * gx + x] = Complex64::new(v - mean, 0.0);
    }
    let plan = Fft2::new(gx, gy);
    plan.forward_padded(&mut buf, h);
    for v in buf.iter_mut() {
        *v = Complex64::new(v.norm_sqr(), 0.0);
    }
    plan.inverse(&mut buf);
    let c0 = buf[0].re;
    let at = |dx: i64, dy: i64| {
        let x = dx.rem_euclid(gx as i64) as usize;
        let y = dy.rem_euclid(gy as i64) as usize;
        buf[y * gx + x].re / c0
    };

    let max_lag = (w.min(h) / 2) as i64;
    let mut radii = Vec::with_capacity(4);
    for (sx, sy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
        let mut prev = 1.0;
        for k in 1..=max_lag {
            let cur = at(sx * k, sy * k);
            if cur < level {
                radii.push((k - 1) as f64 + (prev - level) / (prev - cur));
                break;
            }
            prev = cur;
        }
    }
    if radii.len() < 4 {
        return Err(OseError::Degenerate(format!(
            "autocovariance does not fall below {level} within half the image"
        )));
    }
    Ok(radii.iter().sum::<f64>() / radii.len() as f64)
}
