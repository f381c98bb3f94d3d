//! Row-major 2D complex FFTs on top of `rustfft`.
//!
//! Plans are immutable and shareable; every call allocates its own scratch so
//! concurrent use from several threads gives the same bits as serial use.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone)]
pub struct Fft2 {
    width: usize,
    height: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish()
    }
}

impl Fft2 {
    pub fn new(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "FFT dimensions must be positive");
        let mut planner = FftPlanner::new();
        Self {
            width,
            height,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Unnormalized forward transform, in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, FftDirection::Forward);
    }

    /// Inverse transform scaled by `1/(width*height)`, in place.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, FftDirection::Inverse);
        let scale = 1.0 / (self.width * self.height) as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    /// Forward transform of data whose rows from `used_rows` on are zero;
    /// the row pass skips them.
    pub fn forward_padded(&self, data: &mut [Complex64], used_rows: usize) {
        let (w, h) = (self.width, self.height);
        assert_eq!(data.len(), w * h, "buffer does not match FFT plan dimensions");
        run_rows(&self.row_fwd, &mut data[..w * used_rows.min(h)], w);
        let mut t = vec![Complex64::default(); w * h];
        transpose(data, &mut t, w, h);
        run_rows(&self.col_fwd, &mut t, h);
        transpose(&t, data, h, w);
    }

    /// Normalized inverse transform evaluated only on the requested output
    /// rows and columns. Returns a `rows.len() x cols.len()` row-major block.
    /// `spectrum` is used as scratch and left unspecified.
    ///
    /// Rows are transformed in place first, then only the wanted columns,
    /// which saves most of the second pass when the output window is small.
    pub fn inverse_window(&self, spectrum: &mut [Complex64], rows: &[usize], cols: &[usize]) -> Vec<Complex64> {
        let (w, h) = (self.width, self.height);
        assert_eq!(spectrum.len(), w * h);
        run_rows(&self.row_inv, spectrum, w);

        let mut picked = vec![Complex64::default(); cols.len() * h];
        for y in 0..h {
            let src = &spectrum[y * w..(y + 1) * w];
            for (c, &x) in cols.iter().enumerate() {
                picked[c * h + y] = src[x];
            }
        }
        run_rows(&self.col_inv, &mut picked, h);

        let scale = 1.0 / (w * h) as f64;
        let mut out = Vec::with_capacity(rows.len() * cols.len());
        for &y in rows {
            for c in 0..cols.len() {
                out.push(picked[c * h + y] * scale);
            }
        }
        out
    }

    fn transform(&self, data: &mut [Complex64], dir: FftDirection) {
        let (w, h) = (self.width, self.height);
        assert_eq!(data.len(), w * h, "buffer does not match FFT plan dimensions");
        let (row, col) = match dir {
            FftDirection::Forward => (&self.row_fwd, &self.col_fwd),
            FftDirection::Inverse => (&self.row_inv, &self.col_inv),
        };
        run_rows(row, data, w);
        let mut t = vec![Complex64::default(); w * h];
        transpose(data, &mut t, w, h);
        run_rows(col, &mut t, h);
        transpose(&t, data, h, w);
    }
}

fn run_rows(fft: &Arc<dyn Fft<f64>>, data: &mut [Complex64], len: usize) {
    let scratch_len = fft.get_inplace_scratch_len();
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(len).for_each_init(
            || vec![Complex64::default(); scratch_len],
            |scratch, row| fft.process_with_scratch(row, scratch),
        );
    }
    #[cfg(not(feature = "parallel"))]
    {
        let mut scratch = vec![Complex64::default(); scratch_len];
        for row in data.chunks_exact_mut(len) {
            fft.process_with_scratch(row, &mut scratch);
        }
    }
}

/// Blocked transpose of a `h x w` row-major matrix into `w x h`.
fn transpose(src: &[Complex64], dst: &mut [Complex64], w: usize, h: usize) {
    const B: usize = 32;
    for y0 in (0..h).step_by(B) {
        for x0 in (0..w).step_by(B) {
            for y in y0..(y0 + B).min(h) {
                for x in x0..(x0 + B).min(w) {
                    dst[x * h + y] = src[y * w + x];
                }
            }
        }
    }
}

/// Smallest integer `>= n` whose only prime factors are 2, 3 and 5.
pub fn next_fast_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// Signed frequency index for bin `k` of an `n`-point transform.
pub fn signed_index(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft2(data: &[Complex64], w: usize, h: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); w * h];
        for ky in 0..h {
            for kx in 0..w {
                let mut acc = Complex64::default();
                for y in 0..h {
                    for x in 0..w {
                        let ang = -2.0 * std::f64::consts::PI
                            * ((kx * x) as f64 / w as f64 + (ky * y) as f64 / h as f64);
                        acc += data[y * w + x] * Complex64::from_polar(1.0, ang);
                    }
                }
                out[ky * w + kx] = acc;
            }
        }
        out
    }

    fn sample(w: usize, h: usize) -> Vec<Complex64> {
        (0..w * h)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect()
    }

    #[test]
    fn forward_matches_naive_dft() {
        let (w, h) = (6, 5);
        let data = sample(w, h);
        let mut fast = data.clone();
        Fft2::new(w, h).forward(&mut fast);
        let slow = naive_dft2(&data, w, h);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn inverse_round_trips() {
        let (w, h) = (9, 4);
        let data = sample(w, h);
        let plan = Fft2::new(w, h);
        let mut buf = data.clone();
        plan.forward(&mut buf);
        plan.inverse(&mut buf);
        for (a, b) in buf.iter().zip(&data) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn windowed_inverse_matches_full_inverse() {
        let (w, h) = (10, 12);
        let plan = Fft2::new(w, h);
        let mut spec = sample(w, h);
        plan.forward(&mut spec);
        let mut full = spec.clone();
        plan.inverse(&mut full);
        let rows = [0, 1, 11, 5];
        let cols = [9, 0, 3];
        let win = plan.inverse_window(&mut spec.clone(), &rows, &cols);
        for (r, &y) in rows.iter().enumerate() {
            for (c, &x) in cols.iter().enumerate() {
                assert!((win[r * cols.len() + c] - full[y * w + x]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn padded_forward_matches_full_forward() {
        let (w, h) = (8, 9);
        let mut data = sample(w, h);
        for v in &mut data[w * 6..] {
            *v = Complex64::default();
        }
        let plan = Fft2::new(w, h);
        let mut full = data.clone();
        plan.forward(&mut full);
        plan.forward_padded(&mut data, 6);
        assert_eq!(full, data);
    }

    #[test]
    fn fast_lengths() {
        assert_eq!(next_fast_len(2112), 2160);
        assert_eq!(next_fast_len(1024), 1024);
        assert_eq!(next_fast_len(7), 8);
        assert_eq!(next_fast_len(1), 1);
    }
}
