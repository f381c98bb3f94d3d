//! Transform-domain ZNCC with running-sum normalization.
//!
//! For a shift `d` the overlap-normalized coefficient needs five sums over
//! the overlap: `Sa, Sa2, Sb, Sb2, Sab`. Sums of `b` over the overlap are
//! rectangle sums (integral images). Sums of `a` weighted by `b`'s validity
//! mask and the cross term are correlations evaluated with zero-padded FFTs.
//! Two real signals are packed into one complex transform wherever possible.

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;

use super::{check_pair, CorrelationMap, ShiftRange};
use crate::error::{OseError, Result};
use crate::fft2::{next_fast_len, Fft2};

/// ZNCC over all integer shifts within `range`.
pub fn correlate_shifts(a: ArrayView2<f64>, b: ArrayView2<f64>, range: ShiftRange) -> Result<CorrelationMap> {
    check_pair(a, b)?;
    Correlator::new(a, range)?.correlate(b, None, 0.0)
}

/// As [`correlate_shifts`], with pixels of `b` where `mask` is false
/// excluded from every sum.
pub fn correlate_shifts_masked(
    a: ArrayView2<f64>,
    b: ArrayView2<f64>,
    mask: ArrayView2<bool>,
    range: ShiftRange,
) -> Result<CorrelationMap> {
    check_pair(a, b)?;
    Correlator::new(a, range)?.correlate(b, Some(mask), 0.0)
}

/// Reference image prepared for repeated correlation against moving images
/// of the same size.
pub struct Correlator {
    width: usize,
    height: usize,
    range: ShiftRange,
    plan: Fft2,
    /// Spectrum of `a0 + i a0^2`, padded.
    packed: Vec<Complex64>,
    a_sums: Integral,
    a_energy: f64,
}

impl Correlator {
    pub fn new(a: ArrayView2<f64>, range: ShiftRange) -> Result<Self> {
        let (height, width) = a.dim();
        if width == 0 || height == 0 {
            return Err(OseError::invalid("empty image"));
        }
        range.check(width, height)?;
        let (lx, ly) = (next_fast_len(width + range.max_dx), next_fast_len(height + range.max_dy));
        let plan = Fft2::new(lx, ly);
        let mean = a.sum() / a.len() as f64;
        let a0 = a.mapv(|v| v - mean);
        let mut packed = vec![Complex64::default(); lx * ly];
        for ((y, x), &v) in a0.indexed_iter() {
            packed[y * lx + x] = Complex64::new(v, v * v);
        }
        plan.forward_padded(&mut packed, height);
        let a_energy = a0.iter().map(|v| v * v).sum();
        let a_sums = Integral::new(&a0, None);
        Ok(Self {
            width,
            height,
            range,
            plan,
            packed,
            a_sums,
            a_energy,
        })
    }

    pub fn range(&self) -> ShiftRange {
        self.range
    }

    /// Correlation map of the prepared reference against `b`. `rotation` is
    /// only recorded in the returned map.
    pub fn correlate(&self, b: ArrayView2<f64>, mask: Option<ArrayView2<bool>>, rotation: f64) -> Result<CorrelationMap> {
        if b.dim() != (self.height, self.width) {
            return Err(OseError::invalid(format!(
                "shape mismatch: {:?} vs {:?}",
                (self.height, self.width),
                b.dim()
            )));
        }
        if let Some(m) = mask {
            if m.dim() != b.dim() {
                return Err(OseError::invalid("mask shape does not match image"));
            }
        }
        let valid = |y: usize, x: usize| mask.is_none_or(|m| m[[y, x]]);
        let (mut sum, mut count) = (0.0, 0usize);
        for ((y, x), &v) in b.indexed_iter() {
            if valid(y, x) {
                sum += v;
                count += 1;
            }
        }
        if count == 0 {
            return Err(OseError::Degenerate("mask excludes every pixel".into()));
        }
        let mean = sum / count as f64;
        let b0 = Array2::from_shape_fn(b.dim(), |(y, x)| if valid(y, x) { b[[y, x]] - mean } else { 0.0 });
        let m = mask.map(|m| m.mapv(|v| if v { 1.0 } else { 0.0 }));
        let b_energy: f64 = b0.iter().map(|v| v * v).sum();

        let cross = match &m {
            None => self.cross_unmasked(&b0),
            Some(m) => self.cross_masked(&b0, m),
        };

        let ib = Integral::new(&b0, m.as_ref());
        let (w, h) = (self.width as i64, self.height as i64);
        let (mx, my) = (self.range.max_dx as i64, self.range.max_dy as i64);
        let eps_a = 1e-10 * self.a_energy;
        let eps_b = 1e-10 * b_energy;
        let values = Array2::from_shape_fn((self.range.height(), self.range.width()), |(r, c)| {
            let (dx, dy) = (c as i64 - mx, r as i64 - my);
            // a window is x in [max(0,-dx), min(w, w-dx)); b window is that plus d.
            let (ax0, ax1) = (0.max(-dx), w.min(w - dx));
            let (ay0, ay1) = (0.max(-dy), h.min(h - dy));
            let (n, sb, sb2) = ib.rect(ax0 + dx, ay0 + dy, ax1 + dx, ay1 + dy);
            let k = r * self.range.width() + c;
            let (sab, sa, sa2) = match &cross {
                Cross::Unmasked { sab } => {
                    let (_, sa, sa2) = self.a_sums.rect(ax0, ay0, ax1, ay1);
                    (sab[k], sa, sa2)
                }
                Cross::Masked { sab, sa, sa2 } => (sab[k], sa[k], sa2[k]),
            };
            if n < 2.0 {
                return 0.0;
            }
            let va = sa2 - sa * sa / n;
            let vb = sb2 - sb * sb / n;
            if va <= eps_a || vb <= eps_b {
                return 0.0;
            }
            ((sab - sa * sb / n) / (va * vb).sqrt()).clamp(-1.0, 1.0)
        });
        CorrelationMap::new(self.range, values, rotation)
    }

    fn window_indices(&self) -> (Vec<usize>, Vec<usize>) {
        let (lx, ly) = (self.plan.width() as i64, self.plan.height() as i64);
        let (mx, my) = (self.range.max_dx as i64, self.range.max_dy as i64);
        let rows = (-my..=my).map(|d| d.rem_euclid(ly) as usize).collect();
        let cols = (-mx..=mx).map(|d| d.rem_euclid(lx) as usize).collect();
        (rows, cols)
    }

    fn pad(&self, re: &Array2<f64>, im: Option<&Array2<f64>>) -> Vec<Complex64> {
        let lx = self.plan.width();
        let mut buf = vec![Complex64::default(); lx * self.plan.height()];
        for ((y, x), &v) in re.indexed_iter() {
            buf[y * lx + x] = Complex64::new(v, im.map_or(0.0, |m| m[[y, x]]));
        }
        buf
    }

    fn cross_unmasked(&self, b0: &Array2<f64>) -> Cross {
        let mut q = self.pad(b0, None);
        self.plan.forward_padded(&mut q, self.height);
        let (lx, ly) = (self.plan.width(), self.plan.height());
        for_each_bin(lx, ly, |k, mirror| {
            let (a, _) = unpack(&self.packed, k, mirror);
            q[k] = a.conj() * q[k];
        });
        let (rows, cols) = self.window_indices();
        let out = self.plan.inverse_window(&mut q, &rows, &cols);
        Cross::Unmasked {
            sab: out.iter().map(|c| c.re).collect(),
        }
    }

    fn cross_masked(&self, b0: &Array2<f64>, m: &Array2<f64>) -> Cross {
        let mut q = self.pad(b0, Some(m));
        self.plan.forward_padded(&mut q, self.height);
        let (lx, ly) = (self.plan.width(), self.plan.height());
        let mut first = vec![Complex64::default(); lx * ly];
        let mut second = vec![Complex64::default(); lx * ly];
        for_each_bin(lx, ly, |k, mirror| {
            let (a, a2) = unpack(&self.packed, k, mirror);
            let (bb, mm) = unpack(&q, k, mirror);
            let (ac, a2c) = (a.conj(), a2.conj());
            // Re -> sum a*b, Im -> sum a*m.
            first[k] = ac * bb + Complex64::i() * (ac * mm);
            second[k] = a2c * mm;
        });
        drop(q);
        let (rows, cols) = self.window_indices();
        let o1 = self.plan.inverse_window(&mut first, &rows, &cols);
        let o2 = self.plan.inverse_window(&mut second, &rows, &cols);
        Cross::Masked {
            sab: o1.iter().map(|c| c.re).collect(),
            sa: o1.iter().map(|c| c.im).collect(),
            sa2: o2.iter().map(|c| c.re).collect(),
        }
    }
}

enum Cross {
    Unmasked { sab: Vec<f64> },
    Masked { sab: Vec<f64>, sa: Vec<f64>, sa2: Vec<f64> },
}

/// Calls `f(k, mirror)` for every bin of an `lx x ly` spectrum, where
/// `mirror` is the bin of the negated frequency.
fn for_each_bin(lx: usize, ly: usize, mut f: impl FnMut(usize, usize)) {
    for ky in 0..ly {
        let my = (ly - ky) % ly;
        f(ky * lx, my * lx);
        for kx in 1..lx {
            f(ky * lx + kx, my * lx + lx - kx);
        }
    }
}

/// Splits bin `k` of the spectrum of `x + i y` (x, y real) into `(X_k, Y_k)`.
fn unpack(z: &[Complex64], k: usize, mirror: usize) -> (Complex64, Complex64) {
    let zk = z[k];
    let zm = z[mirror].conj();
    let x = (zk + zm) * 0.5;
    let y = (zk - zm) * Complex64::new(0.0, -0.5);
    (x, y)
}

/// Summed-area tables of count, value and squared value.
struct Integral {
    w: usize,
    n: Vec<f64>,
    s: Vec<f64>,
    s2: Vec<f64>,
}

impl Integral {
    fn new(img: &Array2<f64>, mask: Option<&Array2<f64>>) -> Self {
        let (h, w) = img.dim();
        let stride = w + 1;
        let mut n = vec![0.0; stride * (h + 1)];
        let mut s = vec![0.0; stride * (h + 1)];
        let mut s2 = vec![0.0; stride * (h + 1)];
        for y in 0..h {
            let (mut rn, mut rs, mut rs2) = (0.0, 0.0, 0.0);
            for x in 0..w {
                let m = mask.map_or(1.0, |m| m[[y, x]]);
                let v = img[[y, x]];
                rn += m;
                rs += v;
                rs2 += v * v;
                let i = (y + 1) * stride + x + 1;
                n[i] = n[i - stride] + rn;
                s[i] = s[i - stride] + rs;
                s2[i] = s2[i - stride] + rs2;
            }
        }
        Self { w: stride, n, s, s2 }
    }

    /// Sums over `[x0, x1) x [y0, y1)`.
    fn rect(&self, x0: i64, y0: i64, x1: i64, y1: i64) -> (f64, f64, f64) {
        if x1 <= x0 || y1 <= y0 {
            return (0.0, 0.0, 0.0);
        }
        let at = |t: &[f64], x: i64, y: i64| t[y as usize * self.w + x as usize];
        let f = |t: &[f64]| at(t, x1, y1) - at(t, x0, y1) - at(t, x1, y0) + at(t, x0, y0);
        (f(&self.n), f(&self.s), f(&self.s2))
    }
}
