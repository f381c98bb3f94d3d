//! Seeded rough-relief surfaces, imperfect replicas and surface damage.
//!
//! Surfaces are stationary Gaussian random fields with a Gaussian
//! autocovariance `sigma_h^2 * exp(-r^2 / corr_len^2)`, synthesized by
//! low-pass filtering white noise in the Fourier domain.

use ndarray::{s, Array2};
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{OseError, Result};
use crate::fft2::{signed_index, Fft2};
use crate::seed::{self, Stream};

/// Default RMS roughness of a master relief, in meters.
pub const DEFAULT_SIGMA_H: f64 = 500e-9;
/// Default lateral correlation length, in meters. Kept below the optical
/// resolution cell of the default imaging setup so that the speckle is fully
/// developed rather than dominated by individual resolved facets.
pub const DEFAULT_CORR_LEN: f64 = 5e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceParams {
    /// Target RMS height (m).
    pub sigma_h: f64,
    /// 1/e length of the height autocovariance (m).
    pub corr_len: f64,
    pub seed: u64,
}

impl Default for SurfaceParams {
    fn default() -> Self {
        Self {
            sigma_h: DEFAULT_SIGMA_H,
            corr_len: DEFAULT_CORR_LEN,
            seed: 0,
        }
    }
}

impl SurfaceParams {
    pub fn new(sigma_h: f64, corr_len: f64, seed: u64) -> Self {
        Self {
            sigma_h,
            corr_len,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma_h.is_finite() && self.sigma_h >= 0.0) {
            return Err(OseError::invalid(format!(
                "sigma_h must be finite and >= 0, got {}",
                self.sigma_h
            )));
        }
        if !(self.corr_len.is_finite() && self.corr_len > 0.0) {
            return Err(OseError::invalid(format!(
                "corr_len must be finite and > 0, got {}",
                self.corr_len
            )));
        }
        Ok(())
    }
}

/// How a height map came to be.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Generated {
        params: SurfaceParams,
    },
    Replica {
        master: Box<Provenance>,
        error_rms: f64,
        error_corr_len: f64,
        seed: u64,
    },
    Occluded {
        base: Box<Provenance>,
        region: Region,
        fill: Fill,
    },
    /// Read from a file that carries no generation record.
    Loaded,
}

/// Gridded surface relief. `heights[[y, x]]` is the elevation in meters at
/// lateral position `(x * pitch, y * pitch)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightMap {
    pitch: f64,
    heights: Array2<f64>,
    provenance: Provenance,
}

impl HeightMap {
    pub fn new(heights: Array2<f64>, pitch: f64, provenance: Provenance) -> Result<Self> {
        let (ny, nx) = heights.dim();
        if nx < 2 || ny < 2 {
            return Err(OseError::invalid(format!(
                "height map must be at least 2x2, got {nx}x{ny}"
            )));
        }
        if !(pitch.is_finite() && pitch > 0.0) {
            return Err(OseError::invalid(format!("pitch must be > 0, got {pitch}")));
        }
        if heights.iter().any(|h| !h.is_finite()) {
            return Err(OseError::invalid("height map contains non-finite values"));
        }
        Ok(Self {
            pitch,
            heights,
            provenance,
        })
    }

    pub fn nx(&self) -> usize {
        self.heights.ncols()
    }

    pub fn ny(&self) -> usize {
        self.heights.nrows()
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn heights(&self) -> &Array2<f64> {
        &self.heights
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn rms(&self) -> f64 {
        let n = self.heights.len() as f64;
        (self.heights.iter().map(|h| h * h).sum::<f64>() / n).sqrt()
    }

    pub fn mean(&self) -> f64 {
        self.heights.mean().unwrap_or(0.0)
    }

    /// Physical extent `(width, height)` in meters.
    pub fn extent(&self) -> (f64, f64) {
        (self.nx() as f64 * self.pitch, self.ny() as f64 * self.pitch)
    }
}

/// Stationary Gaussian field with Gaussian autocovariance, zero sample mean and
/// sample RMS exactly `params.sigma_h`.
pub fn generate_surface(params: &SurfaceParams, nx: usize, ny: usize, pitch: f64) -> Result<HeightMap> {
    params.validate()?;
    check_grid(nx, ny, pitch)?;
    let heights = gaussian_field(nx, ny, pitch, params.sigma_h, params.corr_len, params.seed, Stream::Surface);
    HeightMap::new(heights, pitch, Provenance::Generated { params: *params })
}

/// Replication inaccuracy perpendicular to the surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicaParams {
    /// RMS of the height error field (m).
    pub error_rms: f64,
    /// 1/e correlation length of the error field (m). `None` uses
    /// [`DEFAULT_ERROR_CORR_FACTOR`] times the master's correlation length.
    /// For a master without a generation record the length is measured
    /// from its autocovariance.
    pub error_corr_len: Option<f64>,
    pub seed: u64,
}

/// Default replica error correlation length, relative to the master's.
/// Replication errors are smooth: a short-range error field of λ/10 RMS
/// would already scramble the speckle completely.
pub const DEFAULT_ERROR_CORR_FACTOR: f64 = 14.0;

impl ReplicaParams {
    pub fn new(error_rms: f64, seed: u64) -> Self {
        Self {
            error_rms,
            error_corr_len: None,
            seed,
        }
    }

    pub fn with_corr_len(mut self, corr_len: f64) -> Self {
        self.error_corr_len = Some(corr_len);
        self
    }

    pub fn resolved_corr_len(&self, master: &HeightMap) -> f64 {
        self.error_corr_len.unwrap_or_else(|| {
            let master_len = master_corr_len(master.provenance())
                .or_else(|| measured_corr_len(master).ok())
                .unwrap_or(master.pitch());
            master_len * DEFAULT_ERROR_CORR_FACTOR
        })
    }
}

fn master_corr_len(p: &Provenance) -> Option<f64> {
    match p {
        Provenance::Generated { params } => Some(params.corr_len),
        Provenance::Replica { master, .. } => master_corr_len(master),
        Provenance::Occluded { base, .. } => master_corr_len(base),
        Provenance::Loaded => None,
    }
}

/// 1/e lag of the height autocovariance along the grid axes (m).
pub fn measured_corr_len(map: &HeightMap) -> Result<f64> {
    Ok(crate::stats::autocovariance_crossing(map.heights(), (-1.0f64).exp())? * map.pitch())
}

/// Master plus an independent zero-mean error field of sample RMS `error_rms`.
pub fn make_replica(master: &HeightMap, error_rms: f64, seed: u64) -> Result<HeightMap> {
    make_replica_with(master, &ReplicaParams::new(error_rms, seed))
}

pub fn make_replica_with(master: &HeightMap, params: &ReplicaParams) -> Result<HeightMap> {
    if !(params.error_rms.is_finite() && params.error_rms >= 0.0) {
        return Err(OseError::invalid(format!(
            "error_rms must be finite and >= 0, got {}",
            params.error_rms
        )));
    }
    let corr_len = params.resolved_corr_len(master);
    if !(corr_len.is_finite() && corr_len > 0.0) {
        return Err(OseError::invalid(format!("error correlation length must be > 0, got {corr_len}")));
    }
    let (nx, ny, pitch) = (master.nx(), master.ny(), master.pitch());
    let error = gaussian_field(nx, ny, pitch, params.error_rms, corr_len, params.seed, Stream::ReplicaError);
    let heights = &master.heights + &error;
    HeightMap::new(
        heights,
        pitch,
        Provenance::Replica {
            master: Box::new(master.provenance.clone()),
            error_rms: params.error_rms,
            error_corr_len: corr_len,
            seed: params.seed,
        },
    )
}

/// Part of a height map, in grid pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Region {
    Rect { x0: usize, y0: usize, width: usize, height: usize },
    /// Full-height band of columns starting at the left edge and covering
    /// `round(fraction * nx)` columns.
    Fraction { fraction: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Fill {
    /// Heights set to zero.
    Flat,
    /// Heights taken from a freshly generated surface.
    Random { params: SurfaceParams },
}

/// Replaces the heights inside `region`; everything outside is left untouched.
pub fn occlude(map: &HeightMap, region: Region, fill: Fill) -> Result<HeightMap> {
    let (nx, ny) = (map.nx(), map.ny());
    let (x0, y0, w, h) = match region {
        Region::Rect { x0, y0, width, height } => {
            if x0.checked_add(width).is_none_or(|e| e > nx) || y0.checked_add(height).is_none_or(|e| e > ny) {
                return Err(OseError::invalid(format!(
                    "region {width}x{height}+{x0}+{y0} lies outside the {nx}x{ny} grid"
                )));
            }
            (x0, y0, width, height)
        }
        Region::Fraction { fraction } => {
            if !(0.0..=1.0).contains(&fraction) {
                return Err(OseError::invalid(format!("fraction must be in [0, 1], got {fraction}")));
            }
            (0, 0, (fraction * nx as f64).round() as usize, ny)
        }
    };

    let mut heights = map.heights.clone();
    if w > 0 && h > 0 {
        let mut window = heights.slice_mut(s![y0..y0 + h, x0..x0 + w]);
        match fill {
            Fill::Flat => window.fill(0.0),
            Fill::Random { params } => {
                let fresh = generate_surface(&params, nx, ny, map.pitch)?;
                window.assign(&fresh.heights.slice(s![y0..y0 + h, x0..x0 + w]));
            }
        }
    }
    HeightMap::new(
        heights,
        map.pitch,
        Provenance::Occluded {
            base: Box::new(map.provenance.clone()),
            region,
            fill,
        },
    )
}

fn check_grid(nx: usize, ny: usize, pitch: f64) -> Result<()> {
    if nx < 2 || ny < 2 {
        return Err(OseError::invalid(format!("grid must be at least 2x2, got {nx}x{ny}")));
    }
    if !(pitch.is_finite() && pitch > 0.0) {
        return Err(OseError::invalid(format!("pitch must be > 0, got {pitch}")));
    }
    Ok(())
}

/// Filtered white noise cropped from an oversized periodic grid, then
/// mean-removed and rescaled to sample RMS `rms`.
fn gaussian_field(nx: usize, ny: usize, pitch: f64, rms: f64, corr_len: f64, seed: u64, stream: Stream) -> Array2<f64> {
    if rms == 0.0 {
        return Array2::zeros((ny, nx));
    }
    // Two correlation lengths of margin keep the wrap-around of the
    // circular filter below exp(-8) of the kernel peak.
    let margin = (2.0 * corr_len / pitch).ceil() as usize;
    let gx = nx + 2 * margin;
    let gy = ny + 2 * margin;

    let mut rng = seed::rng(seed, stream);
    let mut buf: Vec<Complex64> = (0..gx * gy)
        .map(|_| Complex64::new(StandardNormal.sample(&mut rng), 0.0))
        .collect();

    // Kernel exp(-2 r^2 / l^2) convolved with itself gives exp(-r^2 / l^2);
    // its transfer function is exp(-pi^2 l^2 f^2 / 2).
    let plan = Fft2::new(gx, gy);
    plan.forward(&mut buf);
    let c = -std::f64::consts::PI.powi(2) * corr_len * corr_len / 2.0;
    let fx: Vec<f64> = (0..gx)
        .map(|k| signed_index(k, gx) as f64 / (gx as f64 * pitch))
        .collect();
    for ky in 0..gy {
        let fy = signed_index(ky, gy) as f64 / (gy as f64 * pitch);
        for kx in 0..gx {
            buf[ky * gx + kx] *= (c * (fx[kx] * fx[kx] + fy * fy)).exp();
        }
    }
    plan.inverse(&mut buf);

    let mut field = Array2::from_shape_fn((ny, nx), |(y, x)| buf[(y + margin) * gx + x + margin].re);
    let mean = field.mean().unwrap_or(0.0);
    field -= mean;
    let cur = (field.iter().map(|v| v * v).sum::<f64>() / field.len() as f64).sqrt();
    if cur > 0.0 {
        field *= rms / cur;
    }
    field
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(seed: u64) -> SurfaceParams {
        SurfaceParams::new(500e-9, 10e-6, seed)
    }

    #[test]
    fn rms_and_mean_hit_targets() {
        let m = generate_surface(&params(42), 256, 256, 2e-6).unwrap();
        assert!((m.rms() - 500e-9).abs() / 500e-9 < 0.05);
        assert!(m.mean().abs() < 0.01 * m.rms());
    }

    #[test]
    fn seeded_generation_is_bit_identical() {
        let a = generate_surface(&params(42), 64, 48, 2e-6).unwrap();
        let b = generate_surface(&params(42), 64, 48, 2e-6).unwrap();
        assert_eq!(a.heights(), b.heights());
        let c = generate_surface(&params(43), 64, 48, 2e-6).unwrap();
        assert_ne!(a.heights(), c.heights());
    }

    #[test]
    fn zero_roughness_is_flat() {
        let m = generate_surface(&SurfaceParams::new(0.0, 10e-6, 1), 32, 32, 2e-6).unwrap();
        assert!(m.heights().iter().all(|&h| h == 0.0));
    }

    #[test]
    fn rejects_bad_grids_and_params() {
        assert!(generate_surface(&params(1), 1, 32, 2e-6).is_err());
        assert!(generate_surface(&params(1), 32, 32, 0.0).is_err());
        assert!(generate_surface(&params(1), 32, 32, -1.0).is_err());
        assert!(generate_surface(&SurfaceParams::new(-1.0, 1e-6, 1), 32, 32, 1e-6).is_err());
        assert!(generate_surface(&SurfaceParams::new(1e-7, 0.0, 1), 32, 32, 1e-6).is_err());
    }

    #[test]
    fn zero_error_replica_equals_master() {
        let m = generate_surface(&params(3), 64, 64, 2e-6).unwrap();
        let r = make_replica(&m, 0.0, 9).unwrap();
        assert_eq!(m.heights(), r.heights());
        assert!(make_replica(&m, -1e-9, 9).is_err());
    }

    #[test]
    fn replica_error_rms_matches() {
        let m = generate_surface(&params(3), 256, 256, 2e-6).unwrap();
        let target = 650e-9 / 8.0;
        let r = make_replica(&m, target, 11).unwrap();
        let diff = r.heights() - m.heights();
        let rms = (diff.iter().map(|v| v * v).sum::<f64>() / diff.len() as f64).sqrt();
        assert!((rms - 81.25e-9).abs() / 81.25e-9 < 0.05, "rms {rms}");
    }

    #[test]
    fn replica_corr_len_defaults_from_master() {
        let m = generate_surface(&params(3), 16, 16, 2e-6).unwrap();
        let p = ReplicaParams::new(1e-9, 1);
        assert_eq!(p.resolved_corr_len(&m), 10e-6 * DEFAULT_ERROR_CORR_FACTOR);
        assert_eq!(p.with_corr_len(2e-6).resolved_corr_len(&m), 2e-6);
        let flat = HeightMap::new(Array2::zeros((16, 16)), 2e-6, Provenance::Loaded).unwrap();
        assert_eq!(p.resolved_corr_len(&flat), 2e-6 * DEFAULT_ERROR_CORR_FACTOR);
    }

    #[test]
    fn loaded_master_uses_measured_corr_len() {
        let m = generate_surface(&params(4), 256, 256, 2e-6).unwrap();
        let loaded = HeightMap::new(m.heights().clone(), 2e-6, Provenance::Loaded).unwrap();
        let l = ReplicaParams::new(1e-9, 1).resolved_corr_len(&loaded) / DEFAULT_ERROR_CORR_FACTOR;
        assert!((l - 10e-6).abs() / 10e-6 < 0.15, "{l}");
    }

    #[test]
    fn occlusion_zero_fraction_is_identity() {
        let m = generate_surface(&params(5), 32, 32, 2e-6).unwrap();
        let o = occlude(&m, Region::Fraction { fraction: 0.0 }, Fill::Flat).unwrap();
        assert_eq!(m.heights(), o.heights());
    }

    #[test]
    fn occlusion_left_half_flat() {
        let m = generate_surface(&params(5), 32, 20, 2e-6).unwrap();
        let region = Region::Rect { x0: 0, y0: 0, width: 16, height: 20 };
        let o = occlude(&m, region, Fill::Flat).unwrap();
        for y in 0..20 {
            for x in 0..32 {
                if x < 16 {
                    assert_eq!(o.heights()[[y, x]], 0.0);
                } else {
                    assert_eq!(o.heights()[[y, x]].to_bits(), m.heights()[[y, x]].to_bits());
                }
            }
        }
    }

    #[test]
    fn occlusion_random_fill_replaces_region_only() {
        let m = generate_surface(&params(5), 40, 40, 2e-6).unwrap();
        let o = occlude(&m, Region::Fraction { fraction: 0.25 }, Fill::Random { params: params(77) }).unwrap();
        let fresh = generate_surface(&params(77), 40, 40, 2e-6).unwrap();
        for y in 0..40 {
            for x in 0..40 {
                let expect = if x < 10 { fresh.heights()[[y, x]] } else { m.heights()[[y, x]] };
                assert_eq!(o.heights()[[y, x]], expect);
            }
        }
    }

    #[test]
    fn occlusion_rejects_out_of_bounds() {
        let m = generate_surface(&params(5), 32, 32, 2e-6).unwrap();
        let region = Region::Rect { x0: 20, y0: 0, width: 16, height: 4 };
        assert!(matches!(occlude(&m, region, Fill::Flat), Err(OseError::InvalidArgument(_))));
        assert!(occlude(&m, Region::Fraction { fraction: 1.5 }, Fill::Flat).is_err());
    }
}
