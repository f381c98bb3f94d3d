//! Coherent imaging of a rough relief onto a quantizing sensor.
//!
//! The model is a scalar 4f abstraction: the reflected field
//! `exp(i * 4 pi h cos(theta) / lambda)` is low-pass filtered by a circular
//! pupil, the squared modulus is taken in the image plane (unit
//! magnification, same sampling as the surface grid), and the result is
//! resampled onto the sensor pixel grid centered on the optical axis.

use std::f64::consts::PI;

use ndarray::{Array2, Zip};
use num_complex::Complex64;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{OseError, Result};
use crate::fft2::{next_fast_len, signed_index, Fft2};
use crate::seed::{self, Stream};
use crate::surface::HeightMap;

/// Ratio between the average speckle diameter and `lambda * z / D`.
pub const SPECKLE_DIAMETER_FACTOR: f64 = 1.22;

/// Half-maximum point of `(2 J1(v) / v)^2`, i.e. the `v` where
/// `2 J1(v) / v = 1/sqrt(2)`.
const AIRY_INTENSITY_HALF_MAX_V: f64 = 1.616_339_948;

/// Fraction of full scale the sensor's mean signal is exposed to.
pub const SENSOR_MEAN_FILL: f64 = 0.25;
/// Gaussian read noise, in counts.
pub const READ_NOISE_COUNTS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub px_w: usize,
    pub px_h: usize,
    /// Pixel pitch (m).
    pub px_pitch: f64,
    pub bit_depth: u8,
}

impl SensorSpec {
    /// Pitch of a 5.70 mm wide, 2560 pixel sensor.
    pub const CMOS_5MP_PITCH: f64 = 5.70e-3 / 2560.0;

    pub fn full_scale(&self) -> u16 {
        ((1u32 << self.bit_depth) - 1) as u16
    }
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self {
            px_w: 512,
            px_h: 512,
            px_pitch: Self::CMOS_5MP_PITCH,
            bit_depth: 8,
        }
    }
}

/// One illumination and capture setup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticalConfig {
    /// Wavelength (m).
    pub lambda: f64,
    /// Incidence angle (rad).
    pub theta_inc: f64,
    /// Lens aperture diameter (m).
    pub aperture_d: f64,
    /// Lens to observation plane distance (m).
    pub dist_z: f64,
    pub sensor: SensorSpec,
    pub illum_power_scale: f64,
}

impl Default for OpticalConfig {
    fn default() -> Self {
        Self {
            lambda: 650e-9,
            theta_inc: 0.0,
            aperture_d: 5.9e-3,
            dist_z: 75e-3,
            sensor: SensorSpec::default(),
            illum_power_scale: 1.0,
        }
    }
}

impl OpticalConfig {
    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_theta(mut self, theta_inc: f64) -> Self {
        self.theta_inc = theta_inc;
        self
    }

    pub fn with_aperture(mut self, aperture_d: f64) -> Self {
        self.aperture_d = aperture_d;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.lambda) {
            return Err(OseError::invalid(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if !(self.theta_inc.is_finite() && (0.0..PI / 2.0).contains(&self.theta_inc)) {
            return Err(OseError::invalid(format!(
                "theta_inc must be in [0, pi/2), got {}",
                self.theta_inc
            )));
        }
        if !pos(self.aperture_d) {
            return Err(OseError::invalid(format!("aperture_d must be > 0, got {}", self.aperture_d)));
        }
        if !pos(self.dist_z) {
            return Err(OseError::invalid(format!("dist_z must be > 0, got {}", self.dist_z)));
        }
        if !pos(self.sensor.px_pitch) {
            return Err(OseError::invalid(format!("px_pitch must be > 0, got {}", self.sensor.px_pitch)));
        }
        if ![8, 12, 16].contains(&self.sensor.bit_depth) {
            return Err(OseError::invalid(format!(
                "bit_depth must be 8, 12 or 16, got {}",
                self.sensor.bit_depth
            )));
        }
        if self.sensor.px_w < 16 || self.sensor.px_h < 16 {
            return Err(OseError::invalid(format!(
                "sensor must be at least 16x16 pixels, got {}x{}",
                self.sensor.px_w, self.sensor.px_h
            )));
        }
        if !(self.illum_power_scale.is_finite() && self.illum_power_scale >= 0.0) {
            return Err(OseError::invalid(format!(
                "illum_power_scale must be >= 0, got {}",
                self.illum_power_scale
            )));
        }
        Ok(())
    }

    /// Stable identifier of this configuration.
    ///
    /// Lengths are rounded to femtometers and angles/ratios to 1e-12 before
    /// hashing so that values which survive a trip through the human-unit
    /// sidecar (nm, mm, um, degrees) keep their fingerprint.
    pub fn fingerprint(&self) -> String {
        let q = |v: f64, unit: f64| (v / unit).round() as i64;
        let mut h = Sha256::new();
        h.update(b"ose-optical-config-v1");
        for v in [
            q(self.lambda, 1e-15),
            q(self.theta_inc, 1e-12),
            q(self.aperture_d, 1e-15),
            q(self.dist_z, 1e-15),
            q(self.sensor.px_pitch, 1e-15),
            q(self.illum_power_scale, 1e-12),
            self.sensor.px_w as i64,
            self.sensor.px_h as i64,
            self.sensor.bit_depth as i64,
        ] {
            h.update(v.to_le_bytes());
        }
        hex::encode(&h.finalize()[..8])
    }

    /// Radius of the circular pupil in the spatial-frequency plane (cycles/m).
    ///
    /// Chosen so that the half-maximum width of the intensity autocovariance,
    /// `(2 J1(v)/v)^2`, equals `1.22 lambda z / D`.
    pub fn pupil_cutoff(&self) -> f64 {
        let half_width = expected_speckle_diameter(self) / 2.0;
        AIRY_INTENSITY_HALF_MAX_V / (2.0 * PI * half_width)
    }
}

/// Average speckle diameter in the observation plane, `1.22 lambda z / D` (m).
pub fn expected_speckle_diameter(config: &OpticalConfig) -> f64 {
    SPECKLE_DIAMETER_FACTOR * config.lambda * config.dist_z / config.aperture_d
}

/// Quantized sensor image together with the fingerprint of the setup that
/// produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecklePattern {
    intensities: Array2<u16>,
    bit_depth: u8,
    config_fingerprint: String,
}

impl SpecklePattern {
    pub fn new(intensities: Array2<u16>, bit_depth: u8, config_fingerprint: impl Into<String>) -> Result<Self> {
        let (h, w) = intensities.dim();
        if w < 16 || h < 16 {
            return Err(OseError::invalid(format!("pattern must be at least 16x16, got {w}x{h}")));
        }
        if ![8, 12, 16].contains(&bit_depth) {
            return Err(OseError::invalid(format!("bit_depth must be 8, 12 or 16, got {bit_depth}")));
        }
        let max = ((1u32 << bit_depth) - 1) as u16;
        if intensities.iter().any(|&v| v > max) {
            return Err(OseError::invalid(format!("pattern values exceed {bit_depth}-bit range")));
        }
        Ok(Self {
            intensities,
            bit_depth,
            config_fingerprint: config_fingerprint.into(),
        })
    }

    pub fn width(&self) -> usize {
        self.intensities.ncols()
    }

    pub fn height(&self) -> usize {
        self.intensities.nrows()
    }

    pub fn bit_depth(&self) -> u8 {
        self.bit_depth
    }

    pub fn intensities(&self) -> &Array2<u16> {
        &self.intensities
    }

    pub fn config_fingerprint(&self) -> &str {
        &self.config_fingerprint
    }

    pub fn with_fingerprint(mut self, fingerprint: impl Into<String>) -> Self {
        self.config_fingerprint = fingerprint.into();
        self
    }

    pub fn to_f64(&self) -> Array2<f64> {
        self.intensities.mapv(f64::from)
    }
}

/// Continuous intensity sampled on a square grid of spacing `pitch` (m).
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityField {
    pub data: Array2<f64>,
    pub pitch: f64,
}

/// Unwrapped reflection phase `4 pi h cos(theta) / lambda`.
pub fn phase_map(map: &HeightMap, lambda: f64, theta_inc: f64) -> Array2<f64> {
    let k = 4.0 * PI * theta_inc.cos() / lambda;
    map.heights().mapv(|h| k * h)
}

/// Unit-amplitude reflected field.
pub fn reflection_phase(map: &HeightMap, lambda: f64, theta_inc: f64) -> Result<Array2<Complex64>> {
    OpticalConfig {
        lambda,
        theta_inc,
        ..OpticalConfig::default()
    }
    .validate()?;
    Ok(phase_map(map, lambda, theta_inc).mapv(|p| Complex64::from_polar(1.0, p)))
}

/// Checks that the pupil, the surface sampling and the sensor window are
/// mutually consistent.
pub fn check_sampling(config: &OpticalConfig, nx: usize, ny: usize, pitch: f64) -> Result<()> {
    config.validate()?;
    let d = expected_speckle_diameter(config);
    let px = config.sensor.px_pitch;
    if d < 2.0 * px {
        return Err(OseError::Config(format!(
            "expected speckle diameter {:.3} um (1.22*lambda*z/D with lambda={} nm, dist_z={} mm, aperture_d={} mm) \
             is below 2 sensor pixels of px_pitch={:.4} um",
            d * 1e6,
            config.lambda * 1e9,
            config.dist_z * 1e3,
            config.aperture_d * 1e3,
            px * 1e6
        )));
    }
    if d < 2.0 * pitch {
        return Err(OseError::Config(format!(
            "expected speckle diameter {:.3} um is below 2 surface samples of pitch={:.4} um; \
             refine the surface grid or reduce aperture_d",
            d * 1e6,
            pitch * 1e6
        )));
    }
    let (fw, fh) = (config.sensor.px_w as f64 * px, config.sensor.px_h as f64 * px);
    let (sw, sh) = ((nx - 1) as f64 * pitch, (ny - 1) as f64 * pitch);
    if fw > sw || fh > sh {
        return Err(OseError::Config(format!(
            "sensor footprint {:.3}x{:.3} mm (px_w={}, px_h={}, px_pitch={:.4} um) exceeds the surface extent {:.3}x{:.3} mm",
            fw * 1e3,
            fh * 1e3,
            config.sensor.px_w,
            config.sensor.px_h,
            px * 1e6,
            sw * 1e3,
            sh * 1e3
        )));
    }
    Ok(())
}

/// Image-plane intensity of a complex object field sampled at `pitch`.
pub fn image_field(field: &Array2<Complex64>, pitch: f64, config: &OpticalConfig) -> IntensityField {
    let (ny, nx) = field.dim();
    let (gx, gy) = (next_fast_len(nx), next_fast_len(ny));
    let mut buf = vec![Complex64::default(); gx * gy];
    for ((y, x), v) in field.indexed_iter() {
        buf[y * gx + x] = *v;
    }
    let plan = Fft2::new(gx, gy);
    plan.forward_padded(&mut buf, ny);
    let cutoff2 = config.pupil_cutoff().powi(2);
    for ky in 0..gy {
        let fy = signed_index(ky, gy) as f64 / (gy as f64 * pitch);
        for kx in 0..gx {
            let fx = signed_index(kx, gx) as f64 / (gx as f64 * pitch);
            if fx * fx + fy * fy > cutoff2 {
                buf[ky * gx + kx] = Complex64::default();
            }
        }
    }
    plan.inverse(&mut buf);
    IntensityField {
        data: Array2::from_shape_fn((ny, nx), |(y, x)| buf[y * gx + x].norm_sqr()),
        pitch,
    }
}

/// Image-plane intensity of `map` before it reaches the sensor.
pub fn simulate_intensity(map: &HeightMap, config: &OpticalConfig) -> Result<IntensityField> {
    check_sampling(config, map.nx(), map.ny(), map.pitch())?;
    let field = reflection_phase(map, config.lambda, config.theta_inc)?;
    Ok(image_field(&field, map.pitch(), config))
}

/// Full pipeline: reflection, pupil filtering, detection, sensor capture.
pub fn simulate_speckle(map: &HeightMap, config: &OpticalConfig, noise_seed: u64) -> Result<SpecklePattern> {
    let intensity = simulate_intensity(map, config)?;
    let pattern = sensor_capture(&intensity, &config.sensor, config.illum_power_scale, noise_seed)?;
    Ok(pattern.with_fingerprint(config.fingerprint()))
}

/// Bilinear resample of `field` onto the sensor pixel centers, with the
/// sensor centered on the field.
pub fn resample_to_sensor(field: &IntensityField, sensor: &SensorSpec) -> Array2<f64> {
    let (ny, nx) = field.data.dim();
    let cx = (nx - 1) as f64 / 2.0;
    let cy = (ny - 1) as f64 / 2.0;
    let step = sensor.px_pitch / field.pitch;
    let ox = (sensor.px_w - 1) as f64 / 2.0;
    let oy = (sensor.px_h - 1) as f64 / 2.0;
    Array2::from_shape_fn((sensor.px_h, sensor.px_w), |(i, j)| {
        let u = cx + (j as f64 - ox) * step;
        let v = cy + (i as f64 - oy) * step;
        bilinear(field.data.view(), u, v)
    })
}

/// Bilinear sample with clamping at the borders.
pub(crate) fn bilinear(data: ndarray::ArrayView2<f64>, u: f64, v: f64) -> f64 {
    let (ny, nx) = data.dim();
    let u = u.clamp(0.0, (nx - 1) as f64);
    let v = v.clamp(0.0, (ny - 1) as f64);
    let x0 = (u.floor() as usize).min(nx - 2);
    let y0 = (v.floor() as usize).min(ny - 2);
    let (fx, fy) = (u - x0 as f64, v - y0 as f64);
    let top = data[[y0, x0]] * (1.0 - fx) + data[[y0, x0 + 1]] * fx;
    let bot = data[[y0 + 1, x0]] * (1.0 - fx) + data[[y0 + 1, x0 + 1]] * fx;
    top * (1.0 - fy) + bot * fy
}

/// Camera model: resample, auto-expose the mean to 25% of full scale times
/// `exposure`, add read noise, fold negatives, clip and quantize.
pub fn sensor_capture(field: &IntensityField, sensor: &SensorSpec, exposure: f64, noise_seed: u64) -> Result<SpecklePattern> {
    if field.data.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(OseError::invalid("intensity field must be finite and non-negative"));
    }
    let (ny, nx) = field.data.dim();
    if nx < 2 || ny < 2 {
        return Err(OseError::invalid("intensity field must be at least 2x2"));
    }
    let resampled = resample_to_sensor(field, sensor);
    let full = sensor.full_scale() as f64;
    let mean = resampled.mean().unwrap_or(0.0);
    let gain = if mean > 0.0 {
        exposure * SENSOR_MEAN_FILL * full / mean
    } else {
        0.0
    };

    let mut rng = seed::rng(noise_seed, Stream::Sensor);
    let noise = Normal::new(0.0, READ_NOISE_COUNTS).expect("valid normal");
    let mut counts = Array2::<u16>::zeros(resampled.dim());
    Zip::from(&mut counts).and(&resampled).for_each(|c, &s| {
        let v = (s * gain + noise.sample(&mut rng)).abs();
        *c = v.min(full).round() as u16;
    });
    SpecklePattern::new(counts, sensor.bit_depth, String::new())
}

/// Speckle pattern produced by a holographic copy of `genuine` recorded at
/// `enroll` and replayed at `challenge`.
///
/// The copy stores the object field of the recording setup. Replayed at a
/// different wavelength its phase scales by `lambda_e / lambda_c` and its
/// transverse geometry magnifies by `lambda_c / lambda_e` about the optical
/// axis; it also does not follow the `cos(theta)` foreshortening that a real
/// relief shows when the incidence angle changes.
pub fn simulate_hologram_copy(
    genuine: &HeightMap,
    enroll: &OpticalConfig,
    challenge: &OpticalConfig,
    noise_seed: u64,
) -> Result<SpecklePattern> {
    enroll.validate()?;
    check_sampling(challenge, genuine.nx(), genuine.ny(), genuine.pitch())?;
    let stored = phase_map(genuine, enroll.lambda, enroll.theta_inc);
    let ratio = enroll.lambda / challenge.lambda;
    let replay = if ratio == 1.0 {
        stored
    } else {
        let (ny, nx) = stored.dim();
        let cx = (nx - 1) as f64 / 2.0;
        let cy = (ny - 1) as f64 / 2.0;
        // Magnification M = 1/ratio, so the replayed point p samples c + (p - c) / M.
        Array2::from_shape_fn((ny, nx), |(y, x)| {
            let u = cx + (x as f64 - cx) * ratio;
            let v = cy + (y as f64 - cy) * ratio;
            ratio * bilinear(stored.view(), u, v)
        })
    };
    let field = replay.mapv(|p| Complex64::from_polar(1.0, p));
    let intensity = image_field(&field, genuine.pitch(), challenge);
    let pattern = sensor_capture(&intensity, &challenge.sensor, challenge.illum_power_scale, noise_seed)?;
    Ok(pattern.with_fingerprint(challenge.fingerprint()))
}

/// Full width at half maximum of the normalized autocovariance central lobe,
/// averaged over the four axis directions, in pixels.
pub fn measured_speckle_diameter(pattern: &SpecklePattern) -> Result<f64> {
    autocovariance_fwhm(&pattern.to_f64())
}

pub fn autocovariance_fwhm(image: &Array2<f64>) -> Result<f64> {
    Ok(2.0 * crate::stats::autocovariance_crossing(image, 0.5)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{generate_surface, Provenance, SurfaceParams};

    fn flat(value: f64) -> HeightMap {
        HeightMap::new(Array2::from_elem((8, 8), value), 1e-6, Provenance::Loaded).unwrap()
    }

    #[test]
    fn flat_surface_has_zero_phase() {
        let f = reflection_phase(&flat(0.0), 650e-9, 0.0).unwrap();
        assert!(f.iter().all(|c| (c - Complex64::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn half_wave_height_wraps_to_identity() {
        let lambda = 650e-9;
        let p = phase_map(&flat(lambda / 2.0), lambda, 0.0);
        assert!(p.iter().all(|&v| (v - 2.0 * PI).abs() < 1e-12));
        let f = reflection_phase(&flat(lambda / 2.0), lambda, 0.0).unwrap();
        assert!(f.iter().all(|c| (c - Complex64::new(1.0, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn oblique_incidence_halves_phase_at_60_degrees() {
        let m = generate_surface(&SurfaceParams::new(300e-9, 4e-6, 2), 16, 16, 1e-6).unwrap();
        let p0 = phase_map(&m, 650e-9, 0.0);
        let p60 = phase_map(&m, 650e-9, 60f64.to_radians());
        for (a, b) in p0.iter().zip(p60.iter()) {
            assert!((b - 0.5 * a).abs() < 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn invalid_optics_rejected() {
        let m = flat(0.0);
        assert!(reflection_phase(&m, 0.0, 0.0).is_err());
        assert!(reflection_phase(&m, 650e-9, PI / 2.0).is_err());
        let mut c = OpticalConfig::default();
        c.sensor.bit_depth = 10;
        assert!(c.validate().is_err());
    }

    #[test]
    fn speckle_diameter_formula() {
        let c = OpticalConfig::default();
        let d = expected_speckle_diameter(&c);
        assert!((d - 10.0805e-6).abs() < 0.001e-6, "{d}");
        let d2 = expected_speckle_diameter(&c.with_aperture(2.0 * c.aperture_d));
        assert!((d2 - d / 2.0).abs() < 1e-18);
        let px = d / SensorSpec::CMOS_5MP_PITCH;
        assert!((px - 4.527).abs() < 0.01, "{px}");
    }

    #[test]
    fn fingerprint_is_stable_and_discriminating() {
        let a = OpticalConfig::default();
        assert_eq!(a.fingerprint(), OpticalConfig::default().fingerprint());
        assert_ne!(a.fingerprint(), a.with_lambda(635e-9).fingerprint());
        // Value reconstructed from a nanometer string keeps the fingerprint.
        let nm: f64 = format!("{}", a.lambda * 1e9).parse().unwrap();
        assert_eq!(a.with_lambda(nm * 1e-9).fingerprint(), a.fingerprint());
    }

    #[test]
    fn dark_frame_is_near_zero() {
        let field = IntensityField {
            data: Array2::zeros((64, 64)),
            pitch: 1e-6,
        };
        let sensor = SensorSpec {
            px_w: 32,
            px_h: 32,
            px_pitch: 1e-6,
            bit_depth: 8,
        };
        let p = sensor_capture(&field, &sensor, 1.0, 3).unwrap();
        assert!(p.intensities().iter().all(|&v| v <= 5));
        let mean = p.to_f64().mean().unwrap();
        assert!(mean < 1.5, "{mean}");
    }

    #[test]
    fn overexposure_saturates_bright_pixels() {
        let field = IntensityField {
            data: Array2::from_shape_fn((64, 64), |(y, x)| ((x * 7 + y * 13) % 17) as f64),
            pitch: 1e-6,
        };
        let sensor = SensorSpec {
            px_w: 32,
            px_h: 32,
            px_pitch: 1e-6,
            bit_depth: 8,
        };
        let normal = sensor_capture(&field, &sensor, 1.0, 5).unwrap();
        assert!(normal.intensities().iter().all(|&v| v < 255));
        let hot = sensor_capture(&field, &sensor, 4.0, 5).unwrap();
        assert!(hot.intensities().iter().any(|&v| v == 255));
        assert_eq!(hot, sensor_capture(&field, &sensor, 4.0, 5).unwrap());
    }

    #[test]
    fn sensor_mean_lands_at_quarter_scale() {
        let field = IntensityField {
            data: Array2::from_elem((40, 40), 3.7),
            pitch: 1e-6,
        };
        let sensor = SensorSpec {
            px_w: 20,
            px_h: 20,
            px_pitch: 1e-6,
            bit_depth: 12,
        };
        let p = sensor_capture(&field, &sensor, 1.0, 1).unwrap();
        let mean = p.to_f64().mean().unwrap();
        assert!((mean - 0.25 * 4095.0).abs() < 1.0, "{mean}");
    }

    #[test]
    fn white_noise_fwhm_is_one_pixel() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let img = Array2::from_shape_fn((256, 256), |_| rng.random::<f64>());
        let fwhm = autocovariance_fwhm(&img).unwrap();
        assert!((fwhm - 1.0).abs() < 0.1, "{fwhm}");
    }

    #[test]
    fn constant_image_is_degenerate() {
        let p = SpecklePattern::new(Array2::from_elem((32, 32), 7u16), 8, "x").unwrap();
        assert!(matches!(measured_speckle_diameter(&p), Err(OseError::Degenerate(_))));
    }

    #[test]
    fn nyquist_guard_names_parameters() {
        let m = generate_surface(&SurfaceParams::default(), 64, 64, 2e-6).unwrap();
        let c = OpticalConfig::default().with_aperture(40e-3);
        let err = simulate_speckle(&m, &c, 0).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, OseError::Config(_)));
        assert!(msg.contains("aperture_d") && msg.contains("px_pitch"), "{msg}");
    }

    #[test]
    fn sensor_window_must_fit_surface() {
        let m = generate_surface(&SurfaceParams::default(), 64, 64, 2e-6).unwrap();
        let err = simulate_speckle(&m, &OpticalConfig::default(), 0).unwrap_err();
        assert!(err.to_string().contains("exceeds the surface extent"));
    }
}
