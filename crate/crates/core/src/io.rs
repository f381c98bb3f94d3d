//! On-disk formats.
//!
//! Height maps use a small binary container: magic `OSEH`, `u16` version,
//! `u32` nx, `u32` ny, `f64` pitch (m), then `nx * ny` `f32` heights (m),
//! row-major, all little-endian. Speckle patterns are 16-bit grayscale PNGs
//! with a JSON sidecar (same stem, `.json`) describing the capture setup in
//! human units.

use std::fs;
use std::path::{Path, PathBuf};

use image::{ImageBuffer, Luma};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{OseError, Result};
use crate::optics::{OpticalConfig, SensorSpec, SpecklePattern};
use crate::surface::{HeightMap, Provenance};

pub const HEIGHTMAP_MAGIC: [u8; 4] = *b"OSEH";
pub const HEIGHTMAP_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 4 + 8;

pub fn encode_heightmap(map: &HeightMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * map.nx() * map.ny());
    out.extend_from_slice(&HEIGHTMAP_MAGIC);
    out.extend_from_slice(&HEIGHTMAP_VERSION.to_le_bytes());
    out.extend_from_slice(&(map.nx() as u32).to_le_bytes());
    out.extend_from_slice(&(map.ny() as u32).to_le_bytes());
    out.extend_from_slice(&map.pitch().to_le_bytes());
    for &h in map.heights().iter() {
        out.extend_from_slice(&(h as f32).to_le_bytes());
    }
    out
}

/// Parses an `OSEH` buffer; `origin` only labels errors.
pub fn decode_heightmap(bytes: &[u8], origin: &Path) -> Result<HeightMap> {
    let bad = |reason: String| OseError::format(origin, reason);
    if bytes.len() < HEADER_LEN {
        return Err(bad(format!("{} bytes is shorter than the {HEADER_LEN}-byte header", bytes.len())));
    }
    if bytes[..4] != HEIGHTMAP_MAGIC {
        return Err(bad("missing OSEH magic".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != HEIGHTMAP_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let nx = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let ny = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    let pitch = f64::from_le_bytes(bytes[14..22].try_into().unwrap());
    let expected = nx
        .checked_mul(ny)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| bad(format!("grid {nx}x{ny} is too large")))?;
    if bytes.len() != expected {
        return Err(bad(format!(
            "expected {expected} bytes for a {nx}x{ny} grid, found {}",
            bytes.len()
        )));
    }
    let heights: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    let heights = Array2::from_shape_vec((ny, nx), heights).map_err(|e| bad(e.to_string()))?;
    HeightMap::new(heights, pitch, Provenance::Loaded).map_err(|e| bad(e.to_string()))
}

pub fn write_heightmap(path: &Path, map: &HeightMap) -> Result<()> {
    fs::write(path, encode_heightmap(map)).map_err(|e| OseError::io(path, e))
}

pub fn read_heightmap(path: &Path) -> Result<HeightMap> {
    let bytes = fs::read(path).map_err(|e| OseError::io(path, e))?;
    decode_heightmap(&bytes, path)
}

/// Capture setup stored next to a pattern PNG. Sensor width and height are
/// those of the image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSidecar {
    pub lambda_nm: f64,
    pub theta_deg: f64,
    pub aperture_mm: f64,
    pub z_mm: f64,
    pub px_pitch_um: f64,
    pub bit_depth: u8,
    pub fingerprint: String,
    /// Illumination power relative to the auto-exposed level.
    #[serde(default = "unit")]
    pub exposure: f64,
}

fn unit() -> f64 {
    1.0
}

impl PatternSidecar {
    pub fn from_config(config: &OpticalConfig) -> Self {
        Self {
            lambda_nm: config.lambda * 1e9,
            theta_deg: config.theta_inc.to_degrees(),
            aperture_mm: config.aperture_d * 1e3,
            z_mm: config.dist_z * 1e3,
            px_pitch_um: config.sensor.px_pitch * 1e6,
            bit_depth: config.sensor.bit_depth,
            fingerprint: config.fingerprint(),
            exposure: config.illum_power_scale,
        }
    }

    pub fn to_config(&self, px_w: usize, px_h: usize) -> OpticalConfig {
        OpticalConfig {
            lambda: self.lambda_nm * 1e-9,
            theta_inc: self.theta_deg.to_radians(),
            aperture_d: self.aperture_mm * 1e-3,
            dist_z: self.z_mm * 1e-3,
            sensor: SensorSpec {
                px_w,
                px_h,
                px_pitch: self.px_pitch_um * 1e-6,
                bit_depth: self.bit_depth,
            },
            illum_power_scale: self.exposure,
        }
    }
}

/// Sidecar path of a pattern or heat-map file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn encode_pattern_png(pattern: &SpecklePattern) -> Result<Vec<u8>> {
    let (w, h) = (pattern.width() as u32, pattern.height() as u32);
    let img: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(w, h, pattern.intensities().iter().copied().collect()).expect("buffer matches dimensions");
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png)
        .map_err(|e| OseError::invalid(format!("PNG encoding failed: {e}")))?;
    Ok(out.into_inner())
}

/// Writes `pattern` as a 16-bit PNG at `path` and its capture setup to the
/// sidecar. The pattern must carry the fingerprint of `config`.
pub fn write_pattern(path: &Path, pattern: &SpecklePattern, config: &OpticalConfig) -> Result<()> {
    let sidecar = PatternSidecar::from_config(config);
    if pattern.config_fingerprint() != sidecar.fingerprint {
        return Err(OseError::invalid(format!(
            "pattern fingerprint {} does not match config fingerprint {}",
            pattern.config_fingerprint(),
            sidecar.fingerprint
        )));
    }
    if (pattern.width(), pattern.height()) != (config.sensor.px_w, config.sensor.px_h)
        || pattern.bit_depth() != config.sensor.bit_depth
    {
        return Err(OseError::invalid(format!(
            "pattern {}x{} at {} bits does not match sensor {}x{} at {} bits",
            pattern.width(),
            pattern.height(),
            pattern.bit_depth(),
            config.sensor.px_w,
            config.sensor.px_h,
            config.sensor.bit_depth
        )));
    }
    fs::write(path, encode_pattern_png(pattern)?).map_err(|e| OseError::io(path, e))?;
    write_json(&sidecar_path(path), &sidecar)
}

fn read_gray(path: &Path) -> Result<(Array2<u16>, u8)> {
    let img = image::open(path).map_err(|e| match e {
        image::ImageError::IoError(io) => OseError::io(path, io),
        other => OseError::format(path, other.to_string()),
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (raw, depth): (Vec<u16>, u8) = match img {
        image::DynamicImage::ImageLuma8(g) => (g.into_raw().into_iter().map(u16::from).collect(), 8),
        image::DynamicImage::ImageLuma16(g) => (g.into_raw(), 16),
        other => return Err(OseError::format(path, format!("expected grayscale PNG, found {:?}", other.color()))),
    };
    let data = Array2::from_shape_vec((h, w), raw).expect("buffer matches dimensions");
    Ok((data, depth))
}

/// Reads any 8- or 16-bit grayscale image as a pattern without a capture
/// setup; the fingerprint is empty.
pub fn read_image(path: &Path) -> Result<SpecklePattern> {
    let (data, depth) = read_gray(path)?;
    SpecklePattern::new(data, depth, String::new()).map_err(|e| OseError::format(path, e.to_string()))
}

/// Reads a pattern PNG and its sidecar, reconstructing the capture setup.
pub fn read_pattern(path: &Path) -> Result<(SpecklePattern, OpticalConfig)> {
    let side_path = sidecar_path(path);
    let sidecar: PatternSidecar = read_json(&side_path)?;
    let (data, _) = read_gray(path)?;
    let (h, w) = data.dim();
    let pattern =
        SpecklePattern::new(data, sidecar.bit_depth, sidecar.fingerprint.clone()).map_err(|e| OseError::format(path, e.to_string()))?;
    let config = sidecar.to_config(w, h);
    config.validate().map_err(|e| OseError::format(&side_path, e.to_string()))?;
    if config.fingerprint() != sidecar.fingerprint {
        return Err(OseError::format(
            &side_path,
            format!(
                "fingerprint {} does not match the recorded parameters ({})",
                sidecar.fingerprint,
                config.fingerprint()
            ),
        ));
    }
    Ok((pattern, config))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("plain data serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| OseError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| OseError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| OseError::format(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::simulate_speckle;
    use crate::surface::{generate_surface, SurfaceParams};

    #[test]
    fn heightmap_header_layout() {
        let m = HeightMap::new(Array2::from_shape_fn((2, 3), |(y, x)| (y * 3 + x) as f64 * 1e-7), 2e-6, Provenance::Loaded)
            .unwrap();
        let b = encode_heightmap(&m);
        assert_eq!(&b[..4], b"OSEH");
        assert_eq!(u16::from_le_bytes([b[4], b[5]]), 1);
        assert_eq!(u32::from_le_bytes(b[6..10].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(b[10..14].try_into().unwrap()), 2);
        assert_eq!(f64::from_le_bytes(b[14..22].try_into().unwrap()), 2e-6);
        assert_eq!(b.len(), 22 + 6 * 4);
        // Row-major: second value is (y=0, x=1).
        assert_eq!(f32::from_le_bytes(b[26..30].try_into().unwrap()), 1e-7f32);
    }

    #[test]
    fn heightmap_round_trip_is_f32_exact() {
        let dir = tempfile::tempdir().unwrap();
        let m = generate_surface(&SurfaceParams::new(500e-9, 10e-6, 3), 40, 24, 2e-6).unwrap();
        let p = dir.path().join("m.oseh");
        write_heightmap(&p, &m).unwrap();
        let back = read_heightmap(&p).unwrap();
        assert_eq!((back.nx(), back.ny(), back.pitch()), (40, 24, 2e-6));
        for (a, b) in m.heights().iter().zip(back.heights()) {
            assert_eq!(*a as f32 as f64, *b);
        }
        // Re-encoding the loaded map is byte-identical.
        assert_eq!(encode_heightmap(&back), fs::read(&p).unwrap());
    }

    #[test]
    fn heightmap_rejects_corruption() {
        let m = HeightMap::new(Array2::zeros((2, 2)), 1e-6, Provenance::Loaded).unwrap();
        let good = encode_heightmap(&m);
        let origin = Path::new("x.oseh");
        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(matches!(decode_heightmap(&bad_magic, origin), Err(OseError::Format { .. })));
        assert!(decode_heightmap(&good[..good.len() - 1], origin).is_err());
        assert!(decode_heightmap(&good[..10], origin).is_err());
        let mut bad_version = good.clone();
        bad_version[4] = 9;
        assert!(decode_heightmap(&bad_version, origin).is_err());
        let mut nan = good.clone();
        nan[22..26].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(decode_heightmap(&nan, origin).is_err());
    }

    #[test]
    fn pattern_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = generate_surface(&SurfaceParams::new(500e-9, 5e-6, 1), 128, 128, 2e-6).unwrap();
        let mut cfg = OpticalConfig::default().with_lambda(635e-9).with_theta(10f64.to_radians());
        cfg.sensor.px_w = 64;
        cfg.sensor.px_h = 48;
        cfg.sensor.bit_depth = 12;
        let pat = simulate_speckle(&m, &cfg, 5).unwrap();
        let p = dir.path().join("p.png");
        write_pattern(&p, &pat, &cfg).unwrap();
        let (back, back_cfg) = read_pattern(&p).unwrap();
        assert_eq!(back, pat);
        assert_eq!(back_cfg.fingerprint(), cfg.fingerprint());
        let side: serde_json::Value = serde_json::from_str(&fs::read_to_string(sidecar_path(&p)).unwrap()).unwrap();
        for key in ["lambda_nm", "theta_deg", "aperture_mm", "z_mm", "px_pitch_um", "bit_depth", "fingerprint"] {
            assert!(side.get(key).is_some(), "{key}");
        }
        assert!((side["lambda_nm"].as_f64().unwrap() - 635.0).abs() < 1e-9);
        let img = image::open(&p).unwrap();
        assert_eq!(img.color(), image::ColorType::L16);
        let plain = read_image(&p).unwrap();
        assert_eq!(plain.intensities(), pat.intensities());
        assert_eq!(plain.config_fingerprint(), "");
    }

    #[test]
    fn pattern_write_checks_fingerprint() {
        let dir = tempfile::tempdir().unwrap();
        let pat = SpecklePattern::new(Array2::zeros((16, 16)), 8, "deadbeef").unwrap();
        let mut cfg = OpticalConfig::default();
        cfg.sensor.px_w = 16;
        cfg.sensor.px_h = 16;
        assert!(write_pattern(&dir.path().join("p.png"), &pat, &cfg).is_err());
    }

    #[test]
    fn tampered_sidecar_detected() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = OpticalConfig::default();
        cfg.sensor.px_w = 16;
        cfg.sensor.px_h = 16;
        let pat = SpecklePattern::new(Array2::from_elem((16, 16), 7), 8, cfg.fingerprint()).unwrap();
        let p = dir.path().join("p.png");
        write_pattern(&p, &pat, &cfg).unwrap();
        let mut side: PatternSidecar = read_json(&sidecar_path(&p)).unwrap();
        side.lambda_nm = 700.0;
        write_json(&sidecar_path(&p), &side).unwrap();
        assert!(matches!(read_pattern(&p), Err(OseError::Format { .. })));
        fs::remove_file(sidecar_path(&p)).unwrap();
        assert!(matches!(read_pattern(&p), Err(OseError::Io { .. })));
    }
}
