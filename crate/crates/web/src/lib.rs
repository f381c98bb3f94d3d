//! WebAssembly bindings for the single-page speckle demo in `www/`.
//!
//! Operations run on a reduced grid so they stay interactive in a browser tab.

use ose_core::correlation::{match_with_rotation_map, RotationSearch, ShiftRange};
use ose_core::optics::{expected_speckle_diameter, measured_speckle_diameter, simulate_speckle, OpticalConfig};
use ose_core::surface::{generate_surface, make_replica, HeightMap, SurfaceParams, DEFAULT_CORR_LEN, DEFAULT_SIGMA_H};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const GRID: usize = 384;
const PITCH: f64 = 2e-6;
const SENSOR: usize = 192;
const MAX_SHIFT: usize = 12;

fn config(lambda_nm: f64, aperture_mm: f64) -> OpticalConfig {
    let mut c = OpticalConfig::default().with_lambda(lambda_nm * 1e-9).with_aperture(aperture_mm * 1e-3);
    c.sensor.px_w = SENSOR;
    c.sensor.px_h = SENSOR;
    c
}

fn master(seed: u64) -> Result<HeightMap, String> {
    generate_surface(&SurfaceParams::new(DEFAULT_SIGMA_H, DEFAULT_CORR_LEN, seed), GRID, GRID, PITCH)
        .map_err(|e| e.to_string())
}

/// 8-bit grayscale image, row-major.
#[derive(Debug, Clone, Serialize)]
pub struct Gray {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

/// Speckle pattern of a freshly generated relief, scaled to 8 bits.
pub fn speckle_image(seed: u64, lambda_nm: f64, aperture_mm: f64) -> Result<Gray, String> {
    let map = master(seed)?;
    let c = config(lambda_nm, aperture_mm);
    let p = simulate_speckle(&map, &c, seed).map_err(|e| e.to_string())?;
    let full = c.sensor.full_scale() as f64;
    Ok(Gray {
        width: p.width(),
        height: p.height(),
        pixels: p.intensities().iter().map(|&v| (v as f64 / full * 255.0).round() as u8).collect(),
    })
}

/// Coefficient map of a reference capture against a test capture.
#[derive(Debug, Clone, Serialize)]
pub struct HeatmapView {
    pub side: usize,
    pub values: Vec<f64>,
    pub peak: f64,
    pub dx: i64,
    pub dy: i64,
    pub rotation_deg: f64,
}

/// Reference is a replica of master `seed`; the test is another replica of
/// the same master when `same` is true, else a replica of a different one.
pub fn compare(seed: u64, same: bool, error_nm: f64) -> Result<HeatmapView, String> {
    let c = config(650.0, 5.9);
    let m = master(seed)?;
    let other = if same { m.clone() } else { master(seed.wrapping_add(0x5eed))? };
    let err = |e: ose_core::OseError| e.to_string();
    let a = simulate_speckle(&make_replica(&m, error_nm * 1e-9, 1).map_err(err)?, &c, 1).map_err(err)?;
    let b = simulate_speckle(&make_replica(&other, error_nm * 1e-9, 2).map_err(err)?, &c, 2).map_err(err)?;
    let search = RotationSearch::new(0.5f64.to_radians(), 0.25f64.to_radians(), ShiftRange::square(MAX_SHIFT));
    let (r, map) = match_with_rotation_map(a.to_f64().view(), b.to_f64().view(), &search).map_err(err)?;
    Ok(HeatmapView {
        side: 2 * MAX_SHIFT + 1,
        values: map.values().iter().copied().collect(),
        peak: r.peak,
        dx: r.dx,
        dy: r.dy,
        rotation_deg: r.rotation.to_degrees(),
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SizePoint {
    pub aperture_mm: f64,
    pub expected_px: f64,
    pub measured_px: f64,
}

/// Expected and measured speckle diameter over a range of apertures.
pub fn size_sweep(seed: u64, lambda_nm: f64, apertures_mm: &[f64]) -> Result<Vec<SizePoint>, String> {
    let map = master(seed)?;
    apertures_mm
        .iter()
        .map(|&d| {
            let c = config(lambda_nm, d);
            let p = simulate_speckle(&map, &c, seed).map_err(|e| e.to_string())?;
            Ok(SizePoint {
                aperture_mm: d,
                expected_px: expected_speckle_diameter(&c) / c.sensor.px_pitch,
                measured_px: measured_speckle_diameter(&p).map_err(|e| e.to_string())?,
            })
        })
        .collect()
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    r.map(|v| serde_json::to_string(&v).expect("plain data serializes"))
        .map_err(|e| JsError::new(&e))
}

/// JSON `{width, height, pixels}`.
#[wasm_bindgen(js_name = speckleImage)]
pub fn speckle_image_js(seed: u32, lambda_nm: f64, aperture_mm: f64) -> Result<String, JsError> {
    to_js(speckle_image(seed as u64, lambda_nm, aperture_mm))
}

/// JSON `{side, values, peak, dx, dy, rotation_deg}`.
#[wasm_bindgen(js_name = compare)]
pub fn compare_js(seed: u32, same: bool, error_nm: f64) -> Result<String, JsError> {
    to_js(compare(seed as u64, same, error_nm))
}

/// JSON array of `{aperture_mm, expected_px, measured_px}`.
#[wasm_bindgen(js_name = sizeSweep)]
pub fn size_sweep_js(seed: u32, lambda_nm: f64, apertures_mm: Vec<f64>) -> Result<String, JsError> {
    to_js(size_sweep(seed as u64, lambda_nm, &apertures_mm))
}
