use std::f64::consts::TAU;

use ndarray::Array2;
use num_complex::Complex64;
use ose_core::optics::{image_field, phase_map, reflection_phase, simulate_speckle, OpticalConfig};
use ose_core::surface::{generate_surface, HeightMap, Provenance, SurfaceParams};
use proptest::prelude::*;

fn wrapped_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn phase_is_linear_in_height(seed in any::<u64>(), alpha in -4.0f64..4.0, lambda_nm in 400.0f64..900.0) {
        let map = generate_surface(&SurfaceParams::new(300e-9, 6e-6, seed), 16, 16, 2e-6).unwrap();
        let scaled = HeightMap::new(map.heights() * alpha, map.pitch(), Provenance::Loaded).unwrap();
        let lambda = lambda_nm * 1e-9;
        let base = reflection_phase(&map, lambda, 0.2).unwrap();
        let got = reflection_phase(&scaled, lambda, 0.2).unwrap();
        let unwrapped = phase_map(&map, lambda, 0.2);
        for ((b, g), p) in base.iter().zip(got.iter()).zip(unwrapped.iter()) {
            prop_assert!(wrapped_diff(g.arg(), alpha * p) < 1e-6);
            prop_assert!(wrapped_diff(b.arg(), *p) < 1e-6);
        }
    }

    #[test]
    fn pupil_never_adds_energy(seed in any::<u64>(), aperture_mm in 1.0f64..8.0) {
        let map = generate_surface(&SurfaceParams::new(500e-9, 5e-6, seed), 96, 80, 2e-6).unwrap();
        let config = OpticalConfig::default().with_aperture(aperture_mm * 1e-3);
        let field = reflection_phase(&map, config.lambda, 0.0).unwrap();
        let before: f64 = field.iter().map(Complex64::norm_sqr).sum();
        let after: f64 = image_field(&field, map.pitch(), &config).data.sum();
        prop_assert!(after <= before * (1.0 + 1e-9));
    }

    #[test]
    fn speckle_is_deterministic_in_seeds(surface_seed in any::<u64>(), noise_seed in any::<u64>()) {
        let map = generate_surface(&SurfaceParams::new(500e-9, 5e-6, surface_seed), 96, 96, 2e-6).unwrap();
        let mut config = OpticalConfig::default();
        config.sensor.px_w = 64;
        config.sensor.px_h = 64;
        let a = simulate_speckle(&map, &config, noise_seed).unwrap();
        let b = simulate_speckle(&map, &config, noise_seed).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn uniform_field_passes_the_pupil_unchanged() {
    let field = Array2::from_elem((32, 32), Complex64::new(1.0, 0.0));
    let out = image_field(&field, 2e-6, &OpticalConfig::default());
    for v in out.data.iter() {
        assert!((v - 1.0).abs() < 1e-9);
    }
}
