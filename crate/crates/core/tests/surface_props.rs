use approx::assert_relative_eq;
use ose_core::correlation::zncc;
use ose_core::surface::{
    generate_surface, make_replica_with, measured_corr_len, occlude, Fill, Region, ReplicaParams, SurfaceParams,
};
use proptest::prelude::*;

#[test]
fn rms_converges_over_ten_seeds() {
    let sigma = 500e-9;
    let mean_rms: f64 = (0..10)
        .map(|seed| {
            generate_surface(&SurfaceParams::new(sigma, 8e-6, seed), 256, 256, 2e-6)
                .unwrap()
                .rms()
        })
        .sum::<f64>()
        / 10.0;
    assert!((mean_rms / sigma - 1.0).abs() < 0.02, "mean rms {mean_rms}");
}

#[test]
fn corr_len_is_recovered_for_resolved_lengths() {
    for (corr_len, seed) in [(8e-6, 1), (12e-6, 2), (20e-6, 3)] {
        let map = generate_surface(&SurfaceParams::new(500e-9, corr_len, seed), 512, 512, 2e-6).unwrap();
        let measured = measured_corr_len(&map).unwrap();
        assert!(
            (measured / corr_len - 1.0).abs() < 0.15,
            "corr_len {corr_len}: measured {measured}"
        );
    }
}

#[test]
fn replica_error_is_independent_of_master() {
    for seed in 0..5 {
        let master = generate_surface(&SurfaceParams::new(500e-9, 8e-6, seed), 256, 256, 2e-6).unwrap();
        let params = ReplicaParams::new(65e-9, 100 + seed).with_corr_len(2e-6);
        let replica = make_replica_with(&master, &params).unwrap();
        let error = replica.heights() - master.heights();
        let r = zncc(master.heights().view(), error.view()).unwrap();
        assert!(r.abs() < 0.05, "seed {seed}: zncc {r}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generation_is_a_pure_function_of_seed(seed in any::<u64>(), n in 16usize..64) {
        let p = SurfaceParams::new(300e-9, 6e-6, seed);
        let a = generate_surface(&p, n, n + 3, 2e-6).unwrap();
        let b = generate_surface(&p, n, n + 3, 2e-6).unwrap();
        prop_assert_eq!(a.heights(), b.heights());
    }

    #[test]
    fn rms_is_within_five_percent_on_large_grids(seed in any::<u64>()) {
        let map = generate_surface(&SurfaceParams::new(500e-9, 6e-6, seed), 256, 256, 2e-6).unwrap();
        prop_assert!((map.rms() / 500e-9 - 1.0).abs() < 0.05);
    }

    #[test]
    fn replica_error_rms_is_exact(seed in any::<u64>(), err_nm in 1.0f64..300.0) {
        let master = generate_surface(&SurfaceParams::new(500e-9, 6e-6, 1), 64, 64, 2e-6).unwrap();
        let params = ReplicaParams::new(err_nm * 1e-9, seed).with_corr_len(4e-6);
        let replica = make_replica_with(&master, &params).unwrap();
        let e = replica.heights() - master.heights();
        let rms = (e.mapv(|v| v * v).mean().unwrap()).sqrt();
        assert_relative_eq!(rms, err_nm * 1e-9, max_relative = 1e-9);
    }

    #[test]
    fn occlusion_leaves_outside_untouched(x0 in 0usize..32, y0 in 0usize..32, w in 1usize..32, h in 1usize..32) {
        let map = generate_surface(&SurfaceParams::new(500e-9, 6e-6, 5), 64, 64, 2e-6).unwrap();
        let out = occlude(&map, Region::Rect { x0, y0, width: w, height: h }, Fill::Flat).unwrap();
        for ((y, x), &v) in out.heights().indexed_iter() {
            let inside = (x0..x0 + w).contains(&x) && (y0..y0 + h).contains(&y);
            if inside {
                prop_assert_eq!(v, 0.0);
            } else {
                prop_assert_eq!(v, map.heights()[[y, x]]);
            }
        }
    }
}
