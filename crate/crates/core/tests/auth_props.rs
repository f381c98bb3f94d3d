use ose_core::auth::{decide, verify, verify_record, ReferenceRecord, ReferenceStore, Verdict, INCONCLUSIVE_BAND};
use ose_core::correlation::{RotationSearch, ShiftRange};
use ose_core::experiment::{pair_matrix, DeskSetup};
use ose_core::optics::{simulate_speckle, OpticalConfig};
use ose_core::surface::{generate_surface, make_replica, SurfaceParams};
use proptest::prelude::*;

fn rank(v: Verdict) -> u8 {
    match v {
        Verdict::Counterfeit => 0,
        Verdict::Inconclusive => 1,
        Verdict::Genuine => 2,
    }
}

proptest! {
    #[test]
    fn raising_the_threshold_never_helps(
        scores in prop::collection::vec(-1.0f64..1.0, 1..5),
        t in -1.0f64..1.0,
        raise in 0.0f64..1.0,
    ) {
        let low = decide(&scores, t, INCONCLUSIVE_BAND);
        let high = decide(&scores, t + raise, INCONCLUSIVE_BAND);
        prop_assert!(rank(high) <= rank(low));
        if low == Verdict::Counterfeit {
            prop_assert_eq!(high, Verdict::Counterfeit);
        }
    }

    #[test]
    fn lowering_a_score_never_helps(
        scores in prop::collection::vec(-1.0f64..1.0, 1..5),
        idx in 0usize..5,
        drop in 0.0f64..1.0,
    ) {
        let mut worse = scores.clone();
        let i = idx % scores.len();
        worse[i] -= drop;
        prop_assert!(rank(decide(&worse, 0.5, INCONCLUSIVE_BAND)) <= rank(decide(&scores, 0.5, INCONCLUSIVE_BAND)));
    }
}

fn small_config() -> OpticalConfig {
    let mut c = OpticalConfig::default();
    c.sensor.px_w = 128;
    c.sensor.px_h = 128;
    c
}

#[test]
fn stored_record_gives_bit_identical_decision() {
    let config = small_config();
    let master = generate_surface(&SurfaceParams::new(500e-9, 5e-6, 31), 256, 256, 2e-6).unwrap();
    let reference = simulate_speckle(&make_replica(&master, 65e-9, 1).unwrap(), &config, 2).unwrap();
    let test = simulate_speckle(&make_replica(&master, 65e-9, 3).unwrap(), &config, 4).unwrap();
    let search = RotationSearch::new(0.5f64.to_radians(), 0.25f64.to_radians(), ShiftRange::square(8));

    let dir = tempfile::tempdir().unwrap();
    let store = ReferenceStore::open(dir.path()).unwrap();
    let enrolled: ReferenceRecord = store.enroll("item", vec![(reference, config)]).unwrap();
    let in_memory = verify_record(&enrolled, &test, &config, 0.5, &search).unwrap();

    let reopened = ReferenceStore::open(dir.path()).unwrap();
    let from_disk = verify(&reopened, "item", &test, &config, 0.5, &search).unwrap();
    assert_eq!(in_memory, from_disk);
    assert_eq!(in_memory.to_json(), from_disk.to_json());
    assert_eq!(from_disk.verdict, Verdict::Genuine);
}

#[test]
fn desk_scale_scores_separate_by_half() {
    let setup = DeskSetup::default();
    let error = setup.config.lambda / 10.0;
    let (mut gmin, mut imax) = (f64::INFINITY, f64::NEG_INFINITY);
    for set in 1000..1020 {
        let t = pair_matrix(&setup, error, set).unwrap();
        gmin = t.same_master_scores().into_iter().fold(gmin, f64::min);
        imax = t.cross_master_scores().into_iter().fold(imax, f64::max);
    }
    assert!(gmin - imax >= 0.5, "min genuine {gmin}, max impostor {imax}");
}
