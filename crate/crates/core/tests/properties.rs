//! Property tests for the model and bound invariants.

use proptest::prelude::*;
use relaxcrb_core::presets::reference_protocols;
use relaxcrb_core::{
    crb_geometric, evaluate_crb, timing_range, weighting_vector, ConstraintSet, DesignSpec,
    Family, NoiseModel, SequenceProtocol, TissueParams,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weighting_is_invariant_to_m0(
        t1 in 300.0f64..4000.0,
        t2 in 20.0f64..300.0,
        m0 in 0.5f64..10000.0,
    ) {
        for (_, protocol) in reference_protocols::<f64>() {
            let unit = TissueParams::new(1.0, t1, t2).unwrap();
            let scaled = TissueParams::new(m0, t1, t2).unwrap();
            let a = weighting_vector(&protocol, &unit).unwrap();
            let b = weighting_vector(&protocol, &scaled).unwrap();
            prop_assert_eq!(a.h, b.h);
        }
    }

    #[test]
    fn sr_and_cir_recovery_curves_increase_with_ti(
        t1 in 500.0f64..3000.0,
        step in 50.0f64..1500.0,
        n in 3usize..12,
    ) {
        let end = step * (n as f64 - 1.0) + 1.0;
        let ti = timing_range(0.0, step, end);
        let tissue = TissueParams::new(3000.0, t1, 85.0).unwrap();
        for protocol in [
            SequenceProtocol::Sr { ti: ti.clone() },
            SequenceProtocol::Cir { ti: ti.clone(), w: 5.0 * t1 },
        ] {
            let w = weighting_vector(&protocol, &tissue).unwrap();
            prop_assert!(w.h.windows(2).all(|p| p[1] > p[0]));
        }
    }

    #[test]
    fn orthogonality_factors_stay_in_unit_interval(
        t1 in 1000.0f64..2000.0,
        t2 in 60.0f64..110.0,
    ) {
        for (name, protocol) in reference_protocols::<f64>() {
            let tissue = TissueParams::new(3000.0, t1, t2).unwrap();
            let w = weighting_vector(&protocol, &tissue).unwrap();
            let g = crb_geometric(&w, 100.0).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&g.orth_t1), "{} orth1 {}", name, g.orth_t1);
            if let Some(o2) = g.orth_t2 {
                prop_assert!((0.0..=1.0 + 1e-12).contains(&o2), "{} orth2 {}", name, o2);
            }
        }
    }

    #[test]
    fn efficiency_scales_linearly_in_snr_and_inverse_sqrt_time(
        t1 in 1000.0f64..2000.0,
        snr in 20.0f64..400.0,
    ) {
        let protocol = relaxcrb_core::presets::cir_reference::<f64>();
        let tissue = TissueParams::new(3000.0, t1, 85.0).unwrap();
        let g1 = evaluate_crb(&protocol, &tissue, &NoiseModel::from_snr(3000.0, snr))
            .unwrap()
            .gamma_t1;
        let g2 = evaluate_crb(&protocol, &tissue, &NoiseModel::from_snr(3000.0, 2.0 * snr))
            .unwrap()
            .gamma_t1;
        prop_assert!((g2 / g1 - 2.0).abs() < 1e-9);
    }

}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn design_search_returns_structurally_valid_protocols(
        seed in 0u64..5000,
        family_idx in 0usize..7,
        n in 3usize..10,
    ) {
        let family = [
            Family::Cir, Family::Sr, Family::Fir1, Family::Fir2,
            Family::Ll, Family::Seir, Family::Despot,
        ][family_idx];
        let mut spec = DesignSpec::new(family);
        spec.n_acq = vec![n];
        spec.multistart = 1;
        spec.rng_seed = seed;
        spec.constraints = ConstraintSet::default();
        // Coarse grid keeps each search cheap; validity is grid-independent.
        let range = relaxcrb_core::TissueRange::new(
            1000.0, 2000.0, 60.0, 110.0, 3000.0, 3, 2,
        ).unwrap();
        let noise = NoiseModel::from_snr(3000.0, 100.0);
        match relaxcrb_core::optimize_protocol(&spec, &range, &noise) {
            Ok(r) => prop_assert!(r.protocol.validate().is_ok()),
            Err(_) => {} // infeasible configurations may reject
        }
    }
}
