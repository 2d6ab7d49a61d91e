//! Analytic sensitivities against the central finite-difference oracle.

use relaxcrb_core::presets::reference_protocols;
use relaxcrb_core::{
    jacobian, linspace, raw_weights, sensitivity_numeric, weighting_vector, RelaxParam,
    SequenceProtocol, TissueParams,
};

const FD_STEP: f64 = 1e-5;
const TOL: f64 = 1e-5;

/// Entrywise relative deviation with a floor at 1e-5 of the vector scale:
/// entries that small are negligible in every norm, and an exactly-zero
/// analytic entry would otherwise divide finite-difference rounding noise
/// by itself.
fn rel_dev(a: &[f64], b: &[f64]) -> f64 {
    let scale = a
        .iter()
        .chain(b)
        .fold(0.0f64, |m, &v| m.max(v.abs()))
        .max(1e-300);
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-5 * scale))
        .fold(0.0, f64::max)
}

fn grid_5x5() -> Vec<TissueParams<f64>> {
    let mut pts = Vec::new();
    for &t1 in &linspace(1000.0, 2000.0, 5) {
        for &t2 in &linspace(60.0, 110.0, 5) {
            pts.push(TissueParams::new(3000.0, t1, t2).unwrap());
        }
    }
    pts
}

#[test]
fn analytic_sensitivities_match_central_differences_everywhere() {
    for (name, protocol) in reference_protocols::<f64>() {
        for tissue in grid_5x5() {
            let w = weighting_vector(&protocol, &tissue).unwrap();
            let fd1 = sensitivity_numeric(&protocol, &tissue, RelaxParam::T1, FD_STEP).unwrap();
            let d1 = rel_dev(&w.dh_dt1, &fd1);
            assert!(
                d1 <= TOL,
                "{name} dT1 deviation {d1:.2e} at T1={} T2={}",
                tissue.t1,
                tissue.t2
            );
            if let Some(dh2) = &w.dh_dt2 {
                let fd2 =
                    sensitivity_numeric(&protocol, &tissue, RelaxParam::T2, FD_STEP).unwrap();
                let d2 = rel_dev(dh2, &fd2);
                assert!(
                    d2 <= TOL,
                    "{name} dT2 deviation {d2:.2e} at T1={} T2={}",
                    tissue.t1,
                    tissue.t2
                );
            }
        }
    }
}

#[test]
fn jacobian_first_column_is_h_and_scales_with_m0() {
    for (name, protocol) in reference_protocols::<f64>() {
        let t_small = TissueParams::new(1.0, 1400.0, 90.0).unwrap();
        let t_big = TissueParams::new(3000.0, 1400.0, 90.0).unwrap();
        let w = weighting_vector(&protocol, &t_big).unwrap();
        let j1 = jacobian(&protocol, &t_small).unwrap();
        let j2 = jacobian(&protocol, &t_big).unwrap();
        assert_eq!(j2.cols[0], w.h, "{name}: column 1 must equal h");
        assert_eq!(j1.cols[0], j2.cols[0], "{name}: column 1 independent of m0");
        for p in 1..j1.n_params() {
            for (a, b) in j1.cols[p].iter().zip(&j2.cols[p]) {
                let scaled = *a * 3000.0;
                assert!(
                    (scaled - *b).abs() <= 1e-9 * b.abs().max(1e-12),
                    "{name}: sensitivity columns scale with m0"
                );
            }
        }
    }
}

#[test]
fn jacobian_matches_finite_difference_of_signal() {
    // Signal s(theta) = m0 * h(t1, t2); differentiate each parameter.
    let protocol = relaxcrb_core::presets::cir_reference::<f64>();
    let tissue = TissueParams::new(3000.0, 1500.0, 85.0).unwrap();
    let j = jacobian(&protocol, &tissue).unwrap();
    let s = |m0: f64, t1: f64| -> Vec<f64> {
        raw_weights(&protocol, t1, 85.0)
            .unwrap()
            .iter()
            .map(|h| m0 * h)
            .collect()
    };
    let d = 1e-5;
    let fd_m0: Vec<f64> = {
        let hi = s(3000.0 * (1.0 + d), 1500.0);
        let lo = s(3000.0 * (1.0 - d), 1500.0);
        hi.iter()
            .zip(&lo)
            .map(|(a, b)| (a - b) / (2.0 * d * 3000.0))
            .collect()
    };
    let fd_t1: Vec<f64> = {
        let hi = s(3000.0, 1500.0 * (1.0 + d));
        let lo = s(3000.0, 1500.0 * (1.0 - d));
        hi.iter()
            .zip(&lo)
            .map(|(a, b)| (a - b) / (2.0 * d * 1500.0))
            .collect()
    };
    assert!(rel_dev(&j.cols[0], &fd_m0) <= 1e-5);
    assert!(rel_dev(&j.cols[1], &fd_t1) <= 1e-5);
}

#[test]
fn numeric_oracle_agrees_for_hand_built_protocol() {
    // Non-preset parameters to keep the oracle honest off the beaten path.
    let protocol = SequenceProtocol::Seir {
        tr_ir: 2000.0,
        ti: 700.0,
        tr_se: 1800.0,
        te: 25.0,
        n_echo_ir: 2,
        n_echo_se: 6,
        timing: Default::default(),
    };
    let tissue = TissueParams::new(1200.0, 1333.0, 72.0).unwrap();
    let w = weighting_vector(&protocol, &tissue).unwrap();
    let fd1 = sensitivity_numeric(&protocol, &tissue, RelaxParam::T1, FD_STEP).unwrap();
    let fd2 = sensitivity_numeric(&protocol, &tissue, RelaxParam::T2, FD_STEP).unwrap();
    assert!(rel_dev(&w.dh_dt1, &fd1) <= TOL);
    assert!(rel_dev(w.dh_dt2.as_ref().unwrap(), &fd2) <= TOL);
}
