//! Statistical contracts of the Monte Carlo engine.

use relaxcrb_core::presets::{cir_reference, sr_reference};
use relaxcrb_core::{
    nlse_fit, raw_weights, run_trials, simulate_acquisition, trial_rng, FitSettings,
    SequenceProtocol, TissueParams, TrialConfig,
};

fn tissue() -> TissueParams<f64> {
    TissueParams::new(3000.0, 1500.0, 85.0).unwrap()
}

#[test]
fn noise_variance_matches_sigma() {
    // Law of large numbers on y - s over many draws.
    let protocol = sr_reference::<f64>();
    let t = tissue();
    let s: Vec<f64> = raw_weights(&protocol, t.t1, t.t2)
        .unwrap()
        .iter()
        .map(|h| t.m0 * h)
        .collect();
    let sigma = 70.0;
    let mut rng = trial_rng(99, 0, 0);
    let draws = 90_000usize; // 12 samples each -> > 1e6 noise values
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut count = 0usize;
    for _ in 0..draws {
        let y = simulate_acquisition(&protocol, &t, sigma, &mut rng).unwrap();
        for (yi, si) in y.iter().zip(&s) {
            let n = yi - si;
            sum += n;
            sum_sq += n * n;
            count += 1;
        }
    }
    let mean = sum / count as f64;
    let var = sum_sq / count as f64 - mean * mean;
    assert!(
        (var / (sigma * sigma) - 1.0).abs() < 0.01,
        "sample variance {var}, expected {}",
        sigma * sigma
    );
    assert!(mean.abs() < 0.5);
}

#[test]
fn nlse_matches_brute_force_grid_on_three_point_sr() {
    // Coarse 2-D grid oracle over (m0, t1) for a 3-sample SR acquisition.
    let protocol = SequenceProtocol::Sr {
        ti: vec![300.0, 900.0, 2400.0],
    };
    let t = TissueParams::new(2800.0, 1300.0, 85.0).unwrap();
    let mut rng = trial_rng(5, 0, 0);
    let y = simulate_acquisition(&protocol, &t, 60.0, &mut rng).unwrap();

    let sse = |m0: f64, t1: f64| -> f64 {
        raw_weights(&protocol, t1, 85.0)
            .map(|h| {
                h.iter()
                    .zip(&y)
                    .map(|(hi, yi)| (yi - m0 * hi).powi(2))
                    .sum()
            })
            .unwrap_or(f64::INFINITY)
    };

    // Exhaustive scan: m0 in [2000, 3600] x t1 in [700, 2100].
    let mut best = (f64::INFINITY, 0.0, 0.0);
    let mut m0 = 2000.0;
    while m0 <= 3600.0 {
        let mut t1 = 700.0;
        while t1 <= 2100.0 {
            let v = sse(m0, t1);
            if v < best.0 {
                best = (v, m0, t1);
            }
            t1 += 4.0;
        }
        m0 += 4.0;
    }

    let fit = nlse_fit(&y, &protocol, &FitSettings::default()).unwrap();
    // The simplex optimum must land within the best grid cell.
    assert!(
        (fit.m0 - best.1).abs() <= 4.0,
        "m0 {} vs grid {}",
        fit.m0,
        best.1
    );
    assert!(
        (fit.t1 - best.2).abs() <= 4.0,
        "t1 {} vs grid {}",
        fit.t1,
        best.2
    );
    assert!(sse(fit.m0, fit.t1) <= best.0 + 1e-9);
}

#[test]
fn mee_doubles_with_sigma_in_high_snr_regime() {
    let base = TrialConfig {
        protocol: cir_reference::<f64>(),
        points: vec![tissue()],
        sigma: 30.0, // input SNR 100
        n_trials: 1500,
        rng_seed: 31,
        fit: FitSettings::default(),
    };
    let mut doubled = base.clone();
    doubled.sigma = 60.0;
    doubled.rng_seed = 32; // independent draws
    let a = run_trials(&base).unwrap().rows[0].t1.unwrap();
    let b = run_trials(&doubled).unwrap().rows[0].t1.unwrap();
    let ratio = b.mee_pct / a.mee_pct;
    assert!(
        (ratio - 2.0).abs() / 2.0 < 0.05,
        "MEE ratio {ratio} should be 2 within sampling error"
    );
}

#[test]
fn trial_multiset_matches_across_thread_counts() {
    let config = TrialConfig {
        protocol: cir_reference::<f64>(),
        points: vec![tissue(), TissueParams::new(3000.0, 1100.0, 85.0).unwrap()],
        sigma: 70.0,
        n_trials: 64,
        rng_seed: 77,
        fit: FitSettings::default(),
    };
    let serial = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| run_trials(&config).unwrap());
    let parallel = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap()
        .install(|| run_trials(&config).unwrap());
    assert_eq!(serial.rows, parallel.rows);
    assert_eq!(serial.seed, parallel.seed);
}
