//! Max-min protocol design: worst-case weighted TNR efficiency over a
//! tissue range, maximized over pulse timings and flip angles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::crb::{evaluate_crb, NoiseModel};
use crate::error::{CrbError, Error, OptimError};
use crate::neldermead::{nelder_mead_minimize, NmOptions};
use crate::protocol::{SeirTiming, SequenceProtocol};
use crate::scalar::{c, Real};
use crate::tissue::TissueRange;

/// Sequence family selector for design searches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Cir,
    Sr,
    Fir1,
    Fir2,
    Ll,
    Seir,
    Despot,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Self::Cir => "cir",
            Self::Sr => "sr",
            Self::Fir1 => "fir1",
            Self::Fir2 => "fir2",
            Self::Ll => "ll",
            Self::Seir => "seir",
            Self::Despot => "despot",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "cir" => Self::Cir,
            "sr" => Self::Sr,
            "fir1" => Self::Fir1,
            "fir2" => Self::Fir2,
            "ll" => Self::Ll,
            "seir" => Self::Seir,
            "despot" => Self::Despot,
            _ => return None,
        })
    }

    pub fn estimates_t2(self) -> bool {
        matches!(self, Self::Seir | Self::Despot)
    }
}

/// Box bounds and structural knobs for the search space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintSet<T> {
    /// Cap on free timings (starts, steps, waits, repetition times), ms.
    pub t_max: T,
    /// Optional cap on the CIR/FIR1 wait time, ms.
    pub w_max: Option<T>,
    /// Smallest allowed timing step, ms.
    pub step_min: T,
    /// SEIR echo-spacing search interval, ms.
    pub te_min: T,
    pub te_max: T,
    /// DESPOT repetition times are fixed per run, not searched.
    pub tr_spgr: T,
    pub tr_ssfp: T,
    pub n_spgr: usize,
    pub n_ssfp: usize,
    /// SEIR echo counts are fixed per run, not searched.
    pub n_echo_ir: usize,
    pub n_echo_se: usize,
    /// Smallest allowed flip angle, degrees.
    pub alpha_min: T,
}

impl<T: Real> Default for ConstraintSet<T> {
    fn default() -> Self {
        Self {
            t_max: c(20000.0),
            w_max: None,
            step_min: c(1.0),
            te_min: c(5.0),
            te_max: c(100.0),
            tr_spgr: c(3.4),
            tr_ssfp: c(3.4),
            n_spgr: 1,
            n_ssfp: 2,
            n_echo_ir: 3,
            n_echo_se: 4,
            alpha_min: c(0.5),
        }
    }
}

/// One design search: family, acquisition-count set, efficiency weighting
/// and multistart settings.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpec<T> {
    pub family: Family,
    /// Acquisition counts to try (timing-list lengths for the IR family and
    /// readout counts for LL; ignored for SEIR/DESPOT whose acquisition
    /// structure is set by the constraints).
    pub n_acq: Vec<usize>,
    /// Weight of the T1 efficiency in the cost; forced to 1 for T1-only
    /// families.
    pub rho: T,
    pub multistart: usize,
    pub rng_seed: u64,
    pub constraints: ConstraintSet<T>,
}

impl<T: Real> DesignSpec<T> {
    pub fn new(family: Family) -> Self {
        Self {
            family,
            n_acq: vec![5],
            rho: if family.estimates_t2() { c(0.5) } else { T::one() },
            multistart: 20,
            rng_seed: 42,
            constraints: ConstraintSet::default(),
        }
    }

    /// Effective weighting: T1-only families always optimize Gamma1 alone.
    pub fn effective_rho(&self) -> T {
        if self.family.estimates_t2() {
            self.rho
        } else {
            T::one()
        }
    }

    pub fn validate(&self) -> Result<(), OptimError> {
        let rho = self.rho.to_f64().unwrap_or(f64::NAN);
        if !(0.0..=1.0).contains(&rho) {
            return Err(OptimError::NoFeasiblePoint {
                reason: format!("rho {rho} outside [0, 1]"),
            });
        }
        if self.n_acq.is_empty() || self.multistart == 0 {
            return Err(OptimError::NoFeasiblePoint {
                reason: "empty acquisition-count set or zero restarts".into(),
            });
        }
        Ok(())
    }
}

/// Worst-case weighted efficiency over the tissue grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorstCase<T> {
    /// Minimum of `rho * Gamma1 + (1 - rho) * Gamma2` over the grid,
    /// in 1/sqrt(ms).
    pub lambda_min: T,
    /// Set when any grid point had a singular or collinear information
    /// geometry; such protocols score zero.
    pub degenerate: bool,
}

/// Inner minimization of the design criterion by exhaustive grid evaluation.
/// Unidentifiable points (singular information) zero out the score rather
/// than aborting the search.
pub fn worst_case_efficiency<T: Real>(
    protocol: &SequenceProtocol<T>,
    range: &TissueRange<T>,
    rho: T,
    noise: &NoiseModel<T>,
) -> Result<WorstCase<T>, Error> {
    protocol.validate()?;
    let mut lambda_min = T::infinity();
    for tissue in range.grid() {
        let report = match evaluate_crb(protocol, &tissue, noise) {
            Ok(r) => r,
            Err(Error::Crb(CrbError::SingularInformation { .. }))
            | Err(Error::Crb(CrbError::CollinearVectors { .. })) => {
                return Ok(WorstCase {
                    lambda_min: T::zero(),
                    degenerate: true,
                })
            }
            Err(e) => return Err(e),
        };
        let lambda = if protocol.estimates_t2() {
            rho * report.gamma_t1 + (T::one() - rho) * report.gamma_t2.expect("joint family")
        } else {
            report.gamma_t1
        };
        if lambda < lambda_min {
            lambda_min = lambda;
        }
    }
    Ok(WorstCase {
        lambda_min,
        degenerate: false,
    })
}

/// Best design found by the multistart search.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult<T> {
    pub protocol: SequenceProtocol<T>,
    /// Worst-case weighted efficiency of `protocol`, re-evaluated on the
    /// same grid (1/sqrt(ms)).
    pub lambda_min: T,
    /// Range-average efficiencies of the returned protocol (1/sqrt(ms)).
    pub gamma_avg_t1: T,
    pub gamma_avg_t2: Option<T>,
    /// Best lambda_min seen in each restart, in restart order.
    pub trace: Vec<T>,
    pub converged: bool,
}

struct SearchSpace<T> {
    lo: Vec<T>,
    hi: Vec<T>,
}

/// Builds the per-family box in physical units. Timing lists are encoded as
/// (start, step); coupled constraints use slack variables so every box point
/// decodes to a structurally valid protocol.
fn search_space<T: Real>(
    family: Family,
    cons: &ConstraintSet<T>,
    range: &TissueRange<T>,
) -> Result<SearchSpace<T>, OptimError> {
    let z = T::zero();
    let tmax = cons.t_max;
    let smin = cons.step_min;
    let fail = |reason: &str| OptimError::NoFeasiblePoint {
        reason: reason.to_string(),
    };
    if !(tmax > z) {
        return Err(fail("timing box is empty (t_max <= 0)"));
    }
    let space = match family {
        Family::Cir => {
            // Long-wait constraint: W >= 5 * t1_max, optionally capped.
            let w_lo = c::<T>(5.0) * range.t1_max;
            let w_hi = cons.w_max.unwrap_or(tmax);
            if w_lo > w_hi {
                return Err(fail("CIR wait window empty (5*t1_max exceeds w_max)"));
            }
            SearchSpace {
                lo: vec![z, smin, w_lo],
                hi: vec![tmax, tmax, w_hi],
            }
        }
        Family::Sr => SearchSpace {
            lo: vec![z, smin],
            hi: vec![tmax, tmax],
        },
        Family::Fir1 => {
            let w_hi = cons.w_max.unwrap_or(tmax);
            if smin > w_hi {
                return Err(fail("FIR1 wait window empty"));
            }
            SearchSpace {
                lo: vec![z, smin, smin],
                hi: vec![tmax, tmax, w_hi],
            }
        }
        // [start, step, slack]; TR = max(TI) + slack keeps max(TI) < TR.
        Family::Fir2 => SearchSpace {
            lo: vec![z, smin, smin],
            hi: vec![tmax, tmax, tmax],
        },
        // [alpha, step, slack]; readouts at k*step, TR = N*step + slack.
        Family::Ll => SearchSpace {
            lo: vec![cons.alpha_min, smin, z],
            hi: vec![c(90.0), tmax, tmax],
        },
        // [ti, ir_slack, tr_se, te]; TR_IR = TI + ir_slack keeps TI < TR_IR.
        Family::Seir => {
            if cons.te_min > cons.te_max {
                return Err(fail("SEIR echo-spacing window empty"));
            }
            SearchSpace {
                lo: vec![smin, smin, smin, cons.te_min],
                hi: vec![tmax, tmax, tmax, cons.te_max],
            }
        }
        Family::Despot => {
            let mut lo = vec![cons.alpha_min; cons.n_spgr + cons.n_ssfp];
            let mut hi = vec![c(90.0); cons.n_spgr];
            hi.extend(vec![c::<T>(179.5); cons.n_ssfp]);
            if cons.n_spgr == 0 || cons.n_ssfp == 0 {
                return Err(fail("DESPOT needs at least one SPGR and one SSFP acquisition"));
            }
            lo.truncate(hi.len());
            SearchSpace { lo, hi }
        }
    };
    if space
        .lo
        .iter()
        .zip(&space.hi)
        .any(|(&l, &h)| !(l.is_finite() && h.is_finite() && l <= h))
    {
        return Err(fail("empty or non-finite search box"));
    }
    Ok(space)
}

/// Decodes a normalized point in [0, 1]^k into a protocol with `n`
/// acquisitions (where the family uses `n`).
fn decode<T: Real>(
    family: Family,
    u: &[T],
    n: usize,
    cons: &ConstraintSet<T>,
    space: &SearchSpace<T>,
) -> SequenceProtocol<T> {
    let map = |i: usize| {
        let ui = u[i].max(T::zero()).min(T::one());
        space.lo[i] + ui * (space.hi[i] - space.lo[i])
    };
    let ti_list = |start: T, step: T| -> Vec<T> {
        (0..n).map(|k| start + step * c::<T>(k as f64)).collect()
    };
    match family {
        Family::Cir => SequenceProtocol::Cir {
            ti: ti_list(map(0), map(1)),
            w: map(2),
        },
        Family::Sr => SequenceProtocol::Sr {
            ti: ti_list(map(0), map(1)),
        },
        Family::Fir1 => SequenceProtocol::Fir1 {
            ti: ti_list(map(0), map(1)),
            w: map(2),
        },
        Family::Fir2 => {
            let (start, step, slack) = (map(0), map(1), map(2));
            let ti = ti_list(start, step);
            let tr = *ti.last().expect("n >= 1") + slack;
            SequenceProtocol::Fir2 { ti, tr }
        }
        Family::Ll => {
            let (alpha, step, slack) = (map(0), map(1), map(2));
            let t: Vec<T> = (1..=n).map(|k| step * c::<T>(k as f64)).collect();
            let tr = *t.last().expect("n >= 1") + slack;
            SequenceProtocol::Ll { alpha, t, tr }
        }
        Family::Seir => {
            let (ti, ir_slack, tr_se, te) = (map(0), map(1), map(2), map(3));
            SequenceProtocol::Seir {
                tr_ir: ti + ir_slack,
                ti,
                tr_se,
                te,
                n_echo_ir: cons.n_echo_ir,
                n_echo_se: cons.n_echo_se,
                timing: SeirTiming::default(),
            }
        }
        Family::Despot => {
            let alpha_spgr = (0..cons.n_spgr).map(map).collect();
            let alpha_ssfp = (cons.n_spgr..cons.n_spgr + cons.n_ssfp).map(map).collect();
            SequenceProtocol::Despot {
                alpha_spgr,
                tr_spgr: cons.tr_spgr,
                alpha_ssfp,
                tr_ssfp: cons.tr_ssfp,
            }
        }
    }
}

/// Maximizes the worst-case weighted efficiency by multistart Nelder-Mead
/// over box-normalized variables. Restarts draw their starting points from
/// per-restart substreams of `rng_seed`, so the search is reproducible and
/// restart-parallel.
pub fn optimize_protocol<T: Real>(
    spec: &DesignSpec<T>,
    range: &TissueRange<T>,
    noise: &NoiseModel<T>,
) -> Result<OptimizationResult<T>, OptimError> {
    spec.validate()?;
    let rho = spec.effective_rho();
    let cons = &spec.constraints;
    let space = search_space(spec.family, cons, range)?;
    let dim = space.lo.len();
    let nm_opts = NmOptions::new(600 * dim, c(1e-7), c(1e-10));

    struct Candidate<T> {
        lambda: T,
        protocol: SequenceProtocol<T>,
        converged: bool,
    }

    let mut trace: Vec<T> = Vec::new();
    let mut best: Option<Candidate<T>> = None;

    for &n in &spec.n_acq {
        let restarts: Vec<(usize, Option<Candidate<T>>)> = (0..spec.multistart)
            .into_par_iter()
            .map(|restart| {
                let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
                rng.set_stream(restart as u64);
                let x0: Vec<T> = (0..dim).map(|_| c::<T>(rng.gen::<f64>())).collect();
                let objective = |x: &[T]| -> T {
                    let protocol = decode(spec.family, x, n, cons, &space);
                    match worst_case_efficiency(&protocol, range, rho, noise) {
                        Ok(w) if !w.degenerate && w.lambda_min.is_finite() => -w.lambda_min,
                        _ => T::infinity(),
                    }
                };
                let r = nelder_mead_minimize(objective, &x0, &nm_opts);
                if !r.f.is_finite() {
                    return (restart, None);
                }
                let protocol = decode(spec.family, &r.x, n, cons, &space);
                (
                    restart,
                    Some(Candidate {
                        lambda: -r.f,
                        protocol,
                        converged: r.converged,
                    }),
                )
            })
            .collect();

        // Merge in restart order so ties resolve deterministically.
        let mut ordered = restarts;
        ordered.sort_by_key(|(i, _)| *i);
        for (_, cand) in ordered {
            let lambda = cand.as_ref().map_or(T::zero(), |c| c.lambda);
            trace.push(lambda);
            if let Some(cand) = cand {
                let better = best.as_ref().map_or(true, |b| cand.lambda > b.lambda);
                if better {
                    best = Some(cand);
                }
            }
        }
    }

    let best = best.ok_or_else(|| OptimError::NoFeasiblePoint {
        reason: "every restart produced a degenerate or infeasible design".into(),
    })?;

    // Self-consistency: the reported lambda_min is the worst case of the
    // returned protocol on the same grid.
    let wc = worst_case_efficiency(&best.protocol, range, rho, noise).map_err(|e| {
        OptimError::NoFeasiblePoint {
            reason: format!("returned protocol failed re-evaluation: {e}"),
        }
    })?;
    if wc.degenerate {
        return Err(OptimError::NoFeasiblePoint {
            reason: "best design is degenerate on the tissue grid".into(),
        });
    }

    let (g1, g2) = range_average_gammas(&best.protocol, range, noise).map_err(|e| {
        OptimError::NoFeasiblePoint {
            reason: format!("returned protocol failed evaluation: {e}"),
        }
    })?;

    Ok(OptimizationResult {
        lambda_min: wc.lambda_min,
        protocol: best.protocol,
        gamma_avg_t1: g1,
        gamma_avg_t2: g2,
        trace,
        converged: best.converged,
    })
}

/// Grid averages of the efficiencies, in 1/sqrt(ms).
pub fn range_average_gammas<T: Real>(
    protocol: &SequenceProtocol<T>,
    range: &TissueRange<T>,
    noise: &NoiseModel<T>,
) -> Result<(T, Option<T>), Error> {
    let grid = range.grid();
    let mut s1 = T::zero();
    let mut s2 = T::zero();
    for tissue in &grid {
        let r = evaluate_crb(protocol, tissue, noise)?;
        s1 = s1 + r.gamma_t1;
        if let Some(g2) = r.gamma_t2 {
            s2 = s2 + g2;
        }
    }
    let count = c::<T>(grid.len() as f64);
    let g2 = protocol.estimates_t2().then(|| s2 / count);
    Ok((s1 / count, g2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::timing_range;
    use crate::tissue::TissueParams;
    use approx::assert_relative_eq;

    fn range() -> TissueRange<f64> {
        TissueRange::new(1000.0, 2000.0, 60.0, 110.0, 3000.0, 21, 11).unwrap()
    }

    fn noise() -> NoiseModel<f64> {
        NoiseModel::from_snr(3000.0, 100.0)
    }

    fn cir_published() -> SequenceProtocol<f64> {
        SequenceProtocol::Cir {
            ti: timing_range(0.0, 450.0, 1800.0),
            w: 10000.0,
        }
    }

    #[test]
    fn degenerate_range_equals_point_evaluation() {
        let r = TissueRange::new(1500.0, 1500.0, 85.0, 85.0, 3000.0, 1, 1).unwrap();
        let wc = worst_case_efficiency(&cir_published(), &r, 1.0, &noise()).unwrap();
        let tissue = TissueParams::new(3000.0, 1500.0, 85.0).unwrap();
        let rep = evaluate_crb(&cir_published(), &tissue, &noise()).unwrap();
        assert_relative_eq!(wc.lambda_min, rep.gamma_t1, max_relative = 1e-14);
    }

    #[test]
    fn rho_one_is_min_gamma1() {
        let wc = worst_case_efficiency(&cir_published(), &range(), 1.0, &noise()).unwrap();
        let mut min_g1 = f64::INFINITY;
        for tissue in range().grid() {
            let rep = evaluate_crb(&cir_published(), &tissue, &noise()).unwrap();
            min_g1 = min_g1.min(rep.gamma_t1);
        }
        assert_relative_eq!(wc.lambda_min, min_g1, max_relative = 1e-14);
    }

    #[test]
    fn worst_case_is_lower_bound_on_grid_values() {
        let p = SequenceProtocol::Despot {
            alpha_spgr: vec![8.6, 8.6],
            tr_spgr: 3.4,
            alpha_ssfp: vec![13.9, 57.8],
            tr_ssfp: 3.4,
        };
        let wc = worst_case_efficiency(&p, &range(), 0.5, &noise()).unwrap();
        for tissue in range().grid() {
            let rep = evaluate_crb(&p, &tissue, &noise()).unwrap();
            let lambda = 0.5 * rep.gamma_t1 + 0.5 * rep.gamma_t2.unwrap();
            assert!(wc.lambda_min <= lambda * (1.0 + 1e-12));
        }
    }

    #[test]
    fn identifiability_failure_yields_no_feasible_point() {
        let mut spec = DesignSpec::new(Family::Sr);
        spec.n_acq = vec![1];
        spec.multistart = 3;
        assert!(matches!(
            optimize_protocol(&spec, &range(), &noise()),
            Err(OptimError::NoFeasiblePoint { .. })
        ));
    }

    #[test]
    fn empty_box_yields_no_feasible_point() {
        let mut spec = DesignSpec::new(Family::Cir);
        spec.constraints.w_max = Some(100.0); // below 5 * t1_max
        assert!(matches!(
            optimize_protocol(&spec, &range(), &noise()),
            Err(OptimError::NoFeasiblePoint { .. })
        ));
    }

    #[test]
    fn monotone_in_restart_prefix() {
        let mut spec = DesignSpec::new(Family::Sr);
        spec.n_acq = vec![12];
        spec.multistart = 6;
        let full = optimize_protocol(&spec, &range(), &noise()).unwrap();
        let mut best_so_far = f64::NEG_INFINITY;
        for k in 1..=6 {
            let mut prefix = spec.clone();
            prefix.multistart = k;
            let r = optimize_protocol(&prefix, &range(), &noise()).unwrap();
            assert!(r.lambda_min >= best_so_far - 1e-12);
            best_so_far = r.lambda_min;
        }
        assert_relative_eq!(best_so_far, full.lambda_min, max_relative = 1e-12);
    }

    #[test]
    fn self_consistency_of_reported_lambda() {
        let mut spec = DesignSpec::new(Family::Sr);
        spec.n_acq = vec![12];
        spec.multistart = 4;
        let r = optimize_protocol(&spec, &range(), &noise()).unwrap();
        let wc = worst_case_efficiency(&r.protocol, &range(), 1.0, &noise()).unwrap();
        assert_eq!(r.lambda_min, wc.lambda_min);
        assert!(r.protocol.validate().is_ok());
        assert_eq!(r.trace.len(), 4);
    }
}
