//! Signal weighting vectors and their analytic relaxation sensitivities.
//!
//! Every family produces the dimensionless weighting vector `h` such that the
//! noiseless signal is `m0 * h`, together with the closed-form partials
//! `dh/dT1` (and `dh/dT2` for the joint families). The numeric
//! finite-difference route exists as an independent cross-check.

use crate::error::ModelError;
use crate::protocol::SequenceProtocol;
use crate::scalar::{c, Real};
use crate::tissue::TissueParams;

/// Dimensionless signal weights and their relaxation sensitivities (1/ms).
/// `dh_dt2` is absent for T1-only families.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightingVector<T> {
    pub h: Vec<T>,
    pub dh_dt1: Vec<T>,
    pub dh_dt2: Option<Vec<T>>,
}

/// Which relaxation parameter a sensitivity is taken against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelaxParam {
    T1,
    T2,
}

/// Evaluates `h` alone at raw (possibly unphysical) relaxation values.
///
/// Used by the NLSE objective, which explores the unconstrained parameter
/// space, and by the finite-difference oracle. Returns `None` when the model
/// evaluates to a non-finite value.
pub fn raw_weights<T: Real>(protocol: &SequenceProtocol<T>, t1: T, t2: T) -> Option<Vec<T>> {
    let mut h = Vec::with_capacity(protocol.n_acquisitions());
    fill_raw_weights(protocol, t1, t2, &mut h).then_some(h)
}

/// Same as [`raw_weights`] but reusing a caller-owned buffer; returns false
/// on a non-finite model value.
pub fn fill_raw_weights<T: Real>(
    protocol: &SequenceProtocol<T>,
    t1: T,
    t2: T,
    out: &mut Vec<T>,
) -> bool {
    out.clear();
    match protocol {
        SequenceProtocol::Cir { ti, .. } => {
            let two = c::<T>(2.0);
            for &x in ti {
                out.push(T::one() - two * (-x / t1).exp());
            }
        }
        SequenceProtocol::Sr { ti } => {
            for &x in ti {
                out.push(T::one() - (-x / t1).exp());
            }
        }
        SequenceProtocol::Fir1 { ti, w } => {
            let two = c::<T>(2.0);
            for &x in ti {
                out.push(T::one() - two * (-x / t1).exp() + (-(x + *w) / t1).exp());
            }
        }
        SequenceProtocol::Fir2 { ti, tr } => {
            let two = c::<T>(2.0);
            let etr = (-*tr / t1).exp();
            for &x in ti {
                out.push(T::one() - two * (-x / t1).exp() + etr);
            }
        }
        SequenceProtocol::Ll { alpha, t, tr: _ } => {
            // Pulsed steady-state recovery referenced to the first readout:
            // h_k = sin(a) * [A - (1 + A) * exp(-(t_k - t_1)/T1*)], with
            // 1/T1* = 1/T1 - ln(cos a)/tau and A the apparent steady state.
            let a = alpha.to_radians();
            let (s, cs) = (a.sin(), a.cos());
            let tau = t[1] - t[0];
            let e = (-tau / t1).exp();
            let amp = (T::one() - e) / (T::one() - e * cs);
            let rstar = T::one() / t1 - cs.ln() / tau;
            let t0 = t[0];
            for &tk in t {
                let decay = (-(tk - t0) * rstar).exp();
                out.push(s * (amp - (T::one() + amp) * decay));
            }
        }
        SequenceProtocol::Seir {
            tr_ir,
            ti,
            tr_se,
            te,
            n_echo_ir,
            n_echo_se,
            ..
        } => {
            // Interleaved steady state: the inversion acts on magnetization
            // recovered during the SE block; the SE excitation reads what
            // recovered since the IR readout. Echo decay is referenced to the
            // first echo of each train.
            let two = c::<T>(2.0);
            let a_ir = T::one() - (two - (-*tr_se / t1).exp()) * (-*ti / t1).exp();
            let a_se = T::one() - (-(*tr_ir - *ti) / t1).exp();
            for k in 0..*n_echo_ir {
                out.push(a_ir * (-c::<T>(k as f64) * *te / t2).exp());
            }
            for k in 0..*n_echo_se {
                out.push(a_se * (-c::<T>(k as f64) * *te / t2).exp());
            }
        }
        SequenceProtocol::Despot {
            alpha_spgr,
            tr_spgr,
            alpha_ssfp,
            tr_ssfp,
        } => {
            for &ad in alpha_spgr {
                let a = ad.to_radians();
                let e1 = (-*tr_spgr / t1).exp();
                out.push(a.sin() * (T::one() - e1) / (T::one() - e1 * a.cos()));
            }
            for &ad in alpha_ssfp {
                let a = ad.to_radians();
                let e1 = (-*tr_ssfp / t1).exp();
                let e2 = (-*tr_ssfp / t2).exp();
                let d = T::one() - e1 * e2 - (e1 - e2) * a.cos();
                out.push(a.sin() * (T::one() - e1) * e2 / d);
            }
        }
    }
    out.iter().all(|v| v.is_finite())
}

/// Builds `h` with its analytic sensitivity vectors for a tissue point.
pub fn weighting_vector<T: Real>(
    protocol: &SequenceProtocol<T>,
    tissue: &TissueParams<T>,
) -> Result<WeightingVector<T>, ModelError> {
    let (t1, t2) = (tissue.t1, tissue.t2);
    let n = protocol.n_acquisitions();
    let mut h = Vec::with_capacity(n);
    let mut d1 = Vec::with_capacity(n);
    let mut d2: Option<Vec<T>> = protocol.estimates_t2().then(|| Vec::with_capacity(n));
    let one = T::one();
    let two = c::<T>(2.0);
    let t1sq = t1 * t1;

    match protocol {
        SequenceProtocol::Cir { ti, .. } => {
            for &x in ti {
                let e = (-x / t1).exp();
                h.push(one - two * e);
                d1.push(-two * e * x / t1sq);
            }
        }
        SequenceProtocol::Sr { ti } => {
            for &x in ti {
                let e = (-x / t1).exp();
                h.push(one - e);
                d1.push(-e * x / t1sq);
            }
        }
        SequenceProtocol::Fir1 { ti, w } => {
            for &x in ti {
                let e = (-x / t1).exp();
                let ew = (-(x + *w) / t1).exp();
                h.push(one - two * e + ew);
                d1.push(-two * e * x / t1sq + ew * (x + *w) / t1sq);
            }
        }
        SequenceProtocol::Fir2 { ti, tr } => {
            let etr = (-*tr / t1).exp();
            for &x in ti {
                let e = (-x / t1).exp();
                h.push(one - two * e + etr);
                d1.push(-two * e * x / t1sq + etr * *tr / t1sq);
            }
        }
        SequenceProtocol::Ll { alpha, t, tr: _ } => {
            let a = alpha.to_radians();
            let (s, cs) = (a.sin(), a.cos());
            let tau = t[1] - t[0];
            let e = (-tau / t1).exp();
            let den = one - e * cs;
            let amp = (one - e) / den;
            // dA/dT1 through E = exp(-tau/T1)
            let damp = (cs - one) / (den * den) * e * tau / t1sq;
            let rstar = one / t1 - cs.ln() / tau;
            let t0 = t[0];
            for &tk in t {
                let dt = tk - t0;
                let decay = (-dt * rstar).exp();
                h.push(s * (amp - (one + amp) * decay));
                // d/dT1 exp(-dt*rstar) = exp(-dt*rstar) * dt / T1^2
                d1.push(s * (damp * (one - decay) - (one + amp) * decay * dt / t1sq));
            }
        }
        SequenceProtocol::Seir {
            tr_ir,
            ti,
            tr_se,
            te,
            n_echo_ir,
            n_echo_se,
            ..
        } => {
            let t2sq = t2 * t2;
            let x_ti = (-*ti / t1).exp();
            let x_se = (-*tr_se / t1).exp();
            let x_d = (-(*tr_ir - *ti) / t1).exp();
            let a_ir = one - (two - x_se) * x_ti;
            let a_se = one - x_d;
            // a_ir = 1 - 2 x_ti + exp(-(ti+tr_se)/T1)
            let da_ir = -two * x_ti * *ti / t1sq + x_se * x_ti * (*ti + *tr_se) / t1sq;
            let da_se = -x_d * (*tr_ir - *ti) / t1sq;
            let d2v = d2.as_mut().expect("joint family");
            for (amp, damp, ne) in [(a_ir, da_ir, *n_echo_ir), (a_se, da_se, *n_echo_se)] {
                for k in 0..ne {
                    let kf = c::<T>(k as f64);
                    let f = (-kf * *te / t2).exp();
                    h.push(amp * f);
                    d1.push(damp * f);
                    d2v.push(amp * f * kf * *te / t2sq);
                }
            }
        }
        SequenceProtocol::Despot {
            alpha_spgr,
            tr_spgr,
            alpha_ssfp,
            tr_ssfp,
        } => {
            let t2sq = t2 * t2;
            let d2v = d2.as_mut().expect("joint family");
            for &ad in alpha_spgr {
                let a = ad.to_radians();
                let (s, cs) = (a.sin(), a.cos());
                let e1 = (-*tr_spgr / t1).exp();
                let den = one - e1 * cs;
                h.push(s * (one - e1) / den);
                let dh_de1 = s * (cs - one) / (den * den);
                d1.push(dh_de1 * e1 * *tr_spgr / t1sq);
                d2v.push(T::zero());
            }
            for &ad in alpha_ssfp {
                let a = ad.to_radians();
                let (s, cs) = (a.sin(), a.cos());
                let e1 = (-*tr_ssfp / t1).exp();
                let e2 = (-*tr_ssfp / t2).exp();
                let d = one - e1 * e2 - (e1 - e2) * cs;
                h.push(s * (one - e1) * e2 / d);
                let dh_de1 = s * e2 * (-d + (one - e1) * (e2 + cs)) / (d * d);
                let dh_de2 = s * (one - e1) * (d - e2 * (cs - e1)) / (d * d);
                d1.push(dh_de1 * e1 * *tr_ssfp / t1sq);
                d2v.push(dh_de2 * e2 * *tr_ssfp / t2sq);
            }
        }
    }

    let finite = h.iter().all(|v| v.is_finite())
        && d1.iter().all(|v| v.is_finite())
        && d2.as_ref().map_or(true, |v| v.iter().all(|x| x.is_finite()));
    if !finite {
        return Err(ModelError::NonFiniteModel);
    }
    Ok(WeightingVector {
        h,
        dh_dt1: d1,
        dh_dt2: d2,
    })
}

/// Central finite-difference sensitivity, the independent oracle for the
/// analytic forms. `step` is a relative perturbation in [1e-7, 1e-2].
pub fn sensitivity_numeric<T: Real>(
    protocol: &SequenceProtocol<T>,
    tissue: &TissueParams<T>,
    which: RelaxParam,
    step: T,
) -> Result<Vec<T>, ModelError> {
    let sf = step.to_f64().unwrap_or(f64::NAN);
    if !(1e-7..=1e-2).contains(&sf) {
        return Err(ModelError::DegenerateStep { step: sf });
    }
    let base = match which {
        RelaxParam::T1 => tissue.t1,
        RelaxParam::T2 => tissue.t2,
    };
    let delta = step * base;
    if delta.to_f64().unwrap_or(0.0) < 1e-9 {
        return Err(ModelError::DegenerateStep { step: sf });
    }
    let eval = |v: T| -> Option<Vec<T>> {
        match which {
            RelaxParam::T1 => raw_weights(protocol, v, tissue.t2),
            RelaxParam::T2 => raw_weights(protocol, tissue.t1, v),
        }
    };
    let hi = eval(base + delta).ok_or(ModelError::NonFiniteModel)?;
    let lo = eval(base - delta).ok_or(ModelError::NonFiniteModel)?;
    let two_delta = delta + delta;
    Ok(hi
        .iter()
        .zip(&lo)
        .map(|(&a, &b)| (a - b) / two_delta)
        .collect())
}
