//! Fisher information, Cramer-Rao bounds (matrix and geometric routes),
//! the sensitivity/orthogonality decomposition and TNR efficiency.

use crate::error::{CrbError, Error, ModelError};
use crate::protocol::SequenceProtocol;
use crate::scalar::{c, dot, norm2, Real};
use crate::signal::{weighting_vector, WeightingVector};
use crate::symmat::SymMat;
use crate::tissue::TissueParams;

/// Condition-number ceiling beyond which the information matrix is treated
/// as singular (double-precision headroom).
pub const SINGULAR_COND_LIMIT: f64 = 1e12;

/// Sine floor below which vectors are declared collinear and the geometric
/// CRB diverges.
pub const COLLINEAR_SIN_LIMIT: f64 = 1e-12;

/// Additive white Gaussian noise level tied to the input SNR convention
/// `snr = m0 / sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel<T> {
    pub sigma: T,
    pub snr: T,
}

impl<T: Real> NoiseModel<T> {
    pub fn from_snr(m0: T, snr: T) -> Self {
        Self {
            sigma: m0 / snr,
            snr,
        }
    }

    pub fn from_sigma(m0: T, sigma: T) -> Self {
        Self {
            sigma,
            snr: m0 / sigma,
        }
    }
}

/// Signal Jacobian with respect to [M0, T1(, T2)], stored column-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian<T> {
    pub cols: Vec<Vec<T>>,
}

impl<T: Real> Jacobian<T> {
    pub fn n_rows(&self) -> usize {
        self.cols.first().map_or(0, Vec::len)
    }

    pub fn n_params(&self) -> usize {
        self.cols.len()
    }
}

/// Fisher information matrix J^T J / sigma^2 in [M0, T1(, T2)] ordering.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherInfo<T> {
    pub matrix: SymMat<T>,
}

/// Geometric-route bound: norms, angles, orthogonality factors and the CRBs
/// they imply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeomBound<T> {
    pub sens_t1: T,
    pub sens_t2: Option<T>,
    pub orth_t1: T,
    pub orth_t2: Option<T>,
    pub phi1: T,
    pub phi2: Option<T>,
    pub phi3: Option<T>,
    pub crb_t1: T,
    pub crb_t2: Option<T>,
}

/// Full per-tissue-point CRB evaluation of a protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrbReport<T> {
    pub crb_m0: T,
    pub crb_t1: T,
    pub crb_t2: Option<T>,
    pub sens_t1: T,
    pub sens_t2: Option<T>,
    pub orth_t1: T,
    pub orth_t2: Option<T>,
    pub phi1: T,
    pub phi2: Option<T>,
    pub phi3: Option<T>,
    /// TNR efficiencies in 1/sqrt(ms); multiply by sqrt(1000) for the
    /// per-sqrt-second reporting convention.
    pub gamma_t1: T,
    pub gamma_t2: Option<T>,
    pub t_seq: T,
}

/// Signal Jacobian: column 1 is `h` (d s/d M0), the remaining columns are
/// `m0 * dh/dT`.
pub fn jacobian<T: Real>(
    protocol: &SequenceProtocol<T>,
    tissue: &TissueParams<T>,
) -> Result<Jacobian<T>, ModelError> {
    let w = weighting_vector(protocol, tissue)?;
    Ok(jacobian_from_weights(&w, tissue.m0))
}

pub fn jacobian_from_weights<T: Real>(w: &WeightingVector<T>, m0: T) -> Jacobian<T> {
    let mut cols = vec![w.h.clone(), w.dh_dt1.iter().map(|&v| m0 * v).collect()];
    if let Some(d2) = &w.dh_dt2 {
        cols.push(d2.iter().map(|&v| m0 * v).collect());
    }
    Jacobian { cols }
}

/// Fisher information under white Gaussian noise of deviation `sigma`.
pub fn fisher_information<T: Real>(j: &Jacobian<T>, sigma: T) -> FisherInfo<T> {
    let p = j.n_params();
    let inv_var = T::one() / (sigma * sigma);
    let mut m = SymMat::zeros(p);
    for a in 0..p {
        for b in a..p {
            m.set(a, b, dot(&j.cols[a], &j.cols[b]) * inv_var);
        }
    }
    FisherInfo { matrix: m }
}

/// Matrix-route CRB: diagonal of the inverse information matrix, in
/// [M0, T1(, T2)] order.
pub fn crb_matrix<T: Real>(info: &FisherInfo<T>) -> Result<Vec<T>, CrbError> {
    let cond = info.matrix.cond_one().to_f64().unwrap_or(f64::INFINITY);
    if !(cond < SINGULAR_COND_LIMIT) {
        return Err(CrbError::SingularInformation { cond });
    }
    let inv = info
        .matrix
        .inverse()
        .ok_or(CrbError::SingularInformation { cond })?;
    Ok(inv.diagonal())
}

/// Geometric angle between two vectors, with the cosine clamped to [-1, 1]
/// to kill rounding excursions.
fn angle_between<T: Real>(a: &[T], b: &[T], na: T, nb: T) -> (T, T) {
    let mut cos = dot(a, b) / (na * nb);
    if cos > T::one() {
        cos = T::one();
    }
    if cos < -T::one() {
        cos = -T::one();
    }
    (cos, cos.acos())
}

/// Geometric-route CRB from the weighting vector alone:
/// `CRB(T) = (snr * Sens * Orth)^-2` with Sens the sensitivity norm and Orth
/// the orthogonality factor between `h` and the sensitivity vectors.
pub fn crb_geometric<T: Real>(w: &WeightingVector<T>, snr: T) -> Result<GeomBound<T>, CrbError> {
    let nh = norm2(&w.h);
    let n1 = norm2(&w.dh_dt1);
    let floor = c::<T>(COLLINEAR_SIN_LIMIT);
    let (cos1, phi1) = angle_between(&w.h, &w.dh_dt1, nh, n1);
    let sin1 = (T::one() - cos1 * cos1).max(T::zero()).sqrt();

    match &w.dh_dt2 {
        None => {
            if sin1 < floor {
                return Err(CrbError::CollinearVectors {
                    min_sin: sin1.to_f64().unwrap_or(0.0),
                });
            }
            let orth1 = sin1;
            let crb1 = (snr * n1 * orth1).powi(-2);
            Ok(GeomBound {
                sens_t1: n1,
                sens_t2: None,
                orth_t1: orth1,
                orth_t2: None,
                phi1,
                phi2: None,
                phi3: None,
                crb_t1: crb1,
                crb_t2: None,
            })
        }
        Some(d2) => {
            let n2 = norm2(d2);
            let (cos2, phi2) = angle_between(&w.h, d2, nh, n2);
            let (cos3, phi3) = angle_between(&w.dh_dt1, d2, n1, n2);
            let sin2 = (T::one() - cos2 * cos2).max(T::zero()).sqrt();
            let disc = (T::one() + c::<T>(2.0) * cos1 * cos2 * cos3
                - cos1 * cos1
                - cos2 * cos2
                - cos3 * cos3)
                .max(T::zero());
            let vol = disc.sqrt();
            let min_sin = sin1.min(sin2).min(vol);
            if min_sin < floor {
                return Err(CrbError::CollinearVectors {
                    min_sin: min_sin.to_f64().unwrap_or(0.0),
                });
            }
            let orth1 = vol / sin2;
            let orth2 = vol / sin1;
            Ok(GeomBound {
                sens_t1: n1,
                sens_t2: Some(n2),
                orth_t1: orth1,
                orth_t2: Some(orth2),
                phi1,
                phi2: Some(phi2),
                phi3: Some(phi3),
                crb_t1: (snr * n1 * orth1).powi(-2),
                crb_t2: Some((snr * n2 * orth2).powi(-2)),
            })
        }
    }
}

/// Input SNR boosted by signal averaging over the available scan time.
/// A sequence longer than the scan budget yields an equivalent SNR below
/// the input SNR (less than one full average).
pub fn equivalent_snr<T: Real>(snr: T, t_scan: T, t_seq: T) -> T {
    snr * (t_scan / t_seq).sqrt()
}

/// TNR efficiency in 1/sqrt(ms): the true parameter over the CRB-limited
/// deviation, per square root of sequence time.
pub fn tnr_efficiency<T: Real>(t: T, crb_t: T, t_seq: T) -> T {
    t / (crb_t.sqrt() * t_seq.sqrt())
}

/// Conversion to the per-sqrt-second efficiency used in reports.
pub fn gamma_per_sqrt_s<T: Real>(gamma_per_sqrt_ms: T) -> T {
    gamma_per_sqrt_ms * c::<T>(1000.0f64.sqrt())
}

/// Percentage CRB: the bound-limited deviation over the true value, percent.
pub fn pcrb<T: Real>(crb_t: T, t: T) -> T {
    c::<T>(100.0) * crb_t.sqrt() / t
}

/// Evaluates the full CRB report for one protocol at one tissue point.
/// `crb_m0` comes from the matrix route; the relaxation bounds and their
/// decomposition come from the geometric route (the two agree to rounding).
pub fn evaluate_crb<T: Real>(
    protocol: &SequenceProtocol<T>,
    tissue: &TissueParams<T>,
    noise: &NoiseModel<T>,
) -> Result<CrbReport<T>, Error> {
    let w = weighting_vector(protocol, tissue)?;
    let geom = crb_geometric(&w, noise.snr)?;
    let j = jacobian_from_weights(&w, tissue.m0);
    let info = fisher_information(&j, noise.sigma);
    let diag = crb_matrix(&info)?;
    let t_seq = protocol.sequence_time();
    Ok(CrbReport {
        crb_m0: diag[0],
        crb_t1: geom.crb_t1,
        crb_t2: geom.crb_t2,
        sens_t1: geom.sens_t1,
        sens_t2: geom.sens_t2,
        orth_t1: geom.orth_t1,
        orth_t2: geom.orth_t2,
        phi1: geom.phi1,
        phi2: geom.phi2,
        phi3: geom.phi3,
        gamma_t1: tnr_efficiency(tissue.t1, geom.crb_t1, t_seq),
        gamma_t2: geom.crb_t2.map(|crb| tnr_efficiency(tissue.t2, crb, t_seq)),
        t_seq,
    })
}
