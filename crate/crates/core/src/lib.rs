//! Cramer-Rao bound evaluation, max-min design and Monte Carlo validation
//! for quantitative MRI relaxometry protocols.
//!
//! The crate models seven acquisition families (inversion-recovery variants,
//! saturation recovery, Look-Locker, interleaved spin-echo/inversion-recovery
//! and the SPGR/SSFP steady-state pair), bounds the attainable T1/T2 estimate
//! variance through both the information-matrix and geometric routes, scores
//! protocols by TNR efficiency per unit scan time, optimizes pulse parameters
//! against the worst case over a tissue range, and validates the bounds with
//! seeded Monte Carlo estimation.
//!
//! All numeric code is generic over the scalar type via [`Real`]; the `*64`
//! aliases below fix `f64`, which every stated tolerance assumes.

pub mod crb;
pub mod design;
pub mod error;
pub mod mc;
pub mod neldermead;
pub mod presets;
pub mod protocol;
pub mod scalar;
pub mod signal;
pub mod symmat;
pub mod tissue;

pub use crb::{
    crb_geometric, crb_matrix, equivalent_snr, evaluate_crb, fisher_information, gamma_per_sqrt_s,
    jacobian, pcrb, tnr_efficiency, CrbReport, FisherInfo, GeomBound, Jacobian, NoiseModel,
};
pub use design::{
    optimize_protocol, range_average_gammas, worst_case_efficiency, ConstraintSet, DesignSpec,
    Family, OptimizationResult, WorstCase,
};
pub use error::{CrbError, Error, McError, ModelError, OptimError, ProtocolError, TissueError};
pub use mc::{
    nlse_fit, run_trials, simulate_acquisition, trial_rng, FitResult, FitSettings, ParamStats,
    TrialConfig, TrialPoint, TrialReport,
};
pub use neldermead::{nelder_mead_minimize, NmOptions, NmResult};
pub use protocol::{timing_range, SeirTiming, SequenceProtocol};
pub use scalar::Real;
pub use signal::{raw_weights, sensitivity_numeric, weighting_vector, RelaxParam, WeightingVector};
pub use tissue::{linspace, TissueParams, TissueRange};

/// Concrete double-precision aliases.
pub type Protocol64 = SequenceProtocol<f64>;
pub type Tissue64 = TissueParams<f64>;
pub type Range64 = TissueRange<f64>;
pub type Noise64 = NoiseModel<f64>;
pub type CrbReport64 = CrbReport<f64>;
pub type DesignSpec64 = DesignSpec<f64>;
pub type TrialConfig64 = TrialConfig<f64>;
pub type TrialReport64 = TrialReport<f64>;
