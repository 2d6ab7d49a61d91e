//! Error types for the relaxometry core.

use thiserror::Error;

/// Tissue parameter construction failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TissueError {
    #[error("tissue field {field} must be positive and finite, got {value}")]
    NonPositive { field: &'static str, value: f64 },
}

/// Protocol construction / validation failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("timing list must not be empty")]
    EmptyTimings,
    #[error("{field} must be positive and finite, got {value}")]
    NonPositiveTiming { field: &'static str, value: f64 },
    #[error("{field} entries must be strictly increasing")]
    NotIncreasing { field: &'static str },
    #[error("{field} entries must be non-negative and finite")]
    NegativeEntry { field: &'static str },
    #[error("flip angle {value} deg outside ({lo}, {hi}] deg")]
    FlipAngleRange { value: f64, lo: f64, hi: f64 },
    #[error("{n} acquisitions cannot identify {p} parameters")]
    TooFewAcquisitions { n: usize, p: usize },
    #[error("FIR2 requires max(TI) < TR, got max TI {max_ti} >= TR {tr}")]
    WaitWindow { max_ti: f64, tr: f64 },
    #[error("SEIR requires TI < TR_IR, got TI {ti} >= TR_IR {tr_ir}")]
    InversionWindow { ti: f64, tr_ir: f64 },
    #[error("echo count must be >= 1")]
    ZeroEchoes,
}

/// Signal-model evaluation failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("signal model produced a non-finite value (pathological timing/relaxation combination)")]
    NonFiniteModel,
    #[error("finite-difference step {step} degenerate for this tissue (perturbation below 1e-9 ms or outside [1e-7, 1e-2])")]
    DegenerateStep { step: f64 },
}

/// Fisher-information / CRB failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CrbError {
    #[error("Fisher information singular or ill-conditioned (cond {cond:.3e}); protocol cannot identify the parameters")]
    SingularInformation { cond: f64 },
    #[error("weighting and sensitivity vectors collinear (min sin phi {min_sin:.3e}); CRB diverges")]
    CollinearVectors { min_sin: f64 },
}

/// Protocol optimization failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimError {
    #[error("no feasible point: {reason}")]
    NoFeasiblePoint { reason: String },
}

/// Monte Carlo failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum McError {
    #[error("NLSE fit diverged after {evals} objective evaluations")]
    FitDiverged { evals: usize },
    #[error("all {n} trials failed at tissue point index {point}")]
    AllTrialsFailed { point: usize, n: usize },
}

/// Umbrella error for high-level entry points.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Tissue(#[from] TissueError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Crb(#[from] CrbError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Mc(#[from] McError),
}
