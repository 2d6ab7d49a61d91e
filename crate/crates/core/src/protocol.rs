//! Pulse-sequence protocol definitions, validation and sequence time.

use crate::error::ProtocolError;
use crate::scalar::{c, Real};

/// How the SEIR sequence time is accounted.
///
/// Published timing tables count the inversion delay on top of the two block
/// repetition times, so `BlockSumPlusTi` is the default; `BlockSum` adds the
/// bare block times only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SeirTiming {
    BlockSum,
    #[default]
    BlockSumPlusTi,
}

/// A relaxometry acquisition protocol. Exactly one family per value; all
/// timings in milliseconds, flip angles in degrees.
#[derive(Debug, Clone, PartialEq)]
pub enum SequenceProtocol<T> {
    /// Conventional inversion recovery: long constant wait `w`, varying TI.
    Cir { ti: Vec<T>, w: T },
    /// Saturation recovery: 90-degree pulses only.
    Sr { ti: Vec<T> },
    /// Fast inversion recovery with fixed wait time.
    Fir1 { ti: Vec<T>, w: T },
    /// Fast inversion recovery with fixed repetition time.
    Fir2 { ti: Vec<T>, tr: T },
    /// Look-Locker: inversion followed by a train of small-flip readouts.
    Ll { alpha: T, t: Vec<T>, tr: T },
    /// Interleaved spin-echo / inversion-recovery blocks with echo trains.
    Seir {
        tr_ir: T,
        ti: T,
        tr_se: T,
        te: T,
        n_echo_ir: usize,
        n_echo_se: usize,
        timing: SeirTiming,
    },
    /// Steady-state SPGR + SSFP acquisition set.
    Despot {
        alpha_spgr: Vec<T>,
        tr_spgr: T,
        alpha_ssfp: Vec<T>,
        tr_ssfp: T,
    },
}

impl<T: Real> SequenceProtocol<T> {
    pub fn family_name(&self) -> &'static str {
        match self {
            Self::Cir { .. } => "cir",
            Self::Sr { .. } => "sr",
            Self::Fir1 { .. } => "fir1",
            Self::Fir2 { .. } => "fir2",
            Self::Ll { .. } => "ll",
            Self::Seir { .. } => "seir",
            Self::Despot { .. } => "despot",
        }
    }

    /// Number of jointly estimated parameters: 2 for T1-only families
    /// ([M0, T1]), 3 for joint T1/T2 families ([M0, T1, T2]).
    pub fn n_params(&self) -> usize {
        match self {
            Self::Seir { .. } | Self::Despot { .. } => 3,
            _ => 2,
        }
    }

    /// True for families whose model depends on T2.
    pub fn estimates_t2(&self) -> bool {
        self.n_params() == 3
    }

    /// Number of acquired samples.
    pub fn n_acquisitions(&self) -> usize {
        match self {
            Self::Cir { ti, .. } | Self::Fir1 { ti, .. } | Self::Fir2 { ti, .. } => ti.len(),
            Self::Sr { ti } => ti.len(),
            Self::Ll { t, .. } => t.len(),
            Self::Seir {
                n_echo_ir,
                n_echo_se,
                ..
            } => n_echo_ir + n_echo_se,
            Self::Despot {
                alpha_spgr,
                alpha_ssfp,
                ..
            } => alpha_spgr.len() + alpha_ssfp.len(),
        }
    }

    /// Checks every structural invariant; construction sites call this
    /// before a protocol enters the evaluation pipeline.
    pub fn validate(&self) -> Result<(), ProtocolError> {
        let n = self.n_acquisitions();
        let p = self.n_params();
        if n < p {
            return Err(ProtocolError::TooFewAcquisitions { n, p });
        }
        match self {
            Self::Cir { ti, w } | Self::Fir1 { ti, w } => {
                check_ti_list("ti", ti)?;
                check_positive("w", *w)?;
            }
            Self::Sr { ti } => check_ti_list("ti", ti)?,
            Self::Fir2 { ti, tr } => {
                check_ti_list("ti", ti)?;
                check_positive("tr", *tr)?;
                let max_ti = *ti.last().expect("non-empty");
                if max_ti >= *tr {
                    return Err(ProtocolError::WaitWindow {
                        max_ti: max_ti.to_f64().unwrap_or(f64::NAN),
                        tr: tr.to_f64().unwrap_or(f64::NAN),
                    });
                }
            }
            Self::Ll { alpha, t, tr } => {
                check_angle(*alpha, 90.0)?;
                check_list_increasing("t", t)?;
                if t.first().map(|&v| v <= T::zero()).unwrap_or(true) {
                    return Err(ProtocolError::NonPositiveTiming {
                        field: "t",
                        value: t.first().and_then(|v| v.to_f64()).unwrap_or(f64::NAN),
                    });
                }
                check_positive("tr", *tr)?;
            }
            Self::Seir {
                tr_ir,
                ti,
                tr_se,
                te,
                n_echo_ir,
                n_echo_se,
                ..
            } => {
                check_positive("tr_ir", *tr_ir)?;
                check_positive("ti", *ti)?;
                check_positive("tr_se", *tr_se)?;
                check_positive("te", *te)?;
                if *n_echo_ir == 0 || *n_echo_se == 0 {
                    return Err(ProtocolError::ZeroEchoes);
                }
                if *ti >= *tr_ir {
                    return Err(ProtocolError::InversionWindow {
                        ti: ti.to_f64().unwrap_or(f64::NAN),
                        tr_ir: tr_ir.to_f64().unwrap_or(f64::NAN),
                    });
                }
            }
            Self::Despot {
                alpha_spgr,
                tr_spgr,
                alpha_ssfp,
                tr_ssfp,
            } => {
                if alpha_spgr.is_empty() || alpha_ssfp.is_empty() {
                    return Err(ProtocolError::EmptyTimings);
                }
                for &a in alpha_spgr {
                    check_angle(a, 90.0)?;
                }
                for &a in alpha_ssfp {
                    check_angle(a, 180.0)?;
                }
                check_positive("tr_spgr", *tr_spgr)?;
                check_positive("tr_ssfp", *tr_ssfp)?;
            }
        }
        Ok(())
    }

    /// Scan time consumed by one repetition of the protocol, in ms.
    ///
    /// CIR/FIR1 sum TI + W per acquisition, FIR2 charges N repetitions of TR,
    /// SR sums the saturation-recovery times, LL and SEIR charge their
    /// repetition structure, DESPOT sums the per-acquisition TRs.
    pub fn sequence_time(&self) -> T {
        match self {
            Self::Cir { ti, w } | Self::Fir1 { ti, w } => ti
                .iter()
                .fold(T::zero(), |acc, &x| acc + x + *w),
            Self::Sr { ti } => ti.iter().fold(T::zero(), |acc, &x| acc + x),
            Self::Fir2 { ti, tr } => c::<T>(ti.len() as f64) * *tr,
            Self::Ll { tr, .. } => *tr,
            Self::Seir {
                tr_ir,
                ti,
                tr_se,
                timing,
                ..
            } => match timing {
                SeirTiming::BlockSum => *tr_ir + *tr_se,
                SeirTiming::BlockSumPlusTi => *tr_ir + *ti + *tr_se,
            },
            Self::Despot {
                alpha_spgr,
                tr_spgr,
                alpha_ssfp,
                tr_ssfp,
            } => {
                c::<T>(alpha_spgr.len() as f64) * *tr_spgr
                    + c::<T>(alpha_ssfp.len() as f64) * *tr_ssfp
            }
        }
    }

    /// Compact one-line description for reports.
    pub fn describe(&self) -> String {
        fn list<T: Real>(v: &[T]) -> String {
            let items: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
            format!("[{}]", items.join(","))
        }
        match self {
            Self::Cir { ti, w } => format!("cir ti={} w={w}", list(ti)),
            Self::Sr { ti } => format!("sr ti={}", list(ti)),
            Self::Fir1 { ti, w } => format!("fir1 ti={} w={w}", list(ti)),
            Self::Fir2 { ti, tr } => format!("fir2 ti={} tr={tr}", list(ti)),
            Self::Ll { alpha, t, tr } => format!("ll alpha={alpha} t={} tr={tr}", list(t)),
            Self::Seir {
                tr_ir,
                ti,
                tr_se,
                te,
                n_echo_ir,
                n_echo_se,
                ..
            } => format!(
                "seir tr_ir={tr_ir} ti={ti} tr_se={tr_se} te={te} n_echo_ir={n_echo_ir} n_echo_se={n_echo_se}"
            ),
            Self::Despot {
                alpha_spgr,
                tr_spgr,
                alpha_ssfp,
                tr_ssfp,
            } => format!(
                "despot alpha_spgr={} tr_spgr={tr_spgr} alpha_ssfp={} tr_ssfp={tr_ssfp}",
                list(alpha_spgr),
                list(alpha_ssfp)
            ),
        }
    }
}

fn check_positive<T: Real>(field: &'static str, v: T) -> Result<(), ProtocolError> {
    if !(v.is_finite() && v > T::zero()) {
        return Err(ProtocolError::NonPositiveTiming {
            field,
            value: v.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(())
}

/// TI lists may start at zero but must be finite and strictly increasing.
fn check_ti_list<T: Real>(field: &'static str, ti: &[T]) -> Result<(), ProtocolError> {
    if ti.is_empty() {
        return Err(ProtocolError::EmptyTimings);
    }
    if ti.iter().any(|v| !v.is_finite() || *v < T::zero()) {
        return Err(ProtocolError::NegativeEntry { field });
    }
    check_list_increasing(field, ti)
}

fn check_list_increasing<T: Real>(field: &'static str, v: &[T]) -> Result<(), ProtocolError> {
    if v.is_empty() {
        return Err(ProtocolError::EmptyTimings);
    }
    if v.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ProtocolError::NotIncreasing { field });
    }
    Ok(())
}

fn check_angle<T: Real>(alpha: T, hi: f64) -> Result<(), ProtocolError> {
    let a = alpha.to_f64().unwrap_or(f64::NAN);
    let ok = if hi >= 180.0 {
        a.is_finite() && a > 0.0 && a < hi
    } else {
        a.is_finite() && a > 0.0 && a <= hi
    };
    if !ok {
        return Err(ProtocolError::FlipAngleRange {
            value: a,
            lo: 0.0,
            hi,
        });
    }
    Ok(())
}

/// Arithmetic timing list `start : step : end`, inclusive of `end` when it
/// lands on the lattice (mirrors the published protocol-table notation).
pub fn timing_range<T: Real>(start: T, step: T, end: T) -> Vec<T> {
    let mut out = Vec::new();
    if step <= T::zero() {
        return out;
    }
    let n = ((end - start) / step)
        .to_f64()
        .map(|x| (x + 1e-9).floor() as usize)
        .unwrap_or(0);
    for i in 0..=n {
        out.push(start + step * c::<T>(i as f64));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cir_published() -> SequenceProtocol<f64> {
        SequenceProtocol::Cir {
            ti: timing_range(0.0, 450.0, 1800.0),
            w: 10000.0,
        }
    }

    #[test]
    fn timing_range_matches_table_notation() {
        assert_eq!(timing_range(0.0, 450.0, 1800.0), vec![0.0, 450.0, 900.0, 1350.0, 1800.0]);
        assert_eq!(timing_range(206.0, 206.0, 3090.0).len(), 15);
    }

    #[test]
    fn published_sequence_times() {
        assert_relative_eq!(cir_published().sequence_time(), 54500.0);
        let sr = SequenceProtocol::Sr {
            ti: timing_range(0.0, 620.0, 6820.0),
        };
        assert_relative_eq!(sr.sequence_time(), 40920.0);
        let despot = SequenceProtocol::Despot {
            alpha_spgr: vec![8.6],
            tr_spgr: 6.8,
            alpha_ssfp: vec![13.9, 57.8],
            tr_ssfp: 3.4,
        };
        assert_relative_eq!(despot.sequence_time(), 13.6);
        let fir1 = SequenceProtocol::Fir1 {
            ti: timing_range(0.0, 378.0, 2268.0),
            w: 5647.0,
        };
        assert_relative_eq!(fir1.sequence_time(), 47467.0);
        let fir2 = SequenceProtocol::Fir2 {
            ti: timing_range(0.0, 303.0, 2424.0),
            tr: 6722.0,
        };
        assert_relative_eq!(fir2.sequence_time(), 60498.0);
    }

    #[test]
    fn seir_time_conventions() {
        let mk = |timing| SequenceProtocol::Seir {
            tr_ir: 2994.0,
            ti: 1270.0,
            tr_se: 2942.0,
            te: 17.0,
            n_echo_ir: 3,
            n_echo_se: 4,
            timing,
        };
        assert_relative_eq!(mk(SeirTiming::BlockSumPlusTi).sequence_time(), 7206.0);
        assert_relative_eq!(mk(SeirTiming::BlockSum).sequence_time(), 5936.0);
    }

    #[test]
    fn validation_catches_structural_errors() {
        assert!(cir_published().validate().is_ok());
        // TI list with a repeat
        let p = SequenceProtocol::Cir {
            ti: vec![0.0, 450.0, 450.0],
            w: 10000.0,
        };
        assert!(matches!(p.validate(), Err(ProtocolError::NotIncreasing { .. })));
        // too few acquisitions for two unknowns
        let p = SequenceProtocol::Sr { ti: vec![500.0] };
        assert!(matches!(
            p.validate(),
            Err(ProtocolError::TooFewAcquisitions { n: 1, p: 2 })
        ));
        // FIR2 wait window
        let p = SequenceProtocol::Fir2 {
            ti: vec![0.0, 3000.0],
            tr: 2500.0,
        };
        assert!(matches!(p.validate(), Err(ProtocolError::WaitWindow { .. })));
        // SEIR inversion window
        let p = SequenceProtocol::Seir {
            tr_ir: 1000.0,
            ti: 1500.0,
            tr_se: 2000.0,
            te: 17.0,
            n_echo_ir: 3,
            n_echo_se: 4,
            timing: SeirTiming::default(),
        };
        assert!(matches!(p.validate(), Err(ProtocolError::InversionWindow { .. })));
        // SSFP angle must stay below 180
        let p = SequenceProtocol::Despot {
            alpha_spgr: vec![8.6],
            tr_spgr: 6.8,
            alpha_ssfp: vec![13.9, 180.0],
            tr_ssfp: 3.4,
        };
        assert!(matches!(p.validate(), Err(ProtocolError::FlipAngleRange { .. })));
        // TI = 0 entries are fine
        let p = SequenceProtocol::Sr {
            ti: vec![0.0, 100.0, 200.0],
        };
        assert!(p.validate().is_ok());
    }
}
