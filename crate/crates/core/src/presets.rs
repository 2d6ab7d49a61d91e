//! Reference protocols and tissue ranges for brain white/grey matter.
//!
//! These are the optimized acquisition settings from the published
//! comparison of the seven families at input SNR 100 over T1 in
//! [1000, 2000] ms and T2 in [60, 110] ms; they double as benchmark
//! fixtures for the validation suites.

use crate::protocol::{timing_range, SeirTiming, SequenceProtocol};
use crate::scalar::{c, Real};
use crate::tissue::TissueRange;

/// Brain white/grey matter range with the default averaging grid.
pub fn brain_range<T: Real>() -> TissueRange<T> {
    TissueRange::new(
        c(1000.0),
        c(2000.0),
        c(60.0),
        c(110.0),
        c(3000.0),
        21,
        11,
    )
    .expect("reference range is valid")
}

pub fn cir_reference<T: Real>() -> SequenceProtocol<T> {
    SequenceProtocol::Cir {
        ti: timing_range(T::zero(), c(450.0), c(1800.0)),
        w: c(10000.0),
    }
}

pub fn sr_reference<T: Real>() -> SequenceProtocol<T> {
    SequenceProtocol::Sr {
        ti: timing_range(T::zero(), c(620.0), c(6820.0)),
    }
}

pub fn fir1_reference<T: Real>() -> SequenceProtocol<T> {
    SequenceProtocol::Fir1 {
        ti: timing_range(T::zero(), c(378.0), c(2268.0)),
        w: c(5647.0),
    }
}

pub fn fir2_reference<T: Real>() -> SequenceProtocol<T> {
    SequenceProtocol::Fir2 {
        ti: timing_range(T::zero(), c(303.0), c(2424.0)),
        tr: c(6722.0),
    }
}

pub fn ll_reference<T: Real>() -> SequenceProtocol<T> {
    SequenceProtocol::Ll {
        alpha: c(30.0),
        t: timing_range(c(206.0), c(206.0), c(3090.0)),
        tr: c(8900.0),
    }
}

pub fn seir_reference<T: Real>() -> SequenceProtocol<T> {
    SequenceProtocol::Seir {
        tr_ir: c(2994.0),
        ti: c(1270.0),
        tr_se: c(2942.0),
        te: c(17.0),
        n_echo_ir: 3,
        n_echo_se: 4,
        timing: SeirTiming::BlockSumPlusTi,
    }
}

/// The three-acquisition scheme folds its two same-angle SPGR readouts into
/// one at doubled TR; the four-acquisition form below is the information
/// content actually acquired in the same total time.
pub fn despot_reference<T: Real>() -> SequenceProtocol<T> {
    SequenceProtocol::Despot {
        alpha_spgr: vec![c(8.6), c(8.6)],
        tr_spgr: c(3.4),
        alpha_ssfp: vec![c(13.9), c(57.8)],
        tr_ssfp: c(3.4),
    }
}

/// All seven reference protocols with their conventional names.
pub fn reference_protocols<T: Real>() -> Vec<(&'static str, SequenceProtocol<T>)> {
    vec![
        ("despot", despot_reference()),
        ("seir", seir_reference()),
        ("ll", ll_reference()),
        ("fir1", fir1_reference()),
        ("fir2", fir2_reference()),
        ("cir", cir_reference()),
        ("sr", sr_reference()),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reference_protocols_validate() {
        for (name, p) in reference_protocols::<f64>() {
            assert!(p.validate().is_ok(), "{name}");
        }
    }

    #[test]
    fn reference_sequence_times() {
        let expect = [
            ("despot", 13.6),
            ("seir", 7206.0),
            ("ll", 8900.0),
            ("fir1", 47467.0),
            ("fir2", 60498.0),
            ("cir", 54500.0),
            ("sr", 40920.0),
        ];
        for ((name, p), (ename, et)) in reference_protocols::<f64>().iter().zip(expect) {
            assert_eq!(*name, ename);
            assert_relative_eq!(p.sequence_time(), et);
        }
    }
}
