//! Tissue parameters and the tissue range the optimizer targets.

use crate::error::TissueError;
use crate::scalar::{c, Real};

/// The unknown vector a protocol estimates: equilibrium magnetization and
/// the two relaxation times. Times are in milliseconds, `m0` in arbitrary
/// signal units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TissueParams<T> {
    pub m0: T,
    pub t1: T,
    pub t2: T,
}

impl<T: Real> TissueParams<T> {
    /// Builds a tissue point, rejecting non-positive or non-finite fields.
    pub fn new(m0: T, t1: T, t2: T) -> Result<Self, TissueError> {
        for (field, value) in [("m0", m0), ("t1", t1), ("t2", t2)] {
            if !(value.is_finite() && value > T::zero()) {
                return Err(TissueError::NonPositive {
                    field,
                    value: value.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        Ok(Self { m0, t1, t2 })
    }

    /// T2 exceeding T1 is physically implausible but not an error; callers
    /// surface this as a warning.
    pub fn is_physically_plausible(&self) -> bool {
        self.t2 <= self.t1
    }
}

/// Rectangular T1/T2 region (fixed M0) over which worst-case efficiency is
/// taken, with the grid resolution used for inner minimization and range
/// averages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TissueRange<T> {
    pub t1_min: T,
    pub t1_max: T,
    pub t2_min: T,
    pub t2_max: T,
    pub m0: T,
    pub grid_t1: usize,
    pub grid_t2: usize,
}

impl<T: Real> TissueRange<T> {
    pub fn new(
        t1_min: T,
        t1_max: T,
        t2_min: T,
        t2_max: T,
        m0: T,
        grid_t1: usize,
        grid_t2: usize,
    ) -> Result<Self, TissueError> {
        let check = |field: &'static str, lo: T, hi: T| -> Result<(), TissueError> {
            if !(lo.is_finite() && hi.is_finite() && lo > T::zero() && lo <= hi) {
                return Err(TissueError::NonPositive {
                    field,
                    value: lo.to_f64().unwrap_or(f64::NAN),
                });
            }
            Ok(())
        };
        check("t1_min", t1_min, t1_max)?;
        check("t2_min", t2_min, t2_max)?;
        check("m0", m0, m0)?;
        let grid_ok = |n: usize, lo: T, hi: T| n >= 2 || lo == hi;
        if !grid_ok(grid_t1, t1_min, t1_max) || !grid_ok(grid_t2, t2_min, t2_max) {
            return Err(TissueError::NonPositive {
                field: "grid",
                value: 0.0,
            });
        }
        Ok(Self {
            t1_min,
            t1_max,
            t2_min,
            t2_max,
            m0,
            grid_t1,
            grid_t2,
        })
    }

    /// Reference values used by legacy-free callers: mid T1, mid T2.
    pub fn midpoint(&self) -> TissueParams<T> {
        TissueParams {
            m0: self.m0,
            t1: (self.t1_min + self.t1_max) * c(0.5),
            t2: (self.t2_min + self.t2_max) * c(0.5),
        }
    }

    pub fn t1_axis(&self) -> Vec<T> {
        linspace(self.t1_min, self.t1_max, self.grid_t1)
    }

    pub fn t2_axis(&self) -> Vec<T> {
        linspace(self.t2_min, self.t2_max, self.grid_t2)
    }

    /// Full cartesian grid, T2 varying fastest.
    pub fn grid(&self) -> Vec<TissueParams<T>> {
        let t1s = self.t1_axis();
        let t2s = self.t2_axis();
        let mut pts = Vec::with_capacity(t1s.len() * t2s.len());
        for &t1 in &t1s {
            for &t2 in &t2s {
                pts.push(TissueParams {
                    m0: self.m0,
                    t1,
                    t2,
                });
            }
        }
        pts
    }

    /// Tissue line from (t1_min, t2_min) to (t1_max, t2_max) with `n` points;
    /// the convention for one-dimensional curves of joint protocols.
    pub fn diagonal(&self, n: usize) -> Vec<TissueParams<T>> {
        let us = linspace(T::zero(), T::one(), n.max(1));
        us.into_iter()
            .map(|u| TissueParams {
                m0: self.m0,
                t1: self.t1_min + u * (self.t1_max - self.t1_min),
                t2: self.t2_min + u * (self.t2_max - self.t2_min),
            })
            .collect()
    }
}

/// `n` evenly spaced values from `lo` to `hi` inclusive (single value when
/// `n == 1` or the interval is degenerate).
pub fn linspace<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    if n <= 1 || lo == hi {
        return vec![lo];
    }
    let step = (hi - lo) / c::<T>((n - 1) as f64);
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo + step * c::<T>(i as f64)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nonpositive_fields() {
        assert!(TissueParams::new(3000.0, 1500.0, 85.0).is_ok());
        assert!(TissueParams::new(0.0, 1500.0, 85.0).is_err());
        assert!(TissueParams::new(3000.0, -1.0, 85.0).is_err());
        assert!(TissueParams::new(3000.0, 1500.0, f64::NAN).is_err());
    }

    #[test]
    fn plausibility_is_warning_only() {
        let t = TissueParams::new(3000.0, 80.0, 200.0).unwrap();
        assert!(!t.is_physically_plausible());
    }

    #[test]
    fn grid_covers_range() {
        let r = TissueRange::new(1000.0, 2000.0, 60.0, 110.0, 3000.0, 21, 11).unwrap();
        let g = r.grid();
        assert_eq!(g.len(), 21 * 11);
        assert_eq!(g[0].t1, 1000.0);
        assert_eq!(g.last().unwrap().t1, 2000.0);
        assert_eq!(g.last().unwrap().t2, 110.0);
    }

    #[test]
    fn degenerate_range_single_point() {
        let r = TissueRange::new(1500.0, 1500.0, 85.0, 85.0, 3000.0, 1, 1).unwrap();
        assert_eq!(r.grid().len(), 1);
    }

    #[test]
    fn grid_count_must_match_extent() {
        assert!(TissueRange::new(1000.0, 2000.0, 60.0, 110.0, 3000.0, 1, 11).is_err());
    }
}
