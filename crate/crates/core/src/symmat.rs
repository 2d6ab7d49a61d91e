//! Minimal symmetric-matrix helper for the 2x2 / 3x3 Fisher information.

use crate::scalar::Real;

/// Dense symmetric matrix of order 2 or 3, stored as a padded 3x3 array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMat<T> {
    n: usize,
    m: [[T; 3]; 3],
}

impl<T: Real> SymMat<T> {
    pub fn zeros(n: usize) -> Self {
        assert!((2..=3).contains(&n), "only orders 2 and 3 are supported");
        Self {
            n,
            m: [[T::zero(); 3]; 3],
        }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.m[i][j]
    }

    /// Sets `(i, j)` and mirrors into `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.m[i][j] = v;
        self.m[j][i] = v;
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                out.m[i][j] = self.m[i][j] * s;
            }
        }
        out
    }

    pub fn det(&self) -> T {
        let m = &self.m;
        match self.n {
            2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
            _ => {
                m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                    - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                    + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
            }
        }
    }

    /// Inverse via the adjugate; `None` when the determinant is zero or the
    /// result is non-finite.
    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d == T::zero() || !d.is_finite() {
            return None;
        }
        let m = &self.m;
        let mut out = Self::zeros(self.n);
        match self.n {
            2 => {
                out.m[0][0] = m[1][1] / d;
                out.m[1][1] = m[0][0] / d;
                out.m[0][1] = -m[0][1] / d;
                out.m[1][0] = -m[1][0] / d;
            }
            _ => {
                let cof = |r1: usize, c1: usize, r2: usize, c2: usize| {
                    m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]
                };
                out.m[0][0] = cof(1, 1, 2, 2) / d;
                out.m[0][1] = -cof(0, 1, 2, 2) / d;
                out.m[0][2] = cof(0, 1, 1, 2) / d;
                out.m[1][0] = out.m[0][1];
                out.m[1][1] = cof(0, 0, 2, 2) / d;
                out.m[1][2] = -cof(0, 0, 1, 2) / d;
                out.m[2][0] = out.m[0][2];
                out.m[2][1] = out.m[1][2];
                out.m[2][2] = cof(0, 0, 1, 1) / d;
            }
        }
        let finite = (0..self.n).all(|i| (0..self.n).all(|j| out.m[i][j].is_finite()));
        finite.then_some(out)
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> T {
        let mut best = T::zero();
        for j in 0..self.n {
            let mut s = T::zero();
            for i in 0..self.n {
                s = s + self.m[i][j].abs();
            }
            if s > best {
                best = s;
            }
        }
        best
    }

    /// 1-norm condition number, infinite when the matrix is not invertible.
    pub fn cond_one(&self) -> T {
        match self.inverse() {
            Some(inv) => self.norm_one() * inv.norm_one(),
            None => T::infinity(),
        }
    }

    /// Leading principal minors, used to check positive semidefiniteness.
    pub fn leading_minors(&self) -> Vec<T> {
        let m = &self.m;
        let mut out = vec![m[0][0]];
        out.push(m[0][0] * m[1][1] - m[0][1] * m[1][0]);
        if self.n == 3 {
            out.push(self.det());
        }
        out
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n).map(|i| self.m[i][i]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn mat3(rows: [[f64; 3]; 3]) -> SymMat<f64> {
        let mut m = SymMat::zeros(3);
        for i in 0..3 {
            for j in i..3 {
                m.set(i, j, rows[i][j]);
            }
        }
        m
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let a = mat3([[4.0, 1.0, 0.5], [0.0, 3.0, 0.2], [0.0, 0.0, 2.0]]);
        let inv = a.inverse().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += a.get(i, k) * inv.get(k, j);
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(s, expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn singular_matrix_has_no_inverse() {
        let mut a = SymMat::<f64>::zeros(2);
        a.set(0, 0, 1.0);
        a.set(0, 1, 1.0);
        a.set(1, 1, 1.0);
        assert!(a.inverse().is_none());
        assert!(a.cond_one().is_infinite());
    }

    #[test]
    fn condition_number_of_identity_is_one() {
        let mut a = SymMat::zeros(2);
        a.set(0, 0, 1.0);
        a.set(1, 1, 1.0);
        assert_relative_eq!(a.cond_one(), 1.0);
    }
}
