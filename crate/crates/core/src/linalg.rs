//! Dense LU factorization for the small matrices of the log-det constraint.
//!
//! The constraint is evaluated on `A = sI - W∘W`, a Z-matrix (nonpositive
//! off-diagonals). Such a matrix is a nonsingular M-matrix exactly when
//! Gaussian elimination without pivoting produces strictly positive pivots,
//! which is the same as all leading principal minors being positive. Pivoted
//! elimination would destroy that correspondence, and elimination on
//! M-matrices is stable without pivoting, so the factorization here is
//! deliberately unpivoted.

use crate::error::{Error, Result};
use ndarray::Array2;

/// Unpivoted LU factors of a square matrix, stored packed (U on and above
/// the diagonal, unit-L strictly below).
#[derive(Debug)]
pub struct LuFactors {
    lu: Array2<f64>,
    d: usize,
}

/// Pivot floor: a pivot at or below this is treated as a domain exit.
const MIN_PIVOT: f64 = 1e-300;

/// Factor `a` without pivoting, requiring every pivot to stay positive.
///
/// Returns a domain error on a nonpositive (or non-finite) pivot, which for
/// Z-matrix inputs means the M-matrix condition failed.
pub fn lu_positive_pivots(a: &Array2<f64>) -> Result<LuFactors> {
    let d = a.nrows();
    if a.ncols() != d {
        return Err(Error::param(format!(
            "matrix must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let mut lu = a.clone();
    for k in 0..d {
        let pivot = lu[(k, k)];
        if !pivot.is_finite() || pivot <= MIN_PIVOT {
            return Err(Error::domain(format!(
                "nonpositive pivot {pivot:e} at index {k}"
            )));
        }
        for i in (k + 1)..d {
            let m = lu[(i, k)] / pivot;
            lu[(i, k)] = m;
            if m != 0.0 {
                for j in (k + 1)..d {
                    lu[(i, j)] -= m * lu[(k, j)];
                }
            }
        }
    }
    Ok(LuFactors { lu, d })
}

impl LuFactors {
    /// Sum of log-pivots = log det, valid because all pivots are positive.
    pub fn log_det(&self) -> f64 {
        (0..self.d).map(|k| self.lu[(k, k)].ln()).sum()
    }

    /// Solve A x = b in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let d = self.d;
        debug_assert_eq!(b.len(), d);
        // forward: L y = b
        for i in 1..d {
            let mut s = b[i];
            for k in 0..i {
                s -= self.lu[(i, k)] * b[k];
            }
            b[i] = s;
        }
        // backward: U x = y
        for i in (0..d).rev() {
            let mut s = b[i];
            for k in (i + 1)..d {
                s -= self.lu[(i, k)] * b[k];
            }
            b[i] = s / self.lu[(i, i)];
        }
    }

    /// Full inverse, column by column.
    pub fn inverse(&self) -> Array2<f64> {
        let d = self.d;
        let mut inv = Array2::zeros((d, d));
        let mut col = vec![0.0; d];
        for j in 0..d {
            col.iter_mut().for_each(|v| *v = 0.0);
            col[j] = 1.0;
            self.solve_in_place(&mut col);
            for i in 0..d {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;

    #[test]
    fn identity_round_trip() {
        let a = array![[2.0, -0.5, 0.0], [-0.25, 1.5, -0.3], [0.0, -0.1, 1.0]];
        let f = lu_positive_pivots(&a).unwrap();
        let inv = f.inverse();
        let prod = a.dot(&inv);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(prod[(i, j)], want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn log_det_matches_closed_form() {
        // det([[1, -a], [-b, 1]]) = 1 - ab
        let a = array![[1.0, -0.25], [-0.25, 1.0]];
        let f = lu_positive_pivots(&a).unwrap();
        assert_relative_eq!(f.log_det(), (1.0f64 - 0.0625).ln(), epsilon = 1e-14);
    }

    #[test]
    fn nonpositive_pivot_is_domain_error() {
        // spectral radius of the off-diagonal part exceeds the diagonal
        let a = array![[1.0, -2.0], [-2.0, 1.0]];
        match lu_positive_pivots(&a) {
            Err(Error::Domain(_)) => {}
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn non_square_is_param_error() {
        let a = Array2::<f64>::zeros((2, 3));
        assert!(matches!(lu_positive_pivots(&a), Err(Error::Param(_))));
    }
}
