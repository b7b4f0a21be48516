//! Tridiagonal elimination (Thomas algorithm) for diagonally dominant
//! symmetric systems.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Solves `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`.
///
/// `lower[0]` and `upper[n-1]` are ignored. Fails on the first pivot that is
/// not strictly positive, which for the velocity system means the
/// coefficients (J or dt) are invalid.
pub fn solve<T: Scalar>(lower: &[T], diag: &[T], upper: &[T], rhs: &[T]) -> Result<Vec<T>> {
    let n = diag.len();
    for len in [lower.len(), upper.len(), rhs.len()] {
        if len != n {
            return Err(Error::SizeMismatch {
                expected: n,
                got: len,
            });
        }
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut c = vec![T::zero(); n];
    let mut d = vec![T::zero(); n];
    let mut pivot = diag[0];
    if !(pivot > T::zero()) {
        return Err(Error::NonPositivePivot {
            row: 0,
            pivot: pivot.as_f64(),
        });
    }
    c[0] = upper[0] / pivot;
    d[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - lower[i] * c[i - 1];
        if !(pivot > T::zero()) {
            return Err(Error::NonPositivePivot {
                row: i,
                pivot: pivot.as_f64(),
            });
        }
        c[i] = upper[i] / pivot;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / pivot;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        let next = x[i + 1];
        x[i] = x[i] - c[i] * next;
    }
    Ok(x)
}
