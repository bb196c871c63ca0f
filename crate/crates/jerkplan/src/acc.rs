//! Largest step under the acceleration rows and a cap.
//!
//! The set `{δ : δ ≤ y, δ_{i+1} - δ_i ≤ bA_i, δ_i - δ_{i+1} ≤ bD_i}` is
//! closed under component-wise maximum, so it has a unique largest element,
//! reached by clipping a forward sweep against the acceleration rows and a
//! backward sweep against the deceleration rows. Each sweep only ever
//! lowers values, and one pass each suffices because a forward row couples
//! strictly left-to-right and a deceleration row right-to-left.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AccError {
    #[error("negative {name} rhs at row {index}: {value}")]
    NegativeRhs { name: &'static str, index: usize, value: f64 },
    #[error("cap has {y} entries, rows have {rows}")]
    ShapeMismatch { y: usize, rows: usize },
}

/// Component-wise largest `δ ≤ y` satisfying all acceleration rows.
///
/// `b_acc` and `b_dec` hold the row right-hand sides, one per interval;
/// both must be nonnegative so that `δ = y` clipped is well defined.
pub fn solve_acc(y: &[f64], b_acc: &[f64], b_dec: &[f64]) -> Result<Vec<f64>, AccError> {
    let n = y.len();
    if b_acc.len() != n - 1 || b_dec.len() != n - 1 {
        return Err(AccError::ShapeMismatch { y: n, rows: b_acc.len().min(b_dec.len()) });
    }
    for (i, &v) in b_acc.iter().enumerate() {
        if v < 0.0 {
            return Err(AccError::NegativeRhs { name: "acceleration", index: i, value: v });
        }
    }
    for (i, &v) in b_dec.iter().enumerate() {
        if v < 0.0 {
            return Err(AccError::NegativeRhs { name: "deceleration", index: i, value: v });
        }
    }
    Ok(sweep(y, b_acc, b_dec))
}

/// The two sweeps without precondition checks; callers inside the solver
/// guarantee nonnegative rows and may pass caps of either sign.
pub(crate) fn sweep(y: &[f64], b_acc: &[f64], b_dec: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut d = y.to_vec();
    for i in 0..n - 1 {
        d[i + 1] = d[i + 1].min(d[i] + b_acc[i]);
    }
    for i in (0..n - 1).rev() {
        d[i] = d[i].min(d[i + 1] + b_dec[i]);
    }
    d
}
