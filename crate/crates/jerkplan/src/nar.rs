//! Largest step under the negative-jerk rows and a cap.
//!
//! The rows `δ_i - c_i (δ_{i-1} + δ_{i+1}) ≤ bN_i` with `c_i ≥ 0`,
//! `bN_i ≥ 0` again make the feasible set `{δ ≤ y, rows}` closed under
//! component-wise maximum, but unlike the acceleration rows they couple
//! both neighbors, so the maximum is found piece by piece. Positions
//! without a row split the grid into independent segments (their cap is
//! always attained). Inside a segment the maximum alternates runs where
//! the cap is active with runs where the rows hold with equality; each
//! equality run solves a tridiagonal system.
//!
//! [`solve_nar`] walks a segment left to right. For a candidate piece
//! `{s+1, …, j-1}` it solves the rows as equalities with boundary values
//! `δ_s, δ_j` fixed at their caps, checks `lb ≤ x̄ < y` on the piece
//! ([`feasibility_scan`]), and accepts once a nonnegative certificate
//! `Aᵀλ = 1` exists ([`optimality_certificate`]); otherwise `j` shrinks
//! by one. The matrix is factored once per piece search and every shorter
//! candidate reuses the factorization, paying one `O(m)` back-substitution
//! instead of a fresh elimination.

use thiserror::Error;

use crate::linearize::RowCoeff;
use crate::tridiag;

#[derive(Debug, Error)]
pub enum NarError {
    #[error("negative rhs at row {index}: {value}")]
    NegativeRhs { index: usize, value: f64 },
    #[error("negative coefficient at row {index}: {value}")]
    NegativeCoeff { index: usize, value: f64 },
    #[error("rows at the boundary index {0}")]
    BoundaryRow(usize),
    #[error("cap has {y} entries, rows have {rows}")]
    ShapeMismatch { y: usize, rows: usize },
}

/// Component-wise largest `δ ≤ y` satisfying all negative-jerk rows,
/// with the paper's implicit floor `δ ≥ 0` used by the wrong-piece scan.
///
/// `rows[i]` is the row at grid point `i`; the two endpoints must be
/// row-free. The floor never binds when `y ≥ 0` and all rhs are
/// nonnegative; it only serves to detect misplaced pieces early.
pub fn solve_nar(y: &[f64], rows: &[Option<RowCoeff>]) -> Result<Vec<f64>, NarError> {
    let n = y.len();
    if rows.len() != n {
        return Err(NarError::ShapeMismatch { y: n, rows: rows.len() });
    }
    if n > 0 {
        if rows[0].is_some() {
            return Err(NarError::BoundaryRow(0));
        }
        if rows[n - 1].is_some() {
            return Err(NarError::BoundaryRow(n - 1));
        }
    }
    for (i, row) in rows.iter().enumerate() {
        if let Some(rc) = row {
            if rc.rhs < 0.0 {
                return Err(NarError::NegativeRhs { index: i, value: rc.rhs });
            }
            if rc.coeff < 0.0 {
                return Err(NarError::NegativeCoeff { index: i, value: rc.coeff });
            }
        }
    }
    Ok(solve_nar_bounded(y, &vec![0.0; n], rows))
}

/// As [`solve_nar`] with an explicit floor vector, no validation.
///
/// The floor must itself satisfy every row so that the maximum dominates
/// it; the trust-region caller passes `lb = -w`, which does.
pub(crate) fn solve_nar_bounded(y: &[f64], lb: &[f64], rows: &[Option<RowCoeff>]) -> Vec<f64> {
    let n = y.len();
    let mut z = y.to_vec();
    let mut s = 0;
    while s + 1 < n {
        if rows[s + 1].is_none() {
            s += 1;
            continue;
        }
        let mut t = s + 1;
        while rows[t].is_some() {
            t += 1;
        }
        let mut left = s;
        while left + 1 < t {
            left = accept_piece(&mut z, lb, rows, left, t);
        }
        s = t;
    }
    clip_rows(&mut z, rows);
    z
}

/// One round of Alg.-style piece acceptance on the segment `[s, t]`:
/// returns the accepted piece's right boundary `j` and writes the piece
/// values into `z[s+1..j]`. `j = s+1` means the cap at `s+1` is active.
fn accept_piece(z: &mut [f64], lb: &[f64], rows: &[Option<RowCoeff>], s: usize, t: usize) -> usize {
    let mf = t - 1 - s;
    let mut coeff = Vec::with_capacity(mf);
    let mut rhs = Vec::with_capacity(mf);
    for i in s + 1..t {
        let rc = rows[i].expect("segment interior has rows");
        coeff.push(rc.coeff);
        rhs.push(rc.rhs);
    }
    let mut sub = vec![0.0; mf];
    let mut sup = vec![0.0; mf];
    for r in 0..mf {
        if r > 0 {
            sub[r] = -coeff[r];
        }
        if r + 1 < mf {
            sup[r] = -coeff[r];
        }
    }
    let diag = vec![1.0; mf];
    let (fac, usable) = tridiag::factor_prefix(&sub, &diag, &sup);

    // Forward-eliminated solution of the boundary-free system; each
    // candidate only corrects its last row for the right boundary value.
    let mut alpha = vec![0.0; usable];
    let mut carried = 0.0;
    for r in 0..usable {
        let q = rhs[r] + if r == 0 { coeff[0] * z[s] } else { 0.0 };
        let eliminated = q - fac.forward_mult(r) * carried;
        alpha[r] = eliminated / fac.pivot(r);
        carried = eliminated;
    }

    let mut x = vec![0.0; usable];
    let mut j = t.min(s + 1 + usable);
    while j > s + 1 {
        let m = j - 1 - s;
        x[m - 1] = alpha[m - 1] + coeff[m - 1] * z[j] / fac.pivot(m - 1);
        let mut feasible = lb[s + m] <= x[m - 1] && x[m - 1] < z[s + m];
        if feasible {
            for r in (0..m - 1).rev() {
                x[r] = alpha[r] - fac.psi(r) * x[r + 1];
                if x[r] < lb[s + 1 + r] || x[r] >= z[s + 1 + r] {
                    feasible = false;
                    break;
                }
            }
        }
        if feasible {
            if let Certificate::Accept(_) = optimality_certificate(&coeff[..m]) {
                z[s + 1..j].copy_from_slice(&x[..m]);
                return j;
            }
        }
        j -= 1;
    }
    j
}

/// Outcome of checking a candidate piece solution against its bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scan {
    /// Strictly below the cap and at or above the floor everywhere.
    Pass,
    /// `x̄` reaches the cap at this piece-local index; the cap belongs in
    /// the active set, the piece is too long.
    CapHit(usize),
    /// `x̄` drops below the floor at this piece-local index, which the
    /// true maximum never does; the piece is wrong.
    BelowFloor(usize),
}

/// Scans a piece solution right to left; the first offending index wins.
pub fn feasibility_scan(x: &[f64], y: &[f64], lb: &[f64]) -> Scan {
    for r in (0..x.len()).rev() {
        if x[r] >= y[r] {
            return Scan::CapHit(r);
        }
        if x[r] < lb[r] {
            return Scan::BelowFloor(r);
        }
    }
    Scan::Pass
}

/// Nonnegative row multipliers certifying a piece, if they exist.
#[derive(Debug, Clone, PartialEq)]
pub enum Certificate {
    /// `Aᵀλ = 1` with `λ ≥ -1e-9`: no row can be relaxed to grow the
    /// piece, accept it.
    Accept(Vec<f64>),
    /// System singular or some multiplier negative: a longer piece was
    /// cut too late, shrink and retry.
    Reject,
}

/// Solves `Aᵀλ = 1` for the piece matrix `A = I - diag(c)·(shift + shiftᵀ)`
/// given the piece's row coefficients.
pub fn optimality_certificate(coeff: &[f64]) -> Certificate {
    let m = coeff.len();
    if m == 0 {
        return Certificate::Accept(Vec::new());
    }
    let mut sub = vec![0.0; m];
    let mut sup = vec![0.0; m];
    for r in 0..m {
        if r > 0 {
            sub[r] = -coeff[r - 1];
        }
        if r + 1 < m {
            sup[r] = -coeff[r + 1];
        }
    }
    match tridiag::solve(&sub, &vec![1.0; m], &sup, &vec![1.0; m]) {
        Ok(lambda) if lambda.iter().all(|&l| l >= -1e-9) => Certificate::Accept(lambda),
        _ => Certificate::Reject,
    }
}

/// Settles roundoff on the rows separating accepted pieces: clamping to a
/// row's own bound never cuts below any feasible point, so maximality is
/// preserved while the output becomes feasible to machine precision.
fn clip_rows(z: &mut [f64], rows: &[Option<RowCoeff>]) {
    for _ in 0..64 {
        let mut changed = false;
        for (i, row) in rows.iter().enumerate() {
            if let Some(rc) = row {
                let cap = rc.rhs + rc.coeff * (z[i - 1] + z[i + 1]);
                if z[i] > cap {
                    z[i] = cap;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
}
