//! Tridiagonal solves (Thomas algorithm) with reusable factorizations.
//!
//! The negative-jerk subproblems solve families of systems that share the
//! matrix but not the right-hand side, and repeatedly shrink by dropping
//! trailing rows. [`factor`] runs the forward elimination once and keeps
//! the pivots `b̃_i`, the forward multipliers `a_i / b̃_{i-1}` and the
//! back-substitution ratios `ψ_i = c_i / b̃_i`; a factorization of the full
//! system is valid for every leading subsystem because elimination only
//! looks backward.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TridiagError {
    #[error("pivot vanished at row {row}")]
    PivotBreakdown { row: usize },
    #[error("band lengths differ: a {a}, b {b}, c {c}")]
    ShapeMismatch { a: usize, b: usize, c: usize },
}

/// Forward elimination of a tridiagonal matrix.
///
/// Bands use aligned indexing: row `i` is `a[i] x_{i-1} + b[i] x_i +
/// c[i] x_{i+1} = d[i]` with `a[0]` and `c[m-1]` ignored.
#[derive(Debug, Clone)]
pub struct TriFactor {
    pivots: Vec<f64>,
    mult: Vec<f64>,
    psi: Vec<f64>,
}

/// Eliminates the matrix; fails only on a vanishing pivot.
pub fn factor(a: &[f64], b: &[f64], c: &[f64]) -> Result<TriFactor, TridiagError> {
    let m = b.len();
    if a.len() != m || c.len() != m {
        return Err(TridiagError::ShapeMismatch { a: a.len(), b: m, c: c.len() });
    }
    let (f, done) = factor_prefix(a, b, c);
    if done < m {
        return Err(TridiagError::PivotBreakdown { row: done });
    }
    Ok(f)
}

/// Eliminates the longest leading block before a pivot vanishes.
///
/// Returns the factorization together with the number of rows it covers;
/// a full factorization covers `b.len()` rows. Callers that solve nested
/// leading subsystems use this to cap the subsystem size instead of
/// failing outright.
pub fn factor_prefix(a: &[f64], b: &[f64], c: &[f64]) -> (TriFactor, usize) {
    let m = b.len();
    debug_assert!(a.len() == m && c.len() == m);
    let mut pivots = vec![0.0; m];
    let mut mult = vec![0.0; m];
    let mut psi = vec![0.0; m];
    for i in 0..m {
        let mut pivot = b[i];
        if i > 0 {
            mult[i] = a[i] / pivots[i - 1];
            pivot -= mult[i] * c[i - 1];
        }
        let row_scale = b[i].abs().max(a[i].abs()).max(c[i].abs()).max(1e-300);
        if pivot.abs() <= 1e-14 * row_scale {
            pivots.truncate(i);
            mult.truncate(i);
            psi.truncate(i);
            return (TriFactor { pivots, mult, psi }, i);
        }
        pivots[i] = pivot;
        if i + 1 < m {
            psi[i] = c[i] / pivot;
        }
    }
    (TriFactor { pivots, mult, psi }, m)
}

impl TriFactor {
    /// Number of rows eliminated.
    pub fn len(&self) -> usize {
        self.pivots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pivots.is_empty()
    }

    /// Pivot `b̃_i` of row `i`.
    pub fn pivot(&self, i: usize) -> f64 {
        self.pivots[i]
    }

    /// Back-substitution ratio `ψ_i = c_i / b̃_i` (zero on the last row).
    pub fn psi(&self, i: usize) -> f64 {
        self.psi[i]
    }

    /// Forward multiplier `a_i / b̃_{i-1}` (zero on the first row).
    pub fn forward_mult(&self, i: usize) -> f64 {
        self.mult[i]
    }

    /// Skip product `m_{i,r} = Π_{s=i}^{r-1} ψ_s`, with `m_{i,i} = 1`.
    pub fn m_product(&self, i: usize, r: usize) -> f64 {
        self.psi[i..r].iter().product()
    }

    /// Solves the leading `d.len()`-row subsystem for one right-hand side.
    pub fn back_solve(&self, d: &[f64]) -> Vec<f64> {
        let m = d.len();
        assert!(m <= self.len(), "rhs longer than factorization");
        let mut x = vec![0.0; m];
        let mut prev = 0.0;
        for i in 0..m {
            let dt = d[i] - self.mult[i] * prev;
            x[i] = dt;
            prev = dt;
        }
        // x currently holds the eliminated rhs d̃; substitute backward.
        x[m - 1] /= self.pivots[m - 1];
        for i in (0..m - 1).rev() {
            x[i] = x[i] / self.pivots[i] - self.psi[i] * x[i + 1];
        }
        x
    }
}

/// One-shot Thomas solve.
pub fn solve(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Result<Vec<f64>, TridiagError> {
    let f = factor(a, b, c)?;
    if d.len() != f.len() {
        return Err(TridiagError::ShapeMismatch { a: a.len(), b: d.len(), c: c.len() });
    }
    Ok(f.back_solve(d))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_three_row_system() {
        let x = solve(&[0.0, -1.0, -1.0], &[2.0, 2.0, 2.0], &[-1.0, -1.0, 0.0], &[1.0, 0.0, 1.0])
            .unwrap();
        for (i, &v) in x.iter().enumerate() {
            assert!((v - 1.0).abs() < 1e-14, "x[{i}] = {v}");
        }
    }

    #[test]
    fn factor_reuse_across_rhs_and_truncation() {
        let a = [0.0, -0.3, -0.5, -0.2, -0.4];
        let b = [1.0, 1.0, 1.0, 1.0, 1.0];
        let c = [-0.3, -0.5, -0.2, -0.4, 0.0];
        let f = factor(&a, &b, &c).unwrap();
        for m in 1..=5 {
            let d: Vec<f64> = (0..m).map(|i| (i as f64 * 0.7).sin() + 1.5).collect();
            let x = f.back_solve(&d);
            let fresh = solve(&a[..m], &b[..m], &c[..m], &d).unwrap();
            for i in 0..m {
                assert!((x[i] - fresh[i]).abs() < 1e-12, "m = {m}, row {i}");
                let lhs = (if i > 0 { a[i] * x[i - 1] } else { 0.0 })
                    + b[i] * x[i]
                    + (if i + 1 < m { c[i] * x[i + 1] } else { 0.0 });
                assert!((lhs - d[i]).abs() < 1e-12, "m = {m}, residual row {i}");
            }
        }
    }

    #[test]
    fn skip_product_updates_truncated_solution() {
        // Shrinking the system by its last row and clamping the boundary to
        // value `y` changes row r by (-1)^{m-1-r}·m_{r,m-1}·(x_{m-1} - y).
        let a = [0.0, -0.4, -0.35, -0.45, -0.3];
        let b = [1.0, 1.0, 1.0, 1.0, 1.0];
        let c = [-0.4, -0.35, -0.45, -0.3, 0.0];
        let f = factor(&a, &b, &c).unwrap();
        let q = [0.9, 0.4, 0.7, 0.3, 0.8];
        let x_full = f.back_solve(&q);
        let y_boundary = 0.25;
        let m = 5;
        let mut shrunk_rhs: Vec<f64> = q[..m - 1].to_vec();
        shrunk_rhs[m - 2] -= c[m - 2] * y_boundary;
        let x_shrunk = f.back_solve(&shrunk_rhs);
        let delta = x_full[m - 1] - y_boundary;
        for r in 0..m - 1 {
            let sign = if (m - 1 - r) % 2 == 0 { 1.0 } else { -1.0 };
            let predicted = x_full[r] - sign * f.m_product(r, m - 1) * delta;
            assert!((x_shrunk[r] - predicted).abs() < 1e-12, "row {r}");
        }
    }

    #[test]
    fn breakdown_detected() {
        // Second pivot is 1 - 1·1 = 0.
        let err = solve(&[0.0, 1.0], &[1.0, 1.0], &[1.0, 0.0], &[1.0, 1.0]);
        assert!(matches!(err, Err(TridiagError::PivotBreakdown { row: 1 })));
    }

    #[test]
    fn shape_mismatch_detected() {
        assert!(factor(&[0.0], &[1.0, 1.0], &[0.0, 0.0]).is_err());
    }
}
