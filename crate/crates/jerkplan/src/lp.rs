//! Trust-region direction by linear programming.
//!
//! The direction problem is `min -νᵀd` subject to the positive-jerk rows
//! `c_i (d_{i-1} + d_{i+1}) - d_i ≤ φ_i` and box bounds `l ≤ d ≤ u` with
//! `l ≤ 0 ≤ u` and `φ ≥ 0`, so `d = 0` is always feasible. Splitting
//! `d = d⁺ - d⁻` turns the box into simple lower bounds at zero, which
//! makes the all-slack basis at the origin primal feasible and removes any
//! need for a phase-one start.
//!
//! The solver is a bounded-variable primal simplex with a dense basis
//! inverse: Dantzig pricing, ratio tests that allow bound flips, and a
//! permanent switch to Bland's rule after a run of degenerate pivots so
//! cycling cannot occur. Problem rows carry at most three entries each,
//! so one pivot costs `O(m²)` for `m` rows.

use thiserror::Error;

/// Why the direction LP could not be solved.
#[derive(Debug, Error)]
pub enum LpError {
    /// A row references a boundary point or carries a negative entry.
    #[error("row {index} is malformed: {reason}")]
    BadRow { index: usize, reason: &'static str },
    /// Bounds cross, or zero is outside them.
    #[error("bounds exclude the origin at coordinate {index}")]
    BadBounds { index: usize },
    /// The pivot budget ran out before reaching optimality.
    #[error("pivot budget exhausted after {0} pivots")]
    PivotLimit(usize),
}

/// Optimal direction and bookkeeping.
#[derive(Debug, Clone)]
pub struct LpSolution {
    /// Optimal `d`, zero at the boundary points.
    pub d: Vec<f64>,
    /// Objective value `-νᵀd` at the optimum.
    pub objective: f64,
    /// Simplex iterations used (basis changes and bound flips).
    pub pivots: usize,
}

#[derive(Clone, Copy, PartialEq)]
enum Status {
    Basic(usize),
    Lower,
    Upper,
}

const PIVOT_BUDGET: usize = 10_000;
const PIV_TOL: f64 = 1e-10;
const STALL_LIMIT: usize = 50;

/// Solves `min -νᵀd` over the rows and box.
///
/// Each row is `(i, coeff, phi)` standing for
/// `coeff·(d_{i-1} + d_{i+1}) - d_i ≤ phi` with `1 ≤ i ≤ n-2`,
/// `coeff ≥ 0` and `phi ≥ 0`. Bounds must satisfy
/// `lower ≤ 0 ≤ upper` coordinate-wise.
pub fn solve_lp(
    nu: &[f64],
    rows: &[(usize, f64, f64)],
    lower: &[f64],
    upper: &[f64],
) -> Result<LpSolution, LpError> {
    let n = nu.len();
    assert_eq!(lower.len(), n);
    assert_eq!(upper.len(), n);
    for j in 0..n {
        if !(lower[j] <= 0.0 && 0.0 <= upper[j]) || !lower[j].is_finite() || !upper[j].is_finite()
        {
            return Err(LpError::BadBounds { index: j });
        }
    }
    for (k, &(i, coeff, phi)) in rows.iter().enumerate() {
        if i == 0 || i + 1 >= n {
            return Err(LpError::BadRow { index: k, reason: "boundary point" });
        }
        if !(coeff >= 0.0) || !coeff.is_finite() {
            return Err(LpError::BadRow { index: k, reason: "negative coefficient" });
        }
        if !(phi >= 0.0) || !phi.is_finite() {
            return Err(LpError::BadRow { index: k, reason: "negative slack" });
        }
    }

    let m = rows.len();
    if m == 0 {
        let mut d = vec![0.0; n];
        for j in 0..n {
            if nu[j] > 0.0 {
                d[j] = upper[j];
            }
        }
        let objective = -d.iter().zip(nu).map(|(a, b)| a * b).sum::<f64>();
        return Ok(LpSolution { d, objective, pivots: 0 });
    }

    // Variables: d⁺_0..d⁺_{n-1}, d⁻_0..d⁻_{n-1}, s_0..s_{m-1}.
    let nvar = 2 * n + m;
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nvar];
    let mut cost = vec![0.0; nvar];
    let lo = vec![0.0; nvar];
    let mut hi = vec![f64::INFINITY; nvar];
    for j in 0..n {
        cost[j] = -nu[j];
        cost[n + j] = nu[j];
        hi[j] = upper[j];
        hi[n + j] = -lower[j];
    }
    for (k, &(i, coeff, _)) in rows.iter().enumerate() {
        for (col, sign) in [(i - 1, 1.0), (i, -1.0), (i + 1, 1.0)] {
            let v = if col == i { sign } else { sign * coeff };
            if v != 0.0 {
                cols[col].push((k, v));
                cols[n + col].push((k, -v));
            }
        }
        cols[2 * n + k].push((k, 1.0));
    }
    let b: Vec<f64> = rows.iter().map(|r| r.2).collect();

    let mut status = vec![Status::Lower; nvar];
    let mut basis: Vec<usize> = (0..m).map(|k| 2 * n + k).collect();
    for (slot, &var) in basis.iter().enumerate() {
        status[var] = Status::Basic(slot);
    }
    let mut binv: Vec<Vec<f64>> = (0..m)
        .map(|r| {
            let mut row = vec![0.0; m];
            row[r] = 1.0;
            row
        })
        .collect();
    let mut xb = b.clone();

    let cost_scale = nu.iter().fold(1.0_f64, |s, &v| s.max(v.abs()));
    let enter_tol = 1e-10 * cost_scale;
    let value = |j: usize, status: &[Status], xb: &[f64]| -> f64 {
        match status[j] {
            Status::Basic(k) => xb[k],
            Status::Lower => lo[j],
            Status::Upper => hi[j],
        }
    };

    let mut pivots = 0;
    let mut bland = false;
    let mut stall = 0usize;
    let mut best_obj = f64::INFINITY;
    loop {
        if pivots >= PIVOT_BUDGET {
            return Err(LpError::PivotLimit(pivots));
        }

        // Dual prices y = B⁻ᵀ c_B, then price every nonbasic column.
        let mut y = vec![0.0; m];
        for (k, &var) in basis.iter().enumerate() {
            let cb = cost[var];
            if cb != 0.0 {
                for r in 0..m {
                    y[r] += cb * binv[k][r];
                }
            }
        }
        let mut entering: Option<(usize, f64, f64)> = None;
        for j in 0..nvar {
            if matches!(status[j], Status::Basic(_)) || hi[j] - lo[j] <= 0.0 {
                continue;
            }
            let mut red = cost[j];
            for &(r, v) in &cols[j] {
                red -= y[r] * v;
            }
            let (dir, score) = match status[j] {
                Status::Lower if red < -enter_tol => (1.0, -red),
                Status::Upper if red > enter_tol => (-1.0, red),
                _ => continue,
            };
            match entering {
                None => entering = Some((j, dir, score)),
                Some((_, _, s)) if !bland && score > s => entering = Some((j, dir, score)),
                _ => {}
            }
            if bland {
                break;
            }
        }
        let Some((q, dir, _)) = entering else {
            break;
        };

        let mut w = vec![0.0; m];
        for &(r, v) in &cols[q] {
            for k in 0..m {
                w[k] += binv[k][r] * v;
            }
        }

        // Ratio test: the entering variable moves by `step` in direction
        // `dir` until it flips to its other bound or a basic variable
        // reaches one of its own.
        let mut step = hi[q] - lo[q];
        let mut leave: Option<(usize, bool)> = None;
        for k in 0..m {
            let wk = dir * w[k];
            let bk = basis[k];
            let (ratio, to_lower) = if wk > PIV_TOL {
                ((xb[k] - lo[bk]).max(0.0) / wk, true)
            } else if wk < -PIV_TOL && hi[bk].is_finite() {
                ((hi[bk] - xb[k]).max(0.0) / (-wk), false)
            } else {
                continue;
            };
            // Under Bland's rule, exact ratio ties go to the smaller
            // variable index so degenerate pivots cannot cycle.
            let replace = ratio < step
                || (bland
                    && ratio == step
                    && leave.is_some_and(|(slot, _)| bk < basis[slot]));
            if replace {
                step = ratio;
                leave = Some((k, to_lower));
            }
        }

        pivots += 1;
        match leave {
            None => {
                // Bound flip: the entering variable crosses its box.
                for k in 0..m {
                    xb[k] -= dir * w[k] * step;
                }
                status[q] = match status[q] {
                    Status::Lower => Status::Upper,
                    Status::Upper => Status::Lower,
                    Status::Basic(_) => unreachable!(),
                };
            }
            Some((r, to_lower)) => {
                let new_q = value(q, &status, &xb) + dir * step;
                for k in 0..m {
                    if k != r {
                        xb[k] -= dir * w[k] * step;
                    }
                }
                let leaving = basis[r];
                status[leaving] = if to_lower { Status::Lower } else { Status::Upper };
                let piv = w[r];
                for k in 0..m {
                    if k != r {
                        let factor = w[k] / piv;
                        if factor != 0.0 {
                            for c in 0..m {
                                let adj = factor * binv[r][c];
                                binv[k][c] -= adj;
                            }
                        }
                    }
                }
                for c in 0..m {
                    binv[r][c] /= piv;
                }
                basis[r] = q;
                status[q] = Status::Basic(r);
                xb[r] = new_q;
            }
        }

        // Periodically recompute the basic values from scratch to stop
        // update roundoff from accumulating.
        if pivots % 128 == 0 {
            let mut t = b.clone();
            for j in 0..nvar {
                if !matches!(status[j], Status::Basic(_)) {
                    let v = value(j, &status, &xb);
                    if v != 0.0 {
                        for &(r, a) in &cols[j] {
                            t[r] -= a * v;
                        }
                    }
                }
            }
            for k in 0..m {
                xb[k] = (0..m).map(|r| binv[k][r] * t[r]).sum();
            }
        }

        let obj: f64 = (0..nvar)
            .map(|j| cost[j] * value(j, &status, &xb))
            .sum();
        if obj < best_obj - 1e-14 * (1.0 + best_obj.abs()) {
            best_obj = obj;
            stall = 0;
        } else {
            stall += 1;
            if stall > STALL_LIMIT {
                bland = true;
            }
        }
    }

    let mut d = vec![0.0; n];
    for j in 0..n {
        d[j] = value(j, &status, &xb) - value(n + j, &status, &xb);
    }
    let objective = -d.iter().zip(nu).map(|(a, b)| a * b).sum::<f64>();
    Ok(LpSolution { d, objective, pivots })
}
