//! Slow reference solvers the test suites trust.
//!
//! Everything here is deliberately independent of the fast paths: the
//! fixpoint oracle never factors anything, the LP oracle enumerates
//! vertices, the dense solver runs textbook partial-pivot elimination.
//! They are orders of magnitude slower and only suitable for the small
//! sizes the tests use.

use crate::descent;
use crate::instance::Instance;
use crate::linearize::LinearizedModel;
use crate::objective;
use crate::prng::SplitMix64;

/// One monotone row `x_at ≤ rhs + coeff_prev·x_{at-1} + coeff_next·x_{at+1}`
/// with nonnegative coefficients.
#[derive(Debug, Clone, Copy)]
pub struct MonotoneRow {
    pub at: usize,
    pub coeff_prev: f64,
    pub coeff_next: f64,
    pub rhs: f64,
}

/// Component-wise largest `x ≤ y` satisfying all rows, by clipped
/// Gauss-Seidel sweeps.
///
/// Clipping a row never cuts below any feasible point, so the decreasing
/// iteration converges to the maximum from above; sweeps alternate
/// direction until the largest change in a pass is below `1e-13·scale`.
pub fn fixpoint_max(y: &[f64], rows: &[MonotoneRow]) -> Vec<f64> {
    let mut z = y.to_vec();
    let scale = y.iter().fold(1.0_f64, |m, &v| m.max(v.abs()));
    let tol = 1e-13 * scale;
    let mut ordered: Vec<&MonotoneRow> = rows.iter().collect();
    ordered.sort_by_key(|r| r.at);
    for pass in 0..500_000 {
        let mut largest = 0.0_f64;
        let mut clip = |z: &mut Vec<f64>, row: &MonotoneRow| {
            let prev = if row.at > 0 { z[row.at - 1] } else { 0.0 };
            let next = if row.at + 1 < z.len() { z[row.at + 1] } else { 0.0 };
            let cap = row.rhs + row.coeff_prev * prev + row.coeff_next * next;
            if z[row.at] > cap {
                largest = largest.max(z[row.at] - cap);
                z[row.at] = cap;
            }
        };
        if pass % 2 == 0 {
            for row in &ordered {
                clip(&mut z, row);
            }
        } else {
            for row in ordered.iter().rev() {
                clip(&mut z, row);
            }
        }
        if largest <= tol {
            break;
        }
    }
    z
}

/// One general inequality `Σ entries·d ≤ rhs`.
#[derive(Debug, Clone)]
pub struct LinRow {
    pub entries: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// Exact boxed-LP minimizer of `cost·d` by vertex enumeration.
///
/// Every vertex pins each variable to a bound or to an active row; the
/// oracle tries all assignments, so it is only usable for a handful of
/// variables. Returns the best vertex and its objective.
pub fn enumerate_lp(
    cost: &[f64],
    rows: &[LinRow],
    lower: &[f64],
    upper: &[f64],
) -> Option<(Vec<f64>, f64)> {
    let n = cost.len();
    assert!(n <= 12, "vertex enumeration explodes beyond tiny sizes");
    let m = rows.len();
    let mut best: Option<(Vec<f64>, f64)> = None;

    // Assignment digit per variable: 0 lower, 1 upper, 2 free.
    let mut assign = vec![0u8; n];
    loop {
        let free: Vec<usize> = (0..n).filter(|&i| assign[i] == 2).collect();
        let k = free.len();
        if k <= m.min(n) {
            let mut fixed = vec![0.0; n];
            for i in 0..n {
                fixed[i] = match assign[i] {
                    0 => lower[i],
                    1 => upper[i],
                    _ => 0.0,
                };
            }
            let mut active = vec![0usize; k];
            enumerate_active_rows(rows, &mut active, 0, 0, &mut |chosen| {
                if let Some(d) = solve_vertex(rows, chosen, &free, &fixed) {
                    if vertex_feasible(&d, rows, lower, upper) {
                        let obj: f64 = cost.iter().zip(&d).map(|(c, v)| c * v).sum();
                        if best.as_ref().is_none_or(|(_, b)| obj < *b) {
                            best = Some((d, obj));
                        }
                    }
                }
            });
        }
        // Increment the base-3 assignment counter.
        let mut pos = 0;
        loop {
            if pos == n {
                return best;
            }
            assign[pos] += 1;
            if assign[pos] < 3 {
                break;
            }
            assign[pos] = 0;
            pos += 1;
        }
    }
}

fn enumerate_active_rows(
    rows: &[LinRow],
    chosen: &mut [usize],
    depth: usize,
    start: usize,
    visit: &mut impl FnMut(&[usize]),
) {
    if depth == chosen.len() {
        visit(chosen);
        return;
    }
    for r in start..rows.len() {
        chosen[depth] = r;
        enumerate_active_rows(rows, chosen, depth + 1, r + 1, visit);
    }
}

fn solve_vertex(
    rows: &[LinRow],
    active: &[usize],
    free: &[usize],
    fixed: &[f64],
) -> Option<Vec<f64>> {
    let k = free.len();
    let mut mat = vec![vec![0.0; k + 1]; k];
    for (eq, &r) in active.iter().enumerate() {
        let mut rhs = rows[r].rhs;
        for &(var, coef) in &rows[r].entries {
            if let Some(slot) = free.iter().position(|&f| f == var) {
                mat[eq][slot] += coef;
            } else {
                rhs -= coef * fixed[var];
            }
        }
        mat[eq][k] = rhs;
    }
    // Partial-pivot Gaussian elimination on the k×k block.
    for col in 0..k {
        let piv = (col..k).max_by(|&a, &b| mat[a][col].abs().total_cmp(&mat[b][col].abs()))?;
        if mat[piv][col].abs() < 1e-11 {
            return None;
        }
        mat.swap(col, piv);
        for row in 0..k {
            if row != col {
                let f = mat[row][col] / mat[col][col];
                for c in col..=k {
                    mat[row][c] -= f * mat[col][c];
                }
            }
        }
    }
    let mut d = fixed.to_vec();
    for (slot, &var) in free.iter().enumerate() {
        d[var] = mat[slot][k] / mat[slot][slot];
    }
    Some(d)
}

fn vertex_feasible(d: &[f64], rows: &[LinRow], lower: &[f64], upper: &[f64]) -> bool {
    let tol = 1e-9;
    for i in 0..d.len() {
        let span = 1.0 + upper[i].abs().max(lower[i].abs());
        if d[i] < lower[i] - tol * span || d[i] > upper[i] + tol * span {
            return false;
        }
    }
    rows.iter().all(|row| {
        let lhs: f64 = row.entries.iter().map(|&(v, c)| c * d[v]).sum();
        lhs <= row.rhs + tol * (1.0 + row.rhs.abs())
    })
}

/// Dense partial-pivot solve of a tridiagonal system, for checking the
/// Thomas implementation. Returns `None` on a singular matrix.
pub fn dense_solve(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Option<Vec<f64>> {
    let m = b.len();
    let mut full = vec![vec![0.0; m + 1]; m];
    for i in 0..m {
        if i > 0 {
            full[i][i - 1] = a[i];
        }
        full[i][i] = b[i];
        if i + 1 < m {
            full[i][i + 1] = c[i];
        }
        full[i][m] = d[i];
    }
    for col in 0..m {
        let piv =
            (col..m).max_by(|&x, &y| full[x][col].abs().total_cmp(&full[y][col].abs()))?;
        if full[piv][col].abs() < 1e-13 {
            return None;
        }
        full.swap(col, piv);
        for row in 0..m {
            if row != col {
                let f = full[row][col] / full[col][col];
                for k in col..=m {
                    full[row][k] -= f * full[col][k];
                }
            }
        }
    }
    Some((0..m).map(|i| full[i][m] / full[i][i]).collect())
}

/// Central finite differences of the cap-restricted value function
/// `F(y) = min{f(w+δ) : δ feasible, δ ≤ y}` for validating extracted
/// multipliers, `∂F/∂y_i ≈ -ν_i`. Endpoint entries stay zero.
pub fn finite_diff_f(model: &LinearizedModel, y: &[f64], eps: f64) -> Vec<f64> {
    let n = y.len();
    let mut grad = vec![0.0; n];
    for i in 1..n - 1 {
        let mut hi = y.to_vec();
        let mut lo = y.to_vec();
        hi[i] += eps;
        lo[i] -= eps;
        let f_hi = descent::eval_f_value(&hi, model);
        let f_lo = descent::eval_f_value(&lo, model);
        grad[i] = (f_hi - f_lo) / (2.0 * eps);
    }
    grad
}

/// Random profile satisfying every original constraint, for property and
/// acceptance tests: random caps smoothed by the acceleration sweeps,
/// then scaled until the jerk rows hold (they scale as t^{3/2}).
pub fn random_feasible_profile(inst: &Instance, rng: &mut SplitMix64) -> Vec<f64> {
    let n = inst.n;
    let raw: Vec<f64> = (0..n).map(|i| inst.u[i] * rng.next_unit()).collect();
    let acc_rhs = vec![inst.acc_rhs(); n - 1];
    let smoothed = crate::acc::sweep(&raw, &acc_rhs, &acc_rhs);
    let mut t = 1.0;
    for _ in 0..200 {
        let w: Vec<f64> = smoothed.iter().map(|&v| t * v).collect();
        if objective::check_feasibility(&w, inst, 1e-10).feasible {
            return w;
        }
        t *= 0.5;
    }
    vec![0.0; n]
}
