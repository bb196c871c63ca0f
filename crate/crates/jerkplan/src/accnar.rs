//! Alternation of the two monotone subsolvers and dual extraction.
//!
//! The inner problem behind the value function `F(y) = min{f(w+δ) :
//! δ ∈ D, δ ≤ y}` keeps only the monotone rows in `D` (acceleration and
//! negative jerk); the positive-jerk rows are maintained on the cap `y` by
//! the trust region and transfer to the solution under the neighbor-growth
//! assumption. Because the objective decreases in every coordinate, the
//! minimizer is the component-wise largest feasible step, and the largest
//! step under the union of both row families is the common fixpoint of the
//! two single-family solvers, reached by alternating them. Each solver
//! only ever lowers values, so the alternation decreases monotonically and
//! stops when one full round trip moves no coordinate by more than `eps`.
//!
//! [`extract_multipliers`] recovers the dual view at the solution: cap
//! multipliers `ν` (the negative sensitivity `-∂F/∂y`), plus row
//! multipliers, by a nonnegative least-squares fit of the stationarity
//! condition over the active columns.

use crate::acc;
use crate::linearize::{LinearizedModel, RowCoeff};
use crate::nar;
use crate::nnls;
use crate::objective;

/// Result of the alternation.
#[derive(Debug, Clone)]
pub struct AccnarSolution {
    /// Largest step under caps, acceleration and negative-jerk rows.
    pub dw: Vec<f64>,
    /// Travel time of `w + dw`.
    pub travel_time: f64,
    /// Number of (negative-jerk, acceleration) round trips.
    pub round_trips: usize,
}

/// Alternates the subsolvers from the cap `y` until a round trip changes
/// nothing beyond `eps` in the sup norm.
pub fn solve_accnar(y: &[f64], model: &LinearizedModel, eps: f64) -> AccnarSolution {
    let n = model.n();
    assert_eq!(y.len(), n, "cap/model size mismatch");

    // Rows with a vanishing coefficient are plain upper bounds; folding
    // them into the cap keeps the segment solver's pivots away from zero.
    let mut y_eff = y.to_vec();
    let mut rows: Vec<Option<RowCoeff>> = vec![None; n];
    for (i, row) in model.rows.iter().enumerate() {
        if let Some(r) = row {
            if r.nar.coeff < 1e-15 {
                y_eff[i] = y_eff[i].min(r.nar.rhs);
            } else {
                rows[i] = Some(r.nar);
            }
        }
    }

    let mut cur = acc::sweep(&y_eff, &model.b_acc, &model.b_dec);
    let mut round_trips = 0;
    loop {
        let nar_out = nar::solve_nar_bounded(&cur, &model.lb, &rows);
        let acc_out = acc::sweep(&nar_out, &model.b_acc, &model.b_dec);
        round_trips += 1;
        let gap = nar_out
            .iter()
            .zip(&acc_out)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        cur = acc_out;
        if gap <= eps || round_trips >= 10_000 {
            break;
        }
    }

    let candidate: Vec<f64> = model.w.iter().zip(&cur).map(|(w, d)| w + d).collect();
    let travel_time = objective::eval_objective(&candidate, model.h);
    AccnarSolution { dw: cur, travel_time, round_trips }
}

/// Multipliers of the inner problem at its solution.
#[derive(Debug, Clone)]
pub struct DualCertificate {
    /// Cap multipliers, `ν_i ≈ -∂F/∂y_i`; zero at inactive caps.
    pub nu: Vec<f64>,
    /// Forward acceleration row multipliers, one per interval.
    pub lambda_acc: Vec<f64>,
    /// Backward (deceleration) row multipliers, one per interval.
    pub lambda_dec: Vec<f64>,
    /// Negative-jerk row multipliers, one per grid point.
    pub lambda_nar: Vec<f64>,
    /// Sup norm of the stationarity residual over free coordinates.
    pub residual: f64,
    /// Residual too large for the fit to be trusted; `nu` falls back to
    /// clipped gradient pressure on the active caps.
    pub degenerate: bool,
}

/// Gradient of the travel time with the inverse square roots floored, so
/// coordinates sitting at zero get a large finite pull instead of `-∞`.
/// Only the dual extraction uses this; the public gradient stays exact.
fn floored_gradient(w_step: &[f64], h: f64, scale: f64) -> Vec<f64> {
    let n = w_step.len();
    let floor = 1e-9 * scale.sqrt();
    let root: Vec<f64> = w_step.iter().map(|&x| x.max(0.0).sqrt().max(floor)).collect();
    let mut g = vec![0.0; n];
    for i in 0..n {
        let mut gi = 0.0;
        if i + 1 < n {
            let s = root[i] + root[i + 1];
            gi -= h / (root[i] * s * s);
        }
        if i > 0 {
            let s = root[i - 1] + root[i];
            gi -= h / (root[i] * s * s);
        }
        g[i] = gi;
    }
    g
}

/// Fits nonnegative multipliers to `∇f + Cᵀμ = 0` over the active columns
/// at `dw`, the solution of the inner problem capped by `y`.
pub fn extract_multipliers(dw: &[f64], y: &[f64], model: &LinearizedModel) -> DualCertificate {
    let n = model.n();
    assert_eq!(dw.len(), n);
    assert_eq!(y.len(), n);
    let scale = model.scale;
    let pin_tol = 1e-12 * scale;

    let mut free = vec![usize::MAX; n];
    let mut rows = 0;
    for i in 1..n - 1 {
        if model.ub[i] + model.w[i] > pin_tol {
            free[i] = rows;
            rows += 1;
        }
    }

    let w_step: Vec<f64> = model.w.iter().zip(dw).map(|(w, d)| w + d).collect();
    let grad = floored_gradient(&w_step, model.h, scale);
    let mut rhs = vec![0.0; rows];
    for i in 0..n {
        if free[i] != usize::MAX {
            rhs[free[i]] = -grad[i];
        }
    }

    let active = |slack: f64, reference: f64| slack <= 1e-7 * (1.0 + reference.abs());
    let mut cols: Vec<nnls::SparseCol> = Vec::new();
    // Remember what each column stands for to route μ back per family.
    enum Kind {
        Cap(usize),
        Acc(usize),
        Dec(usize),
        Nar(usize),
    }
    let mut kinds: Vec<Kind> = Vec::new();
    let mut push = |entries: &[(usize, f64)], kind: Kind, kinds: &mut Vec<Kind>| {
        let mapped: Vec<(usize, f64)> = entries
            .iter()
            .filter(|(i, _)| free[*i] != usize::MAX)
            .map(|&(i, v)| (free[i], v))
            .collect();
        if !mapped.is_empty() {
            cols.push(nnls::SparseCol::new(&mapped));
            kinds.push(kind);
        }
    };

    for i in 1..n - 1 {
        if free[i] != usize::MAX && active(y[i] - dw[i], y[i]) {
            push(&[(i, 1.0)], Kind::Cap(i), &mut kinds);
        }
    }
    for i in 0..n - 1 {
        if active(model.b_acc[i] - (dw[i + 1] - dw[i]), model.b_acc[i]) {
            push(&[(i, -1.0), (i + 1, 1.0)], Kind::Acc(i), &mut kinds);
        }
        if active(model.b_dec[i] - (dw[i] - dw[i + 1]), model.b_dec[i]) {
            push(&[(i, 1.0), (i + 1, -1.0)], Kind::Dec(i), &mut kinds);
        }
    }
    for i in 1..n - 1 {
        if let Some(row) = model.rows[i] {
            let r = row.nar;
            if active(r.rhs + r.coeff * (dw[i - 1] + dw[i + 1]) - dw[i], r.rhs) {
                push(&[(i - 1, -r.coeff), (i, 1.0), (i + 1, -r.coeff)], Kind::Nar(i), &mut kinds);
            }
        }
    }

    let fit = nnls::solve(&cols, &rhs, rows);
    let residual = fit.residual.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
    let grad_scale = grad.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
    let degenerate = residual > 1e-6 * (1.0 + grad_scale);

    let mut nu = vec![0.0; n];
    let mut lambda_acc = vec![0.0; n - 1];
    let mut lambda_dec = vec![0.0; n - 1];
    let mut lambda_nar = vec![0.0; n];
    for (slot, kind) in kinds.iter().enumerate() {
        let v = fit.coeffs[slot];
        match *kind {
            Kind::Cap(i) => nu[i] = v,
            Kind::Acc(i) => lambda_acc[i] = v,
            Kind::Dec(i) => lambda_dec[i] = v,
            Kind::Nar(i) => lambda_nar[i] = v,
        }
    }
    if degenerate {
        for i in 1..n - 1 {
            nu[i] = if free[i] != usize::MAX && active(y[i] - dw[i], y[i]) {
                (-grad[i]).max(0.0)
            } else {
                0.0
            };
        }
    }

    DualCertificate { nu, lambda_acc, lambda_dec, lambda_nar, residual, degenerate }
}
