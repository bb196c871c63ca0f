//! Linear model of the constraint set around the current profile.
//!
//! The step `δ` away from a feasible `w` keeps the box and acceleration
//! rows linear; only the jerk rows need care. With `x = w_{i-1} + w_{i+1}`
//! and `Δ = √2 h² J`, the smooth forms of the two jerk rows at `x > 0` are
//!
//! ```text
//! (18)  x - 2w_i - 2Δ/√x ≤ 0          (positive jerk)
//! (19)  2w_i - x - 2Δ/√x ≤ 0          (negative jerk)
//! ```
//!
//! Both are concave in `(w_{i-1}+w_{i+1}, w_i)`, so any linearization with
//! slope between the tangent slopes is either an inner approximation or an
//! outer one. Three interior slopes matter:
//!
//! ```text
//! η_i = (3x - 2w_i)/(4x)          secant; exact at the current point
//! θ_i = 1/2 + Δ/(2 x^{3/2})       tangent of (18); inner for (18)
//! β_i = 1/2 - Δ/(2 x^{3/2})       tangent of (19); inner for (19)
//! ```
//!
//! with `β_i ≤ η_i ≤ θ_i`, equality exactly when the corresponding row is
//! active (`θ-η = bP/(2x)`, `η-β = bN/(2x)`). `ThetaBeta` rows keep every
//! full step feasible for the original problem; `Eta` rows are sharper but
//! need a line search.
//!
//! Rows where `x ≈ 0` (the formulas blow up) or `β < 0` (the tangent
//! slope leaves the monotone range) are replaced by guard rows: slope 1/2
//! with right-hand sides built from the cap sum `u_{i-1} + u_{i+1} ≥ x`,
//! which are valid inner approximations no matter how large the step is.
//! An anchor can sit beyond a guard's reach (the raw rhs goes negative);
//! no monotone row is valid there, so the model freezes the threatened
//! directions through the step box instead. Rows whose caps vanish
//! entirely are dropped; no step can violate them.

use thiserror::Error;

use crate::instance::Instance;
use crate::objective;

#[derive(Debug, Error)]
pub enum LinearizeError {
    #[error("profile infeasible at the {family} family, index {index}, violation {violation:.3e}")]
    InfeasiblePoint { family: &'static str, index: usize, violation: f64 },
    #[error("profile has {got} entries, instance has {want}")]
    LengthMismatch { got: usize, want: usize },
}

/// Which slope the jerk rows use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// Secant slope η; sharper model, steps need a line search.
    Eta,
    /// Tangent slopes θ (positive row) and β (negative row); full steps
    /// stay feasible.
    #[default]
    ThetaBeta,
}

/// Slope and right-hand side of one linear jerk row in `δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowCoeff {
    /// Neighbor-sum slope; nonnegative.
    pub coeff: f64,
    /// Right-hand side; nonnegative.
    pub rhs: f64,
}

/// Both jerk rows at one interior grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JerkRow {
    /// `coeff·(δ_{i-1}+δ_{i+1}) - δ_i ≤ rhs` (positive jerk).
    pub par: RowCoeff,
    /// `δ_i - coeff·(δ_{i-1}+δ_{i+1}) ≤ rhs` (negative jerk).
    pub nar: RowCoeff,
    /// Conservative cap-based row instead of the point linearization.
    pub guarded: bool,
}

/// All curvature coefficients of one interior grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub eta: f64,
    pub theta: f64,
    pub beta: f64,
    /// Slack of the positive jerk row: `2Δ/√x - (x - 2w_i)`, halved.
    pub bp: f64,
    /// Slack of the negative jerk row: `2Δ/√x + (x - 2w_i)`, halved.
    pub bn: f64,
}

/// Point coefficients at interior index `i`, or `None` when
/// `w_{i-1} + w_{i+1} ≤ 0` makes them undefined. `delta = √2 h² J`.
pub fn coefficients(w: &[f64], i: usize, delta: f64) -> Option<Coefficients> {
    if i == 0 || i + 1 >= w.len() {
        return None;
    }
    let x = w[i - 1] + w[i + 1];
    if x <= 0.0 {
        return None;
    }
    let root = x.sqrt();
    let curve = delta / (2.0 * x * root);
    Some(Coefficients {
        eta: (3.0 * x - 2.0 * w[i]) / (4.0 * x),
        theta: 0.5 + curve,
        beta: 0.5 - curve,
        bp: delta / root - (x - 2.0 * w[i]) / 2.0,
        bn: delta / root + (x - 2.0 * w[i]) / 2.0,
    })
}

/// Linear constraint set for the step `δ` from a fixed feasible profile.
#[derive(Debug, Clone)]
pub struct LinearizedModel {
    pub mode: Mode,
    /// Profile the model is anchored at.
    pub w: Vec<f64>,
    pub h: f64,
    /// `√2 h² J`.
    pub delta: f64,
    /// Step lower bounds `-w`.
    pub lb: Vec<f64>,
    /// Step upper bounds `u - w`.
    pub ub: Vec<f64>,
    /// Acceleration rhs `2hA - w_{i+1} + w_i`, one per interval.
    pub b_acc: Vec<f64>,
    /// Deceleration rhs `2hA - w_i + w_{i+1}`, one per interval.
    pub b_dec: Vec<f64>,
    /// Jerk rows per grid point; `None` at the endpoints and where the
    /// caps make the constraint unreachable.
    pub rows: Vec<Option<JerkRow>>,
    /// Magnitude reference `max(1, max u)`.
    pub scale: f64,
}

/// Builds the model at `w`, which must satisfy the original constraints.
pub fn build(w: &[f64], inst: &Instance, mode: Mode) -> Result<LinearizedModel, LinearizeError> {
    let n = inst.n;
    if w.len() != n {
        return Err(LinearizeError::LengthMismatch { got: w.len(), want: n });
    }
    let report = objective::check_feasibility(w, inst, 1e-6);
    if !report.feasible {
        let (family, index, violation) = report.worst();
        return Err(LinearizeError::InfeasiblePoint { family, index, violation });
    }

    let scale = inst.scale();
    let mask_tol = 1e-12 * scale;
    let delta = std::f64::consts::SQRT_2 * inst.h * inst.h * inst.j_max;
    let acc_rhs = inst.acc_rhs();

    let mut lb: Vec<f64> = w.iter().map(|&v| -v).collect();
    let mut ub: Vec<f64> = inst.u.iter().zip(w).map(|(&c, &v)| (c - v).max(0.0)).collect();
    let mut b_acc = Vec::with_capacity(n - 1);
    let mut b_dec = Vec::with_capacity(n - 1);
    for i in 0..n - 1 {
        b_acc.push((acc_rhs - w[i + 1] + w[i]).max(0.0));
        b_dec.push((acc_rhs - w[i] + w[i + 1]).max(0.0));
    }

    let mut rows: Vec<Option<JerkRow>> = vec![None; n];
    for i in 1..n - 1 {
        let us = inst.u[i - 1] + inst.u[i + 1];
        if us <= mask_tol {
            continue;
        }
        let x = w[i - 1] + w[i + 1];
        let point = if x > mask_tol { coefficients(w, i, delta) } else { None };
        let genuine = point.and_then(|c| {
            let par_slope = match mode {
                Mode::Eta => c.eta,
                Mode::ThetaBeta => c.theta,
            };
            let nar_slope = match mode {
                Mode::Eta => c.eta,
                Mode::ThetaBeta => c.beta,
            };
            if nar_slope < 0.0 || par_slope < 0.0 {
                return None;
            }
            Some(JerkRow {
                par: RowCoeff { coeff: par_slope, rhs: c.bp.max(0.0) },
                nar: RowCoeff { coeff: nar_slope, rhs: c.bn.max(0.0) },
                guarded: false,
            })
        });
        let row = match genuine {
            Some(row) => row,
            None => {
                let reach = delta / us.sqrt();
                let par_raw = reach + w[i] - x / 2.0;
                let nar_raw = reach - w[i] + x / 2.0;
                // A negative raw rhs cannot be clamped to zero and stay an
                // inner approximation: the anchor exceeds what the cap-sum
                // reach justifies, and every nonnegative-slope row through
                // such a point admits neighbor growth that violates the
                // original constraint. Freeze the dangerous directions in
                // the box instead: the neighbor sum may only shrink, and
                // the center may only move away from the threatened side.
                if nar_raw < 0.0 {
                    ub[i] = ub[i].min(0.0);
                    ub[i - 1] = ub[i - 1].min(0.0);
                    ub[i + 1] = ub[i + 1].min(0.0);
                }
                if par_raw < 0.0 {
                    lb[i] = lb[i].max(0.0);
                    ub[i - 1] = ub[i - 1].min(0.0);
                    ub[i + 1] = ub[i + 1].min(0.0);
                }
                JerkRow {
                    par: RowCoeff { coeff: 0.5, rhs: par_raw.max(0.0) },
                    nar: RowCoeff { coeff: 0.5, rhs: nar_raw.max(0.0) },
                    guarded: true,
                }
            }
        };
        rows[i] = Some(row);
    }

    Ok(LinearizedModel {
        mode,
        w: w.to_vec(),
        h: inst.h,
        delta,
        lb,
        ub,
        b_acc,
        b_dec,
        rows,
        scale,
    })
}

impl LinearizedModel {
    pub fn n(&self) -> usize {
        self.w.len()
    }

    /// Negative-jerk rows in the layout the segment solver expects.
    pub fn nar_rows(&self) -> Vec<Option<RowCoeff>> {
        self.rows.iter().map(|r| r.map(|row| row.nar)).collect()
    }

    /// True where the point linearization is defined: interior index with
    /// `w_{i-1} + w_{i+1}` above the mask threshold.
    pub fn active_mask(&self) -> Vec<bool> {
        let n = self.n();
        let mask_tol = 1e-12 * self.scale;
        (0..n)
            .map(|i| i > 0 && i + 1 < n && self.w[i - 1] + self.w[i + 1] > mask_tol)
            .collect()
    }
}
