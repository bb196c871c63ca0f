//! Outer descent step on the linearized model.
//!
//! The inner solvers expose the restriction value
//! `F(y) = min{f(w+δ) : δ ∈ D, δ ≤ y}` as a cheap function of the cap
//! `y`, with negated sensitivities `ν ≈ -∂F/∂y` coming out of the dual
//! extraction. One outer step therefore reduces to improving `F` over the
//! caps that keep the positive-jerk rows satisfied, which is a linear
//! side condition in `y`. A trust region handles the nonlinearity of `F`:
//! propose a cap move `d` maximizing `νᵀd` inside the rows and a box of
//! radius `σ`, accept on strict decrease of `F` and grow `σ`, otherwise
//! shrink, until `σ` falls below `eps1`.
//!
//! The move itself comes from either the direction LP or a repair
//! heuristic that starts from the utopia corner of the box and walks
//! violated rows back to feasibility, spending a one-dimensional line
//! search per repair on how to split the correction between the two
//! neighbors.

use crate::accnar::{self, DualCertificate};
use crate::linearize::LinearizedModel;
use crate::lp;

/// How trust-region directions are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Direction {
    /// Row-repair heuristic with the LP as fallback.
    #[default]
    Heuristic,
    /// Direction LP on every iteration.
    Lp,
}

/// Trust-region controls for one outer step.
#[derive(Debug, Clone, Copy)]
pub struct TrustParams {
    /// Initial radius.
    pub sigma0: f64,
    /// Radius below which the step gives up.
    pub eps1: f64,
    /// Growth factor after an accepted candidate.
    pub rho: f64,
    /// Shrink factor after a rejected candidate.
    pub tau: f64,
    /// Hard cap on trust-region iterations.
    pub max_iters: usize,
    /// Alternation tolerance for the inner subsolver.
    pub inner_eps: f64,
}

/// Outcome of one outer step.
#[derive(Debug, Clone)]
pub struct UpdateInfo {
    /// Accepted step, zero when no candidate improved.
    pub dw: Vec<f64>,
    /// `f(w + dw)`, the restriction value at the accepted cap.
    pub travel_time: f64,
    /// Trust-region iterations spent.
    pub trust_iters: usize,
    /// Candidates accepted.
    pub accepted: usize,
    /// Direction LP solves, including heuristic fallbacks.
    pub lp_calls: usize,
    /// Heuristic attempts that gave up and fell back to the LP.
    pub fallbacks: usize,
    /// Re-solves forced by the neighbor-growth condition.
    pub restricted: usize,
    /// Candidates rejected for breaking a positive-jerk row.
    pub par_rejects: usize,
}

fn inner_eps(model: &LinearizedModel) -> f64 {
    1e-12 * (1.0 + model.scale)
}

/// Restriction value `F(y)`: travel time of the largest step under the
/// cap `y` and the monotone rows.
pub fn eval_f_value(y: &[f64], model: &LinearizedModel) -> f64 {
    accnar::solve_accnar(y, model, inner_eps(model)).travel_time
}

/// Positive-jerk rows as `(index, coeff, slack)` triples at the cap `y`.
fn par_rows_at(model: &LinearizedModel, y: &[f64]) -> Vec<(usize, f64, f64)> {
    let mut rows = Vec::new();
    for (i, row) in model.rows.iter().enumerate() {
        if let Some(r) = row {
            let phi = (r.par.rhs + y[i] - r.par.coeff * (y[i - 1] + y[i + 1])).max(0.0);
            rows.push((i, r.par.coeff, phi));
        }
    }
    rows
}

/// Checks the positive-jerk rows directly at a step.
fn par_rows_hold(model: &LinearizedModel, dw: &[f64]) -> bool {
    model.rows.iter().enumerate().all(|(i, row)| match row {
        Some(r) => {
            r.par.coeff * (dw[i - 1] + dw[i + 1]) - dw[i] <= r.par.rhs + 1e-9 * (1.0 + r.par.rhs)
        }
        None => true,
    })
}

/// Indices of genuine rows whose neighbor-growth condition
/// `δ_{i-1} + δ_{i+1} ≤ 2(w_{i-1} + w_{i+1})` fails at `dw`.
fn growth_violations(model: &LinearizedModel, dw: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    for (i, row) in model.rows.iter().enumerate() {
        if let Some(r) = row {
            if !r.guarded {
                let x = model.w[i - 1] + model.w[i + 1];
                if dw[i - 1] + dw[i + 1] > 2.0 * x + 1e-9 * (1.0 + x) {
                    out.push(i);
                }
            }
        }
    }
    out
}

fn multipliers_or_surrogate(
    dw: &[f64],
    y: &[f64],
    model: &LinearizedModel,
    value: f64,
) -> Vec<f64> {
    if value.is_finite() {
        let DualCertificate { nu, .. } = accnar::extract_multipliers(dw, y, model);
        nu
    } else {
        // At an infinite restriction value there is no gradient to fit;
        // uniform weights still point the first move at the caps.
        let mut nu = vec![1.0; model.n()];
        nu[0] = 0.0;
        nu[model.n() - 1] = 0.0;
        nu
    }
}

/// One outer step: runs the trust region from `y = 0` and returns the
/// best accepted step together with its restriction value.
pub fn compute_update(
    model: &LinearizedModel,
    direction: Direction,
    params: &TrustParams,
) -> UpdateInfo {
    let n = model.n();
    let eps = params.inner_eps.min(inner_eps(model));

    let mut y = vec![0.0; n];
    let mut dw_best = vec![0.0; n];
    let start = accnar::solve_accnar(&y, model, eps);
    let mut f_best = start.travel_time;
    let mut nu = multipliers_or_surrogate(&start.dw, &y, model, f_best);

    let mut sigma = params.sigma0;
    let mut info = UpdateInfo {
        dw: Vec::new(),
        travel_time: f_best,
        trust_iters: 0,
        accepted: 0,
        lp_calls: 0,
        fallbacks: 0,
        restricted: 0,
        par_rejects: 0,
    };

    while sigma >= params.eps1 && info.trust_iters < params.max_iters {
        info.trust_iters += 1;
        let rows = par_rows_at(model, &y);
        let mut lbar = vec![0.0; n];
        let mut ubar = vec![0.0; n];
        for j in 0..n {
            lbar[j] = (model.lb[j] - y[j]).max(-sigma).min(0.0);
            ubar[j] = (model.ub[j] - y[j]).min(sigma).max(0.0);
        }

        let mut fallback = false;
        let d = match direction {
            Direction::Heuristic => match heuristic_direction(&nu, &rows, &lbar, &ubar) {
                Some(d) => Some(d),
                None => {
                    fallback = true;
                    None
                }
            },
            Direction::Lp => None,
        };
        let d = match d {
            Some(d) => d,
            None => {
                info.lp_calls += 1;
                if fallback {
                    info.fallbacks += 1;
                }
                match lp::solve_lp(&nu, &rows, &lbar, &ubar) {
                    Ok(sol) => sol.d,
                    Err(_) => {
                        sigma *= params.tau;
                        continue;
                    }
                }
            }
        };

        let moved = d.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
        if moved <= 1e-15 * (1.0 + model.scale) {
            sigma *= params.tau;
            continue;
        }

        let mut y_cand: Vec<f64> = (0..n)
            .map(|j| (y[j] + d[j]).clamp(model.lb[j], model.ub[j]))
            .collect();
        let mut sol = accnar::solve_accnar(&y_cand, model, eps);

        let violated = growth_violations(model, &sol.dw);
        if !violated.is_empty() {
            // Tighten the caps next to each violated row so the solved
            // step satisfies the growth condition, then solve once more.
            // Sums only shrink, so no new violations appear.
            info.restricted += 1;
            for &j in &violated {
                let half = 0.5 * (model.w[j - 1] + model.w[j + 1]);
                for i in [j - 1, j + 1] {
                    y_cand[i] = y_cand[i].min((model.w[i] + half).max(0.0));
                }
            }
            sol = accnar::solve_accnar(&y_cand, model, eps);
        }

        if sol.travel_time < f_best {
            if par_rows_hold(model, &sol.dw) {
                y = y_cand;
                f_best = sol.travel_time;
                dw_best = sol.dw.clone();
                nu = multipliers_or_surrogate(&sol.dw, &y, model, f_best);
                info.accepted += 1;
                sigma *= params.rho;
            } else {
                info.par_rejects += 1;
                sigma *= params.tau;
            }
        } else {
            sigma *= params.tau;
        }
    }

    info.dw = dw_best;
    info.travel_time = f_best;
    info
}

/// Repair heuristic for the direction problem.
///
/// Starts at the box corner `d = ū` and repeatedly repairs the most
/// violated row by lowering its two neighbors, splitting the correction
/// by a line-searched ratio `α`. Each neighbor drop can tip the row
/// centered there, so repairs chain outward, each one computing the
/// exact value that restores its row until the chain meets a coordinate
/// that needs no change. Rows that cannot be repaired feasibly are
/// banned; any still-violated row after the loop means failure and the
/// caller falls back to the LP.
fn heuristic_direction(
    nu: &[f64],
    rows: &[(usize, f64, f64)],
    lbar: &[f64],
    ubar: &[f64],
) -> Option<Vec<f64>> {
    let n = nu.len();
    let mut row_at: Vec<Option<(f64, f64)>> = vec![None; n];
    for &(i, coeff, phi) in rows {
        row_at[i] = Some((coeff, phi));
    }

    let mut d = ubar.to_vec();
    let mut banned = vec![false; n];
    let viol_of = |d: &[f64], i: usize| -> Option<f64> {
        let (coeff, phi) = row_at[i]?;
        let v = coeff * (d[i - 1] + d[i + 1]) - d[i] - phi;
        (v > 1e-10 * (1.0 + phi.abs())).then_some(v)
    };

    let budget = 20 * n;
    for _ in 0..budget {
        let mut pick: Option<(usize, f64)> = None;
        for i in 1..n.saturating_sub(1) {
            if banned[i] {
                continue;
            }
            if let Some(v) = viol_of(&d, i) {
                if pick.is_none_or(|(_, pv)| v > pv) {
                    pick = Some((i, v));
                }
            }
        }
        let Some((p, viol)) = pick else {
            break;
        };
        let (coeff_p, _) = row_at[p].unwrap();
        let drop_total = viol / coeff_p;

        match repair_move(p, drop_total, &d, &row_at, lbar, nu) {
            Some(changes) => {
                for &(j, v) in &changes {
                    d[j] = v;
                }
            }
            None => banned[p] = true,
        }
    }

    for i in 1..n.saturating_sub(1) {
        if viol_of(&d, i).is_some() {
            return None;
        }
    }
    let gain: f64 = nu.iter().zip(&d).map(|(a, b)| a * b).sum();
    (gain > 0.0).then_some(d)
}

/// Finds the best split `α` of a repair at row `p` and returns the
/// resulting coordinate changes, or `None` when every split runs into
/// the lower box bound.
fn repair_move(
    p: usize,
    drop_total: f64,
    d: &[f64],
    row_at: &[Option<(f64, f64)>],
    lbar: &[f64],
    nu: &[f64],
) -> Option<Vec<(usize, f64)>> {
    let n = d.len();
    // Walks the repair chain for a fixed split and prices it; `None`
    // marks an infeasible split.
    let eval = |alpha: f64| -> Option<(f64, Vec<(usize, f64)>)> {
        let mut changes: Vec<(usize, f64)> = Vec::new();
        let mut penalty = 0.0;
        let set = |j: usize,
                   v: f64,
                   changes: &mut Vec<(usize, f64)>,
                   penalty: &mut f64|
         -> bool {
            if v < lbar[j] {
                return false;
            }
            *penalty += nu[j] * (d[j] - v);
            changes.push((j, v));
            true
        };

        let left_start = d[p - 1] - alpha * drop_total;
        if alpha > 0.0 && !set(p - 1, left_start, &mut changes, &mut penalty) {
            return None;
        }
        let right_start = d[p + 1] - (1.0 - alpha) * drop_total;
        if alpha < 1.0 && !set(p + 1, right_start, &mut changes, &mut penalty) {
            return None;
        }

        let at = |j: usize, changes: &[(usize, f64)]| -> f64 {
            changes
                .iter()
                .rev()
                .find(|(k, _)| *k == j)
                .map_or(d[j], |&(_, v)| v)
        };

        if alpha > 0.0 {
            let mut j = p.checked_sub(2);
            while let Some(jj) = j {
                let Some((c, phi)) = row_at[jj + 1] else { break };
                let need = (phi + at(jj + 1, &changes)) / c - at(jj + 2, &changes);
                if need >= d[jj] {
                    break;
                }
                if !set(jj, need, &mut changes, &mut penalty) {
                    return None;
                }
                j = jj.checked_sub(1);
            }
        }
        if alpha < 1.0 {
            let mut j = p + 2;
            while j < n {
                let Some((c, phi)) = row_at[j - 1] else { break };
                let need = (phi + at(j - 1, &changes)) / c - at(j - 2, &changes);
                if need >= d[j] {
                    break;
                }
                if !set(j, need, &mut changes, &mut penalty) {
                    return None;
                }
                j += 1;
            }
        }
        Some((penalty, changes))
    };

    // Coarse presample, then a ternary refinement around the best cell.
    let mut best: Option<(f64, f64)> = None;
    for k in 0..=8 {
        let alpha = k as f64 / 8.0;
        if let Some((pen, _)) = eval(alpha) {
            if best.is_none_or(|(_, bp)| pen < bp) {
                best = Some((alpha, pen));
            }
        }
    }
    let (alpha0, _) = best?;
    let mut lo = (alpha0 - 0.125).max(0.0);
    let mut hi = (alpha0 + 0.125).min(1.0);
    for _ in 0..60 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        let g1 = eval(m1).map_or(f64::INFINITY, |(p, _)| p);
        let g2 = eval(m2).map_or(f64::INFINITY, |(p, _)| p);
        if g1 <= g2 {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let refined = 0.5 * (lo + hi);
    let mut candidates = vec![alpha0, refined];
    candidates.dedup();
    let mut out: Option<(f64, Vec<(usize, f64)>)> = None;
    for alpha in candidates {
        if let Some((pen, changes)) = eval(alpha) {
            if out.as_ref().is_none_or(|(bp, _)| pen < *bp) {
                out = Some((pen, changes));
            }
        }
    }
    out.map(|(_, changes)| changes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Instance;
    use crate::linearize::{self, Mode};
    use crate::objective;
    use crate::oracle;
    use crate::prng::SplitMix64;

    fn params() -> TrustParams {
        TrustParams {
            sigma0: 1.0,
            eps1: 1e-6,
            rho: 4.0,
            tau: 0.25,
            max_iters: 500,
            inner_eps: 1e-8,
        }
    }

    #[test]
    fn value_at_zero_cap_is_current_time() {
        let inst = Instance::new(5.0, vec![0.0, 25.0, 40.0, 25.0, 10.0, 0.0], 2.0, 1.0).unwrap();
        let mut rng = SplitMix64::new(7);
        for _ in 0..10 {
            let w = oracle::random_feasible_profile(&inst, &mut rng);
            let model = linearize::build(&w, &inst, Mode::ThetaBeta).unwrap();
            let want = objective::eval_objective(&w, inst.h);
            let got = eval_f_value(&vec![0.0; inst.n], &model);
            assert!((got - want).abs() <= 1e-9 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn value_function_is_monotone_in_the_cap() {
        let inst = Instance::new(6.0, vec![0.0, 30.0, 55.0, 55.0, 30.0, 12.0, 0.0], 2.5, 1.5)
            .unwrap();
        let mut rng = SplitMix64::new(99);
        let w = oracle::random_feasible_profile(&inst, &mut rng);
        let model = linearize::build(&w, &inst, Mode::ThetaBeta).unwrap();
        let mut y: Vec<f64> = model.ub.iter().map(|&u| 0.3 * u).collect();
        let mut prev = eval_f_value(&y, &model);
        for _ in 0..4 {
            for (yy, &u) in y.iter_mut().zip(&model.ub) {
                *yy = (*yy + 0.2 * u).min(u);
            }
            let cur = eval_f_value(&y, &model);
            assert!(cur <= prev + 1e-10 * (1.0 + prev.abs()));
            prev = cur;
        }
    }

    #[test]
    fn heuristic_stays_feasible_and_never_beats_the_lp() {
        let mut rng = SplitMix64::new(0xD15C);
        for case in 0..30 {
            let n = 5 + rng.next_below(6) as usize;
            let mut nu = vec![0.0; n];
            let mut lbar = vec![0.0; n];
            let mut ubar = vec![0.0; n];
            for j in 1..n - 1 {
                nu[j] = rng.next_unit();
                lbar[j] = -rng.next_unit();
                ubar[j] = rng.next_unit();
            }
            let mut rows = Vec::new();
            for i in 1..n - 1 {
                if rng.next_below(3) > 0 {
                    rows.push((i, 0.5 + 0.1 * rng.next_unit(), 0.3 * rng.next_unit()));
                }
            }
            let Some(d) = heuristic_direction(&nu, &rows, &lbar, &ubar) else {
                continue;
            };
            for &(i, c, phi) in &rows {
                let lhs = c * (d[i - 1] + d[i + 1]) - d[i];
                assert!(lhs <= phi + 1e-8, "case {case}: row {i}");
            }
            for j in 0..n {
                assert!(d[j] >= lbar[j] - 1e-12 && d[j] <= ubar[j] + 1e-12, "case {case}");
            }
            let gain: f64 = nu.iter().zip(&d).map(|(a, b)| a * b).sum();
            let lp = crate::lp::solve_lp(&nu, &rows, &lbar, &ubar).unwrap();
            assert!(gain <= -lp.objective + 1e-8, "case {case}: heuristic beat the LP");
        }
    }

    #[test]
    fn update_decreases_travel_time_from_feasible_point() {
        let inst = Instance::new(8.0, vec![0.0, 30.0, 60.0, 80.0, 80.0, 60.0, 30.0, 15.0, 0.0],
            3.0, 2.0)
            .unwrap();
        let mut rng = SplitMix64::new(0xFEED);
        for direction in [Direction::Heuristic, Direction::Lp] {
            let w = oracle::random_feasible_profile(&inst, &mut rng);
            let model = linearize::build(&w, &inst, Mode::ThetaBeta).unwrap();
            let before = objective::eval_objective(&w, inst.h);
            let info = compute_update(&model, direction, &params());
            if info.accepted == 0 {
                continue;
            }
            assert!(info.travel_time < before);
            let stepped: Vec<f64> = w.iter().zip(&info.dw).map(|(a, b)| a + b).collect();
            let direct = objective::eval_objective(&stepped, inst.h);
            assert!((direct - info.travel_time).abs() <= 1e-9 * (1.0 + direct.abs()));
            assert!(par_rows_hold(&model, &info.dw));
            assert!(growth_violations(&model, &info.dw).is_empty());
        }
    }

    #[test]
    fn update_from_standstill_reaches_a_finite_time() {
        let inst = Instance::new(6.0, vec![0.0, 20.0, 45.0, 45.0, 20.0, 10.0, 0.0], 2.0, 1.0)
            .unwrap();
        let w = vec![0.0; 7];
        let model = linearize::build(&w, &inst, Mode::ThetaBeta).unwrap();
        let info = compute_update(&model, Direction::Heuristic, &params());
        assert!(info.travel_time.is_finite());
        assert!(info.accepted > 0);
        for (j, &d) in info.dw.iter().enumerate() {
            assert!(d >= -1e-12 && d <= model.ub[j] + 1e-12);
        }
    }
}
