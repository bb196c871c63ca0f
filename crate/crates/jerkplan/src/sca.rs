//! Outer sequential convex loop.
//!
//! Starting from standstill, each iteration linearizes the jerk rows at
//! the current profile, takes one trust-region descent step on the
//! restriction value, and moves to the stepped profile. With the default
//! concave linearization every model is an inner approximation of the
//! true feasible set, so full steps stay feasible and the travel time
//! trail is non-increasing; a feasibility check plus a backtracking line
//! search stand behind that claim as a safety net and count how often
//! they were needed. The loop stops when the step stalls or a fitted
//! KKT residual certifies the point, whichever comes first. A stall
//! that falls short of the certificate is retried a few times with the
//! trust radius floor dropped to machine level, because rows that are
//! only nearly active close asymptotically and the profitable steps
//! near such a point sit far below any practical floor.

use std::time::Instant;

use thiserror::Error;

use crate::descent::{self, Direction, TrustParams};
use crate::instance::Instance;
use crate::linearize::{self, LinearizeError, Mode};
use crate::objective;

/// Why the loop could not run.
#[derive(Debug, Error)]
pub enum ScaError {
    /// An iterate failed the feasibility gate of the linearization,
    /// which indicates a broken invariant rather than a bad instance.
    #[error(transparent)]
    Linearize(#[from] LinearizeError),
}

/// How a solve ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Step stalled and the KKT residual met the target.
    KktCertified,
    /// Step stalled below tolerance but the certificate fell short.
    SmallStep,
    /// Outer iteration budget exhausted.
    IterationBudget,
    /// No finite travel time was ever reached; the caps admit no motion.
    Degenerate,
}

/// Solver controls. `Default` matches the reference setup.
#[derive(Debug, Clone, Copy)]
pub struct SolveConfig {
    /// Linearization of the jerk rows.
    pub mode: Mode,
    /// Trust-region direction engine.
    pub direction: Direction,
    /// Upper bound on the inner alternation gap.
    pub eps: f64,
    /// Trust-region radius floor.
    pub eps1: f64,
    /// Trust-region growth factor.
    pub rho: f64,
    /// Trust-region shrink factor.
    pub tau: f64,
    /// Outer iteration budget.
    pub max_outer: usize,
    /// Step stall tolerance, relative to the largest cap.
    pub step_tol_rel: f64,
    /// KKT residual target for certification.
    pub kkt_target: f64,
    /// Trust-region iteration cap while steps are still large, trading
    /// subproblem accuracy for outer progress early on.
    pub inexact_early: Option<usize>,
    /// Keep every iterate in the report.
    pub record_iterates: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            mode: Mode::ThetaBeta,
            direction: Direction::Heuristic,
            eps: 1e-8,
            eps1: 1e-6,
            rho: 4.0,
            tau: 0.25,
            max_outer: 500,
            step_tol_rel: 1e-8,
            kkt_target: 1e-4,
            inexact_early: None,
            record_iterates: false,
        }
    }
}

const TRUST_ITER_CAP: usize = 500;
const POLISH_BUDGET: usize = 4;

/// Result of a solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    /// Final squared-speed profile.
    pub profile: Vec<f64>,
    /// Travel time after each outer iteration, starting with the value
    /// at standstill (infinite).
    pub objective: Vec<f64>,
    /// Final travel time.
    pub travel_time: f64,
    /// KKT residual at the final profile.
    pub kkt_residual: f64,
    /// Outer iterations performed.
    pub iterations: usize,
    /// Steps that needed the line-search safety net.
    pub backtracks: usize,
    /// Inner re-solves forced by the neighbor-growth condition.
    pub growth_restrictions: usize,
    /// Why the loop stopped.
    pub reason: StopReason,
    /// Wall-clock seconds spent in `solve`.
    pub solve_seconds: f64,
    /// Iterates, present when requested.
    pub iterates: Option<Vec<Vec<f64>>>,
}

/// Runs the sequential convex loop on an instance.
pub fn solve(inst: &Instance, cfg: &SolveConfig) -> Result<SolveReport, ScaError> {
    let started = Instant::now();
    let n = inst.n;
    let stop_tol = cfg.step_tol_rel * inst.scale();

    let mut w = vec![0.0; n];
    let mut trail = vec![f64::INFINITY];
    let mut iterates = cfg.record_iterates.then(|| vec![w.clone()]);
    let mut backtracks = 0usize;
    let mut growth_restrictions = 0usize;
    let mut sigma0 = 1.0_f64;
    let mut kkt = f64::INFINITY;
    let mut reason = StopReason::IterationBudget;
    let mut iterations = 0usize;
    let mut polish = false;
    let mut polish_rounds = 0usize;

    for _ in 0..cfg.max_outer {
        iterations += 1;
        let model = linearize::build(&w, inst, cfg.mode)?;
        let near_stall = sigma0 <= 100.0 * stop_tol;
        let trust_cap = match cfg.inexact_early {
            Some(k) if !near_stall && !polish => k.min(TRUST_ITER_CAP),
            _ => TRUST_ITER_CAP,
        };
        let params = TrustParams {
            sigma0: if polish { sigma0.max(100.0 * stop_tol) } else { sigma0 },
            eps1: if polish { (1e-14 * inst.scale()).min(cfg.eps1) } else { cfg.eps1 },
            rho: cfg.rho,
            tau: cfg.tau,
            max_iters: trust_cap,
            inner_eps: if polish { (1e-12 * inst.scale()).min(cfg.eps) } else { cfg.eps },
        };
        let info = descent::compute_update(&model, cfg.direction, &params);
        growth_restrictions += info.restricted;

        let last = *trail.last().expect("trail is never empty");
        let mut next = w.clone();
        let mut f_next = last;
        let candidate: Vec<f64> = w.iter().zip(&info.dw).map(|(a, b)| (a + b).max(0.0)).collect();
        let feas_tol = match cfg.mode {
            Mode::ThetaBeta => 1e-8,
            Mode::Eta => 1e-10,
        };
        let full_ok = match cfg.mode {
            Mode::ThetaBeta => {
                objective::check_feasibility(&candidate, inst, feas_tol).feasible
                    && info.travel_time <= last
            }
            // The outer linearization gives no feasibility guarantee, so
            // every step walks the line search, full step first.
            Mode::Eta => false,
        };
        if full_ok {
            next = candidate;
            f_next = info.travel_time;
        } else {
            let searched = line_search(&w, &info.dw, inst, last, feas_tol);
            match searched {
                Some((alpha, cand, f_cand)) => {
                    if alpha < 1.0 {
                        backtracks += 1;
                    }
                    next = cand;
                    f_next = f_cand;
                }
                None => {
                    if cfg.mode == Mode::ThetaBeta {
                        backtracks += 1;
                    }
                }
            }
        }

        let step = w
            .iter()
            .zip(&next)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        w = next;
        trail.push(f_next);
        if let Some(trace) = iterates.as_mut() {
            trace.push(w.clone());
        }
        sigma0 = step.max(1e-9);

        if step <= stop_tol {
            if !trail.last().is_some_and(|f| f.is_finite()) {
                reason = StopReason::Degenerate;
                break;
            }
            kkt = objective::kkt_residual(&w, inst);
            if kkt <= cfg.kkt_target {
                reason = StopReason::KktCertified;
                break;
            }
            if polish_rounds < POLISH_BUDGET {
                polish_rounds += 1;
                polish = true;
                continue;
            }
            reason = StopReason::SmallStep;
            break;
        }
        if step <= 100.0 * stop_tol {
            kkt = objective::kkt_residual(&w, inst);
            if kkt <= cfg.kkt_target {
                reason = StopReason::KktCertified;
                break;
            }
        }
    }

    let travel_time = *trail.last().expect("trail is never empty");
    if !travel_time.is_finite() {
        reason = StopReason::Degenerate;
        kkt = f64::INFINITY;
    } else if kkt.is_infinite() {
        kkt = objective::kkt_residual(&w, inst);
        if reason == StopReason::IterationBudget && kkt <= cfg.kkt_target {
            reason = StopReason::KktCertified;
        }
    }

    Ok(SolveReport {
        profile: w,
        objective: trail,
        travel_time,
        kkt_residual: kkt,
        iterations,
        backtracks,
        growth_restrictions,
        reason,
        solve_seconds: started.elapsed().as_secs_f64(),
        iterates,
    })
}

/// Walks `α ∈ {1, 1/2, …, 2⁻³⁰}` and returns the first scaled step that
/// is feasible and does not increase the travel time.
fn line_search(
    w: &[f64],
    dw: &[f64],
    inst: &Instance,
    f_current: f64,
    feas_tol: f64,
) -> Option<(f64, Vec<f64>, f64)> {
    let mut alpha = 1.0_f64;
    for _ in 0..=30 {
        let cand: Vec<f64> = w
            .iter()
            .zip(dw)
            .map(|(a, b)| (a + alpha * b).max(0.0))
            .collect();
        if objective::check_feasibility(&cand, inst, feas_tol).feasible {
            let f_cand = objective::eval_objective(&cand, inst.h);
            if f_cand <= f_current {
                return Some((alpha, cand, f_cand));
            }
        }
        alpha *= 0.5;
    }
    None
}
