//! Minimum-time speed profiles along a fixed path under velocity,
//! acceleration and jerk constraints.
//!
//! A path of length `s_f` is discretized into `n` equally spaced samples and
//! the profile is represented by the squared speed `w_i = v(s_i)²`. The
//! travel time
//!
//! ```text
//! f(w) = Σ_{i<n-1} 2h / (√w_{i+1} + √w_i),      h = s_f / (n-1)
//! ```
//!
//! is minimized subject to box bounds `0 ≤ w ≤ u`, linear acceleration rows
//! `|w_{i+1} - w_i| ≤ 2hA` and the nonconvex jerk rows
//! `|w_{i-1} - 2w_i + w_{i+1}| √((w_{i-1}+w_{i+1})/2) ≤ 2h²J`.
//!
//! The solver is a sequential convex algorithm. Around the current iterate
//! the jerk rows are replaced by linear rows ([`linearize`]); the convex
//! surrogate restricted to `x ≤ y` has a component-wise maximal point that
//! two monotone subsolvers compute exactly ([`acc`], [`nar`], alternated in
//! [`accnar`]); a trust-region outer loop moves the cap `y` along an ascent
//! direction built from upper-bound multipliers ([`descent`], [`lp`]); the
//! outer loop in [`sca`] repeats until a step-size or stationarity test
//! passes ([`objective::kkt_residual`]).
//!
//! | module      | contents                                              |
//! |-------------|-------------------------------------------------------|
//! | [`instance`]| problem data, upper-bound construction, generators    |
//! | [`objective`]| travel time, gradient, feasibility, KKT residual     |
//! | [`linearize`]| per-iterate linear model of the jerk rows            |
//! | [`tridiag`] | Thomas solves and reusable factorizations             |
//! | [`acc`]     | double-sweep solver for the acceleration rows         |
//! | [`nar`]     | segment solver for the negative-jerk rows             |
//! | [`accnar`]  | alternation of the two and multiplier extraction      |
//! | [`lp`]      | bounded-variable simplex for the direction problem    |
//! | [`descent`] | trust-region cap update and repair heuristic          |
//! | [`sca`]     | outer loop, line search, solve reports                |
//! | [`nnls`]    | nonnegative least squares for dual extraction         |
//! | [`oracle`]  | slow reference solvers used by the test suites        |
//! | [`prng`]    | small deterministic generator for seeded instances    |

pub mod acc;
pub mod accnar;
pub mod descent;
pub mod instance;
pub mod linearize;
pub mod lp;
pub mod nar;
pub mod nnls;
pub mod objective;
pub mod oracle;
pub mod prng;
pub mod sca;
pub mod tridiag;

pub use instance::Instance;
pub use linearize::{LinearizedModel, Mode};
pub use sca::{solve, SolveConfig, SolveReport};
