//! Randomized invariants over the solver stack.
//!
//! Each property pins one structural claim to a generator broad enough to
//! hit degenerate corners (zero caps, masked rows, tiny grids) and lets
//! proptest shrink any counterexample to a small reproduction.

use proptest::prelude::*;

use jerkplan::accnar;
use jerkplan::descent::{self, Direction, TrustParams};
use jerkplan::instance::{self, ConfigCaps, Instance, PathSpec};
use jerkplan::linearize::{self, Mode, RowCoeff};
use jerkplan::objective;
use jerkplan::oracle::{self, MonotoneRow};
use jerkplan::prng::SplitMix64;
use jerkplan::sca::{self, SolveConfig};
use jerkplan::tridiag;
use jerkplan::{acc, nar};

fn cap_element(allow_zero: bool) -> BoxedStrategy<f64> {
    if allow_zero {
        prop_oneof![9 => 0.5f64..60.0, 1 => Just(0.0)].boxed()
    } else {
        (0.5f64..60.0).boxed()
    }
}

fn instances(allow_zero: bool) -> impl Strategy<Value = Instance> {
    (4usize..24, 3.0f64..20.0, 0.5f64..3.0, 0.05f64..1.5).prop_flat_map(
        move |(n, s_f, a_max, j_max)| {
            proptest::collection::vec(cap_element(allow_zero), n).prop_map(move |u| {
                Instance::new(s_f, u, a_max, j_max).expect("generated parameters are valid")
            })
        },
    )
}

fn positive_profiles() -> impl Strategy<Value = (Vec<f64>, f64)> {
    (3usize..20).prop_flat_map(|n| {
        (proptest::collection::vec(1.0f64..100.0, n), 0.05f64..2.0)
    })
}

/// Raw acceleration system: caps plus forward/backward budgets.
fn acc_systems() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (2usize..30).prop_flat_map(|n| {
        (
            proptest::collection::vec(0.0f64..50.0, n),
            proptest::collection::vec(0.01f64..5.0, n - 1),
            proptest::collection::vec(0.01f64..5.0, n - 1),
        )
    })
}

/// Raw negative-jerk system over interior points, `None` rows included.
fn nar_systems() -> impl Strategy<Value = (Vec<f64>, Vec<Option<RowCoeff>>)> {
    (3usize..26).prop_flat_map(|n| {
        let rows = proptest::collection::vec(
            prop_oneof![
                1 => Just(None),
                4 => (0.0f64..0.5, 0.0f64..4.0)
                    .prop_map(|(coeff, rhs)| Some(RowCoeff { coeff, rhs })),
            ],
            n - 2,
        )
        .prop_map(move |interior| {
            let mut rows = vec![None];
            rows.extend(interior);
            rows.push(None);
            rows
        });
        (proptest::collection::vec(0.0f64..50.0, n), rows)
    })
}

fn acc_rows_for_oracle(b_acc: &[f64], b_dec: &[f64]) -> Vec<MonotoneRow> {
    let mut rows = Vec::new();
    for (i, (&fwd, &bwd)) in b_acc.iter().zip(b_dec).enumerate() {
        rows.push(MonotoneRow { at: i + 1, coeff_prev: 1.0, coeff_next: 0.0, rhs: fwd });
        rows.push(MonotoneRow { at: i, coeff_prev: 0.0, coeff_next: 1.0, rhs: bwd });
    }
    rows
}

fn nar_rows_for_oracle(rows: &[Option<RowCoeff>]) -> Vec<MonotoneRow> {
    rows.iter()
        .enumerate()
        .filter_map(|(i, row)| {
            row.map(|r| MonotoneRow {
                at: i,
                coeff_prev: r.coeff,
                coeff_next: r.coeff,
                rhs: r.rhs,
            })
        })
        .collect()
}

fn max_abs_gap(got: &[f64], want: &[f64]) -> f64 {
    got.iter().zip(want).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
}

proptest! {
    /// Scaling the whole profile by `t` scales the travel time by `1/√t`.
    #[test]
    fn objective_scales_with_inverse_root((mut w, h) in positive_profiles(), t in 0.5f64..16.0) {
        let n = w.len();
        w[0] = 0.0;
        w[n - 1] = 0.0;
        let base = objective::eval_objective(&w, h);
        let scaled: Vec<f64> = w.iter().map(|&v| t * v).collect();
        let got = objective::eval_objective(&scaled, h);
        let want = base / t.sqrt();
        prop_assert!(
            (got - want).abs() <= 1e-12 * want,
            "f(t·w) = {got}, f(w)/√t = {want}"
        );
    }

    /// Raising any single interior sample strictly lowers the travel time.
    #[test]
    fn objective_drops_when_any_sample_rises(
        (mut w, h) in positive_profiles(),
        pick in any::<prop::sample::Index>(),
        bump in 0.1f64..10.0,
    ) {
        let n = w.len();
        w[0] = 0.0;
        w[n - 1] = 0.0;
        let i = 1 + pick.index(n - 2);
        let before = objective::eval_objective(&w, h);
        w[i] += bump;
        let after = objective::eval_objective(&w, h);
        prop_assert!(after < before, "raising w[{i}] moved f from {before} to {after}");
    }

    /// Analytic gradient agrees with central finite differences away from
    /// zeros.
    #[test]
    fn gradient_matches_finite_differences((w, h) in positive_profiles()) {
        let n = w.len();
        let grad = objective::gradient(&w, h).expect("interior is strictly positive");
        for i in 1..n - 1 {
            let e = 1e-5 * w[i].max(1.0);
            let mut hi = w.clone();
            let mut lo = w.clone();
            hi[i] += e;
            lo[i] -= e;
            let fd = (objective::eval_objective(&hi, h) - objective::eval_objective(&lo, h))
                / (2.0 * e);
            prop_assert!(
                (grad[i] - fd).abs() <= 1e-6 * fd.abs().max(1e-12),
                "grad[{i}] = {:.17e}, fd = {:.17e}",
                grad[i],
                fd
            );
            prop_assert!(grad[i] < 0.0, "gradient must be strictly negative, got {}", grad[i]);
        }
    }

    /// The sweep solver returns the fixpoint oracle's component-wise
    /// maximum, never exceeds the caps, and leaves every row slack.
    #[test]
    fn solve_acc_matches_fixpoint((y, b_acc, b_dec) in acc_systems()) {
        let got = acc::solve_acc(&y, &b_acc, &b_dec).expect("budgets are positive");
        let want = oracle::fixpoint_max(&y, &acc_rows_for_oracle(&b_acc, &b_dec));
        let scale = y.iter().fold(1.0_f64, |m, &v| m.max(v));
        prop_assert!(max_abs_gap(&got, &want) <= 1e-12 * scale);
        for i in 0..y.len() {
            prop_assert!(got[i] <= y[i] + 1e-12 * scale);
            if i + 1 < y.len() {
                prop_assert!(got[i + 1] - got[i] <= b_acc[i] + 1e-12 * scale);
                prop_assert!(got[i] - got[i + 1] <= b_dec[i] + 1e-12 * scale);
            }
        }
    }

    /// Componentwise larger caps never shrink the acceleration solution.
    #[test]
    fn solve_acc_monotone_in_caps(
        (y, b_acc, b_dec) in acc_systems(),
        bumps in proptest::collection::vec(0.0f64..10.0, 30),
    ) {
        let base = acc::solve_acc(&y, &b_acc, &b_dec).expect("budgets are positive");
        let raised: Vec<f64> = y.iter().zip(&bumps).map(|(&v, &b)| v + b).collect();
        let upper = acc::solve_acc(&raised, &b_acc, &b_dec).expect("budgets are positive");
        for (lo, hi) in base.iter().zip(&upper) {
            prop_assert!(hi + 1e-12 >= *lo, "raising caps dropped {lo} to {hi}");
        }
    }

    /// The recursive negative-jerk solver matches the fixpoint oracle and
    /// satisfies its own rows.
    #[test]
    fn solve_nar_matches_fixpoint((y, rows) in nar_systems()) {
        let got = nar::solve_nar(&y, &rows).expect("rows are well formed");
        let want = oracle::fixpoint_max(&y, &nar_rows_for_oracle(&rows));
        let scale = y.iter().fold(1.0_f64, |m, &v| m.max(v));
        prop_assert!(
            max_abs_gap(&got, &want) <= 1e-8 * scale,
            "worst gap {:.3e}",
            max_abs_gap(&got, &want)
        );
        for (i, row) in rows.iter().enumerate() {
            prop_assert!(got[i] <= y[i] + 1e-12 * scale);
            if let Some(r) = row {
                let lhs = got[i] - r.coeff * (got[i - 1] + got[i + 1]);
                prop_assert!(lhs <= r.rhs + 1e-9 * scale.max(1.0));
            }
        }
    }

    /// The alternation equals the fixpoint of the merged row families and
    /// the reported travel time matches the stepped profile.
    #[test]
    fn solve_accnar_matches_merged_fixpoint(inst in instances(true), seed in any::<u64>()) {
        let mut rng = SplitMix64::new(seed);
        let w = oracle::random_feasible_profile(&inst, &mut rng);
        let model = linearize::build(&w, &inst, Mode::ThetaBeta).expect("profile is feasible");
        let y = model.ub.clone();
        let sol = accnar::solve_accnar(&y, &model, 1e-10);
        let mut rows = acc_rows_for_oracle(&model.b_acc, &model.b_dec);
        for (i, row) in model.rows.iter().enumerate() {
            if let Some(r) = row {
                rows.push(MonotoneRow {
                    at: i,
                    coeff_prev: r.nar.coeff,
                    coeff_next: r.nar.coeff,
                    rhs: r.nar.rhs,
                });
            }
        }
        let want = oracle::fixpoint_max(&y, &rows);
        prop_assert!(
            max_abs_gap(&sol.dw, &want) <= 1e-7 * inst.scale(),
            "worst gap {:.3e}",
            max_abs_gap(&sol.dw, &want)
        );
        let stepped: Vec<f64> = w.iter().zip(&sol.dw).map(|(a, b)| (a + b).max(0.0)).collect();
        let f = objective::eval_objective(&stepped, inst.h);
        if f.is_finite() {
            prop_assert!((f - sol.travel_time).abs() <= 1e-9 * f.abs().max(1.0));
        } else {
            prop_assert!(!sol.travel_time.is_finite());
        }
    }

    /// Thomas elimination agrees with dense partial-pivot elimination on
    /// diagonally dominant systems.
    #[test]
    fn tridiag_matches_dense(
        m in 1usize..40,
        seeds in proptest::collection::vec((0.01f64..3.0, 0.01f64..3.0, 0.1f64..3.0, -2.0f64..2.0, any::<bool>()), 40),
    ) {
        let mut a = vec![0.0; m];
        let mut b = vec![0.0; m];
        let mut c = vec![0.0; m];
        let mut d = vec![0.0; m];
        for i in 0..m {
            let (sub, sup, margin, rhs, flip) = seeds[i];
            a[i] = if i == 0 { 0.0 } else { sub };
            c[i] = if i + 1 == m { 0.0 } else { sup };
            let mag = a[i].abs() + c[i].abs() + margin;
            b[i] = if flip { -mag } else { mag };
            d[i] = rhs;
        }
        let got = tridiag::solve(&a, &b, &c, &d).expect("system is diagonally dominant");
        let want = oracle::dense_solve(&a, &b, &c, &d).expect("system is nonsingular");
        let scale = 1.0 + want.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
        prop_assert!(max_abs_gap(&got, &want) <= 1e-10 * scale);
    }

    /// At any feasible profile the model is valid: nonnegative slopes and
    /// right-hand sides, and the tangent slopes bracket the secant.
    #[test]
    fn linearization_valid_at_feasible_points(inst in instances(true), seed in any::<u64>()) {
        let mut rng = SplitMix64::new(seed);
        let w = oracle::random_feasible_profile(&inst, &mut rng);
        let model = linearize::build(&w, &inst, Mode::ThetaBeta).expect("profile is feasible");
        for &rhs in model.b_acc.iter().chain(&model.b_dec) {
            prop_assert!(rhs >= -1e-12);
        }
        for row in model.rows.iter().flatten() {
            prop_assert!(row.par.coeff >= 0.0 && row.nar.coeff >= 0.0);
            prop_assert!(row.par.rhs >= -1e-12 && row.nar.rhs >= -1e-12);
        }
        for i in 1..inst.n - 1 {
            if let Some(coeffs) = linearize::coefficients(&w, i, model.delta) {
                if coeffs.beta >= 0.0 {
                    prop_assert!(coeffs.beta <= coeffs.eta + 1e-12 * (1.0 + coeffs.eta.abs()));
                    prop_assert!(coeffs.eta <= coeffs.theta + 1e-12 * (1.0 + coeffs.theta.abs()));
                }
            }
        }
    }

    /// Instance JSON round-trips bit-exactly through the cap form.
    #[test]
    fn instance_json_roundtrip(inst in instances(true)) {
        let back = Instance::from_json(&inst.to_json()).expect("serializer output parses");
        prop_assert_eq!(back.n, inst.n);
        prop_assert_eq!(back.h.to_bits(), inst.h.to_bits());
        prop_assert_eq!(back.a_max.to_bits(), inst.a_max.to_bits());
        prop_assert_eq!(back.j_max.to_bits(), inst.j_max.to_bits());
        for (a, b) in back.u.iter().zip(&inst.u) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    /// Sharper curvature never raises a cap.
    #[test]
    fn upper_bound_monotone_in_curvature(
        curvature in proptest::collection::vec(-0.2f64..0.2, 3..40),
        sharpen in 1.0f64..5.0,
        v_max in 1.0f64..20.0,
        a_n in 0.2f64..3.0,
    ) {
        let path = PathSpec { s_f: 10.0, curvature: curvature.clone(), v_max, a_n };
        let base = instance::build_upper_bound(&path);
        let sharper = PathSpec {
            s_f: 10.0,
            curvature: curvature.iter().map(|k| k * sharpen).collect(),
            v_max,
            a_n,
        };
        let tight = instance::build_upper_bound(&sharper);
        for (hi, lo) in base.iter().zip(&tight) {
            prop_assert!(lo <= hi, "sharpening curvature raised a cap from {hi} to {lo}");
        }
        for &cap in &base {
            prop_assert!(cap >= 0.0 && cap <= v_max * v_max);
        }
    }

    /// Where the jerk bisection binds, its root satisfies the defining
    /// equation to the documented residual.
    #[test]
    fn config_space_root_residual(
        k in proptest::collection::vec(0.0f64..2.0, 1..20),
        k2 in proptest::collection::vec(0.0f64..2.0, 20),
        v_hat in 1.0f64..10.0,
        gaps in (0.1f64..3.0, 0.1f64..3.0),
        limits in (0.2f64..2.0, 0.2f64..2.0),
    ) {
        let (a, j) = limits;
        let caps = ConfigCaps { v_hat, a_hat: a + gaps.0, j_hat: j + gaps.1, a, j };
        let k2 = &k2[..k.len()];
        let bound = instance::config_space_bound(&k, k2, &caps).expect("inputs are valid");
        for (i, &cap) in bound.iter().enumerate() {
            let mut other = v_hat * v_hat;
            if k[i] > 0.0 {
                other = other.min((caps.a_hat - caps.a) / k[i]);
            }
            let chi_binds = (k[i] > 0.0 || k2[i] > 0.0) && cap < other * (1.0 - 1e-9);
            if chi_binds {
                let rhs = caps.j_hat - caps.j;
                let residual =
                    (3.0 * k[i] * caps.a * cap.sqrt() + k2[i] * cap * cap.sqrt() - rhs).abs();
                prop_assert!(
                    residual <= 1e-10 * caps.j_hat,
                    "residual {residual:.3e} at cap {cap}"
                );
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// A trust-region update from a feasible point keeps the full step
    /// inside the original constraint set and never raises the objective.
    #[test]
    fn update_keeps_full_steps_feasible(
        inst in instances(true),
        seed in any::<u64>(),
        direction in prop_oneof![Just(Direction::Heuristic), Just(Direction::Lp)],
    ) {
        let mut rng = SplitMix64::new(seed);
        let w = oracle::random_feasible_profile(&inst, &mut rng);
        let model = linearize::build(&w, &inst, Mode::ThetaBeta).expect("profile is feasible");
        let params = TrustParams {
            sigma0: 1.0,
            eps1: 1e-6,
            rho: 4.0,
            tau: 0.25,
            max_iters: 60,
            inner_eps: 1e-8,
        };
        let info = descent::compute_update(&model, direction, &params);
        let stepped: Vec<f64> = w.iter().zip(&info.dw).map(|(a, b)| (a + b).max(0.0)).collect();
        let report = objective::check_feasibility(&stepped, &inst, 1e-8);
        prop_assert!(report.feasible, "full step left the feasible set: {report:?}");
        let f0 = objective::eval_objective(&w, inst.h);
        if f0.is_finite() {
            prop_assert!(info.travel_time <= f0 + 1e-12 * f0.abs());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Full solves keep a monotone objective trail and feasible iterates,
    /// and stop inside the iteration budget with a consistent report.
    #[test]
    fn solve_trail_monotone_and_feasible(inst in instances(true)) {
        let cfg = SolveConfig { record_iterates: true, ..SolveConfig::default() };
        let report = sca::solve(&inst, &cfg).expect("solve accepts any valid instance");
        let trail = &report.objective;
        for k in 1..trail.len() {
            if trail[k - 1].is_finite() {
                prop_assert!(
                    trail[k] <= trail[k - 1] + 1e-12 * trail[k - 1].abs().max(1.0),
                    "trail rose at step {k}: {} -> {}",
                    trail[k - 1],
                    trail[k]
                );
            }
        }
        let iterates = report.iterates.as_ref().expect("iterates were requested");
        for w in iterates {
            prop_assert!(objective::check_feasibility(w, &inst, 1e-8).feasible);
        }
        prop_assert!(report.iterations <= cfg.max_outer);
        prop_assert_eq!(
            report.travel_time.to_bits(),
            trail.last().expect("trail is never empty").to_bits()
        );
        if report.reason == sca::StopReason::Degenerate {
            prop_assert!(!report.travel_time.is_finite());
        } else {
            prop_assert!(report.travel_time.is_finite());
        }
    }
}
