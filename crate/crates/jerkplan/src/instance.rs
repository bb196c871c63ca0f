//! Problem data: grid, squared-speed caps, acceleration and jerk limits.
//!
//! An [`Instance`] fixes the discretized problem completely: `n` samples at
//! spacing `h = s_f / (n-1)`, a per-sample cap `u_i` on the squared speed
//! (zero at both ends, the rest condition), the longitudinal acceleration
//! limit `A` and the jerk limit `J`. Caps typically come from path geometry
//! via [`build_upper_bound`]: `u_i = min{v_max², A_N / |k_i|}` with `k` the
//! curvature and `A_N` the lateral acceleration limit.
//!
//! Four generators produce the instance families used by the benchmark and
//! test suites, all deterministic in their seed. [`config_space_bound`]
//! computes the tighter cap `μ⁺` that accounts for configuration-space
//! velocity, acceleration and jerk limits of an articulated platform.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prng::SplitMix64;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("grid too small: n = {0}, need n >= {1}")]
    GridTooSmall(usize, usize),
    #[error("invalid {name}: {value}")]
    BadValue { name: &'static str, value: f64 },
    #[error("cap vector has {got} entries, header says n = {want}")]
    LengthMismatch { got: usize, want: usize },
    #[error("instance file: {0}")]
    Schema(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Discretized minimum-time problem on an equispaced grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    /// Number of grid points, at least 3.
    pub n: usize,
    /// Grid spacing `s_f / (n-1)` in meters.
    pub h: f64,
    /// Squared-speed cap per grid point; `u[0] = u[n-1] = 0`.
    pub u: Vec<f64>,
    /// Longitudinal acceleration limit in m/s².
    pub a_max: f64,
    /// Longitudinal jerk limit in m/s³.
    pub j_max: f64,
}

impl Instance {
    /// Builds and validates an instance. Endpoint caps are forced to zero
    /// (the profile starts and ends at rest).
    pub fn new(s_f: f64, mut u: Vec<f64>, a_max: f64, j_max: f64) -> Result<Self, InstanceError> {
        let n = u.len();
        if n < 3 {
            return Err(InstanceError::GridTooSmall(n, 3));
        }
        if !(s_f > 0.0 && s_f.is_finite()) {
            return Err(InstanceError::BadValue { name: "s_f", value: s_f });
        }
        if !(a_max > 0.0 && a_max.is_finite()) {
            return Err(InstanceError::BadValue { name: "A", value: a_max });
        }
        if !(j_max > 0.0) {
            return Err(InstanceError::BadValue { name: "J", value: j_max });
        }
        for &c in &u {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(InstanceError::BadValue { name: "u", value: c });
            }
        }
        u[0] = 0.0;
        u[n - 1] = 0.0;
        Ok(Self { n, h: s_f / (n - 1) as f64, u, a_max, j_max })
    }

    /// Path length in meters.
    pub fn s_f(&self) -> f64 {
        self.h * (self.n - 1) as f64
    }

    /// Largest squared-speed cap, floored at 1; the magnitude reference for
    /// relative tolerances throughout the solver.
    pub fn scale(&self) -> f64 {
        self.u.iter().copied().fold(1.0_f64, f64::max)
    }

    /// Right-hand side `2hA` of the acceleration rows.
    pub fn acc_rhs(&self) -> f64 {
        2.0 * self.h * self.a_max
    }

    /// Right-hand side `2h²J` of the jerk rows.
    pub fn jerk_rhs(&self) -> f64 {
        2.0 * self.h * self.h * self.j_max
    }

    /// Parses the JSON instance format.
    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        let file: InstanceFile = serde_json::from_str(text)?;
        file.into_instance()
    }

    /// Serializes to the JSON instance format, cap vector included.
    pub fn to_json(&self) -> String {
        let file = InstanceFile {
            version: FORMAT_VERSION,
            s_f: self.s_f(),
            n: self.n,
            a: self.a_max,
            j: self.j_max,
            u: Some(self.u.clone()),
            curvature: None,
            v_max: None,
            a_n: None,
        };
        serde_json::to_string_pretty(&file).expect("instance serialization cannot fail")
    }
}

/// Path geometry from which squared-speed caps are derived.
#[derive(Debug, Clone)]
pub struct PathSpec {
    /// Path length in meters.
    pub s_f: f64,
    /// Signed curvature per grid point, 1/m.
    pub curvature: Vec<f64>,
    /// Speed limit in m/s.
    pub v_max: f64,
    /// Lateral acceleration limit in m/s².
    pub a_n: f64,
}

/// Squared-speed cap `u_i = min{v_max², A_N / |k_i|}` per grid point.
///
/// Straight sections (`k_i = 0`) are capped by the speed limit alone.
pub fn build_upper_bound(path: &PathSpec) -> Vec<f64> {
    let v2 = path.v_max * path.v_max;
    path.curvature
        .iter()
        .map(|&k| if k == 0.0 { v2 } else { v2.min(path.a_n / k.abs()) })
        .collect()
}

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    version: u32,
    s_f: f64,
    n: usize,
    #[serde(rename = "A")]
    a: f64,
    #[serde(rename = "J")]
    j: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    u: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    curvature: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    v_max: Option<f64>,
    #[serde(rename = "A_N", skip_serializing_if = "Option::is_none")]
    a_n: Option<f64>,
}

impl InstanceFile {
    fn into_instance(self) -> Result<Instance, InstanceError> {
        if self.version != FORMAT_VERSION {
            return Err(InstanceError::Schema(format!(
                "unsupported version {} (expected {})",
                self.version, FORMAT_VERSION
            )));
        }
        let u = match (self.u, self.curvature) {
            (Some(u), None) => {
                if u.len() != self.n {
                    return Err(InstanceError::LengthMismatch { got: u.len(), want: self.n });
                }
                u
            }
            (None, Some(curvature)) => {
                if curvature.len() != self.n {
                    return Err(InstanceError::LengthMismatch {
                        got: curvature.len(),
                        want: self.n,
                    });
                }
                let (v_max, a_n) = match (self.v_max, self.a_n) {
                    (Some(v), Some(a)) => (v, a),
                    _ => {
                        return Err(InstanceError::Schema(
                            "curvature form needs v_max and A_N".into(),
                        ))
                    }
                };
                if !(v_max > 0.0) {
                    return Err(InstanceError::BadValue { name: "v_max", value: v_max });
                }
                if !(a_n > 0.0) {
                    return Err(InstanceError::BadValue { name: "A_N", value: a_n });
                }
                build_upper_bound(&PathSpec { s_f: self.s_f, curvature, v_max, a_n })
            }
            (Some(_), Some(_)) => {
                return Err(InstanceError::Schema("give either u or curvature, not both".into()))
            }
            (None, None) => {
                return Err(InstanceError::Schema("give either u or curvature".into()))
            }
        };
        Instance::new(self.s_f, u, self.a, self.j)
    }
}

/// Serializes a curvature-described instance, keeping the geometry fields.
pub fn path_to_json(path: &PathSpec, a_max: f64, j_max: f64) -> String {
    let file = InstanceFile {
        version: FORMAT_VERSION,
        s_f: path.s_f,
        n: path.curvature.len(),
        a: a_max,
        j: j_max,
        u: None,
        curvature: Some(path.curvature.clone()),
        v_max: Some(path.v_max),
        a_n: Some(path.a_n),
    };
    serde_json::to_string_pretty(&file).expect("instance serialization cannot fail")
}

/// Random plateau instance: 60 m path, seven constant-cap stretches.
///
/// The interior grid points are split into seven nearly equal runs (the
/// leading runs take the remainder) and each run gets an independent cap
/// drawn uniformly from (0, 100] m²/s². A = 2.78 m/s², J = 0.5 m/s³.
pub fn gen_experiment1(seed: u64, n: usize) -> Result<Instance, InstanceError> {
    if n < 9 {
        return Err(InstanceError::GridTooSmall(n, 9));
    }
    let mut rng = SplitMix64::new(seed);
    let levels: Vec<f64> = (0..7).map(|_| 100.0 * rng.next_unit()).collect();
    let interior = n - 2;
    let base = interior / 7;
    let rem = interior % 7;
    let mut u = vec![0.0; n];
    let mut i = 1;
    for (run, &level) in levels.iter().enumerate() {
        let len = base + usize::from(run < rem);
        for _ in 0..len {
            u[i] = level;
            i += 1;
        }
    }
    Instance::new(60.0, u, 2.78, 0.5)
}

/// Random road-like instance: 1 km path, five curvature segments.
///
/// Curvature is continuous and piecewise linear over five equal-length
/// segments; each segment either holds the running level or ramps to a
/// fresh level in [-0.05, 0.05] 1/m. Caps follow the curvature with
/// v_max² = 192.93 m²/s² and A_N = 4.9 m/s²; A = 0.25 m/s², J = 0.025 m/s³.
pub fn gen_experiment2(seed: u64, n: usize) -> Result<Instance, InstanceError> {
    if n < 7 {
        return Err(InstanceError::GridTooSmall(n, 7));
    }
    let mut rng = SplitMix64::new(seed);
    let mut levels = [0.0_f64; 6];
    for j in 0..5 {
        // 0 = hold, 1 = ramp; a third of the draws hold at zero when
        // already straight, matching the mix of segment kinds.
        let ramp = rng.next_below(3) == 1;
        levels[j + 1] = if ramp { rng.next_in(-0.05, 0.05) } else { levels[j] };
    }
    let s_f = 1000.0;
    let seg = s_f / 5.0;
    let curvature: Vec<f64> = (0..n)
        .map(|i| {
            let s = s_f * i as f64 / (n - 1) as f64;
            let j = ((s / seg) as usize).min(4);
            let frac = (s - j as f64 * seg) / seg;
            levels[j] + (levels[j + 1] - levels[j]) * frac
        })
        .collect();
    let v_max = 192.93_f64.sqrt();
    let path = PathSpec { s_f, curvature, v_max, a_n: 4.9 };
    Instance::new(s_f, build_upper_bound(&path), 0.25, 0.025)
}

/// Sinusoidal-curvature path: `k(s) = sin(s/10) / 5` over 60 m.
///
/// The cap dips to A_N/0.2 = 24.5 m²/s² near s = 5π. v_max = 15 m/s,
/// A = 1.39 m/s², A_N = 4.9 m/s², J = 0.5 m/s³.
pub fn gen_sine_path(n: usize) -> Result<Instance, InstanceError> {
    if n < 3 {
        return Err(InstanceError::GridTooSmall(n, 3));
    }
    let s_f = 60.0;
    let curvature: Vec<f64> =
        (0..n).map(|i| (s_f * i as f64 / (n - 1) as f64 / 10.0).sin() / 5.0).collect();
    let path = PathSpec { s_f, curvature, v_max: 15.0, a_n: 4.9 };
    Instance::new(s_f, build_upper_bound(&path), 1.39, 0.5)
}

/// Straight / clothoid / arc / clothoid / straight path over 90 m.
///
/// Segment lengths 25, 15, 10, 15, 25 m; the arc has curvature 0.04 1/m so
/// its cap plateau is A_N/0.04 = 25 m²/s². v_max = 15 m/s, A = 1.5 m/s²,
/// A_N = 1 m/s², J = 1 m/s³.
pub fn gen_clothoid_path(n: usize) -> Result<Instance, InstanceError> {
    if n < 10 {
        return Err(InstanceError::GridTooSmall(n, 10));
    }
    let s_f = 90.0;
    let k_c = 0.04;
    let curvature: Vec<f64> = (0..n)
        .map(|i| {
            let s = s_f * i as f64 / (n - 1) as f64;
            if s < 25.0 {
                0.0
            } else if s < 40.0 {
                k_c * (s - 25.0) / 15.0
            } else if s <= 50.0 {
                k_c
            } else if s < 65.0 {
                k_c * (65.0 - s) / 15.0
            } else {
                0.0
            }
        })
        .collect();
    let path = PathSpec { s_f, curvature, v_max: 15.0, a_n: 1.0 };
    Instance::new(s_f, build_upper_bound(&path), 1.5, 1.0)
}

/// Joint-space limits entering [`config_space_bound`].
#[derive(Debug, Clone, Copy)]
pub struct ConfigCaps {
    /// Joint velocity limit (norm bound).
    pub v_hat: f64,
    /// Joint acceleration limit; must exceed `a`.
    pub a_hat: f64,
    /// Joint jerk limit; must exceed `j`.
    pub j_hat: f64,
    /// Path acceleration limit A.
    pub a: f64,
    /// Path jerk limit J.
    pub j: f64,
}

/// Squared-speed cap `μ⁺` per grid point from configuration-space limits.
///
/// `k[i]` and `k2[i]` are the norms of the first and second derivatives of
/// the joint path. Each cap is `min{V̂², (Â-A)/k_i, χ_i}` where `χ_i` solves
/// `3 k_i A √χ + k2_i χ^{3/2} = Ĵ - J`; terms whose coefficient vanishes
/// drop out. The χ equation is solved by bisection to a residual of
/// `1e-10 · Ĵ` within 200 iterations.
pub fn config_space_bound(
    k: &[f64],
    k2: &[f64],
    caps: &ConfigCaps,
) -> Result<Vec<f64>, InstanceError> {
    if k.len() != k2.len() {
        return Err(InstanceError::LengthMismatch { got: k2.len(), want: k.len() });
    }
    if !(caps.a > 0.0 && caps.a_hat > caps.a) {
        return Err(InstanceError::BadValue { name: "A_hat", value: caps.a_hat });
    }
    if !(caps.j > 0.0 && caps.j_hat > caps.j) {
        return Err(InstanceError::BadValue { name: "J_hat", value: caps.j_hat });
    }
    if !(caps.v_hat > 0.0) {
        return Err(InstanceError::BadValue { name: "V_hat", value: caps.v_hat });
    }
    k.iter()
        .zip(k2)
        .map(|(&ki, &k2i)| {
            if !(ki >= 0.0 && ki.is_finite()) {
                return Err(InstanceError::BadValue { name: "k", value: ki });
            }
            if !(k2i >= 0.0 && k2i.is_finite()) {
                return Err(InstanceError::BadValue { name: "k2", value: k2i });
            }
            let mut cap = caps.v_hat * caps.v_hat;
            if ki > 0.0 {
                cap = cap.min((caps.a_hat - caps.a) / ki);
            }
            if ki > 0.0 || k2i > 0.0 {
                cap = cap.min(chi_root(ki, k2i, caps));
            }
            Ok(cap)
        })
        .collect()
}

/// Root of `g(χ) = 3 k A √χ + k2 χ^{3/2} - (Ĵ - J)`; g is increasing with
/// g(0) < 0, so one bracketed root exists.
fn chi_root(k: f64, k2: f64, caps: &ConfigCaps) -> f64 {
    let rhs = caps.j_hat - caps.j;
    let g = |chi: f64| 3.0 * k * caps.a * chi.sqrt() + k2 * chi * chi.sqrt() - rhs;
    let mut hi = 1.0;
    while g(hi) < 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    let tol = 1e-10 * caps.j_hat;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let val = g(mid);
        if val.abs() <= tol {
            return mid;
        }
        if val < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
