//! Nonnegative least squares for multiplier extraction.
//!
//! Solves `min ‖Cμ - b‖₂ s.t. μ ≥ 0` by the Lawson-Hanson active-set
//! method. Columns of `C` are constraint gradients with at most three
//! nonzeros on consecutive rows, so the passive-set normal matrix is
//! banded once columns are ordered by support; each inner least-squares
//! solve is a banded Cholesky factorization, `O(p·bw²)` instead of the
//! dense `O(p³)`.

/// Column with a short contiguous run of nonzeros starting at row `first`.
#[derive(Debug, Clone)]
pub struct SparseCol {
    first: usize,
    vals: Vec<f64>,
}

impl SparseCol {
    /// Builds a column from (row, value) entries sorted by row.
    pub fn new(entries: &[(usize, f64)]) -> Self {
        assert!(!entries.is_empty(), "empty column");
        let first = entries[0].0;
        let last = entries[entries.len() - 1].0;
        let mut vals = vec![0.0; last - first + 1];
        for &(row, v) in entries {
            vals[row - first] = v;
        }
        Self { first, vals }
    }

    fn last(&self) -> usize {
        self.first + self.vals.len() - 1
    }

    fn dot_vec(&self, v: &[f64]) -> f64 {
        self.vals.iter().zip(&v[self.first..]).map(|(a, b)| a * b).sum()
    }

    fn dot_col(&self, other: &Self) -> f64 {
        let lo = self.first.max(other.first);
        let hi = self.last().min(other.last());
        if lo > hi {
            return 0.0;
        }
        (lo..=hi).map(|r| self.vals[r - self.first] * other.vals[r - other.first]).sum()
    }

    fn add_scaled(&self, scale: f64, out: &mut [f64]) {
        for (k, &v) in self.vals.iter().enumerate() {
            out[self.first + k] += scale * v;
        }
    }
}

/// Result of an NNLS fit.
#[derive(Debug, Clone)]
pub struct NnlsFit {
    /// Nonnegative coefficients, one per column.
    pub coeffs: Vec<f64>,
    /// `Cμ - b` at the solution.
    pub residual: Vec<f64>,
}

/// Lawson-Hanson NNLS; `rows` is the length of `b`.
pub fn solve(cols: &[SparseCol], b: &[f64], rows: usize) -> NnlsFit {
    solve_impl(cols, b, rows, None)
}

/// Ridge variant: minimizes `‖Cμ - b‖₂² + Σ (pen[j]·μ[j])²` over `μ ≥ 0`.
/// The reported residual is still `Cμ - b`, without the penalty term.
pub fn solve_penalized(cols: &[SparseCol], b: &[f64], rows: usize, pen: &[f64]) -> NnlsFit {
    debug_assert_eq!(pen.len(), cols.len());
    solve_impl(cols, b, rows, Some(pen))
}

fn solve_impl(cols: &[SparseCol], b: &[f64], rows: usize, pen: Option<&[f64]>) -> NnlsFit {
    debug_assert_eq!(b.len(), rows);
    let m = cols.len();
    let mut mu = vec![0.0; m];
    let mut passive: Vec<usize> = Vec::new();
    let mut residual: Vec<f64> = b.iter().map(|&x| -x).collect();
    if m == 0 {
        return NnlsFit { coeffs: mu, residual };
    }

    let b_scale = b.iter().fold(0.0_f64, |s, &x| s.max(x.abs())).max(1.0);
    let dual_tol = 1e-12 * b_scale;

    // r = Cμ - b throughout; the dual of column j is -cⱼ·r.
    let max_outer = 3 * m + 10;
    for _ in 0..max_outer {
        let mut best = usize::MAX;
        let mut best_dual = dual_tol;
        for j in 0..m {
            if !passive.contains(&j) {
                let d = -cols[j].dot_vec(&residual);
                if d > best_dual {
                    best_dual = d;
                    best = j;
                }
            }
        }
        if best == usize::MAX {
            break;
        }
        let pos = passive
            .binary_search_by(|&j| (cols[j].first, j).cmp(&(cols[best].first, best)))
            .unwrap_err();
        passive.insert(pos, best);

        loop {
            let z = passive_least_squares(cols, &passive, b, pen);
            let step_tol = 1e-12;
            if z.iter().all(|&v| v > step_tol) {
                for (slot, &j) in passive.iter().enumerate() {
                    mu[j] = z[slot];
                }
                break;
            }
            // Standard LH backtrack toward z until a coefficient hits zero.
            let mut alpha = 1.0_f64;
            for (slot, &j) in passive.iter().enumerate() {
                if z[slot] <= step_tol {
                    let denom = mu[j] - z[slot];
                    if denom > 0.0 {
                        alpha = alpha.min(mu[j] / denom);
                    }
                }
            }
            for (slot, &j) in passive.iter().enumerate() {
                mu[j] += alpha * (z[slot] - mu[j]);
            }
            let drop_tol = 1e-11;
            let mut kept = Vec::with_capacity(passive.len());
            for &j in &passive {
                if mu[j] > drop_tol {
                    kept.push(j);
                } else {
                    mu[j] = 0.0;
                }
            }
            if kept.len() == passive.len() {
                // Roundoff kept every coefficient positive; accept z as is.
                for (slot, &j) in passive.iter().enumerate() {
                    mu[j] = z[slot].max(0.0);
                }
                break;
            }
            passive = kept;
            if passive.is_empty() {
                break;
            }
        }

        residual = b.iter().map(|&x| -x).collect();
        for &j in &passive {
            cols[j].add_scaled(mu[j], &mut residual);
        }
    }

    NnlsFit { coeffs: mu, residual }
}

/// Unconstrained least squares over the passive columns via banded normal
/// equations; `passive` is sorted by column support start. A per-column
/// ridge penalty only shifts the Gram diagonal, so the band is untouched.
fn passive_least_squares(
    cols: &[SparseCol],
    passive: &[usize],
    b: &[f64],
    pen: Option<&[f64]>,
) -> Vec<f64> {
    let p = passive.len();
    let mut bw = 0;
    for (i, &ji) in passive.iter().enumerate() {
        for (k, &jk) in passive.iter().enumerate().skip(i + 1) {
            if cols[jk].first > cols[ji].last() {
                break;
            }
            bw = bw.max(k - i);
        }
    }

    // Lower-banded Gram matrix: band[i][d] = G[i][i-d].
    let mut band = vec![vec![0.0; bw + 1]; p];
    let mut rhs = vec![0.0; p];
    for (i, &ji) in passive.iter().enumerate() {
        rhs[i] = cols[ji].dot_vec(b);
        for d in 0..=bw.min(i) {
            band[i][d] = cols[ji].dot_col(&cols[passive[i - d]]);
        }
        if let Some(pen) = pen {
            band[i][0] += pen[ji] * pen[ji];
        }
    }
    let ridge = 1e-12 * band.iter().map(|r| r[0]).fold(1e-300, f64::max);
    for row in band.iter_mut() {
        row[0] += ridge;
    }

    // In-place banded Cholesky, then two triangular solves.
    for j in 0..p {
        let mut diag = band[j][0];
        for k in j.saturating_sub(bw)..j {
            let l = band[j][j - k];
            diag -= l * l;
        }
        let diag = diag.max(ridge).sqrt();
        band[j][0] = diag;
        for i in j + 1..p.min(j + bw + 1) {
            let mut v = band[i][i - j];
            for k in i.saturating_sub(bw)..j {
                if j - k <= bw {
                    v -= band[i][i - k] * band[j][j - k];
                }
            }
            band[i][i - j] = v / diag;
        }
    }
    for i in 0..p {
        let mut v = rhs[i];
        for k in i.saturating_sub(bw)..i {
            v -= band[i][i - k] * rhs[k];
        }
        rhs[i] = v / band[i][0];
    }
    for i in (0..p).rev() {
        let mut v = rhs[i];
        for k in i + 1..p.min(i + bw + 1) {
            v -= band[k][k - i] * rhs[k];
        }
        rhs[i] = v / band[i][0];
    }
    rhs
}
