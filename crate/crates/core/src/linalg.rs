//! Dense and sparse numeric helpers shared by the partition, critical and
//! classification code.

use nalgebra::DMatrix;

/// Compensated (Kahan–Babuška/Neumaier) accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut k = KahanSum::new();
        for x in iter {
            k.add(x);
        }
        k
    }
}

pub fn kahan_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<KahanSum>().value()
}

/// Nonnegative matrix in row-compressed form.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseRows {
    pub size: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl SparseRows {
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(&self.rows) {
            *o = row.iter().map(|&(j, a)| a * v[j]).sum();
        }
    }

    pub fn apply_transpose(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, a) in row {
                out[j] += a * v[i];
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.size, self.size);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, a) in row {
                d[(i, j)] = a;
            }
        }
        d
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().map(|&(_, a)| a).sum()).collect()
    }
}

/// Which route produced a spectral-radius estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusMethod {
    Exact,
    PowerIteration,
    ShiftedPowerIteration,
    DenseEigenvalues,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DominantPair {
    pub value: f64,
    /// Normalized to unit max-norm; nonnegative.
    pub vector: Vec<f64>,
    pub iterations: usize,
    pub method: RadiusMethod,
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct PowerSettings {
    /// Relative tolerance on the Rayleigh-quotient drift.
    pub tolerance: f64,
    /// Budget for the unshifted iteration before switching to the shifted one.
    pub plain_iterations: usize,
    /// Total iteration budget across both phases.
    pub max_iterations: usize,
}

impl Default for PowerSettings {
    fn default() -> Self {
        PowerSettings {
            tolerance: 1e-12,
            plain_iterations: 2_000,
            max_iterations: 100_000,
        }
    }
}

/// Power iteration on `M + shift·I` from the all-ones vector.
///
/// Converged when the Rayleigh-quotient drift is below `tol` (relative) and
/// the eigen-residual `‖Mx − λx‖∞ ≤ 10·tol·λ‖x‖∞`.
fn power_phase(m: &SparseRows, shift: f64, tol: f64, budget: usize) -> Option<(f64, Vec<f64>, usize)> {
    let n = m.size;
    let mut x = vec![1.0; n];
    let mut y = vec![0.0; n];
    let mut prev = f64::NAN;
    for it in 1..=budget {
        m.apply(&x, &mut y);
        let xx: f64 = x.iter().map(|a| a * a).sum();
        let xy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let lambda = xy / xx;
        let scale = lambda.abs().max(f64::MIN_POSITIVE);
        let drift = (lambda - prev).abs();
        if drift <= tol * scale {
            let xmax = x.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
            let resid = x
                .iter()
                .zip(&y)
                .fold(0.0f64, |a, (xi, yi)| a.max((yi - lambda * xi).abs()));
            if resid <= 10.0 * tol * scale * xmax {
                let value = lambda;
                normalize_max(&mut x);
                return Some((value, x, it));
            }
        }
        prev = lambda;
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi + shift * *xi;
        }
        if !normalize_max(&mut x) {
            // Nilpotent: the iterate vanished.
            return Some((0.0, vec![0.0; n], it));
        }
    }
    None
}

fn normalize_max(x: &mut [f64]) -> bool {
    let mx = x.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if mx == 0.0 || !mx.is_finite() {
        return false;
    }
    x.iter_mut().for_each(|v| *v /= mx);
    true
}

/// Dominant eigenpair of a nonnegative matrix.
///
/// Unshifted power iteration first; imprimitive matrices oscillate, so on
/// failure the iteration is repeated on `M + sI` with `s` the mean row sum
/// (same Perron vector, every other eigenvalue strictly smaller in modulus
/// after the shift); the last resort is the dense eigenvalue problem.
pub fn dominant_pair(m: &SparseRows, settings: &PowerSettings) -> DominantPair {
    if m.rows.iter().all(|r| r.iter().all(|&(_, a)| a == 0.0)) {
        return DominantPair {
            value: 0.0,
            vector: vec![0.0; m.size],
            iterations: 0,
            method: RadiusMethod::Exact,
        };
    }
    let plain = settings.plain_iterations.min(settings.max_iterations);
    if let Some((v, x, it)) = power_phase(m, 0.0, settings.tolerance, plain) {
        return DominantPair {
            value: v.max(0.0),
            vector: x,
            iterations: it,
            method: RadiusMethod::PowerIteration,
        };
    }
    let sums = m.row_sums();
    let shift = sums.iter().sum::<f64>() / sums.len() as f64;
    let budget = settings.max_iterations.saturating_sub(plain);
    if let Some((v, x, it)) = power_phase(m, shift, settings.tolerance, budget) {
        return DominantPair {
            value: v.max(0.0),
            vector: x,
            iterations: plain + it,
            method: RadiusMethod::ShiftedPowerIteration,
        };
    }
    let dense = m.to_dense();
    let value = dense_spectral_radius(&dense);
    let mut vector = null_vector(&(dense - DMatrix::identity(m.size, m.size) * value));
    vector.iter_mut().for_each(|v| *v = v.abs());
    normalize_max(&mut vector);
    DominantPair {
        value,
        vector,
        iterations: settings.max_iterations,
        method: RadiusMethod::DenseEigenvalues,
    }
}

/// Largest eigenvalue modulus via the real Schur form.
pub fn dense_spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Right singular vector of the smallest singular value.
pub fn null_vector(m: &DMatrix<f64>) -> Vec<f64> {
    let basis = smallest_singular_vectors(m, 1);
    basis.into_iter().next().unwrap_or_default()
}

/// Singular values (descending) and right singular vectors as rows of `v_t`.
fn svd_full(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.ncols();
    // Pad to square so that `v_t` is a full basis of the domain.
    let padded = if m.nrows() < n {
        let mut p = DMatrix::zeros(n, n);
        p.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let values = order.iter().map(|&i| svd.singular_values[i]).collect();
    let rows: Vec<_> = order.iter().map(|&i| v_t.row(i).clone_owned()).collect();
    (values, DMatrix::from_rows(&rows))
}

/// The `k` right singular vectors with the smallest singular values.
pub fn smallest_singular_vectors(m: &DMatrix<f64>, k: usize) -> Vec<Vec<f64>> {
    let (values, v_t) = svd_full(m);
    let n = values.len();
    (n.saturating_sub(k)..n)
        .rev()
        .map(|i| v_t.row(i).iter().copied().collect())
        .collect()
}

/// Singular values of `m`, descending.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    svd_full(m).0
}

/// Orthonormal basis of `{ x : ‖Mx‖ small }`: right singular vectors whose
/// singular values are at most `threshold`.
pub fn null_space(m: &DMatrix<f64>, threshold: f64) -> Vec<Vec<f64>> {
    let (values, v_t) = svd_full(m);
    values
        .iter()
        .enumerate()
        .filter(|&(_, &s)| s <= threshold)
        .map(|(i, _)| v_t.row(i).iter().copied().collect())
        .collect()
}

/// Numeric rank with relative singular-value cutoff `rel_tol`.
pub fn numeric_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let s = m.clone().svd(false, false).singular_values;
    let top = s.iter().fold(0.0f64, |a, &b| a.max(b));
    if top == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > rel_tol * top).count()
}

/// Number of affinely independent points among `points`.
pub fn affine_rank(points: &[Vec<f64>], rel_tol: f64) -> usize {
    let Some(first) = points.first() else {
        return 0;
    };
    if points.len() == 1 {
        return 1;
    }
    let dim = first.len();
    let diffs = DMatrix::from_fn(points.len() - 1, dim, |i, j| points[i + 1][j] - first[j]);
    let scale = points
        .iter()
        .flat_map(|p| p.iter())
        .fold(0.0f64, |a, &b| a.max(b.abs()));
    if scale == 0.0 {
        return 1;
    }
    let s = diffs.svd(false, false).singular_values;
    1 + s.iter().filter(|&&v| v > rel_tol * scale).count()
}

/// Bisection for the sign change of a function that is positive at `lo` and
/// negative at `hi`. Stops when the bracket is narrower than `tol`.
pub fn bisect_decreasing<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sparse(rows: &[&[f64]]) -> SparseRows {
        SparseRows {
            size: rows.len(),
            rows: rows
                .iter()
                .map(|r| {
                    r.iter()
                        .enumerate()
                        .filter(|&(_, &a)| a != 0.0)
                        .map(|(j, &a)| (j, a))
                        .collect()
                })
                .collect(),
        }
    }

    #[test]
    fn kahan_beats_naive() {
        let xs: Vec<f64> = std::iter::once(1.0).chain(std::iter::repeat_n(1e-16, 10_000)).collect();
        let k = kahan_sum(xs.iter().copied());
        assert!((k - (1.0 + 1e-12)).abs() < 1e-20);
    }

    #[test]
    fn primitive_matrix_uses_plain_iteration() {
        let m = sparse(&[&[0.0, 1.0], &[1.0, 1.0]]);
        let p = dominant_pair(&m, &PowerSettings::default());
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((p.value - phi).abs() < 1e-12);
        assert_eq!(p.method, RadiusMethod::PowerIteration);
    }

    #[test]
    fn imprimitive_matrix_falls_back_to_shift() {
        // Period-2 star with unequal arms: plain iteration oscillates.
        let m = sparse(&[&[0.0, 0.3, 0.5], &[0.5, 0.0, 0.0], &[0.5, 0.0, 0.0]]);
        let p = dominant_pair(&m, &PowerSettings::default());
        assert!((p.value - 0.4f64.sqrt()).abs() < 1e-12, "{}", p.value);
        assert_eq!(p.method, RadiusMethod::ShiftedPowerIteration);
    }

    #[test]
    fn dense_fallback_agrees() {
        let m = sparse(&[&[0.0, 0.3, 0.5], &[0.5, 0.0, 0.0], &[0.5, 0.0, 0.0]]);
        let settings = PowerSettings {
            tolerance: 1e-12,
            plain_iterations: 3,
            max_iterations: 4,
        };
        let p = dominant_pair(&m, &settings);
        assert_eq!(p.method, RadiusMethod::DenseEigenvalues);
        assert!((p.value - 0.4f64.sqrt()).abs() < 1e-12);
        let mut y = vec![0.0; 3];
        m.apply(&p.vector, &mut y);
        for (a, b) in y.iter().zip(&p.vector) {
            assert!((a - p.value * b).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_matrix_is_exact() {
        let m = sparse(&[&[0.0, 0.0], &[0.0, 0.0]]);
        let p = dominant_pair(&m, &PowerSettings::default());
        assert_eq!(p.value, 0.0);
        assert_eq!(p.method, RadiusMethod::Exact);
    }

    #[test]
    fn null_space_of_rank_one() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let ns = null_space(&m, 1e-9);
        assert_eq!(ns.len(), 1);
        assert!((ns[0][0] + ns[0][1]).abs() < 1e-12);
        assert_eq!(numeric_rank(&m, 1e-9), 1);
    }

    #[test]
    fn affine_rank_of_simplex_vertices() {
        let pts = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        assert_eq!(affine_rank(&pts, 1e-9), 3);
        let collinear = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]];
        assert_eq!(affine_rank(&collinear, 1e-9), 2);
    }

    #[test]
    fn bisection_finds_root() {
        let (lo, hi) = bisect_decreasing(|x| 2.0 - x * x, 0.0, 2.0, 1e-12);
        assert!((0.5 * (lo + hi) - 2f64.sqrt()).abs() < 1e-11);
    }
}
