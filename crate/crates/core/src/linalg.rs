//! Dense linear-algebra helpers shared across modules: pivoted inversion
//! with diagnostics, deterministic 2-norm estimation, sorted symmetric
//! eigensolves, and small least-squares fits.

use nalgebra::{DMatrix, DVector};

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

/// Maximum absolute row sum (operator ∞-norm).
pub fn norm_inf(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        let s: f64 = m.row(i).iter().map(|x| x.abs()).sum();
        worst = worst.max(s);
    }
    worst
}

/// Maximum absolute column sum (operator 1-norm).
pub fn norm_one(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..m.ncols() {
        let s: f64 = m.column(j).iter().map(|x| x.abs()).sum();
        worst = worst.max(s);
    }
    worst
}

/// Deterministic power-iteration estimate of the spectral norm (largest
/// singular value), iterating on `MᵀM`.  Convergence is from below, so the
/// estimate never exceeds the true norm by more than roundoff.
pub fn op_norm_2(m: &DMatrix<f64>, max_iters: usize, rel_tol: f64) -> f64 {
    let n = m.ncols();
    if n == 0 || m.nrows() == 0 {
        return 0.0;
    }
    // fixed, slightly uneven start vector so symmetric sign patterns cannot
    // leave it orthogonal to the top singular subspace
    let mut v = DVector::from_fn(n, |i, _| 1.0 + (i % 7) as f64 * 0.125);
    let nv = v.norm();
    v /= nv;
    let mut sigma = 0.0f64;
    for _ in 0..max_iters {
        let w = m * &v;
        let u = m.transpose() * w;
        let nu = u.norm();
        if nu == 0.0 || !nu.is_finite() {
            return if nu == 0.0 { 0.0 } else { f64::INFINITY };
        }
        let next = nu.sqrt();
        let done = (next - sigma).abs() <= rel_tol * next.max(f64::MIN_POSITIVE);
        sigma = next;
        v = u / nu;
        if done {
            break;
        }
    }
    sigma
}

/// Spectral norm with the crate-wide default budget (30 iterations, 1%).
pub fn op_norm(m: &DMatrix<f64>) -> f64 {
    op_norm_2(m, 30, 0.01)
}

/// Exact-as-LAPACK spectral norm via SVD; for small matrices where the
/// inequality checks must not depend on an iterative estimate.
pub fn op_norm_svd(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0f64, |a, s| a.max(*s))
}

pub struct InverseDiagnostics {
    pub inverse: Option<DMatrix<f64>>,
    /// `‖A·A⁻¹ − I‖_max` (NaN when not invertible).
    pub residual: f64,
    /// `‖A‖_∞ · ‖A⁻¹‖_∞` (∞ when not invertible).
    pub condition: f64,
}

/// Pivoted LU inversion with a residual check on every call.
pub fn invert(m: &DMatrix<f64>) -> InverseDiagnostics {
    let lu = m.clone().lu();
    match lu.try_inverse() {
        Some(inv) if inv.iter().all(|x| x.is_finite()) => {
            let mut prod = m * &inv;
            for i in 0..prod.nrows() {
                prod[(i, i)] -= 1.0;
            }
            let residual = max_abs(&prod);
            let condition = norm_inf(m) * norm_inf(&inv);
            InverseDiagnostics {
                inverse: Some(inv),
                residual,
                condition,
            }
        }
        _ => InverseDiagnostics {
            inverse: None,
            residual: f64::NAN,
            condition: f64::INFINITY,
        },
    }
}

/// Symmetric eigendecomposition with eigenvalues sorted ascending and
/// matching eigenvector columns.
pub fn sym_eigen_sorted(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = m.clone().symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Eigenvalues only, sorted ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// Ordinary least squares `y ≈ slope·x + intercept`; returns
/// `(slope, intercept, rms_residual)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "need at least two points to fit a line");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum();
    (slope, intercept, (ss / n).sqrt())
}
