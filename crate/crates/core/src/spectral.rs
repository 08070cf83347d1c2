//! Transfer matrices and Lyapunov exponents for 1-D shift models,
//! eigenvalue counting / integrated density of states, its modulus of
//! continuity, and eigenfunction decay (localization) profiles.

use nalgebra::Matrix2;
use rayon::prelude::*;
use serde::Serialize;

use crate::lattice::LatticeRegion;
use crate::linalg;
use crate::operator::{assemble, OperatorSpec, PotentialSpec};
use crate::torus::{Dynamics, TorusPoint, GOLDEN};
use crate::{Error, Result};

/// Renormalization stride of transfer products; keeps factors below 1e30
/// for couplings up to ~100.
const RENORM_STRIDE: i64 = 32;

/// A scaled transfer product: the true matrix is `matrix · e^{log_scale}`.
#[derive(Clone, Copy, Debug)]
pub struct TransferProduct {
    pub energy: f64,
    pub steps: i64,
    pub matrix: Matrix2<f64>,
    pub log_scale: f64,
}

impl TransferProduct {
    /// `log ‖A_k‖` (Frobenius-equivalent, adequate at log scale).
    pub fn log_norm(&self) -> f64 {
        self.matrix.norm().ln() + self.log_scale
    }

    /// `|log det|` of the true product; 0 for exact unimodularity.
    pub fn log_det_error(&self) -> f64 {
        let det = self.matrix.determinant();
        (det.abs().ln() + 2.0 * self.log_scale).abs()
    }

    pub fn det_sign(&self) -> f64 {
        self.matrix.determinant().signum()
    }
}

fn one_step(energy: f64, v: f64) -> Matrix2<f64> {
    Matrix2::new(energy - v, -1.0, 1.0, 0.0)
}

fn one_step_inv(energy: f64, v: f64) -> Matrix2<f64> {
    // exact inverse of the unimodular factor
    Matrix2::new(0.0, 1.0, -1.0, energy - v)
}

/// `k`-step transfer product `A(x+(k−1)ω)···A(x)` with
/// `A(y) = [[E−v(y), −1],[1,0]]`; negative `k` via the inverse relation
/// `A_{−k}(x) = (A_k(x−kω))⁻¹` expanded into exact factor inverses.
pub fn transfer(
    energy: f64,
    x: &TorusPoint,
    omega: &[f64],
    v: &PotentialSpec,
    k: i64,
) -> TransferProduct {
    let shift = Dynamics::Shift {
        omega: omega.to_vec(),
    };
    let mut m = Matrix2::identity();
    let mut log_scale = 0.0f64;
    let renorm = |m: &mut Matrix2<f64>, log_scale: &mut f64| {
        let s = m.amax();
        if s > 0.0 && s.is_finite() {
            *m /= s;
            *log_scale += s.ln();
        }
    };
    if k >= 0 {
        for j in 0..k {
            let y = shift.apply(&[j], x);
            m = one_step(energy, v.eval(&y)) * m;
            if (j + 1) % RENORM_STRIDE == 0 {
                renorm(&mut m, &mut log_scale);
            }
        }
    } else {
        // (A_k(x−kω))⁻¹ = A(x−ω)⁻¹ read right-to-left: leftmost factor is
        // at the most-shifted base point
        let steps = -k;
        for j in 1..=steps {
            let y = shift.apply(&[-j], x);
            m = m * one_step_inv(energy, v.eval(&y));
            if j % RENORM_STRIDE == 0 {
                renorm(&mut m, &mut log_scale);
            }
        }
    }
    renorm(&mut m, &mut log_scale);
    TransferProduct {
        energy,
        steps: k,
        matrix: m,
        log_scale,
    }
}

/// Finite-`k` Lyapunov estimate: average of `log‖A_k(x)‖/k` over
/// equidistributed phases, with the sample standard error.
pub fn lyapunov(
    energy: f64,
    omega: &[f64],
    v: &PotentialSpec,
    k: i64,
    samples: usize,
) -> Result<(f64, f64)> {
    if k < 100 || samples < 10 {
        return Err(Error::param("k", "need k ≥ 100 and ≥ 10 samples"));
    }
    let b = omega.len();
    let xs: Vec<TorusPoint> = (0..samples)
        .map(|i| {
            // golden-offset grid: equidistributed and deterministic
            let base = (i as f64 + 0.5) / samples as f64;
            TorusPoint::new(
                &(0..b)
                    .map(|a| base + a as f64 * GOLDEN)
                    .collect::<Vec<f64>>(),
            )
        })
        .collect();
    let vals: Vec<f64> = xs
        .par_iter()
        .map(|x| transfer(energy, x, omega, v, k).log_norm() / k as f64)
        .collect();
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok((mean, (var / n).sqrt()))
}

// ---------------------------------------------------------------------------
// IDS
// ---------------------------------------------------------------------------

/// Finite-volume eigenvalue counting curve on `[−N,N]^d`, normalized by
/// `(2N+1)^d`.
#[derive(Clone, Debug, Serialize)]
pub struct IdsCurve {
    pub n: i64,
    pub volume: usize,
    pub energies: Vec<f64>,
    pub counts: Vec<f64>,
    pub eigenvalues: Vec<f64>,
}

impl IdsCurve {
    /// Normalized eigenvalue count in `[e1, e2]`.
    pub fn window(&self, e1: f64, e2: f64) -> f64 {
        let lo = self.eigenvalues.partition_point(|v| *v < e1);
        let hi = self.eigenvalues.partition_point(|v| *v <= e2);
        (hi - lo) as f64 / self.volume as f64
    }
}

/// Full symmetric eigensolve of `R_{[−N,N]^d} A(x) R` and counting on the
/// energy grid.  Requires the self-adjoint flag (eigenvalue counting demands
/// a real spectrum).
pub fn ids_curve(
    spec: &OperatorSpec,
    x: &TorusPoint,
    n: i64,
    energies: &[f64],
) -> Result<IdsCurve> {
    if !spec.self_adjoint {
        return Err(Error::param(
            "spec",
            "eigenvalue counting requires a self-adjoint operator",
        ));
    }
    let region = LatticeRegion::cube(spec.d(), n);
    let rm = assemble(spec, x, 0.0, &region)?;
    let eigenvalues = linalg::sym_eigenvalues(&rm.matrix);
    let volume = region.len();
    let counts = energies
        .iter()
        .map(|e| eigenvalues.partition_point(|v| *v <= *e) as f64 / volume as f64)
        .collect();
    Ok(IdsCurve {
        n,
        volume,
        energies: energies.to_vec(),
        counts,
        eigenvalues,
    })
}

/// Normalized count in one energy window.
pub fn ids_window(spec: &OperatorSpec, x: &TorusPoint, n: i64, e1: f64, e2: f64) -> Result<f64> {
    let curve = ids_curve(spec, x, n, &[])?;
    Ok(curve.window(e1, e2))
}

#[derive(Clone, Debug, Serialize)]
pub struct ModulusRow {
    pub gap: f64,
    /// Largest window count over the phase samples and energy grid.
    pub max_count: f64,
    pub censored: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ModulusReport {
    pub rows: Vec<ModulusRow>,
    /// Fitted `τ̂` in `count ≈ exp(−|log gap|^τ̂)`.
    pub tau_hat: f64,
    pub residual: f64,
}

/// Modulus of continuity of the finite-volume IDS: for each gap the worst
/// window count, then `log(−log count)` regressed on `log|log gap|`.
pub fn ids_modulus(
    spec: &OperatorSpec,
    x_samples: &[TorusPoint],
    n: i64,
    gaps: &[f64],
) -> Result<ModulusReport> {
    if gaps.len() < 4 || gaps.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::param("gaps", "need ≥ 4 strictly decreasing gaps"));
    }
    let curves: Vec<IdsCurve> = x_samples
        .par_iter()
        .map(|x| ids_curve(spec, x, n, &[]))
        .collect::<Result<Vec<_>>>()?;
    let floor = 1.0 / curves[0].volume as f64;
    let e_grid: Vec<f64> = {
        let lo = curves
            .iter()
            .map(|c| *c.eigenvalues.first().unwrap())
            .fold(f64::INFINITY, f64::min);
        let hi = curves
            .iter()
            .map(|c| *c.eigenvalues.last().unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        (0..200).map(|i| lo + (hi - lo) * i as f64 / 199.0).collect()
    };
    let mut rows = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &gap in gaps {
        let mut worst = 0.0f64;
        for c in &curves {
            for &e in &e_grid {
                worst = worst.max(c.window(e - gap / 2.0, e + gap / 2.0));
            }
        }
        let censored = worst == 0.0;
        let count = worst.max(floor);
        rows.push(ModulusRow {
            gap,
            max_count: count,
            censored,
        });
        if !censored && count < 1.0 && gap < 1.0 {
            xs.push((-gap.ln()).ln());
            ys.push((-count.ln()).ln());
        }
    }
    let (tau_hat, residual) = if xs.len() >= 2 {
        let (slope, _b, res) = linalg::linear_fit(&xs, &ys);
        (slope, res)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(ModulusReport {
        rows,
        tau_hat,
        residual,
    })
}

// ---------------------------------------------------------------------------
// Localization profiles
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct LocalizationProfile {
    pub eigenvalue: f64,
    pub peak: Vec<i64>,
    /// Fitted exponential decay rate of `|ψ|` away from the peak
    /// (infinite when the tail is below the fit floor everywhere).
    pub decay_rate: f64,
    pub fit_residual: f64,
    /// ℓ² mass within `mass_radius` of the peak.
    pub mass_near_peak: f64,
    pub mass_radius: i64,
}

/// All eigenpairs of `R_{[−N,N]^d} A(x) R` with per-eigenvector peak and
/// decay fit (restricted to `|n − peak| ≥ N/10`).
pub fn localization_profiles(
    spec: &OperatorSpec,
    x: &TorusPoint,
    n: i64,
) -> Result<Vec<LocalizationProfile>> {
    if !spec.self_adjoint {
        return Err(Error::param("spec", "localization needs a self-adjoint spec"));
    }
    let region = LatticeRegion::cube(spec.d(), n);
    let rm = assemble(spec, x, 0.0, &region)?;
    let (values, vectors) = linalg::sym_eigen_sorted(&rm.matrix);
    let points = region.points();
    let mass_radius = (n + 9) / 10;
    let profiles = (0..values.len())
        .map(|col| {
            let psi = vectors.column(col);
            let peak_idx = (0..psi.len())
                .max_by(|&a, &b| psi[a].abs().total_cmp(&psi[b].abs()))
                .unwrap();
            let peak = points[peak_idx];
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            let mut mass = 0.0f64;
            for (i, p) in points.iter().enumerate() {
                let dist = p.sup_dist(&peak);
                let a = psi[i].abs();
                if dist <= mass_radius {
                    mass += a * a;
                }
                if 10 * dist >= n && a > crate::greens::FIT_FLOOR {
                    xs.push(dist as f64);
                    ys.push(a.ln());
                }
            }
            let (decay_rate, fit_residual) = if xs.len() >= 2 {
                let (slope, _b, res) = linalg::linear_fit(&xs, &ys);
                (-slope, res)
            } else {
                (f64::INFINITY, 0.0)
            };
            LocalizationProfile {
                eigenvalue: values[col],
                peak: peak.coords().to_vec(),
                decay_rate,
                fit_residual,
                mass_near_peak: mass,
                mass_radius,
            }
        })
        .collect();
    Ok(profiles)
}

/// Median decay rate over the middle half of the spectrum — the headline
/// localization statistic.
pub fn median_decay_rate(profiles: &[LocalizationProfile]) -> f64 {
    let m = profiles.len();
    let mut rates: Vec<f64> = profiles[m / 4..m - m / 4]
        .iter()
        .map(|p| p.decay_rate)
        .collect();
    rates.sort_by(|a, b| a.total_cmp(b));
    rates[rates.len() / 2]
}

/// Free-lattice IDS `k(E) = 1 − arccos(E/2)/π` on `[−2,2]` (d = 1).
pub fn free_ids(e: f64) -> f64 {
    if e <= -2.0 {
        0.0
    } else if e >= 2.0 {
        1.0
    } else {
        1.0 - (e / 2.0).acos() / std::f64::consts::PI
    }
}
