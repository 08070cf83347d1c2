//! Block Schur complements with the inversion sandwich, and grid
//! measurement of the parameter set where an analytic matrix family has a
//! huge inverse.
//!
//! The block convention puts the removable index set `V` at the trailing
//! positions: `T1` is the complement block, `T4 = R_V T R_V`, and
//! `S = T4 − T3·T1⁻¹·T2`, so `S⁻¹` is literally the `V×V` block of `T⁻¹`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::linalg;
use crate::{Error, Result};

/// Audited absolute constant for the upper sandwich inequality
/// `‖T⁻¹‖ ≤ C(1+‖T₂‖)(1+‖T₃‖)(1+‖T₁⁻¹‖)²(1+‖S⁻¹‖)`; the observed ratio is
/// reported on every call.
pub const SANDWICH_CONSTANT: f64 = 8.0;

#[derive(Clone, Debug, Serialize)]
pub struct SchurReport {
    pub n: usize,
    pub v_len: usize,
    pub singular_t: bool,
    pub singular_s: bool,
    /// `max|T⁻¹[V,V] − S⁻¹| / max|S⁻¹|` (NaN when either is singular).
    pub subblock_relative_residual: f64,
    pub t_inv_norm: f64,
    pub s_inv_norm: f64,
    /// `‖T⁻¹‖ / ((1+‖T₂‖)(1+‖T₃‖)(1+‖T₁⁻¹‖)²(1+‖S⁻¹‖))`; at most
    /// `SANDWICH_CONSTANT` empirically.
    pub upper_ratio: f64,
}

pub struct SchurSplit {
    pub s: DMatrix<f64>,
    pub report: SchurReport,
}

/// Form the Schur complement of `t` over the index set `v` and verify the
/// sandwich.  `T1` singular is an error; `T` and `S` singularity flags must
/// agree and both sides are reported.
pub fn schur_complement(t: &DMatrix<f64>, v: &[usize]) -> Result<SchurSplit> {
    let n = t.nrows();
    if t.ncols() != n {
        return Err(Error::param("t", "matrix must be square"));
    }
    let mut in_v = vec![false; n];
    for &i in v {
        if i >= n {
            return Err(Error::param("v", "index out of range"));
        }
        if std::mem::replace(&mut in_v[i], true) {
            return Err(Error::param("v", "duplicate index"));
        }
    }
    let vc: Vec<usize> = (0..n).filter(|i| !in_v[*i]).collect();
    let vs: Vec<usize> = (0..n).filter(|i| in_v[*i]).collect();
    if vs.is_empty() || vc.is_empty() {
        return Err(Error::param("v", "V must be a nonempty proper subset"));
    }
    let sub = |rows: &[usize], cols: &[usize]| {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| t[(rows[i], cols[j])])
    };
    let t1 = sub(&vc, &vc);
    let t2 = sub(&vc, &vs);
    let t3 = sub(&vs, &vc);
    let t4 = sub(&vs, &vs);

    let d1 = linalg::invert(&t1);
    let t1_inv = match d1.inverse {
        Some(inv) if d1.condition <= crate::greens::SINGULAR_CONDITION => inv,
        _ => return Err(Error::Singular("T1".into())),
    };
    let s = &t4 - &t3 * &t1_inv * &t2;

    let dt = linalg::invert(t);
    let ds = linalg::invert(&s);
    let singular_t =
        dt.inverse.is_none() || dt.condition > crate::greens::SINGULAR_CONDITION;
    let singular_s =
        ds.inverse.is_none() || ds.condition > crate::greens::SINGULAR_CONDITION;

    let (subblock_relative_residual, t_inv_norm, s_inv_norm, upper_ratio) =
        match (&dt.inverse, &ds.inverse) {
            (Some(ti), Some(si)) if !singular_t && !singular_s => {
                let mut worst = 0.0f64;
                let mut scale = 0.0f64;
                for (bi, &i) in vs.iter().enumerate() {
                    for (bj, &j) in vs.iter().enumerate() {
                        worst = worst.max((ti[(i, j)] - si[(bi, bj)]).abs());
                        scale = scale.max(si[(bi, bj)].abs());
                    }
                }
                let tn = linalg::op_norm_svd(ti);
                let sn = linalg::op_norm_svd(si);
                let denom = (1.0 + linalg::op_norm_svd(&t2))
                    * (1.0 + linalg::op_norm_svd(&t3))
                    * (1.0 + linalg::op_norm_svd(&t1_inv)).powi(2)
                    * (1.0 + sn);
                (worst / scale.max(f64::MIN_POSITIVE), tn, sn, tn / denom)
            }
            _ => (f64::NAN, f64::INFINITY, f64::INFINITY, f64::NAN),
        };

    Ok(SchurSplit {
        s,
        report: SchurReport {
            n,
            v_len: vs.len(),
            singular_t,
            singular_s,
            subblock_relative_residual,
            t_inv_norm,
            s_inv_norm,
            upper_ratio,
        },
    })
}

// ---------------------------------------------------------------------------
// Measure of the large-inverse parameter set
// ---------------------------------------------------------------------------

/// Constants of the large-inverse measure estimate.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CartanParams {
    /// Parameter dimension `J` (1 or 2 supported by the grid scan).
    pub j_dim: usize,
    /// Real box radius: parameters range over `[−δ/2, δ/2]^J`.
    pub delta: f64,
    /// Imaginary radius of the holomorphic extension (metadata).
    pub delta1: f64,
    /// `sup ‖T(x)‖` over the complex box.
    pub b1: f64,
    /// Bound on `‖(R_{V^c} T R_{V^c})⁻¹‖`.
    pub b2: f64,
    /// Inverse bound available at some good point.
    pub b3: f64,
    /// Cap on the removable-set size.
    pub m_removable: usize,
}

impl CartanParams {
    /// `log(1/ε)` must exceed this for the measure bound to be claimed:
    /// `ε ≤ (1+B1+B2)^{−10M}`.
    pub fn log_epsilon_floor(&self) -> f64 {
        10.0 * self.m_removable as f64 * (1.0 + self.b1 + self.b2).ln()
    }
}

/// An analytic one/two-parameter matrix family with a removable block.
pub trait CartanFamily: Sync {
    fn eval(&self, x: &[f64]) -> DMatrix<f64>;
    /// Removable index set `V(x)` claimed to satisfy the `B2` bound.
    fn removable(&self, x: &[f64]) -> Vec<usize>;
    fn params(&self) -> CartanParams;
}

/// `T(x) = diag(sin 2πx − a_i)`: the scalar model family whose bad set is a
/// union of arcs around the level crossings.
pub struct DiagSineFamily {
    pub levels: Vec<f64>,
}

impl CartanFamily for DiagSineFamily {
    fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        let s = (std::f64::consts::TAU * x[0]).sin();
        DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.levels.len(),
            self.levels.iter().map(|a| s - a),
        ))
    }

    fn removable(&self, x: &[f64]) -> Vec<usize> {
        let s = (std::f64::consts::TAU * x[0]).sin();
        let nearest = self
            .levels
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| (s - **a).abs().total_cmp(&(s - **b).abs()))
            .map(|(i, _)| i)
            .unwrap();
        vec![nearest]
    }

    fn params(&self) -> CartanParams {
        // min separation between levels controls the complement bound
        let mut sorted = self.levels.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let min_gap = sorted
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        CartanParams {
            j_dim: 1,
            delta: 1.0,
            delta1: 0.1,
            b1: 1.0 + self.levels.iter().fold(0.0f64, |a, x| a.max(x.abs())) + 1.0,
            b2: 2.0 / min_gap,
            b3: 2.0 / min_gap,
            m_removable: 1,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CartanRow {
    pub epsilon: f64,
    pub measure: f64,
    /// Fitted envelope `C·δ^J·exp(−c·((log 1/ε)/(M log(B1+B2+B3)))^{1/J})`.
    pub bound_rhs: f64,
    /// ε below the `(1+B1+B2)^{−10M}` floor is required for the bound;
    /// rows above the floor are informational.
    pub below_floor: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CartanSweep {
    pub rows: Vec<CartanRow>,
    pub grid: usize,
    /// Fitted decay constant of the envelope; positive when the bad set
    /// shrinks at the predicted functional rate.
    pub fitted_c: f64,
    pub fitted_log_c: f64,
    /// Fraction of sampled grid points whose removable complement violated
    /// the `B2` bound (hypothesis check).
    pub b2_violation_fraction: f64,
    /// Measured `mes{‖T⁻¹‖ ≥ B3}` against the density hypothesis threshold.
    pub b3_level_measure: f64,
    pub b3_level_allowed: f64,
    pub hypothesis_ok: bool,
}

/// Grid measurement of `mes{x ∈ [−δ/2,δ/2]^J : ‖T⁻¹(x)‖ ≥ 1/ε}` for each ε
/// in a decreasing list.  The sweep is deterministic; bad sets are nested
/// across ε by construction.
pub fn cartan_measure(
    family: &dyn CartanFamily,
    eps_list: &[f64],
    grid: usize,
) -> Result<CartanSweep> {
    let p = family.params();
    if p.j_dim != 1 {
        return Err(Error::param("family", "grid scan supports J = 1"));
    }
    if eps_list.is_empty() || eps_list.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::param("eps_list", "need a decreasing ε list"));
    }
    let delta = p.delta;
    let xs: Vec<f64> = (0..grid)
        .map(|i| -delta / 2.0 + (i as f64 + 0.5) * delta / grid as f64)
        .collect();

    // one pass: log‖T⁻¹‖ per grid point, plus sampled hypothesis checks
    let b2_stride = (grid / 512).max(1);
    let results: Vec<(f64, Option<bool>)> = xs
        .par_iter()
        .enumerate()
        .map(|(i, &x)| {
            let t = family.eval(&[x]);
            let d = linalg::invert(&t);
            let log_inv = match d.inverse {
                Some(inv) => linalg::op_norm(&inv).ln(),
                None => f64::INFINITY,
            };
            let b2_ok = if i % b2_stride == 0 {
                let v = family.removable(&[x]);
                if v.len() > p.m_removable {
                    Some(false)
                } else {
                    let n = t.nrows();
                    let keep: Vec<usize> = (0..n).filter(|j| !v.contains(j)).collect();
                    let sub = DMatrix::from_fn(keep.len(), keep.len(), |a, b| {
                        t[(keep[a], keep[b])]
                    });
                    let ds = linalg::invert(&sub);
                    Some(match ds.inverse {
                        Some(inv) => linalg::op_norm(&inv) <= p.b2 * (1.0 + 1e-9),
                        None => false,
                    })
                }
            } else {
                None
            };
            (log_inv, b2_ok)
        })
        .collect();

    let cell = delta / grid as f64;
    let measure_at = |log_eps_inv: f64| {
        results.iter().filter(|(l, _)| *l >= log_eps_inv).count() as f64 * cell
    };

    let b2_checked = results.iter().filter(|(_, b)| b.is_some()).count();
    let b2_bad = results
        .iter()
        .filter(|(_, b)| matches!(b, Some(false)))
        .count();
    let b2_violation_fraction = b2_bad as f64 / b2_checked.max(1) as f64;

    let b3_level_measure = measure_at(p.b3.ln());
    let b3_level_allowed = 10f64.powi(-(3 * p.j_dim as i32))
        * (p.j_dim as f64).powi(-(p.j_dim as i32))
        * p.delta1.powi(p.j_dim as i32)
        * (1.0 + p.b1).powi(-(p.j_dim as i32))
        * (1.0 + p.b2).powi(-(p.j_dim as i32));

    let log_floor = p.log_epsilon_floor();
    let m_logb = p.m_removable as f64 * (p.b1 + p.b2 + p.b3).ln();
    let mut t_pred = Vec::new();
    let mut log_meas = Vec::new();
    let mut rows: Vec<(f64, f64, bool)> = Vec::new();
    for &eps in eps_list {
        let log_eps_inv = -eps.ln();
        let m = measure_at(log_eps_inv);
        let below_floor = log_eps_inv >= log_floor;
        rows.push((eps, m, below_floor));
        if m > 0.0 {
            t_pred.push((log_eps_inv / m_logb).powf(1.0 / p.j_dim as f64));
            log_meas.push(m.ln());
        }
    }
    let (fitted_c, fitted_log_c) = if t_pred.len() >= 2 {
        let (slope, intercept, _res) = linalg::linear_fit(&t_pred, &log_meas);
        (-slope, intercept)
    } else {
        (f64::NAN, f64::NAN)
    };

    let rows = rows
        .into_iter()
        .map(|(epsilon, measure, below_floor)| {
            let t = (-epsilon.ln() / m_logb).powf(1.0 / p.j_dim as f64);
            CartanRow {
                epsilon,
                measure,
                bound_rhs: if fitted_c.is_nan() {
                    f64::NAN
                } else {
                    (fitted_log_c - fitted_c * t).exp()
                },
                below_floor,
            }
        })
        .collect();

    Ok(CartanSweep {
        rows,
        grid,
        fitted_c,
        fitted_log_c,
        b2_violation_fraction,
        b3_level_measure,
        b3_level_allowed,
        hypothesis_ok: b2_violation_fraction == 0.0 && b3_level_measure <= b3_level_allowed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_matrix(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn block_diagonal_schur_is_the_block() {
        let mut t = DMatrix::<f64>::identity(6, 6);
        t[(4, 4)] = 3.0;
        t[(5, 5)] = 5.0;
        t[(4, 5)] = 1.0;
        let split = schur_complement(&t, &[4, 5]).unwrap();
        assert_eq!(split.s[(0, 0)], 3.0);
        assert_eq!(split.s[(0, 1)], 1.0);
        assert_eq!(split.s[(1, 1)], 5.0);
        assert!(split.report.subblock_relative_residual < 1e-12);
    }

    #[test]
    fn two_by_two_closed_form() {
        // T = [[a,b],[c,d]], V = {1}: S = d − cb/a and T⁻¹(1,1) = a/(ad−bc)
        let (a, b, c, d) = (2.0, 3.0, 5.0, 7.0);
        let t = DMatrix::from_row_slice(2, 2, &[a, b, c, d]);
        let split = schur_complement(&t, &[1]).unwrap();
        let s = d - c * b / a;
        assert!((split.s[(0, 0)] - s).abs() < 1e-14);
        assert!((1.0 / s - a / (a * d - b * c)).abs() < 1e-14);
        assert!(split.report.subblock_relative_residual < 1e-12);
    }

    #[test]
    fn random_sandwich_and_singularity_agreement() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        let mut max_ratio = 0.0f64;
        for _ in 0..100 {
            let t = random_matrix(&mut rng, 40);
            let v: Vec<usize> = (0..8).map(|k| 5 * k).collect();
            let split = schur_complement(&t, &v).unwrap();
            assert_eq!(split.report.singular_t, split.report.singular_s);
            if !split.report.singular_t {
                assert!(split.report.subblock_relative_residual <= 1e-10);
                assert!(
                    split.report.s_inv_norm <= split.report.t_inv_norm * (1.0 + 1e-12)
                );
                max_ratio = max_ratio.max(split.report.upper_ratio);
            }
        }
        assert!(
            max_ratio <= SANDWICH_CONSTANT,
            "observed sandwich ratio {max_ratio}"
        );
    }

    #[test]
    fn constructed_singular_t_gives_singular_s() {
        // rank-deficient T with invertible T1
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let mut t = random_matrix(&mut rng, 10);
        let last = t.row(8) + t.row(7);
        t.set_row(9, &last.into());
        let split = schur_complement(&t, &[8, 9]).unwrap();
        assert!(split.report.singular_t);
        assert!(split.report.singular_s);
    }

    #[test]
    fn scalar_family_measure_is_linear_in_eps() {
        // T(x) = x·I on J=1: the bad set is the interval |x| < ε
        struct Scalar;
        impl CartanFamily for Scalar {
            fn eval(&self, x: &[f64]) -> DMatrix<f64> {
                DMatrix::from_element(1, 1, x[0])
            }
            fn removable(&self, _x: &[f64]) -> Vec<usize> {
                vec![]
            }
            fn params(&self) -> CartanParams {
                CartanParams {
                    j_dim: 1,
                    delta: 1.0,
                    delta1: 0.5,
                    b1: 1.0,
                    b2: 1.0,
                    b3: 100.0,
                    m_removable: 1,
                }
            }
        }
        // removable must be nonempty for the B2 subblock check; V = {} means
        // the whole matrix must already be bounded, which fails near 0, so
        // accept a nonzero violation fraction and only check the measures
        let sweep = cartan_measure(&Scalar, &[1e-1, 1e-2, 1e-3], 200_000).unwrap();
        for (row, eps) in sweep.rows.iter().zip([1e-1, 1e-2, 1e-3]) {
            assert!(
                (row.measure - 2.0 * eps).abs() <= 2.0 / 200_000.0 + 1e-12,
                "ε={eps}: measure {}",
                row.measure
            );
        }
    }

    #[test]
    fn diag_sine_family_monotone_and_enveloped() {
        let family = DiagSineFamily {
            levels: vec![-0.8, -0.4, 0.0, 0.4, 0.8],
        };
        let eps: Vec<f64> = (1..=6).map(|k| 10f64.powi(-k)).collect();
        let sweep = cartan_measure(&family, &eps, 400_000).unwrap();
        for w in sweep.rows.windows(2) {
            assert!(w[1].measure <= w[0].measure + 1e-15, "monotone in ε");
        }
        assert!(sweep.fitted_c > 0.0, "fitted c = {}", sweep.fitted_c);
        assert!(sweep.b2_violation_fraction == 0.0);
    }
}
