//! Finite-volume Green's functions `G_Λ = (R_Λ(A(x)−E)R_Λ)^{-1}`:
//! inversion with residual diagnostics, good / strongly-good classification,
//! off-diagonal decay fits, resolvent identities, the Schur norm test, and
//! the window-coupling estimates used by the multi-scale induction.

mod coupling;
mod resolvent;

pub use coupling::{
    coupling_check, decay_propagation_check, ml_left_side, CouplingReport,
    DecayPropagationReport,
};
pub use resolvent::{resolvent_residual, schur_norm_bound, ResolventReport};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::lattice::{LatticePoint, LatticeRegion, RegionKind};
use crate::linalg;
use crate::operator::RegionMatrix;
use crate::{Error, Result};

/// Condition number beyond which an inversion is flagged singular.
pub const SINGULAR_CONDITION: f64 = 1e14;

/// Entries below this magnitude are left out of decay fits (underflow zone).
pub const FIT_FLOOR: f64 = 1e-280;

/// Least-squares fit of `log|G(n,n')|` against `|n−n'|^σ̃`, restricted to
/// the far window `|n−n'| ≥ N/10`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DecayFit {
    pub sigma_tilde: f64,
    /// Fitted decay rate `ĉ` (positive for decaying kernels).
    pub rate: f64,
    pub residual: f64,
    pub pairs_used: usize,
}

/// Inverse of a region matrix with norm and decay diagnostics.
#[derive(Clone, Debug)]
pub struct GreensResult {
    pub region: LatticeRegion,
    pub x: crate::torus::TorusPoint,
    pub energy: f64,
    pub spec_hash: u64,
    pub inverse: Option<DMatrix<f64>>,
    /// 2-norm estimate of the inverse (power iteration, 1% tolerance).
    pub op_norm: f64,
    pub singular: bool,
    /// `‖A_Λ G_Λ − I‖_max` for the residual contract.
    pub inv_residual: f64,
    pub decay: Option<DecayFit>,
}

/// Reference size of a region: the shape size for elementary regions,
/// half the diameter otherwise.
pub fn region_size(region: &LatticeRegion) -> i64 {
    match region.kind() {
        RegionKind::Elementary { shape, .. } => shape.size(),
        _ => (region.diam() + 1) / 2,
    }
}

/// Invert a region matrix.  A result flagged `singular` means the caller
/// must treat the phase point as bad; it is not an error.
pub fn greens(rm: &RegionMatrix, sigma_tilde: f64) -> GreensResult {
    let diag = linalg::invert(&rm.matrix);
    let (inverse, singular, op_norm, inv_residual) = match diag.inverse {
        Some(inv) => {
            let norm = linalg::op_norm(&inv);
            let bad = diag.condition > SINGULAR_CONDITION
                || !diag.residual.is_finite()
                || diag.residual > 1e-8 * norm.max(1.0);
            (Some(inv), bad, norm, diag.residual)
        }
        None => (None, true, f64::INFINITY, f64::NAN),
    };
    let decay = inverse.as_ref().map(|inv| {
        fit_decay(
            inv,
            rm.region.points(),
            sigma_tilde,
            region_size(&rm.region),
        )
    });
    GreensResult {
        region: rm.region.clone(),
        x: rm.x,
        energy: rm.energy,
        spec_hash: rm.spec_hash,
        inverse,
        op_norm,
        singular,
        inv_residual,
        decay,
    }
}

/// Fit `log|G|` against `dist^σ̃` over the far pairs `10·dist ≥ N`.
/// Entries at or below the underflow floor are excluded.
pub fn fit_decay(
    inv: &DMatrix<f64>,
    points: &[LatticePoint],
    sigma_tilde: f64,
    n_ref: i64,
) -> DecayFit {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..points.len() {
        for j in 0..points.len() {
            if i == j {
                continue;
            }
            let dist = points[i].sup_dist(&points[j]);
            if 10 * dist < n_ref {
                continue;
            }
            let g = inv[(i, j)].abs();
            if g > FIT_FLOOR {
                xs.push((dist as f64).powf(sigma_tilde));
                ys.push(g.ln());
            }
        }
    }
    if xs.len() < 2 {
        // nothing measurable in the window: decays faster than the floor
        return DecayFit {
            sigma_tilde,
            rate: f64::INFINITY,
            residual: 0.0,
            pairs_used: xs.len(),
        };
    }
    let (slope, _b, residual) = linalg::linear_fit(&xs, &ys);
    DecayFit {
        sigma_tilde,
        rate: -slope,
        residual,
        pairs_used: xs.len(),
    }
}

/// Parameters of the good / strongly-good tests.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ClassifyParams {
    /// Region size `N` the tests are scored against.
    pub n: i64,
    /// Norm exponent: strongly good requires `‖G‖ ≤ e^{N^σ}`.
    pub sigma: f64,
    pub sigma_tilde: f64,
    /// Pointwise decay rate.
    pub c2: f64,
    /// Hopping decay constant; caps `c2` at `(1−5^{−σ̃})·c1`.
    pub c1: f64,
}

impl ClassifyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.n >= 1) {
            return Err(Error::param("n", "region size must be ≥ 1"));
        }
        if !(self.sigma > 0.0 && self.sigma < self.sigma_tilde && self.sigma_tilde <= 1.0) {
            return Err(Error::param("sigma", "need 0 < σ < σ̃ ≤ 1"));
        }
        let cap = (1.0 - 5.0f64.powf(-self.sigma_tilde)) * self.c1;
        if !(self.c2 > 0.0 && self.c2 <= cap) {
            return Err(Error::param(
                "c2",
                format!("need 0 < c2 ≤ (1−5^{{−σ̃}})c1 = {cap}, got {}", self.c2),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Classification {
    pub is_g: bool,
    pub is_sg: bool,
    /// Worst far pair for the pointwise test and its log-scale excess
    /// `log|G| + c2·dist^σ̃` (positive = violation).
    pub worst_pair: Option<(Vec<i64>, Vec<i64>)>,
    pub worst_excess: f64,
    /// `log ‖G‖` and the bound `N^σ`, kept in log scale.
    pub log_norm: f64,
    pub log_norm_bound: f64,
}

/// Class-G / class-SG test: pointwise decay `|G(n,n')| ≤ e^{−c2|n−n'|^σ̃}`
/// for `|n−n'| ≥ N/10`, plus the norm bound `‖G‖ ≤ e^{N^σ}` for SG.
pub fn classify(g: &GreensResult, params: &ClassifyParams) -> Result<Classification> {
    params.validate()?;
    let log_norm_bound = (params.n as f64).powf(params.sigma);
    if g.singular || g.inverse.is_none() {
        return Ok(Classification {
            is_g: false,
            is_sg: false,
            worst_pair: None,
            worst_excess: f64::INFINITY,
            log_norm: f64::INFINITY,
            log_norm_bound,
        });
    }
    let inv = g.inverse.as_ref().unwrap();
    let points = g.region.points();
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_pair = None;
    for i in 0..points.len() {
        for j in 0..points.len() {
            if i == j {
                continue;
            }
            let dist = points[i].sup_dist(&points[j]);
            if 10 * dist < params.n {
                continue;
            }
            let v = inv[(i, j)].abs().max(f64::MIN_POSITIVE);
            let excess = v.ln() + params.c2 * (dist as f64).powf(params.sigma_tilde);
            if excess > worst_excess {
                worst_excess = excess;
                worst_pair = Some((
                    points[i].coords().to_vec(),
                    points[j].coords().to_vec(),
                ));
            }
        }
    }
    if worst_pair.is_none() {
        // no far pairs (tiny region): the pointwise condition is vacuous
        worst_excess = f64::NEG_INFINITY;
    }
    let is_g = worst_excess <= 0.0;
    let log_norm = g.op_norm.ln();
    let is_sg = is_g && log_norm <= log_norm_bound;
    Ok(Classification {
        is_g,
        is_sg,
        worst_pair,
        worst_excess,
        log_norm,
        log_norm_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{assemble, OperatorSpec, PotentialSpec};
    use crate::torus::{TorusPoint, GOLDEN};

    fn free_matrix(n: i64, energy: f64) -> RegionMatrix {
        let spec = OperatorSpec::opapp1(&[GOLDEN], PotentialSpec::zero()).unwrap();
        let region = LatticeRegion::cube(1, n);
        assemble(&spec, &TorusPoint::zero(1), energy, &region).unwrap()
    }

    #[test]
    fn identity_inverse_and_norm() {
        let mut rm = free_matrix(3, 0.0);
        rm.matrix = DMatrix::identity(7, 7);
        let g = greens(&rm, 1.0);
        assert!(!g.singular);
        assert!((g.op_norm - 1.0).abs() < 1e-10);
        assert_eq!(g.inverse.unwrap(), DMatrix::identity(7, 7));
    }

    #[test]
    fn zero_row_flags_singular() {
        let mut rm = free_matrix(3, 0.0);
        rm.matrix.set_row(2, &nalgebra::RowDVector::zeros(7).into());
        let g = greens(&rm, 1.0);
        assert!(g.singular);
    }

    #[test]
    fn free_resolvent_rate_matches_closed_form() {
        // (Δ − E)⁻¹ off the spectrum decays at rate −ln r, r the root of
        // z + 1/z = E inside the unit disk; at E = 3, r = (3 − √5)/2
        let rm = free_matrix(120, 3.0);
        let g = greens(&rm, 1.0);
        assert!(!g.singular);
        let r = (3.0 - 5.0f64.sqrt()) / 2.0;
        let expect = -r.ln();
        let rate = g.decay.unwrap().rate;
        assert!(
            (rate - expect).abs() <= 0.02 * expect,
            "rate {rate} vs {expect}"
        );
    }

    #[test]
    fn diagonal_matrix_classifies_good() {
        let mut rm = free_matrix(10, 0.0);
        rm.matrix = DMatrix::identity(21, 21);
        let g = greens(&rm, 1.0);
        let params = ClassifyParams {
            n: 10,
            sigma: 0.5,
            sigma_tilde: 1.0,
            c2: 0.5,
            c1: 3.0,
        };
        let c = classify(&g, &params).unwrap();
        assert!(c.is_g && c.is_sg);
    }

    #[test]
    fn classify_rejects_c2_beyond_cap() {
        let rm = free_matrix(5, 3.0);
        let g = greens(&rm, 1.0);
        let params = ClassifyParams {
            n: 5,
            sigma: 0.5,
            sigma_tilde: 1.0,
            c2: 3.0,
            c1: 3.0,
        };
        assert!(classify(&g, &params).is_err());
    }

    #[test]
    fn classify_monotone_in_c2() {
        let spec = OperatorSpec::almost_mathieu(10.0, GOLDEN);
        let region = LatticeRegion::cube(1, 30);
        for k in 0..10 {
            let x = TorusPoint::new(&[k as f64 / 10.0 + 0.013]);
            let rm = assemble(&spec, &x, 0.0, &region).unwrap();
            let g = greens(&rm, 1.0);
            let base = ClassifyParams {
                n: 30,
                sigma: 0.5,
                sigma_tilde: 1.0,
                c2: 0.5 * 10f64.ln(),
                c1: 10f64.ln(),
            };
            let at = |c2: f64| {
                classify(&g, &ClassifyParams { c2, ..base }).unwrap().is_g
            };
            if at(base.c2) {
                assert!(at(base.c2 * 0.5));
                assert!(at(base.c2 * 0.1));
            }
        }
    }

    #[test]
    fn amo_strong_coupling_mostly_good() {
        // λ=10 preset at N=60, E=0: classification holds for ≥ 90% of 200
        // uniform phases (value established by this sweep)
        let spec = OperatorSpec::almost_mathieu(10.0, GOLDEN);
        let region = LatticeRegion::cube(1, 60);
        let params = ClassifyParams {
            n: 60,
            sigma: 0.5,
            sigma_tilde: 1.0,
            c2: 0.5 * 10f64.ln(),
            c1: 10f64.ln(),
        };
        let count = (0..200)
            .filter(|k| {
                let x = TorusPoint::new(&[(*k as f64 + 0.5) / 200.0]);
                let rm = assemble(&spec, &x, 0.0, &region).unwrap();
                let g = greens(&rm, 1.0);
                classify(&g, &params).unwrap().is_sg
            })
            .count();
        assert!(count >= 180, "only {count}/200 strongly good");

        // weaker coupling: strictly smaller good fraction
        let weak = OperatorSpec::almost_mathieu(1.0, GOLDEN);
        let weak_params = ClassifyParams {
            c2: 0.5 * 10f64.ln(),
            c1: 3.0,
            ..params
        };
        let weak_count = (0..200)
            .filter(|k| {
                let x = TorusPoint::new(&[(*k as f64 + 0.5) / 200.0]);
                let rm = assemble(&weak, &x, 0.0, &region).unwrap();
                let g = greens(&rm, 1.0);
                classify(&g, &weak_params).unwrap().is_sg
            })
            .count();
        assert!(weak_count < count, "λ=1 gave {weak_count} ≥ λ=10's {count}");
    }
}
