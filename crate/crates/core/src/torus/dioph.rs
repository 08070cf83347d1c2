//! Finite-horizon Diophantine certificates.
//!
//! `DC(κ,τ)` demands `‖k·ω‖ ≥ τ/|k|^κ` for all nonzero integer vectors `k`;
//! the strong scalar variant uses the weight `k(1+log k)^κ`.  A certificate
//! here is an exhaustive scan up to `|k| ≤ K_max` — a finite check, not a
//! proof.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{frac, frac_mul};
use crate::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiophantineCertificate {
    pub omega: Vec<f64>,
    pub kappa: f64,
    pub tau: f64,
    pub k_max: i64,
    pub strong: bool,
    /// The minimizing integer vector.
    pub worst_k: Vec<i64>,
    /// `min ‖k·ω‖·weight(k) / τ`; the condition holds on the horizon iff ≥ 1.
    pub margin: f64,
    /// `min ‖k·ω‖·weight(k)`: the largest τ the horizon supports.
    pub best_tau: f64,
}

impl DiophantineCertificate {
    pub fn valid(&self) -> bool {
        self.margin >= 1.0
    }
}

#[inline]
fn dist_to_z(x: f64) -> f64 {
    let f = frac(x);
    f.min(1.0 - f)
}

/// `‖k·ω‖·|k|^κ` minimized over `0 < |k|_∞ ≤ k_max`, multi-index for b > 1.
pub fn certify_diophantine(
    omega: &[f64],
    kappa: f64,
    tau: f64,
    k_max: i64,
) -> Result<DiophantineCertificate> {
    if omega.is_empty() || omega.len() > 4 {
        return Err(Error::param("omega", "need 1 ≤ b ≤ 4"));
    }
    if k_max < 1 {
        return Err(Error::param("k_max", "need K_max ≥ 1"));
    }
    let b = omega.len();
    // per-axis exact fractional parts of k·ω_i
    let tables: Vec<Vec<f64>> = omega
        .iter()
        .map(|&w| {
            (-k_max..=k_max)
                .map(|k| frac_mul(k as i128, w))
                .collect()
        })
        .collect();
    let idx = |k: i64| (k + k_max) as usize;

    // scan k lexicographically over the first axis in parallel
    let best = (-k_max..=k_max)
        .into_par_iter()
        .map(|k0| {
            let mut local: (f64, Vec<i64>) = (f64::INFINITY, vec![]);
            let mut k = vec![0i64; b];
            k[0] = k0;
            scan_rest(&tables, &idx, &mut k, 1, tables[0][idx(k0)], kappa, &mut local);
            local
        })
        .reduce(
            || (f64::INFINITY, vec![]),
            |a, b| {
                if (b.0, &b.1) < (a.0, &a.1) {
                    b
                } else {
                    a
                }
            },
        );

    Ok(DiophantineCertificate {
        omega: omega.to_vec(),
        kappa,
        tau,
        k_max,
        strong: false,
        worst_k: best.1,
        margin: best.0 / tau,
        best_tau: best.0,
    })
}

fn scan_rest(
    tables: &[Vec<f64>],
    idx: &dyn Fn(i64) -> usize,
    k: &mut Vec<i64>,
    axis: usize,
    partial: f64,
    kappa: f64,
    best: &mut (f64, Vec<i64>),
) {
    if axis == tables.len() {
        let norm = k.iter().map(|v| v.abs()).max().unwrap();
        if norm == 0 {
            return;
        }
        let v = dist_to_z(partial) * (norm as f64).powf(kappa);
        if (v, &*k) < (best.0, &best.1) {
            *best = (v, k.clone());
        }
        return;
    }
    let k_max = (tables[axis].len() as i64 - 1) / 2;
    for ka in -k_max..=k_max {
        k[axis] = ka;
        scan_rest(
            tables,
            idx,
            k,
            axis + 1,
            frac(partial + tables[axis][idx(ka)]),
            kappa,
            best,
        );
    }
    k[axis] = 0;
}

/// Strong scalar condition: `‖kω‖ ≥ τ/(k(1+log k)^κ)` for `k ∈ ℕ`.
pub fn certify_strong(omega: f64, kappa: f64, tau: f64, k_max: i64) -> Result<DiophantineCertificate> {
    if k_max < 1 {
        return Err(Error::param("k_max", "need K_max ≥ 1"));
    }
    let best = (1..=k_max)
        .into_par_iter()
        .map(|k| {
            let w = k as f64 * (1.0 + (k as f64).ln()).powf(kappa);
            (dist_to_z(frac_mul(k as i128, omega)) * w, vec![k])
        })
        .reduce(
            || (f64::INFINITY, vec![]),
            |a, b| if (b.0, &b.1) < (a.0, &a.1) { b } else { a },
        );
    Ok(DiophantineCertificate {
        omega: vec![omega],
        kappa,
        tau,
        k_max,
        strong: true,
        worst_k: best.1,
        margin: best.0 / tau,
        best_tau: best.0,
    })
}
