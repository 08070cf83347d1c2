//! Discrepancy of finite torus sequences.
//!
//! `b = 1` uses the exact sorted-sample formula for the extreme discrepancy
//! over all intervals; `b = 2` evaluates the counting defect over every
//! axis-aligned box with corners on a uniform grid, with declared one-sided
//! error `b/g`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Dynamics, TorusPoint};
use crate::linalg::linear_fit;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum DiscrepancyMethod {
    Exact1d,
    Grid(usize),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrbitStats {
    pub n: usize,
    pub d_n: f64,
    pub method: DiscrepancyMethod,
    /// One-sided approximation error (0 for the exact method).
    pub uncertainty: f64,
}

/// Extreme discrepancy of scalar samples over all intervals:
/// `D_N = D⁺ + D⁻` with `D⁺ = max_i (i/N − x_(i))`,
/// `D⁻ = max_i (x_(i) − (i−1)/N)` on the sorted sample.
pub fn exact_discrepancy_1d(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty());
    let mut v: Vec<f64> = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len() as f64;
    let mut d_plus = 0.0f64;
    let mut d_minus = 0.0f64;
    for (i, x) in v.iter().enumerate() {
        let i1 = (i + 1) as f64;
        d_plus = d_plus.max(i1 / n - x);
        d_minus = d_minus.max(x - i as f64 / n);
    }
    (d_plus + d_minus).clamp(0.0, 1.0)
}

/// Grid discrepancy for `b ≤ 2`: maximum counting defect over all boxes with
/// corners on the `g`-grid.
pub fn grid_discrepancy(points: &[TorusPoint], g: usize) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::param("points", "empty sequence"));
    }
    let b = points[0].b();
    let n = points.len() as f64;
    match b {
        1 => {
            // prefix counts below each grid line
            let mut cnt = vec![0u32; g + 1];
            for p in points {
                let c = ((p.coords()[0] * g as f64) as usize).min(g - 1);
                cnt[c + 1] += 1;
            }
            for i in 1..=g {
                cnt[i] += cnt[i - 1];
            }
            let mut worst = 0.0f64;
            for i1 in 0..g {
                for i2 in (i1 + 1)..=g {
                    let c = (cnt[i2] - cnt[i1]) as f64 / n;
                    let vol = (i2 - i1) as f64 / g as f64;
                    worst = worst.max((c - vol).abs());
                }
            }
            Ok(worst)
        }
        2 => {
            // 2-D prefix table, then all index rectangles
            let mut grid = vec![0u32; (g + 1) * (g + 1)];
            let at = |i: usize, j: usize| i * (g + 1) + j;
            for p in points {
                let ci = ((p.coords()[0] * g as f64) as usize).min(g - 1);
                let cj = ((p.coords()[1] * g as f64) as usize).min(g - 1);
                grid[at(ci + 1, cj + 1)] += 1;
            }
            for i in 1..=g {
                for j in 1..=g {
                    grid[at(i, j)] =
                        grid[at(i, j)] + grid[at(i - 1, j)] + grid[at(i, j - 1)]
                            - grid[at(i - 1, j - 1)];
                }
            }
            let pairs: Vec<(usize, usize)> = (0..g)
                .flat_map(|i1| ((i1 + 1)..=g).map(move |i2| (i1, i2)))
                .collect();
            let worst = pairs
                .par_iter()
                .map(|&(i1, i2)| {
                    let mut local = 0.0f64;
                    let w = (i2 - i1) as f64 / g as f64;
                    for j1 in 0..g {
                        let base1 = grid[at(i2, j1)] as i64 - grid[at(i1, j1)] as i64;
                        for j2 in (j1 + 1)..=g {
                            let c = (grid[at(i2, j2)] as i64
                                - grid[at(i1, j2)] as i64
                                - base1) as f64
                                / n;
                            let vol = w * (j2 - j1) as f64 / g as f64;
                            local = local.max((c - vol).abs());
                        }
                    }
                    local
                })
                .reduce(|| 0.0f64, f64::max);
            Ok(worst)
        }
        _ => Err(Error::param(
            "method",
            "grid discrepancy is implemented for b ≤ 2",
        )),
    }
}

/// Discrepancy of a point sequence with the chosen method.
pub fn discrepancy(points: &[TorusPoint], method: DiscrepancyMethod) -> Result<OrbitStats> {
    if points.is_empty() {
        return Err(Error::param("points", "empty sequence"));
    }
    let b = points[0].b();
    match method {
        DiscrepancyMethod::Exact1d => {
            if b != 1 {
                return Err(Error::param("method", "exact_1d needs b = 1"));
            }
            let xs: Vec<f64> = points.iter().map(|p| p.coords()[0]).collect();
            Ok(OrbitStats {
                n: points.len(),
                d_n: exact_discrepancy_1d(&xs),
                method,
                uncertainty: 0.0,
            })
        }
        DiscrepancyMethod::Grid(g) => {
            if g < 2 {
                return Err(Error::param("method", "grid resolution must be ≥ 2"));
            }
            Ok(OrbitStats {
                n: points.len(),
                d_n: grid_discrepancy(points, g)?,
                method,
                uncertainty: b as f64 / g as f64,
            })
        }
    }
}

/// Slope of `log D_N` against `log N` along the orbit prefixes, with the
/// least-squares residual so callers can judge the fit.
pub fn fit_discrepancy_exponent(
    dynamics: &Dynamics,
    x0: &TorusPoint,
    n_list: &[usize],
    method: DiscrepancyMethod,
) -> Result<(f64, f64)> {
    if n_list.len() < 3 || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("n_list", "need ≥ 3 strictly increasing sizes"));
    }
    let max_n = *n_list.last().unwrap();
    let pts = dynamics.orbit_sequence(x0, max_n)?;
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    for &n in n_list {
        let st = discrepancy(&pts[..n], method)?;
        lx.push((n as f64).ln());
        ly.push(st.d_n.max(f64::MIN_POSITIVE).ln());
    }
    let (slope, _b, res) = linear_fit(&lx, &ly);
    Ok((slope, res))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::GOLDEN;

    /// O(N²) oracle over all candidate interval endpoints (closed and open
    /// variants, plus the torus edges).
    fn brute_force_1d(xs: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let mut grid: Vec<f64> = xs.to_vec();
        grid.push(0.0);
        grid.push(1.0);
        grid.sort_by(|a, b| a.total_cmp(b));
        grid.dedup();
        let count_closed = |a: f64, b: f64| xs.iter().filter(|&&x| a <= x && x <= b).count();
        let count_open = |a: f64, b: f64| xs.iter().filter(|&&x| a < x && x < b).count();
        let mut worst = 0.0f64;
        for (i, &a) in grid.iter().enumerate() {
            for &b in &grid[i..] {
                let len = b - a;
                worst = worst.max(count_closed(a, b) as f64 / n - len);
                worst = worst.max(len - count_open(a, b) as f64 / n);
            }
        }
        worst
    }

    #[test]
    fn lattice_sequence_has_discrepancy_one_over_n() {
        for n in [5usize, 16, 100] {
            let xs: Vec<f64> = (0..n).map(|k| k as f64 / n as f64).collect();
            let d = exact_discrepancy_1d(&xs);
            assert!((d - 1.0 / n as f64).abs() < 1e-12, "n={n}, d={d}");
        }
    }

    #[test]
    fn formula_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for trial in 0..30 {
            let n = rng.gen_range(1..=60);
            let xs: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let exact = exact_discrepancy_1d(&xs);
            let brute = brute_force_1d(&xs);
            assert!(
                (exact - brute).abs() < 1e-12,
                "trial {trial}: {exact} vs {brute}"
            );
        }
    }

    #[test]
    fn golden_kronecker_is_low_discrepancy() {
        let dynamics = Dynamics::Shift { omega: vec![GOLDEN] };
        let pts = dynamics
            .orbit_sequence(&TorusPoint::zero(1), 1000)
            .unwrap();
        let st = discrepancy(&pts, DiscrepancyMethod::Exact1d).unwrap();
        assert!(1000.0 * st.d_n <= 3.0 * (1000f64).ln(), "N·D_N = {}", 1000.0 * st.d_n);
    }

    #[test]
    fn grid_refinement_stays_within_declared_error() {
        let dynamics = Dynamics::SkewShift { omega: GOLDEN, b: 2 };
        let pts = dynamics
            .orbit_sequence(&TorusPoint::new(&[0.3, 0.7]), 512)
            .unwrap();
        let g = 32;
        let d1 = grid_discrepancy(&pts, g).unwrap();
        let d2 = grid_discrepancy(&pts, 2 * g).unwrap();
        assert!(d2 >= d1 - 1e-12, "finer grid can only see more boxes");
        assert!(d2 - d1 <= 2.0 / g as f64 + 1e-12);
    }

    #[test]
    fn exponent_fit_for_lattice_like_decay() {
        let dynamics = Dynamics::Shift { omega: vec![GOLDEN] };
        let (slope, _res) = fit_discrepancy_exponent(
            &dynamics,
            &TorusPoint::zero(1),
            &[1 << 10, 1 << 12, 1 << 14, 1 << 16],
            DiscrepancyMethod::Exact1d,
        )
        .unwrap();
        assert!(slope <= -0.9, "golden Kronecker exponent {slope}");
    }

    #[test]
    fn rejects_empty_and_mismatched() {
        assert!(discrepancy(&[], DiscrepancyMethod::Exact1d).is_err());
        let p2 = vec![TorusPoint::new(&[0.1, 0.2])];
        assert!(discrepancy(&p2, DiscrepancyMethod::Exact1d).is_err());
    }
}
