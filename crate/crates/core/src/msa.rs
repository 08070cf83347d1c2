//! The multi-scale induction engine: geometric scale schedules, per-scale
//! good/bad classification of sampled elementary regions, bad-family
//! packing counts against the sublinear budget, norm checks on generalized
//! regions, and the end-to-end decay propagation verdict.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::greens::{classify, fit_decay, greens, ClassifyParams, SINGULAR_CONDITION};
use crate::lattice::{
    enumerate_elementary_shapes, find_window, ElementaryShape, Exhaustion, LatticePoint,
    LatticeRegion, Rect,
};
use crate::linalg;
use crate::operator::{assemble_capped, OperatorSpec, RegionMatrix};
use crate::torus::TorusPoint;
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Schedules
// ---------------------------------------------------------------------------

/// Geometric scale ladder `M_{j+1} = ⌊M_j^ρ⌋` snapped to `N` at the top.
#[derive(Clone, Debug, Serialize)]
pub struct ScaleSchedule {
    pub m0: i64,
    pub rho: f64,
    pub n: i64,
    pub sigma: f64,
    pub sigma_tilde: f64,
    pub scales: Vec<i64>,
    /// Bad-annulus fraction threshold `N^{−δ'}` with the proof's δ'.
    pub kappa_bad: f64,
    pub delta_prime: f64,
    pub varsigma: f64,
}

/// Build the schedule; `ρ` must lie strictly inside `(1, 1+σ̃−σ)` (which
/// forces `ρσ < σ̃`), and the last exponent is adjusted so the final scale
/// is exactly `N`.
pub fn schedule(
    m0: i64,
    rho: f64,
    n: i64,
    sigma: f64,
    sigma_tilde: f64,
    varsigma: f64,
) -> Result<ScaleSchedule> {
    if !(sigma > 0.0 && sigma < sigma_tilde && sigma_tilde <= 1.0) {
        return Err(Error::param("sigma", "need 0 < σ < σ̃ ≤ 1"));
    }
    if !(rho > 1.0 && rho < 1.0 + sigma_tilde - sigma) {
        return Err(Error::param("rho", "need ρ strictly inside (1, 1+σ̃−σ)"));
    }
    if !(0.0 < varsigma && varsigma < 1.0) {
        return Err(Error::param("varsigma", "need ς ∈ (0,1)"));
    }
    if m0 < 2 || m0 > n {
        return Err(Error::param("m0", "need 2 ≤ M0 ≤ N"));
    }
    debug_assert!(rho * sigma < sigma_tilde);
    let mut scales = vec![m0];
    let mut m = m0;
    while m < n {
        let next = (m as f64).powf(rho).floor() as i64;
        if next <= m {
            return Err(Error::param("m0", "schedule stalls: M^ρ does not grow"));
        }
        if next >= n {
            scales.push(n);
            break;
        }
        scales.push(next);
        m = next;
    }
    let xi = (m0 as f64).ln() / (n as f64).ln();
    let delta_prime = if m0 == n {
        0.0
    } else {
        0.5 * (1.0 - varsigma) * rho.ln() / (1.0 / xi).ln()
    };
    let kappa_bad = (n as f64).powf(-delta_prime);
    Ok(ScaleSchedule {
        m0,
        rho,
        n,
        sigma,
        sigma_tilde,
        scales,
        kappa_bad,
        delta_prime,
        varsigma,
    })
}

/// Pairwise-disjoint bad-region budget at size `M` inside `[−N,N]^d`:
/// `N^ς / M` (with `ς = 1−ε` this is `N^{1−ξ−ε}` at `M = N^ξ`).
pub fn bad_budget(n: i64, varsigma: f64, m: i64) -> f64 {
    (n as f64).powf(varsigma) / m as f64
}

/// The theoretical decay-rate ladder, mirroring the induction's functional
/// form with the crate's fixed constants (200, 300d):
/// `γ_{j+1} = γ_j(1 − 200κσ̃ − 300dκρ·γ_j⁻¹·log M_j / M_j^{1−ρ+σ̃−σ})`,
/// clamped to stay in `[0, γ_j]`.
pub fn rate_ladder(
    c2: f64,
    kappa: f64,
    rho: f64,
    sigma: f64,
    sigma_tilde: f64,
    d: usize,
    scales: &[i64],
) -> Vec<f64> {
    let mut out = Vec::with_capacity(scales.len());
    let mut gamma = c2;
    out.push(gamma);
    for &m in &scales[..scales.len().saturating_sub(1)] {
        let mf = m as f64;
        let loss = 200.0 * kappa * sigma_tilde
            + 300.0 * d as f64 * kappa * rho * (mf.ln() / mf.powf(1.0 - rho + sigma_tilde - sigma))
                / gamma.max(f64::MIN_POSITIVE);
        let factor = (1.0 - loss).clamp(0.0, 1.0);
        gamma *= factor;
        out.push(gamma);
    }
    out
}

// ---------------------------------------------------------------------------
// Annulus classification
// ---------------------------------------------------------------------------

/// Per-annulus good/bad flags: an annulus is good when every point has a
/// size-M window inside it whose Green's function decays pointwise at rate
/// `c2` (singular inversions count as bad).  Window inversions are cached
/// across annuli of the same `(x, E)` assembly.
pub fn classify_annuli(
    spec: &OperatorSpec,
    x: &TorusPoint,
    energy: f64,
    exhaustion: &Exhaustion,
    m: i64,
    c2: f64,
    sigma_tilde: f64,
) -> Result<Vec<bool>> {
    let rm = assemble_capped(
        spec,
        x,
        energy,
        &exhaustion.base,
        crate::operator::DEFAULT_SIZE_CAP,
    )?;
    let mut cache: std::collections::HashMap<(ElementaryShape, LatticePoint), bool> =
        std::collections::HashMap::new();
    let mut window_good = |w: &crate::lattice::Window| -> bool {
        let key = (w.shape, w.center);
        if let Some(&hit) = cache.get(&key) {
            return hit;
        }
        let good = (|| {
            let idx: Option<Vec<usize>> = w
                .points()
                .iter()
                .map(|p| rm.region.index_of(p))
                .collect();
            let idx = idx?;
            let sub = DMatrix::from_fn(idx.len(), idx.len(), |i, j| {
                rm.matrix[(idx[i], idx[j])]
            });
            let d = linalg::invert(&sub);
            let inv = d.inverse?;
            if d.condition > SINGULAR_CONDITION {
                return None;
            }
            let pts = w.points();
            for i in 0..pts.len() {
                for j in 0..pts.len() {
                    let dist = pts[i].sup_dist(&pts[j]);
                    if 10 * dist < m {
                        continue;
                    }
                    if inv[(i, j)].abs()
                        > (-c2 * (dist as f64).powf(sigma_tilde)).exp()
                    {
                        return None;
                    }
                }
            }
            Some(true)
        })()
        .unwrap_or(false);
        cache.insert(key, good);
        good
    };

    let mut flags = Vec::with_capacity(exhaustion.annuli.len());
    for annulus in &exhaustion.annuli {
        let mut good = true;
        for y in annulus.points() {
            if find_window(annulus, y, m, &mut window_good).is_none() {
                good = false;
                break;
            }
        }
        flags.push(good);
    }
    Ok(flags)
}

/// Greedy lower bound on the number of pairwise disjoint non-good size-M
/// elementary regions inside `region` (stride-`2M+1` center grid).
pub fn bad_family_count(
    spec: &OperatorSpec,
    x: &TorusPoint,
    energy: f64,
    m: i64,
    region: &LatticeRegion,
    c2: f64,
    sigma: f64,
    sigma_tilde: f64,
) -> Result<usize> {
    if m > region.diam() {
        return Err(Error::param("m", "M exceeds the region diameter"));
    }
    let d = region.dim();
    let shapes = enumerate_elementary_shapes(d, m);
    let params = ClassifyParams {
        n: m,
        sigma,
        sigma_tilde,
        c2,
        c1: spec.envelope.c1,
    };
    let (lo, hi) = region.bbox();
    let stride = 2 * m + 1;
    let mut centers = vec![];
    let mut cur: Vec<i64> = lo.coords().iter().map(|c| c + m).collect();
    'outer: loop {
        centers.push(LatticePoint::new(&cur));
        for i in (0..d).rev() {
            cur[i] += stride;
            if cur[i] + m <= hi.coords()[i] {
                continue 'outer;
            }
            cur[i] = lo.coords()[i] + m;
            if i == 0 {
                break 'outer;
            }
        }
    }
    let mut taken: Vec<LatticeRegion> = Vec::new();
    let mut count = 0usize;
    for center in centers {
        for shape in &shapes {
            let candidate = LatticeRegion::elementary(*shape, center);
            if !candidate.points().iter().all(|p| region.contains(p)) {
                continue;
            }
            if taken
                .iter()
                .any(|t| candidate.points().iter().any(|p| t.contains(p)))
            {
                continue;
            }
            let rm = assemble_capped(spec, x, energy, &candidate, usize::MAX)?;
            let g = greens(&rm, sigma_tilde);
            let cls = classify(&g, &params)?;
            if !cls.is_g {
                taken.push(candidate);
                count += 1;
                break; // one bad region per center keeps the family disjoint
            }
        }
    }
    Ok(count)
}

// ---------------------------------------------------------------------------
// The induction engine
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct ScaleReport {
    pub scale: i64,
    pub sampled_regions: usize,
    pub singular_regions: usize,
    pub bad_regions: usize,
    /// Greedy disjoint packing among the bad sampled regions.
    pub bad_disjoint_count: usize,
    pub bad_positions: Vec<Vec<i64>>,
    pub budget: f64,
    pub sublinear_ok: bool,
    /// Median fitted decay rate over good sampled regions.
    pub rate: f64,
    pub rate_residual: f64,
    /// Generalized-region norm checks `log‖G‖ ≤ L^σ`.
    pub norm_checks: usize,
    pub norm_failures: usize,
    /// Theoretical ladder value at this scale (reporting only).
    pub ladder_rate: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    /// Hypotheses held at every scale and the final rate met the target.
    Holds,
    /// Hypotheses held but the final decay fell short.
    Fails,
    /// Some scale violated the norm bound or the sublinear budget.
    HypothesesNotMet,
}

#[derive(Clone, Debug, Serialize)]
pub struct InductionReport {
    pub scales: Vec<ScaleReport>,
    pub verdict: Verdict,
    pub hypotheses_met: bool,
    /// Measured decay rate of the full region.
    pub final_rate: f64,
    /// Measured rate at the base scale.
    pub m0_rate: f64,
    /// Fitted drop exponent `ϑ̂` (NaN when no positive drops to fit).
    pub theta_hat: f64,
    pub c2: f64,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct InductionParams {
    pub c2: f64,
    pub varsigma: f64,
    /// Generalized-region norm probes per scale.
    pub norm_samples: usize,
    pub seed: u64,
    pub size_cap: usize,
}

impl Default for InductionParams {
    fn default() -> Self {
        InductionParams {
            c2: 1.0,
            varsigma: 0.9,
            norm_samples: 6,
            seed: 1,
            size_cap: crate::operator::DEFAULT_SIZE_CAP,
        }
    }
}

fn sub_matrix(rm: &RegionMatrix, region: &LatticeRegion) -> Option<DMatrix<f64>> {
    let idx: Option<Vec<usize>> = region
        .points()
        .iter()
        .map(|p| rm.region.index_of(p))
        .collect();
    let idx = idx?;
    Some(DMatrix::from_fn(idx.len(), idx.len(), |i, j| {
        rm.matrix[(idx[i], idx[j])]
    }))
}

/// Classify one sampled region (extracted from the full assembly).
struct RegionOutcome {
    center: Vec<i64>,
    region: LatticeRegion,
    singular: bool,
    is_g: bool,
    rate: f64,
    rate_residual: f64,
}

fn classify_sub_region(
    full: &RegionMatrix,
    region: LatticeRegion,
    params: &ClassifyParams,
) -> RegionOutcome {
    let center = match region.kind() {
        crate::lattice::RegionKind::Elementary { center, .. } => center.coords().to_vec(),
        _ => region.points()[0].coords().to_vec(),
    };
    let Some(sub) = sub_matrix(full, &region) else {
        return RegionOutcome {
            center,
            region,
            singular: true,
            is_g: false,
            rate: f64::NAN,
            rate_residual: f64::NAN,
        };
    };
    let d = linalg::invert(&sub);
    match d.inverse {
        Some(inv) if d.condition <= SINGULAR_CONDITION => {
            let fit = fit_decay(&inv, region.points(), params.sigma_tilde, params.n);
            let mut worst = f64::NEG_INFINITY;
            let pts = region.points();
            for i in 0..pts.len() {
                for j in 0..pts.len() {
                    if i == j {
                        continue;
                    }
                    let dist = pts[i].sup_dist(&pts[j]);
                    if 10 * dist < params.n {
                        continue;
                    }
                    let v = inv[(i, j)].abs().max(f64::MIN_POSITIVE);
                    worst =
                        worst.max(v.ln() + params.c2 * (dist as f64).powf(params.sigma_tilde));
                }
            }
            RegionOutcome {
                center,
                region,
                singular: false,
                is_g: worst <= 0.0,
                rate: fit.rate,
                rate_residual: fit.residual,
            }
        }
        _ => RegionOutcome {
            center,
            region,
            singular: true,
            is_g: false,
            rate: f64::NAN,
            rate_residual: f64::NAN,
        },
    }
}

/// Sample centers on the stride-⌊M/2⌋ grid inside `[−N,N]^d`.
fn stride_centers(d: usize, n: i64, m: i64) -> Vec<LatticePoint> {
    let stride = (m / 2).max(1);
    let reach = n - m;
    if reach < 0 {
        return vec![LatticePoint::zero(d)];
    }
    let mut axis_vals: Vec<i64> = (-reach..=reach).step_by(stride as usize).collect();
    if *axis_vals.last().unwrap() != reach {
        axis_vals.push(reach);
    }
    let mut centers = vec![LatticePoint::zero(d)];
    centers.clear();
    let mut idx = vec![0usize; d];
    loop {
        let coords: Vec<i64> = idx.iter().map(|&i| axis_vals[i]).collect();
        centers.push(LatticePoint::new(&coords));
        let mut a = 0;
        loop {
            idx[a] += 1;
            if idx[a] < axis_vals.len() {
                break;
            }
            idx[a] = 0;
            a += 1;
            if a == d {
                return centers;
            }
        }
    }
}

/// Random generalized elementary region `R\(R+z)` inside `[−N,N]^d` with
/// diameter about `l`.
fn random_generalized(rng: &mut ChaCha8Rng, d: usize, n: i64, l: i64) -> LatticeRegion {
    let l = l.clamp(2, 2 * n);
    loop {
        let mut lo = Vec::with_capacity(d);
        let mut hi = Vec::with_capacity(d);
        for _ in 0..d {
            let side = rng.gen_range(l / 2..=l);
            let a = rng.gen_range(-n..=n - side);
            lo.push(a);
            hi.push(a + side);
        }
        let rect = Rect::new(&lo, &hi).unwrap();
        let z: Vec<i64> = (0..d).map(|_| rng.gen_range(-l..=l)).collect();
        if let Ok(region) = LatticeRegion::generalized(rect, &z) {
            if region.len() >= 3 {
                return region;
            }
        }
    }
}

/// Run the induction: at every scale of the schedule classify sampled
/// elementary regions at rate `c2`, check the sublinear bad budget and the
/// generalized-region norm bound, then invert the full cube and compare its
/// fitted decay rate with the base scale.
pub fn run_induction(
    spec: &OperatorSpec,
    x: &TorusPoint,
    energy: f64,
    sched: &ScaleSchedule,
    params: &InductionParams,
) -> Result<InductionReport> {
    let d = spec.d();
    let n = sched.n;
    let full_region = LatticeRegion::cube(d, n);
    if full_region.len() > params.size_cap {
        return Err(Error::SizeCap {
            points: full_region.len(),
            cap: params.size_cap,
        });
    }
    let full = assemble_capped(spec, x, energy, &full_region, params.size_cap)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut reports = Vec::new();
    let mut hypotheses_met = true;
    let ladder = rate_ladder(
        params.c2,
        sched.kappa_bad,
        sched.rho,
        sched.sigma,
        sched.sigma_tilde,
        d,
        &sched.scales,
    );

    for (j, &m) in sched.scales.iter().enumerate() {
        let cls_params = ClassifyParams {
            n: m,
            sigma: sched.sigma,
            sigma_tilde: sched.sigma_tilde,
            c2: params.c2,
            c1: spec.envelope.c1,
        };
        cls_params.validate()?;

        // sampled regions: cubes on the stride grid, all shapes at a random
        // tenth of the centers (one shape exists at d = 1)
        let centers = stride_centers(d, n, m);
        let shapes = enumerate_elementary_shapes(d, m);
        let mut regions: Vec<LatticeRegion> = Vec::new();
        for c in &centers {
            regions.push(LatticeRegion::elementary(shapes[0], *c));
            if shapes.len() > 1 && rng.gen_bool(0.1) {
                for s in &shapes[1..] {
                    regions.push(LatticeRegion::elementary(*s, *c));
                }
            }
        }
        let outcomes: Vec<RegionOutcome> = regions
            .into_par_iter()
            .map(|r| classify_sub_region(&full, r, &cls_params))
            .collect();

        let sampled_regions = outcomes.len();
        let singular_regions = outcomes.iter().filter(|o| o.singular).count();
        let bad: Vec<&RegionOutcome> = outcomes.iter().filter(|o| !o.is_g).collect();
        // greedy disjoint packing among bad regions
        let mut taken: Vec<&LatticeRegion> = Vec::new();
        for o in &bad {
            if taken
                .iter()
                .all(|t| !o.region.points().iter().any(|p| t.contains(p)))
            {
                taken.push(&o.region);
            }
        }
        let bad_disjoint_count = taken.len();
        let budget = bad_budget(n, sched.varsigma, m);
        let sublinear_ok = (bad_disjoint_count as f64) <= budget;

        let mut rates: Vec<f64> = outcomes
            .iter()
            .filter(|o| o.is_g && o.rate.is_finite())
            .map(|o| o.rate)
            .collect();
        rates.sort_by(|a, b| a.total_cmp(b));
        let mut residuals: Vec<f64> = outcomes
            .iter()
            .filter(|o| o.is_g && o.rate_residual.is_finite())
            .map(|o| o.rate_residual)
            .collect();
        residuals.sort_by(|a, b| a.total_cmp(b));
        let rate = rates.get(rates.len() / 2).copied().unwrap_or(f64::NAN);
        let rate_residual = residuals
            .get(residuals.len() / 2)
            .copied()
            .unwrap_or(f64::NAN);

        // generalized-region norm bound over sampled diameters in [M, N]
        let mut norm_failures = 0usize;
        let mut norm_checks = 0usize;
        for _ in 0..params.norm_samples {
            let t = rng.gen::<f64>();
            let l = ((m as f64).ln() + t * ((n as f64).ln() - (m as f64).ln())).exp() as i64;
            let region = random_generalized(&mut rng, d, n, l.max(2));
            let diam = region.diam();
            if let Some(sub) = sub_matrix(&full, &region) {
                let di = linalg::invert(&sub);
                norm_checks += 1;
                let ok = match di.inverse {
                    Some(inv) if di.condition <= SINGULAR_CONDITION => {
                        linalg::op_norm(&inv).ln() <= (diam as f64).powf(sched.sigma)
                    }
                    _ => false,
                };
                if !ok {
                    norm_failures += 1;
                }
            }
        }

        if !sublinear_ok || norm_failures > 0 {
            hypotheses_met = false;
        }
        reports.push(ScaleReport {
            scale: m,
            sampled_regions,
            singular_regions,
            bad_regions: bad.len(),
            bad_disjoint_count,
            bad_positions: bad.iter().take(32).map(|o| o.center.clone()).collect(),
            budget,
            sublinear_ok,
            rate,
            rate_residual,
            norm_checks,
            norm_failures,
            ladder_rate: ladder[j],
        });
        let _ = j;
    }

    // final full-region inversion
    let dfull = linalg::invert(&full.matrix);
    let final_rate = match dfull.inverse {
        Some(inv) if dfull.condition <= SINGULAR_CONDITION => {
            fit_decay(&inv, full_region.points(), sched.sigma_tilde, n).rate
        }
        _ => {
            hypotheses_met = false;
            f64::NAN
        }
    };
    let m0_rate = reports.first().map(|r| r.rate).unwrap_or(f64::NAN);

    // ϑ̂ from the positive rate drops across scales
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for r in &reports {
        let drop = params.c2 - r.rate;
        if drop > 0.0 && r.rate.is_finite() {
            xs.push((r.scale as f64).ln());
            ys.push(drop.ln());
        }
    }
    let theta_hat = if xs.len() >= 2 {
        let (slope, _b, _res) = linalg::linear_fit(&xs, &ys);
        -slope
    } else {
        f64::NAN
    };

    let verdict = if !hypotheses_met {
        Verdict::HypothesesNotMet
    } else {
        let allowance = if theta_hat.is_finite() && theta_hat > 0.0 {
            (sched.m0 as f64).powf(-theta_hat)
        } else {
            0.0
        };
        if final_rate.is_finite() && final_rate >= params.c2 - allowance {
            Verdict::Holds
        } else {
            Verdict::Fails
        }
    };

    Ok(InductionReport {
        scales: reports,
        verdict,
        hypotheses_met,
        final_rate,
        m0_rate,
        theta_hat,
        c2: params.c2,
        seed: params.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_exhaustion;
    use crate::torus::GOLDEN;

    #[test]
    fn schedule_example_snaps_to_n() {
        let s = schedule(10, 1.2, 100, 0.5, 1.0, 0.9).unwrap();
        assert_eq!(s.scales, vec![10, 15, 25, 47, 100]);
    }

    #[test]
    fn schedule_boundary_rho_rejected() {
        assert!(schedule(10, 1.5, 100, 0.5, 1.0, 0.9).is_err());
        assert!(schedule(10, 1.0, 100, 0.5, 1.0, 0.9).is_err());
    }

    #[test]
    fn single_scale_schedule() {
        let s = schedule(100, 1.2, 100, 0.5, 1.0, 0.9).unwrap();
        assert_eq!(s.scales, vec![100]);
    }

    #[test]
    fn budget_arithmetic_matches_remark() {
        // ς = 1−ε gives budget N^{1−ξ−ε} at M = ⌊N^ξ⌋
        let n = 729i64;
        let xi = 0.5;
        let eps = 0.1;
        let m = (n as f64).powf(xi).floor() as i64; // 27
        let budget = bad_budget(n, 1.0 - eps, m);
        let direct = (n as f64).powf(1.0 - xi - eps);
        assert!((budget - direct).abs() < 1e-9, "{budget} vs {direct}");
    }

    #[test]
    fn rate_ladder_is_monotone_nonincreasing_and_nonnegative() {
        let scales = [20i64, 44, 113, 340, 1000];
        for kappa in [1e-6, 1e-3, 0.05, 0.9] {
            let ladder = rate_ladder(1.5, kappa, 1.25, 0.5, 1.0, 1, &scales);
            assert_eq!(ladder.len(), scales.len());
            for w in ladder.windows(2) {
                assert!(w[1] <= w[0] + 1e-15);
                assert!(w[1] >= 0.0);
            }
        }
        // small κ and large scales: the ladder barely moves
        let tight = rate_ladder(1.5, 1e-6, 1.25, 0.5, 1.0, 1, &[1000, 5623]);
        assert!(tight[1] > 1.49);
    }

    #[test]
    fn diagonal_regime_all_annuli_good() {
        let spec = OperatorSpec::almost_mathieu(1e9, GOLDEN);
        let base = LatticeRegion::cube(1, 60);
        let x = TorusPoint::new(&[0.3]);
        let e = build_exhaustion(&base, &LatticePoint::new(&[7]), 5, 6).unwrap();
        let flags = classify_annuli(&spec, &x, 3.1, &e, 5, 0.5 * (1e9f64).ln(), 1.0).unwrap();
        assert!(flags.iter().all(|f| *f), "{flags:?}");
    }

    #[test]
    fn planted_resonance_localizes_bad_annuli() {
        // E exactly at the potential value near one site makes windows
        // covering it singularish; annuli away from it stay good
        let spec = OperatorSpec::almost_mathieu(50.0, GOLDEN);
        let base = LatticeRegion::cube(1, 60);
        let x = TorusPoint::new(&[0.0]);
        // v(f^0(x)) = 2cos(0) = 2: plant E = 2 resonance at n = 0
        let e = build_exhaustion(&base, &LatticePoint::new(&[40]), 4, 6).unwrap();
        let flags = classify_annuli(&spec, &x, 2.0, &e, 4, 0.5 * 50f64.ln(), 1.0).unwrap();
        // the annulus containing 0 (distance 40 from center) is bad, the
        // earliest shells are good
        assert!(!flags.iter().all(|f| *f));
        assert!(flags[0], "innermost shell should be good");
    }

    #[test]
    fn bad_family_counts() {
        let calm = OperatorSpec::almost_mathieu(1e9, GOLDEN);
        let region = LatticeRegion::cube(1, 40);
        let x = TorusPoint::new(&[0.3]);
        let c = bad_family_count(&calm, &x, 3.1, 4, &region, 0.5 * (1e9f64).ln(), 0.5, 1.0)
            .unwrap();
        assert_eq!(c, 0);

        // near-critical coupling at an in-spectrum energy: plenty of bad
        let rough = OperatorSpec::almost_mathieu(2.0, GOLDEN);
        let c2 = 0.5 * 3.0; // within the cap (1−1/5)·3 = 2.4 for λ=2's c1=3
        let c = bad_family_count(&rough, &x, 0.0, 4, &region, c2, 0.5, 1.0).unwrap();
        assert!(c >= 1, "expected some bad regions, got {c}");
    }

    #[test]
    fn induction_strong_coupling_holds() {
        let spec = OperatorSpec::almost_mathieu(20.0, GOLDEN);
        let sched = schedule(15, 1.25, 120, 0.5, 1.0, 0.9).unwrap();
        let params = InductionParams {
            c2: 0.5 * 20f64.ln(),
            seed: 3,
            ..Default::default()
        };
        let rep = run_induction(&spec, &TorusPoint::new(&[0.37]), 0.0, &sched, &params)
            .unwrap();
        assert!(rep.hypotheses_met, "{:?}", rep.scales);
        assert_eq!(rep.verdict, Verdict::Holds);
        assert!((rep.final_rate / rep.m0_rate - 1.0).abs() <= 0.15);
    }

    #[test]
    fn induction_weak_coupling_reports_failure() {
        let spec = OperatorSpec::almost_mathieu(1.0, GOLDEN);
        let sched = schedule(15, 1.25, 120, 0.5, 1.0, 0.9).unwrap();
        let params = InductionParams {
            c2: 1.5,
            seed: 3,
            ..Default::default()
        };
        let rep = run_induction(&spec, &TorusPoint::new(&[0.37]), 0.0, &sched, &params)
            .unwrap();
        assert_ne!(rep.verdict, Verdict::Holds);
    }
}
