//! Declarative quasi-periodic operator families
//! `H(x) = λ⁻¹S + v(f^n(x))δ_{nn'}` and dense assembly of the finite-volume
//! matrices `R_Λ(H(x) − E)R_Λ`.
//!
//! Presets `opapp1 … opapp7` cover the shift / multi-shift / product-shift /
//! skew-shift model catalog; custom specs combine any hopping, potential and
//! dynamics with matching dimensions.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::lattice::{iter_box, LatticePoint, LatticeRegion};
use crate::torus::{frac, Dynamics, TorusPoint, GOLDEN};
use crate::{Error, Result};

/// Dense-assembly cap: regions larger than this are refused.
pub const DEFAULT_SIZE_CAP: usize = 20_000;

/// Matrix entries whose decay envelope falls below `e^{−40}` are exactly 0.
pub const TRUNCATION_LOG: f64 = 40.0;

// ---------------------------------------------------------------------------
// Potentials
// ---------------------------------------------------------------------------

/// One trigonometric mode `a·cos(2π⟨k,x⟩) + b·sin(2π⟨k,x⟩)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub freq: Vec<i64>,
    pub cos: f64,
    pub sin: f64,
}

/// A finite cosine/sine series on `𝕋^b`, optionally precomposed with the
/// projection onto one coordinate (skew-shift models drive the potential
/// through the last coordinate only).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub constant: f64,
    pub terms: Vec<TrigTerm>,
    /// When set, the series is 1-D and evaluated at coordinate `projection`.
    pub projection: Option<usize>,
}

impl PotentialSpec {
    pub fn zero() -> Self {
        PotentialSpec {
            constant: 0.0,
            terms: vec![],
            projection: None,
        }
    }

    pub fn constant(c: f64) -> Self {
        PotentialSpec {
            constant: c,
            terms: vec![],
            projection: None,
        }
    }

    /// `a·cos(2π⟨k,x⟩)`.
    pub fn cosine(amplitude: f64, freq: Vec<i64>) -> Self {
        PotentialSpec {
            constant: 0.0,
            terms: vec![TrigTerm {
                freq,
                cos: amplitude,
                sin: 0.0,
            }],
            projection: None,
        }
    }

    pub fn projected(mut self, coordinate: usize) -> Self {
        self.projection = Some(coordinate);
        self
    }

    pub fn eval(&self, x: &TorusPoint) -> f64 {
        let coords: &[f64] = x.coords();
        let mut v = self.constant;
        for t in &self.terms {
            let phase: f64 = match self.projection {
                Some(j) => {
                    debug_assert_eq!(t.freq.len(), 1);
                    t.freq[0] as f64 * coords[j]
                }
                None => t
                    .freq
                    .iter()
                    .zip(coords)
                    .map(|(k, c)| *k as f64 * c)
                    .sum(),
            };
            // frequencies are integers, so the phase is only needed mod 1
            let p = std::f64::consts::TAU * frac(phase);
            v += t.cos * p.cos() + t.sin * p.sin();
        }
        v
    }

    /// Sup-norm bound from coefficients.
    pub fn sup_bound(&self) -> f64 {
        self.constant.abs()
            + self
                .terms
                .iter()
                .map(|t| (t.cos * t.cos + t.sin * t.sin).sqrt())
                .sum::<f64>()
    }
}

// ---------------------------------------------------------------------------
// Hopping
// ---------------------------------------------------------------------------

/// Decay envelope `K·e^{−c₁|m|^σ̃}` with its constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub k: f64,
    pub c1: f64,
    pub sigma_tilde: f64,
}

impl Envelope {
    pub fn eval(&self, dist: i64) -> f64 {
        self.k * (-self.c1 * (dist as f64).powf(self.sigma_tilde)).exp()
    }

    /// Distance beyond which the envelope is below `e^{−40}`.
    pub fn truncation_radius(&self) -> i64 {
        let t = (TRUNCATION_LOG + self.k.ln()).max(0.0) / self.c1;
        t.powf(1.0 / self.sigma_tilde).ceil() as i64
    }

    /// Largest decay rate the good-region classification may use,
    /// `(1 − 5^{−σ̃})·c₁`.
    pub fn c2_cap(&self) -> f64 {
        (1.0 - 5.0f64.powf(-self.sigma_tilde)) * self.c1
    }
}

/// Hopping part `S` of the operator (scaled by `λ⁻¹` at assembly).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Hopping {
    /// Nearest neighbors in the sup norm: `S(n,n') = 1` iff `|n−n'| = 1`.
    Laplacian,
    /// `S(n−n')` from an explicit offset table, entries beyond the table
    /// following the tail rule `k·e^{−c1·|m|^σ̃}`.
    Kernel {
        table: Vec<(Vec<i64>, f64)>,
        tail: Envelope,
    },
    /// `S(x;n,n') = φ_{n−n'}(f^n(x)) + φ_{n'−n}(f^{n'}(x))` with real
    /// trigonometric polynomials `φ_k` (d = 1).
    PhaseModulated { modes: Vec<(i64, PotentialSpec)> },
}

impl Hopping {
    pub fn is_symmetric(&self) -> bool {
        match self {
            Hopping::Laplacian => true,
            Hopping::Kernel { table, .. } => table.iter().all(|(m, v)| {
                let neg: Vec<i64> = m.iter().map(|c| -c).collect();
                table
                    .iter()
                    .find(|(m2, _)| *m2 == neg)
                    .map_or(m.iter().all(|c| *c == 0), |(_, v2)| v == v2)
            }),
            // real φ makes φ̄ = φ, so swapping (n,n') swaps the two summands
            Hopping::PhaseModulated { .. } => true,
        }
    }

    fn kernel_value(table: &[(Vec<i64>, f64)], tail: &Envelope, m: &[i64]) -> f64 {
        if let Some((_, v)) = table.iter().find(|(off, _)| off == m) {
            return *v;
        }
        let dist = m.iter().map(|c| c.abs()).max().unwrap_or(0);
        tail.eval(dist)
    }
}

// ---------------------------------------------------------------------------
// Operator specs
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub name: String,
    pub hopping: Hopping,
    /// Coupling: the hopping enters as `λ⁻¹S`.
    pub lambda: f64,
    pub potential: PotentialSpec,
    pub dynamics: Dynamics,
    /// Envelope of the assembled off-diagonal part `λ⁻¹S`.
    pub envelope: Envelope,
    pub self_adjoint: bool,
    /// Analyticity-strip and Hölder metadata; carried, not enforced.
    pub rho: f64,
    pub gamma: f64,
    pub k1: f64,
}

impl OperatorSpec {
    pub fn d(&self) -> usize {
        self.dynamics.d()
    }

    pub fn b(&self) -> usize {
        self.dynamics.b()
    }

    pub fn hash64(&self) -> u64 {
        let s = serde_json::to_string(self).expect("spec serializes");
        let mut h = DefaultHasher::new();
        s.hash(&mut h);
        h.finish()
    }

    fn laplacian_envelope(lambda: f64) -> Envelope {
        // K·e^{−c1} equals the single nonzero band λ⁻¹ exactly
        let c1 = lambda.ln().max(3.0);
        Envelope {
            k: c1.exp() / lambda,
            c1,
            sigma_tilde: 1.0,
        }
    }

    pub fn custom(
        name: &str,
        hopping: Hopping,
        lambda: f64,
        potential: PotentialSpec,
        dynamics: Dynamics,
        envelope: Envelope,
    ) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::param("lambda", "coupling must be positive"));
        }
        let self_adjoint = hopping.is_symmetric();
        Ok(OperatorSpec {
            name: name.to_string(),
            hopping,
            lambda,
            potential,
            dynamics,
            envelope,
            self_adjoint,
            rho: 1.0,
            gamma: 1.0,
            k1: 2.0,
        })
    }

    /// `Δ + v(x+nω)` on `ℓ²(ℤ)`, `x ∈ 𝕋^b`.
    pub fn opapp1(omega: &[f64], v: PotentialSpec) -> Result<Self> {
        Self::opapp1new(1.0, omega, v).map(|mut s| {
            s.name = "opapp1".into();
            s
        })
    }

    /// `λ⁻¹Δ + v(x+nω)` on `ℓ²(ℤ)`.
    pub fn opapp1new(lambda: f64, omega: &[f64], v: PotentialSpec) -> Result<Self> {
        Self::custom(
            "opapp1new",
            Hopping::Laplacian,
            lambda,
            v,
            Dynamics::Shift {
                omega: omega.to_vec(),
            },
            Self::laplacian_envelope(lambda),
        )
    }

    /// `λ⁻¹S + v(x+nω)` on `ℓ²(ℤ)` with a long-range kernel.
    pub fn opapp2(lambda: f64, omega: &[f64], v: PotentialSpec) -> Result<Self> {
        Self::custom(
            "opapp2",
            exp_kernel(1),
            lambda,
            v,
            Dynamics::Shift {
                omega: omega.to_vec(),
            },
            Envelope {
                k: 1.0 / lambda,
                c1: 1.0,
                sigma_tilde: 1.0,
            },
        )
    }

    /// `λ⁻¹S + v(x+n·ω)` on `ℓ²(ℤ^d)`, `x ∈ 𝕋`.
    pub fn opapp4(lambda: f64, omega: &[f64], v: PotentialSpec) -> Result<Self> {
        Self::custom(
            "opapp4",
            exp_kernel(omega.len()),
            lambda,
            v,
            Dynamics::MultiShift {
                omega: omega.to_vec(),
            },
            Envelope {
                k: 1.0 / lambda,
                c1: 1.0,
                sigma_tilde: 1.0,
            },
        )
    }

    /// `λ⁻¹S + v(f^n(x))` on `ℓ²(ℤ)` with the skew-shift on `𝕋^b`.
    pub fn opapp5(lambda: f64, omega: f64, b: usize, v: PotentialSpec) -> Result<Self> {
        Self::custom(
            "opapp5",
            exp_kernel(1),
            lambda,
            v,
            Dynamics::SkewShift { omega, b },
            Envelope {
                k: 1.0 / lambda,
                c1: 1.0,
                sigma_tilde: 1.0,
            },
        )
    }

    /// `λ⁻¹S + v(x_1+n_1ω_1, x_2+n_2ω_2)` on `ℓ²(ℤ²)`.
    pub fn opapp6(lambda: f64, omega: [f64; 2], v: PotentialSpec) -> Result<Self> {
        Self::custom(
            "opapp6",
            exp_kernel(2),
            lambda,
            v,
            Dynamics::ProductShift { omega },
            Envelope {
                k: 1.0 / lambda,
                c1: 1.0,
                sigma_tilde: 1.0,
            },
        )
    }

    /// `λ⁻¹Δ + v(P_b(f^n(x)))` on `ℓ²(ℤ)` with the skew-shift on `𝕋^b`.
    pub fn opapp7(lambda: f64, omega: f64, b: usize, v1d: PotentialSpec) -> Result<Self> {
        Self::custom(
            "opapp7",
            Hopping::Laplacian,
            lambda,
            v1d.projected(b - 1),
            Dynamics::SkewShift { omega, b },
            Self::laplacian_envelope(lambda),
        )
    }

    /// Almost-Mathieu with weak hopping: `λ⁻¹Δ + 2cos(2π(x+nω))`.
    pub fn almost_mathieu(lambda: f64, omega: f64) -> Self {
        Self::opapp1new(lambda, &[omega], PotentialSpec::cosine(2.0, vec![1]))
            .expect("valid coupling")
    }

    /// Almost-Mathieu in the transfer-matrix normalization:
    /// `Δ + 2λcos(2π(x+nω))`.
    pub fn almost_mathieu_coupled(lambda: f64, omega: f64) -> Self {
        Self::opapp1(&[omega], PotentialSpec::cosine(2.0 * lambda, vec![1]))
            .expect("valid coupling")
    }

    /// Named preset with default potential and frequency, for the CLI.
    pub fn preset(name: &str, lambda: f64) -> Result<Self> {
        let v1 = PotentialSpec::cosine(2.0, vec![1]);
        match name {
            "opapp1" => Self::opapp1(&[GOLDEN], v1),
            "opapp1new" => Self::opapp1new(lambda, &[GOLDEN], v1),
            "opapp2" => Self::opapp2(lambda, &[GOLDEN], v1),
            "opapp4" => Self::opapp4(
                lambda,
                &[GOLDEN, std::f64::consts::SQRT_2 - 1.0],
                v1,
            ),
            "opapp5" => Self::opapp5(
                lambda,
                GOLDEN,
                2,
                PotentialSpec::cosine(2.0, vec![0, 1]),
            ),
            "opapp6" => Self::opapp6(
                lambda,
                [GOLDEN, std::f64::consts::SQRT_2 - 1.0],
                PotentialSpec::cosine(2.0, vec![1, 1]),
            ),
            "opapp7" => Self::opapp7(lambda, GOLDEN, 2, v1),
            other => Err(Error::param("preset", format!("unknown preset {other}"))),
        }
    }

    /// Hopping entry `S(x; n, n')` (unscaled by λ).
    pub fn hopping_entry(&self, x: &TorusPoint, n: &LatticePoint, np: &LatticePoint) -> f64 {
        let m = n.sub(np);
        match &self.hopping {
            Hopping::Laplacian => {
                if n.sup_dist(np) == 1 {
                    1.0
                } else {
                    0.0
                }
            }
            Hopping::Kernel { table, tail } => Hopping::kernel_value(table, tail, &m),
            Hopping::PhaseModulated { modes } => {
                let k = m[0];
                let fx_n = self.dynamics.apply(n.coords(), x);
                let fx_np = self.dynamics.apply(np.coords(), x);
                let phi = |off: i64, at: &TorusPoint| {
                    modes
                        .iter()
                        .find(|(o, _)| *o == off)
                        .map_or(0.0, |(_, p)| p.eval(at))
                };
                phi(k, &fx_n) + phi(-k, &fx_np)
            }
        }
    }
}

/// `S(m) = e^{−|m|}` off the diagonal, 0 on it.
pub fn exp_kernel(d: usize) -> Hopping {
    Hopping::Kernel {
        table: vec![(vec![0; d], 0.0)],
        tail: Envelope {
            k: 1.0,
            c1: 1.0,
            sigma_tilde: 1.0,
        },
    }
}

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

/// Dense restriction `R_Λ(A(x) − E)R_Λ` in the region's canonical ordering.
#[derive(Clone, Debug)]
pub struct RegionMatrix {
    pub region: LatticeRegion,
    pub x: TorusPoint,
    pub energy: f64,
    pub matrix: DMatrix<f64>,
    pub spec_hash: u64,
    pub truncation_radius: i64,
}

/// Assemble `R_Λ(H(x) − E)R_Λ` with the default size cap.
pub fn assemble(
    spec: &OperatorSpec,
    x: &TorusPoint,
    energy: f64,
    region: &LatticeRegion,
) -> Result<RegionMatrix> {
    assemble_capped(spec, x, energy, region, DEFAULT_SIZE_CAP)
}

pub fn assemble_capped(
    spec: &OperatorSpec,
    x: &TorusPoint,
    energy: f64,
    region: &LatticeRegion,
    cap: usize,
) -> Result<RegionMatrix> {
    let n = region.len();
    if n > cap {
        return Err(Error::SizeCap { points: n, cap });
    }
    if region.dim() != spec.d() {
        return Err(Error::Spec(format!(
            "region dimension {} does not match operator d={}",
            region.dim(),
            spec.d()
        )));
    }
    let points = region.points();
    let orbit: Vec<TorusPoint> = points
        .iter()
        .map(|p| spec.dynamics.apply(p.coords(), x))
        .collect();
    let diag: Vec<f64> = orbit.iter().map(|fx| spec.potential.eval(fx)).collect();
    if diag.iter().any(|v| !v.is_finite()) {
        return Err(Error::Spec("potential evaluated to a non-finite value".into()));
    }

    let r_trunc = spec.envelope.truncation_radius();
    let inv_lambda = 1.0 / spec.lambda;
    let mut matrix = DMatrix::<f64>::zeros(n, n);
    match &spec.hopping {
        Hopping::Laplacian => {
            for i in 0..n {
                for j in 0..n {
                    if i != j && points[i].sup_dist(&points[j]) == 1 {
                        matrix[(i, j)] = inv_lambda;
                    }
                }
            }
        }
        Hopping::Kernel { table, tail } => {
            for i in 0..n {
                for j in 0..n {
                    if points[i].sup_dist(&points[j]) > r_trunc {
                        continue;
                    }
                    let m = points[i].sub(&points[j]);
                    let s = Hopping::kernel_value(table, tail, &m);
                    if s != 0.0 {
                        matrix[(i, j)] = inv_lambda * s;
                    }
                }
            }
        }
        Hopping::PhaseModulated { modes } => {
            for i in 0..n {
                for j in 0..n {
                    if points[i].sup_dist(&points[j]) > r_trunc {
                        continue;
                    }
                    let k = points[i].coords()[0] - points[j].coords()[0];
                    let phi = |off: i64, at: &TorusPoint| {
                        modes
                            .iter()
                            .find(|(o, _)| *o == off)
                            .map_or(0.0, |(_, p)| p.eval(at))
                    };
                    let s = phi(k, &orbit[i]) + phi(-k, &orbit[j]);
                    if s != 0.0 {
                        matrix[(i, j)] = inv_lambda * s;
                    }
                }
            }
        }
    }
    for i in 0..n {
        matrix[(i, i)] += diag[i] - energy;
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::Spec("assembled matrix has non-finite entries".into()));
    }
    Ok(RegionMatrix {
        region: region.clone(),
        x: *x,
        energy,
        matrix,
        spec_hash: spec.hash64(),
        truncation_radius: r_trunc,
    })
}

/// Max-abs difference between `R_{Λ+k}A(x)R_{Λ+k}` and `R_Λ A(f^k(x)) R_Λ`
/// under the canonical reindexing; the Toeplitz covariance says it is 0.
pub fn covariance_residual(
    spec: &OperatorSpec,
    x: &TorusPoint,
    k: &[i64],
    region: &LatticeRegion,
) -> Result<f64> {
    let shifted_region = region.translate(k);
    let lhs = assemble(spec, x, 0.0, &shifted_region)?;
    let fx = spec.dynamics.apply(k, x);
    let rhs = assemble(spec, &fx, 0.0, region)?;
    let diff = &lhs.matrix - &rhs.matrix;
    Ok(crate::linalg::max_abs(&diff))
}

/// Monte-Carlo check of `|A(x;n,n')| ≤ K e^{−c₁|n−n'|^σ̃}` over the
/// off-diagonal part; `worst_ratio ≤ 1` is the contract, `required_k` the
/// smallest constant that would make the envelope hold with slack 1.
#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeReport {
    pub samples: usize,
    pub worst_ratio: f64,
    pub required_k: f64,
}

pub fn decay_envelope_check(spec: &OperatorSpec, samples: usize, seed: u64) -> EnvelopeReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = spec.d();
    let b = spec.b();
    let probe = spec.envelope.truncation_radius().clamp(2, 12);
    let mut worst_ratio = 0.0f64;
    let mut required_k = 0.0f64;
    for _ in 0..samples {
        let x = TorusPoint::new(&(0..b).map(|_| rng.gen::<f64>()).collect::<Vec<f64>>());
        let n: Vec<i64> = (0..d).map(|_| rng.gen_range(-probe..=probe)).collect();
        let np: Vec<i64> = (0..d).map(|_| rng.gen_range(-probe..=probe)).collect();
        let n = LatticePoint::new(&n);
        let np = LatticePoint::new(&np);
        if n == np {
            continue;
        }
        let a = spec.hopping_entry(&x, &n, &np).abs() / spec.lambda;
        let dist = n.sup_dist(&np);
        let env = spec.envelope.eval(dist);
        if env > 0.0 {
            worst_ratio = worst_ratio.max(a / env);
        }
        required_k = required_k
            .max(a * (spec.envelope.c1 * (dist as f64).powf(spec.envelope.sigma_tilde)).exp());
    }
    EnvelopeReport {
        samples,
        worst_ratio,
        required_k,
    }
}

/// All offsets `m ≠ 0` with `|m| ≤ radius` — helper for kernel tables.
pub fn offsets_within(d: usize, radius: i64) -> Vec<Vec<i64>> {
    let lo = vec![-radius; d];
    let hi = vec![radius; d];
    iter_box(&lo, &hi)
        .filter(|p| p.sup_norm() != 0)
        .map(|p| p.coords().to_vec())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn free_laplacian_is_tridiagonal_with_zero_diagonal() {
        let spec = OperatorSpec::opapp1(&[GOLDEN], PotentialSpec::zero()).unwrap();
        let region = LatticeRegion::cube(1, 2);
        let rm = assemble(&spec, &TorusPoint::zero(1), 0.0, &region).unwrap();
        assert_eq!(rm.matrix.nrows(), 5);
        for i in 0..5 {
            for j in 0..5 {
                let expect = if (i as i64 - j as i64).abs() == 1 { 1.0 } else { 0.0 };
                assert_eq!(rm.matrix[(i, j)], expect, "({i},{j})");
            }
        }
    }

    #[test]
    fn amo_entries_by_hand() {
        // λ=10, v = 2cos(2πx), x=0, Λ=[−1,1]: diagonal 2cos(2π(nω)),
        // off-diagonal 1/10
        let spec = OperatorSpec::almost_mathieu(10.0, GOLDEN);
        let region = LatticeRegion::cube(1, 1);
        let rm = assemble(&spec, &TorusPoint::zero(1), 0.0, &region).unwrap();
        let want = |n: f64| 2.0 * (std::f64::consts::TAU * frac(n * GOLDEN)).cos();
        assert!((rm.matrix[(0, 0)] - want(-1.0)).abs() < 1e-12);
        assert!((rm.matrix[(1, 1)] - 2.0).abs() < 1e-12);
        assert!((rm.matrix[(2, 2)] - want(1.0)).abs() < 1e-12);
        assert!((rm.matrix[(0, 1)] - 0.1).abs() < 1e-15);
        assert!((rm.matrix[(1, 0)] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn covariance_of_all_presets() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for name in ["opapp1new", "opapp2", "opapp4", "opapp5", "opapp6", "opapp7"] {
            let spec = OperatorSpec::preset(name, 8.0).unwrap();
            let d = spec.d();
            let region = LatticeRegion::cube(d, if d == 1 { 6 } else { 3 });
            for _ in 0..5 {
                let x = TorusPoint::new(
                    &(0..spec.b()).map(|_| rng.gen::<f64>()).collect::<Vec<f64>>(),
                );
                let k: Vec<i64> = (0..d).map(|_| rng.gen_range(-100..=100)).collect();
                let res = covariance_residual(&spec, &x, &k, &region).unwrap();
                assert!(res <= 1e-10, "{name}: covariance residual {res}");
            }
        }
    }

    #[test]
    fn covariance_zero_shift_is_exact() {
        let spec = OperatorSpec::preset("opapp5", 5.0).unwrap();
        let x = TorusPoint::new(&[0.3, 0.8]);
        let region = LatticeRegion::cube(1, 5);
        assert_eq!(covariance_residual(&spec, &x, &[0], &region).unwrap(), 0.0);
    }

    #[test]
    fn phase_modulated_hopping_is_covariant_and_bounded() {
        // |φ_k| ≤ K e^{−c1|k|}/2 per side keeps the sum under the envelope
        let c1 = 1.0f64;
        let modes: Vec<(i64, PotentialSpec)> = (-4i64..=4)
            .map(|k| {
                let amp = 0.5 * (-c1 * (k.abs() as f64)).exp();
                (k, PotentialSpec::cosine(amp, vec![1, 0]))
            })
            .collect();
        let spec = OperatorSpec::custom(
            "phase",
            Hopping::PhaseModulated { modes },
            4.0,
            PotentialSpec::cosine(2.0, vec![0, 1]),
            Dynamics::SkewShift { omega: GOLDEN, b: 2 },
            Envelope {
                k: 0.25,
                c1,
                sigma_tilde: 1.0,
            },
        )
        .unwrap();
        assert!(spec.self_adjoint);
        let region = LatticeRegion::cube(1, 5);
        let x = TorusPoint::new(&[0.21, 0.73]);
        let res = covariance_residual(&spec, &x, &[7], &region).unwrap();
        assert!(res <= 1e-10, "residual {res}");
        let rep = decay_envelope_check(&spec, 2000, 5);
        assert!(rep.worst_ratio <= 1.0 + 1e-12, "ratio {}", rep.worst_ratio);
    }

    #[test]
    fn exp_kernel_ratio_is_exactly_one() {
        let spec = OperatorSpec::preset("opapp2", 1.0).unwrap();
        let rep = decay_envelope_check(&spec, 500, 11);
        assert!((rep.worst_ratio - 1.0).abs() < 1e-12);
        assert!((rep.required_k - 1.0).abs() < 1e-12);
    }

    #[test]
    fn laplacian_envelope_reports_required_k() {
        let spec = OperatorSpec::almost_mathieu(10.0, GOLDEN);
        let rep = decay_envelope_check(&spec, 500, 13);
        assert!(rep.worst_ratio <= 1.0 + 1e-12);
        // envelope is tight at |m| = 1 by construction
        assert!((rep.worst_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn assembly_is_deterministic_and_respects_cap() {
        let spec = OperatorSpec::almost_mathieu(5.0, GOLDEN);
        let region = LatticeRegion::cube(1, 10);
        let x = TorusPoint::new(&[0.4]);
        let a = assemble(&spec, &x, 0.7, &region).unwrap();
        let b = assemble(&spec, &x, 0.7, &region).unwrap();
        assert_eq!(a.matrix, b.matrix);
        assert!(matches!(
            assemble_capped(&spec, &x, 0.7, &region, 10),
            Err(Error::SizeCap { .. })
        ));
    }

    #[test]
    fn hermitian_symmetry_when_flagged() {
        for name in ["opapp1new", "opapp2", "opapp5", "opapp6"] {
            let spec = OperatorSpec::preset(name, 3.0).unwrap();
            assert!(spec.self_adjoint, "{name}");
            let region = LatticeRegion::cube(spec.d(), 3);
            let x = TorusPoint::new(&vec![0.37; spec.b()]);
            let rm = assemble(&spec, &x, 0.1, &region).unwrap();
            let asym = crate::linalg::max_abs(&(&rm.matrix - rm.matrix.transpose()));
            assert!(asym <= 1e-12, "{name}: asymmetry {asym}");
        }
    }

    #[test]
    fn lambda_scaling_acts_on_off_diagonal_only() {
        let region = LatticeRegion::cube(1, 4);
        let x = TorusPoint::new(&[0.2]);
        let a1 = assemble(
            &OperatorSpec::almost_mathieu(1.0, GOLDEN),
            &x,
            0.0,
            &region,
        )
        .unwrap();
        let a10 = assemble(
            &OperatorSpec::almost_mathieu(10.0, GOLDEN),
            &x,
            0.0,
            &region,
        )
        .unwrap();
        for i in 0..a1.matrix.nrows() {
            for j in 0..a1.matrix.ncols() {
                if i == j {
                    assert_eq!(a1.matrix[(i, j)], a10.matrix[(i, j)]);
                } else if a10.matrix[(i, j)] != 0.0 {
                    let ratio = a1.matrix[(i, j)] / a10.matrix[(i, j)];
                    assert!((ratio - 10.0).abs() < 1e-12);
                }
            }
        }
    }
}
