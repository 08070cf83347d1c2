//! Torus dynamics (shifts, skew-shifts), Diophantine certification, orbit
//! discrepancy, and hit counting against box unions.
//!
//! All maps reduce mod 1 after every addition.  Long orbits of the
//! skew-shift use a closed binomial form with exact dyadic reduction of
//! `k·ω mod 1`, so there is no `O(n)` drift.

mod boxes;
mod dioph;
mod discrepancy;

pub use boxes::{count_hits, BoxUnion, TorusBox};
pub use dioph::{certify_diophantine, certify_strong, DiophantineCertificate};
pub use discrepancy::{
    discrepancy, exact_discrepancy_1d, fit_discrepancy_exponent, grid_discrepancy,
    DiscrepancyMethod, OrbitStats,
};

use serde::{Deserialize, Serialize};

use crate::lattice::iter_box;
use crate::{Error, Result};

/// Maximum torus dimension `b`.
pub const MAX_B: usize = 4;

/// Point of `𝕋^b = (ℝ/ℤ)^b`, coordinates kept in `[0,1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    b: u8,
    c: [f64; MAX_B],
}

#[inline]
pub fn frac(x: f64) -> f64 {
    let f = x.rem_euclid(1.0);
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

impl TorusPoint {
    pub fn new(coords: &[f64]) -> Self {
        assert!(!coords.is_empty() && coords.len() <= MAX_B);
        let mut c = [0.0; MAX_B];
        for (ci, x) in c.iter_mut().zip(coords) {
            *ci = frac(*x);
        }
        TorusPoint {
            b: coords.len() as u8,
            c,
        }
    }

    pub fn zero(b: usize) -> Self {
        Self::new(&vec![0.0; b])
    }

    pub fn b(&self) -> usize {
        self.b as usize
    }

    pub fn coords(&self) -> &[f64] {
        &self.c[..self.b as usize]
    }

    /// `‖x‖ = dist(x, ℤ^b)` in the sup norm.
    pub fn dist_to_lattice(&self) -> f64 {
        self.coords()
            .iter()
            .map(|&x| x.min(1.0 - x))
            .fold(0.0f64, f64::max)
    }

    /// Sup-norm distance on the torus.
    pub fn torus_dist(&self, other: &TorusPoint) -> f64 {
        self.coords()
            .iter()
            .zip(other.coords())
            .map(|(a, b)| {
                let d = frac(a - b);
                d.min(1.0 - d)
            })
            .fold(0.0f64, f64::max)
    }
}

// ---------------------------------------------------------------------------
// Exact dyadic reduction of integer multiples
// ---------------------------------------------------------------------------

fn integer_decode(v: f64) -> (u64, i16) {
    let bits = v.to_bits();
    let mut exponent = ((bits >> 52) & 0x7ff) as i16;
    let mantissa = if exponent == 0 {
        (bits & 0x000f_ffff_ffff_ffff) << 1
    } else {
        (bits & 0x000f_ffff_ffff_ffff) | 0x0010_0000_0000_0000
    };
    exponent -= 1075;
    (mantissa, exponent)
}

/// `frac(k·w)` computed exactly from the dyadic representation of `w`
/// (a f64 is an integer times a power of two, so the product mod 1 is a
/// finite binary fraction).  Falls back to plain f64 for subnormal-scale
/// exponents, which no sensible frequency reaches.
pub fn frac_mul(k: i128, w: f64) -> f64 {
    if k == 0 || w == 0.0 || !w.is_finite() {
        return 0.0;
    }
    let k_eff: i128 = if w < 0.0 { -k } else { k };
    let (m, e) = integer_decode(w.abs());
    if e >= 0 {
        return 0.0; // integer multiple
    }
    let sbits = (-e) as u32;
    if sbits > 120 {
        return frac(k as f64 * w);
    }
    let modulus: u128 = 1u128 << sbits;
    let k_mod = k_eff.rem_euclid(modulus as i128) as u128;
    let prod = k_mod.wrapping_mul(m as u128) & (modulus - 1);
    frac(prod as f64 / modulus as f64)
}

/// Binomial coefficient with integer (possibly negative) upper index.
fn binomial(n: i64, k: u32) -> i128 {
    let mut num: i128 = 1;
    for t in 0..k as i128 {
        num *= n as i128 - t;
    }
    let mut den: i128 = 1;
    for t in 1..=k as i128 {
        den *= t;
    }
    num / den
}

// ---------------------------------------------------------------------------
// Dynamics
// ---------------------------------------------------------------------------

/// A torus dynamical system `f : ℤ^d × 𝕋^b → 𝕋^b` with the group law
/// `f^{m+n} = f^m ∘ f^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Dynamics {
    /// `f^n(x) = x + nω`, `n ∈ ℤ`, `x ∈ 𝕋^b`.
    Shift { omega: Vec<f64> },
    /// `f^n(x) = x + n·ω`, `n ∈ ℤ^d`, `x ∈ 𝕋`.
    MultiShift { omega: Vec<f64> },
    /// `f^n(x) = (x_1 + n_1ω_1, x_2 + n_2ω_2)`, `n ∈ ℤ²`, `x ∈ 𝕋²`.
    ProductShift { omega: [f64; 2] },
    /// `f(x_1,…,x_b) = (x_1+ω, x_2+x_1, …, x_b+x_{b−1})`, `n ∈ ℤ`.
    SkewShift { omega: f64, b: usize },
}

// The skew-shift always evaluates through its closed binomial form: the
// coefficients are exact integers and `frac_mul` reduces them exactly, while
// step-by-step iteration accumulates a rounding cascade that the b ≥ 3
// cocycle amplifies polynomially.  Iteration survives below as a test oracle.

impl Dynamics {
    /// Lattice (time) dimension `d`.
    pub fn d(&self) -> usize {
        match self {
            Dynamics::Shift { .. } | Dynamics::SkewShift { .. } => 1,
            Dynamics::MultiShift { omega } => omega.len(),
            Dynamics::ProductShift { .. } => 2,
        }
    }

    /// Torus dimension `b`.
    pub fn b(&self) -> usize {
        match self {
            Dynamics::Shift { omega } => omega.len(),
            Dynamics::MultiShift { .. } => 1,
            Dynamics::ProductShift { .. } => 2,
            Dynamics::SkewShift { b, .. } => *b,
        }
    }

    /// `f^n(x)`.
    pub fn apply(&self, n: &[i64], x: &TorusPoint) -> TorusPoint {
        debug_assert_eq!(n.len(), self.d());
        debug_assert_eq!(x.b(), self.b());
        match self {
            Dynamics::Shift { omega } => {
                let c: Vec<f64> = x
                    .coords()
                    .iter()
                    .zip(omega)
                    .map(|(xi, wi)| frac(xi + frac_mul(n[0] as i128, *wi)))
                    .collect();
                TorusPoint::new(&c)
            }
            Dynamics::MultiShift { omega } => {
                let mut s = x.coords()[0];
                for (ni, wi) in n.iter().zip(omega) {
                    s = frac(s + frac_mul(*ni as i128, *wi));
                }
                TorusPoint::new(&[s])
            }
            Dynamics::ProductShift { omega } => TorusPoint::new(&[
                frac(x.coords()[0] + frac_mul(n[0] as i128, omega[0])),
                frac(x.coords()[1] + frac_mul(n[1] as i128, omega[1])),
            ]),
            Dynamics::SkewShift { omega, b } => skew_closed_form(*omega, *b, x, n[0]),
        }
    }

    /// Orbit over a lattice box of time indices, in lexicographic order.
    pub fn orbit(&self, x0: &TorusPoint, lo: &[i64], hi: &[i64]) -> Vec<TorusPoint> {
        iter_box(lo, hi)
            .map(|n| self.apply(n.coords(), x0))
            .collect()
    }

    /// Time-ordered orbit `f^1(x), …, f^N(x)` for one-parameter dynamics.
    pub fn orbit_sequence(&self, x0: &TorusPoint, n: usize) -> Result<Vec<TorusPoint>> {
        if self.d() != 1 {
            return Err(Error::param("dynamics", "orbit_sequence needs d = 1"));
        }
        Ok((1..=n as i64).map(|t| self.apply(&[t], x0)).collect())
    }
}

#[cfg(test)]
fn skew_step(omega: f64, b: usize, x: &TorusPoint) -> TorusPoint {
    let c = x.coords();
    let mut out = Vec::with_capacity(b);
    out.push(frac(c[0] + omega));
    for j in 1..b {
        out.push(frac(c[j] + c[j - 1]));
    }
    TorusPoint::new(&out)
}

#[cfg(test)]
fn skew_step_inv(omega: f64, b: usize, y: &TorusPoint) -> TorusPoint {
    let c = y.coords();
    let mut out = vec![0.0; b];
    out[0] = frac(c[0] - omega);
    for j in 1..b {
        out[j] = frac(c[j] - out[j - 1]);
    }
    TorusPoint::new(&out)
}

#[cfg(test)]
fn skew_iterate(omega: f64, b: usize, x: &TorusPoint, t: i64) -> TorusPoint {
    let mut cur = *x;
    if t >= 0 {
        for _ in 0..t {
            cur = skew_step(omega, b, &cur);
        }
    } else {
        for _ in 0..(-t) {
            cur = skew_step_inv(omega, b, &cur);
        }
    }
    cur
}

/// `f^n(x)_j = Σ_{i<j} C(n,i)·x_{j−i} + C(n,j)·ω  (mod 1)`, coefficients
/// reduced exactly.
fn skew_closed_form(omega: f64, b: usize, x: &TorusPoint, t: i64) -> TorusPoint {
    let c = x.coords();
    let mut out = Vec::with_capacity(b);
    for j in 1..=b {
        let mut s = 0.0f64;
        for i in 0..j {
            s = frac(s + frac_mul(binomial(t, i as u32), c[j - 1 - i]));
        }
        s = frac(s + frac_mul(binomial(t, j as u32), omega));
        out.push(s);
    }
    TorusPoint::new(&out)
}

/// `(√5 − 1)/2`, the canonical test frequency.
pub const GOLDEN: f64 = 0.618_033_988_749_894_9;
