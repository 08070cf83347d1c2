//! Numerical laboratory for quasi-periodic lattice operators.
//!
//! The crate builds finite restrictions of (sub)exponentially decaying
//! Toeplitz operator families on `ℤ^d`, inverts them, and measures how the
//! off-diagonal decay, operator norms, torus-orbit statistics and spectral
//! counting functions behave across scales.  Everything is desk-scale and
//! deterministic: dense matrices, exhaustive lattice geometry, seeded
//! sampling, fixed-order reductions.
//!
//! Module map:
//! - [`lattice`]: elementary and generalized regions of `ℤ^d`, width, and
//!   shell exhaustions of a region around a point.
//! - [`torus`]: torus dynamics (shifts and skew-shifts), Diophantine
//!   certificates, orbit discrepancy, and box-union hit counting.
//! - [`operator`]: declarative operator families and dense assembly of
//!   `R_Λ(A(x)−E)R_Λ`.
//! - [`greens`]: inversion, good/strongly-good classification, decay fits,
//!   resolvent identities, and norm-coupling checks.
//! - [`cartan`]: Schur complements with the block-inversion sandwich and
//!   grid measurement of large-inverse parameter sets.
//! - [`msa`]: the multi-scale induction engine (scale schedules, bad-region
//!   budgets, end-to-end decay propagation reports).
//! - [`spectral`]: transfer matrices, Lyapunov exponents, eigenvalue
//!   counting / IDS, and eigenfunction decay profiles.
//! - [`ldt`]: sampled large-deviation estimates of the bad set on the torus
//!   and sublinear orbit-hit checks against measured covers.

pub mod cartan;
pub mod greens;
pub mod lattice;
pub mod ldt;
pub mod linalg;
pub mod msa;
pub mod operator;
pub mod spectral;
pub mod torus;

mod error;

pub use error::{Error, Result};
