//! Finite regions of `ℤ^d`: elementary regions (cubes with corners cut),
//! generalized elementary regions (`R \ (R+z)`), explicit point sets, and
//! the geometry used by the multi-scale machinery (sup-norm distances,
//! width, exhaustions).
//!
//! Conventions fixed once for the whole crate:
//! - `|n| = max_i |n_i|` (sup norm), all distances and diameters use it;
//! - point enumeration is lexicographic on coordinates and duplicate-free;
//! - `M/2` comparisons are done in exact integer arithmetic (`2·dist ≥ M`),
//!   never in floating point.

mod exhaustion;
mod width;

pub use exhaustion::{build_exhaustion, default_merge_constant, Exhaustion};
pub use width::{find_window, has_width_at_least, point_window, width, Window};

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Maximum lattice dimension supported (combinatorics of corner shapes
/// explode beyond this).
pub const MAX_DIM: usize = 4;

// ---------------------------------------------------------------------------
// Points
// ---------------------------------------------------------------------------

/// A point of `ℤ^d`, `d ≤ MAX_DIM`.  Unused coordinates are zero, so the
/// derived lexicographic order is the coordinate order for same-dimension
/// points.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticePoint {
    dim: u8,
    coords: [i64; MAX_DIM],
}

impl LatticePoint {
    pub fn new(coords: &[i64]) -> Self {
        assert!(
            !coords.is_empty() && coords.len() <= MAX_DIM,
            "dimension must be in 1..={MAX_DIM}"
        );
        let mut c = [0i64; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        LatticePoint {
            dim: coords.len() as u8,
            coords: c,
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(&vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords[..self.dim as usize]
    }

    /// Sup norm `max_i |n_i|`.
    pub fn sup_norm(&self) -> i64 {
        self.coords().iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    /// Sup-norm distance to another point of the same dimension.
    pub fn sup_dist(&self, other: &LatticePoint) -> i64 {
        debug_assert_eq!(self.dim, other.dim);
        self.coords()
            .iter()
            .zip(other.coords())
            .map(|(a, b)| (a - b).abs())
            .max()
            .unwrap_or(0)
    }

    pub fn add(&self, offset: &[i64]) -> LatticePoint {
        debug_assert_eq!(self.dim as usize, offset.len());
        let mut c = self.coords;
        for (ci, o) in c.iter_mut().zip(offset) {
            *ci += o;
        }
        LatticePoint {
            dim: self.dim,
            coords: c,
        }
    }

    pub fn sub(&self, other: &LatticePoint) -> Vec<i64> {
        self.coords()
            .iter()
            .zip(other.coords())
            .map(|(a, b)| a - b)
            .collect()
    }
}

impl fmt::Debug for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.coords())
    }
}

/// Iterate the integer box `[lo_i, hi_i]` in lexicographic order.
pub fn iter_box(lo: &[i64], hi: &[i64]) -> BoxIter {
    debug_assert_eq!(lo.len(), hi.len());
    let empty = lo.iter().zip(hi).any(|(l, h)| l > h);
    BoxIter {
        lo: lo.to_vec(),
        hi: hi.to_vec(),
        cur: lo.to_vec(),
        done: empty,
    }
}

pub struct BoxIter {
    lo: Vec<i64>,
    hi: Vec<i64>,
    cur: Vec<i64>,
    done: bool,
}

impl Iterator for BoxIter {
    type Item = LatticePoint;

    fn next(&mut self) -> Option<LatticePoint> {
        if self.done {
            return None;
        }
        let out = LatticePoint::new(&self.cur);
        // advance (last coordinate fastest keeps lexicographic order)
        for i in (0..self.cur.len()).rev() {
            self.cur[i] += 1;
            if self.cur[i] <= self.hi[i] {
                return Some(out);
            }
            self.cur[i] = self.lo[i];
            if i == 0 {
                self.done = true;
            }
        }
        Some(out)
    }
}

// ---------------------------------------------------------------------------
// Elementary shapes
// ---------------------------------------------------------------------------

/// Per-coordinate corner condition: the removed set is
/// `{n : n_i < 0 for all Less coordinates and n_i > 0 for all Greater ones}`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum CornerSign {
    None,
    Less,
    Greater,
}

/// An elementary region of size `N` centered at 0: the cube `[−N,N]^d`, or
/// the cube minus one corner set when at least two signs are active.
/// For `d = 1` only the full interval is admissible.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct ElementaryShape {
    dim: usize,
    size: i64,
    signs: [CornerSign; MAX_DIM],
}

impl ElementaryShape {
    pub fn cube(dim: usize, size: i64) -> Self {
        assert!(dim >= 1 && dim <= MAX_DIM && size >= 1);
        ElementaryShape {
            dim,
            size,
            signs: [CornerSign::None; MAX_DIM],
        }
    }

    pub fn with_signs(dim: usize, size: i64, signs: &[CornerSign]) -> Result<Self> {
        if dim < 1 || dim > MAX_DIM || size < 1 || signs.len() != dim {
            return Err(Error::param("shape", "bad dimension or size"));
        }
        let active = signs.iter().filter(|s| **s != CornerSign::None).count();
        if active == 0 {
            return Ok(Self::cube(dim, size));
        }
        if dim == 1 || active < 2 {
            return Err(Error::param(
                "shape",
                "corner cuts need d ≥ 2 and at least two active signs",
            ));
        }
        let mut s = [CornerSign::None; MAX_DIM];
        s[..dim].copy_from_slice(signs);
        Ok(ElementaryShape {
            dim,
            size,
            signs: s,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn size(&self) -> i64 {
        self.size
    }

    pub fn signs(&self) -> &[CornerSign] {
        &self.signs[..self.dim]
    }

    pub fn is_cube(&self) -> bool {
        self.signs().iter().all(|s| *s == CornerSign::None)
    }

    /// Membership of the relative coordinate `m` (shape centered at 0).
    #[inline]
    pub fn contains_rel(&self, m: &[i64]) -> bool {
        let n = self.size;
        for &mi in m {
            if mi < -n || mi > n {
                return false;
            }
        }
        if self.is_cube() {
            return true;
        }
        // removed iff every active condition holds
        for (i, s) in self.signs().iter().enumerate() {
            match s {
                CornerSign::None => {}
                CornerSign::Less => {
                    if m[i] >= 0 {
                        return true;
                    }
                }
                CornerSign::Greater => {
                    if m[i] <= 0 {
                        return true;
                    }
                }
            }
        }
        false
    }

    /// The corners of the bounding cube that belong to the shape; cheap
    /// probes for subset tests.
    pub fn surviving_corners(&self) -> Vec<LatticePoint> {
        let n = self.size;
        let mut out = Vec::new();
        for mask in 0..(1u32 << self.dim) {
            let c: Vec<i64> = (0..self.dim)
                .map(|i| if mask & (1 << i) != 0 { n } else { -n })
                .collect();
            if self.contains_rel(&c) {
                out.push(LatticePoint::new(&c));
            }
        }
        out
    }

    /// All points, centered at `center`, in lexicographic order.
    pub fn points(&self, center: &LatticePoint) -> Vec<LatticePoint> {
        assert_eq!(center.dim(), self.dim);
        let lo: Vec<i64> = center.coords().iter().map(|c| c - self.size).collect();
        let hi: Vec<i64> = center.coords().iter().map(|c| c + self.size).collect();
        iter_box(&lo, &hi)
            .filter(|p| self.contains_rel(&p.sub(center)))
            .collect()
    }
}

/// All elementary shapes of size `N` centered at 0: the cube plus every
/// sign pattern with at least two active entries (`1 + 3^d − 1 − 2d` total
/// for `d ≥ 2`, just the interval for `d = 1`).
pub fn enumerate_elementary_shapes(dim: usize, size: i64) -> Vec<ElementaryShape> {
    assert!(dim >= 1 && dim <= MAX_DIM && size >= 1);
    let mut shapes = vec![ElementaryShape::cube(dim, size)];
    if dim == 1 {
        return shapes;
    }
    let options = [CornerSign::None, CornerSign::Less, CornerSign::Greater];
    let mut pattern = vec![0usize; dim];
    loop {
        let signs: Vec<CornerSign> = pattern.iter().map(|&i| options[i]).collect();
        let active = signs.iter().filter(|s| **s != CornerSign::None).count();
        if active >= 2 {
            shapes.push(ElementaryShape::with_signs(dim, size, &signs).unwrap());
        }
        // next pattern (base-3 counter)
        let mut i = 0;
        loop {
            pattern[i] += 1;
            if pattern[i] < 3 {
                break;
            }
            pattern[i] = 0;
            i += 1;
            if i == dim {
                return shapes;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Rectangles and regions
// ---------------------------------------------------------------------------

/// An axis-aligned rectangle `{n : lo_i ≤ n_i ≤ hi_i}` (inclusive bounds).
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Rect {
    lo: LatticePoint,
    hi: LatticePoint,
}

impl Rect {
    pub fn new(lo: &[i64], hi: &[i64]) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() || lo.len() > MAX_DIM {
            return Err(Error::param("rect", "bad dimension"));
        }
        if lo.iter().zip(hi).any(|(l, h)| l > h) {
            return Err(Error::param("rect", "lo exceeds hi"));
        }
        Ok(Rect {
            lo: LatticePoint::new(lo),
            hi: LatticePoint::new(hi),
        })
    }

    pub fn dim(&self) -> usize {
        self.lo.dim()
    }

    pub fn lo(&self) -> &LatticePoint {
        &self.lo
    }

    pub fn hi(&self) -> &LatticePoint {
        &self.hi
    }

    pub fn contains(&self, p: &LatticePoint) -> bool {
        p.coords()
            .iter()
            .zip(self.lo.coords().iter().zip(self.hi.coords()))
            .all(|(c, (l, h))| l <= c && c <= h)
    }

    pub fn points(&self) -> Vec<LatticePoint> {
        iter_box(self.lo.coords(), self.hi.coords()).collect()
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum RegionKind {
    Elementary {
        shape: ElementaryShape,
        center: LatticePoint,
    },
    Generalized {
        rect: Rect,
        shift: LatticePoint,
    },
    Explicit,
}

/// A finite subset of `ℤ^d` with a canonical (lexicographic, duplicate-free)
/// point enumeration.  Immutable after construction.
#[derive(Clone, Debug)]
pub struct LatticeRegion {
    kind: RegionKind,
    points: Vec<LatticePoint>,
    set: HashSet<LatticePoint>,
    bbox_lo: LatticePoint,
    bbox_hi: LatticePoint,
    dim: usize,
}

impl PartialEq for LatticeRegion {
    fn eq(&self, other: &Self) -> bool {
        self.points == other.points
    }
}
impl Eq for LatticeRegion {}

impl LatticeRegion {
    fn from_sorted_kind(kind: RegionKind, mut points: Vec<LatticePoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Geometry("empty region".into()));
        }
        points.sort_unstable();
        points.dedup();
        let dim = points[0].dim();
        if points.iter().any(|p| p.dim() != dim) {
            return Err(Error::Geometry("mixed dimensions".into()));
        }
        let mut lo = points[0].coords().to_vec();
        let mut hi = lo.clone();
        for p in &points {
            for (i, c) in p.coords().iter().enumerate() {
                lo[i] = lo[i].min(*c);
                hi[i] = hi[i].max(*c);
            }
        }
        let set = points.iter().copied().collect();
        Ok(LatticeRegion {
            kind,
            bbox_lo: LatticePoint::new(&lo),
            bbox_hi: LatticePoint::new(&hi),
            points,
            set,
            dim,
        })
    }

    /// Elementary region: a shape translated to `center`.
    pub fn elementary(shape: ElementaryShape, center: LatticePoint) -> Self {
        let pts = shape.points(&center);
        Self::from_sorted_kind(RegionKind::Elementary { shape, center }, pts)
            .expect("elementary regions are nonempty")
    }

    /// The cube `[−N,N]^d` centered at origin.
    pub fn cube(dim: usize, size: i64) -> Self {
        Self::elementary(ElementaryShape::cube(dim, size), LatticePoint::zero(dim))
    }

    /// Generalized elementary region `R \ (R + z)`.
    pub fn generalized(rect: Rect, shift: &[i64]) -> Result<Self> {
        if shift.len() != rect.dim() {
            return Err(Error::param("shift", "dimension mismatch"));
        }
        let z = LatticePoint::new(shift);
        let pts: Vec<LatticePoint> = rect
            .points()
            .into_iter()
            .filter(|p| {
                let moved: Vec<i64> = p.coords().iter().zip(z.coords()).map(|(c, s)| c - s).collect();
                !rect.contains(&LatticePoint::new(&moved))
            })
            .collect();
        Self::from_sorted_kind(RegionKind::Generalized { rect, shift: z }, pts)
    }

    /// Explicit point set.
    pub fn explicit(points: Vec<LatticePoint>) -> Result<Self> {
        Self::from_sorted_kind(RegionKind::Explicit, points)
    }

    pub fn kind(&self) -> &RegionKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[LatticePoint] {
        &self.points
    }

    pub fn contains(&self, p: &LatticePoint) -> bool {
        self.set.contains(p)
    }

    /// Index of `p` in the canonical enumeration.
    pub fn index_of(&self, p: &LatticePoint) -> Option<usize> {
        self.points.binary_search(p).ok()
    }

    pub fn bbox(&self) -> (&LatticePoint, &LatticePoint) {
        (&self.bbox_lo, &self.bbox_hi)
    }

    /// Sup-norm diameter `sup_{n,n'} |n−n'|`; equals the largest coordinate
    /// range because the norm is the sup norm.
    pub fn diam(&self) -> i64 {
        self.bbox_lo
            .coords()
            .iter()
            .zip(self.bbox_hi.coords())
            .map(|(l, h)| h - l)
            .max()
            .unwrap_or(0)
    }

    /// `dist(m, Λ) = inf_{n∈Λ} |m−n|` (0 when `m ∈ Λ`).
    pub fn dist_point(&self, m: &LatticePoint) -> i64 {
        if self.contains(m) {
            return 0;
        }
        self.points.iter().map(|p| p.sup_dist(m)).min().unwrap()
    }

    pub fn translate(&self, offset: &[i64]) -> LatticeRegion {
        let pts: Vec<LatticePoint> = self.points.iter().map(|p| p.add(offset)).collect();
        let kind = match &self.kind {
            RegionKind::Elementary { shape, center } => RegionKind::Elementary {
                shape: *shape,
                center: center.add(offset),
            },
            RegionKind::Generalized { rect, shift } => RegionKind::Generalized {
                rect: Rect::new(
                    &rect
                        .lo
                        .add(offset)
                        .coords()
                        .to_vec(),
                    &rect.hi.add(offset).coords().to_vec(),
                )
                .unwrap(),
                shift: *shift,
            },
            RegionKind::Explicit => RegionKind::Explicit,
        };
        Self::from_sorted_kind(kind, pts).expect("translate preserves nonemptiness")
    }

    /// Set difference as an explicit region; `None` when empty.
    pub fn difference(&self, other: &LatticeRegion) -> Option<LatticeRegion> {
        let pts: Vec<LatticePoint> = self
            .points
            .iter()
            .filter(|p| !other.contains(p))
            .copied()
            .collect();
        if pts.is_empty() {
            None
        } else {
            Some(Self::from_sorted_kind(RegionKind::Explicit, pts).unwrap())
        }
    }

    /// JSON object `{kind, params, points?}` for the CLI.
    pub fn to_json(&self, with_points: bool) -> serde_json::Value {
        let (kind, params) = match &self.kind {
            RegionKind::Elementary { shape, center } => (
                "elementary",
                serde_json::json!({
                    "size": shape.size(),
                    "signs": shape.signs(),
                    "center": center.coords(),
                }),
            ),
            RegionKind::Generalized { rect, shift } => (
                "generalized",
                serde_json::json!({
                    "lo": rect.lo.coords(),
                    "hi": rect.hi.coords(),
                    "shift": shift.coords(),
                }),
            ),
            RegionKind::Explicit => ("explicit", serde_json::json!({})),
        };
        let mut obj = serde_json::json!({
            "kind": kind,
            "params": params,
            "dim": self.dim,
            "len": self.len(),
            "diam": self.diam(),
        });
        if with_points {
            let pts: Vec<Vec<i64>> = self.points.iter().map(|p| p.coords().to_vec()).collect();
            obj["points"] = serde_json::json!(pts);
        }
        obj
    }
}
