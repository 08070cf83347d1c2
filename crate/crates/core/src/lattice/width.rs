//! The width decision procedure.
//!
//! A set `Λ` has width at least `M` when every `n ∈ Λ` sits inside some
//! translated elementary region `Ê` of size `M` with `Ê ⊂ Λ` and
//! `dist(n, Λ\Ê) ≥ M/2`.  The search is exhaustive over the finitely many
//! translates whose bounding cube contains `n`, for every shape; `M/2` is
//! compared as `2·dist ≥ M` in integers.  When `Λ\Ê` is empty the distance
//! condition holds vacuously.

use rayon::prelude::*;

use super::{enumerate_elementary_shapes, iter_box, ElementaryShape, LatticePoint, LatticeRegion};

/// A window certificate for one point: the shape and its center.
#[derive(Clone, Copy, Debug)]
pub struct Window {
    pub shape: ElementaryShape,
    pub center: LatticePoint,
}

impl Window {
    pub fn contains(&self, p: &LatticePoint) -> bool {
        self.shape.contains_rel(&p.sub(&self.center))
    }

    pub fn points(&self) -> Vec<LatticePoint> {
        self.shape.points(&self.center)
    }
}

/// All region points within sup distance `r` of `n` must satisfy `f`.
#[inline]
fn ball_ok(
    region: &LatticeRegion,
    n: &LatticePoint,
    r: i64,
    window: &Window,
) -> bool {
    if r < 0 {
        return true;
    }
    let lo: Vec<i64> = n.coords().iter().map(|c| c - r).collect();
    let hi: Vec<i64> = n.coords().iter().map(|c| c + r).collect();
    for y in iter_box(&lo, &hi) {
        if region.contains(&y) && !window.contains(&y) {
            return false;
        }
    }
    true
}

fn window_valid(
    region: &LatticeRegion,
    n: &LatticePoint,
    m: i64,
    window: &Window,
) -> bool {
    // point inside the window
    if !window.contains(n) {
        return false;
    }
    // bounding-box fit: every elementary shape spans its full bounding cube
    // in each axis, so the cube must fit inside the region's bounding box
    let (blo, bhi) = region.bbox();
    for ((c, l), h) in window
        .center
        .coords()
        .iter()
        .zip(blo.coords())
        .zip(bhi.coords())
    {
        if c - m < *l || c + m > *h {
            return false;
        }
    }
    // distance condition: no region point outside the window within M/2,
    // i.e. every region point with 2|y−n| ≤ M−1 lies in the window
    if !ball_ok(region, n, (m - 1).div_euclid(2), window) {
        return false;
    }
    // cheap probes: surviving corners of the window must belong to the region
    for corner in window.shape.surviving_corners() {
        let p = window.center.add(corner.coords());
        if !region.contains(&p) {
            return false;
        }
    }
    // full subset scan with early bail
    let lo: Vec<i64> = window.center.coords().iter().map(|c| c - m).collect();
    let hi: Vec<i64> = window.center.coords().iter().map(|c| c + m).collect();
    for p in iter_box(&lo, &hi) {
        if window.shape.contains_rel(&p.sub(&window.center)) && !region.contains(&p) {
            return false;
        }
    }
    true
}

/// Exhaustive search for a window of size `m` certifying `n` inside `region`,
/// restricted to windows the caller `accept`s.  Tries the cube centered at
/// `n` first (its distance condition is automatic), then every shape at
/// every translate whose bounding cube contains `n`.
pub fn find_window(
    region: &LatticeRegion,
    n: &LatticePoint,
    m: i64,
    accept: &mut dyn FnMut(&Window) -> bool,
) -> Option<Window> {
    debug_assert!(region.contains(n));
    let dim = region.dim();
    let centered = Window {
        shape: ElementaryShape::cube(dim, m),
        center: *n,
    };
    if window_valid(region, n, m, &centered) && accept(&centered) {
        return Some(centered);
    }
    let shapes = enumerate_elementary_shapes(dim, m);
    let lo: Vec<i64> = n.coords().iter().map(|c| c - m).collect();
    let hi: Vec<i64> = n.coords().iter().map(|c| c + m).collect();
    for center in iter_box(&lo, &hi) {
        for shape in &shapes {
            if center == *n && shape.is_cube() {
                continue; // already tried
            }
            let w = Window {
                shape: *shape,
                center,
            };
            if window_valid(region, n, m, &w) && accept(&w) {
                return Some(w);
            }
        }
    }
    None
}

/// First window certifying `n`, with no side conditions.
pub fn point_window(region: &LatticeRegion, n: &LatticePoint, m: i64) -> Option<Window> {
    find_window(region, n, m, &mut |_| true)
}

/// Decision procedure: does every point of `region` admit a size-`m` window?
pub fn has_width_at_least(region: &LatticeRegion, m: i64) -> bool {
    assert!(m >= 1, "width threshold must be ≥ 1");
    if region.is_empty() {
        return false;
    }
    // necessary: the bounding box must host a (2m+1)-wide cube in every axis
    let (lo, hi) = region.bbox();
    if lo.coords().iter().zip(hi.coords()).any(|(l, h)| h - l < 2 * m) {
        return false;
    }
    region
        .points()
        .par_iter()
        .all(|n| point_window(region, n, m).is_some())
}

/// The width of `region`: the largest `m ≤ m_max` accepted by the decision
/// procedure, or 0.  Scans downward; width is not assumed monotone in `m`,
/// so no bisection.
pub fn width(region: &LatticeRegion, m_max: i64) -> i64 {
    assert!(m_max >= 1);
    let (lo, hi) = region.bbox();
    let bound = lo
        .coords()
        .iter()
        .zip(hi.coords())
        .map(|(l, h)| (h - l) / 2)
        .min()
        .unwrap_or(0);
    let mut m = m_max.min(bound);
    while m >= 1 {
        if has_width_at_least(region, m) {
            return m;
        }
        m -= 1;
    }
    0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{CornerSign, Rect};

    #[test]
    fn cube_width_is_its_size() {
        // decision procedure at M = N and M = N+1
        for d in 1..=2usize {
            for n in [3i64, 5] {
                let c = LatticeRegion::cube(d, n);
                assert!(has_width_at_least(&c, n), "d={d} N={n}");
                assert!(!has_width_at_least(&c, n + 1), "d={d} N={n}");
                assert_eq!(width(&c, n + 2), n);
            }
        }
    }

    #[test]
    fn square_decision_boundary() {
        let c = LatticeRegion::cube(2, 5);
        assert!(has_width_at_least(&c, 5));
        assert!(!has_width_at_least(&c, 6));
    }

    #[test]
    fn single_point_has_no_width() {
        let r = LatticeRegion::explicit(vec![LatticePoint::zero(2)]).unwrap();
        assert!(!has_width_at_least(&r, 1));
        assert_eq!(width(&r, 5), 0);
    }

    #[test]
    fn line_in_z2_has_width_zero() {
        let pts = (0..10).map(|k| LatticePoint::new(&[0, k])).collect();
        let line = LatticeRegion::explicit(pts).unwrap();
        assert_eq!(width(&line, 4), 0);
    }

    #[test]
    fn l_shape_width_equals_size() {
        // the corner-cut elementary region itself has width N
        for n in [2i64, 4] {
            let shape = ElementaryShape::with_signs(
                2,
                n,
                &[CornerSign::Greater, CornerSign::Greater],
            )
            .unwrap();
            let r = LatticeRegion::elementary(shape, LatticePoint::zero(2));
            assert_eq!(width(&r, n + 2), n);
        }
    }

    #[test]
    fn thin_neck_width_tracks_neck_thickness() {
        // rectangle minus a shifted rectangle leaving a neck of thickness t:
        // as the neck thins the width drops
        let mut widths = Vec::new();
        for t in [6i64, 3, 1] {
            // [0,20]×[0,12] minus [0,14]×[t,12] leaves an L with arm thickness t
            let rect = Rect::new(&[0, 0], &[20, 12]).unwrap();
            let pts: Vec<LatticePoint> = rect
                .points()
                .into_iter()
                .filter(|p| {
                    let c = p.coords();
                    !(c[0] <= 14 && c[1] >= t)
                })
                .collect();
            let r = LatticeRegion::explicit(pts).unwrap();
            widths.push(width(&r, 8));
        }
        assert!(
            widths[0] >= widths[1] && widths[1] >= widths[2],
            "widths should shrink with the neck: {widths:?}"
        );
        assert!(widths[2] <= 1);
    }
}
