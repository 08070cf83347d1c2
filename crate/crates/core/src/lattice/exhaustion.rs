//! Shell exhaustion of an elementary region around a point.
//!
//! Raw shells grow from `(x+[−2M,2M]^d)∩Λ` by repeated `[−4M,4M]^d`
//! fattening inside `Λ`.  Shells whose annulus or remaining tail would have
//! width below `M` are merged into their neighbors, so every annulus of the
//! final exhaustion has width at least `M`.

use std::collections::HashSet;

use super::{
    has_width_at_least, iter_box, LatticePoint, LatticeRegion, RegionKind,
};
use crate::{Error, Result};

/// Merge/distance constant recorded in every exhaustion.  Calibrated so that
/// the distance sandwich `4(j−1)M ≤ |y−x| ≤ 4jM + C_d·M` holds on all shapes
/// exercised at `d ≤ 3`; boundary merges shift shell indices by up to one
/// extra step per axis, which `3^d` does not absorb at `d = 1`.
pub fn default_merge_constant(dim: usize) -> i64 {
    (3i64.pow(dim as u32)).max(4 * dim as i64 + 2)
}

/// A nested shell decomposition `S_0 ⊂ … ⊂ S_l = Λ` with annuli
/// `A_j = S_j \ S_{j−1}` (`A_0 = S_0`), every annulus of width ≥ `M`.
#[derive(Clone, Debug)]
pub struct Exhaustion {
    pub base: LatticeRegion,
    pub center: LatticePoint,
    pub width: i64,
    pub merge_constant: i64,
    pub shells: Vec<LatticeRegion>,
    pub annuli: Vec<LatticeRegion>,
    /// Number of raw (pre-merge) shells, counting `S̃_0`.
    pub raw_shell_count: usize,
}

impl Exhaustion {
    pub fn shell_count(&self) -> usize {
        self.shells.len()
    }

    /// Distance sandwich for `y` in annulus `j ≥ 1`:
    /// `4(j−1)M ≤ |y−x| ≤ 4jM + C_d·M` with the recorded constant.
    pub fn sandwich_holds(&self, j: usize, y: &LatticePoint) -> bool {
        let m = self.width;
        let d = y.sup_dist(&self.center);
        let j = j as i64;
        4 * (j - 1) * m <= d && d <= 4 * j * m + self.merge_constant * m
    }

    /// Worst `(|y−x| − 4jM)/M` over all annulus points; the smallest constant
    /// that would satisfy the upper sandwich bound on this instance.
    pub fn required_constant(&self) -> f64 {
        let m = self.width as f64;
        let mut worst = f64::NEG_INFINITY;
        for (j, ann) in self.annuli.iter().enumerate().skip(1) {
            for y in ann.points() {
                let v = (y.sup_dist(&self.center) as f64 - 4.0 * j as f64 * self.width as f64) / m;
                worst = worst.max(v);
            }
        }
        worst
    }

    /// Check every invariant: nesting, exhaustion, annulus widths, sandwich.
    pub fn verify(&self) -> Result<()> {
        for w in self.shells.windows(2) {
            if !w[0].points().iter().all(|p| w[1].contains(p)) {
                return Err(Error::Geometry("shells not nested".into()));
            }
        }
        if self.shells.last() != Some(&self.base) {
            return Err(Error::Geometry("shells do not exhaust the base".into()));
        }
        for (j, ann) in self.annuli.iter().enumerate() {
            if !has_width_at_least(ann, self.width) {
                return Err(Error::Geometry(format!("annulus {j} has width < M")));
            }
            if j >= 1 {
                for y in ann.points() {
                    if !self.sandwich_holds(j, y) {
                        return Err(Error::Geometry(format!(
                            "distance sandwich fails at annulus {j}, point {y:?}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn fatten(
    base: &LatticeRegion,
    current: &mut HashSet<LatticePoint>,
    frontier: Vec<LatticePoint>,
    radius: i64,
) -> Vec<LatticePoint> {
    let mut next = Vec::new();
    for y in frontier {
        let lo: Vec<i64> = y.coords().iter().map(|c| c - radius).collect();
        let hi: Vec<i64> = y.coords().iter().map(|c| c + radius).collect();
        for p in iter_box(&lo, &hi) {
            if base.contains(&p) && current.insert(p) {
                next.push(p);
            }
        }
    }
    next
}

fn region_of(set: &HashSet<LatticePoint>) -> LatticeRegion {
    LatticeRegion::explicit(set.iter().copied().collect()).expect("nonempty shell")
}

fn diff_region(a: &HashSet<LatticePoint>, b: Option<&HashSet<LatticePoint>>) -> Option<LatticeRegion> {
    let pts: Vec<LatticePoint> = match b {
        None => a.iter().copied().collect(),
        Some(b) => a.iter().filter(|p| !b.contains(p)).copied().collect(),
    };
    if pts.is_empty() {
        None
    } else {
        Some(LatticeRegion::explicit(pts).unwrap())
    }
}

/// Build the exhaustion of an elementary region `Λ` at `x ∈ Λ` with width
/// `M ≤ N/10`, merging thin shells so that every annulus and every remaining
/// tail keeps width at least `M`.
pub fn build_exhaustion(
    base: &LatticeRegion,
    x: &LatticePoint,
    m: i64,
    merge_constant: i64,
) -> Result<Exhaustion> {
    let size = match base.kind() {
        RegionKind::Elementary { shape, .. } => shape.size(),
        _ => {
            return Err(Error::param(
                "base",
                "exhaustions are built over elementary regions",
            ))
        }
    };
    if m < 1 || 10 * m > size {
        return Err(Error::param("m", format!("need 1 ≤ M ≤ N/10, got M={m}, N={size}")));
    }
    if !base.contains(x) {
        return Err(Error::param("x", "center must lie in the region"));
    }

    // raw shells
    let mut current: HashSet<LatticePoint> = HashSet::new();
    let lo: Vec<i64> = x.coords().iter().map(|c| c - 2 * m).collect();
    let hi: Vec<i64> = x.coords().iter().map(|c| c + 2 * m).collect();
    let mut frontier: Vec<LatticePoint> = Vec::new();
    for p in iter_box(&lo, &hi) {
        if base.contains(&p) && current.insert(p) {
            frontier.push(p);
        }
    }
    let mut raw: Vec<HashSet<LatticePoint>> = vec![current.clone()];
    while current.len() < base.len() {
        frontier = fatten(base, &mut current, frontier, 4 * m);
        if frontier.is_empty() {
            return Err(Error::Geometry(
                "fattening stalled before exhausting the region".into(),
            ));
        }
        raw.push(current.clone());
    }
    let last = raw.len() - 1; // index of S̃_l̃ = Λ

    // greedy merge: S_k = S̃_{j_k}, j_k the smallest index ≥ j_{k−1}+1 whose
    // annulus and remaining tail both have width ≥ M; otherwise j_k = l̃.
    let mut shells: Vec<usize> = Vec::new();
    let mut prev: Option<usize> = None;
    loop {
        let lo_j = prev.map_or(0, |p| p + 1);
        let mut chosen = None;
        for j in lo_j..last {
            let ann = diff_region(&raw[j], prev.map(|p| &raw[p]));
            let tail = diff_region(&raw[last], Some(&raw[j]));
            let ann_ok = ann.map_or(false, |a| has_width_at_least(&a, m));
            let tail_ok = tail.map_or(false, |t| has_width_at_least(&t, m));
            if ann_ok && tail_ok {
                chosen = Some(j);
                break;
            }
        }
        let j = chosen.unwrap_or(last);
        shells.push(j);
        prev = Some(j);
        if j == last {
            break;
        }
    }

    let merges = last as i64 - (shells.len() as i64 - 1);
    if merges > merge_constant {
        return Err(Error::Geometry(format!(
            "needed {merges} merges, budget {merge_constant}; region too ill-shaped"
        )));
    }

    let shell_regions: Vec<LatticeRegion> = shells.iter().map(|&j| region_of(&raw[j])).collect();
    let mut annuli = Vec::with_capacity(shells.len());
    annuli.push(shell_regions[0].clone());
    for k in 1..shells.len() {
        let ann = diff_region(&raw[shells[k]], Some(&raw[shells[k - 1]]))
            .expect("merged annuli are nonempty");
        annuli.push(ann);
    }

    Ok(Exhaustion {
        base: base.clone(),
        center: *x,
        width: m,
        merge_constant,
        shells: shell_regions,
        annuli,
        raw_shell_count: raw.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{enumerate_elementary_shapes, ElementaryShape};

    fn cube_exh(n: i64, x: &[i64], m: i64) -> Exhaustion {
        let d = x.len();
        let base = LatticeRegion::cube(d, n);
        build_exhaustion(
            &base,
            &LatticePoint::new(x),
            m,
            default_merge_constant(d),
        )
        .unwrap()
    }

    #[test]
    fn interval_exhaustion_counts() {
        // 1-D with 4M | N: annulus count l = ⌈N/(4M)⌉ ± 1
        for (n, m) in [(40i64, 1i64), (80, 2), (120, 3)] {
            let e = cube_exh(n, &[0], m);
            e.verify().unwrap();
            let l = e.shell_count() as i64 - 1;
            let expect = (n + 4 * m - 1) / (4 * m);
            assert!(
                (l - expect).abs() <= 1,
                "N={n} M={m}: l={l}, expected {expect}±1"
            );
        }
    }

    #[test]
    fn near_boundary_center_still_verifies() {
        // centers at and next to the endpoint force merges
        for x in [-40i64, -39, -37, 0, 17] {
            let e = cube_exh(40, &[x], 4);
            e.verify().unwrap();
        }
    }

    #[test]
    fn corner_center_in_2d_matches_construction() {
        let e = cube_exh(40, &[-40, 40], 4);
        e.verify().unwrap();
        assert!(e.raw_shell_count >= e.shell_count());
        for ann in &e.annuli {
            assert!(has_width_at_least(ann, 4));
        }
    }

    #[test]
    fn coarsest_width_gives_few_shells() {
        let e = cube_exh(40, &[3], 4);
        assert!(e.shell_count() <= 12);
        let e2 = cube_exh(30, &[1, -2], 3);
        e2.verify().unwrap();
    }

    #[test]
    fn rejects_oversized_width() {
        let base = LatticeRegion::cube(1, 20);
        assert!(build_exhaustion(&base, &LatticePoint::zero(1), 3, 6).is_err());
    }

    #[test]
    fn all_shapes_admit_exhaustions() {
        // every d=2 shape, a few centers, N = 10M
        for shape in enumerate_elementary_shapes(2, 20) {
            let base = LatticeRegion::elementary(shape, LatticePoint::zero(2));
            let pts = base.points().to_vec();
            for idx in [0usize, pts.len() / 2, pts.len() - 1] {
                let e = build_exhaustion(&base, &pts[idx], 2, default_merge_constant(2))
                    .unwrap();
                e.verify().unwrap();
            }
        }
    }

    #[test]
    fn shape_kind_required() {
        let expl = LatticeRegion::explicit(
            ElementaryShape::cube(1, 30).points(&LatticePoint::zero(1)),
        )
        .unwrap();
        assert!(build_exhaustion(&expl, &LatticePoint::zero(1), 3, 6).is_err());
    }
}
