//! Unions of half-open axis-aligned boxes in `[0,1)^b` and exact orbit hit
//! counts against them — the primitive behind the sublinear-bound checks.

use serde::{Deserialize, Serialize};

use super::TorusPoint;
use crate::{Error, Result};

/// Half-open box `[lo_1,hi_1) × … × [lo_b,hi_b)` inside `[0,1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl TorusBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() || lo.len() > 4 {
            return Err(Error::param("box", "bad dimension"));
        }
        for (l, h) in lo.iter().zip(&hi) {
            if !(0.0..=1.0).contains(l) || !(0.0..=1.0).contains(h) || l >= h {
                return Err(Error::param("box", format!("bad bounds [{l}, {h})")));
            }
        }
        Ok(TorusBox { lo, hi })
    }

    pub fn b(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }

    pub fn contains(&self, p: &TorusPoint) -> bool {
        p.coords()
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(x, (l, h))| l <= x && x < h)
    }

    fn intersects(&self, other: &TorusBox) -> bool {
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(other.lo.iter().zip(&other.hi))
            .all(|((l, h), (ol, oh))| l < oh && ol < h)
    }
}

/// A canonical union of pairwise disjoint boxes: intervals are merged in 1-D,
/// overlaps are rejected in higher dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxUnion {
    b: usize,
    boxes: Vec<TorusBox>,
}

impl BoxUnion {
    pub fn empty(b: usize) -> Self {
        BoxUnion { b, boxes: vec![] }
    }

    pub fn new(b: usize, boxes: Vec<TorusBox>) -> Result<Self> {
        if boxes.iter().any(|bx| bx.b() != b) {
            return Err(Error::param("boxes", "dimension mismatch"));
        }
        if b == 1 {
            let ivals: Vec<(f64, f64)> =
                boxes.iter().map(|bx| (bx.lo[0], bx.hi[0])).collect();
            return Ok(Self::from_intervals(&ivals));
        }
        let mut sorted = boxes;
        sorted.sort_by(|a, b| {
            a.lo.iter()
                .zip(&b.lo)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| !o.is_eq())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        for i in 0..sorted.len() {
            for j in (i + 1)..sorted.len() {
                if sorted[i].intersects(&sorted[j]) {
                    return Err(Error::param("boxes", "boxes must be pairwise disjoint"));
                }
            }
        }
        Ok(BoxUnion { b, boxes: sorted })
    }

    /// 1-D union with overlapping or touching intervals merged; intervals are
    /// clipped to `[0,1)` (callers split wrap-around pieces beforehand).
    pub fn from_intervals(intervals: &[(f64, f64)]) -> Self {
        let mut iv: Vec<(f64, f64)> = intervals
            .iter()
            .map(|&(a, b)| (a.clamp(0.0, 1.0), b.clamp(0.0, 1.0)))
            .filter(|(a, b)| a < b)
            .collect();
        iv.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for (a, b) in iv {
            match merged.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        BoxUnion {
            b: 1,
            boxes: merged
                .into_iter()
                .map(|(a, b)| TorusBox { lo: vec![a], hi: vec![b] })
                .collect(),
        }
    }

    pub fn b(&self) -> usize {
        self.b
    }

    pub fn boxes(&self) -> &[TorusBox] {
        &self.boxes
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn measure(&self) -> f64 {
        self.boxes.iter().map(|b| b.volume()).sum()
    }

    pub fn contains(&self, p: &TorusPoint) -> bool {
        if self.b == 1 {
            // boxes sorted by lo; binary search the last interval starting ≤ x
            let x = p.coords()[0];
            let i = self
                .boxes
                .partition_point(|bx| bx.lo[0] <= x);
            return i > 0 && x < self.boxes[i - 1].hi[0];
        }
        self.boxes.iter().any(|b| b.contains(p))
    }

    /// Complement within `[0,1)` for 1-D unions.
    pub fn complement_1d(&self) -> Result<BoxUnion> {
        if self.b != 1 {
            return Err(Error::param("union", "complement implemented for b = 1"));
        }
        let mut out = Vec::new();
        let mut cursor = 0.0f64;
        for bx in &self.boxes {
            if bx.lo[0] > cursor {
                out.push((cursor, bx.lo[0]));
            }
            cursor = bx.hi[0];
        }
        if cursor < 1.0 {
            out.push((cursor, 1.0));
        }
        Ok(BoxUnion::from_intervals(&out))
    }
}

/// Exact number of orbit points landing in the union.
pub fn count_hits(points: &[TorusPoint], union: &BoxUnion) -> usize {
    points.iter().filter(|p| union.contains(p)).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::{discrepancy, DiscrepancyMethod, Dynamics, GOLDEN};

    #[test]
    fn full_cube_counts_everything() {
        let pts: Vec<TorusPoint> = (0..100)
            .map(|k| TorusPoint::new(&[k as f64 / 100.0, (k as f64 * 0.37) % 1.0]))
            .collect();
        let cube = BoxUnion::new(
            2,
            vec![TorusBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap()],
        )
        .unwrap();
        assert_eq!(count_hits(&pts, &cube), 100);
        assert_eq!(count_hits(&pts, &BoxUnion::empty(2)), 0);
    }

    #[test]
    fn interval_merging_canonicalizes() {
        let u = BoxUnion::from_intervals(&[(0.5, 0.7), (0.1, 0.3), (0.25, 0.55)]);
        assert_eq!(u.boxes().len(), 1);
        assert!((u.measure() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn overlapping_2d_boxes_rejected() {
        let a = TorusBox::new(vec![0.0, 0.0], vec![0.5, 0.5]).unwrap();
        let b = TorusBox::new(vec![0.4, 0.4], vec![0.6, 0.6]).unwrap();
        assert!(BoxUnion::new(2, vec![a, b]).is_err());
    }

    #[test]
    fn partition_counts_add_up() {
        let pts: Vec<TorusPoint> = (0..977)
            .map(|k| TorusPoint::new(&[(k as f64 * GOLDEN) % 1.0]))
            .collect();
        let u = BoxUnion::from_intervals(&[(0.0, 0.25), (0.5, 0.8)]);
        let comp = u.complement_1d().unwrap();
        assert_eq!(count_hits(&pts, &u) + count_hits(&pts, &comp), 977);
    }

    #[test]
    fn golden_orbit_hits_track_box_measure() {
        let dynamics = Dynamics::Shift { omega: vec![GOLDEN] };
        let pts = dynamics
            .orbit_sequence(&TorusPoint::zero(1), 1000)
            .unwrap();
        let u = BoxUnion::from_intervals(&[(0.0, 0.1)]);
        let hits = count_hits(&pts, &u) as f64;
        let st = discrepancy(&pts, DiscrepancyMethod::Exact1d).unwrap();
        assert!(
            (hits - 100.0).abs() <= 2.0 * 1000.0 * st.d_n,
            "hits {hits} vs 100 ± {}",
            2.0 * 1000.0 * st.d_n
        );
    }
}
