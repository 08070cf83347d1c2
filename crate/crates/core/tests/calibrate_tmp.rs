use qplab::lattice::{
    build_exhaustion, enumerate_elementary_shapes, LatticePoint, LatticeRegion,
};

fn scan(d: usize, cases: &[(i64, i64)], center_cap: usize) -> (f64, i64, String) {
    let mut worst = f64::NEG_INFINITY;
    let mut worst_case = String::new();
    let mut worst_merges = 0i64;
    for &(n, m) in cases {
        for shape in enumerate_elementary_shapes(d, n) {
            let base = LatticeRegion::elementary(shape, LatticePoint::zero(d));
            let pts = base.points().to_vec();
            // boundary-biased centers: near-extreme coordinates drive merges
            let mut centers: Vec<LatticePoint> = pts
                .iter()
                .filter(|p| {
                    p.coords()
                        .iter()
                        .any(|c| (c.abs() - n).abs() <= 2 * m + 1)
                })
                .copied()
                .collect();
            centers.push(pts[pts.len() / 2]);
            let step = (centers.len() / center_cap).max(1);
            for x in centers.iter().step_by(step) {
                match build_exhaustion(&base, x, m, 10_000) {
                    Ok(e) => {
                        let rc = e.required_constant();
                        let merges = e.raw_shell_count as i64 - e.shells.len() as i64;
                        worst_merges = worst_merges.max(merges);
                        if rc > worst {
                            worst = rc;
                            worst_case = format!("d={d} N={n} M={m} x={x:?} shape={shape:?}");
                        }
                    }
                    Err(err) => panic!("d={d} N={n} M={m} x={x:?}: {err}"),
                }
            }
        }
    }
    (worst, worst_merges, worst_case)
}

#[test]
#[ignore]
fn calibrate_d1() {
    let (w, m, c) = scan(1, &[(10, 1), (20, 1), (20, 2), (40, 4), (47, 3), (100, 7)], 500);
    println!("d=1: worst required constant {w:.2}, max merges {m}\n   at {c}");
}

#[test]
#[ignore]
fn calibrate_d2() {
    let (w, m, c) = scan(2, &[(10, 1), (15, 1), (20, 2), (25, 2)], 60);
    println!("d=2: worst required constant {w:.2}, max merges {m}\n   at {c}");
}

#[test]
#[ignore]
fn calibrate_d3() {
    let (w, m, c) = scan(3, &[(10, 1), (12, 1)], 12);
    println!("d=3: worst required constant {w:.2}, max merges {m}\n   at {c}");
}
