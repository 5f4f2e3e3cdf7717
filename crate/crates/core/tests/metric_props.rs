use std::f64::consts::TAU;

use polyseg::contour::{CartesianContour, Point};
use polyseg::loss::{jm_exact, SegmentPair};
use polyseg::metrics::{global_jm, hausdorff, hd_paper_literal};
use proptest::prelude::*;

fn star(c: (f64, f64), radii: &[f64]) -> CartesianContour {
    let n = radii.len();
    let pts = radii
        .iter()
        .enumerate()
        .map(|(k, &r)| Point::from_polar(Point::new(c.0, c.1), r, TAU * k as f64 / n as f64))
        .collect();
    CartesianContour::new(pts).unwrap()
}

fn star_strategy() -> impl Strategy<Value = CartesianContour> {
    (prop::collection::vec(5.0f64..20.0, 6..40), (-4.0f64..4.0, -4.0f64..4.0)).prop_map(|(r, c)| star(c, &r))
}

fn point_set() -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0).prop_map(|(x, y)| Point::new(x, y)), 1..60)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn raster_jm_converges(a in star_strategy(), b in star_strategy(), res in prop::sample::select(vec![256usize, 512, 1024])) {
        let coarse = global_jm(&a, &b, res).unwrap();
        let fine = global_jm(&a, &b, 2 * res).unwrap();
        prop_assert!((coarse - fine).abs() < 2e-3f64.max(4.0 / res as f64), "{coarse} vs {fine} at {res}");
    }

    #[test]
    fn raster_jm_matches_wedge_overlap(
        r in prop::array::uniform4(0.1f64..1.0),
        t in prop::sample::select(vec![TAU / 16.0, TAU / 32.0, TAU / 64.0]),
    ) {
        let seg = SegmentPair::new(r[0], r[1], r[2], r[3], t).unwrap();
        let pred = CartesianContour::new(seg.pred_triangle().to_vec()).unwrap();
        let gt = CartesianContour::new(seg.gt_triangle().to_vec()).unwrap();
        let raster = global_jm(&pred, &gt, 2048).unwrap();
        prop_assert!((raster - jm_exact(&seg).jm).abs() < 2e-3);
    }
}

proptest! {
    #[test]
    fn hausdorff_axioms(x in point_set(), y in point_set(), z in point_set()) {
        let xy = hausdorff(&x, &y).unwrap();
        prop_assert_eq!(xy, hausdorff(&y, &x).unwrap());
        prop_assert_eq!(hausdorff(&x, &x).unwrap(), 0.0);
        let xz = hausdorff(&x, &z).unwrap();
        let zy = hausdorff(&z, &y).unwrap();
        prop_assert!(xy <= xz + zy + 1e-9);
        prop_assert!(hd_paper_literal(&x, &y).unwrap() >= xy);
    }
}
