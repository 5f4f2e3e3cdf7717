use std::f64::consts::TAU;

use polyseg::contour::{resample, segment_intersection, shoelace_area, CartesianContour, Point, PolarChain};
use proptest::prelude::*;

/// Star-shaped polygon: vertices at sorted jittered angles about `center`.
fn star(center: Point, radii: &[f64], jitter: &[f64]) -> (CartesianContour, Vec<f64>) {
    let n = radii.len();
    let angles: Vec<f64> = (0..n).map(|j| TAU * (j as f64 + 0.8 * jitter[j]) / n as f64).collect();
    let pts = angles.iter().zip(radii).map(|(&a, &r)| Point::from_polar(center, r, a)).collect();
    (CartesianContour::new(pts).unwrap(), angles)
}

fn star_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, (f64, f64))> {
    (5usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(1.0f64..20.0, n),
            prop::collection::vec(0.0f64..1.0, n),
            (-50.0f64..50.0, -50.0f64..50.0),
        )
    })
}

proptest! {
    #[test]
    fn resampled_vertices_lie_on_boundary((radii, jitter, c) in star_strategy(), n_v in 3usize..100) {
        let center = Point::new(c.0, c.1);
        let (contour, angles) = star(center, &radii, &jitter);
        let chain = resample(&contour, center, n_v).unwrap();
        let pts = contour.points();
        let n = pts.len();
        for k in 0..n_v {
            let phi = chain.angle(k);
            // Edge whose end angles bracket the ray, by construction of the star.
            let j = (0..n).rev().find(|&j| angles[j] <= phi).unwrap_or(n - 1);
            let (p, q) = (pts[j] - center, pts[(j + 1) % n] - center);
            let d = Point::new(phi.cos(), phi.sin());
            let t = p.cross(q - p) / d.cross(q - p);
            prop_assert!((chain.radii()[k] - t).abs() <= 1e-9 * t.max(1.0), "ray {k}: {} vs {t}", chain.radii()[k]);
        }
    }

    #[test]
    fn triangle_fan_equals_shoelace(radii in prop::collection::vec(0.01f64..50.0, 3..128), cx in -100.0f64..100.0, cy in -100.0f64..100.0) {
        let n = radii.len();
        let chain = PolarChain::new(Point::new(cx, cy), radii.clone()).unwrap();
        let fan: f64 = (0..n).map(|k| 0.5 * radii[k] * radii[(k + 1) % n] * (TAU / n as f64).sin()).sum();
        let shoelace = shoelace_area(chain.to_cartesian().points()).abs();
        prop_assert!((fan - shoelace).abs() <= 1e-9 * fan.max(1.0));
    }

    #[test]
    fn shoelace_flips_sign_on_reversal(pts in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..50)) {
        let fwd: Vec<Point> = pts.iter().map(|&(x, y)| Point::new(x, y)).collect();
        let rev: Vec<Point> = fwd.iter().rev().copied().collect();
        let (a, b) = (shoelace_area(&fwd), shoelace_area(&rev));
        prop_assert!((a + b).abs() <= 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn segment_intersection_is_symmetric(c in prop::array::uniform8(-10.0f64..10.0)) {
        let [a, b, p, q] = [(c[0], c[1]), (c[2], c[3]), (c[4], c[5]), (c[6], c[7])].map(|(x, y)| Point::new(x, y));
        let one = segment_intersection(a, b, p, q);
        let two = segment_intersection(p, q, a, b);
        match (one, two) {
            (Ok(Some(x)), Ok(Some(y))) => prop_assert!(x.distance(y) <= 1e-9),
            (Ok(None), Ok(None)) | (Err(_), Err(_)) => {}
            other => prop_assert!(false, "asymmetric result {other:?}"),
        }
    }
}
