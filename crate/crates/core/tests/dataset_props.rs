use polyseg::contour::{CartesianContour, Point, Ray};
use polyseg::dataset::{
    augment_all, flip_sample, image_center, rotate_point, rotate_sample, synth_generate, AugmentSpec, Flip,
    LabeledSample, SynthSpec,
};

fn spec(count: usize) -> SynthSpec {
    SynthSpec { count, ..SynthSpec::default() }
}

/// Farthest boundary crossing of the ray from `center` at `angle`.
fn ray_radius(contour: &CartesianContour, center: Point, angle: f64) -> f64 {
    let ray = Ray::new(center, angle);
    contour.edges().filter_map(|(p, q)| ray.hit_segment(p, q)).fold(f64::NAN, f64::max)
}

/// Mean intensity of pixels inside `inner` (and outside `outer_hole` when given).
fn region_mean(s: &LabeledSample, inside: &CartesianContour, hole: Option<&CartesianContour>) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for y in 0..s.size() {
        for x in 0..s.size() {
            let p = Point::new(x as f64, y as f64);
            if inside.contains(p) && !hole.is_some_and(|h| h.contains(p)) {
                sum += s.image.get(x, y, 0) as f64;
                n += 1;
            }
        }
    }
    sum / n as f64
}

#[test]
fn flips_commute_with_resampling() {
    for s in synth_generate(&spec(20)).unwrap() {
        let n = s.n_v();
        for (flip, map) in [
            (Flip::LeftRight, (|k: usize, n: usize| (n + n / 2 - k) % n) as fn(usize, usize) -> usize),
            (Flip::UpDown, |k, n| (n - k) % n),
            (Flip::Both, |k, n| (k + n / 2) % n),
        ] {
            let f = flip_sample(&s, flip).unwrap();
            for (orig, new) in [(&s.lumen_chain, &f.lumen_chain), (&s.media_chain, &f.media_chain)] {
                for k in 0..n {
                    let expected = orig.radii()[map(k, n)];
                    assert!((new.radii()[k] - expected).abs() < 1e-9, "{flip:?} ray {k}");
                }
            }
            for y in 0..s.size() {
                for x in 0..s.size() {
                    let p = flip.apply(Point::new(x as f64, y as f64), s.size());
                    assert_eq!(f.image.get(x, y, 0), s.image.get(p.x as usize, p.y as usize, 0));
                }
            }
        }
    }
}

#[test]
fn rotation_commutes_with_resampling() {
    for (i, s) in synth_generate(&spec(10)).unwrap().iter().enumerate() {
        let angle = 0.37 * i as f64 - 1.1;
        let r = rotate_sample(s, angle).unwrap();
        let center = image_center(s.size());
        for (orig, chain) in [(&s.lumen_gt, &r.lumen_chain), (&s.media_gt, &r.media_chain)] {
            for k in 0..chain.n_v() {
                let expected = ray_radius(orig, center, chain.angle(k) - angle);
                assert!((chain.radii()[k] - expected).abs() < 1e-6, "sample {i} ray {k}");
            }
        }
        let moved = rotate_point(Point::new(3.0, 5.0), center, angle);
        let back = rotate_point(moved, center, -angle);
        assert!(back.distance(Point::new(3.0, 5.0)) < 1e-12);
    }
}

#[test]
fn augmented_images_follow_their_labels() {
    let data = synth_generate(&SynthSpec { count: 6, noise: 0.0, speckle: 0.0, ..SynthSpec::default() }).unwrap();
    let aug = augment_all(&data, &AugmentSpec { noise_variance_255: 0.0, seed: 5, ..AugmentSpec::default() }).unwrap();
    assert_eq!(aug.len(), 30);
    for s in &aug {
        let lumen = region_mean(s, &s.lumen_gt, None);
        let ring = region_mean(s, &s.media_gt, Some(&s.lumen_gt));
        assert!(lumen < 0.2 && ring > 0.65, "{}: lumen {lumen}, ring {ring}", s.id);
    }
}

#[test]
fn generated_and_augmented_samples_are_nested() {
    let data = synth_generate(&spec(200)).unwrap();
    let aug = augment_all(&data[..40], &AugmentSpec { seed: 2, ..AugmentSpec::default() }).unwrap();
    for s in data.iter().chain(&aug) {
        s.check_nested().unwrap();
        assert!(s.lumen_chain.radii().iter().zip(s.media_chain.radii()).all(|(l, m)| m >= l));
    }
}

#[test]
fn synth_is_bit_reproducible() {
    let s = SynthSpec { count: 12, seed: 77, ..SynthSpec::default() };
    let a = synth_generate(&s).unwrap();
    let b = synth_generate(&s).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.image.data, y.image.data);
        assert_eq!(x.lumen_gt, y.lumen_gt);
        assert_eq!(x.media_gt, y.media_gt);
    }
    let other = synth_generate(&SynthSpec { seed: 78, ..s }).unwrap();
    assert_ne!(a[0].image.data, other[0].image.data);
}
