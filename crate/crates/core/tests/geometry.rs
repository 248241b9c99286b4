mod common;

use common::{brute_force_circle, brute_force_emd, monte_carlo_overlap};
use dentgen_core::boundary::{cyl_overlap, fit_points, min_enclosing_circle, CylBound};
use dentgen_core::metrics::*;
use dentgen_core::point::Point3;
use dentgen_core::rng;
use proptest::prelude::*;
use rand::Rng;

fn cloud(r: &mut rng::Rng, n: usize, spread: f64) -> Vec<Point3<f64>> {
    (0..n).map(|_| [0, 1, 2].map(|_| r.random_range(-spread..spread))).collect()
}

#[test]
fn emd_matches_exhaustive_matching() {
    let mut r = rng::seeded(21);
    for trial in 0..100 {
        let n = 1 + trial % 6;
        let a = cloud(&mut r, n, 5.0);
        let b = cloud(&mut r, n, 5.0);
        let fast = emd(&a, &b).unwrap();
        let slow = brute_force_emd(&a, &b);
        assert!((fast - slow).abs() < 1e-12, "n={n}: {fast} vs {slow}");
    }
}

#[test]
fn chamfer_tree_matches_brute_force() {
    let mut r = rng::seeded(22);
    for _ in 0..100 {
        let a = cloud(&mut r, 50, 10.0);
        let b = cloud(&mut r, 50, 10.0);
        assert_eq!(chamfer_l1(&a, &b).unwrap(), chamfer_l1_brute(&a, &b).unwrap());
    }
}

#[test]
fn identical_clouds_have_zero_distance() {
    let mut r = rng::seeded(23);
    let a = cloud(&mut r, 40, 3.0);
    assert_eq!(chamfer_l1(&a, &a).unwrap(), 0.0);
    assert_eq!(emd(&a, &a).unwrap(), 0.0);
    let pr = f1_at(&a, &a, 0.1).unwrap();
    assert_eq!(pr.f1, 1.0);
}

#[test]
fn cylinder_overlap_matches_sampling() {
    let mut r = rng::seeded(24);
    for _ in 0..20 {
        let a = CylBound::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(1.0..4.0), r.random_range(2.0..8.0)).unwrap();
        let b = CylBound::new(r.random_range(-2.0..2.0), r.random_range(-2.0..2.0), r.random_range(-2.0..2.0), r.random_range(1.0..4.0), r.random_range(2.0..8.0)).unwrap();
        let exact = cyl_overlap(&a, &b);
        let (dice, iou) = monte_carlo_overlap(&a, &b, 1_000_000, &mut r);
        assert!((exact.dice - dice).abs() < 5e-3, "dice {} vs {dice}", exact.dice);
        assert!((exact.iou - iou).abs() < 5e-3, "iou {} vs {iou}", exact.iou);
    }
}

#[test]
fn welzl_matches_exhaustive_circle() {
    let mut r = rng::seeded(25);
    for trial in 0..50 {
        let n = 1 + trial % 10;
        let p: Vec<[f64; 2]> = (0..n).map(|_| [r.random_range(-5.0..5.0), r.random_range(-5.0..5.0)]).collect();
        let c = min_enclosing_circle(&p).unwrap();
        let (center, radius) = brute_force_circle(&p);
        assert!((c.radius - radius).abs() < 1e-9, "n={n}: {} vs {radius}", c.radius);
        if n > 1 {
            assert!((c.center[0] - center[0]).abs() < 1e-9 && (c.center[1] - center[1]).abs() < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn overlap_bounds_and_symmetry(v in proptest::array::uniform4(0.5f64..5.0), s in proptest::array::uniform6(-3.0f64..3.0)) {
        let a = CylBound::new(s[0], s[1], s[2], v[0], v[1]).unwrap();
        let b = CylBound::new(s[3], s[4], s[5], v[2], v[3]).unwrap();
        let ab = cyl_overlap(&a, &b);
        let ba = cyl_overlap(&b, &a);
        prop_assert!((ab.dice - ba.dice).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab.dice));
        prop_assert!(ab.iou <= ab.dice + 1e-12);
        prop_assert!((ab.dice - 2.0 * ab.iou / (1.0 + ab.iou)).abs() < 1e-9);
        prop_assert!((cyl_overlap(&a, &a).dice - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fitted_cylinder_contains_points(seed in any::<u64>(), n in 2usize..60) {
        let mut r = rng::seeded(seed);
        let pts = cloud(&mut r, n, 6.0);
        prop_assert!(fit_points(&pts[..1]).is_err());
        let b = fit_points(&pts).unwrap();
        for p in &pts {
            prop_assert!(b.contains(p, 1e-9));
        }
    }

    #[test]
    fn chamfer_is_a_symmetric_semimetric(seed in any::<u64>(), n in 1usize..40, m in 1usize..40) {
        let mut r = rng::seeded(seed);
        let a = cloud(&mut r, n, 4.0);
        let b = cloud(&mut r, m, 4.0);
        let ab = chamfer_l1(&a, &b).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(ab, chamfer_l1(&b, &a).unwrap());
    }

    #[test]
    fn knn_agrees_with_sorting(seed in any::<u64>(), n in 1usize..80, k in 1usize..10) {
        let mut r = rng::seeded(seed);
        let pts = cloud(&mut r, n, 5.0);
        let q = [0.3, -0.2, 0.1];
        let tree = KdTree::new(&pts);
        let got: Vec<f64> = tree.knn(&q, k).into_iter().map(|(_, d)| d).collect();
        let mut all: Vec<f64> = pts.iter().map(|p| dentgen_core::point::dist_sq3(p, &q)).collect();
        all.sort_by(f64::total_cmp);
        all.truncate(k);
        prop_assert_eq!(got.len(), all.len());
        for (a, b) in got.iter().zip(&all) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
