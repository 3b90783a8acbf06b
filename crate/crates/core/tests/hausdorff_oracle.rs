mod common;

use common::*;
use proptest::prelude::*;
use tractalign::curve::Vec3;
use tractalign::metrics::{directed_hausdorff, hausdorff};

fn naive_directed(a: &[Vec3], b: &[Vec3]) -> f64 {
    a.iter()
        .map(|p| b.iter().map(|q| (p - q).norm_squared()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
        .sqrt()
}

fn cloud(seed: u64, n: usize, spread: f64) -> Vec<Vec3> {
    let mut r = rng(seed);
    (0..n).map(|_| gaussian_vec(&mut r) * spread).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matches_naive_scan(s1 in any::<u64>(), s2 in any::<u64>(), n in 1usize..60, m in 1usize..60) {
        let (a, b) = (cloud(s1, n, 1.0), cloud(s2, m, 2.0));
        prop_assert_eq!(directed_hausdorff(&a, &b).unwrap(), naive_directed(&a, &b));
        prop_assert_eq!(hausdorff(&a, &b).unwrap(), naive_directed(&a, &b).max(naive_directed(&b, &a)));
    }

    #[test]
    fn is_a_metric(s1 in any::<u64>(), s2 in any::<u64>(), s3 in any::<u64>()) {
        let (a, b, c) = (cloud(s1, 20, 1.0), cloud(s2, 25, 1.5), cloud(s3, 15, 0.5));
        let d = |x: &[Vec3], y: &[Vec3]| hausdorff(x, y).unwrap();
        prop_assert_eq!(d(&a, &a), 0.0);
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
        prop_assert!(d(&a, &b) > 0.0);
    }
}

#[test]
fn translation_distance() {
    let a = cloud(5, 40, 1.0);
    let shift = Vec3::new(0.0, 0.0, 1e3);
    let b: Vec<Vec3> = a.iter().map(|p| p + shift).collect();
    // Far apart, every nearest neighbour is the shifted copy of the point.
    let h = hausdorff(&a, &b).unwrap();
    assert!((h - 1e3).abs() < 1e-9 * 1e3 + 10.0);
    assert!(h <= 1e3 + 1e-9);
}
