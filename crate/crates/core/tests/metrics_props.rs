mod common;

use common::{naive_mse, random_dataset, random_matrix, rel_diff};
use nalgebra::DMatrix;
use proptest::prelude::*;
use wds_core::{metrics, pca};

fn small_matrix() -> impl Strategy<Value = (DMatrix<f64>, DMatrix<f64>)> {
    (1usize..6, 1usize..6).prop_flat_map(|(r, c)| {
        let cells = proptest::collection::vec(-1e3f64..1e3, r * c);
        (cells.clone(), cells)
            .prop_map(move |(a, b)| (DMatrix::from_vec(r, c, a), DMatrix::from_vec(r, c, b)))
    })
}

#[test]
fn cpv_mse_identity_on_random_10x6() {
    let data = random_matrix(10, 6, 77);
    let model = pca::fit(&data).unwrap();
    for m in 0..=model.n_components() {
        let r = metrics::cpv_mse_check(&model, &data, m).unwrap();
        assert!(r < 1e-8, "m={m}: residual {r}");
    }
}

#[test]
fn error_curve_strictly_decreasing_for_distinct_spectrum() {
    let data = random_matrix(10, 6, 5);
    let model = pca::fit(&data).unwrap();
    let ms: Vec<usize> = (0..=model.n_components()).collect();
    let curve = metrics::error_curve(&model, &data, &ms).unwrap();
    assert!(curve.errors().windows(2).all(|w| w[1] < w[0]));
    let (n, d) = (10.0, 6.0);
    let expected0 = model.total_variance() * (n - 1.0) / (n * d);
    assert!(rel_diff(curve.errors()[0], expected0) < 1e-12);
}

#[test]
fn curve_csv_written_atomically() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("curve.csv");
    let data = random_matrix(6, 4, 2);
    let model = pca::fit(&data).unwrap();
    let curve = metrics::error_curve(&model, &data, &[0, 1, 2]).unwrap();
    curve.write_csv(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert_eq!(wds_core::ErrorCurve::from_csv(&text).unwrap(), curve);
}

proptest! {
    #[test]
    fn mse_matches_longhand_and_is_symmetric((a, b) in small_matrix()) {
        let ab = metrics::mse(&a, &b).unwrap();
        prop_assert_eq!(ab, metrics::mse(&b, &a).unwrap());
        prop_assert!(rel_diff(ab, naive_mse(&a, &b)) < 1e-12 || ab == 0.0);
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(ab == 0.0, a == b);
    }

    #[test]
    fn mse_scales_quadratically((a, b) in small_matrix(), c in -50.0f64..50.0) {
        let base = metrics::mse(&a, &b).unwrap();
        let scaled = metrics::mse(&(&a * c), &(&b * c)).unwrap();
        let expected = c * c * base;
        prop_assert!((scaled - expected).abs() <= 1e-12 * expected.abs() + 1e-300);
    }

    #[test]
    fn cpv_mse_identity_every_m(seed in any::<u64>()) {
        let data = random_dataset(seed);
        let model = pca::fit(&data).unwrap();
        for m in 0..=model.n_components() {
            prop_assert!(metrics::cpv_mse_check(&model, &data, m).unwrap() < 1e-8);
        }
    }

    #[test]
    fn training_curve_non_increasing(seed in any::<u64>()) {
        let data = random_dataset(seed);
        let model = pca::fit(&data).unwrap();
        let ms: Vec<usize> = (0..=model.n_components()).collect();
        let curve = metrics::error_curve(&model, &data, &ms).unwrap();
        prop_assert!(curve.errors().windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        prop_assert!(*curve.errors().last().unwrap() < 1e-12 * model.variances()[0]);
    }
}
