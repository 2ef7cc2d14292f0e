mod common;

use careflow::numkit::Matrix;
use careflow_cli::commands::plane_coordinates;
use careflow_cli::pca;
use common::{jacobi, rank_two_cloud};

#[test]
fn power_iteration_matches_a_dense_eigensolver() {
    let points = rank_two_cloud(120, 16, 11);
    let (_, cov) = pca::covariance(&points);
    let (values, vectors) = jacobi(cov);
    let fit = pca::fit(&points, 3);

    for k in 0..2 {
        assert!((fit.variances[k] - values[k]).abs() <= 1e-8 * values[0], "variance {k}");
        let align: f64 = fit.components[k].iter().zip(&vectors[k]).map(|(a, b)| a * b).sum();
        assert!((align.abs() - 1.0).abs() < 1e-8, "component {k}: |cos| = {}", align.abs());
    }
    assert!(values[2].abs() < 1e-8 * values[0]);

    // projections agree up to the sign of each axis, and rank 2 reconstructs exactly
    let projected = fit.project(&points);
    for (row, p) in points.iter_rows().zip(projected.iter_rows()) {
        for k in 0..2 {
            let oracle: f64 = row.iter().zip(&fit.mean).zip(&vectors[k]).map(|((x, m), v)| (x - m) * v).sum();
            assert!((p[k].abs() - oracle.abs()).abs() < 1e-8, "{} vs {oracle}", p[k]);
        }
    }
    let back = fit.reconstruct(&projected);
    for (a, b) in back.as_slice().iter().zip(points.as_slice()) {
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }
}

#[test]
fn fit_is_deterministic() {
    let points = rank_two_cloud(50, 8, 2);
    assert_eq!(pca::fit(&points, 9), pca::fit(&points, 9));
}

#[test]
fn width_two_is_not_projected() {
    let a = Matrix::from_rows(&[[1.5, -2.0], [0.25, 3.0]]).unwrap();
    let b = Matrix::from_rows(&[[7.0, 8.0]]).unwrap();
    let coords = plane_coordinates(&[&a, &b]);
    assert_eq!(coords, vec![vec![[1.5, -2.0], [0.25, 3.0]], vec![[7.0, 8.0]]]);
}
