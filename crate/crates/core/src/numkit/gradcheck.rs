use super::Scalar;
use crate::{Error, Result};

/// Central-difference gradient `(f(θ+h·eᵢ) − f(θ−h·eᵢ)) / 2h` per coordinate.
pub fn finite_diff_grad<T: Scalar>(mut f: impl FnMut(&[T]) -> T, params: &[T], h: T) -> Result<Vec<T>> {
    let mut probe = params.to_vec();
    let two_h = h + h;
    let mut grad = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let plus = f(&probe);
        probe[i] = orig - h;
        let minus = f(&probe);
        probe[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite {
                context: format!("finite difference at coordinate {i}"),
            });
        }
        grad.push((plus - minus) / two_h);
    }
    Ok(grad)
}

/// Magnitudes below this floor are compared absolutely rather than relatively.
pub const GRADCHECK_FLOOR: f64 = 1e-4;

/// Worst coordinate of an analytic/numeric gradient comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradDiscrepancy {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

/// `|a − n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Largest relative error over all coordinates, `None` for empty input.
pub fn worst_discrepancy<T: Scalar>(analytic: &[T], numeric: &[T]) -> Option<GradDiscrepancy> {
    analytic
        .iter()
        .zip(numeric)
        .enumerate()
        .map(|(index, (&a, &n))| {
            let (analytic, numeric) = (a.to_f64_lossy(), n.to_f64_lossy());
            GradDiscrepancy {
                index,
                analytic,
                numeric,
                rel_error: relative_error(analytic, numeric, GRADCHECK_FLOOR),
            }
        })
        .max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::SeededRng;

    #[test]
    fn square_at_three() {
        let g = finite_diff_grad(|p: &[f64]| p[0] * p[0], &[3.0], 1e-5).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn constant_function_has_zero_gradient() {
        let g = finite_diff_grad(|_: &[f64]| 4.2, &[1.0, -2.0, 0.5], 1e-5).unwrap();
        assert_eq!(g, vec![0.0; 3]);
    }

    #[test]
    fn sum_of_squares_matches_two_theta() {
        let mut rng = SeededRng::new(21);
        let theta: Vec<f64> = (0..5).map(|_| rng.normal()).collect();
        let g = finite_diff_grad(|p: &[f64]| p.iter().map(|v| v * v).sum(), &theta, 1e-5).unwrap();
        for (gi, ti) in g.iter().zip(&theta) {
            assert!((gi - 2.0 * ti).abs() < 1e-6);
        }
    }

    #[test]
    fn non_finite_reports_coordinate() {
        let err = finite_diff_grad(|p: &[f64]| if p[1] > 0.5 { f64::NAN } else { 0.0 }, &[0.0, 0.5], 1e-5).unwrap_err();
        assert!(err.to_string().contains("coordinate 1"), "{err}");
    }

    #[test]
    fn worst_discrepancy_locates_index() {
        let w = worst_discrepancy(&[1.0, 2.0, 3.0], &[1.0, 2.5, 3.0]).unwrap();
        assert_eq!(w.index, 1);
        assert!((w.rel_error - 0.2).abs() < 1e-12);
    }
}
