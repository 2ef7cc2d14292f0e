//! Two-component PCA by power iteration with deflation.

use careflow::numkit::{dot, Matrix, SeededRng};

pub const POWER_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Unit principal directions, strongest first.
    pub components: [Vec<f64>; 2],
    /// Rayleigh quotients of the components (variances along them).
    pub variances: [f64; 2],
}

/// Sample covariance (divisor `n`).
pub fn covariance(points: &Matrix) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mean = points.column_means();
    let d = points.cols();
    let mut cov = vec![vec![0.0; d]; d];
    for row in points.iter_rows() {
        for i in 0..d {
            let di = row[i] - mean[i];
            for j in 0..d {
                cov[i][j] += di * (row[j] - mean[j]);
            }
        }
    }
    let n = points.rows() as f64;
    cov.iter_mut().flatten().for_each(|v| *v /= n);
    (mean, cov)
}

fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| dot(row, x)).collect()
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

fn orthogonalize(v: &mut [f64], against: &[f64]) {
    let p = dot(v, against);
    v.iter_mut().zip(against).for_each(|(x, a)| *x -= p * a);
}

/// Sign convention: the largest-magnitude coordinate is positive.
fn canonical_sign(v: &mut [f64]) {
    let pivot = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
    if pivot < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Top two principal directions of `points` (needs at least 2 columns),
/// each found with [`POWER_ITERATIONS`] iterations from a seeded start.
pub fn fit(points: &Matrix, seed: u64) -> Pca {
    assert!(points.cols() >= 2, "PCA to two components needs at least two columns");
    let (mean, cov) = covariance(points);
    let d = points.cols();
    let mut rng = SeededRng::new(seed);
    let mut components: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    let mut variances = [0.0; 2];
    for k in 0..2 {
        let mut v: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        if k == 1 {
            orthogonalize(&mut v, &components[0]);
        }
        normalize(&mut v);
        for _ in 0..POWER_ITERATIONS {
            let mut next = matvec(&cov, &v);
            if k == 1 {
                orthogonalize(&mut next, &components[0]);
            }
            if normalize(&mut next) == 0.0 {
                break;
            }
            v = next;
        }
        canonical_sign(&mut v);
        variances[k] = dot(&v, &matvec(&cov, &v));
        components[k] = v;
    }
    Pca {
        mean,
        components,
        variances,
    }
}

impl Pca {
    pub fn project(&self, points: &Matrix) -> Matrix {
        let rows = points
            .iter_rows()
            .map(|row| {
                let centered: Vec<f64> = row.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
                vec![dot(&centered, &self.components[0]), dot(&centered, &self.components[1])]
            })
            .collect::<Vec<_>>();
        Matrix::from_rows(&rows).expect("two columns per row")
    }

    /// Maps projected coordinates back into the original space.
    pub fn reconstruct(&self, projected: &Matrix) -> Matrix {
        let rows = projected
            .iter_rows()
            .map(|p| {
                self.mean
                    .iter()
                    .enumerate()
                    .map(|(j, m)| m + p[0] * self.components[0][j] + p[1] * self.components[1][j])
                    .collect()
            })
            .collect::<Vec<Vec<f64>>>();
        Matrix::from_rows(&rows).expect("uniform rows")
    }
}
