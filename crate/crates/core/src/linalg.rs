//! Small dense solves for the data generator's ground-truth transport.

use crate::{Error, Result};

pub(crate) type Dense = Vec<Vec<f64>>;

pub(crate) fn transpose(a: &Dense) -> Dense {
    let cols = a.first().map_or(0, Vec::len);
    (0..cols).map(|c| a.iter().map(|row| row[c]).collect()).collect()
}

pub(crate) fn matmul(a: &Dense, b: &Dense) -> Dense {
    a.iter()
        .map(|row| {
            (0..b.first().map_or(0, Vec::len))
                .map(|c| row.iter().zip(b).map(|(x, brow)| x * brow[c]).sum())
                .collect()
        })
        .collect()
}

pub(crate) fn matvec(a: &Dense, x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

/// Inverse by Gauss-Jordan elimination with partial pivoting.
pub(crate) fn invert(a: &Dense) -> Result<Dense> {
    let n = a.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let mut aug: Dense = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs())).unwrap();
        if aug[pivot][col].abs() <= 1e-12 * scale {
            return Err(Error::Spec("matrix is rank deficient".into()));
        }
        aug.swap(col, pivot);
        let p = aug[col][col];
        aug[col].iter_mut().for_each(|v| *v /= p);
        for r in 0..n {
            if r != col {
                let f = aug[r][col];
                if f != 0.0 {
                    let pivot_row = aug[col].clone();
                    aug[r].iter_mut().zip(&pivot_row).for_each(|(v, q)| *v -= f * q);
                }
            }
        }
    }
    Ok(aug.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Left pseudo-inverse `(AᵀA)⁻¹Aᵀ` of a full-column-rank matrix.
pub(crate) fn pinv(a: &Dense) -> Result<Dense> {
    let at = transpose(a);
    Ok(matmul(&invert(&matmul(&at, a))?, &at))
}
