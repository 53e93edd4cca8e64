//! Small dense linear-algebra helpers shared by the solver and classifier.

use nalgebra::{DMatrix, DVector};

/// Largest eigenvalue of a symmetric positive semi-definite matrix.
pub fn sym_max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let top = m
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if top.is_finite() {
        top
    } else {
        // The eigen iteration can fail on tiny, nearly singular input; for a
        // PSD matrix the top singular value is the same number.
        spectral_norm(m)
    }
}

/// Singular values sorted in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Spectral norm ‖m‖₂.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Copy of `m` with every nonzero column scaled to unit ℓ2 norm.
pub fn unit_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for mut c in out.column_iter_mut() {
        let n = c.norm();
        if n > 0.0 {
            c /= n;
        }
    }
    out
}

pub fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Minimum-norm least-squares solution of `a·x ≈ b` through the SVD.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let eps = smax * f64::EPSILON * a.nrows().max(a.ncols()) as f64;
    svd.solve(b, eps).ok()
}

/// Pearson correlation between the columns of `m`.
///
/// Columns with zero variance yield `None` in every entry of their row and
/// column (the diagonal included).
pub fn column_correlation(m: &DMatrix<f64>) -> Vec<Vec<Option<f64>>> {
    let (rows, cols) = m.shape();
    let centered: Vec<Option<DVector<f64>>> = (0..cols)
        .map(|j| {
            let c = m.column(j);
            let mean = c.sum() / rows as f64;
            let v = c.map(|x| x - mean);
            let norm = v.norm();
            (norm > 0.0 && norm.is_finite()).then(|| v / norm)
        })
        .collect();
    (0..cols)
        .map(|i| {
            (0..cols)
                .map(|j| match (&centered[i], &centered[j]) {
                    (Some(_), Some(_)) if i == j => Some(1.0),
                    (Some(a), Some(b)) => Some(a.dot(b).clamp(-1.0, 1.0)),
                    _ => None,
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn correlation_is_symmetric_with_unit_diagonal() {
        let m = DMatrix::from_row_slice(4, 3, &[1.0, 2.0, 0.5, 2.0, 1.0, 0.1, 3.0, 5.0, 0.9, 4.0, 3.0, 0.2]);
        let c = column_correlation(&m);
        for i in 0..3 {
            assert_eq!(c[i][i], Some(1.0));
            for j in 0..3 {
                assert_eq!(c[i][j], c[j][i]);
            }
        }
    }

    #[test]
    fn constant_column_is_undefined() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 7.0, 2.0, 7.0, 3.0, 7.0]);
        let c = column_correlation(&m);
        assert_eq!(c[0][0], Some(1.0));
        assert!(c[1].iter().all(Option::is_none));
        assert!(c[0][1].is_none());
    }

    #[test]
    fn least_squares_recovers_exact_solution() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let x = DVector::from_vec(vec![2.0, -1.0]);
        let sol = least_squares(&a, &(&a * &x)).unwrap();
        assert!((sol - x).norm() < 1e-12);
    }

    #[test]
    fn unit_columns_keeps_zero_columns() {
        let m = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 4.0, 0.0]);
        let u = unit_columns(&m);
        assert_eq!(u.column(0).as_slice(), &[0.6, 0.8]);
        assert_eq!(u.column(1).as_slice(), &[0.0, 0.0]);
    }
}
