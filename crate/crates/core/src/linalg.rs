//! Small dense helpers shared by the solvers.
//!
//! Matrix-vector products are written as plain loops with a fixed summation
//! order so that `a * x` and `(aᵀ)ᵀ * x` produce bit-identical results. The
//! multi-view and two-view stage-one paths rely on this to agree exactly.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Result, SccaError};

/// `y = a x`, each entry accumulated over columns in index order.
pub fn mat_vec(a: &DMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    debug_assert_eq!(a.ncols(), x.len());
    let mut y = DVector::zeros(a.nrows());
    for i in 0..a.nrows() {
        let mut acc = 0.0;
        for j in 0..a.ncols() {
            acc += a[(i, j)] * x[j];
        }
        y[i] = acc;
    }
    y
}

/// `y = aᵀ x`, each entry accumulated over rows in index order.
pub fn mat_t_vec(a: &DMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    debug_assert_eq!(a.nrows(), x.len());
    let mut y = DVector::zeros(a.ncols());
    for j in 0..a.ncols() {
        let col = a.column(j);
        let mut acc = 0.0;
        for i in 0..a.nrows() {
            acc += col[i] * x[i];
        }
        y[j] = acc;
    }
    y
}

pub fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `sgn(x)·[|x| − t]₊`
pub fn soft_threshold(x: f64, t: f64) -> f64 {
    sgn(x) * (x.abs() - t).max(0.0)
}

/// Returns `v / ‖v‖₂`, or `None` when the norm is zero or not finite.
pub fn normalized(v: &DVector<f64>) -> Option<DVector<f64>> {
    let n = v.norm();
    if n > 0.0 && n.is_finite() {
        Some(v / n)
    } else {
        None
    }
}

pub fn column_norms(a: &DMatrix<f64>) -> Vec<f64> {
    a.column_iter().map(|c| c.norm()).collect()
}

pub fn row_norms(a: &DMatrix<f64>) -> Vec<f64> {
    a.row_iter().map(|r| r.norm()).collect()
}

/// Pearson correlation of two equal-length samples; `None` when either has
/// zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    if a.is_empty() {
        return None;
    }
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

pub fn is_symmetric(a: &DMatrix<f64>, rel_tol: f64) -> bool {
    if a.nrows() != a.ncols() {
        return false;
    }
    let scale = a.amax().max(1.0);
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            if (a[(i, j)] - a[(j, i)]).abs() > rel_tol * scale {
                return false;
            }
        }
    }
    true
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted in
/// decreasing order (eigenvectors as matching columns).
pub fn sym_eigen_sorted(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(a.nrows(), order.len());
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// Outcome of a symmetric square root: the root plus the number of slightly
/// negative eigenvalues that were clipped to zero.
pub struct SqrtOutcome {
    pub root: DMatrix<f64>,
    pub clipped: usize,
}

/// Symmetric positive semi-definite square root via eigendecomposition.
///
/// Eigenvalues in `[-clip_rel·λ_max, 0)` are clipped to zero; anything more
/// negative is reported as `IndefiniteMatrix`.
pub fn sym_sqrt(a: &DMatrix<f64>, clip_rel: f64) -> Result<SqrtOutcome> {
    let (values, vectors) = sym_eigen_sorted(a);
    let lmax = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut clipped = 0;
    let mut roots = Vec::with_capacity(values.len());
    for &l in values.iter() {
        if l >= 0.0 {
            roots.push(l.sqrt());
        } else if l >= -clip_rel * lmax {
            clipped += 1;
            roots.push(0.0);
        } else {
            return Err(SccaError::IndefiniteMatrix(format!(
                "eigenvalue {l:.3e} below tolerance {:.3e}",
                -clip_rel * lmax
            )));
        }
    }
    let d = DMatrix::from_diagonal(&DVector::from_vec(roots));
    let root = &vectors * d * vectors.transpose();
    Ok(SqrtOutcome {
        root: (&root + root.transpose()) * 0.5,
        clipped,
    })
}

/// Lower Cholesky factor of a symmetric positive definite matrix, rejecting
/// matrices whose pivots fall below `rel_tol` times the largest pivot.
pub fn cholesky_lower(a: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>> {
    let chol = nalgebra::Cholesky::new(a.clone())
        .ok_or_else(|| SccaError::Singularity("matrix is not positive definite; add a ridge".into()))?;
    let l = chol.l();
    let diag: Vec<f64> = (0..l.nrows()).map(|i| l[(i, i)] * l[(i, i)]).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || min <= rel_tol * max {
        return Err(SccaError::Singularity(format!(
            "pivot ratio {:.3e} below {rel_tol:.1e}; add a ridge",
            if max > 0.0 { min / max } else { 0.0 }
        )));
    }
    Ok(l)
}

/// Solves `l x = b` for lower-triangular `l`.
pub fn solve_lower(l: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    l.solve_lower_triangular(b)
        .expect("triangular factor with nonzero pivots")
}

/// Solves `lᵀ x = b` for lower-triangular `l`.
pub fn solve_lower_t(l: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    l.tr_solve_lower_triangular(b)
        .expect("triangular factor with nonzero pivots")
}

/// Makes the first entry with magnitude above `eps·max|v|` positive.
/// Returns the sign that was applied.
pub fn canonical_sign(v: &DVector<f64>) -> f64 {
    let m = v.amax();
    if m == 0.0 {
        return 1.0;
    }
    for &x in v.iter() {
        if x.abs() > 1e-12 * m {
            return if x < 0.0 { -1.0 } else { 1.0 };
        }
    }
    1.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mat_vec_matches_transpose_path_bitwise() {
        let a = DMatrix::from_fn(5, 3, |i, j| ((i * 7 + j * 3) as f64).sin());
        let x = DVector::from_fn(3, |i, _| (i as f64 + 0.3).cos());
        let direct = mat_vec(&a, &x);
        let via_t = mat_t_vec(&a.transpose(), &x);
        assert_eq!(direct, via_t);
    }

    #[test]
    fn soft_threshold_zero_at_boundary() {
        assert_eq!(soft_threshold(0.5, 0.5), 0.0);
        assert_eq!(soft_threshold(-2.0, 0.5), -1.5);
        assert_eq!(soft_threshold(0.0, 0.0), 0.0);
    }

    #[test]
    fn sym_sqrt_squares_back() {
        let b = DMatrix::from_fn(4, 4, |i, j| ((i + 2 * j) as f64).cos());
        let a = &b * b.transpose();
        let r = sym_sqrt(&a, 1e-8).unwrap();
        assert!((&r.root * &r.root - &a).amax() < 1e-10);
    }

    #[test]
    fn sym_sqrt_rejects_indefinite() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(sym_sqrt(&a, 1e-8), Err(SccaError::IndefiniteMatrix(_))));
    }

    #[test]
    fn cholesky_flags_rank_deficient() {
        let v = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0]);
        let a = &v * v.transpose();
        assert!(cholesky_lower(&a, 1e-12).is_err());
    }

    #[test]
    fn pearson_of_constant_is_none() {
        assert!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_none());
        let r = pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.5]).unwrap();
        assert!(r > 0.99);
    }
}
