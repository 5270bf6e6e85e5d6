//! Small dense complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexVec = DVector<Complex64>;
pub type ComplexMat = DMatrix<Complex64>;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Relative Hermitian asymmetry `‖R − Rᴴ‖_F / ‖R‖_F` (0 for the zero matrix).
pub fn hermitian_defect(r: &ComplexMat) -> f64 {
    let norm = r.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (r - r.adjoint()).norm() / norm
}

/// `(R + Rᴴ)/2`.
pub fn hermitian_part(r: &ComplexMat) -> ComplexMat {
    (r + r.adjoint()).scale(0.5)
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order. Column `i` of the returned matrix pairs with value `i`.
pub fn hermitian_eigen_desc(r: &ComplexMat) -> Result<(Vec<f64>, ComplexMat)> {
    if !r.is_square() {
        return Err(Error::DimensionMismatch {
            context: "hermitian_eigen_desc",
            expected: "square matrix".into(),
            actual: format!("{}x{}", r.nrows(), r.ncols()),
        });
    }
    let n = r.nrows();
    let eig = nalgebra::linalg::SymmetricEigen::try_new(hermitian_part(r), 1e-15, 10_000)
        .ok_or_else(|| Error::Eigen("symmetric QR iteration did not converge".into()))?;
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen("non-finite eigenvalue".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps ties in solver order.
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = ComplexMat::from_fn(n, n, |row, col| eig.eigenvectors[(row, order[col])]);
    Ok((values, vectors))
}

/// Eigenvalues of a general square complex matrix via the complex Schur form.
pub fn general_eigenvalues(m: &ComplexMat) -> Result<Vec<Complex64>> {
    if m.nrows() == 1 {
        return Ok(vec![m[(0, 0)]]);
    }
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), 1e-15, 10_000)
        .ok_or_else(|| Error::Eigen("Schur iteration did not converge".into()))?;
    let values = schur
        .eigenvalues()
        .ok_or_else(|| Error::Eigen("Schur form is not triangular".into()))?;
    Ok(values.iter().copied().collect())
}

/// Maximum entry of `|AᴴA − I|`, used for unitarity / orthonormality checks.
pub fn orthonormality_defect(a: &ComplexMat) -> f64 {
    let gram = a.adjoint() * a;
    let n = gram.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - c64(target, 0.0)).norm());
        }
    }
    worst
}

/// Orthogonal projector onto the complement of the column space of `v`,
/// `I − V (VᴴV)⁻¹ Vᴴ`.
pub fn complement_projector(v: &ComplexMat) -> Result<ComplexMat> {
    let n = v.nrows();
    let gram = v.adjoint() * v;
    let inv = gram
        .try_inverse()
        .ok_or_else(|| Error::SingularFisher("manifold matrix VᴴV is singular".into()))?;
    Ok(ComplexMat::identity(n, n) - v * inv * v.adjoint())
}

/// Least-squares solution of `A X = B` for tall full-column-rank `A`.
pub fn least_squares(a: &ComplexMat, b: &ComplexMat) -> Result<ComplexMat> {
    let ah = a.adjoint();
    let normal = &ah * a;
    let chol = nalgebra::linalg::Cholesky::new(normal)
        .ok_or_else(|| Error::InvalidArgument("rank-deficient least-squares system".into()))?;
    Ok(chol.solve(&(ah * b)))
}

/// Kronecker product of two column vectors.
pub fn kron(a: &ComplexVec, b: &ComplexVec) -> ComplexVec {
    let n = b.len();
    ComplexVec::from_fn(a.len() * n, |i, _| a[i / n] * b[i % n])
}

/// Real Hermitian matrix promoted to complex.
pub fn to_complex(m: &DMatrix<f64>) -> ComplexMat {
    m.map(|x| c64(x, 0.0))
}
