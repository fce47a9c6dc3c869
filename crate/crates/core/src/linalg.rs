//! Small dense linear-algebra helpers shared by the solver modules.

use nalgebra::linalg::SymmetricEigen;
use nalgebra::{ComplexField, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::{CMatrix, CVector, C64};

const EIG_EPS: f64 = 1e-15;
const EIG_MAX_ITER: usize = 10_000;

/// Eigendecomposition of a Hermitian (or real symmetric) matrix with
/// eigenvalues sorted in ascending order and eigenvectors permuted to match.
pub fn hermitian_eig<T>(m: &DMatrix<T>) -> Result<(DVector<f64>, DMatrix<T>)>
where
    T: ComplexField<RealField = f64>,
{
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let n = m.nrows();
    // Symmetrize so round-off in the input cannot leak into the solver.
    let sym = (m + m.adjoint()).map(|x| x * T::from_real(0.5));
    let eig = SymmetricEigen::<T, Dyn>::try_new(sym, EIG_EPS, EIG_MAX_ITER).ok_or_else(|| {
        Error::Numerical(format!(
            "Hermitian eigensolver did not converge on a {n}x{n} matrix within {EIG_MAX_ITER} sweeps"
        ))
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::<T>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// Rebuilds `V diag(f(λ)) V^H` from an eigendecomposition.
pub fn spectral_map<T>(values: &DVector<f64>, vectors: &DMatrix<T>, f: impl Fn(f64) -> f64) -> DMatrix<T>
where
    T: ComplexField<RealField = f64>,
{
    let mut scaled = vectors.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= T::from_real(f(values[j]));
    }
    &scaled * vectors.adjoint()
}

/// Inverse square root of a Hermitian positive definite matrix.
///
/// Eigenvalues are floored at `floor_rel * λ_max`; a condition number above
/// `max_condition` is rejected.
pub fn hermitian_inv_sqrt(m: &CMatrix, floor_rel: f64, max_condition: f64) -> Result<CMatrix> {
    let (values, vectors) = hermitian_eig(m)?;
    let n = values.len();
    let lmax = values[n - 1];
    let lmin = values[0];
    if lmax <= 0.0 || !lmax.is_finite() {
        return Err(Error::IllConditioned { condition: f64::INFINITY });
    }
    let condition = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };
    if condition > max_condition {
        return Err(Error::IllConditioned { condition });
    }
    let floor = floor_rel * lmax;
    Ok(spectral_map(&values, &vectors, |l| 1.0 / l.max(floor).sqrt()))
}

/// Column-stacking vectorization.
pub fn vec_columns(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

/// `x^H A x`, real part (exact for Hermitian `A`).
pub fn quad_form(a: &CMatrix, x: &CVector) -> f64 {
    x.dotc(&(a * x)).re
}

/// Frobenius norm of a complex matrix.
pub fn fro(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn real_scalar(x: f64) -> C64 {
    C64::new(x, 0.0)
}
