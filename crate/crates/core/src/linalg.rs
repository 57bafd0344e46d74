//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{ComplexField, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
pub type RMat = DMatrix<f64>;
pub type RVec = DVector<f64>;

/// Condition numbers above this are treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

pub fn to_complex(m: &RMat) -> CMat {
    m.map(|x| C64::new(x, 0.0))
}

pub fn kron<T: ComplexField + Copy>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = DMatrix::<T>::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            out.view_mut((i * br, j * bc), (br, bc))
                .zip_apply(b, |o, bv| *o = aij * bv);
        }
    }
    out
}

/// Solves `A X = B` for Hermitian positive definite `A` through a Cholesky
/// factorization. Fails with [`Error::Singular`] when the factorization breaks
/// down or the diagonal-ratio condition estimate exceeds [`MAX_CONDITION`].
pub fn hpd_solve<T>(a: &DMatrix<T>, b: &DMatrix<T>, context: &'static str) -> Result<DMatrix<T>>
where
    T: ComplexField<RealField = f64> + Copy,
{
    let chol = a
        .clone()
        .cholesky()
        .ok_or(Error::Singular { context, condition: f64::INFINITY })?;
    let diag = chol.l_dirty().diagonal();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for d in diag.iter() {
        let m = d.modulus();
        lo = lo.min(m);
        hi = hi.max(m);
    }
    let condition = if lo > 0.0 { (hi / lo).powi(2) } else { f64::INFINITY };
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(Error::Singular { context, condition });
    }
    Ok(chol.solve(b))
}

/// Inverse of a Hermitian positive definite matrix via [`hpd_solve`].
pub fn hpd_inverse<T>(a: &DMatrix<T>, context: &'static str) -> Result<DMatrix<T>>
where
    T: ComplexField<RealField = f64> + Copy,
{
    hpd_solve(a, &DMatrix::identity(a.nrows(), a.ncols()), context)
}

/// Hermitian PSD square root `V diag(sqrt(max(λ, 0))) V^H`.
///
/// Eigenvalues below `-1e-10 * max(1, λ_max)` are rejected.
pub fn hermitian_sqrt(m: &CMat) -> Result<CMat> {
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(sym);
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let lmin = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if lmin < -1e-10 * lmax.max(1.0) {
        return Err(Error::NotPsd { min_eigenvalue: lmin });
    }
    let n = m.nrows();
    let mut scaled = eig.eigenvectors.clone();
    for j in 0..n {
        let s = eig.eigenvalues[j].max(0.0).sqrt();
        scaled.column_mut(j).scale_mut(s);
    }
    Ok(&scaled * eig.eigenvectors.adjoint())
}

/// Induced matrix 1-norm: the largest absolute column sum.
pub fn induced_one_norm(m: &CMat) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// One draw from `CN(0, variance)`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

pub fn complex_gaussian_vec<R: Rng + ?Sized>(rng: &mut R, len: usize, variance: f64) -> CVec {
    CVec::from_iterator(len, (0..len).map(|_| complex_gaussian(rng, variance)))
}

/// Trace of `A * B` without forming the product.
pub fn trace_of_product(a: &CMat, b: &CMat) -> C64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = ZERO;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}
