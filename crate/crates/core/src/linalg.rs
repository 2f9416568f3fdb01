//! Small complex Hermitian helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

pub use nalgebra::Complex;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Relative diagonal loading applied once when a provably positive-definite
/// matrix fails to factor because of rounding.
pub const JITTER: f64 = 1e-12;

pub fn c64(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

/// Cholesky factor of a Hermitian positive-definite matrix.
///
/// Tries the matrix as given, then once more with `JITTER * trace / dim`
/// added to the diagonal.
// For complex scalars nalgebra takes the complex square root of a negative
// pivot instead of failing, so pivots are checked here.
fn positive_cholesky(a: CMatrix) -> Option<Cholesky<C64, Dyn>> {
    let chol = Cholesky::new(a)?;
    let l = chol.l_dirty();
    let ok = (0..l.nrows()).all(|i| {
        let d = l[(i, i)];
        d.re > 0.0 && d.im.abs() <= 1e-8 * d.re
    });
    ok.then_some(chol)
}

pub fn hermitian_factor(a: &CMatrix) -> Option<Cholesky<C64, Dyn>> {
    if let Some(chol) = positive_cholesky(a.clone()) {
        return Some(chol);
    }
    let dim = a.nrows();
    if dim == 0 {
        return None;
    }
    let load = JITTER * trace(a) / dim as f64;
    if !(load > 0.0) {
        return None;
    }
    let mut loaded = a.clone();
    for i in 0..dim {
        loaded[(i, i)] += c64(load, 0.0);
    }
    positive_cholesky(loaded)
}

/// Solves `a x = b` for Hermitian positive-definite `a`.
pub fn hermitian_solve(a: &CMatrix, b: &CVector) -> Option<CVector> {
    hermitian_factor(a).map(|chol| chol.solve(b))
}

pub fn trace(a: &CMatrix) -> f64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)].re).sum()
}

/// Real part of `x^H a x`.
pub fn quad_form(x: &CVector, a: &CMatrix) -> f64 {
    x.dotc(&(a * x)).re
}

/// `(a + a^H) / 2`, forcing exact Hermitian symmetry.
pub fn hermitize(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

/// Largest `|a_ij - conj(a_ji)|` relative to the largest entry magnitude.
pub fn hermitian_asymmetry(a: &CMatrix) -> f64 {
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst: f64 = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst / scale
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(hermitize(a))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Ratio of extreme eigenvalues; infinite when the smallest is not positive.
pub fn condition_number(a: &CMatrix) -> f64 {
    let ev = hermitian_eigenvalues(a);
    match (ev.first(), ev.last()) {
        (Some(&lo), Some(&hi)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Hermitian square root with negative eigenvalues clipped to zero.
pub fn psd_sqrt(a: &CMatrix) -> CMatrix {
    let eig = SymmetricEigen::new(hermitize(a));
    let roots = eig.eigenvalues.map(|v| c64(v.max(0.0).sqrt(), 0.0));
    let u = &eig.eigenvectors;
    let scaled = u * DMatrix::from_diagonal(&roots);
    hermitize(&(scaled * u.adjoint()))
}

/// `x x^H`.
pub fn outer(x: &CVector) -> CMatrix {
    x * x.adjoint()
}
