//! Small dense complex linear-algebra helpers on top of nalgebra.

use crate::{CMat, CVec, Error, Result, C64};

/// Relative tolerance below which negative eigenvalues count as round-off.
pub const PSD_TOLERANCE: f64 = 1e-10;

pub fn zeros(n: usize) -> CMat {
    CMat::zeros(n, n)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn trace(m: &CMat) -> C64 {
    m.diagonal().sum()
}

/// `x^H A y`.
pub fn quad(x: &CVec, a: &CMat, y: &CVec) -> C64 {
    x.dotc(&(a * y))
}

/// Rank-one outer product `x y^H`.
pub fn outer(x: &CVec, y: &CVec) -> CMat {
    x * y.adjoint()
}

/// Keeps only the diagonal of `m`.
pub fn diag_part(m: &CMat) -> CMat {
    CMat::from_diagonal(&m.diagonal())
}

/// Replaces `m` by `(m + m^H) / 2`, which is exactly Hermitian in floating point.
pub fn hermitize(m: &mut CMat) {
    let adj = m.adjoint();
    *m += adj;
    *m *= real(0.5);
}

pub fn hermitian_defect(m: &CMat) -> f64 {
    (m - m.adjoint()).norm()
}

fn eigen(m: &CMat) -> nalgebra::SymmetricEigen<C64, nalgebra::Dyn> {
    let mut h = m.clone();
    hermitize(&mut h);
    h.symmetric_eigen()
}

pub fn min_eigenvalue(m: &CMat) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    eigen(m).eigenvalues.min()
}

fn psd_tolerance(m: &CMat) -> f64 {
    PSD_TOLERANCE * trace(m).re.abs().max(f64::MIN_POSITIVE)
}

/// Clips round-off negative eigenvalues of a Hermitian matrix to zero.
///
/// Eigenvalues below `-PSD_TOLERANCE * trace` are a genuine error.
pub fn psd_repair(m: &CMat) -> Result<CMat> {
    let tol = psd_tolerance(m);
    let eig = eigen(m);
    let min = eig.eigenvalues.min();
    if min < -tol {
        return Err(Error::NotPositiveSemiDefinite {
            min_eigenvalue: min,
            tolerance: tol,
        });
    }
    let mut out = m.clone();
    hermitize(&mut out);
    if min < 0.0 {
        let clipped = eig.eigenvalues.map(|v| v.max(0.0));
        out = &eig.eigenvectors
            * CMat::from_diagonal(&clipped.map(real))
            * eig.eigenvectors.adjoint();
        hermitize(&mut out);
    }
    Ok(out)
}

/// Hermitian square root of a PSD matrix.
pub fn psd_sqrt(m: &CMat) -> Result<CMat> {
    let tol = psd_tolerance(m);
    let eig = eigen(m);
    let min = eig.eigenvalues.min();
    if min < -tol {
        return Err(Error::NotPositiveSemiDefinite {
            min_eigenvalue: min,
            tolerance: tol,
        });
    }
    let roots = eig.eigenvalues.map(|v| real(v.max(0.0).sqrt()));
    let mut out = &eig.eigenvectors * CMat::from_diagonal(&roots) * eig.eigenvectors.adjoint();
    hermitize(&mut out);
    Ok(out)
}

/// Lower Cholesky factor of a Hermitian positive-definite matrix.
pub fn cholesky_factor(m: &CMat, context: &'static str) -> Result<CMat> {
    m.clone()
        .cholesky()
        .map(|c| c.unpack())
        .ok_or(Error::Singular(context))
}

/// Solves `A x = b` for Hermitian positive-definite `A`.
pub fn solve_hpd(a: &CMat, b: &CVec, context: &'static str) -> Result<CVec> {
    let chol = a.clone().cholesky().ok_or(Error::Singular(context))?;
    Ok(chol.solve(b))
}

/// Inverse of a Hermitian positive-definite matrix.
pub fn inverse_hpd(a: &CMat, context: &'static str) -> Result<CMat> {
    let mut inv = a
        .clone()
        .cholesky()
        .ok_or(Error::Singular(context))?
        .inverse();
    hermitize(&mut inv);
    Ok(inv)
}

/// Solves `A x = b` for a Hermitian `A` that is positive definite in exact
/// arithmetic but may be borderline in floating point.
///
/// Tries Cholesky, then Cholesky with a `1e-12 * trace` diagonal load, then LU.
pub fn solve_hermitian(a: &CMat, b: &CVec, context: &'static str) -> Result<CVec> {
    if let Some(chol) = a.clone().cholesky() {
        return Ok(chol.solve(b));
    }
    let load = 1e-12 * trace(a).re.abs();
    log::warn!("{context}: Cholesky failed, retrying with diagonal load {load:e}");
    let loaded = a + identity(a.nrows()) * real(load);
    if let Some(chol) = loaded.cholesky() {
        return Ok(chol.solve(b));
    }
    let x = a
        .clone()
        .lu()
        .solve(b)
        .ok_or(Error::Singular(context))?;
    if x.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        Ok(x)
    } else {
        Err(Error::Singular(context))
    }
}

/// Block-diagonal matrix from square blocks.
pub fn block_diagonal(blocks: &[&CMat]) -> CMat {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = zeros(n);
    let mut offset = 0;
    for b in blocks {
        let m = b.nrows();
        out.view_mut((offset, offset), (m, m)).copy_from(*b);
        offset += m;
    }
    out
}

/// Stacks column vectors on top of each other.
pub fn stack(parts: &[&CVec]) -> CVec {
    let n: usize = parts.iter().map(|p| p.len()).sum();
    let mut out = CVec::zeros(n);
    let mut offset = 0;
    for p in parts {
        out.rows_mut(offset, p.len()).copy_from(*p);
        offset += p.len();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_hpd(n: usize, seed: u64) -> CMat {
        let mut rng = crate::rng::stream(seed, "linalg", 0);
        let g = CMat::from_fn(n, n, |_, _| crate::rng::complex_normal(&mut rng));
        &g * g.adjoint() + identity(n) * real(0.1)
    }

    #[test]
    fn hpd_solve_has_small_residual() {
        let a = random_hpd(6, 3);
        let b = CVec::from_fn(6, |i, _| C64::new(i as f64, 1.0));
        let x = solve_hpd(&a, &b, "test").unwrap();
        assert!((&a * &x - &b).norm() / b.norm() < 1e-12);
    }

    #[test]
    fn sqrt_squares_back() {
        let a = random_hpd(4, 9);
        let s = psd_sqrt(&a).unwrap();
        assert!((&s * &s - &a).norm() / a.norm() < 1e-12);
        assert!(hermitian_defect(&s) == 0.0);
    }

    #[test]
    fn repair_rejects_indefinite() {
        let mut a = identity(3);
        a[(2, 2)] = real(-0.5);
        assert!(matches!(
            psd_repair(&a),
            Err(Error::NotPositiveSemiDefinite { .. })
        ));
    }

    #[test]
    fn repair_clips_roundoff() {
        let v = CVec::from_vec(vec![real(1.0), real(1.0)]);
        let mut a = outer(&v, &v);
        a[(0, 0)] -= real(1e-14);
        let r = psd_repair(&a).unwrap();
        assert!(min_eigenvalue(&r) >= -1e-15);
        assert!((r - a).norm() < 1e-13);
    }

    #[test]
    fn hermitian_solve_falls_back_on_singular_matrix() {
        let v = CVec::from_vec(vec![real(1.0), real(0.0)]);
        let a = outer(&v, &v);
        let x = solve_hermitian(&a, &v, "test").unwrap();
        assert!((&a * x - &v).norm() < 1e-6);
        assert!(solve_hermitian(&zeros(2), &v, "test").is_err());
        let b = random_hpd(3, 4);
        let rhs = CVec::from_element(3, real(1.0));
        let x = solve_hermitian(&b, &rhs, "test").unwrap();
        assert!((&b * x - rhs).norm() < 1e-10);
    }

    #[test]
    fn block_layout() {
        let a = identity(2) * real(2.0);
        let b = identity(1) * real(3.0);
        let m = block_diagonal(&[&a, &b]);
        assert_eq!(m.nrows(), 3);
        assert_eq!(m[(2, 2)], real(3.0));
        assert_eq!(m[(0, 2)], real(0.0));
        let s = stack(&[&CVec::from_element(2, real(1.0)), &CVec::from_element(1, real(5.0))]);
        assert_eq!(s[2], real(5.0));
    }
}
