//! Dense complex linear algebra used throughout the crate.
//!
//! Matrices are `nalgebra` dense matrices over `Complex64`. Hermitian inputs
//! are checked against a relative Frobenius tolerance and then symmetrized
//! as `(X + X†)/2` before any decomposition, so Gram matrices built by
//! accumulation are accepted without fuss.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Relative Frobenius tolerance for the Hermitian check.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Ratio below which a Hermitian matrix is not considered positive definite.
pub const PD_RATIO: f64 = 1e-12;

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues sorted descending.
#[derive(Debug, Clone)]
pub struct HermEig {
    pub values: Vec<f64>,
    /// Column `i` is the unit eigenvector for `values[i]`.
    pub vectors: CMat,
}

impl HermEig {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn max(&self) -> f64 {
        self.values[0]
    }

    pub fn min(&self) -> f64 {
        *self.values.last().expect("empty decomposition")
    }

    pub fn vector(&self, i: usize) -> CVec {
        self.vectors.column(i).into_owned()
    }

    /// `Q f(Λ) Q†`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CMat {
        let n = self.dim();
        let mut scaled = self.vectors.clone();
        for (i, &lam) in self.values.iter().enumerate() {
            let s = f(lam);
            scaled.column_mut(i).scale_mut(s);
        }
        let out = &scaled * self.vectors.adjoint();
        debug_assert_eq!(out.nrows(), n);
        out
    }

    pub fn reconstruct(&self) -> CMat {
        self.map(|x| x)
    }
}

pub fn frob2(x: &CMat) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

pub fn norm2(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `‖X − X†‖_F / max(‖X‖_F, tiny)`.
pub fn hermitian_asymmetry(x: &CMat) -> f64 {
    let n = x.nrows();
    let mut diff = 0.0;
    for i in 0..n {
        for j in 0..n {
            diff += (x[(i, j)] - x[(j, i)].conj()).norm_sqr();
        }
    }
    let scale = frob2(x).sqrt();
    if scale == 0.0 {
        0.0
    } else {
        diff.sqrt() / scale
    }
}

/// Checks the Hermitian tolerance and returns `(X + X†)/2`.
pub fn symmetrized(x: &CMat) -> Result<CMat> {
    if !x.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "expected square matrix, got {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NumericalFailure("non-finite matrix entry".into()));
    }
    let asym = hermitian_asymmetry(x);
    if asym > HERMITIAN_TOL {
        return Err(Error::NotHermitian(asym));
    }
    Ok((x + x.adjoint()).scale(0.5))
}

pub fn hermitian_eig(x: &CMat) -> Result<HermEig> {
    let sym = symmetrized(x)?;
    let n = sym.nrows();
    if n == 0 {
        return Err(Error::DimensionMismatch("empty matrix".into()));
    }
    let eig = sym
        .try_symmetric_eigen(f64::EPSILON, 10_000)
        .ok_or_else(|| Error::NumericalFailure("Hermitian eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let nrm = col.norm();
        vectors.column_mut(dst).copy_from(&col.unscale(nrm));
    }
    Ok(HermEig { values, vectors })
}

pub fn min_eigenvalue(x: &CMat) -> Result<f64> {
    Ok(hermitian_eig(x)?.min())
}

pub fn max_eigenvalue(x: &CMat) -> Result<f64> {
    Ok(hermitian_eig(x)?.max())
}

/// `X^{-1/2}` for Hermitian positive-definite `X`.
pub fn inv_sqrt_pd(x: &CMat) -> Result<CMat> {
    let eig = hermitian_eig(x)?;
    let (hi, lo) = (eig.max(), eig.min());
    if hi <= 0.0 || lo <= PD_RATIO * hi {
        let ratio = if hi > 0.0 { lo / hi } else { f64::NEG_INFINITY };
        return Err(Error::NotPositiveDefinite(ratio));
    }
    let y = eig.map(|lam| 1.0 / lam.sqrt());
    Ok((&y + y.adjoint()).scale(0.5))
}

/// `v v†`.
pub fn outer(v: &CVec) -> CMat {
    v * v.adjoint()
}

/// `A† u u† A` without forming `u u†`.
pub fn projected_gram(a: &CMat, u: &CVec) -> CMat {
    let w = a.adjoint() * u;
    outer(&w)
}

/// `|u† A v|²`.
pub fn bilinear_power(u: &CVec, a: &CMat, v: &CVec) -> f64 {
    u.dotc(&(a * v)).norm_sqr()
}

/// Rotates `v` so that its first non-negligible entry is real and positive.
pub fn phase_normalize(v: &mut CVec) {
    let scale = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return;
    }
    if let Some(lead) = v.iter().find(|z| z.norm() > 1e-10 * scale).copied() {
        let rot = lead.conj() / lead.norm();
        v.iter_mut().for_each(|z| *z *= rot);
    }
}

/// Real trace of `A B` for Hermitian `A`, `B`.
pub fn trace_prod(a: &CMat, b: &CMat) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let p = a[(i, j)] * b[(j, i)];
            acc += p.re;
        }
    }
    acc
}

pub fn trace_re(a: &CMat) -> f64 {
    (0..a.nrows()).map(|i| a[(i, i)].re).sum()
}

/// Orthonormal basis for the column span of `a` (thin QR, columns kept in order).
pub fn orthonormalize(a: &CMat) -> CMat {
    let qr = a.clone().qr();
    let q = qr.q();
    q.columns(0, a.ncols()).into_owned()
}

/// The `l` dominant right singular vectors of `h` as columns, taken from the
/// eigenvectors of `h† h`.
pub fn top_right_singular(h: &CMat, l: usize) -> Result<CMat> {
    if l > h.ncols() {
        return Err(Error::InvalidDims(format!("{l} directions requested from {} columns", h.ncols())));
    }
    let eig = hermitian_eig(&(h.adjoint() * h))?;
    Ok(CMat::from_columns(&(0..l).map(|i| eig.vector(i)).collect::<Vec<_>>()))
}

/// `σ_max(h)²`.
pub fn spectral_norm2(h: &CMat) -> Result<f64> {
    Ok(hermitian_eig(&(h.adjoint() * h))?.max())
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}
