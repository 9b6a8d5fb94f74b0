//! Small Hermitian helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_traits::{Float, Zero};

use crate::error::{Error, Result};
use crate::scalar::{Cplx, Real};

pub type CMatrix<T> = DMatrix<Cplx<T>>;
pub type CVector<T> = DVector<Cplx<T>>;

/// `(A + A^H) / 2`.
pub fn hermitian_part<T: Real>(a: &CMatrix<T>) -> CMatrix<T> {
    let half = Cplx::new(T::of(0.5), T::zero());
    (a + a.adjoint()) * half
}

pub fn is_diagonal<T: Real>(a: &CMatrix<T>) -> bool {
    a.is_square()
        && a.iter().enumerate().all(|(idx, z)| {
            let (i, j) = (idx % a.nrows(), idx / a.nrows());
            i == j || z.is_zero()
        })
}

/// Solves `A X = B` for Hermitian positive definite `A`.
pub fn hermitian_solve<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>, what: &'static str) -> Result<CMatrix<T>> {
    let chol = a.clone().cholesky().ok_or(Error::Singular(what))?;
    Ok(chol.solve(b))
}

/// Hermitian PSD square root `R^{1/2}` via eigendecomposition. Eigenvalues
/// below `-1e-9 * tr(R)` are reported as a factorization failure; smaller
/// negative round-off is clamped to zero.
pub fn psd_sqrt<T: Real>(r: &CMatrix<T>) -> Result<CMatrix<T>> {
    if is_diagonal(r) {
        let mut out = CMatrix::zeros(r.nrows(), r.ncols());
        for i in 0..r.nrows() {
            let d = r[(i, i)].re;
            if d < T::zero() {
                return Err(Error::NotPsd { min_eig: d.to_f64_lossy(), trace: trace_re(r).to_f64_lossy() });
            }
            out[(i, i)] = Cplx::new(Float::sqrt(d), T::zero());
        }
        return Ok(out);
    }
    let trace = trace_re(r);
    let eig = hermitian_part(r).symmetric_eigen();
    let mut min_eig = T::infinity();
    let mut roots = Vec::with_capacity(eig.eigenvalues.len());
    for &lambda in eig.eigenvalues.iter() {
        min_eig = Float::min(min_eig, lambda);
        roots.push(Float::sqrt(Float::max(lambda, T::zero())));
    }
    if min_eig < -T::of(1e-9) * Float::abs(trace) {
        return Err(Error::NotPsd { min_eig: min_eig.to_f64_lossy(), trace: trace.to_f64_lossy() });
    }
    let u = &eig.eigenvectors;
    let scaled = DMatrix::from_fn(u.nrows(), u.ncols(), |i, j| u[(i, j)] * Cplx::new(roots[j], T::zero()));
    Ok(hermitian_part(&(scaled * u.adjoint())))
}

pub fn trace_re<T: Real>(a: &CMatrix<T>) -> T {
    a.diagonal().iter().fold(T::zero(), |acc, z| acc + z.re)
}

pub fn frobenius<T: Real>(a: &CMatrix<T>) -> T {
    Float::sqrt(a.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr()))
}

/// A linear map stored densely or, when it happens to be diagonal, as its diagonal.
#[derive(Debug, Clone)]
pub enum LinOp<T: Real> {
    Diag(CVector<T>),
    Dense(CMatrix<T>),
}

impl<T: Real> LinOp<T> {
    pub fn new(m: CMatrix<T>) -> Self {
        if is_diagonal(&m) {
            LinOp::Diag(m.diagonal())
        } else {
            LinOp::Dense(m)
        }
    }

    pub fn apply(&self, x: &CVector<T>) -> CVector<T> {
        match self {
            LinOp::Diag(d) => d.component_mul(x),
            LinOp::Dense(m) => m * x,
        }
    }

    /// `out = self * x` on plain slices.
    pub fn apply_into(&self, x: &[Cplx<T>], out: &mut [Cplx<T>]) {
        match self {
            LinOp::Diag(d) => {
                for ((o, a), b) in out.iter_mut().zip(d.iter()).zip(x) {
                    *o = a * b;
                }
            }
            LinOp::Dense(m) => {
                let n = x.len();
                let cols = m.as_slice();
                for (i, o) in out.iter_mut().enumerate() {
                    let mut acc = Cplx::new(T::zero(), T::zero());
                    for (j, b) in x.iter().enumerate() {
                        acc += cols[i + j * n] * b;
                    }
                    *o = acc;
                }
            }
        }
    }

    pub fn to_dense(&self) -> CMatrix<T> {
        match self {
            LinOp::Diag(d) => CMatrix::from_diagonal(d),
            LinOp::Dense(m) => m.clone(),
        }
    }
}

/// In-place Cholesky factorization `A = L L^H` of a Hermitian positive-definite
/// `n x n` column-major matrix. Only the lower triangle is read; `L` overwrites it.
pub fn cholesky_in_place<T: Real>(a: &mut [Cplx<T>], n: usize) -> Result<()> {
    for j in 0..n {
        let mut d = a[j + j * n].re;
        for p in 0..j {
            d -= a[j + p * n].norm_sqr();
        }
        if !(d > T::zero()) {
            return Err(Error::Singular("Cholesky factorization"));
        }
        let ljj = Float::sqrt(d);
        a[j + j * n] = Cplx::new(ljj, T::zero());
        for i in j + 1..n {
            let mut v = a[i + j * n];
            for p in 0..j {
                v -= a[i + p * n] * a[j + p * n].conj();
            }
            a[i + j * n] = v / ljj;
        }
    }
    Ok(())
}

/// Solves `L L^H x = b` in place, `l` as produced by [`cholesky_in_place`].
pub fn cholesky_solve_in_place<T: Real>(l: &[Cplx<T>], n: usize, b: &mut [Cplx<T>]) {
    for i in 0..n {
        let mut v = b[i];
        for p in 0..i {
            v -= l[i + p * n] * b[p];
        }
        b[i] = v / l[i + i * n].re;
    }
    for i in (0..n).rev() {
        let mut v = b[i];
        for p in i + 1..n {
            v -= l[p + i * n].conj() * b[p];
        }
        b[i] = v / l[i + i * n].re;
    }
}
