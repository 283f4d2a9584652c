//! Dense complex matrices and the eigen-decompositions the rest of the crate
//! is built on.
//!
//! Everything here is small and dense: the intended sizes are n ≤ 16, so
//! plain O(n³) algorithms from `nalgebra` are used throughout.

use nalgebra::linalg::{Cholesky, Schur, SymmetricEigen};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;

/// Default relative tolerance for structural checks.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Relative eigenvalue gap below which an eigenvalue is treated as repeated.
pub const SIMPLE_GAP: f64 = 1e-8;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

pub fn diag(entries: &[Complex64]) -> ComplexMatrix {
    ComplexMatrix::from_diagonal(&DVector::from_column_slice(entries))
}

pub fn diag_real(entries: &[f64]) -> ComplexMatrix {
    let v: Vec<Complex64> = entries.iter().map(|&x| c64(x, 0.0)).collect();
    diag(&v)
}

/// Build from row-major real/imag pairs.
pub fn from_rows(rows: &[&[Complex64]]) -> ComplexMatrix {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    ComplexMatrix::from_fn(n, m, |i, j| rows[i][j])
}

pub fn from_real(m: &DMatrix<f64>) -> ComplexMatrix {
    m.map(|x| c64(x, 0.0))
}

/// Split `A = H + jK` with `H = (A + A*)/2` and `K = (A − A*)/2j`.
pub fn hermitian_parts(a: &ComplexMatrix) -> (ComplexMatrix, ComplexMatrix) {
    let ah = a.adjoint();
    let h = (a + &ah).scale(0.5);
    let k = (a - &ah) * c64(0.0, -0.5);
    (h, k)
}

pub fn re_part(a: &ComplexMatrix) -> ComplexMatrix {
    (a + a.adjoint()).scale(0.5)
}

pub fn im_part(a: &ComplexMatrix) -> ComplexMatrix {
    (a - a.adjoint()) * c64(0.0, -0.5)
}

pub fn frobenius(a: &ComplexMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn is_finite(a: &ComplexMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Largest singular value.
pub fn spectral_norm(a: &ComplexMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let gram = a.adjoint() * a;
    let eig = SymmetricEigen::new(gram);
    eig.eigenvalues.iter().cloned().fold(0.0, f64::max).max(0.0).sqrt()
}

#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Unitary; column `i` belongs to `eigenvalues[i]`.
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEigen {
    pub fn min(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }
}

fn hermitian_skew(h: &ComplexMatrix) -> f64 {
    let scale = frobenius(h).max(f64::MIN_POSITIVE);
    frobenius(&(h - h.adjoint())) / scale
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eig_hermitian(h: &ComplexMatrix, tol: f64) -> Result<HermitianEigen> {
    let skew = hermitian_skew(h);
    if skew > tol {
        return Err(Error::NotHermitian(skew));
    }
    Ok(eig_hermitian_unchecked(&re_part(h)))
}

/// Same as [`eig_hermitian`] but symmetrizes instead of checking.
pub(crate) fn eig_hermitian_unchecked(h: &ComplexMatrix) -> HermitianEigen {
    let n = h.nrows();
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = ComplexMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    HermitianEigen {
        eigenvalues,
        eigenvectors,
    }
}

/// Smallest eigenvalue of the Hermitian part of `h` (no check).
pub fn lambda_min(h: &ComplexMatrix) -> f64 {
    if h.is_empty() {
        return f64::INFINITY;
    }
    let eig = SymmetricEigen::new(re_part(h));
    eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone)]
pub struct GeneralEigen {
    pub eigenvalues: Vec<Complex64>,
    /// Unit-norm right eigenvectors as columns.
    pub right_vectors: ComplexMatrix,
    /// Left eigenvectors (`v* A = λ v*`), scaled so `v* u` is real positive.
    pub left_vectors: ComplexMatrix,
    /// `false` where the eigenvalue is within `SIMPLE_GAP·‖A‖` of another.
    pub simple: Vec<bool>,
}

impl GeneralEigen {
    pub fn right(&self, k: usize) -> DVector<Complex64> {
        self.right_vectors.column(k).into_owned()
    }

    pub fn left(&self, k: usize) -> DVector<Complex64> {
        self.left_vectors.column(k).into_owned()
    }
}

/// Complex Schur based eigen-decomposition with left and right vectors.
pub fn eig_general(a: &ComplexMatrix) -> Result<GeneralEigen> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.ncols(),
        });
    }
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 2000 * n.max(1)).ok_or(Error::ConvergenceFailure)?;
    let (q, t) = schur.unpack();
    let scale = frobenius(&t).max(f64::MIN_POSITIVE);
    let small = f64::EPSILON * scale;
    let guard = |d: Complex64| if d.norm() < small { c64(small, 0.0) } else { d };

    let lambdas: Vec<Complex64> = (0..n).map(|k| t[(k, k)]).collect();
    let mut right = ComplexMatrix::zeros(n, n);
    let mut left = ComplexMatrix::zeros(n, n);
    for k in 0..n {
        let lam = lambdas[k];
        // Right: (T − λI) y = 0, back substitution on the leading k×k block.
        let mut y = DVector::<Complex64>::zeros(n);
        y[k] = c64(1.0, 0.0);
        for i in (0..k).rev() {
            let mut s = c64(0.0, 0.0);
            for j in i + 1..=k {
                s += t[(i, j)] * y[j];
            }
            y[i] = -s / guard(t[(i, i)] - lam);
        }
        let u = &q * y;
        let u = &u / c64(u.norm(), 0.0);

        // Left: z^T (T − λI) = 0 with z = conj(w), forward substitution.
        let mut z = DVector::<Complex64>::zeros(n);
        z[k] = c64(1.0, 0.0);
        for i in k + 1..n {
            let mut s = c64(0.0, 0.0);
            for j in k..i {
                s += z[j] * t[(j, i)];
            }
            z[i] = -s / guard(t[(i, i)] - lam);
        }
        let w = z.map(|x| x.conj());
        let v = &q * w;
        let mut v = &v / c64(v.norm(), 0.0);
        let vu = v.dotc(&u);
        if vu.norm() > 0.0 {
            // v*u = conj(v)·u; multiplying v by e^{jθ} multiplies v*u by e^{−jθ}
            v *= vu / c64(vu.norm(), 0.0);
        }
        right.set_column(k, &u);
        left.set_column(k, &v);
    }
    let norm = spectral_norm(a);
    let simple = (0..n)
        .map(|k| {
            (0..n)
                .filter(|&j| j != k)
                .all(|j| (lambdas[j] - lambdas[k]).norm() > SIMPLE_GAP * norm.max(f64::MIN_POSITIVE))
        })
        .collect();
    Ok(GeneralEigen {
        eigenvalues: lambdas,
        right_vectors: right,
        left_vectors: left,
        simple,
    })
}

pub fn eigenvalues(a: &ComplexMatrix) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 2000 * n.max(1)).ok_or(Error::ConvergenceFailure)?;
    let (_, t) = schur.unpack();
    Ok((0..n).map(|k| t[(k, k)]).collect())
}

/// Eigenvalues of the Hermitian-definite pencil `M x = λ P x`, ascending.
pub fn gevp_hermitian_definite(m: &ComplexMatrix, p: &ComplexMatrix, tol: f64) -> Result<Vec<f64>> {
    for h in [m, p] {
        let skew = hermitian_skew(h);
        if skew > tol.max(DEFAULT_TOL) {
            return Err(Error::NotHermitian(skew));
        }
    }
    let p = re_part(p);
    let pmin = lambda_min(&p);
    let pscale = spectral_norm(&p).max(f64::MIN_POSITIVE);
    if pmin <= tol * pscale {
        return Err(Error::NotDefinite(pmin));
    }
    let chol = Cholesky::new(p).ok_or(Error::NotDefinite(pmin))?;
    let l = chol.l();
    let linv = l.clone().try_inverse().ok_or(Error::NotDefinite(pmin))?;
    let reduced = &linv * re_part(m) * linv.adjoint();
    Ok(eig_hermitian_unchecked(&re_part(&reduced)).eigenvalues)
}

/// `f(H)` for Hermitian `H` via its eigenbasis.
pub fn hermitian_function(h: &ComplexMatrix, f: impl Fn(f64) -> f64) -> ComplexMatrix {
    let eig = eig_hermitian_unchecked(&re_part(h));
    let v = &eig.eigenvectors;
    let d = diag_real(&eig.eigenvalues.iter().map(|&x| f(x)).collect::<Vec<_>>());
    v * d * v.adjoint()
}

pub fn inverse(a: &ComplexMatrix) -> Option<ComplexMatrix> {
    a.clone().try_inverse()
}

/// Ratio of extreme singular values; infinite for singular input.
pub fn condition_number(a: &ComplexMatrix) -> f64 {
    let eig = SymmetricEigen::new(a.adjoint() * a);
    let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        (max / min).sqrt()
    }
}

pub fn block_diag(blocks: &[ComplexMatrix]) -> ComplexMatrix {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = ComplexMatrix::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        out.view_mut((off, off), (b.nrows(), b.ncols())).copy_from(b);
        off += b.nrows();
    }
    out
}

/// Embed a complex Hermitian `d×d` matrix as the real symmetric `2d×2d`
/// matrix `[[Re H, −Im H], [Im H, Re H]]`.
pub fn realify(h: &ComplexMatrix) -> DMatrix<f64> {
    let d = h.nrows();
    DMatrix::from_fn(2 * d, 2 * d, |i, j| {
        let z = h[(i % d, j % d)];
        match (i < d, j < d) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}
