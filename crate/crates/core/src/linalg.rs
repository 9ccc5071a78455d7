// SPDX-License-Identifier: Apache-2.0

//! Dense complex matrix helpers on top of `faer`.

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::{Mat, Side};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type CMat = Mat<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn zeros(rows: usize, cols: usize) -> CMat {
    Mat::zeros(rows, cols)
}

pub fn identity(n: usize) -> CMat {
    Mat::identity(n, n)
}

pub fn scale(a: &CMat, s: C64) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

pub fn adjoint(a: &CMat) -> CMat {
    a.adjoint().to_owned()
}

pub fn transpose(a: &CMat) -> CMat {
    a.transpose().to_owned()
}

pub fn conj(a: &CMat) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)].conj())
}

/// Kronecker product `a ⊗ b` with `a` acting on the most significant index.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = (a.nrows(), a.ncols());
    let (br, bc) = (b.nrows(), b.ncols());
    Mat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

pub fn trace(a: &CMat) -> C64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).sum()
}

pub fn frobenius(a: &CMat) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

pub fn max_abs(a: &CMat) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

/// Largest absolute difference between two equally sized matrices.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    m
}

fn norm1(a: &CMat) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Spectral norm (largest singular value).
pub fn norm2(a: &CMat) -> f64 {
    match a.svd() {
        Ok(svd) => {
            let s = svd.S().column_vector();
            (0..s.nrows()).map(|i| s[i].re).fold(0.0, f64::max)
        }
        Err(_) => f64::NAN,
    }
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with a degree-13 Padé approximant.
pub fn expm(a: &CMat) -> CMat {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    let nrm = norm1(a);
    if nrm == 0.0 {
        return identity(n);
    }
    let s = if nrm > THETA13 {
        (nrm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = scale(a, C64::from(2f64.powi(-s)));
    let id = identity(n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = |k: usize| C64::from(PADE13[k]);
    let lin = |m: &CMat, c: C64| scale(m, c);

    let u_inner = lin(&a6, b(13)) + lin(&a4, b(11)) + lin(&a2, b(9));
    let u_tail = lin(&a6, b(7)) + lin(&a4, b(5)) + lin(&a2, b(3)) + lin(&id, b(1));
    let u = &a * (&a6 * &u_inner + u_tail);
    let v_inner = lin(&a6, b(12)) + lin(&a4, b(10)) + lin(&a2, b(8));
    let v = &a6 * &v_inner + lin(&a6, b(6)) + lin(&a4, b(4)) + lin(&a2, b(2)) + lin(&id, b(0));

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.partial_piv_lu().solve(&p);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// Inverse with a residual check; fails on (numerically) singular input.
pub fn inverse(a: &CMat) -> Result<CMat> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Dimension(format!("inverse of {}x{}", n, a.ncols())));
    }
    let inv = a.full_piv_lu().inverse();
    if inv.col_iter().flat_map(|c| c.iter().copied().collect::<Vec<_>>()).any(|z| !z.is_finite()) {
        return Err(Error::Singular("non-finite inverse".into()));
    }
    let resid = max_abs_diff(&(a * &inv), &identity(n));
    if !resid.is_finite() || resid > 1e-6 {
        return Err(Error::Singular(format!("inverse residual {resid:.3e}")));
    }
    Ok(inv)
}

pub fn solve(a: &CMat, b: &CMat) -> CMat {
    a.full_piv_lu().solve(b)
}

/// General eigendecomposition: eigenvalues and right eigenvectors (as columns).
pub fn eig(a: &CMat) -> Result<(Vec<C64>, CMat)> {
    let e = a
        .eigen()
        .map_err(|e| Error::Numerical(format!("eigendecomposition failed: {e:?}")))?;
    let s = e.S().column_vector();
    let vals = (0..s.nrows()).map(|i| s[i]).collect();
    Ok((vals, e.U().to_owned()))
}

pub fn eigenvalues(a: &CMat) -> Result<Vec<C64>> {
    a.eigenvalues()
        .map_err(|e| Error::Numerical(format!("eigenvalues failed: {e:?}")))
}

/// Eigenvalues of the Hermitian part `(A + A†)/2`, ascending.
pub fn hermitian_eigenvalues(a: &CMat) -> Result<Vec<f64>> {
    let h = Mat::from_fn(a.nrows(), a.ncols(), |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5);
    let mut v = h
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical(format!("hermitian eigenvalues failed: {e:?}")))?;
    v.sort_by(|x, y| x.total_cmp(y));
    Ok(v)
}

/// Hermitian eigendecomposition `(eigenvalues ascending, eigenvectors as columns)`.
pub fn eigh(a: &CMat) -> Result<(Vec<f64>, CMat)> {
    let h = Mat::from_fn(a.nrows(), a.ncols(), |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5);
    let e = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("hermitian eigendecomposition failed: {e:?}")))?;
    let s = e.S().column_vector();
    Ok(((0..s.nrows()).map(|i| s[i].re).collect(), e.U().to_owned()))
}

/// Thin SVD `A = U diag(s) V†`.
pub fn svd(a: &CMat) -> Result<(CMat, Vec<f64>, CMat)> {
    let d = a
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("svd failed: {e:?}")))?;
    let s = d.S().column_vector();
    let sv = (0..s.nrows()).map(|i| s[i].re).collect();
    Ok((d.U().to_owned(), sv, d.V().to_owned()))
}

/// Moore–Penrose pseudo-inverse, discarding singular values below `rtol * s_max`.
pub fn pinv(a: &CMat, rtol: f64) -> Result<CMat> {
    let (u, s, v) = svd(a)?;
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let k = s.len();
    let sinv = Mat::from_fn(k, k, |i, j| {
        if i == j && s[i] > rtol * smax {
            C64::from(1.0 / s[i])
        } else {
            ZERO
        }
    });
    Ok(&v * &sinv * adjoint(&u))
}

/// Principal matrix logarithm through the eigendecomposition (diagonalizable input).
pub fn logm(a: &CMat) -> Result<CMat> {
    let (vals, vecs) = eig(a)?;
    let inv = inverse(&vecs)?;
    let n = vals.len();
    let d = Mat::from_fn(n, n, |i, j| if i == j { vals[i].ln() } else { ZERO });
    Ok(&vecs * &d * &inv)
}

/// Column `j` of `a` as a vector.
pub fn column(a: &CMat, j: usize) -> Vec<C64> {
    (0..a.nrows()).map(|i| a[(i, j)]).collect()
}

pub fn matvec(a: &CMat, x: &[C64]) -> Vec<C64> {
    assert_eq!(a.ncols(), x.len());
    let mut y = vec![ZERO; a.nrows()];
    for (j, xj) in x.iter().enumerate() {
        if *xj == ZERO {
            continue;
        }
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += a[(i, j)] * xj;
        }
    }
    y
}

/// Row vector times matrix: `x^T A` (no conjugation).
pub fn vecmat(x: &[C64], a: &CMat) -> Vec<C64> {
    assert_eq!(a.nrows(), x.len());
    (0..a.ncols())
        .map(|j| x.iter().enumerate().map(|(i, xi)| xi * a[(i, j)]).sum())
        .collect()
}
