//! Small dense linear-algebra helpers shared by the coin, channel and
//! attractor code. Heavy decompositions go through `faer`.

use faer::{Mat, Side};

use crate::error::{Error, Result};

pub use faer::c64;

pub const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub const ONE: c64 = c64 { re: 1.0, im: 0.0 };
pub const I: c64 = c64 { re: 0.0, im: 1.0 };

/// A 4x4 complex matrix acting on the coin space, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat4(pub [[c64; 4]; 4]);

impl Mat4 {
    pub fn zeros() -> Self {
        Mat4([[ZERO; 4]; 4])
    }

    pub fn identity() -> Self {
        let mut m = Self::zeros();
        for i in 0..4 {
            m.0[i][i] = ONE;
        }
        m
    }

    pub fn from_fn(f: impl Fn(usize, usize) -> c64) -> Self {
        let mut m = Self::zeros();
        for i in 0..4 {
            for j in 0..4 {
                m.0[i][j] = f(i, j);
            }
        }
        m
    }

    pub fn get(&self, i: usize, j: usize) -> c64 {
        self.0[i][j]
    }

    pub fn mul(&self, other: &Mat4) -> Mat4 {
        Mat4::from_fn(|i, j| (0..4).map(|k| self.0[i][k] * other.0[k][j]).sum())
    }

    pub fn adjoint(&self) -> Mat4 {
        Mat4::from_fn(|i, j| self.0[j][i].conj())
    }

    pub fn scale(&self, z: c64) -> Mat4 {
        Mat4::from_fn(|i, j| self.0[i][j] * z)
    }

    pub fn apply(&self, v: &[c64; 4]) -> [c64; 4] {
        let mut out = [ZERO; 4];
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..4).map(|k| self.0[i][k] * v[k]).sum();
        }
        out
    }

    pub fn pow(&self, mut e: u64) -> Mat4 {
        let mut base = *self;
        let mut acc = Mat4::identity();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }

    pub fn max_abs_diff(&self, other: &Mat4) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..4 {
            for j in 0..4 {
                worst = worst.max((self.0[i][j] - other.0[i][j]).norm());
            }
        }
        worst
    }

    /// `max |(A^dagger A - I)_{ij}|`.
    pub fn unitarity_residual(&self) -> f64 {
        self.adjoint().mul(self).max_abs_diff(&Mat4::identity())
    }

    pub fn to_faer(&self) -> Mat<c64> {
        Mat::from_fn(4, 4, |i, j| self.0[i][j])
    }
}

pub fn dot(a: &[c64], b: &[c64]) -> c64 {
    // <a|b>, conjugate-linear in the first argument
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[c64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs_diff(a: &[c64], b: &[c64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Orthonormalizes `vectors` in order with modified Gram-Schmidt and one
/// reorthogonalization pass. A vector whose residual falls below
/// `rank_tol` times its original norm is dropped; the returned indices say
/// which inputs survived.
pub fn orthonormalize(vectors: &[Vec<c64>], rank_tol: f64) -> (Vec<Vec<c64>>, Vec<usize>) {
    let mut basis: Vec<Vec<c64>> = Vec::new();
    let mut kept = Vec::new();
    for (idx, v) in vectors.iter().enumerate() {
        let original = norm(v);
        if original == 0.0 {
            continue;
        }
        let mut w = v.clone();
        for _pass in 0..2 {
            for q in &basis {
                let proj = dot(q, &w);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= proj * qi;
                }
            }
        }
        let residual = norm(&w);
        if residual <= rank_tol * original {
            continue;
        }
        let inv = 1.0 / residual;
        w.iter_mut().for_each(|x| *x *= inv);
        basis.push(w);
        kept.push(idx);
    }
    (basis, kept)
}

/// Rotates `v` so its first component above `tol` in modulus is real positive.
pub fn fix_phase(v: &mut [c64], tol: f64) {
    if let Some(first) = v.iter().find(|x| x.norm() > tol).copied() {
        let phase = first.conj() / first.norm();
        v.iter_mut().for_each(|x| *x *= phase);
    }
}

/// Orthonormal basis (as columns) of the right null space of `a`: right
/// singular vectors whose singular value is at most `tol`.
pub fn null_space(a: &Mat<c64>, tol: f64) -> Result<Vec<Vec<c64>>> {
    let svd = a.svd().map_err(|e| Error::Linalg(format!("svd: {e:?}")))?;
    let s = svd.S().column_vector();
    let v = svd.V();
    let n = a.ncols();
    let mut out = Vec::new();
    for j in 0..n {
        let sigma = if j < s.nrows() { s[j].re } else { 0.0 };
        if sigma <= tol {
            out.push((0..n).map(|i| v[(i, j)]).collect());
        }
    }
    Ok(out)
}

/// The `k` right singular vectors of `a` with the smallest singular values,
/// together with those singular values.
pub fn smallest_right_singular_vectors(a: &Mat<c64>, k: usize) -> Result<(Vec<f64>, Vec<Vec<c64>>)> {
    let svd = a.svd().map_err(|e| Error::Linalg(format!("svd: {e:?}")))?;
    let s = svd.S().column_vector();
    let v = svd.V();
    let n = a.ncols();
    let mut sigmas = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    for j in n.saturating_sub(k)..n {
        sigmas.push(if j < s.nrows() { s[j].re } else { 0.0 });
        vectors.push((0..n).map(|i| v[(i, j)]).collect());
    }
    Ok((sigmas, vectors))
}

/// Eigenpairs of a Hermitian matrix whose eigenvalue is at most `tol`.
pub fn hermitian_low_eigenvectors(h: &Mat<c64>, tol: f64) -> Result<Vec<Vec<c64>>> {
    let evd = h.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Linalg(format!("hermitian eigensolve: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let n = h.nrows();
    let mut out = Vec::new();
    for j in 0..n {
        if s[j].re <= tol {
            out.push((0..n).map(|i| u[(i, j)]).collect());
        }
    }
    Ok(out)
}

pub fn eigenvalues(a: &Mat<c64>) -> Result<Vec<c64>> {
    a.eigenvalues().map_err(|e| Error::Linalg(format!("eigenvalues: {e:?}")))
}

pub fn columns_to_mat(cols: &[Vec<c64>], nrows: usize) -> Mat<c64> {
    Mat::from_fn(nrows, cols.len(), |i, j| cols[j][i])
}

/// Sine of the largest principal angle between the spans of two orthonormal
/// families of equal size. Returns 1 when the sizes differ.
pub fn max_principal_sine(a: &[Vec<c64>], b: &[Vec<c64>]) -> f64 {
    if a.len() != b.len() {
        return 1.0;
    }
    if a.is_empty() {
        return 0.0;
    }
    let d = a[0].len();
    // residual of a after projecting onto span(b)
    let mut residual = Mat::<c64>::zeros(d, a.len());
    for (j, v) in a.iter().enumerate() {
        let mut w = v.clone();
        for q in b {
            let proj = dot(q, &w);
            for (wi, qi) in w.iter_mut().zip(q) {
                *wi -= proj * qi;
            }
        }
        for i in 0..d {
            residual[(i, j)] = w[i];
        }
    }
    match residual.singular_values() {
        Ok(s) => s.first().copied().unwrap_or(0.0),
        Err(_) => 1.0,
    }
}

/// Phase distance `|arg(a / b)|` between two unit-modulus numbers.
pub fn phase_distance(a: c64, b: c64) -> f64 {
    (a * b.conj()).arg().abs()
}

/// Maps a phase into `[0, 2 pi)`.
pub fn phase_0_2pi(z: c64) -> f64 {
    let p = z.arg();
    if p < 0.0 {
        p + 2.0 * std::f64::consts::PI
    } else {
        p
    }
}
