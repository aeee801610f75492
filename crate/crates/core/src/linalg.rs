//! Small dense complex linear-algebra helpers.
//!
//! Everything here operates on `ndarray` arrays of `num_complex::Complex64`
//! (aliased `C64` throughout the crate). General eigenproblems go through
//! LAPACK via `ndarray-linalg`; a hand-rolled cyclic-Jacobi path exists for
//! 3×3 Hermitian matrices because the decomposition search evaluates millions
//! of tiny eigenproblems and LAPACK call overhead dominates at that size.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub const TAU: f64 = std::f64::consts::TAU;

/// Conjugate transpose.
pub fn dagger(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

pub fn trace(a: &Array2<C64>) -> C64 {
    a.diag().iter().sum()
}

pub fn frobenius_norm(a: &Array2<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest elementwise magnitude of `a - b`.
pub fn max_abs_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Largest elementwise magnitude of `a - a†`.
pub fn hermiticity_deviation(a: &Array2<C64>) -> f64 {
    let n = a.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((a[[i, j]] - a[[j, i]].conj()).norm());
        }
    }
    dev
}

/// Largest elementwise magnitude of `U·U† - 1`.
pub fn unitarity_deviation(u: &Array2<C64>) -> f64 {
    let n = u.nrows();
    let prod = u.dot(&dagger(u));
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            dev = dev.max((prod[[i, j]] - target).norm());
        }
    }
    dev
}

/// Map an angle to `(-π, π]`.
pub fn wrap_angle(x: f64) -> f64 {
    let mut y = x.rem_euclid(TAU);
    if y > std::f64::consts::PI {
        y -= TAU;
    }
    y
}

/// Map an angle to `[0, 2π)`.
pub fn canonical_phase(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y == TAU { 0.0 } else { y }
}

/// Hermitian eigendecomposition (ascending eigenvalues, eigenvectors as
/// columns). Only the lower triangle of the input is referenced.
pub fn eigh(h: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    let (vals, vecs) = h.eigh(UPLO::Lower)?;
    // row-major inputs can come back with eigenvectors of the transposed
    // (= conjugated) matrix; pick whichever of V, conj(V) actually satisfies
    // H·V = V·Λ so the result is layout- and backend-independent.
    let lam = Array2::from_diag(&vals.mapv(|x| C64::new(x, 0.0)));
    let res = frobenius_norm(&(h.dot(&vecs) - vecs.dot(&lam)));
    let vc = vecs.mapv(|z| z.conj());
    let res_c = frobenius_norm(&(h.dot(&vc) - vc.dot(&lam)));
    if res_c < res {
        Ok((vals, vc))
    } else {
        Ok((vals, vecs))
    }
}

/// Apply a scalar function to a Hermitian matrix through its eigensystem.
pub fn hermitian_matrix_fn(h: &Array2<C64>, f: impl Fn(f64) -> C64) -> Result<Array2<C64>> {
    let n = h.nrows();
    let (vals, vecs) = eigh(h)?;
    let mut out = Array2::<C64>::zeros((n, n));
    for (k, &lam) in vals.iter().enumerate() {
        let fk = f(lam);
        let v = vecs.column(k);
        for i in 0..n {
            for j in 0..n {
                out[[i, j]] += fk * v[i] * v[j].conj();
            }
        }
    }
    Ok(out)
}

/// `exp(-i·H·t)` for Hermitian `H` through its eigendecomposition.
pub fn expm_hermitian(h: &Array2<C64>, t: f64) -> Result<Array2<C64>> {
    hermitian_matrix_fn(h, |lam| C64::from_polar(1.0, -lam * t))
}

/// Principal square root of a positive semidefinite Hermitian matrix.
/// Slightly negative eigenvalues (roundoff) are clipped to zero.
pub fn hermitian_sqrt(h: &Array2<C64>) -> Result<Array2<C64>> {
    hermitian_matrix_fn(h, |lam| C64::new(lam.max(0.0).sqrt(), 0.0))
}

/// Exponential of a small real matrix by scaling-and-squaring a Taylor
/// series. Intended for classical rate matrices (size ≤ ~10).
pub fn expm_real(q: &Array2<f64>) -> Array2<f64> {
    let n = q.nrows();
    let norm = q.iter().map(|x| x.abs()).fold(0.0, f64::max) * n as f64;
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let x = q.mapv(|v| v / 2f64.powi(s as i32));
    let mut term = Array2::<f64>::eye(n);
    let mut acc = Array2::<f64>::eye(n);
    for k in 1..64 {
        term = term.dot(&x) / k as f64;
        acc += &term;
        let tn = term.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if tn < 1e-18 {
            break;
        }
    }
    for _ in 0..s {
        acc = acc.dot(&acc);
    }
    acc
}

// ---------------------------------------------------------------------------
// eigensystem of a unitary matrix
// ---------------------------------------------------------------------------

/// Eigendecomposition of a unitary matrix `U` into unimodular eigenvalues and
/// an orthonormal eigenbasis.
///
/// `U` is normal, so it is simultaneously diagonalizable with the commuting
/// Hermitian pair `A = (U + U†)/2`, `B = (U - U†)/(2i)`. We diagonalize `A`,
/// then rotate inside degenerate `A`-clusters to diagonalize `B` there. This
/// avoids a general non-symmetric eigensolver and keeps the basis exactly
/// orthonormal.
pub fn unitary_eigensystem(u: &Array2<C64>) -> Result<(Vec<C64>, Array2<C64>)> {
    let n = u.nrows();
    if u.ncols() != n {
        return Err(Error::Dimension(format!("unitary_eigensystem: {}×{}", n, u.ncols())));
    }
    let ud = dagger(u);
    let a = (u + &ud).mapv(|z| z * 0.5);
    let b = (u - &ud).mapv(|z| z * C64::new(0.0, -0.5));
    let (avals, mut vecs) = eigh(&a)?;

    // cluster degenerate A-eigenvalues; eigh returns them sorted ascending
    let cluster_tol = 1e-8;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (avals[end] - avals[end - 1]).abs() < cluster_tol {
            end += 1;
        }
        let m = end - start;
        if m > 1 {
            // diagonalize B restricted to the cluster subspace
            let mut bsub = Array2::<C64>::zeros((m, m));
            for r in 0..m {
                for c in 0..m {
                    let vr = vecs.column(start + r);
                    let vc = vecs.column(start + c);
                    let mut acc = C64::new(0.0, 0.0);
                    for i in 0..n {
                        for j in 0..n {
                            acc += vr[i].conj() * b[[i, j]] * vc[j];
                        }
                    }
                    bsub[[r, c]] = acc;
                }
            }
            let (_, w) = eigh(&bsub)?;
            let old: Vec<Array1<C64>> =
                (0..m).map(|r| vecs.column(start + r).to_owned()).collect();
            for c in 0..m {
                let mut newv = Array1::<C64>::zeros(n);
                for r in 0..m {
                    let coeff = w[[r, c]];
                    newv.iter_mut().zip(old[r].iter()).for_each(|(o, &x)| *o += coeff * x);
                }
                vecs.column_mut(start + c).assign(&newv);
            }
        }
        start = end;
    }

    // unimodular eigenvalues from Rayleigh quotients
    let mut evals = Vec::with_capacity(n);
    for k in 0..n {
        let v = vecs.column(k);
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            let mut row = C64::new(0.0, 0.0);
            for j in 0..n {
                row += u[[i, j]] * v[j];
            }
            acc += v[i].conj() * row;
        }
        evals.push(acc);
    }
    Ok((evals, vecs))
}

/// Principal-branch Hermitian generator of a unitary: the `G` with
/// `U = exp(-i·G)` and eigenvalues of `G` in `[-π, π)`, i.e. `G = i·log U`.
///
/// Also returns the branch margin `min_k |u_k + 1|`: eigenvalues of `U` close
/// to −1 make the principal branch ill-conditioned, and callers should treat
/// small margins as a degeneracy flag.
pub fn unitary_log(u: &Array2<C64>) -> Result<(Array2<C64>, f64)> {
    let n = u.nrows();
    let (evals, vecs) = unitary_eigensystem(u)?;
    let mut g = Array2::<C64>::zeros((n, n));
    let mut margin = f64::INFINITY;
    for (k, lam) in evals.iter().enumerate() {
        margin = margin.min((lam + C64::new(1.0, 0.0)).norm());
        let gk = -lam.arg();
        let v = vecs.column(k);
        for i in 0..n {
            for j in 0..n {
                g[[i, j]] += C64::new(gk, 0.0) * v[i] * v[j].conj();
            }
        }
    }
    // enforce exact Hermiticity of the assembled generator
    let gd = dagger(&g);
    let g = (g + gd).mapv(|z| z * 0.5);
    Ok((g, margin))
}

// ---------------------------------------------------------------------------
// fast fixed-size 3×3 path (decomposition search hot loop)
// ---------------------------------------------------------------------------

pub(crate) type M3 = [[C64; 3]; 3];

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Orthonormal eigenbasis of the Hermitian 2×2 block [[a, b], [b̄, d]];
/// returns the rotation columns `(v1, v2)` with `v2` belonging to the larger
/// eigenvalue.
#[inline]
fn eigh2_rotation(a: f64, b: C64, d: f64) -> ([C64; 2], [C64; 2]) {
    let mean = 0.5 * (a + d);
    let half = 0.5 * (a - d);
    let disc = (half * half + b.norm_sqr()).sqrt();
    let lam2 = mean + disc;
    // eigenvector for the larger eigenvalue, picking the better-conditioned row
    let (x, y) = if (lam2 - a).abs() >= (lam2 - d).abs() {
        (b, C64::new(lam2 - a, 0.0))
    } else {
        (C64::new(lam2 - d, 0.0), b.conj())
    };
    let nrm = (x.norm_sqr() + y.norm_sqr()).sqrt();
    if nrm < 1e-300 {
        return ([ONE, ZERO], [ZERO, ONE]);
    }
    let v2 = [x / nrm, y / nrm];
    let v1 = [-v2[1].conj(), v2[0].conj()];
    (v1, v2)
}

/// Cyclic-Jacobi eigendecomposition of a 3×3 complex Hermitian matrix.
/// Returns eigenvalues (ascending) and the matching orthonormal eigenvector
/// columns `v[row][col]`.
pub(crate) fn jacobi_eigh3(h: &M3) -> ([f64; 3], M3) {
    let mut a = *h;
    let mut v: M3 = [[ONE, ZERO, ZERO], [ZERO, ONE, ZERO], [ZERO, ZERO, ONE]];
    let scale: f64 = a
        .iter()
        .flatten()
        .map(|z| z.norm_sqr())
        .sum::<f64>()
        .sqrt()
        .max(1e-300);
    let tol2 = (1e-15 * scale) * (1e-15 * scale);
    for _sweep in 0..40 {
        let off = a[0][1].norm_sqr() + a[0][2].norm_sqr() + a[1][2].norm_sqr();
        if off < tol2 {
            break;
        }
        for &(p, q) in &[(0usize, 1usize), (0, 2), (1, 2)] {
            if a[p][q].norm_sqr() < tol2 * 1e-4 {
                continue;
            }
            let (r1, r2) = eigh2_rotation(a[p][p].re, a[p][q], a[q][q].re);
            // column update: A <- A·R, V <- V·R on columns (p, q)
            for i in 0..3 {
                let aip = a[i][p];
                let aiq = a[i][q];
                a[i][p] = aip * r1[0] + aiq * r1[1];
                a[i][q] = aip * r2[0] + aiq * r2[1];
                let vip = v[i][p];
                let viq = v[i][q];
                v[i][p] = vip * r1[0] + viq * r1[1];
                v[i][q] = vip * r2[0] + viq * r2[1];
            }
            // row update: A <- R†·A on rows (p, q)
            for j in 0..3 {
                let apj = a[p][j];
                let aqj = a[q][j];
                a[p][j] = r1[0].conj() * apj + r1[1].conj() * aqj;
                a[q][j] = r2[0].conj() * apj + r2[1].conj() * aqj;
            }
        }
    }
    let mut vals = [a[0][0].re, a[1][1].re, a[2][2].re];
    // sort ascending, permuting eigenvector columns alongside
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&i, &j| vals[i].partial_cmp(&vals[j]).unwrap());
    let mut sv = [0.0f64; 3];
    let mut svecs: M3 = [[ZERO; 3]; 3];
    for (c, &i) in idx.iter().enumerate() {
        sv[c] = vals[i];
        for r in 0..3 {
            svecs[r][c] = v[r][i];
        }
    }
    vals = sv;
    (vals, svecs)
}

/// Largest diagonal magnitude of the principal-branch generator `i·log U` of
/// a 3×3 unitary, computed without LAPACK. This is the decomposition-search
/// objective; it vanishes exactly when the generator is purely off-diagonal.
pub(crate) fn unitary_log_diag3_max(u: &M3) -> f64 {
    // A = (U + U†)/2, B = (U - U†)/(2i)
    let mut a: M3 = [[ZERO; 3]; 3];
    let mut b: M3 = [[ZERO; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let s = u[i][j] + u[j][i].conj();
            let d = u[i][j] - u[j][i].conj();
            a[i][j] = 0.5 * s;
            b[i][j] = C64::new(0.0, -0.5) * d;
        }
    }
    let (avals, mut vecs) = jacobi_eigh3(&a);

    // rotate inside degenerate A-clusters so B is diagonal there too
    let cluster_tol = 1e-8;
    let c01 = (avals[1] - avals[0]).abs() < cluster_tol;
    let c12 = (avals[2] - avals[1]).abs() < cluster_tol;
    if c01 && c12 {
        // full 3-fold degeneracy: diagonalize B in the rotated basis
        let mut bsub: M3 = [[ZERO; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                let mut acc = ZERO;
                for i in 0..3 {
                    for j in 0..3 {
                        acc += vecs[i][r].conj() * b[i][j] * vecs[j][c];
                    }
                }
                bsub[r][c] = acc;
            }
        }
        let (_, w) = jacobi_eigh3(&bsub);
        let old = vecs;
        for c in 0..3 {
            for i in 0..3 {
                let mut acc = ZERO;
                for r in 0..3 {
                    acc += w[r][c] * old[i][r];
                }
                vecs[i][c] = acc;
            }
        }
    } else if c01 || c12 {
        let (p, q) = if c01 { (0, 1) } else { (1, 2) };
        let mut bpp = ZERO;
        let mut bpq = ZERO;
        let mut bqq = ZERO;
        for i in 0..3 {
            for j in 0..3 {
                bpp += vecs[i][p].conj() * b[i][j] * vecs[j][p];
                bpq += vecs[i][p].conj() * b[i][j] * vecs[j][q];
                bqq += vecs[i][q].conj() * b[i][j] * vecs[j][q];
            }
        }
        let (r1, r2) = eigh2_rotation(bpp.re, bpq, bqq.re);
        for i in 0..3 {
            let vip = vecs[i][p];
            let viq = vecs[i][q];
            vecs[i][p] = vip * r1[0] + viq * r1[1];
            vecs[i][q] = vip * r2[0] + viq * r2[1];
        }
    }

    // generator diagonal from eigenphases and eigenvector weights
    let mut diag = [0.0f64; 3];
    for k in 0..3 {
        let mut lam = ZERO;
        for i in 0..3 {
            let mut row = ZERO;
            for j in 0..3 {
                row += u[i][j] * vecs[j][k];
            }
            lam += vecs[i][k].conj() * row;
        }
        let g = -lam.arg();
        for j in 0..3 {
            diag[j] += g * vecs[j][k].norm_sqr();
        }
    }
    diag.iter().fold(0.0f64, |m, d| m.max(d.abs()))
}

pub(crate) fn m3_from_array(a: &Array2<C64>) -> M3 {
    let mut out: M3 = [[ZERO; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[[i, j]];
        }
    }
    out
}
