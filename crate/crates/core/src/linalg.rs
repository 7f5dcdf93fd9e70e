//! Small dense complex linear algebra: Cholesky, thin QR and Hermitian
//! eigenvalues.
//!
//! Problem sizes in this crate are desk scale (matrices up to a few hundred
//! rows), so straightforward O(n³) routines on `ndarray` storage are plenty
//! and keep the crate free of BLAS/LAPACK linkage.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Conjugate transpose.
pub fn adjoint(a: &ArrayView2<C64>) -> Array2<C64> {
    let (m, n) = a.dim();
    Array2::from_shape_fn((n, m), |(i, j)| a[[j, i]].conj())
}

/// Complex inner product `⟨u, v⟩ = u* v` (conjugate-linear in the first slot).
pub fn inner(u: &ArrayView1<C64>, v: &ArrayView1<C64>) -> C64 {
    debug_assert_eq!(u.len(), v.len());
    u.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm2(v: &ArrayView1<C64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Lower Cholesky factor L of a Hermitian positive-definite matrix, A = L L*.
pub fn cholesky(a: &ArrayView2<C64>) -> Result<Array2<C64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::InvalidInput("cholesky: matrix not square".into()));
    }
    let mut l = Array2::<C64>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]].re;
        for k in 0..j {
            d -= l[[j, k]].norm_sqr();
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        let djj = d.sqrt();
        l[[j, j]] = C64::new(djj, 0.0);
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]].conj();
            }
            l[[i, j]] = s / djj;
        }
    }
    Ok(l)
}

/// Solve L x = b with L lower triangular.
pub fn solve_lower(l: &ArrayView2<C64>, b: &ArrayView1<C64>) -> Array1<C64> {
    let n = l.nrows();
    let mut x = b.to_owned();
    for i in 0..n {
        for k in 0..i {
            let tmp = x[k];
            x[i] -= l[[i, k]] * tmp;
        }
        x[i] /= l[[i, i]];
    }
    x
}

/// Solve L* x = b with L lower triangular (back substitution on the adjoint).
pub fn solve_lower_adjoint(l: &ArrayView2<C64>, b: &ArrayView1<C64>) -> Array1<C64> {
    let n = l.nrows();
    let mut x = b.to_owned();
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let tmp = x[k];
            x[i] -= l[[k, i]].conj() * tmp;
        }
        x[i] /= l[[i, i]].conj();
    }
    x
}

/// Thin QR by modified Gram-Schmidt with one re-orthogonalization pass.
/// Returns (Q, R) with Q m×n (orthonormal columns) and R n×n upper triangular.
/// Fails with a rank error when a column is numerically dependent.
pub fn thin_qr(a: &ArrayView2<C64>) -> Result<(Array2<C64>, Array2<C64>)> {
    let (m, n) = a.dim();
    if n == 0 || m < n {
        return Err(Error::InvalidInput(format!(
            "thin_qr: need m >= n >= 1, got {m}x{n}"
        )));
    }
    let mut q = a.to_owned();
    let mut r = Array2::<C64>::zeros((n, n));
    for j in 0..n {
        let col_norm_in = norm2(&a.column(j));
        // two MGS passes for orthogonality at working precision
        for _pass in 0..2 {
            for k in 0..j {
                let qk = q.column(k).to_owned();
                let proj = inner(&qk.view(), &q.column(j));
                r[[k, j]] += proj;
                for i in 0..m {
                    q[[i, j]] = q[[i, j]] - proj * qk[i];
                }
            }
        }
        let nrm = norm2(&q.column(j));
        if nrm <= 1e-10 * col_norm_in.max(1e-300) {
            return Err(Error::NumericRank(format!(
                "column {j} numerically dependent (residual norm {nrm:.3e})"
            )));
        }
        r[[j, j]] = C64::new(nrm, 0.0);
        for i in 0..m {
            q[[i, j]] /= nrm;
        }
    }
    Ok((q, r))
}

/// Least-squares solution of min ‖A x − y‖₂ via thin QR.
pub fn least_squares(a: &ArrayView2<C64>, y: &ArrayView1<C64>) -> Result<Array1<C64>> {
    let (q, r) = thin_qr(a)?;
    let qty = adjoint(&q.view()).dot(y);
    let n = r.nrows();
    let mut x = qty;
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let t = x[k];
            x[i] -= r[[i, k]] * t;
        }
        x[i] /= r[[i, i]];
    }
    Ok(x)
}

/// Orthogonal projector onto the column span of A: P = Q Q*.
pub fn projector_onto_columns(a: &ArrayView2<C64>) -> Result<Array2<C64>> {
    let (q, _r) = thin_qr(a)?;
    Ok(q.dot(&adjoint(&q.view())))
}

/// Eigenvalues of a Hermitian matrix by the cyclic complex Jacobi method,
/// returned in ascending order.
pub fn hermitian_eigenvalues(a: &ArrayView2<C64>) -> Result<Vec<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::InvalidInput("eigenvalues: matrix not square".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut m = a.to_owned();
    let scale: f64 = m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if scale == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let tol = 1e-14 * scale;
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[[p, q]].norm_sqr();
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                let r = apq.norm();
                if r <= tol / (n as f64) {
                    continue;
                }
                let phase = apq / r; // e^{iφ}
                let app = m[[p, p]].re;
                let aqq = m[[q, q]].re;
                let tau = (app - aqq) / (2.0 * r);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // columns: col_p ← c·col_p + s·phasē·col_q ; col_q ← −s·phase·col_p + c·col_q
                for i in 0..n {
                    let mip = m[[i, p]];
                    let miq = m[[i, q]];
                    m[[i, p]] = mip * c + miq * s * phase.conj();
                    m[[i, q]] = -mip * s * phase + miq * c;
                }
                // rows with the adjoint rotation
                for j in 0..n {
                    let mpj = m[[p, j]];
                    let mqj = m[[q, j]];
                    m[[p, j]] = mpj * c + mqj * s * phase;
                    m[[q, j]] = -mpj * s * phase.conj() + mqj * c;
                }
            }
        }
    }
    let mut evals: Vec<f64> = (0..n).map(|i| m[[i, i]].re).collect();
    evals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(evals)
}
