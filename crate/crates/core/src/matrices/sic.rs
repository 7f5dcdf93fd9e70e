//! SIC-POVM sensing matrices via Weyl-Heisenberg orbits of a fiducial
//! vector.
//!
//! The orbit of a fiducial f under the displacement operators
//! `D_(a,b) = τ^{ab} X^a Z^b` (X the cyclic shift, Z the diagonal of d-th
//! roots of unity, τ = −exp(πj/d)) gives d² unit vectors whose pairwise
//! squared inner products all equal 1/(d+1) when f is a true fiducial.
//! Fiducials are found numerically: the pairwise magnitudes of the orbit
//! only depend on displacement differences, so equiangularity reduces to
//! `| ⟨f, X^a Z^b f⟩ |² = 1/(d+1)` for all (a,b) ≠ (0,0), and we minimize
//! the squared deviation with descent plus a Levenberg-Marquardt polish.

use ndarray::{Array1, Array2};
use rand::Rng;

use super::fiducials;
use super::{MatrixKind, SensingMatrix};
use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::model::sample_cn;

/// How a fiducial vector was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FiducialSource {
    Analytic,
    NumericSearch,
    FileImport,
}

/// A unit vector whose Weyl-Heisenberg orbit is equiangular to within
/// `residual` (the max deviation of any orbit |⟨a_i, a_ℓ⟩|² from 1/(d+1)).
#[derive(Debug, Clone)]
pub struct Fiducial {
    pub d: usize,
    pub vector: Array1<C64>,
    pub source: FiducialSource,
    pub residual: f64,
}

impl Fiducial {
    /// Wrap an externally supplied vector, normalizing it and checking that
    /// its orbit is equiangular to within `tol`.
    pub fn from_vector(vector: Array1<C64>, source: FiducialSource, tol: f64) -> Result<Self> {
        let d = vector.len();
        if d < 2 {
            return Err(Error::InvalidInput("fiducial needs dimension >= 2".into()));
        }
        let nrm = vector.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if nrm == 0.0 {
            return Err(Error::InvalidInput("fiducial vector is zero".into()));
        }
        let vector = vector.mapv(|z| z / nrm);
        let residual = orbit_residual(&vector);
        if residual > tol {
            return Err(Error::SearchFailed {
                best_residual: residual,
                tol,
            });
        }
        Ok(Self {
            d,
            vector,
            source,
            residual,
        })
    }

    /// A fiducial bundled with the crate (numerically found, residual below
    /// 1e-11). Available for d ∈ {2,…,9} and d = 31.
    pub fn bundled(d: usize) -> Result<Self> {
        let entries = fiducials::bundled(d).ok_or_else(|| {
            Error::Unsupported(format!(
                "no bundled fiducial for d={d}; run the search or import one"
            ))
        })?;
        let vector = Array1::from_iter(entries.iter().map(|&(re, im)| C64::new(re, im)));
        Fiducial::from_vector(vector, FiducialSource::NumericSearch, 1e-10)
    }
}

fn omega_table(d: usize) -> Vec<C64> {
    (0..d)
        .map(|k| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / d as f64))
        .collect()
}

/// `X^a Z^b f` (no τ phase): entry i is `ω^{b·((i−a) mod d)} f[(i−a) mod d]`.
fn apply_xz(f: &Array1<C64>, a: usize, b: usize, omega: &[C64]) -> Array1<C64> {
    let d = f.len();
    Array1::from_shape_fn(d, |i| {
        let j = (i + d - a) % d;
        omega[(b * j) % d] * f[j]
    })
}

/// `(X^a Z^b)* f = Z^{-b} X^{-a} f`: entry i is `ω^{-b·i} f[(i+a) mod d]`.
fn apply_xz_adjoint(f: &Array1<C64>, a: usize, b: usize, omega: &[C64]) -> Array1<C64> {
    let d = f.len();
    Array1::from_shape_fn(d, |i| {
        let j = (i + a) % d;
        omega[(d - (b * i) % d) % d] * f[j]
    })
}

/// τ^{ab} with τ = −exp(πj/d); the exponent only matters mod 2d.
fn tau_pow(a: usize, b: usize, d: usize) -> C64 {
    let e = (a * b) % (2 * d);
    C64::from_polar(
        1.0,
        std::f64::consts::PI * (d as f64 + 1.0) * e as f64 / d as f64,
    )
}

/// The displaced vector `D_(a,b) f = τ^{ab} X^a Z^b f`.
pub fn displaced(f: &Array1<C64>, a: usize, b: usize) -> Array1<C64> {
    let d = f.len();
    let omega = omega_table(d);
    let v = apply_xz(f, a, b, &omega);
    let tau = tau_pow(a, b, d);
    v.mapv(|z| tau * z)
}

/// All orbit overlaps `c_(a,b) = ⟨f, X^a Z^b f⟩` as a d×d array.
fn orbit_overlaps(f: &Array1<C64>, omega: &[C64]) -> Array2<C64> {
    let d = f.len();
    let mut c = Array2::<C64>::zeros((d, d));
    for a in 0..d {
        // w_j = conj(f_{j+a}) f_j, then c_(a,b) = Σ_j ω^{bj} w_j
        let w: Vec<C64> = (0..d).map(|j| f[(j + a) % d].conj() * f[j]).collect();
        for b in 0..d {
            let mut acc = C64::new(0.0, 0.0);
            for (j, wj) in w.iter().enumerate() {
                acc += omega[(b * j) % d] * wj;
            }
            c[[a, b]] = acc;
        }
    }
    c
}

/// Max deviation of |⟨f, X^a Z^b f⟩|² from 1/(d+1) over (a,b) ≠ (0,0); this
/// equals the max pairwise deviation over the full orbit.
pub fn orbit_residual(f: &Array1<C64>) -> f64 {
    let d = f.len();
    let omega = omega_table(d);
    let c = orbit_overlaps(f, &omega);
    let target = 1.0 / (d as f64 + 1.0);
    let mut worst = 0.0f64;
    for a in 0..d {
        for b in 0..d {
            if a == 0 && b == 0 {
                continue;
            }
            worst = worst.max((c[[a, b]].norm_sqr() - target).abs());
        }
    }
    worst
}

struct Objective {
    d: usize,
    omega: Vec<C64>,
    target: f64,
}

impl Objective {
    fn new(d: usize) -> Self {
        Self {
            d,
            omega: omega_table(d),
            target: 1.0 / (d as f64 + 1.0),
        }
    }

    /// Sum of squared residuals Σ (|c_p|² − 1/(d+1))² over p ≠ 0.
    fn value(&self, f: &Array1<C64>) -> f64 {
        let c = orbit_overlaps(f, &self.omega);
        let mut q = 0.0;
        for a in 0..self.d {
            for b in 0..self.d {
                if a == 0 && b == 0 {
                    continue;
                }
                let r = c[[a, b]].norm_sqr() - self.target;
                q += r * r;
            }
        }
        q
    }

    /// Wirtinger gradient of the value w.r.t. conj(f).
    fn gradient(&self, f: &Array1<C64>) -> Array1<C64> {
        let d = self.d;
        let c = orbit_overlaps(f, &self.omega);
        let mut g = Array1::<C64>::zeros(d);
        for a in 0..d {
            for b in 0..d {
                if a == 0 && b == 0 {
                    continue;
                }
                let cp = c[[a, b]];
                let r = cp.norm_sqr() - self.target;
                if r == 0.0 {
                    continue;
                }
                let mf = apply_xz(f, a, b, &self.omega);
                let maf = apply_xz_adjoint(f, a, b, &self.omega);
                for i in 0..d {
                    g[i] += (cp.conj() * mf[i] + cp * maf[i]) * (2.0 * r);
                }
            }
        }
        g
    }

    /// Residual vector (orbit deviations then the norm constraint) and its
    /// Jacobian in the 2d real parameters (re f_0, im f_0, …).
    fn residuals_and_jacobian(&self, f: &Array1<C64>) -> (Vec<f64>, Vec<Vec<f64>>) {
        let d = self.d;
        let c = orbit_overlaps(f, &self.omega);
        let nres = d * d; // d²−1 orbit residuals + 1 norm residual
        let mut r = Vec::with_capacity(nres);
        let mut jac = Vec::with_capacity(nres);
        for a in 0..d {
            for b in 0..d {
                if a == 0 && b == 0 {
                    continue;
                }
                let cp = c[[a, b]];
                r.push(cp.norm_sqr() - self.target);
                let mf = apply_xz(f, a, b, &self.omega);
                let maf = apply_xz_adjoint(f, a, b, &self.omega);
                let mut row = vec![0.0; 2 * d];
                for i in 0..d {
                    let grad = cp.conj() * mf[i] + cp * maf[i];
                    row[2 * i] = 2.0 * grad.re;
                    row[2 * i + 1] = 2.0 * grad.im;
                }
                jac.push(row);
            }
        }
        // ‖f‖² − 1
        r.push(f.iter().map(|z| z.norm_sqr()).sum::<f64>() - 1.0);
        let mut row = vec![0.0; 2 * d];
        for i in 0..d {
            row[2 * i] = 2.0 * f[i].re;
            row[2 * i + 1] = 2.0 * f[i].im;
        }
        jac.push(row);
        (r, jac)
    }
}

fn normalize(f: &mut Array1<C64>) {
    let nrm = f.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if nrm > 0.0 {
        f.mapv_inplace(|z| z / nrm);
    }
}

/// Solve the symmetric positive-definite system `m x = b` in place (plain
/// real Cholesky; used for the tiny LM normal equations).
fn solve_spd(m: &mut Vec<Vec<f64>>, b: &mut [f64]) -> Option<Vec<f64>> {
    let n = b.len();
    for j in 0..n {
        let mut d = m[j][j];
        for k in 0..j {
            d -= m[j][k] * m[j][k];
        }
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        m[j][j] = djj;
        for i in (j + 1)..n {
            let mut s = m[i][j];
            for k in 0..j {
                s -= m[i][k] * m[j][k];
            }
            m[i][j] = s / djj;
        }
    }
    for i in 0..n {
        for k in 0..i {
            b[i] -= m[i][k] * b[k];
        }
        b[i] /= m[i][i];
    }
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            x[i] -= m[k][i] * x[k];
        }
        x[i] /= m[i][i];
    }
    Some(x)
}

fn levenberg_polish(obj: &Objective, mut f: Array1<C64>, tol: f64, iters: usize) -> (Array1<C64>, f64) {
    let d = obj.d;
    let np = 2 * d;
    let mut lambda = 1e-3;
    let mut cur = obj.value(&f) + {
        let nr = f.iter().map(|z| z.norm_sqr()).sum::<f64>() - 1.0;
        nr * nr
    };
    for _ in 0..iters {
        let (r, jac) = obj.residuals_and_jacobian(&f);
        let mut jtj = vec![vec![0.0; np]; np];
        let mut jtr = vec![0.0; np];
        for (row, &ri) in jac.iter().zip(r.iter()) {
            for i in 0..np {
                jtr[i] += row[i] * ri;
                for j in 0..=i {
                    jtj[i][j] += row[i] * row[j];
                }
            }
        }
        for i in 0..np {
            for j in (i + 1)..np {
                jtj[i][j] = jtj[j][i];
            }
        }
        let mut improved = false;
        for _try in 0..8 {
            let mut m = jtj.clone();
            for i in 0..np {
                m[i][i] += lambda * (jtj[i][i].max(1e-12));
            }
            let mut rhs: Vec<f64> = jtr.iter().map(|v| -v).collect();
            if let Some(step) = solve_spd(&mut m, &mut rhs) {
                let mut cand = f.clone();
                for i in 0..d {
                    cand[i] += C64::new(step[2 * i], step[2 * i + 1]);
                }
                let nr = cand.iter().map(|z| z.norm_sqr()).sum::<f64>() - 1.0;
                let val = obj.value(&cand) + nr * nr;
                if val < cur {
                    f = cand;
                    cur = val;
                    lambda = (lambda / 3.0).max(1e-12);
                    improved = true;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
        let mut fu = f.clone();
        normalize(&mut fu);
        let res = orbit_residual(&fu);
        if res <= tol {
            return (fu, res);
        }
    }
    normalize(&mut f);
    let res = orbit_residual(&f);
    (f, res)
}

fn gradient_descend(obj: &Objective, mut f: Array1<C64>, iters: usize) -> Array1<C64> {
    let mut step = 0.1;
    let mut cur = obj.value(&f);
    for _ in 0..iters {
        let g = obj.gradient(&f);
        let gnorm2: f64 = g.iter().map(|z| z.norm_sqr()).sum();
        if gnorm2 < 1e-28 {
            break;
        }
        let mut accepted = false;
        for _bt in 0..30 {
            let mut cand = &f - &g.mapv(|z| z * step);
            normalize(&mut cand);
            let val = obj.value(&cand);
            if val < cur {
                f = cand;
                cur = val;
                step *= 1.3;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    f
}

/// Search for a Weyl-Heisenberg SIC fiducial in dimension `d`: randomized
/// local minimization of the orbit deviations with up to `max_restarts`
/// restarts. Fails with the best residual seen when no restart reaches `tol`.
pub fn find_fiducial<R: Rng + ?Sized>(
    d: usize,
    rng: &mut R,
    tol: f64,
    max_restarts: usize,
) -> Result<Fiducial> {
    if d < 2 {
        return Err(Error::InvalidInput("fiducial search needs d >= 2".into()));
    }
    let obj = Objective::new(d);
    let mut best = f64::INFINITY;
    for _restart in 0..max_restarts.max(1) {
        let mut f0 = Array1::from_shape_fn(d, |_| sample_cn(1.0, rng));
        normalize(&mut f0);
        let f1 = gradient_descend(&obj, f0, 400);
        let (f2, res) = levenberg_polish(&obj, f1, tol, 120);
        if res <= tol {
            return Ok(Fiducial {
                d,
                vector: f2,
                source: FiducialSource::NumericSearch,
                residual: res,
            });
        }
        best = best.min(res);
    }
    Err(Error::SearchFailed {
        best_residual: best,
        tol,
    })
}

/// Build an M×N SIC-POVM sensing matrix (M = d, N ≤ d²) from the first N
/// orbit vectors in (a,b) lexicographic order.
pub fn sic_povm(fiducial: &Fiducial, n: usize) -> Result<SensingMatrix> {
    let d = fiducial.d;
    if n == 0 || n > d * d {
        return Err(Error::InvalidInput(format!(
            "sic_povm needs 1 <= N <= d², got N={n}, d={d}"
        )));
    }
    let mut data = Array2::<C64>::zeros((d, n));
    for idx in 0..n {
        let (a, b) = (idx / d, idx % d);
        let col = displaced(&fiducial.vector, a, b);
        for i in 0..d {
            data[[i, idx]] = col[i];
        }
    }
    SensingMatrix::new(data, MatrixKind::SicPovm)
}

/// Select SIC vectors whose cyclic-shift indices are spaced more than `delta`
/// apart, so that no selected vector is a within-`delta` cyclic shift of
/// another. Gives `d·⌊d/(Δ+1)⌋` codes, ordered by (shift, phase) index.
pub fn sic_codes_for_offsets(fiducial: &Fiducial, delta: usize) -> Result<Vec<Array1<C64>>> {
    let d = fiducial.d;
    if delta + 1 > d {
        return Err(Error::InvalidInput(format!(
            "need Δ+1 <= d, got Δ={delta}, d={d}"
        )));
    }
    let per_shift = d / (delta + 1);
    let mut codes = Vec::with_capacity(d * per_shift);
    for s in 0..per_shift {
        let a = s * (delta + 1);
        for b in 0..d {
            codes.push(displaced(&fiducial.vector, a, b));
        }
    }
    Ok(codes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::inner;
    use crate::seeding::single_rng;

    /// Exhaustive pairwise oracle over the actual constructed columns.
    fn max_pairwise_sq_deviation(m: &SensingMatrix, d: usize) -> f64 {
        let target = 1.0 / (d as f64 + 1.0);
        let n = m.n();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                let ip = inner(&m.data().column(i), &m.data().column(j));
                worst = worst.max((ip.norm_sqr() - target).abs());
            }
        }
        worst
    }

    #[test]
    fn search_finds_d2_fiducial() {
        let mut rng = single_rng(101);
        let f = find_fiducial(2, &mut rng, 1e-10, 20).unwrap();
        assert!(f.residual <= 1e-10);
        let m = sic_povm(&f, 4).unwrap();
        assert!(max_pairwise_sq_deviation(&m, 2) <= 1e-9);
    }

    #[test]
    fn search_finds_d3_fiducial() {
        let mut rng = single_rng(102);
        let f = find_fiducial(3, &mut rng, 1e-10, 30).unwrap();
        let m = sic_povm(&f, 9).unwrap();
        assert!(max_pairwise_sq_deviation(&m, 3) <= 1e-9);
    }

    #[test]
    fn bundled_d7_orbit_is_equiangular() {
        let f = Fiducial::bundled(7).unwrap();
        let m = sic_povm(&f, 49).unwrap();
        assert!(max_pairwise_sq_deviation(&m, 7) <= 1e-9);
    }

    #[test]
    fn zero_displacement_returns_fiducial() {
        let f = Fiducial::bundled(5).unwrap();
        let m = sic_povm(&f, 25).unwrap();
        for i in 0..5 {
            assert!((m.data()[[i, 0]] - f.vector[i]).norm() < 1e-15);
        }
    }

    #[test]
    fn d4_coherence_matches_equiangular_value() {
        let f = Fiducial::bundled(4).unwrap();
        let m = sic_povm(&f, 16).unwrap();
        assert!((m.coherence() - 1.0 / 5f64.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn columns_are_unit_norm_for_every_bundled_dim() {
        for d in 2..=9 {
            let f = Fiducial::bundled(d).unwrap();
            let m = sic_povm(&f, d * d).unwrap();
            for j in 0..m.n() {
                let nrm: f64 = m.data().column(j).iter().map(|z| z.norm_sqr()).sum();
                assert!((nrm - 1.0).abs() < 1e-10, "d={d} col {j}");
            }
        }
    }

    #[test]
    fn full_orbit_resolves_identity() {
        // Σ a_i a_i* = d·I for the complete SIC set
        let d = 6;
        let f = Fiducial::bundled(d).unwrap();
        let m = sic_povm(&f, d * d).unwrap();
        let mut acc = Array2::<C64>::zeros((d, d));
        for j in 0..d * d {
            let col = m.data().column(j);
            for p in 0..d {
                for q in 0..d {
                    acc[[p, q]] += col[p] * col[q].conj();
                }
            }
        }
        for p in 0..d {
            for q in 0..d {
                let want = if p == q { d as f64 } else { 0.0 };
                assert!((acc[[p, q]] - C64::new(want, 0.0)).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn offset_code_selection_counts() {
        let f = Fiducial::bundled(9).unwrap();
        assert_eq!(sic_codes_for_offsets(&f, 2).unwrap().len(), 27);
        assert_eq!(sic_codes_for_offsets(&f, 0).unwrap().len(), 81);
        assert!(sic_codes_for_offsets(&f, 9).is_err());
    }

    #[test]
    fn rejects_oversized_n() {
        let f = Fiducial::bundled(3).unwrap();
        assert!(sic_povm(&f, 10).is_err());
    }

    #[test]
    fn import_validation_rejects_non_fiducial() {
        let v = Array1::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        assert!(matches!(
            Fiducial::from_vector(v, FiducialSource::FileImport, 1e-6),
            Err(Error::SearchFailed { .. })
        ));
    }
}
