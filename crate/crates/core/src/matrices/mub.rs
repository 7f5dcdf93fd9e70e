//! Mutually unbiased bases (exact, odd prime dimension) and approximately
//! mutually unbiased bases (any dimension ≥ 2), plus the column-spreading
//! rule that turns a basis set into an M×N sensing matrix.

use ndarray::Array2;

use super::{MatrixKind, SensingMatrix};
use crate::error::{Error, Result};
use crate::linalg::{thin_qr, C64};

fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    let mut k = 2;
    while k * k <= n {
        if n % k == 0 {
            return false;
        }
        k += 1;
    }
    true
}

fn identity_basis(d: usize) -> Array2<C64> {
    Array2::from_shape_fn((d, d), |(i, j)| {
        C64::new(if i == j { 1.0 } else { 0.0 }, 0.0)
    })
}

/// The d+1 mutually unbiased bases of an odd prime dimension: the standard
/// basis plus d quadratic-phase bases with entries `ω_d^{a·l² + b·l}/√d`
/// (basis index a, column b, row l). Cross-basis inner products all have
/// magnitude 1/√d.
pub fn mub(d: usize) -> Result<Vec<Array2<C64>>> {
    if !is_prime(d) || d % 2 == 0 {
        return Err(Error::Unsupported(format!(
            "MUB construction implemented for odd prime dimensions; got d={d} \
             (prime powers need Galois-field arithmetic and are not built in)"
        )));
    }
    let mut bases = Vec::with_capacity(d + 1);
    bases.push(identity_basis(d));
    let omega: Vec<C64> = (0..d)
        .map(|k| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / d as f64))
        .collect();
    let scale = 1.0 / (d as f64).sqrt();
    for a in 0..d {
        let basis = Array2::from_shape_fn((d, d), |(l, b)| {
            let exp = (a * l * l + b * l) % d;
            omega[exp] * scale
        });
        bases.push(basis);
    }
    Ok(bases)
}

/// A family of d+1 orthonormal bases that is only approximately unbiased,
/// for dimensions where the exact MUB construction is unavailable.
#[derive(Debug, Clone)]
pub struct AmubSet {
    pub bases: Vec<Array2<C64>>,
    /// Measured max |⟨·,·⟩| over all cross-basis column pairs.
    pub max_cross_coherence: f64,
    /// The constant c in the verified bound max ≤ c/√d.
    pub c_factor: f64,
}

/// Approximately mutually unbiased bases for any d ≥ 2. Odd prime d falls
/// back to the exact construction. Otherwise the quadratic-phase bases of
/// the smallest odd prime p ≥ d are truncated to d rows/columns and
/// re-orthonormalized, which keeps cross-basis inner products near 1/√p.
/// The measured cross-basis coherence is always recorded.
pub fn amub(d: usize) -> Result<AmubSet> {
    if d < 2 {
        return Err(Error::InvalidInput("amub needs d >= 2".into()));
    }
    let bases = if is_prime(d) && d % 2 == 1 {
        mub(d)?
    } else {
        let mut p = if d % 2 == 0 { d + 1 } else { d };
        while !is_prime(p) || p % 2 == 0 {
            p += 1;
            if p > 4 * d + 16 {
                return Err(Error::Unsupported(format!(
                    "no odd prime found near d={d}"
                )));
            }
        }
        let omega: Vec<C64> = (0..p)
            .map(|k| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / p as f64))
            .collect();
        let mut bases = Vec::with_capacity(d + 1);
        bases.push(identity_basis(d));
        for a in 0..d {
            let raw = Array2::from_shape_fn((d, d), |(l, b)| {
                let exp = (a * l * l + b * l) % p;
                omega[exp]
            });
            let (q, _r) = thin_qr(&raw.view())?;
            bases.push(q);
        }
        bases
    };
    let max_cross = max_cross_basis_coherence(&bases);
    Ok(AmubSet {
        c_factor: max_cross * (d as f64).sqrt(),
        max_cross_coherence: max_cross,
        bases,
    })
}

pub(crate) fn max_cross_basis_coherence(bases: &[Array2<C64>]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..bases.len() {
        for j in (i + 1)..bases.len() {
            let g = crate::linalg::adjoint(&bases[i].view()).dot(&bases[j]);
            for v in g.iter() {
                worst = worst.max(v.norm());
            }
        }
    }
    worst
}

/// Spread N columns uniformly over a basis set: with `r = ⌊N/(d+1)⌋`, take r
/// columns from every basis, then one extra column from each of the first
/// `N − r(d+1)` bases.
pub fn mub_select_columns(bases: &[Array2<C64>], n: usize) -> Result<SensingMatrix> {
    mub_select_columns_tagged(bases, n, MatrixKind::Mub)
}

pub(crate) fn mub_select_columns_tagged(
    bases: &[Array2<C64>],
    n: usize,
    kind: MatrixKind,
) -> Result<SensingMatrix> {
    let nb = bases.len();
    if nb == 0 {
        return Err(Error::InvalidInput("no bases given".into()));
    }
    let d = bases[0].nrows();
    if n == 0 || n > d * nb {
        return Err(Error::InvalidInput(format!(
            "need 1 <= N <= d(d+1) = {}, got N={n}",
            d * nb
        )));
    }
    let r = n / nb;
    let extra = n - r * nb;
    let mut data = Array2::<C64>::zeros((d, n));
    let mut col = 0;
    for (bi, basis) in bases.iter().enumerate() {
        let take = r + usize::from(bi < extra);
        for c in 0..take {
            for i in 0..d {
                data[[i, col]] = basis[[i, c]];
            }
            col += 1;
        }
    }
    debug_assert_eq!(col, n);
    SensingMatrix::new(data, kind)
}

/// Columns of an AMUB set, tagged with the `amub` kind.
pub fn amub_select_columns(set: &AmubSet, n: usize) -> Result<SensingMatrix> {
    mub_select_columns_tagged(&set.bases, n, MatrixKind::Amub)
}

#[cfg(test)]
fn basis_is_orthonormal(b: &ndarray::ArrayView2<C64>, tol: f64) -> bool {
    let d = b.nrows();
    for i in 0..d {
        for j in i..d {
            let ip = crate::linalg::inner(&b.column(i), &b.column(j));
            let want = if i == j { 1.0 } else { 0.0 };
            if (ip - C64::new(want, 0.0)).norm() > tol {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::inner;

    #[test]
    fn mub_d3_exhaustive_cross_check() {
        let bases = mub(3).unwrap();
        assert_eq!(bases.len(), 4);
        let want = 1.0 / 3f64.sqrt();
        for i in 0..4 {
            assert!(basis_is_orthonormal(&bases[i].view(), 1e-12));
            for j in (i + 1)..4 {
                for c1 in 0..3 {
                    for c2 in 0..3 {
                        let ip = inner(&bases[i].column(c1), &bases[j].column(c2));
                        assert!(
                            (ip.norm() - want).abs() < 1e-10,
                            "bases {i},{j} cols {c1},{c2}: {}",
                            ip.norm()
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn mub_d5_exhaustive_cross_check() {
        let bases = mub(5).unwrap();
        assert_eq!(bases.len(), 6);
        let want = 1.0 / 5f64.sqrt();
        for i in 0..6 {
            for j in (i + 1)..6 {
                for c1 in 0..5 {
                    for c2 in 0..5 {
                        let ip = inner(&bases[i].column(c1), &bases[j].column(c2));
                        assert!((ip.norm() - want).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn mub_rejects_non_prime_and_even() {
        assert!(mub(6).is_err());
        assert!(mub(9).is_err()); // prime power, not built in
        assert!(mub(2).is_err());
    }

    #[test]
    fn column_spread_arithmetic() {
        // d=5, N=27: r=4, first 3 bases contribute 5 columns, the rest 4
        let bases = mub(5).unwrap();
        let m = mub_select_columns(&bases, 27).unwrap();
        assert_eq!(m.n(), 27);
        // first basis contributes columns 0..5 = identity columns 0..5
        for c in 0..5 {
            for i in 0..5 {
                let want = if i == c { 1.0 } else { 0.0 };
                assert!((m.data()[[i, c]] - C64::new(want, 0.0)).norm() < 1e-14);
            }
        }
        assert!((m.coherence() - 1.0 / 5f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn one_column_per_basis_when_n_small() {
        // N <= d spreads one column per basis, all pairs cross-basis
        let bases = mub(7).unwrap();
        let m = mub_select_columns(&bases, 8).unwrap();
        assert!((m.coherence() - 1.0 / 7f64.sqrt()).abs() < 1e-10);
        let m2 = mub_select_columns(&bases, 5).unwrap();
        assert!((m2.coherence() - 1.0 / 7f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn amub_bases_orthonormal_and_coherence_bounded() {
        let set = amub(6).unwrap();
        assert_eq!(set.bases.len(), 7);
        for b in &set.bases {
            assert!(basis_is_orthonormal(&b.view(), 1e-10));
        }
        assert!(
            set.max_cross_coherence < 2.5 / 6f64.sqrt(),
            "measured {}",
            set.max_cross_coherence
        );
    }

    #[test]
    fn amub_on_odd_prime_is_exact() {
        let set = amub(5).unwrap();
        assert!((set.max_cross_coherence - 1.0 / 5f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn amub_select_tags_kind() {
        let set = amub(8).unwrap();
        let m = amub_select_columns(&set, 13).unwrap();
        assert_eq!(m.kind(), MatrixKind::Amub);
        assert_eq!(m.m(), 8);
        assert_eq!(m.n(), 13);
    }
}
