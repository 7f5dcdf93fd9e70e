//! Sparse support recovery by orthogonal matching pursuit, used per step by
//! the projection detector and after detection by the energy/correlator
//! detectors, plus the recovery-percentage metric.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::{self, C64};
use crate::matrices::SensingMatrix;

/// Indices selected by a recovery algorithm and the final residual norm.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportEstimate {
    /// In order of selection.
    pub indices: Vec<usize>,
    pub residual_norm: f64,
}

/// Orthogonal matching pursuit: greedily select the column most correlated
/// with the residual, re-solve least squares on the selected set, repeat k
/// times. Ties break toward the lower index.
pub fn omp(a: &SensingMatrix, y: &ArrayView1<C64>, k: usize) -> Result<SupportEstimate> {
    let at = linalg::adjoint(&a.data().view());
    omp_with_adjoint(&a.data().view(), &at.view(), y, k)
}

/// OMP with a precomputed adjoint (the per-step hot path).
pub fn omp_with_adjoint(
    a: &ArrayView2<C64>,
    at: &ArrayView2<C64>,
    y: &ArrayView1<C64>,
    k: usize,
) -> Result<SupportEstimate> {
    let (m, n) = a.dim();
    if k == 0 || k > m {
        return Err(Error::InvalidInput(format!(
            "omp needs 1 <= k <= M, got k={k}, M={m}"
        )));
    }
    let mut residual = y.to_owned();
    let mut selected: Vec<usize> = Vec::with_capacity(k);
    let mut in_set = vec![false; n];
    let mut residual_norm = linalg::norm2(&residual.view());
    for _ in 0..k {
        let mut best = usize::MAX;
        let mut best_val = -1.0;
        for i in 0..n {
            if in_set[i] {
                continue;
            }
            let mut acc = C64::new(0.0, 0.0);
            for (x, r) in at.row(i).iter().zip(residual.iter()) {
                acc += x * r;
            }
            let v = acc.norm();
            if v > best_val {
                best_val = v;
                best = i;
            }
        }
        if best == usize::MAX {
            break;
        }
        selected.push(best);
        in_set[best] = true;
        let sub = Array2::from_shape_fn((m, selected.len()), |(i, j)| a[[i, selected[j]]]);
        let coef = linalg::least_squares(&sub.view(), y)?;
        let fit = sub.dot(&coef);
        residual = y - &fit;
        residual_norm = linalg::norm2(&residual.view());
    }
    Ok(SupportEstimate {
        indices: selected,
        residual_norm,
    })
}

/// Percentage of the true support recovered: `100·|estimate ∩ truth|/|truth|`.
pub fn support_recovery_pct(estimate: &[usize], truth: &[usize]) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::InvalidInput("empty true support".into()));
    }
    let hits = estimate.iter().filter(|i| truth.contains(i)).count();
    Ok(100.0 * hits as f64 / truth.len() as f64)
}

/// Least-squares coefficients on a fixed support (post-recovery refit).
pub fn refit(
    a: &SensingMatrix,
    y: &ArrayView1<C64>,
    support: &[usize],
) -> Result<Array1<C64>> {
    let sub = a.columns(support);
    linalg::least_squares(&sub.view(), y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrices::{mub, mub_select_columns, random_matrix, MatrixKind};
    use crate::model::sample_cn;
    use crate::seeding::single_rng;
    use ndarray::Array1;
    use proptest::prelude::*;

    #[test]
    fn single_atom_recovers_exactly() {
        let mut rng = single_rng(30);
        let a = random_matrix(MatrixKind::Gaussian, 8, 16, &mut rng).unwrap();
        let y = a.column(11);
        let est = omp(&a, &y.view(), 1).unwrap();
        assert_eq!(est.indices, vec![11]);
        assert!(est.residual_norm < 1e-12);
    }

    #[test]
    fn orthonormal_two_atoms_decouple() {
        let a = crate::matrices::SensingMatrix::dft_unitary(8);
        let y = &a.column(2) + &a.column(6);
        let est = omp(&a, &y.view(), 2).unwrap();
        let mut idx = est.indices.clone();
        idx.sort_unstable();
        assert_eq!(idx, vec![2, 6]);
        assert!(est.residual_norm <= 1e-9);
    }

    /// Exhaustive best-subset oracle: minimize the LS residual over all
    /// k-subsets.
    fn best_subset(a: &SensingMatrix, y: &ArrayView1<C64>, k: usize) -> Vec<usize> {
        let n = a.n();
        let mut best: (f64, Vec<usize>) = (f64::INFINITY, vec![]);
        let mut subset: Vec<usize> = (0..k).collect();
        loop {
            let sub = a.columns(&subset);
            if let Ok(coef) = linalg::least_squares(&sub.view(), y) {
                let fit = sub.dot(&coef);
                let res = linalg::norm2(&(y - &fit).view());
                if res < best.0 {
                    best = (res, subset.clone());
                }
            }
            // next combination in lexicographic order
            let mut i = k;
            loop {
                if i == 0 {
                    return best.1;
                }
                i -= 1;
                if subset[i] != i + n - k {
                    break;
                }
            }
            subset[i] += 1;
            for j in (i + 1)..k {
                subset[j] = subset[j - 1] + 1;
            }
        }
    }

    #[test]
    fn noiseless_recovery_matches_exhaustive_oracle() {
        // MUB d=11 with N=12 columns: alpha = 1/sqrt(11) < 1/(2K-1) for K=2
        let bases = mub(11).unwrap();
        let a = mub_select_columns(&bases, 12).unwrap();
        assert!(a.coherence() < 1.0 / 3.0);
        let mut rng = single_rng(31);
        for trial in 0..100 {
            let i = rng.random_range(0..12usize);
            let mut j = rng.random_range(0..12usize);
            while j == i {
                j = rng.random_range(0..12usize);
            }
            let xi = sample_cn(1.0, &mut rng);
            let xj = sample_cn(1.0, &mut rng);
            let y = &a.column(i).mapv(|v| v * xi) + &a.column(j).mapv(|v| v * xj);
            let est = omp(&a, &y.view(), 2).unwrap();
            let mut got = est.indices.clone();
            got.sort_unstable();
            let mut want = vec![i, j];
            want.sort_unstable();
            assert_eq!(got, want, "trial {trial}");
            let mut oracle = best_subset(&a, &y.view(), 2);
            oracle.sort_unstable();
            assert_eq!(got, oracle, "oracle disagrees on trial {trial}");
        }
    }

    #[test]
    fn residual_norm_is_nonincreasing() {
        let mut rng = single_rng(32);
        let a = random_matrix(MatrixKind::Gaussian, 10, 20, &mut rng).unwrap();
        let y = Array1::from_shape_fn(10, |_| sample_cn(1.0, &mut rng));
        let mut prev = f64::INFINITY;
        for k in 1..=6 {
            let est = omp(&a, &y.view(), k).unwrap();
            assert!(est.residual_norm <= prev + 1e-12);
            prev = est.residual_norm;
        }
    }

    #[test]
    fn recovery_pct_arithmetic() {
        assert_eq!(support_recovery_pct(&[1, 2, 3], &[1, 2, 3]).unwrap(), 100.0);
        assert_eq!(support_recovery_pct(&[7, 8], &[1, 2]).unwrap(), 0.0);
        assert_eq!(
            support_recovery_pct(&[1, 2, 9, 10, 3], &[1, 2, 3, 4, 5]).unwrap(),
            60.0
        );
        assert!(support_recovery_pct(&[1], &[]).is_err());
    }

    #[test]
    fn rejects_bad_k() {
        let a = crate::matrices::SensingMatrix::dft_unitary(4);
        let y = a.column(0);
        assert!(omp(&a, &y.view(), 0).is_err());
        assert!(omp(&a, &y.view(), 5).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn omp_is_permutation_equivariant(seed in 0u64..1_000, rot in 1usize..11) {
            let mut rng = single_rng(seed);
            let a = random_matrix(MatrixKind::Gaussian, 6, 12, &mut rng).unwrap();
            let y = Array1::from_shape_fn(6, |_| sample_cn(1.0, &mut rng));
            // rotate columns by `rot`
            let perm: Vec<usize> = (0..12).map(|j| (j + rot) % 12).collect();
            let data_p = ndarray::Array2::from_shape_fn((6, 12), |(i, j)| {
                a.data()[[i, perm[j]]]
            });
            let ap = crate::matrices::SensingMatrix::custom(data_p).unwrap();
            let e1 = omp(&a, &y.view(), 3).unwrap();
            let e2 = omp(&ap, &y.view(), 3).unwrap();
            let mapped: Vec<usize> = e2.indices.iter().map(|&j| perm[j]).collect();
            prop_assert_eq!(e1.indices, mapped);
        }
    }
}
