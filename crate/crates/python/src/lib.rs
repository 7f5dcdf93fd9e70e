//! Python bindings: sensing-matrix constructions, coherence, OMP recovery
//! and single CUSUM detection runs.

use std::sync::Arc;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use sparsecd::detectors::{Detector, DetectorBank, Stop};
use sparsecd::harness::run_trial;
use sparsecd::matrices::{self, MatrixKind};
use sparsecd::model::{ChangePoint, Scenario, VarianceBounds, NEVER};
use sparsecd::recovery;
use sparsecd::seeding::single_rng;
use sparsecd::statistics::SignalVariance;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A sensing matrix with unit-norm columns and cached mutual coherence.
#[pyclass(name = "SensingMatrix", frozen)]
struct PySensingMatrix {
    inner: Arc<matrices::SensingMatrix>,
}

#[pymethods]
impl PySensingMatrix {
    /// SIC-POVM matrix of dimension `dim` with `cols <= dim**2` columns
    /// (bundled fiducials cover dim 2..=9 and 31).
    #[staticmethod]
    fn sic_povm(dim: usize, cols: usize) -> PyResult<Self> {
        let f = matrices::Fiducial::bundled(dim).map_err(err)?;
        let m = matrices::sic_povm(&f, cols).map_err(err)?;
        Ok(Self { inner: Arc::new(m) })
    }

    /// MUB matrix for an odd prime `dim`, columns spread over the bases.
    #[staticmethod]
    fn mub(dim: usize, cols: usize) -> PyResult<Self> {
        let bases = matrices::mub(dim).map_err(err)?;
        let m = matrices::mub_select_columns(&bases, cols).map_err(err)?;
        Ok(Self { inner: Arc::new(m) })
    }

    /// Approximate-MUB matrix for any `dim >= 2`.
    #[staticmethod]
    fn amub(dim: usize, cols: usize) -> PyResult<Self> {
        let set = matrices::amub(dim).map_err(err)?;
        let m = matrices::amub_select_columns(&set, cols).map_err(err)?;
        Ok(Self { inner: Arc::new(m) })
    }

    /// Zero-padded offset augmentation of a Gold code family.
    #[staticmethod]
    fn gold_augmented(degree: usize, delta: usize, users: usize) -> PyResult<Self> {
        let fam = matrices::gold_family(degree, None).map_err(err)?;
        let codes = fam.codes_for_offsets(delta).map_err(err)?;
        if users == 0 || users > codes.len() {
            return Err(err(format!(
                "capacity {} users for degree {degree}, Δ={delta}",
                codes.len()
            )));
        }
        let m = matrices::augment_with_offsets(&codes[..users], delta, MatrixKind::GoldAugmented)
            .map_err(err)?;
        Ok(Self { inner: Arc::new(m) })
    }

    /// Random matrix with i.i.d. complex Gaussian, ±1, or DFT-row structure.
    #[staticmethod]
    fn random(kind: &str, m: usize, n: usize, seed: u64) -> PyResult<Self> {
        let kind: MatrixKind = kind.parse().map_err(err)?;
        let mut rng = single_rng(seed);
        let mat = matrices::random_matrix(kind, m, n, &mut rng).map_err(err)?;
        Ok(Self { inner: Arc::new(mat) })
    }

    /// M×M unitary DFT.
    #[staticmethod]
    fn dft_unitary(m: usize) -> Self {
        Self {
            inner: Arc::new(matrices::SensingMatrix::dft_unitary(m)),
        }
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn kind(&self) -> String {
        self.inner.kind().to_string()
    }

    #[getter]
    fn coherence(&self) -> f64 {
        self.inner.coherence()
    }

    fn column(&self, j: usize) -> PyResult<Vec<Complex64>> {
        if j >= self.inner.n() {
            return Err(err(format!("column {j} out of range")));
        }
        Ok(self.inner.column(j).to_vec())
    }

    fn to_list(&self) -> Vec<Vec<Complex64>> {
        let d = self.inner.data();
        (0..self.inner.m())
            .map(|i| (0..self.inner.n()).map(|j| d[[i, j]]).collect())
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "SensingMatrix({}x{}, kind={}, coherence={:.6})",
            self.inner.m(),
            self.inner.n(),
            self.inner.kind(),
            self.inner.coherence()
        )
    }
}

/// One detection run: stopping time (None if censored at the horizon) and
/// the detector's support estimate at firing.
#[pyclass(name = "DetectionResult", frozen)]
struct PyDetectionResult {
    #[pyo3(get)]
    stopping_time: Option<u64>,
    #[pyo3(get)]
    support_estimate: Option<Vec<usize>>,
}

#[pymethods]
impl PyDetectionResult {
    fn __repr__(&self) -> String {
        format!(
            "DetectionResult(stopping_time={:?}, support_estimate={:?})",
            self.stopping_time, self.support_estimate
        )
    }
}

/// Common signal variance achieving `snr_db` under
/// `SNR = 10 log10(K σ_x² / (M σ_n²))`.
#[pyfunction]
fn snr_to_sigma_x(snr_db: f64, m: usize, k: usize, sigma_n_sq: f64) -> f64 {
    sparsecd::model::snr_to_sigma_x(snr_db, m, k, sigma_n_sq)
}

/// Orthogonal matching pursuit: returns (selected indices, residual norm).
#[pyfunction]
fn omp(matrix: &PySensingMatrix, y: Vec<Complex64>, k: usize) -> PyResult<(Vec<usize>, f64)> {
    if y.len() != matrix.inner.m() {
        return Err(err(format!(
            "observation has length {}, matrix has {} rows",
            y.len(),
            matrix.inner.m()
        )));
    }
    let y = Array1::from_vec(y);
    let est = recovery::omp(&matrix.inner, &y.view(), k).map_err(err)?;
    Ok((est.indices, est.residual_norm))
}

/// Mutual coherence of an explicit matrix given as rows of complex entries.
#[pyfunction]
fn coherence(rows: Vec<Vec<Complex64>>) -> PyResult<f64> {
    if rows.is_empty() {
        return Err(err("empty matrix"));
    }
    let m = rows.len();
    let n = rows[0].len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(err("ragged rows"));
    }
    let a = Array2::from_shape_fn((m, n), |(i, j)| rows[i][j]);
    matrices::coherence_of(&a.view()).map_err(err)
}

/// Run one CUSUM detection on simulated observations.
///
/// `detector` is one of "ideal", "aggregate", "energy", "correlator";
/// `change_point` None means no change (run-length measurement). Unknown
/// variance detectors can be requested by passing `sigma_bounds`.
#[pyfunction]
#[pyo3(signature = (matrix, support, sigma_x_sq, sigma_n_sq, detector, threshold, seed,
                    change_point=None, horizon=100_000, sigma_bounds=None))]
#[allow(clippy::too_many_arguments)]
fn run_detection(
    matrix: &PySensingMatrix,
    support: Vec<usize>,
    sigma_x_sq: f64,
    sigma_n_sq: f64,
    detector: &str,
    threshold: f64,
    seed: u64,
    change_point: Option<u64>,
    horizon: u64,
    sigma_bounds: Option<(f64, f64)>,
) -> PyResult<PyDetectionResult> {
    let a = &matrix.inner;
    let k = support.len();
    let cp = match change_point {
        Some(nu) => ChangePoint::At(nu),
        None => NEVER,
    };
    let scenario =
        Scenario::uniform(a.m(), a.n(), support, sigma_x_sq, sigma_n_sq, cp).map_err(err)?;
    let sv = match sigma_bounds {
        Some((lo, hi)) => {
            SignalVariance::Bounded(VarianceBounds::new(lo, hi).map_err(err)?)
        }
        None => SignalVariance::Known(sigma_x_sq),
    };
    let bank = match detector {
        "ideal" => DetectorBank::ideal(
            a,
            &scenario.support,
            &scenario.signal_variances,
            sigma_n_sq,
            threshold,
        ),
        "aggregate" => DetectorBank::aggregate(a, k, sv, sigma_n_sq, threshold),
        "energy" => DetectorBank::energy(a, k, sv, sigma_n_sq, threshold),
        "correlator" => DetectorBank::correlator(a, k, sv, sigma_n_sq, threshold),
        other => return Err(err(format!("unknown detector '{other}'"))),
    }
    .map_err(err)?;
    let mut det = Detector::new(Arc::new(bank));
    let mut rng = single_rng(seed);
    let report = run_trial(&scenario, a, &mut det, horizon, &mut rng, false).map_err(err)?;
    Ok(PyDetectionResult {
        stopping_time: match report.stop {
            Stop::FiredAt(t) => Some(t),
            Stop::Censored { .. } => None,
        },
        support_estimate: report.support_estimate,
    })
}

#[pymodule]
fn sparsecd_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySensingMatrix>()?;
    m.add_class::<PyDetectionResult>()?;
    m.add_function(wrap_pyfunction!(snr_to_sigma_x, m)?)?;
    m.add_function(wrap_pyfunction!(omp, m)?)?;
    m.add_function(wrap_pyfunction!(coherence, m)?)?;
    m.add_function(wrap_pyfunction!(run_detection, m)?)?;
    Ok(())
}
