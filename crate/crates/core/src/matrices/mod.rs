//! Sensing matrix constructions and coherence computation.
//!
//! Deterministic designs (SIC-POVM, MUB, AMUB, Gold-code augmentations) live
//! in submodules; this module holds the [`SensingMatrix`] wrapper, the random
//! ensembles, the orthogonal-complement projection used to cancel known
//! active users, and matrix file I/O.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::OnceLock;

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{adjoint, thin_qr, C64};
use crate::model::sample_cn;

pub mod gold;
pub mod mub;
pub mod sic;

mod fiducials;

pub use gold::{augment_with_offsets, gold_family, GoldFamily};
pub use mub::{amub, amub_select_columns, mub, mub_select_columns, AmubSet};
pub use sic::{find_fiducial, sic_codes_for_offsets, sic_povm, Fiducial, FiducialSource};

/// Construction provenance of a sensing matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    Unitary,
    SicPovm,
    Mub,
    Amub,
    DftRows,
    Gaussian,
    Bernoulli,
    GoldAugmented,
    Custom,
}

impl MatrixKind {
    pub fn tag(self) -> u8 {
        match self {
            MatrixKind::Unitary => 0,
            MatrixKind::SicPovm => 1,
            MatrixKind::Mub => 2,
            MatrixKind::Amub => 3,
            MatrixKind::DftRows => 4,
            MatrixKind::Gaussian => 5,
            MatrixKind::Bernoulli => 6,
            MatrixKind::GoldAugmented => 7,
            MatrixKind::Custom => 8,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        Ok(match tag {
            0 => MatrixKind::Unitary,
            1 => MatrixKind::SicPovm,
            2 => MatrixKind::Mub,
            3 => MatrixKind::Amub,
            4 => MatrixKind::DftRows,
            5 => MatrixKind::Gaussian,
            6 => MatrixKind::Bernoulli,
            7 => MatrixKind::GoldAugmented,
            8 => MatrixKind::Custom,
            _ => return Err(Error::Parse(format!("unknown matrix kind tag {tag}"))),
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MatrixKind::Unitary => "unitary",
            MatrixKind::SicPovm => "sic_povm",
            MatrixKind::Mub => "mub",
            MatrixKind::Amub => "amub",
            MatrixKind::DftRows => "dft_rows",
            MatrixKind::Gaussian => "gaussian",
            MatrixKind::Bernoulli => "bernoulli",
            MatrixKind::GoldAugmented => "gold_augmented",
            MatrixKind::Custom => "custom",
        }
    }
}

impl std::str::FromStr for MatrixKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "unitary" => MatrixKind::Unitary,
            "sic_povm" => MatrixKind::SicPovm,
            "mub" => MatrixKind::Mub,
            "amub" => MatrixKind::Amub,
            "dft_rows" => MatrixKind::DftRows,
            "gaussian" => MatrixKind::Gaussian,
            "bernoulli" => MatrixKind::Bernoulli,
            "gold_augmented" => MatrixKind::GoldAugmented,
            "custom" => MatrixKind::Custom,
            _ => return Err(Error::Parse(format!("unknown matrix kind '{s}'"))),
        })
    }
}

impl std::fmt::Display for MatrixKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An M×N sensing matrix with unit-norm columns and a cached mutual
/// coherence. Immutable after construction; cheap to share across trials.
#[derive(Debug)]
pub struct SensingMatrix {
    data: Array2<C64>,
    kind: MatrixKind,
    coherence: OnceLock<f64>,
}

const UNIT_NORM_TOL: f64 = 1e-10;

impl SensingMatrix {
    /// Wrap a matrix, checking that every column has unit norm (to 1e-10).
    pub fn new(data: Array2<C64>, kind: MatrixKind) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::InvalidInput("empty sensing matrix".into()));
        }
        for j in 0..data.ncols() {
            let nrm = data.column(j).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if (nrm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::InvalidInput(format!(
                    "column {j} has norm {nrm}, expected 1"
                )));
            }
        }
        Ok(Self {
            data,
            kind,
            coherence: OnceLock::new(),
        })
    }

    pub fn custom(data: Array2<C64>) -> Result<Self> {
        Self::new(data, MatrixKind::Custom)
    }

    pub(crate) fn with_known_coherence(
        data: Array2<C64>,
        kind: MatrixKind,
        coherence: f64,
    ) -> Result<Self> {
        let s = Self::new(data, kind)?;
        let _ = s.coherence.set(coherence);
        Ok(s)
    }

    /// M×M identity, the simplest unitary sensing matrix.
    pub fn identity(m: usize) -> Self {
        let data = Array2::from_shape_fn((m, m), |(i, j)| {
            C64::new(if i == j { 1.0 } else { 0.0 }, 0.0)
        });
        Self {
            data,
            kind: MatrixKind::Unitary,
            coherence: OnceLock::from(0.0),
        }
    }

    /// M×M unitary DFT.
    pub fn dft_unitary(m: usize) -> Self {
        let scale = 1.0 / (m as f64).sqrt();
        let data = Array2::from_shape_fn((m, m), |(i, j)| {
            let ang = -2.0 * std::f64::consts::PI * (i as f64) * (j as f64) / (m as f64);
            C64::from_polar(scale, ang)
        });
        Self {
            data,
            kind: MatrixKind::Unitary,
            coherence: OnceLock::from(0.0),
        }
    }

    pub fn m(&self) -> usize {
        self.data.nrows()
    }

    pub fn n(&self) -> usize {
        self.data.ncols()
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn data(&self) -> &Array2<C64> {
        &self.data
    }

    pub fn column(&self, j: usize) -> Array1<C64> {
        self.data.column(j).to_owned()
    }

    /// Submatrix of the columns in `support`.
    pub fn columns(&self, support: &[usize]) -> Array2<C64> {
        let m = self.m();
        Array2::from_shape_fn((m, support.len()), |(i, j)| self.data[[i, support[j]]])
    }

    /// Mutual coherence, computed on first access and cached. A single-column
    /// matrix reports 0.
    pub fn coherence(&self) -> f64 {
        *self.coherence.get_or_init(|| {
            if self.n() < 2 {
                0.0
            } else {
                coherence_of(&self.data.view()).expect("n >= 2")
            }
        })
    }

    /// Check whether `A A* = c I` for some scalar c (within `tol` entrywise),
    /// returning c. This is what permits the row-orthonormal rescaling
    /// required by the projection statistic.
    pub fn row_gram_scale(&self, tol: f64) -> Result<f64> {
        let m = self.m();
        let gram = self.data.dot(&adjoint(&self.data.view()));
        let c = gram.diag().iter().map(|z| z.re).sum::<f64>() / m as f64;
        for i in 0..m {
            for j in 0..m {
                let want = if i == j { C64::new(c, 0.0) } else { C64::new(0.0, 0.0) };
                if (gram[[i, j]] - want).norm() > tol * c.max(1.0) {
                    return Err(Error::NumericRank(format!(
                        "rows are not orthogonal: AA* deviates from {c:.4}·I at ({i},{j})"
                    )));
                }
            }
        }
        Ok(c)
    }
}

/// Mutual coherence of a matrix with at least two columns:
/// `max_{k≠ℓ} |⟨a_k, a_ℓ⟩| / (‖a_k‖ ‖a_ℓ‖)`.
pub fn coherence_of(a: &ArrayView2<C64>) -> Result<f64> {
    let n = a.ncols();
    if n < 2 {
        return Err(Error::InvalidInput(
            "coherence needs at least two columns".into(),
        ));
    }
    // Work on the adjoint so each column is a contiguous row slice.
    let at = adjoint(a);
    let rows: Vec<&[C64]> = (0..n)
        .map(|k| at.row(k).to_slice().expect("adjoint is standard layout"))
        .collect();
    let norms: Vec<f64> = rows
        .iter()
        .map(|r| r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .collect();
    let best = (0..n - 1)
        .into_par_iter()
        .map(|k| {
            let rk = rows[k];
            let mut local = 0.0f64;
            for l in (k + 1)..n {
                let rl = rows[l];
                let mut acc = C64::new(0.0, 0.0);
                for (x, y) in rk.iter().zip(rl.iter()) {
                    acc += x.conj() * y;
                }
                let v = acc.norm() / (norms[k] * norms[l]);
                if v > local {
                    local = v;
                }
            }
            local
        })
        .reduce(|| 0.0, f64::max);
    Ok(best)
}

/// Random sensing matrices: i.i.d. complex Gaussian, i.i.d. ±1 Bernoulli, or
/// M rows drawn without replacement from the N-point DFT. Columns are
/// normalized to unit norm.
pub fn random_matrix<R: Rng + ?Sized>(
    kind: MatrixKind,
    m: usize,
    n: usize,
    rng: &mut R,
) -> Result<SensingMatrix> {
    match kind {
        MatrixKind::Gaussian => {
            let mut data = Array2::from_shape_fn((m, n), |_| sample_cn(1.0, rng));
            normalize_columns(&mut data);
            SensingMatrix::new(data, MatrixKind::Gaussian)
        }
        MatrixKind::Bernoulli => {
            let scale = 1.0 / (m as f64).sqrt();
            let data = Array2::from_shape_fn((m, n), |_| {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                C64::new(sign * scale, 0.0)
            });
            SensingMatrix::new(data, MatrixKind::Bernoulli)
        }
        MatrixKind::DftRows => {
            if m > n {
                return Err(Error::InvalidInput(format!(
                    "dft_rows needs M <= N, got {m}x{n}"
                )));
            }
            let mut chosen = rand::seq::index::sample(rng, n, m).into_vec();
            chosen.sort_unstable();
            let scale = 1.0 / (m as f64).sqrt();
            let data = Array2::from_shape_fn((m, n), |(i, j)| {
                let row = chosen[i] as f64;
                let ang = -2.0 * std::f64::consts::PI * row * (j as f64) / (n as f64);
                C64::from_polar(scale, ang)
            });
            SensingMatrix::new(data, MatrixKind::DftRows)
        }
        other => Err(Error::InvalidInput(format!(
            "random_matrix does not build '{other}' matrices"
        ))),
    }
}

pub(crate) fn normalize_columns(data: &mut Array2<C64>) {
    for j in 0..data.ncols() {
        let nrm = data.column(j).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if nrm > 0.0 {
            data.column_mut(j).mapv_inplace(|z| z / nrm);
        }
    }
}

/// Projection onto the orthogonal complement of the column span of `b_q`:
/// `P = I − B_Q (B_Q* B_Q)⁻¹ B_Q*`. An empty `b_q` gives the identity.
pub fn orthogonal_complement_projection(b_q: &ArrayView2<C64>) -> Result<Array2<C64>> {
    let m = b_q.nrows();
    let eye = Array2::from_shape_fn((m, m), |(i, j)| {
        C64::new(if i == j { 1.0 } else { 0.0 }, 0.0)
    });
    if b_q.ncols() == 0 {
        return Ok(eye);
    }
    let (q, _r) = thin_qr(b_q)?;
    let p = q.dot(&adjoint(&q.view()));
    Ok(eye - p)
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

const BINARY_MAGIC: &[u8; 8] = b"SPCDMTX1";
const TEXT_MAGIC: &str = "sparsecd-matrix";

impl SensingMatrix {
    /// Dense binary format: magic, M (u32 LE), N (u32 LE), kind tag (u8),
    /// then row-major `re im` f64 LE pairs.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&(self.m() as u32).to_le_bytes())?;
        w.write_all(&(self.n() as u32).to_le_bytes())?;
        w.write_all(&[self.kind.tag()])?;
        for i in 0..self.m() {
            for j in 0..self.n() {
                let z = self.data[[i, j]];
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::Parse("bad matrix file magic".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let m = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b4)?;
        let n = u32::from_le_bytes(b4) as usize;
        let mut b1 = [0u8; 1];
        r.read_exact(&mut b1)?;
        let kind = MatrixKind::from_tag(b1[0])?;
        if m == 0 || n == 0 || m.saturating_mul(n) > (1 << 28) {
            return Err(Error::Parse(format!("implausible matrix size {m}x{n}")));
        }
        let mut data = Array2::<C64>::zeros((m, n));
        let mut b8 = [0u8; 8];
        for i in 0..m {
            for j in 0..n {
                r.read_exact(&mut b8)?;
                let re = f64::from_le_bytes(b8);
                r.read_exact(&mut b8)?;
                let im = f64::from_le_bytes(b8);
                data[[i, j]] = C64::new(re, im);
            }
        }
        SensingMatrix::new(data, kind)
    }

    /// Lossless text format for small matrices: a header line
    /// `sparsecd-matrix M N kind`, then M lines of `re im` pairs.
    pub fn write_text(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "{} {} {} {}", TEXT_MAGIC, self.m(), self.n(), self.kind)?;
        for i in 0..self.m() {
            let mut line = String::new();
            for j in 0..self.n() {
                let z = self.data[[i, j]];
                if j > 0 {
                    line.push(' ');
                }
                line.push_str(&format!("{} {}", z.re, z.im));
            }
            writeln!(w, "{line}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_text(path: &Path) -> Result<Self> {
        let content = std::fs::read_to_string(path)?;
        let mut lines = content.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty matrix file".into()))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != TEXT_MAGIC {
            return Err(Error::Parse("bad matrix text header".into()));
        }
        let m: usize = parts[1]
            .parse()
            .map_err(|_| Error::Parse("bad M in header".into()))?;
        let n: usize = parts[2]
            .parse()
            .map_err(|_| Error::Parse("bad N in header".into()))?;
        let kind: MatrixKind = parts[3].parse()?;
        let mut data = Array2::<C64>::zeros((m, n));
        for i in 0..m {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("missing row {i}")))?;
            let nums: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("row {i}: {e}")))?;
            if nums.len() != 2 * n {
                return Err(Error::Parse(format!(
                    "row {i} has {} numbers, expected {}",
                    nums.len(),
                    2 * n
                )));
            }
            for j in 0..n {
                data[[i, j]] = C64::new(nums[2 * j], nums[2 * j + 1]);
            }
        }
        SensingMatrix::new(data, kind)
    }
}

/// Read a fiducial vector file: one `re im` pair per line; blank lines and
/// `#` comments ignored.
pub fn read_fiducial_file(path: &Path) -> Result<Array1<C64>> {
    let content = std::fs::read_to_string(path)?;
    let mut entries = Vec::new();
    for (ln, line) in content.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let re: f64 = it
            .next()
            .ok_or_else(|| Error::Parse(format!("line {}: missing re", ln + 1)))?
            .parse()
            .map_err(|e| Error::Parse(format!("line {}: {e}", ln + 1)))?;
        let im: f64 = it
            .next()
            .ok_or_else(|| Error::Parse(format!("line {}: missing im", ln + 1)))?
            .parse()
            .map_err(|e| Error::Parse(format!("line {}: {e}", ln + 1)))?;
        entries.push(C64::new(re, im));
    }
    if entries.is_empty() {
        return Err(Error::Parse("fiducial file holds no entries".into()));
    }
    Ok(Array1::from_vec(entries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::single_rng;

    #[test]
    fn coherence_of_orthonormal_columns_is_zero() {
        let a = SensingMatrix::dft_unitary(6);
        assert!(coherence_of(&a.data().view()).unwrap() < 1e-12);
    }

    #[test]
    fn coherence_rejects_single_column() {
        let a = Array2::from_shape_fn((3, 1), |_| C64::new(1.0, 0.0) / 3f64.sqrt());
        assert!(coherence_of(&a.view()).is_err());
    }

    #[test]
    fn bernoulli_columns_exactly_unit() {
        let mut rng = single_rng(5);
        let a = random_matrix(MatrixKind::Bernoulli, 16, 40, &mut rng).unwrap();
        for j in 0..40 {
            let nrm: f64 = a.data().column(j).iter().map(|z| z.norm_sqr()).sum();
            assert!((nrm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn full_dft_rows_is_unitary() {
        let mut rng = single_rng(6);
        let a = random_matrix(MatrixKind::DftRows, 8, 8, &mut rng).unwrap();
        assert!(a.coherence() < 1e-10);
    }

    #[test]
    fn gaussian_beats_no_deterministic_bound() {
        // at 124x200 random Gaussian coherence clearly exceeds 1/sqrt(125)
        let mut rng = single_rng(7);
        for _ in 0..3 {
            let a = random_matrix(MatrixKind::Gaussian, 124, 200, &mut rng).unwrap();
            assert!(a.coherence() > 1.0 / 125f64.sqrt());
        }
    }

    #[test]
    fn projection_of_empty_set_is_identity() {
        let b = Array2::<C64>::zeros((4, 0));
        let p = orthogonal_complement_projection(&b.view()).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((p[[i, j]] - C64::new(want, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn projection_annihilates_its_columns() {
        let mut rng = single_rng(8);
        let b = Array2::from_shape_fn((6, 2), |_| sample_cn(1.0, &mut rng));
        let p = orthogonal_complement_projection(&b.view()).unwrap();
        let pb = p.dot(&b);
        let frob: f64 = pb.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(frob <= 1e-9);
        // idempotent and Hermitian
        let p2 = p.dot(&p);
        let dev: f64 = (&p2 - &p).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(dev <= 1e-9);
        for i in 0..6 {
            for j in 0..6 {
                assert!((p[[i, j]] - p[[j, i]].conj()).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn projection_zeroes_basis_coordinate() {
        let mut b = Array2::<C64>::zeros((4, 1));
        b[[0, 0]] = C64::new(1.0, 0.0);
        let p = orthogonal_complement_projection(&b.view()).unwrap();
        for j in 0..4 {
            assert!(p[[0, j]].norm() < 1e-12);
            assert!(p[[j, 0]].norm() < 1e-12);
        }
    }

    #[test]
    fn projection_rejects_rank_deficient() {
        let mut b = Array2::<C64>::zeros((4, 2));
        b[[1, 0]] = C64::new(1.0, 0.0);
        b[[1, 1]] = C64::new(0.0, -2.0);
        assert!(matches!(
            orthogonal_complement_projection(&b.view()),
            Err(Error::NumericRank(_))
        ));
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let mut rng = single_rng(11);
        let a = random_matrix(MatrixKind::Gaussian, 5, 9, &mut rng).unwrap();
        let dir = std::env::temp_dir().join("sparsecd_test_bin");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("mat.bin");
        a.write_binary(&path).unwrap();
        let b = SensingMatrix::read_binary(&path).unwrap();
        assert_eq!(b.kind(), MatrixKind::Gaussian);
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn text_round_trip_is_exact() {
        let mut rng = single_rng(12);
        let a = random_matrix(MatrixKind::DftRows, 4, 7, &mut rng).unwrap();
        let dir = std::env::temp_dir().join("sparsecd_test_txt");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("mat.txt");
        a.write_text(&path).unwrap();
        let b = SensingMatrix::read_text(&path).unwrap();
        assert_eq!(b.kind(), MatrixKind::DftRows);
        assert_eq!(a.data(), b.data());
    }
}
