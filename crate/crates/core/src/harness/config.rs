//! Serializable experiment configuration: scenario templates, matrix
//! specifications and detector specifications, as read from TOML config
//! files by the CLI.

use std::path::PathBuf;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrices::{
    self, amub, amub_select_columns, augment_with_offsets, gold_family, mub, mub_select_columns,
    Fiducial, FiducialSource, MatrixKind, SensingMatrix,
};
use crate::model::{snr_to_sigma_x, ChangePoint, Scenario, VarianceBounds};
use crate::statistics::SignalVariance;

/// Support template: a fixed index set, or drawn fresh each trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SupportSpec {
    Tag(SupportTag),
    Fixed(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SupportTag {
    #[serde(rename = "random")]
    Random,
}

/// Signal-variance template. `CommonVariance`/`Snr` model a known common
/// variance; `Bounds` draws per-entry variances uniformly in
/// [σ²_min, σ²_max] each trial and detectors only get the bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SignalSpec {
    CommonVariance(f64),
    Snr { snr_db: f64 },
    Bounds { sigma_min_sq: f64, sigma_max_sq: f64 },
}

/// Scenario template, instantiated once per Monte Carlo trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub support: SupportSpec,
    pub signal: SignalSpec,
    pub noise_variance: f64,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > self.n || self.m == 0 || self.n < self.m {
            return Err(Error::Config(format!(
                "scenario needs N >= M >= 1 and 1 <= K <= N, got M={}, N={}, K={}",
                self.m, self.n, self.k
            )));
        }
        if let SupportSpec::Fixed(s) = &self.support {
            if s.len() != self.k {
                return Err(Error::Config(format!(
                    "fixed support has {} indices, K={}",
                    s.len(),
                    self.k
                )));
            }
        }
        if !(self.noise_variance > 0.0) {
            return Err(Error::Config("noise variance must be > 0".into()));
        }
        if let SignalSpec::Bounds {
            sigma_min_sq,
            sigma_max_sq,
        } = self.signal
        {
            VarianceBounds::new(sigma_min_sq, sigma_max_sq)?;
        }
        Ok(())
    }

    /// The common signal variance when it is known.
    pub fn known_sigma_x_sq(&self) -> Option<f64> {
        match self.signal {
            SignalSpec::CommonVariance(v) => Some(v),
            SignalSpec::Snr { snr_db } => {
                Some(snr_to_sigma_x(snr_db, self.m, self.k, self.noise_variance))
            }
            SignalSpec::Bounds { .. } => None,
        }
    }

    /// What detectors are allowed to know about the signal variance.
    pub fn variance_knowledge(&self) -> SignalVariance {
        match self.signal {
            SignalSpec::CommonVariance(v) => SignalVariance::Known(v),
            SignalSpec::Snr { snr_db } => SignalVariance::Known(snr_to_sigma_x(
                snr_db,
                self.m,
                self.k,
                self.noise_variance,
            )),
            SignalSpec::Bounds {
                sigma_min_sq,
                sigma_max_sq,
            } => SignalVariance::Bounded(VarianceBounds {
                sigma_min_sq,
                sigma_max_sq,
            }),
        }
    }

    /// Draw the concrete scenario for one trial.
    pub fn instantiate<R: Rng + ?Sized>(
        &self,
        change_point: ChangePoint,
        rng: &mut R,
    ) -> Result<Scenario> {
        let support = match &self.support {
            SupportSpec::Fixed(s) => s.clone(),
            SupportSpec::Tag(SupportTag::Random) => {
                let mut idx = rand::seq::index::sample(rng, self.n, self.k).into_vec();
                idx.sort_unstable();
                idx
            }
        };
        let variances = match self.signal {
            SignalSpec::CommonVariance(v) => vec![v; self.k],
            SignalSpec::Snr { snr_db } => {
                vec![snr_to_sigma_x(snr_db, self.m, self.k, self.noise_variance); self.k]
            }
            SignalSpec::Bounds {
                sigma_min_sq,
                sigma_max_sq,
            } => (0..self.k)
                .map(|_| sigma_min_sq + (sigma_max_sq - sigma_min_sq) * rng.random::<f64>())
                .collect(),
        };
        Scenario::new(
            self.m,
            self.n,
            support,
            variances,
            self.noise_variance,
            change_point,
        )
    }
}

/// How to build (or load) the sensing matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatrixSpec {
    /// M×M unitary DFT.
    Unitary { m: usize },
    /// M×M identity.
    Identity { m: usize },
    SicPovm {
        dim: usize,
        cols: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fiducial_file: Option<PathBuf>,
    },
    Mub { dim: usize, cols: usize },
    Amub { dim: usize, cols: usize },
    DftRows { m: usize, n: usize },
    Gaussian { m: usize, n: usize },
    Bernoulli { m: usize, n: usize },
    /// Zero-padded offset augmentation of Gold codes.
    GoldAugmented {
        degree: usize,
        delta: usize,
        users: usize,
    },
    /// Zero-padded offset augmentation of SIC-POVM codes.
    SicAugmented {
        dim: usize,
        delta: usize,
        users: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fiducial_file: Option<PathBuf>,
    },
    /// Load from a matrix file written by `matrix build` (binary or text).
    Import { path: PathBuf },
}

fn load_fiducial(dim: usize, file: &Option<PathBuf>) -> Result<Fiducial> {
    match file {
        Some(path) => {
            let v = matrices::read_fiducial_file(path)?;
            if v.len() != dim {
                return Err(Error::Config(format!(
                    "fiducial file holds dimension {}, expected {dim}",
                    v.len()
                )));
            }
            Fiducial::from_vector(v, FiducialSource::FileImport, 1e-5)
        }
        None => Fiducial::bundled(dim),
    }
}

impl MatrixSpec {
    /// Build the matrix. Random ensembles consume the rng; deterministic
    /// constructions ignore it.
    pub fn build<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SensingMatrix> {
        match self {
            MatrixSpec::Unitary { m } => Ok(SensingMatrix::dft_unitary(*m)),
            MatrixSpec::Identity { m } => Ok(SensingMatrix::identity(*m)),
            MatrixSpec::SicPovm {
                dim,
                cols,
                fiducial_file,
            } => {
                let f = load_fiducial(*dim, fiducial_file)?;
                matrices::sic_povm(&f, *cols)
            }
            MatrixSpec::Mub { dim, cols } => {
                let bases = mub(*dim)?;
                mub_select_columns(&bases, *cols)
            }
            MatrixSpec::Amub { dim, cols } => {
                let set = amub(*dim)?;
                amub_select_columns(&set, *cols)
            }
            MatrixSpec::DftRows { m, n } => {
                matrices::random_matrix(MatrixKind::DftRows, *m, *n, rng)
            }
            MatrixSpec::Gaussian { m, n } => {
                matrices::random_matrix(MatrixKind::Gaussian, *m, *n, rng)
            }
            MatrixSpec::Bernoulli { m, n } => {
                matrices::random_matrix(MatrixKind::Bernoulli, *m, *n, rng)
            }
            MatrixSpec::GoldAugmented {
                degree,
                delta,
                users,
            } => {
                let fam = gold_family(*degree, None)?;
                let codes = fam.codes_for_offsets(*delta)?;
                if *users > codes.len() {
                    return Err(Error::Capacity(format!(
                        "gold degree {degree} with Δ={delta} supports {} users, requested {users}",
                        codes.len()
                    )));
                }
                augment_with_offsets(&codes[..*users], *delta, MatrixKind::GoldAugmented)
            }
            MatrixSpec::SicAugmented {
                dim,
                delta,
                users,
                fiducial_file,
            } => {
                let capacity = dim * (dim / (delta + 1));
                if *users > capacity {
                    return Err(Error::Capacity(format!(
                        "SIC dim {dim} with Δ={delta} supports {capacity} users, requested {users}"
                    )));
                }
                let f = load_fiducial(*dim, fiducial_file)?;
                let codes = matrices::sic_codes_for_offsets(&f, *delta)?;
                augment_with_offsets(&codes[..*users], *delta, MatrixKind::SicPovm)
            }
            MatrixSpec::Import { path } => {
                if path.extension().and_then(|e| e.to_str()) == Some("txt") {
                    SensingMatrix::read_text(path)
                } else {
                    SensingMatrix::read_binary(path)
                }
            }
        }
    }
}

/// Detector variant plus its own parameters. `a`/`c` are the SGD step size
/// and probe width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum DetectorVariant {
    Ideal,
    Optimal {
        #[serde(default = "default_subset_cap")]
        subset_cap: usize,
    },
    Aggregate,
    Energy,
    Correlator,
    Pse {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        k_p: Option<usize>,
    },
    SgdAggregate { a: f64, c: f64 },
    SgdEnergy { a: f64, c: f64 },
    SgdCorrelator { a: f64, c: f64 },
}

fn default_subset_cap() -> usize {
    crate::detectors::DEFAULT_SUBSET_CAP
}

/// A detector entry in a config file: variant, threshold, and the optional
/// parallel-over-sparsity wrapper (`k_max` set means sparsity unknown).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    #[serde(flatten)]
    pub variant: DetectorVariant,
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
}

impl DetectorSpec {
    pub fn label(&self) -> String {
        let base = match self.variant {
            DetectorVariant::Ideal => "ideal",
            DetectorVariant::Optimal { .. } => "optimal",
            DetectorVariant::Aggregate => "aggregate",
            DetectorVariant::Energy => "energy",
            DetectorVariant::Correlator => "correlator",
            DetectorVariant::Pse { .. } => "pse",
            DetectorVariant::SgdAggregate { .. } => "sgd_aggregate",
            DetectorVariant::SgdEnergy { .. } => "sgd_energy",
            DetectorVariant::SgdCorrelator { .. } => "sgd_correlator",
        };
        match self.k_max {
            Some(k) => format!("{base}@kmax{k}"),
            None => base.to_string(),
        }
    }
}

/// Experiment-level knobs shared by all harness subcommands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentParams {
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    /// Change point for delay runs (the paper's protocols fix 20).
    #[serde(default = "default_nu")]
    pub nu: u64,
    #[serde(default)]
    pub master_seed: u64,
    /// Threshold grid for `sweep`/`ra` (strictly increasing).
    #[serde(default)]
    pub thresholds: Vec<f64>,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        Self {
            trials: default_trials(),
            horizon: default_horizon(),
            nu: default_nu(),
            master_seed: 0,
            thresholds: Vec::new(),
        }
    }
}

fn default_trials() -> usize {
    1000
}

fn default_horizon() -> u64 {
    1_000_000
}

fn default_nu() -> u64 {
    20
}

impl ExperimentParams {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.horizon <= self.nu {
            return Err(Error::Config(format!(
                "horizon {} must exceed the change point {}",
                self.horizon, self.nu
            )));
        }
        if self.thresholds.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(
                "thresholds must be strictly increasing".into(),
            ));
        }
        if self.thresholds.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::Config("thresholds must be > 0".into()));
        }
        Ok(())
    }
}

/// Recovery-study knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryParams {
    /// Calibrate each detector's threshold to this average run length.
    pub target_run_length: f64,
    /// Acceptable relative calibration error (default 0.2).
    #[serde(default = "default_calibration_tol")]
    pub calibration_tol: f64,
}

fn default_calibration_tol() -> f64 {
    0.2
}

/// Code family for the massive-random-access experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CodeFamily {
    SicPovm { dim: usize },
    Gold { degree: usize },
}

/// Massive-random-access configuration: P users with codes of one family,
/// offsets up to Δ, K of them entering at the change point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomAccessParams {
    pub users: usize,
    pub delta: usize,
    #[serde(flatten)]
    pub code_family: CodeFamily,
    pub entering_users: usize,
    pub snr_db: f64,
    #[serde(default = "default_noise")]
    pub noise_variance: f64,
}

fn default_noise() -> f64 {
    1.0
}

impl RandomAccessParams {
    pub fn capacity(&self) -> Result<usize> {
        Ok(match self.code_family {
            CodeFamily::SicPovm { dim } => dim * (dim / (self.delta + 1)),
            CodeFamily::Gold { degree } => {
                let m = (1usize << degree) - 1;
                ((1usize << degree) + 1) * (m / (self.delta + 1))
            }
        })
    }

    pub fn validate(&self) -> Result<()> {
        let cap = self.capacity()?;
        if self.users == 0 || self.users > cap {
            return Err(Error::Capacity(format!(
                "requested {} users, code family capacity is {cap}",
                self.users
            )));
        }
        if self.entering_users == 0 || self.entering_users > self.users {
            return Err(Error::Config(format!(
                "entering users {} must be in 1..=P", self.entering_users
            )));
        }
        Ok(())
    }

    pub fn code_length(&self) -> usize {
        match self.code_family {
            CodeFamily::SicPovm { dim } => dim,
            CodeFamily::Gold { degree } => (1usize << degree) - 1,
        }
    }

    pub fn matrix_spec(&self) -> MatrixSpec {
        match self.code_family {
            CodeFamily::SicPovm { dim } => MatrixSpec::SicAugmented {
                dim,
                delta: self.delta,
                users: self.users,
                fiducial_file: None,
            },
            CodeFamily::Gold { degree } => MatrixSpec::GoldAugmented {
                degree,
                delta: self.delta,
                users: self.users,
            },
        }
    }
}

/// Top-level config file: `[scenario]`, `[matrix]`, `[[detector]]`,
/// `[experiment]`, optional `[recovery]` and `[ra]` sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<MatrixSpec>,
    #[serde(default, rename = "detector", skip_serializing_if = "Vec::is_empty")]
    pub detectors: Vec<DetectorSpec>,
    #[serde(default)]
    pub experiment: ExperimentParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recovery: Option<RecoveryParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ra: Option<RandomAccessParams>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.experiment.validate()?;
        if let Some(s) = &self.scenario {
            s.validate()?;
        }
        if let Some(ra) = &self.ra {
            ra.validate()?;
        }
        Ok(())
    }

    /// Short hash of the canonical serialized config, recorded in outputs.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let text = toml::to_string(self).unwrap_or_default();
        let digest = Sha256::digest(text.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::single_rng;

    const SAMPLE: &str = r#"
[scenario]
M = 31
N = 50
K = 3
support = "random"
signal = { snr_db = -10.0 }
noise_variance = 1.0

[matrix]
kind = "mub"
dim = 31
cols = 50

[[detector]]
variant = "aggregate"
threshold = 5.0

[[detector]]
variant = "sgd_energy"
a = 0.01
c = 0.05
threshold = 4.0
k_max = 10

[experiment]
trials = 100
horizon = 100000
nu = 20
master_seed = 7
thresholds = [2.0, 4.0, 8.0]
"#;

    #[test]
    fn parses_sample_config() {
        let cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        let sc = cfg.scenario.as_ref().unwrap();
        assert_eq!((sc.m, sc.n, sc.k), (31, 50, 3));
        assert!(matches!(sc.support, SupportSpec::Tag(SupportTag::Random)));
        let sx = sc.known_sigma_x_sq().unwrap();
        assert!((sx - 31.0 / 30.0).abs() < 1e-12);
        assert_eq!(cfg.detectors.len(), 2);
        assert_eq!(cfg.detectors[0].label(), "aggregate");
        assert_eq!(cfg.detectors[1].label(), "sgd_energy@kmax10");
        assert_eq!(cfg.experiment.thresholds.len(), 3);
        // hash is stable
        assert_eq!(cfg.hash(), cfg.hash());
    }

    #[test]
    fn scenario_instantiation_draws_support_and_variances() {
        let spec = ScenarioSpec {
            m: 8,
            n: 16,
            k: 3,
            support: SupportSpec::Tag(SupportTag::Random),
            signal: SignalSpec::Bounds {
                sigma_min_sq: 0.1,
                sigma_max_sq: 1.0,
            },
            noise_variance: 1.0,
        };
        let mut rng = single_rng(3);
        let sc = spec
            .instantiate(crate::model::ChangePoint::At(20), &mut rng)
            .unwrap();
        assert_eq!(sc.support.len(), 3);
        assert!(sc.signal_variances.iter().all(|&v| (0.1..=1.0).contains(&v)));
        assert!(matches!(
            spec.variance_knowledge(),
            SignalVariance::Bounded(_)
        ));
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = SAMPLE.replace("thresholds = [2.0, 4.0, 8.0]", "thresholds = [4.0, 2.0]");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
        let bad2 = SAMPLE.replace("trials = 100", "trials = 0");
        assert!(ExperimentConfig::from_toml(&bad2).is_err());
        let bad3 = SAMPLE.replace("nu = 20", "nu = 100000");
        assert!(ExperimentConfig::from_toml(&bad3).is_err());
    }

    #[test]
    fn ra_capacity_matches_paper_arithmetic() {
        let ra = RandomAccessParams {
            users: 1500,
            delta: 8,
            code_family: CodeFamily::SicPovm { dim: 124 },
            entering_users: 5,
            snr_db: -10.0,
            noise_variance: 1.0,
        };
        assert_eq!(ra.capacity().unwrap(), 1612);
        ra.validate().unwrap();
        let gold = RandomAccessParams {
            code_family: CodeFamily::Gold { degree: 7 },
            ..ra
        };
        assert_eq!(gold.capacity().unwrap(), 129 * 14);
        gold.validate().unwrap();
        let too_many = RandomAccessParams { users: 1700, ..ra };
        assert!(too_many.validate().is_err());
    }

    #[test]
    fn matrix_specs_build() {
        let mut rng = single_rng(4);
        let m = MatrixSpec::Mub { dim: 7, cols: 12 }.build(&mut rng).unwrap();
        assert_eq!((m.m(), m.n()), (7, 12));
        let s = MatrixSpec::SicPovm {
            dim: 4,
            cols: 16,
            fiducial_file: None,
        }
        .build(&mut rng)
        .unwrap();
        assert!((s.coherence() - 1.0 / 5f64.sqrt()).abs() < 1e-8);
        let g = MatrixSpec::GoldAugmented {
            degree: 5,
            delta: 2,
            users: 20,
        }
        .build(&mut rng)
        .unwrap();
        assert_eq!((g.m(), g.n()), (33, 60));
        assert!(MatrixSpec::GoldAugmented {
            degree: 5,
            delta: 2,
            users: 1000,
        }
        .build(&mut rng)
        .is_err());
    }

    #[test]
    fn detector_spec_round_trips() {
        let spec = DetectorSpec {
            variant: DetectorVariant::SgdAggregate { a: 0.01, c: 0.05 },
            threshold: 3.5,
            k_max: None,
        };
        let text = toml::to_string(&spec).unwrap();
        let back: DetectorSpec = toml::from_str(&text).unwrap();
        assert_eq!(spec, back);
    }
}
