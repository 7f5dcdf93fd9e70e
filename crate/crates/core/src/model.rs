//! Generative observation model: pre-change noise, post-change noisy
//! compressive measurements of a sparse signal with fixed support.
//!
//! Complex Gaussian convention used throughout the crate: `CN(0, σ²)` has
//! independent real and imaginary parts, each `N(0, σ²/2)`, so
//! `E|z|² = σ²` and `|z|² ~ Exponential(1/σ²)`.

use ndarray::{Array1, ArrayView2};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::matrices::SensingMatrix;

/// Time index of the change, or `Never` for no-change (ARL) runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChangePoint {
    At(u64),
    /// Serialized as the string "never".
    Never(NeverTag),
}

/// Marker so `ChangePoint::Never` round-trips as `"never"` in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NeverTag {
    #[serde(rename = "never")]
    Never,
}

pub const NEVER: ChangePoint = ChangePoint::Never(NeverTag::Never);

impl ChangePoint {
    pub fn is_never(&self) -> bool {
        matches!(self, ChangePoint::Never(_))
    }

    /// True when a signal is present at time `t`.
    pub fn changed_by(&self, t: u64) -> bool {
        match self {
            ChangePoint::At(nu) => t >= *nu,
            ChangePoint::Never(_) => false,
        }
    }
}

/// Known lower/upper bounds on the unknown per-entry signal variances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceBounds {
    pub sigma_min_sq: f64,
    pub sigma_max_sq: f64,
}

impl VarianceBounds {
    pub fn new(sigma_min_sq: f64, sigma_max_sq: f64) -> Result<Self> {
        if !(sigma_min_sq > 0.0) || sigma_max_sq < sigma_min_sq {
            return Err(Error::Config(format!(
                "variance bounds need 0 < min <= max, got [{sigma_min_sq}, {sigma_max_sq}]"
            )));
        }
        Ok(Self {
            sigma_min_sq,
            sigma_max_sq,
        })
    }
}

/// Full generative description of one change-detection problem instance.
///
/// `support` holds zero-based column indices into the sensing matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub support: Vec<usize>,
    pub signal_variances: Vec<f64>,
    pub noise_variance: f64,
    pub change_point: ChangePoint,
}

impl Scenario {
    pub fn new(
        m: usize,
        n: usize,
        support: Vec<usize>,
        signal_variances: Vec<f64>,
        noise_variance: f64,
        change_point: ChangePoint,
    ) -> Result<Self> {
        let k = support.len();
        let s = Self {
            m,
            n,
            k,
            support,
            signal_variances,
            noise_variance,
            change_point,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n < self.m {
            return Err(Error::Config(format!(
                "need N >= M >= 1, got M={}, N={}",
                self.m, self.n
            )));
        }
        if self.k == 0 || self.k > self.n || self.support.len() != self.k {
            return Err(Error::Config(format!(
                "need 1 <= K <= N with |support| = K, got K={}, |support|={}",
                self.k,
                self.support.len()
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for &i in &self.support {
            if i >= self.n || !seen.insert(i) {
                return Err(Error::Config(format!(
                    "support indices must be distinct and < N, got {:?}",
                    self.support
                )));
            }
        }
        if self.signal_variances.len() != self.k {
            return Err(Error::Config(format!(
                "need one signal variance per support entry, got {} for K={}",
                self.signal_variances.len(),
                self.k
            )));
        }
        if self.signal_variances.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Config("signal variances must be >= 0".into()));
        }
        if !(self.noise_variance > 0.0) {
            return Err(Error::Config("noise variance must be > 0".into()));
        }
        Ok(())
    }

    /// Uniform-variance convenience constructor.
    pub fn uniform(
        m: usize,
        n: usize,
        support: Vec<usize>,
        sigma_x_sq: f64,
        noise_variance: f64,
        change_point: ChangePoint,
    ) -> Result<Self> {
        let k = support.len();
        Self::new(
            m,
            n,
            support,
            vec![sigma_x_sq; k],
            noise_variance,
            change_point,
        )
    }

    pub fn total_signal_variance(&self) -> f64 {
        self.signal_variances.iter().sum()
    }
}

/// One measurement vector at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub t: u64,
    pub y: Array1<C64>,
}

/// Draw `CN(0, var)`: real and imaginary parts independent `N(0, var/2)`.
pub fn sample_cn<R: Rng + ?Sized>(var: f64, rng: &mut R) -> C64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Generate the observation at time `t`: pure noise before the change point,
/// `A_S x_S[t] + n[t]` after, with `x_S[t]` drawn fresh each call.
pub fn generate_observation<R: Rng + ?Sized>(
    scenario: &Scenario,
    a: &SensingMatrix,
    t: u64,
    rng: &mut R,
) -> Result<Observation> {
    if a.m() != scenario.m || a.n() != scenario.n {
        return Err(Error::Config(format!(
            "sensing matrix is {}x{}, scenario expects {}x{}",
            a.m(),
            a.n(),
            scenario.m,
            scenario.n
        )));
    }
    Ok(Observation {
        t,
        y: generate_observation_unchecked(scenario, &a.data().view(), t, rng),
    })
}

/// Same as [`generate_observation`] without the dimension check; the hot path
/// for Monte Carlo trials.
pub fn generate_observation_unchecked<R: Rng + ?Sized>(
    scenario: &Scenario,
    a: &ArrayView2<C64>,
    t: u64,
    rng: &mut R,
) -> Array1<C64> {
    let m = scenario.m;
    let mut y = Array1::<C64>::zeros(m);
    if scenario.change_point.changed_by(t) {
        for (&col, &var) in scenario.support.iter().zip(&scenario.signal_variances) {
            let x = sample_cn(var, rng);
            for i in 0..m {
                y[i] += a[[i, col]] * x;
            }
        }
    }
    for i in 0..m {
        y[i] += sample_cn(scenario.noise_variance, rng);
    }
    y
}

/// Common signal variance achieving `snr_db` under the definition
/// `SNR = 10 log10(K σ_x² / (M σ_n²))`.
pub fn snr_to_sigma_x(snr_db: f64, m: usize, k: usize, sigma_n_sq: f64) -> f64 {
    (m as f64) * sigma_n_sq / (k as f64) * 10f64.powf(snr_db / 10.0)
}

/// SNR in dB of a scenario: `10 log10(Σ_{i∈S} σ_i² / (M σ_n²))`.
pub fn snr_of_scenario(scenario: &Scenario) -> f64 {
    10.0 * (scenario.total_signal_variance()
        / (scenario.m as f64 * scenario.noise_variance))
        .log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrices::SensingMatrix;
    use crate::seeding::single_rng;
    use ndarray::Array2;

    fn unitary4() -> SensingMatrix {
        SensingMatrix::custom(Array2::from_shape_fn((4, 4), |(i, j)| {
            if i == j {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
        .unwrap()
    }

    #[test]
    fn pre_change_is_pure_noise() {
        // t=5 < nu=20: zero mean, per-component variance ~ sigma_n^2
        let sc = Scenario::uniform(4, 4, vec![1], 2.0, 1.0, ChangePoint::At(20)).unwrap();
        let a = unitary4();
        let mut rng = single_rng(1);
        let trials = 20_000;
        let mut mean = C64::new(0.0, 0.0);
        let mut pow = 0.0;
        for _ in 0..trials {
            let obs = generate_observation(&sc, &a, 5, &mut rng).unwrap();
            mean += obs.y[0];
            pow += obs.y[0].norm_sqr();
        }
        let nf = trials as f64;
        assert!((mean / nf).norm() < 4.0 / nf.sqrt());
        assert!((pow / nf - 1.0).abs() < 0.05);
    }

    #[test]
    fn zero_signal_variance_matches_noise() {
        let sc = Scenario::new(4, 4, vec![2], vec![0.0], 1.0, ChangePoint::At(0)).unwrap();
        let a = unitary4();
        let mut rng = single_rng(2);
        let trials = 20_000;
        let mut pow = 0.0;
        for _ in 0..trials {
            let obs = generate_observation(&sc, &a, 3, &mut rng).unwrap();
            pow += obs.y.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        // E||y||^2 = M sigma_n^2 = 4
        assert!((pow / trials as f64 - 4.0).abs() < 0.1);
    }

    #[test]
    fn post_change_energy_matches_trace_identity() {
        // unitary M=N=4, K=1, sigma_1^2=2, sigma_n^2=1: E||y||^2 = 2 + 4 = 6
        let sc = Scenario::uniform(4, 4, vec![1], 2.0, 1.0, ChangePoint::At(20)).unwrap();
        let a = unitary4();
        let mut rng = single_rng(3);
        let trials = 100_000;
        let mut pow = 0.0;
        for _ in 0..trials {
            let obs = generate_observation(&sc, &a, 30, &mut rng).unwrap();
            pow += obs.y.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        let got = pow / trials as f64;
        // var(||y||^2) = phi^2 + 2*phi*sn + M*sn^4 with phi=2 -> 4+4+4=12, SE=sqrt(12/1e5)
        assert!((got - 6.0).abs() < 3.0 * (12.0f64 / trials as f64).sqrt() + 0.02,
            "got {got}");
    }

    #[test]
    fn snr_conversions_invert() {
        assert!((snr_to_sigma_x(0.0, 5, 5, 1.0) - 1.0).abs() < 1e-12);
        assert!((snr_to_sigma_x(-10.0, 124, 5, 1.0) - 2.48).abs() < 1e-12);
        assert!((snr_to_sigma_x(0.0, 124, 5, 1.0) - 24.8).abs() < 1e-12);

        let sx = snr_to_sigma_x(-7.3, 31, 3, 0.5);
        let sc = Scenario::uniform(31, 50, vec![0, 4, 9], sx, 0.5, NEVER).unwrap();
        assert!((snr_of_scenario(&sc) - (-7.3)).abs() < 1e-12);

        // all sigma_i^2 = M sigma_n^2 / K -> 0 dB
        let sc0 =
            Scenario::uniform(8, 10, vec![1, 2], 8.0 * 0.7 / 2.0, 0.7, NEVER).unwrap();
        assert!(snr_of_scenario(&sc0).abs() < 1e-12);
    }

    #[test]
    fn snr_of_heterogeneous_scenario_is_direct_sum() {
        let vars = vec![0.1, 0.325, 0.55, 0.775, 1.0];
        let sc = Scenario::new(124, 200, vec![3, 17, 40, 99, 150], vars.clone(), 1.0, NEVER)
            .unwrap();
        let want = 10.0 * (vars.iter().sum::<f64>() / 124.0).log10();
        assert!((snr_of_scenario(&sc) - want).abs() < 1e-12);
    }

    #[test]
    fn scenario_validation_errors() {
        assert!(Scenario::uniform(4, 3, vec![0], 1.0, 1.0, NEVER).is_err());
        assert!(Scenario::uniform(4, 4, vec![4], 1.0, 1.0, NEVER).is_err());
        assert!(Scenario::uniform(4, 4, vec![1, 1], 1.0, 1.0, NEVER).is_err());
        assert!(Scenario::new(4, 4, vec![1], vec![1.0, 2.0], 1.0, NEVER).is_err());
        assert!(Scenario::uniform(4, 4, vec![1], 1.0, 0.0, NEVER).is_err());
    }

    #[test]
    fn change_point_serde_round_trip() {
        #[derive(Serialize, Deserialize)]
        struct Wrap {
            cp: ChangePoint,
        }
        let t: Wrap = toml::from_str("cp = 20").unwrap();
        assert_eq!(t.cp, ChangePoint::At(20));
        let n: Wrap = toml::from_str("cp = \"never\"").unwrap();
        assert!(n.cp.is_never());
        let back = toml::to_string(&Wrap { cp: NEVER }).unwrap();
        assert!(back.contains("never"));
    }

    #[test]
    fn observations_at_distinct_times_uncorrelated() {
        let sc = Scenario::uniform(4, 4, vec![0], 1.5, 1.0, ChangePoint::At(0)).unwrap();
        let a = unitary4();
        let mut rng = single_rng(9);
        let trials = 10_000;
        let mut cross = C64::new(0.0, 0.0);
        for _ in 0..trials {
            let y1 = generate_observation(&sc, &a, 1, &mut rng).unwrap();
            let y2 = generate_observation(&sc, &a, 2, &mut rng).unwrap();
            cross += y1.y[0].conj() * y2.y[0];
        }
        // normalized by E|y|^2 = 2.5
        assert!((cross / trials as f64).norm() / 2.5 < 4.0 / (trials as f64).sqrt());
    }
}
