//! Monte Carlo experiment engine: average run length and worst-case delay
//! estimation, threshold sweeps producing tradeoff curves, threshold
//! calibration, support-recovery studies and the massive-random-access
//! experiment.
//!
//! Every estimate is reproducible: trial i of a given estimator draws from
//! the ChaCha stream `(master_seed, purpose tag, salt, i)`, trials run in a
//! worker pool and are reduced in trial-index order, so serial and parallel
//! executions emit identical bytes.

pub mod config;

use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detectors::{Detector, DetectorBank, ParallelStatistic, Stop, StoppingReport};
use crate::error::{Error, Result};
use crate::matrices::SensingMatrix;
use crate::model::{generate_observation_unchecked, ChangePoint, Scenario, NEVER};
use crate::recovery::{omp_with_adjoint, support_recovery_pct};
use crate::seeding::{derive_seed, trial_rng};
use crate::statistics::SignalVariance;

pub use config::{
    CodeFamily, DetectorSpec, DetectorVariant, ExperimentConfig, ExperimentParams, MatrixSpec,
    RandomAccessParams, RecoveryParams, ScenarioSpec, SignalSpec, SupportSpec, SupportTag,
};

// ---------------------------------------------------------------------------
// Detector factory
// ---------------------------------------------------------------------------

/// Builds per-trial detectors from a spec. Banks that do not depend on the
/// trial's support are built once and shared; the ideal detector (which
/// knows the true support) rebuilds its model per trial.
pub struct DetectorFactory {
    spec: DetectorSpec,
    tau: f64,
    matrix: Arc<SensingMatrix>,
    knowledge: SignalVariance,
    k: usize,
    sigma_n_sq: f64,
    shared: Option<Arc<DetectorBank>>,
}

impl DetectorFactory {
    pub fn new(
        spec: DetectorSpec,
        tau: f64,
        matrix: Arc<SensingMatrix>,
        knowledge: SignalVariance,
        k: usize,
        sigma_n_sq: f64,
    ) -> Result<Self> {
        let mut factory = Self {
            spec,
            tau,
            matrix,
            knowledge,
            k,
            sigma_n_sq,
            shared: None,
        };
        if !matches!(spec.variant, DetectorVariant::Ideal) {
            factory.shared = Some(Arc::new(factory.build_shared_bank()?));
        }
        Ok(factory)
    }

    pub fn label(&self) -> String {
        self.spec.label()
    }

    fn known_sigma_x(&self) -> Result<f64> {
        match self.knowledge {
            SignalVariance::Known(v) => Ok(v),
            SignalVariance::Bounded(_) => Err(Error::Config(format!(
                "detector '{}' needs a known common signal variance",
                self.spec.label()
            ))),
        }
    }

    fn sigma_min_sq(&self) -> f64 {
        match self.knowledge {
            SignalVariance::Known(v) => v,
            SignalVariance::Bounded(b) => b.sigma_min_sq,
        }
    }

    fn build_shared_bank(&self) -> Result<DetectorBank> {
        let a = &self.matrix;
        let tau = self.tau;
        let k = self.k;
        let sn = self.sigma_n_sq;
        match (self.spec.variant, self.spec.k_max) {
            (DetectorVariant::Ideal, _) => unreachable!("ideal banks are per-trial"),
            (DetectorVariant::Optimal { subset_cap }, None) => {
                DetectorBank::optimal(a, k, self.known_sigma_x()?, sn, tau, subset_cap)
            }
            (DetectorVariant::Optimal { .. }, Some(_)) => Err(Error::Unsupported(
                "the parallel-over-sparsity wrapper applies to aggregate, energy and \
                 correlator detectors"
                    .into(),
            )),
            (DetectorVariant::Aggregate, None) => {
                DetectorBank::aggregate(a, k, self.knowledge, sn, tau)
            }
            (DetectorVariant::Aggregate, Some(k_max)) => DetectorBank::parallel_k(
                a,
                ParallelStatistic::Aggregate,
                k_max,
                self.knowledge,
                sn,
                tau,
            ),
            (DetectorVariant::Energy, None) => DetectorBank::energy(a, k, self.knowledge, sn, tau),
            (DetectorVariant::Energy, Some(k_max)) => {
                DetectorBank::parallel_k(a, ParallelStatistic::Energy, k_max, self.knowledge, sn, tau)
            }
            (DetectorVariant::Correlator, None) => {
                DetectorBank::correlator(a, k, self.knowledge, sn, tau)
            }
            (DetectorVariant::Correlator, Some(k_max)) => DetectorBank::parallel_k(
                a,
                ParallelStatistic::Correlator,
                k_max,
                self.knowledge,
                sn,
                tau,
            ),
            (DetectorVariant::Pse { k_p }, None) => {
                let k_p = k_p.unwrap_or(k);
                DetectorBank::pse(a, k, k_p, self.sigma_min_sq(), sn, tau)
            }
            (DetectorVariant::Pse { .. }, Some(_)) => Err(Error::Unsupported(
                "PSE has no parallel-over-sparsity form".into(),
            )),
            (DetectorVariant::SgdAggregate { a: ga, c }, k_max) => {
                // the per-entry θ parameterization absorbs the sparsity; with
                // unknown K the top-k sums are monotone in k, so the parallel
                // maximum reduces to the K_max track
                let sum_k = k_max.unwrap_or(k);
                DetectorBank::sgd_aggregate(a, sum_k, sn, tau, ga, c)
            }
            (DetectorVariant::SgdEnergy { a: ga, c }, None) => {
                DetectorBank::sgd_energy_known_k(a, k, sn, tau, ga, c)
            }
            (DetectorVariant::SgdEnergy { a: ga, c }, Some(_)) => {
                DetectorBank::sgd_energy_unknown_k(a, self.sigma_min_sq(), sn, tau, ga, c)
            }
            (DetectorVariant::SgdCorrelator { a: ga, c }, None) => {
                DetectorBank::sgd_correlator(a, Some(k), self.sigma_min_sq(), sn, tau, ga, c)
            }
            (DetectorVariant::SgdCorrelator { .. }, Some(_)) => {
                DetectorBank::sgd_correlator(a, None, self.sigma_min_sq(), sn, tau, 0.01, 0.05)
            }
        }
    }

    /// A fresh detector for one trial.
    pub fn for_trial(&self, scenario: &Scenario) -> Result<Detector> {
        match &self.shared {
            Some(bank) => Ok(Detector::new(bank.clone())),
            None => {
                let bank = DetectorBank::ideal(
                    &self.matrix,
                    &scenario.support,
                    &scenario.signal_variances,
                    scenario.noise_variance,
                    self.tau,
                )?;
                Ok(Detector::new(Arc::new(bank)))
            }
        }
    }

    /// How this variant identifies the support after firing.
    fn recovery_method(&self) -> RecoveryMethod {
        match self.spec.variant {
            DetectorVariant::Aggregate
            | DetectorVariant::SgdAggregate { .. }
            | DetectorVariant::Optimal { .. }
            | DetectorVariant::Pse { .. } => RecoveryMethod::DetectorEstimate,
            _ => RecoveryMethod::OmpOnLastObservation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RecoveryMethod {
    DetectorEstimate,
    OmpOnLastObservation,
}

// ---------------------------------------------------------------------------
// Single trials
// ---------------------------------------------------------------------------

/// Stream observations into a detector until it fires or the horizon is
/// reached. Deterministic given the rng state.
pub fn run_trial<R: Rng + ?Sized>(
    scenario: &Scenario,
    a: &SensingMatrix,
    detector: &mut Detector,
    horizon: u64,
    rng: &mut R,
    keep_trace: bool,
) -> Result<StoppingReport> {
    let data = a.data().view();
    let mut trace = if keep_trace { Some(Vec::new()) } else { None };
    for t in 0..horizon {
        let y = generate_observation_unchecked(scenario, &data, t, rng);
        let out = detector.step(&y.view())?;
        if let Some(tr) = trace.as_mut() {
            tr.push(out.metric);
        }
        if out.fired {
            return Ok(StoppingReport {
                stop: Stop::FiredAt(t),
                support_estimate: detector.support_estimate(),
                trace,
            });
        }
    }
    Ok(StoppingReport {
        stop: Stop::Censored { horizon },
        support_estimate: None,
        trace,
    })
}

/// Trial outcome carrying the recovery percentage when the run fired at or
/// after the change point.
struct TrialOutcome {
    stop: Stop,
    recovery_pct: Option<f64>,
}

fn run_trial_with_recovery<R: Rng + ?Sized>(
    scenario: &Scenario,
    a: &SensingMatrix,
    at: &ndarray::Array2<crate::linalg::C64>,
    detector: &mut Detector,
    horizon: u64,
    nu: u64,
    k: usize,
    method: RecoveryMethod,
    rng: &mut R,
) -> Result<TrialOutcome> {
    let data = a.data().view();
    for t in 0..horizon {
        let y = generate_observation_unchecked(scenario, &data, t, rng);
        let out = detector.step(&y.view())?;
        if out.fired {
            let recovery_pct = if t >= nu {
                let estimate = match method {
                    RecoveryMethod::DetectorEstimate => detector.support_estimate(),
                    RecoveryMethod::OmpOnLastObservation => {
                        Some(omp_with_adjoint(&data, &at.view(), &y.view(), k)?.indices)
                    }
                };
                match estimate {
                    Some(est) => Some(support_recovery_pct(&est, &scenario.support)?),
                    None => None,
                }
            } else {
                None
            };
            return Ok(TrialOutcome {
                stop: Stop::FiredAt(t),
                recovery_pct,
            });
        }
    }
    Ok(TrialOutcome {
        stop: Stop::Censored { horizon },
        recovery_pct: None,
    })
}

// ---------------------------------------------------------------------------
// Estimates
// ---------------------------------------------------------------------------

/// Average-run-length estimate. Censored runs contribute the horizon, which
/// makes the estimate a lower bound whenever `censored > 0`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ArlEstimate {
    pub t_r: f64,
    pub stderr: f64,
    pub censored: usize,
    pub trials: usize,
}

impl ArlEstimate {
    pub fn is_lower_bound(&self) -> bool {
        self.censored > 0
    }
}

/// Detection-delay estimate at a fixed change point, conditioned on firing
/// at or after it. Runs that fire earlier are false alarms and are excluded
/// from the mean; their rate is reported.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DelayEstimate {
    pub d_w: f64,
    pub stderr: f64,
    pub retained: usize,
    pub false_alarms: usize,
    pub censored: usize,
    pub trials: usize,
}

impl DelayEstimate {
    pub fn false_alarm_rate(&self) -> f64 {
        self.false_alarms as f64 / self.trials as f64
    }
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, (var / n).sqrt())
}

/// A point on the ARL/delay tradeoff curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvePoint {
    pub tau: f64,
    pub t_r: f64,
    pub t_r_stderr: f64,
    pub arl_censored: usize,
    pub d_w: f64,
    pub d_w_stderr: f64,
    pub delay_retained: usize,
    pub false_alarm_rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recovery_pct: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recovery_stderr: Option<f64>,
}

/// Threshold-sweep result for one detector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TradeoffCurve {
    pub detector: String,
    pub points: Vec<CurvePoint>,
    pub config_hash: String,
    pub master_seed: u64,
    /// Wall-clock seconds; reported on the console, never written to result
    /// files so that reruns stay byte-identical.
    #[serde(skip)]
    pub wall_time_s: f64,
}

/// The harness: a scenario sampler, a sensing matrix and the experiment
/// parameters, with all estimators hanging off it.
pub struct Harness {
    sampler: Sampler,
    knowledge: SignalVariance,
    k: usize,
    sigma_n_sq: f64,
    pub matrix: Arc<SensingMatrix>,
    pub params: ExperimentParams,
    config_hash: String,
    with_recovery: bool,
}

enum Sampler {
    Spec(ScenarioSpec),
    RandomAccess {
        ra: RandomAccessParams,
        m_eff: usize,
        n_eff: usize,
        sigma_x_sq: f64,
    },
}

impl Sampler {
    fn sample<R: Rng + ?Sized>(&self, cp: ChangePoint, rng: &mut R) -> Result<Scenario> {
        match self {
            Sampler::Spec(spec) => spec.instantiate(cp, rng),
            Sampler::RandomAccess {
                ra,
                m_eff,
                n_eff,
                sigma_x_sq,
            } => {
                let users = rand::seq::index::sample(rng, ra.users, ra.entering_users).into_vec();
                let mut support: Vec<usize> = users
                    .into_iter()
                    .map(|u| {
                        let offset = rng.random_range(0..=ra.delta);
                        u * (ra.delta + 1) + offset
                    })
                    .collect();
                support.sort_unstable();
                Scenario::uniform(
                    *m_eff,
                    *n_eff,
                    support,
                    *sigma_x_sq,
                    ra.noise_variance,
                    cp,
                )
            }
        }
    }
}

impl Harness {
    /// Standard scenario-driven experiment from a config file.
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        let scenario = cfg
            .scenario
            .clone()
            .ok_or_else(|| Error::Config("config is missing [scenario]".into()))?;
        let matrix_spec = cfg
            .matrix
            .clone()
            .ok_or_else(|| Error::Config("config is missing [matrix]".into()))?;
        let mut rng = matrix_rng(cfg.experiment.master_seed);
        let matrix = Arc::new(matrix_spec.build(&mut rng)?);
        if matrix.m() != scenario.m || matrix.n() != scenario.n {
            return Err(Error::Config(format!(
                "matrix is {}x{}, scenario expects {}x{}",
                matrix.m(),
                matrix.n(),
                scenario.m,
                scenario.n
            )));
        }
        Ok(Self {
            knowledge: scenario.variance_knowledge(),
            k: scenario.k,
            sigma_n_sq: scenario.noise_variance,
            sampler: Sampler::Spec(scenario),
            matrix,
            params: cfg.experiment.clone(),
            config_hash: cfg.hash(),
            with_recovery: false,
        })
    }

    /// Massive-random-access experiment: builds the augmented code matrix
    /// and samples entering users with random offsets each trial.
    pub fn from_config_ra(cfg: &ExperimentConfig) -> Result<Self> {
        let ra = cfg
            .ra
            .ok_or_else(|| Error::Config("config is missing [ra]".into()))?;
        ra.validate()?;
        let mut rng = matrix_rng(cfg.experiment.master_seed);
        let matrix = Arc::new(ra.matrix_spec().build(&mut rng)?);
        let m_eff = ra.code_length() + ra.delta;
        let n_eff = ra.users * (ra.delta + 1);
        debug_assert_eq!(matrix.m(), m_eff);
        debug_assert_eq!(matrix.n(), n_eff);
        let sigma_x_sq =
            crate::model::snr_to_sigma_x(ra.snr_db, m_eff, ra.entering_users, ra.noise_variance);
        Ok(Self {
            knowledge: SignalVariance::Known(sigma_x_sq),
            k: ra.entering_users,
            sigma_n_sq: ra.noise_variance,
            sampler: Sampler::RandomAccess {
                ra,
                m_eff,
                n_eff,
                sigma_x_sq,
            },
            matrix,
            params: cfg.experiment.clone(),
            config_hash: cfg.hash(),
            with_recovery: true,
        })
    }

    pub fn factory(&self, spec: DetectorSpec, tau: f64) -> Result<DetectorFactory> {
        DetectorFactory::new(
            spec,
            tau,
            self.matrix.clone(),
            self.knowledge,
            self.k,
            self.sigma_n_sq,
        )
    }

    /// Estimate the average run length `T_r = E_∞[T]` at threshold `tau`.
    pub fn estimate_arl(
        &self,
        spec: DetectorSpec,
        tau: f64,
        trials: usize,
        tag: &str,
        salt: u64,
    ) -> Result<ArlEstimate> {
        self.estimate_arl_with_horizon(spec, tau, trials, tag, salt, self.params.horizon)
    }

    fn estimate_arl_with_horizon(
        &self,
        spec: DetectorSpec,
        tau: f64,
        trials: usize,
        tag: &str,
        salt: u64,
        horizon: u64,
    ) -> Result<ArlEstimate> {
        let factory = self.factory(spec, tau)?;
        let seed = derive_seed(
            self.params.master_seed,
            &format!("arl:{tag}:{}:{:x}", factory.label(), tau.to_bits()),
            salt,
        );
        let stops: Vec<Stop> = (0..trials)
            .into_par_iter()
            .map(|i| -> Result<Stop> {
                let mut rng = trial_rng(seed, i as u64);
                let scenario = self.sampler.sample(NEVER, &mut rng)?;
                let mut det = factory.for_trial(&scenario)?;
                let report = run_trial(&scenario, &self.matrix, &mut det, horizon, &mut rng, false)?;
                Ok(report.stop)
            })
            .collect::<Result<Vec<_>>>()?;
        let censored = stops.iter().filter(|s| s.fired().is_none()).count();
        // stopping times count steps from 1 (a fire on the first observation
        // is a run of length 1)
        let times: Vec<f64> = stops
            .iter()
            .map(|s| (s.time_or_horizon() + 1) as f64)
            .collect();
        let (t_r, stderr) = mean_stderr(&times);
        Ok(ArlEstimate {
            t_r,
            stderr,
            censored,
            trials,
        })
    }

    /// Estimate the detection delay at the configured change point,
    /// conditioned on no alarm before it.
    pub fn estimate_delay(
        &self,
        spec: DetectorSpec,
        tau: f64,
        trials: usize,
        tag: &str,
        salt: u64,
    ) -> Result<DelayEstimate> {
        let out = self.delay_runs(spec, tau, trials, tag, salt)?;
        let delays: Vec<f64> = out
            .iter()
            .filter_map(|o| match o.stop {
                Stop::FiredAt(t) if t >= self.params.nu => Some((t - self.params.nu) as f64),
                _ => None,
            })
            .collect();
        let false_alarms = out
            .iter()
            .filter(|o| matches!(o.stop, Stop::FiredAt(t) if t < self.params.nu))
            .count();
        let censored = out
            .iter()
            .filter(|o| matches!(o.stop, Stop::Censored { .. }))
            .count();
        if delays.len() < 10 {
            return Err(Error::InsufficientData(format!(
                "only {} of {trials} runs fired at or after the change point",
                delays.len()
            )));
        }
        let (d_w, stderr) = mean_stderr(&delays);
        Ok(DelayEstimate {
            d_w,
            stderr,
            retained: delays.len(),
            false_alarms,
            censored,
            trials,
        })
    }

    /// Delay runs that also score support recovery at the stopping time.
    pub fn estimate_delay_and_recovery(
        &self,
        spec: DetectorSpec,
        tau: f64,
        trials: usize,
        tag: &str,
        salt: u64,
    ) -> Result<(DelayEstimate, f64, f64)> {
        let out = self.delay_runs(spec, tau, trials, tag, salt)?;
        let delays: Vec<f64> = out
            .iter()
            .filter_map(|o| match o.stop {
                Stop::FiredAt(t) if t >= self.params.nu => Some((t - self.params.nu) as f64),
                _ => None,
            })
            .collect();
        if delays.len() < 10 {
            return Err(Error::InsufficientData(format!(
                "only {} of {trials} runs fired at or after the change point",
                delays.len()
            )));
        }
        let recov: Vec<f64> = out.iter().filter_map(|o| o.recovery_pct).collect();
        let (d_w, d_se) = mean_stderr(&delays);
        let (r_mean, r_se) = mean_stderr(&recov);
        let false_alarms = out
            .iter()
            .filter(|o| matches!(o.stop, Stop::FiredAt(t) if t < self.params.nu))
            .count();
        let censored = out
            .iter()
            .filter(|o| matches!(o.stop, Stop::Censored { .. }))
            .count();
        Ok((
            DelayEstimate {
                d_w,
                stderr: d_se,
                retained: delays.len(),
                false_alarms,
                censored,
                trials,
            },
            r_mean,
            r_se,
        ))
    }

    fn delay_runs(
        &self,
        spec: DetectorSpec,
        tau: f64,
        trials: usize,
        tag: &str,
        salt: u64,
    ) -> Result<Vec<TrialOutcome>> {
        let factory = self.factory(spec, tau)?;
        let seed = derive_seed(
            self.params.master_seed,
            &format!("delay:{tag}:{}:{:x}", factory.label(), tau.to_bits()),
            salt,
        );
        let horizon = self.params.horizon;
        let nu = self.params.nu;
        let method = factory.recovery_method();
        let at = crate::linalg::adjoint(&self.matrix.data().view());
        (0..trials)
            .into_par_iter()
            .map(|i| -> Result<TrialOutcome> {
                let mut rng = trial_rng(seed, i as u64);
                let scenario = self.sampler.sample(ChangePoint::At(nu), &mut rng)?;
                let mut det = factory.for_trial(&scenario)?;
                run_trial_with_recovery(
                    &scenario,
                    &self.matrix,
                    &at,
                    &mut det,
                    horizon,
                    nu,
                    self.k,
                    method,
                    &mut rng,
                )
            })
            .collect::<Result<Vec<_>>>()
    }

    /// Bisection on τ until the estimated ARL lands within `tol` (relative)
    /// of `target`. Calibration runs are truncated at 20× the target length:
    /// runs censored there only push the estimate below the target, which
    /// the bisection treats conservatively, and it keeps bracketing cheap
    /// when a probe threshold badly overshoots.
    pub fn calibrate_tau(
        &self,
        spec: DetectorSpec,
        target: f64,
        tol: f64,
        trials: usize,
        tag: &str,
    ) -> Result<f64> {
        let cal_horizon = ((target * 20.0) as u64)
            .max(self.params.nu + 100)
            .min(self.params.horizon);
        let eval = |tau: f64, iter: u64| -> Result<f64> {
            Ok(self
                .estimate_arl_with_horizon(
                    spec,
                    tau,
                    trials,
                    &format!("calib:{tag}:{iter}"),
                    iter,
                    cal_horizon,
                )?
                .t_r)
        };
        let mut lo = 0.05f64;
        let mut hi = 1.0f64;
        let mut iter = 0u64;
        let mut arl_hi = eval(hi, bump(&mut iter))?;
        let mut best = (f64::INFINITY, hi);
        while arl_hi < target {
            hi *= 2.0;
            if hi > 1e6 {
                return Err(Error::Calibration {
                    achieved: arl_hi,
                    target,
                });
            }
            arl_hi = eval(hi, bump(&mut iter))?;
        }
        for _ in 0..30 {
            let mid = 0.5 * (lo + hi);
            let arl = eval(mid, bump(&mut iter))?;
            let rel = (arl - target).abs() / target;
            if rel < best.0 {
                best = (rel, mid);
            }
            if rel <= tol * 0.5 {
                return Ok(mid);
            }
            if arl > target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        if best.0 <= tol {
            Ok(best.1)
        } else {
            let achieved = eval(best.1, bump(&mut iter))?;
            Err(Error::Calibration { achieved, target })
        }
    }

    /// Full threshold sweep: for every detector and every threshold in the
    /// grid, estimate ARL and delay with independent seed streams.
    pub fn sweep(&self, detectors: &[DetectorSpec]) -> Result<Vec<TradeoffCurve>> {
        if self.params.thresholds.is_empty() {
            return Err(Error::Config("sweep needs a threshold grid".into()));
        }
        let mut curves = Vec::new();
        for spec in detectors {
            let started = std::time::Instant::now();
            let mut points = Vec::new();
            for (ti, &tau) in self.params.thresholds.iter().enumerate() {
                let arl =
                    self.estimate_arl(*spec, tau, self.params.trials, "sweep", ti as u64)?;
                let (delay, rec_mean, rec_se) = if self.with_recovery {
                    let (d, rm, rs) = self.estimate_delay_and_recovery(
                        *spec,
                        tau,
                        self.params.trials,
                        "sweep",
                        ti as u64,
                    )?;
                    (d, Some(rm), Some(rs))
                } else {
                    (
                        self.estimate_delay(*spec, tau, self.params.trials, "sweep", ti as u64)?,
                        None,
                        None,
                    )
                };
                points.push(CurvePoint {
                    tau,
                    t_r: arl.t_r,
                    t_r_stderr: arl.stderr,
                    arl_censored: arl.censored,
                    d_w: delay.d_w,
                    d_w_stderr: delay.stderr,
                    delay_retained: delay.retained,
                    false_alarm_rate: delay.false_alarm_rate(),
                    recovery_pct: rec_mean,
                    recovery_stderr: rec_se,
                });
            }
            curves.push(TradeoffCurve {
                detector: spec.label(),
                points,
                config_hash: self.config_hash.clone(),
                master_seed: self.params.master_seed,
                wall_time_s: started.elapsed().as_secs_f64(),
            });
        }
        Ok(curves)
    }

    /// Support-recovery study at a fixed run-length target: calibrate each
    /// detector's threshold, then score recovery at the stopping time.
    pub fn recovery_study(
        &self,
        detectors: &[DetectorSpec],
        params: RecoveryParams,
    ) -> Result<Vec<RecoveryResult>> {
        let calib_trials = (self.params.trials / 4).clamp(200, 2_000);
        let mut results = Vec::new();
        for spec in detectors {
            let label = spec.label();
            let tau = self.calibrate_tau(
                *spec,
                params.target_run_length,
                params.calibration_tol,
                calib_trials,
                &label,
            )?;
            let achieved = self.estimate_arl(*spec, tau, calib_trials, "recovery-check", 0)?;
            let (delay, recovery_pct, recovery_stderr) = self.estimate_delay_and_recovery(
                *spec,
                tau,
                self.params.trials,
                "recovery",
                0,
            )?;
            results.push(RecoveryResult {
                detector: label,
                tau,
                achieved_t_r: achieved.t_r,
                recovery_pct,
                recovery_stderr,
                delay,
            });
        }
        Ok(results)
    }

    /// Single detection run (the CLI `detect` subcommand).
    pub fn detect_once(&self, spec: DetectorSpec, keep_trace: bool) -> Result<StoppingReport> {
        let factory = self.factory(spec, spec.threshold)?;
        let seed = derive_seed(self.params.master_seed, "detect", 0);
        let mut rng = trial_rng(seed, 0);
        let scenario = self
            .sampler
            .sample(ChangePoint::At(self.params.nu), &mut rng)?;
        let mut det = factory.for_trial(&scenario)?;
        run_trial(
            &scenario,
            &self.matrix,
            &mut det,
            self.params.horizon,
            &mut rng,
            keep_trace,
        )
    }
}

fn bump(i: &mut u64) -> u64 {
    *i += 1;
    *i
}

fn matrix_rng(master_seed: u64) -> ChaCha12Rng {
    trial_rng(derive_seed(master_seed, "matrix", 0), 0)
}

/// One detector's row in a recovery study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub detector: String,
    pub tau: f64,
    pub achieved_t_r: f64,
    pub recovery_pct: f64,
    pub recovery_stderr: f64,
    pub delay: DelayEstimate,
}

// ---------------------------------------------------------------------------
// Output files
// ---------------------------------------------------------------------------

/// Write tradeoff curves as CSV (one row per point) with a JSON sidecar
/// holding the full config, seed and curve data. Wall time never enters the
/// files, so identical configs produce identical bytes.
pub fn write_curves(
    csv_path: &Path,
    config: &ExperimentConfig,
    curves: &[TradeoffCurve],
) -> Result<()> {
    let mut w = csv::Writer::from_path(csv_path).map_err(csv_err)?;
    w.write_record([
        "detector",
        "tau",
        "t_r",
        "t_r_stderr",
        "arl_censored",
        "d_w",
        "d_w_stderr",
        "delay_retained",
        "false_alarm_rate",
        "recovery_pct",
        "recovery_stderr",
    ])
    .map_err(csv_err)?;
    for curve in curves {
        for p in &curve.points {
            w.write_record([
                curve.detector.clone(),
                fmt(p.tau),
                fmt(p.t_r),
                fmt(p.t_r_stderr),
                p.arl_censored.to_string(),
                fmt(p.d_w),
                fmt(p.d_w_stderr),
                p.delay_retained.to_string(),
                fmt(p.false_alarm_rate),
                p.recovery_pct.map(fmt).unwrap_or_default(),
                p.recovery_stderr.map(fmt).unwrap_or_default(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    write_sidecar(csv_path, config, curves)?;
    Ok(())
}

/// Write recovery-study results as CSV plus the JSON sidecar.
pub fn write_recovery(
    csv_path: &Path,
    config: &ExperimentConfig,
    results: &[RecoveryResult],
) -> Result<()> {
    let mut w = csv::Writer::from_path(csv_path).map_err(csv_err)?;
    w.write_record([
        "detector",
        "tau",
        "achieved_t_r",
        "recovery_pct",
        "recovery_stderr",
        "d_w",
        "d_w_stderr",
    ])
    .map_err(csv_err)?;
    for r in results {
        w.write_record([
            r.detector.clone(),
            fmt(r.tau),
            fmt(r.achieved_t_r),
            fmt(r.recovery_pct),
            fmt(r.recovery_stderr),
            fmt(r.delay.d_w),
            fmt(r.delay.stderr),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    write_sidecar(csv_path, config, results)?;
    Ok(())
}

fn write_sidecar<T: Serialize + ?Sized>(
    csv_path: &Path,
    config: &ExperimentConfig,
    data: &T,
) -> Result<()> {
    #[derive(Serialize)]
    struct Sidecar<'a, T: ?Sized> {
        config_hash: String,
        master_seed: u64,
        config: &'a ExperimentConfig,
        results: &'a T,
    }
    let sidecar = Sidecar {
        config_hash: config.hash(),
        master_seed: config.experiment.master_seed,
        config,
        results: data,
    };
    let json = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(csv_path.with_extension("json"), json + "\n")?;
    Ok(())
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
