//! Decision statistics and their pre/post-change distribution models.
//!
//! Post-change distributions generally depend on the unknown support,
//! variances and sparsity. The models here follow the worst-case-KL
//! principle: whatever is unknown is replaced by the value that brings the
//! post-change pdf closest to the pre-change pdf (mutual coherence enters
//! through the variance inflation terms, unknown variances through their
//! lower bound). For a unitary matrix (α = 0) — and for the per-entry
//! correlation model of a full SIC-POVM (α = 1/√(M+1)) — the approximations
//! are exact.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, C64};
use crate::matrices::SensingMatrix;
use crate::model::VarianceBounds;

/// Signal variance knowledge: exactly known common variance, or bounds only.
/// Detection always plugs in the worst case (known value, or σ²_min).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalVariance {
    Known(f64),
    Bounded(VarianceBounds),
}

impl SignalVariance {
    /// The variance value detection should assume.
    pub fn worst_case(&self) -> f64 {
        match self {
            SignalVariance::Known(v) => *v,
            SignalVariance::Bounded(b) => b.sigma_min_sq,
        }
    }

    pub fn is_known(&self) -> bool {
        matches!(self, SignalVariance::Known(_))
    }
}

// ---------------------------------------------------------------------------
// Vector Gaussian model (Ideal / Optimal CUSUM)
// ---------------------------------------------------------------------------

/// Zero-mean complex Gaussian vector model with a cached Cholesky factor and
/// log-determinant.
#[derive(Debug, Clone)]
pub struct GaussianVecModel {
    covariance: Array2<C64>,
    chol: Array2<C64>,
    log_det: f64,
}

impl GaussianVecModel {
    pub fn new(covariance: Array2<C64>) -> Result<Self> {
        let chol = linalg::cholesky(&covariance.view())?;
        let log_det = 2.0 * (0..chol.nrows()).map(|i| chol[[i, i]].re.ln()).sum::<f64>();
        Ok(Self {
            covariance,
            chol,
            log_det,
        })
    }

    pub fn dim(&self) -> usize {
        self.covariance.nrows()
    }

    pub fn covariance(&self) -> &Array2<C64> {
        &self.covariance
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// `y* C⁻¹ y = ‖L⁻¹ y‖²`.
    pub fn quad_form(&self, y: &ArrayView1<C64>) -> f64 {
        let z = linalg::solve_lower(&self.chol.view(), y);
        z.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Log density of the circular complex Gaussian.
    pub fn log_pdf(&self, y: &ArrayView1<C64>) -> f64 {
        -self.quad_form(y) - self.log_det - self.dim() as f64 * std::f64::consts::PI.ln()
    }

    /// KL divergence `D(self ‖ other)` between two zero-mean complex
    /// Gaussians: `tr(C_o⁻¹ C_s) − M − ln det(C_o⁻¹ C_s)`.
    pub fn kl_divergence(&self, other: &GaussianVecModel) -> f64 {
        let m = self.dim();
        let mut trace = 0.0;
        for j in 0..m {
            let col = self.covariance.column(j).to_owned();
            let z = linalg::solve_lower(&other.chol.view(), &col.view());
            let x = linalg::solve_lower_adjoint(&other.chol.view(), &z.view());
            trace += x[j].re;
        }
        trace - m as f64 - (self.log_det - other.log_det)
    }
}

/// Post-change observation covariance `A_S C_x A_S* + σ_n² I`.
pub fn post_change_covariance(
    a: &SensingMatrix,
    support: &[usize],
    signal_variances: &[f64],
    sigma_n_sq: f64,
) -> Result<Array2<C64>> {
    if support.len() != signal_variances.len() {
        return Err(Error::Config(
            "support and variance lengths differ".into(),
        ));
    }
    let m = a.m();
    let mut cov = Array2::<C64>::zeros((m, m));
    for (&col, &var) in support.iter().zip(signal_variances) {
        let ac = a.data().column(col);
        for i in 0..m {
            for j in 0..m {
                cov[[i, j]] += ac[i] * ac[j].conj() * var;
            }
        }
    }
    for i in 0..m {
        cov[[i, i]] += C64::new(sigma_n_sq, 0.0);
    }
    Ok(cov)
}

/// Noise-only covariance `σ_n² I`.
pub fn noise_covariance(m: usize, sigma_n_sq: f64) -> Array2<C64> {
    Array2::from_shape_fn((m, m), |(i, j)| {
        C64::new(if i == j { sigma_n_sq } else { 0.0 }, 0.0)
    })
}

/// Log-likelihood ratio between two zero-mean complex Gaussian vector
/// models: `y*(C₀⁻¹ − C₁⁻¹)y + ln det C₀ − ln det C₁`.
pub fn llr_gaussian_vec(
    y: &ArrayView1<C64>,
    model0: &GaussianVecModel,
    model1: &GaussianVecModel,
) -> f64 {
    model0.quad_form(y) - model1.quad_form(y) + model0.log_det() - model1.log_det()
}

// ---------------------------------------------------------------------------
// Correlation vector
// ---------------------------------------------------------------------------

/// Correlation vector `g = A* y`, the sufficient statistic for full-rank A.
pub fn correlate(a: &SensingMatrix, y: &ArrayView1<C64>) -> Array1<C64> {
    correlate_with_adjoint(&linalg::adjoint(&a.data().view()).view(), y)
}

/// `g = (A*) y` given a precomputed adjoint with contiguous rows; the hot
/// path for detectors that evaluate g every step.
pub fn correlate_with_adjoint(at: &ArrayView2<C64>, y: &ArrayView1<C64>) -> Array1<C64> {
    let n = at.nrows();
    Array1::from_shape_fn(n, |k| {
        let row = at.row(k);
        let mut acc = C64::new(0.0, 0.0);
        for (a, b) in row.iter().zip(y.iter()) {
            acc += a * b;
        }
        acc
    })
}

// ---------------------------------------------------------------------------
// Aggregate (per-entry) model
// ---------------------------------------------------------------------------

/// Per-entry correlation models: pre-change `CN(0, var0)`; post-change
/// `CN(0, var1_in)` for in-support entries and `CN(0, var1_out)` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateEntryModel {
    pub var0: f64,
    pub var1_in: f64,
    pub var1_out: f64,
}

impl AggregateEntryModel {
    /// Per-entry in-support LLR `log f̃₁(g) − log f₀(g)`.
    #[inline]
    pub fn llr_in(&self, g: C64) -> f64 {
        g.norm_sqr() * (1.0 / self.var0 - 1.0 / self.var1_in) + (self.var0 / self.var1_in).ln()
    }

    #[inline]
    pub fn llr_in_sq(&self, g_sq: f64) -> f64 {
        g_sq * (1.0 / self.var0 - 1.0 / self.var1_in) + (self.var0 / self.var1_in).ln()
    }

    /// Out-of-support LLR (used by exactness tests, not by detection).
    #[inline]
    pub fn llr_out(&self, g: C64) -> f64 {
        g.norm_sqr() * (1.0 / self.var0 - 1.0 / self.var1_out) + (self.var0 / self.var1_out).ln()
    }
}

/// Variance inflation of the per-entry correlation models:
/// `var1_out = σ_n² + Kα²σ²` and `var1_in = var1_out + (1−α²)σ²`, with σ²
/// the known common variance or its lower bound.
pub fn aggregate_model(
    alpha: f64,
    k: usize,
    signal_variance: SignalVariance,
    sigma_n_sq: f64,
) -> AggregateEntryModel {
    let s = signal_variance.worst_case();
    let a2 = alpha * alpha;
    let var1_out = sigma_n_sq + k as f64 * a2 * s;
    AggregateEntryModel {
        var0: sigma_n_sq,
        var1_in: var1_out + (1.0 - a2) * s,
        var1_out,
    }
}

// ---------------------------------------------------------------------------
// Energy model
// ---------------------------------------------------------------------------

/// Gaussian approximations for the energy statistic `e[t] = ‖y‖²`:
/// pre-change `N(Mσ_n², Mσ_n⁴)`, post-change `N(mu1, var1)` from the
/// Gershgorin eigenvalue floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    pub mu0: f64,
    pub var0: f64,
    pub mu1: f64,
    pub var1: f64,
    pub phi_min: f64,
}

impl EnergyModel {
    #[inline]
    pub fn llr(&self, e: f64) -> f64 {
        gaussian_llr(e, self.mu1, self.var1, self.mu0, self.var0)
    }
}

/// Energy model under worst-case eigenvalues. With known common variance the
/// mean uses the exact trace identity `Kσ_x² + Mσ_n²`; with bounds the mean
/// degrades to the clamped floor `Kφ_min + Mσ_n²`. The variance always uses
/// `φ_min = max{0, σ²(1 − α(K−1))}`.
pub fn energy_model(
    alpha: f64,
    k: usize,
    signal_variance: SignalVariance,
    sigma_n_sq: f64,
    m: usize,
) -> EnergyModel {
    let s = signal_variance.worst_case();
    let phi_min = (s * (1.0 - alpha * (k as f64 - 1.0))).max(0.0);
    let kf = k as f64;
    let mf = m as f64;
    let mu1 = match signal_variance {
        SignalVariance::Known(sx) => kf * sx + mf * sigma_n_sq,
        SignalVariance::Bounded(_) => kf * phi_min + mf * sigma_n_sq,
    };
    EnergyModel {
        mu0: mf * sigma_n_sq,
        var0: mf * sigma_n_sq * sigma_n_sq,
        mu1,
        var1: kf * phi_min * phi_min + 2.0 * sigma_n_sq * kf * phi_min
            + mf * sigma_n_sq * sigma_n_sq,
        phi_min,
    }
}

/// Exact energy moments from the true eigenvalues `φ_i` of `A_S C_x A_S*`:
/// mean `Σφ_i + Mσ_n²`, variance `Σφ_i² + 2σ_n²Σφ_i + Mσ_n⁴`.
pub fn energy_exact_moments(phis: &[f64], m: usize, sigma_n_sq: f64) -> (f64, f64) {
    let s1: f64 = phis.iter().sum();
    let s2: f64 = phis.iter().map(|p| p * p).sum();
    let mf = m as f64;
    (
        s1 + mf * sigma_n_sq,
        s2 + 2.0 * sigma_n_sq * s1 + mf * sigma_n_sq * sigma_n_sq,
    )
}

// ---------------------------------------------------------------------------
// Correlator (max squared correlation) model
// ---------------------------------------------------------------------------

/// Models for `c[t] = ‖g[t]‖²_∞`: the max of N per-entry squared magnitudes,
/// exponential with rate `λ_n` pre-change; post-change a max over K entries
/// at rate `λ_S` and N−K at rate `λ_0` (entries treated as independent).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorModel {
    pub lambda_n: f64,
    pub lambda_0: f64,
    pub lambda_s: f64,
    pub n: usize,
    pub k: usize,
}

/// Stable `ln(1 − e^{−x})` for x > 0.
#[inline]
fn ln_one_minus_exp_neg(x: f64) -> f64 {
    if x > std::f64::consts::LN_2 {
        (-(-x).exp()).ln_1p()
    } else {
        (-(-x).exp_m1()).ln()
    }
}

#[inline]
fn log_sum_exp(a: f64, b: f64) -> f64 {
    let hi = a.max(b);
    let lo = a.min(b);
    if lo == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    }
}

impl CorrelatorModel {
    fn clamp(c: f64) -> f64 {
        c.max(f64::MIN_POSITIVE)
    }

    /// Pre-change log pdf: max of N i.i.d. Exp(λ_n) variables.
    pub fn log_f0(&self, c: f64) -> f64 {
        let c = Self::clamp(c);
        (self.n as f64).ln()
            + (self.n as f64 - 1.0) * ln_one_minus_exp_neg(self.lambda_n * c)
            + self.lambda_n.ln()
            - self.lambda_n * c
    }

    /// Approximate post-change log pdf: two-term density of the max of K
    /// Exp(λ_S) and N−K Exp(λ_0) variables.
    pub fn log_f1(&self, c: f64) -> f64 {
        let c = Self::clamp(c);
        let (nf, kf) = (self.n as f64, self.k as f64);
        let ls = self.lambda_s;
        let l0 = self.lambda_0;
        let t1 = kf.ln()
            + (kf - 1.0) * ln_one_minus_exp_neg(ls * c)
            + ls.ln()
            - ls * c
            + (nf - kf) * ln_one_minus_exp_neg(l0 * c);
        if self.n == self.k {
            return t1;
        }
        let t2 = (nf - kf).ln()
            + (nf - kf - 1.0) * ln_one_minus_exp_neg(l0 * c)
            + l0.ln()
            - l0 * c
            + kf * ln_one_minus_exp_neg(ls * c);
        log_sum_exp(t1, t2)
    }

    pub fn llr(&self, c: f64) -> Result<f64> {
        if c < 0.0 {
            return Err(Error::InvalidInput(format!(
                "correlator statistic must be >= 0, got {c}"
            )));
        }
        Ok(self.log_f1(c) - self.log_f0(c))
    }

    /// Exact post-change cdf under independence:
    /// `(1−e^{−λ_S c})^K (1−e^{−λ_0 c})^{N−K}`.
    pub fn post_cdf(&self, c: f64) -> f64 {
        if c <= 0.0 {
            return 0.0;
        }
        (1.0 - (-self.lambda_s * c).exp()).powi(self.k as i32)
            * (1.0 - (-self.lambda_0 * c).exp()).powi((self.n - self.k) as i32)
    }

    pub fn pre_cdf(&self, c: f64) -> f64 {
        if c <= 0.0 {
            return 0.0;
        }
        (1.0 - (-self.lambda_n * c).exp()).powi(self.n as i32)
    }
}

/// Correlator rates under the coherence approximation:
/// `λ₀ = 1/(σ_n² + Kα²σ²)`, `λ_S = 1/(σ_n² + Kα²σ² + (1−α²)σ²)`.
pub fn correlator_model(
    alpha: f64,
    k: usize,
    n: usize,
    signal_variance: SignalVariance,
    sigma_n_sq: f64,
) -> Result<CorrelatorModel> {
    if k == 0 || n < k {
        return Err(Error::InvalidInput(format!(
            "correlator model needs N >= K >= 1, got N={n}, K={k}"
        )));
    }
    let s = signal_variance.worst_case();
    let a2 = alpha * alpha;
    let base = sigma_n_sq + k as f64 * a2 * s;
    Ok(CorrelatorModel {
        lambda_n: 1.0 / sigma_n_sq,
        lambda_0: 1.0 / base,
        lambda_s: 1.0 / (base + (1.0 - a2) * s),
        n,
        k,
    })
}

// ---------------------------------------------------------------------------
// Partial support estimation (PSE) model
// ---------------------------------------------------------------------------

/// Gaussian approximations for the projection statistic
/// `p[t] = ‖P_Ŝ y‖²/σ_n²`: pre-change `N(K_p, 2K_p)`, post-change
/// `N(K_p + μ̃, 2(K_p + 2μ̃))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseModel {
    pub k_p: usize,
    pub noncentrality: f64,
}

impl PseModel {
    pub fn mu0(&self) -> f64 {
        self.k_p as f64
    }

    pub fn var0(&self) -> f64 {
        2.0 * self.k_p as f64
    }

    pub fn mu1(&self) -> f64 {
        self.k_p as f64 + self.noncentrality
    }

    pub fn var1(&self) -> f64 {
        2.0 * (self.k_p as f64 + 2.0 * self.noncentrality)
    }

    pub fn llr(&self, p: f64) -> f64 {
        gaussian_llr(p, self.mu1(), self.var1(), self.mu0(), self.var0())
    }
}

/// Noncentrality `μ̃ = (M K_p / (N K)) (1 + (K−K_p)/M) E‖x‖² / σ_n²` for a
/// row-orthonormalized sensing matrix.
pub fn pse_model(
    m: usize,
    n: usize,
    k: usize,
    k_p: usize,
    expected_signal_energy: f64,
    sigma_n_sq: f64,
) -> Result<PseModel> {
    if k_p == 0 || k_p > k {
        return Err(Error::InvalidInput(format!(
            "need 1 <= K_p <= K, got K_p={k_p}, K={k}"
        )));
    }
    let (mf, nf, kf, kpf) = (m as f64, n as f64, k as f64, k_p as f64);
    let noncentrality =
        (mf * kpf / (nf * kf)) * (1.0 + (kf - kpf) / mf) * expected_signal_energy / sigma_n_sq;
    Ok(PseModel { k_p, noncentrality })
}

/// Projection statistic `‖P_Ŝ y‖² / σ_n²` with `P_Ŝ` the orthogonal projector
/// onto the span of the selected columns.
pub fn pse_statistic(
    a: &ArrayView2<C64>,
    y: &ArrayView1<C64>,
    partial_support: &[usize],
    sigma_n_sq: f64,
) -> Result<f64> {
    if partial_support.is_empty() {
        return Err(Error::InvalidInput("empty partial support".into()));
    }
    let m = a.nrows();
    let sub = Array2::from_shape_fn((m, partial_support.len()), |(i, j)| {
        a[[i, partial_support[j]]]
    });
    let (q, _r) = linalg::thin_qr(&sub.view())?;
    let proj = linalg::adjoint(&q.view()).dot(y);
    Ok(proj.iter().map(|z| z.norm_sqr()).sum::<f64>() / sigma_n_sq)
}

// ---------------------------------------------------------------------------
// Eigenvalue bounds and exact energy cdf (exactness-test views)
// ---------------------------------------------------------------------------

/// Gershgorin enclosure of the eigenvalues of `A_S C_x A_S*`:
/// interval i is `σ_i² ± α Σ_{ℓ≠i} √(σ_i² σ_ℓ²)`.
pub fn gershgorin_bounds(signal_variances: &[f64], alpha: f64) -> Vec<(f64, f64)> {
    let k = signal_variances.len();
    (0..k)
        .map(|i| {
            let si = signal_variances[i];
            let radius: f64 = (0..k)
                .filter(|&l| l != i)
                .map(|l| (si * signal_variances[l]).sqrt())
                .sum::<f64>()
                * alpha;
            (si - radius, si + radius)
        })
        .collect()
}

/// CDF of a sum of two independent Erlang variables with integer shapes
/// (k1, rate1) and (k2, rate2); the exact exponential-sum view of the energy
/// statistic for uniform signal variances. Computed by Simpson quadrature of
/// `∫ f₁(u) F₂(x−u) du`.
pub fn erlang_sum_cdf(k1: usize, rate1: f64, k2: usize, rate2: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if k1 == 0 {
        return erlang_cdf(k2, rate2, x);
    }
    if k2 == 0 {
        return erlang_cdf(k1, rate1, x);
    }
    let steps = 800;
    let h = x / steps as f64;
    let integrand = |u: f64| erlang_pdf(k1, rate1, u) * erlang_cdf(k2, rate2, x - u);
    let mut acc = integrand(0.0) + integrand(x);
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * integrand(i as f64 * h);
    }
    (acc * h / 3.0).clamp(0.0, 1.0)
}

fn erlang_pdf(k: usize, rate: f64, x: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    let kf = k as f64;
    let ln_fact: f64 = (1..k).map(|j| (j as f64).ln()).sum();
    (kf * rate.ln() + (kf - 1.0) * x.max(f64::MIN_POSITIVE).ln() - rate * x - ln_fact).exp()
}

fn erlang_cdf(k: usize, rate: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    // 1 − e^{−rx} Σ_{j<k} (rx)^j / j!
    let rx = rate * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 1..k {
        term *= rx / j as f64;
        sum += term;
    }
    1.0 - (-rx).exp() * sum
}

// ---------------------------------------------------------------------------
// Parameterized families for SGD adaptation
// ---------------------------------------------------------------------------

/// Post-change pdf families with one unknown scalar θ, used by the
/// stochastic-gradient CUSUM variants. The statistic argument `d` is
/// `|g_i|²` (aggregate), `e` (energy) or `c` (correlator).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SgdFamily {
    /// θ = α²σ_sum² + (1−α²)σ_i²; post-change `CN(0, σ_n² + θ)`.
    Aggregate { sigma_n_sq: f64 },
    /// Known sparsity: θ = φ_min; moments `Kθ + Mσ_n²`, `Kθ² + 2σ_n²Kθ + Mσ_n⁴`.
    EnergyKnownK { k: usize, m: usize, sigma_n_sq: f64 },
    /// Unknown sparsity: θ = Kφ_min; `Kφ_min²` approximated by `θσ_min²`.
    EnergyUnknownK {
        sigma_min_sq: f64,
        m: usize,
        sigma_n_sq: f64,
    },
    /// θ = σ_i² inside λ_S; λ₀ fixed at the σ_min² approximation.
    Correlator {
        alpha: f64,
        k: usize,
        n: usize,
        sigma_min_sq: f64,
        sigma_n_sq: f64,
    },
}

impl SgdFamily {
    /// LLR of statistic `d` under the post-change pdf parameterized by θ.
    pub fn llr(&self, d: f64, theta: f64) -> f64 {
        let theta = theta.max(0.0);
        match *self {
            SgdFamily::Aggregate { sigma_n_sq } => {
                let v1 = sigma_n_sq + theta;
                d * (1.0 / sigma_n_sq - 1.0 / v1) + (sigma_n_sq / v1).ln()
            }
            SgdFamily::EnergyKnownK { k, m, sigma_n_sq } => {
                let (kf, mf) = (k as f64, m as f64);
                let mu = kf * theta + mf * sigma_n_sq;
                let var =
                    kf * theta * theta + 2.0 * sigma_n_sq * kf * theta + mf * sigma_n_sq * sigma_n_sq;
                gaussian_llr(d, mu, var, mf * sigma_n_sq, mf * sigma_n_sq * sigma_n_sq)
            }
            SgdFamily::EnergyUnknownK {
                sigma_min_sq,
                m,
                sigma_n_sq,
            } => {
                let mf = m as f64;
                let mu = theta + mf * sigma_n_sq;
                let var =
                    sigma_min_sq * theta + 2.0 * sigma_n_sq * theta + mf * sigma_n_sq * sigma_n_sq;
                gaussian_llr(d, mu, var, mf * sigma_n_sq, mf * sigma_n_sq * sigma_n_sq)
            }
            SgdFamily::Correlator {
                alpha,
                k,
                n,
                sigma_min_sq,
                sigma_n_sq,
            } => {
                let a2 = alpha * alpha;
                let base = sigma_n_sq + k as f64 * a2 * sigma_min_sq;
                let model = CorrelatorModel {
                    lambda_n: 1.0 / sigma_n_sq,
                    lambda_0: 1.0 / base,
                    lambda_s: 1.0 / (base + (1.0 - a2) * theta.max(1e-12)),
                    n,
                    k,
                };
                model.log_f1(d) - model.log_f0(d)
            }
        }
    }
}

/// LLR between two scalar Gaussians evaluated at x.
#[inline]
pub fn gaussian_llr(x: f64, mu1: f64, var1: f64, mu0: f64, var0: f64) -> f64 {
    let d1 = x - mu1;
    let d0 = x - mu0;
    -0.5 * (var1 / var0).ln() - d1 * d1 / (2.0 * var1) + d0 * d0 / (2.0 * var0)
}
