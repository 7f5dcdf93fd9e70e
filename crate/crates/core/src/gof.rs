//! Goodness-of-fit and quadrature helpers used to validate the distribution
//! models against simulation.

/// Kolmogorov-Smirnov statistic of a sorted sample against a CDF.
pub fn ks_statistic_sorted<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F) -> f64 {
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        let lo = i as f64 / n;
        let hi = (i as f64 + 1.0) / n;
        d = d.max((f - lo).abs()).max((hi - f).abs());
    }
    d
}

/// Asymptotic two-sided KS p-value with Stephens' finite-sample correction.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let nf = n as f64;
    let lambda = d * (nf.sqrt() + 0.12 + 0.11 / nf.sqrt());
    // the alternating series only converges for moderate lambda; below that
    // the tail probability is 1 to double precision
    if lambda < 0.3 {
        return 1.0;
    }
    let mut p = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = 2.0 * (-1.0f64).powi(k as i32 + 1) * (-2.0 * kf * kf * lambda * lambda).exp();
        p += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

/// Composite Simpson quadrature with `steps` (rounded up to even) panels.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, steps: usize) -> f64 {
    let steps = if steps % 2 == 0 { steps } else { steps + 1 };
    let h = (b - a) / steps as f64;
    let mut acc = f(a) + f(b);
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Sample mean, variance and the standard errors of both (the SE of the
/// variance uses the fourth central moment).
pub struct MomentSummary {
    pub mean: f64,
    pub var: f64,
    pub se_mean: f64,
    pub se_var: f64,
}

pub fn moment_summary(samples: &[f64]) -> MomentSummary {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let mut m2 = 0.0;
    let mut m4 = 0.0;
    for &x in samples {
        let d = x - mean;
        m2 += d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m4 /= n;
    MomentSummary {
        mean,
        var: m2,
        se_mean: (m2 / n).sqrt(),
        se_var: ((m4 - m2 * m2).max(0.0) / n).sqrt(),
    }
}

/// Standard normal CDF via the complementary error function
/// (Abramowitz-Stegun 7.1.26 rational approximation, |err| < 1.5e-7).
pub fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * erfc_as(-x / std::f64::consts::SQRT_2)
}

fn erfc_as(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc_as(-x);
    }
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    poly * (-x * x).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_accepts_uniform_sample() {
        // deterministic stratified sample from U(0,1)
        let n = 10_000;
        let sorted: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = ks_statistic_sorted(&sorted, |x| x.clamp(0.0, 1.0));
        assert!(d < 1.0 / n as f64 + 1e-12);
        assert!(ks_pvalue(d, n) > 0.99);
    }

    #[test]
    fn ks_rejects_shifted_sample() {
        let n = 10_000;
        let sorted: Vec<f64> = (0..n).map(|i| ((i as f64 + 0.5) / n as f64).powi(2)).collect();
        let d = ks_statistic_sorted(&sorted, |x| x.clamp(0.0, 1.0));
        assert!(ks_pvalue(d, n) < 1e-6);
    }

    #[test]
    fn simpson_integrates_polynomial_exactly() {
        let got = integrate(|x| x * x * x - 2.0 * x + 1.0, -1.0, 3.0, 100);
        // antiderivative x^4/4 - x^2 + x
        let want = (81.0 / 4.0 - 9.0 + 3.0) - (0.25 - 1.0 - 1.0);
        assert!((got - want).abs() < 1e-10);
    }

    #[test]
    fn normal_cdf_reference_points() {
        assert!((standard_normal_cdf(0.0) - 0.5).abs() < 1e-7);
        assert!((standard_normal_cdf(1.96) - 0.975).abs() < 1e-3);
        assert!((standard_normal_cdf(-3.0) - 0.00135).abs() < 1e-4);
    }

    #[test]
    fn moment_summary_of_known_sample() {
        let samples: Vec<f64> = vec![1.0, 2.0, 3.0, 4.0];
        let s = moment_summary(&samples);
        assert!((s.mean - 2.5).abs() < 1e-12);
        assert!((s.var - 1.25).abs() < 1e-12);
    }
}
