//! Dev utility: scan desk-scale parameters for the matrix-design ordering.

use sparsecd::harness::{
    DetectorSpec, DetectorVariant, ExperimentConfig, Harness, MatrixSpec, ScenarioSpec,
    SignalSpec, SupportSpec, SupportTag,
};

fn run(
    m: usize,
    n: usize,
    k: usize,
    snr: f64,
    target: f64,
    seed: u64,
    trials: usize,
) {
    println!("-- M={m} N={n} K={k} snr={snr} T_r={target} seed={seed}");
    for spec_m in [
        MatrixSpec::SicPovm {
            dim: m,
            cols: n,
            fiducial_file: None,
        },
        MatrixSpec::DftRows { m, n },
        MatrixSpec::Gaussian { m, n },
        MatrixSpec::Bernoulli { m, n },
    ] {
        let mut cfg = ExperimentConfig {
            scenario: Some(ScenarioSpec {
                m,
                n,
                k,
                support: SupportSpec::Tag(SupportTag::Random),
                signal: SignalSpec::Snr { snr_db: snr },
                noise_variance: 1.0,
            }),
            matrix: Some(spec_m.clone()),
            detectors: vec![],
            experiment: Default::default(),
            recovery: None,
            ra: None,
        };
        cfg.experiment.master_seed = seed;
        cfg.experiment.horizon = 200_000;
        cfg.experiment.trials = trials;
        let h = Harness::from_config(&cfg).unwrap();
        let s = DetectorSpec {
            variant: DetectorVariant::Aggregate,
            threshold: 1.0,
            k_max: None,
        };
        let tau = match h.calibrate_tau(s, target, 0.08, 500, "probe") {
            Ok(t) => t,
            Err(e) => {
                println!("   {:?}: calibration failed: {e}", spec_m);
                continue;
            }
        };
        let d = h.estimate_delay(s, tau, trials, "probe", 0).unwrap();
        println!(
            "   {:<28} alpha {:.4}  D_w {:7.2} ± {:.2}",
            format!("{spec_m:?}").chars().take(28).collect::<String>(),
            h.matrix.coherence(),
            d.d_w,
            d.stderr
        );
    }
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match args.first().map(|s| s.as_str()) {
        Some("a") => run(31, 50, 5, -10.0, 1000.0, 42, 800),
        Some("b") => run(31, 120, 3, -10.0, 1000.0, 42, 800),
        Some("c") => run(31, 50, 3, -10.0, 5000.0, 42, 800),
        Some("d") => run(31, 50, 3, -6.0, 1000.0, 42, 800),
        Some("e") => run(31, 120, 5, -10.0, 1000.0, 42, 800),
        Some("f") => run(31, 50, 3, -10.0, 1000.0, 43, 800),
        _ => run(31, 50, 3, -10.0, 1000.0, 42, 800),
    }
}
