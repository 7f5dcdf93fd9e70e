//! Dev utility: probe the detector/matrix ordering experiments at reduced
//! trial counts before pinning the acceptance tests.

use sparsecd::harness::{
    DetectorSpec, DetectorVariant, ExperimentConfig, Harness, MatrixSpec, ScenarioSpec,
    SignalSpec, SupportSpec, SupportTag,
};

fn config(matrix: MatrixSpec, signal: SignalSpec, seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        scenario: Some(ScenarioSpec {
            m: 31,
            n: 50,
            k: 3,
            support: SupportSpec::Tag(SupportTag::Random),
            signal,
            noise_variance: 1.0,
        }),
        matrix: Some(matrix),
        detectors: vec![],
        experiment: Default::default(),
        recovery: None,
        ra: None,
    };
    cfg.experiment.master_seed = seed;
    cfg.experiment.horizon = 200_000;
    cfg.experiment.nu = 20;
    cfg.experiment.trials = 1_000;
    cfg
}

fn spec(variant: DetectorVariant) -> DetectorSpec {
    DetectorSpec {
        variant,
        threshold: 1.0,
        k_max: None,
    }
}

fn main() {
    let which: String = std::env::args().nth(1).unwrap_or_default();
    let sic = MatrixSpec::SicPovm {
        dim: 31,
        cols: 50,
        fiducial_file: None,
    };

    if which.is_empty() || which == "c8" {
        for snr in [-10.0, -20.0] {
            let cfg = config(sic.clone(), SignalSpec::Snr { snr_db: snr }, 42);
            let h = Harness::from_config(&cfg).unwrap();
            println!("== C8 snr {snr} dB, target T_r 1000");
            for v in [
                DetectorVariant::Aggregate,
                DetectorVariant::Correlator,
                DetectorVariant::Energy,
            ] {
                let s = spec(v);
                let t0 = std::time::Instant::now();
                let tau = h.calibrate_tau(s, 1000.0, 0.08, 600, "probe").unwrap();
                let arl = h.estimate_arl(s, tau, 1000, "probe-arl", 0).unwrap();
                let d = h.estimate_delay(s, tau, 1000, "probe", 0).unwrap();
                println!(
                    "  {:<12} tau {:8.3}  T_r {:7.0}  D_w {:9.2} ± {:.2}   [{:.0}s]",
                    s.label(),
                    tau,
                    arl.t_r,
                    d.d_w,
                    d.stderr,
                    t0.elapsed().as_secs_f64()
                );
            }
        }
    }

    if which.is_empty() || which == "c9" {
        println!("== C9 matrix ordering at -10 dB, aggregate, target T_r 1000");
        for m in [
            sic.clone(),
            MatrixSpec::DftRows { m: 31, n: 50 },
            MatrixSpec::Gaussian { m: 31, n: 50 },
        ] {
            let cfg = config(m.clone(), SignalSpec::Snr { snr_db: -10.0 }, 42);
            let h = Harness::from_config(&cfg).unwrap();
            let s = spec(DetectorVariant::Aggregate);
            let tau = h.calibrate_tau(s, 1000.0, 0.08, 600, "probe").unwrap();
            let d = h.estimate_delay(s, tau, 1000, "probe", 0).unwrap();
            println!(
                "  {:?}: alpha {:.4}  D_w {:.2} ± {:.2}",
                m,
                h.matrix.coherence(),
                d.d_w,
                d.stderr
            );
        }
    }

    if which.is_empty() || which == "c10" {
        println!("== C10 SGD vs pdf-approx, bounds [0.1, 1.0], target T_r 1000");
        let cfg = config(
            sic.clone(),
            SignalSpec::Bounds {
                sigma_min_sq: 0.1,
                sigma_max_sq: 1.0,
            },
            42,
        );
        let h = Harness::from_config(&cfg).unwrap();
        for v in [
            DetectorVariant::Aggregate,
            DetectorVariant::SgdAggregate { a: 0.01, c: 0.05 },
        ] {
            let s = spec(v);
            let tau = h.calibrate_tau(s, 1000.0, 0.08, 600, "probe").unwrap();
            let d = h.estimate_delay(s, tau, 1000, "probe", 0).unwrap();
            println!("  {:<14} tau {:8.3} D_w {:.2} ± {:.2}", s.label(), tau, d.d_w, d.stderr);
        }
    }

    if which.is_empty() || which == "c11" {
        for snr in [-10.0, 0.0] {
            println!("== C11 recovery at T_r 5e3, snr {snr}");
            let cfg = config(sic.clone(), SignalSpec::Snr { snr_db: snr }, 42);
            let h = Harness::from_config(&cfg).unwrap();
            for v in [DetectorVariant::Aggregate, DetectorVariant::Energy] {
                let s = spec(v);
                let tau = h.calibrate_tau(s, 5_000.0, 0.1, 400, "probe").unwrap();
                let (d, rec, rse) = h
                    .estimate_delay_and_recovery(s, tau, 1000, "probe", 0)
                    .unwrap();
                println!(
                    "  {:<10} D_w {:7.2}  recovery {:5.1}% ± {:.1}",
                    s.label(),
                    d.d_w,
                    rec,
                    rse
                );
            }
        }
    }

    if which.is_empty() || which == "c12" {
        println!("== C12 parallel-k vs known-K, -10 dB, target T_r 500");
        let cfg = config(sic.clone(), SignalSpec::Snr { snr_db: -10.0 }, 42);
        let h = Harness::from_config(&cfg).unwrap();
        for (label, s) in [
            ("known-K", spec(DetectorVariant::Aggregate)),
            (
                "parallel",
                DetectorSpec {
                    variant: DetectorVariant::Aggregate,
                    threshold: 1.0,
                    k_max: Some(10),
                },
            ),
        ] {
            let tau = h.calibrate_tau(s, 500.0, 0.08, 600, "probe").unwrap();
            let d = h.estimate_delay(s, tau, 2000, "probe", 0).unwrap();
            println!("  {:<9} tau {:8.3} D_w {:.2} ± {:.2}", label, tau, d.d_w, d.stderr);
        }
    }
}
