//! Quickest change detection of sparse signals under compressive
//! measurements.
//!
//! Pre-change observations are pure complex Gaussian noise; post-change
//! observations are noisy linear measurements `A x[t] + n[t]` of a sparse
//! signal with a fixed unknown support. The crate provides:
//!
//! - the generative model and SNR bookkeeping ([`model`]),
//! - low-coherence sensing matrix constructions: SIC-POVM orbits, mutually
//!   unbiased bases, approximate MUBs, Gold codes and random ensembles
//!   ([`matrices`]),
//! - decision-statistic distributions and log-likelihood ratios
//!   ([`statistics`]),
//! - the CUSUM detector family, including stochastic-gradient parameter
//!   adaptation and a parallel-over-sparsity wrapper ([`detectors`]),
//! - orthogonal matching pursuit for support recovery ([`recovery`]),
//! - a Monte Carlo harness estimating average run length and worst-case
//!   detection delay tradeoff curves, plus the massive-random-access
//!   experiment ([`harness`]).

pub mod detectors;
pub mod error;
pub mod gof;
pub mod harness;
pub mod linalg;
pub mod matrices;
pub mod model;
pub mod recovery;
pub mod seeding;
pub mod statistics;

pub use error::{Error, Result};
