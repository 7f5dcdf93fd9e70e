//! Bipolar Gold code families from preferred pairs of m-sequences, and the
//! zero-padded offset augmentation used by the random-access scenario.

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use super::{MatrixKind, SensingMatrix};
use crate::error::{Error, Result};
use crate::linalg::C64;

/// Built-in preferred pairs (feedback polynomial exponents).
fn builtin_pair(n: usize) -> Option<(&'static [usize], &'static [usize])> {
    match n {
        5 => Some((&[5, 2], &[5, 4, 3, 2])),
        6 => Some((&[6, 1], &[6, 5, 2, 1])),
        7 => Some((&[7, 3], &[7, 3, 2, 1])),
        _ => None,
    }
}

/// Generate one full period of the m-sequence of the degree-n feedback
/// polynomial `x^n + Σ x^e + 1` (exponents listed with n, constant term
/// implied), starting the Fibonacci LFSR from the all-ones state.
fn m_sequence(n: usize, poly: &[usize]) -> Result<Vec<u8>> {
    if n < 3 || n > 24 {
        return Err(Error::Unsupported(format!("LFSR degree {n} out of range")));
    }
    if !poly.contains(&n) || poly.iter().any(|&e| e == 0 || e > n) {
        return Err(Error::InvalidInput(format!(
            "polynomial exponents {poly:?} must include {n} and stay in 1..={n}"
        )));
    }
    // recurrence s[t+n] = s[t] + Σ_{e<n} s[t+e]; register bit p-1 holds s[t+p-1]
    let mut read_positions: Vec<usize> = vec![1];
    read_positions.extend(poly.iter().filter(|&&e| e < n).map(|&e| e + 1));
    let period = (1usize << n) - 1;
    let mut state: u32 = (1u32 << n) - 1;
    let mut seq = Vec::with_capacity(period);
    for _ in 0..period {
        seq.push((state & 1) as u8);
        let mut fb = 0u32;
        for &p in &read_positions {
            fb ^= (state >> (p - 1)) & 1;
        }
        state = (state >> 1) | (fb << (n - 1));
    }
    // a primitive polynomial returns to the initial state after one period
    if state != (1u32 << n) - 1 {
        return Err(Error::InvalidInput(format!(
            "polynomial {poly:?} is not primitive for degree {n}"
        )));
    }
    Ok(seq)
}

/// A Gold family: 2ⁿ+1 bipolar sequences of length 2ⁿ−1 with all pairwise
/// cyclic cross-correlations (and off-peak autocorrelations) bounded by
/// `bound` after unit normalization.
#[derive(Debug, Clone)]
pub struct GoldFamily {
    pub n: usize,
    /// Bipolar ±1 chips, one Vec per sequence.
    pub chips: Vec<Vec<i8>>,
    /// The normalized correlation bound r(n).
    pub bound: f64,
}

impl GoldFamily {
    pub fn sequence_length(&self) -> usize {
        (1usize << self.n) - 1
    }

    pub fn family_size(&self) -> usize {
        self.chips.len()
    }

    /// Sequences as unit-norm complex vectors (±1/√M entries).
    pub fn unit_norm_codes(&self) -> Vec<Array1<C64>> {
        let scale = 1.0 / (self.sequence_length() as f64).sqrt();
        self.chips
            .iter()
            .map(|c| Array1::from_iter(c.iter().map(|&x| C64::new(x as f64 * scale, 0.0))))
            .collect()
    }

    /// Codes for offset augmentation: cyclic shifts spaced Δ+1 apart so no
    /// two selected codes are within-Δ shifts of each other. Ordered by
    /// (sequence, shift) index; `(2ⁿ+1)·⌊M/(Δ+1)⌋` codes total.
    pub fn codes_for_offsets(&self, delta: usize) -> Result<Vec<Array1<C64>>> {
        let m = self.sequence_length();
        if delta + 1 > m {
            return Err(Error::InvalidInput(format!(
                "need Δ+1 <= sequence length, got Δ={delta}, M={m}"
            )));
        }
        let per_seq = m / (delta + 1);
        let scale = 1.0 / (m as f64).sqrt();
        let mut codes = Vec::with_capacity(self.chips.len() * per_seq);
        for chips in &self.chips {
            for s in 0..per_seq {
                let shift = s * (delta + 1);
                codes.push(Array1::from_shape_fn(m, |i| {
                    C64::new(chips[(i + shift) % m] as f64 * scale, 0.0)
                }));
            }
        }
        Ok(codes)
    }
}

/// The raw (unnormalized) integer correlation bound t(n).
fn raw_bound(n: usize) -> i64 {
    if n % 2 == 1 {
        (1i64 << ((n + 1) / 2)) + 1
    } else {
        (1i64 << ((n + 2) / 2)) + 1
    }
}

fn cyclic_corr(a: &[i8], b: &[i8], shift: usize) -> i64 {
    let m = a.len();
    let mut acc = 0i64;
    for i in 0..m {
        acc += (a[i] as i64) * (b[(i + shift) % m] as i64);
    }
    acc
}

/// Build the Gold family of degree n from a preferred pair of m-sequences
/// (built-in pairs for n ∈ {5, 6, 7}; callers may supply their own taps).
/// The family is [m1, m2, m1⊕m2, m1⊕T m2, …] and the correlation bound is
/// verified exhaustively over all pairs and shifts.
pub fn gold_family(
    n: usize,
    preferred_pair: Option<(&[usize], &[usize])>,
) -> Result<GoldFamily> {
    let (taps1, taps2) = match preferred_pair {
        Some(p) => p,
        None => builtin_pair(n).ok_or_else(|| {
            Error::Unsupported(format!(
                "no built-in preferred pair for degree {n} (have 5, 6, 7)"
            ))
        })?,
    };
    let u = m_sequence(n, taps1)?;
    let v = m_sequence(n, taps2)?;
    let m = u.len();

    let to_bipolar = |bits: &[u8]| -> Vec<i8> { bits.iter().map(|&b| 1 - 2 * (b as i8)).collect() };
    let mut chips: Vec<Vec<i8>> = Vec::with_capacity(m + 2);
    chips.push(to_bipolar(&u));
    chips.push(to_bipolar(&v));
    for k in 0..m {
        let seq: Vec<u8> = (0..m).map(|i| u[i] ^ v[(i + k) % m]).collect();
        chips.push(to_bipolar(&seq));
    }

    let t = raw_bound(n);
    let p = chips.len();
    let worst = (0..p)
        .into_par_iter()
        .map(|i| {
            let mut w = 0i64;
            for j in i..p {
                let start = if i == j { 1 } else { 0 };
                for s in start..m {
                    w = w.max(cyclic_corr(&chips[i], &chips[j], s).abs());
                }
            }
            w
        })
        .reduce(|| 0, i64::max);
    if worst > t {
        return Err(Error::InvalidInput(format!(
            "pair is not preferred for degree {n}: max correlation {worst} > bound {t}"
        )));
    }

    Ok(GoldFamily {
        n,
        chips,
        bound: t as f64 / m as f64,
    })
}

/// Acyclic cross-correlation `Σ_t conj(a[t]) b[t+lag]` over the overlap.
fn acyclic_corr(a: &[C64], b: &[C64], lag: i64) -> C64 {
    let m = a.len() as i64;
    let lo = 0.max(-lag);
    let hi = m.min(m - lag);
    let mut acc = C64::new(0.0, 0.0);
    for t in lo..hi {
        acc += a[t as usize].conj() * b[(t + lag) as usize];
    }
    acc
}

/// Augment unit-norm codes with all timing offsets up to Δ: the output is
/// an (M+Δ) × P(Δ+1) matrix whose columns are `[0_δ; a_i; 0_{Δ−δ}]` in
/// (code, offset) lexicographic order. The coherence is computed from the
/// acyclic cross-correlations of the codes at lags up to Δ, which is what
/// the zero-padded column inner products reduce to.
pub fn augment_with_offsets(
    codes: &[Array1<C64>],
    delta: usize,
    kind: MatrixKind,
) -> Result<SensingMatrix> {
    if codes.is_empty() {
        return Err(Error::InvalidInput("no codes to augment".into()));
    }
    let m = codes[0].len();
    if codes.iter().any(|c| c.len() != m) {
        return Err(Error::InvalidInput("codes have mixed lengths".into()));
    }
    let p = codes.len();
    let n_cols = p * (delta + 1);
    let mut data = Array2::<C64>::zeros((m + delta, n_cols));
    for (i, code) in codes.iter().enumerate() {
        for off in 0..=delta {
            let col = i * (delta + 1) + off;
            for t in 0..m {
                data[[t + off, col]] = code[t];
            }
        }
    }

    let slices: Vec<Vec<C64>> = codes.iter().map(|c| c.to_vec()).collect();
    let coherence = (0..p)
        .into_par_iter()
        .map(|i| {
            let mut worst = 0.0f64;
            for j in i..p {
                let lags = if i == j { 1..=(delta as i64) } else { -(delta as i64)..=(delta as i64) };
                for lag in lags {
                    let v = acyclic_corr(&slices[i], &slices[j], lag).norm();
                    if v > worst {
                        worst = v;
                    }
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    let coherence = if n_cols >= 2 { coherence } else { 0.0 };

    SensingMatrix::with_known_coherence(data, kind, coherence)
}
