//! Closed-form bit error rates and their Monte Carlo counterparts.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{apply_channel, db_to_linear, ChannelModel};
use crate::error::{Error, Result};
use crate::modem::{build_scheme, map_bits, ModulationScheme, SchemeId};
use crate::seed;

/// Gaussian tail probability, `0.5 * erfc(x / sqrt(2))`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Expected number of bit errors per symbol on one Gray-labelled PAM axis
/// with unit-spaced-by-`2*scale` levels and per-component noise `sigma`.
///
/// Exact for the nearest-level slicer: sums, over every transmitted and
/// decided level, the Hamming distance of their labels times the
/// probability that the noise lands in the decided level's region.
fn pam_bit_errors(levels: usize, scale: f64, sigma: f64) -> f64 {
    if levels < 2 {
        return 0.0;
    }
    let gray = |n: usize| n ^ (n >> 1);
    let mut total = 0.0;
    for sent in 0..levels {
        for decided in 0..levels {
            let hamming = (gray(sent) ^ gray(decided)).count_ones();
            if hamming == 0 {
                continue;
            }
            // decision region of level `decided`, offset from the transmitted
            // level, in units of `scale`; level index grows downwards
            let offset = 2.0 * (sent as f64 - decided as f64);
            let upper = if decided == 0 { f64::INFINITY } else { (offset + 1.0) * scale };
            let lower = if decided == levels - 1 { f64::NEG_INFINITY } else { (offset - 1.0) * scale };
            total += hamming as f64 * gaussian_mass(lower / sigma, upper / sigma);
        }
    }
    total / levels as f64
}

/// P(lo < N < hi) for standard normal N, evaluated on whichever tail avoids
/// cancellation.
fn gaussian_mass(lo: f64, hi: f64) -> f64 {
    if lo >= 0.0 {
        q_function(lo) - q_function(hi)
    } else if hi <= 0.0 {
        q_function(-hi) - q_function(-lo)
    } else {
        1.0 - q_function(-lo) - q_function(hi)
    }
}

/// Bit error probability of `scheme` over AWGN at linear Eb/N0 `ebn0_lin`.
pub fn theoretical_ber_linear(scheme: SchemeId, ebn0_lin: f64) -> Result<f64> {
    let k = scheme.bits_per_symbol();
    if k == 0 {
        return Err(Error::NoTxScheme);
    }
    if ebn0_lin == f64::INFINITY {
        return Ok(0.0);
    }
    if !(ebn0_lin > 0.0) {
        return Ok(0.5);
    }
    let (li, lq) = scheme.grid();
    let raw_energy = ((li * li - 1) + (lq * lq - 1)) as f64 / 3.0;
    let scale = 1.0 / raw_energy.sqrt();
    let sigma = (1.0 / (2.0 * k as f64 * ebn0_lin)).sqrt();
    let errors = pam_bit_errors(li, scale, sigma) + pam_bit_errors(lq, scale, sigma);
    Ok(errors / k as f64)
}

/// Bit error probability over AWGN with coherent hard decisions and Gray
/// labels.
///
/// Evaluated exactly per axis: a rectangular Gray constellation decomposes
/// into two independent Gray PAM slicers. For BPSK and QPSK this is
/// `Q(sqrt(2 Eb/N0))`; for square QAM it converges to [`approx_ber`] once
/// errors beyond the nearest neighbour become negligible.
pub fn theoretical_ber(scheme: SchemeId, ebn0_db: f64) -> Result<f64> {
    theoretical_ber_linear(scheme, db_to_linear(ebn0_db))
}

/// The nearest-neighbour approximation
/// `(4/k)(1 - 1/sqrt(M)) Q(sqrt(3k/(M-1) Eb/N0))`, generalised to
/// rectangular `I x J` grids as
/// `(2(1-1/I) + 2(1-1/J))/k * Q(sqrt(6k/(I^2+J^2-2) Eb/N0))`.
pub fn approx_ber(scheme: SchemeId, ebn0_db: f64) -> Result<f64> {
    let k = scheme.bits_per_symbol();
    if k == 0 {
        return Err(Error::NoTxScheme);
    }
    let g = db_to_linear(ebn0_db);
    if matches!(scheme, SchemeId::Bpsk | SchemeId::Qpsk) {
        return Ok(q_function((2.0 * g).sqrt()));
    }
    let (i, j) = scheme.grid();
    let (i, j) = (i as f64, j as f64);
    let neighbours = 2.0 * (1.0 - 1.0 / i) + 2.0 * (1.0 - 1.0 / j);
    let arg = 6.0 * k as f64 / (i * i + j * j - 2.0) * g;
    Ok(neighbours / k as f64 * q_function(arg.sqrt()))
}

/// Eb/N0 (dB) at which `scheme` reaches `target_ber`, by bisection.
/// Returns `None` if the target lies outside `[-30, 60]` dB.
pub fn required_ebn0_db(scheme: SchemeId, target_ber: f64) -> Option<f64> {
    let ber = |db: f64| theoretical_ber(scheme, db).ok();
    let (mut lo, mut hi) = (-30.0, 60.0);
    if ber(lo)? <= target_ber {
        return Some(lo);
    }
    if ber(hi)? > target_ber {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ber(mid)? <= target_ber {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Some(hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BerEstimate {
    pub bit_errors: u64,
    pub bits_total: u64,
    pub ber: f64,
    pub ci95_halfwidth: f64,
}

impl BerEstimate {
    pub fn new(bit_errors: u64, bits_total: u64) -> Self {
        let ber = if bits_total == 0 { 0.0 } else { bit_errors as f64 / bits_total as f64 };
        let ci95_halfwidth = if bits_total == 0 {
            0.0
        } else {
            1.96 * (ber * (1.0 - ber) / bits_total as f64).sqrt()
        };
        BerEstimate {
            bit_errors,
            bits_total,
            ber,
            ci95_halfwidth,
        }
    }

    /// Binomial standard deviation of an estimate around probability `p`.
    pub fn sigma_at(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.bits_total as f64).sqrt()
    }
}

const CHUNK_SYMBOLS: usize = 1 << 16;

/// Counts bit errors on `symbols` random symbols of `scheme` sent over `model`.
pub(crate) fn count_errors(
    scheme: &ModulationScheme,
    model: &ChannelModel,
    symbols: u64,
    seed: u64,
) -> Result<u64> {
    let k = scheme.bits_per_symbol();
    if k == 0 {
        return Err(Error::NoTxScheme);
    }
    let mut errors = 0u64;
    let mut done = 0u64;
    let mut chunk = 0u64;
    let mut bits = Vec::with_capacity(CHUNK_SYMBOLS * k);
    while done < symbols {
        let n = (symbols - done).min(CHUNK_SYMBOLS as u64) as usize;
        let mut rng = seed::rng(seed::derive(seed, &[chunk, 0]));
        bits.clear();
        bits.extend((0..n * k).map(|_| rng.random::<bool>() as u8));
        let tx = map_bits(&bits, scheme)?;
        let rx = apply_channel(&tx, model, k, seed::derive(seed, &[chunk, 1]))?;
        for (sym, sent) in rx.symbols.iter().zip(bits.chunks_exact(k)) {
            let label = scheme.nearest_label(*sym);
            let sent = sent.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
            errors += (label ^ sent).count_ones() as u64;
        }
        done += n as u64;
        chunk += 1;
    }
    Ok(errors)
}

/// Monte Carlo BER over AWGN: random bits, map, noise, demap, compare.
pub fn measure_ber(scheme: SchemeId, ebn0_db: f64, bits_total: u64, seed: u64) -> Result<BerEstimate> {
    measure_ber_with(scheme, &ChannelModel::awgn(ebn0_db), bits_total, seed)
}

pub fn measure_ber_with(
    scheme: SchemeId,
    model: &ChannelModel,
    bits_total: u64,
    seed: u64,
) -> Result<BerEstimate> {
    let k = scheme.bits_per_symbol() as u64;
    if k == 0 {
        return Err(Error::NoTxScheme);
    }
    if bits_total < k || bits_total % k != 0 {
        return Err(Error::InvalidLength {
            scheme,
            bits: bits_total,
            reason: "must be a nonzero multiple of the bits per symbol",
        });
    }
    let modem = build_scheme(scheme);
    let errors = count_errors(&modem, model, bits_total / k, seed)?;
    Ok(BerEstimate::new(errors, bits_total))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub ebn0_db: f64,
    pub estimate: BerEstimate,
    pub theory: f64,
}

/// Measured and closed-form BER at each grid point, in grid order.
pub fn ber_sweep(scheme: SchemeId, grid: &[f64], bits_per_point: u64, seed: u64) -> Result<Vec<SweepPoint>> {
    if grid.is_empty() {
        return Err(Error::InvalidRange("Eb/N0 grid is empty".into()));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidRange("Eb/N0 grid must be strictly ascending".into()));
    }
    // validate once so that no partial output is produced
    measure_ber_with(scheme, &ChannelModel::noiseless(), bits_per_point, seed)?;
    grid.par_iter()
        .enumerate()
        .map(|(i, &db)| {
            let point_seed = seed::derive(seed, &[scheme.wire_id() as u64, i as u64]);
            Ok(SweepPoint {
                ebn0_db: db,
                estimate: measure_ber(scheme, db, bits_per_point, point_seed)?,
                theory: theoretical_ber(scheme, db)?,
            })
        })
        .collect()
}
