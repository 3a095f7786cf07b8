//! Baseband channel: AWGN, optional block-flat Rayleigh fading, Gaussian
//! interference, and a free-space link budget mapping distance to Eb/N0.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modem::SymbolBlock;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelKind {
    #[default]
    Awgn,
    FlatRayleigh,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub kind: ChannelKind,
    /// Eb/N0 in dB; `f64::INFINITY` disables noise.
    pub ebn0_db: f64,
    /// Linear interference power relative to the unit symbol energy.
    #[serde(default)]
    pub interference_power: f64,
}

impl ChannelModel {
    pub fn awgn(ebn0_db: f64) -> Self {
        ChannelModel {
            kind: ChannelKind::Awgn,
            ebn0_db,
            interference_power: 0.0,
        }
    }

    pub fn noiseless() -> Self {
        Self::awgn(f64::INFINITY)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ebn0_db.is_nan() || self.ebn0_db == f64::NEG_INFINITY {
            return Err(Error::config("ebn0_db", "must be finite or +inf"));
        }
        if !(self.interference_power >= 0.0 && self.interference_power.is_finite()) {
            return Err(Error::config("interference_power", "must be a finite value >= 0"));
        }
        Ok(())
    }
}

/// Per-component noise standard deviation for unit-energy symbols carrying
/// `bits_per_symbol` bits at the given Eb/N0.
pub fn ebn0_to_noise_sigma(ebn0_db: f64, bits_per_symbol: usize) -> Result<f64> {
    if bits_per_symbol < 1 {
        return Err(Error::InvalidOrder(bits_per_symbol));
    }
    if ebn0_db == f64::INFINITY {
        return Ok(0.0);
    }
    let esn0 = bits_per_symbol as f64 * db_to_linear(ebn0_db);
    Ok((1.0 / (2.0 * esn0)).sqrt())
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Passes `block` through the channel. The same `(block, model, seed)` always
/// yields the same output.
pub fn apply_channel(
    block: &SymbolBlock,
    model: &ChannelModel,
    bits_per_symbol: usize,
    rng_seed: u64,
) -> Result<SymbolBlock> {
    model.validate()?;
    let sigma = ebn0_to_noise_sigma(model.ebn0_db, bits_per_symbol)?;
    // interference is Gaussian with total power i, i.e. i/2 per component
    let sigma = (sigma * sigma + model.interference_power / 2.0).sqrt();
    let mut rng = seed::rng(rng_seed);
    let gain = match model.kind {
        ChannelKind::Awgn => Complex64::new(1.0, 0.0),
        ChannelKind::FlatRayleigh => rayleigh_gain(&mut rng),
    };
    let symbols = block
        .symbols
        .iter()
        .map(|&s| {
            let s = gain * s;
            if sigma == 0.0 {
                s
            } else {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                s + Complex64::new(sigma * re, sigma * im)
            }
        })
        .collect();
    Ok(SymbolBlock::new(symbols, block.scheme_id))
}

/// Circularly symmetric complex Gaussian gain with E[|g|^2] = 1.
pub fn rayleigh_gain<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Radio parameters for the distance to Eb/N0 mapping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub tx_power_dbm: f64,
    #[serde(rename = "gains_db")]
    pub antenna_gains_db: f64,
    pub carrier_hz: f64,
    pub noise_psd_dbm_hz: f64,
    pub distance_m: f64,
}

impl Default for LinkBudget {
    fn default() -> Self {
        LinkBudget {
            tx_power_dbm: 20.0,
            antenna_gains_db: 0.0,
            carrier_hz: 9.0e8,
            // thermal noise at 290 K plus a 7 dB noise figure
            noise_psd_dbm_hz: -167.0,
            distance_m: 100.0,
        }
    }
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        if !(self.distance_m > 0.0) {
            return Err(Error::config("distance_m", "must be > 0"));
        }
        if !(self.carrier_hz > 0.0) {
            return Err(Error::config("carrier_hz", "must be > 0"));
        }
        Ok(())
    }

    pub fn with_distance(self, distance_m: f64) -> Self {
        LinkBudget { distance_m, ..self }
    }
}

/// Free-space path loss in dB.
pub fn fspl_db(distance_m: f64, carrier_hz: f64) -> f64 {
    20.0 * distance_m.log10() + 20.0 * carrier_hz.log10() - 147.55
}

/// Received Eb/N0 in dB at the given bit rate.
pub fn link_budget_ebn0(budget: &LinkBudget, bit_rate_bps: f64) -> Result<f64> {
    if !(bit_rate_bps > 0.0) {
        return Err(Error::InvalidRate(bit_rate_bps));
    }
    budget.validate()?;
    Ok(budget.tx_power_dbm + budget.antenna_gains_db
        - fspl_db(budget.distance_m, budget.carrier_hz)
        - budget.noise_psd_dbm_hz
        - 10.0 * bit_rate_bps.log10())
}
