//! Cost-driven modulation selection.
//!
//! A transaction's cost is `(alpha * BER) * (beta * Eb/N0) / (chi * R / R_ref)`
//! with `R = log2(M) / Ts`. Over a distribution of link states the expected
//! cost is the probability-weighted sum of per-state costs. The selector
//! searches the candidate set exhaustively under one of four QoS modes and
//! falls back to [`SchemeId::NoTx`] when nothing is feasible.

use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{db_to_linear, link_budget_ebn0, linear_to_db, ChannelModel, LinkBudget};
use crate::error::{Error, Result};
use crate::metrics::{count_errors, required_ebn0_db, theoretical_ber_linear};
use crate::modem::{build_scheme, SchemeId};
use crate::seed;

/// Relative slack when comparing accumulated rates against a requirement.
const RATE_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    MinBer,
    #[default]
    MaxRate,
    MinEnergy,
    CostOptimal,
}

/// How the per-bit energy of a scheme relates to the link state.
///
/// A link state carries one reference Eb/N0. With `ConstantEb` the
/// transmitter radiates the same energy per bit whatever the modulation, so
/// every scheme sees the reference value. With `ConstantPower` the radiated
/// power and symbol period are fixed, so a scheme carrying `k` bits per
/// symbol sees `reference - 10 log10(k)` dB; the reference is then the
/// Eb/N0 of a one-bit-per-symbol transmission, i.e. Es/N0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EnergyModel {
    #[default]
    ConstantEb,
    ConstantPower,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::MinBer, Mode::MaxRate, Mode::MinEnergy, Mode::CostOptimal];

    pub fn name(self) -> &'static str {
        match self {
            Mode::MinBer => "min-ber",
            Mode::MaxRate => "max-rate",
            Mode::MinEnergy => "min-energy",
            Mode::CostOptimal => "cost-optimal",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::config("mode", format!("unknown mode `{s}`, expected one of min-ber, max-rate, min-energy, cost-optimal")))
    }
}

impl FromStr for EnergyModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "constant-eb" => Ok(EnergyModel::ConstantEb),
            "constant-power" => Ok(EnergyModel::ConstantPower),
            _ => Err(Error::config("energy", format!("unknown energy model `{s}`, expected constant-eb or constant-power"))),
        }
    }
}

impl EnergyModel {
    pub fn scheme_ebn0_db(self, reference_db: f64, scheme: SchemeId) -> f64 {
        match self {
            EnergyModel::ConstantEb => reference_db,
            EnergyModel::ConstantPower => {
                let k = scheme.bits_per_symbol().max(1) as f64;
                reference_db - 10.0 * k.log10()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QoSPolicy {
    pub alpha: f64,
    pub beta: f64,
    pub chi: f64,
    pub target_ber: f64,
    pub min_rate_bps: f64,
    pub mode: Mode,
    pub energy: EnergyModel,
    /// Rate normalising the cost to a dimensionless number.
    pub r_ref_bps: f64,
}

impl Default for QoSPolicy {
    fn default() -> Self {
        QoSPolicy {
            alpha: 1.0,
            beta: 1.0,
            chi: 1.0,
            target_ber: 1e-3,
            min_rate_bps: 0.0,
            mode: Mode::MaxRate,
            energy: EnergyModel::ConstantEb,
            r_ref_bps: 1e6,
        }
    }
}

impl QoSPolicy {
    pub fn with_mode(self, mode: Mode) -> Self {
        QoSPolicy { mode, ..self }
    }

    pub fn with_target(self, target_ber: f64) -> Self {
        QoSPolicy { target_ber, ..self }
    }

    /// Multi-hop microcode distribution: BER 5e-5 at 3 Mbps, least energy.
    pub fn microcode() -> Self {
        QoSPolicy {
            target_ber: 5e-5,
            min_rate_bps: 3e6,
            mode: Mode::MinEnergy,
            ..Self::default()
        }
    }

    /// Video: BER 2e-4 at 12 Mbps, least energy.
    pub fn video() -> Self {
        QoSPolicy {
            target_ber: 2e-4,
            min_rate_bps: 12e6,
            mode: Mode::MinEnergy,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("policy.{name}"), "must be a finite value >= 0"))
            }
        };
        nonneg("alpha", self.alpha)?;
        nonneg("beta", self.beta)?;
        nonneg("min_rate_bps", self.min_rate_bps)?;
        if !(self.chi > 0.0 && self.chi.is_finite()) {
            return Err(Error::config("policy.chi", "must be > 0"));
        }
        if !(self.target_ber > 0.0 && self.target_ber < 1.0) {
            return Err(Error::config("policy.target_ber", "must lie in (0, 1)"));
        }
        if !(self.r_ref_bps > 0.0 && self.r_ref_bps.is_finite()) {
            return Err(Error::config("policy.r_ref_bps", "must be > 0"));
        }
        Ok(())
    }
}

/// One link state: `[Eb/N0, m, Ts, h, i, distance]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvTuple {
    /// Reference Eb/N0 in dB; see [`EnergyModel`].
    pub ebn0_db: f64,
    pub scheme: SchemeId,
    pub symbol_period_s: f64,
    /// Flat channel amplitude gain, 1 for pure AWGN.
    pub fading_gain: f64,
    /// Interference power relative to the unit symbol energy.
    pub interference_power: f64,
    pub distance_m: f64,
}

impl EnvTuple {
    pub fn new(ebn0_db: f64, scheme: SchemeId, symbol_period_s: f64) -> Self {
        EnvTuple {
            ebn0_db,
            scheme,
            symbol_period_s,
            fading_gain: 1.0,
            interference_power: 0.0,
            distance_m: 1.0,
        }
    }

    /// State at the budget's distance; the reference Eb/N0 is the link
    /// budget evaluated at one bit per symbol.
    pub fn from_link_budget(budget: &LinkBudget, scheme: SchemeId, symbol_period_s: f64) -> Result<Self> {
        if !(symbol_period_s > 0.0) {
            return Err(Error::InvalidPeriod(symbol_period_s));
        }
        let ebn0_db = link_budget_ebn0(budget, 1.0 / symbol_period_s)?;
        Ok(EnvTuple {
            distance_m: budget.distance_m,
            ..EnvTuple::new(ebn0_db, scheme, symbol_period_s)
        })
    }

    pub fn with_scheme(self, scheme: SchemeId) -> Self {
        EnvTuple { scheme, ..self }
    }

    pub fn with_ebn0_db(self, ebn0_db: f64) -> Self {
        EnvTuple { ebn0_db, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.symbol_period_s > 0.0) {
            return Err(Error::InvalidPeriod(self.symbol_period_s));
        }
        if !(self.distance_m > 0.0) {
            return Err(Error::config("distance_m", "must be > 0"));
        }
        if !(self.fading_gain >= 0.0) {
            return Err(Error::config("fading_gain", "must be >= 0"));
        }
        if !(self.interference_power >= 0.0) {
            return Err(Error::config("interference_power", "must be >= 0"));
        }
        if self.ebn0_db.is_nan() {
            return Err(Error::config("ebn0_db", "is NaN"));
        }
        Ok(())
    }

    /// Linear Eb/N0 of the tuple's scheme after fading and interference:
    /// `h^2 g / (1 + i k g)` for per-bit SNR `g`.
    pub fn effective_ebn0(&self, energy: EnergyModel) -> f64 {
        let k = self.scheme.bits_per_symbol().max(1) as f64;
        let g = db_to_linear(energy.scheme_ebn0_db(self.ebn0_db, self.scheme));
        let h2 = self.fading_gain * self.fading_gain;
        if self.interference_power == 0.0 {
            h2 * g
        } else if g.is_infinite() {
            h2 / (self.interference_power * k)
        } else {
            h2 * g / (1.0 + self.interference_power * k * g)
        }
    }

    pub fn ber(&self, energy: EnergyModel) -> Result<f64> {
        theoretical_ber_linear(self.scheme, self.effective_ebn0(energy))
    }
}

/// Bit rate `log2(M) / Ts`.
pub fn bit_rate(scheme: SchemeId, symbol_period_s: f64) -> Result<f64> {
    if !(symbol_period_s > 0.0) {
        return Err(Error::InvalidPeriod(symbol_period_s));
    }
    Ok(scheme.bits_per_symbol() as f64 / symbol_period_s)
}

/// Cost of a transaction from its BER, linear Eb/N0 and bit rate.
pub fn cost_from_parts(ber: f64, ebn0_lin: f64, rate_bps: f64, policy: &QoSPolicy) -> f64 {
    if ber == 0.0 {
        return 0.0;
    }
    (policy.alpha * ber) * (policy.beta * ebn0_lin) / (policy.chi * rate_bps / policy.r_ref_bps)
}

/// Local cost of state `z`; lower is better. Not transmitting costs nothing
/// when no rate is required and is infinitely expensive otherwise.
pub fn local_cost(z: &EnvTuple, policy: &QoSPolicy) -> Result<f64> {
    z.validate()?;
    if z.scheme == SchemeId::NoTx {
        return Ok(if policy.min_rate_bps == 0.0 { 0.0 } else { f64::INFINITY });
    }
    let rate = bit_rate(z.scheme, z.symbol_period_s)?;
    let ber = z.ber(policy.energy)?;
    Ok(cost_from_parts(ber, z.effective_ebn0(policy.energy), rate, policy))
}

/// Discrete probability mass over link states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvDistribution {
    support: Vec<EnvTuple>,
    probs: Vec<f64>,
}

impl EnvDistribution {
    pub fn new(support: Vec<EnvTuple>, probs: Vec<f64>) -> Result<Self> {
        if support.len() != probs.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} states but {} probabilities",
                support.len(),
                probs.len()
            )));
        }
        if support.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        if let Some(p) = probs.iter().find(|p| !(**p >= 0.0)) {
            return Err(Error::InvalidDistribution(format!("negative probability {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!("probabilities sum to {total}")));
        }
        for z in &support {
            z.validate()?;
        }
        Ok(EnvDistribution { support, probs })
    }

    pub fn point_mass(z: EnvTuple) -> Result<Self> {
        Self::new(vec![z], vec![1.0])
    }

    pub fn support(&self) -> &[EnvTuple] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&EnvTuple, f64)> {
        self.support.iter().zip(self.probs.iter().copied())
    }
}

/// Evenly spaced grid `lo, lo + step, ..., hi`, points rounded to 1e-9.
pub fn db_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::InvalidRange(format!("bounds must be finite, got {lo}..{hi}")));
    }
    if lo > hi {
        return Err(Error::InvalidRange(format!("lower bound {lo} exceeds upper bound {hi}")));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidRange(format!("step must be > 0, got {step}")));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| ((lo + i as f64 * step) * 1e9).round() / 1e9).collect())
}

/// Equal mass on each grid point, states otherwise copied from `template`.
pub fn uniform_env_distribution(lo_db: f64, hi_db: f64, step_db: f64, template: EnvTuple) -> Result<EnvDistribution> {
    let grid = db_grid(lo_db, hi_db, step_db)?;
    let p = 1.0 / grid.len() as f64;
    let probs = vec![p; grid.len()];
    let support = grid.into_iter().map(|db| template.with_ebn0_db(db)).collect();
    EnvDistribution::new(support, probs)
}

/// Expected cost when state `i` uses `choice(i, z)`.
pub fn expected_cost<F>(dist: &EnvDistribution, choice: F, policy: &QoSPolicy) -> Result<f64>
where
    F: Fn(usize, &EnvTuple) -> Option<SchemeId>,
{
    let mut total = 0.0;
    for (i, (z, p)) in dist.iter().enumerate() {
        let scheme = choice(i, z).ok_or(Error::IncompleteChoice(i))?;
        if p == 0.0 {
            continue;
        }
        total += p * local_cost(&z.with_scheme(scheme), policy)?;
    }
    Ok(total)
}

/// Expected cost of a per-state schedule.
pub fn schedule_cost(dist: &EnvDistribution, schedule: &[SchemeId], policy: &QoSPolicy) -> Result<f64> {
    expected_cost(dist, |i, _| schedule.get(i).copied(), policy)
}

/// How one candidate fared in a selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CandidateReport {
    pub scheme: SchemeId,
    /// Eb/N0 seen by this scheme, in dB.
    pub ebn0_db: f64,
    pub ber: f64,
    pub rate_bps: f64,
    pub cost: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selection {
    pub scheme: SchemeId,
    pub candidates: Vec<CandidateReport>,
}

impl Selection {
    fn none() -> Self {
        Selection {
            scheme: SchemeId::NoTx,
            candidates: Vec::new(),
        }
    }

    pub fn chosen(&self) -> Option<&CandidateReport> {
        self.candidates.iter().find(|c| c.scheme == self.scheme)
    }
}

/// Picks a scheme for reference Eb/N0 `ebn0_db` under `policy`.
pub fn select_modulation(ebn0_db: f64, symbol_period_s: f64, policy: &QoSPolicy, candidates: &[SchemeId]) -> Selection {
    select_for(&EnvTuple::new(ebn0_db, SchemeId::NoTx, symbol_period_s), policy, candidates)
}

/// Picks a scheme for link state `z` (its scheme field is ignored).
///
/// Total: any invalid input or empty feasible set yields `NoTx`. Ties go to
/// the lowest order.
pub fn select_for(z: &EnvTuple, policy: &QoSPolicy, candidates: &[SchemeId]) -> Selection {
    if z.validate().is_err() || z.ebn0_db.is_nan() {
        return Selection::none();
    }
    let mut schemes: Vec<SchemeId> = candidates.iter().copied().filter(|s| *s != SchemeId::NoTx).collect();
    schemes.sort();
    schemes.dedup();

    let mut reports = Vec::with_capacity(schemes.len());
    for scheme in schemes {
        let zs = z.with_scheme(scheme);
        let (Ok(ber), Ok(rate), Ok(cost)) = (zs.ber(policy.energy), bit_rate(scheme, z.symbol_period_s), local_cost(&zs, policy)) else {
            continue;
        };
        let meets_ber = ber <= policy.target_ber;
        let meets_rate = rate >= policy.min_rate_bps * (1.0 - RATE_RTOL);
        let feasible = match policy.mode {
            Mode::MinBer => meets_rate,
            Mode::MaxRate => meets_ber,
            Mode::MinEnergy => meets_ber && meets_rate,
            Mode::CostOptimal => !cost.is_nan(),
        };
        reports.push(CandidateReport {
            scheme,
            ebn0_db: policy.energy.scheme_ebn0_db(z.ebn0_db, scheme),
            ber,
            rate_bps: rate,
            cost,
            feasible,
        });
    }

    let score = |c: &CandidateReport| -> f64 {
        match policy.mode {
            Mode::MinBer => c.ber,
            Mode::MaxRate => -c.rate_bps,
            Mode::MinEnergy => required_ebn0_db(c.scheme, policy.target_ber).unwrap_or(f64::INFINITY),
            Mode::CostOptimal => c.cost,
        }
    };
    let mut best: Option<(f64, SchemeId)> = None;
    for c in reports.iter().filter(|c| c.feasible) {
        let s = score(c);
        if best.is_none_or(|(b, _)| s < b) {
            best = Some((s, c.scheme));
        }
    }
    Selection {
        scheme: best.map_or(SchemeId::NoTx, |(_, s)| s),
        candidates: reports,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Threshold {
    pub scheme: SchemeId,
    pub threshold_db: f64,
}

/// First grid point at which each scheme is selected, in order of appearance.
pub fn threshold_table(
    policy: &QoSPolicy,
    symbol_period_s: f64,
    candidates: &[SchemeId],
    grid: &[f64],
) -> Result<Vec<Threshold>> {
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidRange("threshold grid must be strictly ascending".into()));
    }
    let mut out: Vec<Threshold> = Vec::new();
    for &db in grid {
        let scheme = select_modulation(db, symbol_period_s, policy, candidates).scheme;
        if scheme != SchemeId::NoTx && out.iter().all(|t| t.scheme != scheme) {
            out.push(Threshold { scheme, threshold_db: db });
        }
    }
    Ok(out)
}

pub fn fixed_schedule(dist: &EnvDistribution, scheme: SchemeId) -> Vec<SchemeId> {
    vec![scheme; dist.len()]
}

/// The selector's choice in every state.
pub fn adaptive_schedule(dist: &EnvDistribution, policy: &QoSPolicy, candidates: &[SchemeId]) -> Vec<SchemeId> {
    dist.support().iter().map(|z| select_for(z, policy, candidates).scheme).collect()
}

fn check_schedule(dist: &EnvDistribution, schedule: &[SchemeId]) -> Result<()> {
    if schedule.len() < dist.len() {
        return Err(Error::IncompleteChoice(schedule.len()));
    }
    Ok(())
}

/// Mean offered bit rate, counting `NoTx` states as zero.
pub fn average_rate(dist: &EnvDistribution, schedule: &[SchemeId]) -> Result<f64> {
    check_schedule(dist, schedule)?;
    dist.iter()
        .zip(schedule)
        .map(|((z, p), s)| Ok(p * bit_rate(*s, z.symbol_period_s)?))
        .sum()
}

/// Mean delivered bit rate: a state contributes only when its closed-form
/// BER meets `target_ber`.
pub fn delivered_rate(dist: &EnvDistribution, schedule: &[SchemeId], energy: EnergyModel, target_ber: f64) -> Result<f64> {
    check_schedule(dist, schedule)?;
    let mut total = 0.0;
    for ((z, p), &s) in dist.iter().zip(schedule) {
        if s == SchemeId::NoTx {
            continue;
        }
        let zs = z.with_scheme(s);
        if zs.ber(energy)? <= target_ber {
            total += p * bit_rate(s, z.symbol_period_s)?;
        }
    }
    Ok(total)
}

/// Closed-form BER over all transmitted bits: `sum p k BER / sum p k`.
/// `None` when the schedule never transmits.
pub fn pooled_ber(dist: &EnvDistribution, schedule: &[SchemeId], energy: EnergyModel) -> Result<Option<f64>> {
    check_schedule(dist, schedule)?;
    let mut errors = 0.0;
    let mut bits = 0.0;
    for ((z, p), &s) in dist.iter().zip(schedule) {
        if s == SchemeId::NoTx {
            continue;
        }
        let k = s.bits_per_symbol() as f64;
        errors += p * k * z.with_scheme(s).ber(energy)?;
        bits += p * k;
    }
    Ok((bits > 0.0).then(|| errors / bits))
}

/// Monte Carlo estimate of a schedule's pooled BER.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScheduleBer {
    pub ber: f64,
    pub ci95_halfwidth: f64,
    pub bit_errors: u64,
    pub bits_total: u64,
}

/// Monte Carlo counterpart of [`pooled_ber`].
///
/// Every transmitting state sends about `bits_per_state` random bits (whole
/// symbols) over AWGN at its effective Eb/N0, and the per-state error rates are combined
/// with weights `p k`. The noise stream of a state depends only on `seed`,
/// the state index and the scheme, so schedules that agree on a state see
/// identical noise there. `None` when the schedule never transmits.
pub fn measure_schedule_ber(
    dist: &EnvDistribution,
    schedule: &[SchemeId],
    energy: EnergyModel,
    bits_per_state: u64,
    seed: u64,
) -> Result<Option<ScheduleBer>> {
    check_schedule(dist, schedule)?;
    if bits_per_state == 0 {
        return Err(Error::InvalidLength {
            scheme: SchemeId::NoTx,
            bits: 0,
            reason: "at least one symbol per state is required",
        });
    }
    let per_state: Vec<Option<(f64, u64, u64)>> = dist
        .support()
        .par_iter()
        .zip(dist.probs().par_iter())
        .zip(schedule.par_iter())
        .enumerate()
        .map(|(i, ((z, &p), &s))| {
            if s == SchemeId::NoTx || p == 0.0 {
                return Ok(None);
            }
            let k = s.bits_per_symbol() as u64;
            let model = ChannelModel::awgn(linear_to_db(z.with_scheme(s).effective_ebn0(energy)));
            let state_seed = seed::derive(seed, &[i as u64, s.wire_id() as u64]);
            let symbols = bits_per_state.div_ceil(k);
            let errors = count_errors(&build_scheme(s), &model, symbols, state_seed)?;
            Ok(Some((p * k as f64, errors, symbols * k)))
        })
        .collect::<Result<_>>()?;
    let weight: f64 = per_state.iter().flatten().map(|x| x.0).sum();
    if weight == 0.0 {
        return Ok(None);
    }
    let (mut ber, mut var, mut errors, mut bits) = (0.0, 0.0, 0, 0);
    for &(w, e, n) in per_state.iter().flatten() {
        let w = w / weight;
        let p = e as f64 / n as f64;
        ber += w * p;
        var += w * w * p * (1.0 - p) / n as f64;
        errors += e;
        bits += n;
    }
    Ok(Some(ScheduleBer {
        ber,
        ci95_halfwidth: 1.96 * var.sqrt(),
        bit_errors: errors,
        bits_total: bits,
    }))
}

/// Minimum-BER schedule whose average rate reaches `rate_bps`.
///
/// Each state maximises `k (lambda - BER_k)` (not transmitting scores 0), and
/// `lambda` is bisected to the smallest value meeting the rate; the chosen
/// order is non-decreasing in `lambda`, so the rate is too. The result is
/// then compared with every fixed candidate that meets the rate on its own,
/// and the lowest pooled BER wins, fixed schedules winning ties. Returns
/// `None` if no schedule reaches the rate.
pub fn rate_matched_schedule(
    dist: &EnvDistribution,
    energy: EnergyModel,
    candidates: &[SchemeId],
    rate_bps: f64,
) -> Result<Option<Vec<SchemeId>>> {
    if !(rate_bps > 0.0) {
        return Err(Error::InvalidRate(rate_bps));
    }
    let mut schemes: Vec<SchemeId> = candidates.iter().copied().filter(|s| *s != SchemeId::NoTx).collect();
    schemes.sort();
    schemes.dedup();
    let need = rate_bps * (1.0 - RATE_RTOL);

    // per-state BER table, rows follow the support
    let table: Vec<Vec<f64>> = dist
        .support()
        .iter()
        .map(|z| schemes.iter().map(|&s| z.with_scheme(s).ber(energy)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let pick = |lambda: f64| -> Vec<SchemeId> {
        table
            .iter()
            .map(|row| {
                let mut best = (0.0, SchemeId::NoTx);
                for (&s, &ber) in schemes.iter().zip(row) {
                    let v = s.bits_per_symbol() as f64 * (lambda - ber);
                    if v > best.0 {
                        best = (v, s);
                    }
                }
                best.1
            })
            .collect()
    };

    let mut best: Option<(f64, Vec<SchemeId>)> = None;
    let mut consider = |schedule: Vec<SchemeId>| -> Result<()> {
        if average_rate(dist, &schedule)? < need {
            return Ok(());
        }
        if let Some(ber) = pooled_ber(dist, &schedule, energy)? {
            if best.as_ref().is_none_or(|(b, _)| ber < *b) {
                best = Some((ber, schedule));
            }
        }
        Ok(())
    };
    for &s in &schemes {
        consider(fixed_schedule(dist, s))?;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    if average_rate(dist, &pick(hi))? >= need {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if average_rate(dist, &pick(mid))? >= need {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        consider(pick(hi))?;
    }
    Ok(best.map(|(_, s)| s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::theoretical_ber;
    use proptest::prelude::*;

    const TS: f64 = 1e-6;

    fn policy(mode: Mode, target: f64) -> QoSPolicy {
        QoSPolicy::default().with_mode(mode).with_target(target)
    }

    #[test]
    fn bit_rate_examples() {
        assert_eq!(bit_rate(SchemeId::Qpsk, 1e-6).unwrap(), 2.0e6);
        assert_eq!(bit_rate(SchemeId::NoTx, 1e-6).unwrap(), 0.0);
        assert_eq!(bit_rate(SchemeId::Bpsk, 0.0), Err(Error::InvalidPeriod(0.0)));
        // 3 Msym/s: 3, 6, 12, 18 Mbps
        let ts = 1.0 / 3e6;
        let rates: Vec<f64> = SchemeId::CORE.iter().map(|&s| bit_rate(s, ts).unwrap()).collect();
        for (r, want) in rates.iter().zip([3e6, 6e6, 12e6, 18e6]) {
            assert!((r - want).abs() < 1e-6 * want);
        }
        // 64-QAM at 4 Msym/s: 24 Mbps, 192 bits in an 8 us unit
        let r = bit_rate(SchemeId::Qam64, 0.25e-6).unwrap();
        assert_eq!(r, 24e6);
        assert_eq!((r * 8e-6).round(), 192.0);
    }

    #[test]
    fn cost_examples() {
        let p = QoSPolicy::default();
        assert!((cost_from_parts(0.01, 10.0, 2e6, &p) - 0.05).abs() < 1e-15);
        let doubled = QoSPolicy { alpha: 2.0, ..p };
        assert!((cost_from_parts(0.01, 10.0, 2e6, &doubled) - 0.1).abs() < 1e-15);
        let z = EnvTuple::new(7.0, SchemeId::Qam16, TS);
        let c = local_cost(&z, &p).unwrap();
        let c2 = local_cost(&z, &doubled).unwrap();
        assert!((c2 / c - 2.0).abs() < 1e-12);
        let expect = theoretical_ber(SchemeId::Qam16, 7.0).unwrap() * db_to_linear(7.0) / 4.0;
        assert!((c - expect).abs() < 1e-15);
    }

    #[test]
    fn notx_cost_sentinel() {
        let z = EnvTuple::new(7.0, SchemeId::NoTx, TS);
        assert_eq!(local_cost(&z, &QoSPolicy::default()).unwrap(), 0.0);
        let p = QoSPolicy { min_rate_bps: 1e6, ..QoSPolicy::default() };
        assert_eq!(local_cost(&z, &p).unwrap(), f64::INFINITY);
    }

    #[test]
    fn expected_cost_examples() {
        let p = QoSPolicy::default();
        let a = EnvTuple::new(3.0, SchemeId::Bpsk, TS);
        let b = EnvTuple::new(9.0, SchemeId::Bpsk, TS);
        let ca = local_cost(&a, &p).unwrap();
        let cb = local_cost(&b, &p).unwrap();
        let d = EnvDistribution::new(vec![a, b], vec![0.5, 0.5]).unwrap();
        let got = expected_cost(&d, |_, z| Some(z.scheme), &p).unwrap();
        assert!((got - 0.5 * (ca + cb)).abs() < 1e-15);

        let single = EnvDistribution::point_mass(a).unwrap();
        assert_eq!(expected_cost(&single, |_, _| Some(SchemeId::Bpsk), &p).unwrap(), ca);

        let err = expected_cost(&d, |i, _| (i == 0).then_some(SchemeId::Bpsk), &p);
        assert_eq!(err, Err(Error::IncompleteChoice(1)));
    }

    #[test]
    fn expected_cost_arithmetic() {
        // two states with costs 0.2 and 0.4 built from cost_from_parts
        let p = QoSPolicy::default();
        let costs = [0.2, 0.4];
        let mean: f64 = costs.iter().map(|c| 0.5 * c).sum();
        assert!((mean - 0.3).abs() < 1e-15);
        assert!((cost_from_parts(0.02, 10.0, 1e6, &p) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn distribution_validation() {
        let z = EnvTuple::new(0.0, SchemeId::Bpsk, TS);
        assert!(EnvDistribution::new(vec![z], vec![0.5]).is_err());
        assert!(EnvDistribution::new(vec![z, z], vec![1.0]).is_err());
        assert!(EnvDistribution::new(vec![z, z], vec![1.5, -0.5]).is_err());
        assert!(EnvDistribution::new(vec![], vec![]).is_err());
        assert!(EnvDistribution::new(vec![EnvTuple { symbol_period_s: 0.0, ..z }], vec![1.0]).is_err());
    }

    #[test]
    fn uniform_distribution_examples() {
        let t = EnvTuple::new(0.0, SchemeId::Bpsk, TS);
        let d = uniform_env_distribution(0.0, 25.0, 1.0, t).unwrap();
        assert_eq!(d.len(), 26);
        for p in d.probs() {
            assert!((p - 1.0 / 26.0).abs() < 1e-15);
        }
        assert_eq!(d.support()[25].ebn0_db, 25.0);
        let d = uniform_env_distribution(5.0, 12.0, 1.0, t).unwrap();
        assert_eq!(d.len(), 8);
        assert!(d.probs().iter().all(|p| *p == 0.125));
        let d = uniform_env_distribution(5.0, 5.0, 1.0, t).unwrap();
        assert_eq!(d.probs(), &[1.0]);
        assert!(matches!(uniform_env_distribution(5.0, 4.0, 1.0, t), Err(Error::InvalidRange(_))));
        assert!(matches!(uniform_env_distribution(0.0, 4.0, 0.0, t), Err(Error::InvalidRange(_))));
        let g = db_grid(0.0, 1.0, 0.1).unwrap();
        assert_eq!(g.len(), 11);
        assert_eq!(g[3], 0.3);
        assert_eq!("cost-optimal".parse::<Mode>().unwrap(), Mode::CostOptimal);
        assert!("fast".parse::<Mode>().is_err());
        assert_eq!("constant-power".parse::<EnergyModel>().unwrap(), EnergyModel::ConstantPower);
    }

    #[test]
    fn max_rate_examples() {
        let p = policy(Mode::MaxRate, 1e-2);
        assert_eq!(select_modulation(5.0, TS, &p, &SchemeId::CORE).scheme, SchemeId::Qpsk);
        assert_eq!(select_modulation(20.0, TS, &p, &SchemeId::CORE).scheme, SchemeId::Qam64);
        for mode in [Mode::MinBer, Mode::MaxRate, Mode::MinEnergy, Mode::CostOptimal] {
            let p = QoSPolicy { min_rate_bps: 1e6, ..policy(mode, 1e-5) };
            let sel = select_modulation(-20.0, TS, &p, &SchemeId::CORE);
            if mode != Mode::MinBer && mode != Mode::CostOptimal {
                assert_eq!(sel.scheme, SchemeId::NoTx, "{mode:?}");
            }
        }
    }

    #[test]
    fn max_rate_report_values() {
        let sel = select_modulation(5.0, TS, &policy(Mode::MaxRate, 1e-2), &SchemeId::CORE);
        let by = |s| sel.candidates.iter().find(|c| c.scheme == s).unwrap();
        assert!((by(SchemeId::Qpsk).ber - 5.953_867_147_778_66e-3).abs() < 1e-12);
        assert!((by(SchemeId::Qam16).ber - 4.189_276_004_646_232e-2).abs() < 1e-10);
        assert!(!by(SchemeId::Qam16).feasible);
        assert!(by(SchemeId::Qam64).ber < 0.5);
        assert_eq!(sel.chosen().unwrap().scheme, SchemeId::Qpsk);
    }

    #[test]
    fn min_ber_picks_lowest_order_meeting_rate() {
        let p = QoSPolicy { min_rate_bps: 3e6, ..policy(Mode::MinBer, 1e-3) };
        assert_eq!(select_modulation(8.0, TS, &p, &SchemeId::ACTIVE).scheme, SchemeId::Qam8);
        let p = policy(Mode::MinBer, 1e-3);
        // BPSK and QPSK tie; lowest order wins
        assert_eq!(select_modulation(8.0, TS, &p, &SchemeId::ACTIVE).scheme, SchemeId::Bpsk);
        let p = QoSPolicy { min_rate_bps: 1e9, ..p };
        assert_eq!(select_modulation(8.0, TS, &p, &SchemeId::ACTIVE).scheme, SchemeId::NoTx);
    }

    #[test]
    fn presets_select_feasible_schemes() {
        let ts = 1.0 / 3e6;
        let micro = QoSPolicy::microcode();
        let sel = select_modulation(12.0, ts, &micro, &SchemeId::CORE);
        assert_eq!(sel.scheme, SchemeId::Bpsk);
        let video = QoSPolicy::video();
        assert_eq!(select_modulation(10.0, ts, &video, &SchemeId::CORE).scheme, SchemeId::NoTx);
        let sel = select_modulation(12.0, ts, &video, &SchemeId::CORE);
        assert_eq!(sel.scheme, SchemeId::Qam16);
        assert!(sel.chosen().unwrap().ber <= 2e-4);
    }

    #[test]
    fn constant_power_penalises_high_orders() {
        let p = QoSPolicy { energy: EnergyModel::ConstantPower, ..policy(Mode::MaxRate, 1e-2) };
        // QPSK sees 5 - 3.01 dB and misses the target; BPSK meets it
        assert_eq!(select_modulation(5.0, TS, &p, &SchemeId::CORE).scheme, SchemeId::Bpsk);
        let z = EnvTuple::new(10.0, SchemeId::Qam16, TS);
        let got = z.effective_ebn0(EnergyModel::ConstantPower);
        assert!((got - db_to_linear(10.0) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn fading_and_interference_lower_effective_snr() {
        let z = EnvTuple::new(10.0, SchemeId::Qpsk, TS);
        let faded = EnvTuple { fading_gain: 0.5, ..z };
        assert!((faded.effective_ebn0(EnergyModel::ConstantEb) - 2.5).abs() < 1e-12);
        let jammed = EnvTuple { interference_power: 0.1, ..z };
        // h^2 g / (1 + i k g) = 10 / (1 + 0.1 * 2 * 10)
        assert!((jammed.effective_ebn0(EnergyModel::ConstantEb) - 10.0 / 3.0).abs() < 1e-12);
        let clean = EnvTuple { ebn0_db: f64::INFINITY, ..jammed };
        assert!((clean.effective_ebn0(EnergyModel::ConstantEb) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn link_budget_state() {
        let lb = LinkBudget::default();
        let z = EnvTuple::from_link_budget(&lb, SchemeId::Qpsk, TS).unwrap();
        assert_eq!(z.distance_m, 100.0);
        assert!((z.ebn0_db - link_budget_ebn0(&lb, 1e6).unwrap()).abs() < 1e-12);
        // the constant-power view of a 2-bit scheme equals the budget at its own rate
        let qpsk = EnergyModel::ConstantPower.scheme_ebn0_db(z.ebn0_db, SchemeId::Qpsk);
        assert!((qpsk - link_budget_ebn0(&lb, 2e6).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn threshold_examples() {
        let p = policy(Mode::MaxRate, 1e-2);
        let grid = db_grid(0.0, 25.0, 0.01).unwrap();
        let t = threshold_table(&p, TS, &SchemeId::CORE, &grid).unwrap();
        assert_eq!(t[0].scheme, SchemeId::Qpsk);
        assert!((t[0].threshold_db - 4.33).abs() < 0.011, "{t:?}");
        let schemes: Vec<SchemeId> = t.iter().map(|x| x.scheme).collect();
        assert_eq!(schemes, vec![SchemeId::Qpsk, SchemeId::Qam16, SchemeId::Qam64]);
        assert!(t.windows(2).all(|w| w[0].threshold_db < w[1].threshold_db));

        let lax = policy(Mode::MaxRate, 0.5);
        let grid = db_grid(0.0, 25.0, 1.0).unwrap();
        let t = threshold_table(&lax, TS, &SchemeId::CORE, &grid).unwrap();
        assert_eq!(t, vec![Threshold { scheme: SchemeId::Qam64, threshold_db: 0.0 }]);
        assert!(threshold_table(&p, TS, &SchemeId::CORE, &[3.0, 1.0]).is_err());
    }

    #[test]
    fn rate_matched_single_state_equals_best_fixed() {
        let z = EnvTuple::new(9.0, SchemeId::NoTx, TS);
        let d = EnvDistribution::point_mass(z).unwrap();
        for (rate, want) in [(1e6, SchemeId::Bpsk), (3e6, SchemeId::Qam8), (4e6, SchemeId::Qam16), (6e6, SchemeId::Qam64)] {
            let s = rate_matched_schedule(&d, EnergyModel::ConstantEb, &SchemeId::ACTIVE, rate).unwrap().unwrap();
            assert_eq!(s, vec![want], "{rate}");
        }
        assert_eq!(rate_matched_schedule(&d, EnergyModel::ConstantEb, &SchemeId::ACTIVE, 7e6).unwrap(), None);
    }

    #[test]
    fn rate_matched_beats_fixed_on_spread_states() {
        let t = EnvTuple::new(0.0, SchemeId::NoTx, TS);
        let d = uniform_env_distribution(0.0, 25.0, 1.0, t).unwrap();
        let s = rate_matched_schedule(&d, EnergyModel::ConstantEb, &SchemeId::CORE, 4e6).unwrap().unwrap();
        assert!(average_rate(&d, &s).unwrap() >= 4e6 * (1.0 - 1e-9));
        let adaptive = pooled_ber(&d, &s, EnergyModel::ConstantEb).unwrap().unwrap();
        let fixed = pooled_ber(&d, &fixed_schedule(&d, SchemeId::Qam16), EnergyModel::ConstantEb).unwrap().unwrap();
        assert!(adaptive < 0.5 * fixed, "{adaptive} vs {fixed}");
        assert!(s.first() == Some(&SchemeId::NoTx));
    }

    #[test]
    fn delivered_rate_counts_feasible_states() {
        let t = EnvTuple::new(0.0, SchemeId::NoTx, TS);
        let d = uniform_env_distribution(0.0, 25.0, 1.0, t).unwrap();
        let bpsk = delivered_rate(&d, &fixed_schedule(&d, SchemeId::Bpsk), EnergyModel::ConstantEb, 1e-3).unwrap();
        // Q(sqrt(2 g)) <= 1e-3 from 6.79 dB: 7..25 dB, 19 of 26 states
        assert!((bpsk - 19.0 / 26.0 * 1e6).abs() < 1e-6);
        let none = delivered_rate(&d, &fixed_schedule(&d, SchemeId::NoTx), EnergyModel::ConstantEb, 1e-3).unwrap();
        assert_eq!(none, 0.0);
        assert_eq!(pooled_ber(&d, &fixed_schedule(&d, SchemeId::NoTx), EnergyModel::ConstantEb).unwrap(), None);
        assert!(average_rate(&d, &[SchemeId::Bpsk]).is_err());
    }

    #[test]
    fn measured_schedule_ber_tracks_closed_form() {
        let t = EnvTuple::new(0.0, SchemeId::NoTx, TS);
        let d = uniform_env_distribution(0.0, 8.0, 2.0, t).unwrap();
        let s = vec![SchemeId::Bpsk, SchemeId::Qpsk, SchemeId::NoTx, SchemeId::Qam16, SchemeId::Qam16];
        let m = measure_schedule_ber(&d, &s, EnergyModel::ConstantEb, 400_000, 5).unwrap().unwrap();
        let want = pooled_ber(&d, &s, EnergyModel::ConstantEb).unwrap().unwrap();
        assert!((m.ber - want).abs() < 1.5 * m.ci95_halfwidth, "{} vs {want}", m.ber);
        assert_eq!(m.bits_total, 4 * 400_000);
        let again = measure_schedule_ber(&d, &s, EnergyModel::ConstantEb, 400_000, 5).unwrap();
        assert_eq!(again, Some(m));
        let silent = fixed_schedule(&d, SchemeId::NoTx);
        assert_eq!(measure_schedule_ber(&d, &silent, EnergyModel::ConstantEb, 10, 5).unwrap(), None);
    }

    fn mode_strategy() -> impl Strategy<Value = Mode> {
        proptest::sample::select(vec![Mode::MinBer, Mode::MaxRate, Mode::MinEnergy, Mode::CostOptimal])
    }

    fn energy_strategy() -> impl Strategy<Value = EnergyModel> {
        proptest::sample::select(vec![EnergyModel::ConstantEb, EnergyModel::ConstantPower])
    }

    proptest! {
        #[test]
        fn max_rate_is_monotone_and_sound(target in 1e-6f64..0.2, energy in energy_strategy(), lo in -10.0f64..10.0) {
            let p = QoSPolicy { energy, ..policy(Mode::MaxRate, target) };
            let mut last = 0;
            for i in 0..60 {
                let db = lo + 0.5 * i as f64;
                let sel = select_modulation(db, TS, &p, &SchemeId::ACTIVE);
                let k = sel.scheme.bits_per_symbol();
                prop_assert!(k >= last, "order dropped at {} dB", db);
                last = k;
                if let Some(c) = sel.chosen() {
                    prop_assert!(c.ber <= target);
                }
            }
        }

        #[test]
        fn selection_is_total(db in -50.0f64..60.0, mode in mode_strategy(), target in 1e-9f64..0.9, rate in 0.0f64..1e8, ts in -1e-6f64..1e-5) {
            let p = QoSPolicy { min_rate_bps: rate, ..policy(mode, target) };
            let sel = select_modulation(db, ts, &p, &SchemeId::ALL);
            prop_assert!(SchemeId::ALL.contains(&sel.scheme));
            prop_assert_eq!(select_modulation(db, ts, &p, &[]).scheme, SchemeId::NoTx);
        }

        #[test]
        fn cost_argmin_is_weight_invariant(db in -5.0f64..25.0, c in 0.01f64..100.0, chi in 0.1f64..10.0, energy in energy_strategy()) {
            let p = QoSPolicy { energy, ..QoSPolicy::default().with_mode(Mode::CostOptimal) };
            let scaled = QoSPolicy { alpha: c, beta: c, chi, ..p };
            let a = select_modulation(db, TS, &p, &SchemeId::ACTIVE);
            let b = select_modulation(db, TS, &scaled, &SchemeId::ACTIVE);
            prop_assert_eq!(a.scheme, b.scheme);
            for (x, y) in a.candidates.iter().zip(&b.candidates) {
                let ratio = y.cost / x.cost;
                if x.cost > 0.0 {
                    prop_assert!((ratio - c * c / chi).abs() <= 1e-9 * ratio);
                }
            }
        }

        #[test]
        fn cost_optimal_dominates_fixed(
            dbs in proptest::collection::vec(-5.0f64..30.0, 1..12),
            weights in proptest::collection::vec(0.0f64..1.0, 12),
            energy in energy_strategy(),
        ) {
            let n = dbs.len();
            let raw: Vec<f64> = weights[..n].iter().map(|w| w + 1e-3).collect();
            let total: f64 = raw.iter().sum();
            let probs: Vec<f64> = raw.iter().map(|w| w / total).collect();
            let support = dbs.iter().map(|&db| EnvTuple::new(db, SchemeId::NoTx, TS)).collect();
            let d = EnvDistribution::new(support, probs).unwrap();
            let p = QoSPolicy { energy, ..QoSPolicy::default().with_mode(Mode::CostOptimal) };
            let adaptive = adaptive_schedule(&d, &p, &SchemeId::ACTIVE);
            let best = schedule_cost(&d, &adaptive, &p).unwrap();
            for s in SchemeId::ACTIVE {
                prop_assert!(best <= schedule_cost(&d, &fixed_schedule(&d, s), &p).unwrap());
            }
        }
    }
}
