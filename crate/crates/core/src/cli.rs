//! Command-line experiment runner.
//!
//! Each command turns an [`ExperimentConfig`] into a CSV table and a short
//! text summary. The CSV goes to `--out` (or stdout); the summary goes to
//! stdout when the CSV is written to a file and to stderr otherwise.
//! Numbers are printed in shortest round-trip form, so the summary can be
//! recomputed exactly from the rows.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::adapt::{
    adaptive_schedule, average_rate, delivered_rate, fixed_schedule, measure_schedule_ber, pooled_ber,
    rate_matched_schedule, schedule_cost, threshold_table, EnvDistribution, Mode, QoSPolicy,
};
use crate::config::{load_trajectory, ExperimentConfig, Grid};
use crate::error::{Error, Result};
use crate::link::{
    audit_tandem, log_to_csv, run_session, switch_history, ControllerConfig, SessionConfig,
};
use crate::metrics::ber_sweep;
use crate::modem::SchemeId;

pub const BER_SWEEP_HEADER: &str = "ebn0_db,scheme,ber_measured,ber_theory,ci95,bits";
pub const THRESHOLDS_HEADER: &str = "scheme,threshold_db";
pub const ADAPT_COMPARE_HEADER: &str = "system,avg_rate_bps,ber_theory,ber_measured,ci95,bits,expected_cost";
pub const RATE_COMPARE_HEADER: &str = "system,delivered_rate_bps,offered_rate_bps,feasible_fraction,ber_theory";

pub const DEFAULT_SWEEP_GRID: Grid = Grid::new(0.0, 12.0, 1.0);
pub const DEFAULT_THRESHOLD_GRID: Grid = Grid::new(-10.0, 40.0, 0.1);

#[derive(Debug, Parser)]
#[command(name = "modswitch", version, about = "Modulation switching link simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Monte Carlo and closed-form BER per scheme over an Eb/N0 grid
    #[command(alias = "bersweep")]
    BerSweep,
    /// Pooled BER of fixed schemes against adaptive schedules
    AdaptCompare,
    /// Delivered data rate of fixed schemes against max-rate switching
    RateCompare,
    /// Switch-on Eb/N0 of each scheme under the policy
    Thresholds,
    /// End-to-end handshake session following a trajectory file
    Session,
}

/// Flags that override the config file.
#[derive(Debug, Default, Args)]
pub struct Overrides {
    /// TOML experiment config
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Eb/N0 grid as lo:hi:step (dB)
    #[arg(long, global = true)]
    pub grid: Option<String>,
    /// Monte Carlo bits per point
    #[arg(long, global = true)]
    pub bits: Option<u64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Comma-separated scheme names, e.g. bpsk,qpsk,qam16,qam64
    #[arg(long, global = true)]
    pub schemes: Option<String>,
    /// min-ber, max-rate, min-energy or cost-optimal
    #[arg(long, global = true)]
    pub mode: Option<String>,
    #[arg(long, global = true)]
    pub target_ber: Option<f64>,
    /// Output CSV path (default: stdout)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Environment Eb/N0 grid as lo:hi:step (dB)
    #[arg(long, global = true)]
    pub env: Option<String>,
    /// constant-eb or constant-power
    #[arg(long, global = true)]
    pub energy: Option<String>,
    /// Minimum rate in bit/s; also the matched rate for adapt-compare
    #[arg(long, global = true)]
    pub rate: Option<f64>,
    /// Trajectory file for the session command
    #[arg(long, global = true)]
    pub trajectory: Option<PathBuf>,
    /// Session length in ticks
    #[arg(long, global = true)]
    pub duration: Option<u64>,
}

impl Overrides {
    /// Loads the config file, if any, and applies the flags on top.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(g) = &self.grid {
            c.grid = Some(g.parse()?);
        }
        if let Some(b) = self.bits {
            c.bits_per_point = b;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(list) = &self.schemes {
            c.schemes = list
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(str::parse)
                .collect::<Result<_>>()?;
        }
        if let Some(m) = &self.mode {
            c.policy.mode = m.parse()?;
        }
        if let Some(t) = self.target_ber {
            c.policy.target_ber = t;
        }
        if let Some(o) = &self.out {
            c.out = Some(o.clone());
        }
        if let Some(e) = &self.env {
            let g: Grid = e.parse().map_err(|e| rename_field(e, "grid", "env"))?;
            (c.env.lo, c.env.hi, c.env.step) = (g.lo, g.hi, g.step);
        }
        if let Some(e) = &self.energy {
            c.policy.energy = e.parse()?;
        }
        if let Some(r) = self.rate {
            c.policy.min_rate_bps = r;
        }
        if let Some(t) = &self.trajectory {
            c.session.trajectory = Some(t.clone());
        }
        if let Some(d) = self.duration {
            c.session.duration_ticks = d;
        }
        c.validate()?;
        Ok(c)
    }
}

fn rename_field(e: Error, from: &str, to: &str) -> Error {
    match e {
        Error::InvalidConfig { field, reason } => Error::config(field.replacen(from, to, 1), reason),
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub csv: String,
    pub summary: String,
}

/// Number formatting shared by every table: plain decimals for moderate
/// magnitudes, exponent form otherwise; both round-trip exactly.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 || (1e-3..1e15).contains(&x.abs()) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn opt_num(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

pub fn cmd_ber_sweep(c: &ExperimentConfig) -> Result<CommandOutput> {
    let grid = c.grid.unwrap_or(DEFAULT_SWEEP_GRID).points()?;
    let mut csv = format!("{BER_SWEEP_HEADER}\n");
    let mut summary = String::new();
    for &scheme in &c.schemes {
        let k = scheme.bits_per_symbol() as u64;
        let bits = c.bits_per_point.div_ceil(k) * k;
        let points = ber_sweep(scheme, &grid, bits, c.seed)?;
        let mut worst: f64 = 0.0;
        for p in &points {
            let e = &p.estimate;
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{}",
                fmt_num(p.ebn0_db),
                scheme,
                fmt_num(e.ber),
                fmt_num(p.theory),
                fmt_num(e.ci95_halfwidth),
                e.bits_total
            );
            if p.theory >= 1e-4 {
                worst = worst.max((e.ber - p.theory).abs() / p.theory);
            }
        }
        let _ = writeln!(
            summary,
            "{scheme}: {} points, {bits} bits each, worst relative deviation {:.2}% where theory >= 1e-4",
            points.len(),
            100.0 * worst
        );
    }
    Ok(CommandOutput { csv, summary })
}

pub fn cmd_thresholds(c: &ExperimentConfig) -> Result<CommandOutput> {
    let grid = c.grid.unwrap_or(DEFAULT_THRESHOLD_GRID).points()?;
    let table = threshold_table(&c.policy, c.symbol_period_s, &c.schemes, &grid)?;
    let mut csv = format!("{THRESHOLDS_HEADER}\n");
    let mut summary = format!(
        "mode {}, target BER {}, {} grid points\n",
        c.policy.mode.name(),
        fmt_num(c.policy.target_ber),
        grid.len()
    );
    for t in &table {
        let _ = writeln!(csv, "{},{}", t.scheme, fmt_num(t.threshold_db));
        let _ = writeln!(summary, "{} switches on at {} dB", t.scheme, fmt_num(t.threshold_db));
    }
    for s in c.schemes.iter().filter(|s| table.iter().all(|t| t.scheme != **s)) {
        let _ = writeln!(summary, "{s} is never selected");
    }
    Ok(CommandOutput { csv, summary })
}

/// Rate every compared system has to reach: the policy minimum, or the
/// slowest candidate when the policy sets none.
pub fn matched_rate(c: &ExperimentConfig) -> Result<f64> {
    if c.policy.min_rate_bps > 0.0 {
        return Ok(c.policy.min_rate_bps);
    }
    let slowest = c.schemes.iter().map(|s| s.bits_per_symbol()).min().unwrap_or(1);
    Ok(slowest as f64 / c.symbol_period_s)
}

struct CompareRow {
    system: String,
    rate: f64,
    theory: Option<f64>,
    measured: Option<(f64, f64, u64)>,
    cost: f64,
}

fn compare_row(
    c: &ExperimentConfig,
    dist: &EnvDistribution,
    system: String,
    schedule: &[SchemeId],
    cost_policy: &QoSPolicy,
) -> Result<CompareRow> {
    let energy = c.policy.energy;
    Ok(CompareRow {
        system,
        rate: average_rate(dist, schedule)?,
        theory: pooled_ber(dist, schedule, energy)?,
        measured: measure_schedule_ber(dist, schedule, energy, c.bits_per_point, c.seed)?
            .map(|m| (m.ber, m.ci95_halfwidth, m.bits_total)),
        cost: schedule_cost(dist, schedule, cost_policy)?,
    })
}

pub fn cmd_adapt_compare(c: &ExperimentConfig) -> Result<CommandOutput> {
    let dist = c.env.distribution(c.symbol_period_s)?;
    let rate = matched_rate(c)?;
    // costs are reported without a rate floor so that NoTx states cost 0
    let cost_policy = QoSPolicy { min_rate_bps: 0.0, mode: Mode::CostOptimal, ..c.policy };

    let mut rows = Vec::new();
    for &s in &c.schemes {
        rows.push(compare_row(c, &dist, format!("fixed:{s}"), &fixed_schedule(&dist, s), &cost_policy)?);
    }
    if let Some(s) = rate_matched_schedule(&dist, c.policy.energy, &c.schemes, rate)? {
        rows.push(compare_row(c, &dist, "adaptive".into(), &s, &cost_policy)?);
    }
    let s = adaptive_schedule(&dist, &cost_policy, &c.schemes);
    rows.push(compare_row(c, &dist, "cost-optimal".into(), &s, &cost_policy)?);

    let mut csv = format!("{ADAPT_COMPARE_HEADER}\n");
    for r in &rows {
        let (m, ci, bits) = match r.measured {
            Some((m, ci, bits)) => (fmt_num(m), fmt_num(ci), bits.to_string()),
            None => (String::new(), String::new(), "0".into()),
        };
        let _ = writeln!(csv, "{},{},{},{},{},{},{}", r.system, fmt_num(r.rate), opt_num(r.theory), m, ci, bits, fmt_num(r.cost));
    }

    let need = rate * (1.0 - 1e-9);
    let best_fixed = rows
        .iter()
        .filter(|r| r.system.starts_with("fixed:") && r.rate >= need)
        .filter_map(|r| r.measured.map(|m| (m.0, r)))
        .min_by(|a, b| a.0.total_cmp(&b.0));
    let mut summary = format!("matched rate {} bit/s over {} states\n", fmt_num(rate), dist.len());
    let adaptive = rows.iter().find(|r| r.system == "adaptive");
    match (adaptive.and_then(|r| r.measured), best_fixed) {
        (Some(a), Some((b, row))) => {
            let _ = writeln!(
                summary,
                "adaptive BER {} vs best fixed {} ({}): decrease {:.2}%",
                fmt_num(a.0),
                fmt_num(b),
                row.system,
                percent_decrease(a.0, b)
            );
        }
        (None, _) => summary.push_str("no adaptive schedule reaches the matched rate\n"),
        (_, None) => summary.push_str("no fixed scheme reaches the matched rate\n"),
    }
    let co = rows.last().map(|r| r.cost).unwrap_or(f64::NAN);
    let min_fixed = rows.iter().filter(|r| r.system.starts_with("fixed:")).map(|r| r.cost).fold(f64::INFINITY, f64::min);
    let _ = writeln!(summary, "cost-optimal expected cost {} vs lowest fixed {}", fmt_num(co), fmt_num(min_fixed));
    Ok(CommandOutput { csv, summary })
}

/// `100 (1 - new / old)`; zero when `old` is zero.
pub fn percent_decrease(new: f64, old: f64) -> f64 {
    if old == 0.0 {
        0.0
    } else {
        100.0 * (1.0 - new / old)
    }
}

/// `100 (new / old - 1)`; infinite when only `old` is zero.
pub fn percent_increase(new: f64, old: f64) -> f64 {
    if old == 0.0 {
        if new == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        100.0 * (new / old - 1.0)
    }
}

pub fn cmd_rate_compare(c: &ExperimentConfig) -> Result<CommandOutput> {
    let dist = c.env.distribution(c.symbol_period_s)?;
    let energy = c.policy.energy;
    let target = c.policy.target_ber;
    let max_rate = QoSPolicy { mode: Mode::MaxRate, ..c.policy };

    let mut rows: Vec<(String, Vec<SchemeId>)> =
        c.schemes.iter().map(|&s| (format!("fixed:{s}"), fixed_schedule(&dist, s))).collect();
    rows.push(("adaptive".into(), adaptive_schedule(&dist, &max_rate, &c.schemes)));

    let mut csv = format!("{RATE_COMPARE_HEADER}\n");
    let mut delivered = Vec::new();
    for (name, schedule) in &rows {
        let got = delivered_rate(&dist, schedule, energy, target)?;
        let offered = average_rate(&dist, schedule)?;
        let mut feasible = 0.0;
        for ((z, p), &s) in dist.iter().zip(schedule) {
            if s != SchemeId::NoTx && z.with_scheme(s).ber(energy)? <= target {
                feasible += p;
            }
        }
        // theory BER over the bits actually delivered
        let sent: Vec<SchemeId> = dist
            .support()
            .iter()
            .zip(schedule)
            .map(|(z, &s)| match z.with_scheme(s).ber(energy) {
                Ok(b) if s != SchemeId::NoTx && b <= target => s,
                _ => SchemeId::NoTx,
            })
            .collect();
        let ber = pooled_ber(&dist, &sent, energy)?;
        let _ = writeln!(csv, "{},{},{},{},{}", name, fmt_num(got), fmt_num(offered), fmt_num(feasible), opt_num(ber));
        delivered.push((name.clone(), got));
    }

    let (adaptive, fixed) = delivered.split_last().expect("adaptive row present");
    let mut summary = format!("target BER {}, {} states, energy model {:?}\n", fmt_num(target), dist.len(), energy);
    if let Some((name, best)) = fixed.iter().max_by(|a, b| a.1.total_cmp(&b.1)) {
        let _ = writeln!(
            summary,
            "adaptive {} bit/s vs best fixed {} ({} bit/s): increase {:.2}%",
            fmt_num(adaptive.1),
            name,
            fmt_num(*best),
            percent_increase(adaptive.1, *best)
        );
    }
    for (name, r) in fixed {
        let _ = writeln!(summary, "  vs {name}: {:.2}%", percent_increase(adaptive.1, *r));
    }
    Ok(CommandOutput { csv, summary })
}

pub fn cmd_session(c: &ExperimentConfig) -> Result<CommandOutput> {
    let path = c
        .session
        .trajectory
        .as_ref()
        .ok_or_else(|| Error::config("session.trajectory", "a trajectory file is required (--trajectory PATH)"))?;
    let trajectory = load_trajectory(path)?;
    let config = SessionConfig {
        controller: ControllerConfig {
            policy: c.policy,
            symbol_period_s: c.symbol_period_s,
            candidates: c.schemes.clone(),
        },
        header_scheme: c.session.header_scheme,
        payload_symbols: c.session.payload_symbols,
        duration_ticks: c.session.duration_ticks,
    };
    let report = run_session(&trajectory, &config, c.seed)?;
    let st = &report.stats;
    let history = switch_history(&report.log);
    let violations = audit_tandem(&report.log);
    let mut summary = String::new();
    let _ = writeln!(summary, "ticks {} ({} s each)", c.session.duration_ticks, fmt_num(report.tick_s));
    let _ = writeln!(summary, "frames_ok {}", st.frames_ok);
    let _ = writeln!(summary, "frames_crc_fail {}", st.frames_crc_fail);
    let _ = writeln!(summary, "header_fail {}", st.header_fail);
    let _ = writeln!(summary, "payload_bits {}", st.payload_bits);
    let _ = writeln!(summary, "payload_bit_errors {}", st.payload_bit_errors);
    let _ = writeln!(summary, "switches_completed {}", st.switches_completed);
    let _ = writeln!(summary, "throughput_bps {}", fmt_num(st.throughput_bps));
    let _ = writeln!(summary, "protocol_violations {}", report.protocol_violations);
    let _ = writeln!(summary, "tandem_violations {}", violations.len());
    let path: Vec<String> = history.iter().map(|h| h.scheme.to_string()).collect();
    let _ = writeln!(summary, "switch sequence: {}", if path.is_empty() { "none".into() } else { path.join(" -> ") });
    if let Some(d) = history.iter().filter_map(|h| h.delay_ticks()).max() {
        let _ = writeln!(summary, "longest switch: {d} ticks");
    }
    Ok(CommandOutput { csv: log_to_csv(&report.log), summary })
}

pub fn execute(command: Command, config: &ExperimentConfig) -> Result<CommandOutput> {
    match command {
        Command::BerSweep => cmd_ber_sweep(config),
        Command::AdaptCompare => cmd_adapt_compare(config),
        Command::RateCompare => cmd_rate_compare(config),
        Command::Thresholds => cmd_thresholds(config),
        Command::Session => cmd_session(config),
    }
}

fn run_parsed(cli: &Cli) -> Result<()> {
    let config = cli.overrides.resolve()?;
    let out = execute(cli.command, &config)?;
    match &config.out {
        Some(path) => {
            std::fs::write(path, &out.csv).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            print!("{}", out.summary);
        }
        None => {
            print!("{}", out.csv);
            eprint!("{}", out.summary);
        }
    }
    Ok(())
}

/// Entry point used by the binary.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run_parsed(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
