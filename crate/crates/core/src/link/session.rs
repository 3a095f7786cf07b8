//! Tick-driven end-to-end session between a transmitter and a receiver
//! controller over AWGN.
//!
//! Each tick the transmitter first learns the current Eb/N0, then gets one
//! frame opportunity. A switch request is answered within the same tick.
//! Time in trajectories and logs is measured in ticks.

use std::fmt::Write as _;

use rand::Rng;
use serde::Serialize;

use super::controller::{controller_step, Action, ControllerConfig, ControllerState, Event, LinkStats, Side};
use super::frame::{decode_frame, encode_frame, header_symbols, DecodeFailure, Frame};
use crate::channel::{apply_channel, ChannelModel};
use crate::error::{Error, Result};
use crate::modem::{SchemeId, SymbolBlock};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub controller: ControllerConfig,
    pub header_scheme: SchemeId,
    /// Payload symbols per data frame.
    pub payload_symbols: usize,
    pub duration_ticks: u64,
}

impl SessionConfig {
    pub fn new(controller: ControllerConfig, duration_ticks: u64) -> Self {
        SessionConfig {
            controller,
            header_scheme: SchemeId::Bpsk,
            payload_symbols: 24,
            duration_ticks,
        }
    }

    /// Airtime of one tick: a header plus a full payload slot.
    pub fn tick_seconds(&self) -> f64 {
        (header_symbols(self.header_scheme) + self.payload_symbols) as f64 * self.controller.symbol_period_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LogEvent {
    Snr,
    ReqTx,
    ReqRx,
    AckTx,
    AckRx,
    DataTx,
    DataRx,
    Switch,
    Violation,
}

impl LogEvent {
    pub fn as_str(self) -> &'static str {
        match self {
            LogEvent::Snr => "snr",
            LogEvent::ReqTx => "req_tx",
            LogEvent::ReqRx => "req_rx",
            LogEvent::AckTx => "ack_tx",
            LogEvent::AckRx => "ack_rx",
            LogEvent::DataTx => "data_tx",
            LogEvent::DataRx => "data_rx",
            LogEvent::Switch => "switch",
            LogEvent::Violation => "violation",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            LogEvent::Snr,
            LogEvent::ReqTx,
            LogEvent::ReqRx,
            LogEvent::AckTx,
            LogEvent::AckRx,
            LogEvent::DataTx,
            LogEvent::DataRx,
            LogEvent::Switch,
            LogEvent::Violation,
        ]
        .into_iter()
        .find(|e| e.as_str() == s)
    }
}

/// One line of the event log.
///
/// For `*_rx` records `scheme` is the scheme the receiving side expected
/// when the frame arrived; for `*_tx` records it is the frame's mod_id.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogRecord {
    pub time: u64,
    pub side: Side,
    pub event: LogEvent,
    pub scheme: SchemeId,
    pub seq: Option<u8>,
    pub outcome: String,
}

pub const LOG_HEADER: &str = "time,side,event,scheme,seq,outcome";

pub fn log_to_csv(log: &[LogRecord]) -> String {
    let mut out = String::from(LOG_HEADER);
    out.push('\n');
    for r in log {
        let seq = r.seq.map(|s| s.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{},{},{}", r.time, r.side.as_str(), r.event.as_str(), r.scheme, seq, r.outcome);
    }
    out
}

/// Parses a log written by [`log_to_csv`].
pub fn log_from_csv(text: &str) -> Result<Vec<LogRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == LOG_HEADER => {}
        _ => return Err(Error::config("log", format!("first line must be `{LOG_HEADER}`"))),
    }
    let bad = |n: usize, what: &str| Error::config("log", format!("line {}: {what}", n + 1));
    let mut out = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(bad(n, "expected 6 fields"));
        }
        out.push(LogRecord {
            time: f[0].parse().map_err(|_| bad(n, "bad time"))?,
            side: match f[1] {
                "tx" => Side::Tx,
                "rx" => Side::Rx,
                _ => return Err(bad(n, "bad side")),
            },
            event: LogEvent::parse(f[2]).ok_or_else(|| bad(n, "bad event"))?,
            scheme: f[3].parse().map_err(|_| bad(n, "bad scheme"))?,
            seq: if f[4].is_empty() { None } else { Some(f[4].parse().map_err(|_| bad(n, "bad seq"))?) },
            outcome: f[5].to_string(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionReport {
    /// Both sides combined; payload counters describe delivered data.
    pub stats: LinkStats,
    pub tx: LinkStats,
    pub rx: LinkStats,
    pub protocol_violations: u64,
    pub tick_s: f64,
    pub log: Vec<LogRecord>,
}

pub fn validate_trajectory(trajectory: &[(f64, f64)]) -> Result<()> {
    if trajectory.is_empty() {
        return Err(Error::InvalidTrajectory("trajectory is empty".into()));
    }
    for (i, &(t, db)) in trajectory.iter().enumerate() {
        if !t.is_finite() || db.is_nan() {
            return Err(Error::InvalidTrajectory(format!("point {i} is not a number")));
        }
    }
    if let Some(i) = trajectory.windows(2).position(|w| !(w[0].0 < w[1].0)) {
        return Err(Error::InvalidTrajectory(format!("time is not ascending at point {}", i + 1)));
    }
    Ok(())
}

/// Eb/N0 in force at `time`: the latest point not after it, or the first.
pub fn snr_at(trajectory: &[(f64, f64)], time: f64) -> f64 {
    let i = trajectory.partition_point(|p| p.0 <= time);
    trajectory[i.saturating_sub(1)].1
}

/// Staircase visiting `levels` in order, `dwell_ticks` per level.
pub fn step_trajectory(levels: &[f64], dwell_ticks: f64) -> Vec<(f64, f64)> {
    levels.iter().enumerate().map(|(i, &db)| (i as f64 * dwell_ticks, db)).collect()
}

struct Link<'a> {
    config: &'a SessionConfig,
    seed: u64,
    tick: u64,
    ebn0_db: f64,
}

impl Link<'_> {
    /// Sends `frame` over the channel; header and payload see the Eb/N0 of
    /// their own schemes.
    fn carry(&self, frame: &Frame, payload_scheme: SchemeId, lane: u64) -> Result<SymbolBlock> {
        let h = self.config.header_scheme;
        let energy = self.config.controller.policy.energy;
        let block = encode_frame(frame, h, payload_scheme)?;
        let split = header_symbols(h);
        let part = |symbols: &[num_complex::Complex64], scheme: SchemeId, sub: u64| {
            let model = ChannelModel::awgn(energy.scheme_ebn0_db(self.ebn0_db, scheme));
            let seed = seed::derive(self.seed, &[self.tick, lane, sub]);
            apply_channel(&SymbolBlock::new(symbols.to_vec(), scheme), &model, scheme.bits_per_symbol(), seed)
        };
        let mut out = part(&block.symbols[..split], h, 0)?;
        if block.symbols.len() > split {
            out.symbols.extend(part(&block.symbols[split..], payload_scheme, 1)?.symbols);
        }
        Ok(out)
    }
}

fn kind(frame: &Frame) -> (LogEvent, LogEvent) {
    if frame.flags.switch_req {
        (LogEvent::ReqTx, LogEvent::ReqRx)
    } else if frame.flags.switch_ack {
        (LogEvent::AckTx, LogEvent::AckRx)
    } else {
        (LogEvent::DataTx, LogEvent::DataRx)
    }
}

fn outcome_str(r: &std::result::Result<Frame, DecodeFailure>) -> String {
    match r {
        Ok(_) => "ok".into(),
        Err(e) => e.as_str().into(),
    }
}

/// Runs both controllers for `config.duration_ticks` ticks following
/// `trajectory` (time in ticks, Eb/N0 in dB). Deterministic in `seed`.
pub fn run_session(trajectory: &[(f64, f64)], config: &SessionConfig, seed: u64) -> Result<SessionReport> {
    validate_trajectory(trajectory)?;
    config.controller.policy.validate()?;
    if !(config.controller.symbol_period_s > 0.0) {
        return Err(Error::InvalidPeriod(config.controller.symbol_period_s));
    }
    let cc = &config.controller;
    let mut tx = ControllerState::new(Side::Tx);
    let mut rx = ControllerState::new(Side::Rx);
    let mut log = Vec::new();
    let mut violations = 0;
    let mut delivered = LinkStats::default();
    let mut last_db = None;

    for tick in 0..config.duration_ticks {
        let db = snr_at(trajectory, tick as f64);
        let link = Link { config, seed, tick, ebn0_db: db };
        let record = |side, event, scheme, seq, outcome: &str| LogRecord {
            time: tick,
            side,
            event,
            scheme,
            seq,
            outcome: outcome.to_string(),
        };
        if last_db != Some(db) {
            log.push(record(Side::Tx, LogEvent::Snr, tx.active_scheme, None, &db.to_string()));
            last_db = Some(db);
        }

        let (next, mut actions) = controller_step(&tx, &Event::SnrUpdate(db), cc)?;
        tx = next;
        if !actions.iter().any(|a| matches!(a, Action::SendFrame(_))) {
            let k = tx.active_scheme.bits_per_symbol();
            let mut rng = seed::rng(seed::derive(seed, &[tick, 0]));
            let payload: Vec<u8> = (0..config.payload_symbols * k).map(|_| rng.random::<bool>() as u8).collect();
            let (next, more) = controller_step(&tx, &Event::Tick { payload }, cc)?;
            tx = next;
            actions.extend(more);
        }

        for action in actions {
            let frame = match action {
                Action::Switch(s) => {
                    log.push(record(Side::Tx, LogEvent::Switch, s, None, "ok"));
                    continue;
                }
                Action::SendFrame(f) => f,
            };
            let (tx_event, rx_event) = kind(&frame);
            log.push(record(Side::Tx, tx_event, frame.mod_id, Some(frame.seq), "sent"));
            let received = link.carry(&frame, tx.active_scheme, 1)?;
            let decoded = decode_frame(&received, config.header_scheme, rx.active_scheme);
            log.push(record(Side::Rx, rx_event, rx.active_scheme, Some(frame.seq), &outcome_str(&decoded)));
            if let (LogEvent::DataRx, Ok(got)) = (rx_event, &decoded) {
                delivered.payload_bits += got.payload.len() as u64;
                delivered.payload_bit_errors +=
                    got.payload.iter().zip(&frame.payload).filter(|(a, b)| a != b).count() as u64;
            }
            let (next, replies) = controller_step(&rx, &Event::FrameRx(decoded), cc)?;
            rx = next;

            for reply in replies {
                let ack = match reply {
                    Action::Switch(s) => {
                        log.push(record(Side::Rx, LogEvent::Switch, s, None, "ok"));
                        continue;
                    }
                    Action::SendFrame(f) => f,
                };
                let (tx_event, rx_event) = kind(&ack);
                log.push(record(Side::Rx, tx_event, ack.mod_id, Some(ack.seq), "sent"));
                let received = link.carry(&ack, rx.active_scheme, 2)?;
                let decoded = decode_frame(&received, config.header_scheme, tx.active_scheme);
                log.push(record(Side::Tx, rx_event, tx.active_scheme, Some(ack.seq), &outcome_str(&decoded)));
                match controller_step(&tx, &Event::FrameRx(decoded), cc) {
                    Ok((next, acts)) => {
                        tx = next;
                        for a in acts {
                            if let Action::Switch(s) = a {
                                log.push(record(Side::Tx, LogEvent::Switch, s, Some(ack.seq), "ok"));
                            }
                        }
                    }
                    Err(Error::ProtocolViolation(msg)) => {
                        violations += 1;
                        log.push(record(Side::Tx, LogEvent::Violation, tx.active_scheme, Some(ack.seq), &msg.replace(',', ";")));
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }

    let tick_s = config.tick_seconds();
    let duration = config.duration_ticks as f64 * tick_s;
    let mut rx_stats = rx.stats;
    rx_stats.payload_bits = delivered.payload_bits;
    rx_stats.payload_bit_errors = delivered.payload_bit_errors;
    let mut tx_stats = tx.stats;
    tx_stats.finish(duration);
    rx_stats.finish(duration);
    let mut stats = tx_stats.merge(&rx_stats);
    stats.switches_completed = tx_stats.switches_completed;
    stats.finish(duration);
    Ok(SessionReport {
        stats,
        tx: tx_stats,
        rx: rx_stats,
        protocol_violations: violations,
        tick_s,
        log,
    })
}

/// A data frame whose scheme differs from what the receiver expected.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TandemViolation {
    pub time: u64,
    pub seq: Option<u8>,
    pub sent: SchemeId,
    pub expected: Option<SchemeId>,
}

/// Pairs every `data_tx` record with the `data_rx` record that follows it
/// and reports scheme mismatches and missing arrivals.
pub fn audit_tandem(log: &[LogRecord]) -> Vec<TandemViolation> {
    let mut out = Vec::new();
    for (i, r) in log.iter().enumerate() {
        if r.event != LogEvent::DataTx {
            continue;
        }
        let arrival = log[i + 1..]
            .iter()
            .find(|a| a.event == LogEvent::DataRx && a.time == r.time && a.seq == r.seq);
        match arrival {
            Some(a) if a.scheme == r.scheme => {}
            other => out.push(TandemViolation {
                time: r.time,
                seq: r.seq,
                sent: r.scheme,
                expected: other.map(|a| a.scheme),
            }),
        }
    }
    out
}

/// One negotiated switch as seen by the transmitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwitchRecord {
    pub scheme: SchemeId,
    pub seq: u8,
    pub requested_at: u64,
    pub completed_at: Option<u64>,
}

impl SwitchRecord {
    pub fn delay_ticks(&self) -> Option<u64> {
        self.completed_at.map(|c| c - self.requested_at)
    }
}

/// Switch requests in order, each with the tick its acknowledgement landed.
pub fn switch_history(log: &[LogRecord]) -> Vec<SwitchRecord> {
    let mut out: Vec<SwitchRecord> = Vec::new();
    for r in log.iter().filter(|r| r.side == Side::Tx) {
        match r.event {
            LogEvent::ReqTx => {
                let seq = r.seq.unwrap_or(0);
                let open = out.last().is_some_and(|s| s.completed_at.is_none() && s.seq == seq);
                if !open {
                    out.push(SwitchRecord {
                        scheme: r.scheme,
                        seq,
                        requested_at: r.time,
                        completed_at: None,
                    });
                }
            }
            LogEvent::Switch => {
                if let Some(s) = out.last_mut().filter(|s| s.completed_at.is_none() && Some(s.seq) == r.seq) {
                    s.completed_at = Some(r.time);
                }
            }
            _ => {}
        }
    }
    out
}
