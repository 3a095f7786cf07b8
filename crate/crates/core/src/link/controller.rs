//! Stop-and-wait switch negotiation.
//!
//! The transmitter tracks the scheme the selector wants. When that differs
//! from the active scheme it sends SWITCH_REQ and stops sending data until
//! the matching SWITCH_ACK arrives, re-sending the request with the same
//! sequence number on every tick. The receiver switches its expected payload
//! scheme on each request and always acknowledges. Data frames therefore
//! never use a scheme the receiver does not expect.

use serde::{Deserialize, Serialize};

use super::frame::{DecodeFailure, Flags, Frame};
use crate::adapt::{select_modulation, QoSPolicy};
use crate::error::{Error, Result};
use crate::modem::SchemeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Tx,
    Rx,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Tx => "tx",
            Side::Rx => "rx",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct LinkStats {
    pub frames_ok: u64,
    pub frames_crc_fail: u64,
    pub header_fail: u64,
    pub payload_bits: u64,
    pub payload_bit_errors: u64,
    pub switches_completed: u64,
    pub duration_s: f64,
    pub throughput_bps: f64,
}

impl LinkStats {
    pub fn merge(&self, other: &LinkStats) -> LinkStats {
        LinkStats {
            frames_ok: self.frames_ok + other.frames_ok,
            frames_crc_fail: self.frames_crc_fail + other.frames_crc_fail,
            header_fail: self.header_fail + other.header_fail,
            payload_bits: self.payload_bits + other.payload_bits,
            payload_bit_errors: self.payload_bit_errors + other.payload_bit_errors,
            switches_completed: self.switches_completed + other.switches_completed,
            duration_s: self.duration_s.max(other.duration_s),
            throughput_bps: 0.0,
        }
    }

    /// Sets the session length and the derived throughput.
    pub fn finish(&mut self, duration_s: f64) {
        self.duration_s = duration_s;
        self.throughput_bps = if duration_s > 0.0 { self.payload_bits as f64 / duration_s } else { 0.0 };
    }
}

/// Selector settings shared by both controllers.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub policy: QoSPolicy,
    pub symbol_period_s: f64,
    pub candidates: Vec<SchemeId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    pub side: Side,
    pub active_scheme: SchemeId,
    pub pending_scheme: Option<SchemeId>,
    /// Sequence number of the outstanding request.
    pub pending_seq: u8,
    /// Latest selector output; transmitter only.
    pub desired_scheme: SchemeId,
    pub next_seq: u8,
    pub stats: LinkStats,
}

impl ControllerState {
    pub fn new(side: Side) -> Self {
        ControllerState {
            side,
            active_scheme: SchemeId::NoTx,
            pending_scheme: None,
            pending_seq: 0,
            desired_scheme: SchemeId::NoTx,
            next_seq: 0,
            stats: LinkStats::default(),
        }
    }

    fn take_seq(&mut self) -> u8 {
        let s = self.next_seq;
        self.next_seq = self.next_seq.wrapping_add(1);
        s
    }

    fn request(&mut self, scheme: SchemeId) -> Action {
        let seq = self.take_seq();
        self.pending_scheme = Some(scheme);
        self.pending_seq = seq;
        Action::SendFrame(Frame::control(Flags::REQ, scheme, seq))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    /// Channel state reported to the transmitter.
    SnrUpdate(f64),
    FrameRx(std::result::Result<Frame, DecodeFailure>),
    /// One transmission opportunity; the payload is sent if data may flow.
    Tick { payload: Vec<u8> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    SendFrame(Frame),
    Switch(SchemeId),
}

/// Advances one controller by one event. Pure: the same inputs always give
/// the same outputs.
///
/// An acknowledgement with no outstanding request is a protocol violation
/// and leaves the state untouched.
pub fn controller_step(
    state: &ControllerState,
    event: &Event,
    config: &ControllerConfig,
) -> Result<(ControllerState, Vec<Action>)> {
    let mut s = state.clone();
    let mut actions = Vec::new();
    match (state.side, event) {
        (Side::Tx, Event::SnrUpdate(db)) => {
            s.desired_scheme = select_modulation(*db, config.symbol_period_s, &config.policy, &config.candidates).scheme;
            if s.pending_scheme.is_none() && s.desired_scheme != s.active_scheme {
                actions.push(s.request(s.desired_scheme));
            }
        }
        (Side::Tx, Event::Tick { payload }) => {
            if let Some(p) = s.pending_scheme {
                actions.push(Action::SendFrame(Frame::control(Flags::REQ, p, s.pending_seq)));
            } else if s.desired_scheme != s.active_scheme {
                actions.push(s.request(s.desired_scheme));
            } else if s.active_scheme != SchemeId::NoTx && !payload.is_empty() {
                let seq = s.take_seq();
                actions.push(Action::SendFrame(Frame::new(s.active_scheme, seq, Flags::DATA, payload.clone())?));
            }
        }
        (Side::Tx, Event::FrameRx(Ok(f))) => {
            if f.flags.switch_ack {
                match s.pending_scheme {
                    None => {
                        return Err(Error::ProtocolViolation(format!(
                            "SWITCH_ACK seq {} for {} with no pending switch",
                            f.seq, f.mod_id
                        )))
                    }
                    Some(p) if p == f.mod_id && s.pending_seq == f.seq => {
                        s.active_scheme = p;
                        s.pending_scheme = None;
                        s.stats.switches_completed += 1;
                        actions.push(Action::Switch(p));
                    }
                    // stale acknowledgement of an earlier request
                    Some(_) => {}
                }
            }
            s.stats.frames_ok += 1;
        }
        (Side::Rx, Event::FrameRx(Ok(f))) => {
            s.stats.frames_ok += 1;
            if f.flags.switch_req {
                if f.mod_id != s.active_scheme {
                    s.active_scheme = f.mod_id;
                    s.stats.switches_completed += 1;
                    actions.push(Action::Switch(f.mod_id));
                }
                actions.push(Action::SendFrame(Frame::control(Flags::ACK, f.mod_id, f.seq)));
            }
        }
        (_, Event::FrameRx(Err(DecodeFailure::HeaderFail))) => s.stats.header_fail += 1,
        (_, Event::FrameRx(Err(DecodeFailure::CrcFail))) => s.stats.frames_crc_fail += 1,
        (Side::Rx, Event::SnrUpdate(_) | Event::Tick { .. }) => {}
    }
    Ok((s, actions))
}
