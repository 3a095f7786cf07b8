//! Framed link with an in-band modulation switch handshake.

mod controller;
mod frame;
mod session;

pub use controller::{controller_step, Action, ControllerConfig, ControllerState, Event, LinkStats, Side};
pub use frame::{
    decode_frame, encode_frame, header_symbols, pack_bits, payload_symbols, DecodeFailure, Flags, Frame, CRC16,
    HEADER_BITS, MAX_PAYLOAD_BITS, PREAMBLE, VERSION,
};
pub use session::{
    audit_tandem, log_from_csv, log_to_csv, run_session, snr_at, step_trajectory, switch_history, validate_trajectory,
    LogEvent, LogRecord, SessionConfig, SessionReport, SwitchRecord, TandemViolation, LOG_HEADER,
};
