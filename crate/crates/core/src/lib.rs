//! Adaptive modulation switching over a simulated radio link.
//!
//! [`modem`] maps bits onto Gray-labelled QAM grids, [`channel`] adds AWGN
//! (optionally with Rayleigh fading and interference), [`metrics`] gives
//! closed-form and Monte Carlo bit error rates, [`adapt`] picks a scheme
//! per channel state under a QoS policy, and [`link`] runs the framed
//! request/acknowledge handshake that keeps both ends on the same scheme.
//!
//! The examples directory walks through each piece:
//!
//! - `constellations`: labels, energy and Gray adjacency of every scheme
//! - `ber_curves`: measured against closed-form BER
//! - `link_budget`: distance to Eb/N0 and the scheme picked at each range
//! - `threshold_report`: switch thresholds and candidate reports
//! - `adaptive_vs_fixed`: pooled BER at matched rate, expected cost
//! - `rate_gain`: delivered rate at a target BER
//! - `handshake_session`: a full session with its control log
//!
//! ```
//! use modswitch::adapt::{select_modulation, Mode, QoSPolicy};
//! use modswitch::modem::SchemeId;
//!
//! let policy = QoSPolicy::default().with_mode(Mode::MaxRate).with_target(1e-2);
//! let sel = select_modulation(13.0, 1.0 / 3.0e6, &policy, &SchemeId::CORE);
//! assert_eq!(sel.scheme, SchemeId::Qam64);
//! ```

pub mod adapt;
pub mod cli;
pub mod channel;
pub mod config;
pub mod error;
pub mod link;
pub mod metrics;
pub mod modem;
pub mod seed;
