//! A session over a rising Eb/N0 staircase: the transmitter negotiates each
//! switch with the receiver before sending data in the new scheme. Prints
//! the control traffic, the link statistics and the tandem audit.
//!
//! cargo run --example handshake_session

use modswitch::adapt::{Mode, QoSPolicy};
use modswitch::link::{
    audit_tandem, run_session, step_trajectory, switch_history, ControllerConfig, LogEvent, SessionConfig,
};
use modswitch::modem::SchemeId;

fn main() {
    let traj = step_trajectory(&[2.0, 5.0, 8.0, 11.0, 14.0, 17.0, 20.0, 23.0, 25.0, 12.0], 40.0);
    let config = SessionConfig::new(
        ControllerConfig {
            policy: QoSPolicy::default().with_mode(Mode::MaxRate).with_target(1e-3),
            symbol_period_s: 1.0 / 3.0e6,
            candidates: SchemeId::CORE.to_vec(),
        },
        400,
    );
    let report = run_session(&traj, &config, 2024).unwrap();

    for r in report.log.iter().filter(|r| !matches!(r.event, LogEvent::DataTx | LogEvent::DataRx)) {
        let seq = r.seq.map(|s| s.to_string()).unwrap_or_default();
        println!("t={:>3} {} {:<9} {:<6} {:>3} {}", r.time, r.side.as_str(), r.event.as_str(), r.scheme, seq, r.outcome);
    }
    let s = &report.stats;
    println!();
    println!("frames ok {}, crc failures {}, header failures {}", s.frames_ok, s.frames_crc_fail, s.header_fail);
    println!("payload bits {} ({} in error), throughput {:.3} Mbit/s", s.payload_bits, s.payload_bit_errors, s.throughput_bps / 1e6);
    for h in switch_history(&report.log) {
        println!("switch to {} requested at t={} took {:?} ticks", h.scheme, h.requested_at, h.delay_ticks());
    }
    println!("tandem violations: {}", audit_tandem(&report.log).len());
}
