//! Average delivered rate at a target BER: fixed schemes against max-rate
//! switching, under both energy models.
//!
//! cargo run --example rate_gain

use modswitch::adapt::{
    adaptive_schedule, delivered_rate, fixed_schedule, uniform_env_distribution, EnergyModel, EnvTuple, Mode,
    QoSPolicy,
};
use modswitch::modem::SchemeId;

fn main() {
    let ts = 1.0 / 3.0e6;
    let dist = uniform_env_distribution(0.0, 25.0, 1.0, EnvTuple::new(0.0, SchemeId::NoTx, ts)).unwrap();
    for target in [1e-3, 1e-5] {
        for energy in [EnergyModel::ConstantEb, EnergyModel::ConstantPower] {
            let p = QoSPolicy { energy, ..QoSPolicy::default().with_mode(Mode::MaxRate).with_target(target) };
            let adaptive = delivered_rate(&dist, &adaptive_schedule(&dist, &p, &SchemeId::CORE), energy, target).unwrap();
            println!("target {target:e}, {energy:?}: adaptive {:.3} Mbit/s", adaptive / 1e6);
            for s in SchemeId::CORE {
                let r = delivered_rate(&dist, &fixed_schedule(&dist, s), energy, target).unwrap();
                let gain = if r > 0.0 { format!("{:.1}%", 100.0 * (adaptive / r - 1.0)) } else { "n/a".into() };
                println!("  fixed {s:>6} {:>7.3} Mbit/s  adaptive gain {gain:>7}", r / 1e6);
            }
        }
    }
}
