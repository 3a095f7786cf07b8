//! Distance to Eb/N0 through free-space loss, and what the selector picks
//! at each distance when the transmit power is fixed.
//!
//! cargo run --example link_budget

use modswitch::adapt::{select_for, EnergyModel, EnvTuple, Mode, QoSPolicy};
use modswitch::channel::{fspl_db, link_budget_ebn0, LinkBudget};
use modswitch::modem::SchemeId;

fn main() {
    let ts = 1.0 / 3.0e6;
    let budget = LinkBudget::default();
    let policy = QoSPolicy {
        energy: EnergyModel::ConstantPower,
        ..QoSPolicy::default().with_mode(Mode::MaxRate).with_target(1e-3)
    };
    println!(
        "{} dBm at {} MHz, noise {} dBm/Hz, symbol rate {:.3} Msym/s",
        budget.tx_power_dbm,
        budget.carrier_hz / 1e6,
        budget.noise_psd_dbm_hz,
        1e-6 / ts
    );
    println!("{:>8} {:>9} {:>12} {:>8} {:>10}", "dist m", "FSPL dB", "Es/N0 dB", "scheme", "Mbit/s");
    for d in [10.0, 30.0, 100.0, 300.0, 1000.0, 3000.0, 10000.0] {
        let lb = budget.with_distance(d);
        let z = EnvTuple::from_link_budget(&lb, SchemeId::NoTx, ts).unwrap();
        let sel = select_for(&z, &policy, &SchemeId::CORE);
        let rate = sel.chosen().map_or(0.0, |c| c.rate_bps / 1e6);
        println!(
            "{d:>8} {:>9.2} {:>12.2} {:>8} {rate:>10}",
            fspl_db(d, lb.carrier_hz),
            z.ebn0_db,
            sel.scheme
        );
    }

    // Eb/N0 drops 3 dB per doubling of the bit rate
    for rate in [1e6, 2e6, 4e6] {
        println!("Eb/N0 at {} Mbit/s, 100 m: {:.2} dB", rate / 1e6, link_budget_ebn0(&budget, rate).unwrap());
    }
}
