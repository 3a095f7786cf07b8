//! Switch-on thresholds for several target BERs and both energy models,
//! plus the full candidate report at one operating point.
//!
//! cargo run --example threshold_report

use modswitch::adapt::{db_grid, select_modulation, threshold_table, EnergyModel, Mode, QoSPolicy};
use modswitch::modem::SchemeId;

fn main() {
    let ts = 1.0 / 3.0e6;
    let grid = db_grid(-5.0, 40.0, 0.1).unwrap();
    for energy in [EnergyModel::ConstantEb, EnergyModel::ConstantPower] {
        println!("{energy:?}");
        for target in [1e-2, 1e-3, 1e-5] {
            let p = QoSPolicy { energy, ..QoSPolicy::default().with_mode(Mode::MaxRate).with_target(target) };
            let t = threshold_table(&p, ts, &SchemeId::ACTIVE, &grid).unwrap();
            let row: Vec<String> = t.iter().map(|x| format!("{} {:.1}", x.scheme, x.threshold_db)).collect();
            println!("  target {target:e}: {}", row.join(" | "));
        }
    }

    println!();
    let p = QoSPolicy::default().with_mode(Mode::MaxRate).with_target(1e-2);
    let sel = select_modulation(5.0, ts, &p, &SchemeId::CORE);
    println!("max-rate at 5 dB, target 1e-2 -> {}", sel.scheme);
    for c in &sel.candidates {
        println!(
            "  {:>6} BER {:.3e} rate {:>5} Mbit/s cost {:.3e} {}",
            c.scheme,
            c.ber,
            c.rate_bps / 1e6,
            c.cost,
            if c.feasible { "feasible" } else { "" }
        );
    }

    for (name, preset) in [("microcode", QoSPolicy::microcode()), ("video", QoSPolicy::video())] {
        let row: Vec<String> = [6.0, 9.0, 12.0, 15.0, 18.0]
            .iter()
            .map(|&db| format!("{db} dB {}", select_modulation(db, ts, &preset, &SchemeId::CORE).scheme))
            .collect();
        println!("{name} preset: {}", row.join(", "));
    }
}
