//! Pooled BER of fixed schemes and of rate-matched switching over a uniform
//! 0-25 dB environment, closed form and Monte Carlo side by side, and the
//! expected cost of the cost-optimal selector.
//!
//! cargo run --release --example adaptive_vs_fixed

use modswitch::adapt::{
    adaptive_schedule, average_rate, fixed_schedule, measure_schedule_ber, pooled_ber, rate_matched_schedule,
    schedule_cost, uniform_env_distribution, EnergyModel, EnvTuple, Mode, QoSPolicy,
};
use modswitch::modem::SchemeId;

fn main() {
    let ts = 1.0 / 3.0e6;
    let dist = uniform_env_distribution(0.0, 25.0, 1.0, EnvTuple::new(0.0, SchemeId::NoTx, ts)).unwrap();
    let energy = EnergyModel::ConstantEb;
    let bits = 400_000;

    for rate in [3e6, 6e6, 12e6] {
        println!("matched rate {} Mbit/s", rate / 1e6);
        let mut rows = Vec::new();
        for s in SchemeId::CORE {
            let sched = fixed_schedule(&dist, s);
            if average_rate(&dist, &sched).unwrap() >= rate * (1.0 - 1e-9) {
                rows.push((format!("fixed {s}"), sched));
            }
        }
        let adaptive = rate_matched_schedule(&dist, energy, &SchemeId::CORE, rate).unwrap().unwrap();
        let picks: Vec<String> = adaptive.iter().map(|s| s.to_string()).collect();
        println!("  adaptive per state (0..25 dB): {}", picks.join(" "));
        rows.push(("adaptive".into(), adaptive));
        for (name, sched) in &rows {
            let theory = pooled_ber(&dist, sched, energy).unwrap().unwrap();
            let mc = measure_schedule_ber(&dist, sched, energy, bits, 1).unwrap().unwrap();
            println!(
                "  {name:>12}: rate {:>6.3} Mbit/s, BER {theory:.3e} (measured {:.3e} +- {:.1e})",
                average_rate(&dist, sched).unwrap() / 1e6,
                mc.ber,
                mc.ci95_halfwidth
            );
        }
    }

    let policy = QoSPolicy::default().with_mode(Mode::CostOptimal);
    let best = adaptive_schedule(&dist, &policy, &SchemeId::CORE);
    println!("expected cost, equal weights:");
    println!("  cost-optimal {:.4e}", schedule_cost(&dist, &best, &policy).unwrap());
    for s in SchemeId::CORE {
        println!("  fixed {s:>6} {:.4e}", schedule_cost(&dist, &fixed_schedule(&dist, s), &policy).unwrap());
    }
}
