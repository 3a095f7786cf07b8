//! Monte Carlo BER against the closed form for the four core schemes,
//! printed as a table and written as CSV (pass a path to save it).
//!
//! cargo run --release --example ber_curves -- ber.csv

use modswitch::metrics::{approx_ber, ber_sweep, required_ebn0_db};
use modswitch::modem::SchemeId;

fn main() {
    let grid: Vec<f64> = (0..=12).map(f64::from).collect();
    let bits = 600_000; // a multiple of every k in the core set
    let mut csv = String::from("ebn0_db,scheme,ber_measured,ber_theory,ber_nearest_neighbour\n");

    println!("{:>5} {:>7} {:>12} {:>12} {:>12}", "dB", "scheme", "measured", "exact", "approx");
    for s in SchemeId::CORE {
        for p in ber_sweep(s, &grid, bits, 17).unwrap() {
            let approx = approx_ber(s, p.ebn0_db).unwrap();
            println!(
                "{:>5} {:>7} {:>12.4e} {:>12.4e} {:>12.4e}",
                p.ebn0_db, s, p.estimate.ber, p.theory, approx
            );
            csv.push_str(&format!("{},{},{:e},{:e},{:e}\n", p.ebn0_db, s, p.estimate.ber, p.theory, approx));
        }
    }

    println!();
    for target in [1e-2, 1e-3, 1e-5] {
        let row: Vec<String> = SchemeId::CORE
            .iter()
            .map(|&s| format!("{s} {:.2} dB", required_ebn0_db(s, target).unwrap()))
            .collect();
        println!("Eb/N0 for BER {target:e}: {}", row.join(", "));
    }

    if let Some(path) = std::env::args().nth(1) {
        std::fs::write(&path, csv).unwrap();
        println!("wrote {path}");
    }
}
