//! Prints every constellation with its Gray labels and checks the basic
//! properties: unit energy, nearest neighbours one bit apart, and a clean
//! noiseless round trip.
//!
//! cargo run --example constellations

use modswitch::modem::{build_scheme, demap_symbols, map_bits, SchemeId};

fn main() {
    for id in SchemeId::ACTIVE {
        let m = build_scheme(id);
        let (i_levels, q_levels) = id.grid();
        let pts = m.points();
        let energy = pts.iter().map(|p| p.norm_sqr()).sum::<f64>() / pts.len() as f64;
        println!(
            "{id}: M = {}, {} bits/symbol, {i_levels}x{q_levels} grid, mean energy {energy:.6}, d_min {:.4}",
            m.order(),
            m.bits_per_symbol(),
            m.min_distance()
        );

        let mut neighbours = 0;
        let mut non_gray = 0;
        for a in 0..pts.len() {
            for b in a + 1..pts.len() {
                if ((pts[a] - pts[b]).norm() - m.min_distance()).abs() < 1e-9 {
                    neighbours += 1;
                    non_gray += ((a ^ b).count_ones() != 1) as usize;
                }
            }
        }
        println!("  {neighbours} nearest-neighbour pairs, {non_gray} differ in more than one bit");

        if pts.len() <= 16 {
            let k = m.bits_per_symbol();
            for (label, p) in pts.iter().enumerate() {
                println!("  {label:0k$b} -> ({:+.4}, {:+.4})", p.re, p.im);
            }
        }

        let k = m.bits_per_symbol();
        let bits: Vec<u8> = (0..pts.len()).flat_map(|l| (0..k).rev().map(move |s| ((l >> s) & 1) as u8)).collect();
        let back = demap_symbols(&map_bits(&bits, &m).unwrap().symbols, &m).unwrap();
        println!("  round trip {}", if back == bits { "exact" } else { "BROKEN" });
    }
}
