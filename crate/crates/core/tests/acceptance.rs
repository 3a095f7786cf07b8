//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use modswitch::adapt::{
    adaptive_schedule, average_rate, delivered_rate, fixed_schedule, measure_schedule_ber, rate_matched_schedule,
    schedule_cost, select_modulation, threshold_table, db_grid, uniform_env_distribution, EnergyModel,
    EnvDistribution, EnvTuple, Mode, QoSPolicy,
};
use modswitch::link::{
    audit_tandem, decode_frame, encode_frame, run_session, snr_at, step_trajectory, switch_history, ControllerConfig,
    DecodeFailure, Flags, Frame, SessionConfig,
};
use modswitch::metrics::{ber_sweep, measure_ber, theoretical_ber};
use modswitch::modem::{build_scheme, demap_symbols, map_bits, SchemeId};

const TS: f64 = 1.0 / 3.0e6;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn env(lo: f64, hi: f64) -> EnvDistribution {
    uniform_env_distribution(lo, hi, 1.0, EnvTuple::new(0.0, SchemeId::NoTx, TS)).unwrap()
}

fn ber_oracle_agreement() -> Outcome {
    let grid: Vec<f64> = (0..=12).map(f64::from).collect();
    let mut checked = 0;
    let mut failures = Vec::new();
    for s in SchemeId::CORE {
        let k = s.bits_per_symbol() as u64;
        let bits = 1_000_000u64.div_ceil(k) * k;
        for p in ber_sweep(s, &grid, bits, 2024).unwrap() {
            if p.theory < 1e-4 {
                continue;
            }
            checked += 1;
            let tol = (3.0 * p.estimate.sigma_at(p.theory)).max(0.1 * p.theory);
            if (p.estimate.ber - p.theory).abs() > tol {
                failures.push(format!("{s}@{}dB {:.4e} vs {:.4e}", p.ebn0_db, p.estimate.ber, p.theory));
            }
        }
    }
    outcome(failures.is_empty(), format!("{checked} points checked, {} outside tolerance {:?}", failures.len(), failures))
}

fn point_checks() -> Outcome {
    let b = measure_ber(SchemeId::Bpsk, 0.0, 1_000_000, 7).unwrap();
    let b_ok = (b.ber - 0.0786).abs() <= 3.0 * b.sigma_at(0.0786);
    let q = measure_ber(SchemeId::Qam16, 10.0, 1_000_000, 8).unwrap();
    let q_ok = (q.ber - 1.75e-3).abs() <= (3.0 * q.sigma_at(1.75e-3)).max(0.1 * 1.75e-3);
    let bt = theoretical_ber(SchemeId::Bpsk, 0.0).unwrap();
    let qt = theoretical_ber(SchemeId::Qam16, 10.0).unwrap();
    let t_ok = (bt - 0.0786).abs() < 1e-4 && (qt - 1.75e-3).abs() < 0.1 * 1.75e-3;
    outcome(
        b_ok && q_ok && t_ok,
        format!(
            "BPSK 0 dB measured {:.5} (closed form {bt:.5}); QAM16 10 dB measured {:.4e} (closed form {qt:.4e})",
            b.ber, q.ber
        ),
    )
}

fn threshold_consistency() -> Outcome {
    let p = QoSPolicy::default().with_mode(Mode::MaxRate).with_target(1e-2);
    let grid = db_grid(-10.0, 40.0, 0.1).unwrap();
    let t = threshold_table(&p, TS, &SchemeId::CORE, &grid).unwrap();
    let first = t.iter().find(|x| matches!(x.scheme, SchemeId::Bpsk | SchemeId::Qpsk));
    let increasing = t.windows(2).all(|w| w[0].threshold_db < w[1].threshold_db && w[0].scheme < w[1].scheme);
    let table: Vec<String> = t.iter().map(|x| format!("{}@{}", x.scheme, x.threshold_db)).collect();
    match first {
        Some(f) => outcome(
            (f.threshold_db - 4.3).abs() <= 0.2 + 1e-9 && increasing,
            format!("BPSK/QPSK switch-on {} dB; table {}", f.threshold_db, table.join(" ")),
        ),
        None => outcome(false, "BPSK/QPSK never selected"),
    }
}

fn table_ii_direction() -> Outcome {
    // (a) exact dominance of the cost-optimal schedule
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut dists = vec![env(0.0, 25.0), env(5.0, 12.0), env(7.0, 7.0)];
    for _ in 0..200 {
        let n = rng.random_range(1..30);
        let support: Vec<EnvTuple> = (0..n)
            .map(|_| EnvTuple {
                fading_gain: rng.random_range(0.1..1.5),
                interference_power: if rng.random_bool(0.3) { rng.random_range(0.0..0.05) } else { 0.0 },
                ..EnvTuple::new(rng.random_range(-10.0..35.0), SchemeId::NoTx, TS)
            })
            .collect();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
        let total: f64 = w.iter().sum();
        dists.push(EnvDistribution::new(support, w.iter().map(|x| x / total).collect()).unwrap());
    }
    let mut worst_margin = f64::INFINITY;
    let mut dominated = true;
    for (i, d) in dists.iter().enumerate() {
        for energy in [EnergyModel::ConstantEb, EnergyModel::ConstantPower] {
            let p = QoSPolicy { energy, ..QoSPolicy::default().with_mode(Mode::CostOptimal) };
            let cands: &[SchemeId] = if i % 2 == 0 { &SchemeId::CORE } else { &SchemeId::ACTIVE };
            let a = schedule_cost(d, &adaptive_schedule(d, &p, cands), &p).unwrap();
            for &s in cands {
                let f = schedule_cost(d, &fixed_schedule(d, s), &p).unwrap();
                dominated &= a <= f;
                worst_margin = worst_margin.min(f - a);
            }
        }
    }

    // (b) Monte Carlo pooled BER at matched rate
    let d = env(0.0, 25.0);
    let mut lines = Vec::new();
    let mut gate = false;
    for rate in [12e6, 3e6] {
        let energy = EnergyModel::ConstantEb;
        let schedule = rate_matched_schedule(&d, energy, &SchemeId::CORE, rate).unwrap().unwrap();
        let a = measure_schedule_ber(&d, &schedule, energy, 1_000_000, 99).unwrap().unwrap();
        let best = SchemeId::CORE
            .iter()
            .filter(|s| average_rate(&d, &fixed_schedule(&d, **s)).unwrap() >= rate * (1.0 - 1e-9))
            .map(|&s| (s, measure_schedule_ber(&d, &fixed_schedule(&d, s), energy, 1_000_000, 99).unwrap().unwrap()))
            .min_by(|x, y| x.1.ber.total_cmp(&y.1.ber))
            .unwrap();
        let decrease = 100.0 * (1.0 - a.ber / best.1.ber);
        if rate == 12e6 {
            gate = decrease >= 20.0;
        }
        lines.push(format!(
            "{} Mbps: adaptive {:.4e} vs fixed {} {:.4e}, decrease {decrease:.1}%",
            rate / 1e6,
            a.ber,
            best.0,
            best.1.ber
        ));
    }
    outcome(
        dominated && gate,
        format!(
            "dominance over {} distributions: {} (min margin {worst_margin:.3e}); {}",
            dists.len(),
            if dominated { "holds" } else { "VIOLATED" },
            lines.join("; ")
        ),
    )
}

fn table_iii_direction() -> Outcome {
    let target = 1e-3;
    let mut exact = true;
    for d in [env(0.0, 25.0), env(5.0, 12.0), env(9.0, 9.0)] {
        for energy in [EnergyModel::ConstantEb, EnergyModel::ConstantPower] {
            for cands in [&SchemeId::CORE[..], &SchemeId::ACTIVE[..]] {
                let p = QoSPolicy { energy, ..QoSPolicy::default().with_mode(Mode::MaxRate).with_target(target) };
                let a = delivered_rate(&d, &adaptive_schedule(&d, &p, cands), energy, target).unwrap();
                for &s in cands {
                    exact &= a >= delivered_rate(&d, &fixed_schedule(&d, s), energy, target).unwrap();
                }
            }
        }
    }
    let d = env(0.0, 25.0);
    let gain = |energy| {
        let p = QoSPolicy { energy, ..QoSPolicy::default().with_mode(Mode::MaxRate).with_target(target) };
        let a = delivered_rate(&d, &adaptive_schedule(&d, &p, &SchemeId::CORE), energy, target).unwrap();
        let (s, best) = SchemeId::CORE
            .iter()
            .map(|&s| (s, delivered_rate(&d, &fixed_schedule(&d, s), energy, target).unwrap()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        (a, s, best, 100.0 * (a / best - 1.0))
    };
    let (a, s, best, g) = gain(EnergyModel::ConstantPower);
    let (ae, se, beste, ge) = gain(EnergyModel::ConstantEb);
    outcome(
        exact && g >= 50.0,
        format!(
            "adaptive >= every fixed: {exact}; constant power: {:.3} vs {s} {:.3} Mbps, +{g:.1}%; \
             (constant Eb, informational: {:.3} vs {se} {:.3} Mbps, +{ge:.1}%)",
            a / 1e6,
            best / 1e6,
            ae / 1e6,
            beste / 1e6
        ),
    )
}

fn modem_suite() -> Outcome {
    let mut problems = Vec::new();
    for id in SchemeId::ACTIVE {
        let m = build_scheme(id);
        let pts = m.points();
        let energy = pts.iter().map(|p| p.norm_sqr()).sum::<f64>() / pts.len() as f64;
        if (energy - 1.0).abs() > 0.01 {
            problems.push(format!("{id} energy {energy}"));
        }
        let dmin = m.min_distance();
        let mut pairs = 0;
        for a in 0..pts.len() {
            for b in a + 1..pts.len() {
                if ((pts[a] - pts[b]).norm() - dmin).abs() < 1e-9 {
                    pairs += 1;
                    if (a ^ b).count_ones() != 1 {
                        problems.push(format!("{id} labels {a} {b} not Gray"));
                    }
                    let mid = (pts[a] + pts[b]) / 2.0;
                    let l1 = m.nearest_label(mid);
                    if l1 != a.min(b) || m.nearest_label(mid) != l1 {
                        problems.push(format!("{id} tie {a}/{b} -> {l1}"));
                    }
                }
            }
        }
        if pairs == 0 {
            problems.push(format!("{id} has no neighbour pairs"));
        }
        let k = id.bits_per_symbol();
        let bits: Vec<u8> = (0..pts.len()).flat_map(|l| (0..k).rev().map(move |i| ((l >> i) & 1) as u8)).collect();
        let block = map_bits(&bits, &m).unwrap();
        if demap_symbols(&block.symbols, &m).unwrap() != bits {
            problems.push(format!("{id} round trip"));
        }
        if m.nearest_label(Complex64::new(0.0, 0.0)) != m.nearest_label(Complex64::new(0.0, 0.0)) {
            problems.push(format!("{id} origin tie unstable"));
        }
    }
    outcome(problems.is_empty(), format!("6 schemes, problems: {problems:?}"))
}

fn handshake_suite() -> Outcome {
    let levels = [2.0, 5.0, 8.0, 11.0, 14.0, 17.0, 20.0, 23.0, 25.0];
    let traj = step_trajectory(&levels, 40.0);
    let config = SessionConfig::new(
        ControllerConfig {
            policy: QoSPolicy::default().with_mode(Mode::MaxRate).with_target(1e-3),
            symbol_period_s: TS,
            candidates: SchemeId::CORE.to_vec(),
        },
        360,
    );
    let header_ok = |db: f64| (1.0 - theoretical_ber(SchemeId::Bpsk, db).unwrap()).powi(64) >= 0.99;
    let (mut tandem, mut late, mut checked, mut switches, mut non_monotone) = (0, 0, 0, 0, 0);
    for seed in 0..100 {
        let r = run_session(&traj, &config, seed).unwrap();
        tandem += audit_tandem(&r.log).len();
        let h = switch_history(&r.log);
        switches += h.len();
        non_monotone += h.windows(2).filter(|w| w[0].scheme >= w[1].scheme).count();
        for s in &h {
            if !header_ok(snr_at(&traj, s.requested_at as f64)) || s.requested_at + 10 >= config.duration_ticks {
                continue;
            }
            checked += 1;
            if s.delay_ticks().is_none_or(|d| d > 10) {
                late += 1;
            }
        }
    }

    // QAM16 payload read as QPSK, with further traffic behind the frame so
    // the QPSK reader always finds enough symbols
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let qam16 = build_scheme(SchemeId::Qam16);
    let trials = 100_000;
    let mut crc_fail = 0;
    for i in 0..trials {
        let payload: Vec<u8> = (0..96).map(|_| rng.random::<bool>() as u8).collect();
        let f = Frame::new(SchemeId::Qam16, (i % 256) as u8, Flags::DATA, payload).unwrap();
        let mut block = encode_frame(&f, SchemeId::Bpsk, SchemeId::Qam16).unwrap();
        let tail: Vec<u8> = (0..96).map(|_| rng.random::<bool>() as u8).collect();
        block.symbols.extend(map_bits(&tail, &qam16).unwrap().symbols);
        if decode_frame(&block, SchemeId::Bpsk, SchemeId::Qpsk) == Err(DecodeFailure::CrcFail) {
            crc_fail += 1;
        }
    }
    let frac = crc_fail as f64 / trials as f64;
    let need = 1.0 - 2f64.powi(-15);
    outcome(
        tandem == 0 && late == 0 && non_monotone == 0 && switches > 0 && frac >= need,
        format!(
            "100 sessions: {switches} switches, {tandem} tandem violations, {late}/{checked} eligible switches late, \
             {non_monotone} downward steps; mismatch CrcFail {crc_fail}/{trials}"
        ),
    )
}

fn cli_determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_modswitch");
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("traj.txt");
    std::fs::write(&traj, "# staircase\n0 2\n40 5\n80 8\n120 11\n160 14\n200 17\n240 20\n280 23\n320 25\n").unwrap();
    let traj = traj.to_str().unwrap().to_string();
    let commands: Vec<(&str, Vec<&str>)> = vec![
        ("ber-sweep", vec!["--bits", "100000"]),
        ("adapt-compare", vec!["--bits", "100000", "--rate", "12e6"]),
        ("rate-compare", vec!["--energy", "constant-power"]),
        ("thresholds", vec!["--target-ber", "1e-2"]),
        ("session", vec!["--trajectory", &traj, "--duration", "360"]),
    ];
    let run = |cmd: &str, extra: &[&str], out: &Path| {
        Command::new(bin)
            .arg(cmd)
            .args(extra)
            .args(["--seed", "42", "--out", out.to_str().unwrap()])
            .output()
            .map(|o| o.status.success())
            .unwrap_or(false)
    };
    let mut bad = Vec::new();
    for (cmd, extra) in &commands {
        let a = dir.path().join(format!("{cmd}-a.csv"));
        let b = dir.path().join(format!("{cmd}-b.csv"));
        if !(run(cmd, extra, &a) && run(cmd, extra, &b)) {
            bad.push(format!("{cmd} failed"));
            continue;
        }
        if std::fs::read(&a).unwrap() != std::fs::read(&b).unwrap() {
            bad.push(format!("{cmd} differs"));
        }
    }
    outcome(bad.is_empty(), format!("{} commands rerun, problems: {bad:?}", commands.len()))
}

fn main() -> ExitCode {
    // keep the selector's totality visible even when everything else passes
    assert_eq!(select_modulation(f64::NAN, TS, &QoSPolicy::default(), &SchemeId::CORE).scheme, SchemeId::NoTx);

    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("BER oracle agreement", ber_oracle_agreement),
        ("point checks", point_checks),
        ("threshold consistency", threshold_consistency),
        ("adaptive vs fixed BER", table_ii_direction),
        ("adaptive vs fixed rate", table_iii_direction),
        ("modem properties", modem_suite),
        ("handshake", handshake_suite),
        ("CLI determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {}: {} {name} ({:.1} s): {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
