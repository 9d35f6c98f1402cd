//! Round-trip one packet through the dump format and the detector: simulate,
//! write the CSV dump, read it back, detect, and print the per-symbol
//! posterior next to the ground truth.
//!
//! Run:
//! ```bash
//! cargo run --release --example packet_replay
//! ```

use fsk_pnc::detector::{detect, ChannelPrior, DetectorConfig};
use fsk_pnc::gaussian::{Convention, ReductionMethod};
use fsk_pnc::linalg::C64;
use fsk_pnc::signal::{simulate_packet, PacketDump, PacketScenario, SimMode, SystemParams};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn main() {
    let n = 24;
    let snr_db = 14.0;
    let n0 = 10f64.powf(-snr_db / 10.0);
    let params = SystemParams::default_link(n, n0);

    let mut rng = StdRng::seed_from_u64(5);
    let mut gauss = || {
        C64::new(
            rng.sample::<f64, _>(rand_distr::StandardNormal) / 2f64.sqrt(),
            rng.sample::<f64, _>(rand_distr::StandardNormal) / 2f64.sqrt(),
        )
    };
    let h_a = gauss();
    let h_b = gauss();
    let scenario = PacketScenario {
        bits_a: (0..n).map(|_| rng.random_range(0..2u8)).collect(),
        bits_b: (0..n).map(|_| rng.random_range(0..2u8)).collect(),
        h_a,
        h_b,
        f_a: 6000.0,
        f_b: 100.0,
        phi_a: rng.random_range(0.0..std::f64::consts::TAU),
        phi_b: rng.random_range(0.0..std::f64::consts::TAU),
        seed: 99,
    };

    let r = simulate_packet(&scenario, &params, SimMode::Approx).expect("simulate");
    let dump = PacketDump::from_simulation(&scenario, &params, r);

    // Serialize and parse back, as the `detect` subcommand would.
    let mut buf = Vec::new();
    dump.write_csv(&mut buf).expect("write dump");
    println!("== Packet dump ({} bytes) ==", buf.len());
    let text = String::from_utf8_lossy(&buf);
    for line in text.lines().take(4) {
        println!("{line}");
    }
    println!("... ({n} symbol records)\n");

    let parsed = PacketDump::read_csv(&buf[..]).expect("read dump");
    let truth = parsed.truth.clone().expect("dump carries ground truth");

    let cfg = DetectorConfig::new(
        4,
        ReductionMethod::Curtailment,
        vec![(truth.f_a, truth.f_b)],
        ChannelPrior::Rayleigh {
            var_a: 1.0,
            var_b: 1.0,
        },
        parsed.noise_var,
        Convention::Corrected,
    );
    let res = detect(&parsed.symbols, &params, &cfg).expect("detect");

    println!("== Replay at {snr_db} dB ==");
    println!("{:>4}{:>6}{:>6}{:>10}{:>8}", "sym", "xor*", "xor", "p(xor=1)", "ok");
    let expected = truth.xor_bits();
    let mut errors = 0;
    for i in 0..n {
        let ok = res.xor_bits[i] == expected[i];
        if !ok {
            errors += 1;
        }
        println!(
            "{i:>4}{:>6}{:>6}{:>10.4}{:>8}",
            expected[i],
            res.xor_bits[i],
            res.xor_pmf[i],
            if ok { "" } else { "<-- err" }
        );
    }
    println!(
        "\n{errors} XOR errors out of {n}; channel estimate at symbol 0: \
         ({:.3}{:+.3}i, {:.3}{:+.3}i)",
        res.h_est[0].0.re, res.h_est[0].0.im, res.h_est[0].1.re, res.h_est[0].1.im
    );
}
