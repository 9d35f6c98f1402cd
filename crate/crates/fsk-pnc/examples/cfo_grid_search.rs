//! Joint CFO estimation by evidence: run the detector over a uniform grid of
//! CFO hypotheses and print the log-evidence surface. The mass concentrates
//! near the true pair even though no preamble or pilot exists.
//!
//! Run:
//! ```bash
//! cargo run --release --example cfo_grid_search
//! ```

use fsk_pnc::detector::{detect, ChannelPrior, DetectorConfig};
use fsk_pnc::gaussian::{Convention, ReductionMethod};
use fsk_pnc::linalg::C64;
use fsk_pnc::signal::{simulate_packet, PacketScenario, SimMode, SystemParams};
use fsk_pnc::sim::{detector_grid, CfoModel};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn main() {
    let n = 128;
    let snr_db = 14.0;
    let n0 = 10f64.powf(-snr_db / 10.0);
    let params = SystemParams::default_link(n, n0);
    let true_f = (6000.0, 100.0);

    let mut rng = StdRng::seed_from_u64(17);
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
        f_a: true_f.0,
        f_b: true_f.1,
        phi_a: rng.random_range(0.0..std::f64::consts::TAU),
        phi_b: rng.random_range(0.0..std::f64::consts::TAU),
        seed: 3,
    };
    let r = simulate_packet(&scenario, &params, SimMode::Approx).expect("simulate");

    let grid = detector_grid(&CfoModel::Uniform, params.cfo_max, 2500.0);
    let axis_len = (grid.len() as f64).sqrt() as usize;
    let cfg = DetectorConfig::new(
        4,
        ReductionMethod::Curtailment,
        grid.clone(),
        ChannelPrior::Rayleigh {
            var_a: 1.0,
            var_b: 1.0,
        },
        n0,
        Convention::Corrected,
    );
    let res = detect(&r, &params, &cfg).expect("detect");

    println!("== Log evidence over the CFO grid (row: f_a, col: f_b, kHz) ==");
    println!(
        "true pair ({}, {}) Hz, {n}-symbol packet at {snr_db} dB\n",
        true_f.0, true_f.1
    );
    let max = res
        .per_f_loglik
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);

    print!("{:>7}", "");
    for j in 0..axis_len {
        print!("{:>8.1}", grid[j].1 / 1e3);
    }
    println!();
    for i in 0..axis_len {
        print!("{:>7.1}", grid[i * axis_len].0 / 1e3);
        for j in 0..axis_len {
            let v = res.per_f_loglik[i * axis_len + j] - max;
            if v > -0.5 {
                print!("{:>8}", "*PEAK*");
            } else if v > -50.0 {
                print!("{v:>8.1}");
            } else {
                print!("{:>8}", ".");
            }
        }
        println!();
    }

    let best = res
        .per_f_loglik
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| grid[i])
        .unwrap();
    let errors = res
        .xor_bits
        .iter()
        .zip(&scenario.xor_bits())
        .filter(|(a, b)| a != b)
        .count();
    println!(
        "\nevidence peak at ({}, {}) Hz; XOR errors after marginalization: {errors}/{n}",
        best.0, best.1
    );
    println!("(the mirrored peak is the user-relabeling twin: with a symmetric");
    println!("channel prior the evidence is invariant under swapping the two");
    println!("users, and the XOR target does not distinguish them; residual");
    println!("quantization of the 2.5 kHz lattice limits high-SNR performance -");
    println!("shrink the step for finer estimates at linear cost in grid points)");
}
