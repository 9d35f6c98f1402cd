//! BER vs SNR for the belief-propagation detector at several component
//! budgets, benchmarked against the perfect-knowledge coherent detector.
//!
//! Run:
//! ```bash
//! cargo run --release --example gmr_sweep [packets_per_point]
//! ```

use fsk_pnc::gaussian::{Convention, ReductionMethod};
use fsk_pnc::sim::{run_sweep, CfoModel, ChannelModel, DetectorSpec, PriorMode, Scenario};

fn main() {
    let packets: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(500);

    let mut detectors: Vec<DetectorSpec> = (1..=5)
        .map(|gmr| DetectorSpec::Bp {
            gmr,
            reduction: ReductionMethod::Curtailment,
            prior: PriorMode::Rayleigh,
        })
        .collect();
    detectors.push(DetectorSpec::PerfCd);

    let scenario = Scenario {
        id: "gmr_sweep".into(),
        channel: ChannelModel::Rayleigh {
            var_a: 1.0,
            var_b: 1.0,
        },
        cfo: CfoModel::Fixed(6000.0, 100.0),
        snr_grid_db: vec![0.0, 4.0, 8.0, 12.0, 16.0, 20.0, 24.0],
        packets_per_point: packets,
        detectors,
        seed: 7,
        n_symbols: 128,
        cfo_grid_step_hz: 2500.0,
        convention: Convention::Corrected,
    };

    println!("== XOR BER vs SNR, curtailment with varying component budget ==");
    println!(
        "Rayleigh channels, 128-symbol packets, CFOs ({}, {}) Hz, {} packets/point\n",
        6000, 100, packets
    );

    let rows = run_sweep(&scenario).expect("sweep");
    print!("{:>7}", "snr_db");
    for gmr in 1..=5 {
        print!("{:>12}", format!("gmr={gmr}"));
    }
    println!("{:>12}", "perfcd");
    for &snr in &scenario.snr_grid_db {
        print!("{snr:>7}");
        for gmr in 1..=5 {
            let ber = rows
                .iter()
                .find(|r| r.snr_db == snr && r.detector == "bpcd" && r.gmr == gmr)
                .map(|r| r.ber)
                .unwrap();
            print!("{ber:>12.5}");
        }
        let perfcd = rows
            .iter()
            .find(|r| r.snr_db == snr && r.detector == "perfcd")
            .map(|r| r.ber)
            .unwrap();
        println!("{perfcd:>12.5}");
    }

    println!("\nA budget of one component cannot follow the four-way hypothesis");
    println!("branching and loses several dB; budgets of three to five are nearly");
    println!("indistinguishable and sit within a fraction of a dB of the ideal");
    println!("detector at high SNR.");
}
