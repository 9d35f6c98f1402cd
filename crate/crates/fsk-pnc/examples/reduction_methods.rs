//! Compare the three mixture-reduction strategies on BER and channel-MSE:
//! curtailment (keep the heaviest components), the single-Gaussian moment
//! match, and the hybrid that keeps the heaviest components plus a matched
//! remainder.
//!
//! Run:
//! ```bash
//! cargo run --release --example reduction_methods [packets_per_point]
//! ```

use fsk_pnc::gaussian::{Convention, ReductionMethod};
use fsk_pnc::sim::{run_sweep, CfoModel, ChannelModel, DetectorSpec, PriorMode, Scenario};

fn main() {
    let packets: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(500);

    let methods = [
        ReductionMethod::Curtailment,
        ReductionMethod::GaussianApprox,
        ReductionMethod::Hybrid,
    ];
    let scenario = Scenario {
        id: "reduction_methods".into(),
        channel: ChannelModel::Rayleigh {
            var_a: 1.0,
            var_b: 1.0,
        },
        cfo: CfoModel::Fixed(6000.0, 100.0),
        snr_grid_db: vec![0.0, 8.0, 16.0, 24.0, 32.0, 40.0],
        packets_per_point: packets,
        detectors: methods
            .iter()
            .map(|&reduction| DetectorSpec::Bp {
                gmr: 4,
                reduction,
                prior: PriorMode::Rayleigh,
            })
            .collect(),
        seed: 11,
        n_symbols: 128,
        cfo_grid_step_hz: 2500.0,
        convention: Convention::Corrected,
    };

    println!("== Reduction strategies at a budget of 4 components ==\n");
    let rows = run_sweep(&scenario).expect("sweep");

    for (title, field) in [("XOR BER", 0usize), ("channel MSE", 1usize)] {
        println!("{title}:");
        print!("{:>7}", "snr_db");
        for m in &methods {
            print!("{:>16}", m.label());
        }
        println!();
        for &snr in &scenario.snr_grid_db {
            print!("{snr:>7}");
            for m in &methods {
                let row = rows
                    .iter()
                    .find(|r| r.snr_db == snr && r.reduction == m.label())
                    .unwrap();
                let value = if field == 0 { row.ber } else { row.mse_h };
                print!("{value:>16.6}");
            }
            println!();
        }
        println!();
    }

    println!("The moment match wins on estimation error at low SNR, where the");
    println!("mixture components overlap heavily; curtailment wins at high SNR,");
    println!("where blending distinct bit-sequence hypotheses into one Gaussian");
    println!("smears an otherwise sharp channel posterior. The hybrid tracks the");
    println!("better of the two across the range.");
}
