//! Detection with and without prior knowledge of the channel distribution,
//! across three channel models: Rayleigh fading, strongly imbalanced fixed
//! gains, and a four-point discrete joint table. The prior-equipped detector
//! multiplies a Gaussian with the model's second moments into every symbol's
//! posterior; the prior-free one uses the flat function instead.
//!
//! Run:
//! ```bash
//! cargo run --release --example prior_free [packets_per_point]
//! ```

use fsk_pnc::gaussian::{Convention, ReductionMethod};
use fsk_pnc::linalg::C64;
use fsk_pnc::sim::{run_sweep, CfoModel, ChannelModel, DetectorSpec, PriorMode, Scenario};

fn main() {
    let packets: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(500);

    let channels: Vec<(&str, ChannelModel, Vec<f64>)> = vec![
        (
            "rayleigh (unit power)",
            ChannelModel::Rayleigh {
                var_a: 1.0,
                var_b: 1.0,
            },
            vec![0.0, 4.0, 8.0, 12.0, 16.0],
        ),
        (
            "fixed gains 1 and 10",
            ChannelModel::Fixed {
                h_a: C64::new(1.0, 0.0),
                h_b: C64::new(10.0, 0.0),
            },
            vec![-4.0, 0.0, 4.0, 8.0],
        ),
        (
            "discrete 4-point table",
            ChannelModel::Discrete {
                table: vec![
                    ((C64::new(1.0, 0.0), C64::new(2.0, 0.0)), 0.01),
                    ((C64::new(1.0, 0.0), C64::new(3.0, 0.0)), 0.09),
                    ((C64::new(2.0, 0.0), C64::new(2.0, 0.0)), 0.09),
                    ((C64::new(2.0, 0.0), C64::new(3.0, 0.0)), 0.81),
                ],
            },
            vec![-4.0, 0.0, 4.0, 8.0],
        ),
    ];

    println!("== Channel prior vs prior-free detection (budget 4, curtailment) ==");
    println!("CFO pair fixed at (6000, 100) Hz; initial phases always unknown.\n");

    for (name, channel, snrs) in channels {
        let scenario = Scenario {
            id: name.into(),
            channel,
            cfo: CfoModel::Fixed(6000.0, 100.0),
            snr_grid_db: snrs.clone(),
            packets_per_point: packets,
            detectors: vec![
                DetectorSpec::Bp {
                    gmr: 4,
                    reduction: ReductionMethod::Curtailment,
                    prior: PriorMode::Rayleigh,
                },
                DetectorSpec::Bp {
                    gmr: 4,
                    reduction: ReductionMethod::Curtailment,
                    prior: PriorMode::None,
                },
            ],
            seed: 23,
            n_symbols: 128,
            cfo_grid_step_hz: 2500.0,
            convention: Convention::Corrected,
        };
        let rows = run_sweep(&scenario).expect("sweep");

        println!("{name}:");
        println!("{:>7}{:>14}{:>14}{:>10}", "snr_db", "with_prior", "no_prior", "ratio");
        for &snr in &snrs {
            let ber = |prior: &str| {
                rows.iter()
                    .find(|r| r.snr_db == snr && r.prior == prior)
                    .map(|r| r.ber)
                    .unwrap()
            };
            let with = ber("rayleigh");
            let without = ber("none");
            println!(
                "{snr:>7}{with:>14.5}{without:>14.5}{:>10.3}",
                without / with.max(1e-12)
            );
        }
        println!();
    }

    println!("A hundred-plus data symbols pin the channels far more sharply than");
    println!("any prior, so removing the prior costs essentially nothing: the");
    println!("detector works unchanged under channel distributions it was never");
    println!("told about.");
}
