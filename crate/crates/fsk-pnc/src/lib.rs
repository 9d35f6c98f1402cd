//! Simulator and detection library for the uplink of a two-way relay channel
//! using continuous-phase binary FSK and physical-layer network coding.
//!
//! Two users transmit short, preamble-free packets simultaneously; the relay
//! must decode the per-symbol XOR of their bits without knowing the channels,
//! oscillator phases, or carrier frequency offsets. The detector here runs
//! Gaussian-mixture belief propagation along the symbol chain for each
//! candidate CFO pair on a grid, jointly estimating the channels and
//! marginalizing the CFOs, with or without prior knowledge of the channel
//! distribution.
//!
//! Modules:
//!
//! - [`signal`]: packet generation, correlator outputs, and the observation
//!   (`Z`) and transition (`G`) matrices.
//! - [`gaussian`]: the information-form Gaussian component/mixture algebra,
//!   including the three mixture-reduction strategies.
//! - [`detector`]: forward/backward message passing, CFO-grid
//!   marginalization, MAP XOR decisions, and channel-mean extraction.
//! - [`mod@reference`]: the perfect-knowledge coherent detector and an exact
//!   brute-force oracle for small packets.
//! - [`sim`]: scenario definitions, the Monte Carlo sweep driver, and result
//!   serialization.
//! - [`cli`]: the `fsk-pnc` command-line entry points.
//!
//! The `examples/` directory has one runnable program per capability; start
//! with `cargo run --release --example oracle_check`.

pub mod cli;
pub mod detector;
pub mod gaussian;
pub mod linalg;
pub mod reference;
pub mod selftest;
pub mod signal;
pub mod sim;

pub use detector::{
    detect, detect_with_stats, estimate_mse, ChannelPrior, DetectionResult, DetectorConfig,
    DetectorError,
};
pub use gaussian::{Convention, GaussianComponent, Mixture, ReductionMethod};
pub use linalg::{C64, CMatrix2, Complex2};
pub use reference::{brute_force_posterior, perfcd_detect, PerfectSideInfo};
pub use signal::{simulate_packet, PacketScenario, SimMode, SystemParams};
pub use sim::{run_sweep, snr_gap_at_ber, ResultRow, Scenario};
