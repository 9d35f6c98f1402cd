//! Command-line entry points: sweep execution, single-packet replay, the
//! oracle cross-check, and the property selftest.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 usage/configuration error.

use crate::detector::{detect, ChannelPrior, DetectorConfig};
use crate::gaussian::Convention;
use crate::selftest;
use crate::sim::{
    detector_grid, parse_config, run_sweep, write_csv, CfoModel, DetectorSpec, PriorMode,
    Scenario,
};
use crate::signal::{PacketDump, SystemParams};
use anyhow::{anyhow, Context};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use std::fs;
use std::io::{BufReader, Write};
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(
    name = "fsk-pnc",
    version,
    about = "FSK physical-layer network coding: packet simulator and joint channel/XOR detector"
)]
struct Cli {
    /// Override the scenario base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for the Monte Carlo sweep (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Write output to this path instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Run all detector arithmetic with the verbatim exponent convention
    /// instead of the statistically corrected one.
    #[arg(long = "paper-convention", global = true)]
    paper_convention: bool,

    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a Monte Carlo BER/MSE sweep described by a config file; emit CSV.
    Simulate {
        /// Flat key-value scenario description (see README for the schema).
        config: PathBuf,
        /// Include measured wall times in the CSV (forfeits byte-identical
        /// output across runs).
        #[arg(long)]
        timing: bool,
    },
    /// Replay one dumped packet through the detector and print the XOR
    /// decisions, per-symbol PMFs, and channel estimates.
    Detect {
        /// Packet CSV produced by the library's dump writer.
        #[arg(long = "in")]
        input: PathBuf,
        /// Optional sweep config supplying the detector entry and CFO mode.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Cross-validate the message passer against exact enumeration on random
    /// small packets; exits nonzero if any PMF deviates beyond 1e-6.
    OracleCheck {
        /// Packet length in symbols (enumeration cost grows as 4^n).
        #[arg(long, default_value_t = 4)]
        n: usize,
        /// Number of random packets.
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
    /// Run the numerical property suite and report each check.
    Selftest,
}

/// Parse arguments and dispatch; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };

    if let Some(threads) = cli.threads {
        // A second configuration attempt in the same process is harmless;
        // results do not depend on the pool size.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }

    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                2
            } else {
                1
            }
        }
    }
}

/// Marker for errors that should exit with the usage code.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct UsageError(String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    let convention = if cli.paper_convention {
        Convention::PaperVerbatim
    } else {
        Convention::Corrected
    };

    let mut sink: Box<dyn Write> = match &cli.out {
        Some(path) => Box::new(
            fs::File::create(path)
                .with_context(|| format!("cannot create {}", path.display()))?,
        ),
        None => Box::new(std::io::stdout()),
    };

    match cli.cmd {
        Command::Simulate { config, timing } => {
            let text = fs::read_to_string(&config)
                .map_err(|e| usage(format!("cannot read {}: {e}", config.display())))?;
            let mut scenario = parse_config(&text).map_err(|e| usage(e.to_string()))?;
            if let Some(seed) = cli.seed {
                scenario.seed = seed;
            }
            if cli.paper_convention {
                scenario.convention = Convention::PaperVerbatim;
            }
            let rows = run_sweep(&scenario)?;
            write_csv(&rows, timing, &mut sink)?;
            Ok(())
        }
        Command::Detect { input, config } => {
            let file = fs::File::open(&input)
                .map_err(|e| usage(format!("cannot read {}: {e}", input.display())))?;
            let dump = PacketDump::read_csv(BufReader::new(file))
                .map_err(|e| usage(e.to_string()))?;
            let scenario = match config {
                Some(path) => {
                    let text = fs::read_to_string(&path)
                        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
                    Some(parse_config(&text).map_err(|e| usage(e.to_string()))?)
                }
                None => None,
            };
            run_detect(&dump, scenario.as_ref(), convention, &mut sink)
        }
        Command::OracleCheck { n, trials } => {
            if n < 2 || n > 8 {
                return Err(usage("oracle-check needs 2 <= n <= 8"));
            }
            selftest::likelihood_preflight().map_err(|e| anyhow!(e))?;
            let seed = cli.seed.unwrap_or(12345);
            let dev = selftest::oracle_deviation(n, trials, convention, seed)
                .map_err(|e| anyhow!(e))?;
            writeln!(
                sink,
                "oracle-check: n={n} trials={trials} max |pmf deviation| = {dev:.3e}"
            )?;
            if dev < 1e-6 {
                Ok(())
            } else {
                Err(anyhow!(
                    "message passing deviates from exact enumeration by {dev:.3e} (limit 1e-6)"
                ))
            }
        }
        Command::Selftest => {
            let mut failed = 0;
            for (name, result) in selftest::run_all() {
                match result {
                    Ok(()) => writeln!(sink, "PASS {name}")?,
                    Err(msg) => {
                        failed += 1;
                        writeln!(sink, "FAIL {name}: {msg}")?;
                    }
                }
            }
            if failed == 0 {
                Ok(())
            } else {
                Err(anyhow!("{failed} selftest check(s) failed"))
            }
        }
    }
}

fn run_detect(
    dump: &PacketDump,
    scenario: Option<&Scenario>,
    convention: Convention,
    sink: &mut dyn Write,
) -> anyhow::Result<()> {
    let cfo_max = 10e3;
    let params = SystemParams::new(
        dump.symbol_duration,
        1.0 / (2.0 * dump.symbol_duration),
        dump.n_symbols,
        dump.noise_var,
        cfo_max,
    )?;
    let n0_det = dump.noise_var.max(1e-12);

    // Detector shape: from the config's first swept entry when provided,
    // defaults otherwise.
    let (gmr, reduction, prior_mode) = scenario
        .and_then(|sc| {
            sc.detectors.iter().find_map(|d| match d {
                DetectorSpec::Bp {
                    gmr,
                    reduction,
                    prior,
                } => Some((*gmr, *reduction, *prior)),
                DetectorSpec::PerfCd => None,
            })
        })
        .unwrap_or((4, crate::gaussian::ReductionMethod::Curtailment, PriorMode::Rayleigh));

    let prior = match prior_mode {
        PriorMode::None => ChannelPrior::None,
        PriorMode::Rayleigh => {
            let (var_a, var_b) = scenario
                .map(|sc| sc.channel.second_moments())
                .unwrap_or((1.0, 1.0));
            ChannelPrior::Rayleigh { var_a, var_b }
        }
    };

    let cfo_model = match scenario {
        Some(sc) => sc.cfo,
        None => match &dump.truth {
            Some(t) => CfoModel::Fixed(t.f_a, t.f_b),
            None => CfoModel::Uniform,
        },
    };
    let step = scenario.map(|sc| sc.cfo_grid_step_hz).unwrap_or(2500.0);
    let grid = detector_grid(&cfo_model, cfo_max, step);

    let convention = scenario.map(|sc| sc.convention).unwrap_or(convention);
    let cfg = DetectorConfig::new(gmr, reduction, grid, prior, n0_det, convention);
    let res = detect(&dump.symbols, &params, &cfg)?;

    let bits: String = res.xor_bits.iter().map(|b| (b + b'0') as char).collect();
    writeln!(sink, "xor_bits={bits}")?;
    if let Some(truth) = &dump.truth {
        let expected = truth.xor_bits();
        let errors = res
            .xor_bits
            .iter()
            .zip(&expected)
            .filter(|(a, b)| a != b)
            .count();
        let truth_bits: String = expected.iter().map(|b| (b + b'0') as char).collect();
        writeln!(sink, "xor_truth={truth_bits}")?;
        writeln!(
            sink,
            "bit_errors={errors} ber={}",
            errors as f64 / expected.len() as f64
        )?;
    }
    writeln!(sink, "symbol,p_xor1,p00,p01,p10,p11,h_a_est,h_b_est")?;
    for (i, ((pmf, x), h)) in res
        .pair_pmf
        .iter()
        .zip(&res.xor_pmf)
        .zip(&res.h_est)
        .enumerate()
    {
        writeln!(
            sink,
            "{i},{x:.6},{:.6},{:.6},{:.6},{:.6},{:.4}{:+.4}i,{:.4}{:+.4}i",
            pmf[0], pmf[1], pmf[2], pmf[3], h.0.re, h.0.im, h.1.re, h.1.im
        )?;
    }
    let best = res
        .per_f_loglik
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    writeln!(
        sink,
        "best_grid_point={} f_a={} f_b={}",
        best, cfg.cfo_grid[best].0, cfg.cfo_grid[best].1
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn help_and_version_exit_zero() {
        assert_eq!(run(["fsk-pnc", "--help"]), 0);
        assert_eq!(run(["fsk-pnc", "--version"]), 0);
    }

    #[test]
    fn unknown_subcommand_exits_two() {
        assert_eq!(run(["fsk-pnc", "frobnicate"]), 2);
    }

    #[test]
    fn missing_config_exits_two() {
        assert_eq!(run(["fsk-pnc", "simulate", "/nonexistent/path.cfg"]), 2);
    }

    #[test]
    fn detect_replays_a_dumped_packet() {
        use crate::signal::{simulate_packet, PacketDump, PacketScenario, SimMode, SystemParams};

        let n = 12;
        let params = SystemParams::default_link(n, 1e-3);
        let sc = PacketScenario {
            bits_a: vec![0, 1, 1, 0, 1, 0, 0, 1, 1, 1, 0, 0],
            bits_b: vec![1, 1, 0, 0, 0, 1, 0, 1, 0, 1, 1, 0],
            h_a: crate::linalg::C64::new(0.8, -0.2),
            h_b: crate::linalg::C64::new(-0.5, 0.7),
            f_a: 6000.0,
            f_b: 100.0,
            phi_a: 1.2,
            phi_b: 4.5,
            seed: 8,
        };
        let r = simulate_packet(&sc, &params, SimMode::Approx).unwrap();
        let dump = PacketDump::from_simulation(&sc, &params, r);
        let input = tempdir_file("packet.csv");
        let mut f = fs::File::create(&input).unwrap();
        dump.write_csv(&mut f).unwrap();

        let out = tempdir_file("replay.txt");
        let code = run([
            "fsk-pnc",
            "--out",
            out.to_str().unwrap(),
            "detect",
            "--in",
            input.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let text = fs::read_to_string(&out).unwrap();
        // Low noise, known truth in the header: the replay decodes cleanly.
        assert!(text.contains("bit_errors=0"), "{text}");
        let xor: String = sc
            .xor_bits()
            .iter()
            .map(|b| (b + b'0') as char)
            .collect();
        assert!(text.contains(&format!("xor_bits={xor}")), "{text}");
    }

    #[test]
    fn oracle_check_small_run_passes() {
        let out = tempdir_file("oracle.txt");
        let code = run([
            "fsk-pnc",
            "--out",
            out.to_str().unwrap(),
            "oracle-check",
            "--n",
            "2",
            "--trials",
            "6",
        ]);
        assert_eq!(code, 0);
        let text = fs::read_to_string(&out).unwrap();
        assert!(text.contains("max |pmf deviation|"), "{text}");
    }

    fn tempdir_file(name: &str) -> PathBuf {
        let mut dir = std::env::temp_dir();
        dir.push(format!("fsk-pnc-test-{}-{name}", std::process::id()));
        let _ = fs::create_dir_all(&dir);
        dir.join(name)
    }
}
