//! Ground-truth baselines: the perfect-knowledge coherent detector and an
//! exact brute-force marginalization for small packets that validates the
//! whole message-passing pipeline.

use crate::detector::{ChannelPrior, DetectionResult, DetectorError};
use crate::gaussian::{likelihood_component, log_sum_exp, Convention, GaussianComponent};
use crate::linalg::{CMatrix2, Complex2};
use crate::signal::{g_matrix, rotated_channels, z_matrix, BitPair, PacketScenario, SystemParams};

/// Everything the ideal detector is given for free: the true rotated channel
/// at every symbol and the true CFO pair.
#[derive(Debug, Clone)]
pub struct PerfectSideInfo {
    pub channels: Vec<Complex2>,
    pub cfo: (f64, f64),
}

impl PerfectSideInfo {
    pub fn from_scenario(sc: &PacketScenario, params: &SystemParams) -> Self {
        Self {
            channels: rotated_channels(sc, params),
            cfo: (sc.f_a, sc.f_b),
        }
    }
}

/// Coherent detection with perfect channel knowledge: per symbol, the four
/// hypothesis likelihoods `exp(-|r_n - Z(s) h_n|^2 / (2 n0))` are normalized,
/// the two odd hypotheses summed, and the XOR decided by MAP (ties to 0).
/// No estimation is involved; `h_est` is the given truth.
pub fn perfcd_detect(
    r: &[Complex2],
    side: &PerfectSideInfo,
    n0_det: f64,
    convention: Convention,
) -> Result<DetectionResult, DetectorError> {
    if r.len() != side.channels.len() {
        return Err(DetectorError::LengthMismatch(format!(
            "{} observations vs {} side-info channels",
            r.len(),
            side.channels.len()
        )));
    }
    // A zero-noise request means hard nearest-hypothesis decisions; keep the
    // exponent finite.
    let n0_eff = convention.effective(n0_det).max(1e-12);

    let n = r.len();
    let mut xor_bits = Vec::with_capacity(n);
    let mut xor_pmf = Vec::with_capacity(n);
    let mut pair_pmf = Vec::with_capacity(n);
    let mut log_evidence = 0.0f64;

    for (rn, hn) in r.iter().zip(&side.channels) {
        let logs: Vec<f64> = BitPair::ALL
            .iter()
            .map(|&s| {
                let resid = *rn - z_matrix(s).mul_vec(hn);
                -resid.norm_sqr() / (2.0 * n0_eff)
            })
            .collect();
        let norm = log_sum_exp(&logs);
        log_evidence += norm;
        let pmf = [
            (logs[0] - norm).exp(),
            (logs[1] - norm).exp(),
            (logs[2] - norm).exp(),
            (logs[3] - norm).exp(),
        ];
        let p1 = pmf[1] + pmf[2];
        xor_bits.push(u8::from(p1 > 1.0 - p1));
        xor_pmf.push(p1);
        pair_pmf.push(pmf);
    }

    Ok(DetectionResult {
        xor_bits,
        xor_pmf,
        pair_pmf,
        h_est: side.channels.clone(),
        per_f_loglik: vec![log_evidence],
    })
}

/// Exact posterior for one known CFO pair.
#[derive(Debug, Clone)]
pub struct BruteForceResult {
    /// Per-symbol posterior over bit pairs, order (0,0), (0,1), (1,0), (1,1).
    pub pair_pmf: Vec<[f64; 4]>,
    /// Per-symbol probability that the XOR is 1.
    pub xor_pmf: Vec<f64>,
    /// Log of `sum_s integral p(h) prod_n p(r_n | s_n, h_n) dh` (bit priors
    /// excluded; they are uniform and cancel).
    pub log_evidence: f64,
}

/// Enumerate all `4^N` bit-pair sequences, map each onto the linear-Gaussian
/// chain it induces on the initial channel `h_0`, and integrate `h_0` in
/// closed form against the prior. Cost grows as `4^N`, so packets are capped
/// at 8 symbols.
///
/// The same exponent convention as the detector under test is applied, so
/// equivalence checks are convention-independent.
pub fn brute_force_posterior(
    r: &[Complex2],
    f: (f64, f64),
    prior: &ChannelPrior,
    params: &SystemParams,
    n0_det: f64,
    convention: Convention,
) -> Result<BruteForceResult, DetectorError> {
    let n = r.len();
    if n == 0 {
        return Err(DetectorError::BadConfig("empty packet".into()));
    }
    if n > 8 {
        return Err(DetectorError::BadConfig(format!(
            "brute force enumeration is limited to 8 symbols, got {n}"
        )));
    }
    let n0_eff = convention.effective(n0_det);
    // The prior applies to h_0; a point prior's mean needs no rotation here.
    let point = match prior {
        ChannelPrior::Point { h0, .. } => *h0,
        _ => Complex2::zero(),
    };
    let prior_comp = prior.component(convention, &point);

    let gs: [CMatrix2; 4] = [
        g_matrix(BitPair::ALL[0], f, params),
        g_matrix(BitPair::ALL[1], f, params),
        g_matrix(BitPair::ALL[2], f, params),
        g_matrix(BitPair::ALL[3], f, params),
    ];
    let like: Vec<[GaussianComponent; 4]> = r
        .iter()
        .map(|rn| {
            let mk = |s: BitPair| likelihood_component(s, rn, n0_eff).map_err(DetectorError::from);
            Ok::<_, DetectorError>([
                mk(BitPair::ALL[0])?,
                mk(BitPair::ALL[1])?,
                mk(BitPair::ALL[2])?,
                mk(BitPair::ALL[3])?,
            ])
        })
        .collect::<Result<_, _>>()?;

    let seq_count = 4usize.pow(n as u32);
    let mut seq_logev = vec![f64::NEG_INFINITY; seq_count];

    for (seq, slot) in seq_logev.iter_mut().enumerate() {
        let mut total = prior_comp;
        // Accumulated rotation from h_0 to h_i.
        let mut phi = CMatrix2::identity();
        let mut code = seq;
        let mut ok = true;
        for i in 0..n {
            let v = code & 3;
            code >>= 2;
            // Likelihood of symbol i as a function of h_0.
            match like[i][v].pullback(&phi) {
                Ok(pulled) => total = total.combine(&pulled),
                Err(_) => {
                    ok = false;
                    break;
                }
            }
            phi = gs[v].mul_mat(&phi);
        }
        if !ok {
            continue;
        }
        if let Ok(mass) = total.integrate() {
            *slot = mass;
        }
    }

    let log_evidence = log_sum_exp(&seq_logev);
    if log_evidence == f64::NEG_INFINITY {
        return Err(DetectorError::DegeneratePosterior {
            symbol: 0,
            detail: " (every sequence integrates to zero under the flat prior; \
                      the stacked observation operator is rank-deficient)"
                .into(),
        });
    }

    let mut pair_pmf = Vec::with_capacity(n);
    let mut xor_pmf = Vec::with_capacity(n);
    for i in 0..n {
        let mut buckets = [f64::NEG_INFINITY; 4];
        let mut scratch: [Vec<f64>; 4] = Default::default();
        for (seq, &ev) in seq_logev.iter().enumerate() {
            let v = (seq >> (2 * i)) & 3;
            scratch[v].push(ev);
        }
        for v in 0..4 {
            buckets[v] = log_sum_exp(&scratch[v]);
        }
        let norm = log_sum_exp(&buckets);
        let pmf = [
            (buckets[0] - norm).exp(),
            (buckets[1] - norm).exp(),
            (buckets[2] - norm).exp(),
            (buckets[3] - norm).exp(),
        ];
        xor_pmf.push(pmf[1] + pmf[2]);
        pair_pmf.push(pmf);
    }

    Ok(BruteForceResult {
        pair_pmf,
        xor_pmf,
        log_evidence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;
    use crate::signal::{simulate_packet, SimMode};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn params(n: usize, n0: f64) -> SystemParams {
        SystemParams::default_link(n, n0)
    }

    #[test]
    fn perfcd_decodes_noiseless_separated_bits() {
        // Bits (0,1): observation Z h = h itself; the true hypothesis wins.
        let h = Complex2(C64::new(0.8, -0.1), C64::new(-0.3, 0.6));
        let side = PerfectSideInfo {
            channels: vec![h],
            cfo: (0.0, 0.0),
        };
        let r = [z_matrix(BitPair::new(0, 1)).mul_vec(&h)];
        let res = perfcd_detect(&r, &side, 1e-6, Convention::Corrected).unwrap();
        assert_eq!(res.xor_bits, vec![1]);
        assert!(res.xor_pmf[0] > 0.999);
    }

    #[test]
    fn perfcd_symmetric_observation_prefers_xor_one() {
        // r = (1,1), h = (1,1): hypotheses (0,1) and (1,0) predict r exactly
        // and tie; together they dominate the even hypotheses.
        let side = PerfectSideInfo {
            channels: vec![Complex2::from_re(1.0, 1.0)],
            cfo: (0.0, 0.0),
        };
        let r = [Complex2::from_re(1.0, 1.0)];
        let res = perfcd_detect(&r, &side, 0.5, Convention::Corrected).unwrap();
        assert_eq!(res.xor_bits, vec![1]);
        let pmf = res.pair_pmf[0];
        assert!((pmf[1] - pmf[2]).abs() < 1e-12, "tied odd hypotheses");
        assert!(pmf[1] > pmf[0] && pmf[1] > pmf[3]);
    }

    #[test]
    fn perfcd_uniform_tie_resolves_to_zero() {
        // r = 0 with |h_A| = |h_B| and orthogonal components makes all four
        // residuals equal; the tie goes to XOR = 0.
        let h = Complex2(C64::new(0.5, 0.0), C64::new(0.0, 0.5));
        let side = PerfectSideInfo {
            channels: vec![h],
            cfo: (0.0, 0.0),
        };
        let r = [Complex2::zero()];
        let res = perfcd_detect(&r, &side, 1.0, Convention::Corrected).unwrap();
        let pmf = res.pair_pmf[0];
        for v in 1..4 {
            assert!((pmf[v] - pmf[0]).abs() < 1e-12, "uniform pmf");
        }
        assert_eq!(res.xor_bits, vec![0]);
    }

    #[test]
    fn perfcd_noiseless_random_draws_are_error_free() {
        let mut rng = StdRng::seed_from_u64(31);
        let n = 64;
        let p = params(n, 0.0);
        for _ in 0..20 {
            let sc = PacketScenario {
                bits_a: (0..n).map(|_| rng.random_range(0..2u8)).collect(),
                bits_b: (0..n).map(|_| rng.random_range(0..2u8)).collect(),
                h_a: C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                h_b: C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                f_a: rng.random_range(-10e3..10e3),
                f_b: rng.random_range(-10e3..10e3),
                phi_a: rng.random_range(0.0..std::f64::consts::TAU),
                phi_b: rng.random_range(0.0..std::f64::consts::TAU),
                seed: rng.random(),
            };
            if sc.h_a.norm() < 1e-6 || sc.h_b.norm() < 1e-6 {
                continue;
            }
            let r = simulate_packet(&sc, &p, SimMode::Approx).unwrap();
            let side = PerfectSideInfo::from_scenario(&sc, &p);
            let res = perfcd_detect(&r, &side, 0.0, Convention::Corrected).unwrap();
            assert_eq!(res.xor_bits, sc.xor_bits());
        }
    }

    #[test]
    fn perfcd_is_invariant_under_user_relabeling() {
        let mut rng = StdRng::seed_from_u64(32);
        let n = 16;
        let mut p = params(n, 0.2);
        p.noise_var = 0.2;
        let sc = PacketScenario {
            bits_a: (0..n).map(|_| rng.random_range(0..2u8)).collect(),
            bits_b: (0..n).map(|_| rng.random_range(0..2u8)).collect(),
            h_a: C64::new(0.7, 0.2),
            h_b: C64::new(-0.4, 0.9),
            f_a: 6000.0,
            f_b: 100.0,
            phi_a: 0.3,
            phi_b: 1.9,
            seed: 77,
        };
        let r = simulate_packet(&sc, &p, SimMode::Approx).unwrap();

        let side = PerfectSideInfo::from_scenario(&sc, &p);
        let res = perfcd_detect(&r, &side, 0.2, Convention::Corrected).unwrap();

        // Swap users A and B everywhere; the same received packet must give
        // the same XOR posterior.
        let swapped = PacketScenario {
            bits_a: sc.bits_b.clone(),
            bits_b: sc.bits_a.clone(),
            h_a: sc.h_b,
            h_b: sc.h_a,
            f_a: sc.f_b,
            f_b: sc.f_a,
            phi_a: sc.phi_b,
            phi_b: sc.phi_a,
            seed: sc.seed,
        };
        let side_swapped = PerfectSideInfo::from_scenario(&swapped, &p);
        let res_swapped = perfcd_detect(&r, &side_swapped, 0.2, Convention::Corrected).unwrap();
        for (a, b) in res.xor_pmf.iter().zip(&res_swapped.xor_pmf) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn brute_force_single_symbol_matches_quadrature() {
        let p = params(1, 0.4);
        let r = [Complex2(C64::new(0.9, -0.4), C64::new(0.2, 0.7))];
        let prior = ChannelPrior::Rayleigh {
            var_a: 1.0,
            var_b: 1.0,
        };
        let conv = Convention::Corrected;
        let bf = brute_force_posterior(&r, (0.0, 0.0), &prior, &p, 0.4, conv).unwrap();

        // Direct 4-real-dimensional quadrature of prior x likelihood.
        let n0_eff = conv.effective(0.4);
        let var_eff = conv.effective(1.0);
        let m = 60;
        let half = 4.0;
        let step = 2.0 * half / m as f64;
        let axis: Vec<f64> = (0..m).map(|i| -half + (i as f64 + 0.5) * step).collect();
        let mut masses = [0.0f64; 4];
        for (v, s) in BitPair::ALL.iter().enumerate() {
            let z = z_matrix(*s);
            let mut sum = 0.0;
            for &x0 in &axis {
                for &y0 in &axis {
                    for &x1 in &axis {
                        for &y1 in &axis {
                            let h = Complex2(C64::new(x0, y0), C64::new(x1, y1));
                            let resid = r[0] - z.mul_vec(&h);
                            let ll = -resid.norm_sqr() / (2.0 * n0_eff)
                                - h.norm_sqr() / (2.0 * var_eff);
                            sum += ll.exp();
                        }
                    }
                }
            }
            masses[v] = sum;
        }
        let total: f64 = masses.iter().sum();
        for v in 0..4 {
            assert!(
                (bf.pair_pmf[0][v] - masses[v] / total).abs() < 1e-4,
                "hypothesis {v}: {} vs {}",
                bf.pair_pmf[0][v],
                masses[v] / total
            );
        }
    }

    #[test]
    fn brute_force_user_relabeling_symmetry() {
        let mut rng = StdRng::seed_from_u64(33);
        let n = 3;
        let mut p = params(n, 0.3);
        p.noise_var = 0.3;
        // Symmetric setup: equal channels, swapped bits, same noise draw.
        let sc = PacketScenario {
            bits_a: vec![0, 1, 1],
            bits_b: vec![1, 0, 1],
            h_a: C64::new(0.6, 0.4),
            h_b: C64::new(0.6, 0.4),
            f_a: 500.0,
            f_b: 500.0,
            phi_a: 0.8,
            phi_b: 0.8,
            seed: rng.random(),
        };
        let r = simulate_packet(&sc, &p, SimMode::Approx).unwrap();
        let prior = ChannelPrior::Rayleigh {
            var_a: 1.0,
            var_b: 1.0,
        };
        let bf = brute_force_posterior(&r, (500.0, 500.0), &prior, &p, 0.3, Convention::Corrected)
            .unwrap();
        // The XOR pmf must be invariant to which user carried which bits.
        let swapped = PacketScenario {
            bits_a: sc.bits_b.clone(),
            bits_b: sc.bits_a.clone(),
            ..sc.clone()
        };
        let r2 = simulate_packet(&swapped, &p, SimMode::Approx).unwrap();
        let bf2 =
            brute_force_posterior(&r2, (500.0, 500.0), &prior, &p, 0.3, Convention::Corrected)
                .unwrap();
        for (a, b) in bf.xor_pmf.iter().zip(&bf2.xor_pmf) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn brute_force_rejects_oversized_packets() {
        let p = params(9, 0.1);
        let r = vec![Complex2::zero(); 9];
        assert!(matches!(
            brute_force_posterior(
                &r,
                (0.0, 0.0),
                &ChannelPrior::None,
                &p,
                0.1,
                Convention::Corrected
            ),
            Err(DetectorError::BadConfig(_))
        ));
    }

    #[test]
    fn brute_force_flat_prior_zeroes_unobservable_hypotheses() {
        // For a single symbol under the flat prior only the cross hypotheses
        // pin both channel directions; the same-branch ones integrate to
        // nothing and get zero posterior mass.
        let p = params(1, 0.1);
        let r = [Complex2::from_re(0.4, 0.2)];
        let bf = brute_force_posterior(
            &r,
            (0.0, 0.0),
            &ChannelPrior::None,
            &p,
            0.1,
            Convention::Corrected,
        )
        .unwrap();
        assert_eq!(bf.pair_pmf[0][0], 0.0);
        assert_eq!(bf.pair_pmf[0][3], 0.0);
        assert!((bf.pair_pmf[0][1] + bf.pair_pmf[0][2] - 1.0).abs() < 1e-12);
    }
}
