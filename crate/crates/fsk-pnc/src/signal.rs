//! Uplink signal model: ground-truth packet generation and the matrices that
//! define the detector's observation and transition structure.
//!
//! Two users transmit continuous-phase binary FSK simultaneously; the relay's
//! correlator bank produces one complex pair `r_n` per symbol. In the
//! orthogonal-tone approximation the observation is linear,
//! `r_n = Z(s_n) h_n + w_n`, where `h_n` is the phase-rotated channel pair and
//! `h_{n+1} = G(s_n) h_n` with a diagonal unit-modulus `G`.

use crate::linalg::{C64, CMatrix2, Complex2};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::PI;
use std::io::{BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("symbol index {index} out of range for {len} bits")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid system parameters: {0}")]
    BadParams(String),
    #[error("invalid packet scenario: {0}")]
    BadScenario(String),
    #[error("malformed packet dump: {0}")]
    BadDump(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Static link parameters shared by the simulator and the detector.
#[derive(Debug, Clone, Copy)]
pub struct SystemParams {
    /// Symbol duration `T` in seconds.
    pub symbol_duration: f64,
    /// Tone offset in Hz; the two FSK tones sit at `-tone_offset` and
    /// `+tone_offset` around the carrier. Defaults to `1/(2T)`.
    pub tone_offset: f64,
    /// Packet length in symbols.
    pub n_symbols: usize,
    /// Per-branch complex noise variance `N0` (energy units).
    pub noise_var: f64,
    /// Each user's CFO lies in `[-cfo_max, cfo_max]` Hz.
    pub cfo_max: f64,
}

impl SystemParams {
    pub fn new(
        symbol_duration: f64,
        tone_offset: f64,
        n_symbols: usize,
        noise_var: f64,
        cfo_max: f64,
    ) -> Result<Self, SignalError> {
        if !(symbol_duration > 0.0) {
            return Err(SignalError::BadParams("symbol duration must be > 0".into()));
        }
        if n_symbols < 1 {
            return Err(SignalError::BadParams("need at least one symbol".into()));
        }
        if !(noise_var >= 0.0) {
            return Err(SignalError::BadParams("noise variance must be >= 0".into()));
        }
        if !(cfo_max >= 0.0) {
            return Err(SignalError::BadParams("CFO range must be >= 0".into()));
        }
        Ok(Self {
            symbol_duration,
            tone_offset,
            n_symbols,
            noise_var,
            cfo_max,
        })
    }

    /// 1 MHz bandwidth defaults: `T = 1 us`, orthogonal tones at `1/(2T)`,
    /// CFOs within +-10 kHz.
    pub fn default_link(n_symbols: usize, noise_var: f64) -> Self {
        let t = 1e-6;
        Self::new(t, 1.0 / (2.0 * t), n_symbols, noise_var, 10e3).unwrap()
    }

    /// Per-symbol phase step contributed by the tone choice:
    /// `-2 pi * tone_offset * T`.
    pub fn tone_phase_step(&self) -> f64 {
        -2.0 * PI * self.tone_offset * self.symbol_duration
    }

    /// Per-symbol phase per Hz of CFO: `2 pi T`.
    pub fn cfo_phase_step(&self) -> f64 {
        2.0 * PI * self.symbol_duration
    }
}

/// One transmitted bit per user for one symbol slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BitPair {
    pub a: u8,
    pub b: u8,
}

impl BitPair {
    pub const ALL: [BitPair; 4] = [
        BitPair { a: 0, b: 0 },
        BitPair { a: 0, b: 1 },
        BitPair { a: 1, b: 0 },
        BitPair { a: 1, b: 1 },
    ];

    pub fn new(a: u8, b: u8) -> Self {
        debug_assert!(a <= 1 && b <= 1);
        Self { a, b }
    }

    pub fn xor(&self) -> u8 {
        self.a ^ self.b
    }

    /// Position in the canonical hypothesis order `(0,0),(0,1),(1,0),(1,1)`.
    pub fn index(&self) -> usize {
        (self.a as usize) * 2 + self.b as usize
    }
}

/// Ground truth for one simulated packet.
#[derive(Debug, Clone)]
pub struct PacketScenario {
    pub bits_a: Vec<u8>,
    pub bits_b: Vec<u8>,
    /// Pure channel gains (fading only, no oscillator phases).
    pub h_a: C64,
    pub h_b: C64,
    /// Carrier frequency offsets in Hz.
    pub f_a: f64,
    pub f_b: f64,
    /// Initial oscillator phase offsets in radians.
    pub phi_a: f64,
    pub phi_b: f64,
    /// Seed for the noise draw; generation is bit-exact reproducible.
    pub seed: u64,
}

impl PacketScenario {
    pub fn validate(&self, params: &SystemParams) -> Result<(), SignalError> {
        let n = params.n_symbols;
        if self.bits_a.len() != n || self.bits_b.len() != n {
            return Err(SignalError::BadScenario(format!(
                "bit sequences must have exactly {n} entries"
            )));
        }
        if self.bits_a.iter().chain(&self.bits_b).any(|&b| b > 1) {
            return Err(SignalError::BadScenario("bits must be 0 or 1".into()));
        }
        for f in [self.f_a, self.f_b] {
            if f.abs() > params.cfo_max + 1e-9 {
                return Err(SignalError::BadScenario(format!(
                    "CFO {f} Hz outside +-{} Hz",
                    params.cfo_max
                )));
            }
        }
        Ok(())
    }

    pub fn bit_pair(&self, n: usize) -> BitPair {
        BitPair::new(self.bits_a[n], self.bits_b[n])
    }

    pub fn xor_bits(&self) -> Vec<u8> {
        self.bits_a
            .iter()
            .zip(&self.bits_b)
            .map(|(a, b)| a ^ b)
            .collect()
    }
}

/// Whether the correlator outputs follow the orthogonal-tone linear model or
/// the exact integrals with inter-tone leakage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimMode {
    /// `r_n = Z(s_n) h_n + w_n`; the model the detector assumes.
    Approx,
    /// Four-case expression with the alpha/beta cross terms.
    Exact,
}

/// Phase accumulated by user `u`'s continuous-phase FSK modulator over the
/// first `n` symbols: `2 pi * tone_offset * T * sum_{i<n} (2 s_i - 1)`.
pub fn cfsk_phase(bits: &[u8], n: usize, params: &SystemParams) -> Result<f64, SignalError> {
    if n > bits.len() {
        return Err(SignalError::IndexOutOfRange {
            index: n,
            len: bits.len(),
        });
    }
    let step = 2.0 * PI * params.tone_offset * params.symbol_duration;
    let sum: f64 = bits[..n].iter().map(|&s| 2.0 * f64::from(s) - 1.0).sum();
    Ok(step * sum)
}

/// Observation matrix for one bit pair: rows index correlator branches,
/// columns index users. Both users land on branch 1 for bits (0,0), on
/// branch 2 for (1,1), and on separate branches otherwise.
pub fn z_matrix(s: BitPair) -> CMatrix2 {
    match (s.a, s.b) {
        (0, 0) => CMatrix2::from_re(1.0, 1.0, 0.0, 0.0),
        (1, 1) => CMatrix2::from_re(0.0, 0.0, 1.0, 1.0),
        (0, 1) => CMatrix2::from_re(1.0, 0.0, 0.0, 1.0),
        (1, 0) => CMatrix2::from_re(0.0, 1.0, 1.0, 0.0),
        _ => unreachable!("bits are validated to be 0 or 1"),
    }
}

/// Per-symbol channel rotation `G(s_n, f)`: diagonal with unit-modulus
/// entries `exp(j(d1*(1-2s_u) + d2*f_u))` where `d1 = -2 pi * tone_offset * T`
/// and `d2 = 2 pi T`. Maps `h_n` to `h_{n+1}`.
pub fn g_matrix(s: BitPair, f: (f64, f64), params: &SystemParams) -> CMatrix2 {
    let d1 = params.tone_phase_step();
    let d2 = params.cfo_phase_step();
    let ga = C64::from_polar(1.0, d1 * (1.0 - 2.0 * f64::from(s.a)) + d2 * f.0);
    let gb = C64::from_polar(1.0, d1 * (1.0 - 2.0 * f64::from(s.b)) + d2 * f.1);
    CMatrix2::diag(ga, gb)
}

/// Normalized tone integral `(exp(j 2 pi x) - 1) / (j 2 pi x)`, with the
/// analytic limit 1 at `x = 0`.
fn tone_integral(x: f64) -> C64 {
    if x.abs() < 1e-12 {
        return C64::new(1.0, 0.0);
    }
    let num = C64::from_polar(1.0, 2.0 * PI * x) - 1.0;
    num / C64::new(0.0, 2.0 * PI * x)
}

/// Same-branch and cross-branch correlator gains for a user with CFO `f_u`:
/// `alpha` is the matched-tone response, `beta` the leakage into the other
/// branch. At zero CFO these are exactly (1, 0).
pub fn alpha_beta(f_u: f64, params: &SystemParams) -> (C64, C64) {
    let ft = f_u * params.symbol_duration;
    let alpha = tone_integral(ft);
    let beta = tone_integral(ft - 2.0 * params.tone_offset * params.symbol_duration);
    (alpha, beta)
}

/// Phase-incorporated channel pair `h_n` for every symbol of a scenario.
/// `h_0` carries the initial oscillator phases; each step rotates by
/// `G(s_n, f)`, which preserves the magnitudes.
pub fn rotated_channels(sc: &PacketScenario, params: &SystemParams) -> Vec<Complex2> {
    let n = params.n_symbols;
    let mut out = Vec::with_capacity(n);
    let mut h = Complex2(
        sc.h_a * C64::from_polar(1.0, sc.phi_a),
        sc.h_b * C64::from_polar(1.0, sc.phi_b),
    );
    for i in 0..n {
        out.push(h);
        if i + 1 < n {
            let g = g_matrix(sc.bit_pair(i), (sc.f_a, sc.f_b), params);
            h = g.mul_vec(&h);
        }
    }
    out
}

/// Correlator outputs `r_0..r_{N-1}` for one packet. Noise is i.i.d.
/// circularly-symmetric complex with per-branch variance `noise_var`, split
/// equally between real and imaginary parts; the draw is determined by
/// `sc.seed`.
pub fn simulate_packet(
    sc: &PacketScenario,
    params: &SystemParams,
    mode: SimMode,
) -> Result<Vec<Complex2>, SignalError> {
    sc.validate(params)?;
    let n = params.n_symbols;
    let channels = rotated_channels(sc, params);

    let mut out = Vec::with_capacity(n);
    match mode {
        SimMode::Approx => {
            for i in 0..n {
                out.push(z_matrix(sc.bit_pair(i)).mul_vec(&channels[i]));
            }
        }
        SimMode::Exact => {
            // Branch gains per (branch, bit): the matched tone sees the
            // alpha response, the other branch sees the leakage integral.
            let two_dft = 2.0 * params.tone_offset * params.symbol_duration;
            let gain = |f_u: f64, bit: u8, branch: usize| -> C64 {
                let ft = f_u * params.symbol_duration;
                match (branch, bit) {
                    (0, 0) | (1, 1) => tone_integral(ft),
                    (1, 0) => tone_integral(ft - two_dft),
                    (0, 1) => tone_integral(ft + two_dft),
                    _ => unreachable!(),
                }
            };
            for i in 0..n {
                let s = sc.bit_pair(i);
                let Complex2(ha, hb) = channels[i];
                let r1 = ha * gain(sc.f_a, s.a, 0) + hb * gain(sc.f_b, s.b, 0);
                let r2 = ha * gain(sc.f_a, s.a, 1) + hb * gain(sc.f_b, s.b, 1);
                out.push(Complex2(r1, r2));
            }
        }
    }

    if params.noise_var > 0.0 {
        let mut rng = ChaCha12Rng::seed_from_u64(sc.seed);
        let dist = Normal::new(0.0, (params.noise_var / 2.0).sqrt())
            .map_err(|e| SignalError::BadParams(e.to_string()))?;
        for r in out.iter_mut() {
            let w1 = C64::new(dist.sample(&mut rng), dist.sample(&mut rng));
            let w2 = C64::new(dist.sample(&mut rng), dist.sample(&mut rng));
            r.0 += w1;
            r.1 += w2;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Packet dump format
// ---------------------------------------------------------------------------

/// A dumped packet: one CSV record per symbol with four floating-point
/// fields, preceded by a single header line carrying the link parameters and
/// optional ground truth.
#[derive(Debug, Clone)]
pub struct PacketDump {
    pub n_symbols: usize,
    pub symbol_duration: f64,
    pub noise_var: f64,
    pub truth: Option<PacketScenario>,
    pub symbols: Vec<Complex2>,
}

impl PacketDump {
    pub fn from_simulation(
        sc: &PacketScenario,
        params: &SystemParams,
        symbols: Vec<Complex2>,
    ) -> Self {
        Self {
            n_symbols: params.n_symbols,
            symbol_duration: params.symbol_duration,
            noise_var: params.noise_var,
            truth: Some(sc.clone()),
            symbols,
        }
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<(), SignalError> {
        let mut header = format!(
            "n={},t={:e},n0={:e}",
            self.n_symbols, self.symbol_duration, self.noise_var
        );
        if let Some(t) = &self.truth {
            let bits = |v: &[u8]| v.iter().map(|b| (b + b'0') as char).collect::<String>();
            header.push_str(&format!(
                ",bits_a={},bits_b={},h_a={:e}{:+e}i,h_b={:e}{:+e}i,f_a={:e},f_b={:e},phi_a={:e},phi_b={:e},seed={}",
                bits(&t.bits_a),
                bits(&t.bits_b),
                t.h_a.re, t.h_a.im,
                t.h_b.re, t.h_b.im,
                t.f_a, t.f_b,
                t.phi_a, t.phi_b,
                t.seed,
            ));
        }
        writeln!(w, "{header}")?;
        for r in &self.symbols {
            writeln!(w, "{:e},{:e},{:e},{:e}", r.0.re, r.0.im, r.1.re, r.1.im)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, SignalError> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| SignalError::BadDump("empty file".into()))??;
        let mut fields = std::collections::HashMap::new();
        for kv in header.split(',') {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| SignalError::BadDump(format!("bad header field `{kv}`")))?;
            fields.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| -> Result<&String, SignalError> {
            fields
                .get(k)
                .ok_or_else(|| SignalError::BadDump(format!("missing header key `{k}`")))
        };
        let parse_f = |s: &str| -> Result<f64, SignalError> {
            s.parse::<f64>()
                .map_err(|_| SignalError::BadDump(format!("bad number `{s}`")))
        };
        let n: usize = get("n")?
            .parse()
            .map_err(|_| SignalError::BadDump("bad n".into()))?;
        let t = parse_f(get("t")?)?;
        let n0 = parse_f(get("n0")?)?;

        let truth = if fields.contains_key("bits_a") {
            let bits = |s: &str| -> Result<Vec<u8>, SignalError> {
                s.chars()
                    .map(|c| match c {
                        '0' => Ok(0),
                        '1' => Ok(1),
                        _ => Err(SignalError::BadDump(format!("bad bit char `{c}`"))),
                    })
                    .collect()
            };
            Some(PacketScenario {
                bits_a: bits(get("bits_a")?)?,
                bits_b: bits(get("bits_b")?)?,
                h_a: parse_complex(get("h_a")?)
                    .ok_or_else(|| SignalError::BadDump("bad h_a".into()))?,
                h_b: parse_complex(get("h_b")?)
                    .ok_or_else(|| SignalError::BadDump("bad h_b".into()))?,
                f_a: parse_f(get("f_a")?)?,
                f_b: parse_f(get("f_b")?)?,
                phi_a: parse_f(get("phi_a")?)?,
                phi_b: parse_f(get("phi_b")?)?,
                seed: get("seed")?
                    .parse()
                    .map_err(|_| SignalError::BadDump("bad seed".into()))?,
            })
        } else {
            None
        };

        let mut symbols = Vec::with_capacity(n);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| parse_f(s.trim()))
                .collect::<Result<_, _>>()?;
            if vals.len() != 4 {
                return Err(SignalError::BadDump(format!(
                    "expected 4 fields per record, got {}",
                    vals.len()
                )));
            }
            symbols.push(Complex2(
                C64::new(vals[0], vals[1]),
                C64::new(vals[2], vals[3]),
            ));
        }
        if symbols.len() != n {
            return Err(SignalError::BadDump(format!(
                "header says {n} symbols, found {}",
                symbols.len()
            )));
        }
        Ok(Self {
            n_symbols: n,
            symbol_duration: t,
            noise_var: n0,
            truth,
            symbols,
        })
    }
}

/// Parse `a+bi` / `a-bi` / `a` (scientific notation allowed).
pub fn parse_complex(s: &str) -> Option<C64> {
    let s = s.trim();
    if let Some(body) = s.strip_suffix(['i', 'j']) {
        // Split at the sign that separates real and imaginary parts, skipping
        // signs that belong to an exponent or lead the string.
        let bytes = body.as_bytes();
        for k in (1..bytes.len()).rev() {
            let c = bytes[k] as char;
            if (c == '+' || c == '-') && !matches!(bytes[k - 1] as char, 'e' | 'E') {
                let re: f64 = body[..k].parse().ok()?;
                let im_str = &body[k..];
                let im: f64 = if im_str == "+" {
                    1.0
                } else if im_str == "-" {
                    -1.0
                } else {
                    im_str.parse().ok()?
                };
                return Some(C64::new(re, im));
            }
        }
        // Pure imaginary.
        let im: f64 = body.parse().ok()?;
        Some(C64::new(0.0, im))
    } else {
        let re: f64 = s.parse().ok()?;
        Some(C64::new(re, 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: usize) -> SystemParams {
        SystemParams::default_link(n, 0.0)
    }

    fn scenario(bits_a: Vec<u8>, bits_b: Vec<u8>) -> PacketScenario {
        PacketScenario {
            bits_a,
            bits_b,
            h_a: C64::new(1.0, 0.0),
            h_b: C64::new(1.0, 0.0),
            f_a: 0.0,
            f_b: 0.0,
            phi_a: 0.0,
            phi_b: 0.0,
            seed: 0,
        }
    }

    #[test]
    fn cfsk_phase_is_zero_at_start() {
        let p = params(4);
        assert_eq!(cfsk_phase(&[1, 0, 1, 1], 0, &p).unwrap(), 0.0);
    }

    #[test]
    fn cfsk_phase_accumulates() {
        // Two ones at tone_offset*T = 1/2 accumulate 2 pi.
        let p = params(2);
        let phi = cfsk_phase(&[1, 1], 2, &p).unwrap();
        assert!((phi - 2.0 * PI).abs() < 1e-12);
        // Opposite bits cancel.
        let phi = cfsk_phase(&[0, 1], 2, &p).unwrap();
        assert!(phi.abs() < 1e-12);
    }

    #[test]
    fn cfsk_phase_rejects_out_of_range() {
        let p = params(2);
        assert!(matches!(
            cfsk_phase(&[0, 1], 3, &p),
            Err(SignalError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn z_matrices_match_bit_pairs() {
        assert_eq!(
            z_matrix(BitPair::new(0, 0)),
            CMatrix2::from_re(1.0, 1.0, 0.0, 0.0)
        );
        assert_eq!(
            z_matrix(BitPair::new(0, 1)),
            CMatrix2::from_re(1.0, 0.0, 0.0, 1.0)
        );
        assert_eq!(
            z_matrix(BitPair::new(1, 0)),
            CMatrix2::from_re(0.0, 1.0, 1.0, 0.0)
        );
        assert_eq!(
            z_matrix(BitPair::new(1, 1)),
            CMatrix2::from_re(0.0, 0.0, 1.0, 1.0)
        );
    }

    #[test]
    fn g_matrix_is_bit_independent_at_orthogonal_tones() {
        // At tone_offset*T = 1/2 the per-bit phase is -+pi, so both bit
        // values give the same rotation; at zero CFO it is -1.
        let p = params(2);
        for s in BitPair::ALL {
            let g = g_matrix(s, (0.0, 0.0), &p);
            assert!((g.a - C64::new(-1.0, 0.0)).norm() < 1e-12, "{s:?}");
            assert!((g.d - C64::new(-1.0, 0.0)).norm() < 1e-12, "{s:?}");
        }
    }

    #[test]
    fn g_matrix_entries_have_unit_modulus() {
        let p = params(2);
        for s in BitPair::ALL {
            let g = g_matrix(s, (7321.0, -4000.0), &p);
            assert!((g.a.norm() - 1.0).abs() < 1e-12);
            assert!((g.d.norm() - 1.0).abs() < 1e-12);
            assert!(g.is_unitary_diagonal(1e-12));
        }
    }

    #[test]
    fn g_matrix_composition_accumulates_phase() {
        let p = params(4);
        let f = (6000.0, 100.0);
        let bits = [BitPair::new(0, 1), BitPair::new(1, 1), BitPair::new(1, 0)];
        let mut prod = CMatrix2::identity();
        let mut phase_a = 0.0;
        for s in bits {
            let g = g_matrix(s, f, &p);
            prod = g.mul_mat(&prod);
            phase_a += p.tone_phase_step() * (1.0 - 2.0 * f64::from(s.a)) + p.cfo_phase_step() * f.0;
        }
        let expect = C64::from_polar(1.0, phase_a);
        assert!((prod.a - expect).norm() < 1e-12);
    }

    #[test]
    fn alpha_beta_limits() {
        let p = params(2);
        let (a, b) = alpha_beta(0.0, &p);
        assert!((a - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(b.norm() < 1e-15);

        let (a, b) = alpha_beta(10e3, &p);
        assert!((a.norm() - 1.0).abs() < 1e-3);
        // Direct evaluation: |beta| = 2 sin(0.01 pi) / (2 pi * 0.99).
        let expect = 2.0 * (0.01 * PI).sin() / (2.0 * PI * 0.99);
        assert!((b.norm() - expect).abs() < 1e-12);
        assert!(b.norm() < 0.011);
    }

    #[test]
    fn noiseless_identity_observation() {
        // Bits (0,1) map each user onto its own branch.
        let p = params(1);
        let mut sc = scenario(vec![0], vec![1]);
        sc.h_a = C64::new(0.3, -0.2);
        sc.h_b = C64::new(-1.1, 0.4);
        let r = simulate_packet(&sc, &p, SimMode::Approx).unwrap();
        assert!((r[0].0 - sc.h_a).norm() < 1e-15);
        assert!((r[0].1 - sc.h_b).norm() < 1e-15);
    }

    #[test]
    fn noiseless_superposed_observation() {
        // Bits (0,0) superpose both users on branch 1.
        let p = params(1);
        let mut sc = scenario(vec![0], vec![0]);
        sc.h_a = C64::new(0.7, 0.1);
        sc.h_b = C64::new(0.2, -0.9);
        let r = simulate_packet(&sc, &p, SimMode::Approx).unwrap();
        assert!((r[0].0 - (sc.h_a + sc.h_b)).norm() < 1e-15);
        assert!(r[0].1.norm() < 1e-15);
    }

    #[test]
    fn exact_equals_approx_at_zero_cfo() {
        let p = params(8);
        let mut sc = scenario(vec![0, 1, 1, 0, 0, 1, 0, 1], vec![1, 1, 0, 0, 1, 0, 0, 1]);
        sc.h_a = C64::new(0.8, 0.3);
        sc.h_b = C64::new(-0.4, 1.2);
        sc.phi_a = 0.9;
        sc.phi_b = -2.1;
        let ra = simulate_packet(&sc, &p, SimMode::Approx).unwrap();
        let re = simulate_packet(&sc, &p, SimMode::Exact).unwrap();
        for (x, y) in ra.iter().zip(&re) {
            assert!((x.0 - y.0).norm() < 1e-12);
            assert!((x.1 - y.1).norm() < 1e-12);
        }
    }

    #[test]
    fn rotation_preserves_channel_magnitudes() {
        let p = params(16);
        let mut sc = scenario(vec![0; 16], vec![1; 16]);
        sc.bits_a[3] = 1;
        sc.bits_b[7] = 0;
        sc.h_a = C64::new(0.6, -0.8);
        sc.h_b = C64::new(1.5, 0.5);
        sc.f_a = 6000.0;
        sc.f_b = 100.0;
        let hs = rotated_channels(&sc, &p);
        for h in hs {
            assert!((h.0.norm() - sc.h_a.norm()).abs() < 1e-12);
            assert!((h.1.norm() - sc.h_b.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn same_seed_reproduces_noise() {
        let mut p = params(32);
        p.noise_var = 0.5;
        let sc = scenario(vec![0; 32], vec![1; 32]);
        let r1 = simulate_packet(&sc, &p, SimMode::Approx).unwrap();
        let r2 = simulate_packet(&sc, &p, SimMode::Approx).unwrap();
        assert_eq!(r1.len(), r2.len());
        for (x, y) in r1.iter().zip(&r2) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn dump_roundtrip() {
        let mut p = params(6);
        p.noise_var = 0.1;
        let mut sc = scenario(vec![0, 1, 0, 0, 1, 1], vec![1, 1, 0, 1, 0, 0]);
        sc.h_a = C64::new(0.3, 0.4);
        sc.f_a = 6000.0;
        sc.f_b = 100.0;
        sc.seed = 42;
        let r = simulate_packet(&sc, &p, SimMode::Approx).unwrap();
        let dump = PacketDump::from_simulation(&sc, &p, r.clone());
        let mut buf = Vec::new();
        dump.write_csv(&mut buf).unwrap();
        let back = PacketDump::read_csv(&buf[..]).unwrap();
        assert_eq!(back.n_symbols, 6);
        assert!((back.noise_var - 0.1).abs() < 1e-15);
        let t = back.truth.unwrap();
        assert_eq!(t.bits_a, sc.bits_a);
        assert_eq!(t.seed, 42);
        assert!((t.h_a - sc.h_a).norm() < 1e-12);
        for (x, y) in back.symbols.iter().zip(&r) {
            assert!((x.0 - y.0).norm() < 1e-12);
            assert!((x.1 - y.1).norm() < 1e-12);
        }
    }

    #[test]
    fn parse_complex_forms() {
        assert_eq!(parse_complex("2.5").unwrap(), C64::new(2.5, 0.0));
        assert_eq!(parse_complex("1+2i").unwrap(), C64::new(1.0, 2.0));
        assert_eq!(parse_complex("-0.5-0.3i").unwrap(), C64::new(-0.5, -0.3));
        assert_eq!(parse_complex("1e-3+2e-4i").unwrap(), C64::new(1e-3, 2e-4));
        assert_eq!(parse_complex("3i").unwrap(), C64::new(0.0, 3.0));
        assert!(parse_complex("abc").is_none());
    }
}
