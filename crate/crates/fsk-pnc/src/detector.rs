//! The Gaussian-mixture belief-propagation detector.
//!
//! For each candidate CFO pair on a grid, forward and backward mixture
//! messages are passed along the symbol chain; at every symbol the prior,
//! both messages, and the local likelihood are multiplied and integrated in
//! closed form, giving the joint weight of each bit-pair hypothesis and that
//! CFO. Tallying the weights across the grid marginalizes the CFOs, and
//! summing the two odd hypotheses gives the XOR posterior that the relay
//! decides on. Posterior channel means fall out of the same integrals.

use crate::gaussian::{
    likelihood_component, log_sum_exp, Convention, DiagRotation, EngineError, GaussianComponent,
    Mixture, ReductionMethod,
};
use crate::linalg::{CMatrix2, Complex2};
use crate::signal::{g_matrix, BitPair, SystemParams};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("degenerate posterior at symbol {symbol}: every hypothesis integrates to zero{detail}")]
    DegeneratePosterior { symbol: usize, detail: String },
    #[error("invalid detector configuration: {0}")]
    BadConfig(String),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
}

/// Channel prior multiplied into every symbol's posterior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelPrior {
    /// Prior-free operation: the flat function.
    None,
    /// Zero-mean circular Gaussian channels with the given per-user
    /// variances. Rotation-invariant, so the same prior applies at every
    /// symbol.
    Rayleigh { var_a: f64, var_b: f64 },
    /// Channel pair known up to a small isotropic uncertainty `cov`; the
    /// mean is rotated along the chain to follow the deterministic phase
    /// evolution.
    Point { h0: Complex2, cov: f64 },
}

impl ChannelPrior {
    /// Information-form component for one symbol slot. `rotated_point` is the
    /// point-prior mean already advanced to this slot.
    pub(crate) fn component(
        &self,
        convention: Convention,
        rotated_point: &Complex2,
    ) -> GaussianComponent {
        match self {
            ChannelPrior::None => GaussianComponent::flat(),
            ChannelPrior::Rayleigh { var_a, var_b } => {
                let pa = 1.0 / convention.effective(*var_a);
                let pb = 1.0 / convention.effective(*var_b);
                GaussianComponent::new(
                    CMatrix2::from_re(pa, 0.0, 0.0, pb),
                    Complex2::zero(),
                    0.0,
                )
            }
            ChannelPrior::Point { cov, .. } => {
                let eff = convention.effective(*cov);
                let precision = CMatrix2::from_re(1.0 / eff, 0.0, 0.0, 1.0 / eff);
                let info = rotated_point.scale(1.0 / eff);
                let logw = -rotated_point.norm_sqr() / (2.0 * eff);
                GaussianComponent::new(precision, info, logw)
            }
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ChannelPrior::None => "none",
            ChannelPrior::Rayleigh { .. } => "rayleigh",
            ChannelPrior::Point { .. } => "point",
        }
    }
}

/// Everything the detector needs to know about how to run.
#[derive(Debug, Clone)]
pub struct DetectorConfig {
    /// Component budget kept after each reduction step.
    pub gmr: usize,
    pub reduction: ReductionMethod,
    /// Candidate CFO pairs in Hz; the posterior is tallied over these.
    pub cfo_grid: Vec<(f64, f64)>,
    pub prior: ChannelPrior,
    /// Per-branch noise variance the detector assumes.
    pub n0_det: f64,
    pub convention: Convention,
}

impl DetectorConfig {
    pub fn new(
        gmr: usize,
        reduction: ReductionMethod,
        cfo_grid: Vec<(f64, f64)>,
        prior: ChannelPrior,
        n0_det: f64,
        convention: Convention,
    ) -> Self {
        Self {
            gmr,
            reduction,
            cfo_grid,
            prior,
            n0_det,
            convention,
        }
    }

    pub fn validate(&self, params: &SystemParams) -> Result<(), DetectorError> {
        if self.gmr < 1 {
            return Err(DetectorError::BadConfig("gmr must be >= 1".into()));
        }
        if self.reduction == ReductionMethod::Hybrid && self.gmr < 2 {
            return Err(DetectorError::BadConfig(
                "hybrid reduction needs gmr >= 2".into(),
            ));
        }
        if self.cfo_grid.is_empty() {
            return Err(DetectorError::BadConfig("CFO grid is empty".into()));
        }
        for &(fa, fb) in &self.cfo_grid {
            if fa.abs() > params.cfo_max + 1e-9 || fb.abs() > params.cfo_max + 1e-9 {
                return Err(DetectorError::BadConfig(format!(
                    "grid point ({fa}, {fb}) outside +-{} Hz",
                    params.cfo_max
                )));
            }
        }
        if !(self.n0_det > 0.0) {
            return Err(DetectorError::BadConfig(
                "detector noise parameter must be positive".into(),
            ));
        }
        Ok(())
    }

    fn effective_n0(&self) -> f64 {
        self.convention.effective(self.n0_det)
    }
}

/// Per-symbol decisions and estimates for one packet.
#[derive(Debug, Clone)]
pub struct DetectionResult {
    /// MAP decision on the XOR of the two users' bits at each symbol
    /// (ties resolve to 0).
    pub xor_bits: Vec<u8>,
    /// Posterior probability that the XOR is 1.
    pub xor_pmf: Vec<f64>,
    /// Posterior over bit pairs in the order (0,0), (0,1), (1,0), (1,1).
    pub pair_pmf: Vec<[f64; 4]>,
    /// Posterior mean of the rotated channel pair at each symbol.
    pub h_est: Vec<Complex2>,
    /// Log evidence of each CFO grid point.
    pub per_f_loglik: Vec<f64>,
}

/// Instrumentation for the complexity contract: how many component products
/// the message passes and the posterior assembly performed.
#[derive(Debug, Clone, Copy, Default)]
pub struct DetectStats {
    pub pass_combines: u64,
    pub assembly_combines: u64,
    pub grid_points: usize,
}

/// Output of one directional message pass.
#[derive(Debug, Clone)]
pub struct PassOutput {
    /// `msgs[n]` is the mixture used at symbol `n`'s posterior: for the left
    /// pass it absorbs symbols `n+1..N` (expressed in the coordinates of
    /// `h_{n+1}`, one hypothesis rotation short of `h_n`); for the right pass
    /// it absorbs symbols `0..n` in the coordinates of `h_n`.
    pub msgs: Vec<Mixture>,
    /// Accumulated log-normalizers subtracted while building `msgs[n]`.
    pub norm_cum: Vec<f64>,
    pub combines: u64,
}

fn likelihood_table(
    r: &[Complex2],
    n0_eff: f64,
) -> Result<Vec<[GaussianComponent; 4]>, DetectorError> {
    r.iter()
        .map(|rn| {
            let mk = |s: BitPair| likelihood_component(s, rn, n0_eff);
            Ok([
                mk(BitPair::ALL[0])?,
                mk(BitPair::ALL[1])?,
                mk(BitPair::ALL[2])?,
                mk(BitPair::ALL[3])?,
            ])
        })
        .collect()
}

/// Hypothesis rotations for one CFO grid point, plus whether all four agree
/// (they do at the default orthogonal tone spacing, where the per-bit phase
/// steps are +-pi and cancel).
struct RotTable {
    rots: [DiagRotation; 4],
    all_equal: bool,
}

fn rot_table(f: (f64, f64), params: &SystemParams) -> RotTable {
    let mk = |v: usize| {
        DiagRotation::new(&g_matrix(BitPair::ALL[v], f, params))
            .expect("per-symbol rotations are diagonal unitary by construction")
    };
    let rots = [mk(0), mk(1), mk(2), mk(3)];
    let all_equal = rots[1..].iter().all(|r| r.approx_eq(&rots[0]));
    RotTable { rots, all_equal }
}

fn left_pass_inner(
    like: &[[GaussianComponent; 4]],
    rt: &RotTable,
    cfg: &DetectorConfig,
) -> Result<PassOutput, DetectorError> {
    let n = like.len();
    let mut msgs: Vec<Mixture> = vec![Mixture::flat(); n];
    let mut norm_cum = vec![0.0f64; n];
    let mut combines = 0u64;

    for i in (0..n.saturating_sub(1)).rev() {
        let mut pool = Vec::with_capacity(4 * msgs[i + 1].len());
        for (v, rot) in rt.rots.iter().enumerate() {
            let lk = &like[i + 1][v];
            for comp in &msgs[i + 1].components {
                pool.push(lk.combine(&rot.pullback(comp)));
                combines += 1;
            }
        }
        let mut mix = Mixture::new(pool);
        let norm = mix.reduce(cfg.reduction, cfg.gmr)?;
        norm_cum[i] = norm_cum[i + 1] + norm;
        msgs[i] = mix;
    }

    Ok(PassOutput {
        msgs,
        norm_cum,
        combines,
    })
}

fn right_pass_inner(
    like: &[[GaussianComponent; 4]],
    rt: &RotTable,
    cfg: &DetectorConfig,
) -> Result<PassOutput, DetectorError> {
    let n = like.len();
    let mut msgs: Vec<Mixture> = vec![Mixture::flat(); n];
    let mut norm_cum = vec![0.0f64; n];
    let mut combines = 0u64;

    for i in 0..n.saturating_sub(1) {
        let mut pool = Vec::with_capacity(4 * msgs[i].len());
        for (v, rot) in rt.rots.iter().enumerate() {
            let lk = &like[i][v];
            for comp in &msgs[i].components {
                pool.push(rot.pushforward(&lk.combine(comp)));
                combines += 1;
            }
        }
        let mut mix = Mixture::new(pool);
        let norm = mix.reduce(cfg.reduction, cfg.gmr)?;
        norm_cum[i + 1] = norm_cum[i] + norm;
        msgs[i + 1] = mix;
    }

    Ok(PassOutput {
        msgs,
        norm_cum,
        combines,
    })
}

/// Backward (right-to-left) message recursion. Each step branches over the
/// next symbol's four bit pairs, multiplies in that symbol's likelihood,
/// rotates the accumulated mixture down through the matching `G`, pools the
/// four branches, and reduces back to the component budget.
pub fn left_pass(
    r: &[Complex2],
    f: (f64, f64),
    params: &SystemParams,
    cfg: &DetectorConfig,
) -> Result<PassOutput, DetectorError> {
    let like = likelihood_table(r, cfg.effective_n0())?;
    left_pass_inner(&like, &rot_table(f, params), cfg)
}

/// Forward (left-to-right) message recursion: the mirror of `left_pass`,
/// pushing each symbol's likelihood product up through the rotation built
/// from that same symbol's bits.
pub fn right_pass(
    r: &[Complex2],
    f: (f64, f64),
    params: &SystemParams,
    cfg: &DetectorConfig,
) -> Result<PassOutput, DetectorError> {
    let like = likelihood_table(r, cfg.effective_n0())?;
    right_pass_inner(&like, &rot_table(f, params), cfg)
}

/// Joint weights of the four bit-pair hypotheses at every symbol for one CFO
/// grid point, plus the posterior channel mean per hypothesis.
#[derive(Debug, Clone)]
pub struct PerFPosterior {
    /// Unnormalized log weight per symbol per hypothesis, including the
    /// accumulated message normalizers so values are comparable across grid
    /// points.
    pub pair_logval: Vec<[f64; 4]>,
    /// Mass-weighted posterior channel mean per symbol per hypothesis
    /// (absent when no component of that product is integrable).
    pub slice_mean: Vec<[Option<Complex2>; 4]>,
    /// Log evidence of this grid point.
    pub log_evidence: f64,
    pub pass_combines: u64,
    pub assembly_combines: u64,
}

/// Point-prior means advanced along the chain by the bit-independent part of
/// the rotation. Exact at the default orthogonal tone spacing, where `G`
/// does not depend on the bits at all.
fn point_prior_track(prior: &ChannelPrior, f: (f64, f64), params: &SystemParams, n: usize) -> Vec<Complex2> {
    match prior {
        ChannelPrior::Point { h0, .. } => {
            let g = g_matrix(BitPair::new(0, 0), f, params);
            let mut track = Vec::with_capacity(n);
            let mut h = *h0;
            for _ in 0..n {
                track.push(h);
                h = g.mul_vec(&h);
            }
            track
        }
        _ => vec![Complex2::zero(); n],
    }
}

fn posterior_per_f_inner(
    like: &[[GaussianComponent; 4]],
    f: (f64, f64),
    params: &SystemParams,
    cfg: &DetectorConfig,
) -> Result<PerFPosterior, DetectorError> {
    let n = like.len();
    let rt = rot_table(f, params);
    let left = left_pass_inner(like, &rt, cfg)?;
    let right = right_pass_inner(like, &rt, cfg)?;
    let point_track = point_prior_track(&cfg.prior, f, params, n);

    let mut pair_logval = Vec::with_capacity(n);
    let mut slice_mean = Vec::with_capacity(n);
    let mut assembly_combines = 0u64;

    let mut masses: Vec<f64> = Vec::new();
    let mut means: Vec<Complex2> = Vec::new();
    let mut pulled: Vec<GaussianComponent> = Vec::new();

    for i in 0..n {
        let prior = cfg.prior.component(cfg.convention, &point_track[i]);
        let mut vals = [f64::NEG_INFINITY; 4];
        let mut mns: [Option<Complex2>; 4] = [None; 4];

        for (v, rot) in rt.rots.iter().enumerate() {
            let base = prior.combine(&like[i][v]);
            assembly_combines += 1;

            // At the default tone spacing the rotation does not depend on
            // the bits, so the pulled-back left message is shared by all
            // four hypotheses.
            if v == 0 || !rt.all_equal {
                pulled.clear();
                for comp in &left.msgs[i].components {
                    pulled.push(rot.pullback(comp));
                }
            }

            masses.clear();
            means.clear();
            for rcomp in &right.msgs[i].components {
                let br = base.combine(rcomp);
                assembly_combines += 1;
                for lcomp in &pulled {
                    let prod = br.combine(lcomp);
                    assembly_combines += 1;
                    if let Ok((mass, mean)) = prod.integrate_parts() {
                        masses.push(mass);
                        means.push(mean);
                    }
                }
            }

            let total = log_sum_exp(&masses);
            if total > f64::NEG_INFINITY {
                vals[v] = total + left.norm_cum[i] + right.norm_cum[i];
                let mut acc = Complex2::zero();
                for (m, mu) in masses.iter().zip(&means) {
                    acc = acc + mu.scale((m - total).exp());
                }
                mns[v] = Some(acc);
            }
        }

        if vals.iter().all(|&v| v == f64::NEG_INFINITY) {
            return Err(DetectorError::DegeneratePosterior {
                symbol: i,
                detail: format!(
                    " (grid point ({}, {}) Hz, prior {}, {} symbols)",
                    f.0,
                    f.1,
                    cfg.prior.label(),
                    n
                ),
            });
        }
        pair_logval.push(vals);
        slice_mean.push(mns);
    }

    let log_evidence = log_sum_exp(&pair_logval[0]);
    Ok(PerFPosterior {
        pair_logval,
        slice_mean,
        log_evidence,
        pass_combines: left.combines + right.combines,
        assembly_combines,
    })
}

/// Run both passes for one grid point and assemble the per-symbol posterior
/// products `prior x right-message x likelihood x left-message`.
pub fn posterior_per_f(
    r: &[Complex2],
    f: (f64, f64),
    params: &SystemParams,
    cfg: &DetectorConfig,
) -> Result<PerFPosterior, DetectorError> {
    let like = likelihood_table(r, cfg.effective_n0())?;
    posterior_per_f_inner(&like, f, params, cfg)
}

/// Materialized posterior product mixtures for one symbol at one grid point:
/// the four hypothesis mixtures `prior x M_r x likelihood x M_l`. Intended
/// for inspection and validation rather than the hot path.
pub fn posterior_mixtures_per_f(
    r: &[Complex2],
    f: (f64, f64),
    params: &SystemParams,
    cfg: &DetectorConfig,
    symbol: usize,
) -> Result<[Mixture; 4], DetectorError> {
    let n = r.len();
    if symbol >= n {
        return Err(DetectorError::BadConfig(format!(
            "symbol {symbol} out of range for {n}-symbol packet"
        )));
    }
    let like = likelihood_table(r, cfg.effective_n0())?;
    let gs: [CMatrix2; 4] = BitPair::ALL.map(|s| g_matrix(s, f, params));
    let left = left_pass(r, f, params, cfg)?;
    let right = right_pass(r, f, params, cfg)?;
    let point_track = point_prior_track(&cfg.prior, f, params, n);
    let prior = cfg.prior.component(cfg.convention, &point_track[symbol]);

    let mut out: Vec<Mixture> = Vec::with_capacity(4);
    for (v, g) in gs.iter().enumerate() {
        let base = prior.combine(&like[symbol][v]);
        let mut comps = Vec::new();
        for rcomp in &right.msgs[symbol].components {
            let br = base.combine(rcomp);
            for lcomp in &left.msgs[symbol].components {
                let mut prod = br.combine(&lcomp.pullback(g)?);
                prod.logw += left.norm_cum[symbol] + right.norm_cum[symbol];
                comps.push(prod);
            }
        }
        out.push(Mixture::new(comps));
    }
    Ok(out.try_into().expect("exactly four hypothesis mixtures"))
}

/// Full detection: run the posterior assembly on every CFO grid point,
/// tally the per-symbol hypothesis weights across the grid, decide the XOR
/// per symbol by MAP, and extract the evidence-weighted channel estimate.
pub fn detect(
    r: &[Complex2],
    params: &SystemParams,
    cfg: &DetectorConfig,
) -> Result<DetectionResult, DetectorError> {
    detect_with_stats(r, params, cfg).map(|(res, _)| res)
}

pub fn detect_with_stats(
    r: &[Complex2],
    params: &SystemParams,
    cfg: &DetectorConfig,
) -> Result<(DetectionResult, DetectStats), DetectorError> {
    cfg.validate(params)?;
    let n = r.len();
    if n == 0 {
        return Err(DetectorError::BadConfig("empty packet".into()));
    }

    // The likelihood table does not depend on the CFO hypothesis; build it
    // once and share it across the grid.
    let like = likelihood_table(r, cfg.effective_n0())?;
    let per_f: Vec<PerFPosterior> = cfg
        .cfo_grid
        .par_iter()
        .map(|&f| posterior_per_f_inner(&like, f, params, cfg))
        .collect::<Result<_, _>>()?;

    let stats = DetectStats {
        pass_combines: per_f.iter().map(|p| p.pass_combines).sum(),
        assembly_combines: per_f.iter().map(|p| p.assembly_combines).sum(),
        grid_points: per_f.len(),
    };

    let mut xor_bits = Vec::with_capacity(n);
    let mut xor_pmf = Vec::with_capacity(n);
    let mut pair_pmf = Vec::with_capacity(n);
    let mut h_est = Vec::with_capacity(n);

    for i in 0..n {
        // Global shift for numerical stability of the cross-grid tally.
        let mut shift = f64::NEG_INFINITY;
        for p in &per_f {
            for &v in &p.pair_logval[i] {
                if v > shift {
                    shift = v;
                }
            }
        }
        if shift == f64::NEG_INFINITY {
            return Err(DetectorError::DegeneratePosterior {
                symbol: i,
                detail: " (all grid points)".into(),
            });
        }

        let mut weights = [0.0f64; 4];
        let mut mean_num = Complex2::zero();
        let mut mean_den = 0.0f64;
        for p in &per_f {
            for v in 0..4 {
                let w = (p.pair_logval[i][v] - shift).exp();
                weights[v] += w;
                if let Some(mu) = p.slice_mean[i][v] {
                    mean_num = mean_num + mu.scale(w);
                    mean_den += w;
                }
            }
        }
        let total: f64 = weights.iter().sum();
        let pmf = [
            weights[0] / total,
            weights[1] / total,
            weights[2] / total,
            weights[3] / total,
        ];
        let p_xor1 = pmf[1] + pmf[2];
        xor_bits.push(u8::from(p_xor1 > 1.0 - p_xor1));
        xor_pmf.push(p_xor1);
        pair_pmf.push(pmf);
        h_est.push(if mean_den > 0.0 {
            mean_num.scale(1.0 / mean_den)
        } else {
            Complex2::zero()
        });
    }

    let per_f_loglik = per_f.iter().map(|p| p.log_evidence).collect();
    Ok((
        DetectionResult {
            xor_bits,
            xor_pmf,
            pair_pmf,
            h_est,
            per_f_loglik,
        },
        stats,
    ))
}

/// Mean squared channel-estimation error over a batch of packets:
/// `E(|h_n - h_n_est|^2)` averaged over symbols and packets.
pub fn estimate_mse(
    results: &[DetectionResult],
    truths: &[Vec<Complex2>],
) -> Result<f64, DetectorError> {
    if results.len() != truths.len() {
        return Err(DetectorError::LengthMismatch(format!(
            "{} results vs {} truth sequences",
            results.len(),
            truths.len()
        )));
    }
    let mut sum = 0.0f64;
    let mut count = 0usize;
    for (res, truth) in results.iter().zip(truths) {
        if res.h_est.len() != truth.len() {
            return Err(DetectorError::LengthMismatch(format!(
                "{} estimates vs {} true channels",
                res.h_est.len(),
                truth.len()
            )));
        }
        for (est, t) in res.h_est.iter().zip(truth) {
            sum += (*est - *t).norm_sqr();
            count += 1;
        }
    }
    if count == 0 {
        return Err(DetectorError::LengthMismatch("no symbols".into()));
    }
    Ok(sum / count as f64)
}
