//! Weighted Gaussian functions of the two-user channel vector in information
//! (precision) form, and the mixture algebra the detector runs on: products,
//! unitary transforms, normalization, closed-form integration, and the three
//! mixture-reduction strategies.
//!
//! A component represents the function
//!
//! ```text
//! value(h) = exp( logw - 1/2 h^* L h + Re(e^* h) )
//! ```
//!
//! over `h` in C^2, with `L` Hermitian positive-semidefinite and `e` the
//! information vector (`e = L * mean` when `L` has full rank). Information
//! form is essential here: the single-branch observation likelihoods have
//! rank-1 precisions, so means and covariances do not exist for them, while
//! products and rotations stay exact.

use crate::linalg::{C64, CMatrix2, Complex2};
use crate::signal::{z_matrix, BitPair};
use thiserror::Error;

/// Relative eigenvalue threshold below which a precision counts as
/// rank-deficient.
pub const RANK_EPS: f64 = 1e-12;

/// Log normalization constant of a unit-precision Gaussian function on C^2
/// (four real dimensions): `2 ln(2 pi)`. Cancels in every normalized PMF.
pub const C_DIM: f64 = 3.675754132818691;

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("detector noise parameter must be positive")]
    NonPositiveNoise,
    #[error("transform matrix is not unitary diagonal")]
    NonUnitaryTransform,
    #[error("improper component, cannot integrate (rank-deficient precision)")]
    ImproperComponent,
    #[error("mixture is empty")]
    EmptyMixture,
    #[error("all mixture weights are -inf")]
    AllWeightsNegInf,
    #[error("moment match undefined: mixture contains a rank-deficient component")]
    MomentMatchUndefined,
}

/// Exponent bookkeeping for the detector and its oracles.
///
/// The exact likelihood of a correlator output with per-branch complex noise
/// variance `N0` is `exp(-|r - Z h|^2 / N0)`; the component formulas here use
/// the form `exp(-|r - Z h|^2 / (2 n0))`. `Corrected` therefore runs them
/// with `n0 = N0/2` (and Gaussian priors with halved variance), which makes
/// the detector's functions equal to the true densities; `PaperVerbatim`
/// passes the raw variances through, giving a square-root-tempered
/// likelihood that is internally consistent but statistically mismatched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Convention {
    #[default]
    Corrected,
    PaperVerbatim,
}

impl Convention {
    /// Map a physical variance (noise `N0` or prior channel variance) to the
    /// effective exponent parameter.
    pub fn effective(self, var: f64) -> f64 {
        match self {
            Convention::Corrected => var / 2.0,
            Convention::PaperVerbatim => var,
        }
    }
}

/// Numerically stable `ln(sum(exp(vals)))`; `-inf` for an empty slice.
pub fn log_sum_exp(vals: &[f64]) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for &v in vals {
        if v > max {
            max = v;
        }
    }
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = vals.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// One weighted Gaussian function of the channel pair, in information form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianComponent {
    /// Hermitian positive-semidefinite precision.
    pub precision: CMatrix2,
    /// Information vector; equals `precision * mean` for full-rank components.
    pub info: Complex2,
    /// Log-coefficient. Absorbs every constant, so `value_at` is exact.
    pub logw: f64,
}

impl GaussianComponent {
    /// The flat function `value(h) = 1`: identity of `combine` and the
    /// boundary message of the chain.
    pub fn flat() -> Self {
        Self {
            precision: CMatrix2::zero(),
            info: Complex2::zero(),
            logw: 0.0,
        }
    }

    pub fn new(precision: CMatrix2, info: Complex2, logw: f64) -> Self {
        Self {
            precision: precision.hermitize(),
            info,
            logw,
        }
    }

    /// Log of the represented function at `h`.
    pub fn log_value_at(&self, h: &Complex2) -> f64 {
        let lh = self.precision.mul_vec(h);
        let quad = h.dot(&lh).re;
        let lin = self.info.dot(h).re;
        self.logw - 0.5 * quad + lin
    }

    /// Pointwise product with `other`: precisions and information vectors
    /// add, and the log-coefficients add, so the result equals
    /// `value_self * value_other` everywhere. Addition preserves the
    /// Hermitian invariant exactly, so no re-symmetrization is needed;
    /// constructors and transforms maintain it.
    pub fn combine(&self, other: &Self) -> Self {
        Self {
            precision: self.precision + other.precision,
            info: self.info + other.info,
            logw: self.logw + other.logw,
        }
    }

    /// Substitute `h -> G h` (used to pull a message one step towards the
    /// packet start): `L' = G^* L G`, `e' = G^* e`, coefficient unchanged.
    pub fn pullback(&self, g: &CMatrix2) -> Result<Self, EngineError> {
        if !g.is_unitary_diagonal(1e-9) {
            return Err(EngineError::NonUnitaryTransform);
        }
        let ga = g.adjoint();
        Ok(Self {
            precision: ga.mul_mat(&self.precision).mul_mat(g).hermitize(),
            info: ga.mul_vec(&self.info),
            logw: self.logw,
        })
    }

    /// Substitute `h -> G^{-1} h` (push a message one step towards the packet
    /// end): `L' = G L G^*`, `e' = G e`, coefficient unchanged.
    pub fn pushforward(&self, g: &CMatrix2) -> Result<Self, EngineError> {
        if !g.is_unitary_diagonal(1e-9) {
            return Err(EngineError::NonUnitaryTransform);
        }
        let ga = g.adjoint();
        Ok(Self {
            precision: g.mul_mat(&self.precision).mul_mat(&ga).hermitize(),
            info: g.mul_vec(&self.info),
            logw: self.logw,
        })
    }

    /// Smallest/largest precision eigenvalues and the full-rank predicate
    /// (`lambda_min > RANK_EPS * trace`).
    pub fn is_full_rank(&self) -> bool {
        let (lo, _) = self.precision.eig_hermitian();
        lo > RANK_EPS * self.precision.trace_re()
    }

    /// 0 = full rank, 1 = rank one, 2 = flat.
    fn rank_deficiency(&self) -> u8 {
        let (lo, hi) = self.precision.eig_hermitian();
        let tr = self.precision.trace_re();
        if lo > RANK_EPS * tr {
            0
        } else if hi > RANK_EPS * tr.max(1e-300) && tr > 0.0 {
            1
        } else {
            2
        }
    }

    /// Mean `L^{-1} e` of a full-rank component.
    pub fn mean(&self) -> Result<Complex2, EngineError> {
        if !self.is_full_rank() {
            return Err(EngineError::ImproperComponent);
        }
        let inv = self
            .precision
            .inverse()
            .ok_or(EngineError::ImproperComponent)?;
        Ok(inv.mul_vec(&self.info))
    }

    /// Log of the integral of the component over C^2 (four real dimensions):
    /// `logw + 1/2 Re(e^* L^{-1} e) - ln det L + C_DIM`.
    pub fn integrate(&self) -> Result<f64, EngineError> {
        self.integrate_parts().map(|(mass, _)| mass)
    }

    /// Log-mass and mean in one pass; the mean falls out of the quadratic
    /// term for free.
    pub fn integrate_parts(&self) -> Result<(f64, Complex2), EngineError> {
        let (lo, _) = self.precision.eig_hermitian();
        if !(lo > RANK_EPS * self.precision.trace_re()) {
            return Err(EngineError::ImproperComponent);
        }
        let det = self.precision.det().re;
        if !(det > 0.0) {
            return Err(EngineError::ImproperComponent);
        }
        let inv = CMatrix2 {
            a: self.precision.d / det,
            b: -self.precision.b / det,
            c: -self.precision.c / det,
            d: self.precision.a / det,
        };
        let mean = inv.mul_vec(&self.info);
        let quad = self.info.dot(&mean).re;
        Ok((self.logw + 0.5 * quad - det.ln() + C_DIM, mean))
    }

    /// Ranking key used when a mixture must be thinned: the component's
    /// coefficient in the weight-times-normalized-PDF expansion,
    /// `logw + 1/2 e^* L^{-1} e - 1/2 ln det L`, evaluated on the observed
    /// subspace for rank-deficient components. Heavier components sort first.
    fn reduction_key(&self) -> f64 {
        match self.rank_deficiency() {
            0 => {
                let det = self.precision.det().re;
                let inv = CMatrix2 {
                    a: self.precision.d / det,
                    b: -self.precision.b / det,
                    c: -self.precision.c / det,
                    d: self.precision.a / det,
                };
                let quad = self.info.dot(&inv.mul_vec(&self.info)).re;
                self.logw + 0.5 * quad - 0.5 * det.ln()
            }
            1 => {
                let (_, hi) = self.precision.eig_hermitian();
                let u = if self.precision.b.norm() > 1e-300 {
                    let v = Complex2(self.precision.b, C64::new(hi, 0.0) - self.precision.a);
                    let n = v.norm_sqr().sqrt();
                    Complex2(v.0 / n, v.1 / n)
                } else if self.precision.a.re >= self.precision.d.re {
                    Complex2::from_re(1.0, 0.0)
                } else {
                    Complex2::from_re(0.0, 1.0)
                };
                let proj = u.dot(&self.info);
                self.logw + 0.5 * proj.norm_sqr() / hi - 0.5 * hi.ln()
            }
            _ => self.logw,
        }
    }
}

/// Precomputed diagonal unitary rotation for the hot message-passing path.
/// Exploits the structure `(G^* L G)_{ij} = conj(g_i) L_{ij} g_j` with
/// unit-modulus diagonal entries, so a transform costs a handful of complex
/// multiplies and stays exactly Hermitian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct DiagRotation {
    ga: C64,
    gb: C64,
    /// `conj(ga) * gb`: the factor the off-diagonal precision entry picks up
    /// under a pullback.
    cross: C64,
}

impl DiagRotation {
    pub(crate) fn new(g: &CMatrix2) -> Option<Self> {
        if !g.is_unitary_diagonal(1e-9) {
            return None;
        }
        Some(Self {
            ga: g.a,
            gb: g.d,
            cross: g.a.conj() * g.d,
        })
    }

    pub(crate) fn approx_eq(&self, other: &Self) -> bool {
        (self.ga - other.ga).norm() < 1e-13 && (self.gb - other.gb).norm() < 1e-13
    }

    /// Substitute `h -> G h`.
    pub(crate) fn pullback(&self, c: &GaussianComponent) -> GaussianComponent {
        let b = c.precision.b * self.cross;
        GaussianComponent {
            precision: CMatrix2 {
                a: c.precision.a,
                b,
                c: b.conj(),
                d: c.precision.d,
            },
            info: Complex2(c.info.0 * self.ga.conj(), c.info.1 * self.gb.conj()),
            logw: c.logw,
        }
    }

    /// Substitute `h -> G^{-1} h`.
    pub(crate) fn pushforward(&self, c: &GaussianComponent) -> GaussianComponent {
        let b = c.precision.b * self.cross.conj();
        GaussianComponent {
            precision: CMatrix2 {
                a: c.precision.a,
                b,
                c: b.conj(),
                d: c.precision.d,
            },
            info: Complex2(c.info.0 * self.ga, c.info.1 * self.gb),
            logw: c.logw,
        }
    }
}

/// Gaussian likelihood of one correlator output under a bit-pair hypothesis,
/// as a function of the channel pair: `exp(-|r - Z(s) h|^2 / (2 n0))` in
/// information form, with `L = Z^* Z / n0`, `e = Z^* r / n0`, and
/// `logw = -|r|^2 / (2 n0)`. For the same-branch hypotheses the precision is
/// rank one; for the cross hypotheses it is `I/n0`.
pub fn likelihood_component(
    s: BitPair,
    r: &Complex2,
    n0_det: f64,
) -> Result<GaussianComponent, EngineError> {
    if !(n0_det > 0.0) {
        return Err(EngineError::NonPositiveNoise);
    }
    let z = z_matrix(s);
    let za = z.adjoint();
    let precision = za.mul_mat(&z).scale(1.0 / n0_det).hermitize();
    let info = za.mul_vec(r).scale(1.0 / n0_det);
    let logw = -r.norm_sqr() / (2.0 * n0_det);
    Ok(GaussianComponent {
        precision,
        info,
        logw,
    })
}

/// How a mixture is thinned back to its component budget after the 4-way
/// branching of one message-passing step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReductionMethod {
    /// Keep the `gmr` heaviest components.
    Curtailment,
    /// Collapse the whole mixture into a single moment-matched Gaussian.
    GaussianApprox,
    /// Keep the `gmr - 1` heaviest and moment-match the remainder into one.
    Hybrid,
}

impl ReductionMethod {
    pub fn label(&self) -> &'static str {
        match self {
            ReductionMethod::Curtailment => "curtailment",
            ReductionMethod::GaussianApprox => "gaussian_approx",
            ReductionMethod::Hybrid => "hybrid",
        }
    }
}

/// An ordered collection of Gaussian components: one left-bound or
/// right-bound message of the detector chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    pub components: Vec<GaussianComponent>,
}

impl Mixture {
    /// The boundary message: a single flat component.
    pub fn flat() -> Self {
        Self {
            components: vec![GaussianComponent::flat()],
        }
    }

    pub fn new(components: Vec<GaussianComponent>) -> Self {
        Self { components }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Log of the mixture value at `h` (sum over components).
    pub fn log_value_at(&self, h: &Complex2) -> f64 {
        let vals: Vec<f64> = self
            .components
            .iter()
            .map(|c| c.log_value_at(h))
            .collect();
        log_sum_exp(&vals)
    }

    /// Subtract the log-sum-exp of all log-coefficients from each component
    /// and return it, so callers can accumulate the normalizers that keep
    /// evidence totals comparable across CFO grid points.
    pub fn normalize(&mut self) -> Result<f64, EngineError> {
        if self.components.is_empty() {
            return Err(EngineError::EmptyMixture);
        }
        let logws: Vec<f64> = self.components.iter().map(|c| c.logw).collect();
        let norm = log_sum_exp(&logws);
        if norm == f64::NEG_INFINITY {
            return Err(EngineError::AllWeightsNegInf);
        }
        for c in self.components.iter_mut() {
            c.logw -= norm;
        }
        Ok(norm)
    }

    /// Indices of components ordered heaviest-first (stable under ties).
    fn ranked_indices(&self) -> Vec<usize> {
        let keys: Vec<f64> = self.components.iter().map(|c| c.reduction_key()).collect();
        let mut idx: Vec<usize> = (0..self.components.len()).collect();
        idx.sort_by(|&i, &j| keys[j].total_cmp(&keys[i]).then(i.cmp(&j)));
        idx
    }

    /// Keep the `gmr` heaviest components (ties broken by lowest original
    /// index), renormalize, and return the subtracted normalizer.
    pub fn curtail(&mut self, gmr: usize) -> Result<f64, EngineError> {
        assert!(gmr >= 1, "component budget must be at least 1");
        if self.components.len() > gmr {
            let mut keep = self.ranked_indices();
            keep.truncate(gmr);
            keep.sort_unstable();
            self.components = keep.iter().map(|&i| self.components[i]).collect();
        }
        self.normalize()
    }

    /// Collapse the mixture into one Gaussian with the same total mass, mean,
    /// and covariance. Requires every component to be full rank.
    pub fn moment_match(&self) -> Result<GaussianComponent, EngineError> {
        if self.components.is_empty() {
            return Err(EngineError::EmptyMixture);
        }
        let mut masses = Vec::with_capacity(self.components.len());
        let mut means = Vec::with_capacity(self.components.len());
        let mut covs = Vec::with_capacity(self.components.len());
        for c in &self.components {
            let (mass, mean) = c
                .integrate_parts()
                .map_err(|_| EngineError::MomentMatchUndefined)?;
            masses.push(mass);
            means.push(mean);
            covs.push(
                c.precision
                    .inverse()
                    .ok_or(EngineError::MomentMatchUndefined)?,
            );
        }
        let total = log_sum_exp(&masses);
        if total == f64::NEG_INFINITY {
            return Err(EngineError::AllWeightsNegInf);
        }
        let weights: Vec<f64> = masses.iter().map(|&m| (m - total).exp()).collect();

        let mut mean = Complex2::zero();
        for (w, m) in weights.iter().zip(&means) {
            mean = mean + m.scale(*w);
        }
        let mut cov = CMatrix2::zero();
        for ((w, m), sigma) in weights.iter().zip(&means).zip(&covs) {
            let d = *m - mean;
            let outer = CMatrix2 {
                a: d.0 * d.0.conj(),
                b: d.0 * d.1.conj(),
                c: d.1 * d.0.conj(),
                d: d.1 * d.1.conj(),
            };
            cov = cov + (*sigma + outer).scale(*w);
        }
        let cov = cov.hermitize();
        let precision = cov
            .inverse()
            .ok_or(EngineError::MomentMatchUndefined)?
            .hermitize();
        let info = precision.mul_vec(&mean);
        // Coefficient chosen so the matched component carries the mixture's
        // total mass.
        let quad = info.dot(&mean).re;
        let det = precision.det().re;
        if !(det > 0.0) {
            return Err(EngineError::MomentMatchUndefined);
        }
        let logw = total - 0.5 * quad + det.ln() - C_DIM;
        Ok(GaussianComponent {
            precision,
            info,
            logw,
        })
    }

    /// Keep the `gmr - 1` heaviest components verbatim and moment-match the
    /// remainder into one component carrying the remainder's mass. If the
    /// remainder contains a rank-deficient component the remainder is
    /// curtailed to one instead. Renormalizes; returns the normalizer.
    pub fn hybrid_reduce(&mut self, gmr: usize) -> Result<f64, EngineError> {
        assert!(gmr >= 2, "hybrid reduction needs a budget of at least 2");
        if self.components.len() <= gmr {
            return self.normalize();
        }
        let order = self.ranked_indices();
        let (head, tail) = order.split_at(gmr - 1);
        let tail_comps: Vec<GaussianComponent> =
            tail.iter().map(|&i| self.components[i]).collect();
        let tail_mix = Mixture::new(tail_comps);
        let matched = match tail_mix.moment_match() {
            Ok(c) => c,
            Err(EngineError::MomentMatchUndefined) => tail_mix.components[0],
            Err(e) => return Err(e),
        };
        let mut head_sorted: Vec<usize> = head.to_vec();
        head_sorted.sort_unstable();
        let mut kept: Vec<GaussianComponent> =
            head_sorted.iter().map(|&i| self.components[i]).collect();
        kept.push(matched);
        self.components = kept;
        self.normalize()
    }

    /// Apply the configured reduction after one 4-way branching step. The
    /// Gaussian approximation needs means and covariances, so when the pool
    /// still contains rank-deficient components it falls back to curtailment
    /// for that step only.
    pub fn reduce(&mut self, method: ReductionMethod, gmr: usize) -> Result<f64, EngineError> {
        match method {
            ReductionMethod::Curtailment => self.curtail(gmr),
            ReductionMethod::GaussianApprox => {
                if self.components.iter().all(|c| c.is_full_rank()) {
                    let matched = self.moment_match()?;
                    self.components = vec![matched];
                    self.normalize()
                } else {
                    self.curtail(gmr)
                }
            }
            ReductionMethod::Hybrid => {
                if self.components.len() <= gmr {
                    self.normalize()
                } else {
                    self.hybrid_reduce(gmr)
                }
            }
        }
    }
}
