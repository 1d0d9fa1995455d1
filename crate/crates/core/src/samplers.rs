//! Random variate generation for every proposal the estimators use.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ChannelConfig;
use crate::rng::RngStream;
use crate::specfun::{
    ln_factorial, ln_i0, ncx2_log_cdf, ncx2_log_pdf, ncx2_quantile_ln, Ncx2Params,
};

/// Default constant bounding the two-dof density near its mode.
pub const DEFAULT_PDF_BOUND_CONSTANT: f64 = 1.031;

/// Branch powers drawn from the unconditioned channel.
pub fn sample_nominal(config: &ChannelConfig, rng: &mut RngStream) -> Vec<f64> {
    let mut out = vec![0.0; config.antennas()];
    sample_nominal_into(config, rng, &mut out);
    out
}

#[inline]
pub(crate) fn sample_nominal_into(config: &ChannelConfig, rng: &mut RngStream, out: &mut [f64]) {
    for (x, &mu) in out.iter_mut().zip(config.mu()) {
        *x = half_ncx2_two_dof(mu * std::f64::consts::SQRT_2, rng);
    }
}

/// `½((Z₁ + a)² + Z₂²)`, i.e. `½ χ²₂(a²)`.
#[inline]
fn half_ncx2_two_dof(a: f64, rng: &mut RngStream) -> f64 {
    let z1: f64 = StandardNormal.sample(rng);
    let z2: f64 = StandardNormal.sample(rng);
    0.5 * ((z1 + a).powi(2) + z2 * z2)
}

/// Inverse-transform sampler for `X | X ≤ γ_th`, `X ~ ½ χ²₂(2μ²)`.
#[derive(Debug, Clone)]
pub struct TruncatedBranch {
    mu: f64,
    gamma_th: f64,
    law: Ncx2Params,
    ln_k: f64,
    /// `1 − e^{−γ}`, used by the closed form when `μ = 0`.
    central_mass: f64,
}

impl TruncatedBranch {
    pub fn new(mu: f64, gamma_th: f64) -> Result<Self> {
        if !(gamma_th > 0.0) || !(mu >= 0.0) || !mu.is_finite() {
            return Err(Error::domain(
                "TruncatedBranch::new",
                format!("need mu >= 0 and gamma_th > 0 (mu = {mu}, gamma_th = {gamma_th})"),
            ));
        }
        let law = Ncx2Params::two_dof(2.0 * mu * mu)?;
        let ln_k = ncx2_log_cdf(2.0 * gamma_th, &law);
        // Below the normal range the quantile cannot resolve the interval.
        if !ln_k.is_finite() || gamma_th < f64::MIN_POSITIVE {
            return Err(Error::ThresholdTooExtreme { mu, gamma_th });
        }
        Ok(Self {
            mu,
            gamma_th,
            law,
            ln_k,
            central_mass: -(-gamma_th).exp_m1(),
        })
    }

    /// `ln K = ln F_{χ²₂(2μ²)}(2γ_th)`.
    pub fn ln_mass(&self) -> f64 {
        self.ln_k
    }

    #[inline]
    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        let u = rng.open_unit();
        if self.mu == 0.0 {
            return -(-u * self.central_mass).ln_1p();
        }
        let x = 0.5 * ncx2_quantile_ln(self.ln_k + u.ln(), &self.law);
        x.min(self.gamma_th)
    }
}

/// One draw of `X | X ≤ γ_th`.
pub fn sample_truncated_univariate(mu: f64, gamma_th: f64, rng: &mut RngStream) -> Result<f64> {
    Ok(TruncatedBranch::new(mu, gamma_th)?.sample(rng))
}

/// Uniform point in `{x ≥ 0, Σx ≤ γ_th}` via `n + 1` exponential spacings.
pub fn sample_uniform_simplex(n: usize, gamma_th: f64, rng: &mut RngStream) -> Vec<f64> {
    let mut out = vec![0.0; n];
    sample_uniform_simplex_into(gamma_th, rng, &mut out);
    out
}

#[inline]
fn sample_uniform_simplex_into(gamma_th: f64, rng: &mut RngStream, out: &mut [f64]) {
    let mut total = -rng.open_unit().ln();
    for x in out.iter_mut() {
        *x = -rng.open_unit().ln();
        total += *x;
    }
    let scale = gamma_th / total;
    out.iter_mut().for_each(|x| *x *= scale);
}

/// Which bound on the marginal density applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MellCase {
    /// `μ ≤ 1`: density decreasing, maximal at 0.
    SmallMean,
    /// Mode beyond the truncation point: maximal at `γ_th`.
    LargeMeanSmallGamma,
    /// Mode inside `[0, γ_th]`: bounded via a point near the mode.
    LargeMeanLargeGamma,
}

/// Rejection constant for the uniform-simplex proposal of one PIS block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MellBound {
    pub value: f64,
    pub ln_value: f64,
    pub case: MellCase,
    pub block_mu: f64,
    pub block_size: usize,
    /// `ln sup p` over `[0, γ_th]` as bounded, `p` the x-scale marginal density.
    #[serde(skip)]
    ln_density_bound: f64,
}

/// [`compute_m_ell_with`] at the default constant.
pub fn compute_m_ell(mu: f64, n: usize, gamma_th: f64) -> Result<MellBound> {
    compute_m_ell_with(mu, n, gamma_th, DEFAULT_PDF_BOUND_CONSTANT)
}

/// `M_ℓ = γⁿ (sup p)ⁿ / (n! F_{χ²_{2n}(2nμ²)}(2γ))` with the supremum of the
/// marginal `p(x) = e^{−μ²−x} I₀(2μ√x)` bounded per case. `c` multiplies the
/// near-mode density in the last case.
pub fn compute_m_ell_with(mu: f64, n: usize, gamma_th: f64, c: f64) -> Result<MellBound> {
    if n == 0 || !(gamma_th > 0.0) || !(mu >= 0.0) || !mu.is_finite() || !(c > 0.0) {
        return Err(Error::domain(
            "compute_m_ell",
            format!(
                "need n >= 1, gamma_th > 0, mu >= 0 (mu = {mu}, n = {n}, gamma_th = {gamma_th})"
            ),
        ));
    }
    let lambda = 2.0 * mu * mu;
    let two_dof = Ncx2Params::two_dof(lambda)?;
    let (case, ln_density_bound) = if mu <= 1.0 {
        (MellCase::SmallMean, -mu * mu)
    } else if 2.0 * gamma_th <= lambda - 2.0 {
        (
            MellCase::LargeMeanSmallGamma,
            std::f64::consts::LN_2 + ncx2_log_pdf(2.0 * gamma_th, &two_dof),
        )
    } else {
        let a = lambda - 2.0 + 3.0 / (2.0 * lambda);
        (
            MellCase::LargeMeanLargeGamma,
            std::f64::consts::LN_2 + c.ln() + ncx2_log_pdf(a, &two_dof),
        )
    };
    let block = Ncx2Params::new(2 * n as u32, lambda * n as f64)?;
    let nf = n as f64;
    let ln_value = nf * (gamma_th.ln() + ln_density_bound)
        - ln_factorial(n as u64)
        - ncx2_log_cdf(2.0 * gamma_th, &block);
    if !(ln_value >= 0.0) {
        return Err(Error::InvalidBound(ln_value.exp()));
    }
    Ok(MellBound {
        value: ln_value.exp(),
        ln_value,
        case,
        block_mu: mu,
        block_size: n,
        ln_density_bound,
    })
}

/// Proposal and acceptance counts of a PIS block sampler.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct RejectionStats {
    pub proposals: u64,
    pub accepted: u64,
    /// Largest `ln f/(M_ℓ g)` observed (≤ 0 when the bound holds).
    pub max_log_ratio: f64,
}

impl RejectionStats {
    pub fn merge(&mut self, other: &RejectionStats) {
        if self.proposals == 0 {
            self.max_log_ratio = other.max_log_ratio;
        } else if other.proposals > 0 {
            self.max_log_ratio = self.max_log_ratio.max(other.max_log_ratio);
        }
        self.proposals += other.proposals;
        self.accepted += other.accepted;
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }
}

/// Acceptance-rejection sampler for `n` i.i.d. branches conditioned on
/// their sum not exceeding `γ_th`.
///
/// Proposals are drawn in batches of `⌈M_ℓ⌉`, the expected number needed
/// per acceptance.
#[derive(Debug, Clone)]
pub struct PisBlockSampler {
    bound: MellBound,
    gamma_th: f64,
    batch: Vec<f64>,
    next: usize,
    stats: RejectionStats,
}

impl PisBlockSampler {
    pub fn new(mu: f64, n: usize, gamma_th: f64) -> Result<Self> {
        Self::with_bound(compute_m_ell(mu, n, gamma_th)?, gamma_th)
    }

    pub fn with_bound(bound: MellBound, gamma_th: f64) -> Result<Self> {
        if bound.value < 1.0 {
            return Err(Error::InvalidBound(bound.value));
        }
        Ok(Self {
            bound,
            gamma_th,
            batch: Vec::new(),
            next: 0,
            stats: RejectionStats {
                max_log_ratio: f64::NEG_INFINITY,
                ..RejectionStats::default()
            },
        })
    }

    pub fn bound(&self) -> &MellBound {
        &self.bound
    }

    pub fn stats(&self) -> &RejectionStats {
        &self.stats
    }

    fn refill(&mut self, rng: &mut RngStream) {
        let n = self.bound.block_size;
        let count = self.bound.value.ceil().min(1e6) as usize;
        self.batch.resize(count * n, 0.0);
        for chunk in self.batch.chunks_exact_mut(n) {
            sample_uniform_simplex_into(self.gamma_th, rng, chunk);
        }
        self.next = 0;
    }

    /// Writes one accepted block into `out` and returns the number of trials.
    pub fn sample_into(&mut self, rng: &mut RngStream, out: &mut [f64]) -> Result<u64> {
        let n = self.bound.block_size;
        debug_assert_eq!(out.len(), n);
        let mu = self.bound.block_mu;
        let two_mu = 2.0 * mu;
        let limit = (1e4 * self.bound.value).max(1e4) as u64;
        let mut trials = 0u64;
        loop {
            if self.next * n >= self.batch.len() {
                self.refill(rng);
            }
            let x = &self.batch[self.next * n..(self.next + 1) * n];
            self.next += 1;
            trials += 1;
            // ln f/(M_ℓ g) = Σ_i [ln p(x_i) − ln sup p]
            let mut log_ratio = 0.0;
            for &xi in x {
                let ln_p = -mu * mu - xi
                    + if mu > 0.0 {
                        ln_i0(two_mu * xi.sqrt())
                    } else {
                        0.0
                    };
                log_ratio += ln_p - self.bound.ln_density_bound;
            }
            self.stats.proposals += 1;
            self.stats.max_log_ratio = self.stats.max_log_ratio.max(log_ratio);
            if log_ratio > 1e-9 {
                return Err(Error::BoundViolation {
                    log_ratio,
                    mu,
                    n,
                    gamma_th: self.gamma_th,
                });
            }
            if rng.open_unit().ln() <= log_ratio {
                out.copy_from_slice(x);
                self.stats.accepted += 1;
                return Ok(trials);
            }
            if trials >= limit {
                return Err(Error::RejectionStalled {
                    trials,
                    m_ell: self.bound.value,
                });
            }
        }
    }
}

/// One block from the conditional joint density of `n` branches given
/// `Σx ≤ γ_th`.
pub fn sample_pis_block(mu: f64, n: usize, gamma_th: f64, rng: &mut RngStream) -> Result<Vec<f64>> {
    let mut sampler = PisBlockSampler::new(mu, n, gamma_th)?;
    let mut out = vec![0.0; n];
    sampler.sample_into(rng, &mut out)?;
    Ok(out)
}

/// `n` i.i.d. `Exp(rate)` variates by inverse transform.
pub fn sample_exponential(rate: f64, n: usize, rng: &mut RngStream) -> Vec<f64> {
    (0..n).map(|_| exponential(rate, rng)).collect()
}

#[inline]
pub(crate) fn exponential(rate: f64, rng: &mut RngStream) -> f64 {
    -rng.open_unit().ln() / rate
}

/// `n` i.i.d. draws of `v1 · χ²₂(v2)`.
pub fn sample_scaled_ncx2(v1: f64, v2: f64, n: usize, rng: &mut RngStream) -> Vec<f64> {
    (0..n).map(|_| scaled_ncx2(v1, v2.sqrt(), rng)).collect()
}

#[inline]
pub(crate) fn scaled_ncx2(v1: f64, sqrt_v2: f64, rng: &mut RngStream) -> f64 {
    2.0 * v1 * half_ncx2_two_dof(sqrt_v2, rng)
}

/// `Gamma(shape, 1)` variate; any `shape > 0`.
pub fn gamma_increment(shape: f64, rng: &mut RngStream) -> Result<f64> {
    let g = Gamma::new(shape, 1.0)
        .map_err(|e| Error::domain("gamma_increment", format!("shape = {shape}: {e}")))?;
    Ok(g.sample(rng))
}

/// Uniform index in `0..n`.
#[inline]
pub(crate) fn uniform_index(n: usize, rng: &mut RngStream) -> usize {
    rng.random_range(0..n)
}
