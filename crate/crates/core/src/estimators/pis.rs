use serde::Serialize;

use super::{check_samples, Diagnostics, Stopwatch};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::model::{gsc_statistic_in_place, ChannelConfig, EstimateResult, Method};
use crate::rng::RngStream;
use crate::samplers::{
    compute_m_ell_with, PisBlockSampler, RejectionStats, DEFAULT_PDF_BOUND_CONSTANT,
};
use crate::specfun::{ncx2_log_cdf, Ncx2Params};

/// Consecutive branches conditioned jointly on their sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartitionBlock {
    pub start: usize,
    pub size: usize,
    /// `(Σ_{i in block} μ_i²)^{1/2}`.
    pub delta: f64,
}

/// `M = q·m + r` split into `q` blocks of `m` and one of `r`.
///
/// If `H ≤ γ_th` then every block of at most `m` branches sums to at most
/// `γ_th`, so the product of block probabilities `ℓ₂` dominates `P`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionPlan {
    pub blocks: Vec<PartitionBlock>,
    pub ell2: f64,
    pub ln_ell2: f64,
}

impl PartitionPlan {
    pub fn new(config: &ChannelConfig) -> Result<Self> {
        let (total, m) = (config.antennas(), config.selected());
        let mut blocks = Vec::new();
        let mut start = 0;
        while start < total {
            let size = m.min(total - start);
            let mus = &config.mu()[start..start + size];
            if mus.iter().any(|&v| v != mus[0]) {
                return Err(Error::UnequalBlockMeans { start });
            }
            let delta = mus.iter().map(|v| v * v).sum::<f64>().sqrt();
            blocks.push(PartitionBlock { start, size, delta });
            start += size;
        }
        let two_gamma = 2.0 * config.gamma_th();
        let mut ln_ell2 = 0.0;
        for b in &blocks {
            let law = Ncx2Params::new(2 * b.size as u32, 2.0 * b.delta * b.delta)?;
            ln_ell2 += ncx2_log_cdf(two_gamma, &law);
        }
        Ok(Self {
            blocks,
            ell2: ln_ell2.exp(),
            ln_ell2,
        })
    }
}

/// Partition importance sampling with the default rejection constant.
pub fn estimate_pis(
    config: &ChannelConfig,
    samples: u64,
    rng: &RngStream,
    exec: &Executor,
) -> Result<EstimateResult> {
    estimate_pis_with(config, samples, rng, exec, DEFAULT_PDF_BOUND_CONSTANT)
}

/// Partition importance sampling; `pdf_bound_constant` scales the
/// near-mode density bound inside `M_ℓ`.
pub fn estimate_pis_with(
    config: &ChannelConfig,
    samples: u64,
    rng: &RngStream,
    exec: &Executor,
    pdf_bound_constant: f64,
) -> Result<EstimateResult> {
    check_samples(samples)?;
    let plan = PartitionPlan::new(config)?;
    let gamma = config.gamma_th();
    let bounds = plan
        .blocks
        .iter()
        .map(|b| {
            let mu = config.mu()[b.start];
            compute_m_ell_with(mu, b.size, gamma, pdf_bound_constant)
        })
        .collect::<Result<Vec<_>>>()?;
    let m = config.selected();

    let clock = Stopwatch::start();
    let parts = exec.map_chunks(samples, |c, len| -> Result<(u64, RejectionStats, u64)> {
        let mut r = rng.fork(c);
        let mut samplers = bounds
            .iter()
            .map(|b| PisBlockSampler::with_bound(*b, gamma))
            .collect::<Result<Vec<_>>>()?;
        let mut x = vec![0.0; config.antennas()];
        let mut hits = 0u64;
        for _ in 0..len {
            for (block, sampler) in plan.blocks.iter().zip(samplers.iter_mut()) {
                sampler.sample_into(&mut r, &mut x[block.start..block.start + block.size])?;
            }
            if gsc_statistic_in_place(&mut x, m) <= gamma {
                hits += 1;
            }
        }
        let mut stats = RejectionStats::default();
        let mut work = 0u64;
        for (block, s) in plan.blocks.iter().zip(&samplers) {
            stats.merge(s.stats());
            work += s.stats().proposals * block.size as u64;
        }
        Ok((hits, stats, work))
    });
    let wall = clock.seconds();

    let mut hits = 0u64;
    let mut rejection = RejectionStats::default();
    let mut work = 0u64;
    for part in parts {
        let (h, s, w) = part?;
        hits += h;
        rejection.merge(&s);
        work += w;
    }
    let hit_rate = hits as f64 / samples as f64;
    let p = plan.ell2 * hit_rate;
    let var = (plan.ell2 * p - p * p).max(0.0);
    Ok(EstimateResult {
        method: Method::Pis,
        p_hat: p,
        var_hat: var,
        samples,
        wall_time_s: wall,
        seed: rng.seed(),
        work_units: work,
        warnings: Vec::new(),
        diagnostics: Diagnostics::Pis {
            ell2: plan.ell2,
            hit_rate,
            plan,
            bounds,
            rejection,
        },
    })
}
