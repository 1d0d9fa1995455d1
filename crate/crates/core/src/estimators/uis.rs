use super::{check_samples, Diagnostics, Stopwatch};
use crate::error::Result;
use crate::exec::Executor;
use crate::model::{gsc_statistic_in_place, ChannelConfig, EstimateResult, Method};
use crate::rng::RngStream;
use crate::samplers::TruncatedBranch;

/// Selection sampling on `{max_i X_i ≤ γ_th}`: every branch is drawn from
/// its marginal truncated to `[0, γ_th]`, and the estimate is
/// `ℓ₁ · 1{H ≤ γ_th}` with `ℓ₁ = Π_i F_i(γ_th)`.
pub fn estimate_uis(
    config: &ChannelConfig,
    samples: u64,
    rng: &RngStream,
    exec: &Executor,
) -> Result<EstimateResult> {
    check_samples(samples)?;
    let branches = config
        .mu()
        .iter()
        .map(|&mu| TruncatedBranch::new(mu, config.gamma_th()))
        .collect::<Result<Vec<_>>>()?;
    let ln_ell1: f64 = branches.iter().map(|b| b.ln_mass()).sum();
    let ell1 = ln_ell1.exp();
    let m = config.selected();
    let gamma = config.gamma_th();

    let clock = Stopwatch::start();
    let hits: u64 = exec
        .map_chunks(samples, |c, len| {
            let mut r = rng.fork(c);
            let mut x = vec![0.0; branches.len()];
            let mut hits = 0u64;
            for _ in 0..len {
                for (xi, b) in x.iter_mut().zip(&branches) {
                    *xi = b.sample(&mut r);
                }
                if gsc_statistic_in_place(&mut x, m) <= gamma {
                    hits += 1;
                }
            }
            hits
        })
        .into_iter()
        .sum();
    let wall = clock.seconds();

    let hit_rate = hits as f64 / samples as f64;
    let p = ell1 * hit_rate;
    Ok(EstimateResult {
        method: Method::Uis,
        p_hat: p,
        var_hat: (ell1 * p - p * p).max(0.0),
        samples,
        wall_time_s: wall,
        seed: rng.seed(),
        work_units: samples * config.antennas() as u64,
        warnings: Vec::new(),
        diagnostics: Diagnostics::Uis { ell1, hit_rate },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::estimate_nmc;
    use crate::model::closed_form_outage;

    #[test]
    fn single_selected_branch_is_exact() {
        let cfg = ChannelConfig::new(3, 1, vec![0.2, 0.5, 1.0], 0.8).unwrap();
        let r = estimate_uis(&cfg, 1000, &RngStream::new(1, 0), &Executor::sequential()).unwrap();
        let exact = closed_form_outage(&cfg).unwrap();
        assert!((r.p_hat / exact - 1.0).abs() < 1e-12);
        assert!(r.var_hat <= 1e-12 * exact * exact);
    }

    #[test]
    fn agrees_with_crude_monte_carlo() {
        let cfg = ChannelConfig::identical(3, 2, 0.0, 0.5).unwrap();
        let ex = Executor::sequential();
        let uis = estimate_uis(&cfg, 200_000, &RngStream::new(2, 0), &ex).unwrap();
        let nmc = estimate_nmc(&cfg, 2_000_000, &RngStream::new(3, 0), &ex).unwrap();
        let se = (uis.std_error().powi(2) + nmc.std_error().powi(2)).sqrt();
        assert!(
            (uis.p_hat - nmc.p_hat).abs() < 3.0 * se,
            "{} vs {}",
            uis.p_hat,
            nmc.p_hat
        );
    }
}
