use super::{check_samples, Diagnostics, Stopwatch};
use crate::error::Result;
use crate::exec::{Executor, Moments};
use crate::model::{gsc_statistic_in_place, ChannelConfig, EstimateResult, Method};
use crate::rng::RngStream;
use crate::samplers::exponential;
use crate::specfun::ln_i0;

/// `ln` of the nominal-to-proposal density ratio for i.i.d. `Exp(M/γ)`
/// proposals:
/// `M ln γ − M ln M − ‖μ‖² + ((M−γ)/γ) Σx + Σ ln I₀(2μ_i √x_i)`.
pub(crate) fn et_log_likelihood_ratio(config: &ChannelConfig, x: &[f64]) -> f64 {
    let big_m = config.antennas() as f64;
    let gamma = config.gamma_th();
    let sum: f64 = x.iter().sum();
    let bessel: f64 = x
        .iter()
        .zip(config.mu())
        .map(|(&xi, &mu)| {
            if mu > 0.0 {
                ln_i0(2.0 * mu * xi.sqrt())
            } else {
                0.0
            }
        })
        .sum();
    big_m * (gamma.ln() - big_m.ln()) - config.mu_norm_sq() + (big_m - gamma) / gamma * sum + bessel
}

/// Exponential-twisting surrogate: branches drawn i.i.d. `Exp(M/γ_th)`,
/// which is the exact twist in the central limit `μ → 0` near the origin.
pub fn estimate_et(
    config: &ChannelConfig,
    samples: u64,
    rng: &RngStream,
    exec: &Executor,
) -> Result<EstimateResult> {
    check_samples(samples)?;
    let m = config.selected();
    let gamma = config.gamma_th();
    let rate = config.antennas() as f64 / gamma;

    let clock = Stopwatch::start();
    let parts = exec.map_chunks(samples, |c, len| {
        let mut r = rng.fork(c);
        let mut x = vec![0.0; config.antennas()];
        let mut scratch = x.clone();
        let mut acc = Moments::default();
        for _ in 0..len {
            for xi in x.iter_mut() {
                *xi = exponential(rate, &mut r);
            }
            scratch.copy_from_slice(&x);
            if gsc_statistic_in_place(&mut scratch, m) <= gamma {
                acc.push(et_log_likelihood_ratio(config, &x).exp());
            }
        }
        let hits = acc.n;
        acc.push_zeros(len - hits);
        (acc, hits)
    });
    let wall = clock.seconds();

    let mut acc = Moments::default();
    let mut hits = 0u64;
    for (a, h) in &parts {
        acc.merge(a);
        hits += h;
    }
    Ok(EstimateResult {
        method: Method::Et,
        p_hat: acc.mean,
        var_hat: acc.sample_variance(),
        samples,
        wall_time_s: wall,
        seed: rng.seed(),
        work_units: samples * config.antennas() as u64,
        warnings: Vec::new(),
        diagnostics: Diagnostics::Et {
            hit_rate: hits as f64 / samples as f64,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::closed_form_outage;
    use crate::specfun::{ncx2_log_pdf, Ncx2Params};
    use approx::assert_relative_eq;

    #[test]
    fn likelihood_ratio_is_density_ratio() {
        let cfg = ChannelConfig::new(3, 2, vec![0.0, 0.5, 2.0], 0.7).unwrap();
        let rate = 3.0 / 0.7;
        let mut r = RngStream::new(1, 0);
        for _ in 0..100 {
            let x: Vec<f64> = (0..3).map(|_| exponential(rate, &mut r)).collect();
            let ln_nominal: f64 = x
                .iter()
                .zip(cfg.mu())
                .map(|(&xi, &mu)| {
                    let law = Ncx2Params::two_dof(2.0 * mu * mu).unwrap();
                    std::f64::consts::LN_2 + ncx2_log_pdf(2.0 * xi, &law)
                })
                .sum();
            let ln_proposal: f64 = x.iter().map(|&xi| rate.ln() - rate * xi).sum();
            let lhs = et_log_likelihood_ratio(&cfg, &x) + ln_proposal;
            assert_relative_eq!(lhs.exp(), ln_nominal.exp(), max_relative = 1e-10);
        }
    }

    #[test]
    fn full_sum_matches_closed_form() {
        let cfg = ChannelConfig::identical(2, 2, 0.0, 0.5).unwrap();
        let exact = closed_form_outage(&cfg).unwrap();
        let r = estimate_et(
            &cfg,
            200_000,
            &RngStream::new(2, 0),
            &Executor::sequential(),
        )
        .unwrap();
        assert!(
            (r.p_hat - exact).abs() < 3.0 * r.std_error(),
            "{} vs {exact}",
            r.p_hat
        );
    }
}
