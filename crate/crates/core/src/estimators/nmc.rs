use super::{check_samples, Diagnostics, Stopwatch};
use crate::error::Result;
use crate::exec::Executor;
use crate::model::{gsc_statistic_in_place, ChannelConfig, EstimateResult, Method};
use crate::rng::RngStream;
use crate::samplers::sample_nominal_into;

/// Crude Monte Carlo: fraction of nominal draws in outage.
pub fn estimate_nmc(
    config: &ChannelConfig,
    samples: u64,
    rng: &RngStream,
    exec: &Executor,
) -> Result<EstimateResult> {
    check_samples(samples)?;
    let m = config.selected();
    let gamma = config.gamma_th();
    let clock = Stopwatch::start();
    let hits: u64 = exec
        .map_chunks(samples, |c, len| {
            let mut r = rng.fork(c);
            let mut x = vec![0.0; config.antennas()];
            let mut hits = 0u64;
            for _ in 0..len {
                sample_nominal_into(config, &mut r, &mut x);
                if gsc_statistic_in_place(&mut x, m) <= gamma {
                    hits += 1;
                }
            }
            hits
        })
        .into_iter()
        .sum();
    let wall = clock.seconds();
    let p = hits as f64 / samples as f64;
    Ok(EstimateResult {
        method: Method::Nmc,
        p_hat: p,
        var_hat: p * (1.0 - p),
        samples,
        wall_time_s: wall,
        seed: rng.seed(),
        work_units: samples * config.antennas() as u64,
        warnings: Vec::new(),
        diagnostics: Diagnostics::Nmc { hits },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::closed_form_outage;

    #[test]
    fn huge_threshold_is_certain_outage() {
        let cfg = ChannelConfig::identical(4, 2, 0.5, 1e6).unwrap();
        let r = estimate_nmc(&cfg, 10_000, &RngStream::new(1, 0), &Executor::sequential()).unwrap();
        assert_eq!(r.p_hat, 1.0);
        assert_eq!(r.var_hat, 0.0);
    }

    #[test]
    fn matches_closed_form() {
        let cfg = ChannelConfig::identical(2, 1, 0.0, 1.0).unwrap();
        let exact = closed_form_outage(&cfg).unwrap();
        let r = estimate_nmc(
            &cfg,
            1_000_000,
            &RngStream::new(2, 0),
            &Executor::sequential(),
        )
        .unwrap();
        assert!((r.p_hat - exact).abs() < 4.0 * r.std_error());
    }

    #[test]
    fn worker_count_does_not_change_result() {
        let cfg = ChannelConfig::identical(3, 2, 0.5, 0.5).unwrap();
        let rng = RngStream::new(3, 0);
        let a = estimate_nmc(&cfg, 50_000, &rng, &Executor::sequential()).unwrap();
        let b = estimate_nmc(&cfg, 50_000, &rng, &Executor::new(3).unwrap()).unwrap();
        assert_eq!(a.p_hat.to_bits(), b.p_hat.to_bits());
    }

    #[test]
    fn zero_samples_rejected() {
        let cfg = ChannelConfig::identical(3, 2, 0.5, 0.5).unwrap();
        assert!(estimate_nmc(&cfg, 0, &RngStream::new(0, 0), &Executor::sequential()).is_err());
    }
}
