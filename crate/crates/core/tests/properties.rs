//! Property tests: special functions against an independent Poisson-mixture
//! oracle, combiner invariants, sampler supports, rejection-bound validity
//! and worker-count independence.

use gscsim::exec::Executor;
use gscsim::model::{gsc_statistic, ChannelConfig};
use gscsim::rng::RngStream;
use gscsim::samplers::{compute_m_ell, sample_pis_block, sample_uniform_simplex, TruncatedBranch};
use gscsim::specfun::{
    marcum_q, ncx2_cdf, ncx2_log_cdf, ncx2_log_pdf, ncx2_pdf, ncx2_quantile, ncx2_sf, Ncx2Params,
};
use proptest::prelude::*;
use rand::RngCore;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// `Σ_k Pois(k; λ/2) · P(χ²_{ν+2k} ≤ x)` summed far into the tail.
fn mixture_cdf(x: f64, dof: u32, lambda: f64) -> f64 {
    let h = lambda / 2.0;
    let mut total = 0.0;
    let mut ln_w = -h;
    for k in 0..2000u32 {
        if k > 0 {
            ln_w += h.ln() - (k as f64).ln();
        }
        let chi = ChiSquared::new(dof as f64 + 2.0 * k as f64).unwrap();
        total += ln_w.exp() * chi.cdf(x);
        if k as f64 > h + 40.0 * (h.sqrt() + 1.0) {
            break;
        }
    }
    total
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn cdf_matches_mixture_oracle(x in 0.01f64..80.0, dof in (1u32..9).prop_map(|k| 2 * k), lambda in 0.0f64..40.0) {
        let params = Ncx2Params::new(dof, lambda).unwrap();
        let want = mixture_cdf(x, dof, lambda);
        prop_assume!(want > 1e-250);
        let got = ncx2_cdf(x, &params);
        prop_assert!((got - want).abs() <= 1e-9 * want + 1e-14, "{got} vs {want}");
    }

    #[test]
    fn cdf_and_sf_complement(x in 0.0f64..200.0, dof in (1u32..9).prop_map(|k| 2 * k), lambda in 0.0f64..100.0) {
        let params = Ncx2Params::new(dof, lambda).unwrap();
        let (c, s) = (ncx2_cdf(x, &params), ncx2_sf(x, &params));
        prop_assert!((0.0..=1.0).contains(&c) && (0.0..=1.0).contains(&s));
        prop_assert!((c + s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cdf_monotone_in_x_and_lambda(x in 0.0f64..60.0, dx in 0.0f64..5.0, dof in (1u32..9).prop_map(|k| 2 * k), lambda in 0.0f64..30.0, dl in 0.0f64..5.0) {
        let p = Ncx2Params::new(dof, lambda).unwrap();
        prop_assert!(ncx2_log_cdf(x + dx, &p) >= ncx2_log_cdf(x, &p) - 1e-12);
        let q = Ncx2Params::new(dof, lambda + dl).unwrap();
        prop_assert!(ncx2_log_cdf(x, &q) <= ncx2_log_cdf(x, &p) + 1e-12);
    }

    #[test]
    fn pdf_is_derivative_of_cdf(x in 0.5f64..40.0, dof in (1u32..9).prop_map(|k| 2 * k), lambda in 0.0f64..20.0) {
        let p = Ncx2Params::new(dof, lambda).unwrap();
        let h = 1e-4 * x;
        let fd = (ncx2_cdf(x + h, &p) - ncx2_cdf(x - h, &p)) / (2.0 * h);
        let pdf = ncx2_pdf(x, &p);
        prop_assume!(pdf > 1e-12);
        prop_assert!((fd / pdf - 1.0).abs() < 1e-5, "{fd} vs {pdf}");
        prop_assert!((ncx2_log_pdf(x, &p) - pdf.ln()).abs() < 1e-12);
    }

    #[test]
    fn quantile_inverts_cdf(u in 1e-12f64..0.999_999, dof in (1u32..9).prop_map(|k| 2 * k), lambda in 0.0f64..50.0) {
        let p = Ncx2Params::new(dof, lambda).unwrap();
        let x = ncx2_quantile(u, &p).unwrap();
        prop_assert!((ncx2_cdf(x, &p) / u - 1.0).abs() < 1e-9);
    }

    #[test]
    fn marcum_q_is_ncx2_survival(m in 1u32..6, a in 0.0f64..8.0, b in 0.0f64..10.0) {
        let p = Ncx2Params::new(2 * m, a * a).unwrap();
        let q = marcum_q(m, a, b).unwrap();
        prop_assert!((q - ncx2_sf(b * b, &p)).abs() < 1e-13);
    }

    #[test]
    fn statistic_invariants(
        mut x in prop::collection::vec(0.0f64..10.0, 1..12),
        seed in any::<u64>(),
        scale in 0.01f64..100.0,
    ) {
        let len = x.len();
        let total: f64 = x.iter().sum();
        let mut prev = 0.0;
        for m in 1..=len {
            let h = gsc_statistic(&x, m).unwrap();
            prop_assert!(h >= prev);
            prop_assert!(h <= total * (1.0 + 1e-12));
            prop_assert!(h >= m as f64 / len as f64 * total * (1.0 - 1e-12));
            let scaled: Vec<f64> = x.iter().map(|v| v * scale).collect();
            prop_assert!((gsc_statistic(&scaled, m).unwrap() - scale * h).abs() <= 1e-12 * scale * total.max(1.0));
            prev = h;
        }
        prop_assert!((gsc_statistic(&x, len).unwrap() - total).abs() <= 1e-12 * total.max(1.0));
        let want: Vec<f64> = (1..=len).map(|m| gsc_statistic(&x, m).unwrap()).collect();
        let mut rng = RngStream::new(seed, 0);
        for i in (1..len).rev() {
            x.swap(i, (rng.next_u64() % (i as u64 + 1)) as usize);
        }
        for m in 1..=len {
            prop_assert!((gsc_statistic(&x, m).unwrap() - want[m - 1]).abs() <= 1e-12 * total.max(1.0));
        }
    }

    #[test]
    fn sampler_supports(seed in any::<u64>(), mu in 0.0f64..3.0, n in 1usize..6, gamma in 0.05f64..10.0) {
        let mut rng = RngStream::new(seed, 1);
        let s = sample_uniform_simplex(n, gamma, &mut rng);
        prop_assert!(s.iter().all(|&v| v >= 0.0) && s.iter().sum::<f64>() <= gamma * (1.0 + 1e-12));
        let b = TruncatedBranch::new(mu, gamma).unwrap();
        let v = b.sample(&mut rng);
        prop_assert!((0.0..=gamma).contains(&v));
        let block = sample_pis_block(mu, n, gamma, &mut rng).unwrap();
        prop_assert!(block.len() == n && block.iter().sum::<f64>() <= gamma * (1.0 + 1e-12));
    }

    #[test]
    fn rejection_bound_dominates_density(
        seed in any::<u64>(),
        mu in 0.0f64..4.0,
        n in 1usize..6,
        gamma in 0.05f64..25.0,
    ) {
        let bound = compute_m_ell(mu, n, gamma).unwrap();
        prop_assert!(bound.value >= 1.0);
        // ln f/g for f the conditional joint density and g uniform on the simplex
        let branch = Ncx2Params::two_dof(2.0 * mu * mu).unwrap();
        let block = Ncx2Params::new(2 * n as u32, 2.0 * n as f64 * mu * mu).unwrap();
        let ln_g = (1..=n).map(|k| (k as f64).ln()).sum::<f64>() - n as f64 * gamma.ln();
        let ln_mass = ncx2_log_cdf(2.0 * gamma, &block);
        let mut rng = RngStream::new(seed, 2);
        let mode = (2.0 * mu * mu - 2.0).max(0.0) / 2.0;
        let mut points = vec![vec![(gamma / n as f64).min(mode); n], vec![gamma / n as f64; n]];
        for _ in 0..50 {
            points.push(sample_uniform_simplex(n, gamma, &mut rng));
        }
        for x in points {
            let ln_f: f64 = x.iter().map(|&v| std::f64::consts::LN_2 + ncx2_log_pdf(2.0 * v, &branch)).sum::<f64>() - ln_mass;
            prop_assert!(ln_f - ln_g <= bound.ln_value + 1e-9, "x = {x:?}: {} > {}", ln_f - ln_g, bound.ln_value);
        }
    }

    #[test]
    fn chunked_sums_ignore_worker_count(total in 1u64..100_000, seed in any::<u64>(), workers in 2usize..5) {
        let rng = RngStream::new(seed, 3);
        let f = |c: u64, len: u64| {
            let mut r = rng.fork(c);
            (0..len).map(|_| r.next_u64() >> 11).fold(0u64, u64::wrapping_add)
        };
        let a = Executor::sequential().map_chunks(total, f);
        let b = Executor::new(workers).unwrap().map_chunks(total, f);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn forks_are_reproducible(seed in any::<u64>(), stream in any::<u64>(), child in any::<u64>()) {
        let a = RngStream::new(seed, stream).fork(child).next_u64();
        let b = RngStream::new(seed, stream).fork(child).next_u64();
        prop_assert_eq!(a, b);
        let c = RngStream::new(seed, stream).fork(child.wrapping_add(1)).next_u64();
        prop_assert_ne!(a, c);
    }

    #[test]
    fn identical_config_round_trips(m_total in 1usize..10, mu in 0.0f64..5.0, gamma in 0.01f64..50.0) {
        let cfg = ChannelConfig::identical(m_total, 1, mu, gamma).unwrap();
        prop_assert_eq!(cfg.common_mu(), Some(mu));
        prop_assert!((cfg.mu_norm_sq() - m_total as f64 * mu * mu).abs() <= 1e-12 * (1.0 + cfg.mu_norm_sq()));
    }
}
