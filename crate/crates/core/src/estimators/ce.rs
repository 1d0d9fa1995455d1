use serde::Serialize;

use super::{check_samples, Diagnostics, Stopwatch};
use crate::error::{Error, Result};
use crate::exec::{Executor, Moments};
use crate::model::{gsc_statistic_in_place, ChannelConfig, EstimateResult, Method};
use crate::rng::RngStream;
use crate::samplers::scaled_ncx2;
use crate::specfun::{bessel_i1_i0_ratio, ln_i0};

const V1_RANGE: (f64, f64) = (1e-12, 1e12);
const V2_MAX: f64 = 1e12;

/// Parameters `(v1, v2)` of the i.i.d. `v1·χ²₂(v2)` sampling family at one
/// iteration, with the elite threshold that produced them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CeParams {
    pub v1: f64,
    pub v2: f64,
    pub iteration: usize,
    pub gamma_t: f64,
}

impl CeParams {
    /// The channel's own law, `v = (½, 2μ²)`.
    pub fn nominal(mu: f64) -> Self {
        Self {
            v1: 0.5,
            v2: 2.0 * mu * mu,
            iteration: 0,
            gamma_t: f64::INFINITY,
        }
    }

    /// `ln` of the family density at `x`.
    #[inline]
    pub fn ln_density(&self, x: f64) -> f64 {
        let arg = (self.v2 * x / self.v1).sqrt();
        -(2.0 * self.v1).ln() - 0.5 * (x / self.v1 + self.v2) + ln_i0(arg)
    }
}

/// Adaptive-stage settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CeOptions {
    /// Samples per adaptive iteration (`S₀`).
    pub pilot_samples: u64,
    /// Elite fraction (`ρ`).
    pub rho: f64,
    pub max_iterations: usize,
}

impl Default for CeOptions {
    fn default() -> Self {
        Self {
            pilot_samples: 100_000,
            rho: 0.1,
            max_iterations: 50,
        }
    }
}

/// Weighted maximum-likelihood fit of `v1·χ²₂(v2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CeFit {
    pub v1: f64,
    pub v2: f64,
    /// Mean weighted log-likelihood at `(v1, v2)`.
    pub objective: f64,
    /// All weighted coordinates were zero; `(v1, v2)` is a placeholder.
    pub degenerate: bool,
}

/// Weighted data in the Rice parametrization: `r = √x` is Rice with
/// location `ν = √(v1 v2)` and per-component variance `s = v1`.
struct RiceData {
    r: Vec<f64>,
    x: Vec<f64>,
    w: Vec<f64>,
    total_w: f64,
    mean_x: f64,
}

impl RiceData {
    fn new(pairs: impl Iterator<Item = (f64, f64)>) -> Result<Self> {
        let (mut r, mut x, mut w) = (Vec::new(), Vec::new(), Vec::new());
        let (mut total_w, mut sum_wx) = (0.0, 0.0);
        for (xi, wi) in pairs {
            if !(xi >= 0.0 && xi.is_finite()) || !(wi >= 0.0 && wi.is_finite()) {
                return Err(Error::domain(
                    "fit_scaled_ncx2",
                    format!("samples must be finite and >= 0 with finite weights >= 0 (x = {xi}, w = {wi})"),
                ));
            }
            if wi > 0.0 {
                r.push(xi.sqrt());
                x.push(xi);
                w.push(wi);
                total_w += wi;
                sum_wx += wi * xi;
            }
        }
        if total_w == 0.0 {
            return Err(Error::domain("fit_scaled_ncx2", "no positive weight"));
        }
        Ok(Self {
            r,
            x,
            w,
            total_w,
            mean_x: sum_wx / total_w,
        })
    }

    /// Mean weighted log-likelihood (without the constant `−ln 2`).
    fn objective(&self, nu: f64, s: f64) -> f64 {
        let mut acc = 0.0;
        for ((&r, &x), &w) in self.r.iter().zip(&self.x).zip(&self.w) {
            acc += w * (-(x + nu * nu) / (2.0 * s) + ln_i0(nu * r / s));
        }
        acc / self.total_w - s.ln()
    }

    /// Objective, gradient and Hessian in `(ν, s)`.
    fn derivatives(&self, nu: f64, s: f64) -> (f64, [f64; 2], [f64; 3]) {
        let (mut j, mut g_nu, mut g_s, mut h_nn, mut h_ns, mut h_ss) =
            (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let (s2, s3) = (s * s, s * s * s);
        for ((&r, &x), &w) in self.r.iter().zip(&self.x).zip(&self.w) {
            let z = nu * r / s;
            let a = bessel_i1_i0_ratio(z);
            let da = if z < 1e-8 { 0.5 } else { 1.0 - a / z - a * a };
            j += w * (-(x + nu * nu) / (2.0 * s) + ln_i0(z));
            g_nu += w * (-nu / s + a * r / s);
            g_s += w * ((x + nu * nu) / (2.0 * s2) - a * nu * r / s2);
            h_nn += w * (-1.0 / s + da * r * r / s2);
            h_ns += w * (nu / s2 - a * r / s2 - da * r * z / s2);
            h_ss += w * (-(x + nu * nu) / s3 + 2.0 * a * nu * r / s3 + da * nu * r * z / s3);
        }
        let tw = self.total_w;
        (
            j / tw - s.ln(),
            [g_nu / tw, g_s / tw - 1.0 / s],
            [h_nn / tw, h_ns / tw, h_ss / tw + 1.0 / s2],
        )
    }

    /// One EM step for the Rice law; never decreases the objective.
    fn em_step(&self, nu: f64, s: f64) -> (f64, f64) {
        let mut acc = 0.0;
        for (&r, &w) in self.r.iter().zip(&self.w) {
            acc += w * r * bessel_i1_i0_ratio(nu * r / s);
        }
        let nu_new = acc / self.total_w;
        let s_new = (0.5 * (self.mean_x - nu_new * nu_new)).max(f64::MIN_POSITIVE);
        (nu_new, s_new)
    }

    /// Method-of-moments start: `E x = 2s + ν²`, `Var x = 4s² + 4sν²`.
    fn moment_start(&self) -> (f64, f64) {
        let m1 = self.mean_x;
        let mut var = 0.0;
        for (&x, &w) in self.x.iter().zip(&self.w) {
            var += w * (x - m1).powi(2);
        }
        var /= self.total_w;
        let disc = m1 * m1 - var;
        let s = if disc > 0.0 {
            0.5 * (m1 - disc.sqrt())
        } else {
            0.5 * m1
        };
        let nu = (m1 - 2.0 * s).max(0.0).sqrt();
        (nu, s.max(f64::MIN_POSITIVE))
    }
}

/// Weighted MLE of `(v1, v2)` from coordinates `xs` with weights `weights`.
///
/// Newton steps on `(ν, s)` with backtracking, falling back to an EM step
/// whenever the Hessian is not negative definite or the step fails to
/// ascend. The result never has a lower objective than `start`.
/// `central_only` pins `v2 = 0`, where the MLE is `v1 = x̄/2`.
pub fn fit_scaled_ncx2(
    xs: &[f64],
    weights: &[f64],
    start: (f64, f64),
    central_only: bool,
) -> Result<CeFit> {
    if xs.len() != weights.len() {
        return Err(Error::domain(
            "fit_scaled_ncx2",
            "samples and weights differ in length",
        ));
    }
    let data = RiceData::new(xs.iter().copied().zip(weights.iter().copied()))?;
    fit(&data, start, central_only)
}

fn fit(data: &RiceData, start: (f64, f64), central_only: bool) -> Result<CeFit> {
    if data.mean_x <= 0.0 {
        return Ok(CeFit {
            v1: V1_RANGE.0,
            v2: 0.0,
            objective: f64::NEG_INFINITY,
            degenerate: true,
        });
    }
    if central_only {
        let s = 0.5 * data.mean_x;
        return Ok(finish(data, 0.0, s));
    }

    // Best of the caller's point and the moment estimate.
    let (v1, v2) = start;
    let (mut nu, mut s) = data.moment_start();
    let mut j = data.objective(nu, s);
    if v1 > 0.0 && v2 >= 0.0 && v1.is_finite() && v2.is_finite() {
        let (nu0, s0) = ((v1 * v2).sqrt(), v1);
        let j0 = data.objective(nu0, s0);
        if j0 > j {
            (nu, s, j) = (nu0, s0, j0);
        }
    }
    // ν = 0 is a fixed point of EM; nudge off it.
    if nu == 0.0 {
        let nudged = (1e-3 * data.mean_x.sqrt(), s);
        let jn = data.objective(nudged.0, nudged.1);
        if jn >= j {
            (nu, s, j) = (nudged.0, nudged.1, jn);
        }
    }

    for _ in 0..500 {
        let (_, g, [h_nn, h_ns, h_ss]) = data.derivatives(nu, s);
        let det = h_nn * h_ss - h_ns * h_ns;
        let mut next = None;
        if h_nn < 0.0 && det > 0.0 {
            let d_nu = -(h_ss * g[0] - h_ns * g[1]) / det;
            let d_s = -(-h_ns * g[0] + h_nn * g[1]) / det;
            let mut t = 1.0;
            for _ in 0..40 {
                let (cn, cs) = (nu + t * d_nu, s + t * d_s);
                if cn >= 0.0 && cs > 0.0 {
                    let jc = data.objective(cn, cs);
                    if jc >= j {
                        next = Some((cn, cs, jc));
                        break;
                    }
                }
                t *= 0.5;
            }
        }
        let (cn, cs, jc) = match next {
            Some(v) => v,
            None => {
                let (en, es) = data.em_step(nu, s);
                let je = data.objective(en, es);
                if je < j {
                    break;
                }
                (en, es, je)
            }
        };
        let moved = (cn - nu).abs() <= 1e-12 * (1.0 + nu) && (cs - s).abs() <= 1e-12 * s;
        let gained = jc - j;
        (nu, s, j) = (cn, cs, jc);
        if moved || gained <= 1e-14 * (1.0 + j.abs()) {
            break;
        }
    }
    Ok(finish(data, nu, s))
}

fn finish(data: &RiceData, nu: f64, s: f64) -> CeFit {
    let v1 = s.clamp(V1_RANGE.0, V1_RANGE.1);
    let v2 = (nu * nu / s).clamp(0.0, V2_MAX);
    let nu_c = (v1 * v2).sqrt();
    CeFit {
        v1,
        v2,
        objective: data.objective(nu_c, v1) - std::f64::consts::LN_2,
        degenerate: false,
    }
}

/// Cross-entropy parameter update: fits the family to all coordinates of
/// the weighted sample vectors. `samples` holds `weights.len()` vectors of
/// length `dim`, row-major.
pub fn ce_update(
    samples: &[f64],
    dim: usize,
    weights: &[f64],
    current: &CeParams,
) -> Result<CeFit> {
    if dim == 0 || samples.len() != dim * weights.len() {
        return Err(Error::domain(
            "ce_update",
            "sample block does not match weights",
        ));
    }
    let pairs = samples
        .chunks_exact(dim)
        .zip(weights)
        .flat_map(|(row, &w)| row.iter().map(move |&x| (x, w)));
    let data = RiceData::new(pairs)?;
    fit(&data, (current.v1, current.v2), false)
}

/// One batch of vectors drawn from the family.
struct Batch {
    x: Vec<f64>,
    h: Vec<f64>,
    ln_lr: Vec<f64>,
}

fn draw_batch(
    config: &ChannelConfig,
    nominal: &CeParams,
    v: &CeParams,
    n: u64,
    rng: &RngStream,
    exec: &Executor,
) -> Batch {
    let dim = config.antennas();
    let m = config.selected();
    let sqrt_v2 = v.v2.sqrt();
    let parts = exec.map_chunks(n, |c, len| {
        let mut r = rng.fork(c);
        let mut out = Batch {
            x: Vec::with_capacity(len as usize * dim),
            h: Vec::with_capacity(len as usize),
            ln_lr: Vec::with_capacity(len as usize),
        };
        let mut scratch = vec![0.0; dim];
        for _ in 0..len {
            let mut lr = 0.0;
            for xi in scratch.iter_mut() {
                *xi = scaled_ncx2(v.v1, sqrt_v2, &mut r);
                lr += nominal.ln_density(*xi) - v.ln_density(*xi);
                out.x.push(*xi);
            }
            out.ln_lr.push(lr);
            out.h.push(gsc_statistic_in_place(&mut scratch, m));
        }
        out
    });
    let mut all = Batch {
        x: Vec::with_capacity(n as usize * dim),
        h: Vec::with_capacity(n as usize),
        ln_lr: Vec::with_capacity(n as usize),
    };
    for p in parts {
        all.x.extend(p.x);
        all.h.extend(p.h);
        all.ln_lr.extend(p.ln_lr);
    }
    all
}

/// Cross-entropy importance sampling over the i.i.d. family
/// `v1·χ²₂(v2)`, for channels with identical LOS magnitudes.
pub fn estimate_ce(
    config: &ChannelConfig,
    samples: u64,
    options: &CeOptions,
    rng: &RngStream,
    exec: &Executor,
) -> Result<EstimateResult> {
    check_samples(samples)?;
    let mu = config.common_mu().ok_or(Error::CeNonIdenticalMeans)?;
    if options.pilot_samples < 100 {
        return Err(Error::InvalidConfig(format!(
            "CE pilot sample size must be at least 100, got {}",
            options.pilot_samples
        )));
    }
    if !(options.rho > 0.0 && options.rho < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "CE rho must lie in (0, 1), got {}",
            options.rho
        )));
    }
    let gamma = config.gamma_th();
    let dim = config.antennas();
    let nominal = CeParams::nominal(mu);
    let elite_rank = ((options.rho * options.pilot_samples as f64).floor() as usize).max(1);

    let clock = Stopwatch::start();
    let mut v = nominal;
    let mut trace = vec![nominal];
    let mut warnings = Vec::new();
    let mut pilot_vectors = 0u64;
    for t in 1..=options.max_iterations {
        let batch = draw_batch(
            config,
            &nominal,
            &v,
            options.pilot_samples,
            &rng.fork(t as u64),
            exec,
        );
        pilot_vectors += options.pilot_samples;
        let mut sorted = batch.h.clone();
        sorted.select_nth_unstable_by(elite_rank - 1, f64::total_cmp);
        let mut gamma_t = sorted[elite_rank - 1];
        let last = gamma_t <= gamma;
        if last {
            if t == 1 {
                warnings
                    .push("event not rare under nominal law; CE kept nominal parameters".into());
                break;
            }
            gamma_t = gamma;
        }
        let max_lr = batch
            .h
            .iter()
            .zip(&batch.ln_lr)
            .filter(|(h, _)| **h <= gamma_t)
            .map(|(_, l)| *l)
            .fold(f64::NEG_INFINITY, f64::max);
        if max_lr == f64::NEG_INFINITY {
            return Err(Error::CeEliteEmpty(t));
        }
        let weights: Vec<f64> = batch
            .h
            .iter()
            .zip(&batch.ln_lr)
            .map(|(h, l)| {
                if *h <= gamma_t {
                    (l - max_lr).exp()
                } else {
                    0.0
                }
            })
            .collect();
        let fit = ce_update(&batch.x, dim, &weights, &v)?;
        if fit.degenerate {
            warnings.push(format!("degenerate CE update at iteration {t}"));
        }
        v = CeParams {
            v1: fit.v1,
            v2: fit.v2,
            iteration: t,
            gamma_t,
        };
        trace.push(v);
        if last {
            break;
        }
        if t == options.max_iterations {
            return Err(Error::CeNoConvergence(t));
        }
    }

    let m = config.selected();
    let sqrt_v2 = v.v2.sqrt();
    let final_rng = rng.fork(0);
    let parts = exec.map_chunks(samples, |c, len| {
        let mut r = final_rng.fork(c);
        let mut x = vec![0.0; dim];
        let mut acc = Moments::default();
        for _ in 0..len {
            let mut lr = 0.0;
            for xi in x.iter_mut() {
                *xi = scaled_ncx2(v.v1, sqrt_v2, &mut r);
                lr += nominal.ln_density(*xi) - v.ln_density(*xi);
            }
            if gsc_statistic_in_place(&mut x, m) <= gamma {
                acc.push(lr.exp());
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
        method: Method::Ce,
        p_hat: acc.mean,
        var_hat: acc.sample_variance(),
        samples,
        wall_time_s: wall,
        seed: rng.seed(),
        work_units: (samples + pilot_vectors) * dim as u64,
        warnings,
        diagnostics: Diagnostics::Ce {
            trace,
            hit_rate: hits as f64 / samples as f64,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::estimate_nmc;
    use crate::samplers::sample_scaled_ncx2;
    use approx::assert_relative_eq;

    fn data(xs: &[f64], ws: &[f64]) -> RiceData {
        RiceData::new(xs.iter().copied().zip(ws.iter().copied())).unwrap()
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut r = RngStream::new(1, 0);
        let xs = sample_scaled_ncx2(0.6, 3.0, 400, &mut r);
        let ws: Vec<f64> = (0..400).map(|i| 0.5 + (i % 7) as f64 * 0.1).collect();
        let d = data(&xs, &ws);
        for (nu, s) in [(1.2, 0.6), (0.3, 1.1), (2.5, 0.2)] {
            let (j, g, [h_nn, h_ns, h_ss]) = d.derivatives(nu, s);
            assert_relative_eq!(j, d.objective(nu, s), max_relative = 1e-13);
            let e = 1e-5;
            let fd_nu = (d.objective(nu + e, s) - d.objective(nu - e, s)) / (2.0 * e);
            let fd_s = (d.objective(nu, s + e) - d.objective(nu, s - e)) / (2.0 * e);
            assert!((g[0] - fd_nu).abs() < 1e-6, "{} vs {fd_nu}", g[0]);
            assert!((g[1] - fd_s).abs() < 1e-6, "{} vs {fd_s}", g[1]);
            let grad = |nu: f64, s: f64| d.derivatives(nu, s).1;
            let fd_nn = (grad(nu + e, s)[0] - grad(nu - e, s)[0]) / (2.0 * e);
            let fd_ns = (grad(nu, s + e)[0] - grad(nu, s - e)[0]) / (2.0 * e);
            let fd_ss = (grad(nu, s + e)[1] - grad(nu, s - e)[1]) / (2.0 * e);
            assert!((h_nn - fd_nn).abs() < 1e-5 * (1.0 + fd_nn.abs()));
            assert!((h_ns - fd_ns).abs() < 1e-5 * (1.0 + fd_ns.abs()));
            assert!((h_ss - fd_ss).abs() < 1e-5 * (1.0 + fd_ss.abs()));
        }
    }

    #[test]
    fn recovers_generating_parameters() {
        let mut r = RngStream::new(2, 0);
        for (v1, v2) in [(0.5, 0.5), (0.8, 12.0), (0.2, 3.0)] {
            let xs = sample_scaled_ncx2(v1, v2, 1_000_000, &mut r);
            let ws = vec![1.0; xs.len()];
            let fit = fit_scaled_ncx2(&xs, &ws, (1.0, 1.0), false).unwrap();
            assert!((fit.v1 / v1 - 1.0).abs() < 0.02, "v1 {} vs {v1}", fit.v1);
            assert!((fit.v2 / v2 - 1.0).abs() < 0.02, "v2 {} vs {v2}", fit.v2);
        }
    }

    #[test]
    fn central_fit_is_half_mean() {
        let xs = vec![1.7; 50];
        let ws = vec![1.0; 50];
        let fit = fit_scaled_ncx2(&xs, &ws, (0.5, 0.0), true).unwrap();
        assert_relative_eq!(fit.v1, 0.85, max_relative = 1e-15);
        assert_eq!(fit.v2, 0.0);
    }

    #[test]
    fn update_never_descends() {
        let mut r = RngStream::new(3, 0);
        let xs = sample_scaled_ncx2(0.3, 1.0, 2_000, &mut r);
        let ws: Vec<f64> = xs.iter().map(|x| (-x).exp()).collect();
        let d = data(&xs, &ws);
        for (v1, v2) in [(0.5, 0.5), (0.1, 20.0), (3.0, 0.0)] {
            let current = CeParams {
                v1,
                v2,
                iteration: 0,
                gamma_t: 1.0,
            };
            let fit = ce_update(&xs, 1, &ws, &current).unwrap();
            let before = d.objective((v1 * v2).sqrt(), v1) - std::f64::consts::LN_2;
            assert!(fit.objective >= before - 1e-12);
        }
    }

    #[test]
    fn degenerate_and_invalid_updates() {
        let current = CeParams::nominal(0.5);
        let fit = ce_update(&[0.0; 4], 2, &[1.0, 1.0], &current).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.v1, 1e-12);
        assert_eq!(fit.v2, 0.0);
        assert!(ce_update(&[1.0; 4], 2, &[0.0, 0.0], &current).is_err());
        assert!(ce_update(&[1.0; 3], 2, &[1.0, 1.0], &current).is_err());
    }

    #[test]
    fn non_identical_means_rejected() {
        let cfg = ChannelConfig::new(2, 1, vec![0.5, 0.6], 1.0).unwrap();
        let res = estimate_ce(
            &cfg,
            1000,
            &CeOptions::default(),
            &RngStream::new(0, 0),
            &Executor::sequential(),
        );
        assert_eq!(res.unwrap_err(), Error::CeNonIdenticalMeans);
    }

    #[test]
    fn thresholds_decrease_and_estimate_is_sane() {
        let cfg = ChannelConfig::identical(4, 2, 0.5, 0.3).unwrap();
        let opts = CeOptions {
            pilot_samples: 10_000,
            ..CeOptions::default()
        };
        let ex = Executor::sequential();
        let ce = estimate_ce(&cfg, 100_000, &opts, &RngStream::new(4, 0), &ex).unwrap();
        let Diagnostics::Ce { trace, .. } = &ce.diagnostics else {
            panic!()
        };
        assert!(trace.len() >= 2);
        for w in trace.windows(2) {
            assert!(w[1].gamma_t < w[0].gamma_t);
        }
        let nmc = estimate_nmc(&cfg, 2_000_000, &RngStream::new(5, 0), &ex).unwrap();
        let se = (ce.std_error().powi(2) + nmc.std_error().powi(2)).sqrt();
        assert!(
            (ce.p_hat - nmc.p_hat).abs() < 4.0 * se,
            "{} vs {}",
            ce.p_hat,
            nmc.p_hat
        );
    }

    #[test]
    fn common_event_keeps_nominal_law() {
        let cfg = ChannelConfig::identical(3, 2, 0.5, 5.0).unwrap();
        let opts = CeOptions {
            pilot_samples: 1_000,
            ..CeOptions::default()
        };
        let ex = Executor::sequential();
        let ce = estimate_ce(&cfg, 200_000, &opts, &RngStream::new(6, 0), &ex).unwrap();
        let Diagnostics::Ce { trace, .. } = &ce.diagnostics else {
            panic!()
        };
        assert_eq!(trace.len(), 1);
        assert!(!ce.warnings.is_empty());
        let nmc = estimate_nmc(&cfg, 200_000, &RngStream::new(7, 0), &ex).unwrap();
        let se = (ce.std_error().powi(2) + nmc.std_error().powi(2)).sqrt();
        assert!((ce.p_hat - nmc.p_hat).abs() < 3.0 * se);
    }
}
