//! Self-checks against exact answers: closed-form outage probabilities, a
//! crude Monte Carlo reference, closed-form estimator variances and the
//! rejection-sampler bound.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::estimators::{
    estimate_ce, estimate_et, estimate_mls, estimate_nmc, estimate_pis_with, estimate_uis,
    CeOptions, Diagnostics, MlsOptions,
};
use crate::exec::Executor;
use crate::model::{closed_form_outage, ChannelConfig, EstimateResult, Method};
use crate::rng::RngStream;
use crate::samplers::{compute_m_ell_with, PisBlockSampler, DEFAULT_PDF_BOUND_CONSTANT};

/// Combined standard errors allowed between an estimate and its reference.
pub const SE_TOLERANCE: f64 = 4.0;
/// Relative tolerance on closed-form variances.
pub const VARIANCE_TOLERANCE: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyOptions {
    pub seed: u64,
    pub workers: usize,
    /// Constant used by the PIS checks; lowering it should make them fail.
    pub pdf_bound_constant: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 1,
            workers: 1,
            pdf_bound_constant: DEFAULT_PDF_BOUND_CONSTANT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// `check,status,detail` lines.
    pub fn write_table<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| crate::Error::Io(e.to_string());
        w.write_record(["check", "status", "detail"]).map_err(io)?;
        for c in &self.checks {
            let status = if c.passed { "pass" } else { "fail" };
            w.write_record([c.name.as_str(), status, c.detail.as_str()])
                .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Runner {
    opts: VerifyOptions,
    exec: Executor,
}

impl Runner {
    fn estimate(&self, method: Method, cfg: &ChannelConfig, stream: u64) -> Result<EstimateResult> {
        let rng = RngStream::new(self.opts.seed, stream);
        let s = 100_000;
        match method {
            Method::Nmc => estimate_nmc(cfg, s, &rng, &self.exec),
            Method::Uis => estimate_uis(cfg, s, &rng, &self.exec),
            Method::Pis => {
                estimate_pis_with(cfg, s, &rng, &self.exec, self.opts.pdf_bound_constant)
            }
            Method::Et => estimate_et(cfg, s, &rng, &self.exec),
            Method::Ce => {
                let ce = CeOptions {
                    pilot_samples: 20_000,
                    ..CeOptions::default()
                };
                estimate_ce(cfg, s, &ce, &rng, &self.exec)
            }
            Method::Mls => {
                let mls = MlsOptions {
                    per_level_samples: 1000,
                    replications: 20,
                    ..MlsOptions::default()
                };
                estimate_mls(cfg, &mls, &rng, &self.exec)
            }
        }
    }

    /// Every method against an exact value (`se_ref = 0`) or a reference
    /// estimate.
    fn agreement(&self, name: &str, cfg: &ChannelConfig, reference: f64, se_ref: f64) -> Check {
        let mut bad = Vec::new();
        for (k, method) in Method::ALL.into_iter().enumerate() {
            match self.estimate(method, cfg, k as u64) {
                Ok(r) => {
                    let se = (r.std_error().powi(2) + se_ref * se_ref).sqrt();
                    let diff = (r.p_hat - reference).abs();
                    // zero-variance estimators (UIS/PIS at m = 1) must be exact
                    let z = if se > 0.0 {
                        diff / se
                    } else if diff <= 1e-9 * reference {
                        0.0
                    } else {
                        f64::INFINITY
                    };
                    if !(z <= SE_TOLERANCE) {
                        bad.push(format!("{method} off by {z:.1} SE"));
                    }
                }
                Err(e) => bad.push(format!("{method}: {e}")),
            }
        }
        let detail = if bad.is_empty() {
            format!("all methods within {SE_TOLERANCE} SE of {reference:.4e}")
        } else {
            bad.join("; ")
        };
        Check {
            name: name.to_string(),
            passed: bad.is_empty(),
            detail,
        }
    }

    /// Per-sample variance against `ℓ p − p²` with an independent `p`.
    fn variance(&self, name: &str, method: Method, cfg: &ChannelConfig, exact: f64) -> Check {
        let outcome = self.estimate(method, cfg, 100).map(|r| {
            let ell = match r.diagnostics {
                Diagnostics::Uis { ell1, .. } => ell1,
                Diagnostics::Pis { ell2, .. } => ell2,
                _ => f64::NAN,
            };
            (r.var_hat, ell * exact - exact * exact)
        });
        let (passed, detail) = match outcome {
            Ok((got, want)) => {
                let rel = (got / want - 1.0).abs();
                (
                    rel <= VARIANCE_TOLERANCE,
                    format!("var {got:.4e} vs {want:.4e} (rel {rel:.3})"),
                )
            }
            Err(e) => (false, e.to_string()),
        };
        Check {
            name: name.to_string(),
            passed,
            detail,
        }
    }

    /// Draws proposals across all three bound cases; any proposal with
    /// `f > M_ℓ g` fails the check.
    fn rejection_guard(&self) -> Check {
        let grid = [
            (0.5, 2, 1.0),
            (0.9, 3, 0.5),
            (3.0, 2, 1.0),
            (2.3, 1, 3.0),
            (1.05, 1, 5.0),
            (2.3, 2, 17.0),
        ];
        let mut bad = Vec::new();
        let mut proposals = 0;
        for (k, &(mu, n, gamma)) in grid.iter().enumerate() {
            let mut rng = RngStream::new(self.opts.seed, 200 + k as u64);
            let run = compute_m_ell_with(mu, n, gamma, self.opts.pdf_bound_constant)
                .and_then(|b| PisBlockSampler::with_bound(b, gamma))
                .and_then(|mut sampler| {
                    let mut out = vec![0.0; n];
                    while sampler.stats().proposals < 50_000 {
                        sampler.sample_into(&mut rng, &mut out)?;
                    }
                    Ok(sampler.stats().proposals)
                });
            match run {
                Ok(p) => proposals += p,
                Err(e) => bad.push(format!("mu = {mu}, n = {n}, gamma = {gamma}: {e}")),
            }
        }
        Check {
            name: "rejection_guard".into(),
            passed: bad.is_empty(),
            detail: if bad.is_empty() {
                format!("{proposals} proposals, no bound violations")
            } else {
                bad.join("; ")
            },
        }
    }
}

/// Runs the full suite.
pub fn verify(options: &VerifyOptions) -> Result<VerifyReport> {
    let runner = Runner {
        opts: *options,
        exec: Executor::new(options.workers)?,
    };
    let mut checks = Vec::new();

    let select_one = ChannelConfig::identical(2, 1, 0.5, 0.1)?;
    let exact = closed_form_outage(&select_one).expect("m = 1");
    checks.push(runner.agreement("closed_form_select_one", &select_one, exact, 0.0));

    let combine_all = ChannelConfig::identical(3, 3, 0.5, 0.5)?;
    let exact = closed_form_outage(&combine_all).expect("m = M");
    checks.push(runner.agreement("closed_form_combine_all", &combine_all, exact, 0.0));

    let small = ChannelConfig::identical(3, 2, 0.5, 0.35)?;
    let reference = estimate_nmc(
        &small,
        2_000_000,
        &RngStream::new(options.seed, 300),
        &runner.exec,
    )?;
    checks.push(runner.agreement(
        "small_instance_nmc",
        &small,
        reference.p_hat,
        reference.std_error(),
    ));

    // PIS is exact at m = M, so its variance is checked on the NMC instance.
    checks.push(runner.variance("uis_variance_closed_form", Method::Uis, &combine_all, exact));
    checks.push(runner.variance(
        "pis_variance_closed_form",
        Method::Pis,
        &small,
        reference.p_hat,
    ));
    checks.push(runner.rejection_guard());
    Ok(VerifyReport { checks })
}
