//! Efficiency metrics for comparing estimators.
//!
//! All metrics read an [`EstimateResult`], whose `var_hat / samples` is the
//! variance of `p_hat`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::EstimateResult;
use crate::specfun::ln_factorial;

/// Normal quantile for a two-sided 95% interval.
pub const Z_NORMAL_95: f64 = 1.96;

/// Chebyshev multiplier for a two-sided 95% interval, `1/√0.05`.
pub const Z_CHEBYSHEV_95: f64 = 4.47;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum IntervalKind {
    /// Central limit approximation.
    Normal,
    /// Distribution-free bound, for when normality is not trusted.
    Chebyshev,
}

/// Work-normalised relative variance, by wall time and by work units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Wnrv {
    pub time: f64,
    pub work: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyReport {
    pub re: f64,
    pub scv: f64,
    pub wnrv: Wnrv,
    pub ci95: (f64, f64),
    pub work_units: u64,
    pub warnings: Vec<String>,
}

fn positive_estimate(result: &EstimateResult) -> Result<f64> {
    if result.p_hat > 0.0 && result.p_hat.is_finite() {
        Ok(result.p_hat)
    } else {
        Err(Error::DegenerateEstimate)
    }
}

/// `sqrt(var_hat / S) / p_hat`.
pub fn relative_error(result: &EstimateResult) -> Result<f64> {
    let p = positive_estimate(result)?;
    Ok((result.var_hat / result.samples as f64).sqrt() / p)
}

/// `var_hat / p_hat²`, independent of the sample count.
pub fn scv(result: &EstimateResult) -> Result<f64> {
    let p = positive_estimate(result)?;
    Ok(result.var_hat / (p * p))
}

/// `RE² · wall time` and the portable `SCV · work_units / S`.
pub fn wnrv(result: &EstimateResult) -> Result<Wnrv> {
    let re = relative_error(result)?;
    let per_sample = result.work_units as f64 / result.samples as f64;
    Ok(Wnrv {
        time: re * re * result.wall_time_s.max(0.0),
        work: scv(result)? * per_sample,
    })
}

/// Multiplier for a two-sided interval at `level`.
pub fn interval_multiplier(level: f64, kind: IntervalKind) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain(
            "confidence_interval",
            format!("level {level} outside (0, 1)"),
        ));
    }
    Ok(match kind {
        IntervalKind::Normal if level == 0.95 => Z_NORMAL_95,
        IntervalKind::Normal => {
            use statrs::distribution::{ContinuousCDF, Normal};
            Normal::standard().inverse_cdf(0.5 + 0.5 * level)
        }
        IntervalKind::Chebyshev if level == 0.95 => Z_CHEBYSHEV_95,
        IntervalKind::Chebyshev => (1.0 - level).sqrt().recip(),
    })
}

/// `p_hat · (1 ∓ z · RE)`, clipped to `[0, 1]`.
pub fn confidence_interval(
    result: &EstimateResult,
    level: f64,
    kind: IntervalKind,
) -> Result<(f64, f64)> {
    let z = interval_multiplier(level, kind)?;
    let re = relative_error(result)?;
    let p = result.p_hat;
    Ok((
        (p * (1.0 - z * re)).clamp(0.0, 1.0),
        (p * (1.0 + z * re)).clamp(0.0, 1.0),
    ))
}

/// All metrics at once. A zero wall time is reported with a warning.
pub fn efficiency_report(result: &EstimateResult) -> Result<EfficiencyReport> {
    let mut warnings = Vec::new();
    if result.wall_time_s <= 0.0 {
        warnings.push("wall time not recorded; time-based WNRV is 0".to_string());
    }
    Ok(EfficiencyReport {
        re: relative_error(result)?,
        scv: scv(result)?,
        wnrv: wnrv(result)?,
        ci95: confidence_interval(result, 0.95, IntervalKind::Normal)?,
        work_units: result.work_units,
        warnings,
    })
}

/// Natural log of the large-`μ` approximation of the rejection constant
/// for a block of `n` branches with common LOS magnitude `μ`.
pub fn ln_m_ell_asymptotic(mu: f64, n: usize, gamma_th: f64) -> Result<f64> {
    if !(mu > 1.0 && mu.is_finite())
        || n == 0
        || !(gamma_th > 0.0 && gamma_th < 2.0 * mu * mu - 2.0)
    {
        return Err(Error::domain(
            "m_ell_asymptotic",
            format!("needs mu > 1, n >= 1, 0 < gamma_th < 2mu^2 - 2 (mu = {mu}, n = {n}, gamma_th = {gamma_th})"),
        ));
    }
    let m = n as f64;
    let g = gamma_th;
    let ln_prefactor = (2.0 * m + 1.0) / 4.0 * m.ln() + (m + 1.0) / 4.0 * g.ln()
        - (m - 1.0) * std::f64::consts::LN_2
        - ln_factorial(n as u64)
        - (m - 1.0) / 2.0 * PI.ln()
        - (m - 1.0) * g;
    Ok(ln_prefactor + (m + 1.0) / 2.0 * mu.ln() + 2.0 * g.sqrt() * (m - m.sqrt()) * mu)
}

/// The same approximation on the linear scale; overflows to infinity for
/// very large `μ`.
pub fn m_ell_asymptotic(mu: f64, n: usize, gamma_th: f64) -> Result<f64> {
    ln_m_ell_asymptotic(mu, n, gamma_th).map(f64::exp)
}
