//! Problem instance, the combiner statistic `H`, and closed-form edge cases.
//!
//! Branch powers are `X_i ~ ½ χ²₂(2μ_i²)` (unit scatter power, line-of-sight
//! magnitude `μ_i`). GSC/MRC keeps the `m` strongest of `M` branches and sums
//! them; an outage is `H(X) ≤ γ_th`.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::Diagnostics;
use crate::specfun::{ncx2_cdf, Ncx2Params};

/// `M` branches, `m` of them combined, per-branch LOS magnitudes and threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelConfig {
    antennas: usize,
    selected: usize,
    mu: Vec<f64>,
    gamma_th: f64,
}

impl ChannelConfig {
    pub fn new(antennas: usize, selected: usize, mu: Vec<f64>, gamma_th: f64) -> Result<Self> {
        if antennas == 0 {
            return Err(Error::InvalidConfig("M must be at least 1".into()));
        }
        if selected == 0 || selected > antennas {
            return Err(Error::InvalidConfig(format!(
                "m must satisfy 1 <= m <= M (m = {selected}, M = {antennas})"
            )));
        }
        if mu.len() != antennas {
            return Err(Error::InvalidConfig(format!(
                "mu has {} entries, expected M = {antennas}",
                mu.len()
            )));
        }
        if let Some(bad) = mu.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidConfig(format!(
                "mu entries must be finite and >= 0, got {bad}"
            )));
        }
        if !(gamma_th > 0.0 && gamma_th.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "gamma_th must be finite and > 0, got {gamma_th}"
            )));
        }
        Ok(Self {
            antennas,
            selected,
            mu,
            gamma_th,
        })
    }

    /// All branches share the LOS magnitude `mu`.
    pub fn identical(antennas: usize, selected: usize, mu: f64, gamma_th: f64) -> Result<Self> {
        Self::new(antennas, selected, vec![mu; antennas], gamma_th)
    }

    /// Total number of branches `M`.
    pub fn antennas(&self) -> usize {
        self.antennas
    }

    /// Number of combined branches `m`.
    pub fn selected(&self) -> usize {
        self.selected
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn gamma_th(&self) -> f64 {
        self.gamma_th
    }

    /// Same channel, different threshold.
    pub fn with_gamma_th(&self, gamma_th: f64) -> Result<Self> {
        Self::new(self.antennas, self.selected, self.mu.clone(), gamma_th)
    }

    /// Rician K-factor of branch `i`.
    pub fn k_factor(&self, i: usize) -> f64 {
        self.mu[i] * self.mu[i]
    }

    /// Average branch power `Ω_i = K_i + 1`.
    pub fn omega(&self, i: usize) -> f64 {
        self.k_factor(i) + 1.0
    }

    /// `‖μ‖²`.
    pub fn mu_norm_sq(&self) -> f64 {
        self.mu.iter().map(|v| v * v).sum()
    }

    /// The common LOS magnitude if all branches share it.
    pub fn common_mu(&self) -> Option<f64> {
        let first = self.mu[0];
        self.mu.iter().all(|&v| v == first).then_some(first)
    }

    /// Law of `2 X_i`.
    pub(crate) fn branch_law(&self, i: usize) -> Ncx2Params {
        Ncx2Params::new(2, 2.0 * self.k_factor(i)).expect("validated config")
    }
}

/// The six estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Nmc,
    Uis,
    Pis,
    Et,
    Ce,
    Mls,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Nmc,
        Method::Uis,
        Method::Pis,
        Method::Et,
        Method::Ce,
        Method::Mls,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Nmc => "nmc",
            Method::Uis => "uis",
            Method::Pis => "pis",
            Method::Et => "et",
            Method::Ce => "ce",
            Method::Mls => "mls",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Spec(format!("unknown method '{s}'")))
    }
}

/// Output of one estimator run.
///
/// `var_hat` is the variance of a single-sample estimator `ℓ̂`, so the
/// variance of the reported average is `var_hat / samples`.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateResult {
    pub method: Method,
    pub p_hat: f64,
    pub var_hat: f64,
    pub samples: u64,
    pub wall_time_s: f64,
    pub seed: u64,
    /// Machine-independent cost: sampled coordinates, chain steps, pilot work.
    pub work_units: u64,
    pub warnings: Vec<String>,
    pub diagnostics: Diagnostics,
}

impl EstimateResult {
    /// Standard error of `p_hat`.
    pub fn std_error(&self) -> f64 {
        (self.var_hat / self.samples as f64).sqrt()
    }
}

/// Sum of the `m` largest entries of `x`.
pub fn gsc_statistic(x: &[f64], m: usize) -> Result<f64> {
    if m == 0 || m > x.len() {
        return Err(Error::domain(
            "gsc_statistic",
            format!("m = {m} must lie in 1..={}", x.len()),
        ));
    }
    if let Some(bad) = x.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::domain(
            "gsc_statistic",
            format!("entries must be nonnegative, got {bad}"),
        ));
    }
    let mut scratch = x.to_vec();
    Ok(gsc_statistic_in_place(&mut scratch, m))
}

/// As [`gsc_statistic`] but reorders `x` and skips validation.
#[inline]
pub(crate) fn gsc_statistic_in_place(x: &mut [f64], m: usize) -> f64 {
    let len = x.len();
    if m == len {
        return x.iter().sum();
    }
    if m == 1 {
        return x.iter().copied().fold(0.0, f64::max);
    }
    x.select_nth_unstable_by(m - 1, |a, b| b.total_cmp(a));
    x[..m].iter().sum()
}

/// Exact outage probability where one is known: `m = 1` (product of
/// marginal CDFs) and `m = M` (one aggregate noncentral chi-square).
pub fn closed_form_outage(config: &ChannelConfig) -> Option<f64> {
    let x = 2.0 * config.gamma_th;
    if config.selected == 1 {
        let p = (0..config.antennas)
            .map(|i| ncx2_cdf(x, &config.branch_law(i)))
            .product();
        Some(p)
    } else if config.selected == config.antennas {
        let law = Ncx2Params::new(2 * config.antennas as u32, 2.0 * config.mu_norm_sq()).ok()?;
        Some(ncx2_cdf(x, &law))
    } else {
        None
    }
}
