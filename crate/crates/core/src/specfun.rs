//! Special functions behind every distribution in the toolkit.
//!
//! The noncentral chi-square routines are restricted to even degrees of
//! freedom `2n`. For `y = x/2` and `h = λ/2` the Poisson-mixture series
//!
//! ```text
//! F(x; 2n, λ) = Σ_j Pois(j; h) · P(n + j, y)
//! ```
//!
//! is evaluated in the equivalent double-Poisson form
//! `F = Pr(N_y − N_h ≥ n)` with `N_y ~ Pois(y)`, `N_h ~ Pois(h)`
//! independent. Both the CDF and the survival function then become sums of
//! positive terms with a geometric tail bound, which gives relative (not
//! only absolute) accuracy deep in either tail. Everything that can
//! underflow has a log-space twin.

use std::f64::consts::{LN_2, PI};

use statrs::function::erf::erfc_inv;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Relative truncation tolerance for all positive series.
const SERIES_EPS: f64 = 1e-17;
/// Linear-space evaluation is used while both Poisson means stay below this.
const LINEAR_LIMIT: f64 = 300.0;
/// Results below this are recomputed in log space.
const LINEAR_FLOOR: f64 = 1e-280;
const MAX_TERMS: usize = 1_000_000;

/// Arguments above this use the large-argument expansion for `I_ν`.
const BESSEL_ASYMPTOTIC_FROM: f64 = 25.0;

#[inline]
pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a > b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

/// `ln n!` for nonnegative integers.
#[inline]
pub(crate) fn ln_factorial(n: u64) -> f64 {
    if n < 2 {
        0.0
    } else {
        ln_gamma(n as f64 + 1.0)
    }
}

// ---------------------------------------------------------------------------
// Modified Bessel functions of the first kind, orders 0 and 1.
// ---------------------------------------------------------------------------

fn ln_bessel_series(order: u32, x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let nu = order as f64;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= q / (k * (k + nu));
        sum += term;
        if term <= SERIES_EPS * sum {
            break;
        }
    }
    // (x/2)^ν / ν! with ν ∈ {0, 1}
    let lead = if order == 0 { 0.0 } else { (0.5 * x).ln() };
    lead + sum.ln()
}

fn ln_bessel_asymptotic(order: u32, x: f64) -> f64 {
    let mu = 4.0 * (order as f64).powi(2);
    let mut term: f64 = 1.0;
    let mut sum: f64 = 1.0;
    let mut k = 0.0;
    loop {
        k += 1.0;
        let odd = 2.0 * k - 1.0;
        let next = -term * (mu - odd * odd) / (k * 8.0 * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() <= SERIES_EPS * sum.abs() {
            break;
        }
    }
    x - 0.5 * (2.0 * PI * x).ln() + sum.ln()
}

/// `ln I₀(x)` without argument checks.
#[inline]
pub(crate) fn ln_i0(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if x <= BESSEL_ASYMPTOTIC_FROM {
        ln_bessel_series(0, x)
    } else {
        ln_bessel_asymptotic(0, x)
    }
}

/// `ln I₁(x)` for `x > 0`.
#[inline]
pub(crate) fn ln_i1(x: f64) -> f64 {
    if x <= BESSEL_ASYMPTOTIC_FROM {
        ln_bessel_series(1, x)
    } else {
        ln_bessel_asymptotic(1, x)
    }
}

/// Natural log of the modified Bessel function `I₀(x)`.
///
/// Never overflows: large arguments go through the asymptotic expansion
/// `I₀(x) ~ eˣ/√(2πx) · Σ ((2k−1)!!)² / (k! (8x)ᵏ)`.
pub fn log_bessel_i0(x: f64) -> Result<f64> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::domain("log_bessel_i0", format!("x = {x}")));
    }
    Ok(ln_i0(x))
}

/// Ratio `I₁(z)/I₀(z)` (the derivative of `ln I₀`).
pub fn bessel_i1_i0_ratio(z: f64) -> f64 {
    if z < 1e-8 {
        0.5 * z
    } else {
        (ln_i1(z) - ln_i0(z)).exp()
    }
}

// ---------------------------------------------------------------------------
// Regularized incomplete gamma.
// ---------------------------------------------------------------------------

/// `(ln P(a,x), ln Q(a,x))` for `a > 0`, `x > 0`.
fn ln_incomplete_gamma_pair(a: f64, x: f64) -> (f64, f64) {
    let ln_prefactor = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        // P(a,x) = x^a e^{-x} / Γ(a+1) · Σ_k x^k / ((a+1)…(a+k))
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut ap = a;
        for _ in 0..MAX_TERMS {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term <= SERIES_EPS * sum {
                break;
            }
        }
        let ln_p = ln_prefactor - a.ln() + sum.ln();
        let ln_q = (-ln_p.exp()).ln_1p();
        (ln_p, ln_q)
    } else {
        // Modified Lentz continued fraction for Q(a,x).
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..MAX_TERMS {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() <= 1e-16 {
                break;
            }
        }
        let ln_q = ln_prefactor + h.ln();
        let ln_p = (-ln_q.exp()).ln_1p();
        (ln_p, ln_q)
    }
}

fn check_gamma_args(func: &'static str, a: f64, x: f64) -> Result<()> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::domain(func, format!("a = {a} must be positive")));
    }
    if !(x >= 0.0) {
        return Err(Error::domain(func, format!("x = {x} must be nonnegative")));
    }
    Ok(())
}

/// Regularized lower incomplete gamma `P(a, x) = γ(a, x) / Γ(a)`.
pub fn regularized_lower_gamma(a: f64, x: f64) -> Result<f64> {
    check_gamma_args("regularized_lower_gamma", a, x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    let (ln_p, _) = ln_incomplete_gamma_pair(a, x);
    Ok(ln_p.exp().clamp(0.0, 1.0))
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 − P(a, x)`.
pub fn regularized_upper_gamma(a: f64, x: f64) -> Result<f64> {
    check_gamma_args("regularized_upper_gamma", a, x)?;
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    let (_, ln_q) = ln_incomplete_gamma_pair(a, x);
    Ok(ln_q.exp().clamp(0.0, 1.0))
}

// ---------------------------------------------------------------------------
// Noncentral chi-square with even degrees of freedom.
// ---------------------------------------------------------------------------

/// Parameters of `χ²_k(λ)` with even `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ncx2Params {
    dof: u32,
    noncentrality: f64,
}

impl Ncx2Params {
    pub fn new(dof: u32, noncentrality: f64) -> Result<Self> {
        if dof < 2 || !dof.is_multiple_of(2) {
            return Err(Error::domain(
                "Ncx2Params::new",
                format!("degrees of freedom must be even and >= 2, got {dof}"),
            ));
        }
        if !(noncentrality >= 0.0) || !noncentrality.is_finite() {
            return Err(Error::domain(
                "Ncx2Params::new",
                format!("noncentrality must be finite and >= 0, got {noncentrality}"),
            ));
        }
        Ok(Self { dof, noncentrality })
    }

    /// `χ²₂(λ)`, the law of twice a single branch power.
    pub fn two_dof(noncentrality: f64) -> Result<Self> {
        Self::new(2, noncentrality)
    }

    pub fn dof(&self) -> u32 {
        self.dof
    }

    pub fn noncentrality(&self) -> f64 {
        self.noncentrality
    }

    #[inline]
    fn half_dof(&self) -> u64 {
        (self.dof / 2) as u64
    }
}

/// Σ_{i≥n} π_i(y) W_h(i−n), linear space.
fn cdf_linear(y: f64, h: f64, n: u64) -> f64 {
    let mut pi = (-y).exp();
    for i in 1..=n {
        pi *= y / i as f64;
    }
    let mut w = (-h).exp();
    let mut cum_w = w;
    let mut sum = 0.0;
    let mut i = n as f64;
    let mut k = 0.0;
    for _ in 0..MAX_TERMS {
        let term = pi * cum_w;
        sum += term;
        let r = y / (i + 1.0) * (1.0 + h / (k + 1.0));
        if r < 1.0 && term * r / (1.0 - r) <= SERIES_EPS * sum {
            break;
        }
        if pi == 0.0 && i > y {
            break;
        }
        i += 1.0;
        k += 1.0;
        pi *= y / i;
        w *= h / k;
        cum_w += w;
    }
    sum
}

fn ln_cdf_log_space(y: f64, h: f64, n: u64) -> f64 {
    let ln_y = y.ln();
    let ln_h = if h > 0.0 { h.ln() } else { f64::NEG_INFINITY };
    let mut ln_pi = -y + n as f64 * ln_y - ln_factorial(n);
    let mut ln_w = -h;
    let mut ln_cum_w = ln_w;
    let mut ln_sum = f64::NEG_INFINITY;
    let mut i = n as f64;
    let mut k = 0.0;
    for _ in 0..MAX_TERMS {
        let lt = ln_pi + ln_cum_w;
        ln_sum = log_add_exp(ln_sum, lt);
        let r = y / (i + 1.0) * (1.0 + h / (k + 1.0));
        if r < 1.0 && lt + (r / (1.0 - r)).ln() <= ln_sum + SERIES_EPS.ln() {
            break;
        }
        i += 1.0;
        k += 1.0;
        ln_pi += ln_y - i.ln();
        ln_w += ln_h - k.ln();
        ln_cum_w = log_add_exp(ln_cum_w, ln_w);
    }
    ln_sum
}

/// Σ_{j≥0} w_j(h) C_y(n+j−1), linear space.
fn sf_linear(y: f64, h: f64, n: u64) -> f64 {
    let mut pi = (-y).exp();
    let mut cum_pi = pi;
    for i in 1..n {
        pi *= y / i as f64;
        cum_pi += pi;
    }
    let mut w = (-h).exp();
    let mut sum = 0.0;
    let mut j = 0.0;
    let nf = n as f64;
    for _ in 0..MAX_TERMS {
        let term = w * cum_pi;
        sum += term;
        let r = h / (j + 1.0) * (1.0 + y / (nf + j));
        if r < 1.0 && term * r / (1.0 - r) <= SERIES_EPS * sum {
            break;
        }
        if w == 0.0 && j > h {
            break;
        }
        j += 1.0;
        w *= h / j;
        pi *= y / (nf + j - 1.0);
        cum_pi += pi;
    }
    sum
}

fn ln_sf_log_space(y: f64, h: f64, n: u64) -> f64 {
    let ln_y = y.ln();
    let ln_h = if h > 0.0 { h.ln() } else { f64::NEG_INFINITY };
    let mut ln_pi = -y;
    let mut ln_cum_pi = ln_pi;
    for i in 1..n {
        ln_pi += ln_y - (i as f64).ln();
        ln_cum_pi = log_add_exp(ln_cum_pi, ln_pi);
    }
    let mut ln_w = -h;
    let mut ln_sum = f64::NEG_INFINITY;
    let mut j = 0.0;
    let nf = n as f64;
    for _ in 0..MAX_TERMS {
        let lt = ln_w + ln_cum_pi;
        ln_sum = log_add_exp(ln_sum, lt);
        let r = h / (j + 1.0) * (1.0 + y / (nf + j));
        if r < 1.0 && lt + (r / (1.0 - r)).ln() <= ln_sum + SERIES_EPS.ln() {
            break;
        }
        j += 1.0;
        ln_w += ln_h - j.ln();
        ln_pi += ln_y - (nf + j - 1.0).ln();
        ln_cum_pi = log_add_exp(ln_cum_pi, ln_pi);
    }
    ln_sum
}

#[inline]
fn use_linear(y: f64, h: f64) -> bool {
    y <= LINEAR_LIMIT && h <= LINEAR_LIMIT
}

/// CDF of `χ²_k(λ)` at `x`.
pub fn ncx2_cdf(x: f64, params: &Ncx2Params) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    let (y, h, n) = (0.5 * x, 0.5 * params.noncentrality, params.half_dof());
    if use_linear(y, h) {
        let v = cdf_linear(y, h, n);
        if v >= LINEAR_FLOOR {
            return v.min(1.0);
        }
    }
    ln_cdf_log_space(y, h, n).exp().min(1.0)
}

/// `ln F(x; k, λ)`, accurate where the CDF underflows.
pub fn ncx2_log_cdf(x: f64, params: &Ncx2Params) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if x.is_infinite() {
        return 0.0;
    }
    let (y, h, n) = (0.5 * x, 0.5 * params.noncentrality, params.half_dof());
    if use_linear(y, h) {
        let v = cdf_linear(y, h, n);
        if v >= LINEAR_FLOOR {
            return v.min(1.0).ln();
        }
    }
    ln_cdf_log_space(y, h, n).min(0.0)
}

/// Survival function `1 − F(x; k, λ)`, computed directly (no cancellation).
pub fn ncx2_sf(x: f64, params: &Ncx2Params) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    let (y, h, n) = (0.5 * x, 0.5 * params.noncentrality, params.half_dof());
    if use_linear(y, h) {
        let v = sf_linear(y, h, n);
        if v >= LINEAR_FLOOR {
            return v.min(1.0);
        }
    }
    ln_sf_log_space(y, h, n).exp().min(1.0)
}

/// `ln(1 − F(x; k, λ))`.
pub fn ncx2_log_sf(x: f64, params: &Ncx2Params) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return f64::NEG_INFINITY;
    }
    let (y, h, n) = (0.5 * x, 0.5 * params.noncentrality, params.half_dof());
    if use_linear(y, h) {
        let v = sf_linear(y, h, n);
        if v >= LINEAR_FLOOR {
            return v.min(1.0).ln();
        }
    }
    ln_sf_log_space(y, h, n).min(0.0)
}

/// `ln f(x; k, λ)`.
///
/// `k = 2` uses `f = ½ e^{−(x+λ)/2} I₀(√(λx))`; larger `k` sums the
/// mixture `½ Σ_j Pois(j; λ/2) · Pois(n+j−1; x/2)` outward from its peak.
pub fn ncx2_log_pdf(x: f64, params: &Ncx2Params) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 || x.is_infinite() {
        return f64::NEG_INFINITY;
    }
    let lambda = params.noncentrality;
    let n = params.half_dof();
    if n == 1 {
        return -LN_2 - 0.5 * (x + lambda) + ln_i0((lambda * x).sqrt());
    }
    if x == 0.0 {
        return f64::NEG_INFINITY;
    }
    let (y, h) = (0.5 * x, 0.5 * lambda);
    let nf = n as f64;
    let ln_y = y.ln();
    if h == 0.0 {
        return -LN_2 - y + (nf - 1.0) * ln_y - ln_factorial(n - 1);
    }
    let ln_h = h.ln();
    // Terms are log-concave in j; the peak solves (j+1)(n+j) = h·y.
    let disc = (nf - 1.0).powi(2) + 4.0 * h * y;
    let j0 = ((disc.sqrt() - (nf + 1.0)) / 2.0).max(0.0).floor();
    let ln_term = |j: f64| -> f64 {
        -h + j * ln_h - ln_gamma(j + 1.0) - y + (nf + j - 1.0) * ln_y - ln_gamma(nf + j)
    };
    let peak = ln_term(j0);
    let mut ln_sum = peak;
    // Upward.
    let mut lt = peak;
    let mut j = j0;
    for _ in 0..MAX_TERMS {
        let r = h / (j + 1.0) * y / (nf + j);
        lt += r.ln();
        j += 1.0;
        ln_sum = log_add_exp(ln_sum, lt);
        let r_next = h / (j + 1.0) * y / (nf + j);
        if r_next < 1.0 && lt + (r_next / (1.0 - r_next)).ln() <= ln_sum + SERIES_EPS.ln() {
            break;
        }
    }
    // Downward.
    let mut lt = peak;
    let mut j = j0;
    while j >= 1.0 {
        let r = j / h * (nf + j - 1.0) / y;
        lt += r.ln();
        j -= 1.0;
        ln_sum = log_add_exp(ln_sum, lt);
        if j < 1.0 {
            break;
        }
        let r_next = j / h * (nf + j - 1.0) / y;
        if r_next < 1.0 && lt + (r_next / (1.0 - r_next)).ln() <= ln_sum + SERIES_EPS.ln() {
            break;
        }
    }
    -LN_2 + ln_sum
}

/// Density of `χ²_k(λ)` at `x`.
pub fn ncx2_pdf(x: f64, params: &Ncx2Params) -> f64 {
    ncx2_log_pdf(x, params).exp()
}

/// Marcum Q-function `Q_m(a, b) = 1 − F(b²; 2m, a²)`.
pub fn marcum_q(m: u32, a: f64, b: f64) -> Result<f64> {
    if m == 0 || !(a >= 0.0) || !(b >= 0.0) {
        return Err(Error::domain(
            "marcum_q",
            format!("need m >= 1, a >= 0, b >= 0 (m = {m}, a = {a}, b = {b})"),
        ));
    }
    let params = Ncx2Params::new(2 * m, a * a)?;
    Ok(ncx2_sf(b * b, &params))
}

// ---------------------------------------------------------------------------
// Quantile.
// ---------------------------------------------------------------------------

#[derive(Clone, Copy)]
enum Tail {
    /// Solve ln F(x) = target.
    Lower(f64),
    /// Solve ln(1 − F(x)) = target.
    Upper(f64),
}

fn standard_normal_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// Wilson–Hilferty cube-root approximation applied to Patnaik's
/// two-moment central fit of the noncentral law.
fn wilson_hilferty_guess(z: f64, params: &Ncx2Params) -> f64 {
    let k = params.dof as f64;
    let lambda = params.noncentrality;
    let c = (k + 2.0 * lambda) / (k + lambda);
    let nu = (k + lambda).powi(2) / (k + 2.0 * lambda);
    let a = 2.0 / (9.0 * nu);
    let base = 1.0 - a + z * a.sqrt();
    c * nu * base.max(0.0).powi(3)
}

fn solve_quantile(tail: Tail, params: &Ncx2Params) -> f64 {
    let n = params.half_dof();
    let h = 0.5 * params.noncentrality;
    // Residual and slope of the log-probability in the chosen tail. Both tails
    // are log-concave, so Newton approaches the root monotonically once on
    // the concave side; the bracket catches the first overshoot.
    let eval = |x: f64| -> (f64, f64) {
        let lf = ncx2_log_pdf(x, params);
        match tail {
            Tail::Lower(target) => {
                let lc = ncx2_log_cdf(x, params);
                (lc - target, (lf - lc).exp())
            }
            Tail::Upper(target) => {
                let ls = ncx2_log_sf(x, params);
                // decreasing in x; negate so the residual increases
                (target - ls, (lf - ls).exp())
            }
        }
    };

    let mut x = match tail {
        Tail::Lower(ln_p) if ln_p < -14.0 => {
            // F ≈ e^{-h} (x/2)^n / n! as x → 0
            let guess = 2.0 * ((ln_p + h + ln_factorial(n)) / n as f64).exp();
            if guess < f64::MIN_POSITIVE {
                return guess;
            }
            guess
        }
        Tail::Lower(ln_p) => wilson_hilferty_guess(standard_normal_quantile(ln_p.exp()), params),
        Tail::Upper(ln_q) => {
            let q = ln_q.exp();
            let z = if q > 1e-300 {
                -standard_normal_quantile(q)
            } else {
                (-2.0 * ln_q).sqrt()
            };
            wilson_hilferty_guess(z, params)
        }
    };
    if !(x > 0.0) || !x.is_finite() {
        x = (params.dof as f64 + params.noncentrality) * 1e-3;
    }

    let mut lo = 0.0_f64;
    let mut hi = f64::INFINITY;
    let (mut g, mut slope) = eval(x);
    for _ in 0..200 {
        if g == 0.0 {
            return x;
        }
        if g < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - g / slope;
        let candidate = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else if hi.is_finite() {
            if lo > 0.0 {
                (lo * hi).sqrt()
            } else {
                0.5 * hi
            }
        } else {
            2.0 * x.max(1e-300)
        };
        let step = (candidate - x).abs();
        x = candidate;
        if step <= 4.0 * f64::EPSILON * x {
            return x;
        }
        if hi.is_finite() && lo > 0.0 && (hi - lo) <= 4.0 * f64::EPSILON * hi {
            return x;
        }
        let next = eval(x);
        g = next.0;
        slope = next.1;
        if g.abs() <= 1e-15 {
            return x;
        }
    }
    x
}

/// Quantile of `χ²_k(λ)`: the `x` with `F(x) = p`, for `0 < p < 1`.
pub fn ncx2_quantile(p: f64, params: &Ncx2Params) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(
            "ncx2_quantile",
            format!("p = {p} must lie in (0, 1)"),
        ));
    }
    let tail = if p <= 0.5 {
        Tail::Lower(p.ln())
    } else {
        Tail::Upper((-p).ln_1p())
    };
    Ok(solve_quantile(tail, params))
}

/// Lower-tail quantile from a log-probability: `F(x) = exp(ln_p)`.
///
/// Accepts `ln_p = −∞` (returns 0) and `ln_p = 0` (returns ∞), which lets
/// samplers feed `ln(1 − e^{−G})` for arbitrarily small `G` without
/// underflowing.
pub fn ncx2_quantile_ln(ln_p: f64, params: &Ncx2Params) -> f64 {
    if ln_p == f64::NEG_INFINITY {
        return 0.0;
    }
    if ln_p >= 0.0 {
        return f64::INFINITY;
    }
    let tail = if ln_p <= -LN_2 {
        Tail::Lower(ln_p)
    } else {
        // ln(1 − e^{ln_p})
        Tail::Upper((-ln_p.exp_m1()).ln())
    };
    solve_quantile(tail, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Values below were computed with mpmath at 40 digits.

    #[test]
    fn bessel_i0_matches_reference() {
        assert_eq!(log_bessel_i0(0.0).unwrap(), 0.0);
        let cases = [
            (0.5, 0.061_549_719_185_481_303_94),
            (1.0, 0.235_914_358_507_178_648_7),
            (5.0, 3.304_681_775_822_533_434),
            (10.0, 7.942_972_083_118_695_554),
            (20.0, 17.589_610_428_244_274_29),
            (30.0, 27.384_701_433_171_935_85),
            (50.0, 47.127_575_501_871_804_58),
            (100.0, 96.779_732_689_942_583_72),
            (700.0, 695.805_699_998_443_449_1),
            (1e4, 9_994.475_903_781_432_301),
        ];
        for (x, want) in cases {
            let got = log_bessel_i0(x).unwrap();
            if x <= 20.0 {
                assert_relative_eq!(got, want, max_relative = 1e-12);
            } else {
                assert!((got - want).abs() <= 1e-10, "x={x}: {got} vs {want}");
            }
        }
        assert!(log_bessel_i0(1e6).unwrap().is_finite());
    }

    #[test]
    fn bessel_i0_large_argument_leading_terms() {
        let x = 700.0_f64;
        let approx = x - 0.5 * (2.0 * PI * x).ln() + (1.0 + 1.0 / (8.0 * x)).ln();
        assert!((log_bessel_i0(x).unwrap() - approx).abs() < 1e-6);
    }

    #[test]
    fn bessel_rejects_bad_input() {
        assert!(log_bessel_i0(-1.0).is_err());
        assert!(log_bessel_i0(f64::NAN).is_err());
        assert!(log_bessel_i0(f64::INFINITY).is_err());
    }

    #[test]
    fn bessel_ratio_matches_reference() {
        assert_relative_eq!(
            bessel_i1_i0_ratio(0.5),
            0.242_499_612_580_801_945_4,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            bessel_i1_i0_ratio(5.0),
            0.893_383_137_044_085_221_6,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            bessel_i1_i0_ratio(50.0),
            0.989_948_967_378_497_752_6,
            max_relative = 1e-13
        );
        assert_eq!(bessel_i1_i0_ratio(0.0), 0.0);
    }

    #[test]
    fn incomplete_gamma_values() {
        assert_relative_eq!(
            regularized_lower_gamma(1.0, 1.0).unwrap(),
            1.0 - (-1.0f64).exp(),
            epsilon = 1e-15
        );
        assert_eq!(regularized_lower_gamma(3.0, 0.0).unwrap(), 0.0);
        let cases = [
            (4.0, 2.0, 0.142_876_539_501_452_951_3),
            (0.5, 0.1, 0.345_279_153_981_422_979_6),
            (10.5, 3.0, 0.000_573_820_528_343_588_909_7),
            (100.0, 90.0, 0.158_220_989_186_430_168_1),
        ];
        for (a, x, want) in cases {
            let got = regularized_lower_gamma(a, x).unwrap();
            assert!(
                (got - want).abs() <= 1e-13,
                "P({a},{x}) = {got}, want {want}"
            );
            let q = regularized_upper_gamma(a, x).unwrap();
            assert!((q - (1.0 - want)).abs() <= 1e-13);
        }
        assert!(regularized_lower_gamma(0.0, 1.0).is_err());
        assert!(regularized_lower_gamma(-2.0, 1.0).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(Ncx2Params::new(3, 1.0).is_err());
        assert!(Ncx2Params::new(0, 1.0).is_err());
        assert!(Ncx2Params::new(2, -1.0).is_err());
        assert!(Ncx2Params::new(2, f64::INFINITY).is_err());
        assert!(Ncx2Params::new(8, 0.0).is_ok());
    }

    #[test]
    fn cdf_reference_values() {
        let cases = [
            (2.0, 2, 0.5, 0.545_737_098_862_241_793_1),
            (2.0, 16, 4.0, 1.723_687_228_062_396_906e-6),
            (34.0, 8, 42.32, 0.106_567_158_171_646_910_9),
            (1.0, 8, 4.0, 2.876_636_155_765_810_56e-4),
            (10.0, 8, 4.0, 0.412_697_141_494_671_961_2),
            (0.2, 4, 2.0, 1.778_855_095_152_154_051e-3),
            (50.0, 2, 18.0, 0.996_906_013_935_423_311_4),
            (5.0, 2, 18.0, 0.015_028_248_828_981_211_01),
            (2.0, 8, 2.0, 0.008_446_293_530_022_542_291),
            (0.2, 8, 2.0, 1.443_615_003_402_171_053e-6),
        ];
        for (x, k, lambda, want) in cases {
            let p = Ncx2Params::new(k, lambda).unwrap();
            let got = ncx2_cdf(x, &p);
            assert!(
                (got - want).abs() <= 1e-12,
                "F({x};{k},{lambda}) = {got}, want {want}"
            );
            assert_relative_eq!(got, want, max_relative = 1e-12);
            let sf = ncx2_sf(x, &p);
            assert!((sf - (1.0 - want)).abs() <= 1e-12);
        }
    }

    #[test]
    fn central_two_dof_is_exponential() {
        let p = Ncx2Params::new(2, 0.0).unwrap();
        for i in 0..=500 {
            let x = i as f64 * 0.1;
            assert!((ncx2_cdf(x, &p) - (1.0 - (-x / 2.0).exp())).abs() <= 1e-13);
        }
        assert_eq!(ncx2_cdf(0.0, &p), 0.0);
    }

    #[test]
    fn log_cdf_survives_deep_left_tail() {
        // λ = 12800, x = 34: far below representable range in linear space.
        let p = Ncx2Params::new(8, 12_800.0).unwrap();
        let lc = ncx2_log_cdf(34.0, &p);
        assert!(lc.is_finite() && lc < -5000.0, "{lc}");
        // continuity with the linear path where both apply
        let p = Ncx2Params::new(8, 400.0).unwrap();
        let a = ncx2_log_cdf(60.0, &p);
        let b = ln_cdf_log_space(30.0, 200.0, 4);
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn pdf_reference_values() {
        let cases = [
            (2.0, 2, 0.5, 0.181_366_973_558_478_710_6),
            (3.0, 6, 5.0, 0.030_989_709_783_290_928_27),
            (0.5, 2, 0.0, 0.389_400_391_535_702_434_1),
            (10.0, 2, 18.0, 0.030_677_610_419_151_403_62),
        ];
        for (x, k, lambda, want) in cases {
            let p = Ncx2Params::new(k, lambda).unwrap();
            assert_relative_eq!(ncx2_pdf(x, &p), want, max_relative = 1e-10);
        }
        let p = Ncx2Params::new(2, 0.0).unwrap();
        assert_relative_eq!(ncx2_pdf(0.0, &p), 0.5, max_relative = 1e-15);
        // dof = 2 mixture route agrees with the Bessel route
        let p = Ncx2Params::new(2, 7.3).unwrap();
        let mix = {
            let (y, h) = (1.7, 3.65_f64);
            let mut s = 0.0;
            for j in 0..200u64 {
                s += (-h + j as f64 * h.ln() - ln_factorial(j)).exp()
                    * (-y + j as f64 * f64::ln(y) - ln_factorial(j)).exp();
            }
            0.5 * s
        };
        assert_relative_eq!(ncx2_pdf(3.4, &p), mix, max_relative = 1e-12);
    }

    #[test]
    fn quantile_known_points() {
        let p = Ncx2Params::new(2, 0.0).unwrap();
        let q = ncx2_quantile(1.0 - (-1.0f64).exp(), &p).unwrap();
        assert_relative_eq!(q, 2.0, max_relative = 1e-12);
        let q = ncx2_quantile(0.5, &p).unwrap();
        assert_relative_eq!(q, 2.0 * LN_2, max_relative = 1e-12);
        assert!(ncx2_quantile(0.0, &p).is_err());
        assert!(ncx2_quantile(1.0, &p).is_err());
        assert!(ncx2_quantile(f64::NAN, &p).is_err());
    }

    #[test]
    fn quantile_round_trip_extremes() {
        let p = Ncx2Params::new(8, 4.0).unwrap();
        for prob in [1e-8, 0.5, 1.0 - 1e-8] {
            let x = ncx2_quantile(prob, &p).unwrap();
            assert!((ncx2_cdf(x, &p) - prob).abs() <= 1e-11, "p={prob}");
        }
    }

    #[test]
    fn quantile_from_log_probability() {
        let p = Ncx2Params::new(2, 0.5).unwrap();
        assert_eq!(ncx2_quantile_ln(f64::NEG_INFINITY, &p), 0.0);
        // F(x) ≈ e^{-λ/2} x/2 near zero
        let ln_p = -600.0;
        let x = ncx2_quantile_ln(ln_p, &p);
        let expected = 2.0 * (ln_p + 0.25).exp();
        assert!(x > 0.0);
        assert_relative_eq!(x.ln(), expected.ln(), max_relative = 1e-10);
        assert!(ncx2_quantile_ln(-800.0, &p) < 1e-300);
        let x = ncx2_quantile_ln((0.9f64).ln(), &p);
        assert_relative_eq!(ncx2_cdf(x, &p), 0.9, max_relative = 1e-13);
    }

    #[test]
    fn marcum_q_matches_complement() {
        let q = marcum_q(1, 0.0, 2.0).unwrap();
        assert_relative_eq!(q, (-2.0f64).exp(), max_relative = 1e-14);
        assert!(marcum_q(0, 1.0, 1.0).is_err());
    }
}
