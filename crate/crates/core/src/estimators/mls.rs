use rand_distr::{Distribution, Gamma};
use serde::Serialize;

use super::{Diagnostics, Stopwatch};
use crate::error::{Error, Result};
use crate::exec::{Executor, Moments};
use crate::model::{gsc_statistic_in_place, ChannelConfig, EstimateResult, Method};
use crate::rng::RngStream;
use crate::samplers::uniform_index;
use crate::specfun::{ncx2_log_sf, ncx2_quantile_ln, Ncx2Params};

/// Levels `0 = t₀ < t₁ < … < t_L = 1` of the gamma-process embedding.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MlsSchedule {
    pub levels: Vec<f64>,
    /// Chains simulated per level (`s`).
    pub per_level_samples: usize,
    /// Observed conditional survival fraction at each level `1..=L`.
    pub survivor_fractions: Vec<f64>,
    /// Chain steps spent by the pilot that built the schedule.
    pub pilot_steps: u64,
    /// The pilot found the event common enough for a single level.
    pub event_not_rare: bool,
}

impl MlsSchedule {
    /// A fixed schedule; `levels` must start at 0, end at 1 and increase.
    pub fn new(levels: Vec<f64>, per_level_samples: usize) -> Result<Self> {
        let ok = levels.len() >= 2
            && levels[0] == 0.0
            && *levels.last().unwrap() == 1.0
            && levels.windows(2).all(|w| w[1] > w[0]);
        if !ok {
            return Err(Error::InvalidConfig(format!(
                "MLS levels must increase strictly from 0 to 1, got {levels:?}"
            )));
        }
        if per_level_samples < 10 {
            return Err(Error::InvalidConfig(format!(
                "MLS needs at least 10 samples per level, got {per_level_samples}"
            )));
        }
        Ok(Self {
            levels,
            per_level_samples,
            survivor_fractions: Vec::new(),
            pilot_steps: 0,
            event_not_rare: false,
        })
    }

    /// Number of levels `L`.
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }
}

/// Settings of the level-placement pilot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PilotOptions {
    pub pilot_samples: usize,
    pub target_cond_prob: f64,
    pub tolerance: f64,
    pub max_levels: usize,
}

impl Default for PilotOptions {
    fn default() -> Self {
        Self {
            pilot_samples: 10_000,
            target_cond_prob: 0.2,
            tolerance: 1e-3,
            max_levels: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MlsOptions {
    /// Chains per level (`s`).
    pub per_level_samples: usize,
    pub replications: usize,
    /// Fixed interior-and-endpoint levels; `None` runs the pilot.
    pub levels: Option<Vec<f64>>,
    pub pilot: PilotOptions,
}

impl Default for MlsOptions {
    fn default() -> Self {
        Self {
            per_level_samples: 10_000,
            replications: 50,
            levels: None,
            pilot: PilotOptions::default(),
        }
    }
}

/// Maps the gamma process `G_i(t)` to branch powers
/// `X_i(t) = F_i⁻¹(1 − e^{−G_i(t)})`.
struct Transform {
    laws: Vec<Option<Ncx2Params>>,
    /// `G_i` above this puts `X_i` above `γ_th`, hence `H` above `γ_th`.
    g_max: Vec<f64>,
    m: usize,
    gamma: f64,
}

impl Transform {
    fn new(config: &ChannelConfig) -> Result<Self> {
        let gamma = config.gamma_th();
        let mut laws = Vec::new();
        let mut g_max = Vec::new();
        for (i, &mu) in config.mu().iter().enumerate() {
            if mu == 0.0 {
                // F⁻¹(1 − e^{−g}) = g for Exp(1).
                laws.push(None);
                g_max.push(gamma);
            } else {
                let law = config.branch_law(i);
                g_max.push(-ncx2_log_sf(2.0 * gamma, &law));
                laws.push(Some(law));
            }
        }
        Ok(Self {
            laws,
            g_max,
            m: config.selected(),
            gamma,
        })
    }

    /// Whether the chain state `g` is in outage; `scratch` has length `M`.
    fn in_outage(&self, g: &[f64], scratch: &mut [f64]) -> bool {
        for (i, &gi) in g.iter().enumerate() {
            if gi > self.g_max[i] {
                return false;
            }
            scratch[i] = match &self.laws[i] {
                None => gi,
                Some(law) => 0.5 * ncx2_quantile_ln((-(-gi).exp_m1()).ln(), law),
            };
        }
        gsc_statistic_in_place(scratch, self.m) <= self.gamma
    }
}

/// Advances `n` chains from `from` (fresh at zero if `None`) by `dt` and
/// returns the survivors, flattened.
fn advance(
    tf: &Transform,
    from: Option<&[f64]>,
    dim: usize,
    dt: f64,
    n: usize,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let inc = Gamma::new(dt, 1.0)
        .map_err(|e| Error::domain("mls", format!("level increment {dt}: {e}")))?;
    let mut out = Vec::new();
    let mut g = vec![0.0; dim];
    let mut scratch = vec![0.0; dim];
    for _ in 0..n {
        match from {
            Some(pool) => {
                let j = uniform_index(pool.len() / dim, rng);
                g.copy_from_slice(&pool[j * dim..(j + 1) * dim]);
            }
            None => g.iter_mut().for_each(|v| *v = 0.0),
        }
        for gi in g.iter_mut() {
            *gi += inc.sample(rng);
        }
        if tf.in_outage(&g, &mut scratch) {
            out.extend_from_slice(&g);
        }
    }
    Ok(out)
}

/// Greedy level placement: from the current level, bisect for the largest
/// next level whose conditional survival fraction, estimated from
/// `pilot_samples` chains, still reaches `target_cond_prob`.
pub fn mls_pilot_levels(
    config: &ChannelConfig,
    options: &PilotOptions,
    rng: &RngStream,
) -> Result<MlsSchedule> {
    let target = options.target_cond_prob;
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "MLS target conditional probability must lie in (0, 1), got {target}"
        )));
    }
    let n = options.pilot_samples;
    if n < 10 {
        return Err(Error::InvalidConfig(format!(
            "MLS pilot needs at least 10 chains, got {n}"
        )));
    }
    let tf = Transform::new(config)?;
    let dim = config.antennas();
    let mut r = rng.clone();
    let mut steps = 0u64;
    let mut levels = vec![0.0];
    let mut fractions = Vec::new();
    let mut pool: Option<Vec<f64>> = None;

    loop {
        let t = *levels.last().unwrap();
        let mut eval = |t_next: f64, r: &mut RngStream| -> Result<(f64, Vec<f64>)> {
            steps += n as u64;
            let surv = advance(&tf, pool.as_deref(), dim, t_next - t, n, r)?;
            Ok(((surv.len() / dim) as f64 / n as f64, surv))
        };
        let (frac_end, surv_end) = eval(1.0, &mut r)?;
        if frac_end >= target || levels.len() > options.max_levels {
            levels.push(1.0);
            fractions.push(frac_end);
            break;
        }
        let (mut lo, mut hi) = (t, 1.0);
        let mut best: Option<(f64, f64, Vec<f64>)> = None;
        let mut hi_eval = (frac_end, surv_end);
        while hi - lo > options.tolerance {
            let mid = 0.5 * (lo + hi);
            let (frac, surv) = eval(mid, &mut r)?;
            if frac >= target {
                lo = mid;
                best = Some((mid, frac, surv));
            } else {
                hi = mid;
                hi_eval = (frac, surv);
            }
        }
        let (t_next, frac, surv) = match best {
            Some(b) => b,
            // Even the smallest step falls short; take it to keep moving.
            None => (hi, hi_eval.0, hi_eval.1),
        };
        if surv.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "MLS pilot lost every chain between t = {t} and t = {t_next}; increase pilot_samples"
            )));
        }
        levels.push(t_next);
        fractions.push(frac);
        pool = Some(surv);
    }
    let event_not_rare = levels.len() == 2;
    Ok(MlsSchedule {
        levels,
        per_level_samples: n,
        survivor_fractions: fractions,
        pilot_steps: steps,
        event_not_rare,
    })
}

/// One splitting run: the product of per-level survival fractions and the
/// per-level fractions themselves.
fn replicate(
    tf: &Transform,
    schedule: &MlsSchedule,
    dim: usize,
    rng: &mut RngStream,
) -> Result<(f64, Vec<f64>)> {
    let s = schedule.per_level_samples;
    let mut pool: Option<Vec<f64>> = None;
    let mut estimate = 1.0;
    let mut fractions = Vec::with_capacity(schedule.depth());
    for w in schedule.levels.windows(2) {
        let surv = advance(tf, pool.as_deref(), dim, w[1] - w[0], s, rng)?;
        let frac = (surv.len() / dim) as f64 / s as f64;
        estimate *= frac;
        fractions.push(frac);
        if surv.is_empty() {
            fractions.resize(schedule.depth(), 0.0);
            return Ok((0.0, fractions));
        }
        pool = Some(surv);
    }
    Ok((estimate, fractions))
}

/// Multilevel splitting over the gamma-process embedding `X(t)`, with
/// `X(1)` distributed as the channel.
///
/// `samples` in the result counts chain steps `s·L·R`, and `var_hat` is
/// the replication variance times `s·L`, so `var_hat / samples` is the
/// variance of the replication average.
pub fn estimate_mls(
    config: &ChannelConfig,
    options: &MlsOptions,
    rng: &RngStream,
    exec: &Executor,
) -> Result<EstimateResult> {
    let reps = options.replications;
    if reps < 2 {
        return Err(Error::InvalidConfig(format!(
            "MLS needs at least 2 replications, got {reps}"
        )));
    }
    let s = options.per_level_samples;
    let tf = Transform::new(config)?;
    let dim = config.antennas();
    let mut warnings = Vec::new();

    let clock = Stopwatch::start();
    let mut schedule = match &options.levels {
        Some(levels) => MlsSchedule::new(levels.clone(), s)?,
        None => {
            let pilot = mls_pilot_levels(config, &options.pilot, &rng.fork(u64::MAX))?;
            if pilot.event_not_rare {
                warnings.push("event not rare; MLS reduced to a single level".to_string());
            }
            MlsSchedule {
                per_level_samples: s,
                ..pilot
            }
        }
    };
    if s < 10 {
        return Err(Error::InvalidConfig(format!(
            "MLS needs at least 10 samples per level, got {s}"
        )));
    }
    let runs = exec.map(reps, |k| {
        replicate(&tf, &schedule, dim, &mut rng.fork(k as u64))
    });
    let wall = clock.seconds();

    let depth = schedule.depth();
    let mut acc = Moments::default();
    let mut estimates = Vec::with_capacity(reps);
    let mut mean_fractions = vec![0.0; depth];
    let mut zero = 0;
    for run in runs {
        let (est, fr) = run?;
        if est == 0.0 {
            zero += 1;
        }
        acc.push(est);
        estimates.push(est);
        for (a, f) in mean_fractions.iter_mut().zip(&fr) {
            *a += f / reps as f64;
        }
    }
    if zero > 0 {
        warnings.push(format!("{zero} of {reps} replications lost all chains"));
    }
    let steps_per_rep = (s * depth) as u64;
    let samples = steps_per_rep * reps as u64;
    let pilot_steps = schedule.pilot_steps;
    schedule.survivor_fractions = mean_fractions;
    Ok(EstimateResult {
        method: Method::Mls,
        p_hat: acc.mean,
        var_hat: acc.sample_variance() * steps_per_rep as f64,
        samples,
        wall_time_s: wall,
        seed: rng.seed(),
        work_units: (samples + pilot_steps) * dim as u64,
        warnings,
        diagnostics: Diagnostics::Mls {
            schedule,
            replications: reps,
            zero_replications: zero,
            replication_estimates: estimates,
        },
    })
}
